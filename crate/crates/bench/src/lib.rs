//! Benchmark fixtures.

use dmd_core::game::monotone_quadratic;
use dmd_core::{ActionSet, FlowSpec, Game, Regularizer, RegularizerProfile};

/// The monotone two-player game on `[-100, 100]^2`.
pub fn monotone_game() -> Game {
    let set = ActionSet::cube(1, -100.0, 100.0).expect("valid box");
    Game::quadratic(monotone_quadratic(), vec![set.clone(), set]).expect("valid game")
}

/// One regularizer per player, each matched to the fixture game's box.
pub fn profile(kind: &str, epsilon: f64) -> RegularizerProfile {
    let reg = match kind {
        "euclidean" => Regularizer::euclidean(ActionSet::cube(1, -100.0, 100.0).unwrap(), epsilon),
        "fermi_dirac" => Regularizer::fermi_dirac(1, -100.0, 100.0, epsilon),
        "hellinger" => Regularizer::hellinger(vec![0.0], 100.0, epsilon),
        other => panic!("no fixture for {other}"),
    }
    .expect("valid regularizer");
    RegularizerProfile::new(vec![reg.clone(), reg]).expect("valid profile")
}

pub fn dmd_flow(kind: &str) -> FlowSpec {
    let regs = profile(kind, 0.5);
    let game = Game::quadratic(monotone_quadratic(), regs.domains()).expect("valid game");
    FlowSpec::dmd(game, regs, 1.0, vec![0.0, 0.0]).expect("valid flow")
}

/// Seeded dual points in `[-10, 10]^dim`.
pub fn dual_points(dim: usize, count: usize) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect())
        .collect()
}
