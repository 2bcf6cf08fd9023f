//! Minimal numeric CSV writing and reading for trajectories and runs.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Formats `v` with `sig` significant digits, `%g` style: fixed notation
/// for moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn format_sig(v: f64, sig: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    // exponent after rounding to `sig` digits
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= sig as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub(crate) fn write_row<W: Write>(w: &mut W, fields: &[String]) -> Result<()> {
    writeln!(w, "{}", fields.join(","))?;
    Ok(())
}

pub(crate) fn parse_field(s: &str) -> Result<f64> {
    let s = s.trim();
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}"))),
    }
}

/// Reads a header and rows of numbers (empty fields become `None`).
pub(crate) fn read_table<R: BufRead>(r: R) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::Parse("empty CSV".into())),
    };
    let header: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                if f.trim().is_empty() {
                    Ok(None)
                } else {
                    parse_field(f).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!(
                "row {} has {} fields, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_percent_g() {
        assert_eq!(format_sig(0.0, 12), "0");
        assert_eq!(format_sig(1.0, 12), "1");
        assert_eq!(format_sig(-24.390243902439025, 12), "-24.3902439024");
        assert_eq!(format_sig(1e-7, 12), "1e-7");
        assert_eq!(format_sig(1.5e20, 12), "1.5e20");
        assert_eq!(format_sig(123456.0, 12), "123456");
        assert_eq!(format_sig(0.001, 12), "0.001");
        assert_eq!(format_sig(f64::NAN, 12), "nan");
    }

    #[test]
    fn round_trips_to_twelve_digits() {
        for v in [std::f64::consts::PI, -1e-300, 6.02214076e23, 0.1 + 0.2, 999999999999.5] {
            let back = parse_field(&format_sig(v, 12)).unwrap();
            assert!(((back - v) / v).abs() <= 5e-12, "{v} -> {back}");
        }
    }

    #[test]
    fn rejects_ragged_rows() {
        let data = "a,b\n1,2\n3\n";
        assert!(read_table(data.as_bytes()).is_err());
        let (h, rows) = read_table("a,b\n1,\n".as_bytes()).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows[0], vec![Some(1.0), None]);
    }
}
