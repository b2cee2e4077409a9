//! CSV emission with fixed 9-significant-digit formatting.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use leo_irs::experiments::ResultRow;

pub const HEADER: &str = "variable,scheme,value,gamma,rate_bps_hz,trials,seed";

/// Shortest of fixed or scientific notation carrying 9 significant digits,
/// with trailing zeros removed.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.variable,
            r.scheme,
            format_sig(r.value),
            format_sig(r.gamma),
            format_sig(r.rate_bps_hz),
            r.trials,
            r.seed
        )?;
    }
    out.flush()
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(rows, &mut w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use leo_irs::experiments::SweepVariable;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(-2.5), "-2.5");
        assert_eq!(format_sig(7.123456789123), "7.12345679");
        assert_eq!(format_sig(1.6421328415305571e-10), "1.64213284e-10");
        assert_eq!(format_sig(123456789012.0), "1.23456789e11");
        assert_eq!(format_sig(2800.0), "2800");
        assert_eq!(format_sig(f64::INFINITY), "inf");
        assert_eq!(format_sig(0.000123), "0.000123");
    }

    #[test]
    fn header_only_for_no_rows() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{HEADER}\n"));
    }

    #[test]
    fn rows_are_newline_terminated() {
        let row = ResultRow {
            variable: SweepVariable::TxPower,
            scheme: "two_sided".into(),
            value: 30.0,
            gamma: 1.5e-10,
            rate_bps_hz: 7.25,
            trials: 10,
            seed: 3,
        };
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "tx_power,two_sided,30,1.5e-10,7.25,10,3");
        assert!(text.ends_with('\n'));
    }
}
