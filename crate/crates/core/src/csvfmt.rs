//! Number formatting shared by every CSV writer.

use std::io::{self, Write};

/// Decimal rendering with `digits` significant digits, `.` separator,
/// fixed notation for moderate magnitudes and exponent notation otherwise.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // exponent after rounding to `digits` significant digits
    let p = digits - 1;
    let sci = format!("{x:.p$e}");
    let (mant, e) = sci.split_once('e').expect("exponent present");
    let exp: i32 = e.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (p as i32 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mant.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub const CSV_DIGITS: usize = 12;

pub fn num(x: f64) -> String {
    format_sig(x, CSV_DIGITS)
}

/// RFC 4180 field quoting.
pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_row<W: Write>(w: &mut W, fields: &[String]) -> io::Result<()> {
    let line: Vec<String> = fields.iter().map(|f| field(f)).collect();
    write!(w, "{}\r\n", line.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits_round_trip() {
        for x in [1.0325451234567, -0.000123456789012, 2856.123456789, 1.5e-9, 6.02e23, 0.5, 9.9999999999999] {
            let s = num(x);
            let y: f64 = s.parse().unwrap();
            assert!(((x - y) / x).abs() < 1e-11, "{x} -> {s}");
        }
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(-2.0), "-2");
        assert_eq!(field("a,b"), "\"a,b\"");
    }
}
