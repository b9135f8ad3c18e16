//! Number formatting for CSV output.

/// `x` with `digits` significant digits, `%g` style: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros removed.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::sig;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(1.01, 9), "1.01");
        assert_eq!(sig(0.1 + 0.2, 9), "0.3");
        assert_eq!(sig(123456789.4, 9), "123456789");
        assert_eq!(sig(1234567890.0, 9), "1.23456789e9");
        assert_eq!(sig(1.5e-7, 9), "1.5e-7");
        assert_eq!(sig(-61.73, 9), "-61.73");
        assert_eq!(sig(0.0, 9), "0");
    }
}
