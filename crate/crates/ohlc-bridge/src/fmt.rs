//! Number formatting shared by every text output.

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Shortest of fixed or exponent notation carrying 12 significant digits,
/// with trailing zeros removed.
pub fn sig12(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let e = format!("{v:.11e}");
    let (mant, exp) = e.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{:.*}", (11 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mant))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(100.5), "100.5");
        assert_eq!(sig12(-0.25), "-0.25");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(1e-9), "1e-9");
        assert_eq!(sig12(123456789012345.0), "1.23456789012e14");
        assert_eq!(sig12(f64::NAN), "NaN");
    }

    proptest! {
        #[test]
        fn twelve_digit_relative_accuracy(v in prop::num::f64::NORMAL) {
            let back: f64 = sig12(v).parse().unwrap();
            prop_assert!(((back - v) / v).abs() <= 5e-12);
        }
    }
}
