use crate::error::{Error, Result};
use crate::params::SeriesControl;

/// A truncated series value together with the number of terms summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub terms: usize,
}

/// Sums `term(0) + term(1) + ...` until two consecutive terms are both below
/// `tail_tolerance·(1 + |partial sum|)`.
pub(crate) fn sum_series(ctrl: &SeriesControl, mut term: impl FnMut(usize) -> f64) -> Result<SeriesSum> {
    ctrl.validate()?;
    let mut sum = 0.0;
    let mut small = 0;
    let mut last = f64::INFINITY;
    for n in 0..ctrl.max_terms {
        let t = term(n);
        sum += t;
        last = t.abs();
        if last < ctrl.tail_tolerance * (1.0 + sum.abs()) {
            small += 1;
            if small >= 2 && n >= 2 {
                return Ok(SeriesSum { value: sum, terms: n + 1 });
            }
        } else {
            small = 0;
        }
    }
    Err(Error::Truncation { terms: ctrl.max_terms, last_term: last })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric() {
        let s = sum_series(&SeriesControl::default(), |n| 0.5f64.powi(n as i32)).unwrap();
        assert!((s.value - 2.0).abs() < 1e-11);
    }

    #[test]
    fn truncation_carries_last_term() {
        let ctrl = SeriesControl::default().with_max_terms(10);
        match sum_series(&ctrl, |n| 1.0 / (n + 1) as f64) {
            Err(Error::Truncation { terms, last_term }) => {
                assert_eq!(terms, 10);
                assert!((last_term - 0.1).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn leading_zero_terms_do_not_stop_early() {
        let s = sum_series(&SeriesControl::default(), |n| if n < 2 { 0.0 } else { 0.1f64.powi(n as i32) })
            .unwrap();
        assert!((s.value - 0.01 / 0.9).abs() < 1e-13);
    }
}
