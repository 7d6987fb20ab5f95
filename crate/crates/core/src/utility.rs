//! Logarithmic video-streaming utility.

use crate::config::SystemConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParams {
    pub theta: f64,
    pub beta: f64,
    /// Playback rate in b/s/Hz.
    pub rbar: f64,
}

impl UtilityParams {
    pub fn new(theta: f64, beta: f64, rbar: f64) -> Result<Self> {
        for (name, v) in [("theta", theta), ("beta", beta), ("rbar", rbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self { theta, beta, rbar })
    }

    pub fn from_config(config: &SystemConfig) -> Self {
        Self { theta: config.utility_theta, beta: config.utility_beta, rbar: config.playback_rate }
    }

    /// Unchecked per-user utility; callers guarantee `rate > 0`.
    #[inline]
    pub(crate) fn eval(&self, rate: f64) -> f64 {
        self.theta * (self.beta * rate / self.rbar).ln()
    }
}

/// `theta ln(beta R / rbar)`.
pub fn user_utility(rate: f64, params: &UtilityParams) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::Domain(format!("utility needs a positive rate, got {rate}")));
    }
    Ok(params.eval(rate))
}

/// Mean of [`user_utility`] over all users.
pub fn average_utility(rates: &[f64], params: &UtilityParams) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::Domain("average utility over zero users".into()));
    }
    let mut total = 0.0;
    for &r in rates {
        total += user_utility(r, params)?;
    }
    Ok(total / rates.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_params() -> UtilityParams {
        UtilityParams::new(0.8, 100.0, 1.0).unwrap()
    }

    #[test]
    fn unit_argument_gives_zero() {
        let p = paper_params();
        assert_eq!(user_utility(0.01, &p).unwrap(), 0.0);
    }

    #[test]
    fn rate_at_playback() {
        let u = user_utility(1.0, &paper_params()).unwrap();
        assert!((u - 0.8 * 100f64.ln()).abs() < 1e-12);
        assert!((u - 3.6841).abs() < 1e-4);
    }

    #[test]
    fn domain_errors() {
        let p = paper_params();
        assert!(user_utility(0.0, &p).is_err());
        assert!(user_utility(-1.0, &p).is_err());
        assert!(average_utility(&[1.0, 0.0], &p).is_err());
        assert!(average_utility(&[], &p).is_err());
        assert!(UtilityParams::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn average_examples() {
        let p = paper_params();
        let avg = average_utility(&[0.01, 1.0], &p).unwrap();
        assert!((avg - 1.84205).abs() < 1e-4);
        assert!((avg - 0.4 * 100f64.ln()).abs() < 1e-12);
        let one = user_utility(0.37, &p).unwrap();
        assert!((average_utility(&[0.37; 5], &p).unwrap() - one).abs() < 1e-14);
    }

    #[test]
    fn increasing_and_concave_on_grid() {
        let p = paper_params();
        let u: Vec<f64> = (1..400).map(|i| user_utility(i as f64 * 0.01, &p).unwrap()).collect();
        assert!(u.windows(2).all(|w| w[1] > w[0]));
        assert!(u.windows(3).all(|w| w[2] - w[1] <= w[1] - w[0]));
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut rates in prop::collection::vec(0.001..10.0f64, 1..12), seed in 0usize..100) {
            let p = paper_params();
            let a = average_utility(&rates, &p).unwrap();
            let n = rates.len();
            rates.rotate_left(seed % n);
            rates.reverse();
            prop_assert!((average_utility(&rates, &p).unwrap() - a).abs() < 1e-12);
        }

        #[test]
        fn midpoint_concavity(a in prop::collection::vec(0.001..10.0f64, 4), b in prop::collection::vec(0.001..10.0f64, 4)) {
            let p = paper_params();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let lhs = average_utility(&mid, &p).unwrap();
            let rhs = 0.5 * (average_utility(&a, &p).unwrap() + average_utility(&b, &p).unwrap());
            prop_assert!(lhs >= rhs - 1e-12);
        }

        #[test]
        fn scaling_adds_log(rates in prop::collection::vec(0.001..10.0f64, 1..8), c in 0.01..100.0f64) {
            let p = paper_params();
            let scaled: Vec<f64> = rates.iter().map(|r| r * c).collect();
            let diff = average_utility(&scaled, &p).unwrap() - average_utility(&rates, &p).unwrap();
            prop_assert!((diff - p.theta * c.ln()).abs() < 1e-10);
        }
    }
}
