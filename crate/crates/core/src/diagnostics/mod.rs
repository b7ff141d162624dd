//! Statistical checks on sampler output and classifier quality.

mod grid;
mod kl;
mod ks;

pub use grid::{Axis, Grid};
pub use kl::{kl_bce_consistency, KlBceReport};
pub use ks::{kolmogorov_survival, ks_two_sample, two_sample_report, KsResult, MarginalReport, ProjectionReport, TwoSampleReport};

use crate::error::{Error, Result};

/// Effective sample size `(sum w)^2 / sum w^2` of nonnegative weights.
pub fn ess(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let s: f64 = weights.iter().sum();
    if s == 0.0 {
        return Err(Error::AllZeroWeights);
    }
    // Rescale so large weights cannot overflow the squares.
    let max = weights.iter().copied().fold(0.0, f64::max);
    let (s, s2) = weights
        .iter()
        .map(|w| w / max)
        .fold((0.0, 0.0), |(a, b), w| (a + w, b + w * w));
    Ok(s * s / s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ess_reference_values() {
        assert!((ess(&[1.0; 100]).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(ess(&[0.0, 0.0, 3.0, 0.0]).unwrap(), 1.0);
        assert!((ess(&[1.0, 1.0, 2.0]).unwrap() - 16.0 / 6.0).abs() < 1e-12);
        assert!(matches!(ess(&[0.0, 0.0]), Err(Error::AllZeroWeights)));
        assert!(ess(&[1.0, -1.0]).is_err());
    }

    proptest! {
        #[test]
        fn ess_bounds(w in proptest::collection::vec(0.0f64..1e3, 1..60)) {
            prop_assume!(w.iter().any(|&v| v > 0.0));
            let e = ess(&w).unwrap();
            let n = w.len() as f64;
            prop_assert!(e >= 1.0 - 1e-12 && e <= n + 1e-9);
            let positive: Vec<f64> = w.iter().copied().filter(|&v| v > 0.0).collect();
            let all_equal = positive.iter().all(|&v| v == positive[0]);
            if all_equal && positive.len() == w.len() {
                prop_assert!((e - n).abs() < 1e-9 * n);
            }
            if !all_equal {
                prop_assert!(e < n);
            }
        }
    }
}
