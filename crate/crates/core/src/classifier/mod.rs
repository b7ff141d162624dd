//! Class posteriors `r(x) = P(k = 1 | x)`.
//!
//! Every posterior is evaluated through its logit `log(r / (1 - r))`, which
//! is exactly what the density-ratio estimator consumes. Clamping `r` into
//! `[eps, 1 - eps]` is the same as clamping the logit into
//! `[-L, L]` with `L = log((1 - eps) / eps)`.

mod mlp;
mod oracle;
mod train;

pub use mlp::{grad_bce, Activation, MlpClassifier, Standardizer};
pub use oracle::OraclePosterior;
pub use train::{train, EpochLoss, LossTrace, Optimizer, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{sigmoid, softplus};

/// Default clamp on posterior probabilities.
pub const DEFAULT_CLAMP_EPS: f64 = 1e-7;

pub trait Posterior {
    /// Unclamped log-odds `log(r(x) / (1 - r(x)))`.
    fn logit(&self, x: &[f64]) -> f64;

    fn posterior(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}

impl<P: Posterior + ?Sized> Posterior for &P {
    fn logit(&self, x: &[f64]) -> f64 {
        (**self).logit(x)
    }
}

impl<P: Posterior + ?Sized> Posterior for Box<P> {
    fn logit(&self, x: &[f64]) -> f64 {
        (**self).logit(x)
    }
}

impl<P: Posterior + ?Sized> Posterior for std::sync::Arc<P> {
    fn logit(&self, x: &[f64]) -> f64 {
        (**self).logit(x)
    }
}

/// Largest admissible |logit| after clamping `r` into `[eps, 1 - eps]`.
pub fn logit_bound(eps: f64) -> f64 {
    ((1.0 - eps) / eps).ln()
}

/// A posterior that ignores its input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantPosterior {
    logit: f64,
}

impl ConstantPosterior {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::invalid(format!("constant posterior {r} not in (0,1)")));
        }
        Ok(Self {
            logit: (r / (1.0 - r)).ln(),
        })
    }

    /// The posterior `a / (a + b)` of two positive masses, kept as the
    /// log-odds `log a - log b` so that `1 - r` never cancels.
    pub fn from_masses(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid(format!("masses ({a}, {b}) must be positive")));
        }
        Ok(Self {
            logit: a.ln() - b.ln(),
        })
    }

    pub fn half() -> Self {
        Self { logit: 0.0 }
    }

    pub fn from_logit(logit: f64) -> Self {
        Self { logit }
    }
}

impl Posterior for ConstantPosterior {
    fn logit(&self, _x: &[f64]) -> f64 {
        self.logit
    }
}

/// The posteriors the pipeline knows how to build and persist.
#[derive(Clone, Debug)]
pub enum PosteriorFn {
    Mlp(MlpClassifier),
    Oracle(OraclePosterior),
    Constant(ConstantPosterior),
}

impl Posterior for PosteriorFn {
    fn logit(&self, x: &[f64]) -> f64 {
        match self {
            PosteriorFn::Mlp(m) => m.logit(x),
            PosteriorFn::Oracle(o) => o.logit(x),
            PosteriorFn::Constant(c) => c.logit(x),
        }
    }
}

impl From<MlpClassifier> for PosteriorFn {
    fn from(m: MlpClassifier) -> Self {
        PosteriorFn::Mlp(m)
    }
}

impl From<OraclePosterior> for PosteriorFn {
    fn from(o: OraclePosterior) -> Self {
        PosteriorFn::Oracle(o)
    }
}

impl From<ConstantPosterior> for PosteriorFn {
    fn from(c: ConstantPosterior) -> Self {
        PosteriorFn::Constant(c)
    }
}

/// Binary cross-entropy summed over `ds`, with `r` clamped into
/// `[eps, 1 - eps]`:
/// `-sum_{k=1} log r(x) - sum_{k=0} log(1 - r(x))`.
pub fn bce_loss_with_eps<P: Posterior + ?Sized>(posterior: &P, ds: &LabeledDataset, eps: f64) -> f64 {
    let bound = logit_bound(eps);
    ds.iter()
        .map(|(x, k)| {
            let l = posterior.logit(x).clamp(-bound, bound);
            if k == 1 {
                softplus(-l)
            } else {
                softplus(l)
            }
        })
        .sum()
}

pub fn bce_loss<P: Posterior + ?Sized>(posterior: &P, ds: &LabeledDataset) -> f64 {
    bce_loss_with_eps(posterior, ds, DEFAULT_CLAMP_EPS)
}

/// Fraction of points whose label matches `r(x) >= 0.5`.
pub fn accuracy<P: Posterior + ?Sized>(posterior: &P, ds: &LabeledDataset) -> f64 {
    let hits = ds
        .iter()
        .filter(|(x, k)| (posterior.logit(x) >= 0.0) == (*k == 1))
        .count();
    hits as f64 / ds.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::Points;

    #[test]
    fn constant_half_loss_is_n_log2() {
        let ds = LabeledDataset::new(
            Points::from_scalars(&[0.1, -2.0, 3.0, 4.0, 5.0]),
            vec![1, 0, 0, 1, 1],
        )
        .unwrap();
        let loss = bce_loss(&ConstantPosterior::half(), &ds);
        assert!((loss - 5.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_separable_loss_is_clamp_floor() {
        struct Sign;
        impl Posterior for Sign {
            fn logit(&self, x: &[f64]) -> f64 {
                1e6 * x[0]
            }
        }
        let ds = LabeledDataset::new(Points::from_scalars(&[1.0, 2.0, -1.0, -3.0]), vec![1, 1, 0, 0])
            .unwrap();
        let loss = bce_loss(&Sign, &ds);
        let floor = 4.0 * -(1.0 - DEFAULT_CLAMP_EPS).ln();
        assert!((loss - floor).abs() < 1e-12, "{loss} vs {floor}");
        assert!(loss < 1e-6);
    }

    #[test]
    fn masses_give_posterior() {
        let c = ConstantPosterior::from_masses(3.0, 1.0).unwrap();
        assert!((c.posterior(&[]) - 0.75).abs() < 1e-15);
        assert!(ConstantPosterior::from_masses(0.0, 1.0).is_err());
    }

    #[test]
    fn constant_posterior_round_trips_probability() {
        let c = ConstantPosterior::new(0.75).unwrap();
        assert!((c.posterior(&[0.0]) - 0.75).abs() < 1e-15);
        assert!(ConstantPosterior::new(1.0).is_err());
    }
}
