//! Ratio-driven samplers. Every sampler takes a [`RatioEstimator`], so an
//! oracle posterior and a trained classifier are interchangeable.
//!
//! [`RatioEstimator`]: crate::ratio::RatioEstimator

mod ar;
mod imh;
mod importance;
mod mixture;
mod sir;

pub use ar::{ar_sample, ar_sample_parallel, DEFAULT_BUDGET_FACTOR};
pub use imh::{imh_acceptance, imh_chain, ImhInit};
pub use importance::{is_estimate, IsEstimate};
pub use mixture::{mixture_decomposition_check, MixtureCheck};
pub use sir::{resample_indices, sir_sample, ResamplingScheme, SirOutput};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Ar,
    Imh,
    Sir,
    Is,
}

/// Provenance and bookkeeping attached to every sampler output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sampler: Option<SamplerKind>,
    pub seed: u64,
    pub stream_id: u64,
    pub n_proposed: usize,
    pub n_accepted: usize,
    pub acceptance_rate: f64,
    /// Envelope constant after the run (AR only).
    pub c_final: Option<f64>,
    /// Envelope constant the run started from (AR only).
    pub c_initial: Option<f64>,
    /// Proposals whose posterior hit the clamp.
    pub clamp_events: usize,
    /// AR proposals whose ratio exceeded the current envelope, so that the
    /// acceptance probability was capped at 1.
    pub cap_events: usize,
    pub budget_exhausted: bool,
    pub degenerate_weights: bool,
    pub ess: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub points: Points,
    /// Normalized weights, when the set is weighted.
    pub weights: Option<Vec<f64>>,
    pub meta: SampleMeta,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainResult {
    /// States after burn-in, one per step.
    pub states: Points,
    pub acceptance_rate: f64,
    pub burn_in: usize,
    pub meta: SampleMeta,
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A named scalar function whose expectation is estimated.
pub struct Integrand {
    name: String,
    f: ScalarFn,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand").field("name", &self.name).finish()
    }
}

impl Integrand {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }

    pub fn one() -> Self {
        Self::new("1", |_| 1.0)
    }

    /// `x_j ^ power`.
    pub fn coordinate_power(j: usize, power: i32) -> Self {
        let name = if power == 1 { format!("x{j}") } else { format!("x{j}^{power}") };
        Self::new(name, move |x| x[j].powi(power))
    }

    /// Parses `1`, `xJ` or `xJ^P`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "1" {
            return Ok(Self::one());
        }
        let bad = || Error::invalid(format!("unknown integrand `{spec}` (expected 1, xJ or xJ^P)"));
        let rest = spec.strip_prefix('x').ok_or_else(bad)?;
        let (j, p) = match rest.split_once('^') {
            Some((j, p)) => (j, p.parse::<i32>().map_err(|_| bad())?),
            None => (rest, 1),
        };
        let j = j.parse::<usize>().map_err(|_| bad())?;
        Ok(Self::coordinate_power(j, p))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrand_parsing() {
        assert_eq!(Integrand::parse("1").unwrap().eval(&[5.0]), 1.0);
        let f = Integrand::parse("x1^2").unwrap();
        assert_eq!(f.name(), "x1^2");
        assert_eq!(f.eval(&[5.0, 3.0]), 9.0);
        assert_eq!(Integrand::parse("x0").unwrap().eval(&[-2.0]), -2.0);
        assert!(Integrand::parse("y2").is_err());
        assert!(Integrand::parse("x^2").is_err());
    }
}
