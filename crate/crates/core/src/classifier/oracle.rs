use crate::distributions::Distribution;
use crate::error::{Error, Result};

use super::Posterior;

/// The exact posterior `n1 p1(x) / (n1 p1(x) + n0 p0(x))` from closed-form
/// densities, evaluated as a log-odds.
#[derive(Clone, Debug)]
pub struct OraclePosterior {
    p1: Distribution,
    p0: Distribution,
    log_prior_odds: f64,
}

impl OraclePosterior {
    pub fn new(p1: Distribution, p0: Distribution, n1: usize, n0: usize) -> Result<Self> {
        for d in [&p1, &p0] {
            if !d.has_density() {
                return Err(Error::UnsupportedDensity(d.name()));
            }
        }
        if p1.dim() != p0.dim() {
            return Err(Error::DimensionMismatch {
                expected: p1.dim(),
                found: p0.dim(),
            });
        }
        if n1 == 0 || n0 == 0 {
            return Err(Error::invalid("oracle posterior needs n1, n0 >= 1"));
        }
        Ok(Self {
            p1,
            p0,
            log_prior_odds: (n1 as f64).ln() - (n0 as f64).ln(),
        })
    }

    pub fn target(&self) -> &Distribution {
        &self.p1
    }

    pub fn instrumental(&self) -> &Distribution {
        &self.p0
    }

    /// `log p1(x) - log p0(x)`.
    pub fn log_density_ratio(&self, x: &[f64]) -> f64 {
        self.p1.log_pdf(x).expect("checked at construction")
            - self.p0.log_pdf(x).expect("checked at construction")
    }
}

impl Posterior for OraclePosterior {
    fn logit(&self, x: &[f64]) -> f64 {
        self.log_prior_odds + self.log_density_ratio(x)
    }
}
