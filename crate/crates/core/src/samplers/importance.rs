use serde::{Deserialize, Serialize};

use crate::classifier::Posterior;
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::ratio::RatioEstimator;
use crate::rng::RngStream;

use super::Integrand;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsEstimate {
    pub estimate: f64,
    /// Delta-method standard error of the ratio estimator.
    pub std_error: f64,
    pub ess: f64,
    pub n: usize,
    pub clamp_events: usize,
}

/// Self-normalized importance sampling of `E_target[f]` with weights from
/// the estimated ratio: `sum w_i f(x_i) / sum w_i`, `x_i ~ proposal`.
pub fn is_estimate<P: Posterior>(
    est: &RatioEstimator<P>,
    proposal: &Distribution,
    f: &Integrand,
    n: usize,
    rng: &mut RngStream,
) -> Result<IsEstimate> {
    if n < 2 {
        return Err(Error::invalid("is_estimate needs n >= 2"));
    }
    let mut clamp_events = 0;
    let mut log_w = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(proposal.dim());
    for _ in 0..n {
        x.clear();
        proposal.sample_into(rng, &mut x);
        let lo = est.log_odds(&x);
        clamp_events += lo.clamped as usize;
        log_w.push(lo.value);
        values.push(f.eval(&x));
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let sum_w: f64 = w.iter().sum();
    let weighted: f64 = w.iter().zip(&values).map(|(wi, fi)| wi * fi).sum();
    let estimate = weighted / sum_w;
    let var: f64 = w
        .iter()
        .zip(&values)
        .map(|(wi, fi)| (wi / sum_w).powi(2) * (fi - estimate).powi(2))
        .sum();
    let sum_sq: f64 = w.iter().map(|wi| wi * wi).sum();
    Ok(IsEstimate {
        estimate,
        std_error: var.sqrt(),
        ess: sum_w * sum_w / sum_sq,
        n,
        clamp_events,
    })
}
