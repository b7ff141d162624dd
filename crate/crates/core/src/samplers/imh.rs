use crate::classifier::Posterior;
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::points::Points;
use crate::ratio::RatioEstimator;
use crate::rng::RngStream;

use super::{ChainResult, SampleMeta, SamplerKind};

#[derive(Clone, Debug, Default, PartialEq)]
pub enum ImhInit {
    /// First proposal draw becomes the initial state.
    #[default]
    FromProposal,
    Point(Vec<f64>),
}

/// `min(1, ratio(x*) / ratio(x_t))`. The `n0 / n1` prefactor cancels, so
/// only the clamped log-odds enter.
pub fn imh_acceptance<P: Posterior>(est: &RatioEstimator<P>, x_star: &[f64], x_t: &[f64]) -> f64 {
    (est.log_odds(x_star).value - est.log_odds(x_t).value).min(0.0).exp()
}

/// Independent Metropolis-Hastings on the estimated ratio.
///
/// `burn_in` defaults to 10% of `n_steps`. The returned states are the
/// chain after steps `burn_in + 1 ..= n_steps`. A uniform is drawn only
/// when the acceptance probability is below one, so a constant ratio
/// reproduces the proposal stream exactly.
pub fn imh_chain<P: Posterior>(
    est: &RatioEstimator<P>,
    proposal: &Distribution,
    n_steps: usize,
    burn_in: Option<usize>,
    init: ImhInit,
    rng: &mut RngStream,
) -> Result<ChainResult> {
    let burn_in = burn_in.unwrap_or(n_steps / 10);
    if n_steps <= burn_in {
        return Err(Error::invalid(format!("n_steps {n_steps} must exceed burn_in {burn_in}")));
    }
    let d = proposal.dim();
    let mut meta = SampleMeta {
        sampler: Some(SamplerKind::Imh),
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        ..SampleMeta::default()
    };
    let mut current = match init {
        ImhInit::FromProposal => proposal.sample_one(rng),
        ImhInit::Point(x) => {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: x.len(),
                });
            }
            x
        }
    };
    let first = est.log_odds(&current);
    meta.clamp_events += first.clamped as usize;
    let mut current_lo = first.value;

    let mut states = Points::with_capacity(d, n_steps - burn_in);
    let mut candidate = Vec::with_capacity(d);
    for t in 0..n_steps {
        candidate.clear();
        proposal.sample_into(rng, &mut candidate);
        meta.n_proposed += 1;
        let lo = est.log_odds(&candidate);
        meta.clamp_events += lo.clamped as usize;
        let log_alpha = lo.value - current_lo;
        let accept = log_alpha >= 0.0 || rng.uniform() < log_alpha.exp();
        if accept {
            std::mem::swap(&mut current, &mut candidate);
            current_lo = lo.value;
            meta.n_accepted += 1;
        }
        if t >= burn_in {
            states.push(&current);
        }
    }
    meta.acceptance_rate = meta.n_accepted as f64 / n_steps as f64;
    Ok(ChainResult {
        states,
        acceptance_rate: meta.acceptance_rate,
        burn_in,
        meta,
    })
}
