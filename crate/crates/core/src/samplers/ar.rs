use crate::classifier::Posterior;
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::points::Points;
use crate::ratio::{EnvelopeConstant, RatioEstimator};
use crate::rng::RngStream;

use super::{SampleMeta, SampleSet, SamplerKind};

/// Proposal budget per requested sample when none is given.
pub const DEFAULT_BUDGET_FACTOR: usize = 100;

/// Acceptance-rejection with the estimated ratio.
///
/// Each proposal `x` is accepted with probability
/// `min(1, ratio_hat(x) / C)`, where `C` is the envelope *before* `x` is
/// offered to it; the envelope is updated afterwards. Stops after
/// `n_target` acceptances or `max_proposals` draws (`100 * n_target` by
/// default), flagging `budget_exhausted` in the latter case.
pub fn ar_sample<P: Posterior>(
    est: &RatioEstimator<P>,
    envelope: &EnvelopeConstant,
    proposal: &Distribution,
    n_target: usize,
    max_proposals: Option<usize>,
    rng: &mut RngStream,
) -> Result<SampleSet> {
    if n_target == 0 {
        return Err(Error::invalid("ar_sample needs n_target >= 1"));
    }
    if !(envelope.value() > 0.0) || !envelope.log_value().is_finite() {
        return Err(Error::invalid("envelope constant must be positive and finite"));
    }
    let budget = max_proposals.unwrap_or(DEFAULT_BUDGET_FACTOR.saturating_mul(n_target));
    let mut c = envelope.clone();
    let mut points = Points::with_capacity(proposal.dim(), n_target);
    let mut meta = SampleMeta {
        sampler: Some(SamplerKind::Ar),
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        c_initial: Some(envelope.value()),
        ..SampleMeta::default()
    };
    let log_prefactor = (est.n0() as f64).ln() - (est.n1() as f64).ln();
    let mut x = Vec::with_capacity(proposal.dim());
    while meta.n_accepted < n_target && meta.n_proposed < budget {
        x.clear();
        proposal.sample_into(rng, &mut x);
        meta.n_proposed += 1;
        let odds = est.log_odds(&x);
        meta.clamp_events += odds.clamped as usize;
        let log_ratio = log_prefactor + odds.value;
        let log_alpha = log_ratio - c.log_value();
        if log_alpha > 0.0 {
            meta.cap_events += 1;
        }
        let u = rng.uniform();
        if u < log_alpha.min(0.0).exp() {
            points.push(&x);
            meta.n_accepted += 1;
        }
        c.update_with_log_ratio(&x, log_ratio);
    }
    meta.budget_exhausted = meta.n_accepted < n_target;
    meta.acceptance_rate = meta.n_accepted as f64 / meta.n_proposed as f64;
    meta.c_final = Some(c.value());
    Ok(SampleSet {
        points,
        weights: None,
        meta,
    })
}

/// Runs `workers` independent AR samplers on streams
/// `(seed, first_stream + w)` and concatenates their outputs in worker
/// order. Each worker keeps its own envelope; the reported final envelope
/// is their max.
#[allow(clippy::too_many_arguments)]
pub fn ar_sample_parallel<P: Posterior + Sync>(
    est: &RatioEstimator<P>,
    envelope: &EnvelopeConstant,
    proposal: &Distribution,
    n_target: usize,
    max_proposals: Option<usize>,
    seed: u64,
    first_stream: u64,
    workers: usize,
) -> Result<SampleSet> {
    if workers == 0 {
        return Err(Error::invalid("need at least one worker"));
    }
    let share = |w: usize| n_target / workers + usize::from(w < n_target % workers);
    let results: Vec<Result<SampleSet>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .filter(|&w| share(w) > 0)
            .map(|w| {
                let budget = max_proposals.map(|b| b / workers);
                s.spawn(move || {
                    let mut rng = RngStream::new(seed, first_stream + w as u64);
                    ar_sample(est, envelope, proposal, share(w), budget, &mut rng)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut merged: Option<SampleSet> = None;
    for r in results {
        let part = r?;
        merged = Some(match merged {
            None => part,
            Some(mut acc) => {
                acc.points.extend(&part.points);
                let m = &mut acc.meta;
                m.n_proposed += part.meta.n_proposed;
                m.n_accepted += part.meta.n_accepted;
                m.clamp_events += part.meta.clamp_events;
                m.cap_events += part.meta.cap_events;
                m.budget_exhausted |= part.meta.budget_exhausted;
                m.c_final = match (m.c_final, part.meta.c_final) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                };
                acc
            }
        });
    }
    let mut out = merged.ok_or_else(|| Error::invalid("ar_sample_parallel needs n_target >= 1"))?;
    out.meta.seed = seed;
    out.meta.stream_id = first_stream;
    out.meta.acceptance_rate = out.meta.n_accepted as f64 / out.meta.n_proposed as f64;
    Ok(out)
}
