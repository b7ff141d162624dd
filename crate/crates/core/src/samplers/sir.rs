use serde::{Deserialize, Serialize};

use crate::classifier::Posterior;
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;
use crate::ratio::RatioEstimator;
use crate::rng::RngStream;

use super::{SampleMeta, SampleSet, SamplerKind};
use crate::diagnostics::ess;

/// Weight share above which a single point is considered to carry the
/// whole sample.
const DEGENERATE_SHARE: f64 = 1.0 - 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResamplingScheme {
    /// `M` iid draws from the weighted empirical measure.
    #[default]
    Multinomial,
    /// One uniform offset, `M` evenly spaced pointers. Lower variance, not iid.
    Systematic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SirOutput {
    /// The proposals with their normalized weights.
    pub weighted: SampleSet,
    pub resampled: SampleSet,
}

/// Draws `m` indices from normalized `weights`.
pub fn resample_indices(
    weights: &[f64],
    m: usize,
    scheme: ResamplingScheme,
    rng: &mut RngStream,
) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    let locate = |u: f64| cdf.partition_point(|&c| c <= u).min(last);
    match scheme {
        ResamplingScheme::Multinomial => (0..m).map(|_| locate(rng.uniform() * total)).collect(),
        ResamplingScheme::Systematic => {
            let step = total / m as f64;
            let u0 = rng.uniform() * step;
            (0..m).map(|j| locate(u0 + j as f64 * step)).collect()
        }
    }
}

/// Sampling-importance-resampling: `n_proposals` draws from `proposal`,
/// weights proportional to the estimated ratio, then `m_resampled` points
/// drawn from the weighted set. The `n0 / n1` prefactor cancels under
/// normalization, so weights come straight from the clamped log-odds.
pub fn sir_sample<P: Posterior>(
    est: &RatioEstimator<P>,
    proposal: &Distribution,
    n_proposals: usize,
    m_resampled: usize,
    scheme: ResamplingScheme,
    rng: &mut RngStream,
) -> Result<SirOutput> {
    if n_proposals == 0 || m_resampled == 0 {
        return Err(Error::invalid("sir_sample needs n_proposals, m_resampled >= 1"));
    }
    let mut meta = SampleMeta {
        sampler: Some(SamplerKind::Sir),
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        n_proposed: n_proposals,
        ..SampleMeta::default()
    };
    let proposals = proposal.sample(n_proposals, rng);
    let log_w: Vec<f64> = proposals
        .rows()
        .map(|x| {
            let lo = est.log_odds(x);
            meta.clamp_events += lo.clamped as usize;
            lo.value
        })
        .collect();
    let lse = log_sum_exp(&log_w);
    let mut weights: Vec<f64> = log_w.iter().map(|l| (l - lse).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    meta.degenerate_weights = weights.iter().any(|&w| w >= DEGENERATE_SHARE);
    meta.ess = Some(ess(&weights)?);

    let idx = resample_indices(&weights, m_resampled, scheme, rng);
    let resampled_points = proposals.select(&idx);
    let mut distinct = idx.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let resampled_meta = SampleMeta {
        n_accepted: distinct.len(),
        acceptance_rate: distinct.len() as f64 / n_proposals as f64,
        ..meta.clone()
    };
    Ok(SirOutput {
        weighted: SampleSet {
            points: proposals,
            weights: Some(weights),
            meta,
        },
        resampled: SampleSet {
            points: resampled_points,
            weights: None,
            meta: resampled_meta,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{ConstantPosterior, OraclePosterior};
    use crate::rng::create_rng;

    fn pair() -> (Distribution, Distribution) {
        (
            Distribution::normal_1d(0.0, 1.0).unwrap(),
            Distribution::normal_1d(0.0, 4.0).unwrap(),
        )
    }

    #[test]
    fn constant_ratio_gives_uniform_weights() {
        let (_, p0) = pair();
        let est = RatioEstimator::new(ConstantPosterior::half(), 2, 2).unwrap();
        let out = sir_sample(&est, &p0, 50, 80, ResamplingScheme::Multinomial, &mut create_rng(1, 0)).unwrap();
        let w = out.weighted.weights.as_ref().unwrap();
        assert!(w.iter().all(|&v| (v - 0.02).abs() < 1e-15));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(out.resampled.len(), 80);
        let proposals: Vec<u64> = out.weighted.points.as_flat().iter().map(|v| v.to_bits()).collect();
        assert!(out.resampled.points.as_flat().iter().all(|v| proposals.contains(&v.to_bits())));
        assert!((out.weighted.meta.ess.unwrap() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn single_proposal_repeated() {
        let (_, p0) = pair();
        let est = RatioEstimator::new(ConstantPosterior::half(), 2, 2).unwrap();
        for scheme in [ResamplingScheme::Multinomial, ResamplingScheme::Systematic] {
            let out = sir_sample(&est, &p0, 1, 7, scheme, &mut create_rng(2, 0)).unwrap();
            let x = out.weighted.points.row(0)[0];
            assert!(out.resampled.points.rows().all(|r| r[0] == x));
            assert!(out.weighted.meta.degenerate_weights);
        }
    }

    #[test]
    fn degenerate_flag_on_dominant_weight() {
        struct Spike;
        impl Posterior for Spike {
            fn logit(&self, x: &[f64]) -> f64 {
                if x[0] > 2.5 {
                    15.0
                } else {
                    -15.0
                }
            }
        }
        let (_, p0) = pair();
        let est = RatioEstimator::new(Spike, 1, 1).unwrap();
        let mut found = false;
        for s in 0..50 {
            let out = sir_sample(&est, &p0, 30, 5, ResamplingScheme::Multinomial, &mut create_rng(s, 0)).unwrap();
            let n_hi = out.weighted.points.rows().filter(|r| r[0] > 2.5).count();
            assert_eq!(out.weighted.meta.degenerate_weights, n_hi == 1);
            found |= n_hi == 1;
        }
        assert!(found);
    }

    #[test]
    fn systematic_preserves_expected_multiplicity() {
        let w = [0.05, 0.3, 0.15, 0.4, 0.1];
        let m = 7;
        let reps = 20_000;
        let mut rng = create_rng(3, 0);
        let mut counts = [0usize; 5];
        for _ in 0..reps {
            for i in resample_indices(&w, m, ResamplingScheme::Systematic, &mut rng) {
                counts[i] += 1;
            }
        }
        for i in 0..5 {
            let mean = counts[i] as f64 / reps as f64;
            let expect = m as f64 * w[i];
            // systematic counts are floor/ceil of M w_i, so var <= 1/4
            assert!((mean - expect).abs() < 4.0 * (0.25 / reps as f64).sqrt(), "{i}: {mean} vs {expect}");
        }
        let mut multi = [0usize; 5];
        for _ in 0..reps {
            for i in resample_indices(&w, m, ResamplingScheme::Multinomial, &mut rng) {
                multi[i] += 1;
            }
        }
        for i in 0..5 {
            let mean = multi[i] as f64 / reps as f64;
            let sd = (m as f64 * w[i] * (1.0 - w[i]) / reps as f64).sqrt();
            assert!((mean - m as f64 * w[i]).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn zero_weights_never_drawn() {
        let w = [0.0, 0.5, 0.0, 0.5, 0.0];
        let mut rng = create_rng(4, 0);
        for scheme in [ResamplingScheme::Multinomial, ResamplingScheme::Systematic] {
            let idx = resample_indices(&w, 1000, scheme, &mut rng);
            assert!(idx.iter().all(|&i| i == 1 || i == 3));
        }
    }

    #[test]
    fn oracle_weights_nonnegative_normalized() {
        let (p1, p0) = pair();
        let est = RatioEstimator::new(OraclePosterior::new(p1, p0.clone(), 1, 1).unwrap(), 1, 1).unwrap();
        let out = sir_sample(&est, &p0, 1000, 10, ResamplingScheme::Systematic, &mut create_rng(5, 0)).unwrap();
        let w = out.weighted.weights.unwrap();
        assert!(w.iter().all(|&v| v >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
