use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;
use crate::rng::RngStream;

const SERIES_TERMS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `P(K > lambda)`.
///
/// Uses `2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)` for `lambda >= 1` and the
/// theta-function form `1 - sqrt(2 pi)/lambda sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))`
/// below, each truncated at 100 terms.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda >= 1.0 {
        let l2 = lambda * lambda;
        let mut sum = 0.0;
        for k in 1..=SERIES_TERMS {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * l2).exp();
            sum += if k % 2 == 1 { term } else { -term };
        }
        2.0 * sum
    } else {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=SERIES_TERMS {
            let odd = (2 * k - 1) as f64;
            sum += (-odd * odd * c).exp();
        }
        1.0 - (std::f64::consts::TAU).sqrt() / lambda * sum
    };
    p.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test: exact sup distance between the
/// right-continuous empirical CDFs, asymptotic p-value at effective size
/// `n_a n_b / (n_a + n_b)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples("ks_two_sample needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("ks_two_sample got NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < na && a[i] <= v {
            i += 1;
        }
        while j < nb && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(ne.sqrt() * d),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub dimension: usize,
    pub ks: KsResult,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_delta: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub var_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub direction: Vec<f64>,
    pub ks: KsResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleReport {
    pub n_a: usize,
    pub n_b: usize,
    pub marginals: Vec<MarginalReport>,
    pub projections: Vec<ProjectionReport>,
    pub projection_seed: u64,
    pub projection_stream: u64,
    pub n_tests: usize,
    pub min_p_value: f64,
    /// `min(1, n_tests * min_p_value)`.
    pub bonferroni_p_value: f64,
}

impl TwoSampleReport {
    /// True when no test rejects at family-wise level `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.bonferroni_p_value > alpha
    }

    pub fn max_statistic(&self) -> f64 {
        self.marginals
            .iter()
            .map(|m| m.ks.statistic)
            .chain(self.projections.iter().map(|p| p.ks.statistic))
            .fold(0.0, f64::max)
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 {
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v)
}

/// Per-coordinate KS and moment deltas, plus KS along `n_projections`
/// random unit directions drawn from `rng`.
pub fn two_sample_report(
    a: &Points,
    b: &Points,
    n_projections: usize,
    rng: &mut RngStream,
) -> Result<TwoSampleReport> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let d = a.dim();
    let mut marginals = Vec::with_capacity(d);
    for j in 0..d {
        let (ca, cb) = (a.column(j), b.column(j));
        let (mean_a, var_a) = mean_var(&ca);
        let (mean_b, var_b) = mean_var(&cb);
        marginals.push(MarginalReport {
            dimension: j,
            ks: ks_two_sample(&ca, &cb)?,
            mean_a,
            mean_b,
            mean_delta: mean_a - mean_b,
            var_a,
            var_b,
            var_delta: var_a - var_b,
        });
    }
    let mut projections = Vec::with_capacity(n_projections);
    for _ in 0..n_projections {
        let mut dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v /= norm);
        let project = |p: &Points| -> Vec<f64> {
            p.rows().map(|r| r.iter().zip(&dir).map(|(x, u)| x * u).sum()).collect()
        };
        let ks = ks_two_sample(&project(a), &project(b))?;
        projections.push(ProjectionReport { direction: dir, ks });
    }
    let n_tests = marginals.len() + projections.len();
    let min_p_value = marginals
        .iter()
        .map(|m| m.ks.p_value)
        .chain(projections.iter().map(|p| p.ks.p_value))
        .fold(1.0, f64::min);
    Ok(TwoSampleReport {
        n_a: a.len(),
        n_b: b.len(),
        marginals,
        projections,
        projection_seed: rng.seed(),
        projection_stream: rng.stream_id(),
        n_tests,
        min_p_value,
        bonferroni_p_value: (min_p_value * n_tests as f64).min(1.0),
    })
}
