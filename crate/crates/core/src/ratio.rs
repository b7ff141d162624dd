//! Posterior-to-density-ratio conversion.
//!
//! With `r(x)` the probability that `x` came from the target, the identity
//! `r = a / (a + b)  <=>  r / (1 - r) = a / b` turns the posterior odds into
//! `(n1 p1) / (n0 p0)`, so `(n0 / n1) * r / (1 - r)` estimates `p1 / p0`.
//! All arithmetic is done on log-odds.

use serde::{Deserialize, Serialize};

use crate::classifier::{logit_bound, Posterior, DEFAULT_CLAMP_EPS};
use crate::dataset::LabeledDataset;
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::points::Points;
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct RatioEstimator<P> {
    posterior: P,
    n0: usize,
    n1: usize,
    clamp_eps: f64,
    log_prefactor: f64,
    bound: f64,
}

/// A log-odds value together with whether clamping changed it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClampedLogit {
    pub value: f64,
    pub clamped: bool,
}

impl<P: Posterior> RatioEstimator<P> {
    pub fn new(posterior: P, n0: usize, n1: usize) -> Result<Self> {
        Self::with_clamp(posterior, n0, n1, DEFAULT_CLAMP_EPS)
    }

    pub fn with_clamp(posterior: P, n0: usize, n1: usize, clamp_eps: f64) -> Result<Self> {
        if n0 == 0 || n1 == 0 {
            return Err(Error::invalid("ratio estimator needs n0, n1 >= 1"));
        }
        if !(clamp_eps > 0.0 && clamp_eps < 0.5) {
            return Err(Error::invalid(format!("clamp_eps {clamp_eps} not in (0, 0.5)")));
        }
        Ok(Self {
            posterior,
            n0,
            n1,
            clamp_eps,
            log_prefactor: (n0 as f64).ln() - (n1 as f64).ln(),
            bound: logit_bound(clamp_eps),
        })
    }

    pub fn posterior(&self) -> &P {
        &self.posterior
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn clamp_eps(&self) -> f64 {
        self.clamp_eps
    }

    /// `log(r / (1 - r))` with `r` clamped into `[eps, 1 - eps]`.
    pub fn log_odds(&self, x: &[f64]) -> ClampedLogit {
        let raw = self.posterior.logit(x);
        let value = raw.clamp(-self.bound, self.bound);
        ClampedLogit {
            value,
            // NaN logits are pushed to the lower bound and flagged.
            clamped: value != raw,
        }
        .sanitize(self.bound)
    }

    /// `log(n0 / n1) + log(r / (1 - r))`.
    pub fn log_ratio_hat(&self, x: &[f64]) -> f64 {
        self.log_prefactor + self.log_odds(x).value
    }

    pub fn ratio_hat(&self, x: &[f64]) -> f64 {
        self.log_ratio_hat(x).exp()
    }

    /// Largest estimated ratio over every point of `ds`, both labels.
    pub fn estimate_c(&self, ds: &LabeledDataset) -> Result<EnvelopeConstant> {
        self.estimate_c_points(ds.points())
    }

    pub fn estimate_c_points(&self, points: &Points) -> Result<EnvelopeConstant> {
        let mut rows = points.rows();
        let first = rows
            .next()
            .ok_or_else(|| Error::TooFewSamples("envelope estimate needs a nonempty dataset".into()))?;
        let mut c = EnvelopeConstant::from_point(self, first);
        for x in rows {
            c.update(self, x);
        }
        Ok(c)
    }

    /// `p0(x) * r / (1 - r)`, the unnormalized density of accepted points.
    pub fn p_phi_unnorm(&self, p0: &Distribution, x: &[f64]) -> Result<f64> {
        Ok((p0.log_pdf(x)? + self.log_odds(x).value).exp())
    }

    /// Monte Carlo estimate of `integral p0(z) r(z) / (1 - r(z)) dz` from `m`
    /// draws of `p0`.
    pub fn p_phi_normalizer(&self, p0: &Distribution, m: usize, rng: &mut RngStream) -> Result<McEstimate> {
        if m == 0 {
            return Err(Error::invalid("normalizer needs m >= 1"));
        }
        let mut z = Vec::with_capacity(p0.dim());
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..m {
            z.clear();
            p0.sample_into(rng, &mut z);
            let v = self.log_odds(&z).value.exp();
            sum += v;
            sum_sq += v * v;
        }
        let mf = m as f64;
        let mean = sum / mf;
        let std_error = if m > 1 {
            ((sum_sq - mf * mean * mean).max(0.0) / (mf - 1.0) / mf).sqrt()
        } else {
            0.0
        };
        Ok(McEstimate { value: mean, std_error })
    }

    /// Normalized density `p_phi_unnorm(x) / normalizer`.
    pub fn p_phi(&self, p0: &Distribution, x: &[f64], normalizer: f64) -> Result<f64> {
        Ok(self.p_phi_unnorm(p0, x)? / normalizer)
    }
}

impl ClampedLogit {
    fn sanitize(self, bound: f64) -> Self {
        if self.value.is_nan() {
            ClampedLogit {
                value: -bound,
                clamped: true,
            }
        } else {
            self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Running maximum of the estimated ratio over every point offered so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstant {
    log_value: f64,
    argmax_point: Vec<f64>,
    n_points_seen: usize,
}

impl EnvelopeConstant {
    pub fn from_point<P: Posterior>(est: &RatioEstimator<P>, x: &[f64]) -> Self {
        Self {
            log_value: est.log_ratio_hat(x),
            argmax_point: x.to_vec(),
            n_points_seen: 1,
        }
    }

    /// An envelope with a fixed value and no history.
    pub fn fixed(value: f64, dim: usize) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::invalid(format!("envelope constant {value} must be positive")));
        }
        Ok(Self {
            log_value: value.ln(),
            argmax_point: vec![f64::NAN; dim],
            n_points_seen: 0,
        })
    }

    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    pub fn log_value(&self) -> f64 {
        self.log_value
    }

    pub fn argmax_point(&self) -> &[f64] {
        &self.argmax_point
    }

    pub fn n_points_seen(&self) -> usize {
        self.n_points_seen
    }

    /// Offers `x`; returns its log ratio.
    pub fn update<P: Posterior>(&mut self, est: &RatioEstimator<P>, x: &[f64]) -> f64 {
        let lr = est.log_ratio_hat(x);
        self.update_with_log_ratio(x, lr);
        lr
    }

    pub(crate) fn update_with_log_ratio(&mut self, x: &[f64], log_ratio: f64) {
        self.n_points_seen += 1;
        if log_ratio > self.log_value {
            self.log_value = log_ratio;
            self.argmax_point.clear();
            self.argmax_point.extend_from_slice(x);
        }
    }

    /// Combines envelopes kept by independent workers.
    pub fn merge(&self, other: &EnvelopeConstant) -> EnvelopeConstant {
        let mut out = if other.log_value > self.log_value {
            other.clone()
        } else {
            self.clone()
        };
        out.n_points_seen = self.n_points_seen + other.n_points_seen;
        out
    }
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

    fn oracle(n: usize) -> RatioEstimator<OraclePosterior> {
        let (p1, p0) = pair();
        RatioEstimator::new(OraclePosterior::new(p1, p0, n, n).unwrap(), n, n).unwrap()
    }

    fn analytic_log_ratio(x: f64) -> f64 {
        2f64.ln() - x * x / 2.0 + x * x / 8.0
    }

    #[test]
    fn constant_posteriors() {
        let half = RatioEstimator::new(ConstantPosterior::half(), 10, 10).unwrap();
        assert_eq!(half.ratio_hat(&[3.0]), 1.0);
        assert_eq!(half.log_ratio_hat(&[3.0]), 0.0);
        let two_thirds = RatioEstimator::new(ConstantPosterior::new(2.0 / 3.0).unwrap(), 10, 10).unwrap();
        assert!((two_thirds.ratio_hat(&[0.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn clamp_boundary_is_finite() {
        let eps = DEFAULT_CLAMP_EPS;
        let est = RatioEstimator::new(ConstantPosterior::from_logit(100.0), 5, 5).unwrap();
        let lr = est.log_ratio_hat(&[0.0]);
        assert!((lr - ((1.0 - eps) / eps).ln()).abs() < 1e-12);
        assert!(est.log_odds(&[0.0]).clamped);
        assert!((lr - 16.118).abs() < 1e-3);
    }

    #[test]
    fn oracle_matches_analytic_ratio() {
        let est = oracle(7);
        assert!((est.ratio_hat(&[0.0]) - 2.0).abs() < 1e-14);
        for i in 0..=600 {
            let x = -3.0 + 0.01 * i as f64;
            let lr = est.log_ratio_hat(&[x]);
            assert!((lr - analytic_log_ratio(x)).abs() < 1e-10);
            let rel = (lr.exp() - est.ratio_hat(&[x])).abs() / lr.exp();
            assert!(rel <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn prefactor_scales_ratio() {
        let (p1, p0) = pair();
        let o = OraclePosterior::new(p1, p0, 30, 10).unwrap();
        let est = RatioEstimator::new(o, 10, 30).unwrap();
        // prior odds cancel against the n0/n1 prefactor
        assert!((est.log_ratio_hat(&[0.5]) - analytic_log_ratio(0.5)).abs() < 1e-12);
    }

    #[test]
    fn envelope_over_dataset() {
        let half = RatioEstimator::new(ConstantPosterior::half(), 3, 3).unwrap();
        let ds = LabeledDataset::new(Points::from_scalars(&[1.0, -4.0, 2.0]), vec![1, 0, 1]).unwrap();
        assert_eq!(half.estimate_c(&ds).unwrap().value(), 1.0);

        let est = oracle(3);
        let ds = LabeledDataset::new(Points::from_scalars(&[1.0, 0.0, -2.0]), vec![1, 1, 0]).unwrap();
        let c = est.estimate_c(&ds).unwrap();
        assert!((c.value() - 2.0).abs() < 1e-14);
        assert_eq!(c.argmax_point(), &[0.0]);
        assert_eq!(c.n_points_seen(), 3);

        assert!(est.estimate_c(&LabeledDataset::empty(1)).is_err());
    }

    #[test]
    fn envelope_underestimates_without_mode() {
        let est = oracle(3);
        let (p1, p0) = pair();
        let ds = crate::dataset::build_dataset(&p1, &p0, 2000, 2000, &mut create_rng(1, 0)).unwrap();
        let far: Vec<usize> = (0..ds.len()).filter(|&i| ds.points().row(i)[0].abs() > 1.0).collect();
        let c = est.estimate_c(&ds.select(&far)).unwrap();
        // sup over |x| > 1 is the analytic ratio at |x| = 1
        assert!(c.value() < 2.0);
        assert!(c.value() <= analytic_log_ratio(1.0).exp() + 1e-12);
    }

    #[test]
    fn envelope_updates() {
        let est = oracle(3);
        let mut c = EnvelopeConstant::from_point(&est, &[1.0]);
        let before = c.value();
        c.update(&est, &[2.0]);
        assert_eq!(c.value(), before);
        assert_eq!(c.argmax_point(), &[1.0]);
        c.update(&est, &[0.1]);
        assert!(c.value() > before);
        assert_eq!(c.argmax_point(), &[0.1]);
        assert_eq!(c.n_points_seen(), 3);
    }

    #[test]
    fn envelope_stream_approaches_sup_from_below() {
        let est = oracle(3);
        let (_, p0) = pair();
        let mut rng = create_rng(2, 0);
        let mut c = EnvelopeConstant::from_point(&est, &p0.sample_one(&mut rng));
        let mut prev = c.value();
        for _ in 0..10_000 {
            c.update(&est, &p0.sample_one(&mut rng));
            assert!(c.value() >= prev);
            assert!(c.value() <= 2.0);
            prev = c.value();
        }
        assert!(c.value() > 1.99);
    }

    #[test]
    fn merge_keeps_max_and_counts() {
        let est = oracle(3);
        let a = EnvelopeConstant::from_point(&est, &[1.0]);
        let b = EnvelopeConstant::from_point(&est, &[0.5]);
        let m = a.merge(&b);
        assert_eq!(m.value(), b.value());
        assert_eq!(m.n_points_seen(), 2);
        assert_eq!(b.merge(&a), m);
    }

    #[test]
    fn density_byproduct() {
        let (p1, p0) = pair();
        let half = RatioEstimator::new(ConstantPosterior::half(), 4, 4).unwrap();
        for x in [-2.0, 0.0, 1.5] {
            let a = half.p_phi_unnorm(&p0, &[x]).unwrap();
            assert!((a - p0.log_pdf(&[x]).unwrap().exp()).abs() < 1e-15);
        }
        let est = oracle(4);
        for i in 0..=80 {
            let x = -4.0 + 0.1 * i as f64;
            let a = est.p_phi_unnorm(&p0, &[x]).unwrap();
            let b = p1.log_pdf(&[x]).unwrap().exp();
            assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }
        // far tail: the clamped log-odds floor takes over
        let tail = est.p_phi_unnorm(&p0, &[40.0]).unwrap();
        let floor = p0.log_pdf(&[40.0]).unwrap().exp() * (-logit_bound(DEFAULT_CLAMP_EPS)).exp();
        assert!((tail - floor).abs() <= 1e-12 * floor);
        assert!(matches!(
            est.p_phi_unnorm(&Distribution::two_moons(0.1), &[0.0, 0.0]),
            Err(Error::UnsupportedDensity(_))
        ));
    }

    #[test]
    fn normalizer_estimates() {
        let (_, p0) = pair();
        let half = RatioEstimator::new(ConstantPosterior::half(), 4, 4).unwrap();
        let n = half.p_phi_normalizer(&p0, 17, &mut create_rng(0, 0)).unwrap();
        assert_eq!(n.value, 1.0);
        let one = oracle(4).p_phi_normalizer(&p0, 1, &mut create_rng(0, 0)).unwrap();
        assert!(one.value > 0.0 && one.value.is_finite());
        let mc = oracle(4).p_phi_normalizer(&p0, 100_000, &mut create_rng(3, 0)).unwrap();
        assert!((mc.value - 1.0).abs() < 3.0 * mc.std_error, "{mc:?}");
    }

    #[test]
    fn normalized_density_integrates_to_one() {
        let (_, p0) = pair();
        let est = oracle(4);
        let z = est.p_phi_normalizer(&p0, 1_000_000, &mut create_rng(8, 0)).unwrap();
        let (lo, hi, n) = (-20.0, 20.0, 10_000);
        let h = (hi - lo) / (n - 1) as f64;
        let integral: f64 = (0..n)
            .map(|i| {
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                w * est.p_phi(&p0, &[lo + h * i as f64], z.value).unwrap()
            })
            .sum::<f64>()
            * h;
        assert!((integral - 1.0).abs() < 1e-2, "{integral}");
    }
}
