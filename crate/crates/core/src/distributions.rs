//! Sampleable targets and instrumentals.
//!
//! Gaussians and Gaussian mixtures carry exact log densities and serve as
//! oracles. Two-moons and rings are 2D sample-only targets.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::points::Points;
use crate::rng::RngStream;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal with cached Cholesky factor.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GaussianSpec", into = "GaussianSpec")]
pub struct Gaussian {
    mean: Vec<f64>,
    covariance: Vec<f64>,
    chol: Vec<f64>,
    log_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GaussianSpec {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

impl TryFrom<GaussianSpec> for Gaussian {
    type Error = Error;

    fn try_from(spec: GaussianSpec) -> Result<Self> {
        let d = spec.mean.len();
        if spec.covariance.len() != d || spec.covariance.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: spec.covariance.len(),
            });
        }
        Gaussian::new(spec.mean, spec.covariance.concat())
    }
}

impl From<Gaussian> for GaussianSpec {
    fn from(g: Gaussian) -> Self {
        let d = g.dim();
        GaussianSpec {
            covariance: g.covariance.chunks(d).map(<[f64]>::to_vec).collect(),
            mean: g.mean,
        }
    }
}

impl Gaussian {
    /// `covariance` is row-major `d x d`; it must be symmetric positive definite.
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::invalid("gaussian needs dimension >= 1"));
        }
        if covariance.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: covariance.len(),
            });
        }
        if mean.iter().chain(&covariance).any(|v| !v.is_finite()) {
            return Err(Error::invalid("gaussian parameters must be finite"));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (covariance[i * d + j], covariance[j * d + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::invalid("covariance is not symmetric"));
                }
            }
        }
        let chol = linalg::cholesky(&covariance, d)
            .ok_or_else(|| Error::DegenerateData("covariance is not positive definite".into()))?;
        let log_norm = -0.5 * (d as f64 * LN_2PI + linalg::log_det_from_cholesky(&chol, d));
        Ok(Self {
            mean,
            covariance,
            chol,
            log_norm,
        })
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = variance;
        }
        Self::new(mean, cov)
    }

    pub fn standard(d: usize) -> Self {
        Self::isotropic(vec![0.0; d], 1.0).expect("identity covariance")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major covariance.
    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let y = linalg::forward_substitute(&self.chol, d, &centered);
        self.log_norm - 0.5 * linalg::dot(&y, &y)
    }

    pub fn sample_into(&self, rng: &mut RngStream, out: &mut Vec<f64>) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let lz = linalg::lower_mul(&self.chol, d, &z);
        out.extend(lz.iter().zip(&self.mean).map(|(a, m)| a + m));
    }
}

/// Finite mixture of Gaussians.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MixtureSpec", into = "MixtureSpec")]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
    log_weights: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MixtureSpec {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl TryFrom<MixtureSpec> for GaussianMixture {
    type Error = Error;
    fn try_from(s: MixtureSpec) -> Result<Self> {
        GaussianMixture::new(s.weights, s.components)
    }
}

impl From<GaussianMixture> for MixtureSpec {
    fn from(m: GaussianMixture) -> Self {
        MixtureSpec {
            weights: m.weights,
            components: m.components,
        }
    }
}

impl GaussianMixture {
    /// Weights must be nonnegative and sum to one within 1e-12. Zero weights
    /// are allowed and simply never drawn.
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::invalid("mixture needs one weight per component"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("mixture weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            weights,
            components,
            log_weights,
        })
    }

    /// `k` isotropic modes with equal weight spread evenly on a circle.
    pub fn ring_of_modes(k: usize, radius: f64, std: f64) -> Result<Self> {
        let comps = (0..k)
            .map(|i| {
                let a = TAU * i as f64 / k as f64;
                Gaussian::isotropic(vec![radius * a.cos(), radius * a.sin()], std * std)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(equal_weights(k), comps)
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.log_pdf(x))
            .collect();
        linalg::log_sum_exp(&terms)
    }

    fn pick(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > 0.0 {
                acc += w;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }
}

fn equal_weights(k: usize) -> Vec<f64> {
    let mut w = vec![1.0 / k as f64; k];
    // Push the rounding residue into the last weight so the sum is exact.
    let head: f64 = w[..k - 1].iter().sum();
    w[k - 1] = 1.0 - head;
    w
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Gaussian(Gaussian),
    GaussianMixture(GaussianMixture),
    /// Two interleaved half circles, isotropic Gaussian noise.
    TwoMoons { noise_scale: f64 },
    /// Concentric circles of the given radii (uniform ring choice and angle).
    Rings { radii: Vec<f64>, noise_scale: f64 },
}

impl PartialEq for Gaussian {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance
    }
}

impl PartialEq for GaussianMixture {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights && self.components == other.components
    }
}

impl From<Gaussian> for Distribution {
    fn from(g: Gaussian) -> Self {
        Distribution::Gaussian(g)
    }
}

impl From<GaussianMixture> for Distribution {
    fn from(m: GaussianMixture) -> Self {
        Distribution::GaussianMixture(m)
    }
}

impl Distribution {
    /// 1D normal with the given mean and variance.
    pub fn normal_1d(mean: f64, variance: f64) -> Result<Self> {
        Ok(Gaussian::isotropic(vec![mean], variance)?.into())
    }

    pub fn two_moons(noise_scale: f64) -> Self {
        Distribution::TwoMoons { noise_scale }
    }

    pub fn rings(radii: Vec<f64>, noise_scale: f64) -> Self {
        Distribution::Rings { radii, noise_scale }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Gaussian(_) => "gaussian",
            Distribution::GaussianMixture(_) => "gaussian_mixture",
            Distribution::TwoMoons { .. } => "two_moons",
            Distribution::Rings { .. } => "rings",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Distribution::Gaussian(g) => g.dim(),
            Distribution::GaussianMixture(m) => m.dim(),
            Distribution::TwoMoons { .. } | Distribution::Rings { .. } => 2,
        }
    }

    pub fn has_density(&self) -> bool {
        matches!(
            self,
            Distribution::Gaussian(_) | Distribution::GaussianMixture(_)
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Distribution::TwoMoons { noise_scale } if !(*noise_scale >= 0.0) => {
                Err(Error::invalid("noise_scale must be nonnegative"))
            }
            Distribution::Rings { radii, noise_scale } => {
                if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
                    Err(Error::invalid("rings need at least one positive radius"))
                } else if !(*noise_scale >= 0.0) {
                    Err(Error::invalid("noise_scale must be nonnegative"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        match self {
            Distribution::Gaussian(g) => Ok(g.log_pdf(x)),
            Distribution::GaussianMixture(m) => Ok(m.log_pdf(x)),
            other => Err(Error::UnsupportedDensity(other.name())),
        }
    }

    pub fn sample_into(&self, rng: &mut RngStream, out: &mut Vec<f64>) {
        match self {
            Distribution::Gaussian(g) => g.sample_into(rng, out),
            Distribution::GaussianMixture(m) => {
                let i = m.pick(rng);
                m.components[i].sample_into(rng, out);
            }
            Distribution::TwoMoons { noise_scale } => {
                let upper = rng.uniform() < 0.5;
                let t = PI * rng.uniform();
                let (x, y) = if upper {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                out.push(x + noise_scale * rng.normal());
                out.push(y + noise_scale * rng.normal());
            }
            Distribution::Rings { radii, noise_scale } => {
                let r = radii[rng.below(radii.len())];
                let a = TAU * rng.uniform();
                out.push(r * a.cos() + noise_scale * rng.normal());
                out.push(r * a.sin() + noise_scale * rng.normal());
            }
        }
    }

    pub fn sample_one(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        self.sample_into(rng, &mut v);
        v
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Points {
        let mut flat = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            self.sample_into(rng, &mut flat);
        }
        Points::from_flat(self.dim(), flat).expect("sampler emits whole points")
    }
}

/// Ridge added to the empirical covariance diagonal, relative to its mean
/// variance `trace / d`.
pub const MOMENT_FIT_RIDGE: f64 = 1e-6;

/// Gaussian with the sample mean and (unbiased) sample covariance of
/// `points`, plus a `1e-6 * trace / d` ridge. A zero-variance cloud falls
/// back to a unit ridge so the result stays SPD.
pub fn fit_gaussian_moments(points: &Points) -> Result<Gaussian> {
    let d = points.dim();
    let n = points.len();
    if n < d + 1 {
        return Err(Error::TooFewSamples(format!(
            "moment fit in {d} dimensions needs at least {} points, got {n}",
            d + 1
        )));
    }
    let mean = points.mean();
    let mut cov = vec![0.0; d * d];
    for r in points.rows() {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..=i {
                cov[i * d + j] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[i * d + j] / (n - 1) as f64;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let ridge = if trace > 0.0 {
        MOMENT_FIT_RIDGE * trace / d as f64
    } else {
        MOMENT_FIT_RIDGE
    };
    for i in 0..d {
        cov[i * d + i] += ridge;
    }
    Gaussian::new(mean, cov).map_err(|e| match e {
        Error::DegenerateData(m) => Error::DegenerateData(format!("moment fit: {m}")),
        other => other,
    })
}
