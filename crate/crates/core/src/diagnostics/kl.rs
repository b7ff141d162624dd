use serde::{Deserialize, Serialize};

use crate::classifier::{OraclePosterior, Posterior};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::linalg::softplus;

use super::Grid;

/// Quadrature decomposition of the expected BCE of a posterior `r` under
/// the joint law `h(k, x)` with class priors `n1 / (n0 + n1)`, `n0 / (n0 + n1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlBceReport {
    /// `E_h(x)[ KL(h(k|x) || Bernoulli(r(x))) ]`.
    pub kl_term: f64,
    /// `E_h(k,x)[ -log r(k|x) ]`.
    pub expected_bce_per_sample: f64,
    /// `expected_bce_per_sample - kl_term`.
    pub additive_gap: f64,
    /// `E_h(k,x)[ -log h(k|x) ]`, computed directly.
    pub conditional_entropy: f64,
}

/// All terms use unclamped log-odds so that the exact posterior gives a
/// KL term of exactly zero rather than a clamping residue in the tails.
pub fn kl_bce_consistency<P: Posterior + ?Sized>(
    p1: &Distribution,
    p0: &Distribution,
    n1: usize,
    n0: usize,
    posterior: &P,
    grid: &Grid,
) -> Result<KlBceReport> {
    let oracle = OraclePosterior::new(p1.clone(), p0.clone(), n1, n0)?;
    if grid.dim() != p1.dim() {
        return Err(Error::DimensionMismatch {
            expected: p1.dim(),
            found: grid.dim(),
        });
    }
    let total = (n1 + n0) as f64;
    let log_pi1 = (n1 as f64 / total).ln();
    let log_pi0 = (n0 as f64 / total).ln();
    let (mut kl, mut ce, mut h) = (0.0, 0.0, 0.0);
    grid.for_each_node(|x, w| {
        // h(x) t(x) and h(x) (1 - t(x))
        let m1 = (log_pi1 + p1.log_pdf(x).expect("checked")).exp();
        let m0 = (log_pi0 + p0.log_pdf(x).expect("checked")).exp();
        if m1 == 0.0 && m0 == 0.0 {
            return;
        }
        let l = posterior.logit(x);
        let l_star = oracle.logit(x);
        // -log r = softplus(-l), -log(1 - r) = softplus(l)
        let (a, b) = (softplus(-l), softplus(l));
        let (a_star, b_star) = (softplus(-l_star), softplus(l_star));
        ce += w * (m1 * a + m0 * b);
        h += w * (m1 * a_star + m0 * b_star);
        kl += w * (m1 * (a - a_star) + m0 * (b - b_star));
    });
    Ok(KlBceReport {
        kl_term: kl,
        expected_bce_per_sample: ce,
        additive_gap: ce - kl,
        conditional_entropy: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{bce_loss, ConstantPosterior};
    use crate::dataset::build_dataset;
    use crate::linalg::sigmoid;
    use crate::rng::create_rng;

    fn pair() -> (Distribution, Distribution) {
        (
            Distribution::normal_1d(0.0, 1.0).unwrap(),
            Distribution::normal_1d(0.0, 4.0).unwrap(),
        )
    }

    struct Perturbed<'a> {
        base: &'a OraclePosterior,
        delta: f64,
    }

    impl Posterior for Perturbed<'_> {
        fn logit(&self, x: &[f64]) -> f64 {
            let eps = 1e-7;
            let r = (sigmoid(self.base.logit(x)) + self.delta).clamp(eps, 1.0 - eps);
            (r / (1.0 - r)).ln()
        }
    }

    #[test]
    fn oracle_has_zero_kl() {
        let (p1, p0) = pair();
        let grid = Grid::default_1d(2.0).unwrap();
        let oracle = OraclePosterior::new(p1.clone(), p0.clone(), 1, 1).unwrap();
        let r = kl_bce_consistency(&p1, &p0, 1, 1, &oracle, &grid).unwrap();
        assert!(r.kl_term.abs() < 1e-8);
        assert!((r.additive_gap - r.conditional_entropy).abs() < 1e-12);

        let same = kl_bce_consistency(&p0, &p0, 7, 7, &ConstantPosterior::half(), &grid).unwrap();
        assert!(same.kl_term.abs() < 1e-12);
        assert!((same.conditional_entropy - std::f64::consts::LN_2).abs() < 1e-8);
    }

    #[test]
    fn sample_only_targets_are_rejected() {
        let grid = Grid::square_2d(-3.0, 3.0, 5).unwrap();
        let moons = Distribution::two_moons(0.1);
        let g: Distribution = crate::distributions::Gaussian::standard(2).into();
        let r = kl_bce_consistency(&moons, &g, 1, 1, &ConstantPosterior::half(), &grid);
        assert!(matches!(r, Err(Error::UnsupportedDensity(_))));
    }

    #[test]
    fn half_posterior_kl_matches_monte_carlo() {
        let (p1, p0) = pair();
        let grid = Grid::default_1d(2.0).unwrap();
        let half = ConstantPosterior::half();
        let quad = kl_bce_consistency(&p1, &p0, 1, 1, &half, &grid).unwrap().kl_term;

        // KL(Bernoulli(t) || Bernoulli(1/2)) averaged over x ~ (p1 + p0) / 2
        let oracle = OraclePosterior::new(p1.clone(), p0.clone(), 1, 1).unwrap();
        let mut rng = create_rng(11, 0);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let src = if i % 2 == 0 { &p1 } else { &p0 };
            let x = src.sample_one(&mut rng);
            let t = oracle.posterior(&x);
            let mut v = std::f64::consts::LN_2;
            if t > 0.0 {
                v += t * t.ln();
            }
            if t < 1.0 {
                v += (1.0 - t) * (1.0 - t).ln();
            }
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let sd = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - quad).abs() < 3.0 * sd, "mc {mean} quad {quad} sd {sd}");
        assert!(quad > 0.01);
    }

    #[test]
    fn only_the_kl_term_depends_on_the_posterior() {
        let (p1, p0) = pair();
        let grid = Grid::default_1d(2.0).unwrap();
        let oracle = OraclePosterior::new(p1.clone(), p0.clone(), 3, 2).unwrap();
        let base = kl_bce_consistency(&p1, &p0, 3, 2, &oracle, &grid).unwrap();
        for delta in [-0.1, -0.05, 0.05, 0.1, 0.2] {
            let r = kl_bce_consistency(&p1, &p0, 3, 2, &Perturbed { base: &oracle, delta }, &grid).unwrap();
            let d_ce = r.expected_bce_per_sample - base.expected_bce_per_sample;
            let d_kl = r.kl_term - base.kl_term;
            assert!((d_ce - d_kl).abs() < 1e-8);
            assert!(r.kl_term > 0.0);
            // the oracle minimizes the expected loss
            assert!(r.expected_bce_per_sample >= base.expected_bce_per_sample);
        }
    }

    #[test]
    fn empirical_bce_converges_to_expected() {
        let (p1, p0) = pair();
        let grid = Grid::default_1d(2.0).unwrap();
        let oracle = OraclePosterior::new(p1.clone(), p0.clone(), 1, 1).unwrap();
        let expected = kl_bce_consistency(&p1, &p0, 1, 1, &oracle, &grid)
            .unwrap()
            .expected_bce_per_sample;
        let mut errors = Vec::new();
        for (i, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
            let ds = build_dataset(&p1, &p0, n / 2, n / 2, &mut create_rng(21, i as u64)).unwrap();
            let per = bce_loss(&oracle, &ds) / n as f64;
            // per-sample loss standard deviation, for the 1/sqrt(N) envelope
            let losses: Vec<f64> = ds
                .iter()
                .map(|(x, k)| {
                    let l = oracle.logit(x);
                    if k == 1 { softplus(-l) } else { softplus(l) }
                })
                .collect();
            let m = losses.iter().sum::<f64>() / n as f64;
            let sd = (losses.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            let err = (per - expected).abs();
            assert!(err < 3.0 * sd / (n as f64).sqrt(), "N={n}: err {err}, sd {sd}");
            errors.push(err);
        }
        assert!(errors[2] < 0.01);
    }
}
