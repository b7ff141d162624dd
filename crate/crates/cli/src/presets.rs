use std::path::PathBuf;

use ratio_mc::samplers::ResamplingScheme;
use ratio_mc::{Distribution, GaussianMixture, TrainConfig};

use crate::config::{EvaluationSpec, InstrumentalKeyword, InstrumentalSpec, RunConfig, SamplerSpec};
use crate::error::CliError;

pub const PRESETS: [&str; 4] = ["gaussian-1d", "gmm-2d", "two-moons", "rings"];

/// Radius and per-mode standard deviation of the 8-mode ring mixture.
pub const GMM_RADIUS: f64 = 2.0;
pub const GMM_STD: f64 = 0.25;

pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let seed = 20_240_601;
    let sir = SamplerSpec::Sir {
        n_proposals: 100_000,
        m_resampled: 20_000,
        scheme: ResamplingScheme::Multinomial,
    };
    let base = |target: Distribution, instrumental: InstrumentalSpec, sampler: SamplerSpec| RunConfig {
        name: name.to_string(),
        seed,
        target,
        instrumental,
        n1: 10_000,
        n0: 10_000,
        train: TrainConfig {
            seed,
            ..TrainConfig::default()
        },
        sampler,
        evaluation: EvaluationSpec::default(),
        output_dir: Some(PathBuf::from(".")),
    };
    let moment_fit = InstrumentalSpec::Keyword(InstrumentalKeyword::MomentFit);
    let cfg = match name {
        "gaussian-1d" => base(
            Distribution::normal_1d(0.0, 1.0)?,
            InstrumentalSpec::Distribution(Distribution::normal_1d(0.0, 4.0)?),
            SamplerSpec::Ar {
                n_target: 10_000,
                max_proposals: None,
                workers: 1,
            },
        ),
        "gmm-2d" => base(
            GaussianMixture::ring_of_modes(8, GMM_RADIUS, GMM_STD)?.into(),
            moment_fit,
            sir,
        ),
        "two-moons" => base(Distribution::two_moons(0.1), moment_fit, sir),
        "rings" => base(Distribution::rings(vec![1.0, 2.0], 0.1), moment_fit, sir),
        other => {
            return Err(CliError::Usage(format!(
                "unknown preset {other:?}, expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
        }
        assert!(matches!(preset("nope"), Err(CliError::Usage(_))));
    }
}
