use std::fs;
use std::path::{Path, PathBuf};

use ratio_mc::samplers::ResamplingScheme;
use ratio_mc::{Distribution, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentalKeyword {
    MomentFit,
}

/// Either a closed-form distribution or `"moment_fit"`: a Gaussian fitted to
/// the target draws of the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstrumentalSpec {
    Keyword(InstrumentalKeyword),
    Distribution(Distribution),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Ar {
        n_target: usize,
        #[serde(default)]
        max_proposals: Option<usize>,
        #[serde(default = "one")]
        workers: usize,
    },
    Imh {
        n_steps: usize,
        #[serde(default)]
        burn_in: Option<usize>,
    },
    Sir {
        n_proposals: usize,
        m_resampled: usize,
        #[serde(default)]
        scheme: ResamplingScheme,
    },
    Is {
        n: usize,
        /// `1`, `xJ` or `xJ^P`.
        #[serde(default = "default_integrand")]
        integrand: String,
    },
}

fn one() -> usize {
    1
}

fn default_integrand() -> String {
    "x0".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSpec {
    /// Direct target draws compared against the sampler output.
    pub n_reference: usize,
    /// Random projections on top of the per-coordinate KS tests.
    pub n_projections: usize,
    /// Points CSV used instead of direct draws (required for targets
    /// without a sampler, optional otherwise).
    pub reference_file: Option<PathBuf>,
    pub alpha: f64,
    /// Nodes per axis of the log-ratio grid.
    pub grid_nodes: usize,
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        Self {
            n_reference: 10_000,
            n_projections: 10,
            reference_file: None,
            alpha: 0.001,
            grid_nodes: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub seed: u64,
    pub target: Distribution,
    pub instrumental: InstrumentalSpec,
    pub n1: usize,
    pub n0: usize,
    /// `train.seed` defaults to `seed`.
    #[serde(default)]
    pub train: TrainConfig,
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub evaluation: EvaluationSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let seed = value.get("seed").cloned();
        if let (Some(obj), Some(seed)) = (value.get_mut("train").and_then(|t| t.as_object_mut()), seed.clone()) {
            obj.entry("seed").or_insert(seed);
        } else if let (Some(root), Some(seed)) = (value.as_object_mut(), seed) {
            if !root.contains_key("train") {
                root.insert("train".into(), serde_json::json!({ "seed": seed }));
            }
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.target.validate().map_err(|e| CliError::Config(format!("target: {e}")))?;
        if let InstrumentalSpec::Distribution(d) = &self.instrumental {
            d.validate().map_err(|e| CliError::Config(format!("instrumental: {e}")))?;
            if d.dim() != self.target.dim() {
                return bad(format!(
                    "instrumental has dimension {}, target {}",
                    d.dim(),
                    self.target.dim()
                ));
            }
        }
        if self.n1 < 2 || self.n0 < 2 {
            return bad("n1 and n0 must be at least 2".into());
        }
        if matches!(self.instrumental, InstrumentalSpec::Keyword(_)) && self.n1 <= self.target.dim() {
            return bad("moment_fit needs n1 > dimension".into());
        }
        self.train.validate().map_err(|e| CliError::Config(format!("train: {e}")))?;
        match &self.sampler {
            SamplerSpec::Ar { n_target, workers, .. } if *n_target == 0 || *workers == 0 => {
                return bad("ar needs n_target >= 1 and workers >= 1".into())
            }
            SamplerSpec::Imh { n_steps, burn_in } if *n_steps <= burn_in.unwrap_or(n_steps / 10) => {
                return bad("imh needs n_steps > burn_in".into())
            }
            SamplerSpec::Sir { n_proposals, m_resampled, .. } if *n_proposals == 0 || *m_resampled == 0 => {
                return bad("sir needs n_proposals, m_resampled >= 1".into())
            }
            SamplerSpec::Is { n, integrand } => {
                if *n < 2 {
                    return bad("is needs n >= 2".into());
                }
                ratio_mc::samplers::Integrand::parse(integrand)
                    .map_err(|e| CliError::Config(format!("integrand: {e}")))?;
            }
            _ => {}
        }
        let ev = &self.evaluation;
        if ev.n_reference < 1 || ev.grid_nodes < 2 || !(ev.alpha > 0.0 && ev.alpha < 1.0) {
            return bad("evaluation needs n_reference >= 1, grid_nodes >= 2, alpha in (0, 1)".into());
        }
        Ok(())
    }
}

/// A parsed config plus the facts derived from its file.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: PathBuf,
    /// Hex SHA-256 of the config file bytes.
    pub hash: String,
    pub output_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path, output_override: Option<&Path>) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config("config is not UTF-8".into()))?;
        let config = RunConfig::from_json(text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let output_dir = match output_override {
            Some(p) => p.to_path_buf(),
            None => base.join(config.output_dir.clone().unwrap_or_else(|| PathBuf::from("output"))),
        };
        if let Some(r) = &config.evaluation.reference_file {
            let full = base.join(r);
            if !full.is_file() {
                return Err(CliError::Config(format!("reference file {} does not exist", full.display())));
            }
        }
        Ok(Self {
            hash: sha256_hex(&bytes),
            path: path.to_path_buf(),
            config,
            output_dir,
        })
    }

    pub fn base_dir(&self) -> PathBuf {
        self.path.parent().map(Path::to_path_buf).unwrap_or_default()
    }

    pub fn reference_file(&self) -> Option<PathBuf> {
        self.config.evaluation.reference_file.as_ref().map(|r| self.base_dir().join(r))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "t", "seed": 9,
        "target": {"kind": "gaussian", "mean": [0.0], "covariance": [[1.0]]},
        "instrumental": "moment_fit",
        "n1": 10, "n0": 10,
        "sampler": {"kind": "sir", "n_proposals": 5, "m_resampled": 3}
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.train.seed, 9);
        assert_eq!(c.instrumental, InstrumentalSpec::Keyword(InstrumentalKeyword::MomentFit));
        assert_eq!(c.evaluation, EvaluationSpec::default());
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn train_seed_can_be_overridden() {
        let text = MINIMAL.replace("\"n1\"", "\"train\": {\"seed\": 3, \"epochs\": 4}, \"n1\"");
        let c = RunConfig::from_json(&text).unwrap();
        assert_eq!((c.train.seed, c.train.epochs), (3, 4));
    }

    #[test]
    fn rejects_bad_configs() {
        for (from, to) in [
            ("\"seed\": 9,", ""),
            ("\"n1\": 10", "\"n1\": 1"),
            ("\"moment_fit\"", "\"moment\""),
            ("\"m_resampled\": 3", "\"m_resampled\": 3, \"extra\": 1"),
            ("[[1.0]]", "[[-1.0]]"),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))), "{from} -> {to}");
        }
    }
}
