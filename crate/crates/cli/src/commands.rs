use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ratio_mc::classifier::{accuracy, EpochLoss, MlpClassifier, OraclePosterior, PosteriorFn};
use ratio_mc::diagnostics::{two_sample_report, TwoSampleReport};
use ratio_mc::rng::RNG_ALGORITHM;
use ratio_mc::samplers::{
    ar_sample_parallel, imh_chain, is_estimate, sir_sample, ImhInit, Integrand, IsEstimate, SampleMeta,
};
use ratio_mc::{
    create_rng, fit_gaussian_moments, train, Distribution, Error, LabeledDataset, Points, Posterior,
    RatioEstimator, TrainConfig, VERSION,
};
use serde::{Deserialize, Serialize};

use crate::artifacts::*;
use crate::config::{InstrumentalSpec, LoadedConfig, SamplerSpec};
use crate::error::CliError;

pub const STREAM_CLASS1: u64 = 10;
pub const STREAM_CLASS0: u64 = 11;
pub const STREAM_SHUFFLE: u64 = 12;
/// First of the sampler streams; AR worker `w` uses this plus `w`.
pub const STREAM_SAMPLER: u64 = 20;
pub const STREAM_REFERENCE: u64 = 30;
pub const STREAM_PROJECTIONS: u64 = 31;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub name: String,
    pub config_hash: String,
    pub version: String,
    pub rng_algorithm: String,
    pub seed: u64,
}

impl Provenance {
    fn of(cfg: &LoadedConfig) -> Self {
        Self {
            name: cfg.config.name.clone(),
            config_hash: cfg.hash.clone(),
            version: VERSION.to_string(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            seed: cfg.config.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub provenance: Provenance,
    pub file: String,
    pub target: Distribution,
    /// The instrumental actually used; for `moment_fit` this is the fitted
    /// Gaussian.
    pub instrumental: Distribution,
    pub instrumental_source: String,
    pub n1: usize,
    pub n0: usize,
    pub streams: DatasetStreams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStreams {
    pub class1: u64,
    pub class0: u64,
    pub shuffle: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub provenance: Provenance,
    pub model_file: String,
    pub loss_trace_file: String,
    pub train: TrainConfig,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub best: EpochLoss,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeInfo {
    /// Largest estimated ratio over the dataset, before sampling.
    pub c_dataset: f64,
    pub argmax_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsOutput {
    pub integrand: String,
    #[serde(flatten)]
    pub estimate: IsEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub provenance: Provenance,
    /// `model` or `oracle`.
    pub posterior: String,
    pub sampler: SamplerSpec,
    pub meta: SampleMeta,
    pub samples_file: Option<String>,
    pub weighted_samples_file: Option<String>,
    pub burn_in: Option<usize>,
    pub envelope: Option<EnvelopeInfo>,
    pub importance: Option<IsOutput>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInfo {
    /// `target` for direct draws, otherwise the file path.
    pub source: String,
    pub n: usize,
    pub stream_id: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeMasses {
    pub expected: Vec<f64>,
    pub observed: Vec<f64>,
    pub max_abs_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsCheck {
    pub integrand: String,
    pub estimate: f64,
    pub std_error: f64,
    pub reference_mean: f64,
    pub reference_std_error: f64,
    /// Difference over the combined standard error.
    pub z_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub file: String,
    pub nodes_per_axis: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub provenance: Provenance,
    pub posterior: String,
    pub alpha: f64,
    pub n_samples: usize,
    pub reference: ReferenceInfo,
    pub two_sample: Option<TwoSampleReport>,
    /// No test rejects at `alpha` after Bonferroni correction.
    pub passes: Option<bool>,
    pub mode_masses: Option<ModeMasses>,
    pub importance: Option<IsCheck>,
    pub ratio_grid: GridInfo,
}

fn out_path(cfg: &LoadedConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn ensure_output_dir(cfg: &LoadedConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))
}

pub fn gen_data(cfg: &LoadedConfig) -> Result<DatasetManifest, CliError> {
    let c = &cfg.config;
    ensure_output_dir(cfg)?;
    let class1 = c.target.sample(c.n1, &mut create_rng(c.seed, STREAM_CLASS1));
    let (instrumental, source) = match &c.instrumental {
        InstrumentalSpec::Keyword(_) => (Distribution::from(fit_gaussian_moments(&class1)?), "moment_fit"),
        InstrumentalSpec::Distribution(d) => (d.clone(), "config"),
    };
    let class0 = instrumental.sample(c.n0, &mut create_rng(c.seed, STREAM_CLASS0));
    let ds = LabeledDataset::from_classes(&class1, &class0, &mut create_rng(c.seed, STREAM_SHUFFLE))?;
    let manifest = DatasetManifest {
        provenance: Provenance::of(cfg),
        file: DATASET_CSV.into(),
        target: c.target.clone(),
        instrumental,
        instrumental_source: source.into(),
        n1: c.n1,
        n0: c.n0,
        streams: DatasetStreams {
            class1: STREAM_CLASS1,
            class0: STREAM_CLASS0,
            shuffle: STREAM_SHUFFLE,
        },
    };
    write_atomic(&out_path(cfg, DATASET_CSV), &ds.to_csv_string())?;
    write_json(&out_path(cfg, DATASET_MANIFEST), &manifest)?;
    println!(
        "gen-data {}: {} points ({} target, {} instrumental) -> {}",
        c.name,
        ds.len(),
        c.n1,
        c.n0,
        out_path(cfg, DATASET_CSV).display()
    );
    Ok(manifest)
}

fn load_dataset(cfg: &LoadedConfig) -> Result<(DatasetManifest, LabeledDataset), CliError> {
    let manifest: DatasetManifest = read_json(&out_path(cfg, DATASET_MANIFEST))?;
    let ds = LabeledDataset::load_csv(out_path(cfg, DATASET_CSV))?;
    if ds.dim() != manifest.target.dim() {
        return Err(Error::DimensionMismatch {
            expected: manifest.target.dim(),
            found: ds.dim(),
        }
        .into());
    }
    Ok((manifest, ds))
}

pub fn train_model(cfg: &LoadedConfig) -> Result<TrainManifest, CliError> {
    let c = &cfg.config;
    let (_, ds) = load_dataset(cfg)?;
    let (model, trace) = train(&ds, &c.train)?;
    let mut loss_csv = String::from("epoch,train_loss,validation_loss\n");
    for e in &trace.epochs {
        let _ = writeln!(loss_csv, "{},{:?},{:?}", e.epoch, e.train_loss, e.validation_loss);
    }
    let manifest = TrainManifest {
        provenance: Provenance::of(cfg),
        model_file: MODEL_JSON.into(),
        loss_trace_file: LOSS_TRACE_CSV.into(),
        train: c.train.clone(),
        epochs_run: trace.epochs.len() - 1,
        best_epoch: trace.best_epoch,
        stopped_early: trace.stopped_early,
        best: trace.best().clone(),
        train_accuracy: trace.train_accuracy,
        validation_accuracy: trace.validation_accuracy,
    };
    write_atomic(&out_path(cfg, MODEL_JSON), &(model.to_json()? + "\n"))?;
    write_atomic(&out_path(cfg, LOSS_TRACE_CSV), &loss_csv)?;
    write_json(&out_path(cfg, TRAIN_MANIFEST), &manifest)?;
    println!(
        "train {}: best epoch {} of {}, validation loss {:.6}, train accuracy {:.4}, validation accuracy {:.4}, full-data accuracy {:.4}",
        c.name,
        manifest.best_epoch,
        manifest.epochs_run,
        manifest.best.validation_loss,
        manifest.train_accuracy,
        manifest.validation_accuracy,
        accuracy(&model, &ds)
    );
    Ok(manifest)
}

fn load_posterior(cfg: &LoadedConfig, manifest: &DatasetManifest, oracle: bool) -> Result<PosteriorFn, CliError> {
    if oracle {
        let post = OraclePosterior::new(manifest.target.clone(), manifest.instrumental.clone(), manifest.n1, manifest.n0)
            .map_err(|e| CliError::Config(format!("--oracle: {e}")))?;
        Ok(post.into())
    } else {
        let model = MlpClassifier::load_json(out_path(cfg, MODEL_JSON))?;
        if model.input_dim() != manifest.target.dim() {
            return Err(Error::DimensionMismatch {
                expected: manifest.target.dim(),
                found: model.input_dim(),
            }
            .into());
        }
        Ok(model.into())
    }
}

fn posterior_name(oracle: bool) -> String {
    if oracle { "oracle" } else { "model" }.into()
}

pub fn sample(cfg: &LoadedConfig, oracle: bool) -> Result<SampleManifest, CliError> {
    let c = &cfg.config;
    let (dm, ds) = load_dataset(cfg)?;
    let est = RatioEstimator::new(load_posterior(cfg, &dm, oracle)?, dm.n0, dm.n1)?;
    let proposal = &dm.instrumental;
    let mut manifest = SampleManifest {
        provenance: Provenance::of(cfg),
        posterior: posterior_name(oracle),
        sampler: c.sampler.clone(),
        meta: SampleMeta::default(),
        samples_file: Some(SAMPLES_CSV.into()),
        weighted_samples_file: None,
        burn_in: None,
        envelope: None,
        importance: None,
    };
    let samples_path = out_path(cfg, SAMPLES_CSV);
    let mut n_written = 0;
    match &c.sampler {
        SamplerSpec::Ar {
            n_target,
            max_proposals,
            workers,
        } => {
            let env = est.estimate_c(&ds)?;
            let out = ar_sample_parallel(&est, &env, proposal, *n_target, *max_proposals, c.seed, STREAM_SAMPLER, *workers)?;
            manifest.envelope = Some(EnvelopeInfo {
                c_dataset: env.value(),
                argmax_point: env.argmax_point().to_vec(),
            });
            manifest.meta = out.meta;
            n_written = out.points.len();
            write_atomic(&samples_path, &points_csv(&out.points, None))?;
        }
        SamplerSpec::Imh { n_steps, burn_in } => {
            let mut rng = create_rng(c.seed, STREAM_SAMPLER);
            let chain = imh_chain(&est, proposal, *n_steps, *burn_in, ImhInit::FromProposal, &mut rng)?;
            manifest.burn_in = Some(chain.burn_in);
            manifest.meta = chain.meta;
            n_written = chain.states.len();
            write_atomic(&samples_path, &points_csv(&chain.states, None))?;
        }
        SamplerSpec::Sir {
            n_proposals,
            m_resampled,
            scheme,
        } => {
            let mut rng = create_rng(c.seed, STREAM_SAMPLER);
            let out = sir_sample(&est, proposal, *n_proposals, *m_resampled, *scheme, &mut rng)?;
            manifest.meta = out.resampled.meta.clone();
            manifest.weighted_samples_file = Some(WEIGHTED_SAMPLES_CSV.into());
            write_atomic(
                &out_path(cfg, WEIGHTED_SAMPLES_CSV),
                &points_csv(&out.weighted.points, out.weighted.weights.as_deref()),
            )?;
            n_written = out.resampled.points.len();
            write_atomic(&samples_path, &points_csv(&out.resampled.points, None))?;
        }
        SamplerSpec::Is { n, integrand } => {
            let f = Integrand::parse(integrand).map_err(|e| CliError::Config(e.to_string()))?;
            let mut rng = create_rng(c.seed, STREAM_SAMPLER);
            let estimate = is_estimate(&est, proposal, &f, *n, &mut rng)?;
            manifest.samples_file = None;
            manifest.meta = SampleMeta {
                sampler: Some(ratio_mc::samplers::SamplerKind::Is),
                seed: c.seed,
                stream_id: STREAM_SAMPLER,
                n_proposed: *n,
                clamp_events: estimate.clamp_events,
                ess: Some(estimate.ess),
                ..SampleMeta::default()
            };
            manifest.importance = Some(IsOutput {
                integrand: f.name().to_string(),
                estimate,
            });
            let _ = fs::remove_file(&samples_path);
        }
    }
    write_json(&out_path(cfg, SAMPLE_META), &manifest)?;
    let m = &manifest.meta;
    match &manifest.importance {
        Some(is) => println!(
            "sample {}: IS estimate of E[{}] = {:.6} +- {:.6} (ESS {:.1})",
            c.name, is.integrand, is.estimate.estimate, is.estimate.std_error, is.estimate.ess
        ),
        None => println!(
            "sample {}: {} points from {} proposals, acceptance rate {:.4}, clamp events {}, cap events {}",
            c.name, n_written, m.n_proposed, m.acceptance_rate, m.clamp_events, m.cap_events
        ),
    }
    if m.budget_exhausted {
        return Err(CliError::BudgetExhausted(format!(
            "{} of the requested points accepted after {} proposals; partial output written to {}",
            m.n_accepted,
            m.n_proposed,
            samples_path.display()
        )));
    }
    Ok(manifest)
}

/// Fractions of `points` nearest to each mixture component mean.
pub fn mode_masses(mixture: &ratio_mc::GaussianMixture, points: &Points) -> ModeMasses {
    let centers: Vec<&[f64]> = mixture.components().iter().map(|g| g.mean()).collect();
    let mut counts = vec![0usize; centers.len()];
    for x in points.rows() {
        let nearest = centers
            .iter()
            .map(|c| c.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        counts[nearest] += 1;
    }
    let n = points.len().max(1) as f64;
    let observed: Vec<f64> = counts.iter().map(|&k| k as f64 / n).collect();
    let expected = mixture.weights().to_vec();
    let max_abs_deviation = observed.iter().zip(&expected).map(|(o, e)| (o - e).abs()).fold(0.0, f64::max);
    ModeMasses {
        expected,
        observed,
        max_abs_deviation,
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Bounding box of the dataset, padded by 5% of its extent on each side.
fn grid_bounds(ds: &LabeledDataset) -> (Vec<f64>, Vec<f64>) {
    let d = ds.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for x in ds.points().rows() {
        for j in 0..d {
            lo[j] = lo[j].min(x[j]);
            hi[j] = hi[j].max(x[j]);
        }
    }
    for j in 0..d {
        let pad = 0.05 * (hi[j] - lo[j]).max(1e-9);
        lo[j] -= pad;
        hi[j] += pad;
    }
    (lo, hi)
}

fn ratio_grid_csv<P: Posterior>(est: &RatioEstimator<P>, lo: &[f64], hi: &[f64], n: usize) -> String {
    let node = |j: usize, i: usize| {
        if i + 1 == n {
            hi[j]
        } else {
            lo[j] + (hi[j] - lo[j]) * i as f64 / (n - 1) as f64
        }
    };
    let mut s = String::new();
    match lo.len() {
        1 => {
            s.push_str("x0,log_ratio\n");
            for i in 0..n {
                let x = [node(0, i)];
                let _ = writeln!(s, "{:?},{:?}", x[0], est.log_ratio_hat(&x));
            }
        }
        _ => {
            s.push_str("x0,x1,log_ratio\n");
            for i in 0..n {
                for k in 0..n {
                    let x = [node(0, i), node(1, k)];
                    let _ = writeln!(s, "{:?},{:?},{:?}", x[0], x[1], est.log_ratio_hat(&x));
                }
            }
        }
    }
    s
}

pub fn evaluate(cfg: &LoadedConfig, oracle: bool) -> Result<EvaluationReport, CliError> {
    let c = &cfg.config;
    let ev = &c.evaluation;
    let (dm, ds) = load_dataset(cfg)?;
    let sm: SampleManifest = read_json(&out_path(cfg, SAMPLE_META))?;
    let oracle = oracle || sm.posterior == "oracle";
    let d = dm.target.dim();

    let (reference, reference_info) = match cfg.reference_file() {
        Some(path) => {
            let pts = read_points_csv(&path)?;
            let info = ReferenceInfo {
                source: path.display().to_string(),
                n: pts.len(),
                stream_id: None,
            };
            (pts, info)
        }
        None => {
            let pts = dm.target.sample(ev.n_reference, &mut create_rng(c.seed, STREAM_REFERENCE));
            let info = ReferenceInfo {
                source: "target".into(),
                n: pts.len(),
                stream_id: Some(STREAM_REFERENCE),
            };
            (pts, info)
        }
    };
    if reference.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: reference.dim(),
        }
        .into());
    }

    let mut report = EvaluationReport {
        provenance: Provenance::of(cfg),
        posterior: posterior_name(oracle),
        alpha: ev.alpha,
        n_samples: 0,
        reference: reference_info,
        two_sample: None,
        passes: None,
        mode_masses: None,
        importance: None,
        ratio_grid: GridInfo {
            file: RATIO_GRID_CSV.into(),
            nodes_per_axis: ev.grid_nodes,
            lo: Vec::new(),
            hi: Vec::new(),
        },
    };

    if let Some(is) = &sm.importance {
        let f = Integrand::parse(&is.integrand).map_err(|e| CliError::Config(e.to_string()))?;
        let values: Vec<f64> = reference.rows().map(|x| f.eval(x)).collect();
        let (reference_mean, reference_std_error) = mean_and_se(&values);
        let se = (is.estimate.std_error.powi(2) + reference_std_error.powi(2)).sqrt();
        report.n_samples = is.estimate.n;
        report.importance = Some(IsCheck {
            integrand: is.integrand.clone(),
            estimate: is.estimate.estimate,
            std_error: is.estimate.std_error,
            reference_mean,
            reference_std_error,
            z_score: if se > 0.0 {
                (is.estimate.estimate - reference_mean) / se
            } else {
                0.0
            },
        });
    } else {
        let samples = read_points_csv(&out_path(cfg, SAMPLES_CSV))?;
        let n_projections = if d > 1 { ev.n_projections } else { 0 };
        let two = two_sample_report(&samples, &reference, n_projections, &mut create_rng(c.seed, STREAM_PROJECTIONS))?;
        report.n_samples = samples.len();
        report.passes = Some(two.passes(ev.alpha));
        if let Distribution::GaussianMixture(m) = &dm.target {
            report.mode_masses = Some(mode_masses(m, &samples));
        }
        report.two_sample = Some(two);
    }

    let est = RatioEstimator::new(load_posterior(cfg, &dm, oracle)?, dm.n0, dm.n1)?;
    let (lo, hi) = grid_bounds(&ds);
    if d <= 2 {
        write_atomic(&out_path(cfg, RATIO_GRID_CSV), &ratio_grid_csv(&est, &lo, &hi, ev.grid_nodes))?;
    }
    report.ratio_grid.lo = lo;
    report.ratio_grid.hi = hi;
    write_json(&out_path(cfg, REPORT_JSON), &report)?;

    match (&report.two_sample, &report.importance) {
        (Some(t), _) => println!(
            "evaluate {}: {} samples vs {} reference, max KS statistic {:.4}, Bonferroni p {:.3e} ({} at alpha {})",
            c.name,
            report.n_samples,
            report.reference.n,
            t.max_statistic(),
            t.bonferroni_p_value,
            if t.passes(ev.alpha) { "pass" } else { "FAIL" },
            ev.alpha
        ),
        (None, Some(is)) => println!(
            "evaluate {}: IS estimate {:.6} vs reference {:.6}, z = {:.2}",
            c.name, is.estimate, is.reference_mean, is.z_score
        ),
        (None, None) => {}
    }
    if let Some(m) = &report.mode_masses {
        println!("evaluate {}: largest per-mode mass deviation {:.4}", c.name, m.max_abs_deviation);
    }
    Ok(report)
}

/// Writes the preset's config into `dir` and returns its path.
pub fn write_preset(name: &str, dir: &Path) -> Result<PathBuf, CliError> {
    let cfg = crate::presets::preset(name)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join("config.json");
    write_atomic(&path, &cfg.to_json())?;
    Ok(path)
}

pub fn demo(cfg: &LoadedConfig, oracle: bool) -> Result<(), CliError> {
    gen_data(cfg)?;
    if !oracle {
        train_model(cfg)?;
    }
    sample(cfg, oracle)?;
    evaluate(cfg, oracle)?;
    Ok(())
}
