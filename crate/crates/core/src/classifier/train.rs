//! Minibatch training with early stopping on a stratified validation split.
//!
//! Stream ids under `TrainConfig::seed`: 0 initializes weights, 1 shuffles
//! minibatches, 2 draws the train/validation split.

use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_split, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::RngStream;

use super::mlp::{Activation, MlpClassifier, Standardizer};
use super::{accuracy, bce_loss};

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_SPLIT: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub early_stop_patience: usize,
    /// Hidden layer widths; empty gives logistic regression.
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            seed: 0,
            early_stop_patience: 20,
            hidden_layers: vec![64, 64],
            activation: Activation::Tanh,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be finite and positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation_fraction must be in (0,1)"));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::invalid("adam needs beta1, beta2 in [0,1) and eps > 0"));
            }
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden layers must be nonempty"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean clamped BCE per training point.
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    /// Entry 0 is the initialization, entry `e` the end of epoch `e`.
    pub epochs: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
}

impl LossTrace {
    pub fn best(&self) -> &EpochLoss {
        &self.epochs[self.best_epoch]
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("epoch,train_loss,validation_loss\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{:.16e},{:.16e}\n", e.epoch, e.train_loss, e.validation_loss));
        }
        s
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

fn step(params: &mut [f64], grad: &[f64], cfg: &TrainConfig, adam: &mut AdamState) {
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            adam.t += 1;
            let c1 = 1.0 - beta1.powi(adam.t);
            let c2 = 1.0 - beta2.powi(adam.t);
            for i in 0..params.len() {
                let g = grad[i];
                adam.m[i] = beta1 * adam.m[i] + (1.0 - beta1) * g;
                adam.v[i] = beta2 * adam.v[i] + (1.0 - beta2) * g * g;
                let m_hat = adam.m[i] / c1;
                let v_hat = adam.v[i] / c2;
                params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Trains `[d, hidden..., 1]` on `ds` by minimizing the mean BCE per
/// minibatch. Returns the parameters with the lowest validation loss seen
/// (initialization included), plus the per-epoch loss trace.
pub fn train(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<(MlpClassifier, LossTrace)> {
    cfg.validate()?;
    ds.require_both_classes()?;
    let split = stratified_split(
        ds,
        1.0 - cfg.validation_fraction,
        &mut RngStream::new(cfg.seed, STREAM_SPLIT),
    )?;
    let (train_set, val_set) = (&split.train, &split.validation);

    let mut sizes = vec![ds.dim()];
    sizes.extend_from_slice(&cfg.hidden_layers);
    sizes.push(1);
    let mut model = MlpClassifier::new(&sizes, cfg.activation, &mut RngStream::new(cfg.seed, STREAM_INIT))?;
    model.set_standardizer(Standardizer::fit(train_set.points()));

    let n_train = train_set.len() as f64;
    let n_val = val_set.len() as f64;
    let evaluate = |m: &MlpClassifier, epoch: usize| -> Result<EpochLoss> {
        let e = EpochLoss {
            epoch,
            train_loss: bce_loss(m, train_set) / n_train,
            validation_loss: bce_loss(m, val_set) / n_val,
        };
        if !e.train_loss.is_finite() || !e.validation_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("train {} validation {}", e.train_loss, e.validation_loss),
            });
        }
        Ok(e)
    };

    let mut epochs = vec![evaluate(&model, 0)?];
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_val = epochs[0].validation_loss;
    let mut stopped_early = false;

    let mut shuffle_rng = RngStream::new(cfg.seed, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grad = vec![0.0; model.n_params()];
    let mut adam = AdamState {
        m: vec![0.0; model.n_params()],
        v: vec![0.0; model.n_params()],
        t: 0,
    };
    let points = train_set.points();
    let labels = train_set.labels();

    for epoch in 1..=cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let loss = model.loss_and_grad(chunk.iter().map(|&i| (points.row(i), labels[i])), &mut grad);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    detail: format!("minibatch loss {loss}"),
                });
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            step(model.params_mut(), &grad, cfg, &mut adam);
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: "parameters became non-finite".into(),
            });
        }
        let e = evaluate(&model, epoch)?;
        if e.validation_loss < best_val {
            best_val = e.validation_loss;
            best_epoch = epoch;
            best = model.clone();
        }
        epochs.push(e);
        if epoch - best_epoch > cfg.early_stop_patience {
            stopped_early = true;
            break;
        }
    }

    let trace = LossTrace {
        train_accuracy: accuracy(&best, train_set),
        validation_accuracy: accuracy(&best, val_set),
        epochs,
        best_epoch,
        stopped_early,
    };
    Ok((best, trace))
}
