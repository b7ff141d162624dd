//! Density-ratio estimation by probabilistic classification, and the
//! acceptance-rejection, independent Metropolis-Hastings and
//! sampling-importance-resampling samplers driven by that ratio.
//!
//! A classifier trained to tell target draws (label 1) from instrumental
//! draws (label 0) estimates the posterior `r(x)`. The odds
//! `(n0 / n1) * r / (1 - r)` then estimate `p1(x) / p0(x)` without either
//! density being known.

pub mod classifier;
pub mod dataset;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod linalg;
pub mod points;
pub mod ratio;
pub mod rng;
pub mod samplers;

pub use classifier::{
    bce_loss, train, ConstantPosterior, MlpClassifier, OraclePosterior, Posterior, PosteriorFn,
    TrainConfig,
};
pub use dataset::{build_dataset, stratified_split, LabeledDataset};
pub use distributions::{fit_gaussian_moments, Distribution, Gaussian, GaussianMixture};
pub use error::{Error, Result};
pub use points::Points;
pub use ratio::{EnvelopeConstant, RatioEstimator};
pub use rng::{create_rng, RngStream};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
