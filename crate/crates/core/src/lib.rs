//! Evaluation metrics and reference kernels for video-aligned text-to-audio
//! generation.
//!
//! * [`embedset`]: embedding sets, the `T2AVEMB1` file format and pair manifests.
//! * [`stats`]: mergeable Gaussian summaries, symmetric eigensolver, Fréchet distance.
//! * [`metrics`]: FD/FAD, FAVD, FATD, FA(VT)D, Inception Score and paired KL.
//! * [`mechanism`]: temporal self-attention, fusion, VCLAP loss and diffusion objective.
//! * [`simbench`]: synthetic populations and the metric-validation protocols.
//!
//! The numerical core is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below fix the double-precision instantiation used by the metrics.

pub mod embedset;
pub mod error;
pub mod mechanism;
pub mod metrics;
pub mod report;
pub mod scalar;
pub mod simbench;
pub mod stats;

pub use embedset::{EmbeddingSet, Modality, PairManifest, ProjectionSpec, ShiftMode};
pub use error::{Error, Result};
pub use metrics::{MetricKind, MetricReport};
pub use report::Format;
pub use scalar::Scalar;
pub use simbench::{PopulationSpec, ValidationReport};

pub type Stats = stats::GaussianStats<f64>;
pub type Stats32 = stats::GaussianStats<f32>;
pub type Mat = stats::Matrix<f64>;
pub type Mat32 = stats::Matrix<f32>;
pub type Seq = mechanism::FeatureSeq<f64>;
pub type Seq32 = mechanism::FeatureSeq<f32>;
pub type Batch = mechanism::SeqBatch<f64>;
pub type Latent = mechanism::Latent<f64>;
pub type Schedule = mechanism::DiffusionSchedule<f64>;
