//! Attribute synthetic images to the generator that produced them.
//!
//! Each candidate generator is inverted against the probe image by
//! multi-start gradient descent on the per-pixel reconstruction error. The
//! generator with the smallest residual wins, and the residuals of all
//! candidates are folded into a confidence score in `[-1, 1]`.
//!
//! The crate also carries everything needed to reproduce the MNIST
//! autoencoder experiments end to end: IDX ingestion, autoencoder training,
//! PNG/JPEG perturbation of probes, and ROC/AUC evaluation.

pub mod attribution;
pub mod data;
mod error;
pub mod eval;
mod fsutil;
mod linalg;
pub mod loss;
pub mod mlp;
pub mod optim;
pub mod perturb;
pub mod seed;
pub mod tensor;
pub mod train;

pub use attribution::{
    attribute, attribute_many, invert, invert_many, one_vs_rest_score, pair_score, reconstruction_loss,
    AttributionReport, InversionConfig, InversionResult, LatentInit, ReportRecord,
};
pub use error::{Error, ErrorClass, Result};
pub use loss::LossKind;
pub use mlp::{Activation, DenseLayer, GradientBundle, MlpGenerator};
pub use tensor::{ImageShape, ImageTensor, LatentVector};

pub use fsutil::write_atomic;
