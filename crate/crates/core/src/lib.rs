//! Temporal knowledge base completion with complex-valued CP decompositions.
//!
//! Facts `(subject, predicate, object, timestamp)` index a binary order-4
//! tensor. This crate factorizes it with three models:
//!
//! * `ComplEx`: `Re <u_s, v_p, conj(u_o)>`, time ignored;
//! * `TComplEx`: `Re <u_s, v_p, conj(u_o), t_t>`;
//! * `TNTComplEx`: `Re <u_s, vt_p * t_t + v_p, conj(u_o)>`.
//!
//! Training minimizes a full-softmax cross entropy over objects (optionally
//! also over timestamps) plus per-sample weighted nuclear-norm penalties and a
//! smoothness penalty on consecutive timestamp embeddings, using Adagrad.
//! Evaluation reports filtered MRR and Hits@k.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`, which is what the CLI and checkpoints use.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod gradient;
pub mod model;
pub mod oracle;
pub mod regularization;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use model::{ModelKind, ModelShape};
pub use scalar::Scalar;

pub use num_complex::Complex;

/// Double precision model parameters.
pub type ModelParams = model::ModelParams<f64>;
/// Single precision model parameters.
pub type ModelParams32 = model::ModelParams<f32>;
/// Double precision embedding table.
pub type EmbeddingTable = model::EmbeddingTable<f64>;
/// Double precision gradients.
pub type Gradients = gradient::Gradients<f64>;
/// Double precision Adagrad state.
pub type AdagradState = training::AdagradState<f64>;
/// Double precision trainer.
pub type Trainer = training::Trainer<f64>;
