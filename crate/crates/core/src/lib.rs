//! `tpp` — a modular toolkit for multivariate temporal point processes.
//!
//! The library composes conditional intensity functions from four
//! interchangeable parts: an exogenous (baseline) intensity, an endogenous
//! impact-coefficient model, a bank of decay kernels, and an outer
//! activation. Models built this way cover the linear Hawkes process and a
//! family of its variants (factorized, feature-driven, self-correcting,
//! mutually-correcting).
//!
//! On top of the intensity it provides:
//!
//! - CSV ingestion of event sequences and categorical/numerical features
//!   ([`ingest`]);
//! - corpus preprocessing: stitching, superposing, aggregating, and
//!   history-window batch sampling ([`preprocess`]);
//! - parameter learning by stochastic gradient descent under maximum
//!   likelihood, least-squares, or cross-entropy losses, with L1/L2
//!   regularization and nonnegativity projection ([`learning`]);
//! - sequence simulation by Ogata thinning, Monte-Carlo event-count
//!   prediction, and time-rescaling residuals ([`simulate`]);
//! - model persistence through a versioned JSON manifest ([`manifest`]),
//!   named model presets ([`presets`]), and Granger-causality /
//!   exogenous-intensity export ([`export`]).

// index arithmetic over flat parameter arrays reads better as plain loops
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod data;
pub mod error;
pub mod export;
pub mod ingest;
pub mod kernels;
pub mod learning;
pub mod manifest;
pub mod math;
pub mod model;
pub mod preprocess;
pub mod presets;
pub mod simulate;

pub use data::{Database, EventSequence};
pub use error::{Error, Result};
pub use kernels::KernelBank;
pub use model::HawkesModel;
