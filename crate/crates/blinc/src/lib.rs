//! Broad-learning classifiers with incremental training on added inputs.
//!
//! A broad-learning model maps inputs through random feature and enhancement
//! nodes into a tall activation matrix and solves its output weights with a
//! ridge pseudoinverse. When new training rows arrive, the pseudoinverse is
//! updated in place of a full retrain; this crate provides the baseline
//! update and two cheaper correction forms along with an automatic dispatch
//! between them (see [`incremental`]).
//!
//! The crate is organized as:
//!
//! * [`matrix`] — dense row-major matrices and the multiply kernels,
//! * [`linalg`] — factor-and-solve primitives and pseudoinverses,
//! * [`incremental`] — the row-increment update itself,
//! * [`model`] — the broad-learning model: random mappings, training,
//!   prediction, save/load,
//! * [`data`] — IDX dataset parsing, synthetic data, one-hot labels.
//!
//! Heavy products run on the rayon pool when the `parallel` feature (on by
//! default) is enabled; disabling it yields a fully sequential build with
//! identical results up to floating-point reassociation.

pub mod data;
pub mod incremental;
pub mod linalg;
pub mod matrix;
pub mod model;

pub use incremental::{
    add_inputs, BStrategy, IncrementBatch, PhaseTimings, PinvState, UpdateError, UpdateOptions,
    UpdateOutcome, UpdateStats,
};
pub use linalg::{LinalgError, RidgeParam, SolveRoute};
pub use matrix::Matrix;
pub use model::{Architecture, BlsModel, ModelError};
