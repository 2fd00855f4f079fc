//! Core numerics for continuous-time recurrent policies: cell dynamics and
//! solvers, convolutional feature extraction, behavior-cloning training, and
//! closed-form intervention analysis.
//!
//! Everything is generic over the scalar type through [`scalar::Real`];
//! the `*32`/`*64` aliases below pin the two supported precisions.

pub mod causal;
pub mod cell;
pub mod container;
pub mod conv;
pub mod diagnostics;
pub mod image;
pub mod linalg;
pub mod policy;
pub mod scalar;
pub mod train;

pub use scalar::Real;

pub type Mat32 = linalg::Mat<f32>;
pub type Mat64 = linalg::Mat<f64>;
pub type CellParams32 = cell::CellParams<f32>;
pub type CellParams64 = cell::CellParams<f64>;
pub type CellState32 = cell::CellState<f32>;
pub type CellState64 = cell::CellState<f64>;
pub type Policy64 = policy::Policy<f64>;
