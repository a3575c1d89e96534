//! Minimal reverse-mode autodiff for the sequence models.
//!
//! Everything is f64 and 2-D: a [`Tensor`] is a row-major matrix, a
//! [`Graph`] is a one-shot tape of eager ops, [`ParamSet`] holds named
//! learnable tensors across steps, and [`Adam`] updates them from the
//! gradients of one backward pass. The GRU and dense layers in [`nn`] are
//! composed entirely from the tape's primitive ops, so gradient checking
//! the primitives covers the recurrent models too.

pub mod adam;
pub mod graph;
pub mod nn;
pub mod tensor;

pub use adam::Adam;
pub use graph::{Gradients, Graph, Var};
pub use nn::{dense, gru_sequence, gru_step, BoundParams, ParamSet};
pub use tensor::Tensor;
