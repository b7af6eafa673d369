//! Dense tensors and the reverse-mode differentiation engine.

mod graph;
pub mod init;
mod params;
mod tensor;

pub use graph::{Gradients, Graph, NodeId, PROB_FLOOR};
pub use params::{ParamId, ParamStore};
pub use tensor::{matmul, sigmoid, softmax_rows, Tensor};
