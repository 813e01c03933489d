//! Dense tensors, reverse-mode differentiation and the layer primitives
//! shared by all taggers.

pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod param;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, grad_check_params, relative_error};
pub use layers::{affine, bilstm, lstm_cell, softmax_xent, BiLstmLayer, Dense, LstmCellParams, LstmLayer};
pub use optim::{RmsProp, RmsPropConfig};
pub use param::{glorot_uniform, ParamId, ParamStore, Parameter};
pub use tape::{sigmoid, softmax, Gradients, Tape, Var};
pub use tensor::Tensor;
