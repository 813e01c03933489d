//! Slot filling for task-oriented language understanding.
//!
//! Three bidirectional-LSTM sequence taggers share one small tensor engine:
//! a single-domain baseline, a multi-domain model with a shared trunk and
//! per-domain output heads, and a concept tagger that predicts `B`/`I`/`O`
//! for one slot at a time, conditioned on the averaged embedding of the
//! slot's natural-language description. Because the concept tagger carries
//! no per-domain parameters it can tag a new domain from its schema alone.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod nn;
pub mod text;
pub mod training;

pub use error::{Error, Result};
