//! Log-proportional multi-domain batch scheduling, concept-tagger example
//! construction, the RMSProp training loop and checkpoint files.

mod checkpoint;
mod config;
mod examples;
mod schedule;
mod trainer;

pub use checkpoint::{Hyperparams, ModelCheckpoint, NamedTensor, FORMAT_VERSION};
pub use config::TrainConfig;
pub use examples::{ct_make_examples, CtExample};
pub use schedule::{make_schedule, BatchSampler, MixSchedule};
pub use trainer::{train, DevPoint, DomainSplit, TrainLog, Trained};
