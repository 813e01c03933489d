//! Token-level F1, dev-score aggregation and the zero-shot and
//! learning-curve experiment drivers.

mod experiments;
mod metrics;

pub use experiments::{
    kind_available, learning_curve, zero_shot_eval, CurveCell, CurveOptions, CurveTable, DEV_FRACTION,
};
pub use metrics::{dev_weighted_score, evaluate, token_f1_per_slot, weighted_f1, MetricsReport, SlotScore, Weighting};
