//! Loss assembly, training loops, and validation-based model selection.

pub mod eval;
pub mod loss;
pub mod report;
pub mod trainer;

pub use eval::{evaluate, ClassRow, EvalReport, EvalRows, RegRow, AP_K};
pub use loss::{link_loss, squared_error_sum, sum_terms};
pub use report::{EpochRow, TrainReport};
pub use trainer::{build_adjacency, train, train_from_params, TrainOutcome};
