//! The bottleneck objective family: exact evaluation, fixed-multiplier
//! optimization, multiplier sweeps and the IBP/PIBP equivalence check.

pub mod equivalence;
pub mod evaluator;
pub mod grid;
pub mod objective;
pub mod optimize;
pub mod support;
pub mod sweep;

pub use equivalence::{equivalence_check, EquivalenceReport};
pub use evaluator::{Evaluator, InfoPair};
pub use grid::{grid_oracle, grid_optimal_set, GridResult};
pub use objective::{evaluate_ibo, Direction, IboKind, IboSpec};
pub use optimize::{is_local_optimum, optimize_encoder, Method, Optimized, OptimizerOptions};
pub use support::Support;
pub use sweep::{beta_sweep, SweepResult, SweepRow};
