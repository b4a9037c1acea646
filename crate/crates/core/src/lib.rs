//! Symmetric nonnegative matrix factorization, `min_{X >= 0} |M - X X^T|_F^2`,
//! by block successive upper-bound minimization.
//!
//! Two block engines are provided: [`sbsum`] updates one entry at a time
//! through a cubic closed form, [`vbsum`] updates one row at a time. The
//! [`scheduler`] drives serial sweeps, [`parallel`] runs rounds of
//! simultaneous updates on worker threads.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod cubic;
pub mod error;
pub mod factor;
pub mod matrix;
pub mod metrics;
pub mod mtx;
pub mod parallel;
pub mod sbsum;
pub mod scheduler;
pub mod simgen;
pub mod vbsum;

pub use error::{Error, Result};
pub use factor::{FactorMatrix, GramCache};
pub use matrix::SimilarityMatrix;
pub use metrics::{evaluate, objective, StationarityReport};
pub use parallel::{run_parallel, ParallelConfig, ParallelOutcome, StepsizeRule};
pub use scheduler::{
    run_solver, BlockOrderPolicy, Engine, SolveOutcome, Solver, SolverConfig, StopReason,
    TraceRecord,
};
pub use simgen::{generate, initialize, GeneratorSpec, Method};
