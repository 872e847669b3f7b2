//! Inspector-executor for sparse kernels (SpMV and SpTRSV) that mines
//! partially strided codelets from the kernel's access functions.
//!
//! The inspector ([`miner::inspect`]) tabulates the access functions over the
//! sparsity pattern, partitions rows into independent groups, and covers each
//! window of rows with the cheapest list of BLAS / PSC_I / PSC_II codelets.
//! The executor ([`executor::Executor`]) runs that list through three generic
//! codelet bodies.

pub mod bench;
pub mod codelet;
pub mod executor;
pub mod kernel;
pub mod matrix;
pub mod miner;
pub mod schedule;

pub use codelet::{codelet_cost, Codelet, CostModelResult};
pub use executor::{execute_plan, ExecutionContext, Executor};
pub use kernel::{classify_codelet, compute_access_functions, compute_fopd, CodeletClass, KernelKind};
pub use matrix::{CsrMatrix, TriangularMatrix};
pub use miner::{inspect, CodeletPlan, InspectOptions};
