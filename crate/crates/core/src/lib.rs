//! Simulation and exact-computation laboratory for critical spread-out
//! lattice models: oriented percolation, the contact process (discretized and
//! in continuous time) and lattice trees, together with generating-function
//! checks of the lace-expansion identities behind their spatial moment bounds.

pub mod acceptance;
pub mod contact;
pub mod error;
pub mod exact;
pub mod exec;
pub mod growth;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod moments;
pub mod rng;
pub mod scaling;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
pub use kernel::{build_kernel, Kernel, KernelSpec, Profile};
pub use lattice::Site;
pub use moments::{MomentRow, MomentTable, NormMode};
