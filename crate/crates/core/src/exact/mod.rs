//! Exact computations at tiny scale: the two-point function of oriented
//! percolation, the lace coefficients obtained by inverting its recursion,
//! and lattice-tree enumeration.

pub mod field;
pub mod lace;
pub mod trees;
pub mod two_point;

pub use field::Field;
pub use lace::{lace_invert, resubstitute, PiTable};
pub use trees::{enumerate_lattice_trees, lt_series_stats, LtSeriesStats, TreeTable};
pub use two_point::{exact_two_point, exact_two_point_rational, ExactConfig, TwoPointTable};
