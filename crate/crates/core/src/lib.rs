//! Exact solvers for committee election under ordered weighted averaging of
//! Hamming distances in approval voting.
//!
//! The central problem is the k-sum problem: choose a committee (a 0/1
//! vector over candidates) minimising the sum of the `k` largest Hamming
//! distances to the voters' approval profiles. `k = n` is minisum, `k = 1`
//! is minimax.
//!
//! * [`model`]: instances, committees, distances and OWA scores.
//! * [`gen_io`]: random instances and the instance / CSV file formats.
//! * [`polysolve`]: minisum, cardinality-constrained minisum, bottom-h.
//! * [`bounds`]: variable fixing, the k / k+1 bound chain, separation.
//! * [`bnb`]: branch-and-bound, brute force and the k = n..1 sweep.
//! * [`milp_export`]: MILP formulations and LP-format export.

pub mod bnb;
pub mod bounds;
pub mod error;
pub mod gen_io;
pub mod milp_export;
pub mod model;
pub mod polysolve;

pub use error::{Error, Result};
pub use model::{Bits, Committee, DistanceReport, Instance, OwaWeights};
