//! Exact rational computations for differential graded operads.

pub mod barcobar;
pub mod complexes;
pub mod error;
pub mod exactla;
pub mod opcoop;
pub mod perm;
pub mod selftest;
pub mod symmod;
pub mod tangent;
pub mod twisting;

pub use error::{OpError, Result};
