//! Critical branching random walk on `Z^d`: exact local-time moments through
//! skeleton diagrams, Monte Carlo tail estimates, and the fits and checks that
//! compare the two.

pub mod analysis;
pub mod diagrams;
pub mod error;
pub mod experiment;
pub mod lattice;
pub mod moments;
pub mod numeric;
pub mod offspring;
pub mod simulator;
pub mod skeletons;
pub mod validation;

pub use error::{LabError, Result};
pub use lattice::{KernelQuery, LatticeField};
