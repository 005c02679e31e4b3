//! Finite-dimensional scattering theory for Lindblad master equations.
//!
//! The crate works on lattice truncations: operators are dense complex matrices,
//! Lindbladians are dense superoperators, and every `t → ∞` limit is replaced by
//! plateau detection inside a pre-recurrence time window.

pub mod capture;
pub mod hilbert;
pub mod limits;
pub mod linalg;
pub mod lindblad;
pub mod model;
pub mod random;
pub mod report;
pub mod scattering;
pub mod smoothness;

pub use linalg::{CMat, CVec, SubspaceBasis};
