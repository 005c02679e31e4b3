//! Scenario files, presets, the run pipeline and the verification suites.

pub mod analysis;
pub mod assemble;
pub mod pipeline;
pub mod presets;
pub mod scenario;
pub mod verify;
