//! Numerical laboratory for expander entropy, conjugate heat flows and the
//! forward reduced volume on symmetry-reduced Ricci flows.

pub mod acceptance;
pub mod conjugate_heat;
pub mod entropy;
pub mod error;
pub mod geometry;
pub mod flow;
pub mod numerics;
pub mod reduced;
pub mod report;

pub use error::{LabError, Result};
pub use numerics::{TimeSeries, ToleranceConfig};
