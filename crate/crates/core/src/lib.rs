//! Piecewise-linear boundary equilibrium bifurcations in three dimensions:
//! exact half-flows, a return map built from virtual section crossings,
//! the reduced one-dimensional map, and bifurcation sweeps.

pub mod analysis;
pub mod error;
pub mod flow;
pub mod hybrid;
pub mod linalg3;
pub mod ode;
pub mod onedmap;
mod par;
pub mod rootfind;
pub mod system;

pub use error::{BebError, Result};
pub use linalg3::{Mat3, Vec3};
pub use system::{Side, System, SystemParams};
pub mod retmap;
pub mod settings;

pub use retmap::{DiscontinuityTrace, ReturnMap, SectionPoint};
pub use settings::Settings;
