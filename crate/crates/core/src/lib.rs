//! Near-field tri-polarized holographic MIMO surface links: channel
//! synthesis from the dyadic Green's function, cross-polarization and
//! multi-user precoding, power allocation, and link metrics.

pub mod config;
pub mod correlation;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod green_channel;
pub mod metrics;
pub mod numerics;
pub mod polarization;
pub mod power;
pub mod precoding;
pub mod report;

pub use error::{Error, Result};
pub use geometry::{Layout, Point, Role, Scenario, SurfaceSpec, User};
pub use green_channel::{assemble_channel, DyadicBlock, PolarizedChannel};
pub use numerics::{ComplexMatrix, DEFAULT_TOL};
pub use polarization::Polarization;
