//! Numerical toolkit for Gaussian multi-bubble partitions.
//!
//! * [`geometry`]: regular-simplex directions, shifted simplicial-cone
//!   partitions and their interfaces.
//! * [`measure`]: Gaussian volumes, interface measures and barycenters.
//! * [`simplicial`]: the cost functional of the simplicial candidates and its
//!   derivative identities.
//! * [`stability`]: the second-variation form and stability operator on
//!   curve networks.
//! * [`frontflow`]: direct optimizers over 1-D partitions and planar
//!   polygonal networks.
//! * [`verify`]: the acceptance checks, shared by the test suite and the CLI.

mod error;
pub mod frontflow;
pub mod geometry;
pub mod measure;
pub mod normal;
pub mod quadrature;
pub mod report;
pub mod simplicial;
pub mod stability;
pub mod verify;

pub use error::{Error, Result};

/// Crate version, embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
