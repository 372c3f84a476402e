//! Variational optimizers: exact-topology search over 1-D partitions and
//! volume-constrained descent of planar curve networks.

mod network;
mod oned;
mod optimize;

pub use network::{Chain, PolygonalNetwork, TopologyEvent, VertexKind};
pub use oned::{label_sequences, optimize_1d, OneDResult, Partition1D, MAX_BREAKS};
pub use optimize::{
    first_variation_residual, optimize_2d, optimize_2d_with, volume_project, ChainResidual,
    JunctionResidual, OptimizeOptions, OptimizeResult, ResidualReport, TraceRow, MAX_NODES, VOLUME_TOL,
};
