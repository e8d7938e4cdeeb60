pub mod geodesics;
pub mod io;
pub mod linearize;
pub mod partition;
pub mod planar;
pub mod spatial;
pub mod weighted;

pub use geodesics::{build_g1, untangle, GeodesicSet, UntangleReport};
pub use linearize::{choose_tau_k, linearize, piecewise_linearize, EdgeArcs, LinearizeReport};
pub use partition::{choose_grid, GridPartition, GridReport};
pub use planar::{insert_merge_vertices, CurveEdge, CurveGraph, PlanarReport, VertexKind};
pub use weighted::{assign_weights, Edge, GraphWorkspace, WeightedGraph};
