//! Conformally flat approximation of length metrics on a box.
//!
//! Pipeline: a lattice oracle for the input metric, a weighted geodesic
//! net whose graph distance tracks the metric, a conformal factor `f`
//! synthesized from the net, and checks comparing `e^f * D_0` against the
//! input metric.

pub mod config;
pub mod cost;
pub mod digest;
pub mod dijkstra;
pub mod error;
pub mod eval;
pub mod geom;
pub mod grid_io;
pub mod kv;
pub mod lattice;
pub mod graph;
pub mod metric;
pub mod pipeline;
pub mod synth;
pub mod verify;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
pub use geom::Point;
