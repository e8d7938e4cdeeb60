//! Shared fixtures for the criterion benchmarks in `benches/`.

use std::path::Path;

use conflat::config::RunConfig;
use conflat::pipeline::{self, Instance};

/// Euclidean unit box at a coarse construction epsilon; builds in seconds.
pub const SMALL: &str = "\
metric = euclidean
R = 1
d = 2
eps = 0.25
eps_construct = 16
h = 0.03125
h_f_factor = 4
";

/// Smooth conformal density on the unit box.
pub const SINBUMP: &str = "\
metric = conformal
R = 1
d = 2
density = sinbump(0.5)
eps = 0.25
eps_construct = 16
h = 0.03125
h_f_factor = 4
";

pub fn config(text: &str) -> RunConfig {
    RunConfig::parse(text, "bench", Path::new(".")).expect("bench config")
}

pub fn instance(text: &str) -> Instance {
    pipeline::build(&config(text), &|_| {}).expect("bench instance")
}
