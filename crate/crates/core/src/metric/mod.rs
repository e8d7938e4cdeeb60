pub mod moduli;
pub mod oracle;
pub mod path;
pub mod spec;

pub use moduli::{default_scales, moduli, ModulusTable};
pub use oracle::LatticeOracle;
pub use path::{path_length, segment_length, Euclid, LengthDensity, Path};
pub use spec::{MetricKind, MetricSpec, ScalarField, TensorField};
