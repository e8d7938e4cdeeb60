pub mod edf;
pub mod field;
pub mod params;

pub use edf::{BumpSpec, EdgeDistanceField};
pub use field::{f_ext, smoothstep, synthesize, ConformalField, FieldReport};
pub use params::{choose_params, Constraint, SynthParams};
