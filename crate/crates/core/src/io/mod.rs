//! Synthetic data, configuration and file formats.

pub mod config;
pub mod csv;
pub mod mvf;
pub mod pgm;
pub mod synth;

pub use config::{ParamKind, RegKind, RunConfig};
pub use mvf::FieldFile;
