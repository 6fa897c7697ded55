//! IO companion for the `tomograd` library: binary sinogram/image
//! containers, CSV import, display export, and the reproducible
//! sparse-view experiment driver behind the `tomograd` binary.

pub mod experiment;
pub mod formats;
