//! tinycompress: deep compression for small feedforward fault detectors.
//!
//! The crate trains one-vs-rest detectors on TE-style tabular data, shrinks
//! them with magnitude pruning, k-means weight sharing, and affine
//! quantization (alone or composed), serializes every model to the
//! byte-exact `.tcmp` container, and reproduces an 18-detector compression
//! study with per-pipeline report tables and a summary plot.
//!
//! Module map:
//! - [`linalg`]: dense f32 matrices/vectors and the seeded, splittable RNG.
//! - [`nn`]: feedforward classifier, backprop, minibatch SGD.
//! - [`compress`]: the three transforms, their compositions, fine-tuning,
//!   and reconstruction.
//! - [`modelfmt`]: the `.tcmp` container; its length *is* the model size.
//! - [`data`]: fault catalog, CSV ingestion, binary task construction, and
//!   the synthetic TE surrogate.
//! - [`bench`]: the 18-detector x 7-pipeline grid and report emission.

pub mod bench;
pub mod compress;
pub mod data;
pub mod linalg;
pub mod modelfmt;
pub mod nn;
