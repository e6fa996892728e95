//! Blind watermarking of retinal fundus images inside an automatically
//! located non-diagnostic region (NROI).
//!
//! The pipeline chains five stages:
//!
//! 1. [`preprocess`] — Wiener/median background estimation, binarization,
//!    morphology and edge detection that expose the vessel tree and the
//!    optic disc.
//! 2. [`corners`] — Harris corner detection (structure tensor, det/trace
//!    response, non-maximum suppression) plus the maximum pairwise corner
//!    distance used to size the optic disc.
//! 3. [`anatomy`] — optic-disc and macula localization, search-space
//!    geometry, and NROI selection.
//! 4. [`wavelet`] — single-level orthonormal 2D Haar DWT / inverse.
//! 5. [`stego`] — session-keyed pseudo-noise generation, spread-spectrum
//!    embedding into the HH subband, and blind correlation extraction.
//!
//! [`raster`] holds the image containers everything else operates on and
//! [`metrics`] the PSNR / correlation / bit-error fidelity measures.
//! [`test_utils`] generates the deterministic synthetic fundus images used
//! by the test suites and the `stages` CLI demo.

pub mod anatomy;
pub mod corners;
mod error;
pub mod metrics;
pub mod preprocess;
pub mod raster;
pub mod stego;
pub mod test_utils;
pub mod wavelet;

pub use error::{Error, Result};
