//! Fidelity metrics: PSNR, Pearson correlation, bit error rate.

use crate::raster::{BinaryMask, GrayImage};
use crate::{Error, Result};

/// Which peak the PSNR numerator uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakMode {
    /// Maximum squared intensity of the original image.
    MaxOriginal,
    /// A fixed peak (use 255 for cross-tool comparison of 8-bit imagery).
    Fixed(f64),
}

/// PSNR outcome; identical images get a marker instead of infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsnrResult {
    Identical,
    Decibels(f64),
}

impl PsnrResult {
    /// The dB value, or `None` for identical images.
    pub fn decibels(&self) -> Option<f64> {
        match self {
            Self::Identical => None,
            Self::Decibels(v) => Some(*v),
        }
    }
}

/// Peak signal-to-noise ratio in dB:
/// `10 * log10(M * N * peak^2 / sum((P - P')^2))`.
pub fn psnr(original: &GrayImage, modified: &GrayImage) -> Result<PsnrResult> {
    psnr_with_peak(original, modified, PeakMode::MaxOriginal)
}

pub fn psnr_with_peak(
    original: &GrayImage,
    modified: &GrayImage,
    peak: PeakMode,
) -> Result<PsnrResult> {
    if (original.rows(), original.cols()) != (modified.rows(), modified.cols()) {
        return Err(Error::DimensionMismatch {
            expected: (original.rows(), original.cols()),
            got: (modified.rows(), modified.cols()),
        });
    }
    let n = original.pixels().len() as f64;
    let sq_err: f64 = original
        .pixels()
        .iter()
        .zip(modified.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if sq_err == 0.0 {
        return Ok(PsnrResult::Identical);
    }
    let peak_sq = match peak {
        PeakMode::MaxOriginal => original
            .pixels()
            .iter()
            .map(|v| v * v)
            .fold(0.0f64, f64::max),
        PeakMode::Fixed(p) => p * p,
    };
    Ok(PsnrResult::Decibels(10.0 * (n * peak_sq / sq_err).log10()))
}

/// Standard Pearson correlation coefficient of two equal-length sequences.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: (x.len(), 1),
            got: (y.len(), 1),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantSequence);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Pearson correlation of two masks viewed as 0/1 sequences.
pub fn pearson_masks(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let xs: Vec<f64> = a.bits().iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let ys: Vec<f64> = b.bits().iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    pearson(&xs, &ys)
}

/// Fraction of differing bits, in `[0, 1]`.
pub fn bit_error_rate(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(Error::DimensionMismatch {
            expected: (a.rows(), a.cols()),
            got: (b.rows(), b.cols()),
        });
    }
    let diff = a
        .bits()
        .iter()
        .zip(b.bits())
        .filter(|(x, y)| x != y)
        .count();
    Ok(diff as f64 / a.bits().len() as f64)
}
