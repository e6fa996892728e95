//! Session-keyed spread-spectrum watermarking in the HH subband.
//!
//! Embedding: the NROI gray plane is Haar-decomposed once; for every
//! payload bit equal to 0 a full-band pseudo-noise sequence keyed by
//! (session key, bit index) is scaled by the gain and added to HH; bits
//! equal to 1 leave HH untouched. The inverse transform yields the
//! watermarked plane.
//!
//! Extraction is blind: it sees only the watermarked plane, the key and
//! the payload dimensions. Each bit's correlation against its regenerated
//! sequence is compared with the mean correlation; a value above
//! `threshold_multiplier` times the mean reads as bit 0, otherwise 1. The
//! recovered bit plane is cleaned with a 3x3 binary median.
//!
//! The PN generator is pinned bit-exactly (FNV-1a seeding, xorshift64*
//! stream) so sequences are identical across platforms, runs and thread
//! counts.

use crate::anatomy::{locate_nroi, Localization, LocalizationParams, NroiRegion};
use crate::metrics::pearson;
use crate::preprocess::median_filter;
use crate::raster::{BinaryMask, ColorImage, GrayImage};
use crate::wavelet::{dwt2_haar, idwt2_haar};
use crate::{Error, Result};

/// Chips required per payload bit; fixes the capacity at `|HH| / 64`.
pub const CHIPS_PER_BIT: usize = 64;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;
const XORSHIFT_MULTIPLIER: u64 = 2685821657736338717;

/// Per-exchange secret seeding the PN generator; never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionKey {
    bytes: Vec<u8>,
}

impl SessionKey {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(Error::EmptyKey);
        }
        Ok(Self { bytes })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }
}

/// Keyed deterministic +/-1 sequence spanning one subband.
#[derive(Debug, Clone, PartialEq)]
pub struct PnSequence {
    values: Vec<f64>,
}

impl PnSequence {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The binary watermark, row-major; `true` is bit 1, `false` is bit 0.
/// Only 0-bits modify the host, so a payload without any 0-bit embeds
/// nothing and the extraction threshold is ill-posed; callers are expected
/// to warn on extreme 0-bit fractions (the CLI does below 10% and above
/// 90%).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatermarkPayload {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl WatermarkPayload {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width * height == 0 {
            return Err(Error::InvalidParam(
                "payload must hold at least one bit".into(),
            ));
        }
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (height, width),
                got: (bits.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.cols(),
            height: mask.rows(),
            bits: mask.bits().to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn zero_bit_count(&self) -> usize {
        self.bits.iter().filter(|b| !**b).count()
    }

    pub fn zero_bit_fraction(&self) -> f64 {
        self.zero_bit_count() as f64 / self.bits.len() as f64
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::from_raw(self.height, self.width, self.bits.clone()).expect("validated")
    }
}

/// Embedding strength and detection threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedParams {
    /// Amplification factor `k`; 0 is allowed as the degenerate identity.
    pub gain: f64,
    /// Bit-0 detection threshold as a multiple of the mean correlation.
    pub threshold_multiplier: f64,
}

impl Default for EmbedParams {
    fn default() -> Self {
        Self {
            gain: 2.0,
            threshold_multiplier: 2.0,
        }
    }
}

impl EmbedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= 0.0) || !self.gain.is_finite() {
            return Err(Error::InvalidParam("gain must be >= 0".into()));
        }
        if !(self.threshold_multiplier > 0.0) || !self.threshold_multiplier.is_finite() {
            return Err(Error::InvalidParam(
                "threshold multiplier must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-bit correlation evidence and the recovered watermark.
#[derive(Debug, Clone)]
pub struct ExtractionReport {
    /// Pearson correlation of HH against each bit's PN sequence.
    pub correlations: Vec<f64>,
    pub mean_correlation: f64,
    /// `threshold_multiplier * mean_correlation`.
    pub threshold: f64,
    /// Recovered bits: `false` (bit 0) iff the correlation exceeds the
    /// threshold.
    pub bits: Vec<bool>,
    pub recovered_image: BinaryMask,
    /// 3x3 binary-median filtered recovery.
    pub filtered_image: BinaryMask,
}

fn fnv1a64(chunks: &[&[u8]]) -> u64 {
    let mut hash = FNV_OFFSET;
    for chunk in chunks {
        for &b in *chunk {
            hash ^= b as u64;
            hash = hash.wrapping_mul(FNV_PRIME);
        }
    }
    hash
}

/// Deterministic +/-1 sequence for one payload bit: the seed is FNV-1a-64
/// over (key bytes || little-endian bit index), zero remapped to the FNV
/// offset basis; the stream is xorshift64*, emitting +1 when bit 63 of the
/// scrambled output is set.
pub fn pn_generate(key: &SessionKey, bit_index: usize, length: usize) -> Result<PnSequence> {
    if length == 0 {
        return Err(Error::InvalidParam("sequence length must be >= 1".into()));
    }
    let idx_bytes = (bit_index as u64).to_le_bytes();
    let mut state = fnv1a64(&[key.bytes(), &idx_bytes]);
    if state == 0 {
        state = FNV_OFFSET;
    }
    let mut values = Vec::with_capacity(length);
    for _ in 0..length {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        let out = state.wrapping_mul(XORSHIFT_MULTIPLIER);
        values.push(if out >> 63 == 1 { 1.0 } else { -1.0 });
    }
    Ok(PnSequence { values })
}

/// The printed detection rule, factored out so it can be checked against
/// scalar arithmetic: bit i reads 0 iff `c_i > multiplier * mean(c)`.
pub fn threshold_bits(correlations: &[f64], multiplier: f64) -> (Vec<bool>, f64, f64) {
    let mean = correlations.iter().sum::<f64>() / correlations.len() as f64;
    let threshold = multiplier * mean;
    let bits = correlations.iter().map(|&c| !(c > threshold)).collect();
    (bits, mean, threshold)
}

/// Embed the payload into the HH subband of `nroi_gray`:
/// `HH' = HH + k * PN_i` for every 0-bit `i`. Returns the unclamped
/// inverse transform.
pub fn embed(
    nroi_gray: &GrayImage,
    payload: &WatermarkPayload,
    key: &SessionKey,
    params: &EmbedParams,
) -> Result<GrayImage> {
    params.validate()?;
    let mut bands = dwt2_haar(nroi_gray);
    let chips = bands.hh.len();
    let capacity = chips / CHIPS_PER_BIT;
    if payload.bits().len() > capacity {
        return Err(Error::CapacityExceeded {
            bits: payload.bits().len(),
            capacity,
        });
    }
    for (i, bit) in payload.bits().iter().enumerate() {
        if *bit {
            continue; // 1-bits leave the subband untouched
        }
        let pn = pn_generate(key, i, chips)?;
        for (h, p) in bands.hh.data_mut().iter_mut().zip(pn.values()) {
            *h += params.gain * p;
        }
    }
    idwt2_haar(&bands)
}

/// Blind extraction from a watermarked gray plane. Needs only the key,
/// the payload dimensions and the threshold parameters.
pub fn extract(
    watermarked_gray: &GrayImage,
    key: &SessionKey,
    payload_width: usize,
    payload_height: usize,
    params: &EmbedParams,
) -> Result<ExtractionReport> {
    params.validate()?;
    let n_bits = payload_width * payload_height;
    if n_bits == 0 {
        return Err(Error::InvalidParam(
            "payload must hold at least one bit".into(),
        ));
    }
    let bands = dwt2_haar(watermarked_gray);
    let chips = bands.hh.len();
    let capacity = chips / CHIPS_PER_BIT;
    if n_bits > capacity {
        return Err(Error::CapacityExceeded {
            bits: n_bits,
            capacity,
        });
    }
    let hh = bands.hh.data();
    let (lo, hi) = bands.hh.min_max();
    if lo == hi {
        return Err(Error::ConstantSubband);
    }

    let mut correlations = Vec::with_capacity(n_bits);
    for i in 0..n_bits {
        let pn = pn_generate(key, i, chips)?;
        correlations.push(pearson(hh, pn.values())?);
    }
    let (bits, mean_correlation, threshold) =
        threshold_bits(&correlations, params.threshold_multiplier);
    let recovered_image =
        BinaryMask::from_raw(payload_height, payload_width, bits.clone()).expect("dims");
    let filtered_image = binary_median3(&recovered_image)?;
    Ok(ExtractionReport {
        correlations,
        mean_correlation,
        threshold,
        bits,
        recovered_image,
        filtered_image,
    })
}

/// 3x3 binary median (majority vote with replicate padding).
fn binary_median3(mask: &BinaryMask) -> Result<BinaryMask> {
    let gray = median_filter(&mask.to_gray(), 3)?;
    Ok(BinaryMask::from_fn(mask.rows(), mask.cols(), |x, y| {
        gray.get(x, y) > 127.5
    }))
}

/// Embed into a full color fundus image: crop the NROI, watermark its
/// green plane, recombine with the original red/blue planes of the crop
/// and overlay the result back. Pixels outside the NROI rectangle are
/// bit-identical to the input.
pub fn embed_fundus(
    fundus: &ColorImage,
    payload: &WatermarkPayload,
    key: &SessionKey,
    params: &EmbedParams,
    localization: &Localization,
) -> Result<(ColorImage, NroiRegion)> {
    let rect = localization.nroi.rect;
    let nroi_color = fundus.crop(&rect)?;
    let nroi_gray = nroi_color.green_channel();
    let marked_gray = embed(&nroi_gray, payload, key, params)?;
    let marked_color = nroi_color.recombine_green(&marked_gray)?;
    let out = fundus.overlay(&marked_color, &rect)?;
    Ok((out, localization.nroi))
}

/// Blind extraction from a full color fundus image: rerun the anatomy
/// localization on the watermarked image, crop the NROI it finds, and
/// extract from the green plane.
pub fn extract_fundus(
    watermarked: &ColorImage,
    key: &SessionKey,
    payload_width: usize,
    payload_height: usize,
    params: &EmbedParams,
    loc_params: &LocalizationParams,
) -> Result<ExtractionReport> {
    let localization = locate_nroi(watermarked, loc_params)?;
    let gray = watermarked.crop(&localization.nroi.rect)?.green_channel();
    extract(&gray, key, payload_width, payload_height, params)
}
