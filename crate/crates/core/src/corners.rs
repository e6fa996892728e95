//! Harris corner detection.
//!
//! The detector follows the classic structure-tensor formulation: central
//! difference gradients, Gaussian-windowed products, and the response
//!
//! ```text
//! H = det(C) - k * trace(C)^2 = (A*C - B^2) - k * (A + C)^2
//! ```
//!
//! where `A = sum_w Ix^2`, `B = sum_w Ix*Iy`, `C = sum_w Iy^2`. Both
//! eigenvalues large means corner (H > 0), one large means edge (H < 0),
//! both small means flat (H ~ 0). H is always computed from det/trace,
//! never via an eigen-solve; the eigen route exists only as a test oracle.
//!
//! Corners are strict local maxima of H over the suppression neighborhood,
//! kept when they reach a fraction of the global maximum. Plateaus yield
//! no corner by design.
//!
//! [`max_harris_diameter`] returns the most distant pair of detected
//! corners; on the edge ring of a binarized optic disc that distance
//! approximates the disc diameter.

use crate::raster::{GrayImage, PixelPoint, Plane};
use crate::{Error, Result};

/// Harris detector knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct HarrisParams {
    /// Gaussian window width.
    pub sigma: f64,
    /// Window truncation radius; `None` means `ceil(3 * sigma)`.
    pub window_radius: Option<usize>,
    /// Response constant in `det - k * trace^2`.
    pub k: f64,
    /// Chebyshev radius of the non-maximum-suppression neighborhood.
    pub nms_radius: usize,
    /// Keep corners with response >= this fraction of the global maximum.
    pub response_floor: f64,
}

impl Default for HarrisParams {
    fn default() -> Self {
        Self {
            sigma: 1.5,
            window_radius: None,
            k: 0.04,
            nms_radius: 3,
            response_floor: 0.01,
        }
    }
}

impl HarrisParams {
    pub fn radius(&self) -> usize {
        self.window_radius
            .unwrap_or_else(|| (3.0 * self.sigma).ceil() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma <= 0.0 {
            return Err(Error::InvalidParam("sigma must be > 0".into()));
        }
        if self.nms_radius < 1 {
            return Err(Error::InvalidParam("nms_radius must be >= 1".into()));
        }
        if !(0.0 < self.response_floor && self.response_floor < 1.0) {
            return Err(Error::InvalidParam(
                "response_floor must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Gaussian-windowed gradient products; positive semidefinite per pixel.
#[derive(Debug, Clone)]
pub struct StructureTensor {
    /// `A`: windowed Ix^2.
    pub ixx: Plane,
    /// `B`: windowed Ix*Iy.
    pub ixy: Plane,
    /// `C`: windowed Iy^2.
    pub iyy: Plane,
}

/// A detected corner and its response value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerPoint {
    pub location: PixelPoint,
    pub response: f64,
}

/// Central-difference partial derivatives with the `[-1, 0, 1]` filter,
/// replicate borders. Returns `(Ix, Iy)`.
pub fn gradients(img: &GrayImage) -> (Plane, Plane) {
    let rows = img.rows();
    let cols = img.cols();
    let ix = Plane::from_fn(rows, cols, |x, y| {
        img.get_clamped(x as i64 + 1, y as i64) - img.get_clamped(x as i64 - 1, y as i64)
    });
    let iy = Plane::from_fn(rows, cols, |x, y| {
        img.get_clamped(x as i64, y as i64 + 1) - img.get_clamped(x as i64, y as i64 - 1)
    });
    (ix, iy)
}

/// Normalized 1D Gaussian taps for the separable window.
fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let mut taps: Vec<f64> = (-(radius as i64)..=radius as i64)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable convolution with replicate borders.
fn convolve_separable(plane: &Plane, taps: &[f64]) -> Plane {
    let rows = plane.rows();
    let cols = plane.cols();
    let r = (taps.len() / 2) as i64;
    let horizontal = Plane::from_fn(rows, cols, |x, y| {
        let mut acc = 0.0;
        for (i, t) in taps.iter().enumerate() {
            acc += t * plane.get_clamped(x as i64 + i as i64 - r, y as i64);
        }
        acc
    });
    Plane::from_fn(rows, cols, |x, y| {
        let mut acc = 0.0;
        for (i, t) in taps.iter().enumerate() {
            acc += t * horizontal.get_clamped(x as i64, y as i64 + i as i64 - r);
        }
        acc
    })
}

/// Windowed gradient products: each of Ix^2, Ix*Iy, Iy^2 smoothed with the
/// normalized Gaussian window.
pub fn structure_tensor(ix: &Plane, iy: &Plane, params: &HarrisParams) -> StructureTensor {
    let taps = gaussian_kernel(params.sigma, params.radius());
    let rows = ix.rows();
    let cols = ix.cols();
    let prod = |f: &dyn Fn(usize, usize) -> f64| Plane::from_fn(rows, cols, |x, y| f(x, y));
    let ixx = prod(&|x, y| ix.get(x, y) * ix.get(x, y));
    let ixy = prod(&|x, y| ix.get(x, y) * iy.get(x, y));
    let iyy = prod(&|x, y| iy.get(x, y) * iy.get(x, y));
    StructureTensor {
        ixx: convolve_separable(&ixx, &taps),
        ixy: convolve_separable(&ixy, &taps),
        iyy: convolve_separable(&iyy, &taps),
    }
}

/// Per-pixel response `(A*C - B^2) - k * (A + C)^2`.
pub fn corner_response(tensor: &StructureTensor, k: f64) -> Plane {
    Plane::from_fn(tensor.ixx.rows(), tensor.ixx.cols(), |x, y| {
        let a = tensor.ixx.get(x, y);
        let b = tensor.ixy.get(x, y);
        let c = tensor.iyy.get(x, y);
        (a * c - b * b) - k * (a + c) * (a + c)
    })
}

/// Detect Harris corners: strict local maxima of the response within the
/// `(2 * nms_radius + 1)^2` neighborhood, at or above
/// `response_floor * max(H)`. Sorted by descending response, ties broken
/// by ascending `(y, x)`.
pub fn detect_corners(img: &GrayImage, params: &HarrisParams) -> Result<Vec<CornerPoint>> {
    params.validate()?;
    let rows = img.rows();
    let cols = img.cols();
    let nms = params.nms_radius as i64;
    if rows * cols < ((2 * nms + 1) * (2 * nms + 1)) as usize {
        return Err(Error::ImageTooSmall);
    }

    let (ix, iy) = gradients(img);
    let tensor = structure_tensor(&ix, &iy, params);
    let response = corner_response(&tensor, params.k);

    let max_h = response.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_h <= 0.0 {
        // No positive corner response anywhere: flat image or pure edges.
        return Ok(Vec::new());
    }
    let floor = params.response_floor * max_h;

    let mut corners = Vec::new();
    for y in 0..rows as i64 {
        'pixel: for x in 0..cols as i64 {
            let h = response.get(x as usize, y as usize);
            if h < floor {
                continue;
            }
            for dy in -nms..=nms {
                for dx in -nms..=nms {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= cols as i64 || ny >= rows as i64 {
                        continue;
                    }
                    if response.get(nx as usize, ny as usize) >= h {
                        continue 'pixel; // not a strict maximum
                    }
                }
            }
            corners.push(CornerPoint {
                location: PixelPoint::new(x, y),
                response: h,
            });
        }
    }

    corners.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then_with(|| (a.location.y, a.location.x).cmp(&(b.location.y, b.location.x)))
    });
    Ok(corners)
}

/// The most distant pair among the detected corners (exhaustive over all
/// pairs) and their Euclidean distance. Distance ties are broken by the
/// lexicographic `(y, x)` order of the first point, then the second; the
/// returned pair itself is ordered by `(y, x)`.
pub fn max_harris_diameter(points: &[CornerPoint]) -> Result<(PixelPoint, PixelPoint, f64)> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let mut best: Option<(PixelPoint, PixelPoint, f64)> = None;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let (mut p, mut q) = (points[i].location, points[j].location);
            if (q.y, q.x) < (p.y, p.x) {
                std::mem::swap(&mut p, &mut q);
            }
            let d = p.distance(&q);
            let better = match &best {
                None => true,
                Some((bp, bq, bd)) => {
                    d > *bd
                        || (d == *bd
                            && ((p.y, p.x), (q.y, q.x)) < ((bp.y, bp.x), (bq.y, bq.x)))
                }
            };
            if better {
                best = Some((p, q, d));
            }
        }
    }
    Ok(best.expect("at least one pair"))
}
