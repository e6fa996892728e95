//! Filtering, binarization, morphology and edge detection.
//!
//! These are the steps that turn a fundus gray image into the vessel tree
//! and the binarized landmark images the anatomy stage consumes. Border
//! policies differ per filter family and are documented on each function:
//! the adaptive Wiener filter uses window statistics clipped to the image,
//! the median and Sobel filters replicate the border.

use rayon::prelude::*;

use crate::raster::{BinaryMask, GrayImage, Plane};
use crate::{Error, Result};

/// Default Sobel magnitude threshold, as a multiple of the mean magnitude.
pub const DEFAULT_SOBEL_FACTOR: f64 = 4.0;

/// Tunable knobs of the preprocessing chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    /// Adaptive Wiener window side; odd, >= 3.
    pub wiener_window: usize,
    /// Median window side; >= 2. Even sides anchor with `ceil(w/2) - 1`
    /// pixels above/left of the output pixel.
    pub median_window: usize,
    /// Connected components smaller than this are removed by area opening.
    pub area_open_min: usize,
    /// Explicit binarization threshold as a fraction of 255; `None` selects
    /// the threshold with Otsu's method.
    pub binarize_threshold: Option<f64>,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            wiener_window: 7,
            median_window: 22,
            area_open_min: 100,
            binarize_threshold: None,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.wiener_window < 3 || self.wiener_window % 2 == 0 {
            return Err(Error::InvalidParam(format!(
                "wiener window must be odd and >= 3, got {}",
                self.wiener_window
            )));
        }
        if self.median_window < 2 {
            return Err(Error::InvalidParam(format!(
                "median window must be >= 2, got {}",
                self.median_window
            )));
        }
        if self.area_open_min < 1 {
            return Err(Error::InvalidParam("area_open_min must be >= 1".into()));
        }
        if let Some(t) = self.binarize_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidParam(format!(
                    "binarize threshold must lie in [0, 1], got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Summed-area tables for windowed mean/variance queries. Windows are
/// clipped to the image, so statistics divide by the number of in-image
/// samples.
struct Integral {
    rows: usize,
    cols: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Integral {
    fn build(img: &GrayImage) -> Self {
        let rows = img.rows();
        let cols = img.cols();
        let w = cols + 1;
        let mut sum = vec![0.0; (rows + 1) * w];
        let mut sum_sq = vec![0.0; (rows + 1) * w];
        for y in 0..rows {
            for x in 0..cols {
                let v = img.get(x, y);
                let idx = (y + 1) * w + (x + 1);
                sum[idx] = v + sum[idx - 1] + sum[idx - w] - sum[idx - w - 1];
                sum_sq[idx] = v * v + sum_sq[idx - 1] + sum_sq[idx - w] - sum_sq[idx - w - 1];
            }
        }
        Self {
            rows,
            cols,
            sum,
            sum_sq,
        }
    }

    /// Mean and variance over the window centered at (x, y) with radius r,
    /// clipped to the image. Variance is clamped at zero against rounding.
    fn window_stats(&self, x: usize, y: usize, r: usize) -> (f64, f64, f64) {
        let x0 = x.saturating_sub(r);
        let y0 = y.saturating_sub(r);
        let x1 = (x + r + 1).min(self.cols);
        let y1 = (y + r + 1).min(self.rows);
        let n = ((x1 - x0) * (y1 - y0)) as f64;
        let w = self.cols + 1;
        let rect = |t: &[f64]| {
            t[y1 * w + x1] - t[y0 * w + x1] - t[y1 * w + x0] + t[y0 * w + x0]
        };
        let mean = rect(&self.sum) / n;
        let var = (rect(&self.sum_sq) / n - mean * mean).max(0.0);
        (mean, var, n)
    }
}

/// Adaptive (local mean/variance) Wiener filter.
///
/// For each pixel: local mean `mu` and variance `s2` over the window, the
/// noise power `nu` is the mean of all local variances, and the output is
/// `mu + max(0, s2 - nu) / max(s2, eps) * (pixel - mu)`. Flat regions
/// collapse to their mean, strong structure passes through.
pub fn wiener_filter(img: &GrayImage, window: usize) -> Result<GrayImage> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidParam(format!(
            "wiener window must be odd and >= 3, got {window}"
        )));
    }
    let r = window / 2;
    let integral = Integral::build(img);
    let rows = img.rows();
    let cols = img.cols();

    let mut variances = Plane::zeros(rows, cols);
    let mut means = Plane::zeros(rows, cols);
    for y in 0..rows {
        for x in 0..cols {
            let (mean, var, _) = integral.window_stats(x, y, r);
            means.set(x, y, mean);
            variances.set(x, y, var);
        }
    }
    let nu = variances.data().iter().sum::<f64>() / variances.len() as f64;

    const EPS: f64 = 1e-12;
    let out = Plane::from_fn(rows, cols, |x, y| {
        let mu = means.get(x, y);
        let s2 = variances.get(x, y);
        mu + (s2 - nu).max(0.0) / s2.max(EPS) * (img.get(x, y) - mu)
    });
    GrayImage::from_plane(out)
}

/// Median filter with replicate padding.
///
/// Even window sides anchor with `ceil(w/2) - 1` pixels above/left; the
/// median of an even sample count is the mean of the two middle order
/// statistics.
pub fn median_filter(img: &GrayImage, window: usize) -> Result<GrayImage> {
    if window < 2 {
        return Err(Error::InvalidParam(format!(
            "median window must be >= 2, got {window}"
        )));
    }
    let lo = (window + 1) / 2 - 1; // pixels above/left
    let hi = window - 1 - lo; // pixels below/right
    let rows = img.rows();
    let cols = img.cols();
    let n = window * window;

    let out_rows: Vec<Vec<f64>> = (0..rows)
        .into_par_iter()
        .map(|y| {
            let mut buf = vec![0.0f64; n];
            let mut row_out = Vec::with_capacity(cols);
            for x in 0..cols {
                let mut i = 0;
                for dy in -(lo as i64)..=(hi as i64) {
                    for dx in -(lo as i64)..=(hi as i64) {
                        buf[i] = img.get_clamped(x as i64 + dx, y as i64 + dy);
                        i += 1;
                    }
                }
                row_out.push(median_of(&mut buf));
            }
            row_out
        })
        .collect();

    let out = Plane::from_fn(rows, cols, |x, y| out_rows[y][x]);
    GrayImage::from_plane(out)
}

fn median_of(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    if n % 2 == 1 {
        let (_, m, _) = buf.select_nth_unstable_by(n / 2, |a, b| a.total_cmp(b));
        *m
    } else {
        let (_, lower, rest) = buf.select_nth_unstable_by(n / 2 - 1, |a, b| a.total_cmp(b));
        let lower = *lower;
        let upper = rest.iter().copied().fold(f64::INFINITY, f64::min);
        (lower + upper) / 2.0
    }
}

/// Elementwise difference rescaled so min -> 0 and max -> 255. A constant
/// difference yields the all-zero image.
pub fn normalize_subtract(foreground: &GrayImage, background: &GrayImage) -> Result<GrayImage> {
    if (foreground.rows(), foreground.cols()) != (background.rows(), background.cols()) {
        return Err(Error::DimensionMismatch {
            expected: (foreground.rows(), foreground.cols()),
            got: (background.rows(), background.cols()),
        });
    }
    let diff = Plane::from_fn(foreground.rows(), foreground.cols(), |x, y| {
        foreground.get(x, y) - background.get(x, y)
    });
    let (lo, hi) = diff.min_max();
    if hi - lo == 0.0 {
        return Ok(GrayImage::constant(foreground.rows(), foreground.cols(), 0.0));
    }
    let scale = 255.0 / (hi - lo);
    let out = Plane::from_fn(diff.rows(), diff.cols(), |x, y| (diff.get(x, y) - lo) * scale);
    GrayImage::from_plane(out)
}

/// Histogram bin of an intensity: bin k covers [k, k+1), clamped to 255.
fn histogram_bin(v: f64) -> usize {
    (v.floor() as i64).clamp(0, 255) as usize
}

/// Otsu's threshold over a 256-bin histogram: the bin index maximizing the
/// between-class variance, ties broken by the smallest qualifying bin.
fn otsu_threshold(img: &GrayImage) -> Result<f64> {
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[histogram_bin(v)] += 1;
    }
    let total = img.pixels().len() as f64;
    let occupied = hist.iter().filter(|&&c| c > 0).count();
    if occupied < 2 {
        return Err(Error::NoSeparatingThreshold);
    }

    let total_count: u64 = hist.iter().sum();
    let total_sum: u64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as u64 * c)
        .sum();

    let mut best_bin = 0usize;
    let mut best_var = -1.0f64;
    let mut count0 = 0u64;
    let mut sum0 = 0u64;
    for t in 0..255 {
        count0 += hist[t];
        sum0 += t as u64 * hist[t];
        if count0 == 0 || count0 == total_count {
            continue;
        }
        let w0 = count0 as f64 / total;
        let mu0 = sum0 as f64 / count0 as f64;
        let mu1 = (total_sum - sum0) as f64 / (total_count - count0) as f64;
        let between = w0 * (1.0 - w0) * (mu0 - mu1) * (mu0 - mu1);
        if between > best_var {
            best_var = between;
            best_bin = t;
        }
    }
    if best_var <= 0.0 {
        return Err(Error::NoSeparatingThreshold);
    }
    Ok(best_bin as f64)
}

/// Threshold to a mask: bit = intensity > threshold. With an explicit
/// `threshold` (a fraction of 255) the cut is `t * 255`; without one Otsu's
/// method picks the cut from the 256-bin histogram.
pub fn binarize(img: &GrayImage, threshold: Option<f64>) -> Result<BinaryMask> {
    let cut = match threshold {
        Some(t) => {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidParam(format!(
                    "threshold must lie in [0, 1], got {t}"
                )));
            }
            t * 255.0
        }
        None => otsu_threshold(img)?,
    };
    Ok(BinaryMask::from_fn(img.rows(), img.cols(), |x, y| {
        img.get(x, y) > cut
    }))
}

/// Remove 8-connected components smaller than `min_size` pixels.
pub fn area_open(mask: &BinaryMask, min_size: usize) -> Result<BinaryMask> {
    if min_size < 1 {
        return Err(Error::InvalidParam("min_size must be >= 1".into()));
    }
    let rows = mask.rows();
    let cols = mask.cols();
    let mut visited = vec![false; rows * cols];
    let mut keep = vec![false; rows * cols];
    let mut stack = Vec::new();
    let mut component = Vec::new();

    for start in 0..rows * cols {
        if visited[start] || !mask.bits()[start] {
            continue;
        }
        stack.push(start);
        visited[start] = true;
        component.clear();
        while let Some(idx) = stack.pop() {
            component.push(idx);
            let x = (idx % cols) as i64;
            let y = (idx / cols) as i64;
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= cols as i64 || ny >= rows as i64 {
                        continue;
                    }
                    let nidx = ny as usize * cols + nx as usize;
                    if !visited[nidx] && mask.bits()[nidx] {
                        visited[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
        if component.len() >= min_size {
            for &idx in &component {
                keep[idx] = true;
            }
        }
    }
    BinaryMask::from_raw(rows, cols, keep)
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Sobel gradient magnitude thresholded at `threshold_factor` times its
/// mean (replicate borders). [`DEFAULT_SOBEL_FACTOR`] matches the pipeline
/// default.
pub fn sobel_edges(img: &GrayImage, threshold_factor: f64) -> BinaryMask {
    let rows = img.rows();
    let cols = img.cols();
    let mut magnitude = Plane::zeros(rows, cols);
    let mut total = 0.0;
    for y in 0..rows {
        for x in 0..cols {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let v = img.get_clamped(x as i64 + dx, y as i64 + dy);
                    gx += SOBEL_X[(dy + 1) as usize][(dx + 1) as usize] * v;
                    gy += SOBEL_Y[(dy + 1) as usize][(dx + 1) as usize] * v;
                }
            }
            let m = (gx * gx + gy * gy).sqrt();
            magnitude.set(x, y, m);
            total += m;
        }
    }
    let cut = threshold_factor * total / (rows * cols) as f64;
    if cut == 0.0 {
        // Constant image: zero gradient everywhere, no edges.
        return BinaryMask::falses(rows, cols);
    }
    BinaryMask::from_fn(rows, cols, |x, y| magnitude.get(x, y) > cut)
}

/// Neighbor ring P2..P9: clockwise from north. Off-image reads are false.
fn neighbors(mask: &[bool], rows: usize, cols: usize, x: i64, y: i64) -> [bool; 8] {
    let at = |xx: i64, yy: i64| {
        if xx < 0 || yy < 0 || xx >= cols as i64 || yy >= rows as i64 {
            false
        } else {
            mask[yy as usize * cols + xx as usize]
        }
    };
    [
        at(x, y - 1),     // P2 north
        at(x + 1, y - 1), // P3
        at(x + 1, y),     // P4 east
        at(x + 1, y + 1), // P5
        at(x, y + 1),     // P6 south
        at(x - 1, y + 1), // P7
        at(x - 1, y),     // P8 west
        at(x - 1, y - 1), // P9
    ]
}

/// Zhang-Suen thinning iterated to fixpoint. The skeleton is always a
/// subset of the input foreground.
pub fn thin(mask: &BinaryMask) -> BinaryMask {
    let rows = mask.rows();
    let cols = mask.cols();
    let mut bits = mask.bits().to_vec();
    let mut to_delete = Vec::new();

    loop {
        let mut changed = false;
        for step in 0..2 {
            to_delete.clear();
            for y in 0..rows as i64 {
                for x in 0..cols as i64 {
                    let idx = y as usize * cols + x as usize;
                    if !bits[idx] {
                        continue;
                    }
                    let nb = neighbors(&bits, rows, cols, x, y);
                    let b: u32 = nb.iter().map(|&v| v as u32).sum();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8)
                        .filter(|&i| !nb[i] && nb[(i + 1) % 8])
                        .count();
                    if a != 1 {
                        continue;
                    }
                    // nb indices: 0=P2(N), 2=P4(E), 4=P6(S), 6=P8(W).
                    let ok = if step == 0 {
                        !(nb[0] && nb[2] && nb[4]) && !(nb[2] && nb[4] && nb[6])
                    } else {
                        !(nb[0] && nb[2] && nb[6]) && !(nb[0] && nb[4] && nb[6])
                    };
                    if ok {
                        to_delete.push(idx);
                    }
                }
            }
            if !to_delete.is_empty() {
                changed = true;
                for &idx in &to_delete {
                    bits[idx] = false;
                }
            }
        }
        if !changed {
            break;
        }
    }
    BinaryMask::from_raw(rows, cols, bits).expect("dimensions unchanged")
}

/// Elementwise `255 - intensity`.
pub fn complement(img: &GrayImage) -> GrayImage {
    GrayImage::from_fn(img.rows(), img.cols(), |x, y| 255.0 - img.get(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn noise_image(rows: usize, cols: usize, seed: u64) -> GrayImage {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        GrayImage::from_fn(rows, cols, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % 256) as f64
        })
    }

    fn variance(vals: &[f64]) -> f64 {
        let n = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / n;
        vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
    }

    /// Brute-force restatement of the Wiener postcondition, independent of
    /// the integral-image implementation.
    fn wiener_oracle(img: &GrayImage, window: usize) -> Vec<f64> {
        let r = (window / 2) as i64;
        let rows = img.rows() as i64;
        let cols = img.cols() as i64;
        let mut means = vec![0.0; (rows * cols) as usize];
        let mut vars = vec![0.0; (rows * cols) as usize];
        for y in 0..rows {
            for x in 0..cols {
                let mut vals = Vec::new();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx >= 0 && ny >= 0 && nx < cols && ny < rows {
                            vals.push(img.get(nx as usize, ny as usize));
                        }
                    }
                }
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let v = vals.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
                means[(y * cols + x) as usize] = m;
                vars[(y * cols + x) as usize] = v;
            }
        }
        let nu = vars.iter().sum::<f64>() / vars.len() as f64;
        (0..(rows * cols) as usize)
            .map(|i| {
                let mu = means[i];
                let s2 = vars[i];
                mu + (s2 - nu).max(0.0) / s2.max(1e-12) * (img.pixels()[i] - mu)
            })
            .collect()
    }

    #[test]
    fn wiener_constant_is_identity() {
        let img = GrayImage::constant(9, 11, 42.0);
        let out = wiener_filter(&img, 7).unwrap();
        for (a, b) in img.pixels().iter().zip(out.pixels()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn wiener_matches_bruteforce_and_attenuates_impulse() {
        let mut px = vec![0.0; 25];
        px[12] = 255.0; // impulse at (2, 2) of a 5x5 field
        let img = GrayImage::from_raw(5, 5, px).unwrap();
        let out = wiener_filter(&img, 3).unwrap();
        let oracle = wiener_oracle(&img, 3);
        for (a, b) in out.pixels().iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        // Hand-evaluated 3x3 statistics: mu = 255/9, s2 = 255^2*8/81 at the
        // impulse, nu = 9*s2/25, so the impulse drops to
        // mu + (s2-nu)/s2 * (255-mu) = 173.4ish; well below the input.
        let mu = 255.0 / 9.0;
        let s2 = 255.0 * 255.0 * 8.0 / 81.0;
        let nu = 9.0 * s2 / 25.0;
        let expected = mu + (s2 - nu) / s2 * (255.0 - mu);
        assert_abs_diff_eq!(out.get(2, 2), expected, epsilon = 1e-9);
        assert!(out.get(2, 2) < 0.7 * 255.0);
        assert!(out.get(2, 2) > mu);
    }

    #[test]
    fn wiener_reduces_noise_variance() {
        for seed in 0..10u64 {
            let img = noise_image(32, 32, seed + 1);
            let out = wiener_filter(&img, 5).unwrap();
            assert!(
                variance(out.pixels()) < variance(img.pixels()),
                "seed {seed}: variance must drop"
            );
        }
    }

    #[test]
    fn wiener_rejects_bad_windows() {
        let img = GrayImage::constant(5, 5, 0.0);
        assert!(wiener_filter(&img, 4).is_err());
        assert!(wiener_filter(&img, 1).is_err());
    }

    #[test]
    fn median_constant_is_identity() {
        let img = GrayImage::constant(8, 8, 9.0);
        let out = median_filter(&img, 22).unwrap();
        assert_eq!(img, out);
    }

    #[test]
    fn median_removes_salt() {
        let mut px = vec![10.0; 49];
        px[24] = 255.0;
        let img = GrayImage::from_raw(7, 7, px).unwrap();
        let out = median_filter(&img, 3).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 10.0));
    }

    #[test]
    fn median_even_window_anchoring() {
        // 2x2 window over {1,2,3,4}: anchor top-left sees all four values,
        // median = (2+3)/2 = 2.5.
        let img = GrayImage::from_raw(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = median_filter(&img, 2).unwrap();
        assert_abs_diff_eq!(out.get(0, 0), 2.5, epsilon = 1e-12);
        // Other anchors replicate off-image pixels: at (1,1) the window is
        // {4, 4(right), 4(below), 4(diag)} = 4.
        assert_abs_diff_eq!(out.get(1, 1), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn normalize_subtract_contract() {
        let a = GrayImage::constant(4, 4, 55.0);
        let out = normalize_subtract(&a, &a).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0.0));

        // Difference spanning [-5, 5] maps onto exactly [0, 255].
        let fg = GrayImage::from_fn(1, 11, |x, _| x as f64);
        let bg = GrayImage::from_fn(1, 11, |_, _| 5.0);
        let out = normalize_subtract(&fg, &bg).unwrap();
        let (lo, hi) = (
            out.pixels().iter().cloned().fold(f64::INFINITY, f64::min),
            out.pixels().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        assert_eq!((lo, hi), (0.0, 255.0));

        let b = GrayImage::constant(2, 4, 0.0);
        assert!(normalize_subtract(&a, &b).is_err());
    }

    #[test]
    fn normalize_subtract_removes_gradient() {
        // A dark vessel streak on a strong illumination gradient: after
        // background subtraction the vessel dominates the contrast.
        let gradient = |x: usize| 60.0 + x as f64;
        let img = GrayImage::from_fn(16, 64, |x, y| {
            if y == 8 {
                gradient(x) - 30.0
            } else {
                gradient(x)
            }
        });
        let bg = GrayImage::from_fn(16, 64, |x, _| gradient(x));
        let out = normalize_subtract(&bg, &img).unwrap();
        // Vessel (row 8) must map near the top, background near the bottom.
        let vessel_mean = (0..64).map(|x| out.get(x, 8)).sum::<f64>() / 64.0;
        let bg_mean = (0..64).map(|x| out.get(x, 2)).sum::<f64>() / 64.0;
        assert!(vessel_mean > 200.0);
        assert!(bg_mean < 20.0);
    }

    #[test]
    fn binarize_bimodal_and_explicit() {
        let img = GrayImage::from_fn(4, 4, |x, _| if x < 2 { 0.0 } else { 255.0 });
        let mask = binarize(&img, None).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(mask.get(x, y), x >= 2);
            }
        }

        let two = GrayImage::from_raw(1, 2, vec![100.0, 200.0]).unwrap();
        let mask = binarize(&two, Some(0.5)).unwrap();
        assert!(!mask.get(0, 0));
        assert!(mask.get(1, 0));
    }

    #[test]
    fn binarize_constant_errors_without_threshold() {
        let img = GrayImage::constant(3, 3, 77.0);
        assert!(matches!(
            binarize(&img, None),
            Err(Error::NoSeparatingThreshold)
        ));
        // With an explicit threshold the degenerate image is fine.
        assert!(binarize(&img, Some(0.5)).is_ok());
    }

    /// Label components by iterated minimum-label propagation; deliberately
    /// different from the flood fill in `area_open`.
    fn component_sizes(mask: &BinaryMask) -> Vec<Vec<usize>> {
        let rows = mask.rows();
        let cols = mask.cols();
        let mut labels: Vec<usize> = (0..rows * cols).collect();
        loop {
            let mut changed = false;
            for y in 0..rows as i64 {
                for x in 0..cols as i64 {
                    let idx = y as usize * cols + x as usize;
                    if !mask.get(x as usize, y as usize) {
                        continue;
                    }
                    for dy in -1..=1i64 {
                        for dx in -1..=1i64 {
                            let (nx, ny) = (x + dx, y + dy);
                            if nx < 0 || ny < 0 || nx >= cols as i64 || ny >= rows as i64 {
                                continue;
                            }
                            if !mask.get(nx as usize, ny as usize) {
                                continue;
                            }
                            let nidx = ny as usize * cols + nx as usize;
                            if labels[nidx] < labels[idx] {
                                labels[idx] = labels[nidx];
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut groups: std::collections::HashMap<usize, Vec<usize>> = Default::default();
        for idx in 0..rows * cols {
            if mask.bits()[idx] {
                groups.entry(labels[idx]).or_default().push(idx);
            }
        }
        groups.into_values().collect()
    }

    #[test]
    fn area_open_size_rules() {
        let mut bits = vec![false; 81];
        bits[40] = true; // lone pixel
        let mask = BinaryMask::from_raw(9, 9, bits).unwrap();
        let out = area_open(&mask, 2).unwrap();
        assert_eq!(out.count_true(), 0);

        // A 10-pixel blob survives min_size 10 (boundary inclusive).
        let blob = BinaryMask::from_fn(9, 9, |x, y| y == 4 && (1..=10).contains(&(x + 1)));
        assert_eq!(blob.count_true(), 9); // row of 9
        let blob = BinaryMask::from_fn(9, 9, |x, y| (y == 4 || y == 5) && x < 5);
        assert_eq!(blob.count_true(), 10);
        let kept = area_open(&blob, 10).unwrap();
        assert_eq!(kept, blob);
    }

    #[test]
    fn area_open_matches_component_oracle() {
        // Two blobs, sizes 5 and 50; min_size 20 keeps only the second.
        let mask = BinaryMask::from_fn(20, 20, |x, y| {
            (y == 1 && x < 5) || (x >= 8 && x < 18 && y >= 10 && y < 15)
        });
        let sizes: Vec<usize> = component_sizes(&mask).iter().map(|c| c.len()).collect();
        assert!(sizes.contains(&5) && sizes.contains(&50));

        let out = area_open(&mask, 20).unwrap();
        for comp in component_sizes(&mask) {
            let keep = comp.len() >= 20;
            for idx in comp {
                assert_eq!(out.bits()[idx], keep);
            }
        }
        assert_eq!(out.count_true(), 50);
    }

    /// Direct Sobel kernel evaluation used as the independent oracle.
    fn sobel_oracle(img: &GrayImage, factor: f64) -> BinaryMask {
        let rows = img.rows();
        let cols = img.cols();
        let mut mags = vec![0.0; rows * cols];
        for y in 0..rows as i64 {
            for x in 0..cols as i64 {
                let mut gx = 0.0;
                let mut gy = 0.0;
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        let v = img.get_clamped(x + dx, y + dy);
                        gx += SOBEL_X[(dy + 1) as usize][(dx + 1) as usize] * v;
                        gy += SOBEL_Y[(dy + 1) as usize][(dx + 1) as usize] * v;
                    }
                }
                mags[y as usize * cols + x as usize] = (gx * gx + gy * gy).sqrt();
            }
        }
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        if mean == 0.0 {
            return BinaryMask::falses(rows, cols);
        }
        BinaryMask::from_fn(rows, cols, |x, y| mags[y * cols + x] > factor * mean)
    }

    #[test]
    fn sobel_constant_is_empty() {
        let img = GrayImage::constant(10, 10, 50.0);
        assert_eq!(sobel_edges(&img, DEFAULT_SOBEL_FACTOR).count_true(), 0);
    }

    #[test]
    fn sobel_step_edge_is_localized() {
        let c = 8usize;
        let img = GrayImage::from_fn(16, 16, |x, _| if x < c { 0.0 } else { 255.0 });
        let mask = sobel_edges(&img, DEFAULT_SOBEL_FACTOR);
        assert!(mask.count_true() > 0);
        for y in 0..16 {
            for x in 0..16 {
                if mask.get(x, y) {
                    assert!(
                        (c as i64 - 1..=c as i64 + 1).contains(&(x as i64)),
                        "edge response at column {x}, outside {{c-1, c, c+1}}"
                    );
                }
            }
        }
    }

    #[test]
    fn sobel_matches_direct_kernel_oracle() {
        // Includes the 1-px checkerboard, where the smoothing rows of the
        // standard kernels cancel the Nyquist pattern.
        let checker = GrayImage::from_fn(12, 12, |x, y| if (x + y) % 2 == 0 { 255.0 } else { 0.0 });
        let ramp = GrayImage::from_fn(9, 9, |x, y| (x * 7 + y * 3) as f64);
        let blob = GrayImage::from_fn(15, 15, |x, y| {
            let dx = x as f64 - 7.0;
            let dy = y as f64 - 7.0;
            if dx * dx + dy * dy < 16.0 {
                200.0
            } else {
                30.0
            }
        });
        for img in [&checker, &ramp, &blob] {
            let got = sobel_edges(img, DEFAULT_SOBEL_FACTOR);
            let want = sobel_oracle(img, DEFAULT_SOBEL_FACTOR);
            assert_eq!(got, want);
        }
    }

    fn mask_from_rows(rows: &[&str]) -> BinaryMask {
        BinaryMask::from_fn(rows.len(), rows[0].len(), |x, y| {
            rows[y].as_bytes()[x] == b'1'
        })
    }

    #[test]
    fn thin_trivial_cases() {
        let single = BinaryMask::from_fn(5, 5, |x, y| x == 2 && y == 2);
        assert_eq!(thin(&single), single);

        let empty = BinaryMask::falses(4, 6);
        assert_eq!(thin(&empty), empty);
    }

    #[test]
    fn thin_bar_to_line() {
        let bar = BinaryMask::from_fn(9, 14, |x, y| (3..6).contains(&y) && (1..13).contains(&x));
        let out = thin(&bar);
        // Skeleton is a subset of the bar.
        for idx in 0..out.bits().len() {
            assert!(!out.bits()[idx] || bar.bits()[idx]);
        }
        // No 2x2 block survives fully set (1-px thickness).
        for y in 0..8 {
            for x in 0..13 {
                let full = out.get(x, y)
                    && out.get(x + 1, y)
                    && out.get(x, y + 1)
                    && out.get(x + 1, y + 1);
                assert!(!full, "2x2 block at ({x},{y}) not thinned");
            }
        }
        // Interior columns keep exactly one pixel.
        for x in 3..10 {
            let count = (0..9).filter(|&y| out.get(x, y)).count();
            assert_eq!(count, 1, "column {x} should carry a 1-px line");
        }
    }

    #[test]
    fn thin_matches_published_reference() {
        // Widely circulated Zhang-Suen test figure. The expected skeleton
        // was frozen from an independent scripted implementation of the
        // published two-subiteration rules (P2..P9 clockwise from north,
        // simultaneous deletion per subiteration).
        let input = mask_from_rows(&[
            "00000000000000000000000000000000",
            "01111111110000000111111110000000",
            "01110001111000001111001111000000",
            "01110000111000001110000111000000",
            "01110001111000001110000000000000",
            "01111111110000001110000000000000",
            "01110111100000001110000111000000",
            "01110011110011101111001111011100",
            "01110001111011100111111110011100",
            "00000000000000000000000000000000",
        ]);
        let expected = mask_from_rows(&[
            "00000000000000000000000000000000",
            "00111111100000000011111100000000",
            "00100000100000000110000000000000",
            "00100000010000000100000000000000",
            "00100000100000000100000000000000",
            "00111110100000000100000000000000",
            "00000001100000000100000000000000",
            "00000000100001000110000110001000",
            "00000000010000000001111000000000",
            "00000000000000000000000000000000",
        ]);
        assert_eq!(thin(&input), expected);
    }

    #[test]
    fn complement_basics() {
        let img = GrayImage::constant(2, 2, 0.0);
        assert!(complement(&img).pixels().iter().all(|&v| v == 255.0));
        let v = GrayImage::constant(1, 1, 100.0);
        assert_eq!(complement(&v).get(0, 0), 155.0);
        let any = noise_image(6, 6, 4);
        assert_eq!(complement(&complement(&any)), any);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn filters_preserve_dimensions(rows in 3usize..12, cols in 3usize..12, seed in 0u64..100) {
            let img = noise_image(rows, cols, seed | 1);
            let w = wiener_filter(&img, 3).unwrap();
            prop_assert_eq!((w.rows(), w.cols()), (rows, cols));
            let m = median_filter(&img, 4).unwrap();
            prop_assert_eq!((m.rows(), m.cols()), (rows, cols));
            let s = sobel_edges(&img, 4.0);
            prop_assert_eq!((s.rows(), s.cols()), (rows, cols));
        }

        #[test]
        fn thin_never_creates_pixels(seed in 0u64..200) {
            let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
            let mask = BinaryMask::from_fn(12, 12, |_, _| {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                s % 3 == 0
            });
            let out = thin(&mask);
            for (a, b) in out.bits().iter().zip(mask.bits()) {
                prop_assert!(!a | b);
            }
        }

        #[test]
        fn binarize_is_monotone_in_threshold(
            seed in 0u64..200, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let img = noise_image(8, 8, seed | 1);
            let loose = binarize(&img, Some(lo)).unwrap();
            let tight = binarize(&img, Some(hi)).unwrap();
            for (a, b) in tight.bits().iter().zip(loose.bits()) {
                // Raising the threshold never turns a false pixel true.
                prop_assert!(!a | b);
            }
        }
    }
}
