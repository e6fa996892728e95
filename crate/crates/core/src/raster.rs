//! Image containers and region geometry.
//!
//! Coordinate convention, fixed globally: `x` is the column, `y` the row,
//! both 0-based with the origin at the top-left. Intensities are stored as
//! `f64` in the nominal range `[0, 255]`; quantization to 8 bits happens
//! only at file I/O so that wavelet and embedding arithmetic keeps full
//! precision. All containers are immutable after construction and all
//! operations return new values.

use crate::{Error, Result};

/// Round half up: `floor(v + 0.5)`. Used everywhere a real length or
/// coordinate becomes an integral pixel quantity, so geometry derived from
/// measured diameters is reproducible.
pub fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// An unconstrained real-valued plane (gradients, corner responses, DWT
/// subbands). Unlike [`GrayImage`] it carries no range expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a generator called as `f(x, y)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for y in 0..rows {
            for x in 0..cols {
                data.push(f(x, y));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.cols + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.cols + x] = v;
    }

    /// Value at clamped coordinates (replicate border).
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        let cx = x.clamp(0, self.cols as i64 - 1) as usize;
        let cy = y.clamp(0, self.rows as i64 - 1) as usize;
        self.get(cx, cy)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Single-channel image, row-major `f64` intensities nominally in
/// `[0, 255]`. Construction rejects non-finite values; range excursions
/// (e.g. the unclamped inverse DWT after embedding) are allowed and get
/// clamped at recombination or file write.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    plane: Plane,
}

impl GrayImage {
    pub fn from_raw(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            plane: Plane::from_raw(rows, cols, pixels)?,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self {
            plane: Plane::from_fn(rows, cols, f),
        }
    }

    pub fn constant(rows: usize, cols: usize, v: f64) -> Self {
        Self::from_fn(rows, cols, |_, _| v)
    }

    pub fn from_plane(plane: Plane) -> Result<Self> {
        if plane.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { plane })
    }

    pub fn rows(&self) -> usize {
        self.plane.rows()
    }

    pub fn cols(&self) -> usize {
        self.plane.cols()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.plane.get(x, y)
    }

    /// Value at clamped coordinates (replicate border).
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        self.plane.get_clamped(x, y)
    }

    pub fn pixels(&self) -> &[f64] {
        self.plane.data()
    }

    pub fn as_plane(&self) -> &Plane {
        &self.plane
    }

    pub fn into_plane(self) -> Plane {
        self.plane
    }

    /// Copy with every intensity clamped to `[0, 255]`.
    pub fn clamped(&self) -> GrayImage {
        GrayImage::from_fn(self.rows(), self.cols(), |x, y| {
            self.get(x, y).clamp(0.0, 255.0)
        })
    }

    pub fn crop(&self, r: &Rect) -> Result<GrayImage> {
        r.require_inside(self.cols(), self.rows())?;
        let (ox, oy) = (r.origin.x as usize, r.origin.y as usize);
        Ok(GrayImage::from_fn(r.height, r.width, |x, y| {
            self.get(ox + x, oy + y)
        }))
    }
}

/// Three-channel image; the planes always share dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    red: GrayImage,
    green: GrayImage,
    blue: GrayImage,
}

impl ColorImage {
    pub fn new(red: GrayImage, green: GrayImage, blue: GrayImage) -> Result<Self> {
        let dims = (red.rows(), red.cols());
        for p in [&green, &blue] {
            if (p.rows(), p.cols()) != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: (p.rows(), p.cols()),
                });
            }
        }
        Ok(Self { red, green, blue })
    }

    pub fn rows(&self) -> usize {
        self.red.rows()
    }

    pub fn cols(&self) -> usize {
        self.red.cols()
    }

    pub fn red(&self) -> &GrayImage {
        &self.red
    }

    pub fn green(&self) -> &GrayImage {
        &self.green
    }

    pub fn blue(&self) -> &GrayImage {
        &self.blue
    }

    /// The green plane copied out as a standalone gray image. Green carries
    /// the best foreground/background contrast in fundus photographs, so
    /// every pipeline stage works on it.
    pub fn green_channel(&self) -> GrayImage {
        self.green.clone()
    }

    /// Original red/blue planes recombined with a replacement green plane.
    /// Values are clamped to `[0, 255]`; wrap-around would create visible
    /// artifacts and break PSNR semantics.
    pub fn recombine_green(&self, new_green: &GrayImage) -> Result<ColorImage> {
        if (new_green.rows(), new_green.cols()) != (self.rows(), self.cols()) {
            return Err(Error::DimensionMismatch {
                expected: (self.rows(), self.cols()),
                got: (new_green.rows(), new_green.cols()),
            });
        }
        ColorImage::new(
            self.red.clamped(),
            new_green.clamped(),
            self.blue.clamped(),
        )
    }

    pub fn crop(&self, r: &Rect) -> Result<ColorImage> {
        ColorImage::new(
            self.red.crop(r)?,
            self.green.crop(r)?,
            self.blue.crop(r)?,
        )
    }

    /// `self` with the region `at` replaced by `patch`; every other pixel
    /// is bit-identical to the input.
    pub fn overlay(&self, patch: &ColorImage, at: &Rect) -> Result<ColorImage> {
        at.require_inside(self.cols(), self.rows())?;
        if (patch.rows(), patch.cols()) != (at.height, at.width) {
            return Err(Error::DimensionMismatch {
                expected: (at.height, at.width),
                got: (patch.rows(), patch.cols()),
            });
        }
        let (ox, oy) = (at.origin.x as usize, at.origin.y as usize);
        let paste = |base: &GrayImage, plane: &GrayImage| {
            GrayImage::from_fn(base.rows(), base.cols(), |x, y| {
                if x >= ox && x < ox + at.width && y >= oy && y < oy + at.height {
                    plane.get(x - ox, y - oy)
                } else {
                    base.get(x, y)
                }
            })
        };
        ColorImage::new(
            paste(&self.red, &patch.red),
            paste(&self.green, &patch.green),
            paste(&self.blue, &patch.blue),
        )
    }
}

/// Row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn falses(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for y in 0..rows {
            for x in 0..cols {
                bits.push(f(x, y));
            }
        }
        Self { rows, cols, bits }
    }

    pub fn from_raw(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: (rows, cols),
                got: (bits.len(), 1),
            });
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.cols + x]
    }

    /// Out-of-bounds coordinates read as `false`.
    #[inline]
    pub fn get_or_false(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.cols as i64 || y >= self.rows as i64 {
            false
        } else {
            self.get(x as usize, y as usize)
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Mask rendered as a 0/255 gray image, the form later pipeline stages
    /// (Sobel, Harris) consume.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.rows, self.cols, |x, y| {
            if self.get(x, y) {
                255.0
            } else {
                0.0
            }
        })
    }
}

/// Integer pixel location; `x` is the column, `y` the row. Signed so that
/// geometry derived from measured anatomy (search spaces near the image
/// border) can be represented before clipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelPoint {
    pub x: i64,
    pub y: i64,
}

impl PixelPoint {
    pub fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Real-valued 2D point (sub-pixel centers, distance computations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

impl From<PixelPoint> for Point2 {
    fn from(p: PixelPoint) -> Self {
        Point2::new(p.x as f64, p.y as f64)
    }
}

/// Axis-aligned rectangle, half-open: it covers columns
/// `origin.x .. origin.x + width` and rows `origin.y .. origin.y + height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub origin: PixelPoint,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: i64, y: i64, width: usize, height: usize) -> Self {
        Self {
            origin: PixelPoint::new(x, y),
            width,
            height,
        }
    }

    /// One-past-the-right column edge.
    pub fn right(&self) -> i64 {
        self.origin.x + self.width as i64
    }

    /// One-past-the-bottom row edge.
    pub fn bottom(&self) -> i64 {
        self.origin.y + self.height as i64
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            self.origin.x as f64 + self.width as f64 / 2.0,
            self.origin.y as f64 + self.height as f64 / 2.0,
        )
    }

    pub fn contains_point(&self, p: &Point2) -> bool {
        p.x >= self.origin.x as f64
            && p.x < self.right() as f64
            && p.y >= self.origin.y as f64
            && p.y < self.bottom() as f64
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.origin.x >= self.origin.x
            && other.origin.y >= self.origin.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    /// Intersection with `[0, cols) x [0, rows)`; `None` when disjoint.
    pub fn clip_to(&self, cols: usize, rows: usize) -> Option<Rect> {
        let x0 = self.origin.x.max(0);
        let y0 = self.origin.y.max(0);
        let x1 = self.right().min(cols as i64);
        let y1 = self.bottom().min(rows as i64);
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(Rect::new(x0, y0, (x1 - x0) as usize, (y1 - y0) as usize))
    }

    fn require_inside(&self, cols: usize, rows: usize) -> Result<()> {
        if self.origin.x < 0
            || self.origin.y < 0
            || self.right() > cols as i64
            || self.bottom() > rows as i64
            || self.width == 0
            || self.height == 0
        {
            return Err(Error::RectOutOfBounds);
        }
        Ok(())
    }
}
