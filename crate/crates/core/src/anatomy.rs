//! Anatomical localization: best-fit ellipse for the macula direction,
//! optic-disc detection, minimum-average-intensity macula candidates,
//! search-space construction and NROI selection.
//!
//! Geometry is anchored on the detected optic-disc diameter `D`: the
//! search space sits `1.5 * D` temporal of the disc center, spans
//! `length_factor * D` by `0.5 * D`, and the NROI is the `0.5 * D` square
//! at the search-space end farthest from the selected macula point. Every
//! `D`-derived length is rounded half-up to whole pixels exactly once, at
//! rectangle construction, so downstream geometry is integral and
//! reproducible.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::corners::{detect_corners, max_harris_diameter, CornerPoint, HarrisParams};
use crate::preprocess::{
    area_open, binarize, complement, median_filter, normalize_subtract, sobel_edges, thin,
    wiener_filter, FilterParams, DEFAULT_SOBEL_FACTOR,
};
use crate::raster::{
    round_half_up, BinaryMask, ColorImage, GrayImage, PixelPoint, Point2, Rect,
};
use crate::{Error, Result};

/// Conic fit `ax^2 + bxy + cy^2 + dx + ey + f = 0` with unit-norm
/// coefficients, constrained by construction to be a genuine ellipse
/// (`b^2 - 4ac < 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct EllipseFit {
    pub center: Point2,
    /// `[a, b, c, d, e, f]`, unit Euclidean norm, sign fixed so `a + c > 0`.
    pub coefficients: [f64; 6],
    /// Algebraic residual: square root of the smallest eigenvalue of the
    /// scatter matrix (zero for exact conic points).
    pub residual: f64,
}

/// Detected optic disc. `radius` is exactly `diameter / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticDisc {
    pub center: Point2,
    pub diameter: f64,
    pub radius: f64,
}

impl OpticDisc {
    pub fn new(center: Point2, diameter: f64) -> Self {
        Self {
            center,
            diameter,
            radius: diameter / 2.0,
        }
    }
}

/// Which side of the disc the macula (and therefore the search space) is
/// on, along the x axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Right,
    Left,
}

impl Direction {
    pub fn sign(&self) -> i64 {
        match self {
            Self::Right => 1,
            Self::Left => -1,
        }
    }
}

/// The rectangular macula search space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub rect: Rect,
    pub direction: Direction,
    /// True when the ideal rectangle had to be clipped to the image.
    pub clipped: bool,
}

/// Macula candidates with their distances to the disc center, and the
/// in-space distance statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MaculaEstimate {
    /// Every candidate with its distance to the disc center.
    pub candidates: Vec<(Point2, f64)>,
    /// The in-space candidate at minimum distance.
    pub selected: Point2,
    pub selected_distance: f64,
    /// Number of candidates inside the search space.
    pub in_space: usize,
    pub min_distance: f64,
    pub avg_distance: f64,
    pub max_distance: f64,
}

/// The square region safe to watermark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NroiRegion {
    pub rect: Rect,
}

/// Least-squares conic through `points`: the coefficient vector minimizing
/// the algebraic distance under the unit-norm constraint, i.e. the minimal
/// eigenvector of the 6x6 scatter matrix of `[x^2, xy, y^2, x, y, 1]`
/// rows. Errors if fewer than 5 points are given or the best conic is not
/// an ellipse.
pub fn fit_ellipse(points: &[Point2]) -> Result<EllipseFit> {
    if points.len() < 5 {
        return Err(Error::TooFewPoints {
            needed: 5,
            got: points.len(),
        });
    }
    let mut design = Vec::with_capacity(points.len() * 6);
    for p in points {
        design.extend_from_slice(&[p.x * p.x, p.x * p.y, p.y * p.y, p.x, p.y, 1.0]);
    }
    let d = DMatrix::from_row_slice(points.len(), 6, &design);
    let scatter = d.transpose() * &d;
    let eigen = SymmetricEigen::new(scatter);
    let (min_idx, min_val) = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("6 eigenvalues");
    let v = eigen.eigenvectors.column(min_idx);
    let mut coeffs = [v[0], v[1], v[2], v[3], v[4], v[5]];
    if coeffs[0] + coeffs[2] < 0.0 {
        for c in &mut coeffs {
            *c = -*c;
        }
    }

    let [a, b, c, dd, e, _f] = coeffs;
    let disc = b * b - 4.0 * a * c;
    if !(disc < 0.0) || !disc.is_finite() {
        return Err(Error::NotAnEllipse);
    }
    let center = Point2::new((2.0 * c * dd - b * e) / disc, (2.0 * a * e - b * dd) / disc);
    if !center.x.is_finite() || !center.y.is_finite() {
        return Err(Error::NotAnEllipse);
    }
    Ok(EllipseFit {
        center,
        coefficients: coeffs,
        residual: min_val.max(0.0).sqrt(),
    })
}

/// Every intermediate of the vessel-tree pipeline that leads to the
/// best-fit ellipse center. Kept public so the CLI can dump stages.
#[derive(Debug, Clone)]
pub struct VesselStages {
    pub gray: GrayImage,
    /// Background estimate: Wiener then median filtered gray.
    pub filtered: GrayImage,
    /// Normalized (filtered - gray) difference; vessels end up bright.
    pub enhanced: GrayImage,
    pub mask: BinaryMask,
    /// Mask after small components are removed.
    pub opened: BinaryMask,
    pub edges: BinaryMask,
    pub thinned: BinaryMask,
    pub corners: Vec<CornerPoint>,
    pub ellipse: EllipseFit,
}

/// Vessel pipeline: green -> Wiener -> median -> normalized difference ->
/// binarize -> area open -> Sobel -> thinning -> Harris -> ellipse fit.
pub fn run_vessel_pipeline(
    fundus: &ColorImage,
    filter: &FilterParams,
    harris: &HarrisParams,
) -> Result<VesselStages> {
    filter.validate()?;
    let gray = fundus.green_channel();
    let wiener = wiener_filter(&gray, filter.wiener_window)?;
    let filtered = median_filter(&wiener, filter.median_window)?;
    let enhanced = normalize_subtract(&filtered, &gray)?;
    let mask = binarize(&enhanced, filter.binarize_threshold)?;
    let opened = area_open(&mask, filter.area_open_min)?;
    let edges = sobel_edges(&opened.to_gray(), DEFAULT_SOBEL_FACTOR);
    let thinned = thin(&edges);
    let corners = detect_corners(&thinned.to_gray(), harris)?;
    if corners.is_empty() {
        return Err(Error::NoCorners);
    }
    let points: Vec<Point2> = corners.iter().map(|c| c.location.into()).collect();
    let ellipse = fit_ellipse(&points)?;
    Ok(VesselStages {
        gray,
        filtered,
        enhanced,
        mask,
        opened,
        edges,
        thinned,
        corners,
        ellipse,
    })
}

/// The best-fit ellipse center of the vessel-tree Harris corners; its
/// position relative to the disc center gives the macula side.
pub fn locate_macula_direction(
    fundus: &ColorImage,
    filter: &FilterParams,
    harris: &HarrisParams,
) -> Result<Point2> {
    Ok(run_vessel_pipeline(fundus, filter, harris)?.ellipse.center)
}

/// Intermediates of the optic-disc pipeline.
#[derive(Debug, Clone)]
pub struct DiscStages {
    pub gray: GrayImage,
    pub filtered: GrayImage,
    pub complemented: GrayImage,
    /// Normalized (gray - complement(filtered)) difference; the disc ends
    /// up as the dominant bright blob.
    pub enhanced: GrayImage,
    pub mask: BinaryMask,
    pub edges: BinaryMask,
    pub corners: Vec<CornerPoint>,
    /// The most distant corner pair on the disc edge ring.
    pub extremes: (PixelPoint, PixelPoint),
    pub disc: OpticDisc,
}

/// Optic-disc pipeline: green -> Wiener -> median -> complement ->
/// normalized difference -> binarize -> Sobel -> Harris -> maximum
/// pairwise corner distance. The disc center is the midpoint of the
/// extreme pair; the diameter is their distance.
pub fn run_disc_pipeline(
    roi: &ColorImage,
    filter: &FilterParams,
    harris: &HarrisParams,
) -> Result<DiscStages> {
    filter.validate()?;
    let gray = roi.green_channel();
    let wiener = wiener_filter(&gray, filter.wiener_window)?;
    let filtered = median_filter(&wiener, filter.median_window)?;
    let complemented = complement(&filtered);
    let enhanced = normalize_subtract(&gray, &complemented)?;
    let mask = binarize(&enhanced, filter.binarize_threshold)?;
    let edges = sobel_edges(&mask.to_gray(), DEFAULT_SOBEL_FACTOR);
    let corners = detect_corners(&edges.to_gray(), harris)?;
    let (p1, p2, d) = max_harris_diameter(&corners)?;
    let center = Point2::new((p1.x + p2.x) as f64 / 2.0, (p1.y + p2.y) as f64 / 2.0);
    Ok(DiscStages {
        gray,
        filtered,
        complemented,
        enhanced,
        mask,
        edges,
        corners,
        extremes: (p1, p2),
        disc: OpticDisc::new(center, d),
    })
}

/// Detect the optic disc inside `roi` (which must contain it).
pub fn detect_optic_disc(
    roi: &ColorImage,
    filter: &FilterParams,
    harris: &HarrisParams,
) -> Result<OpticDisc> {
    Ok(run_disc_pipeline(roi, filter, harris)?.disc)
}

/// Up to `max_points` strict local minima of the windowed mean plane,
/// sorted ascending by mean value (ties by `(y, x)`). The window mean uses
/// samples clipped to the image. A constant image has no strict minima.
pub fn min_avg_intensity_points(
    img: &GrayImage,
    window: usize,
    max_points: usize,
) -> Result<Vec<Point2>> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidParam(format!(
            "mean window must be odd and >= 3, got {window}"
        )));
    }
    let rows = img.rows();
    let cols = img.cols();
    let r = (window / 2) as i64;

    // Prefix sums for O(1) window means.
    let w = cols + 1;
    let mut prefix = vec![0.0f64; (rows + 1) * w];
    for y in 0..rows {
        for x in 0..cols {
            let idx = (y + 1) * w + (x + 1);
            prefix[idx] = img.get(x, y) + prefix[idx - 1] + prefix[idx - w] - prefix[idx - w - 1];
        }
    }
    let mean_at = |x: i64, y: i64| {
        let x0 = (x - r).max(0) as usize;
        let y0 = (y - r).max(0) as usize;
        let x1 = ((x + r + 1) as usize).min(cols);
        let y1 = ((y + r + 1) as usize).min(rows);
        let n = ((x1 - x0) * (y1 - y0)) as f64;
        (prefix[y1 * w + x1] - prefix[y0 * w + x1] - prefix[y1 * w + x0] + prefix[y0 * w + x0]) / n
    };

    let mut minima: Vec<(f64, usize, usize)> = Vec::new();
    for y in 0..rows as i64 {
        'pixel: for x in 0..cols as i64 {
            let m = mean_at(x, y);
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= cols as i64 || ny >= rows as i64 {
                        continue;
                    }
                    if mean_at(nx, ny) <= m {
                        continue 'pixel;
                    }
                }
            }
            minima.push((m, y as usize, x as usize));
        }
    }
    minima.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| (a.1, a.2).cmp(&(b.1, b.2))));
    minima.truncate(max_points);
    Ok(minima
        .into_iter()
        .map(|(_, y, x)| Point2::new(x as f64, y as f64))
        .collect())
}

/// Build the macula search space from the disc geometry: width
/// `round(length_factor * D)`, height `round(0.5 * D)`, vertically centered
/// on the disc center, with its near edge `round(1.5 * D)` from the disc
/// center on the `direction` side. The ideal rectangle is clipped to
/// `image_bounds`; `clipped` records whether anything was cut away.
pub fn build_search_space(
    disc: &OpticDisc,
    direction: Direction,
    image_bounds: &Rect,
    length_factor: f64,
) -> Result<SearchSpace> {
    if !(disc.diameter > 0.0) {
        return Err(Error::InvalidParam("disc diameter must be positive".into()));
    }
    if !(length_factor > 0.0) {
        return Err(Error::InvalidParam(
            "search length factor must be positive".into(),
        ));
    }
    let width = round_half_up(length_factor * disc.diameter).max(1) as usize;
    let height = round_half_up(0.5 * disc.diameter).max(1) as usize;
    let offset = round_half_up(1.5 * disc.diameter);
    let ox = round_half_up(disc.center.x);
    let oy = round_half_up(disc.center.y);

    let x0 = match direction {
        Direction::Right => ox + offset,
        Direction::Left => ox - offset - width as i64,
    };
    let y0 = oy - (height as i64) / 2;
    let ideal = Rect::new(x0, y0, width, height);

    let clipped_rect = match intersect(&ideal, image_bounds) {
        Some(r) => r,
        None => return Err(Error::SearchSpaceTooNarrow),
    };
    Ok(SearchSpace {
        rect: clipped_rect,
        direction,
        clipped: clipped_rect != ideal,
    })
}

fn intersect(a: &Rect, b: &Rect) -> Option<Rect> {
    let x0 = a.origin.x.max(b.origin.x);
    let y0 = a.origin.y.max(b.origin.y);
    let x1 = a.right().min(b.right());
    let y1 = a.bottom().min(b.bottom());
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    Some(Rect::new(x0, y0, (x1 - x0) as usize, (y1 - y0) as usize))
}

/// Distance every candidate to the disc center and pick the minimum-
/// distance candidate inside the search space. Also reports min/avg/max of
/// the in-space distances.
pub fn select_macula(
    candidates: &[Point2],
    disc: &OpticDisc,
    space: &SearchSpace,
) -> Result<MaculaEstimate> {
    let with_distances: Vec<(Point2, f64)> = candidates
        .iter()
        .map(|p| (*p, p.distance(&disc.center)))
        .collect();
    let in_space: Vec<&(Point2, f64)> = with_distances
        .iter()
        .filter(|(p, _)| space.rect.contains_point(p))
        .collect();
    if in_space.is_empty() {
        return Err(Error::NoCandidateInSearchSpace);
    }
    let (selected, selected_distance) = in_space
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, d)| (*p, *d))
        .expect("non-empty");
    let min = in_space.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let max = in_space.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let avg = in_space.iter().map(|c| c.1).sum::<f64>() / in_space.len() as f64;
    Ok(MaculaEstimate {
        candidates: with_distances,
        selected,
        selected_distance,
        in_space: in_space.len(),
        min_distance: min,
        avg_distance: avg,
        max_distance: max,
    })
}

/// The `round(0.5 * D)` square flush against the search-space end whose
/// center is farthest from the selected macula point (ties go to the end
/// farther from the disc). Errors when the space cannot host the square.
pub fn select_nroi(
    space: &SearchSpace,
    macula: &MaculaEstimate,
    disc: &OpticDisc,
) -> Result<NroiRegion> {
    let side = round_half_up(0.5 * disc.diameter).max(1) as usize;
    let rect = space.rect;
    if rect.width < side || rect.height < side {
        return Err(Error::SearchSpaceTooNarrow);
    }
    let y0 = rect.origin.y + ((rect.height - side) / 2) as i64;
    let left = Rect::new(rect.origin.x, y0, side, side);
    let right = Rect::new(rect.right() - side as i64, y0, side, side);

    let d_left = left.center().distance(&macula.selected);
    let d_right = right.center().distance(&macula.selected);
    let chosen = if d_left > d_right {
        left
    } else if d_right > d_left {
        right
    } else {
        // Tie: take the end farther from the disc.
        if left.center().distance(&disc.center) >= right.center().distance(&disc.center) {
            left
        } else {
            right
        }
    };
    Ok(NroiRegion { rect: chosen })
}

/// Pipeline configuration for full localization.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationParams {
    pub filter: FilterParams,
    pub harris: HarrisParams,
    /// Search-space length as a multiple of the disc diameter.
    pub search_length_factor: f64,
    /// Window side for the minimum-average-intensity plane.
    pub min_avg_window: usize,
    /// Maximum number of macula candidates kept.
    pub max_candidates: usize,
}

impl Default for LocalizationParams {
    fn default() -> Self {
        Self {
            filter: FilterParams::default(),
            harris: HarrisParams::default(),
            search_length_factor: 1.0,
            min_avg_window: 11,
            max_candidates: 32,
        }
    }
}

/// Everything the localization produces.
#[derive(Debug, Clone)]
pub struct Localization {
    pub ellipse_center: Point2,
    pub disc: OpticDisc,
    pub direction: Direction,
    pub search: SearchSpace,
    pub macula: MaculaEstimate,
    pub nroi: NroiRegion,
}

/// End-to-end anatomy localization on a color fundus image. The whole
/// image serves as the optic-disc ROI; the macula side is the side of the
/// vessel-ellipse center relative to the disc center.
pub fn locate_nroi(fundus: &ColorImage, params: &LocalizationParams) -> Result<Localization> {
    let ellipse_center = locate_macula_direction(fundus, &params.filter, &params.harris)?;
    let disc = detect_optic_disc(fundus, &params.filter, &params.harris)?;
    let direction = if ellipse_center.x >= disc.center.x {
        Direction::Right
    } else {
        Direction::Left
    };
    let bounds = Rect::new(0, 0, fundus.cols(), fundus.rows());
    let search = build_search_space(&disc, direction, &bounds, params.search_length_factor)?;
    let candidates = min_avg_intensity_points(
        &fundus.green_channel(),
        params.min_avg_window,
        params.max_candidates,
    )?;
    let macula = select_macula(&candidates, &disc, &search)?;
    let nroi = select_nroi(&search, &macula, &disc)?;
    Ok(Localization {
        ellipse_center,
        disc,
        direction,
        search,
        macula,
        nroi,
    })
}
