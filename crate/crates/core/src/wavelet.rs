//! Single-level 2D Haar transform.
//!
//! The orthonormal normalization (a factor of 1/2 per 2x2 block) is used so
//! that the transform conserves energy: the sum of squares over the four
//! subbands equals the sum of squares of the (padded) input. Odd
//! dimensions are handled by replicating the last row/column before the
//! forward transform and dropping it after the inverse.

use crate::raster::{GrayImage, Plane};
use crate::{Error, Result};

/// The four level-1 subbands of a gray image.
///
/// Naming is fixed here for the whole crate: for a 2x2 block
/// `[[a, b], [c, d]]` (a top-left, b top-right, c bottom-left,
/// d bottom-right):
///
/// ```text
/// LL = (a + b + c + d) / 2      approximation
/// HL = (a - b + c - d) / 2      horizontal detail
/// LH = (a + b - c - d) / 2      vertical detail
/// HH = (a - b - c + d) / 2      diagonal detail
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSet {
    pub ll: Plane,
    pub lh: Plane,
    pub hl: Plane,
    pub hh: Plane,
    pub original_rows: usize,
    pub original_cols: usize,
}

impl SubbandSet {
    fn check_consistent(&self) -> Result<()> {
        let dims = (self.ll.rows(), self.ll.cols());
        for band in [&self.lh, &self.hl, &self.hh] {
            if (band.rows(), band.cols()) != dims {
                return Err(Error::InconsistentSubbands);
            }
        }
        let (pr, pc) = (self.original_rows.div_ceil(2), self.original_cols.div_ceil(2));
        if dims != (pr, pc) {
            return Err(Error::InconsistentSubbands);
        }
        Ok(())
    }
}

/// Forward single-level 2D Haar transform.
pub fn dwt2_haar(img: &GrayImage) -> SubbandSet {
    let rows = img.rows();
    let cols = img.cols();
    let brows = rows.div_ceil(2);
    let bcols = cols.div_ceil(2);

    let mut ll = Plane::zeros(brows, bcols);
    let mut lh = Plane::zeros(brows, bcols);
    let mut hl = Plane::zeros(brows, bcols);
    let mut hh = Plane::zeros(brows, bcols);

    // Edge replication covers odd dimensions: reads past the last row or
    // column repeat it.
    let at = |x: usize, y: usize| img.get(x.min(cols - 1), y.min(rows - 1));

    for by in 0..brows {
        for bx in 0..bcols {
            let a = at(2 * bx, 2 * by);
            let b = at(2 * bx + 1, 2 * by);
            let c = at(2 * bx, 2 * by + 1);
            let d = at(2 * bx + 1, 2 * by + 1);
            ll.set(bx, by, (a + b + c + d) / 2.0);
            hl.set(bx, by, (a - b + c - d) / 2.0);
            lh.set(bx, by, (a + b - c - d) / 2.0);
            hh.set(bx, by, (a - b - c + d) / 2.0);
        }
    }

    SubbandSet {
        ll,
        lh,
        hl,
        hh,
        original_rows: rows,
        original_cols: cols,
    }
}

/// Exact inverse of [`dwt2_haar`]. Padding rows/columns introduced for odd
/// inputs are dropped. Values are NOT clamped; clamping belongs to
/// recombination and file output.
pub fn idwt2_haar(bands: &SubbandSet) -> Result<GrayImage> {
    bands.check_consistent()?;
    let brows = bands.ll.rows();
    let bcols = bands.ll.cols();
    let rows = bands.original_rows;
    let cols = bands.original_cols;

    let mut out = Plane::zeros(brows * 2, bcols * 2);
    for by in 0..brows {
        for bx in 0..bcols {
            let ll = bands.ll.get(bx, by);
            let hl = bands.hl.get(bx, by);
            let lh = bands.lh.get(bx, by);
            let hh = bands.hh.get(bx, by);
            out.set(2 * bx, 2 * by, (ll + hl + lh + hh) / 2.0);
            out.set(2 * bx + 1, 2 * by, (ll - hl + lh - hh) / 2.0);
            out.set(2 * bx, 2 * by + 1, (ll + hl - lh - hh) / 2.0);
            out.set(2 * bx + 1, 2 * by + 1, (ll - hl - lh + hh) / 2.0);
        }
    }

    let trimmed = Plane::from_fn(rows, cols, |x, y| out.get(x, y));
    GrayImage::from_plane(trimmed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn padded_sum_of_squares(img: &GrayImage) -> f64 {
        let rows = img.rows();
        let cols = img.cols();
        let pr = rows.div_ceil(2) * 2;
        let pc = cols.div_ceil(2) * 2;
        let mut acc = 0.0;
        for y in 0..pr {
            for x in 0..pc {
                let v = img.get(x.min(cols - 1), y.min(rows - 1));
                acc += v * v;
            }
        }
        acc
    }

    fn pseudo_random_image(rows: usize, cols: usize, seed: u64) -> GrayImage {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        GrayImage::from_fn(rows, cols, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 256) as f64
        })
    }

    #[test]
    fn constant_block_goes_to_ll() {
        let img = GrayImage::constant(2, 2, 1.0);
        let b = dwt2_haar(&img);
        assert_eq!(b.ll.get(0, 0), 2.0);
        assert_eq!(b.lh.get(0, 0), 0.0);
        assert_eq!(b.hl.get(0, 0), 0.0);
        assert_eq!(b.hh.get(0, 0), 0.0);
    }

    #[test]
    fn closed_form_block() {
        // [[4, 2], [2, 0]] -> LL=4, HL=2, LH=2, HH=0.
        let img = GrayImage::from_raw(2, 2, vec![4.0, 2.0, 2.0, 0.0]).unwrap();
        let b = dwt2_haar(&img);
        assert_eq!(b.ll.get(0, 0), 4.0);
        assert_eq!(b.hl.get(0, 0), 2.0);
        assert_eq!(b.lh.get(0, 0), 2.0);
        assert_eq!(b.hh.get(0, 0), 0.0);
    }

    #[test]
    fn energy_is_conserved() {
        let img = pseudo_random_image(64, 64, 7);
        let b = dwt2_haar(&img);
        let band_energy = b.ll.sum_of_squares()
            + b.lh.sum_of_squares()
            + b.hl.sum_of_squares()
            + b.hh.sum_of_squares();
        let input_energy = padded_sum_of_squares(&img);
        assert!((band_energy - input_energy).abs() <= 1e-9 * input_energy.max(1.0));
    }

    #[test]
    fn round_trip_odd_dimensions() {
        let img = pseudo_random_image(33, 47, 3);
        let back = idwt2_haar(&dwt2_haar(&img)).unwrap();
        assert_eq!(back.rows(), 33);
        assert_eq!(back.cols(), 47);
        let worst = img
            .pixels()
            .iter()
            .zip(back.pixels())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-9, "max reconstruction error {worst}");
    }

    #[test]
    fn zero_bands_invert_to_zero() {
        let zero = GrayImage::constant(6, 4, 0.0);
        let b = dwt2_haar(&zero);
        let back = idwt2_haar(&b).unwrap();
        assert!(back.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ll_only_inverts_to_constant() {
        let bands = SubbandSet {
            ll: Plane::from_raw(1, 1, vec![2.0]).unwrap(),
            lh: Plane::zeros(1, 1),
            hl: Plane::zeros(1, 1),
            hh: Plane::zeros(1, 1),
            original_rows: 2,
            original_cols: 2,
        };
        let img = idwt2_haar(&bands).unwrap();
        assert_eq!(img.pixels(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn inconsistent_bands_error() {
        let bands = SubbandSet {
            ll: Plane::zeros(2, 2),
            lh: Plane::zeros(2, 3),
            hl: Plane::zeros(2, 2),
            hh: Plane::zeros(2, 2),
            original_rows: 4,
            original_cols: 4,
        };
        assert!(matches!(
            idwt2_haar(&bands),
            Err(Error::InconsistentSubbands)
        ));
    }

    #[test]
    fn constant_image_has_zero_detail_bands() {
        let img = GrayImage::constant(9, 13, 77.0);
        let b = dwt2_haar(&img);
        assert!(b.lh.data().iter().all(|&v| v == 0.0));
        assert!(b.hl.data().iter().all(|&v| v == 0.0));
        assert!(b.hh.data().iter().all(|&v| v == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn perfect_reconstruction(rows in 1usize..20, cols in 1usize..20, seed in 0u64..1000) {
            let img = pseudo_random_image(rows, cols, seed);
            let back = idwt2_haar(&dwt2_haar(&img)).unwrap();
            for (a, b) in img.pixels().iter().zip(back.pixels()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn linearity(rows in 1usize..12, cols in 1usize..12, seed in 0u64..1000,
                     alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let x = pseudo_random_image(rows, cols, seed);
            let y = pseudo_random_image(rows, cols, seed.wrapping_add(99));
            let combo = GrayImage::from_fn(rows, cols, |cx, cy| {
                alpha * x.get(cx, cy) + beta * y.get(cx, cy)
            });
            let bc = dwt2_haar(&combo);
            let bx = dwt2_haar(&x);
            let by = dwt2_haar(&y);
            for (c, (a, b)) in bc.hh.data().iter()
                .zip(bx.hh.data().iter().zip(by.hh.data())) {
                prop_assert!((c - (alpha * a + beta * b)).abs() < 1e-9);
            }
            for (c, (a, b)) in bc.ll.data().iter()
                .zip(bx.ll.data().iter().zip(by.ll.data())) {
                prop_assert!((c - (alpha * a + beta * b)).abs() < 1e-9);
            }
        }
    }
}
