//! Geometry of the refined feature region inside an extended square and
//! the occlusion-pattern targets built on it.

use crate::error::{invalid, Result};
use crate::geometry::{extend_box_to_square, rasterize, BoxRegion, Ellipse, Grid, GridSpec, Mask, SquareRegion};
use crate::scalar::{lit, Real};

/// Probability clamp used by [`bce_mask_loss`].
pub const PROB_EPS: f64 = 1e-7;

/// Default side of the occlusion-target grid.
pub const DEFAULT_MASK_SIZE: usize = 28;

/// Integer limits of a resized rectangle centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadBounds {
    pub x_min: i64,
    pub x_max: i64,
    pub y_min: i64,
    pub y_max: i64,
}

impl PadBounds {
    pub fn width(&self) -> i64 {
        self.x_max - self.x_min
    }
    pub fn height(&self) -> i64 {
        self.y_max - self.y_min
    }
}

/// Smallest integer rectangle enclosing a `w x h` region shrunk by `r`:
/// `[floor(-w/2r), ceil(w/2r)]` and likewise for `h`.
pub fn pad_bounds<T: Real>(w: T, h: T, r: T) -> Result<PadBounds> {
    if !(w > T::zero() && h > T::zero() && r > T::zero()) {
        return invalid("pad bounds need positive width, height and resize factor");
    }
    let two = lit::<T>(2.0);
    let hw = w / (two * r);
    let hh = h / (two * r);
    if !(hw.is_finite() && hh.is_finite()) {
        return invalid("pad bounds overflow");
    }
    let to_i = |v: T| v.to_f64().unwrap_or(0.0) as i64;
    Ok(PadBounds {
        x_min: to_i((-hw).floor()),
        x_max: to_i(hw.ceil()),
        y_min: to_i((-hh).floor()),
        y_max: to_i(hh.ceil()),
    })
}

fn square_grid<T: Real>(square: &SquareRegion<T>, m: usize) -> Result<GridSpec<T>> {
    let half = square.l() / lit(2.0);
    GridSpec::new(
        square.x() - half,
        square.y() - half,
        square.l() / lit(m as f64),
        m,
        m,
    )
}

/// Cells of the `m x m` square grid whose centers fall inside `visible`;
/// everything else is the zero-padded area.
///
/// The rectangle is half-open: left and top edges are inclusive.
pub fn validity_mask<T: Real>(
    square: &SquareRegion<T>,
    visible: &BoxRegion<T>,
    m: usize,
) -> Result<Mask> {
    if m < 2 {
        return invalid("mask size must be at least 2");
    }
    let slack = square.l() * lit(1e-12);
    if visible.w() > square.l() + slack || visible.h() > square.l() + slack {
        return invalid("visible region is larger than the extended square");
    }
    let grid = square_grid(square, m)?;
    let (x0, x1, y0, y1) = (visible.x_min(), visible.x_max(), visible.y_min(), visible.y_max());
    Ok(Grid::from_fn(m, m, |c, r| {
        let (u, v) = grid.cell_center(c, r);
        u >= x0 && u < x1 && v >= y0 && v < y1
    }))
}

/// Whole and visible ellipse masks on the extended square of `visible`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcclusionTarget {
    pub whole_mask: Mask,
    pub visible_mask: Mask,
}

/// Occlusion-pattern targets: the whole ellipse sampled on the `m x m`
/// grid of the visible box's extended square, and its restriction to the
/// visible rectangle.
pub fn occlusion_target<T: Real>(
    e: &Ellipse<T>,
    visible: &BoxRegion<T>,
    m: usize,
) -> Result<OcclusionTarget> {
    if m < 8 {
        return invalid("occlusion target size must be at least 8");
    }
    let square = extend_box_to_square(visible);
    let whole_mask = rasterize(e, &square_grid(&square, m)?)?;
    let visible_mask = whole_mask.and(&validity_mask(&square, visible, m)?)?;
    Ok(OcclusionTarget {
        whole_mask,
        visible_mask,
    })
}

/// Mean binary cross-entropy between predicted probabilities and a mask.
pub fn bce_mask_loss<T: Real>(pred: &Grid<T>, target: &Mask) -> Result<T> {
    if pred.shape() != target.shape() {
        return invalid("prediction and target shapes differ");
    }
    let n = pred.as_slice().len();
    if n == 0 {
        return invalid("empty mask");
    }
    let eps = lit::<T>(PROB_EPS);
    let mut sum = T::zero();
    for (&p, &t) in pred.as_slice().iter().zip(target.as_slice()) {
        if !(p >= T::zero() && p <= T::one()) {
            return invalid("predicted probabilities must lie in [0, 1]");
        }
        let p = p.clamp(eps, T::one() - eps);
        sum -= if t { p.ln() } else { (T::one() - p).ln() };
    }
    Ok(sum / lit(n as f64))
}
