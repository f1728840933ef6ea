//! Ellipse representation and the 2D primitives built on it.
//!
//! An [`Ellipse`] is stored in its five-parameter form: center `(x, y)`,
//! semi-major axis `a`, semi-minor axis `b` and orientation `theta`, the
//! angle from the positive x axis to the major axis. The orientation is kept
//! in `(-pi/2, pi/2]` at all times; the constructors reject `a < b` instead
//! of swapping the axes.

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Real};

/// Wraps an angle into `(-pi/2, pi/2]`, i.e. modulo `pi`.
pub fn normalize_angle<T: Real>(theta: T) -> Result<T> {
    if !theta.is_finite() {
        return invalid("angle must be finite");
    }
    Ok(wrap_half_turn(theta))
}

/// Same as [`normalize_angle`] for inputs already known to be finite.
pub(crate) fn wrap_half_turn<T: Real>(theta: T) -> T {
    let pi = T::pi();
    let half = T::frac_pi_2();
    let mut r = theta - pi * (theta / pi).round();
    if r <= -half {
        r += pi;
    }
    if r > half {
        r -= pi;
    }
    r
}

/// Five-parameter ellipse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse<T = f64> {
    x: T,
    y: T,
    a: T,
    b: T,
    theta: T,
}

impl<T: Real> Ellipse<T> {
    /// Builds an ellipse, normalizing `theta`.
    ///
    /// Fails when any parameter is non-finite, `b <= 0` or `a < b`.
    pub fn new(x: T, y: T, a: T, b: T, theta: T) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && a.is_finite() && b.is_finite()) {
            return invalid("ellipse parameters must be finite");
        }
        if b <= T::zero() {
            return invalid("semi-minor axis must be positive");
        }
        if a < b {
            return invalid("semi-major axis must not be smaller than the semi-minor axis");
        }
        let theta = normalize_angle(theta)?;
        Ok(Self { x, y, a, b, theta })
    }

    /// Builds an ellipse from two unordered semi-axes, where `theta` is the
    /// direction of the first one. Swaps and rotates by `pi/2` if needed.
    pub fn from_unordered(x: T, y: T, r1: T, r2: T, theta: T) -> Result<Self> {
        if r1 >= r2 {
            Self::new(x, y, r1, r2, theta)
        } else {
            Self::new(x, y, r2, r1, theta + T::frac_pi_2())
        }
    }

    pub fn circle(x: T, y: T, r: T) -> Result<Self> {
        Self::new(x, y, r, r, T::zero())
    }

    pub fn x(&self) -> T {
        self.x
    }
    pub fn y(&self) -> T {
        self.y
    }
    pub fn a(&self) -> T {
        self.a
    }
    pub fn b(&self) -> T {
        self.b
    }
    pub fn theta(&self) -> T {
        self.theta
    }
    pub fn center(&self) -> Vector2<T> {
        Vector2::new(self.x, self.y)
    }

    pub fn area(&self) -> T {
        T::pi() * self.a * self.b
    }

    /// Same shape moved by `(dx, dy)`.
    pub fn translated(&self, dx: T, dy: T) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Left-hand side of the canonical equation; `<= 1` inside.
    pub fn implicit(&self, px: T, py: T) -> T {
        let (s, c) = self.theta.sin_cos();
        let dx = px - self.x;
        let dy = py - self.y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u * u) / (self.a * self.a) + (v * v) / (self.b * self.b)
    }

    /// Shape matrix `A` with `(p - c)^T A (p - c) = 1` on the boundary.
    pub fn shape_matrix(&self) -> Matrix2<T> {
        let (s, c) = self.theta.sin_cos();
        let ia = T::one() / (self.a * self.a);
        let ib = T::one() / (self.b * self.b);
        Matrix2::new(
            c * c * ia + s * s * ib,
            c * s * (ia - ib),
            c * s * (ia - ib),
            s * s * ia + c * c * ib,
        )
    }

    /// Point on the boundary at eccentric anomaly `t`.
    pub fn boundary_point(&self, t: T) -> Vector2<T> {
        let (s, c) = self.theta.sin_cos();
        let (st, ct) = t.sin_cos();
        let u = self.a * ct;
        let v = self.b * st;
        Vector2::new(self.x + u * c - v * s, self.y + u * s + v * c)
    }
}

/// Axis-aligned rectangle given by its center and size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion<T = f64> {
    x: T,
    y: T,
    w: T,
    h: T,
}

impl<T: Real> BoxRegion<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return invalid("box parameters must be finite");
        }
        if w <= T::zero() || h <= T::zero() {
            return invalid("box width and height must be positive");
        }
        Ok(Self { x, y, w, h })
    }

    /// Box spanning `[x0, x1] x [y0, y1]`.
    pub fn from_corners(x0: T, y0: T, x1: T, y1: T) -> Result<Self> {
        let two = lit::<T>(2.0);
        Self::new((x0 + x1) / two, (y0 + y1) / two, x1 - x0, y1 - y0)
    }

    pub fn x(&self) -> T {
        self.x
    }
    pub fn y(&self) -> T {
        self.y
    }
    pub fn w(&self) -> T {
        self.w
    }
    pub fn h(&self) -> T {
        self.h
    }
    pub fn x_min(&self) -> T {
        self.x - self.w / lit(2.0)
    }
    pub fn x_max(&self) -> T {
        self.x + self.w / lit(2.0)
    }
    pub fn y_min(&self) -> T {
        self.y - self.h / lit(2.0)
    }
    pub fn y_max(&self) -> T {
        self.y + self.h / lit(2.0)
    }

    /// Whether `other` lies inside `self`, allowing `slack` on every side.
    pub fn contains_box(&self, other: &BoxRegion<T>, slack: T) -> bool {
        other.x_min() >= self.x_min() - slack
            && other.x_max() <= self.x_max() + slack
            && other.y_min() >= self.y_min() - slack
            && other.y_max() <= self.y_max() + slack
    }
}

/// Axis-aligned square given by its center and side length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareRegion<T = f64> {
    x: T,
    y: T,
    l: T,
}

impl<T: Real> SquareRegion<T> {
    pub fn new(x: T, y: T, l: T) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && l.is_finite()) {
            return invalid("square parameters must be finite");
        }
        if l <= T::zero() {
            return invalid("square side must be positive");
        }
        Ok(Self { x, y, l })
    }

    pub fn x(&self) -> T {
        self.x
    }
    pub fn y(&self) -> T {
        self.y
    }
    pub fn l(&self) -> T {
        self.l
    }
}

/// Width and height of the axis-aligned box tangent to an ellipse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AaExtent<T = f64> {
    pub dx: T,
    pub dy: T,
}

/// Extents of the axis-aligned bounding box, from the horizontal and
/// vertical tangents of the ellipse.
pub fn aa_extent<T: Real>(e: &Ellipse<T>) -> AaExtent<T> {
    let (s, c) = e.theta.sin_cos();
    let a2 = e.a * e.a;
    let b2 = e.b * e.b;
    let two = lit::<T>(2.0);
    AaExtent {
        dx: two * (a2 * c * c + b2 * s * s).sqrt(),
        dy: two * (a2 * s * s + b2 * c * c).sqrt(),
    }
}

/// Axis-aligned bounding box of an ellipse as a [`BoxRegion`].
pub fn aa_box<T: Real>(e: &Ellipse<T>) -> BoxRegion<T> {
    let ext = aa_extent(e);
    BoxRegion {
        x: e.x,
        y: e.y,
        w: ext.dx,
        h: ext.dy,
    }
}

/// Square centered on the ellipse whose side is the diagonal of its
/// axis-aligned box, `2 * sqrt(a^2 + b^2)`; independent of `theta`.
pub fn enclosing_square<T: Real>(e: &Ellipse<T>) -> SquareRegion<T> {
    SquareRegion {
        x: e.x,
        y: e.y,
        l: lit::<T>(2.0) * (e.a * e.a + e.b * e.b).sqrt(),
    }
}

/// Extended square of a box: same center, side equal to the box diagonal.
pub fn extend_box_to_square<T: Real>(p: &BoxRegion<T>) -> SquareRegion<T> {
    SquareRegion {
        x: p.x,
        y: p.y,
        l: (p.w * p.w + p.h * p.h).sqrt(),
    }
}

/// Point-in-ellipse test (boundary inclusive).
pub fn contains<T: Real>(e: &Ellipse<T>, px: T, py: T) -> bool {
    e.implicit(px, py) <= T::one()
}

/// Dense row-major 2D grid of values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<V> {
    cols: usize,
    rows: usize,
    data: Vec<V>,
}

/// Boolean raster.
pub type Mask = Grid<bool>;

impl<V: Clone> Grid<V> {
    pub fn filled(cols: usize, rows: usize, value: V) -> Self {
        Self {
            cols,
            rows,
            data: vec![value; cols * rows],
        }
    }
}

impl<V> Grid<V> {
    pub fn from_vec(cols: usize, rows: usize, data: Vec<V>) -> Result<Self> {
        if data.len() != cols * rows {
            return invalid(format!(
                "grid data has {} cells, expected {}x{}",
                data.len(),
                cols,
                rows
            ));
        }
        Ok(Self { cols, rows, data })
    }

    pub fn from_fn(cols: usize, rows: usize, mut f: impl FnMut(usize, usize) -> V) -> Self {
        let mut data = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(c, r));
            }
        }
        Self { cols, rows, data }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }
    pub fn as_slice(&self) -> &[V] {
        &self.data
    }
    pub fn get(&self, col: usize, row: usize) -> &V {
        &self.data[row * self.cols + col]
    }
    pub fn set(&mut self, col: usize, row: usize, v: V) {
        self.data[row * self.cols + col] = v;
    }
    pub fn map<W>(&self, f: impl FnMut(&V) -> W) -> Grid<W> {
        Grid {
            cols: self.cols,
            rows: self.rows,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Cell-wise AND; shapes must match.
    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if self.shape() != other.shape() {
            return invalid("mask shapes differ");
        }
        Ok(Grid {
            cols: self.cols,
            rows: self.rows,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a && b)
                .collect(),
        })
    }

    /// Whether every true cell of `self` is also true in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.shape() == other.shape()
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }
}

/// Placement of a raster in the plane. Cell `(c, r)` covers
/// `[origin_x + c*cell, origin_x + (c+1)*cell) x [origin_y + r*cell, ...)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T = f64> {
    pub origin_x: T,
    pub origin_y: T,
    pub cell: T,
    pub cols: usize,
    pub rows: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(origin_x: T, origin_y: T, cell: T, cols: usize, rows: usize) -> Result<Self> {
        let spec = Self {
            origin_x,
            origin_y,
            cell,
            cols,
            rows,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.cell > T::zero()) || !self.cell.is_finite() {
            return invalid("grid cell size must be positive");
        }
        if self.cols == 0 || self.rows == 0 {
            return invalid("grid must have at least one row and one column");
        }
        if !(self.origin_x.is_finite() && self.origin_y.is_finite()) {
            return invalid("grid origin must be finite");
        }
        Ok(())
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (T, T) {
        let half = lit::<T>(0.5);
        (
            self.origin_x + (lit::<T>(col as f64) + half) * self.cell,
            self.origin_y + (lit::<T>(row as f64) + half) * self.cell,
        )
    }

    /// Range of column indices whose centers can fall in `[lo, hi]`.
    pub(crate) fn col_range(&self, lo: T, hi: T) -> std::ops::Range<usize> {
        index_range(self.origin_x, self.cell, self.cols, lo, hi)
    }

    pub(crate) fn row_range(&self, lo: T, hi: T) -> std::ops::Range<usize> {
        index_range(self.origin_y, self.cell, self.rows, lo, hi)
    }
}

fn index_range<T: Real>(origin: T, cell: T, n: usize, lo: T, hi: T) -> std::ops::Range<usize> {
    // Center of index i is origin + (i + 0.5) * cell; pad by one cell.
    let half = lit::<T>(0.5);
    let first = ((lo - origin) / cell - half).floor() - T::one();
    let last = ((hi - origin) / cell - half).ceil() + T::one();
    let clamp = |v: T| -> usize {
        if v <= T::zero() {
            0
        } else {
            let v = v.to_f64().unwrap_or(0.0);
            (v as usize).min(n)
        }
    };
    let start = clamp(first);
    let end = clamp(last + T::one());
    start..end.max(start)
}

/// Cell-center rasterization of the filled ellipse.
pub fn rasterize<T: Real>(e: &Ellipse<T>, grid: &GridSpec<T>) -> Result<Mask> {
    grid.validate()?;
    let mut mask = Grid::filled(grid.cols, grid.rows, false);
    let ext = aa_extent(e);
    let half = lit::<T>(0.5);
    let cols = grid.col_range(e.x - ext.dx * half, e.x + ext.dx * half);
    let rows = grid.row_range(e.y - ext.dy * half, e.y + ext.dy * half);
    for r in rows {
        for c in cols.clone() {
            let (px, py) = grid.cell_center(c, r);
            if contains(e, px, py) {
                mask.set(c, r, true);
            }
        }
    }
    Ok(mask)
}

/// Point conic of an ellipse: `x^T M x = 0` for homogeneous boundary points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conic<T: Real = f64> {
    pub m: Matrix3<T>,
}

impl<T: Real> Conic<T> {
    /// Wraps a matrix, symmetrizing it.
    pub fn new(m: Matrix3<T>) -> Self {
        Self {
            m: (m + m.transpose()) * lit::<T>(0.5),
        }
    }
}

/// `M = [A, -A c; -c^T A, c^T A c - 1]` with `A` the shape matrix.
pub fn ellipse_to_conic<T: Real>(e: &Ellipse<T>) -> Conic<T> {
    let a = e.shape_matrix();
    let c = e.center();
    let ac = a * c;
    let k = c.dot(&ac) - T::one();
    Conic {
        m: Matrix3::new(
            a[(0, 0)],
            a[(0, 1)],
            -ac[0],
            a[(1, 0)],
            a[(1, 1)],
            -ac[1],
            -ac[0],
            -ac[1],
            k,
        ),
    }
}

/// Recovers the five ellipse parameters from a point conic (any scale).
pub fn conic_to_ellipse<T: Real>(conic: &Conic<T>) -> Result<Ellipse<T>> {
    let m = conic.m;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotAnEllipse("conic has non-finite entries".into()));
    }
    let scale = m.norm();
    if scale <= T::zero() {
        return Err(Error::NotAnEllipse("zero conic".into()));
    }
    let m = m / scale;
    let a = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let d = Vector2::new(m[(0, 2)], m[(1, 2)]);
    let det = a.determinant();
    let trace = a[(0, 0)] + a[(1, 1)];
    if !(det > T::default_epsilon() * lit(64.0) * trace * trace) {
        return Err(Error::NotAnEllipse(
            "leading block is not sign-definite".into(),
        ));
    }
    let a_inv = a
        .try_inverse()
        .ok_or_else(|| Error::NotAnEllipse("singular leading block".into()))?;
    let center = -(a_inv * d);
    // Value of the quadratic form at the center, negated.
    let k = -(m[(2, 2)] + d.dot(&center));
    if !(k.is_finite() && k != T::zero()) {
        return Err(Error::NotAnEllipse("conic has no real points".into()));
    }
    ellipse_from_shape(center, &(a / k))
}

/// Ellipse `{p : (p - c)^T S (p - c) <= 1}` for a symmetric shape matrix `S`.
///
/// The orientation follows the eigenvector of the smaller eigenvalue (the
/// major axis); a circle gets `theta = 0`.
pub fn ellipse_from_shape<T: Real>(center: Vector2<T>, shape: &Matrix2<T>) -> Result<Ellipse<T>> {
    let (p, q, r) = (shape[(0, 0)], (shape[(0, 1)] + shape[(1, 0)]) / lit(2.0), shape[(1, 1)]);
    if !(p > T::zero()) || !(r > T::zero()) {
        return Err(Error::NotAnEllipse("shape matrix is not positive definite".into()));
    }
    let two = lit::<T>(2.0);
    let mean = (p + r) / two;
    let dev = (((p - r) / two).powi(2) + q * q).sqrt();
    let lam_small = mean - dev;
    let lam_large = mean + dev;
    if !(lam_small > T::zero()) {
        return Err(Error::NotAnEllipse("shape matrix is not positive definite".into()));
    }
    let major = T::one() / lam_small.sqrt();
    let minor = T::one() / lam_large.sqrt();
    let theta = if dev <= mean * T::default_epsilon() * lit(16.0) {
        T::zero()
    } else {
        (-two * q).atan2(r - p) / two
    };
    Ellipse::new(center[0], center[1], major, minor.min(major), theta)
        .map_err(|e| Error::NotAnEllipse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    type Ellipse = super::Ellipse<f64>;
    type BoxRegion = super::BoxRegion<f64>;
    type GridSpec = super::GridSpec<f64>;

    // Orientation rectification via the two atan2 branches.
    fn atan2_rectify(t: f64) -> f64 {
        if t.cos() >= 0.0 {
            t.sin().atan2(t.cos())
        } else {
            (-t.sin()).atan2(-t.cos())
        }
    }

    #[test]
    fn normalize_angle_examples() {
        let r = normalize_angle(0.6 * PI).unwrap();
        assert!((r - (-0.4 * PI)).abs() < 1e-15);
        assert!((r - atan2_rectify(0.6 * PI)).abs() < 1e-15);
        assert_eq!(normalize_angle(FRAC_PI_2).unwrap(), FRAC_PI_2);
        assert_eq!(normalize_angle(-FRAC_PI_2).unwrap(), FRAC_PI_2);
        assert!(normalize_angle(f64::NAN).is_err());
        assert!(normalize_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn normalize_angle_agrees_with_atan2_branches() {
        for i in -400..=400 {
            let t = i as f64 * 0.0173;
            let r = normalize_angle(t).unwrap();
            let o = atan2_rectify(t);
            // atan2 can land on -pi/2 where the half-open range wants pi/2.
            let diff = wrap_half_turn(r - o).abs();
            assert!(diff < 1e-12, "t={t}: {r} vs {o}");
        }
    }

    #[test]
    fn constructor_rejects_bad_axes() {
        assert!(Ellipse::new(0.0, 0.0, 3.0, 4.0, 0.0).is_err());
        assert!(Ellipse::new(0.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(Ellipse::new(0.0, f64::NAN, 2.0, 1.0, 0.0).is_err());
        let e = Ellipse::new(1.0, 2.0, 4.0, 3.0, PI).unwrap();
        assert_eq!(e.theta(), 0.0);
        let f = Ellipse::from_unordered(0.0, 0.0, 1.0, 2.0, 0.0).unwrap();
        assert_eq!((f.a(), f.b(), f.theta()), (2.0, 1.0, FRAC_PI_2));
    }

    #[test]
    fn aa_extent_examples() {
        let e = Ellipse::new(0.0, 0.0, 2.0, 1.0, 0.0).unwrap();
        let x = aa_extent(&e);
        assert_eq!((x.dx, x.dy), (4.0, 2.0));
        let c = Ellipse::new(0.0, 0.0, 2.0, 2.0, 0.7).unwrap();
        let x = aa_extent(&c);
        assert!((x.dx - 4.0).abs() < 1e-14 && (x.dy - 4.0).abs() < 1e-14);
        let r = Ellipse::new(0.0, 0.0, 2.0, 1.0, FRAC_PI_4).unwrap();
        let x = aa_extent(&r);
        let expect = 2.0 * 2.5f64.sqrt();
        assert!((x.dx - expect).abs() < 1e-12 && (x.dy - expect).abs() < 1e-12);
        assert!((x.dx - 3.1623).abs() < 1e-4);
    }

    #[test]
    fn aa_extent_matches_boundary_sampling() {
        let e = Ellipse::new(3.0, -1.0, 5.0, 2.0, 0.3).unwrap();
        let n = 200_000;
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for i in 0..n {
            let p = e.boundary_point(2.0 * PI * i as f64 / n as f64);
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        let x = aa_extent(&e);
        assert!((x.dx - (xmax - xmin)).abs() < 1e-6);
        assert!((x.dy - (ymax - ymin)).abs() < 1e-6);
    }

    #[test]
    fn squares() {
        let e = Ellipse::new(1.0, 1.0, 4.0, 3.0, 0.2).unwrap();
        let s = enclosing_square(&e);
        assert_eq!((s.x(), s.y(), s.l()), (1.0, 1.0, 10.0));
        let u = enclosing_square(&Ellipse::new(0.0, 0.0, 1.0, 1.0, 0.0).unwrap());
        assert!((u.l() - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let rotated = enclosing_square(&Ellipse::new(1.0, 1.0, 4.0, 3.0, -1.1).unwrap());
        assert_eq!(rotated.l(), s.l());

        let q = extend_box_to_square(&BoxRegion::new(2.0, 3.0, 3.0, 4.0).unwrap());
        assert_eq!((q.x(), q.y(), q.l()), (2.0, 3.0, 5.0));
        let q = extend_box_to_square(&BoxRegion::new(0.0, 0.0, 5.0, 5.0).unwrap());
        assert!((q.l() - 5.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!(BoxRegion::new(0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn contains_examples() {
        let e = Ellipse::new(1.0, 2.0, 3.0, 1.0, 0.4).unwrap();
        assert!(contains(&e, 1.0, 2.0));
        let major = e.boundary_point(0.0);
        let inside = e.center() + (major - e.center()) * (1.0 - 1e-12);
        assert!(contains(&e, inside[0], inside[1]));
        // a + eps along the minor-axis direction
        let (s, c) = e.theta().sin_cos();
        let d = 3.0 + 1e-6;
        assert!(!contains(&e, 1.0 - d * s, 2.0 + d * c));
    }

    #[test]
    fn rasterize_examples() {
        let circle = Ellipse::circle(0.0, 0.0, 1.0).unwrap();
        let n = 1000;
        let cell = 2.4 / n as f64;
        let g = GridSpec::new(-1.2, -1.2, cell, n, n).unwrap();
        let m = rasterize(&circle, &g).unwrap();
        let area = m.count() as f64 * cell * cell;
        assert!((area - PI).abs() / PI < 0.01);

        let far = Ellipse::circle(100.0, 100.0, 1.0).unwrap();
        assert_eq!(rasterize(&far, &g).unwrap().count(), 0);

        assert!(GridSpec::new(0.0, 0.0, 1.0, 0, 4).is_err());
        assert!(GridSpec::new(0.0, 0.0, 0.0, 4, 4).is_err());
        let bad = GridSpec {
            origin_x: 0.0,
            origin_y: 0.0,
            cell: -1.0,
            cols: 3,
            rows: 3,
        };
        assert!(rasterize(&circle, &bad).is_err());
    }

    #[test]
    fn rasterize_matches_brute_force_scan() {
        let e = Ellipse::new(0.3, -0.2, 2.0, 0.7, 1.0).unwrap();
        let g = GridSpec::new(-3.0, -3.0, 0.05, 120, 120).unwrap();
        let fast = rasterize(&e, &g).unwrap();
        let slow = Grid::from_fn(120, 120, |c, r| {
            let (x, y) = g.cell_center(c, r);
            contains(&e, x, y)
        });
        assert_eq!(fast, slow);
    }

    #[test]
    fn conic_examples() {
        let unit = ellipse_to_conic(&Ellipse::circle(0.0, 0.0, 1.0).unwrap());
        assert_eq!(unit.m, Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, -1.0)));
        let hyperbola = Conic::new(Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1.0, -1.0)));
        assert!(matches!(conic_to_ellipse(&hyperbola), Err(Error::NotAnEllipse(_))));
        let imaginary = Conic::new(Matrix3::<f64>::identity());
        assert!(conic_to_ellipse(&imaginary).is_err());
        // scaled and sign-flipped conic still decodes
        let e = Ellipse::new(2.0, -1.0, 3.0, 1.5, 0.8).unwrap();
        let c = Conic::new(ellipse_to_conic(&e).m * -7.5);
        let back = conic_to_ellipse(&c).unwrap();
        assert!((back.a() - 3.0).abs() < 1e-12 && (back.theta() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let e = super::Ellipse::<f32>::new(0.0, 0.0, 2.0, 1.0, 0.25).unwrap();
        let x = aa_extent(&e);
        assert!(x.dx > x.dy);
        let back = conic_to_ellipse(&ellipse_to_conic(&e)).unwrap();
        assert!((back.a() - 2.0).abs() < 1e-4);
    }
}
