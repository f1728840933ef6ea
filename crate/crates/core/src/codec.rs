//! Offset encoding of boxes and occlusion-aware ellipses, and the
//! angle-rectified regression loss.
//!
//! Ellipse offsets are measured relative to an extended square `Q` and are
//! rescaled by the visibility scale `s = Q_l / E_l`, so a small visible part
//! near the rim of a large object still produces bounded targets. With
//! `s = 1` the encoding reduces to the plain five-offset form.

use crate::error::{invalid, Result};
use crate::geometry::{wrap_half_turn, BoxRegion, Ellipse, SquareRegion};
use crate::scalar::{lit, Real};

/// Lower clamp for a decoded visibility scale.
pub const MIN_DECODED_SCALE: f64 = 1e-3;

/// Bounding-box regression offsets `(tx, ty, tw, th)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxOffsets<T = f64> {
    pub tx: T,
    pub ty: T,
    pub tw: T,
    pub th: T,
}

/// Ellipse regression offsets; `dtheta` is the orientation in half turns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseOffsets<T = f64> {
    pub dx: T,
    pub dy: T,
    pub da: T,
    pub db: T,
    pub ds: T,
    pub dtheta: T,
}

impl<T: Real> EllipseOffsets<T> {
    pub fn zero() -> Self {
        Self::from_array([T::zero(); 6])
    }

    /// Components in the order `dx, dy, da, db, ds, dtheta`.
    pub fn to_array(&self) -> [T; 6] {
        [self.dx, self.dy, self.da, self.db, self.ds, self.dtheta]
    }

    pub fn from_array(v: [T; 6]) -> Self {
        Self {
            dx: v[0],
            dy: v[1],
            da: v[2],
            db: v[3],
            ds: v[4],
            dtheta: v[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Ratio between the extended square of the visible part and the enclosing
/// square of the whole ellipse, in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct VisibilityScale<T = f64>(T);

impl<T: Real> VisibilityScale<T> {
    pub fn new(s: T) -> Result<Self> {
        if !(s > T::zero() && s <= T::one()) {
            return invalid("visibility scale must lie in (0, 1]");
        }
        Ok(Self(s))
    }

    pub fn full() -> Self {
        Self(T::one())
    }

    /// `Q_l / E_l` with `E_l = 2 sqrt(a^2 + b^2)`.
    pub fn between(q: &SquareRegion<T>, e: &Ellipse<T>) -> Result<Self> {
        let el = lit::<T>(2.0) * (e.a() * e.a() + e.b() * e.b()).sqrt();
        Self::new(q.l() / el)
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// Whether a region counts as positive for the regression loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchLabel {
    pub positive: bool,
}

impl MatchLabel {
    pub const POSITIVE: Self = Self { positive: true };
    pub const NEGATIVE: Self = Self { positive: false };
}

/// Box regression targets of `g` relative to proposal `p`.
pub fn encode_box<T: Real>(p: &BoxRegion<T>, g: &BoxRegion<T>) -> BoxOffsets<T> {
    BoxOffsets {
        tx: (g.x() - p.x()) / p.w(),
        ty: (g.y() - p.y()) / p.h(),
        tw: (g.w() / p.w()).ln(),
        th: (g.h() / p.h()).ln(),
    }
}

/// Applies box offsets to a proposal.
pub fn decode_box<T: Real>(p: &BoxRegion<T>, t: &BoxOffsets<T>) -> Result<BoxRegion<T>> {
    BoxRegion::new(
        p.x() + t.tx * p.w(),
        p.y() + t.ty * p.h(),
        p.w() * t.tw.exp(),
        p.h() * t.th.exp(),
    )
}

/// Five-offset encoding for unoccluded objects (`ds` is reported as zero).
pub fn encode_ellipse_unoccluded<T: Real>(q: &SquareRegion<T>, e: &Ellipse<T>) -> EllipseOffsets<T> {
    let two = lit::<T>(2.0);
    EllipseOffsets {
        dx: (e.x() - q.x()) / q.l(),
        dy: (e.y() - q.y()) / q.l(),
        da: (two * e.a() / q.l()).ln(),
        db: (two * e.b() / q.l()).ln(),
        ds: T::zero(),
        dtheta: e.theta() / T::pi(),
    }
}

/// Six-offset encoding of ellipse `e` seen through square `q` at scale `s`.
pub fn encode_ellipse<T: Real>(
    q: &SquareRegion<T>,
    e: &Ellipse<T>,
    s: VisibilityScale<T>,
) -> EllipseOffsets<T> {
    let s = s.get();
    let two = lit::<T>(2.0);
    EllipseOffsets {
        dx: s * (e.x() - q.x()) / q.l(),
        dy: s * (e.y() - q.y()) / q.l(),
        da: (two * s * e.a() / q.l()).ln(),
        db: (two * s * e.b() / q.l()).ln(),
        ds: ((s + T::one()) / two).ln(),
        dtheta: e.theta() / T::pi(),
    }
}

/// Inverts [`encode_ellipse`].
///
/// The decoded scale is clamped to `[1e-3, 1]`. If the decoded axes come
/// out in the wrong order they are swapped and the orientation is turned
/// by a quarter turn. Fails only when the offsets overflow to a
/// non-finite ellipse.
pub fn decode_ellipse<T: Real>(
    q: &SquareRegion<T>,
    d: &EllipseOffsets<T>,
) -> Result<(Ellipse<T>, VisibilityScale<T>)> {
    if !d.is_finite() {
        return invalid("ellipse offsets must be finite");
    }
    let two = lit::<T>(2.0);
    let s = (two * d.ds.exp() - T::one()).clamp(lit(MIN_DECODED_SCALE), T::one());
    let reach = q.l() / s;
    let x = reach * d.dx + q.x();
    let y = reach * d.dy + q.y();
    let a = q.l() / (two * s) * d.da.exp();
    let b = q.l() / (two * s) * d.db.exp();
    let theta = wrap_half_turn(T::pi() * d.dtheta);
    let e = Ellipse::from_unordered(x, y, a, b, theta)?;
    Ok((e, VisibilityScale(s)))
}

/// Difference `d - d_star` of two half-turn offsets wrapped into `(-1/2, 1/2]`.
fn wrapped_turns<T: Real>(d: T, d_star: T) -> T {
    let half = lit::<T>(0.5);
    let diff = d - d_star;
    let mut r = diff - diff.round();
    if r <= -half {
        r += T::one();
    }
    if r > half {
        r -= T::one();
    }
    r
}

/// Rectified orientation residual `rho` in radians, in `(-pi/2, pi/2]`.
///
/// Offsets are angles divided by `pi`, so opposite-looking orientations such
/// as `0.5` and `-0.5` give a zero residual.
pub fn angle_residual<T: Real>(d: T, d_star: T) -> T {
    T::pi() * wrapped_turns(d, d_star)
}

/// Smooth L1: `0.5 x^2` for `|x| < 1`, `|x| - 0.5` otherwise.
pub fn smooth_l1<T: Real>(x: T) -> T {
    let ax = x.abs();
    if ax < T::one() {
        lit::<T>(0.5) * x * x
    } else {
        ax - lit(0.5)
    }
}

/// Derivative of [`smooth_l1`].
pub fn smooth_l1_grad<T: Real>(x: T) -> T {
    if x.abs() < T::one() {
        x
    } else {
        x.signum()
    }
}

fn residuals<T: Real>(d: &EllipseOffsets<T>, d_star: &EllipseOffsets<T>) -> [T; 6] {
    [
        d.dx - d_star.dx,
        d.dy - d_star.dy,
        d.da - d_star.da,
        d.db - d_star.db,
        d.ds - d_star.ds,
        // rho / pi
        wrapped_turns(d.dtheta, d_star.dtheta),
    ]
}

/// Per-region regression loss: smooth L1 summed over the six components,
/// the orientation term taken on the rectified residual divided by `pi`.
pub fn ellipse_loss<T: Real>(
    d: &EllipseOffsets<T>,
    d_star: &EllipseOffsets<T>,
    label: MatchLabel,
) -> T {
    if !label.positive {
        return T::zero();
    }
    residuals(d, d_star)
        .into_iter()
        .fold(T::zero(), |acc, r| acc + smooth_l1(r))
}

/// Gradient of [`ellipse_loss`] (positive label) with respect to `d`.
///
/// The rectification is piecewise a shift by whole turns, so it passes the
/// gradient through unchanged.
pub fn ellipse_loss_grad<T: Real>(
    d: &EllipseOffsets<T>,
    d_star: &EllipseOffsets<T>,
) -> EllipseOffsets<T> {
    EllipseOffsets::from_array(residuals(d, d_star).map(smooth_l1_grad))
}

/// Mean of the per-region losses over the positive regions; zero if none.
pub fn mean_ellipse_loss<T: Real>(
    regions: &[(EllipseOffsets<T>, EllipseOffsets<T>, MatchLabel)],
) -> T {
    let mut sum = T::zero();
    let mut n = 0usize;
    for (d, d_star, label) in regions {
        if label.positive {
            sum += ellipse_loss(d, d_star, *label);
            n += 1;
        }
    }
    if n == 0 {
        T::zero()
    } else {
        sum / lit(n as f64)
    }
}
