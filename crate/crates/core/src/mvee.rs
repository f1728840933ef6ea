//! Minimum-volume enclosing ellipse of a planar point set.
//!
//! Khachiyan's barycentric coordinate ascent on the lifted points
//! `q_i = (x_i, y_i, 1)`, started from a Kumar-Yildirim core set, with
//! Todd-Yildirim away steps so the weights of interior points can drop back
//! to zero. Every [`POLISH_EVERY`] iterations
//! the weights on the current support are refined by Newton steps on
//! `log det X(u)`; plain coordinate ascent only converges linearly and can
//! stall when a point sits almost on the boundary. Iteration stops once every
//! point satisfies `(p - c)^T A (p - c) <= 1 + tol`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{ellipse_from_shape, Ellipse, GridSpec, Mask};
use crate::scalar::{lit, to_f64, Real};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// At least three points, not all collinear.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<T: Real = f64> {
    points: Vec<Vector2<T>>,
}

impl<T: Real> PointSet<T> {
    pub fn new(points: Vec<Vector2<T>>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateInput(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::DegenerateInput("non-finite point".into()));
        }
        let (mean, scale) = centering(&points);
        let mut cov = Matrix2::zeros();
        for p in &points {
            let d = (p - mean) * scale;
            cov += d * d.transpose();
        }
        let n = lit::<T>(points.len() as f64);
        let cov = cov / n;
        // Normalized so that trace(cov) = 2.
        if cov.determinant() <= T::default_epsilon().sqrt() * lit(1e-3) {
            return Err(Error::DegenerateInput("points are collinear".into()));
        }
        Ok(Self { points })
    }

    pub fn from_xy(xy: &[(T, T)]) -> Result<Self> {
        Self::new(xy.iter().map(|&(x, y)| Vector2::new(x, y)).collect())
    }

    pub fn points(&self) -> &[Vector2<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Mean and the factor that scales the centered cloud to RMS radius sqrt(2).
fn centering<T: Real>(points: &[Vector2<T>]) -> (Vector2<T>, T) {
    let n = lit::<T>(points.len() as f64);
    let mean = points.iter().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let ms = points
        .iter()
        .fold(T::zero(), |acc, p| acc + (p - mean).norm_squared())
        / n;
    let scale = if ms > T::zero() {
        (lit::<T>(2.0) / ms).sqrt()
    } else {
        T::one()
    };
    (mean, scale)
}

/// Result of [`mvee_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct MveeFit<T: Real = f64> {
    pub ellipse: Ellipse<T>,
    pub center: Vector2<T>,
    /// `A` in `(p - c)^T A (p - c) <= 1`.
    pub shape: Matrix2<T>,
    pub weights: Vec<T>,
    pub iterations: usize,
}

/// Minimum-volume enclosing ellipse; see [`mvee_fit`].
pub fn mvee<T: Real>(points: &PointSet<T>, tol: T, max_iter: usize) -> Result<Ellipse<T>> {
    mvee_fit(points, tol, max_iter).map(|f| f.ellipse)
}

pub fn mvee_fit<T: Real>(points: &PointSet<T>, tol: T, max_iter: usize) -> Result<MveeFit<T>> {
    let n = points.len();
    let d = lit::<T>(2.0);
    let (mean, scale) = centering(&points.points);
    let lifted: Vec<Vector3<T>> = points
        .points
        .iter()
        .map(|p| {
            let q = (p - mean) * scale;
            Vector3::new(q[0], q[1], T::one())
        })
        .collect();

    let mut u = vec![T::zero(); n];
    let core = core_set(&lifted);
    for &i in &core {
        u[i] = T::one() / lit(core.len() as f64);
    }
    let mut m = vec![T::zero(); n];
    let limit = T::one() + d * (T::one() + tol);
    let mut iterations = 0;
    loop {
        let x_inv = scatter(&lifted, &u)
            .try_inverse()
            .ok_or_else(|| Error::DegenerateInput("weighted scatter became singular".into()))?;
        for (mi, q) in m.iter_mut().zip(&lifted) {
            *mi = q.dot(&(x_inv * q));
        }
        let (j, m_max) = argmax(&m);
        if m_max <= limit {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::ConvergenceFailure {
                iterations,
                residual: to_f64((m_max - T::one()) / d - T::one()),
                weights: u.iter().map(|&w| to_f64(w)).collect(),
            });
        }
        iterations += 1;
        if iterations % POLISH_EVERY == 0 {
            polish(&lifted, &mut u, &m);
            continue;
        }

        let d1 = d + T::one();
        // Away candidate: the supported point with the smallest M.
        let mut away: Option<(usize, T)> = None;
        for (i, (&mi, &wi)) in m.iter().zip(&u).enumerate() {
            if wi > T::zero() && away.is_none_or(|(_, best)| mi < best) {
                away = Some((i, mi));
            }
        }
        let toward_gap = m_max / d1 - T::one();
        match away {
            Some((i, m_min)) if T::one() - m_min / d1 > toward_gap && m_min < d1 => {
                let ui = u[i];
                let mut beta = (m_min - d1) / (d1 * (m_min - T::one()));
                let floor = -ui / (T::one() - ui);
                if beta < floor {
                    beta = floor;
                }
                for w in u.iter_mut() {
                    *w *= T::one() - beta;
                }
                u[i] += beta;
                if u[i] < T::zero() {
                    u[i] = T::zero();
                }
            }
            _ => {
                let beta = (m_max - d1) / (d1 * (m_max - T::one()));
                for w in u.iter_mut() {
                    *w *= T::one() - beta;
                }
                u[j] += beta;
            }
        }
    }

    // Back to the input frame.
    let mut c = Vector2::zeros();
    for (q, &w) in lifted.iter().zip(&u) {
        c += Vector2::new(q[0], q[1]) * w;
    }
    let mut s = Matrix2::zeros();
    for (q, &w) in lifted.iter().zip(&u) {
        let p = Vector2::new(q[0], q[1]);
        s += p * p.transpose() * w;
    }
    s -= c * c.transpose();
    let a_norm = s
        .try_inverse()
        .ok_or_else(|| Error::DegenerateInput("singular scatter at the optimum".into()))?
        / d;
    let center = mean + c / scale;
    let shape = a_norm * (scale * scale);
    let ellipse = ellipse_from_shape(center, &shape)
        .map_err(|e| Error::DegenerateInput(e.to_string()))?;
    Ok(MveeFit {
        ellipse,
        center,
        shape,
        weights: u,
        iterations,
    })
}

/// Kumar-Yildirim start: the extreme points along `x` and along the normal
/// of the segment joining them.
fn core_set<T: Real>(lifted: &[Vector3<T>]) -> Vec<usize> {
    let extremes = |dir: Vector2<T>| {
        let proj = |i: usize| lifted[i][0] * dir[0] + lifted[i][1] * dir[1];
        let mut lo = 0;
        let mut hi = 0;
        for i in 1..lifted.len() {
            if proj(i) < proj(lo) {
                lo = i;
            }
            if proj(i) > proj(hi) {
                hi = i;
            }
        }
        (lo, hi)
    };
    let (a, b) = extremes(Vector2::new(T::one(), T::zero()));
    let span = lifted[b] - lifted[a];
    let (c, e) = extremes(Vector2::new(-span[1], span[0]));
    let mut idx = vec![a, b, c, e];
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Iterations between Newton refinements of the support weights.
pub const POLISH_EVERY: usize = 20;

fn scatter<T: Real>(lifted: &[Vector3<T>], u: &[T]) -> Matrix3<T> {
    let mut x = Matrix3::zeros();
    for (q, &w) in lifted.iter().zip(u) {
        if w > T::zero() {
            x += q * q.transpose() * w;
        }
    }
    x
}

/// Newton ascent on `log det X(u)` over the simplex, restricted to an active
/// set: the points carrying weight plus those with `m_i > d + 1`. Points at
/// zero weight whose step would be negative leave the set. Leaves `u`
/// untouched if no step improves.
fn polish<T: Real>(lifted: &[Vector3<T>], u: &mut [T], m: &[T]) {
    let d1 = lit::<T>(3.0);
    let mut violators: Vec<usize> = (0..u.len()).filter(|&i| u[i] == T::zero() && m[i] > d1).collect();
    violators.sort_by(|&i, &j| m[j].partial_cmp(&m[i]).unwrap_or(std::cmp::Ordering::Equal));
    violators.truncate(8);
    if !violators.is_empty() {
        // seed the violators with a little weight so the ratio test, not the
        // sign of a coupled step, decides whether they stay
        let beta = lit::<T>(1e-3);
        let share = beta / lit(violators.len() as f64);
        for w in u.iter_mut() {
            *w *= T::one() - beta;
        }
        for &i in &violators {
            u[i] = share;
        }
    }
    let mut active: Vec<usize> = (0..u.len()).filter(|&i| u[i] > T::zero()).collect();
    // the cap only bounds the cost of the dense solve
    if active.len() > 64 {
        return;
    }
    let log_det = |u: &[T]| {
        let det = scatter(lifted, u).determinant();
        if det > T::zero() {
            Some(det.ln())
        } else {
            None
        }
    };
    let Some(mut f) = log_det(u) else { return };
    for _ in 0..30 {
        let Some(x_inv) = scatter(lifted, u).try_inverse() else { return };
        let n = active.len();
        let k = DMatrix::from_fn(n, n, |i, j| lifted[active[i]].dot(&(x_inv * lifted[active[j]])));
        let g = DVector::from_fn(n, |i, _| k[(i, i)]);
        // Hessian of -log det; rank at most six
        let h = k.component_mul(&k);
        let svd = h.svd(true, true);
        // relative rank cutoff: with points nearly on one conic the direction
        // that separates them has a tiny but meaningful curvature
        let eps = svd.singular_values.max() * lit(n as f64) * T::default_epsilon();
        let ones = DVector::from_element(n, T::one());
        let (Ok(hg), Ok(h1)) = (svd.solve(&g, eps), svd.solve(&ones, eps)) else { return };
        let denom = ones.dot(&h1);
        if denom <= T::zero() {
            return;
        }
        let lambda = ones.dot(&hg) / denom;
        let step = hg - h1 * lambda;
        if step.amax() <= lit::<T>(1e-15) {
            return;
        }
        // largest step keeping the weights nonnegative
        let mut t = T::one();
        let mut blocking = None;
        for (s, &i) in step.iter().zip(&active) {
            if *s < T::zero() && -u[i] / *s < t {
                t = -u[i] / *s;
                blocking = Some(i);
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut trial = u.to_vec();
            for (s, &i) in step.iter().zip(&active) {
                trial[i] += *s * t;
                if trial[i] < T::zero() {
                    trial[i] = T::zero();
                }
            }
            if let Some(b) = blocking {
                trial[b] = T::zero();
            }
            if let Some(ft) = log_det(&trial).filter(|&ft| ft >= f) {
                let total = trial.iter().fold(T::zero(), |a, &w| a + w);
                for (w, tw) in u.iter_mut().zip(&trial) {
                    *w = *tw / total;
                }
                f = ft;
                improved = true;
                break;
            }
            t *= lit(0.5);
            blocking = None;
        }
        if !improved {
            return;
        }
        if let Some(b) = blocking {
            active.retain(|&i| i != b);
        }
    }
}

fn argmax<T: Real>(v: &[T]) -> (usize, T) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

/// Centers of boundary cells: true cells with at least one false (or
/// out-of-grid) 4-neighbor.
pub fn mask_to_points<T: Real>(mask: &Mask, grid: &GridSpec<T>) -> Result<PointSet<T>> {
    if mask.shape() != (grid.cols, grid.rows) {
        return Err(Error::InvalidArgument("mask and grid shapes differ".into()));
    }
    let (cols, rows) = mask.shape();
    let at = |c: isize, r: isize| -> bool {
        c >= 0 && r >= 0 && (c as usize) < cols && (r as usize) < rows && *mask.get(c as usize, r as usize)
    };
    let mut pts = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if !*mask.get(c, r) {
                continue;
            }
            let (ci, ri) = (c as isize, r as isize);
            if !(at(ci - 1, ri) && at(ci + 1, ri) && at(ci, ri - 1) && at(ci, ri + 1)) {
                let (x, y) = grid.cell_center(c, r);
                pts.push(Vector2::new(x, y));
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::DegenerateInput("mask is empty".into()));
    }
    PointSet::new(pts)
}
