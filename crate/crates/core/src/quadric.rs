//! Ellipsoids as dual quadrics: projection to image ellipses, linear
//! multi-view reconstruction, decomposition into pose and size, and the
//! 3D error metrics used to compare estimates with ground truth.
//!
//! A dual quadric `Q*` images to the dual conic `C* ~ P Q* P^T`. Given
//! three or more views the unknown quadric (10 parameters) and the per-view
//! scale factors are solved jointly as the nullspace of one homogeneous
//! system.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Vector3, Vector4};

use crate::error::{invalid, Error, Result};
use crate::geometry::{conic_to_ellipse, Conic, Ellipse};
use crate::scalar::{lit, to_f64, Real};

/// Minimum number of views for [`reconstruct`].
pub const MIN_VIEWS: usize = 3;

/// 3x4 projection matrix, world to homogeneous image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraMatrix<T: Real = f64> {
    p: Matrix3x4<T>,
}

impl<T: Real> CameraMatrix<T> {
    /// Fails unless the matrix is finite with rank 3.
    pub fn new(p: Matrix3x4<T>) -> Result<Self> {
        if p.iter().any(|v| !v.is_finite()) {
            return invalid("camera matrix has non-finite entries");
        }
        let sv = p.singular_values();
        let max = sv.max();
        let min = sv.min();
        if !(max > T::zero()) || min <= max * T::default_epsilon() * lit(1e3) {
            return invalid("camera matrix must have rank 3");
        }
        Ok(Self { p })
    }

    /// `P = K [R | t]`.
    pub fn from_parts(k: &Matrix3<T>, r: &Matrix3<T>, t: &Vector3<T>) -> Result<Self> {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        rt.set_column(3, t);
        Self::new(k * rt)
    }

    /// Pinhole camera at `eye` looking at `target`; image `y` points along
    /// the projection of `-up`.
    pub fn look_at(
        eye: &Vector3<T>,
        target: &Vector3<T>,
        up: &Vector3<T>,
        focal: T,
        cx: T,
        cy: T,
    ) -> Result<Self> {
        let z = (target - eye).normalize();
        let x = z.cross(up);
        if x.norm() <= T::default_epsilon() {
            return invalid("up vector is parallel to the viewing direction");
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let k = Matrix3::new(focal, T::zero(), cx, T::zero(), focal, cy, T::zero(), T::zero(), T::one());
        Self::from_parts(&k, &r, &(-(r * eye)))
    }

    pub fn matrix(&self) -> &Matrix3x4<T> {
        &self.p
    }

    /// Signed depth of a world point (positive in front of the camera).
    pub fn depth(&self, x: &Vector3<T>) -> T {
        let m = self.p.fixed_view::<3, 3>(0, 0).into_owned();
        let w = self.p.row(2).transpose().dot(&Vector4::new(x[0], x[1], x[2], T::one()));
        let sign = if m.determinant() < T::zero() { -T::one() } else { T::one() };
        let scale = m.row(2).norm();
        sign * w / scale
    }

    /// Image of a world point.
    pub fn project_point(&self, x: &Vector3<T>) -> (T, T) {
        let h = self.p * Vector4::new(x[0], x[1], x[2], T::one());
        (h[0] / h[2], h[1] / h[2])
    }
}

/// Symmetric 4x4 dual quadric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualQuadric<T: Real = f64> {
    pub q: Matrix4<T>,
}

impl<T: Real> DualQuadric<T> {
    pub fn new(q: Matrix4<T>) -> Self {
        Self {
            q: (q + q.transpose()) * lit::<T>(0.5),
        }
    }

    /// Center `Q*[0..3, 3] / Q*[3, 3]`, if defined.
    pub fn center(&self) -> Option<Vector3<T>> {
        let w = self.q[(3, 3)];
        if w == T::zero() || !w.is_finite() {
            return None;
        }
        Some(self.q.fixed_view::<3, 1>(0, 3).into_owned() / w)
    }
}

/// Symmetric 3x3 dual conic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualConic<T: Real = f64> {
    pub c: Matrix3<T>,
}

impl<T: Real> DualConic<T> {
    pub fn new(c: Matrix3<T>) -> Self {
        Self {
            c: (c + c.transpose()) * lit::<T>(0.5),
        }
    }

    /// `C* = H diag(a^2, b^2, -1) H^T`, `H` the ellipse's rigid placement.
    pub fn of_ellipse(e: &Ellipse<T>) -> Self {
        let (s, c) = e.theta().sin_cos();
        let r = nalgebra::Matrix2::new(c, -s, s, c);
        let d = nalgebra::Matrix2::new(e.a() * e.a(), T::zero(), T::zero(), e.b() * e.b());
        let ctr = e.center();
        let block = r * d * r.transpose() - ctr * ctr.transpose();
        Self {
            c: Matrix3::new(
                block[(0, 0)],
                block[(0, 1)],
                -ctr[0],
                block[(1, 0)],
                block[(1, 1)],
                -ctr[1],
                -ctr[0],
                -ctr[1],
                -T::one(),
            ),
        }
    }

    /// Point conic (matrix inverse) converted to an ellipse.
    pub fn to_ellipse(&self) -> Result<Ellipse<T>> {
        let scale = self.c.norm();
        if !(scale > T::zero()) {
            return Err(Error::NotAnEllipse("zero dual conic".into()));
        }
        let inv = (self.c / scale)
            .try_inverse()
            .ok_or_else(|| Error::NotAnEllipse("dual conic is singular".into()))?;
        conic_to_ellipse(&Conic::new(inv))
    }
}

/// Center, descending semi-axes and orientation of an ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidPose<T: Real = f64> {
    center: Vector3<T>,
    semi_axes: Vector3<T>,
    rotation: Matrix3<T>,
}

fn orthonormal_tol<T: Real>() -> T {
    lit::<T>(1e-9).max(T::default_epsilon() * lit(100.0))
}

impl<T: Real> EllipsoidPose<T> {
    /// Columns of `rotation` are the axis directions, in the order of
    /// `semi_axes` (which must be positive and descending).
    pub fn new(center: Vector3<T>, semi_axes: Vector3<T>, rotation: Matrix3<T>) -> Result<Self> {
        if center.iter().chain(semi_axes.iter()).chain(rotation.iter()).any(|v| !v.is_finite()) {
            return invalid("ellipsoid pose has non-finite entries");
        }
        if !(semi_axes[2] > T::zero()) || semi_axes[0] < semi_axes[1] || semi_axes[1] < semi_axes[2] {
            return invalid("semi-axes must be positive and sorted in descending order");
        }
        let tol = orthonormal_tol::<T>();
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > tol || (rotation.determinant() - T::one()).abs() > tol {
            return invalid("rotation must be proper orthonormal");
        }
        Ok(Self {
            center,
            semi_axes,
            rotation,
        })
    }

    /// Sorts the axes (permuting rotation columns) and fixes `det = +1`.
    pub fn from_unsorted(center: Vector3<T>, semi_axes: Vector3<T>, rotation: Matrix3<T>) -> Result<Self> {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| semi_axes[j].partial_cmp(&semi_axes[i]).unwrap_or(std::cmp::Ordering::Equal));
        let axes = Vector3::new(semi_axes[idx[0]], semi_axes[idx[1]], semi_axes[idx[2]]);
        let mut r = Matrix3::from_columns(&[rotation.column(idx[0]), rotation.column(idx[1]), rotation.column(idx[2])]);
        if r.determinant() < T::zero() {
            r.set_column(2, &(-r.column(2)));
        }
        Self::new(center, axes, r)
    }

    pub fn center(&self) -> &Vector3<T> {
        &self.center
    }
    pub fn semi_axes(&self) -> &Vector3<T> {
        &self.semi_axes
    }
    pub fn rotation(&self) -> &Matrix3<T> {
        &self.rotation
    }
}

/// `Q* = [R D R^T - t t^T, -t; -t^T, -1]` with `D = diag(axes^2)`.
pub fn ellipsoid_to_quadric<T: Real>(pose: &EllipsoidPose<T>) -> DualQuadric<T> {
    let d = Matrix3::from_diagonal(&pose.semi_axes.component_mul(&pose.semi_axes));
    let t = pose.center;
    let block = pose.rotation * d * pose.rotation.transpose() - t * t.transpose();
    let mut q = Matrix4::zeros();
    q.fixed_view_mut::<3, 3>(0, 0).copy_from(&block);
    q.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-t));
    q.fixed_view_mut::<1, 3>(3, 0).copy_from(&(-t.transpose()));
    q[(3, 3)] = -T::one();
    DualQuadric::new(q)
}

/// Inverse of [`ellipsoid_to_quadric`], valid for any nonzero scale of `q`.
pub fn decompose_quadric<T: Real>(q: &DualQuadric<T>) -> Result<EllipsoidPose<T>> {
    let q = q.q;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotAnEllipsoid("quadric has non-finite entries".into()));
    }
    let w = q[(3, 3)];
    if w.abs() <= q.amax() * T::default_epsilon() * lit(16.0) {
        return Err(Error::NotAnEllipsoid("quadric has no finite center".into()));
    }
    let qn = q / (-w);
    let t = -qn.fixed_view::<3, 1>(0, 3).into_owned();
    let block = qn.fixed_view::<3, 3>(0, 0).into_owned();
    let shape = block + t * t.transpose();
    let shape = (shape + shape.transpose()) * lit::<T>(0.5);
    let eig = shape.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    if !(max > T::zero()) || eig.eigenvalues.iter().any(|&l| l <= max * T::default_epsilon() * lit(16.0)) {
        return Err(Error::NotAnEllipsoid("shape matrix is not positive definite".into()));
    }
    let axes = eig.eigenvalues.map(|l| l.sqrt());
    EllipsoidPose::from_unsorted(t, axes, eig.eigenvectors)
        .map_err(|e| Error::NotAnEllipsoid(e.to_string()))
}

/// Image ellipse of an ellipsoid.
///
/// Fails with [`Error::BehindCamera`] when the ellipsoid center is not in
/// front of the camera and [`Error::NotAnEllipse`] when the outline is not
/// a real ellipse (e.g. the camera sits inside the ellipsoid).
pub fn project<T: Real>(q: &DualQuadric<T>, cam: &CameraMatrix<T>) -> Result<Ellipse<T>> {
    let center = q
        .center()
        .ok_or_else(|| Error::NotAnEllipse("quadric has no finite center".into()))?;
    let depth = cam.depth(&center);
    if !(depth > T::zero()) {
        return Err(Error::BehindCamera { depth: to_f64(depth) });
    }
    project_dual(q, cam).to_ellipse()
}

/// `C* = P Q* P^T`.
pub fn project_dual<T: Real>(q: &DualQuadric<T>, cam: &CameraMatrix<T>) -> DualConic<T> {
    DualConic::new(cam.p * q.q * cam.p.transpose())
}

// Index pairs of the upper triangle of a symmetric 4x4 matrix.
const QUADRIC_PARAMS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];
const CONIC_ENTRIES: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Image-side conditioning: moves the ellipse center to the origin and
/// scales its boundary to RMS radius `sqrt(2)`.
fn normalizing_transform<T: Real>(e: &Ellipse<T>) -> Matrix3<T> {
    let s = lit::<T>(2.0) / (e.a() * e.a() + e.b() * e.b()).sqrt();
    Matrix3::new(
        s,
        T::zero(),
        -s * e.x(),
        T::zero(),
        s,
        -s * e.y(),
        T::zero(),
        T::zero(),
        T::one(),
    )
}

/// Diagnostics of a reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction<T: Real = f64> {
    pub quadric: DualQuadric<T>,
    /// Per-view scale factors `lambda_k`.
    pub scales: Vec<T>,
    /// Singular values of the stacked system, ascending.
    pub singular_values: Vec<T>,
}

/// Dual quadric from three or more calibrated ellipse detections.
pub fn reconstruct<T: Real>(views: &[(CameraMatrix<T>, Ellipse<T>)]) -> Result<DualQuadric<T>> {
    reconstruct_with_diagnostics(views).map(|r| r.quadric)
}

pub fn reconstruct_with_diagnostics<T: Real>(
    views: &[(CameraMatrix<T>, Ellipse<T>)],
) -> Result<Reconstruction<T>> {
    let k = views.len();
    if k < MIN_VIEWS {
        return invalid(format!("need at least {MIN_VIEWS} views, got {k}"));
    }
    let cols = 10 + k;
    let mut m = DMatrix::<T>::zeros(6 * k, cols);
    for (v, (cam, e)) in views.iter().enumerate() {
        let t = normalizing_transform(e);
        let p = t * cam.p;
        let p = p / p.norm();
        let c = t * DualConic::of_ellipse(e).c * t.transpose();
        let c = c / c.norm();
        for (row, &(i, j)) in CONIC_ENTRIES.iter().enumerate() {
            let r = 6 * v + row;
            for (col, &(a, b)) in QUADRIC_PARAMS.iter().enumerate() {
                let coeff = if a == b {
                    p[(i, a)] * p[(j, a)]
                } else {
                    p[(i, a)] * p[(j, b)] + p[(i, b)] * p[(j, a)]
                };
                m[(r, col)] = coeff;
            }
            m[(r, 10 + v)] = -c[(i, j)];
        }
    }

    let svd = m.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::NotAnEllipsoid("SVD did not produce right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigma: Vec<T> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let (s_min, s_next, s_max) = (sigma[0], sigma[1], sigma[sigma.len() - 1]);
    if !(s_next > s_max * T::default_epsilon().sqrt()) {
        return Err(Error::IllConditioned {
            sigma_min: to_f64(s_min),
            sigma_next: to_f64(s_next),
            sigma_max: to_f64(s_max),
        });
    }
    let x = v_t.row(order[0]);
    let mut q = Matrix4::zeros();
    for (col, &(a, b)) in QUADRIC_PARAMS.iter().enumerate() {
        q[(a, b)] = x[col];
        q[(b, a)] = x[col];
    }
    Ok(Reconstruction {
        quadric: DualQuadric::new(q),
        scales: (0..k).map(|v| x[10 + v]).collect(),
        singular_values: sigma,
    })
}

/// Rotation, position and relative size errors between two ellipsoids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseErrors<T = f64> {
    pub rotation_deg: T,
    pub position: T,
    pub relative_size: T,
}

/// Relative tolerance under which two semi-axes count as equal for the
/// rotation symmetry group.
pub const AXIS_TIE_TOL: f64 = 0.01;

/// Rotations `G` with `R G` describing the same ellipsoid as `R`: the four
/// proper sign flips, extended by permutations of (nearly) equal axes.
pub fn symmetry_rotations<T: Real>(semi_axes: &Vector3<T>) -> Vec<Matrix3<T>> {
    let tie = |i: usize, j: usize| {
        let (a, b) = (semi_axes[i], semi_axes[j]);
        (a - b).abs() <= lit::<T>(AXIS_TIE_TOL) * a.max(b)
    };
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::new();
    for perm in PERMS {
        if (0..3).any(|i| perm[i] != i && !tie(i, perm[i])) {
            continue;
        }
        for signs in 0..8u8 {
            let mut g = Matrix3::zeros();
            for (col, &row) in perm.iter().enumerate() {
                let s = if signs & (1 << col) != 0 { -T::one() } else { T::one() };
                g[(row, col)] = s;
            }
            if g.determinant() > T::zero() {
                out.push(g);
            }
        }
    }
    out
}

/// Geodesic angle of a rotation matrix, in radians.
fn rotation_angle<T: Real>(m: &Matrix3<T>) -> T {
    let v = Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    );
    v.norm().atan2(m.trace() - T::one())
}

/// Errors of `est` against `gt`: symmetry-aware geodesic rotation angle in
/// degrees, center distance, and mean relative error of the sorted axes.
pub fn pose_errors<T: Real>(est: &EllipsoidPose<T>, gt: &EllipsoidPose<T>) -> PoseErrors<T> {
    let rel = est.rotation.transpose() * gt.rotation;
    let rotation = symmetry_rotations(&gt.semi_axes)
        .iter()
        .map(|g| rotation_angle(&(rel * g)))
        .fold(T::pi(), |a, b| a.min(b));
    let relative_size = (0..3)
        .map(|i| (est.semi_axes[i] - gt.semi_axes[i]).abs() / gt.semi_axes[i])
        .fold(T::zero(), |a, b| a + b)
        / lit(3.0);
    PoseErrors {
        rotation_deg: rotation * lit(180.0) / T::pi(),
        position: (est.center - gt.center).norm(),
        relative_size,
    }
}

/// Rotation matrix from an axis-angle vector.
pub fn rotation_from_axis_angle<T: Real>(axis_angle: &Vector3<T>) -> Matrix3<T> {
    nalgebra::Rotation3::new(*axis_angle).into_inner()
}
