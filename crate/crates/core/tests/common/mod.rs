#![allow(dead_code)]

use ellipsekit::quadric::{rotation_from_axis_angle, CameraMatrix, EllipsoidPose};
use nalgebra::Vector3;
use rand::Rng;

pub fn unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Ellipsoid near the origin with axes in [0.2, 1.5].
pub fn random_pose<R: Rng>(rng: &mut R) -> EllipsoidPose<f64> {
    let center = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let axes = Vector3::new(rng.random_range(0.2..1.5), rng.random_range(0.2..1.5), rng.random_range(0.2..1.5));
    let rot = rotation_from_axis_angle(&(unit_vector(rng) * rng.random_range(0.0..std::f64::consts::PI)));
    EllipsoidPose::from_unsorted(center, axes, rot).unwrap()
}

/// Pinhole camera 4 to 8 units from `center`, looking roughly at it.
pub fn random_camera<R: Rng>(rng: &mut R, center: &Vector3<f64>) -> CameraMatrix<f64> {
    loop {
        let eye = center + unit_vector(rng) * rng.random_range(4.0..8.0);
        let target = center + unit_vector(rng) * rng.random_range(0.0..0.3);
        let up = unit_vector(rng);
        let focal = rng.random_range(400.0..900.0);
        let (cx, cy) = (rng.random_range(280.0..360.0), rng.random_range(200.0..280.0));
        if let Ok(c) = CameraMatrix::look_at(&eye, &target, &up, focal, cx, cy) {
            if up.cross(&(target - eye).normalize()).norm() > 0.2 {
                return c;
            }
        }
    }
}

pub fn random_cameras<R: Rng>(rng: &mut R, center: &Vector3<f64>, n: usize) -> Vec<CameraMatrix<f64>> {
    (0..n).map(|_| random_camera(rng, center)).collect()
}
