use ellipsekit::mvee::{mvee, mvee_fit, PointSet, DEFAULT_MAX_ITER, DEFAULT_TOL};
use ellipsekit::Ellipse;
use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use std::f64::consts::{FRAC_PI_2, PI};

fn cloud() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 4..40)
}

/// Area of `e` after the smallest uniform scaling about its center that
/// covers every point.
fn covering_area(e: &Ellipse<f64>, pts: &[Vector2<f64>]) -> f64 {
    let worst = pts.iter().map(|p| e.implicit(p[0], p[1])).fold(0.0, f64::max);
    e.area() * worst
}

fn angle_gap(t1: f64, t2: f64) -> f64 {
    let d = (t1 - t2).rem_euclid(PI);
    d.min(PI - d)
}

/// Shape matrices and center of the 2x2 ellipse after `p -> m p + b`.
fn transformed(center: Vector2<f64>, shape: &Matrix2<f64>, m: &Matrix2<f64>, b: Vector2<f64>) -> (Vector2<f64>, Matrix2<f64>) {
    let mi = m.try_inverse().unwrap();
    (m * center + b, mi.transpose() * shape * mi)
}

fn general_position(xy: &[(f64, f64)]) -> bool {
    // reject near-collinear clouds, they have no bounded MVEE
    let n = xy.len() as f64;
    let (mx, my) = xy.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in xy {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let det = sxx * syy - sxy * sxy;
    det > 1e-2 * (sxx + syy).powi(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn contains_all_points(xy in cloud()) {
        prop_assume!(general_position(&xy));
        let pts = PointSet::from_xy(&xy).unwrap();
        let e = mvee(&pts, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for p in &xy {
            prop_assert!(e.implicit(p.0, p.1) <= 1.0 + DEFAULT_TOL + 1e-9, "{}", e.implicit(p.0, p.1));
        }
    }

    #[test]
    fn affine_equivariant(xy in cloud(), m in prop::array::uniform4(-2.0..2.0f64), b in prop::array::uniform2(-5.0..5.0f64)) {
        prop_assume!(general_position(&xy));
        let m = Matrix2::new(m[0], m[1], m[2], m[3]);
        prop_assume!(m.determinant().abs() > 0.2);
        let b = Vector2::new(b[0], b[1]);
        let tol = 1e-10;
        let fit = mvee_fit(&PointSet::from_xy(&xy).unwrap(), tol, 100_000).unwrap();
        let moved: Vec<(f64, f64)> = xy.iter().map(|p| {
            let q = m * Vector2::new(p.0, p.1) + b;
            (q[0], q[1])
        }).collect();
        let fit2 = mvee_fit(&PointSet::from_xy(&moved).unwrap(), tol, 100_000).unwrap();
        let (c, s) = transformed(fit.center, &fit.shape, &m, b);
        let scale = 1.0 + c.norm();
        prop_assert!((c - fit2.center).norm() <= 1e-5 * scale, "{c} vs {}", fit2.center);
        prop_assert!((s - fit2.shape).norm() <= 1e-5 * s.norm(), "{s} vs {}", fit2.shape);
    }

    #[test]
    fn no_random_enclosing_ellipse_is_smaller(xy in cloud(), seed in any::<u64>()) {
        prop_assume!(general_position(&xy));
        let pts = PointSet::from_xy(&xy).unwrap();
        let e = mvee(&pts, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let best = covering_area(&e, pts.points());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let cand = Ellipse::from_unordered(
                e.x() + rng.random_range(-2.0..2.0),
                e.y() + rng.random_range(-2.0..2.0),
                e.a() * rng.random_range(0.3..2.0),
                e.b() * rng.random_range(0.3..2.0),
                rng.random_range(-FRAC_PI_2..FRAC_PI_2),
            ).unwrap();
            prop_assert!(covering_area(&cand, pts.points()) >= best * (1.0 - 1e-6));
        }
    }
}

#[test]
fn square_corners_give_root_two_circle() {
    let pts = PointSet::from_xy(&[(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]).unwrap();
    let e = mvee(&pts, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let r = 2f64.sqrt();
    assert!((e.a() - r).abs() < 1e-5 && (e.b() - r).abs() < 1e-5, "{e:?}");
    assert!(e.x().abs() < 1e-9 && e.y().abs() < 1e-9);
}

#[test]
fn local_grid_search_finds_nothing_smaller() {
    let xy = [(0.0, 0.0), (4.0, 1.0), (3.0, 5.0), (-1.0, 3.0), (1.5, -1.0), (2.0, 2.0)];
    let pts = PointSet::from_xy(&xy).unwrap();
    let e = mvee(&pts, 1e-12, 100_000).unwrap();
    let best = covering_area(&e, pts.points());
    let steps = [-0.02, -0.005, 0.0, 0.005, 0.02];
    for dx in steps {
        for dy in steps {
            for da in steps {
                for db in steps {
                    for dt in steps {
                        let cand = Ellipse::from_unordered(
                            e.x() + dx,
                            e.y() + dy,
                            e.a() * (1.0 + da),
                            e.b() * (1.0 + db),
                            e.theta() + dt,
                        )
                        .unwrap();
                        assert!(covering_area(&cand, pts.points()) >= best * (1.0 - 1e-9));
                    }
                }
            }
        }
    }
}

#[test]
fn boundary_samples_recover_ellipse() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let a = rng.random_range(1.0..50.0);
        let e = Ellipse::new(
            rng.random_range(-100.0..100.0),
            rng.random_range(-100.0..100.0),
            a,
            a * rng.random_range(0.1..0.9),
            rng.random_range(-FRAC_PI_2..FRAC_PI_2),
        )
        .unwrap();
        let pts: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let p = e.boundary_point(2.0 * PI * i as f64 / 200.0);
                (p[0], p[1])
            })
            .collect();
        let fit = mvee(&PointSet::from_xy(&pts).unwrap(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((fit.a() - e.a()).abs() <= 1e-3 * e.a());
        assert!((fit.b() - e.b()).abs() <= 1e-3 * e.b());
        assert!(angle_gap(fit.theta(), e.theta()) <= 1e-3);
    }
}

#[test]
fn f32_fit() {
    let pts = PointSet::<f32>::from_xy(&[(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]).unwrap();
    let e = mvee(&pts, 1e-5, DEFAULT_MAX_ITER).unwrap();
    assert!((e.a() - std::f32::consts::SQRT_2).abs() < 1e-3);
}
