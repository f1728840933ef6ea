use ellipsekit::geometry::ellipse_from_shape;
use ellipsekit::refinement::{bce_mask_loss, occlusion_target, pad_bounds};
use ellipsekit::{
    aa_extent, conic_to_ellipse, contains, ellipse_to_conic, enclosing_square, normalize_angle, rasterize, BoxRegion,
    Ellipse, Grid, GridSpec,
};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

fn ellipse() -> impl Strategy<Value = Ellipse<f64>> {
    (-50.0..50.0f64, -50.0..50.0f64, 0.5..20.0f64, 0.05..1.0f64, -FRAC_PI_2..FRAC_PI_2).prop_map(
        |(x, y, a, r, t)| Ellipse::new(x, y, a, a * r, t).unwrap(),
    )
}

fn same_angle(t1: f64, t2: f64, tol: f64) -> bool {
    let d = (t1 - t2).rem_euclid(PI);
    d.min(PI - d) <= tol
}

proptest! {
    #[test]
    fn normalize_angle_idempotent_and_periodic(t in -20.0..20.0f64, k in -5i32..=5) {
        let n = normalize_angle(t).unwrap();
        prop_assert!(n > -FRAC_PI_2 && n <= FRAC_PI_2);
        prop_assert_eq!(normalize_angle(n).unwrap(), n);
        let shifted = normalize_angle(t + k as f64 * PI).unwrap();
        prop_assert!(same_angle(shifted, n, 1e-12));
    }

    #[test]
    fn square_encloses_extent(e in ellipse()) {
        let ext = aa_extent(&e);
        let sq = enclosing_square(&e);
        prop_assert!(ext.dx <= sq.l() * (1.0 + 1e-15));
        prop_assert!(ext.dy <= sq.l() * (1.0 + 1e-15));
        prop_assert!(ext.dx >= 2.0 * e.b() * (1.0 - 1e-12) && ext.dx <= 2.0 * e.a() * (1.0 + 1e-12));
    }

    #[test]
    fn contains_ignores_half_turn(e in ellipse(), u in -1.5..1.5f64, v in -1.5..1.5f64) {
        let (px, py) = (e.x() + u * e.a(), e.y() + v * e.a());
        // the constructor wraps theta + pi back into range
        let turned = Ellipse::new(e.x(), e.y(), e.a(), e.b(), e.theta() + PI).unwrap();
        prop_assert_eq!(contains(&e, px, py), contains(&turned, px, py));
    }

    #[test]
    fn conic_round_trip(e in ellipse(), scale in prop_oneof![-10.0..-0.1f64, 0.1..10.0f64]) {
        let c = ellipse_to_conic(&e);
        let scaled = ellipsekit::Conic::new(c.m * scale);
        let back = conic_to_ellipse(&scaled).unwrap();
        let tol = 1e-8 * (1.0 + e.a() + e.x().abs() + e.y().abs());
        prop_assert!((back.x() - e.x()).abs() < tol && (back.y() - e.y()).abs() < tol);
        prop_assert!((back.a() - e.a()).abs() < tol && (back.b() - e.b()).abs() < tol);
        if e.b() / e.a() < 0.999 {
            prop_assert!(same_angle(back.theta(), e.theta(), 1e-6));
        }
        let shape = ellipse_from_shape(e.center(), &e.shape_matrix()).unwrap();
        prop_assert!((shape.a() - e.a()).abs() < tol);
    }

    #[test]
    fn occlusion_subset(e in ellipse(), u in -1.0..1.0f64, v in -1.0..1.0f64, w in 0.1..1.5f64, h in 0.1..1.5f64) {
        let vis = BoxRegion::new(e.x() + u * e.a(), e.y() + v * e.a(), w * e.a(), h * e.a()).unwrap();
        let t = occlusion_target(&e, &vis, 28).unwrap();
        prop_assert!(t.visible_mask.is_subset_of(&t.whole_mask));
    }

    #[test]
    fn pad_bounds_monotone(w in 0.1..100.0f64, dw in 0.0..50.0f64, h in 0.1..100.0f64, r in 0.1..8.0f64) {
        let a = pad_bounds(w, h, r).unwrap();
        let b = pad_bounds(w + dw, h, r).unwrap();
        prop_assert!(b.x_min <= a.x_min && b.x_max >= a.x_max);
        prop_assert_eq!((a.y_min, a.y_max), (b.y_min, b.y_max));
    }

    #[test]
    fn bce_nonnegative_and_minimal(bits in prop::collection::vec(any::<bool>(), 16), probs in prop::collection::vec(0.0..=1.0f64, 16)) {
        let target = Grid::from_vec(4, 4, bits).unwrap();
        let pred = Grid::from_vec(4, 4, probs).unwrap();
        let l = bce_mask_loss(&pred, &target).unwrap();
        prop_assert!(l.is_finite() && l >= 0.0);
        let best = bce_mask_loss(&target.map(|&t| if t { 1.0 } else { 0.0 }), &target).unwrap();
        prop_assert!(best <= l);
    }
}

#[test]
fn raster_area_first_order_convergence() {
    let e = Ellipse::new(0.3, -0.2, 5.0, 2.5, 0.6).unwrap();
    let err = |cell: f64| {
        let n = (14.0 / cell).ceil() as usize;
        let g = GridSpec::new(-7.0, -7.0, cell, n, n).unwrap();
        let area = rasterize(&e, &g).unwrap().count() as f64 * cell * cell;
        (area - e.area()).abs() / e.area()
    };
    let (coarse, fine) = (err(0.4), err(0.05));
    assert!(fine < coarse, "{fine} vs {coarse}");
    assert!(fine < 0.01);
}

#[test]
fn bce_half_is_ln2() {
    let target = Grid::from_fn(28, 28, |c, r| (c * 7 + r * 3) % 5 < 2);
    let l = bce_mask_loss(&Grid::filled(28, 28, 0.5), &target).unwrap();
    assert!((l - std::f64::consts::LN_2).abs() <= 1e-12);
}
