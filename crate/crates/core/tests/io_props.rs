use ellipsekit::io::{
    read_annotations, read_cameras, read_detections, read_pgm, read_poses, write_annotations, write_detections,
    write_pgm, CameraJson, PoseJson,
};
use ellipsekit::metrics::{DetectionRecord, GtRecord};
use ellipsekit::quadric::{rotation_from_axis_angle, CameraMatrix, EllipsoidPose};
use ellipsekit::{BoxRegion, Ellipse, Error, Grid};
use nalgebra::{Matrix3x4, Vector3};
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn ellipse() -> impl Strategy<Value = Ellipse<f64>> {
    (-1e4..1e4f64, -1e4..1e4f64, 1e-3..1e3f64, 1e-3..1.0f64, -FRAC_PI_2..FRAC_PI_2)
        .prop_map(|(x, y, a, r, t)| Ellipse::new(x, y, a, a * r, t).unwrap())
}

fn gt() -> impl Strategy<Value = GtRecord> {
    (
        "[a-z0-9_]{1,8}",
        ellipse(),
        prop::option::of((-1e3..1e3f64, -1e3..1e3f64, 1e-2..1e3f64, 1e-2..1e3f64)),
        1e-3..=1.0f64,
    )
        .prop_map(|(id, e, vb, vis)| GtRecord {
            image_id: id,
            ellipse: e,
            visible_box: vb.map(|(x, y, w, h)| BoxRegion::new(x, y, w, h).unwrap()),
            visibility: vis,
        })
}

proptest! {
    #[test]
    fn annotations_round_trip(gts in prop::collection::vec(gt(), 0..20)) {
        let mut buf = Vec::new();
        write_annotations(&mut buf, &gts).unwrap();
        let back = read_annotations(buf.as_slice()).unwrap();
        prop_assert_eq!(back, gts);
    }

    #[test]
    fn detections_round_trip(items in prop::collection::vec(("[a-z]{1,4}", ellipse(), 0.0..=1.0f64), 0..20)) {
        let dets: Vec<_> = items.into_iter().map(|(id, e, s)| DetectionRecord::new(id, e, s).unwrap()).collect();
        let mut buf = Vec::new();
        write_detections(&mut buf, &dets).unwrap();
        prop_assert_eq!(read_detections(buf.as_slice()).unwrap(), dets);
    }

    #[test]
    fn pgm_round_trip(cols in 1usize..40, rows in 1usize..40, seed in any::<u64>()) {
        let grid = Grid::from_fn(cols, rows, |c, r| (seed.wrapping_mul(31).wrapping_add((c * 7 + r * 13) as u64) % 256) as u8);
        let mut buf = Vec::new();
        write_pgm(&mut buf, &grid).unwrap();
        prop_assert_eq!(read_pgm(buf.as_slice()).unwrap(), grid);
    }
}

#[test]
fn cameras_and_poses_round_trip() {
    let cam = CameraMatrix::new(Matrix3x4::from_fn(|r, c| ((r * 4 + c) as f64).sin() * 100.0 + if r == c { 500.0 } else { 0.0 }))
        .unwrap();
    let json = serde_json::to_string(&vec![CameraJson::from_camera("v0", &cam)]).unwrap();
    let back = read_cameras(json.as_bytes()).unwrap();
    assert_eq!(back[0].0, "v0");
    assert_eq!(back[0].1.matrix(), cam.matrix());

    let pose = EllipsoidPose::from_unsorted(
        Vector3::new(0.1, -2.0, 3.3),
        Vector3::new(0.5, 2.0, 1.0),
        rotation_from_axis_angle(&Vector3::new(0.3, 1.1, -0.4)),
    )
    .unwrap();
    let json = serde_json::to_string(&vec![PoseJson::from_pose("obj", &pose)]).unwrap();
    let back = read_poses(json.as_bytes()).unwrap();
    assert_eq!(back[0].1, pose);
}

#[test]
fn malformed_lines_report_line_numbers() {
    let text = "{\"image_id\":\"a\",\"ellipse\":{\"x\":1,\"y\":2,\"a\":3,\"b\":1,\"theta\":0}}\n\n{\"image_id\":\"a\",\"ellipse\":{\"x\":1}}\n";
    match read_annotations(text.as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    // b > a and theta out of range are rejected, not repaired
    let swapped = "{\"image_id\":\"a\",\"ellipse\":{\"x\":1,\"y\":2,\"a\":1,\"b\":3,\"theta\":0}}\n";
    assert!(read_annotations(swapped.as_bytes()).is_err());
    let turned = "{\"image_id\":\"a\",\"ellipse\":{\"x\":1,\"y\":2,\"a\":3,\"b\":1,\"theta\":2.0}}\n";
    assert!(read_annotations(turned.as_bytes()).is_err());
    let bad_score = "{\"image_id\":\"a\",\"ellipse\":{\"x\":1,\"y\":2,\"a\":3,\"b\":1,\"theta\":0},\"score\":1.5}\n";
    assert!(read_detections(bad_score.as_bytes()).is_err());
    assert!(read_pgm(&b"P2\n2 2\n255\n0000"[..]).is_err());
    assert!(read_pgm(&b"P5\n# comment\n2 2\n255\n\x01\x02\x03"[..]).is_err());
    assert_eq!(read_pgm(&b"P5\n# comment\n2 1\n255\n\x01\x02"[..]).unwrap().as_slice(), &[1, 2]);
}
