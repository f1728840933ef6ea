//! Ellipse geometry, regression offsets, evaluation metrics, synthetic
//! occluded scenes, minimum-volume ellipse fitting and multi-view
//! ellipsoid reconstruction.
//!
//! The math modules are generic over the scalar type ([`Real`], `f32` or
//! `f64`); dataset-level code works in `f64`.

// `!(x > 0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod mvee;
pub mod quadric;
pub mod refinement;
pub mod scalar;
pub mod synth;

pub use codec::{
    angle_residual, decode_box, decode_ellipse, ellipse_loss, ellipse_loss_grad, encode_box, encode_ellipse,
    encode_ellipse_unoccluded, mean_ellipse_loss, smooth_l1, smooth_l1_grad, BoxOffsets, EllipseOffsets, MatchLabel,
    VisibilityScale,
};
pub use error::{Error, Result};
pub use geometry::{
    aa_box, aa_extent, conic_to_ellipse, contains, ellipse_from_shape, ellipse_to_conic, enclosing_square,
    extend_box_to_square, normalize_angle, rasterize, AaExtent, BoxRegion, Conic, Ellipse, Grid, GridSpec, Mask,
    SquareRegion,
};
pub use metrics::{
    angle_error, ellipse_iou, evaluate, match_detections, DetectionRecord, EvalCriteria, EvalReport, GtRecord, Preset,
};
pub use mvee::{mask_to_points, mvee, mvee_fit, MveeFit, PointSet};
pub use quadric::{
    decompose_quadric, ellipsoid_to_quadric, pose_errors, project, reconstruct, CameraMatrix, DualConic, DualQuadric,
    EllipsoidPose, PoseErrors,
};
pub use refinement::{bce_mask_loss, occlusion_target, pad_bounds, validity_mask, OcclusionTarget, PadBounds};
pub use scalar::Real;
pub use synth::{compose_scene, generate_dataset, project_multiview, sample_ellipse, AnnotatedScene, SceneConfig};

pub type Ellipse32 = Ellipse<f32>;
pub type Ellipse64 = Ellipse<f64>;
pub type BoxRegion64 = BoxRegion<f64>;
pub type SquareRegion64 = SquareRegion<f64>;
pub type EllipseOffsets64 = EllipseOffsets<f64>;
pub type CameraMatrix64 = CameraMatrix<f64>;
pub type DualQuadric64 = DualQuadric<f64>;
pub type EllipsoidPose64 = EllipsoidPose<f64>;
pub type PointSet64 = PointSet<f64>;
