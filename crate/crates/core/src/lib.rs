//! Register-and-difference change detection for two views of a 3D scene.
//!
//! The pipeline lifts per-image feature grids to 3D with depth, warps one
//! view into the other (closed-form 4×4 fit, homography, or known camera
//! poses), splat-renders the warped features together with a soft
//! visibility mask, differences the registered features and turns the
//! resulting heatmaps into scored boxes for both images.
//!
//! A ray-cast synthetic scene generator with exact geometry and an
//! average-precision evaluator live alongside the pipeline so it can be
//! validated end to end.

pub mod detect;
pub mod dfrm;
pub mod error;
pub mod featgrid;
pub mod features;
pub mod geometry;
pub mod harness;
pub mod image;
pub mod synthgen;

pub use detect::{
    detect_changes, fuse_heatmap, heatmap_to_boxes, BBox, DetectConfig, Detection, Heatmap,
    PipelineConfig, ScoredBox,
};
pub use dfrm::{
    build_plan, warp_and_difference, DifferenceConfig, DifferencePyramid, RegistrationPlan,
    RegistrationStrategy,
};
pub use error::{Error, Result};
pub use featgrid::{
    downsample_depth, lift_features, render_linearity_check, splat_render, FeatureGrid,
    FeaturePointCloud, RenderConfig, Rendered, VisibilityMask, Warp,
};
pub use features::{extract_pyramid, extract_pyramid_pair, FeatureConfig, FeaturePyramid};
pub use geometry::{
    apply_transform, back_project, estimate_homography_dlt, estimate_transform_lsq,
    estimate_transform_ransac, normalize_pixel, ransac_transform_points, relative_pose_transform,
    CameraModel, CorrespondenceSet, DepthMap, HomogeneousPoint3D, Homography2D, NormalizedPoint2D,
    PoseWarp, RansacConfig, RansacFit, Transform3D,
};
pub use harness::eval::{average_precision, iou, EvalResult};
pub use image::RgbImage;
pub use synthgen::{
    generate_scene, make_change_pair, render_view, ChangePairSample, GeneratorConfig, SceneSpec,
};
