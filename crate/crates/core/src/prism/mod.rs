//! Semantic-map annotation from planar sign detections.
//!
//! A detection pairs known points on a planar sign (model frame, meters,
//! origin at the sign centre, z = 0) with their pixel positions in a camera
//! image. From at least four such correspondences the homography module
//! estimates the model-to-image mapping, the pose module decomposes it into
//! the sign's pose in the camera frame, and the annotate module chains the
//! camera's mount geometry and the robot's map pose to place a labelled
//! landmark on the 2-D map. Verbatim text on the sign becomes the landmark's
//! label; repeated sightings of the same sign merge into one landmark.

mod annotate;
mod homography;
mod pose;

pub use annotate::{
    annotate_detections, AnnotateOutcome, Annotation, Detection, DetectionFile, Landmark,
    SemanticMap, SignText, TextExtractor, VerbatimExtractor, MERGE_ANGLE_RAD, MERGE_DIST_M,
};
pub use homography::{estimate_homography, rectify, symmetric_rms_px, Raster};
pub use pose::{camera_to_map, decompose_homography, CameraIntrinsics, CameraMount, PlanePose, RobotPose};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PrismError {
    #[error("need at least 4 point correspondences, got {got}")]
    NotEnoughPoints { got: usize },
    #[error("degenerate correspondence geometry: {0}")]
    Degenerate(String),
    #[error("decomposed plane lies in the camera plane (t_z = 0)")]
    BehindCamera,
    #[error("camera intrinsics are singular")]
    SingularIntrinsics,
    #[error("sign carries no usable text label")]
    EmptyLabel,
    #[error("failed to read file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to decode file: {0}")]
    Json(#[from] serde_json::Error),
}
