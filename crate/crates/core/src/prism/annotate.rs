//! From detections to labelled landmarks on the 2-D semantic map.

use super::homography::{estimate_homography, symmetric_rms_px};
use super::pose::{camera_to_map, decompose_homography, CameraIntrinsics, CameraMount, RobotPose};
use super::PrismError;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Text observed on a sign, as the perception stack reported it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignText {
    /// Machine-readable characters.
    Text { content: String },
    /// A pictogram or logo; carries no transcribable characters.
    Symbol,
}

/// One planar sign detection: model-plane points (meters, sign frame, origin
/// at the sign centre) matched to image pixels, plus whatever text was seen.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    /// Landmark class, e.g. `placard`.
    pub class: String,
    pub model_points: Vec<[f64; 2]>,
    pub image_points: Vec<[f64; 2]>,
    #[serde(default)]
    pub text: Option<SignText>,
}

/// A batch of detections taken from one camera frame at a known robot pose.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionFile {
    pub camera: CameraIntrinsics,
    pub mount: CameraMount,
    pub robot_pose: RobotPose,
    pub detections: Vec<Detection>,
}

impl DetectionFile {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PrismError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Turns sign text into a landmark label with a confidence. Swapping this
/// for a learned reader is the intended extension point.
pub trait TextExtractor {
    fn extract(&self, text: Option<&SignText>) -> Result<(String, f64), PrismError>;
}

/// Takes the characters exactly as reported, trimmed, at full confidence.
#[derive(Debug, Clone, Copy, Default)]
pub struct VerbatimExtractor;

impl TextExtractor for VerbatimExtractor {
    fn extract(&self, text: Option<&SignText>) -> Result<(String, f64), PrismError> {
        match text {
            Some(SignText::Text { content }) => {
                let trimmed = content.trim();
                if trimmed.is_empty() {
                    Err(PrismError::EmptyLabel)
                } else {
                    Ok((trimmed.to_string(), 1.0))
                }
            }
            Some(SignText::Symbol) | None => Err(PrismError::EmptyLabel),
        }
    }
}

/// A landmark candidate: everything but the map-assigned id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub class: String,
    pub label: String,
    pub confidence: f64,
    pub x: f64,
    pub y: f64,
    /// Heading of the sign's outward normal, radians in the map frame.
    pub theta: f64,
    /// RMS symmetric transfer error of the homography fit, pixels.
    pub residual_px: f64,
}

#[derive(Debug)]
pub struct AnnotateOutcome {
    pub annotations: Vec<Annotation>,
    /// (detection index, reason) for detections that could not be used.
    pub skipped: Vec<(usize, String)>,
}

/// Run the full geometry chain on every detection in the file. Detections
/// that fail (too few points, degenerate geometry, unreadable label) are
/// reported in `skipped` rather than aborting the batch.
pub fn annotate_detections(
    file: &DetectionFile,
    extractor: &dyn TextExtractor,
) -> AnnotateOutcome {
    let (r_map_cam, t_map_cam) = camera_to_map(&file.robot_pose, &file.mount);
    let mut annotations = Vec::new();
    let mut skipped = Vec::new();
    for (i, det) in file.detections.iter().enumerate() {
        let result = (|| -> Result<Annotation, PrismError> {
            let (label, confidence) = extractor.extract(det.text.as_ref())?;
            let h = estimate_homography(&det.model_points, &det.image_points)?;
            let pose = decompose_homography(&file.camera, &h)?;
            let residual_px = symmetric_rms_px(&h, &det.model_points, &det.image_points)?;
            // sign origin and outward normal into the map frame
            let p_map = r_map_cam * pose.translation + t_map_cam;
            let normal_cam = pose.rotation * Vector3::new(0.0, 0.0, -1.0);
            let normal_map = r_map_cam * normal_cam;
            let theta = normal_map.y.atan2(normal_map.x);
            Ok(Annotation {
                class: det.class.clone(),
                label,
                confidence,
                x: p_map.x,
                y: p_map.y,
                theta,
                residual_px,
            })
        })();
        match result {
            Ok(a) => annotations.push(a),
            Err(e) => skipped.push((i, e.to_string())),
        }
    }
    AnnotateOutcome { annotations, skipped }
}

/// Two sightings merge when they agree this closely.
pub const MERGE_DIST_M: f64 = 0.25;
pub const MERGE_ANGLE_RAD: f64 = 15.0 * std::f64::consts::PI / 180.0;

fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % std::f64::consts::TAU;
    if d > std::f64::consts::PI {
        d -= std::f64::consts::TAU;
    }
    if d < -std::f64::consts::PI {
        d += std::f64::consts::TAU;
    }
    d.abs()
}

/// A named landmark on the semantic map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    /// `<class>-<n>`, numbered per class in order of first appearance.
    pub id: String,
    pub class: String,
    pub label: String,
    pub confidence: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub residual_px: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticMap {
    pub name: String,
    #[serde(default)]
    pub landmarks: Vec<Landmark>,
}

impl SemanticMap {
    pub fn empty(name: &str) -> Self {
        SemanticMap { name: name.to_string(), landmarks: Vec::new() }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PrismError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PrismError> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Fold annotations into the map. An annotation merges into an existing
    /// landmark of the same class and label posed within [`MERGE_DIST_M`] and
    /// [`MERGE_ANGLE_RAD`]: positions average weighted by confidence, the
    /// heading takes the confidence-weighted circular mean, confidence keeps
    /// the maximum and the residual keeps the worst (largest) value.
    /// Everything else becomes a new `<class>-<n>` landmark.
    pub fn ingest(&mut self, annotations: &[Annotation]) {
        for a in annotations {
            let target = self.landmarks.iter_mut().find(|l| {
                l.class == a.class
                    && l.label == a.label
                    && ((l.x - a.x).powi(2) + (l.y - a.y).powi(2)).sqrt() <= MERGE_DIST_M
                    && angle_diff(l.theta, a.theta) <= MERGE_ANGLE_RAD
            });
            match target {
                Some(l) => {
                    let (wa, wb) = (l.confidence, a.confidence);
                    let w = wa + wb;
                    l.x = (wa * l.x + wb * a.x) / w;
                    l.y = (wa * l.y + wb * a.y) / w;
                    l.theta = (wa * l.theta.sin() + wb * a.theta.sin())
                        .atan2(wa * l.theta.cos() + wb * a.theta.cos());
                    l.confidence = l.confidence.max(a.confidence);
                    l.residual_px = l.residual_px.max(a.residual_px);
                }
                None => {
                    let n = self.landmarks.iter().filter(|l| l.class == a.class).count() + 1;
                    self.landmarks.push(Landmark {
                        id: format!("{}-{}", a.class, n),
                        class: a.class.clone(),
                        label: a.label.clone(),
                        confidence: a.confidence,
                        x: a.x,
                        y: a.y,
                        theta: a.theta,
                        residual_px: a.residual_px,
                    });
                }
            }
        }
    }
}
