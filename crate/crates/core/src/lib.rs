//! Bottom-up multi-person pose assembly from confidence maps and part
//! affinity fields, analytic ground-truth field synthesis, field-driven
//! person-box expansion and keypoint evaluation metrics.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar for the common cases.

// `!(a > b)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assemble;
mod assignment;
pub mod boxes;
pub mod bundle;
pub mod cli;
pub mod detect;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod grids;
pub mod render;
pub mod scalar;
pub mod scene;
pub mod skeleton;
pub mod synth;
pub mod tensor;

pub use assemble::{
    assemble_poses, limb_score, match_limb, match_scores, parse_poses, AssembledPose, LimbMatch, Matcher,
};
pub use boxes::{expand_boxes, iou, joint_coverage, outwardness, BBox, ExpandParams, Side};
pub use detect::{detect_all, find_peaks, DetectionCandidate, NmsParams};
pub use error::{Error, Result};
pub use eval::{average_precision, metric_report, oks, MetricReport, SizeFilter};
pub use geometry::Point2;
pub use grids::{FieldSet, ScalarGrid, VectorGrid};
pub use scalar::Real;
pub use scene::{scene_fixture, SceneGenerator};
pub use skeleton::Skeleton;
pub use synth::{annotation_mask, confidence_map, field_loss_l, field_loss_s, paf_map, PersonPose, SynthParams};
pub use tensor::{read_tensor, write_tensor, Tensor};

pub type Point2F32 = Point2<f32>;
pub type Point2F64 = Point2<f64>;
pub type ScalarGridF32 = ScalarGrid<f32>;
pub type ScalarGridF64 = ScalarGrid<f64>;
pub type VectorGridF32 = VectorGrid<f32>;
pub type VectorGridF64 = VectorGrid<f64>;
pub type FieldSetF32 = FieldSet<f32>;
pub type FieldSetF64 = FieldSet<f64>;
pub type PersonPoseF32 = PersonPose<f32>;
pub type PersonPoseF64 = PersonPose<f64>;
pub type CandidateF32 = DetectionCandidate<f32>;
pub type CandidateF64 = DetectionCandidate<f64>;
pub type AssembledPoseF32 = AssembledPose<f32>;
pub type AssembledPoseF64 = AssembledPose<f64>;
pub type BBoxF32 = BBox<f32>;
pub type BBoxF64 = BBox<f64>;
