//! Deterministic 2D lane-following simulation.
//!
//! A differential-drive robot follows a yellow-marked lane using a synthetic
//! camera and a blur, color-mask, ROI and Hough lane detector, steers with a
//! PID controller, and tracks traffic signs with an EKF or UKF fed by
//! simulated range-bearing measurements.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod control;
pub mod estimation;
pub mod harness;
pub mod sensors;
pub mod vision;
pub mod world;

pub use estimation::{FilterError, GaussianBelief};
pub use sensors::{CameraModel, Detection, RangeBearing, RasterImage};
pub use vision::{BinaryMask, LaneObservation, LineSegmentPolar, VisionConfig};
pub use world::{Command, Point2, Pose2D, RobotState, Sign, SignKind, Track};
