//! Fixtures shared by the pipeline benchmarks.

use lanesim::estimation::{GaussianBelief, TargetState4};
use lanesim::harness::{parse_scenario, ScenarioConfig};
use lanesim::sensors::render_camera;
use lanesim::{CameraModel, Point2, Pose2D, RasterImage, Track};
use nalgebra::Matrix4;

const SIGNS: &str = include_str!("../../../scenarios/signs.json");

/// The shipped stop/move/turn scenario, shortened to `duration` seconds.
pub fn signs_scenario(duration: f64) -> ScenarioConfig {
    let mut cfg = parse_scenario(SIGNS).expect("shipped scenario is valid");
    cfg.run.duration = duration;
    cfg
}

/// Ten metres of straight lane along +x.
pub fn straight_track() -> Track {
    Track::new(vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)], 0.2, Vec::new()).expect("valid track")
}

/// Camera frame from a slightly offset, slightly yawed pose.
pub fn lane_frame() -> RasterImage {
    render_camera(
        &straight_track(),
        &Pose2D::new(2.0, 0.03, 0.05),
        &CameraModel::default(),
    )
}

/// A sign belief two metres ahead with a moderately uncertain prior.
pub fn sign_belief() -> GaussianBelief<4> {
    let cov = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.04, 0.04, 0.01, 0.01));
    GaussianBelief::new(TargetState4::new(2.0, 0.4, 0.0, 0.0).to_vector(), cov)
}
