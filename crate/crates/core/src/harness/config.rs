//! Scenario files: strict JSON with every section but `track` optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{BehaviorConfig, PidConfig};
use crate::estimation::{InitConfig, UnscentedParams};
use crate::sensors::{CameraModel, ConfidenceModel, DetectorConfig, RangeBearingNoise};
use crate::vision::{gaussian_kernel, VisionConfig};
use crate::world::{CommandLimits, Point2, Pose2D, Sign, SignKind, Track};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{key}: {message}")]
    Parse { key: String, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

impl ScenarioError {
    /// Dotted path of the offending key (`"."` for the document root).
    pub fn key(&self) -> Option<&str> {
        match self {
            ScenarioError::Io { .. } => None,
            ScenarioError::Parse { key, .. } | ScenarioError::Invalid { key, .. } => Some(key),
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub track: TrackConfig,
    #[serde(default)]
    pub robot: RobotConfig,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub sensors: SensorConfig,
    #[serde(default)]
    pub vision: VisionConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackConfig {
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default = "default_lane_half_width")]
    pub lane_half_width: f64,
    #[serde(default)]
    pub signs: Vec<SignConfig>,
}

fn default_lane_half_width() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignConfig {
    pub kind: SignKind,
    pub position: [f64; 2],
    #[serde(default)]
    pub facing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotConfig {
    pub wheel_separation: f64,
    pub v_max: f64,
    pub omega_max: f64,
    /// `[x, y, psi]`; defaults to the first waypoint facing along the track.
    pub start: Option<[f64; 3]>,
}

impl Default for RobotConfig {
    fn default() -> Self {
        let limits = CommandLimits::default();
        Self {
            wheel_separation: 0.1,
            v_max: limits.v_max,
            omega_max: limits.omega_max,
            start: None,
        }
    }
}

impl RobotConfig {
    pub fn limits(&self) -> CommandLimits {
        CommandLimits {
            v_max: self.v_max,
            omega_max: self.omega_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    /// Range noise of the depth reading (m).
    pub sigma_range: f64,
    /// Bearing noise of the depth reading (rad).
    pub sigma_bearing: f64,
    /// Probability that a detected sign gets no depth reading, leaving only
    /// the bearing of its bounding-box centroid.
    pub range_dropout: f64,
    pub miss_rate: f64,
    pub confidence: ConfidenceModel,
    /// Bearing noise of the detector's bounding-box centroid (rad).
    pub centroid_sigma_bearing: f64,
    pub sign_size: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        let det = DetectorConfig::default();
        Self {
            sigma_range: 0.0,
            sigma_bearing: 0.0,
            range_dropout: 0.0,
            miss_rate: det.miss_rate,
            confidence: det.confidence,
            centroid_sigma_bearing: det.sigma_bearing,
            sign_size: det.sign_size,
        }
    }
}

impl SensorConfig {
    pub fn noise(&self) -> RangeBearingNoise {
        RangeBearingNoise {
            sigma_range: self.sigma_range,
            sigma_bearing: self.sigma_bearing,
        }
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            miss_rate: self.miss_rate,
            confidence: self.confidence,
            sigma_bearing: self.centroid_sigma_bearing,
            sign_size: self.sign_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    #[default]
    Ekf,
    Ukf,
}

impl std::str::FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ekf" => Ok(FilterKind::Ekf),
            "ukf" => Ok(FilterKind::Ukf),
            other => Err(format!("unknown filter `{other}`, expected ekf or ukf")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub kind: FilterKind,
    /// White-acceleration density of the constant-velocity model.
    pub sigma_accel: f64,
    /// Measurement noise the filter assumes (m).
    pub sigma_range: f64,
    /// Measurement noise the filter assumes (rad).
    pub sigma_bearing: f64,
    pub init: InitConfig,
    pub unscented: UnscentedParams,
    /// Largest distance (m) between a reading and a track it may update.
    pub association_gate: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            kind: FilterKind::Ekf,
            sigma_accel: 0.01,
            sigma_range: 0.05,
            sigma_bearing: 1f64.to_radians(),
            init: InitConfig::default(),
            unscented: UnscentedParams::default(),
            association_gate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    /// Acts on the centre offset normalised by the image half-width.
    pub steering: PidConfig,
    /// Optional speed loop toward `base_speed`.
    pub speed: Option<PidConfig>,
    pub base_speed: f64,
    pub behavior: BehaviorConfig,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            steering: PidConfig {
                kp: 2.3,
                ki: 0.2,
                kd: 0.5,
                setpoint: 0.0,
                output_limits: [-2.0, 2.0],
                integral_limit: 1.0,
            },
            speed: None,
            base_speed: 0.3,
            behavior: BehaviorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    /// On an open track the episode ends this far (m) before the last
    /// waypoint.
    pub end_margin: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            duration: 60.0,
            seed: 0,
            end_margin: 0.5,
        }
    }
}

fn check(ok: bool, key: &str, message: &str) -> Result<(), ScenarioError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(key, message))
    }
}

fn check_pid(cfg: &PidConfig, key: &str) -> Result<(), ScenarioError> {
    cfg.validate().map_err(|e| invalid(key, e.to_string()))
}

fn check_probability(p: f64, key: &str) -> Result<(), ScenarioError> {
    check((0.0..=1.0).contains(&p), key, "must lie in [0, 1]")
}

fn check_sigma(s: f64, key: &str) -> Result<(), ScenarioError> {
    check(s >= 0.0 && s.is_finite(), key, "must be finite and non-negative")
}

impl ScenarioConfig {
    pub fn build_track(&self) -> Result<Track, ScenarioError> {
        let signs = self
            .track
            .signs
            .iter()
            .map(|s| Sign {
                kind: s.kind,
                position: Point2::from(s.position),
                facing: s.facing,
            })
            .collect();
        let centerline = self.track.waypoints.iter().map(|p| Point2::from(*p)).collect();
        Track::new(centerline, self.track.lane_half_width, signs).map_err(|e| invalid("track", e.to_string()))
    }

    pub fn start_pose(&self) -> Pose2D {
        if let Some([x, y, psi]) = self.robot.start {
            return Pose2D::new(x, y, psi);
        }
        let w = self.track.waypoints.as_slice();
        match w {
            [a, b, ..] => Pose2D::new(a[0], a[1], (b[1] - a[1]).atan2(b[0] - a[0])),
            [a] => Pose2D::new(a[0], a[1], 0.0),
            [] => Pose2D::default(),
        }
    }

    /// Checks every invariant the episode loop relies on.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        check(
            self.track.waypoints.len() >= 2,
            "track.waypoints",
            "needs at least two points",
        )?;
        check(
            self.track.lane_half_width > 0.0,
            "track.lane_half_width",
            "must be positive",
        )?;
        self.build_track()?;

        let r = &self.robot;
        check(r.wheel_separation > 0.0, "robot.wheel_separation", "must be positive")?;
        check(r.v_max > 0.0, "robot.v_max", "must be positive")?;
        check(r.omega_max > 0.0, "robot.omega_max", "must be positive")?;
        if let Some(s) = r.start {
            check(s.iter().all(|v| v.is_finite()), "robot.start", "must be finite")?;
        }

        let c = &self.camera;
        check(
            c.width >= 2 && c.height >= 2,
            "camera.width",
            "image must be at least 2x2",
        )?;
        check(
            c.horizontal_fov > 0.0 && c.horizontal_fov < std::f64::consts::PI,
            "camera.horizontal_fov",
            "must lie in (0, pi)",
        )?;
        check(c.mount_height > 0.0, "camera.mount_height", "must be positive")?;
        check(
            c.pitch > 0.0 && c.pitch < std::f64::consts::FRAC_PI_2,
            "camera.pitch",
            "must lie in (0, pi/2) so the ground is in view",
        )?;

        let s = &self.sensors;
        check_sigma(s.sigma_range, "sensors.sigma_range")?;
        check_sigma(s.sigma_bearing, "sensors.sigma_bearing")?;
        check_sigma(s.centroid_sigma_bearing, "sensors.centroid_sigma_bearing")?;
        check_probability(s.range_dropout, "sensors.range_dropout")?;
        check_probability(s.miss_rate, "sensors.miss_rate")?;
        check(
            s.confidence.alpha > 0.0 && s.confidence.beta > 0.0,
            "sensors.confidence",
            "alpha and beta must be positive",
        )?;
        check_probability(s.confidence.floor, "sensors.confidence.floor")?;
        check(s.sign_size > 0.0, "sensors.sign_size", "must be positive")?;

        let v = &self.vision;
        gaussian_kernel(v.blur_kernel, v.blur_sigma).map_err(|e| invalid("vision.blur_kernel", e.to_string()))?;
        check(v.rho_res > 0.0, "vision.rho_res", "must be positive")?;
        check(v.theta_res_deg > 0.0, "vision.theta_res_deg", "must be positive")?;
        check(v.hough_threshold > 0, "vision.hough_threshold", "must be positive")?;
        if let Some(roi) = &v.roi {
            check(roi.len() >= 3, "vision.roi", "polygon needs at least three vertices")?;
        }
        if let Some(row) = v.reference_row {
            check(row < c.height, "vision.reference_row", "must be inside the image")?;
        }

        let f = &self.filter;
        check_sigma(f.sigma_accel, "filter.sigma_accel")?;
        check(f.sigma_range > 0.0, "filter.sigma_range", "must be positive")?;
        check(f.sigma_bearing > 0.0, "filter.sigma_bearing", "must be positive")?;
        check(
            f.init.sigma_position > 0.0,
            "filter.init.sigma_position",
            "must be positive",
        )?;
        check(
            f.init.sigma_velocity > 0.0,
            "filter.init.sigma_velocity",
            "must be positive",
        )?;
        check(
            f.unscented.spread(4) > 0.0,
            "filter.unscented",
            "n + lambda must be positive",
        )?;
        check(f.association_gate > 0.0, "filter.association_gate", "must be positive")?;

        let ctl = &self.control;
        check_pid(&ctl.steering, "control.steering")?;
        if let Some(speed) = &ctl.speed {
            check_pid(speed, "control.speed")?;
        }
        check(ctl.base_speed >= 0.0, "control.base_speed", "must be non-negative")?;
        let b = &ctl.behavior;
        check(
            b.stop_distance >= 0.0,
            "control.behavior.stop_distance",
            "must be non-negative",
        )?;
        check(b.ramp_time > 0.0, "control.behavior.ramp_time", "must be positive")?;
        check(
            b.turn_distance >= 0.0,
            "control.behavior.turn_distance",
            "must be non-negative",
        )?;
        check(
            b.turn_speed >= 0.0,
            "control.behavior.turn_speed",
            "must be non-negative",
        )?;
        check(b.turn_rate > 0.0, "control.behavior.turn_rate", "must be positive")?;
        check(
            b.stop_dwell >= 0.0,
            "control.behavior.stop_dwell",
            "must be non-negative",
        )?;

        let run = &self.run;
        check(run.dt > 0.0 && run.dt.is_finite(), "run.dt", "must be positive")?;
        check(
            run.duration > 0.0 && run.duration.is_finite(),
            "run.duration",
            "must be positive",
        )?;
        check(run.end_margin >= 0.0, "run.end_margin", "must be non-negative")?;
        Ok(())
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
        key: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}
