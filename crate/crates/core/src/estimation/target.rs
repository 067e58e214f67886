//! Constant-velocity sign tracking in the world frame.

use nalgebra::{Matrix1, Matrix2x4, Matrix4, SMatrix, SVector, Vector1, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::{symmetrize, FilterError, GaussianBelief, MeasurementModel};
use crate::sensors::RangeBearing;
use crate::world::{wrap_angle, Pose2D};

/// Ranges below this are treated as the singular sensor origin.
pub const MIN_JACOBIAN_RANGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TargetState4 {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl TargetState4 {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self { x, y, vx, vy }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.vx, self.vy)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// Constant-velocity transition for a step of `dt`.
pub fn cv_transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// Discretised white-acceleration process noise with spectral density
/// `sigma_accel^2`.
pub fn white_acceleration_q(sigma_accel: f64, dt: f64) -> Matrix4<f64> {
    let q = sigma_accel * sigma_accel;
    let (a, b, c) = (dt.powi(4) / 4.0, dt.powi(3) / 2.0, dt * dt);
    #[rustfmt::skip]
    let m = Matrix4::new(
        a,   0.0, b,   0.0,
        0.0, a,   0.0, b,
        b,   0.0, c,   0.0,
        0.0, b,   0.0, c,
    );
    m * q
}

/// `x = F x`, `P = F P F^T + Q`.
pub fn predict_cv(belief: &GaussianBelief<4>, dt: f64, q: &Matrix4<f64>) -> Result<GaussianBelief<4>, FilterError> {
    if !(dt > 0.0) {
        return Err(FilterError::TimeStep(dt));
    }
    let f = cv_transition(dt);
    Ok(GaussianBelief {
        mean: f * belief.mean,
        cov: symmetrize(&(f * belief.cov * f.transpose() + q)),
    })
}

fn offsets(state: &SVector<f64, 4>, robot: &Pose2D) -> (f64, f64, f64) {
    let dx = state[0] - robot.x;
    let dy = state[1] - robot.y;
    (dx, dy, dx * dx + dy * dy)
}

/// Jacobian of `(range, bearing)` with respect to `[x, y, vx, vy]`.
pub fn range_bearing_jacobian(target: &TargetState4, robot: &Pose2D) -> Result<Matrix2x4<f64>, FilterError> {
    let (dx, dy, r2) = offsets(&target.to_vector(), robot);
    let r = r2.sqrt();
    if r < MIN_JACOBIAN_RANGE {
        return Err(FilterError::ZeroRange);
    }
    #[rustfmt::skip]
    let h = Matrix2x4::new(
        dx / r,   dy / r,  0.0, 0.0,
        -dy / r2, dx / r2, 0.0, 0.0,
    );
    Ok(h)
}

/// Range and sensor-frame bearing from a known robot pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeBearingModel {
    pub robot: Pose2D,
}

impl RangeBearingModel {
    pub fn measurement(z: &RangeBearing) -> Vector2<f64> {
        Vector2::new(z.range, z.bearing)
    }

    pub fn noise(sigma_range: f64, sigma_bearing: f64) -> SMatrix<f64, 2, 2> {
        SMatrix::<f64, 2, 2>::from_diagonal(&Vector2::new(sigma_range.powi(2), sigma_bearing.powi(2)))
    }
}

impl MeasurementModel<4, 2> for RangeBearingModel {
    fn predict(&self, state: &SVector<f64, 4>) -> SVector<f64, 2> {
        let (dx, dy, r2) = offsets(state, &self.robot);
        Vector2::new(r2.sqrt(), wrap_angle(dy.atan2(dx) - self.robot.psi))
    }

    fn jacobian(&self, state: &SVector<f64, 4>) -> Result<SMatrix<f64, 2, 4>, FilterError> {
        range_bearing_jacobian(&TargetState4::from_vector(state), &self.robot)
    }

    fn angular(&self) -> [bool; 2] {
        [false, true]
    }
}

/// Sensor-frame bearing only, as recovered from a detection's image column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingOnlyModel {
    pub robot: Pose2D,
}

impl MeasurementModel<4, 1> for BearingOnlyModel {
    fn predict(&self, state: &SVector<f64, 4>) -> SVector<f64, 1> {
        let (dx, dy, _) = offsets(state, &self.robot);
        Vector1::new(wrap_angle(dy.atan2(dx) - self.robot.psi))
    }

    fn jacobian(&self, state: &SVector<f64, 4>) -> Result<SMatrix<f64, 1, 4>, FilterError> {
        let (dx, dy, r2) = offsets(state, &self.robot);
        if r2.sqrt() < MIN_JACOBIAN_RANGE {
            return Err(FilterError::ZeroRange);
        }
        Ok(SMatrix::<f64, 1, 4>::new(-dy / r2, dx / r2, 0.0, 0.0))
    }

    fn angular(&self) -> [bool; 1] {
        [true]
    }
}

impl BearingOnlyModel {
    pub fn noise(sigma_bearing: f64) -> Matrix1<f64> {
        Matrix1::new(sigma_bearing * sigma_bearing)
    }
}

/// Direct, linear observation of the position components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PositionModel;

impl MeasurementModel<4, 2> for PositionModel {
    fn predict(&self, state: &SVector<f64, 4>) -> SVector<f64, 2> {
        Vector2::new(state[0], state[1])
    }

    fn jacobian(&self, _state: &SVector<f64, 4>) -> Result<SMatrix<f64, 2, 4>, FilterError> {
        Ok(Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub sigma_position: f64,
    pub sigma_velocity: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            sigma_position: 0.5,
            sigma_velocity: 1.0,
        }
    }
}

/// Places the target at the measured range and bearing with zero velocity.
pub fn init_from_first_measurement(z: &RangeBearing, robot: &Pose2D, cfg: &InitConfig) -> GaussianBelief<4> {
    let heading = robot.psi + z.bearing;
    let mean = Vector4::new(
        robot.x + z.range * heading.cos(),
        robot.y + z.range * heading.sin(),
        0.0,
        0.0,
    );
    let (sp, sv) = (cfg.sigma_position.powi(2), cfg.sigma_velocity.powi(2));
    GaussianBelief::new(mean, Matrix4::from_diagonal(&Vector4::new(sp, sp, sv, sv)))
}
