//! Robot-pose linearisation over `[x, y, psi]`: the Euler unicycle motion
//! Jacobian and the linearised observation `O = H x + w`.

use nalgebra::{Matrix2x3, Matrix3, SMatrix, SVector, Vector2, Vector3};

use super::{ekf_update, symmetrize, FilterError, GaussianBelief, MeasurementModel};
use crate::world::{wrap_angle, Point2, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose3 {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose3 {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.psi)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<Pose2D> for Pose3 {
    fn from(p: Pose2D) -> Self {
        Self::new(p.x, p.y, p.psi)
    }
}

/// One Euler step of the unicycle.
pub fn euler_motion(pose: &Pose3, v: f64, omega: f64, dt: f64) -> Pose3 {
    Pose3::new(
        pose.x + v * dt * pose.psi.cos(),
        pose.y + v * dt * pose.psi.sin(),
        pose.psi + omega * dt,
    )
}

/// Jacobian of [`euler_motion`] with respect to the previous pose.
pub fn motion_jacobian(pose: &Pose3, v: f64, dt: f64) -> Matrix3<f64> {
    let (s, c) = pose.psi.sin_cos();
    #[rustfmt::skip]
    let a = Matrix3::new(
        1.0, 0.0, -v * dt * s,
        0.0, 1.0,  v * dt * c,
        0.0, 0.0,  1.0,
    );
    a
}

/// `x = f(x, u)`, `P = A P A^T + Q`.
pub fn predict_pose(
    belief: &GaussianBelief<3>,
    v: f64,
    omega: f64,
    dt: f64,
    q: &Matrix3<f64>,
) -> Result<GaussianBelief<3>, FilterError> {
    if !(dt > 0.0) {
        return Err(FilterError::TimeStep(dt));
    }
    let pose = Pose3::from_vector(&belief.mean);
    let a = motion_jacobian(&pose, v, dt);
    Ok(GaussianBelief {
        mean: euler_motion(&pose, v, omega, dt).to_vector(),
        cov: symmetrize(&(a * belief.cov * a.transpose() + q)),
    })
}

/// Full-pose observation, `H = I`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseDirectModel;

impl MeasurementModel<3, 3> for PoseDirectModel {
    fn predict(&self, state: &SVector<f64, 3>) -> SVector<f64, 3> {
        *state
    }

    fn jacobian(&self, _state: &SVector<f64, 3>) -> Result<SMatrix<f64, 3, 3>, FilterError> {
        Ok(Matrix3::identity())
    }

    fn angular(&self) -> [bool; 3] {
        [false, false, true]
    }
}

/// Range and sensor-frame bearing from the robot to a known landmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRangeBearingModel {
    pub landmark: Point2,
}

/// Jacobian of `(r, b - psi)` with respect to the robot pose.
pub fn pose_range_bearing_jacobian(pose: &Pose3, landmark: Point2) -> Result<Matrix2x3<f64>, FilterError> {
    let dx = landmark.x - pose.x;
    let dy = landmark.y - pose.y;
    let r2 = dx * dx + dy * dy;
    let r = r2.sqrt();
    if r < super::target::MIN_JACOBIAN_RANGE {
        return Err(FilterError::ZeroRange);
    }
    #[rustfmt::skip]
    let h = Matrix2x3::new(
        -dx / r,  -dy / r,  0.0,
        dy / r2,  -dx / r2, -1.0,
    );
    Ok(h)
}

impl MeasurementModel<3, 2> for PoseRangeBearingModel {
    fn predict(&self, state: &SVector<f64, 3>) -> SVector<f64, 2> {
        let dx = self.landmark.x - state[0];
        let dy = self.landmark.y - state[1];
        Vector2::new(dx.hypot(dy), wrap_angle(dy.atan2(dx) - state[2]))
    }

    fn jacobian(&self, state: &SVector<f64, 3>) -> Result<SMatrix<f64, 2, 3>, FilterError> {
        pose_range_bearing_jacobian(&Pose3::from_vector(state), self.landmark)
    }

    fn angular(&self) -> [bool; 2] {
        [false, true]
    }
}

/// Linearised Kalman update of the pose belief; the heading is re-wrapped.
pub fn pose_ekf_update<const M: usize>(
    belief: &GaussianBelief<3>,
    observation: &SVector<f64, M>,
    model: &impl MeasurementModel<3, M>,
    r: &SMatrix<f64, M, M>,
) -> Result<GaussianBelief<3>, FilterError> {
    let mut post = ekf_update(belief, observation, model, r)?;
    post.mean[2] = wrap_angle(post.mean[2]);
    Ok(post)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motion_jacobian_examples() {
        assert_eq!(
            motion_jacobian(&Pose3::new(1.0, 2.0, 0.7), 0.0, 0.1),
            Matrix3::identity()
        );
        let a = motion_jacobian(&Pose3::new(0.0, 0.0, 0.0), 1.0, 1.0);
        assert_eq!(a[(0, 2)], 0.0);
        assert_eq!(a[(1, 2)], 1.0);
    }

    #[test]
    fn direct_observation_limits() {
        let prior = GaussianBelief::new(Vector3::new(1.0, 2.0, 0.3), Matrix3::identity() * 0.1);
        let obs = Vector3::new(1.2, 1.9, 0.35);

        let post = pose_ekf_update(&prior, &obs, &PoseDirectModel, &(Matrix3::identity() * 1e-12)).unwrap();
        assert!((post.mean - obs).amax() < 1e-9);

        let post = pose_ekf_update(&prior, &obs, &PoseDirectModel, &(Matrix3::identity() * 1e12)).unwrap();
        assert!((post.mean - prior.mean).amax() < 1e-9);
    }

    #[test]
    fn heading_residual_wraps() {
        let prior = GaussianBelief::new(Vector3::new(0.0, 0.0, 3.1), Matrix3::identity() * 0.1);
        let obs = Vector3::new(0.0, 0.0, -3.1);
        let post = pose_ekf_update(&prior, &obs, &PoseDirectModel, &(Matrix3::identity() * 0.1)).unwrap();
        // Halfway across the +/-PI seam, not back through zero.
        assert!(post.mean[2].abs() > 3.1);
    }

    #[test]
    fn bearing_heading_derivative() {
        let h = pose_range_bearing_jacobian(&Pose3::new(0.0, 0.0, 0.0), Point2::new(3.0, 4.0)).unwrap();
        assert_eq!(h[(1, 2)], -1.0);
        assert!((h[(0, 0)] + 0.6).abs() < 1e-15);
        assert!((h[(1, 0)] - 0.16).abs() < 1e-15);
    }

    #[test]
    fn predict_pose_moves_forward() {
        let b = GaussianBelief::new(Vector3::zeros(), Matrix3::identity() * 0.01);
        let p = predict_pose(&b, 1.0, 0.5, 0.1, &Matrix3::zeros()).unwrap();
        assert!((p.mean - Vector3::new(0.1, 0.0, 0.05)).amax() < 1e-15);
        assert!(p.cov[(1, 1)] > b.cov[(1, 1)]);
    }

    #[test]
    fn landmark_update_reduces_uncertainty() {
        let prior = GaussianBelief::new(Vector3::new(0.1, -0.1, 0.05), Matrix3::identity() * 0.04);
        let model = PoseRangeBearingModel {
            landmark: Point2::new(3.0, 4.0),
        };
        let z = model.predict(&Vector3::zeros());
        let r = SMatrix::<f64, 2, 2>::from_diagonal(&Vector2::new(0.01, 0.001));
        let post = pose_ekf_update(&prior, &z, &model, &r).unwrap();
        assert!(post.cov.trace() < prior.cov.trace());
        assert!(post.mean.norm() < prior.mean.norm());
    }
}
