//! Gaussian state estimation.
//!
//! * [`target`]: constant-velocity tracking of a sign as `[x, y, vx, vy]`
//!   from range-bearing or bearing-only observations.
//! * [`pose`]: the robot-pose linearisation (`x, y, psi`) with direct and
//!   landmark range-bearing observations.
//! * [`kalman`] and [`unscented`]: the EKF and UKF measurement updates shared
//!   by both, generic over [`MeasurementModel`].

pub mod kalman;
pub mod pose;
pub mod target;
pub mod unscented;

use nalgebra::{DMatrix, SMatrix, SVector};
use thiserror::Error;

pub use kalman::{ekf_update, MeasurementModel};
pub use pose::{
    motion_jacobian, pose_ekf_update, pose_range_bearing_jacobian, predict_pose, Pose3, PoseDirectModel,
    PoseRangeBearingModel,
};
pub use target::{
    init_from_first_measurement, predict_cv, range_bearing_jacobian, white_acceleration_q, BearingOnlyModel,
    InitConfig, PositionModel, RangeBearingModel, TargetState4,
};
pub use unscented::{sigma_points, ukf_predicted_measurement, ukf_update, SigmaSet, UnscentedParams};

/// Innovation covariances with a larger eigenvalue ratio are treated as
/// singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("innovation covariance is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("target coincides with the sensor")]
    ZeroRange,
    #[error("invalid unscented transform parameters: n + lambda = {0}")]
    SigmaSpread(f64),
    #[error("time step must be positive, got {0}")]
    TimeStep(f64),
}

/// Mean and covariance of a Gaussian over an `N`-dimensional state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief<const N: usize> {
    pub mean: SVector<f64, N>,
    pub cov: SMatrix<f64, N, N>,
}

impl<const N: usize> GaussianBelief<N> {
    pub fn new(mean: SVector<f64, N>, cov: SMatrix<f64, N, N>) -> Self {
        Self { mean, cov }
    }

    /// Largest `|P - P^T|` entry.
    pub fn asymmetry(&self) -> f64 {
        (self.cov - self.cov.transpose()).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigenvalues(&self.cov).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Normalised estimation error squared, `e^T P^-1 e` with
    /// `e = truth - mean`.
    pub fn nees(&self, truth: &SVector<f64, N>) -> Result<f64, FilterError> {
        let e = truth - self.mean;
        let chol = self.cov.cholesky().ok_or(FilterError::NotPositiveDefinite)?;
        Ok(e.dot(&chol.solve(&e)))
    }
}

/// Most negative eigenvalue a posterior covariance may carry from rounding.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Symmetrises an updated covariance and refuses it when it has lost
/// positive semi-definiteness. The caller keeps its prior in that case.
pub(crate) fn checked_posterior<const N: usize>(
    mean: SVector<f64, N>,
    cov: &SMatrix<f64, N, N>,
) -> Result<GaussianBelief<N>, FilterError> {
    let cov = symmetrize(cov);
    let min = eigenvalues(&cov).into_iter().fold(f64::INFINITY, f64::min);
    if !(min >= -PSD_TOLERANCE) {
        return Err(FilterError::NotPositiveDefinite);
    }
    Ok(GaussianBelief { mean, cov })
}

pub(crate) fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix.
pub fn eigenvalues<const N: usize>(m: &SMatrix<f64, N, N>) -> Vec<f64> {
    let d = DMatrix::from_iterator(N, N, m.iter().copied());
    d.symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// Inverse of a symmetric innovation covariance, refused when it is not
/// positive definite or its condition number exceeds [`MAX_CONDITION`].
pub(crate) fn checked_inverse<const M: usize>(s: &SMatrix<f64, M, M>) -> Result<SMatrix<f64, M, M>, FilterError> {
    let eig = eigenvalues(s);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || !max.is_finite() {
        return Err(FilterError::IllConditioned(f64::INFINITY));
    }
    let cond = max / min;
    if cond > MAX_CONDITION {
        return Err(FilterError::IllConditioned(cond));
    }
    s.try_inverse().ok_or(FilterError::IllConditioned(cond))
}
