use nalgebra::{SMatrix, SVector};

use super::{checked_inverse, checked_posterior, symmetrize, FilterError, GaussianBelief};
use crate::world::wrap_angle;

/// Observation function `z = h(x)` of an `N`-state, `M`-measurement model.
pub trait MeasurementModel<const N: usize, const M: usize> {
    fn predict(&self, state: &SVector<f64, N>) -> SVector<f64, M>;

    fn jacobian(&self, state: &SVector<f64, N>) -> Result<SMatrix<f64, M, N>, FilterError>;

    /// Components that are angles and must be differenced modulo `2 PI`.
    fn angular(&self) -> [bool; M] {
        [false; M]
    }

    fn residual(&self, z: &SVector<f64, M>, predicted: &SVector<f64, M>) -> SVector<f64, M> {
        let mut r = z - predicted;
        for (i, ang) in self.angular().iter().enumerate() {
            if *ang {
                r[i] = wrap_angle(r[i]);
            }
        }
        r
    }
}

/// Extended Kalman filter measurement update.
///
/// `K = P H^T (H P H^T + R)^-1`, `x += K (z - h(x))`, `P = (I - K H) P`,
/// followed by `P = (P + P^T) / 2`.
pub fn ekf_update<const N: usize, const M: usize>(
    belief: &GaussianBelief<N>,
    z: &SVector<f64, M>,
    model: &impl MeasurementModel<N, M>,
    r: &SMatrix<f64, M, M>,
) -> Result<GaussianBelief<N>, FilterError> {
    let p = &belief.cov;
    let h = model.jacobian(&belief.mean)?;
    let innovation = model.residual(z, &model.predict(&belief.mean));
    let s = h * p * h.transpose() + r;
    let s_inv = checked_inverse(&symmetrize(&s))?;
    let k = p * h.transpose() * s_inv;
    let mean = belief.mean + k * innovation;
    let cov = (SMatrix::<f64, N, N>::identity() - k * h) * p;
    checked_posterior(mean, &cov)
}
