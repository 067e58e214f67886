//! Scaled unscented transform and the UKF measurement update.
//!
//! With `lambda = alpha^2 (n + kappa) - n` the `2n + 1` sigma points are the
//! mean and the mean plus/minus the columns of the lower Cholesky factor of
//! `(n + lambda) P`. Mean weights are `lambda / (n + lambda)` for the centre
//! point and `1 / (2 (n + lambda))` elsewhere; the centre covariance weight
//! adds `1 - alpha^2 + beta`.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::{checked_inverse, checked_posterior, symmetrize, FilterError, GaussianBelief, MeasurementModel};
use crate::world::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnscentedParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UnscentedParams {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UnscentedParams {
    pub fn lambda(&self, n: usize) -> f64 {
        self.spread(n) - n as f64
    }

    /// `n + lambda`, formed without the cancellation of adding `n` back.
    pub fn spread(&self, n: usize) -> f64 {
        self.alpha * self.alpha * (n as f64 + self.kappa)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSet<const N: usize> {
    pub points: Vec<SVector<f64, N>>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

impl<const N: usize> SigmaSet<N> {
    /// Weighted mean, accumulated as offsets from the centre point. The
    /// centre weight is of order `1 / alpha^2`, so summing `w_i chi_i`
    /// directly would cancel away that many digits of the mean.
    pub fn mean(&self) -> SVector<f64, N> {
        let c = self.points[0];
        let shift: SVector<f64, N> = self.points[1..]
            .iter()
            .zip(&self.mean_weights[1..])
            .map(|(p, w)| (p - c) * *w)
            .sum();
        c + shift
    }

    /// Weighted covariance about [`SigmaSet::mean`].
    pub fn covariance(&self) -> SMatrix<f64, N, N> {
        let m = self.mean();
        self.points
            .iter()
            .zip(&self.cov_weights)
            .map(|(p, w)| (p - m) * (p - m).transpose() * *w)
            .sum()
    }
}

/// Jitter added to the scaled covariance before the single Cholesky retry.
const CHOLESKY_JITTER: f64 = 1e-12;

pub fn sigma_points<const N: usize>(
    belief: &GaussianBelief<N>,
    params: &UnscentedParams,
) -> Result<SigmaSet<N>, FilterError> {
    let lambda = params.lambda(N);
    let spread = params.spread(N);
    if !(spread > 0.0) {
        return Err(FilterError::SigmaSpread(spread));
    }
    let scaled = symmetrize(&belief.cov) * spread;
    let factor = match scaled.cholesky() {
        Some(c) => c.l(),
        None => (scaled + SMatrix::<f64, N, N>::identity() * CHOLESKY_JITTER)
            .cholesky()
            .ok_or(FilterError::NotPositiveDefinite)?
            .l(),
    };

    let mut points = Vec::with_capacity(2 * N + 1);
    points.push(belief.mean);
    for i in 0..N {
        points.push(belief.mean + factor.column(i));
    }
    for i in 0..N {
        points.push(belief.mean - factor.column(i));
    }
    let w0 = lambda / spread;
    let wi = 1.0 / (2.0 * spread);
    let mut mean_weights = vec![wi; 2 * N + 1];
    mean_weights[0] = w0;
    let mut cov_weights = mean_weights.clone();
    cov_weights[0] = w0 + (1.0 - params.alpha * params.alpha + params.beta);
    Ok(SigmaSet {
        points,
        mean_weights,
        cov_weights,
    })
}

/// Weighted mean of propagated measurements. Angular components are averaged
/// as `atan2(sum w sin, sum w cos)`; both linear and angular parts are
/// accumulated relative to the centre point, which is algebraically the same
/// because the weights sum to one.
fn measurement_mean<const M: usize>(zs: &[SVector<f64, M>], weights: &[f64], angular: &[bool; M]) -> SVector<f64, M> {
    let z0 = zs[0];
    let mut mean = SVector::<f64, M>::zeros();
    for k in 0..M {
        if angular[k] {
            let (mut s, mut c) = (0.0, 0.0);
            for (z, w) in zs.iter().zip(weights) {
                let d = wrap_angle(z[k] - z0[k]);
                s += w * d.sin();
                c += w * d.cos();
            }
            mean[k] = wrap_angle(z0[k] + s.atan2(c));
        } else {
            let shift: f64 = zs.iter().zip(weights).skip(1).map(|(z, w)| w * (z[k] - z0[k])).sum();
            mean[k] = z0[k] + shift;
        }
    }
    mean
}

/// The unscented estimate of the measurement mean, `sum w_i h(chi_i)`.
pub fn ukf_predicted_measurement<const N: usize, const M: usize>(
    belief: &GaussianBelief<N>,
    model: &impl MeasurementModel<N, M>,
    params: &UnscentedParams,
) -> Result<SVector<f64, M>, FilterError> {
    let sigma = sigma_points(belief, params)?;
    let zs: Vec<SVector<f64, M>> = sigma.points.iter().map(|x| model.predict(x)).collect();
    Ok(measurement_mean(&zs, &sigma.mean_weights, &model.angular()))
}

/// Unscented Kalman filter measurement update.
pub fn ukf_update<const N: usize, const M: usize>(
    belief: &GaussianBelief<N>,
    z: &SVector<f64, M>,
    model: &impl MeasurementModel<N, M>,
    r: &SMatrix<f64, M, M>,
    params: &UnscentedParams,
) -> Result<GaussianBelief<N>, FilterError> {
    let sigma = sigma_points(belief, params)?;
    let angular = model.angular();
    let zs: Vec<SVector<f64, M>> = sigma.points.iter().map(|x| model.predict(x)).collect();
    let z_hat = measurement_mean(&zs, &sigma.mean_weights, &angular);

    let mut p_zz = *r;
    let mut p_xz = SMatrix::<f64, N, M>::zeros();
    for ((x, zi), w) in sigma.points.iter().zip(&zs).zip(&sigma.cov_weights) {
        let dz = model.residual(zi, &z_hat);
        let dx = x - belief.mean;
        p_zz += dz * dz.transpose() * *w;
        p_xz += dx * dz.transpose() * *w;
    }
    let p_zz = symmetrize(&p_zz);
    let s_inv = checked_inverse(&p_zz)?;
    let k = p_xz * s_inv;
    let mean = belief.mean + k * model.residual(z, &z_hat);
    // With the default small alpha the centre weight is large and negative,
    // so a prior that is wide relative to the range can give an indefinite
    // posterior here.
    let cov = belief.cov - k * p_zz * k.transpose();
    checked_posterior(mean, &cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{ekf_update, predict_cv, white_acceleration_q, PositionModel, RangeBearingModel};
    use crate::world::Pose2D;
    use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

    fn belief() -> GaussianBelief<4> {
        #[rustfmt::skip]
        let p = Matrix4::new(
            0.30, 0.05, 0.01, 0.00,
            0.05, 0.20, 0.00, 0.02,
            0.01, 0.00, 0.50, 0.10,
            0.00, 0.02, 0.10, 0.40,
        );
        GaussianBelief::new(Vector4::new(2.0, -1.0, 0.3, 0.1), p)
    }

    #[test]
    fn point_count_and_weights() {
        let s = sigma_points(&belief(), &UnscentedParams::default()).unwrap();
        assert_eq!(s.points.len(), 9);
        assert!((s.mean_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reconstructs_mean_and_covariance() {
        let b = belief();
        let params = UnscentedParams {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        };
        let s = sigma_points(&b, &params).unwrap();
        let mean: Vector4<f64> = s.points.iter().zip(&s.mean_weights).map(|(p, w)| p * *w).sum();
        assert!((mean - b.mean).amax() < 1e-12);
        let cov: Matrix4<f64> = s
            .points
            .iter()
            .zip(&s.cov_weights)
            .map(|(p, w)| (p - mean) * (p - mean).transpose() * *w)
            .sum();
        // Centre covariance weight carries the beta term, centre deviation is 0.
        assert!((cov - b.cov).amax() < 1e-12);
    }

    #[test]
    fn reconstructs_at_default_alpha() {
        let b = belief();
        let s = sigma_points(&b, &UnscentedParams::default()).unwrap();
        // Forming mean +- column rounds by half an ulp of the mean, and the
        // outer weights are 1 / (2 spread) = 1.25e5, so ~3e-11 is the floor.
        assert!((s.mean() - b.mean).amax() < 1e-9);
        assert!((s.covariance() - b.cov).amax() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_spread() {
        let params = UnscentedParams {
            alpha: 1.0,
            beta: 2.0,
            kappa: -4.0,
        };
        assert_eq!(sigma_points(&belief(), &params), Err(FilterError::SigmaSpread(0.0)));
    }

    #[test]
    fn jitter_rescues_singular_covariance() {
        let b = GaussianBelief::new(Vector4::zeros(), Matrix4::zeros());
        let s = sigma_points(&b, &UnscentedParams::default()).unwrap();
        assert_eq!(s.points.len(), 9);
        let mut not_psd = Matrix4::zeros();
        not_psd[(0, 0)] = -1.0;
        assert_eq!(
            sigma_points(
                &GaussianBelief::new(Vector4::zeros(), not_psd),
                &UnscentedParams::default()
            ),
            Err(FilterError::NotPositiveDefinite)
        );
    }

    #[test]
    fn linear_model_matches_kalman() {
        let b = belief();
        let r = Matrix2::new(0.04, 0.01, 0.01, 0.09);
        let z = Vector2::new(2.4, -0.7);
        let u = ukf_update(&b, &z, &PositionModel, &r, &UnscentedParams::default()).unwrap();
        let e = ekf_update(&b, &z, &PositionModel, &r).unwrap();
        assert!((u.mean - e.mean).amax() < 1e-9, "{}", (u.mean - e.mean).amax());
        assert!((u.cov - e.cov).amax() < 1e-9, "{}", (u.cov - e.cov).amax());
    }

    #[test]
    fn zero_noise_collapses_to_measurement() {
        let b = belief();
        let z = Vector2::new(2.2, -0.9);
        let u = ukf_update(
            &b,
            &z,
            &PositionModel,
            &(Matrix2::identity() * 1e-10),
            &UnscentedParams::default(),
        )
        .unwrap();
        assert!((u.mean[0] - 2.2).abs() < 1e-6 && (u.mean[1] + 0.9).abs() < 1e-6);
        assert!(u.cov[(0, 0)] < 1e-8);
    }

    #[test]
    fn exact_prediction_leaves_mean() {
        let b = GaussianBelief::new(Vector4::new(3.0, 1.0, 0.0, 0.0), Matrix4::identity() * 0.2);
        let model = RangeBearingModel {
            robot: Pose2D::new(0.5, -0.2, 0.3),
        };
        let z = model.predict(&b.mean);
        let r = RangeBearingModel::noise(0.05, 0.02);
        let e = ekf_update(&b, &z, &model, &r).unwrap();
        assert_eq!(e.mean, b.mean);
        let params = UnscentedParams::default();
        let z_hat = ukf_predicted_measurement(&b, &model, &params).unwrap();
        let u = ukf_update(&b, &z_hat, &model, &r, &params).unwrap();
        assert!((u.mean - b.mean).amax() < 1e-15);
    }

    #[test]
    fn refuses_indefinite_posterior() {
        // Prior about as wide as the range to the robot.
        #[rustfmt::skip]
        let p = Matrix4::new(
            0.8885560308485252, 0.0, 0.6858109547844768, -0.5432460345549875,
            0.0, 0.01, 0.0, 0.0,
            0.6858109547844768, 0.0, 0.9391499894456565, 0.0,
            -0.5432460345549875, 0.0, 0.0, 0.8025668777287052,
        );
        let prior = GaussianBelief::new(
            Vector4::new(4.156729389950414, -4.938345666112513, -2.9231511730607505, 0.0),
            p,
        );
        let b = predict_cv(&prior, 0.01, &white_acceleration_q(0.1, 0.01)).unwrap();
        let model = RangeBearingModel {
            robot: Pose2D::new(3.135118721549283, -3.805967968600059, 0.0),
        };
        let z = model.predict(&b.mean) + Vector2::new(0.05, 0.01);
        let r = RangeBearingModel::noise(0.01, 0.005);
        assert_eq!(
            ukf_update(&b, &z, &model, &r, &UnscentedParams::default()),
            Err(FilterError::NotPositiveDefinite)
        );
        let wide = UnscentedParams {
            alpha: 1.0,
            ..Default::default()
        };
        assert!(ukf_update(&b, &z, &model, &r, &wide).unwrap().min_eigenvalue() > 0.0);
    }
}
