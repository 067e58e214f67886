//! Monte Carlo consistency check of the sign filter.
//!
//! A robot drives straight past a static sign, taking a noisy range-bearing
//! reading every tick. The filter is initialised from the first reading and
//! run with the true noise levels; for a consistent filter the NEES of the
//! final estimate is chi-square distributed with four degrees of freedom.

use nalgebra::Vector4;

use super::config::FilterKind;
use super::{substream, Substream};
use crate::estimation::{
    ekf_update, init_from_first_measurement, predict_cv, ukf_update, white_acceleration_q, FilterError, InitConfig,
    RangeBearingModel, UnscentedParams,
};
use crate::sensors::{sense_range_bearing, RangeBearingNoise};
use crate::world::{Point2, Pose2D, Sign, SignKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticSignTrial {
    pub sign: Point2,
    pub start: Pose2D,
    pub speed: f64,
    pub dt: f64,
    pub ticks: usize,
    pub noise: RangeBearingNoise,
    pub kind: FilterKind,
    pub unscented: UnscentedParams,
    pub init: InitConfig,
    /// Process noise the filter assumes; the sign is truly static.
    pub sigma_accel: f64,
}

impl Default for StaticSignTrial {
    fn default() -> Self {
        Self {
            sign: Point2::new(4.0, 1.0),
            start: Pose2D::new(0.0, 0.0, 0.0),
            speed: 0.3,
            dt: 0.1,
            ticks: 60,
            noise: RangeBearingNoise {
                sigma_range: 0.05,
                sigma_bearing: 1f64.to_radians(),
            },
            kind: FilterKind::Ekf,
            unscented: UnscentedParams::default(),
            init: InitConfig::default(),
            sigma_accel: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// NEES after each tick's update.
    pub nees: Vec<f64>,
    /// Squared position error after each tick's update.
    pub sq_position_error: Vec<f64>,
}

impl TrialResult {
    pub fn final_nees(&self) -> f64 {
        *self.nees.last().expect("at least one tick")
    }
}

/// Runs one trial on its own Monte Carlo random stream.
pub fn run_static_sign_trial(trial: &StaticSignTrial, seed: u64) -> Result<TrialResult, FilterError> {
    let mut rng = substream(seed, Substream::MonteCarlo);
    let sign = Sign {
        kind: SignKind::Stop,
        position: trial.sign,
        facing: 0.0,
    };
    let truth = Vector4::new(trial.sign.x, trial.sign.y, 0.0, 0.0);
    let q = white_acceleration_q(trial.sigma_accel, trial.dt);
    let r = RangeBearingModel::noise(trial.noise.sigma_range, trial.noise.sigma_bearing);
    let fov = std::f64::consts::TAU;

    let mut belief = None;
    let mut result = TrialResult {
        nees: Vec::with_capacity(trial.ticks),
        sq_position_error: Vec::with_capacity(trial.ticks),
    };
    for k in 0..trial.ticks {
        let travelled = trial.speed * trial.dt * k as f64;
        let robot = trial.start.to_world(travelled, 0.0);
        let robot = Pose2D::new(robot.x, robot.y, trial.start.psi);
        let Some(z) = sense_range_bearing(&robot, &sign, trial.noise, fov, &mut rng) else {
            continue;
        };
        let model = RangeBearingModel { robot };
        let post = match belief {
            None => init_from_first_measurement(&z, &robot, &trial.init),
            Some(b) => {
                let prior = predict_cv(&b, trial.dt, &q)?;
                let zv = RangeBearingModel::measurement(&z);
                match trial.kind {
                    FilterKind::Ekf => ekf_update(&prior, &zv, &model, &r)?,
                    FilterKind::Ukf => ukf_update(&prior, &zv, &model, &r, &trial.unscented)?,
                }
            }
        };
        let e = post.mean - truth;
        result.sq_position_error.push(e[0] * e[0] + e[1] * e[1]);
        result.nees.push(post.nees(&truth)?);
        belief = Some(post);
    }
    Ok(result)
}

/// Mean final-tick NEES over `runs` trials with consecutive seeds.
pub fn average_final_nees(trial: &StaticSignTrial, first_seed: u64, runs: u64) -> Result<f64, FilterError> {
    let mut sum = 0.0;
    for seed in first_seed..first_seed + runs {
        sum += run_static_sign_trial(trial, seed)?.final_nees();
    }
    Ok(sum / runs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_is_deterministic_and_converges() {
        let t = StaticSignTrial::default();
        let a = run_static_sign_trial(&t, 9).unwrap();
        assert_eq!(a, run_static_sign_trial(&t, 9).unwrap());
        assert_eq!(a.nees.len(), t.ticks);
        assert!(a.sq_position_error.last().unwrap() < &0.01);
    }

    #[test]
    fn noiseless_readings_give_exact_start() {
        let t = StaticSignTrial {
            noise: RangeBearingNoise::default(),
            ticks: 1,
            ..Default::default()
        };
        let r = run_static_sign_trial(&t, 0).unwrap();
        assert!(r.sq_position_error[0] < 1e-24);
    }
}
