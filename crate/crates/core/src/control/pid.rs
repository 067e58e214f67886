use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vision::LaneObservation;
use crate::world::Command;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("measured value must be finite, got {0}")]
    NonFinite(f64),
    #[error("time step must be positive, got {0}")]
    TimeStep(f64),
    #[error("invalid PID configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub setpoint: f64,
    /// `[min, max]` of the output.
    pub output_limits: [f64; 2],
    /// Magnitude bound of the accumulated integral.
    pub integral_limit: f64,
}

impl Default for PidConfig {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
            setpoint: 0.0,
            output_limits: [-f64::MAX, f64::MAX],
            integral_limit: f64::MAX,
        }
    }
}

impl PidConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let [lo, hi] = self.output_limits;
        if !(lo < hi) {
            return Err(ControlError::Config("output_limits must satisfy min < max"));
        }
        if !(self.integral_limit > 0.0) {
            return Err(ControlError::Config("integral_limit must be positive"));
        }
        if ![self.kp, self.ki, self.kd, self.setpoint].iter().all(|g| g.is_finite()) {
            return Err(ControlError::Config("gains and setpoint must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

/// One controller step: `u = kp e + ki sum(e dt) + kd de/dt` with
/// `e = setpoint - measured`.
///
/// The integral is clamped to `integral_limit`, the derivative is zero on the
/// first call, and the output is clamped to `output_limits`. Terms with a zero
/// gain are left out of the sum entirely.
pub fn pid_update(cfg: &PidConfig, st: &PidState, measured: f64, dt: f64) -> Result<(f64, PidState), ControlError> {
    if !measured.is_finite() {
        return Err(ControlError::NonFinite(measured));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ControlError::TimeStep(dt));
    }
    let e = cfg.setpoint - measured;
    let integral = (st.integral + e * dt).clamp(-cfg.integral_limit, cfg.integral_limit);
    let derivative = if st.initialized { (e - st.prev_error) / dt } else { 0.0 };

    let mut u = cfg.kp * e;
    if cfg.ki != 0.0 {
        u += cfg.ki * integral;
    }
    if cfg.kd != 0.0 {
        u += cfg.kd * derivative;
    }
    let [lo, hi] = cfg.output_limits;
    Ok((
        u.clamp(lo, hi),
        PidState {
            integral,
            prev_error: e,
            initialized: true,
        },
    ))
}

/// A configuration paired with its running state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pid {
    pub config: PidConfig,
    pub state: PidState,
}

impl Pid {
    pub fn new(config: PidConfig) -> Self {
        Self {
            config,
            state: PidState::default(),
        }
    }

    pub fn update(&mut self, measured: f64, dt: f64) -> Result<f64, ControlError> {
        let (u, st) = pid_update(&self.config, &self.state, measured, dt)?;
        self.state = st;
        Ok(u)
    }

    pub fn reset(&mut self) {
        self.state = PidState::default();
    }
}

/// Steering command from a lane observation.
///
/// A valid observation drives `omega` from the centre offset normalised by
/// the image half-width; an invalid one repeats `previous` unchanged.
pub fn lane_following_command(
    obs: &LaneObservation,
    image_width: usize,
    steering: &mut Pid,
    base_speed: f64,
    previous: Command,
    dt: f64,
) -> Result<Command, ControlError> {
    let Some(offset) = obs.center_offset else {
        return Ok(previous);
    };
    let normalized = offset / (image_width as f64 / 2.0);
    let omega = steering.update(normalized, dt)?;
    Ok(Command { v: base_speed, omega })
}

/// Lane-following steering with an optional speed loop.
///
/// The speed PID, when present, regulates the forward speed toward
/// `base_speed`; its output is an acceleration applied to the previous
/// speed command.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneController {
    pub steering: Pid,
    pub speed: Option<Pid>,
    pub base_speed: f64,
    last: Command,
}

impl LaneController {
    pub fn new(steering: PidConfig, speed: Option<PidConfig>, base_speed: f64) -> Self {
        Self {
            steering: Pid::new(steering),
            speed: speed.map(|cfg| {
                Pid::new(PidConfig {
                    setpoint: base_speed,
                    ..cfg
                })
            }),
            base_speed,
            last: Command::STOP,
        }
    }

    pub fn last(&self) -> Command {
        self.last
    }

    /// `measured_speed` is the robot's current forward speed; it is only
    /// used by the speed loop.
    pub fn command(
        &mut self,
        obs: &LaneObservation,
        image_width: usize,
        measured_speed: f64,
        dt: f64,
    ) -> Result<Command, ControlError> {
        let v = match &mut self.speed {
            Some(pid) => {
                let accel = pid.update(measured_speed, dt)?;
                (self.last.v + accel * dt).min(self.base_speed.max(0.0))
            }
            None => self.base_speed,
        };
        let cmd = lane_following_command(obs, image_width, &mut self.steering, v, self.last, dt)?;
        self.last = cmd;
        Ok(cmd)
    }
}
