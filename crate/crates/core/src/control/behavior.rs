//! Stop/Move/Turn sign behaviors layered over lane following.
//!
//! ```text
//! LaneFollowing --Stop < stop_distance--> Stopping --ramp_time--> Stopped
//! Stopped --Move--> LaneFollowing
//! LaneFollowing --Turn < turn_distance--> Turning --|turn_angle|--> LaneFollowing
//! ```
//!
//! Each sign track triggers at most once, so a Stop sign that is still in
//! view after the robot moves off does not halt it again.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::world::{Command, SignKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BehaviorConfig {
    pub stop_distance: f64,
    pub ramp_time: f64,
    pub turn_distance: f64,
    /// Signed heading change of a Turn sign; positive turns left.
    pub turn_angle: f64,
    pub turn_speed: f64,
    pub turn_rate: f64,
    /// Minimum time spent in Stopped before a Move sign releases it.
    pub stop_dwell: f64,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            stop_distance: 0.5,
            ramp_time: 0.5,
            turn_distance: 0.5,
            turn_angle: FRAC_PI_2,
            turn_speed: 0.1,
            turn_rate: 0.5,
            stop_dwell: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BehaviorMode {
    LaneFollowing,
    Stopping,
    Stopped,
    Turning,
}

impl BehaviorMode {
    pub fn name(&self) -> &'static str {
        match self {
            BehaviorMode::LaneFollowing => "LaneFollowing",
            BehaviorMode::Stopping => "Stopping",
            BehaviorMode::Stopped => "Stopped",
            BehaviorMode::Turning => "Turning",
        }
    }
}

impl fmt::Display for BehaviorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorState {
    pub mode: BehaviorMode,
    /// Seconds spent in the current mode.
    pub timer: f64,
    /// Heading change still to be turned, signed.
    pub pending_turn: f64,
    /// Forward speed when the stop ramp began.
    pub ramp_from: f64,
    /// Sign tracks that already triggered a behavior.
    pub handled: BTreeSet<usize>,
}

impl Default for BehaviorState {
    fn default() -> Self {
        Self {
            mode: BehaviorMode::LaneFollowing,
            timer: 0.0,
            pending_turn: 0.0,
            ramp_from: 0.0,
            handled: BTreeSet::new(),
        }
    }
}

/// A confidence-gated sign sighting with its estimated distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignObservation {
    pub track: usize,
    pub kind: SignKind,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: BehaviorMode,
    pub to: BehaviorMode,
    /// Sign track that caused the transition, if any.
    pub track: Option<usize>,
}

fn nearest(obs: &[SignObservation], kind: SignKind, within: f64, handled: &BTreeSet<usize>) -> Option<SignObservation> {
    obs.iter()
        .filter(|o| o.kind == kind && o.distance < within && !handled.contains(&o.track))
        .min_by(|a, b| a.distance.total_cmp(&b.distance).then(a.track.cmp(&b.track)))
        .copied()
}

/// Advances the behavior machine by `dt` and returns the command to apply.
///
/// `nominal` is the lane-following command; the result never has a larger
/// forward speed than it.
pub fn behavior_step(
    cfg: &BehaviorConfig,
    st: &BehaviorState,
    observations: &[SignObservation],
    dt: f64,
    nominal: Command,
) -> (BehaviorState, Command, Option<Transition>) {
    let mut next = st.clone();
    let mut transition = None;
    let mut enter = |next: &mut BehaviorState, to: BehaviorMode, track: Option<usize>| {
        transition = Some(Transition {
            from: next.mode,
            to,
            track,
        });
        next.mode = to;
        next.timer = 0.0;
        if let Some(t) = track {
            next.handled.insert(t);
        }
    };

    match st.mode {
        BehaviorMode::LaneFollowing => {
            if let Some(o) = nearest(observations, SignKind::Stop, cfg.stop_distance, &st.handled) {
                enter(&mut next, BehaviorMode::Stopping, Some(o.track));
                next.ramp_from = nominal.v;
            } else if let Some(o) = nearest(observations, SignKind::Turn, cfg.turn_distance, &st.handled) {
                enter(&mut next, BehaviorMode::Turning, Some(o.track));
                next.pending_turn = cfg.turn_angle;
            }
        }
        BehaviorMode::Stopped if st.timer >= cfg.stop_dwell => {
            let mv = observations
                .iter()
                .filter(|o| o.kind == SignKind::Move)
                .min_by(|a, b| a.distance.total_cmp(&b.distance).then(a.track.cmp(&b.track)));
            if let Some(o) = mv {
                enter(&mut next, BehaviorMode::LaneFollowing, Some(o.track));
            }
        }
        BehaviorMode::Stopped | BehaviorMode::Stopping | BehaviorMode::Turning => {}
    }

    let command = match next.mode {
        BehaviorMode::LaneFollowing => nominal,
        BehaviorMode::Stopped => {
            next.timer += dt;
            Command::STOP
        }
        BehaviorMode::Stopping => {
            next.timer += dt;
            if next.timer >= cfg.ramp_time {
                enter(&mut next, BehaviorMode::Stopped, None);
                Command::STOP
            } else {
                let scale = 1.0 - next.timer / cfg.ramp_time;
                Command {
                    v: (next.ramp_from * scale).min(nominal.v),
                    omega: nominal.omega * scale,
                }
            }
        }
        BehaviorMode::Turning => {
            next.timer += dt;
            let remaining = next.pending_turn.abs();
            let rate = cfg.turn_rate.min(remaining / dt);
            let omega = rate.copysign(next.pending_turn);
            next.pending_turn -= omega * dt;
            let cmd = Command {
                v: cfg.turn_speed.min(nominal.v),
                omega,
            };
            if next.pending_turn.abs() <= 1e-12 {
                next.pending_turn = 0.0;
                enter(&mut next, BehaviorMode::LaneFollowing, None);
            }
            cmd
        }
    };
    (next, command, transition)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOMINAL: Command = Command { v: 0.3, omega: 0.1 };

    fn sighting(track: usize, kind: SignKind, distance: f64) -> SignObservation {
        SignObservation { track, kind, distance }
    }

    #[test]
    fn stop_sign_within_threshold_starts_stopping() {
        let cfg = BehaviorConfig::default();
        let (st, cmd, tr) = behavior_step(
            &cfg,
            &BehaviorState::default(),
            &[sighting(0, SignKind::Stop, 0.4)],
            0.05,
            NOMINAL,
        );
        assert_eq!(st.mode, BehaviorMode::Stopping);
        assert!(cmd.v < NOMINAL.v);
        assert_eq!(tr.unwrap().to, BehaviorMode::Stopping);
    }

    #[test]
    fn distant_stop_sign_is_ignored() {
        let cfg = BehaviorConfig::default();
        let (st, cmd, tr) = behavior_step(
            &cfg,
            &BehaviorState::default(),
            &[sighting(0, SignKind::Stop, 0.6)],
            0.05,
            NOMINAL,
        );
        assert_eq!((st.mode, cmd, tr), (BehaviorMode::LaneFollowing, NOMINAL, None));
    }

    #[test]
    fn ramp_reaches_stopped() {
        let cfg = BehaviorConfig::default();
        let (mut st, _, _) = behavior_step(
            &cfg,
            &BehaviorState::default(),
            &[sighting(0, SignKind::Stop, 0.4)],
            0.05,
            NOMINAL,
        );
        let mut prev_v = NOMINAL.v;
        let mut ticks = 1;
        while st.mode == BehaviorMode::Stopping {
            let (s, cmd, _) = behavior_step(&cfg, &st, &[], 0.05, NOMINAL);
            assert!(cmd.v <= prev_v);
            prev_v = cmd.v;
            st = s;
            ticks += 1;
        }
        assert_eq!(st.mode, BehaviorMode::Stopped);
        assert_eq!(prev_v, 0.0);
        assert!((9..=11).contains(&ticks), "{ticks}");
    }

    #[test]
    fn stopped_holds_until_move() {
        let cfg = BehaviorConfig::default();
        let st = BehaviorState {
            mode: BehaviorMode::Stopped,
            ..Default::default()
        };
        let (st, cmd, tr) = behavior_step(&cfg, &st, &[], 0.05, NOMINAL);
        assert_eq!((st.mode, cmd, tr), (BehaviorMode::Stopped, Command::STOP, None));
        // A Stop sign does not release it, whatever the distance.
        let (st, cmd, _) = behavior_step(&cfg, &st, &[sighting(0, SignKind::Stop, 0.1)], 0.05, NOMINAL);
        assert_eq!((st.mode, cmd), (BehaviorMode::Stopped, Command::STOP));

        let (st, cmd, tr) = behavior_step(&cfg, &st, &[sighting(1, SignKind::Move, 3.0)], 0.05, NOMINAL);
        assert_eq!(st.mode, BehaviorMode::LaneFollowing);
        assert_eq!(cmd, NOMINAL);
        assert_eq!(tr.unwrap().track, Some(1));
    }

    #[test]
    fn dwell_delays_release() {
        let cfg = BehaviorConfig {
            stop_dwell: 0.1,
            ..Default::default()
        };
        let mv = [sighting(1, SignKind::Move, 1.0)];
        let mut st = BehaviorState {
            mode: BehaviorMode::Stopped,
            ..Default::default()
        };
        let mut ticks = 0;
        while st.mode == BehaviorMode::Stopped {
            let (s, cmd, _) = behavior_step(&cfg, &st, &mv, 0.05, NOMINAL);
            if s.mode == BehaviorMode::Stopped {
                assert_eq!(cmd, Command::STOP);
            }
            st = s;
            ticks += 1;
        }
        assert_eq!(ticks, 3);
    }

    #[test]
    fn handled_stop_does_not_retrigger() {
        let cfg = BehaviorConfig::default();
        let mut st = BehaviorState::default();
        st.handled.insert(0);
        let (st, _, tr) = behavior_step(&cfg, &st, &[sighting(0, SignKind::Stop, 0.3)], 0.05, NOMINAL);
        assert_eq!((st.mode, tr), (BehaviorMode::LaneFollowing, None));
    }

    #[test]
    fn turn_accumulates_exact_angle() {
        let cfg = BehaviorConfig::default();
        let (mut st, mut cmd, _) = behavior_step(
            &cfg,
            &BehaviorState::default(),
            &[sighting(2, SignKind::Turn, 0.45)],
            0.05,
            NOMINAL,
        );
        let mut turned = 0.0;
        loop {
            assert_eq!(cmd.v, 0.1);
            assert!(cmd.omega > 0.0);
            turned += cmd.omega * 0.05;
            if st.mode != BehaviorMode::Turning {
                break;
            }
            let (s, c, _) = behavior_step(&cfg, &st, &[], 0.05, NOMINAL);
            st = s;
            cmd = c;
        }
        assert_eq!(st.mode, BehaviorMode::LaneFollowing);
        assert!((turned - FRAC_PI_2).abs() < 1e-9, "{turned}");
    }

    #[test]
    fn turning_never_exceeds_nominal_speed() {
        let cfg = BehaviorConfig::default();
        let slow = Command { v: 0.05, omega: 0.0 };
        let (_, cmd, _) = behavior_step(
            &cfg,
            &BehaviorState::default(),
            &[sighting(2, SignKind::Turn, 0.3)],
            0.05,
            slow,
        );
        assert_eq!(cmd.v, 0.05);
    }
}
