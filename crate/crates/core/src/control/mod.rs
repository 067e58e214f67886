//! Steering and sign-triggered behaviors.

pub mod behavior;
pub mod pid;

pub use behavior::{behavior_step, BehaviorConfig, BehaviorMode, BehaviorState, SignObservation, Transition};
pub use pid::{lane_following_command, pid_update, ControlError, LaneController, Pid, PidConfig, PidState};
