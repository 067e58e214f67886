//! Ground-truth world: differential-drive kinematics, piecewise-linear tracks
//! and sign placement.
//!
//! Angles are radians, counter-clockwise from the world x-axis, and every
//! stored heading is wrapped to `(-PI, PI]`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this angular rate `step` integrates a straight line.
pub const STRAIGHT_LINE_OMEGA: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("wheel separation must be positive, got {0}")]
    WheelSeparation(f64),
    #[error("time step must be positive, got {0}")]
    TimeStep(f64),
    #[error("invalid track: {0}")]
    Track(String),
}

/// Wraps an angle to `(-PI, PI]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<(), WorldError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(WorldError::NonFinite(what))
    }
}

/// Planar pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose2D {
    /// Creates a pose, wrapping the heading.
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            psi: wrap_angle(psi),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Expresses a world point in this pose's frame as `(forward, left)`.
    pub fn to_local(&self, p: Point2) -> (f64, f64) {
        let (s, c) = self.psi.sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Maps a `(forward, left)` offset in this pose's frame to the world.
    pub fn to_world(&self, forward: f64, left: f64) -> Point2 {
        let (s, c) = self.psi.sin_cos();
        Point2::new(self.x + c * forward - s * left, self.y + s * forward + c * left)
    }
}

impl fmt::Display for Pose2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x: {:.3}, y: {:.3}, psi: {:.3} rad)", self.x, self.y, self.psi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(p: [f64; 2]) -> Self {
        Self::new(p[0], p[1])
    }
}

/// Unicycle velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    /// Linear velocity (m/s).
    pub v: f64,
    /// Angular velocity (rad/s).
    pub omega: f64,
}

impl Command {
    pub const STOP: Command = Command { v: 0.0, omega: 0.0 };

    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

/// Actuator saturation limits; commands beyond them are clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for CommandLimits {
    fn default() -> Self {
        Self {
            v_max: 0.5,
            omega_max: 2.0,
        }
    }
}

impl CommandLimits {
    pub fn clamp(&self, cmd: Command) -> Command {
        Command {
            v: cmd.v.clamp(-self.v_max, self.v_max),
            omega: cmd.omega.clamp(-self.omega_max, self.omega_max),
        }
    }
}

/// Robot pose plus the twist it is currently executing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub pose: Pose2D,
    pub v: f64,
    pub omega: f64,
}

impl RobotState {
    pub fn at(pose: Pose2D) -> Self {
        Self {
            pose,
            v: 0.0,
            omega: 0.0,
        }
    }
}

/// Left/right wheel surface speeds of a differential-drive base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelSpeeds {
    pub v_l: f64,
    pub v_r: f64,
    /// Wheel separation (m).
    pub separation: f64,
}

/// Forward differential-drive kinematics: `v = (v_r + v_l) / 2`,
/// `omega = (v_r - v_l) / L`.
pub fn unicycle_from_wheels(w: WheelSpeeds) -> Result<Command, WorldError> {
    check_finite(&[w.v_l, w.v_r, w.separation], "wheel speeds")?;
    if w.separation <= 0.0 {
        return Err(WorldError::WheelSeparation(w.separation));
    }
    Ok(Command {
        v: (w.v_r + w.v_l) / 2.0,
        omega: (w.v_r - w.v_l) / w.separation,
    })
}

/// Inverse kinematics: `v_r = v + omega L / 2`, `v_l = v - omega L / 2`.
pub fn wheels_from_unicycle(v: f64, omega: f64, separation: f64) -> Result<WheelSpeeds, WorldError> {
    check_finite(&[v, omega, separation], "unicycle command")?;
    if separation <= 0.0 {
        return Err(WorldError::WheelSeparation(separation));
    }
    let half = omega * separation / 2.0;
    Ok(WheelSpeeds {
        v_l: v - half,
        v_r: v + half,
        separation,
    })
}

/// Advances the robot under a constant twist for `dt` seconds.
///
/// The command is clamped to `limits` first. Integration follows the exact
/// circular arc, written with the half-angle identity
/// `sin(a + d) - sin(a) = 2 cos(a + d/2) sin(d/2)` so that it stays
/// accurate as `omega` approaches zero.
pub fn step(state: &RobotState, command: Command, dt: f64, limits: &CommandLimits) -> Result<RobotState, WorldError> {
    check_finite(&[state.pose.x, state.pose.y, state.pose.psi], "robot state")?;
    check_finite(&[command.v, command.omega], "command")?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(WorldError::TimeStep(dt));
    }
    let Command { v, omega } = limits.clamp(command);
    let Pose2D { x, y, psi } = state.pose;

    let pose = if omega.abs() >= STRAIGHT_LINE_OMEGA {
        let half = 0.5 * omega * dt;
        let chord = v * dt * half.sin() / half;
        let mid = psi + half;
        Pose2D::new(x + chord * mid.cos(), y + chord * mid.sin(), psi + omega * dt)
    } else {
        Pose2D::new(x + v * dt * psi.cos(), y + v * dt * psi.sin(), psi)
    };
    Ok(RobotState { pose, v, omega })
}

/// Integrates `duration` seconds in steps of `dt`, finishing with a partial
/// step when `duration` is not a multiple of `dt`.
pub fn integrate(
    state: &RobotState,
    command: Command,
    duration: f64,
    dt: f64,
    limits: &CommandLimits,
) -> Result<RobotState, WorldError> {
    if !(dt > 0.0) {
        return Err(WorldError::TimeStep(dt));
    }
    let full = (duration / dt).floor() as u64;
    let mut s = *state;
    for _ in 0..full {
        s = step(&s, command, dt, limits)?;
    }
    let rest = duration - full as f64 * dt;
    if rest > 1e-15 {
        s = step(&s, command, rest, limits)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignKind {
    Stop,
    Move,
    Turn,
}

impl SignKind {
    pub const ALL: [SignKind; 3] = [SignKind::Stop, SignKind::Move, SignKind::Turn];

    pub fn name(&self) -> &'static str {
        match self {
            SignKind::Stop => "stop",
            SignKind::Move => "move",
            SignKind::Turn => "turn",
        }
    }
}

impl fmt::Display for SignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sign {
    pub kind: SignKind,
    pub position: Point2,
    pub facing: f64,
}

/// Where a point sits relative to the track centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackLocation {
    pub segment: usize,
    /// Arc length from the first waypoint to the projected point.
    pub station: f64,
    /// Signed perpendicular offset, positive to the left of travel.
    pub offset: f64,
    pub tangent: f64,
}

/// A piecewise-linear lane with signs alongside it. Repeat the first
/// waypoint at the end to close a loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    centerline: Vec<Point2>,
    lane_half_width: f64,
    signs: Vec<Sign>,
    stations: Vec<f64>,
}

impl Track {
    pub fn new(centerline: Vec<Point2>, lane_half_width: f64, signs: Vec<Sign>) -> Result<Self, WorldError> {
        if centerline.len() < 2 {
            return Err(WorldError::Track("need at least two waypoints".into()));
        }
        if !(lane_half_width > 0.0) || !lane_half_width.is_finite() {
            return Err(WorldError::Track(format!(
                "lane_half_width must be positive, got {lane_half_width}"
            )));
        }
        for p in &centerline {
            check_finite(&[p.x, p.y], "waypoint")?;
        }
        let mut stations = Vec::with_capacity(centerline.len());
        stations.push(0.0);
        for (i, w) in centerline.windows(2).enumerate() {
            let len = w[0].distance(w[1]);
            if len == 0.0 {
                return Err(WorldError::Track(format!("waypoints {i} and {} coincide", i + 1)));
            }
            stations.push(stations[i] + len);
        }
        Ok(Self {
            centerline,
            lane_half_width,
            signs,
            stations,
        })
    }

    pub fn centerline(&self) -> &[Point2] {
        &self.centerline
    }

    pub fn lane_half_width(&self) -> f64 {
        self.lane_half_width
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn length(&self) -> f64 {
        *self.stations.last().unwrap()
    }

    pub fn is_closed(&self) -> bool {
        self.centerline.first() == self.centerline.last()
    }

    /// Nearest-segment projection. Equidistant segments resolve to the lower
    /// index.
    pub fn locate(&self, p: Point2) -> TrackLocation {
        let mut best: Option<(f64, TrackLocation)> = None;
        for (i, w) in self.centerline.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let (ex, ey) = (b.x - a.x, b.y - a.y);
            let len2 = ex * ex + ey * ey;
            let t = (((p.x - a.x) * ex + (p.y - a.y) * ey) / len2).clamp(0.0, 1.0);
            let (qx, qy) = (a.x + t * ex, a.y + t * ey);
            let dist = (p.x - qx).hypot(p.y - qy);
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                let len = len2.sqrt();
                let side = (ex * (p.y - a.y) - ey * (p.x - a.x)).signum();
                best = Some((
                    dist,
                    TrackLocation {
                        segment: i,
                        station: self.stations[i] + t * len,
                        offset: if dist == 0.0 { 0.0 } else { side * dist },
                        tangent: ey.atan2(ex),
                    },
                ));
            }
        }
        best.expect("track has at least one segment").1
    }

    /// The two lane boundaries as polylines: `(left, right)` of travel.
    pub fn boundaries(&self) -> (Vec<Point2>, Vec<Point2>) {
        let pts = &self.centerline;
        let n = pts.len();
        let normal = |i: usize| {
            let (a, b) = (pts[i], pts[i + 1]);
            let len = a.distance(b);
            ((a.y - b.y) / len, (b.x - a.x) / len)
        };
        let closed = self.is_closed() && n > 3;
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for i in 0..n {
            let (n_prev, n_next) = match (i, closed) {
                (0, false) => (normal(0), normal(0)),
                (i, false) if i == n - 1 => (normal(n - 2), normal(n - 2)),
                (0, true) => (normal(n - 2), normal(0)),
                (i, true) if i == n - 1 => (normal(n - 2), normal(0)),
                (i, _) => (normal(i - 1), normal(i)),
            };
            // Miter join: offset along the bisector, lengthened so both
            // adjacent edges sit exactly lane_half_width away.
            let (mx, my) = (n_prev.0 + n_next.0, n_prev.1 + n_next.1);
            let m_len = mx.hypot(my);
            let (ox, oy) = if m_len < 1e-9 {
                n_next
            } else {
                let (ux, uy) = (mx / m_len, my / m_len);
                let scale = 1.0 / (ux * n_next.0 + uy * n_next.1).max(0.2);
                (ux * scale, uy * scale)
            };
            let w = self.lane_half_width;
            left.push(Point2::new(pts[i].x + w * ox, pts[i].y + w * oy));
            right.push(Point2::new(pts[i].x - w * ox, pts[i].y - w * oy));
        }
        (left, right)
    }
}

/// Signed lateral offset (positive = left of the path) and heading error
/// relative to the nearest centerline segment.
pub fn cross_track_error(track: &Track, pose: &Pose2D) -> (f64, f64) {
    let loc = track.locate(pose.position());
    (loc.offset, wrap_angle(pose.psi - loc.tangent))
}
