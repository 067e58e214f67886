//! The closed-loop tick loop.
//!
//! Each tick: render the camera, run the lane pipeline, compute the PID lane
//! command, simulate detections and depth readings, predict and update the
//! sign filters, let the behavior machine override the command, then step the
//! robot.

use nalgebra::{Matrix1, Vector1, Vector4};
use rand::Rng;
use serde::Serialize;

use super::config::{FilterConfig, FilterKind, ScenarioConfig, ScenarioError};
use super::{substream, Substream};
use crate::control::{behavior_step, BehaviorMode, BehaviorState, LaneController, SignObservation};
use crate::estimation::{
    ekf_update, init_from_first_measurement, predict_cv, ukf_update, white_acceleration_q, BearingOnlyModel,
    FilterError, GaussianBelief, MeasurementModel, RangeBearingModel,
};
use crate::sensors::{
    passes_confidence_gate, render_camera, sense_range_bearing, simulate_detector, RangeBearing, RasterImage,
    MAX_RANGE, MIN_RANGE,
};
use crate::vision::{process_frame, FrameAnalysis};
use crate::world::{cross_track_error, step, Command, Point2, Pose2D, RobotState, SignKind};

/// Filter state of one tracked sign at the end of a tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignEstimate {
    pub track: usize,
    pub kind: SignKind,
    /// `[x, y, vx, vy]`.
    pub mean: [f64; 4],
    pub cov_trace: f64,
    pub nees: Option<f64>,
}

/// A detection that cleared the confidence gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    /// Track the detection was associated with, if any.
    pub track: Option<usize>,
    pub kind: SignKind,
    pub confidence: f64,
    /// Estimated Euclidean distance from the robot to the sign.
    pub distance: Option<f64>,
    /// Bounding-box centroid in pixels.
    pub centroid: (f64, f64),
    /// True when no depth reading was available.
    pub bearing_only: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub tick: u64,
    pub time: f64,
    /// True pose at the start of the tick.
    pub pose: Pose2D,
    /// Command applied over the tick, after saturation.
    pub command: Command,
    pub cross_track: f64,
    pub center_offset: Option<f64>,
    pub lane_valid: bool,
    pub mode: BehaviorMode,
    pub estimates: Vec<SignEstimate>,
    pub detections: Vec<DetectionEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionRecord {
    pub tick: u64,
    pub time: f64,
    pub from: BehaviorMode,
    pub to: BehaviorMode,
    pub track: Option<usize>,
}

/// Consecutive ticks spent in Stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppedInterval {
    pub start_tick: u64,
    pub end_tick: u64,
    /// Largest applied forward speed during the interval.
    pub max_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignError {
    pub track: usize,
    pub kind: SignKind,
    /// Index of the ground-truth sign in the scenario.
    pub sign_index: usize,
    pub rmse: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub ticks: u64,
    pub cross_track_rmse: f64,
    pub max_abs_cross_track: f64,
    pub sign_errors: Vec<SignError>,
    pub mean_nees: Option<f64>,
    /// Reached the end of an open track, or ran the full duration on a
    /// closed one, without leaving the lane.
    pub completed: bool,
    pub left_lane: bool,
    pub transitions: Vec<TransitionRecord>,
    pub stopped_intervals: Vec<StoppedInterval>,
    /// Longest run of consecutive ticks without a valid lane observation.
    pub max_lane_dropout: u64,
    pub emitted_detections: u64,
    pub min_emitted_confidence: Option<f64>,
    /// Emitted detections with confidence at or below the gate.
    pub gate_violations: u64,
    pub range_readings: u64,
    pub out_of_envelope_readings: u64,
    pub bearing_only_updates: u64,
    /// Measurement updates refused by the filter.
    pub update_skips: u64,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub records: Vec<TraceRecord>,
    pub summary: Summary,
}

/// What the observer passed to [`run_episode_with`] sees each tick.
pub struct FrameView<'a> {
    pub tick: u64,
    pub camera: &'a RasterImage,
    pub analysis: &'a FrameAnalysis,
}

struct SignTrack {
    id: usize,
    kind: SignKind,
    sign_index: usize,
    belief: GaussianBelief<4>,
    sq_error: f64,
    samples: usize,
}

impl SignTrack {
    fn position(&self) -> Point2 {
        Point2::new(self.belief.mean[0], self.belief.mean[1])
    }
}

enum Reading {
    RangeBearing(RangeBearing),
    Bearing(f64),
}

fn filter_update<const M: usize>(
    cfg: &FilterConfig,
    belief: &GaussianBelief<4>,
    z: &nalgebra::SVector<f64, M>,
    model: &impl MeasurementModel<4, M>,
    r: &nalgebra::SMatrix<f64, M, M>,
) -> Result<GaussianBelief<4>, FilterError> {
    match cfg.kind {
        FilterKind::Ekf => ekf_update(belief, z, model, r),
        FilterKind::Ukf => ukf_update(belief, z, model, r, &cfg.unscented),
    }
}

fn update_with(
    cfg: &FilterConfig,
    belief: &GaussianBelief<4>,
    reading: &Reading,
    robot: Pose2D,
) -> Result<GaussianBelief<4>, FilterError> {
    match reading {
        Reading::RangeBearing(z) => filter_update(
            cfg,
            belief,
            &RangeBearingModel::measurement(z),
            &RangeBearingModel { robot },
            &RangeBearingModel::noise(cfg.sigma_range, cfg.sigma_bearing),
        ),
        Reading::Bearing(b) => filter_update(
            cfg,
            belief,
            &Vector1::new(*b),
            &BearingOnlyModel { robot },
            &Matrix1::new(cfg.sigma_bearing * cfg.sigma_bearing),
        ),
    }
}

/// Runs one episode. The configuration is validated first.
pub fn run_episode(cfg: &ScenarioConfig) -> Result<Episode, ScenarioError> {
    run_episode_with(cfg, |_| {})
}

/// [`run_episode`] with a per-tick view of the camera frame and the lane
/// pipeline's intermediate products.
pub fn run_episode_with(cfg: &ScenarioConfig, mut on_frame: impl FnMut(&FrameView)) -> Result<Episode, ScenarioError> {
    cfg.validate()?;
    let track = cfg.build_track()?;
    let signs = track.signs().to_vec();
    let cam = cfg.camera;
    let limits = cfg.robot.limits();
    let dt = cfg.run.dt;
    let detector = cfg.sensors.detector();
    let noise = cfg.sensors.noise();
    let filter = cfg.filter;
    let q = white_acceleration_q(filter.sigma_accel, dt);

    let mut sensor_rng = substream(cfg.run.seed, Substream::SensorNoise);
    let mut detection_rng = substream(cfg.run.seed, Substream::Detection);

    let mut state = RobotState::at(cfg.start_pose());
    let mut controller = LaneController::new(cfg.control.steering, cfg.control.speed, cfg.control.base_speed);
    let mut behavior = BehaviorState::default();
    let mut tracks: Vec<SignTrack> = Vec::new();

    let n_ticks = ((cfg.run.duration / dt) - 1e-9).ceil().max(1.0) as u64;
    let end_station = track.length() - cfg.run.end_margin;

    let mut records = Vec::new();
    let mut s = Summary {
        ticks: 0,
        cross_track_rmse: 0.0,
        max_abs_cross_track: 0.0,
        sign_errors: Vec::new(),
        mean_nees: None,
        completed: false,
        left_lane: false,
        transitions: Vec::new(),
        stopped_intervals: Vec::new(),
        max_lane_dropout: 0,
        emitted_detections: 0,
        min_emitted_confidence: None,
        gate_violations: 0,
        range_readings: 0,
        out_of_envelope_readings: 0,
        bearing_only_updates: 0,
        update_skips: 0,
    };
    let mut sq_cte = 0.0;
    let mut nees_sum = 0.0;
    let mut nees_count = 0u64;
    let mut dropout = 0u64;
    let mut reached_end = false;

    for tick in 0..n_ticks {
        let pose = state.pose;
        if !track.is_closed() && track.locate(pose.position()).station >= end_station {
            reached_end = true;
            break;
        }
        let time = tick as f64 * dt;

        let image = render_camera(&track, &pose, &cam);
        let analysis = process_frame(&image, &cfg.vision).map_err(|e| ScenarioError::Invalid {
            key: "vision".into(),
            message: e.to_string(),
        })?;
        on_frame(&FrameView {
            tick,
            camera: &image,
            analysis: &analysis,
        });
        let obs = analysis.observation;
        let nominal = controller
            .command(&obs, cam.width, state.v, dt)
            .unwrap_or_else(|_| controller.last());

        // Detections pass the gate before anything downstream sees them.
        let mut readings = Vec::new();
        for det in simulate_detector(&pose, &signs, &cam, &detector, &mut detection_rng) {
            if !passes_confidence_gate(det.confidence) {
                continue;
            }
            s.emitted_detections += 1;
            if det.confidence <= crate::sensors::CONFIDENCE_GATE {
                s.gate_violations += 1;
            }
            s.min_emitted_confidence = Some(
                s.min_emitted_confidence
                    .map_or(det.confidence, |m| m.min(det.confidence)),
            );

            let dropped = sensor_rng.random::<f64>() < cfg.sensors.range_dropout;
            let reading = sense_range_bearing(
                &pose,
                &signs[det.sign_index],
                noise,
                cam.horizontal_fov,
                &mut sensor_rng,
            );
            let reading = if dropped {
                Some(Reading::Bearing(cam.bearing_for_column(det.centroid.0)))
            } else {
                reading.map(|z| {
                    s.range_readings += 1;
                    if !(MIN_RANGE..=MAX_RANGE).contains(&z.range) {
                        s.out_of_envelope_readings += 1;
                    }
                    Reading::RangeBearing(z)
                })
            };
            readings.push((det, reading));
        }

        for t in &mut tracks {
            if let Ok(b) = predict_cv(&t.belief, dt, &q) {
                t.belief = b;
            }
        }

        let mut events = Vec::new();
        for (det, reading) in readings {
            let mut event = DetectionEvent {
                track: None,
                kind: det.kind,
                confidence: det.confidence,
                distance: None,
                centroid: det.centroid,
                bearing_only: !matches!(reading, Some(Reading::RangeBearing(_))),
            };
            let Some(reading) = reading else {
                events.push(event);
                continue;
            };
            let candidate = |t: &SignTrack| -> Point2 {
                let (r, b) = match &reading {
                    Reading::RangeBearing(z) => (z.range, z.bearing),
                    Reading::Bearing(b) => (pose.position().distance(t.position()), *b),
                };
                pose.to_world(r * b.cos(), r * b.sin())
            };
            let nearest = tracks
                .iter()
                .enumerate()
                .filter(|(_, t)| t.kind == det.kind)
                .map(|(i, t)| (i, candidate(t).distance(t.position())))
                .filter(|(_, d)| *d < filter.association_gate)
                .min_by(|a, b| a.1.total_cmp(&b.1));

            match (nearest, &reading) {
                (Some((i, _)), _) => match update_with(&filter, &tracks[i].belief, &reading, pose) {
                    Ok(b) => {
                        tracks[i].belief = b;
                        if matches!(reading, Reading::Bearing(_)) {
                            s.bearing_only_updates += 1;
                        }
                        event.track = Some(tracks[i].id);
                    }
                    Err(_) => {
                        s.update_skips += 1;
                        event.track = Some(tracks[i].id);
                    }
                },
                (None, Reading::RangeBearing(z)) => {
                    let id = tracks.len();
                    tracks.push(SignTrack {
                        id,
                        kind: det.kind,
                        sign_index: det.sign_index,
                        belief: init_from_first_measurement(z, &pose, &filter.init),
                        sq_error: 0.0,
                        samples: 0,
                    });
                    event.track = Some(id);
                }
                (None, Reading::Bearing(_)) => {}
            }
            if let Some(id) = event.track {
                event.distance = Some(pose.position().distance(tracks[id].position()));
            }
            events.push(event);
        }

        let mut estimates = Vec::with_capacity(tracks.len());
        for t in &mut tracks {
            let truth = signs[t.sign_index].position;
            let e = t.position().distance(truth);
            t.sq_error += e * e;
            t.samples += 1;
            let nees = t.belief.nees(&Vector4::new(truth.x, truth.y, 0.0, 0.0)).ok();
            if let Some(n) = nees {
                nees_sum += n;
                nees_count += 1;
            }
            estimates.push(SignEstimate {
                track: t.id,
                kind: t.kind,
                mean: [t.belief.mean[0], t.belief.mean[1], t.belief.mean[2], t.belief.mean[3]],
                cov_trace: t.belief.cov.trace(),
                nees,
            });
        }

        let sightings: Vec<SignObservation> = events
            .iter()
            .filter_map(|e| {
                Some(SignObservation {
                    track: e.track?,
                    kind: e.kind,
                    distance: e.distance?,
                })
            })
            .collect();
        let (next, command, transition) = behavior_step(&cfg.control.behavior, &behavior, &sightings, dt, nominal);
        if let Some(tr) = transition {
            s.transitions.push(TransitionRecord {
                tick,
                time,
                from: tr.from,
                to: tr.to,
                track: tr.track,
            });
            if tr.to == BehaviorMode::LaneFollowing {
                controller.steering.reset();
            }
        }
        behavior = next;
        let command = limits.clamp(command);

        let (cte, _) = cross_track_error(&track, &pose);
        sq_cte += cte * cte;
        s.max_abs_cross_track = s.max_abs_cross_track.max(cte.abs());
        if cte.abs() > track.lane_half_width() {
            s.left_lane = true;
        }
        if obs.is_valid() {
            dropout = 0;
        } else {
            dropout += 1;
            s.max_lane_dropout = s.max_lane_dropout.max(dropout);
        }
        if behavior.mode == BehaviorMode::Stopped {
            match s.stopped_intervals.last_mut() {
                Some(iv) if iv.end_tick + 1 == tick => {
                    iv.end_tick = tick;
                    iv.max_speed = iv.max_speed.max(command.v.abs());
                }
                _ => s.stopped_intervals.push(StoppedInterval {
                    start_tick: tick,
                    end_tick: tick,
                    max_speed: command.v.abs(),
                }),
            }
        }

        records.push(TraceRecord {
            tick,
            time,
            pose,
            command,
            cross_track: cte,
            center_offset: obs.center_offset,
            lane_valid: obs.is_valid(),
            mode: behavior.mode,
            estimates,
            detections: events,
        });

        state = step(&state, command, dt, &limits).map_err(|e| ScenarioError::Invalid {
            key: "robot".into(),
            message: e.to_string(),
        })?;
    }

    s.ticks = records.len() as u64;
    if !records.is_empty() {
        s.cross_track_rmse = (sq_cte / records.len() as f64).sqrt();
    }
    s.mean_nees = (nees_count > 0).then(|| nees_sum / nees_count as f64);
    s.sign_errors = tracks
        .iter()
        .map(|t| SignError {
            track: t.id,
            kind: t.kind,
            sign_index: t.sign_index,
            rmse: (t.sq_error / t.samples.max(1) as f64).sqrt(),
            samples: t.samples,
        })
        .collect();
    s.completed = !s.left_lane && (reached_end || track.is_closed());
    Ok(Episode { records, summary: s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::parse_scenario;

    const STRAIGHT: &str = r#"{"track": {"waypoints": [[0, 0], [6, 0]]}, "run": {"duration": 30}}"#;

    const STOP: &str = r#"{
        "track": {"waypoints": [[0, 0], [6, 0]], "signs": [{"kind": "stop", "position": [2, -0.35]}]},
        "sensors": {"sigma_range": 0.02, "sigma_bearing": 0.01},
        "run": {"duration": 20, "seed": 3}
    }"#;

    #[test]
    fn straight_track_stays_centred() {
        let ep = run_episode(&parse_scenario(STRAIGHT).unwrap()).unwrap();
        assert!(ep.summary.completed);
        assert!(
            ep.summary.max_abs_cross_track <= 0.05,
            "{}",
            ep.summary.max_abs_cross_track
        );
        let last = ep.records.last().unwrap();
        assert!(last.pose.x > 5.0);
        assert!(ep.records.windows(2).all(|w| w[1].tick == w[0].tick + 1));
    }

    #[test]
    fn stop_sign_halts_robot() {
        let ep = run_episode(&parse_scenario(STOP).unwrap()).unwrap();
        let s = &ep.summary;
        assert_eq!(s.stopped_intervals.len(), 1, "{:?}", s.transitions);
        assert_eq!(s.stopped_intervals[0].max_speed, 0.0);
        // Nothing releases it.
        assert_eq!(ep.records.last().unwrap().mode, BehaviorMode::Stopped);
        assert!(!s.completed);
        assert_eq!(s.sign_errors.len(), 1);
        assert!(s.sign_errors[0].rmse < 0.1);
    }

    #[test]
    fn same_seed_same_records() {
        let cfg = parse_scenario(STOP).unwrap();
        let a = run_episode(&cfg).unwrap();
        let b = run_episode(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn frame_observer_sees_every_tick() {
        let cfg = parse_scenario(STRAIGHT).unwrap();
        let mut n = 0;
        let ep = run_episode_with(&cfg, |f| {
            assert_eq!(f.tick, n);
            assert_eq!(f.camera.width(), 160);
            n += 1;
        })
        .unwrap();
        assert_eq!(n, ep.records.len() as u64);
    }
}
