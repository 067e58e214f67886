use std::path::PathBuf;
use std::time::Instant;

use lanesim::harness::frames::dump_frame;
use lanesim::harness::{
    format_g9, load_scenario, parse_scenario, run_episode, run_episode_with, write_trace_csv, FilterKind,
    ScenarioConfig, TRACE_COLUMNS,
};

fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn shipped_scenarios_validate() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn unknown_key_is_reported_with_its_path() {
    let err = parse_scenario(r#"{"track": {"waypoints": [[0, 0], [5, 0]]}, "run": {"dtt": 0.1}}"#).unwrap_err();
    assert!(err.to_string().contains("dtt"), "{err}");
    assert_eq!(err.key(), Some("run.dtt"));
}

#[test]
fn trace_csv_round_trips() {
    let mut cfg = scenario("signs.json");
    cfg.run.duration = 12.0;
    let episode = run_episode(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    write_trace_csv(&episode.records, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TRACE_COLUMNS.join(","));

    let mut last_tick = None;
    let mut rows = 0;
    let mut with_sign = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), TRACE_COLUMNS.len(), "{line}");
        let tick: u64 = fields[0].parse().unwrap();
        assert!(last_tick.is_none_or(|t| tick == t || tick == t + 1), "{line}");
        last_tick = Some(tick);
        let record = &episode.records[tick as usize];
        assert_eq!(fields[1], format_g9(record.time));
        assert_eq!(fields[2], format_g9(record.pose.x));
        assert_eq!(fields[9], if record.lane_valid { "1" } else { "0" });
        assert_eq!(fields[10], record.mode.name());
        // Every float field is already in canonical form.
        for f in fields.iter().skip(1).filter(|f| !f.is_empty()) {
            if let Ok(x) = f.parse::<f64>() {
                if f.contains('.') || f.contains('e') {
                    assert_eq!(format_g9(x), *f);
                }
            }
        }
        if !fields[11].is_empty() {
            with_sign += 1;
        }
        rows += 1;
    }
    assert_eq!(last_tick, Some(episode.records.len() as u64 - 1));
    assert!(rows >= episode.records.len());
    assert!(with_sign > 0);
}

#[test]
fn ukf_tracks_signs_on_noisy_curve() {
    let mut cfg = scenario("s_curve_noisy.json");
    cfg.filter.kind = FilterKind::Ukf;
    let s = run_episode(&cfg).unwrap().summary;
    assert!(s.completed && !s.left_lane);
    assert_eq!(s.sign_errors.len(), 2, "{:?}", s.sign_errors);
    for e in &s.sign_errors {
        assert!(e.rmse < 0.3, "{e:?}");
    }
}

#[test]
fn filters_agree_closely_on_signs_scenario() {
    let ekf = run_episode(&scenario("signs.json")).unwrap().summary;
    let mut cfg = scenario("signs.json");
    cfg.filter.kind = FilterKind::Ukf;
    let ukf = run_episode(&cfg).unwrap().summary;
    let modes = |s: &lanesim::harness::Summary| s.transitions.iter().map(|t| (t.from, t.to)).collect::<Vec<_>>();
    assert_eq!(modes(&ekf), modes(&ukf));
}

#[test]
fn minute_of_simulation_runs_in_real_time() {
    let mut cfg = scenario("s_curve_noisy.json");
    cfg.run.duration = 60.0;
    cfg.run.dt = 0.05;
    cfg.track.waypoints.push([20.0, 1.5]);
    let t0 = Instant::now();
    let episode = run_episode(&cfg).unwrap();
    let wall = t0.elapsed().as_secs_f64();
    assert!(episode.records.len() >= 1000);
    assert!(wall < 60.0, "{wall:.1} s wall for {} ticks", episode.records.len());
}

#[test]
fn frames_are_dumped_per_tick() {
    let mut cfg = scenario("straight.json");
    cfg.run.duration = 0.5;
    let dir = tempfile::tempdir().unwrap();
    let mut err = None;
    let episode = run_episode_with(&cfg, |view| {
        if let Err(e) = dump_frame(dir.path(), view) {
            err.get_or_insert(e);
        }
    })
    .unwrap();
    assert!(err.is_none());
    let n = episode.records.len();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3 * n);
    let ppm = std::fs::read(dir.path().join("camera_00000.ppm")).unwrap();
    let header = format!("P6\n{} {}\n255\n", cfg.camera.width, cfg.camera.height);
    assert!(ppm.starts_with(header.as_bytes()));
    assert_eq!(ppm.len(), header.len() + 3 * cfg.camera.width * cfg.camera.height);
    let pgm = std::fs::read(dir.path().join(format!("roi_{:05}.pgm", n - 1))).unwrap();
    assert!(pgm.starts_with(format!("P5\n{} {}\n255\n", cfg.camera.width, cfg.camera.height).as_bytes()));
}
