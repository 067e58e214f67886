//! Trace CSV output.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::episode::{DetectionEvent, TraceRecord};

pub const TRACE_COLUMNS: [&str; 19] = [
    "tick",
    "time",
    "x",
    "y",
    "psi",
    "v_cmd",
    "omega_cmd",
    "cross_track",
    "center_offset_px",
    "lane_valid",
    "mode",
    "sign_id",
    "est_x",
    "est_y",
    "est_vx",
    "est_vy",
    "nees",
    "detected_class",
    "detected_class_distance",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace has no records")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros
/// removed, exponent form below `1e-4` and from `1e9`.
pub fn format_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_g9).unwrap_or_default()
}

fn push_row(
    out: &mut String,
    r: &TraceRecord,
    sign: Option<(usize, [f64; 4], Option<f64>)>,
    det: Option<&DetectionEvent>,
) {
    let c = &r.command;
    let _ = write!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},",
        r.tick,
        format_g9(r.time),
        format_g9(r.pose.x),
        format_g9(r.pose.y),
        format_g9(r.pose.psi),
        format_g9(c.v),
        format_g9(c.omega),
        format_g9(r.cross_track),
        opt(r.center_offset),
        u8::from(r.lane_valid),
        r.mode,
    );
    match sign {
        Some((id, m, nees)) => {
            let _ = write!(
                out,
                "{id},{},{},{},{},{},",
                format_g9(m[0]),
                format_g9(m[1]),
                format_g9(m[2]),
                format_g9(m[3]),
                opt(nees)
            );
        }
        None => out.push_str(",,,,,,"),
    }
    if let Some(d) = det {
        let _ = write!(out, "{},{}", d.kind, opt(d.distance));
    } else {
        out.push(',');
    }
    out.push('\n');
}

/// The CSV text for `records`: a header, then one row per tick, or one row
/// per tracked sign on ticks that have any, plus a row for each detection
/// that matched no track.
pub fn trace_csv(records: &[TraceRecord]) -> String {
    let mut out = TRACE_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let unmatched: Vec<&DetectionEvent> = r.detections.iter().filter(|d| d.track.is_none()).collect();
        if r.estimates.is_empty() && unmatched.is_empty() {
            push_row(&mut out, r, None, None);
            continue;
        }
        for e in &r.estimates {
            let det = r.detections.iter().find(|d| d.track == Some(e.track));
            push_row(&mut out, r, Some((e.track, e.mean, e.nees)), det);
        }
        for d in unmatched {
            push_row(&mut out, r, None, Some(d));
        }
    }
    out
}

pub fn write_trace(records: &[TraceRecord], mut w: impl Write) -> io::Result<()> {
    w.write_all(trace_csv(records).as_bytes())
}

pub fn write_trace_csv(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<(), TraceError> {
    if records.is_empty() {
        return Err(TraceError::Empty);
    }
    let path = path.as_ref();
    std::fs::write(path, trace_csv(records)).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::BehaviorMode;
    use crate::harness::episode::SignEstimate;
    use crate::world::{Command, Pose2D, SignKind};

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (100.0, "100"),
            (0.999999999949, "1"),
            (9.9999999996e-5, "0.0001"),
            (1e100, "1e+100"),
            (0.0, "0"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g9(x), want, "{x:e}");
        }
    }

    fn record(tick: u64) -> TraceRecord {
        TraceRecord {
            tick,
            time: tick as f64 * 0.05,
            pose: Pose2D::new(0.1, 0.0, 0.0),
            command: Command::new(0.3, -0.02),
            cross_track: 0.0,
            center_offset: Some(1.5),
            lane_valid: true,
            mode: BehaviorMode::LaneFollowing,
            estimates: vec![],
            detections: vec![],
        }
    }

    #[test]
    fn one_record_two_lines() {
        let text = trace_csv(&[record(0)]);
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n'));
        assert!(text.starts_with("tick,"));
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), TRACE_COLUMNS.len());
        assert_eq!(
            row,
            [
                "0",
                "0",
                "0.1",
                "0",
                "0",
                "0.3",
                "-0.02",
                "0",
                "1.5",
                "1",
                "LaneFollowing",
                "",
                "",
                "",
                "",
                "",
                "",
                "",
                ""
            ]
        );
    }

    #[test]
    fn rows_per_sign() {
        let mut r = record(3);
        r.estimates = vec![
            SignEstimate {
                track: 0,
                kind: SignKind::Stop,
                mean: [1.0, 2.0, 0.0, 0.0],
                cov_trace: 1.0,
                nees: Some(3.5),
            },
            SignEstimate {
                track: 1,
                kind: SignKind::Move,
                mean: [4.0, 2.0, 0.0, 0.0],
                cov_trace: 1.0,
                nees: None,
            },
        ];
        r.detections = vec![DetectionEvent {
            track: Some(1),
            kind: SignKind::Move,
            confidence: 0.9,
            distance: Some(2.25),
            centroid: (10.0, 20.0),
            bearing_only: false,
        }];
        let text = trace_csv(&[r]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",0,1,2,0,0,3.5,,"), "{}", lines[1]);
        assert!(lines[2].ends_with(",1,4,2,0,0,,move,2.25"), "{}", lines[2]);
    }

    #[test]
    fn empty_trace_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_trace_csv(&[], dir.path().join("t.csv")),
            Err(TraceError::Empty)
        ));
        let err = write_trace_csv(&[record(0)], dir.path().join("missing/t.csv")).unwrap_err();
        assert!(err.to_string().contains("missing/t.csv"));
    }
}
