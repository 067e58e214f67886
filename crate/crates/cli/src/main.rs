use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use lanesim::harness::frames::dump_frame;
use lanesim::harness::{load_scenario, run_episode_with, write_trace_csv, FilterKind, ScenarioConfig, Summary};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "lanesim", version, about = "Deterministic lane-following simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its trace and summary.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        filter: Option<FilterKind>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Write the camera frame and lane masks of every tick.
        #[arg(long)]
        dump_frames: bool,
    },
    /// Run one episode per seed in an inclusive range, in parallel.
    Batch {
        #[arg(long)]
        scenario: PathBuf,
        /// Inclusive range such as `0..99`.
        #[arg(long, value_parser = parse_seeds)]
        seeds: RangeInclusive<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Parse and validate a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn parse_seeds(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad start `{a}`: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad end `{b}`: {e}"))?;
    if a > b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..=b)
}

fn write_outputs(dir: &Path, cfg: &ScenarioConfig, dump_frames: bool) -> Result<Summary> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let frames = dir.join("frames");
    if dump_frames {
        fs::create_dir_all(&frames).with_context(|| format!("cannot create {}", frames.display()))?;
    }
    let mut frame_error = None;
    let episode = run_episode_with(cfg, |view| {
        if dump_frames && frame_error.is_none() {
            frame_error = dump_frame(&frames, view).err();
        }
    })?;
    if let Some(e) = frame_error {
        return Err(e).with_context(|| format!("cannot write frames to {}", frames.display()));
    }
    write_trace_csv(&episode.records, dir.join("trace.csv"))?;
    let summary_path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&episode.summary)?;
    fs::write(&summary_path, json + "\n").with_context(|| format!("cannot write {}", summary_path.display()))?;
    Ok(episode.summary)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            output,
            seed,
            filter,
            duration,
            dt,
            dump_frames,
        } => {
            let mut cfg = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                cfg.run.seed = seed;
            }
            if let Some(kind) = filter {
                cfg.filter.kind = kind;
            }
            if let Some(d) = duration {
                cfg.run.duration = d;
            }
            if let Some(dt) = dt {
                cfg.run.dt = dt;
            }
            cfg.validate()?;
            let s = write_outputs(&output, &cfg, dump_frames)?;
            println!(
                "ticks={} completed={} cross_track_rmse={:.4} max_abs_cross_track={:.4} transitions={}",
                s.ticks,
                s.completed,
                s.cross_track_rmse,
                s.max_abs_cross_track,
                s.transitions.len()
            );
        }
        Command::Batch {
            scenario,
            seeds,
            output,
        } => {
            let cfg = load_scenario(&scenario)?;
            fs::create_dir_all(&output).with_context(|| format!("cannot create {}", output.display()))?;
            let results: Vec<(u64, Result<Summary>)> = seeds
                .into_par_iter()
                .map(|seed| {
                    let mut c = cfg.clone();
                    c.run.seed = seed;
                    (seed, write_outputs(&output.join(format!("seed_{seed}")), &c, false))
                })
                .collect();
            let mut summaries = Vec::new();
            for (seed, r) in results {
                let s = r.with_context(|| format!("seed {seed}"))?;
                summaries.push(serde_json::json!({ "seed": seed, "summary": s }));
            }
            let path = output.join("batch.json");
            fs::write(&path, serde_json::to_string_pretty(&summaries)? + "\n")
                .with_context(|| format!("cannot write {}", path.display()))?;
            println!("ran {} episodes", summaries.len());
        }
        Command::Validate { scenario } => {
            load_scenario(&scenario)?;
            println!("{}: ok", scenario.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
