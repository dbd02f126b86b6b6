//! Experiment orchestration: steps drone, controller and detector at 20 Hz
//! with 2 Hz camera frames, streams telemetry, detects lap completion, runs
//! multiple rounds, and emits all artifacts.

use crate::config::{RunConfig, ScenarioSource};
use crate::controller::{controller_step, ControllerState, FollowDirection, Mode};
use crate::detector::{classify_frame, DetectionEvent, FrameTruth};
use crate::drone::{
    odometry_update, sense_ranges, step_kinematics, DroneState, CAMERA_EVERY_TICKS, CONTROL_DT,
};
use crate::mapper::{
    aggregate_rounds, cluster_detections, compute_metrics, match_clusters_to_plates, render_map,
    CoverageReport, DetectionCluster, MetricsReport, PathMap, DEFAULT_CLUSTER_RADIUS,
    DEFAULT_DETECTION_STANDOFF, DEFAULT_MATCH_RADIUS,
};
use crate::rng::Stream;
use crate::telemetry::{DropModel, TelemetryPacket, TelemetryReceiver, TelemetrySender};
use crate::world::{build_test_case, load_scenario, Vec2, World};
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use thiserror::Error;

/// Lap completion: back within this radius of the anchor point.
const LAP_RADIUS: f64 = 0.4;
/// Minimum elapsed time before a lap can close.
const LAP_MIN_TIME: f64 = 10.0;
/// The anchor is captured after this long in steady wall following.
const ANCHOR_SETTLE: f64 = 3.0;
/// Travel directions must agree at least this much (cosine).
const LAP_DIR_COS: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    LapComplete,
    Battery,
    LostWall,
    Collision,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::LapComplete => "LapComplete",
            Termination::Battery => "Battery",
            Termination::LostWall => "LostWall",
            Termination::Collision => "Collision",
        };
        f.write_str(s)
    }
}

/// Independent RNG streams for one round, derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundSeeds {
    pub sensing: u64,
    pub odometry: u64,
    pub detector: u64,
    pub drop: u64,
}

impl RoundSeeds {
    pub fn derive(master: u64, round: u64) -> Self {
        use crate::rng::derive_seed;
        RoundSeeds {
            sensing: derive_seed(master, Stream::Sensing, round),
            odometry: derive_seed(master, Stream::Odometry, round),
            detector: derive_seed(master, Stream::Detector, round),
            drop: derive_seed(master, Stream::Drop, round),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub metrics: MetricsReport,
    pub clusters: Vec<DetectionCluster>,
    pub flight_time: f64,
    pub termination: Termination,
}

/// Everything one round produces.
#[derive(Debug)]
pub struct RoundArtifacts {
    pub result: RoundResult,
    pub events: Vec<DetectionEvent>,
    pub telemetry_bytes: Vec<u8>,
    pub oracle_text: String,
    pub map: PathMap,
    pub svg: String,
    pub true_path: Vec<Vec2>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("scenario: {0}")]
    Scenario(#[from] crate::world::ScenarioError),
    #[error("test case: {0}")]
    TestCase(#[from] crate::world::TestCaseError),
    #[error("config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("telemetry: {0}")]
    Send(#[from] crate::telemetry::transport::SendError),
    #[error("oracle log line {line}: {reason}")]
    OracleParse { line: usize, reason: String },
}

/// Build the world a config names. Jitter for the built-in cases derives from
/// the master seed.
pub fn build_world(cfg: &RunConfig) -> Result<World, RunError> {
    match &cfg.scenario {
        ScenarioSource::Case(id) => {
            let jitter = crate::rng::derive_seed(cfg.master_seed, Stream::Jitter, 0);
            Ok(build_test_case(
                *id,
                crate::world::DEFAULT_BOX_WIDTH,
                crate::world::DEFAULT_BOX_DEPTH,
                jitter,
            )?)
        }
        ScenarioSource::File(path) => {
            let text = fs::read_to_string(path)?;
            Ok(load_scenario(&text)?)
        }
    }
}

fn travel_direction(yaw: f64, follow: FollowDirection) -> Vec2 {
    let a = match follow {
        FollowDirection::Right => yaw - std::f64::consts::FRAC_PI_2,
        FollowDirection::Left => yaw + std::f64::consts::FRAC_PI_2,
    };
    Vec2::new(a.cos(), a.sin())
}

/// Simulate one round. Deterministic for a given (world, cfg, seeds).
pub fn run_round(
    world: &World,
    cfg: &RunConfig,
    seeds: RoundSeeds,
    mut live_sink: Option<&mut dyn Write>,
) -> Result<RoundArtifacts, RunError> {
    let detector = cfg.effective_detector();
    let params = cfg.controller;
    let mut rng_sense = ChaCha8Rng::seed_from_u64(seeds.sensing);
    let mut rng_odo = ChaCha8Rng::seed_from_u64(seeds.odometry);
    let mut rng_det = ChaCha8Rng::seed_from_u64(seeds.detector);

    let mut sender = TelemetrySender::new(Vec::new(), DropModel::new(cfg.drop_probability, seeds.drop, 0));
    let mut state = DroneState::new(world.start_pose);
    let mut cs = ControllerState::new();
    let mut events: Vec<DetectionEvent> = Vec::new();
    let mut oracle_text = String::new();
    let mut true_path: Vec<Vec2> = Vec::new();
    let mut anchor: Option<(Vec2, Vec2, f64)> = None; // position, travel dir, time
    let mut frame_index: u64 = 0;
    let mut tick: u64 = 0;

    let termination = loop {
        if tick % CAMERA_EVERY_TICKS == 0 {
            let ev = classify_frame(world, &state, &detector, frame_index, &mut rng_det);
            append_oracle_line(&mut oracle_text, &ev);
            let pkt = TelemetryPacket::from_event(&ev);
            let delivered = sender.send(&pkt)?;
            if delivered {
                if let Some(sink) = live_sink.as_deref_mut() {
                    // Mirror exactly what went over the primary transport.
                    sink.write_all(&crate::telemetry::encode_packet(&pkt).unwrap())?;
                }
            }
            events.push(ev);
            frame_index += 1;
            true_path.push(state.true_pose.position);
        }

        let scan = sense_ranges(world, &state, &cfg.noise, &mut rng_sense);
        let (next_cs, cmd) = match controller_step(&cs, &params, &scan, CONTROL_DT) {
            Ok(v) => v,
            Err(_) => break Termination::LostWall,
        };
        cs = next_cs;

        match step_kinematics(&state, &cmd, CONTROL_DT, cfg.battery_budget) {
            Ok(s) => state = odometry_update(&s, &cmd, CONTROL_DT, &cfg.noise, &mut rng_odo),
            Err(_) => break Termination::Battery,
        }

        if !world.is_free(state.true_pose.position) {
            break Termination::Collision;
        }

        if cs.mode == Mode::FollowWall {
            let dir = travel_direction(state.true_pose.yaw, params.follow_direction);
            match anchor {
                None => {
                    if state.sim_time - cs.mode_entry_time >= ANCHOR_SETTLE {
                        anchor = Some((state.true_pose.position, dir, state.sim_time));
                    }
                }
                Some((pos, adir, t0)) => {
                    if state.sim_time - t0 >= LAP_MIN_TIME
                        && state.true_pose.position.distance(pos) <= LAP_RADIUS
                        && dir.dot(adir) > LAP_DIR_COS
                    {
                        cs = cs.finish();
                        debug_assert_eq!(cs.mode, Mode::Finished);
                        break Termination::LapComplete;
                    }
                }
            }
        }

        tick += 1;
    };

    let flight_time = state.sim_time;
    sender.flush().ok();
    let telemetry_bytes = sender.into_inner();

    let (map, metrics, clusters, svg) =
        analyze_round(&telemetry_bytes, &oracle_text, Some(world), flight_time)?;

    Ok(RoundArtifacts {
        result: RoundResult { metrics, clusters, flight_time, termination },
        events,
        telemetry_bytes,
        oracle_text,
        map,
        svg,
        true_path,
    })
}

/// Client-side analysis of one round from its raw logs: decode telemetry,
/// join ground truth by frame index, compute metrics, cluster, render.
pub fn analyze_round(
    telemetry_bytes: &[u8],
    oracle_text: &str,
    world: Option<&World>,
    flight_time: f64,
) -> Result<(PathMap, MetricsReport, Vec<DetectionCluster>, String), RunError> {
    let truth = parse_oracle_log(oracle_text)?;
    let truth_by_seq: HashMap<u16, FrameTruth> = truth
        .iter()
        .map(|(idx, t, _)| ((idx % 65536) as u16, *t))
        .collect();

    let mut map = PathMap::new();
    let mut rx = TelemetryReceiver::new(telemetry_bytes);
    while let Some(pkt) = rx.recv()? {
        map.ingest_packet(&pkt);
    }

    let events: Vec<_> = map
        .samples()
        .iter()
        .filter_map(|s| truth_by_seq.get(&s.seq).map(|t| (s.label, *t)))
        .collect();
    let metrics = compute_metrics(&events, flight_time);

    let mut clusters = cluster_detections(map.samples(), DEFAULT_CLUSTER_RADIUS, DEFAULT_DETECTION_STANDOFF);
    if let Some(w) = world {
        match_clusters_to_plates(&mut clusters, w.plates(), DEFAULT_MATCH_RADIUS);
    }
    let svg = render_map(&map, world, &clusters, &truth_by_seq);
    Ok((map, metrics, clusters, svg))
}

fn append_oracle_line(out: &mut String, ev: &DetectionEvent) {
    use std::fmt::Write as _;
    let truth = match ev.truth {
        FrameTruth::PositiveFrame => 1,
        FrameTruth::NegativeFrame => 0,
    };
    let ids = if ev.visible_plate_ids.is_empty() {
        "-".to_string()
    } else {
        ev.visible_plate_ids
            .iter()
            .map(|id| id.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let _ = writeln!(out, "frame {} {} {}", ev.frame_index, truth, ids);
}

/// Parse an oracle log: `frame <index> <truth:0|1> <ids,comma-sep|->` lines.
pub fn parse_oracle_log(text: &str) -> Result<Vec<(u64, FrameTruth, Vec<u32>)>, RunError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 4 || tokens[0] != "frame" {
            return Err(RunError::OracleParse {
                line,
                reason: "expected 'frame <index> <truth> <ids>'".into(),
            });
        }
        let index: u64 = tokens[1].parse().map_err(|_| RunError::OracleParse {
            line,
            reason: format!("bad frame index '{}'", tokens[1]),
        })?;
        let truth = match tokens[2] {
            "0" => FrameTruth::NegativeFrame,
            "1" => FrameTruth::PositiveFrame,
            other => {
                return Err(RunError::OracleParse {
                    line,
                    reason: format!("bad truth flag '{other}'"),
                })
            }
        };
        let ids = if tokens[3] == "-" {
            Vec::new()
        } else {
            let mut ids = Vec::new();
            for part in tokens[3].split(',') {
                ids.push(part.parse().map_err(|_| RunError::OracleParse {
                    line,
                    reason: format!("bad plate id '{part}'"),
                })?);
            }
            ids
        };
        if truth == FrameTruth::PositiveFrame && ids.is_empty() {
            return Err(RunError::OracleParse {
                line,
                reason: "positive frame with no visible plates".into(),
            });
        }
        if truth == FrameTruth::NegativeFrame && !ids.is_empty() {
            return Err(RunError::OracleParse {
                line,
                reason: "negative frame with visible plates".into(),
            });
        }
        out.push((index, truth, ids));
    }
    Ok(out)
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub world: World,
    pub rounds: Vec<RoundArtifacts>,
    pub coverage: CoverageReport,
}

/// Run every round of an experiment in memory.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentOutcome, RunError> {
    run_experiment_streamed(cfg, None)
}

pub fn run_experiment_streamed(
    cfg: &RunConfig,
    mut live_sink: Option<&mut dyn Write>,
) -> Result<ExperimentOutcome, RunError> {
    cfg.validate()?;
    let world = build_world(cfg)?;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for r in 0..cfg.rounds {
        let seeds = RoundSeeds::derive(cfg.master_seed, r as u64);
        let sink = live_sink.as_deref_mut().map(|s| s as &mut dyn Write);
        rounds.push(run_round(&world, cfg, seeds, sink)?);
    }
    let cluster_lists: Vec<Vec<DetectionCluster>> =
        rounds.iter().map(|r| r.result.clusters.clone()).collect();
    let coverage = aggregate_rounds(&cluster_lists, world.plates());
    Ok(ExperimentOutcome { world, rounds, coverage })
}

/// Human-readable summary mirroring the reference result tables:
/// TP FP FN TN P R F1 and flying time per round.
pub fn summary_table(outcome: &ExperimentOutcome) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:>4} {:>4} {:>4} {:>4} {:>7} {:>7} {:>7} {:>8}  {}",
        "round", "TP", "FP", "FN", "TN", "P", "R", "F1", "time_s", "termination"
    );
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    for (i, r) in outcome.rounds.iter().enumerate() {
        let m = &r.result.metrics;
        let _ = writeln!(
            s,
            "{:>5} {:>4} {:>4} {:>4} {:>4} {:>7} {:>7} {:>7} {:>8.2}  {}",
            i + 1,
            m.tp,
            m.fp,
            m.fn_,
            m.tn,
            fmt(m.precision),
            fmt(m.recall),
            fmt(m.f1),
            r.result.flight_time,
            r.result.termination
        );
    }
    s.push_str(&outcome.coverage.to_text());
    s
}

/// Write every artifact of an experiment into `dir` (created if absent).
pub fn write_artifacts(outcome: &ExperimentOutcome, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("world.scenario"), outcome.world.to_scenario_string())?;
    let mut metrics_text = String::new();
    for (i, round) in outcome.rounds.iter().enumerate() {
        let r = i + 1;
        fs::write(dir.join(format!("telemetry_r{r}.bin")), &round.telemetry_bytes)?;
        fs::write(dir.join(format!("oracle_r{r}.log")), &round.oracle_text)?;
        fs::write(dir.join(format!("map_r{r}.svg")), &round.svg)?;
        fs::write(
            dir.join(format!("round_r{r}.meta")),
            format!(
                "flight_s {:.2}\ntermination {}\n",
                round.result.flight_time, round.result.termination
            ),
        )?;
        metrics_text.push_str(&round.result.metrics.to_line(r));
        metrics_text.push('\n');
    }
    fs::write(dir.join("metrics.txt"), metrics_text)?;
    fs::write(dir.join("coverage.txt"), outcome.coverage.to_text())?;
    fs::write(dir.join("summary.txt"), summary_table(outcome))?;
    Ok(())
}

/// Rebuild metrics, coverage, and maps from the logs in `dir`, overwriting
/// the derived files. Returns the regenerated summary.
pub fn regenerate_report(dir: &Path) -> Result<String, RunError> {
    let world = load_scenario(&fs::read_to_string(dir.join("world.scenario"))?)?;
    let mut metrics_text = String::new();
    let mut cluster_lists = Vec::new();
    let mut summaries = Vec::new();
    let mut r = 1usize;
    loop {
        let telemetry_path = dir.join(format!("telemetry_r{r}.bin"));
        if !telemetry_path.exists() {
            break;
        }
        let telemetry_bytes = fs::read(&telemetry_path)?;
        let oracle_text = fs::read_to_string(dir.join(format!("oracle_r{r}.log")))?;
        let meta = fs::read_to_string(dir.join(format!("round_r{r}.meta")))?;
        let flight_time = parse_meta_flight(&meta).ok_or_else(|| RunError::OracleParse {
            line: 0,
            reason: format!("round_r{r}.meta missing flight_s"),
        })?;
        let (_map, metrics, clusters, svg) =
            analyze_round(&telemetry_bytes, &oracle_text, Some(&world), flight_time)?;
        fs::write(dir.join(format!("map_r{r}.svg")), &svg)?;
        metrics_text.push_str(&metrics.to_line(r));
        metrics_text.push('\n');
        summaries.push((metrics, meta));
        cluster_lists.push(clusters);
        r += 1;
    }
    if cluster_lists.is_empty() {
        return Err(RunError::OracleParse { line: 0, reason: "no rounds found in directory".into() });
    }
    let coverage = aggregate_rounds(&cluster_lists, world.plates());
    fs::write(dir.join("metrics.txt"), &metrics_text)?;
    fs::write(dir.join("coverage.txt"), coverage.to_text())?;
    let mut out = metrics_text;
    out.push_str(&coverage.to_text());
    Ok(out)
}

fn parse_meta_flight(meta: &str) -> Option<f64> {
    for line in meta.lines() {
        let mut it = line.split_whitespace();
        if it.next() == Some("flight_s") {
            return it.next()?.parse().ok();
        }
    }
    None
}
