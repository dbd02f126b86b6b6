//! Remote-client logic: path reconstruction, detection clustering, metrics,
//! cross-round coverage, and the 2D map rendering.
//!
//! The client only ever sees estimated poses and labels from the wire; ground
//! truth joins the log afterwards through the simulator's oracle file, keyed
//! by frame index.

mod svg;

pub use svg::render_map;

use crate::detector::{FrameTruth, Label};
use crate::telemetry::TelemetryPacket;
use crate::world::{PlateTarget, Vec2};
use std::collections::BTreeMap;

/// One ingested telemetry sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub seq: u16,
    pub timestamp_ms: u32,
    pub position: Vec2,
    pub yaw: f64,
    pub label: Label,
    pub confidence: f64,
}

/// Time-ordered reconstruction of one round's telemetry stream.
#[derive(Debug, Clone, Default)]
pub struct PathMap {
    samples: Vec<PathSample>,
    seen: Vec<bool>,
    pub duplicates: u64,
    pub seq_gaps: u64,
    pub out_of_order: u64,
}

impl PathMap {
    pub fn new() -> Self {
        PathMap { seen: vec![false; 65536], ..PathMap::default() }
    }

    /// Append a decoded packet. Duplicates are ignored (counted); gaps after
    /// drops and out-of-order arrivals are kept but flagged.
    pub fn ingest_packet(&mut self, pkt: &TelemetryPacket) {
        if self.seen[pkt.seq as usize] {
            self.duplicates += 1;
            return;
        }
        self.seen[pkt.seq as usize] = true;
        if let Some(last) = self.samples.last() {
            if pkt.seq as u32 > last.seq as u32 + 1 {
                self.seq_gaps += 1;
            } else if pkt.seq < last.seq {
                self.out_of_order += 1;
            }
        }
        let (x, y) = pkt.position_m();
        self.samples.push(PathSample {
            seq: pkt.seq,
            timestamp_ms: pkt.timestamp_ms,
            position: Vec2::new(x, y),
            yaw: pkt.yaw_rad(),
            label: pkt.label_enum(),
            confidence: pkt.confidence(),
        });
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Classification metrics for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    /// `None` renders as "n/a": undefined, not zero.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub flight_time: f64,
    pub frames: u64,
}

impl MetricsReport {
    /// Machine-readable line: `metrics <round> TP FP FN TN P R F1 flight_s`.
    pub fn to_line(&self, round: usize) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => "n/a".to_string(),
        };
        format!(
            "metrics {} {} {} {} {} {} {} {} {:.2}",
            round,
            self.tp,
            self.fp,
            self.fn_,
            self.tn,
            fmt(self.precision),
            fmt(self.recall),
            fmt(self.f1),
            self.flight_time
        )
    }
}

/// Compute TP/FP/FN/TN and P/R/F1 from truth-joined events.
pub fn compute_metrics(events: &[(Label, FrameTruth)], flight_time: f64) -> MetricsReport {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    let mut tn = 0u64;
    for &(label, truth) in events {
        match (label, truth) {
            (Label::Plate, FrameTruth::PositiveFrame) => tp += 1,
            (Label::Plate, FrameTruth::NegativeFrame) => fp += 1,
            (Label::Background, FrameTruth::PositiveFrame) => fn_ += 1,
            (Label::Background, FrameTruth::NegativeFrame) => tn += 1,
        }
    }
    let ratio = |num: u64, den: u64| {
        if den > 0 {
            Some(num as f64 / den as f64)
        } else {
            None
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0), // P = R = 0
        _ => None,
    };
    MetricsReport {
        tp,
        fp,
        fn_,
        tn,
        precision,
        recall,
        f1,
        flight_time,
        frames: tp + fp + fn_ + tn,
    }
}

/// Spatially grouped plate detections standing in for one physical object.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCluster {
    pub id: u32,
    /// Anchor position of the founding detection; every member lies within
    /// `cluster_radius` of it.
    pub centroid: Vec2,
    pub member_positions: Vec<Vec2>,
    pub matched_plate: Option<u32>,
}

pub const DEFAULT_CLUSTER_RADIUS: f64 = 0.35;
pub const DEFAULT_MATCH_RADIUS: f64 = 0.5;
/// Nominal camera-to-wall standoff: detections are projected this far along
/// the reported heading, since the camera faces the followed surface.
pub const DEFAULT_DETECTION_STANDOFF: f64 = 0.6;

/// Greedy online clustering in time order: each Plate-labeled sample joins
/// the nearest cluster within `cluster_radius` or founds a new one.
///
/// Positions are the estimated pose projected `standoff` meters along the
/// reported heading, putting the cluster on the observed surface rather than
/// on the flight line; pass 0.0 to cluster raw positions.
pub fn cluster_detections(
    samples: &[PathSample],
    cluster_radius: f64,
    standoff: f64,
) -> Vec<DetectionCluster> {
    debug_assert!(cluster_radius > 0.0);
    let mut clusters: Vec<DetectionCluster> = Vec::new();
    for s in samples.iter().filter(|s| s.label == Label::Plate) {
        let pos = s.position + Vec2::new(s.yaw.cos(), s.yaw.sin()) * standoff;
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in clusters.iter().enumerate() {
            let d = c.centroid.distance(pos);
            if d <= cluster_radius && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, _)) => clusters[i].member_positions.push(pos),
            None => clusters.push(DetectionCluster {
                id: clusters.len() as u32,
                centroid: pos,
                member_positions: vec![pos],
                matched_plate: None,
            }),
        }
    }
    clusters
}

/// Match clusters to ground-truth plates: greedy by ascending distance, each
/// plate and each cluster used at most once, within `match_radius`.
pub fn match_clusters_to_plates(
    clusters: &mut [DetectionCluster],
    plates: &[PlateTarget],
    match_radius: f64,
) {
    let mut pairs: Vec<(f64, usize, u32)> = Vec::new();
    for (ci, c) in clusters.iter().enumerate() {
        for p in plates {
            let d = c.centroid.distance(p.center);
            if d <= match_radius {
                pairs.push((d, ci, p.id));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut plate_taken: Vec<u32> = Vec::new();
    for (_, ci, pid) in pairs {
        if clusters[ci].matched_plate.is_some() || plate_taken.contains(&pid) {
            continue;
        }
        clusters[ci].matched_plate = Some(pid);
        plate_taken.push(pid);
    }
}

/// Per-plate first-detected round, aggregated over a multi-round experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    /// Plate id -> earliest round (1-based) whose clusters matched it.
    pub first_detected: BTreeMap<u32, Option<usize>>,
    pub all_covered: bool,
    pub rounds_used: usize,
}

pub fn aggregate_rounds(
    rounds: &[Vec<DetectionCluster>],
    plates: &[PlateTarget],
) -> CoverageReport {
    assert!(!rounds.is_empty(), "at least one round required");
    let mut first_detected: BTreeMap<u32, Option<usize>> =
        plates.iter().map(|p| (p.id, None)).collect();
    for (round_idx, clusters) in rounds.iter().enumerate() {
        for c in clusters {
            if let Some(pid) = c.matched_plate {
                let slot = first_detected.entry(pid).or_insert(None);
                if slot.is_none() {
                    *slot = Some(round_idx + 1);
                }
            }
        }
    }
    let all_covered = first_detected.values().all(|v| v.is_some());
    CoverageReport { first_detected, all_covered, rounds_used: rounds.len() }
}

impl CoverageReport {
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        for (pid, round) in &self.first_detected {
            match round {
                Some(r) => { let _ = writeln!(s, "plate {pid} first_round {r}"); }
                None => { let _ = writeln!(s, "plate {pid} never"); }
            }
        }
        let _ = writeln!(s, "all_covered {}", self.all_covered);
        let _ = writeln!(s, "rounds_used {}", self.rounds_used);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pkt(seq: u16, x_mm: i32, label: u8) -> TelemetryPacket {
        TelemetryPacket {
            seq,
            timestamp_ms: seq as u32 * 500,
            x_mm,
            y_mm: 0,
            yaw_cdeg: 0,
            label,
            confidence_q8: 128,
        }
    }

    #[test]
    fn ingest_counts_duplicates_and_gaps() {
        let mut map = PathMap::new();
        map.ingest_packet(&pkt(0, 0, 0));
        assert_eq!(map.len(), 1);
        map.ingest_packet(&pkt(0, 0, 0)); // duplicate
        assert_eq!(map.len(), 1);
        assert_eq!(map.duplicates, 1);
        map.ingest_packet(&pkt(5, 0, 0));
        map.ingest_packet(&pkt(7, 0, 0)); // gap 5 -> 7
        assert_eq!(map.len(), 3);
        assert_eq!(map.seq_gaps, 2); // 0->5 and 5->7
        map.ingest_packet(&pkt(6, 0, 0)); // late arrival
        assert_eq!(map.out_of_order, 1);
        assert_eq!(map.len(), 4);
    }

    #[test]
    fn metrics_basic_arithmetic() {
        let mut events = Vec::new();
        events.extend(std::iter::repeat((Label::Plate, FrameTruth::PositiveFrame)).take(8));
        events.extend(std::iter::repeat((Label::Plate, FrameTruth::NegativeFrame)).take(2));
        events.extend(std::iter::repeat((Label::Background, FrameTruth::PositiveFrame)).take(2));
        events.extend(std::iter::repeat((Label::Background, FrameTruth::NegativeFrame)).take(20));
        let m = compute_metrics(&events, 100.0);
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (8, 2, 2, 20));
        assert_eq!(m.precision, Some(0.8));
        assert_eq!(m.recall, Some(0.8));
        assert!((m.f1.unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(m.frames, 32);
    }

    #[test]
    fn metrics_undefined_reported_as_none() {
        let events = vec![(Label::Background, FrameTruth::NegativeFrame); 5];
        let m = compute_metrics(&events, 1.0);
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, None);
        assert_eq!(m.f1, None);
        assert!(m.to_line(1).contains("n/a"));
    }

    #[test]
    fn metrics_perfect_scores() {
        let events = vec![(Label::Plate, FrameTruth::PositiveFrame); 5];
        let m = compute_metrics(&events, 1.0);
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.recall, Some(1.0));
        assert_eq!(m.f1, Some(1.0));
    }

    /// Naive per-event recount oracle, independent of compute_metrics.
    fn recount(events: &[(Label, FrameTruth)]) -> (u64, u64, u64, u64) {
        let tp = events.iter().filter(|e| e.0 == Label::Plate && e.1 == FrameTruth::PositiveFrame).count() as u64;
        let fp = events.iter().filter(|e| e.0 == Label::Plate && e.1 == FrameTruth::NegativeFrame).count() as u64;
        let fn_ = events.iter().filter(|e| e.0 == Label::Background && e.1 == FrameTruth::PositiveFrame).count() as u64;
        let tn = events.iter().filter(|e| e.0 == Label::Background && e.1 == FrameTruth::NegativeFrame).count() as u64;
        (tp, fp, fn_, tn)
    }

    #[test]
    fn metrics_match_recount_oracle_on_random_logs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let n = rng.gen_range(0..200);
            let events: Vec<(Label, FrameTruth)> = (0..n)
                .map(|_| {
                    let label = if rng.gen::<bool>() { Label::Plate } else { Label::Background };
                    let truth = if rng.gen::<bool>() {
                        FrameTruth::PositiveFrame
                    } else {
                        FrameTruth::NegativeFrame
                    };
                    (label, truth)
                })
                .collect();
            let m = compute_metrics(&events, 1.0);
            assert_eq!((m.tp, m.fp, m.fn_, m.tn), recount(&events));
            assert_eq!(m.frames, n as u64);
            // Harmonic-mean property: F1 between min and max of P and R.
            if let (Some(p), Some(r), Some(f1)) = (m.precision, m.recall, m.f1) {
                assert!(f1 >= p.min(r) - 1e-12 && f1 <= p.max(r) + 1e-12);
            }
        }
    }

    fn sample_at(x: f64, y: f64, label: Label) -> PathSample {
        PathSample {
            seq: 0,
            timestamp_ms: 0,
            position: Vec2::new(x, y),
            yaw: 0.0,
            label,
            confidence: 0.9,
        }
    }

    #[test]
    fn clustering_groups_nearby_events() {
        let samples = vec![
            sample_at(1.0, 1.0, Label::Plate),
            sample_at(1.1, 1.05, Label::Plate),
            sample_at(1.2, 0.95, Label::Plate),
        ];
        let clusters = cluster_detections(&samples, 0.5, 0.0);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].member_positions.len(), 3);
        for m in &clusters[0].member_positions {
            assert!(clusters[0].centroid.distance(*m) <= 0.5);
        }
    }

    #[test]
    fn clustering_separates_test_case_spacing() {
        // Two plates 0.70 m apart (box width + 25 cm gap) stay separate at
        // radius 0.3.
        let samples = vec![
            sample_at(1.95, 2.3, Label::Plate),
            sample_at(2.65, 2.3, Label::Plate),
        ];
        let clusters = cluster_detections(&samples, 0.3, 0.0);
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn clustering_ignores_background_and_is_stable() {
        let samples = vec![
            sample_at(1.0, 1.0, Label::Background),
            sample_at(2.0, 1.0, Label::Plate),
        ];
        let a = cluster_detections(&samples, 0.5, 0.0);
        let b = cluster_detections(&samples, 0.5, 0.0);
        assert_eq!(a, b);
        assert_eq!(a.len(), 1);
        assert!(cluster_detections(&[], 0.5, 0.0).is_empty());
        // Every Plate event lands in exactly one cluster.
        let total: usize = a.iter().map(|c| c.member_positions.len()).sum();
        assert_eq!(total, 1);
    }

    #[test]
    fn matching_is_one_to_one_greedy() {
        let plates = vec![
            PlateTarget { id: 0, center: Vec2::new(1.0, 2.0), outward_normal: Vec2::new(0.0, -1.0), width: 0.52, height: 0.11 },
            PlateTarget { id: 1, center: Vec2::new(1.7, 2.0), outward_normal: Vec2::new(0.0, -1.0), width: 0.52, height: 0.11 },
        ];
        let samples = vec![
            sample_at(1.05, 1.9, Label::Plate),
            sample_at(1.72, 1.95, Label::Plate),
            sample_at(4.0, 1.0, Label::Plate), // false positive far away
        ];
        let mut clusters = cluster_detections(&samples, 0.35, 0.0);
        match_clusters_to_plates(&mut clusters, &plates, 0.5);
        assert_eq!(clusters.len(), 3);
        assert_eq!(clusters[0].matched_plate, Some(0));
        assert_eq!(clusters[1].matched_plate, Some(1));
        assert_eq!(clusters[2].matched_plate, None);
    }

    #[test]
    fn aggregate_rounds_first_detection() {
        let plates = vec![
            PlateTarget { id: 0, center: Vec2::new(1.0, 2.0), outward_normal: Vec2::new(0.0, -1.0), width: 0.52, height: 0.11 },
            PlateTarget { id: 1, center: Vec2::new(1.7, 2.0), outward_normal: Vec2::new(0.0, -1.0), width: 0.52, height: 0.11 },
        ];
        let cluster_for = |pid| DetectionCluster {
            id: 0,
            centroid: Vec2::new(0.0, 0.0),
            member_positions: vec![],
            matched_plate: Some(pid),
        };
        // Plate 0 only in round 2; plate 1 in both.
        let rounds = vec![vec![cluster_for(1)], vec![cluster_for(0), cluster_for(1)]];
        let cov = aggregate_rounds(&rounds, &plates);
        assert_eq!(cov.first_detected[&0], Some(2));
        assert_eq!(cov.first_detected[&1], Some(1));
        assert!(cov.all_covered);
        assert_eq!(cov.rounds_used, 2);

        // A never-matched plate blocks coverage.
        let rounds = vec![vec![cluster_for(1)], vec![cluster_for(1)], vec![]];
        let cov = aggregate_rounds(&rounds, &plates);
        assert_eq!(cov.first_detected[&0], None);
        assert!(!cov.all_covered);
    }
}
