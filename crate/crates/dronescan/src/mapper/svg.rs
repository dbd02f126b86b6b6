//! Deterministic SVG rendering of the reconstructed map.
//!
//! Coordinates are written with fixed precision and elements in a fixed
//! order, so identical inputs produce byte-identical documents. World y grows
//! north; SVG y grows down, so the garage is drawn y-flipped.

use super::{DetectionCluster, PathMap};
use crate::detector::{FrameTruth, Label};
use crate::world::World;
use std::collections::HashMap;
use std::fmt::Write as _;

const PX_PER_M: f64 = 100.0;
const MARGIN_M: f64 = 0.4;

struct Frame {
    min_x: f64,
    max_y: f64,
}

impl Frame {
    fn x(&self, wx: f64) -> f64 {
        (wx - self.min_x + MARGIN_M) * PX_PER_M
    }

    fn y(&self, wy: f64) -> f64 {
        (self.max_y - wy + MARGIN_M) * PX_PER_M
    }
}

fn fmt_px(v: f64) -> String {
    format!("{v:.1}")
}

/// Render the path map over the world outline. Plate-labeled samples are
/// green (true positive) or red (false positive) when ground truth is known,
/// orange otherwise; background samples are gray dots.
///
/// `truth_by_seq` maps a packet sequence number to the frame's ground truth;
/// pass an empty map when no oracle log is available.
pub fn render_map(
    map: &PathMap,
    world: Option<&World>,
    clusters: &[DetectionCluster],
    truth_by_seq: &HashMap<u16, FrameTruth>,
) -> String {
    // Viewport covers the garage plus anything the drifting estimate drew
    // outside it.
    let mut min_x: f64 = 0.0;
    let mut min_y: f64 = 0.0;
    let mut max_x: f64 = world.map_or(1.0, |w| w.garage_width);
    let mut max_y: f64 = world.map_or(1.0, |w| w.garage_height);
    for s in map.samples() {
        min_x = min_x.min(s.position.x);
        min_y = min_y.min(s.position.y);
        max_x = max_x.max(s.position.x);
        max_y = max_y.max(s.position.y);
    }
    let frame = Frame { min_x, max_y };
    let width = (max_x - min_x + 2.0 * MARGIN_M) * PX_PER_M;
    let height = (max_y - min_y + 2.0 * MARGIN_M) * PX_PER_M + 70.0; // legend strip

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        fmt_px(width),
        fmt_px(height),
        fmt_px(width),
        fmt_px(height)
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    if let Some(w) = world {
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black" stroke-width="2"/>"#,
            fmt_px(frame.x(0.0)),
            fmt_px(frame.y(w.garage_height)),
            fmt_px(w.garage_width * PX_PER_M),
            fmt_px(w.garage_height * PX_PER_M)
        );
        for b in w.boxes() {
            let pts: Vec<String> = b
                .corners()
                .iter()
                .map(|c| format!("{},{}", fmt_px(frame.x(c.x)), fmt_px(frame.y(c.y))))
                .collect();
            let _ = writeln!(
                s,
                r##"<polygon points="{}" fill="#d9c8a9" stroke="#7a6a4f" stroke-width="1"/>"##,
                pts.join(" ")
            );
        }
        for p in w.plates() {
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="3" fill="none" stroke="blue" stroke-width="1"/>"#,
                fmt_px(frame.x(p.center.x)),
                fmt_px(frame.y(p.center.y))
            );
        }
    }

    // Flight path.
    if map.len() >= 2 {
        let pts: Vec<String> = map
            .samples()
            .iter()
            .map(|p| format!("{},{}", fmt_px(frame.x(p.position.x)), fmt_px(frame.y(p.position.y))))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#9ecae1" stroke-width="1.5"/>"##,
            pts.join(" ")
        );
    }

    // Classification samples, color-coded.
    for p in map.samples() {
        let (color, r) = match p.label {
            Label::Background => ("#bbbbbb", 1.5),
            Label::Plate => match truth_by_seq.get(&p.seq) {
                Some(FrameTruth::PositiveFrame) => ("green", 3.0),
                Some(FrameTruth::NegativeFrame) => ("red", 3.0),
                None => ("orange", 3.0),
            },
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="{}" fill="{}"/>"#,
            fmt_px(frame.x(p.position.x)),
            fmt_px(frame.y(p.position.y)),
            r,
            color
        );
    }

    // Cluster rings.
    for c in clusters {
        let stroke = if c.matched_plate.is_some() { "green" } else { "orange" };
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="12" fill="none" stroke="{}" stroke-width="1.5" stroke-dasharray="3,2"/>"#,
            fmt_px(frame.x(c.centroid.x)),
            fmt_px(frame.y(c.centroid.y)),
            stroke
        );
    }

    // Legend and a 1 m scale bar.
    let ly = height - 45.0;
    let _ = writeln!(s, r#"<g font-family="monospace" font-size="12">"#);
    let legend = [
        ("green", "plate (TP)"),
        ("red", "plate (FP)"),
        ("orange", "plate (no truth)"),
        ("#bbbbbb", "background"),
    ];
    for (i, (color, text)) in legend.iter().enumerate() {
        let lx = 10.0 + i as f64 * 140.0;
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="4" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            fmt_px(lx),
            fmt_px(ly),
            color,
            fmt_px(lx + 8.0),
            fmt_px(ly + 4.0),
            text
        );
    }
    let bar_y = ly + 22.0;
    let _ = writeln!(
        s,
        r#"<line x1="10" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="2"/><text x="{}" y="{}">1 m</text>"#,
        fmt_px(bar_y),
        fmt_px(10.0 + PX_PER_M),
        fmt_px(bar_y),
        fmt_px(14.0 + PX_PER_M),
        fmt_px(bar_y + 4.0)
    );
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::TelemetryPacket;
    use crate::world::build_test_case;

    #[test]
    fn empty_map_renders_outline_and_legend() {
        let world = build_test_case(1, 0.45, 0.35, 0).unwrap();
        let map = PathMap::new();
        let svg = render_map(&map, Some(&world), &[], &HashMap::new());
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("plate (TP)"));
        assert!(svg.contains("1 m"));
        assert!(svg.ends_with("</svg>\n"));
        // Four boxes drawn.
        assert_eq!(svg.matches("<polygon").count(), 4);
    }

    #[test]
    fn render_is_deterministic() {
        let world = build_test_case(1, 0.45, 0.35, 0).unwrap();
        let mut map = PathMap::new();
        for seq in 0..20u16 {
            map.ingest_packet(&TelemetryPacket {
                seq,
                timestamp_ms: seq as u32 * 500,
                x_mm: 300 + 100 * seq as i32,
                y_mm: 300,
                yaw_cdeg: 9000,
                label: (seq % 4 == 0) as u8,
                confidence_q8: 220,
            });
        }
        let truth: HashMap<u16, FrameTruth> =
            (0..20).map(|s| (s, FrameTruth::PositiveFrame)).collect();
        let a = render_map(&map, Some(&world), &[], &truth);
        let b = render_map(&map, Some(&world), &[], &truth);
        assert_eq!(a, b);
        assert!(a.contains("green"));
    }

    #[test]
    fn viewport_expands_for_out_of_garage_drift() {
        let world = build_test_case(1, 0.45, 0.35, 0).unwrap();
        let mut map = PathMap::new();
        map.ingest_packet(&TelemetryPacket {
            seq: 0,
            timestamp_ms: 0,
            x_mm: -1500, // estimate wandered 1.5 m outside
            y_mm: 4500,
            yaw_cdeg: 0,
            label: 0,
            confidence_q8: 128,
        });
        let svg = render_map(&map, Some(&world), &[], &HashMap::new());
        assert!(svg.starts_with("<svg"));
        // Wider than the garage-only viewport.
        let base = render_map(&PathMap::new(), Some(&world), &[], &HashMap::new());
        assert!(svg.len() > 0 && svg != base);
    }

    #[test]
    fn truth_coloring() {
        let mut map = PathMap::new();
        for (seq, label) in [(0u16, 1u8), (1, 1), (2, 1)] {
            map.ingest_packet(&TelemetryPacket {
                seq,
                timestamp_ms: seq as u32,
                x_mm: seq as i32 * 1000,
                y_mm: 0,
                yaw_cdeg: 0,
                label,
                confidence_q8: 255,
            });
        }
        let mut truth = HashMap::new();
        truth.insert(0u16, FrameTruth::PositiveFrame);
        truth.insert(1u16, FrameTruth::NegativeFrame);
        // seq 2 has no truth entry.
        let svg = render_map(&map, None, &[], &truth);
        assert!(svg.contains(r#"fill="green""#));
        assert!(svg.contains(r#"fill="red""#));
        assert!(svg.contains(r#"fill="orange""#));
    }
}
