//! Parametric classifier standing in for the onboard CNN.
//!
//! Frame ground truth is purely geometric (plate visibility from the true
//! pose); the classifier converts it into a stochastic label with a
//! confidence score. All parameters are calibration knobs fitted to the
//! aggregate counts the reference system produced, not claims about any
//! particular network.

use crate::drone::DroneState;
use crate::world::{Pose, World};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// Peak per-frame detection probability.
    pub p_base: f64,
    /// Below this distance the plate no longer fits the image; ramps to 0.5
    /// at contact.
    pub d_near: f64,
    /// Upper edge of the full-probability sweet spot (meters).
    pub d_sweet: f64,
    /// Beyond this distance nothing is detected (meters).
    pub d_max: f64,
    /// Maximum viewing incidence for a usable plate image (radians).
    pub incidence_max: f64,
    /// False-positive probability per background frame; light-independent.
    pub p_fp: f64,
    /// Illumination multiplier in (0, 1]; the low-light preset is 0.5.
    pub light_factor: f64,
    /// Camera horizontal field of view (radians).
    pub fov: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            p_base: 0.6,
            d_near: 0.3,
            d_sweet: 1.5,
            d_max: 3.0,
            incidence_max: 1.31,
            p_fp: 0.05,
            light_factor: 1.0,
            fov: 1.466,
        }
    }
}

impl DetectorModel {
    /// Trapezoidal distance response: 0.5 at contact, 1 across the sweet
    /// spot, linear decay to 0 at `d_max`.
    pub fn f_dist(&self, d: f64) -> f64 {
        if d < self.d_near {
            0.5 + 0.5 * d / self.d_near
        } else if d <= self.d_sweet {
            1.0
        } else if d < self.d_max {
            (self.d_max - d) / (self.d_max - self.d_sweet)
        } else {
            0.0
        }
    }

    /// Closed-form detection probability for a plate at distance `d` seen at
    /// `incidence`.
    pub fn detection_probability(&self, d: f64, incidence: f64) -> f64 {
        (self.p_base * self.f_dist(d) * incidence.cos().max(0.0) * self.light_factor)
            .clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Plate,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameTruth {
    PositiveFrame,
    NegativeFrame,
}

/// One classified camera frame. `truth` and `visible_plate_ids` are
/// simulator-side ground truth and never go over the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    pub frame_index: u64,
    pub sim_time: f64,
    pub estimated_pose: Pose,
    pub label: Label,
    pub confidence: f64,
    pub truth: FrameTruth,
    pub visible_plate_ids: Vec<u32>,
}

/// Classify one camera frame. Consumes exactly 2 RNG draws: one for the
/// label, one for the confidence band.
pub fn classify_frame(
    world: &World,
    state: &DroneState,
    model: &DetectorModel,
    frame_index: u64,
    rng: &mut ChaCha8Rng,
) -> DetectionEvent {
    let sightings =
        world.plate_visibility(state.true_pose, model.fov, model.d_max, model.incidence_max);
    let truth = if sightings.is_empty() {
        FrameTruth::NegativeFrame
    } else {
        FrameTruth::PositiveFrame
    };
    // Best visible plate drives the detection probability.
    let p = sightings
        .iter()
        .map(|s| model.detection_probability(s.distance, s.incidence))
        .fold(0.0, f64::max);

    let u_label: f64 = rng.gen();
    let u_conf: f64 = rng.gen();
    let label = match truth {
        FrameTruth::PositiveFrame => {
            if u_label < p {
                Label::Plate
            } else {
                Label::Background // false negative
            }
        }
        FrameTruth::NegativeFrame => {
            if u_label < model.p_fp {
                Label::Plate // false positive
            } else {
                Label::Background
            }
        }
    };
    let confidence = match label {
        Label::Plate => 0.75 + 0.25 * u_conf,
        Label::Background => 0.5 + 0.25 * u_conf,
    };

    DetectionEvent {
        frame_index,
        sim_time: state.sim_time,
        estimated_pose: state.estimated_pose,
        label,
        confidence,
        truth,
        visible_plate_ids: sightings.iter().map(|s| s.plate_id).collect(),
    }
}

/// TP/FP/FN/TN accumulator over classified frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn update(&mut self, label: Label, truth: FrameTruth) {
        match (label, truth) {
            (Label::Plate, FrameTruth::PositiveFrame) => self.tp += 1,
            (Label::Plate, FrameTruth::NegativeFrame) => self.fp += 1,
            (Label::Background, FrameTruth::PositiveFrame) => self.fn_ += 1,
            (Label::Background, FrameTruth::NegativeFrame) => self.tn += 1,
        }
    }

    pub fn update_event(&mut self, ev: &DetectionEvent) {
        self.update(ev.label, ev.truth);
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}
