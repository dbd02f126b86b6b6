//! Wall-following state machine, modified for sideways flight.
//!
//! The drone keeps its heading (and camera) perpendicular to the followed
//! surface and translates sideways along it. In this rotated frame the
//! front ray regulates wall distance, the ray on the travel side watches for
//! walls ahead along the travel direction (inner corners), and losing the
//! front return for long enough means the followed wall ended (outer corner).
//!
//! Mode graph:
//!
//! ```text
//! ForwardSeek -> AlignToWall -> FollowWall -> InnerCorner -> AlignToWall
//!                                          -> OuterCorner -> AlignToWall
//! any -> Finished (runner signal)
//! ```

use crate::drone::{RangeScan, VelocityCommand, RANGE_MAX};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ForwardSeek,
    AlignToWall,
    FollowWall,
    OuterCorner,
    InnerCorner,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FollowDirection {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    /// Regulated distance to the followed wall (meters).
    pub d_follow: f64,
    /// Front reading that ends ForwardSeek / reacquires a wall (meters).
    pub d_detect_front: f64,
    /// Travel speed along the wall (m/s); the scenario speed.
    pub v_travel: f64,
    /// Proportional gain of the wall-distance regulator (1/s).
    pub k_dist: f64,
    /// Gain of the align return rotation (1/s).
    pub k_align: f64,
    /// Front reading treated as "wall lost" (meters).
    pub side_lost_threshold: f64,
    pub follow_direction: FollowDirection,
    /// Yaw rate for alignment sweeps and in-place corner turns (rad/s).
    pub turn_rate: f64,
    /// Travel-side reading below d_follow + margin triggers an inner corner.
    pub inner_margin: f64,
    /// Sideways travel with the front lost before declaring an outer corner
    /// (meters); larger than the 25 cm inter-box gaps so gaps are tolerated.
    pub gap_tolerance: f64,
    /// Alignment sampling window (seconds).
    pub align_sample_dt: f64,
    /// Arc radius of the outer-corner orbit (meters); tighter than d_follow
    /// so the swing clears facing walls in narrow corridors.
    pub orbit_radius: f64,
}

impl ControllerParams {
    /// Parameters for a given travel speed. Turn rates scale with speed so a
    /// round's duration scales inversely with speed.
    pub fn for_speed(v_travel: f64) -> Self {
        ControllerParams {
            d_follow: 0.6,
            d_detect_front: 1.0,
            v_travel,
            k_dist: 1.2,
            k_align: 4.0,
            side_lost_threshold: 1.2,
            follow_direction: FollowDirection::Right,
            turn_rate: 4.5 * v_travel,
            inner_margin: 0.05,
            gap_tolerance: 0.35,
            align_sample_dt: 0.25,
            orbit_radius: 0.45,
        }
    }

    fn rotation_sign(&self) -> f64 {
        match self.follow_direction {
            FollowDirection::Right => 1.0,
            FollowDirection::Left => -1.0,
        }
    }
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams::for_speed(0.2)
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("no surface reacquired within pi of outer-corner pivot progress")]
pub struct LostWall;

#[derive(Debug, Clone, Copy, PartialEq)]
struct AlignSample {
    yaw: f64,
    front: f64,
    weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum AlignPhase {
    Sweep,
    Return { target: f64 },
}

/// Alignment bookkeeping: sweep at fixed rate sampling the front reading in
/// windows; once the window means rise past a bracketed minimum, rotate back
/// to the parabolic vertex through the samples around it. A rise before the
/// minimum is bracketed means the sweep started on the wrong side, so the
/// direction flips once and the sweep crosses back over the samples it kept.
#[derive(Debug, Clone, PartialEq)]
struct AlignScan {
    phase: AlignPhase,
    dir: f64,
    flipped: bool,
    yaw_rel: f64,
    window_sum: f64,
    window_yaw_sum: f64,
    window_ticks: u32,
    window_elapsed: f64,
    samples: Vec<AlignSample>,
    /// Raw per-tick (yaw, front) readings; the perpendicular fit runs on
    /// these, the window means above only drive the sweep logic.
    ticks: Vec<(f64, f64)>,
}

const ALIGN_RISE_MARGIN: f64 = 0.012;
const ALIGN_DONE_EPS: f64 = 0.01;
const ALIGN_GIVE_UP: f64 = 3.5;
/// Window means beyond d_detect_front by this much are off the target
/// surface, whatever surface they do hit.
const ALIGN_ESCAPE_SLACK: f64 = 0.3;
/// Minimum outer-corner wrap before reacquisition may fire. All corners in
/// these worlds are right angles; exiting earlier means the front ray only
/// grazed the new wall's corner and the drone is not yet squarely facing it.
const OUTER_MIN_WRAP: f64 = FRAC_PI_2;
/// Before orbiting, the drone backtracks to this far past the corner, so the
/// wrap ends with the drone squarely facing the new wall instead of its edge
/// (the gap tolerance alone would carry it a full face depth beyond).
const ORBIT_LEAD: f64 = 0.10;

impl AlignScan {
    fn new(scan: &RangeScan) -> Self {
        // Initial sweep direction: the nearer lateral reading hints which way
        // the wall is tilted; a wrong guess is corrected by the flip rule.
        let left = scan.left.unwrap_or(RANGE_MAX);
        let right = scan.right.unwrap_or(RANGE_MAX);
        AlignScan {
            phase: AlignPhase::Sweep,
            dir: if right < left { -1.0 } else { 1.0 },
            flipped: false,
            yaw_rel: 0.0,
            window_sum: 0.0,
            window_yaw_sum: 0.0,
            window_ticks: 0,
            window_elapsed: 0.0,
            samples: Vec::new(),
            ticks: Vec::new(),
        }
    }

    /// Record a window mean; windows retraced after a flip merge into the
    /// existing sample at that yaw. Returns false for a merged (retraced)
    /// window.
    fn push_sample(&mut self, yaw: f64, front: f64, merge_radius: f64) -> bool {
        for s in &mut self.samples {
            if (s.yaw - yaw).abs() < merge_radius {
                let w = s.weight + 1.0;
                s.front = (s.front * s.weight + front) / w;
                s.weight = w;
                return false;
            }
        }
        self.samples.push(AlignSample { yaw, front, weight: 1.0 });
        true
    }

    fn best_front(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.front)
            .fold(f64::INFINITY, f64::min)
    }

    fn sorted_by_yaw(&self) -> Vec<&AlignSample> {
        let mut sorted: Vec<&AlignSample> = self.samples.iter().collect();
        sorted.sort_by(|a, b| a.yaw.partial_cmp(&b.yaw).unwrap());
        sorted
    }

    /// Window means plausibly on the target wall: not past the escape cap,
    /// and not polluted by off-wall misses.
    fn good_window_count(&self, f_cap: f64) -> usize {
        let best = self.best_front();
        self.samples
            .iter()
            .filter(|s| s.front <= f_cap && s.front <= 1.5 * best)
            .count()
    }

    fn best_yaw(&self) -> f64 {
        let mut best = &self.samples[0];
        for s in &self.samples {
            if s.front < best.front {
                best = s;
            }
        }
        best.yaw
    }

    /// Yaw of the perpendicular to the wall, from a least-squares fit of the
    /// flat-wall reading model over the raw tick readings.
    ///
    /// A flat wall at perpendicular distance d and direction t0 reads
    /// f(t) = d / cos(t - t0), so 1/f = (cos(t0)/d) cos(t) + (sin(t0)/d)
    /// sin(t) is linear in two unknowns and the perpendicular falls out as
    /// their atan2. Off-wall ticks (past the cap or well above the best
    /// reading) are excluded so face edges do not skew the fit.
    fn fit_target(&self, f_cap: f64) -> f64 {
        let best = self
            .ticks
            .iter()
            .map(|&(_, f)| f)
            .fold(f64::INFINITY, f64::min);
        let good: Vec<&(f64, f64)> = self
            .ticks
            .iter()
            .filter(|&&(_, f)| f <= f_cap && f <= 1.5 * best)
            .collect();
        if good.len() < 4 {
            return self.best_yaw();
        }
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &&(yaw, front) in &good {
            let (sn, c) = yaw.sin_cos();
            let y = 1.0 / front;
            a11 += c * c;
            a12 += c * sn;
            a22 += sn * sn;
            b1 += c * y;
            b2 += sn * y;
            lo = lo.min(yaw);
            hi = hi.max(yaw);
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() < 1e-9 {
            return self.best_yaw();
        }
        let u = (a22 * b1 - a12 * b2) / det;
        let v = (a11 * b2 - a12 * b1) / det;
        let target = v.atan2(u);
        // Don't extrapolate wildly beyond the swept range.
        let span = (hi - lo).max(0.1);
        target.clamp(lo - span, hi + span)
    }
}

/// Wall-following controller state. Transitions happen only inside
/// [`controller_step`]; the runner moves any mode to `Finished` via
/// [`ControllerState::finish`] when the lap closes.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub mode: Mode,
    pub mode_entry_time: f64,
    /// Rotation accumulated in the current corner maneuver, in [0, pi].
    pub corner_pivot_progress: f64,
    time: f64,
    align: Option<AlignScan>,
    lost_travel: f64,
    outer_backtrack: f64,
}

impl ControllerState {
    pub fn new() -> Self {
        ControllerState {
            mode: Mode::ForwardSeek,
            mode_entry_time: 0.0,
            corner_pivot_progress: 0.0,
            time: 0.0,
            align: None,
            lost_travel: 0.0,
            outer_backtrack: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Runner signal: lap complete.
    pub fn finish(mut self) -> Self {
        self.enter(Mode::Finished);
        self
    }

    fn enter(&mut self, mode: Mode) {
        self.mode = mode;
        self.mode_entry_time = self.time;
        self.corner_pivot_progress = 0.0;
        self.align = None;
        self.lost_travel = 0.0;
        self.outer_backtrack = 0.0;
    }
}

impl Default for ControllerState {
    fn default() -> Self {
        ControllerState::new()
    }
}

fn halt() -> VelocityCommand {
    VelocityCommand::default()
}

/// One control tick: consume a range scan, produce the next state and a
/// body-frame velocity command. Pure and deterministic.
pub fn controller_step(
    cs: &ControllerState,
    params: &ControllerParams,
    scan: &RangeScan,
    dt: f64,
) -> Result<(ControllerState, VelocityCommand), LostWall> {
    debug_assert!(dt > 0.0);
    let mut next = cs.clone();
    next.time += dt;

    let front = scan.front.unwrap_or(RANGE_MAX);
    let rot = params.rotation_sign();
    // Travel is along body-right for Right follow, body-left for Left.
    let v_side_cmd = -rot * params.v_travel;
    let travel_side = match params.follow_direction {
        FollowDirection::Right => scan.right.unwrap_or(RANGE_MAX),
        FollowDirection::Left => scan.left.unwrap_or(RANGE_MAX),
    };

    let cmd = match cs.mode {
        Mode::Finished => halt(),

        Mode::ForwardSeek => {
            if front <= params.d_detect_front {
                next.enter(Mode::AlignToWall);
                halt()
            } else {
                VelocityCommand { v_forward: params.v_travel, ..halt() }
            }
        }

        Mode::AlignToWall => {
            let mut align = match next.align.take() {
                Some(a) => a,
                None => AlignScan::new(scan),
            };
            let h = params.turn_rate * params.align_sample_dt;
            let cmd = match align.phase {
                AlignPhase::Sweep => {
                    align.ticks.push((align.yaw_rel, front));
                    align.window_sum += front;
                    align.window_yaw_sum += align.yaw_rel;
                    align.window_ticks += 1;
                    align.window_elapsed += dt;
                    if align.window_elapsed + 1e-9 >= params.align_sample_dt {
                        let mean = align.window_sum / align.window_ticks as f64;
                        let mid = align.window_yaw_sum / align.window_ticks as f64;
                        let fresh = align.push_sample(mid, mean, h / 3.0);
                        #[cfg(feature = "align-debug")]
                        eprintln!(
                            "align window mid={:.1}deg mean={:.3} fresh={} dir={}",
                            mid.to_degrees(),
                            mean,
                            fresh,
                            align.dir
                        );
                        let f_cap = params.d_detect_front + ALIGN_ESCAPE_SLACK;
                        let escaped = mean > f_cap;
                        let rising = mean > align.best_front() + ALIGN_RISE_MARGIN;
                        // Windows retraced after a flip merge into existing
                        // samples and never trigger on their own.
                        if fresh && (escaped || rising) {
                            if align.good_window_count(f_cap) >= 2 {
                                align.phase =
                                    AlignPhase::Return { target: align.fit_target(f_cap) };
                            } else if !align.flipped {
                                align.flipped = true;
                                align.dir = -align.dir;
                            } else {
                                // Both sides explored without enough wall
                                // samples; take the best one seen.
                                align.phase =
                                    AlignPhase::Return { target: align.best_yaw() };
                            }
                        } else if align.yaw_rel.abs() > ALIGN_GIVE_UP {
                            align.phase = AlignPhase::Return { target: align.fit_target(f_cap) };
                        }
                        align.window_sum = 0.0;
                        align.window_yaw_sum = 0.0;
                        align.window_ticks = 0;
                        align.window_elapsed = 0.0;
                    }
                    let yaw_rate = align.dir * params.turn_rate;
                    align.yaw_rel += yaw_rate * dt;
                    VelocityCommand { yaw_rate, ..halt() }
                }
                AlignPhase::Return { target } => {
                    let err = target - align.yaw_rel;
                    if err.abs() <= ALIGN_DONE_EPS {
                        #[cfg(feature = "align-debug")]
                        eprintln!("align done at target={:.1}deg", target.to_degrees());
                        next.enter(Mode::FollowWall);
                        halt()
                    } else {
                        let yaw_rate =
                            (params.k_align * err).clamp(-params.turn_rate, params.turn_rate);
                        align.yaw_rel += yaw_rate * dt;
                        VelocityCommand { yaw_rate, ..halt() }
                    }
                }
            };
            if next.mode == Mode::AlignToWall {
                next.align = Some(align);
            }
            cmd
        }

        Mode::FollowWall => {
            if travel_side <= params.d_follow + params.inner_margin {
                // Wall ahead along the travel direction; collision avoidance
                // wins over a simultaneous lost-wall condition.
                next.enter(Mode::InnerCorner);
                halt()
            } else {
                if front > params.side_lost_threshold {
                    next.lost_travel += params.v_travel * dt;
                } else {
                    next.lost_travel = 0.0;
                }
                if next.lost_travel > params.gap_tolerance {
                    next.enter(Mode::OuterCorner);
                    halt()
                } else {
                    // Regulate the front reading to d_follow; capped so gap
                    // crossings produce only a bounded drift into the gap.
                    let cap = 0.75 * params.v_travel;
                    let v_forward =
                        (params.k_dist * (front - params.d_follow)).clamp(-cap, cap);
                    VelocityCommand { v_forward, v_side: v_side_cmd, yaw_rate: 0.0 }
                }
            }
        }

        Mode::InnerCorner => {
            // Rotate in place a quarter turn toward the wall on the travel side.
            next.corner_pivot_progress += params.turn_rate * dt;
            if next.corner_pivot_progress >= FRAC_PI_2 {
                next.enter(Mode::AlignToWall);
                halt()
            } else {
                VelocityCommand { yaw_rate: -rot * params.turn_rate, ..halt() }
            }
        }

        Mode::OuterCorner => {
            let backtrack_needed = (params.gap_tolerance - ORBIT_LEAD).max(0.0);
            if next.outer_backtrack < backtrack_needed {
                // Reverse along the travel axis until just past the corner,
                // undoing the lost-travel overshoot.
                next.outer_backtrack += params.v_travel * dt;
                VelocityCommand { v_forward: 0.0, v_side: -v_side_cmd, yaw_rate: 0.0 }
            } else {
                // Orbit the corner: keep translating along the body travel
                // axis while yawing, an arc of orbit_radius around the end.
                let yaw_rate = rot * params.v_travel / params.orbit_radius;
                next.corner_pivot_progress += yaw_rate.abs() * dt;
                if next.corner_pivot_progress >= OUTER_MIN_WRAP
                    && front <= params.d_detect_front
                {
                    next.enter(Mode::AlignToWall);
                    halt()
                } else if next.corner_pivot_progress > PI {
                    return Err(LostWall);
                } else {
                    VelocityCommand { v_forward: 0.0, v_side: v_side_cmd, yaw_rate }
                }
            }
        }
    };

    debug_assert!(cmd.is_within_limits());
    Ok((next, cmd))
}
