//! Drone kinematics, range sensing with noise, and odometry drift.
//!
//! First-order kinematics at a fixed control tick: commanded body velocities
//! are realized instantly, integrated with an Euler step. The estimated pose
//! integrates the *commanded* displacement through its own (drifting) heading
//! estimate, which is how yaw noise turns into the position drift the paper
//! observed ("flies over the boxes" on the client map).

use crate::rng::sample_gaussian;
use crate::world::{normalize_angle, Pose, Vec2, World};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Simulation control tick (20 Hz); the camera samples every 10th tick (2 Hz).
pub const CONTROL_DT: f64 = 0.05;
/// Camera period in ticks.
pub const CAMERA_EVERY_TICKS: u64 = 10;
/// MultiRanger ceiling (meters).
pub const RANGE_MAX: f64 = 4.0;
/// Velocity and yaw-rate limits enforced on every command.
pub const V_MAX: f64 = 0.6;
pub const YAW_RATE_MAX: f64 = 1.6;
/// Default battery budget (seconds): the CrazyFlie's 7 minutes.
pub const BATTERY_BUDGET: f64 = 420.0;

/// Body-frame velocity command; `v_side` is body-left positive.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityCommand {
    pub v_forward: f64,
    pub v_side: f64,
    pub yaw_rate: f64,
}

impl VelocityCommand {
    pub fn is_within_limits(&self) -> bool {
        self.v_forward.abs() <= V_MAX
            && self.v_side.abs() <= V_MAX
            && self.yaw_rate.abs() <= YAW_RATE_MAX
    }

    pub fn clamped(self) -> VelocityCommand {
        VelocityCommand {
            v_forward: self.v_forward.clamp(-V_MAX, V_MAX),
            v_side: self.v_side.clamp(-V_MAX, V_MAX),
            yaw_rate: self.yaw_rate.clamp(-YAW_RATE_MAX, YAW_RATE_MAX),
        }
    }
}

/// True pose, estimated pose, and clocks. Immutable value passed tick to tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneState {
    pub true_pose: Pose,
    pub estimated_pose: Pose,
    pub sim_time: f64,
    pub battery_elapsed: f64,
}

impl DroneState {
    pub fn new(start: Pose) -> Self {
        DroneState {
            true_pose: start,
            estimated_pose: start,
            sim_time: 0.0,
            battery_elapsed: 0.0,
        }
    }
}

/// Four body-frame range readings; `None` is out of range.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RangeScan {
    pub front: Option<f64>,
    pub back: Option<f64>,
    pub left: Option<f64>,
    pub right: Option<f64>,
}

/// Noise parameters; all defaults are calibration knobs, not hardware claims.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Additive Gaussian sigma on each range reading (meters).
    pub range_sigma: f64,
    /// Multiplicative error sigma on commanded displacement (fraction).
    pub odom_drift_rate: f64,
    /// Yaw random-walk intensity (rad per sqrt second).
    pub odom_yaw_sigma: f64,
    pub rng_seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            range_sigma: 0.005,
            odom_drift_rate: 0.02,
            odom_yaw_sigma: 0.005,
            rng_seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            range_sigma: 0.0,
            odom_drift_rate: 0.0,
            odom_yaw_sigma: 0.0,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("battery budget exhausted at {elapsed:.2} s")]
pub struct BatteryExhausted {
    pub elapsed: f64,
}

/// World-frame displacement of a body-frame command over `dt` at heading `yaw`.
fn body_displacement(cmd: &VelocityCommand, yaw: f64, dt: f64) -> Vec2 {
    let fwd = Vec2::new(yaw.cos(), yaw.sin());
    let left = Vec2::new(-yaw.sin(), yaw.cos());
    (fwd * cmd.v_forward + left * cmd.v_side) * dt
}

/// Integrate the true pose one tick. Refuses to advance past the battery
/// budget. Collision is not resolved here; the runner checks the new pose.
pub fn step_kinematics(
    state: &DroneState,
    cmd: &VelocityCommand,
    dt: f64,
    battery_budget: f64,
) -> Result<DroneState, BatteryExhausted> {
    debug_assert!(dt > 0.0);
    debug_assert!(cmd.is_within_limits());
    if state.battery_elapsed + dt > battery_budget + 1e-9 {
        return Err(BatteryExhausted { elapsed: state.battery_elapsed });
    }
    let pos = state.true_pose.position + body_displacement(cmd, state.true_pose.yaw, dt);
    let yaw = normalize_angle(state.true_pose.yaw + cmd.yaw_rate * dt);
    Ok(DroneState {
        true_pose: Pose { position: pos, yaw },
        estimated_pose: state.estimated_pose,
        sim_time: state.sim_time + dt,
        battery_elapsed: state.battery_elapsed + dt,
    })
}

/// Four-direction range scan from the true pose. Consumes exactly 4 RNG draws
/// (front, back, left, right) whether or not each ray hits.
pub fn sense_ranges(
    world: &World,
    state: &DroneState,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> RangeScan {
    let yaw = state.true_pose.yaw;
    let origin = state.true_pose.position;
    let ray = |angle: f64, rng: &mut ChaCha8Rng| -> Option<f64> {
        let dir = Vec2::new(angle.cos(), angle.sin());
        let raw = world.ray_cast(origin, dir, RANGE_MAX);
        let eps = sample_gaussian(rng, noise.range_sigma);
        raw.map(|d| (d + eps).clamp(0.001, RANGE_MAX))
    };
    use std::f64::consts::{FRAC_PI_2, PI};
    RangeScan {
        front: ray(yaw, rng),
        back: ray(yaw + PI, rng),
        left: ray(yaw + FRAC_PI_2, rng),
        right: ray(yaw - FRAC_PI_2, rng),
    }
}

/// Advance the estimated pose by the commanded displacement scaled by a drift
/// error, integrated through the estimated heading plus a yaw random walk.
/// Consumes exactly 2 RNG draws. With an all-zero noise model the estimate
/// tracks the true pose exactly.
pub fn odometry_update(
    state: &DroneState,
    cmd: &VelocityCommand,
    dt: f64,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> DroneState {
    debug_assert!(dt > 0.0);
    let scale = 1.0 + sample_gaussian(rng, noise.odom_drift_rate);
    let yaw_noise = sample_gaussian(rng, noise.odom_yaw_sigma * dt.sqrt());
    let est = state.estimated_pose;
    let pos = est.position + body_displacement(cmd, est.yaw, dt) * scale;
    let yaw = normalize_angle(est.yaw + cmd.yaw_rate * dt + yaw_noise);
    DroneState {
        estimated_pose: Pose { position: pos, yaw },
        ..*state
    }
}
