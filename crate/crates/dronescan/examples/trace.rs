//! Scratch trace harness: runs one round with verbose mode-transition output.
//! cargo run -p dronescan --example trace -- <case> <seed> [speed] [zero]

use dronescan::config::{RunConfig, ScenarioSource};
use dronescan::controller::{controller_step, ControllerState, Mode};
use dronescan::drone::{
    odometry_update, sense_ranges, step_kinematics, DroneState, NoiseModel, CONTROL_DT,
};
use dronescan::runner::{build_world, RoundSeeds};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let case: u8 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1);
    let seed: u64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1);
    let speed: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let zero = args.get(4).map(|s| s == "zero").unwrap_or(false);

    let mut cfg = RunConfig::new(ScenarioSource::Case(case), speed, 1, seed);
    if zero {
        cfg.noise = NoiseModel::zero();
    }
    let world = build_world(&cfg).unwrap();
    println!("{}", world.to_scenario_string());

    let seeds = RoundSeeds::derive(seed, 0);
    let mut rng_sense = ChaCha8Rng::seed_from_u64(seeds.sensing);
    let mut rng_odo = ChaCha8Rng::seed_from_u64(seeds.odometry);
    let mut state = DroneState::new(world.start_pose);
    let mut cs = ControllerState::new();
    let params = cfg.controller;
    let mut last_mode = cs.mode;
    let mut tick = 0u64;

    loop {
        let scan = sense_ranges(&world, &state, &cfg.noise, &mut rng_sense);
        let step = controller_step(&cs, &params, &scan, CONTROL_DT);
        let (next, cmd) = match step {
            Ok(v) => v,
            Err(e) => {
                println!("t={:7.2} LOSTWALL: {e}", state.sim_time);
                break;
            }
        };
        cs = next;
        if cs.mode != last_mode {
            println!(
                "t={:7.2} {:?} -> {:?} pos=({:.2},{:.2}) yaw={:.1}deg front={:?}",
                state.sim_time,
                last_mode,
                cs.mode,
                state.true_pose.position.x,
                state.true_pose.position.y,
                state.true_pose.yaw.to_degrees(),
                scan.front
            );
            last_mode = cs.mode;
        }
        match step_kinematics(&state, &cmd, CONTROL_DT, cfg.battery_budget) {
            Ok(s) => state = odometry_update(&s, &cmd, CONTROL_DT, &cfg.noise, &mut rng_odo),
            Err(_) => {
                println!("t={:7.2} BATTERY", state.sim_time);
                break;
            }
        }
        if !world.is_free(state.true_pose.position) {
            println!(
                "t={:7.2} COLLISION at ({:.3},{:.3})",
                state.sim_time, state.true_pose.position.x, state.true_pose.position.y
            );
            break;
        }
        if cs.mode == Mode::FollowWall && tick % 40 == 0 {
            println!(
                "t={:7.2} follow pos=({:.2},{:.2}) yaw={:.1} front={:?} est=({:.2},{:.2})",
                state.sim_time,
                state.true_pose.position.x,
                state.true_pose.position.y,
                state.true_pose.yaw.to_degrees(),
                scan.front,
                state.estimated_pose.position.x,
                state.estimated_pose.position.y,
            );
        }
        tick += 1;
        if state.sim_time > 400.0 {
            println!("timeout");
            break;
        }
    }
}
// debug notes: run with ALIGN_DEBUG=1 for sweep sample dumps
