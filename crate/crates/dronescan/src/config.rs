//! Run configuration and the key-value override grammar.
//!
//! Overrides use the same line-oriented `#`-comment grammar as scenario
//! files, with dotted keys and an optional `=`:
//!
//! ```text
//! detector.p_base = 0.6
//! noise.range_sigma 0.005
//! telemetry.drop = 0.1
//! ```

use crate::controller::{ControllerParams, FollowDirection};
use crate::detector::DetectorModel;
use crate::drone::{NoiseModel, BATTERY_BUDGET};
use std::path::PathBuf;
use thiserror::Error;

/// Where the world comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioSource {
    /// Built-in test case 1..=4.
    Case(u8),
    /// Scenario file path.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioSource,
    pub speed: f64,
    pub rounds: usize,
    pub master_seed: u64,
    /// Illumination multiplier applied to the detector.
    pub light: f64,
    pub noise: NoiseModel,
    pub detector: DetectorModel,
    pub controller: ControllerParams,
    pub battery_budget: f64,
    pub output_dir: PathBuf,
    pub listen: Option<String>,
    pub drop_probability: f64,
}

impl RunConfig {
    pub fn new(scenario: ScenarioSource, speed: f64, rounds: usize, master_seed: u64) -> Self {
        RunConfig {
            scenario,
            speed,
            rounds,
            master_seed,
            light: 1.0,
            noise: NoiseModel { rng_seed: master_seed, ..NoiseModel::default() },
            detector: DetectorModel::default(),
            controller: ControllerParams::for_speed(speed),
            battery_budget: BATTERY_BUDGET,
            output_dir: PathBuf::from("out"),
            listen: None,
            drop_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.speed > 0.0 && self.speed <= 0.5) {
            return Err(ConfigError::BadValue {
                key: "speed".into(),
                value: format!("{}", self.speed),
                reason: "must be in (0, 0.5]",
            });
        }
        if self.rounds < 1 {
            return Err(ConfigError::BadValue {
                key: "rounds".into(),
                value: format!("{}", self.rounds),
                reason: "must be >= 1",
            });
        }
        Ok(())
    }

    /// Detector model with the run's light factor applied.
    pub fn effective_detector(&self) -> DetectorModel {
        DetectorModel {
            light_factor: (self.detector.light_factor * self.light).clamp(0.0, 1.0),
            ..self.detector
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected 'key value' or 'key = value'")]
    BadLine { line: usize },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad number '{value}' for '{key}'")]
    BadNumber { line: usize, key: String, value: String },
    #[error("bad value for '{key}': {value} ({reason})")]
    BadValue { key: String, value: String, reason: &'static str },
}

/// Parse override text into `(key, value)` pairs.
pub fn parse_overrides(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let cleaned = content.replace('=', " ");
        let tokens: Vec<&str> = cleaned.split_whitespace().collect();
        match tokens.len() {
            0 => continue,
            2 => out.push((tokens[0].to_string(), tokens[1].to_string())),
            _ => return Err(ConfigError::BadLine { line }),
        }
    }
    Ok(out)
}

/// Apply parsed overrides onto a config.
pub fn apply_overrides(cfg: &mut RunConfig, pairs: &[(String, String)]) -> Result<(), ConfigError> {
    for (i, (key, value)) in pairs.iter().enumerate() {
        let line = i + 1;
        let num = || -> Result<f64, ConfigError> {
            let v: f64 = value.parse().map_err(|_| ConfigError::BadNumber {
                line,
                key: key.clone(),
                value: value.clone(),
            })?;
            if !v.is_finite() {
                return Err(ConfigError::BadNumber { line, key: key.clone(), value: value.clone() });
            }
            Ok(v)
        };
        match key.as_str() {
            "detector.p_base" => cfg.detector.p_base = num()?,
            "detector.d_near" => cfg.detector.d_near = num()?,
            "detector.d_sweet" => cfg.detector.d_sweet = num()?,
            "detector.d_max" => cfg.detector.d_max = num()?,
            "detector.incidence_max" => cfg.detector.incidence_max = num()?,
            "detector.p_fp" => cfg.detector.p_fp = num()?,
            "detector.light_factor" => cfg.detector.light_factor = num()?,
            "detector.fov" => cfg.detector.fov = num()?,
            "noise.range_sigma" => cfg.noise.range_sigma = num()?,
            "noise.odom_drift_rate" => cfg.noise.odom_drift_rate = num()?,
            "noise.odom_yaw_sigma" => cfg.noise.odom_yaw_sigma = num()?,
            "controller.d_follow" => cfg.controller.d_follow = num()?,
            "controller.d_detect_front" => cfg.controller.d_detect_front = num()?,
            "controller.k_dist" => cfg.controller.k_dist = num()?,
            "controller.k_align" => cfg.controller.k_align = num()?,
            "controller.side_lost_threshold" => cfg.controller.side_lost_threshold = num()?,
            "controller.turn_rate" => cfg.controller.turn_rate = num()?,
            "controller.follow_direction" => {
                cfg.controller.follow_direction = match value.as_str() {
                    "left" | "Left" => FollowDirection::Left,
                    "right" | "Right" => FollowDirection::Right,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.clone(),
                            value: value.clone(),
                            reason: "expected left or right",
                        })
                    }
                }
            }
            "battery_budget" => cfg.battery_budget = num()?,
            "telemetry.listen" => cfg.listen = Some(value.clone()),
            "telemetry.drop" => cfg.drop_probability = num()?,
            _ => return Err(ConfigError::UnknownKey { line, key: key.clone() }),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig::new(ScenarioSource::Case(1), 0.2, 3, 42)
    }

    #[test]
    fn parse_both_grammars() {
        let pairs = parse_overrides("detector.p_base = 0.5\nnoise.range_sigma 0.01\n# comment\n\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0], ("detector.p_base".into(), "0.5".into()));
    }

    #[test]
    fn apply_known_keys() {
        let mut cfg = base();
        let pairs = parse_overrides(
            "detector.p_base 0.5\ncontroller.d_follow 0.7\ntelemetry.drop 0.1\ntelemetry.listen 127.0.0.1:7878\nbattery_budget 300\n",
        )
        .unwrap();
        apply_overrides(&mut cfg, &pairs).unwrap();
        assert_eq!(cfg.detector.p_base, 0.5);
        assert_eq!(cfg.controller.d_follow, 0.7);
        assert_eq!(cfg.drop_probability, 0.1);
        assert_eq!(cfg.listen.as_deref(), Some("127.0.0.1:7878"));
        assert_eq!(cfg.battery_budget, 300.0);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = base();
        let pairs = vec![("detector.p_bass".to_string(), "0.5".to_string())];
        assert!(matches!(
            apply_overrides(&mut cfg, &pairs),
            Err(ConfigError::UnknownKey { .. })
        ));
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(matches!(
            parse_overrides("detector.p_base 0.5 extra\n"),
            Err(ConfigError::BadLine { line: 1 })
        ));
        assert!(matches!(
            parse_overrides("just_a_key\n"),
            Err(ConfigError::BadLine { line: 1 })
        ));
        let mut cfg = base();
        let pairs = vec![("detector.p_base".to_string(), "abc".to_string())];
        assert!(matches!(
            apply_overrides(&mut cfg, &pairs),
            Err(ConfigError::BadNumber { .. })
        ));
    }

    #[test]
    fn validate_bounds() {
        let mut cfg = base();
        cfg.speed = 0.6;
        assert!(cfg.validate().is_err());
        cfg.speed = 0.2;
        cfg.rounds = 0;
        assert!(cfg.validate().is_err());
        cfg.rounds = 1;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn effective_detector_applies_light() {
        let mut cfg = base();
        cfg.light = 0.5;
        assert_eq!(cfg.effective_detector().light_factor, 0.5);
        cfg.detector.light_factor = 0.8;
        assert_eq!(cfg.effective_detector().light_factor, 0.4);
    }
}
