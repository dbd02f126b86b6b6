//! Scenario file grammar.
//!
//! Line-oriented UTF-8, `#` starts a comment, blank lines ignored:
//!
//! ```text
//! garage <width_m> <height_m>
//! start <x> <y> <yaw_deg>
//! box <cx> <cy> <w> <d> <yaw_deg> <plate_face: N|S|E|W|->
//! ```
//!
//! Exactly one `garage` and one `start` line are required.

use super::{BoxObstacle, PlateFace, Pose, Vec2, World, WorldError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: unknown directive '{directive}'")]
    UnknownDirective { line: usize, directive: String },
    #[error("line {line}: expected {expected} arguments, got {got}")]
    WrongArgCount { line: usize, expected: usize, got: usize },
    #[error("line {line}: bad number '{token}'")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: bad plate face '{token}' (expected N, S, E, W or -)")]
    BadFace { line: usize, token: String },
    #[error("line {line}: duplicate '{directive}' line")]
    Duplicate { line: usize, directive: &'static str },
    #[error("missing required '{0}' line")]
    Missing(&'static str),
    #[error(transparent)]
    Invalid(#[from] WorldError),
}

fn parse_f64(line: usize, token: &str) -> Result<f64, ScenarioError> {
    let v: f64 = token.parse().map_err(|_| ScenarioError::BadNumber {
        line,
        token: token.to_string(),
    })?;
    if !v.is_finite() {
        return Err(ScenarioError::BadNumber { line, token: token.to_string() });
    }
    Ok(v)
}

/// Parse scenario text into a validated [`World`]. Deterministic: identical
/// text yields an identical world.
pub fn load_scenario(text: &str) -> Result<World, ScenarioError> {
    let mut garage: Option<(f64, f64)> = None;
    let mut start: Option<Pose> = None;
    let mut boxes: Vec<BoxObstacle> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let args = &tokens[1..];
        let expect = |expected: usize| -> Result<(), ScenarioError> {
            if args.len() != expected {
                Err(ScenarioError::WrongArgCount { line, expected, got: args.len() })
            } else {
                Ok(())
            }
        };
        match tokens[0] {
            "garage" => {
                expect(2)?;
                if garage.is_some() {
                    return Err(ScenarioError::Duplicate { line, directive: "garage" });
                }
                garage = Some((parse_f64(line, args[0])?, parse_f64(line, args[1])?));
            }
            "start" => {
                expect(3)?;
                if start.is_some() {
                    return Err(ScenarioError::Duplicate { line, directive: "start" });
                }
                start = Some(Pose::new(
                    Vec2::new(parse_f64(line, args[0])?, parse_f64(line, args[1])?),
                    parse_f64(line, args[2])?.to_radians(),
                ));
            }
            "box" => {
                expect(6)?;
                let face = match args[5] {
                    "N" => Some(PlateFace::North),
                    "S" => Some(PlateFace::South),
                    "E" => Some(PlateFace::East),
                    "W" => Some(PlateFace::West),
                    "-" => None,
                    other => {
                        return Err(ScenarioError::BadFace { line, token: other.to_string() })
                    }
                };
                boxes.push(BoxObstacle {
                    center: Vec2::new(parse_f64(line, args[0])?, parse_f64(line, args[1])?),
                    width: parse_f64(line, args[2])?,
                    depth: parse_f64(line, args[3])?,
                    yaw: parse_f64(line, args[4])?.to_radians(),
                    plate_face: face,
                });
            }
            other => {
                return Err(ScenarioError::UnknownDirective {
                    line,
                    directive: other.to_string(),
                })
            }
        }
    }

    let (gw, gh) = garage.ok_or(ScenarioError::Missing("garage"))?;
    let start = start.ok_or(ScenarioError::Missing("start"))?;
    Ok(World::new(gw, gh, start, boxes)?)
}
