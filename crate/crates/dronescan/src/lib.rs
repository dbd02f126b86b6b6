//! Deterministic 2D simulator and evaluation harness for a nano-drone that
//! wall-follows along rows of plate-bearing boxes, classifies camera frames
//! as plate/background, streams telemetry to a remote client, and builds a
//! 2D map with precision/recall/F1 evaluation and cross-round coverage.
//!
//! Everything is seeded and tick-driven: identical configuration yields
//! byte-identical logs, metrics, and rendered maps.

pub mod config;
pub mod controller;
pub mod detector;
pub mod drone;
pub mod mapper;
pub mod rng;
pub mod runner;
pub mod telemetry;
pub mod world;
