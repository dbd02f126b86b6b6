//! Bit-exact telemetry wire protocol and transports.
//!
//! Fixed 20-byte frames, little-endian:
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0xC4 0xAF
//! 2       1     version 0x01
//! 3       2     seq (u16)
//! 5       4     timestamp_ms (u32)
//! 9       3     x_mm (i24)
//! 12      3     y_mm (i24)
//! 15      2     yaw_cdeg (i16, -17999..=18000)
//! 17      1     label (0 background, 1 plate)
//! 18      1     confidence_q8 (confidence * 255, rounded half-up)
//! 19      1     crc8 over bytes 0..19 (poly 0x07, init 0x00)
//! ```
//!
//! Fixed framing lets a receiver resynchronize on the magic bytes without a
//! length field; the CRC gives end-to-end integrity on lossy paths.

mod codec;
mod framer;
pub mod transport;

pub use codec::{crc8, decode_packet, encode_packet, DecodeError, EncodeError, FRAME_LEN, MAGIC, VERSION};
pub use framer::{Deframer, PartialFrame};
pub use transport::{DropModel, SendError, TelemetryReceiver, TelemetrySender};

use crate::detector::{DetectionEvent, Label};
use crate::world::Pose;

/// One telemetry frame: estimated position plus the classification result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TelemetryPacket {
    pub seq: u16,
    pub timestamp_ms: u32,
    pub x_mm: i32,
    pub y_mm: i32,
    pub yaw_cdeg: i16,
    pub label: u8,
    pub confidence_q8: u8,
}

impl TelemetryPacket {
    pub fn from_event(ev: &DetectionEvent) -> Self {
        let pose = ev.estimated_pose;
        // Yaw in (-pi, pi] rounds into (-18000, 18000]; a round down to
        // -18000 is the same angle as +18000, the in-range endpoint.
        let mut yaw_cdeg = (pose.yaw.to_degrees() * 100.0).round() as i32;
        if yaw_cdeg <= -18000 {
            yaw_cdeg += 36000;
        }
        TelemetryPacket {
            seq: (ev.frame_index % 65536) as u16,
            timestamp_ms: (ev.sim_time * 1000.0).round() as u32,
            x_mm: (pose.position.x * 1000.0).round() as i32,
            y_mm: (pose.position.y * 1000.0).round() as i32,
            yaw_cdeg: yaw_cdeg as i16,
            label: match ev.label {
                Label::Plate => 1,
                Label::Background => 0,
            },
            confidence_q8: (ev.confidence * 255.0 + 0.5).floor() as u8,
        }
    }

    pub fn position_m(&self) -> (f64, f64) {
        (self.x_mm as f64 / 1000.0, self.y_mm as f64 / 1000.0)
    }

    pub fn yaw_rad(&self) -> f64 {
        (self.yaw_cdeg as f64 / 100.0).to_radians()
    }

    pub fn confidence(&self) -> f64 {
        self.confidence_q8 as f64 / 255.0
    }

    pub fn label_enum(&self) -> Label {
        if self.label == 1 {
            Label::Plate
        } else {
            Label::Background
        }
    }

    pub fn estimated_pose(&self) -> Pose {
        let (x, y) = self.position_m();
        Pose::new(crate::world::Vec2::new(x, y), self.yaw_rad())
    }
}
