//! Byte-stream deframing with resynchronization on the magic bytes.

use super::codec::{decode_packet, FRAME_LEN, MAGIC};
use super::TelemetryPacket;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("stream ended mid-frame with {0} bytes pending")]
pub struct PartialFrame(pub usize);

/// Incremental deframer: feed arbitrary byte chunks, pull decoded packets.
///
/// On a bad magic byte or a frame that fails validation the window slides
/// forward one byte and rescans, so garbage between frames is skipped without
/// losing the frames around it; corruption inside a frame costs exactly that
/// frame.
#[derive(Debug, Default)]
pub struct Deframer {
    buf: Vec<u8>,
    consumed: usize,
    /// Bytes discarded while hunting for a frame start.
    pub skipped_bytes: u64,
    /// Frames that had a magic prefix but failed validation.
    pub bad_frames: u64,
}

impl Deframer {
    pub fn new() -> Self {
        Deframer::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        // Compact lazily so long streams don't grow without bound.
        if self.consumed > 4096 {
            self.buf.drain(..self.consumed);
            self.consumed = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Next decodable packet, if a complete valid frame is buffered.
    pub fn next_packet(&mut self) -> Option<TelemetryPacket> {
        loop {
            let pending = &self.buf[self.consumed..];
            if pending.len() < FRAME_LEN {
                // Not enough for a frame; drop leading bytes that cannot
                // start one so `pending_bytes` reflects a real partial frame.
                return None;
            }
            if pending[0..2] != MAGIC {
                self.consumed += 1;
                self.skipped_bytes += 1;
                continue;
            }
            let frame: [u8; FRAME_LEN] = pending[..FRAME_LEN].try_into().unwrap();
            match decode_packet(&frame) {
                Ok(p) => {
                    self.consumed += FRAME_LEN;
                    return Some(p);
                }
                Err(_) => {
                    self.consumed += 1;
                    self.bad_frames += 1;
                    continue;
                }
            }
        }
    }

    /// Bytes buffered but not yet consumed.
    pub fn pending_bytes(&self) -> usize {
        self.buf.len() - self.consumed
    }

    /// Call at end of stream: pending bytes that look like a frame start mean
    /// the connection closed mid-frame.
    pub fn finish(&self) -> Result<(), PartialFrame> {
        let pending = &self.buf[self.consumed..];
        if pending.len() >= 2 && pending[0..2] == MAGIC {
            return Err(PartialFrame(pending.len()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::codec::encode_packet;

    fn packet(seq: u16) -> TelemetryPacket {
        TelemetryPacket {
            seq,
            timestamp_ms: seq as u32 * 500,
            x_mm: 1000 + seq as i32,
            y_mm: -2000,
            yaw_cdeg: 9000,
            label: (seq % 2) as u8,
            confidence_q8: 200,
        }
    }

    fn drain(d: &mut Deframer) -> Vec<u16> {
        let mut seqs = Vec::new();
        while let Some(p) = d.next_packet() {
            seqs.push(p.seq);
        }
        seqs
    }

    #[test]
    fn clean_stream_round_trips() {
        let mut d = Deframer::new();
        let mut stream = Vec::new();
        for seq in 0..50 {
            stream.extend_from_slice(&encode_packet(&packet(seq)).unwrap());
        }
        // Feed in awkward chunk sizes.
        for chunk in stream.chunks(7) {
            d.push(chunk);
        }
        assert_eq!(drain(&mut d), (0..50).collect::<Vec<u16>>());
        assert_eq!(d.skipped_bytes, 0);
        assert_eq!(d.bad_frames, 0);
        assert!(d.finish().is_ok());
    }

    #[test]
    fn garbage_between_frames_is_skipped() {
        let mut d = Deframer::new();
        let mut stream = Vec::new();
        stream.extend_from_slice(&encode_packet(&packet(1)).unwrap());
        stream.extend_from_slice(&[0x55, 0x00, 0x13]); // inter-frame noise
        stream.extend_from_slice(&encode_packet(&packet(2)).unwrap());
        d.push(&stream);
        // Resynchronizes at the next magic; both frames survive.
        assert_eq!(drain(&mut d), vec![1, 2]);
        assert_eq!(d.skipped_bytes, 3);
    }

    #[test]
    fn corrupted_frame_is_lost_then_resync() {
        let mut d = Deframer::new();
        let mut f1 = encode_packet(&packet(1)).unwrap();
        f1[10] ^= 0x01; // payload bit flip: CRC fails
        let mut stream = Vec::new();
        stream.extend_from_slice(&f1);
        stream.extend_from_slice(&encode_packet(&packet(2)).unwrap());
        stream.extend_from_slice(&encode_packet(&packet(3)).unwrap());
        d.push(&stream);
        assert_eq!(drain(&mut d), vec![2, 3]);
        assert!(d.bad_frames >= 1);
    }

    #[test]
    fn partial_frame_at_end_of_stream() {
        let mut d = Deframer::new();
        let f = encode_packet(&packet(9)).unwrap();
        d.push(&f[..11]); // connection died mid-frame
        assert_eq!(d.next_packet(), None);
        assert_eq!(d.finish(), Err(PartialFrame(11)));
    }

    #[test]
    fn magic_bytes_inside_payload_do_not_desync() {
        // Craft a packet whose payload contains the magic sequence.
        let p = TelemetryPacket {
            seq: u16::from_le_bytes([0xC4, 0xAF]),
            timestamp_ms: 0xC4AF_C4AF,
            x_mm: 0x00C4AF,
            y_mm: 0x00C4AF,
            yaw_cdeg: 0,
            label: 1,
            confidence_q8: 0xC4,
        };
        let mut d = Deframer::new();
        let mut stream = Vec::new();
        for _ in 0..3 {
            stream.extend_from_slice(&encode_packet(&p).unwrap());
        }
        d.push(&stream);
        let mut n = 0;
        while let Some(got) = d.next_packet() {
            assert_eq!(got, p);
            n += 1;
        }
        assert_eq!(n, 3);
    }
}
