//! Frame encoder/decoder and CRC-8.

use super::TelemetryPacket;
use thiserror::Error;

pub const FRAME_LEN: usize = 20;
pub const MAGIC: [u8; 2] = [0xC4, 0xAF];
pub const VERSION: u8 = 0x01;

/// Positions fit in 24 bits of millimeters: roughly +/- 8.3 km.
const POS_MM_MAX: i32 = (1 << 23) - 1;
const POS_MM_MIN: i32 = -(1 << 23);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("yaw_cdeg {0} outside -17999..=18000")]
    YawOutOfRange(i16),
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("position {0} mm does not fit the 24-bit wire field")]
    PositionOutOfRange(i32),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("crc mismatch")]
    BadCrc,
    #[error("field out of domain")]
    BadRange,
}

/// CRC-8 with polynomial 0x07, init 0x00, no reflection, no final xor.
pub fn crc8(bytes: &[u8]) -> u8 {
    let mut crc: u8 = 0x00;
    for &b in bytes {
        crc ^= b;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ 0x07 } else { crc << 1 };
        }
    }
    crc
}

fn valid_ranges(p: &TelemetryPacket) -> Result<(), EncodeError> {
    if !(-17999..=18000).contains(&p.yaw_cdeg) {
        return Err(EncodeError::YawOutOfRange(p.yaw_cdeg));
    }
    if p.label > 1 {
        return Err(EncodeError::BadLabel(p.label));
    }
    for v in [p.x_mm, p.y_mm] {
        if !(POS_MM_MIN..=POS_MM_MAX).contains(&v) {
            return Err(EncodeError::PositionOutOfRange(v));
        }
    }
    Ok(())
}

fn put_i24(buf: &mut [u8], v: i32) {
    let u = (v as u32) & 0x00FF_FFFF;
    buf[0] = u as u8;
    buf[1] = (u >> 8) as u8;
    buf[2] = (u >> 16) as u8;
}

fn get_i24(buf: &[u8]) -> i32 {
    let u = buf[0] as u32 | (buf[1] as u32) << 8 | (buf[2] as u32) << 16;
    // Sign-extend from bit 23.
    ((u << 8) as i32) >> 8
}

/// Encode one packet into a 20-byte frame. Invariants are checked first.
pub fn encode_packet(p: &TelemetryPacket) -> Result<[u8; FRAME_LEN], EncodeError> {
    valid_ranges(p)?;
    let mut f = [0u8; FRAME_LEN];
    f[0..2].copy_from_slice(&MAGIC);
    f[2] = VERSION;
    f[3..5].copy_from_slice(&p.seq.to_le_bytes());
    f[5..9].copy_from_slice(&p.timestamp_ms.to_le_bytes());
    put_i24(&mut f[9..12], p.x_mm);
    put_i24(&mut f[12..15], p.y_mm);
    f[15..17].copy_from_slice(&p.yaw_cdeg.to_le_bytes());
    f[17] = p.label;
    f[18] = p.confidence_q8;
    f[19] = crc8(&f[0..19]);
    Ok(f)
}

/// Decode and validate one 20-byte frame.
pub fn decode_packet(frame: &[u8; FRAME_LEN]) -> Result<TelemetryPacket, DecodeError> {
    if frame[0..2] != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    if frame[2] != VERSION {
        return Err(DecodeError::BadVersion(frame[2]));
    }
    if crc8(&frame[0..19]) != frame[19] {
        return Err(DecodeError::BadCrc);
    }
    let p = TelemetryPacket {
        seq: u16::from_le_bytes([frame[3], frame[4]]),
        timestamp_ms: u32::from_le_bytes([frame[5], frame[6], frame[7], frame[8]]),
        x_mm: get_i24(&frame[9..12]),
        y_mm: get_i24(&frame[12..15]),
        yaw_cdeg: i16::from_le_bytes([frame[15], frame[16]]),
        label: frame[17],
        confidence_q8: frame[18],
    };
    if !(-17999..=18000).contains(&p.yaw_cdeg) || p.label > 1 {
        return Err(DecodeError::BadRange);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent CRC-8/0x07 oracle: table-driven, built the textbook way.
    fn crc8_table_oracle(bytes: &[u8]) -> u8 {
        let mut table = [0u8; 256];
        for (i, entry) in table.iter_mut().enumerate() {
            let mut v = i as u8;
            for _ in 0..8 {
                v = if v & 0x80 != 0 { (v << 1) ^ 0x07 } else { v << 1 };
            }
            *entry = v;
        }
        bytes.iter().fold(0u8, |crc, &b| table[(crc ^ b) as usize])
    }

    pub(crate) fn random_packet(rng: &mut ChaCha8Rng) -> TelemetryPacket {
        TelemetryPacket {
            seq: rng.gen(),
            timestamp_ms: rng.gen(),
            x_mm: rng.gen_range(-(1 << 23)..(1 << 23)),
            y_mm: rng.gen_range(-(1 << 23)..(1 << 23)),
            yaw_cdeg: rng.gen_range(-17999..=18000),
            label: rng.gen_range(0..=1),
            confidence_q8: rng.gen(),
        }
    }

    #[test]
    fn crc_matches_independent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let len = rng.gen_range(0..64);
            let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            assert_eq!(crc8(&data), crc8_table_oracle(&data));
        }
        // Known check value of CRC-8/SMBUS ("123456789" -> 0xF4).
        assert_eq!(crc8(b"123456789"), 0xF4);
    }

    #[test]
    fn all_zero_packet_layout() {
        let p = TelemetryPacket {
            seq: 0,
            timestamp_ms: 0,
            x_mm: 0,
            y_mm: 0,
            yaw_cdeg: 0,
            label: 0,
            confidence_q8: 0,
        };
        let f = encode_packet(&p).unwrap();
        assert_eq!(f.len(), 20);
        assert_eq!(&f[0..3], &[0xC4, 0xAF, 0x01]);
        assert!(f[3..19].iter().all(|&b| b == 0));
        assert_eq!(f[19], crc8_table_oracle(&f[0..19]));
    }

    #[test]
    fn fixed_point_example() {
        let p = TelemetryPacket {
            seq: 0,
            timestamp_ms: 0,
            x_mm: 1234, // 1.234 m
            y_mm: 0,
            yaw_cdeg: 0,
            label: 0,
            confidence_q8: 0,
        };
        let f = encode_packet(&p).unwrap();
        assert_eq!(&f[9..12], &[0xD2, 0x04, 0x00]);
    }

    #[test]
    fn i24_sign_round_trip() {
        for v in [0, 1, -1, 8_388_607, -8_388_608, 6000, -6000] {
            let mut buf = [0u8; 3];
            put_i24(&mut buf, v);
            assert_eq!(get_i24(&buf), v);
        }
    }

    #[test]
    fn round_trip_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..10_000 {
            let p = random_packet(&mut rng);
            let f = encode_packet(&p).unwrap();
            assert_eq!(decode_packet(&f).unwrap(), p);
        }
    }

    #[test]
    fn single_bit_flips_always_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_packet(&mut rng);
        let f = encode_packet(&p).unwrap();
        for bit in 0..(FRAME_LEN * 8) {
            let mut corrupted = f;
            corrupted[bit / 8] ^= 1 << (bit % 8);
            let decoded = decode_packet(&corrupted);
            assert!(
                decoded != Ok(p),
                "bit {bit} flip produced the original packet"
            );
            assert!(decoded.is_err(), "bit {bit} flip accepted: {decoded:?}");
        }
    }

    #[test]
    fn decode_error_paths_each_reachable() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let p = random_packet(&mut rng);
        let good = encode_packet(&p).unwrap();

        let mut bad_magic = good;
        bad_magic[0] = 0x00;
        assert_eq!(decode_packet(&bad_magic), Err(DecodeError::BadMagic));

        let mut bad_version = good;
        bad_version[2] = 0x02;
        bad_version[19] = crc8(&bad_version[0..19]); // valid CRC, wrong version
        assert_eq!(decode_packet(&bad_version), Err(DecodeError::BadVersion(2)));

        let mut bad_crc = good;
        bad_crc[10] ^= 0x10;
        assert_eq!(decode_packet(&bad_crc), Err(DecodeError::BadCrc));

        let mut bad_label = good;
        bad_label[17] = 7;
        bad_label[19] = crc8(&bad_label[0..19]); // valid CRC, label out of domain
        assert_eq!(decode_packet(&bad_label), Err(DecodeError::BadRange));

        let mut bad_yaw = good;
        bad_yaw[15..17].copy_from_slice(&(-18000i16).to_le_bytes());
        bad_yaw[19] = crc8(&bad_yaw[0..19]);
        assert_eq!(decode_packet(&bad_yaw), Err(DecodeError::BadRange));
    }

    #[test]
    fn encode_rejects_invalid_packets() {
        let base = TelemetryPacket {
            seq: 0,
            timestamp_ms: 0,
            x_mm: 0,
            y_mm: 0,
            yaw_cdeg: 0,
            label: 0,
            confidence_q8: 0,
        };
        let p = TelemetryPacket { yaw_cdeg: -18000, ..base };
        assert_eq!(encode_packet(&p), Err(EncodeError::YawOutOfRange(-18000)));
        let p = TelemetryPacket { label: 2, ..base };
        assert_eq!(encode_packet(&p), Err(EncodeError::BadLabel(2)));
        let p = TelemetryPacket { x_mm: 1 << 23, ..base };
        assert!(matches!(encode_packet(&p), Err(EncodeError::PositionOutOfRange(_))));
    }
}
