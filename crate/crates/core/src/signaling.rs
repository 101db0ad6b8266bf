//! Collision/occupancy-based signaling codec.
//!
//! Users have no control channel, so quantized channel estimates are
//! exchanged by on-off keying on a rank-indexed home channel: a speaker
//! transmits for a 1-bit and idles for a 0-bit while everyone else parks a
//! narrowband sensor on the home channel and reads the busy/idle pattern.
//! Speakers hold disjoint slot ranges, so signaling itself never collides;
//! its cost shows up as regret because listeners collect nothing.

use thiserror::Error;

use crate::radio::Action;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignalError {
    #[error("quantization width must be 1..=16 bits, got {0}")]
    BadBitWidth(u8),
    #[error("sensed pattern has {got} slots, expected {expected}")]
    BadFrameLength { got: usize, expected: usize },
    #[error("parity failure in channel word {channel}")]
    Parity { channel: usize },
}

fn check_bits(bits: u8) -> Result<(), SignalError> {
    if (1..=16).contains(&bits) {
        Ok(())
    } else {
        Err(SignalError::BadBitWidth(bits))
    }
}

/// Largest representable level for a `bits`-wide word.
pub fn max_level(bits: u8) -> u16 {
    (((1u32 << bits) - 1) & 0xffff) as u16
}

/// Round each mean in [0,1] to a `bits`-wide level.
pub fn quantize(means: &[f64], bits: u8) -> Result<Vec<u16>, SignalError> {
    check_bits(bits)?;
    let top = max_level(bits) as f64;
    Ok(means.iter().map(|m| (m.clamp(0.0, 1.0) * top).round() as u16).collect())
}

pub fn dequantize_level(level: u16, bits: u8) -> f64 {
    level as f64 / max_level(bits) as f64
}

pub fn dequantize(levels: &[u16], bits: u8) -> Vec<f64> {
    levels.iter().map(|&q| dequantize_level(q, bits)).collect()
}

/// Slots one speaker's frame occupies: per channel, `bits` payload bits plus
/// one parity bit.
pub fn frame_len(num_channels: usize, bits: u8) -> usize {
    num_channels * (bits as usize + 1)
}

/// Serialize quantized levels into the on-air bit pattern. Each channel word
/// is sent MSB-first followed by an even-parity bit.
pub fn frame_bits(levels: &[u16], bits: u8) -> Result<Vec<bool>, SignalError> {
    check_bits(bits)?;
    let mut out = Vec::with_capacity(frame_len(levels.len(), bits));
    for &level in levels {
        let mut ones = 0u8;
        for b in (0..bits).rev() {
            let bit = (level >> b) & 1 == 1;
            ones += bit as u8;
            out.push(bit);
        }
        out.push(ones % 2 == 1); // even parity over payload+parity
    }
    Ok(out)
}

/// The action a speaker takes for one frame bit: transmit on the home channel
/// for a 1, stay silent for a 0.
pub fn emit_bit(bit: bool, home_channel: usize) -> Action {
    if bit {
        Action::transmit(home_channel)
    } else {
        Action::idle()
    }
}

/// Inverse of [`frame_bits`]: recover the quantized levels from a sensed
/// busy/idle pattern, flagging the first parity failure.
pub fn decode_frame(sensed: &[bool], num_channels: usize, bits: u8) -> Result<Vec<u16>, SignalError> {
    check_bits(bits)?;
    let expected = frame_len(num_channels, bits);
    if sensed.len() != expected {
        return Err(SignalError::BadFrameLength { got: sensed.len(), expected });
    }
    let word = bits as usize + 1;
    let mut out = Vec::with_capacity(num_channels);
    for c in 0..num_channels {
        let chunk = &sensed[c * word..(c + 1) * word];
        let ones = chunk[..bits as usize].iter().filter(|&&b| b).count();
        let parity = chunk[bits as usize];
        if parity != (ones % 2 == 1) {
            return Err(SignalError::Parity { channel: c });
        }
        let mut level = 0u16;
        for &bit in &chunk[..bits as usize] {
            level = (level << 1) | bit as u16;
        }
        out.push(level);
    }
    Ok(out)
}

/// One speaker's frame: its payload bits and where/when they go on air.
#[derive(Debug, Clone)]
pub struct Frame {
    pub speaker_rank: usize,
    pub home_channel: usize,
    pub start_slot: u64,
    pub bits: Vec<bool>,
}

impl Frame {
    /// Build the frame for the speaker holding 1-based `rank` out of `n`
    /// signalers, inside a signaling phase beginning at `phase_start`.
    /// Speaker slot ranges are disjoint by construction.
    pub fn new(
        rank: usize,
        num_channels: usize,
        bit_width: u8,
        phase_start: u64,
        levels: &[u16],
    ) -> Result<Self, SignalError> {
        let len = frame_len(num_channels, bit_width) as u64;
        Ok(Self {
            speaker_rank: rank,
            home_channel: home_channel(rank, num_channels),
            start_slot: phase_start + (rank as u64 - 1) * len,
            bits: frame_bits(levels, bit_width)?,
        })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Action for absolute slot `t`, if it falls inside this frame.
    pub fn action_at(&self, t: u64) -> Option<Action> {
        let offset = t.checked_sub(self.start_slot)? as usize;
        self.bits.get(offset).map(|&b| emit_bit(b, self.home_channel))
    }
}

/// Home channel for the 1-based speaker rank.
pub fn home_channel(rank: usize, num_channels: usize) -> usize {
    (rank - 1) % num_channels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::ActionKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(&[0.0], 8).unwrap(), vec![0]);
        assert_eq!(quantize(&[1.0], 8).unwrap(), vec![255]);
        let q = quantize(&[0.57], 8).unwrap();
        assert_eq!(q, vec![145]);
        let back = dequantize_level(145, 8);
        assert!((back - 0.57).abs() < 1.0 / 255.0);
        assert!((back - 0.5686).abs() < 1e-3);
    }

    #[test]
    fn bit_width_bounds() {
        assert_eq!(quantize(&[0.5], 0), Err(SignalError::BadBitWidth(0)));
        assert_eq!(quantize(&[0.5], 17), Err(SignalError::BadBitWidth(17)));
        assert!(quantize(&[0.5], 16).is_ok());
    }

    #[test]
    fn emit_bit_pattern() {
        // Bits 101 -> transmit, idle, transmit.
        let acts: Vec<Action> = [true, false, true].iter().map(|&b| emit_bit(b, 3)).collect();
        assert_eq!(acts[0], Action::transmit(3));
        assert_eq!(acts[1].kind, ActionKind::Idle);
        assert_eq!(acts[2], Action::transmit(3));
    }

    #[test]
    fn all_zero_payload_stays_silent() {
        let bits = frame_bits(&[0, 0], 4).unwrap();
        assert!(bits.iter().all(|&b| !b));
    }

    #[test]
    fn roundtrip_all_single_channel_words() {
        for level in 0u16..=255 {
            let bits = frame_bits(&[level], 8).unwrap();
            assert_eq!(bits.len(), 9);
            let decoded = decode_frame(&bits, 1, 8).unwrap();
            assert_eq!(decoded, vec![level]);
        }
    }

    #[test]
    fn roundtrip_random_full_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let means: Vec<f64> = (0..12).map(|_| rng.gen::<f64>()).collect();
            let q = quantize(&means, 8).unwrap();
            let bits = frame_bits(&q, 8).unwrap();
            assert_eq!(bits.len(), 108);
            let decoded = decode_frame(&bits, 12, 8).unwrap();
            assert_eq!(decoded, q);
            for (m, d) in means.iter().zip(dequantize(&decoded, 8)) {
                assert!((m - d).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }

    #[test]
    fn parity_flip_is_detected() {
        let q = quantize(&[0.3, 0.9], 8).unwrap();
        let mut bits = frame_bits(&q, 8).unwrap();
        bits[10] = !bits[10];
        assert_eq!(decode_frame(&bits, 2, 8), Err(SignalError::Parity { channel: 1 }));
    }

    #[test]
    fn speaker_schedules_are_disjoint() {
        let k = 12;
        let b = 8;
        let levels = vec![0u16; k];
        let frames: Vec<Frame> =
            (1..=4).map(|r| Frame::new(r, k, b, 1000, &levels).unwrap()).collect();
        for w in frames.windows(2) {
            assert_eq!(w[0].start_slot + w[0].len() as u64, w[1].start_slot);
        }
        assert_eq!(frames[0].len(), 108);
        assert_eq!(frames[3].start_slot + 108, 1000 + 4 * 108);
    }
}
