//! Wire format shared by every transport.
//!
//! Frame layout, bit-exact:
//!
//! ```text
//! u32 LE  payload byte length
//! u8      phase tag
//! u8      sender id
//! u8      receiver id
//! u8      protocol opcode
//! u64 LE  sequence number (per ordered sender/receiver pair)
//! bytes   payload (8-byte little-endian ring values)
//! ```

use crate::error::{Error, Result};
use crate::net::stats::Phase;
use crate::ring::RingValue;
use crate::sharing::PartyId;

pub const FRAME_HEADER_LEN: usize = 16;
/// Frames above this payload size are rejected.
pub const MAX_FRAME_PAYLOAD: u32 = 1 << 30;

/// Protocol step identifier carried in each frame header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Handshake = 0,
    /// Resharing message of the one-round multiplication.
    Mul = 1,
    /// AND-gate resharing over XOR shares.
    BitAnd = 2,
    /// Truncation resharing message.
    Trunc = 3,
    /// Opening of masked differences in the triple-backed multiplication.
    Open = 4,
    /// Output reveal.
    Reveal = 5,
    /// Empty synchronization round.
    Sync = 6,
    /// Fresh uniform summands for an existing sharing.
    Reshare = 7,
}

impl Opcode {
    pub fn from_u8(v: u8) -> Result<Opcode> {
        Ok(match v {
            0 => Opcode::Handshake,
            1 => Opcode::Mul,
            2 => Opcode::BitAnd,
            3 => Opcode::Trunc,
            4 => Opcode::Open,
            5 => Opcode::Reveal,
            6 => Opcode::Sync,
            7 => Opcode::Reshare,
            _ => return Err(Error::Frame(format!("unknown opcode {v}"))),
        })
    }
}

/// A parsed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub phase: Phase,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub opcode: Opcode,
    pub seq: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.push(self.phase as u8);
        out.push(self.sender.0);
        out.push(self.receiver.0);
        out.push(self.opcode as u8);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(Error::Frame(format!("short frame: {} bytes", bytes.len())));
        }
        let len = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        if len > MAX_FRAME_PAYLOAD {
            return Err(Error::Frame(format!("oversize frame: {len} bytes")));
        }
        if bytes.len() != FRAME_HEADER_LEN + len as usize {
            return Err(Error::Frame(format!(
                "declared payload {len} bytes, frame carries {}",
                bytes.len() - FRAME_HEADER_LEN
            )));
        }
        Ok(Frame {
            phase: Phase::from_u8(bytes[4])?,
            sender: PartyId(bytes[5]),
            receiver: PartyId(bytes[6]),
            opcode: Opcode::from_u8(bytes[7])?,
            seq: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            payload: bytes[FRAME_HEADER_LEN..].to_vec(),
        })
    }

    /// Total on-the-wire size.
    pub fn wire_len(&self) -> u64 {
        (FRAME_HEADER_LEN + self.payload.len()) as u64
    }
}

pub fn ring_to_bytes(words: &[RingValue]) -> Vec<u8> {
    let mut out = Vec::with_capacity(words.len() * 8);
    for w in words {
        out.extend_from_slice(&w.0.to_le_bytes());
    }
    out
}

pub fn bytes_to_ring(bytes: &[u8]) -> Result<Vec<RingValue>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Frame(format!(
            "payload of {} bytes is not a whole number of ring values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| RingValue(u64::from_le_bytes(c.try_into().unwrap())))
        .collect())
}
