//! Per-party protocol execution context.

use crate::error::{Error, Result};
use crate::net::frame::{bytes_to_ring, ring_to_bytes, Frame, Opcode};
use crate::net::stats::{CommStats, Phase};
use crate::net::transport::Transport;
use crate::ring::{FixedPointConfig, RingValue};
use crate::sharing::PartyId;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// One party's sequential protocol engine. All cross-party interaction goes
/// through [`PartyCtx::exchange`]; no state is shared between parties.
pub struct PartyCtx {
    pub id: PartyId,
    pub fx: FixedPointConfig,
    pub stats: CommStats,
    /// Reveal operations performed; inference code asserts this stays at the
    /// configured number of output reveals.
    pub reveal_count: u64,
    transport: Box<dyn Transport>,
    /// PRG for the seed shared with the next party (seed index `id`).
    prg_next: ChaCha8Rng,
    /// PRG for the seed shared with the previous party (seed index `id-1`).
    prg_prev: ChaCha8Rng,
    phase_stack: Vec<Phase>,
    send_seq: [u64; 3],
    recv_seq: [u64; 3],
}

impl PartyCtx {
    pub fn new(
        id: PartyId,
        fx: FixedPointConfig,
        transport: Box<dyn Transport>,
        seed_with_next: u64,
        seed_with_prev: u64,
    ) -> Self {
        PartyCtx {
            id,
            fx,
            stats: CommStats::default(),
            reveal_count: 0,
            transport,
            prg_next: ChaCha8Rng::seed_from_u64(seed_with_next),
            prg_prev: ChaCha8Rng::seed_from_u64(seed_with_prev),
            phase_stack: vec![Phase::Setup],
            send_seq: [0; 3],
            recv_seq: [0; 3],
        }
    }

    pub fn phase(&self) -> Phase {
        *self.phase_stack.last().unwrap()
    }

    /// Runs `f` with `phase` as the current accounting label, timing it.
    pub fn in_phase<T>(
        &mut self,
        phase: Phase,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        self.phase_stack.push(phase);
        let start = Instant::now();
        let out = f(self);
        self.stats.wall_ms[phase as usize] += start.elapsed().as_secs_f64() * 1e3;
        self.phase_stack.pop();
        out
    }

    pub fn count_elem_muls(&mut self, n: u64) {
        self.stats.elem_muls[self.phase() as usize] += n;
    }

    /// One synchronized communication round: every outbound frame is sent,
    /// then every expected inbound frame is awaited. Blocking receives give
    /// barrier semantics; the round counter advances even for empty rounds.
    pub fn exchange(
        &mut self,
        opcode: Opcode,
        sends: &[(PartyId, &[RingValue])],
        recv_from: &[PartyId],
    ) -> Result<Vec<Vec<RingValue>>> {
        let raw_sends: Vec<(PartyId, Vec<u8>)> = sends
            .iter()
            .map(|(to, words)| (*to, ring_to_bytes(words)))
            .collect();
        let raw = self.exchange_bytes(
            opcode,
            &raw_sends
                .iter()
                .map(|(to, b)| (*to, b.as_slice()))
                .collect::<Vec<_>>(),
            recv_from,
        )?;
        raw.iter().map(|b| bytes_to_ring(b)).collect()
    }

    pub fn exchange_bytes(
        &mut self,
        opcode: Opcode,
        sends: &[(PartyId, &[u8])],
        recv_from: &[PartyId],
    ) -> Result<Vec<Vec<u8>>> {
        let phase = self.phase();
        self.stats.rounds[phase as usize] += 1;
        for (to, payload) in sends {
            if *to == self.id {
                return Err(Error::Frame("cannot send to self".into()));
            }
            let frame = Frame {
                phase,
                sender: self.id,
                receiver: *to,
                opcode,
                seq: self.send_seq[to.index()],
                payload: payload.to_vec(),
            };
            self.send_seq[to.index()] += 1;
            let bytes = frame.encode();
            self.stats
                .record_sent(self.id.index(), to.index(), phase, bytes.len() as u64);
            self.stats.absorb_transcript(&bytes);
            self.transport.send(*to, bytes)?;
        }
        let mut received = Vec::with_capacity(recv_from.len());
        for from in recv_from {
            let bytes = self.transport.recv(*from)?;
            let frame = Frame::decode(&bytes)?;
            if frame.sender != *from || frame.receiver != self.id {
                return Err(Error::Desync(format!(
                    "frame addressed {} -> {}, expected {} -> {}",
                    frame.sender, frame.receiver, from, self.id
                )));
            }
            if frame.opcode != opcode {
                return Err(Error::Desync(format!(
                    "expected opcode {:?}, got {:?} from {}",
                    opcode, frame.opcode, from
                )));
            }
            if frame.seq != self.recv_seq[from.index()] {
                return Err(Error::Desync(format!(
                    "expected seq {} from {}, got {}",
                    self.recv_seq[from.index()],
                    from,
                    frame.seq
                )));
            }
            self.recv_seq[from.index()] += 1;
            self.stats.record_received(
                from.index(),
                self.id.index(),
                frame.phase,
                frame.wire_len(),
            );
            received.push(frame.payload);
        }
        Ok(received)
    }

    /// Draws `n` summands of a fresh sharing of zero: every party computes
    /// `F(seed_next) - F(seed_prev)`, which telescopes to zero across the
    /// three parties. Both holders of each seed must draw in lockstep, which
    /// holds because parties execute the same protocol program.
    pub fn zero_share(&mut self, n: usize) -> Vec<RingValue> {
        (0..n)
            .map(|_| {
                let next: u64 = self.prg_next.gen();
                let prev: u64 = self.prg_prev.gen();
                RingValue(next.wrapping_sub(prev))
            })
            .collect()
    }

    /// XOR variant for binary shares.
    pub fn zero_share_xor(&mut self, n: usize) -> Vec<u64> {
        (0..n)
            .map(|_| self.prg_next.next_u64() ^ self.prg_prev.next_u64())
            .collect()
    }

    /// Draws `n` words from the PRG shared with the next party.
    pub fn draw_with_next(&mut self, n: usize) -> Vec<RingValue> {
        (0..n).map(|_| RingValue(self.prg_next.gen())).collect()
    }

    /// Draws `n` words from the PRG shared with the previous party.
    pub fn draw_with_prev(&mut self, n: usize) -> Vec<RingValue> {
        (0..n).map(|_| RingValue(self.prg_prev.gen())).collect()
    }
}
