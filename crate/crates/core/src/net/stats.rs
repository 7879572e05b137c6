//! Per-phase byte, frame, round and timing accounting.

use crate::error::{Error, Result};

/// Accounting phase labels. A superset of a coarse setup/inference split,
/// chosen so the communication breakdown can be plotted per kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Phase {
    Setup = 0,
    ShareInput = 1,
    Linear = 2,
    Mul = 3,
    Trunc = 4,
    Compare = 5,
    Softmax = 6,
    Gelu = 7,
    Output = 8,
}

pub const NUM_PHASES: usize = 9;

pub const ALL_PHASES: [Phase; NUM_PHASES] = [
    Phase::Setup,
    Phase::ShareInput,
    Phase::Linear,
    Phase::Mul,
    Phase::Trunc,
    Phase::Compare,
    Phase::Softmax,
    Phase::Gelu,
    Phase::Output,
];

impl Phase {
    pub fn from_u8(v: u8) -> Result<Phase> {
        if (v as usize) < NUM_PHASES {
            Ok(ALL_PHASES[v as usize])
        } else {
            Err(Error::Frame(format!("unknown phase tag {v}")))
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Setup => "setup",
            Phase::ShareInput => "share_input",
            Phase::Linear => "linear",
            Phase::Mul => "mul",
            Phase::Trunc => "trunc",
            Phase::Compare => "compare",
            Phase::Softmax => "softmax",
            Phase::Gelu => "gelu",
            Phase::Output => "output",
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// Byte-level counters, kept per `(sender, receiver, phase)` at frame
/// granularity. One instance per party; instances add up across parties.
#[derive(Debug, Clone, PartialEq)]
pub struct CommStats {
    /// Bytes put on the wire, `[sender][receiver][phase]`, headers included.
    pub bytes_sent: [[[u64; NUM_PHASES]; 3]; 3],
    /// Bytes taken off the wire, same indexing by the true sender/receiver.
    pub bytes_received: [[[u64; NUM_PHASES]; 3]; 3],
    pub frames_sent: [[[u64; NUM_PHASES]; 3]; 3],
    /// Communication rounds entered, per phase.
    pub rounds: [u64; NUM_PHASES],
    /// Interactive elementwise secure multiplications, per phase.
    pub elem_muls: [u64; NUM_PHASES],
    /// Wall-clock spent inside each phase, milliseconds.
    pub wall_ms: [f64; NUM_PHASES],
    /// FNV-1a over every frame this party sent, in order.
    pub transcript_hash: u64,
}

impl Default for CommStats {
    fn default() -> Self {
        CommStats {
            bytes_sent: [[[0; NUM_PHASES]; 3]; 3],
            bytes_received: [[[0; NUM_PHASES]; 3]; 3],
            frames_sent: [[[0; NUM_PHASES]; 3]; 3],
            rounds: [0; NUM_PHASES],
            elem_muls: [0; NUM_PHASES],
            wall_ms: [0.0; NUM_PHASES],
            transcript_hash: FNV_OFFSET,
        }
    }
}

impl CommStats {
    pub fn record_sent(&mut self, sender: usize, receiver: usize, phase: Phase, wire_bytes: u64) {
        self.bytes_sent[sender][receiver][phase as usize] += wire_bytes;
        self.frames_sent[sender][receiver][phase as usize] += 1;
    }

    pub fn record_received(
        &mut self,
        sender: usize,
        receiver: usize,
        phase: Phase,
        wire_bytes: u64,
    ) {
        self.bytes_received[sender][receiver][phase as usize] += wire_bytes;
    }

    pub fn absorb_transcript(&mut self, frame_bytes: &[u8]) {
        let mut h = self.transcript_hash;
        for &b in frame_bytes {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
        self.transcript_hash = h;
    }

    pub fn total_bytes_sent(&self) -> u64 {
        self.bytes_sent.iter().flatten().flatten().sum()
    }

    pub fn total_bytes_received(&self) -> u64 {
        self.bytes_received.iter().flatten().flatten().sum()
    }

    pub fn total_frames(&self) -> u64 {
        self.frames_sent.iter().flatten().flatten().sum()
    }

    pub fn total_rounds(&self) -> u64 {
        self.rounds.iter().sum()
    }

    pub fn total_elem_muls(&self) -> u64 {
        self.elem_muls.iter().sum()
    }

    pub fn phase_bytes(&self, phase: Phase) -> u64 {
        let mut total = 0;
        for s in 0..3 {
            for r in 0..3 {
                total += self.bytes_sent[s][r][phase as usize];
            }
        }
        total
    }

    pub fn phase_frames(&self, phase: Phase) -> u64 {
        let mut total = 0;
        for s in 0..3 {
            for r in 0..3 {
                total += self.frames_sent[s][r][phase as usize];
            }
        }
        total
    }

    pub fn pair_bytes(&self, sender: usize, receiver: usize) -> u64 {
        self.bytes_sent[sender][receiver].iter().sum()
    }

    /// Adds another party's counters into this one. Rounds and wall clock
    /// take the maximum since parties advance in lockstep.
    pub fn merge(&mut self, other: &CommStats) {
        for s in 0..3 {
            for r in 0..3 {
                for p in 0..NUM_PHASES {
                    self.bytes_sent[s][r][p] += other.bytes_sent[s][r][p];
                    self.bytes_received[s][r][p] += other.bytes_received[s][r][p];
                    self.frames_sent[s][r][p] += other.frames_sent[s][r][p];
                }
            }
        }
        for p in 0..NUM_PHASES {
            self.rounds[p] = self.rounds[p].max(other.rounds[p]);
            self.elem_muls[p] += other.elem_muls[p];
            self.wall_ms[p] = self.wall_ms[p].max(other.wall_ms[p]);
        }
    }

    pub fn report(&self) -> CommReport {
        let mut per_phase = Vec::new();
        for &p in &ALL_PHASES {
            per_phase.push((
                p.name(),
                kb(self.phase_bytes(p)),
                self.rounds[p as usize],
                self.wall_ms[p as usize],
            ));
        }
        let mut per_pair = Vec::new();
        for s in 0..3 {
            for r in 0..3 {
                if s != r {
                    per_pair.push(((s, r), kb(self.pair_bytes(s, r))));
                }
            }
        }
        CommReport {
            per_phase,
            per_pair,
            total_kb: kb(self.total_bytes_sent()),
            total_rounds: self.total_rounds(),
            total_frames: self.total_frames(),
        }
    }
}

fn kb(bytes: u64) -> f64 {
    (bytes as f64 / 1024.0 * 10.0).round() / 10.0
}

/// Read-only summary snapshot, KB at one decimal.
#[derive(Debug, Clone)]
pub struct CommReport {
    /// `(phase, kb, rounds, wall_ms)`
    pub per_phase: Vec<(&'static str, f64, u64, f64)>,
    /// `((sender, receiver), kb)`
    pub per_pair: Vec<((usize, usize), f64)>,
    pub total_kb: f64,
    pub total_rounds: u64,
    pub total_frames: u64,
}

impl std::fmt::Display for CommReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "phase        KB       rounds   ms")?;
        for (name, kb, rounds, ms) in &self.per_phase {
            writeln!(f, "{name:<12} {kb:<8} {rounds:<8} {ms:.1}")?;
        }
        for ((s, r), kb) in &self.per_pair {
            if *kb > 0.0 {
                writeln!(f, "P{} -> P{}: {kb} KB", s + 1, r + 1)?;
            }
        }
        write!(
            f,
            "total: {} KB, {} rounds, {} frames",
            self.total_kb, self.total_rounds, self.total_frames
        )
    }
}
