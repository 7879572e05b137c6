//! Session establishment and the three-party runners.

use crate::error::{Error, Result};
use crate::net::ctx::PartyCtx;
use crate::net::frame::Opcode;
use crate::net::stats::CommStats;
use crate::net::transport::{InProcessTransport, TcpTransport, Transport};
use crate::ring::FixedPointConfig;
use crate::sharing::PartyId;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::time::Duration;

const PROTOCOL_VERSION: u64 = 1;

/// Descriptive label for a party; has no protocol effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleKind {
    UavNode,
    OperatorStation,
    ComputationServer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartyRole {
    pub id: PartyId,
    pub kind: RoleKind,
}

impl PartyRole {
    /// The conventional three-component assignment.
    pub fn default_trio() -> Vec<PartyRole> {
        vec![
            PartyRole { id: PartyId(0), kind: RoleKind::UavNode },
            PartyRole { id: PartyId(1), kind: RoleKind::OperatorStation },
            PartyRole { id: PartyId(2), kind: RoleKind::ComputationServer },
        ]
    }
}

/// Everything all parties must agree on before the first protocol step.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub roles: Vec<PartyRole>,
    /// Pairwise PRG seeds; `seeds[k]` is shared by `P_k` and `P_{k+1}`.
    pub seeds: [u64; 3],
    pub fx: FixedPointConfig,
    /// Simulated per-message latency.
    pub latency: Duration,
}

impl SessionConfig {
    pub fn in_process(seed: u64, fx: FixedPointConfig) -> Self {
        // Derive the three pairwise seeds from one master seed (splitmix-style).
        let mix = |k: u64| {
            let mut z = seed.wrapping_add(k.wrapping_mul(0x9e3779b97f4a7c15));
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        };
        SessionConfig {
            roles: PartyRole::default_trio(),
            seeds: [mix(1), mix(2), mix(3)],
            fx,
            latency: Duration::ZERO,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.roles.len() != 3 {
            return Err(Error::Handshake(format!(
                "need exactly 3 parties, got {}",
                self.roles.len()
            )));
        }
        let mut seen = [false; 3];
        for role in &self.roles {
            let idx = role.id.index();
            if idx > 2 || seen[idx] {
                return Err(Error::Handshake(format!("duplicate or bad id {}", role.id)));
            }
            seen[idx] = true;
        }
        Ok(())
    }

    fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut absorb = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        absorb(PROTOCOL_VERSION);
        absorb(self.fx.fractional_bits as u64);
        for role in &self.roles {
            absorb(role.id.0 as u64);
            absorb(role.kind as u64);
        }
        h
    }
}

/// Outputs and accounting from all three parties of one protocol run.
pub struct SessionReport<R> {
    pub outputs: [R; 3],
    pub party_stats: [CommStats; 3],
}

impl<R> SessionReport<R> {
    /// Session-wide accounting (bytes summed, rounds in lockstep).
    pub fn merged_stats(&self) -> CommStats {
        let mut merged = self.party_stats[0].clone();
        merged.merge(&self.party_stats[1]);
        merged.merge(&self.party_stats[2]);
        merged
    }

    /// Per-party transcript hashes; equal across reruns with equal seeds.
    pub fn transcripts(&self) -> [u64; 3] {
        [
            self.party_stats[0].transcript_hash,
            self.party_stats[1].transcript_hash,
            self.party_stats[2].transcript_hash,
        ]
    }
}

fn handshake(ctx: &mut PartyCtx, digest: u64) -> Result<()> {
    let payload = digest.to_le_bytes();
    let next = ctx.id.next();
    let prev = ctx.id.prev();
    let got = ctx.exchange_bytes(Opcode::Handshake, &[(next, &payload)], &[prev])?;
    let theirs = u64::from_le_bytes(
        got[0]
            .as_slice()
            .try_into()
            .map_err(|_| Error::Handshake("bad digest payload".into()))?,
    );
    if theirs != digest {
        return Err(Error::Handshake(format!(
            "config digest mismatch: {prev} sent {theirs:#x}, expected {digest:#x}"
        )));
    }
    Ok(())
}

fn build_ctx(
    cfg: &SessionConfig,
    id: PartyId,
    transport: Box<dyn Transport>,
) -> Result<PartyCtx> {
    let seed_next = cfg.seeds[id.index()];
    let seed_prev = cfg.seeds[id.prev().index()];
    let mut ctx = PartyCtx::new(id, cfg.fx, transport, seed_next, seed_prev);
    handshake(&mut ctx, cfg.digest())?;
    Ok(ctx)
}

/// Runs the same protocol program on three in-process parties and collects
/// outputs plus accounting. Deterministic given the configured seeds.
pub fn run_in_process<R, F>(cfg: &SessionConfig, f: F) -> Result<SessionReport<R>>
where
    R: Send,
    F: Fn(&mut PartyCtx) -> Result<R> + Sync,
{
    cfg.validate()?;
    let transports = InProcessTransport::trio(cfg.latency);
    run_on_transports(cfg, transports.map(|t| Box::new(t) as Box<dyn Transport>), &f)
}

fn run_on_transports<R, F>(
    cfg: &SessionConfig,
    transports: [Box<dyn Transport>; 3],
    f: &F,
) -> Result<SessionReport<R>>
where
    R: Send,
    F: Fn(&mut PartyCtx) -> Result<R> + Sync,
{
    let results: Vec<Result<(R, CommStats)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = transports
            .into_iter()
            .enumerate()
            .map(|(i, transport)| {
                scope.spawn(move || {
                    let mut ctx = build_ctx(cfg, PartyId(i as u8), transport)?;
                    let out = f(&mut ctx)?;
                    Ok((out, ctx.stats))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| match h.join() {
                Ok(r) => r,
                Err(_) => Err(Error::Transport("party thread panicked".into())),
            })
            .collect()
    });
    let mut outputs = Vec::with_capacity(3);
    let mut stats = Vec::with_capacity(3);
    for r in results {
        let (out, st) = r?;
        outputs.push(out);
        stats.push(st);
    }
    let outputs: [R; 3] = match outputs.try_into() {
        Ok(arr) => arr,
        Err(_) => unreachable!(),
    };
    let party_stats: [CommStats; 3] = match stats.try_into() {
        Ok(arr) => arr,
        Err(_) => unreachable!(),
    };
    Ok(SessionReport { outputs, party_stats })
}

/// Where one TCP party listens and where its two peers listen.
#[derive(Debug, Clone)]
pub struct TcpEndpoints {
    pub listen: SocketAddr,
    pub peers: Vec<(PartyId, SocketAddr)>,
}

/// Establishes this party's six-connection TCP mesh (one connection per
/// ordered pair) and returns a ready context. All parties must call this
/// concurrently.
pub fn establish_tcp_party(
    cfg: &SessionConfig,
    me: PartyId,
    endpoints: &TcpEndpoints,
) -> Result<PartyCtx> {
    cfg.validate()?;
    let listener = TcpListener::bind(endpoints.listen)
        .map_err(|e| Error::Transport(format!("bind {}: {e}", endpoints.listen)))?;
    let transport = connect_mesh(me, &listener, endpoints, cfg.latency)?;
    build_ctx(cfg, me, Box::new(transport))
}

fn connect_mesh(
    me: PartyId,
    listener: &TcpListener,
    endpoints: &TcpEndpoints,
    latency: Duration,
) -> Result<TcpTransport> {
    let mut outgoing: [Option<TcpStream>; 3] = [None, None, None];
    for (peer, addr) in &endpoints.peers {
        let mut stream = dial_with_retry(*addr)?;
        use std::io::Write;
        stream
            .write_all(&[me.0])
            .map_err(|e| Error::Transport(format!("hello to {peer}: {e}")))?;
        stream.set_nodelay(true).ok();
        outgoing[peer.index()] = Some(stream);
    }
    let mut incoming: [Option<TcpStream>; 3] = [None, None, None];
    for _ in 0..endpoints.peers.len() {
        let (mut stream, _) = listener
            .accept()
            .map_err(|e| Error::Transport(format!("accept: {e}")))?;
        use std::io::Read;
        let mut hello = [0u8; 1];
        stream
            .read_exact(&mut hello)
            .map_err(|e| Error::Transport(format!("hello read: {e}")))?;
        stream.set_nodelay(true).ok();
        let from = PartyId(hello[0]);
        if from.index() > 2 || from == me || incoming[from.index()].is_some() {
            return Err(Error::Transport(format!("unexpected hello from id {}", hello[0])));
        }
        incoming[from.index()] = Some(stream);
    }
    Ok(TcpTransport::new(me, outgoing, incoming, latency))
}

fn dial_with_retry(addr: SocketAddr) -> Result<TcpStream> {
    let deadline = std::time::Instant::now() + Duration::from_secs(10);
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) => {
                if std::time::Instant::now() > deadline {
                    return Err(Error::Transport(format!("connect {addr}: {e}")));
                }
                std::thread::sleep(Duration::from_millis(20));
            }
        }
    }
}

/// Desk-scale TCP runner: three parties as threads of this process, loopback
/// sockets between them. Exercises the same code path as separate processes.
pub fn run_tcp<R, F>(cfg: &SessionConfig, f: F) -> Result<SessionReport<R>>
where
    R: Send,
    F: Fn(&mut PartyCtx) -> Result<R> + Sync,
{
    cfg.validate()?;
    // Bind all listeners up front so dials cannot outrun them.
    let listeners: Vec<TcpListener> = (0..3)
        .map(|_| TcpListener::bind("127.0.0.1:0").map_err(|e| Error::Transport(e.to_string())))
        .collect::<Result<_>>()?;
    let addrs: Vec<SocketAddr> = listeners
        .iter()
        .map(|l| l.local_addr().map_err(|e| Error::Transport(e.to_string())))
        .collect::<Result<_>>()?;
    let results: Vec<Result<(R, CommStats)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = listeners
            .iter()
            .enumerate()
            .map(|(i, listener)| {
                let me = PartyId(i as u8);
                let endpoints = TcpEndpoints {
                    listen: addrs[i],
                    peers: (0..3u8)
                        .filter(|&p| p != i as u8)
                        .map(|p| (PartyId(p), addrs[p as usize]))
                        .collect(),
                };
                let f = &f;
                scope.spawn(move || {
                    let transport = connect_mesh(me, listener, &endpoints, cfg.latency)?;
                    let mut ctx = build_ctx(cfg, me, Box::new(transport))?;
                    let out = f(&mut ctx)?;
                    Ok((out, ctx.stats))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| match h.join() {
                Ok(r) => r,
                Err(_) => Err(Error::Transport("party thread panicked".into())),
            })
            .collect()
    });
    let mut outputs = Vec::with_capacity(3);
    let mut stats = Vec::with_capacity(3);
    for r in results {
        let (out, st) = r?;
        outputs.push(out);
        stats.push(st);
    }
    Ok(SessionReport {
        outputs: outputs.try_into().ok().unwrap(),
        party_stats: stats.try_into().ok().unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::RingValue;

    #[test]
    fn fresh_session_has_only_handshake_traffic() {
        let cfg = SessionConfig::in_process(7, FixedPointConfig::default());
        let report = run_in_process(&cfg, |_ctx| Ok(())).unwrap();
        let merged = report.merged_stats();
        // Handshake: one 8-byte digest frame per party.
        assert_eq!(merged.total_frames(), 3);
        assert_eq!(merged.total_bytes_sent(), 3 * (16 + 8));
        assert_eq!(merged.phase_bytes(crate::net::Phase::Mul), 0);
    }

    #[test]
    fn two_parties_rejected() {
        let mut cfg = SessionConfig::in_process(7, FixedPointConfig::default());
        cfg.roles.truncate(2);
        match run_in_process(&cfg, |_ctx| Ok(())) {
            Err(Error::Handshake(_)) => {}
            Err(e) => panic!("expected handshake error, got {e}"),
            Ok(_) => panic!("expected handshake error"),
        }
    }

    #[test]
    fn duplicate_party_rejected() {
        let mut cfg = SessionConfig::in_process(7, FixedPointConfig::default());
        cfg.roles[1].id = PartyId(0);
        assert!(run_in_process(&cfg, |_ctx| Ok(())).is_err());
    }

    #[test]
    fn empty_round_counts_round_but_no_bytes() {
        let cfg = SessionConfig::in_process(1, FixedPointConfig::default());
        let report = run_in_process(&cfg, |ctx| {
            ctx.in_phase(crate::net::Phase::Mul, |ctx| {
                ctx.exchange(Opcode::Sync, &[], &[])?;
                Ok(())
            })
        })
        .unwrap();
        let merged = report.merged_stats();
        assert_eq!(merged.rounds[crate::net::Phase::Mul as usize], 1);
        assert_eq!(merged.phase_bytes(crate::net::Phase::Mul), 0);
    }

    #[test]
    fn exchange_frame_size_accounting() {
        let cfg = SessionConfig::in_process(2, FixedPointConfig::default());
        let report = run_in_process(&cfg, |ctx| {
            ctx.in_phase(crate::net::Phase::Mul, |ctx| {
                // P0 sends 4 ring values to P1; everyone else idles the round.
                let payload = [RingValue(1), RingValue(2), RingValue(3), RingValue(4)];
                if ctx.id == PartyId(0) {
                    ctx.exchange(Opcode::Mul, &[(PartyId(1), &payload)], &[])?;
                } else if ctx.id == PartyId(1) {
                    ctx.exchange(Opcode::Mul, &[], &[PartyId(0)])?;
                } else {
                    ctx.exchange(Opcode::Mul, &[], &[])?;
                }
                Ok(())
            })
        })
        .unwrap();
        let merged = report.merged_stats();
        assert_eq!(merged.bytes_sent[0][1][crate::net::Phase::Mul as usize], 4 * 8 + 16);
        assert_eq!(merged.total_bytes_sent() - 3 * 24, 4 * 8 + 16);
    }

    #[test]
    fn conservation_sent_equals_received() {
        let cfg = SessionConfig::in_process(3, FixedPointConfig::default());
        let report = run_in_process(&cfg, |ctx| {
            ctx.in_phase(crate::net::Phase::Mul, |ctx| {
                let payload = [RingValue(9); 5];
                ctx.exchange(Opcode::Mul, &[(ctx.id.next(), &payload)], &[ctx.id.prev()])?;
                Ok(())
            })
        })
        .unwrap();
        let merged = report.merged_stats();
        assert_eq!(merged.total_bytes_sent(), merged.total_bytes_received());
    }

    #[test]
    fn determinism_same_seed_same_transcript() {
        let cfg = SessionConfig::in_process(42, FixedPointConfig::default());
        let run = || {
            run_in_process(&cfg, |ctx| {
                ctx.in_phase(crate::net::Phase::Mul, |ctx| {
                    let noise = ctx.zero_share(8);
                    ctx.exchange(Opcode::Mul, &[(ctx.id.next(), &noise)], &[ctx.id.prev()])
                })
            })
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.transcripts(), b.transcripts());
    }

    #[test]
    fn zero_share_telescopes() {
        let cfg = SessionConfig::in_process(5, FixedPointConfig::default());
        let report = run_in_process(&cfg, |ctx| Ok(ctx.zero_share(16))).unwrap();
        for i in 0..16 {
            let sum = report.outputs[0][i] + report.outputs[1][i] + report.outputs[2][i];
            assert_eq!(sum, RingValue(0));
        }
    }
}
