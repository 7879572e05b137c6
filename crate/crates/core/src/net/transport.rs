//! Point-to-point transports. Both variants carry identical frames so byte
//! accounting is transport-independent.

use crate::error::{Error, Result};
use crate::net::frame::{FRAME_HEADER_LEN, MAX_FRAME_PAYLOAD};
use crate::sharing::PartyId;
use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{Receiver, Sender};
use std::time::Duration;

pub trait Transport: Send {
    /// Queues one whole frame to `to`.
    fn send(&mut self, to: PartyId, frame: Vec<u8>) -> Result<()>;
    /// Blocks until the next frame from `from` arrives.
    fn recv(&mut self, from: PartyId) -> Result<Vec<u8>>;
}

/// Queue-backed channels between threads of one process.
pub struct InProcessTransport {
    id: PartyId,
    senders: [Option<Sender<Vec<u8>>>; 3],
    receivers: [Option<Receiver<Vec<u8>>>; 3],
    /// Simulated per-message latency for desk-scale network studies.
    pub latency: Duration,
}

impl InProcessTransport {
    /// Builds the three connected endpoints.
    pub fn trio(latency: Duration) -> [InProcessTransport; 3] {
        let mut endpoints = [0, 1, 2].map(|i| InProcessTransport {
            id: PartyId(i),
            senders: [None, None, None],
            receivers: [None, None, None],
            latency,
        });
        for s in 0..3 {
            for r in 0..3 {
                if s != r {
                    let (tx, rx) = std::sync::mpsc::channel();
                    endpoints[s].senders[r] = Some(tx);
                    endpoints[r].receivers[s] = Some(rx);
                }
            }
        }
        endpoints
    }
}

impl Transport for InProcessTransport {
    fn send(&mut self, to: PartyId, frame: Vec<u8>) -> Result<()> {
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        self.senders[to.index()]
            .as_ref()
            .ok_or_else(|| Error::Transport(format!("{} has no channel to {to}", self.id)))?
            .send(frame)
            .map_err(|_| Error::Transport(format!("{to} hung up")))
    }

    fn recv(&mut self, from: PartyId) -> Result<Vec<u8>> {
        self.receivers[from.index()]
            .as_ref()
            .ok_or_else(|| Error::Transport(format!("{} has no channel from {from}", self.id)))?
            .recv()
            .map_err(|_| Error::Desync(format!("missing counterpart message from {from}")))
    }
}

/// One TCP connection per ordered pair; outgoing stream for sends, incoming
/// stream for receives. Length-prefixed frames exactly as in-process.
pub struct TcpTransport {
    id: PartyId,
    outgoing: [Option<TcpStream>; 3],
    incoming: [Option<TcpStream>; 3],
    pub latency: Duration,
}

impl TcpTransport {
    pub fn new(
        id: PartyId,
        outgoing: [Option<TcpStream>; 3],
        incoming: [Option<TcpStream>; 3],
        latency: Duration,
    ) -> Self {
        TcpTransport {
            id,
            outgoing,
            incoming,
            latency,
        }
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, to: PartyId, frame: Vec<u8>) -> Result<()> {
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        let stream = self.outgoing[to.index()]
            .as_mut()
            .ok_or_else(|| Error::Transport(format!("{} has no connection to {to}", self.id)))?;
        stream
            .write_all(&frame)
            .map_err(|e| Error::Transport(format!("send to {to}: {e}")))
    }

    fn recv(&mut self, from: PartyId) -> Result<Vec<u8>> {
        let stream = self.incoming[from.index()]
            .as_mut()
            .ok_or_else(|| Error::Transport(format!("{} has no connection from {from}", self.id)))?;
        let mut header = [0u8; FRAME_HEADER_LEN];
        stream
            .read_exact(&mut header)
            .map_err(|e| Error::Desync(format!("missing counterpart message from {from}: {e}")))?;
        let len = u32::from_le_bytes(header[0..4].try_into().unwrap());
        if len > MAX_FRAME_PAYLOAD {
            return Err(Error::Frame(format!("oversize frame: {len} bytes")));
        }
        let mut frame = vec![0u8; FRAME_HEADER_LEN + len as usize];
        frame[..FRAME_HEADER_LEN].copy_from_slice(&header);
        stream
            .read_exact(&mut frame[FRAME_HEADER_LEN..])
            .map_err(|e| Error::Transport(format!("short read from {from}: {e}")))?;
        Ok(frame)
    }
}
