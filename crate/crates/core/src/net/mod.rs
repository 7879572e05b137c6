//! Three-party execution harness: transports, framing, deterministic
//! scheduling and per-phase byte/round accounting.

mod ctx;
mod frame;
mod session;
mod stats;
mod transport;

pub use ctx::PartyCtx;
pub use frame::{Frame, Opcode, FRAME_HEADER_LEN, MAX_FRAME_PAYLOAD};
pub use session::{
    establish_tcp_party, run_in_process, run_tcp, PartyRole, RoleKind, SessionConfig,
    SessionReport, TcpEndpoints,
};
pub use stats::{CommReport, CommStats, Phase, NUM_PHASES};
pub use transport::{InProcessTransport, TcpTransport, Transport};
