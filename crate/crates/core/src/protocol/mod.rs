//! The parameterized MQKA engine: sub-circle topology, the lock-step
//! session, and efficiency measures. `resistance = 1` reproduces the
//! baseline single-circle protocol; `resistance = N - 1` degenerates into
//! the complete-graph exchange where every arc carries a single encoder.

mod efficiency;
mod session;
mod topology;

pub use efficiency::{cabello_efficiency, qubit_efficiency};
pub use session::{
    detect_hop, encode_hop, init_session, run_session, DetectionOutcome, Event, HonestHooks,
    HopInfo, ParticipantState, PartyStatus, PayloadSlot, ProtocolConfig, SessionHooks,
    SessionOutcome, SessionRng, SessionState, SessionStatus, Transcript, TravelMessage,
};
pub use topology::{build_topology, Topology};
