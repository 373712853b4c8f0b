//! Pooled sufficient statistics over a masked encrypted ring.

mod audit;
mod session;
mod stats;
mod transport;

use thiserror::Error;

use crate::crypto::CryptoError;
use crate::data::DataError;

pub use audit::{
    audit_transcript, coalition_recovers, minimal_coalition, recover_input, CollusionCase, Finding,
    LeakageReport,
};
pub use session::{
    pool_plain, precheck, ring_from, run_ring_session, PhaseTimings, RingInput, SessionOptions,
    SessionOutput,
};
pub use stats::{local_stats, LocalStats};
pub use transport::{Envelope, Mailbox, Phase, Transcript, ENVELOPE_VERSION};

#[derive(Debug, Error)]
pub enum AggregationError {
    #[error("{0} releases no rows")]
    EmptyRelease(String),
    #[error("session refused, sums could overflow: {0}")]
    OverflowAbort(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("a ring needs at least 2 members, got {0}")]
    TooFewMembers(usize),
    #[error("design widths differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Data(#[from] DataError),
}
