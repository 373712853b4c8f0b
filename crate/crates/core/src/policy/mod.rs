//! Clause resolution and pairwise negotiation of share/acquire policies.

pub mod env;
pub mod negotiate;
pub mod resolve;

use thiserror::Error;

use crate::data::DataError;
use crate::dd::DdError;

pub use env::{Bound, Directory, Env, MemberContext, Scalar};
pub use negotiate::{
    negotiate_consortium, negotiate_pair, Agreement, LogMessage, MessageKind, MessageLog,
    NegotiationSettings, PairOutcome, Provenance, Round, Side, SideEntry, Status,
};
pub use resolve::{resolve_clause, resolve_with, DdVerdict, Resolution, TraceEntry};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unbound variable `${0}`")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("sub-clause cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("no sub-clause carries tag `{0}`")]
    UnknownTag(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("data reference `{column}` is not a column of both datasets: {message}")]
    ColumnMismatch { column: String, message: String },
    #[error("invalid consortium: {0}")]
    Consortium(String),
    #[error(transparent)]
    Dd(#[from] DdError),
    #[error(transparent)]
    Data(#[from] DataError),
}
