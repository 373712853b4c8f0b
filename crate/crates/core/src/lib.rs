//! Policy-governed data exchange: CPL policies, pairwise negotiation, and
//! pooled least-squares dose models over an encrypted ring protocol.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod cpl;
pub mod crypto;
pub mod data;
pub mod dd;
pub mod harness;
pub mod par;
pub mod policy;
pub mod regression;
pub mod seeds;
pub mod wire;
