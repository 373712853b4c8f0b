//! In-process message passing with an append-only transcript.

use std::collections::VecDeque;
use std::time::Duration;

use serde::{Serialize, Serializer};

use super::AggregationError;
use crate::wire::{Reader, Writer};

pub const ENVELOPE_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    KeyBroadcast,
    Ring,
}

impl Phase {
    fn tag(self) -> u8 {
        match self {
            Phase::KeyBroadcast => 1,
            Phase::Ring => 2,
        }
    }

    fn from_tag(t: u8) -> Option<Phase> {
        match t {
            1 => Some(Phase::KeyBroadcast),
            2 => Some(Phase::Ring),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Envelope {
    pub version: u8,
    pub session: u64,
    pub phase: Phase,
    pub from: String,
    pub to: String,
    #[serde(serialize_with = "hex_bytes")]
    pub payload: Vec<u8>,
}

fn hex_bytes<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(b))
}

impl Envelope {
    pub fn new(session: u64, phase: Phase, from: &str, to: &str, payload: Vec<u8>) -> Self {
        Envelope {
            version: ENVELOPE_VERSION,
            session,
            phase,
            from: from.into(),
            to: to.into(),
            payload,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u8(self.version)
            .u64(self.session)
            .u8(self.phase.tag())
            .str(&self.from)
            .str(&self.to)
            .bytes(&self.payload);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AggregationError> {
        let err = |e: crate::wire::WireError| AggregationError::Transport(e.to_string());
        let mut r = Reader::new(bytes);
        let version = r.u8().map_err(err)?;
        if version != ENVELOPE_VERSION {
            return Err(AggregationError::Transport(format!(
                "unsupported envelope version {version}"
            )));
        }
        let session = r.u64().map_err(err)?;
        let tag = r.u8().map_err(err)?;
        let phase = Phase::from_tag(tag)
            .ok_or_else(|| AggregationError::Transport(format!("bad phase tag {tag}")))?;
        let from = r.str().map_err(err)?;
        let to = r.str().map_err(err)?;
        let payload = r.bytes().map_err(err)?.to_vec();
        Ok(Envelope {
            version,
            session,
            phase,
            from,
            to,
            payload,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub messages: Vec<Envelope>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn count(&self, phase: Phase) -> usize {
        self.messages.iter().filter(|m| m.phase == phase).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

/// FIFO mailbox. Every delivered envelope is round-tripped through its byte
/// encoding and appended to the transcript.
#[derive(Debug, Default)]
pub struct Mailbox {
    queue: VecDeque<Vec<u8>>,
    transcript: Transcript,
    latency: Option<Duration>,
}

impl Mailbox {
    pub fn with_latency(latency: Option<Duration>) -> Self {
        Mailbox {
            latency,
            ..Default::default()
        }
    }

    pub fn send(&mut self, e: Envelope) {
        self.queue.push_back(e.to_bytes());
    }

    pub fn deliver(&mut self) -> Result<Option<Envelope>, AggregationError> {
        let Some(bytes) = self.queue.pop_front() else {
            return Ok(None);
        };
        if let Some(d) = self.latency {
            std::thread::sleep(d);
        }
        let e = Envelope::from_bytes(&bytes)?;
        self.transcript.messages.push(e.clone());
        Ok(Some(e))
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}
