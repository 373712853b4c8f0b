//! Transcript audit for the ring session.
//!
//! A member's contribution is the difference between the accumulator it
//! received and the one it sent. Reading it needs the secret key and both
//! ciphertexts, so the initiator, the predecessor and the successor must all
//! collude.

use std::collections::BTreeSet;

use serde::Serialize;

use super::session::RingInput;
use super::stats::LocalStats;
use super::transport::{Phase, Transcript};
use super::AggregationError;
use crate::crypto::{decrypt_residues, from_residue, CipherMatrix, PublicKey, SecretKey};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    /// Index into the transcript.
    pub message: usize,
    pub member: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollusionCase {
    pub target: String,
    pub coalition: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageReport {
    pub messages: usize,
    /// Raw input encodings found in payloads.
    pub raw_value_hits: Vec<Finding>,
    /// Payloads that are not what their phase promises.
    pub malformed: Vec<Finding>,
    /// Smallest coalition that opens each non-initiator input.
    pub collusion: Vec<CollusionCase>,
}

impl LeakageReport {
    pub fn clean(&self) -> bool {
        self.raw_value_hits.is_empty() && self.malformed.is_empty()
    }
}

fn neighbours(ring: &[String], member: &str) -> Option<(String, String)> {
    let n = ring.len();
    let i = ring.iter().position(|id| id == member)?;
    Some((ring[(i + n - 1) % n].clone(), ring[(i + 1) % n].clone()))
}

/// Initiator, predecessor and successor of `target`, deduplicated.
pub fn minimal_coalition(ring: &[String], target: &str) -> Option<BTreeSet<String>> {
    if ring.first().map(String::as_str) == Some(target) {
        return None;
    }
    let (pred, succ) = neighbours(ring, target)?;
    Some([ring[0].clone(), pred, succ].into_iter().collect())
}

/// True when `corrupted` holds the key and both ends of `target`'s ring hop.
pub fn coalition_recovers(ring: &[String], corrupted: &BTreeSet<String>, target: &str) -> bool {
    match minimal_coalition(ring, target) {
        Some(need) => !corrupted.contains(target) && need.is_subset(corrupted),
        None => false,
    }
}

fn label(n: usize) -> String {
    match n {
        2 => "2-party".into(),
        3 => "3-party".into(),
        _ => "n-party".into(),
    }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Scans every payload for each member's raw statistics (f64 in both byte
/// orders and the packed i128 cells), and checks that ring payloads are
/// ciphertexts under `pk` of the expected width. Packed cells below 2^24 in
/// magnitude are skipped, their encodings are mostly zero bytes.
pub fn audit_transcript(
    transcript: &Transcript,
    inputs: &[RingInput],
    pk: &PublicKey,
    scale: f64,
) -> LeakageReport {
    let ring: Vec<String> = inputs.iter().map(|r| r.id.clone()).collect();
    let m = inputs.first().map(|r| r.stats.dim()).unwrap_or(0);
    let mut raw_value_hits = Vec::new();
    for input in inputs {
        let mut needles: Vec<(String, Vec<u8>)> = Vec::new();
        for x in input
            .stats
            .o
            .iter()
            .chain(input.stats.v.iter())
            .filter(|x| **x != 0.0)
        {
            needles.push((format!("f64 {x}"), x.to_be_bytes().to_vec()));
            needles.push((format!("f64 {x}"), x.to_le_bytes().to_vec()));
        }
        if let Ok(packed) = input.stats.pack(scale) {
            for k in packed.into_iter().filter(|k| k.unsigned_abs() >= 1 << 24) {
                needles.push((format!("i128 {k}"), k.to_be_bytes().to_vec()));
            }
        }
        for (idx, msg) in transcript.messages.iter().enumerate() {
            for (what, bytes) in &needles {
                if contains(&msg.payload, bytes) {
                    raw_value_hits.push(Finding {
                        message: idx,
                        member: input.id.clone(),
                        detail: what.clone(),
                    });
                }
            }
        }
    }

    let mut malformed = Vec::new();
    let key_bytes = pk.n().to_bytes_be();
    for (idx, msg) in transcript.messages.iter().enumerate() {
        let problem = match msg.phase {
            Phase::KeyBroadcast => {
                (msg.payload != key_bytes).then(|| "payload is not the session modulus".to_string())
            }
            Phase::Ring => match CipherMatrix::from_bytes(&msg.payload) {
                Err(e) => Some(e.to_string()),
                Ok(c) if c.key != pk.fingerprint() => Some("ciphertext under a foreign key".into()),
                Ok(c) if c.len() != LocalStats::packed_len(m) => Some(format!("{} cells", c.len())),
                Ok(c) => c
                    .cells
                    .iter()
                    .find_map(|x| pk.check(x).err())
                    .map(|e| e.to_string()),
            },
        };
        if let Some(detail) = problem {
            malformed.push(Finding {
                message: idx,
                member: msg.from.clone(),
                detail,
            });
        }
    }

    let collusion = ring
        .iter()
        .skip(1)
        .filter_map(|t| {
            minimal_coalition(&ring, t).map(|c| CollusionCase {
                target: t.clone(),
                coalition: c.into_iter().collect(),
                label: label(ring.len()),
            })
        })
        .collect();

    LeakageReport {
        messages: transcript.len(),
        raw_value_hits,
        malformed,
        collusion,
    }
}

/// What a coalition of initiator, predecessor and successor computes: the
/// packed statistics of `member`, from the two ring messages around it.
pub fn recover_input(
    transcript: &Transcript,
    sk: &SecretKey,
    ring: &[String],
    member: &str,
) -> Result<Vec<i128>, AggregationError> {
    let (pred, succ) = neighbours(ring, member)
        .ok_or_else(|| AggregationError::Transport(format!("`{member}` is not in the ring")))?;
    let find = |from: &str, to: &str| {
        transcript
            .messages
            .iter()
            .find(|e| e.phase == Phase::Ring && e.from == from && e.to == to)
            .ok_or_else(|| AggregationError::Transport(format!("no ring message {from} -> {to}")))
    };
    let incoming = decrypt_residues(
        sk,
        &CipherMatrix::from_bytes(&find(&pred, member)?.payload)?,
    )?;
    let outgoing = decrypt_residues(
        sk,
        &CipherMatrix::from_bytes(&find(member, &succ)?.payload)?,
    )?;
    let n = sk.public().n();
    outgoing
        .iter()
        .zip(&incoming)
        .map(|(o, i)| Ok(from_residue(&((o + n - i) % n), n)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("P{i}")).collect()
    }

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn coalition_shapes() {
        let r2 = ids(2);
        assert_eq!(minimal_coalition(&r2, "P2").unwrap(), set(&["P1"]));
        assert!(coalition_recovers(&r2, &set(&["P1"]), "P2"));
        assert!(minimal_coalition(&r2, "P1").is_none());

        let r3 = ids(3);
        assert_eq!(minimal_coalition(&r3, "P2").unwrap(), set(&["P1", "P3"]));
        assert!(!coalition_recovers(&r3, &set(&["P1"]), "P2"));
        assert!(!coalition_recovers(&r3, &set(&["P3"]), "P2"));

        let r5 = ids(5);
        assert_eq!(
            minimal_coalition(&r5, "P3").unwrap(),
            set(&["P1", "P2", "P4"])
        );
        assert!(!coalition_recovers(&r5, &set(&["P2", "P4", "P5"]), "P3"));
        assert!(coalition_recovers(&r5, &set(&["P1", "P2", "P4"]), "P3"));
    }

    #[test]
    fn label_by_size() {
        assert_eq!(label(2), "2-party");
        assert_eq!(label(3), "3-party");
        assert_eq!(label(7), "n-party");
    }
}
