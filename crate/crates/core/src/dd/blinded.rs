//! Message flows for evaluating a data-dependent conditional between the
//! policy author and a counterparty.
//!
//! Plain mode ships the author's column to the counterparty. Blinded mode
//! never puts a raw value on the wire:
//!
//! * set statistics compare salted SHA-256 digests of distinct values;
//! * vector statistics use a Paillier dot product. The author sends its
//!   encrypted fixed-point vector and encoded moments, the counterparty
//!   returns `E(<a,b> + r)`, the author decrypts and hands back the masked
//!   value, and the counterparty strips `r` and decides.
//!
//! Only the boolean decision travels back to the author, plus the statistic
//! itself when audit output is requested.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{statistic, Comparator, DataRef, DdError, DdMode, RefValues};
use crate::cpl::Algorithm;
use crate::crypto::{self, encode_fixed, keygen, to_residue, Ciphertext, PublicKey};
use crate::wire::{Reader, WireError, Writer};

pub const SALT_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DdSettings {
    pub mode: DdMode,
    /// Modulus size of the throwaway key used by the vector flow.
    pub key_bits: u64,
    pub scale_bits: u32,
    /// Return the statistic with the decision.
    pub audit: bool,
}

impl Default for DdSettings {
    fn default() -> Self {
        DdSettings {
            mode: DdMode::Blinded,
            key_bits: 512,
            scale_bits: 20,
            audit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DdMessage {
    pub from: String,
    pub to: String,
    pub kind: String,
    #[serde(serialize_with = "as_hex")]
    pub payload: Vec<u8>,
}

fn as_hex<S: serde::Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DdOutcome {
    pub decision: bool,
    /// Present only when `audit` was set.
    pub statistic: Option<f64>,
    pub messages: Vec<DdMessage>,
}

impl From<WireError> for DdError {
    fn from(e: WireError) -> Self {
        DdError::Protocol(e.to_string())
    }
}

/// Evaluates `evaluate(&column, algorithm, threshold)` written by `author`
/// against the counterparty's column.
pub fn evaluate_dd<R: Rng + ?Sized>(
    algorithm: Algorithm,
    threshold: f64,
    comparator: Comparator,
    author: &DataRef,
    other: &DataRef,
    settings: &DdSettings,
    rng: &mut R,
) -> Result<DdOutcome, DdError> {
    let mut t = Transcript {
        author: &author.member,
        other: &other.member,
        messages: Vec::new(),
    };
    let (decision, stat) = match settings.mode {
        DdMode::Plain => plain(
            &mut t,
            algorithm,
            threshold,
            comparator,
            author,
            other,
            settings.audit,
        )?,
        DdMode::Blinded if algorithm.is_set_statistic() => set_flow(
            &mut t,
            algorithm,
            threshold,
            comparator,
            author,
            other,
            settings.audit,
            rng,
        )?,
        DdMode::Blinded => vector_flow(
            &mut t, algorithm, threshold, comparator, author, other, settings, rng,
        )?,
    };
    Ok(DdOutcome {
        decision,
        statistic: stat,
        messages: t.messages,
    })
}

struct Transcript<'a> {
    author: &'a str,
    other: &'a str,
    messages: Vec<DdMessage>,
}

impl Transcript<'_> {
    fn send_other(&mut self, kind: &str, payload: Vec<u8>) -> usize {
        self.messages.push(DdMessage {
            from: self.author.into(),
            to: self.other.into(),
            kind: kind.into(),
            payload,
        });
        self.messages.len() - 1
    }

    fn send_author(&mut self, kind: &str, payload: Vec<u8>) -> usize {
        self.messages.push(DdMessage {
            from: self.other.into(),
            to: self.author.into(),
            kind: kind.into(),
            payload,
        });
        self.messages.len() - 1
    }

    fn payload(&self, i: usize) -> &[u8] {
        &self.messages[i].payload
    }
}

fn header(w: &mut Writer, algorithm: Algorithm, threshold: f64, comparator: Comparator) {
    w.str(algorithm.canonical_name())
        .f64(threshold)
        .u8(comparator as u8);
}

fn read_header(r: &mut Reader) -> Result<(Algorithm, f64, Comparator), DdError> {
    let name = r.str()?;
    let alg = Algorithm::from_name(&name)
        .ok_or_else(|| DdError::Protocol(format!("unknown algorithm `{name}`")))?;
    let thr = r.f64()?;
    let cmp = match r.u8()? {
        0 => Comparator::Below,
        1 => Comparator::Above,
        b => return Err(DdError::Protocol(format!("bad comparator byte {b}"))),
    };
    Ok((alg, thr, cmp))
}

fn decision_payload(decision: bool, stat: f64, audit: bool) -> Vec<u8> {
    let mut w = Writer::default();
    w.u8(decision as u8);
    if audit {
        w.f64(stat);
    }
    w.finish()
}

fn read_decision(bytes: &[u8], audit: bool) -> Result<(bool, Option<f64>), DdError> {
    let mut r = Reader::new(bytes);
    let d = r.u8()? != 0;
    let s = if audit { Some(r.f64()?) } else { None };
    Ok((d, s))
}

fn plain(
    t: &mut Transcript,
    algorithm: Algorithm,
    threshold: f64,
    comparator: Comparator,
    author: &DataRef,
    other: &DataRef,
    audit: bool,
) -> Result<(bool, Option<f64>), DdError> {
    let mut w = Writer::default();
    header(&mut w, algorithm, threshold, comparator);
    match &author.values {
        RefValues::Text(v) => {
            w.u8(0).u32(v.len() as u32);
            for s in v {
                w.str(s);
            }
        }
        RefValues::Real(v) => {
            w.u8(1).u32(v.len() as u32);
            for x in v {
                w.f64(*x);
            }
        }
    }
    let req = t.send_other("dd-plain-request", w.finish());

    // counterparty
    let mut r = Reader::new(t.payload(req));
    let (alg, thr, cmp) = read_header(&mut r)?;
    let kind = r.u8()?;
    let len = r.u32()? as usize;
    let theirs = if kind == 0 {
        RefValues::Text((0..len).map(|_| r.str()).collect::<Result<_, _>>()?)
    } else {
        RefValues::Real((0..len).map(|_| r.f64()).collect::<Result<_, _>>()?)
    };
    let stat = statistic(alg, &theirs, &other.values)?;
    let rep = t.send_author(
        "dd-decision",
        decision_payload(cmp.decide(stat, thr), stat, audit),
    );
    read_decision(t.payload(rep), audit)
}

fn salted_digests(salt: &[u8], values: &[String]) -> BTreeSet<[u8; 32]> {
    values
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|v| {
            let mut h = Sha256::new();
            h.update(salt);
            h.update((v.len() as u32).to_be_bytes());
            h.update(v.as_bytes());
            h.finalize().into()
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn set_flow<R: Rng + ?Sized>(
    t: &mut Transcript,
    algorithm: Algorithm,
    threshold: f64,
    comparator: Comparator,
    author: &DataRef,
    other: &DataRef,
    audit: bool,
    rng: &mut R,
) -> Result<(bool, Option<f64>), DdError> {
    let (RefValues::Text(mine), RefValues::Text(theirs)) = (&author.values, &other.values) else {
        return Err(DdError::Protocol(
            "set statistic over non-text values".into(),
        ));
    };
    let mut salt = [0u8; SALT_LEN];
    rng.fill(&mut salt[..]);
    let digests = salted_digests(&salt, mine);
    let mut w = Writer::default();
    header(&mut w, algorithm, threshold, comparator);
    w.bytes(&salt).u32(digests.len() as u32);
    for d in &digests {
        w.raw(d);
    }
    let req = t.send_other("dd-set-digests", w.finish());

    // counterparty
    let mut r = Reader::new(t.payload(req));
    let (alg, thr, cmp) = read_header(&mut r)?;
    let salt = r.bytes()?.to_vec();
    let count = r.u32()? as usize;
    let body = r.rest();
    if body.len() != count * 32 {
        return Err(DdError::Protocol("digest list length mismatch".into()));
    }
    let received: BTreeSet<[u8; 32]> = body
        .chunks_exact(32)
        .map(|c| c.try_into().expect("32 bytes"))
        .collect();
    let own = salted_digests(&salt, theirs);
    let inter = received.intersection(&own).count();
    let stat = match alg {
        Algorithm::IntersectionSize => inter as f64,
        Algorithm::JaccardIndex => {
            let union = received.len() + own.len() - inter;
            if union == 0 {
                return Err(DdError::EmptyUnion);
            }
            inter as f64 / union as f64
        }
        _ => return Err(DdError::Protocol("vector statistic in set flow".into())),
    };
    let rep = t.send_author(
        "dd-decision",
        decision_payload(cmp.decide(stat, thr), stat, audit),
    );
    read_decision(t.payload(rep), audit)
}

/// Signed value as an exponent: negative values map to `n - |v|`.
fn exponent(v: i128, pk: &PublicKey) -> Result<BigUint, DdError> {
    Ok(to_residue(v, pk.n())?)
}

fn encode_all(values: &[f64], scale: f64) -> Result<Vec<i128>, DdError> {
    values
        .iter()
        .map(|&x| encode_fixed(x, scale).map_err(DdError::from))
        .collect()
}

fn moments(v: &[i128]) -> Result<(i128, i128), DdError> {
    let mut s: i128 = 0;
    let mut s2: i128 = 0;
    for &x in v {
        let sq = x.checked_mul(x).ok_or_else(overflow)?;
        s = s.checked_add(x).ok_or_else(overflow)?;
        s2 = s2.checked_add(sq).ok_or_else(overflow)?;
    }
    Ok((s, s2))
}

fn overflow() -> DdError {
    DdError::Crypto(crypto::CryptoError::Overflow(
        "fixed-point moments exceed 127 bits".into(),
    ))
}

/// Bits of the additive mask on the dot product. The masked sum must still
/// fit the i128 range once decrypted.
const MASK_BITS: u64 = 100;

#[allow(clippy::too_many_arguments)]
fn vector_flow<R: Rng + ?Sized>(
    t: &mut Transcript,
    algorithm: Algorithm,
    threshold: f64,
    comparator: Comparator,
    author: &DataRef,
    other: &DataRef,
    settings: &DdSettings,
    rng: &mut R,
) -> Result<(bool, Option<f64>), DdError> {
    let (RefValues::Real(mine), RefValues::Real(theirs)) = (&author.values, &other.values) else {
        return Err(DdError::Protocol(
            "vector statistic over non-numeric values".into(),
        ));
    };
    if mine.len() < 2 {
        return Err(DdError::TooShort(mine.len()));
    }
    let scale = crypto::scale_for_bits(settings.scale_bits);
    let kp = keygen(settings.key_bits, rng)?;
    let pk = &kp.public;
    let a = encode_all(mine, scale)?;
    let (sa, sa2) = moments(&a)?;
    let mut w = Writer::default();
    header(&mut w, algorithm, threshold, comparator);
    w.bytes(&pk.n().to_bytes_be())
        .u32(settings.scale_bits)
        .u64(a.len() as u64)
        .i128(sa)
        .i128(sa2);
    for &x in &a {
        w.raw(&pk.encrypt_i128(x, rng)?.to_bytes());
    }
    let req = t.send_other("dd-vector-ciphertexts", w.finish());

    // counterparty: homomorphic dot product plus mask
    let mut r = Reader::new(t.payload(req));
    let (alg, thr, cmp) = read_header(&mut r)?;
    let their_pk = PublicKey::from_modulus(BigUint::from_bytes_be(r.bytes()?))?;
    let scale_bits = r.u32()?;
    let n = r.u64()? as usize;
    let (sa, sa2) = (r.i128()?, r.i128()?);
    if n != theirs.len() {
        return Err(DdError::LengthMismatch(n, theirs.len()));
    }
    let scale = crypto::scale_for_bits(scale_bits);
    let b = encode_all(theirs, scale)?;
    let (sb, sb2) = moments(&b)?;
    let mut body = r.rest();
    let mask = crypto::random_bits(rng, MASK_BITS);
    let mut acc = their_pk.encrypt(&mask, rng)?;
    for &bj in &b {
        let (c, used) = Ciphertext::from_bytes(body)?;
        their_pk.check(&c)?;
        body = &body[used..];
        if bj != 0 {
            acc = their_pk.add(&acc, &their_pk.mul_plain(&c, &exponent(bj, &their_pk)?));
        }
    }
    if !body.is_empty() {
        return Err(DdError::Protocol("trailing ciphertext bytes".into()));
    }
    let masked = t.send_author("dd-vector-masked-dot", acc.to_bytes());

    // author: decrypt and return the still-masked value
    let (c, _) = Ciphertext::from_bytes(t.payload(masked))?;
    let opened = kp.secret.decrypt_i128(&c)?;
    let mut w = Writer::default();
    w.i128(opened);
    let back = t.send_other("dd-vector-opened", w.finish());

    // counterparty: unmask and decide
    let opened = Reader::new(t.payload(back)).i128()?;
    let mask = i128::try_from(mask).map_err(|_| overflow())?;
    let dot = opened.checked_sub(mask).ok_or_else(overflow)?;
    let stat = vector_statistic(alg, n as f64, dot, sa, sa2, sb, sb2, scale)?;
    let rep = t.send_author(
        "dd-decision",
        decision_payload(cmp.decide(stat, thr), stat, settings.audit),
    );
    read_decision(t.payload(rep), settings.audit)
}

/// Pearson or cosine from encoded sums. `dot`, `sa2` and `sb2` carry scale^2.
#[allow(clippy::too_many_arguments)]
fn vector_statistic(
    alg: Algorithm,
    n: f64,
    dot: i128,
    sa: i128,
    sa2: i128,
    sb: i128,
    sb2: i128,
    scale: f64,
) -> Result<f64, DdError> {
    let s2 = scale * scale;
    let (dot, sa2, sb2) = (dot as f64 / s2, sa2 as f64 / s2, sb2 as f64 / s2);
    let (sa, sb) = (sa as f64 / scale, sb as f64 / scale);
    match alg {
        Algorithm::CosineSimilarity => {
            if sa2 <= 0.0 || sb2 <= 0.0 {
                return Err(DdError::ZeroNorm);
            }
            Ok((dot / (sa2.sqrt() * sb2.sqrt())).clamp(-1.0, 1.0))
        }
        Algorithm::PearsonCorrelation => {
            let va = n * sa2 - sa * sa;
            let vb = n * sb2 - sb * sb;
            // relative guard against cancellation on constant columns
            if va <= 1e-12 * n * sa2.max(1.0) || vb <= 1e-12 * n * sb2.max(1.0) {
                return Err(DdError::ZeroVariance);
            }
            Ok(((n * dot - sa * sb) / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
        }
        _ => Err(DdError::Protocol("set statistic in vector flow".into())),
    }
}

/// Raw values of `refs` that appear verbatim in any message payload. Numbers
/// are matched by their 8-byte IEEE-754 pattern in either byte order (zero is
/// skipped, it matches any run of zero bytes); strings of at least three
/// bytes are matched as byte substrings.
pub fn scan_for_raw_values(messages: &[DdMessage], refs: &[&DataRef]) -> Vec<String> {
    let mut found = BTreeSet::new();
    for r in refs {
        match &r.values {
            RefValues::Real(v) => {
                for x in v.iter().filter(|x| **x != 0.0) {
                    let be = x.to_be_bytes();
                    let le = x.to_le_bytes();
                    if messages
                        .iter()
                        .any(|m| contains(&m.payload, &be) || contains(&m.payload, &le))
                    {
                        found.insert(format!("{}.{}={x}", r.member, r.column));
                    }
                }
            }
            RefValues::Text(v) => {
                for s in v.iter().filter(|s| s.len() >= 3) {
                    if messages.iter().any(|m| contains(&m.payload, s.as_bytes())) {
                        found.insert(format!("{}.{}={s}", r.member, r.column));
                    }
                }
            }
        }
    }
    found.into_iter().collect()
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}
