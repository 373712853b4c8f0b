//! The masked ring session.
//!
//! The initiator generates a key pair, sends the public key to every other
//! member, and starts the ring with encrypted uniform masks. Each member adds
//! its own encrypted statistics and forwards to its successor. When the
//! accumulator returns, the initiator decrypts, removes the masks and adds its
//! own statistics in the clear.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Serialize, Serializer};

use super::stats::LocalStats;
use super::transport::{Envelope, Mailbox, Phase, Transcript};
use super::AggregationError;
use crate::crypto::{
    add_cipher, decrypt_residues, encrypt_encoded, encrypt_residues, from_residue, keygen,
    random_below, CipherMatrix, HEParams, KeyPair, PublicKey,
};

#[derive(Debug, Clone)]
pub struct RingInput {
    pub id: String,
    pub stats: LocalStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOptions {
    pub params: HEParams,
    pub session_id: u64,
    /// Sleep injected before each delivery.
    pub latency: Option<Duration>,
}

impl SessionOptions {
    pub fn new(params: HEParams) -> Self {
        SessionOptions {
            params,
            session_id: 1,
            latency: None,
        }
    }
}

fn secs<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

/// Wall time per protocol phase, summed over members.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    #[serde(serialize_with = "secs")]
    pub keygen: Duration,
    #[serde(serialize_with = "secs")]
    pub encrypt: Duration,
    #[serde(serialize_with = "secs")]
    pub evaluate: Duration,
    #[serde(serialize_with = "secs")]
    pub decrypt: Duration,
}

impl PhaseTimings {
    /// Everything except key generation.
    pub fn encrypted_phase(&self) -> Duration {
        self.encrypt + self.evaluate + self.decrypt
    }

    fn absorb(&mut self, o: &PhaseTimings) {
        self.keygen += o.keygen;
        self.encrypt += o.encrypt;
        self.evaluate += o.evaluate;
        self.decrypt += o.decrypt;
    }
}

#[derive(Debug, Clone)]
pub struct SessionOutput {
    pub pooled: LocalStats,
    /// Fixed-point pooled cells, in [`LocalStats::pack`] order.
    pub pooled_encoded: Vec<i128>,
    pub transcript: Transcript,
    pub timings: PhaseTimings,
    /// Ring order, initiator first.
    pub ring: Vec<String>,
    /// The initiator's session keys.
    pub keys: KeyPair,
}

/// Refuses sessions whose sums could wrap the plaintext modulus.
pub fn precheck(ring: &[RingInput], params: &HEParams) -> Result<(), AggregationError> {
    if ring.len() < 2 {
        return Err(AggregationError::TooFewMembers(ring.len()));
    }
    let m = ring[0].stats.dim();
    for r in ring {
        if r.stats.dim() != m {
            return Err(AggregationError::DimMismatch(m, r.stats.dim()));
        }
    }
    params
        .validate()
        .map_err(|e| AggregationError::OverflowAbort(e.to_string()))?;
    if m as u64 > params.m_max {
        return Err(AggregationError::OverflowAbort(format!(
            "design width {m} exceeds m_max {}",
            params.m_max
        )));
    }
    let total: u64 = ring.iter().map(|r| r.stats.n).sum();
    if total > params.n_max {
        return Err(AggregationError::OverflowAbort(format!(
            "{total} pooled rows exceed n_max {}",
            params.n_max
        )));
    }
    let v2 = params.v_max * params.v_max;
    for r in ring {
        let cap = r.stats.n as f64 * v2 * (1.0 + 1e-9) + 1e-9;
        let worst = r
            .stats
            .o
            .iter()
            .chain(r.stats.v.iter())
            .fold(0.0f64, |a, x| a.max(x.abs()));
        if !worst.is_finite() || worst > cap {
            return Err(AggregationError::OverflowAbort(format!(
                "{}: statistic magnitude {worst} exceeds n * v_max^2 = {cap}",
                r.id
            )));
        }
    }
    Ok(())
}

struct Member {
    id: String,
    succ: String,
    packed: Vec<i128>,
    scale_bits: u32,
    pk: Option<PublicKey>,
    rng: ChaCha20Rng,
    timings: PhaseTimings,
}

impl Member {
    fn handle(&mut self, e: &Envelope) -> Result<Option<Envelope>, AggregationError> {
        match e.phase {
            Phase::KeyBroadcast => {
                self.pk = Some(PublicKey::from_modulus(BigUint::from_bytes_be(&e.payload))?);
                Ok(None)
            }
            Phase::Ring => {
                let pk = self.pk.as_ref().ok_or_else(|| {
                    AggregationError::Transport(format!("{} has no key", self.id))
                })?;
                let acc = CipherMatrix::from_bytes(&e.payload)?;
                if acc.len() != self.packed.len() {
                    return Err(AggregationError::Transport(format!(
                        "{} received {} cells, expected {}",
                        self.id,
                        acc.len(),
                        self.packed.len()
                    )));
                }
                let t = Instant::now();
                let own = encrypt_encoded(
                    pk,
                    self.packed.len(),
                    1,
                    self.scale_bits,
                    &self.packed,
                    &mut self.rng,
                )?;
                self.timings.encrypt += t.elapsed();
                let t = Instant::now();
                let next = add_cipher(pk, &acc, &own)?;
                self.timings.evaluate += t.elapsed();
                Ok(Some(Envelope::new(
                    e.session,
                    Phase::Ring,
                    &self.id,
                    &self.succ,
                    next.to_bytes(),
                )))
            }
        }
    }
}

/// Runs one session over `ring` (initiator first). With `keys` the
/// initiator reuses them instead of generating a fresh pair.
pub fn run_ring_session<R: Rng + ?Sized>(
    ring: &[RingInput],
    opts: &SessionOptions,
    keys: Option<&KeyPair>,
    rng: &mut R,
) -> Result<SessionOutput, AggregationError> {
    let mut params = opts.params.clone();
    if let Some(k) = keys {
        params.key_bits = k.public.bits();
    }
    precheck(ring, &params)?;
    let scale = params.scale();
    let m = ring[0].stats.dim();
    let cells = LocalStats::packed_len(m);
    let n = ring.len();
    let ids: Vec<String> = ring.iter().map(|r| r.id.clone()).collect();
    let session = opts.session_id;
    let mut timings = PhaseTimings::default();

    let kp = match keys {
        Some(k) => k.clone(),
        None => {
            let t = Instant::now();
            let kp = keygen(params.key_bits, rng)?;
            timings.keygen = t.elapsed();
            kp
        }
    };

    let mut members: BTreeMap<String, Member> = BTreeMap::new();
    for i in 1..n {
        let packed = ring[i].stats.pack(scale)?;
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        members.insert(
            ids[i].clone(),
            Member {
                id: ids[i].clone(),
                succ: ids[(i + 1) % n].clone(),
                packed,
                scale_bits: params.scale_bits,
                pk: None,
                rng: ChaCha20Rng::from_seed(seed),
                timings: PhaseTimings::default(),
            },
        );
    }
    let own = ring[0].stats.pack(scale)?;

    let mut mail = Mailbox::with_latency(opts.latency);
    let pk_bytes = kp.public.n().to_bytes_be();
    for id in &ids[1..] {
        mail.send(Envelope::new(
            session,
            Phase::KeyBroadcast,
            &ids[0],
            id,
            pk_bytes.clone(),
        ));
    }
    let masks: Vec<BigUint> = (0..cells)
        .map(|_| random_below(rng, kp.public.n()))
        .collect();
    let t = Instant::now();
    let start = encrypt_residues(&kp.public, cells, 1, params.scale_bits, &masks, rng)?;
    timings.encrypt += t.elapsed();
    mail.send(Envelope::new(
        session,
        Phase::Ring,
        &ids[0],
        &ids[1],
        start.to_bytes(),
    ));

    let mut result = None;
    while let Some(e) = mail.deliver()? {
        if e.session != session {
            return Err(AggregationError::Transport(format!(
                "foreign session id {}",
                e.session
            )));
        }
        if e.to == ids[0] {
            if e.phase != Phase::Ring || e.from != ids[n - 1] || result.is_some() {
                return Err(AggregationError::Transport(format!(
                    "unexpected message to initiator from {}",
                    e.from
                )));
            }
            let acc = CipherMatrix::from_bytes(&e.payload)?;
            let t = Instant::now();
            let opened = decrypt_residues(&kp.secret, &acc)?;
            timings.decrypt += t.elapsed();
            let modulus = kp.public.n();
            let mut pooled = Vec::with_capacity(cells);
            for ((r, mask), mine) in opened.iter().zip(&masks).zip(&own) {
                let unmasked = (r + modulus - mask) % modulus;
                let v = from_residue(&unmasked, modulus)?;
                pooled.push(
                    v.checked_add(*mine)
                        .ok_or_else(|| AggregationError::OverflowAbort("i128 sum".into()))?,
                );
            }
            result = Some(pooled);
            continue;
        }
        let member = members
            .get_mut(&e.to)
            .ok_or_else(|| AggregationError::Transport(format!("no member `{}`", e.to)))?;
        if let Some(out) = member.handle(&e)? {
            mail.send(out);
        }
    }
    let pooled_encoded =
        result.ok_or_else(|| AggregationError::Transport("ring did not return".into()))?;
    for mem in members.values() {
        timings.absorb(&mem.timings);
    }
    Ok(SessionOutput {
        pooled: LocalStats::unpack(m, &pooled_encoded, scale)?,
        pooled_encoded,
        transcript: mail.into_transcript(),
        timings,
        ring: ids,
        keys: kp,
    })
}

/// Plaintext sum of the inputs; the reference for the pooled output.
pub fn pool_plain(ring: &[RingInput]) -> Result<LocalStats, AggregationError> {
    let first = ring.first().ok_or(AggregationError::TooFewMembers(0))?;
    ring[1..]
        .iter()
        .try_fold(first.stats.clone(), |acc, r| acc.add(&r.stats))
}

/// Rotates `order` so it starts at `initiator`.
pub fn ring_from(order: &[String], initiator: &str) -> Option<Vec<String>> {
    let pos = order.iter().position(|id| id == initiator)?;
    Some(order[pos..].iter().chain(&order[..pos]).cloned().collect())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use rand::SeedableRng;

    use super::*;
    use crate::aggregation::{audit_transcript, coalition_recovers, recover_input};
    use crate::data::synth::synth_numeric;
    use crate::data::NormalizationMap;

    fn inputs(sizes: &[usize]) -> Vec<RingInput> {
        let (schema, data, _) = synth_numeric(3, sizes, 3, 0.2).unwrap();
        let norm = NormalizationMap::from_schema(&schema).unwrap();
        data.iter()
            .map(|d| RingInput {
                id: d.provenance().to_string(),
                stats: LocalStats::from_dataset(d, Some(&norm)).unwrap(),
            })
            .collect()
    }

    fn opts() -> SessionOptions {
        SessionOptions::new(HEParams {
            key_bits: 256,
            ..HEParams::default()
        })
    }

    #[test]
    fn pooled_matches_plain_sum() {
        let ring = inputs(&[40, 25, 60, 10]);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let out = run_ring_session(&ring, &opts(), None, &mut rng).unwrap();
        let plain = pool_plain(&ring).unwrap();
        let tol = ring.len() as f64 / (2.0 * opts().params.scale());
        assert!((&out.pooled.o - &plain.o).abs().max() <= tol);
        assert!((&out.pooled.v - &plain.v).abs().max() <= tol);
        assert_eq!(out.pooled.n, 135);
        assert_eq!(out.transcript.count(Phase::KeyBroadcast), 3);
        assert_eq!(out.transcript.count(Phase::Ring), 4);

        // the encoded result is exactly the sum of the encoded inputs
        let scale = opts().params.scale();
        let mut sum = vec![0i128; LocalStats::packed_len(4)];
        for r in &ring {
            for (s, k) in sum.iter_mut().zip(r.stats.pack(scale).unwrap()) {
                *s += k;
            }
        }
        assert_eq!(out.pooled_encoded, sum);
    }

    #[test]
    fn transcript_audit() {
        let ring = inputs(&[30, 30, 30]);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let out = run_ring_session(&ring, &opts(), None, &mut rng).unwrap();
        let report = audit_transcript(
            &out.transcript,
            &ring,
            &out.keys.public,
            opts().params.scale(),
        );
        assert!(report.clean(), "{report:?}");
        assert_eq!(report.collusion.len(), 2);
        assert_eq!(report.collusion[0].label, "3-party");

        let ids = out.ring.clone();
        let corrupted: BTreeSet<String> = ["P1", "P3"].iter().map(|s| s.to_string()).collect();
        assert!(coalition_recovers(&ids, &corrupted, "P2"));
        let got = recover_input(&out.transcript, &out.keys.secret, &ids, "P2").unwrap();
        assert_eq!(got, ring[1].stats.pack(opts().params.scale()).unwrap());
    }

    #[test]
    fn provided_keys_skip_keygen() {
        let ring = inputs(&[20, 20]);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = keygen(256, &mut rng).unwrap();
        let out = run_ring_session(&ring, &opts(), Some(&kp), &mut rng).unwrap();
        assert_eq!(out.timings.keygen, Duration::ZERO);
        assert_eq!(out.keys.public, kp.public);
    }

    #[test]
    fn overflow_and_shape_refusals() {
        let mut ring = inputs(&[20, 20]);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let small = SessionOptions::new(HEParams {
            key_bits: 64,
            ..HEParams::default()
        });
        assert!(matches!(
            run_ring_session(&ring, &small, None, &mut rng),
            Err(AggregationError::OverflowAbort(_))
        ));

        let few = SessionOptions::new(HEParams {
            key_bits: 256,
            n_max: 30,
            ..HEParams::default()
        });
        assert!(matches!(
            run_ring_session(&ring, &few, None, &mut rng),
            Err(AggregationError::OverflowAbort(_))
        ));

        ring[1].stats.v[0] = 1e3;
        assert!(matches!(
            run_ring_session(&ring, &opts(), None, &mut rng),
            Err(AggregationError::OverflowAbort(_))
        ));

        ring[1].stats = LocalStats::zeros(2);
        assert!(matches!(
            run_ring_session(&ring, &opts(), None, &mut rng),
            Err(AggregationError::DimMismatch(4, 2))
        ));
        assert!(matches!(
            run_ring_session(&ring[..1], &opts(), None, &mut rng),
            Err(AggregationError::TooFewMembers(1))
        ));
    }

    #[test]
    fn empty_member_contributes_zeros() {
        let mut ring = inputs(&[20, 20, 20]);
        ring[1].stats = LocalStats::zeros(4);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let out = run_ring_session(&ring, &opts(), None, &mut rng).unwrap();
        assert_eq!(out.pooled.n, 40);
    }

    #[test]
    fn ring_rotation() {
        let order: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(ring_from(&order, "b").unwrap(), vec!["b", "c", "a"]);
        assert!(ring_from(&order, "z").is_none());
    }
}
