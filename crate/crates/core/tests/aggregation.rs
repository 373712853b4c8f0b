//! Ring sessions against centralized least squares, mask invariance and the
//! transcript audit.

mod common;

use std::collections::BTreeSet;

use cpl_core::aggregation::{
    audit_transcript, coalition_recovers, pool_plain, recover_input, run_ring_session, LocalStats,
    RingInput, SessionOptions,
};
use cpl_core::crypto::{keygen, HEParams};
use cpl_core::data::synth::synth_numeric;
use cpl_core::data::NormalizationMap;
use cpl_core::regression::solve_ols;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn params() -> HEParams {
    HEParams {
        key_bits: 256,
        ..HEParams::default()
    }
}

fn inputs(data: &[cpl_core::data::Dataset]) -> Vec<RingInput> {
    let norm = NormalizationMap::from_schema(data[0].schema()).unwrap();
    data.iter()
        .map(|d| RingInput {
            id: d.provenance().to_string(),
            stats: LocalStats::from_dataset(d, Some(&norm)).unwrap(),
        })
        .collect()
}

#[test]
fn pooled_and_encrypted_match_centralized() {
    for seed in 0..8 {
        let c = common::random_consortium(seed);
        let ring = inputs(&c.data);
        let oracle = common::centralized_coefficients(&c.data);

        let plain = pool_plain(&ring).unwrap();
        let eta_plain = solve_ols(&plain.o, &plain.v).unwrap();
        assert!(common::rel_err(&eta_plain, &oracle) <= 1e-6, "seed {seed}");

        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let out = run_ring_session(&ring, &SessionOptions::new(params()), None, &mut rng).unwrap();
        // each member rounds each cell once
        let cell_bound = ring.len() as f64 / (2.0 * params().scale());
        let gap = (&out.pooled.o - &plain.o)
            .abs()
            .max()
            .max((&out.pooled.v - &plain.v).abs().max());
        assert!(gap <= cell_bound, "seed {seed}: {gap}");
        let n: u64 = ring.iter().map(|r| r.stats.n).sum();
        let m = (c.features + 1) as f64;
        let eta_enc = solve_ols(&out.pooled.o, &out.pooled.v).unwrap();
        assert!(
            common::rel_err(&eta_enc, &eta_plain) <= n as f64 * m * m / params().scale(),
            "seed {seed}"
        );
    }
}

#[test]
fn masks_do_not_change_the_result() {
    let (_, data, _) = synth_numeric(3, &[40, 60, 50, 30], 3, 0.2).unwrap();
    let ring = inputs(&data);
    let kp = keygen(256, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let runs: Vec<_> = (0..5)
        .map(|s| {
            run_ring_session(
                &ring,
                &SessionOptions::new(params()),
                Some(&kp),
                &mut ChaCha20Rng::seed_from_u64(100 + s),
            )
            .unwrap()
        })
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.pooled_encoded, runs[0].pooled_encoded);
        assert_eq!(r.pooled.o, runs[0].pooled.o);
        assert_eq!(r.pooled.v, runs[0].pooled.v);
        assert_ne!(
            r.transcript.messages[3].payload,
            runs[0].transcript.messages[3].payload
        );
    }
}

fn ids(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn corruption_cases_and_honest_members() {
    for (n, target, coalition, label) in [
        (2usize, "P2", vec!["P1"], "2-party"),
        (3, "P2", vec!["P1", "P3"], "3-party"),
        (5, "P3", vec!["P1", "P2", "P4"], "n-party"),
    ] {
        let (_, data, _) = synth_numeric(n as u64, &vec![30; n], 2, 0.2).unwrap();
        let ring = inputs(&data);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let out = run_ring_session(&ring, &SessionOptions::new(params()), None, &mut rng).unwrap();
        let report = audit_transcript(&out.transcript, &ring, &out.keys.public, params().scale());
        assert!(report.clean(), "{report:?}");
        let case = report
            .collusion
            .iter()
            .find(|c| c.target == target)
            .unwrap();
        assert_eq!(
            case.coalition,
            coalition.iter().map(|s| s.to_string()).collect::<Vec<_>>()
        );
        assert_eq!(case.label, label);

        // the coalition really opens the target's input
        let got = recover_input(&out.transcript, &out.keys.secret, &out.ring, target).unwrap();
        let idx = out.ring.iter().position(|id| id == target).unwrap();
        assert_eq!(got, ring[idx].stats.pack(params().scale()).unwrap());

        // no single non-initiator learns anyone's input
        for j in &out.ring[1..] {
            for t in &out.ring[1..] {
                assert!(
                    !coalition_recovers(&out.ring, &ids(&[j.as_str()]), t),
                    "{j} alone opens {t}"
                );
            }
        }
    }
}
