//! The rayon path against the sequential fallback on the hot loops: matrix
//! encryption, a full ring session and consortium negotiation.

use std::sync::Arc;

use cpl_core::aggregation::{run_ring_session, LocalStats, RingInput, SessionOptions};
use cpl_core::cpl::parse_policy;
use cpl_core::crypto::{encrypt_matrix, keygen, HEParams};
use cpl_core::data::synth::synth_numeric;
use cpl_core::data::NormalizationMap;
use cpl_core::par;
use cpl_core::policy::{negotiate_consortium, MemberContext, NegotiationSettings};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

fn params() -> HEParams {
    HEParams {
        key_bits: 1024,
        ..HEParams::default()
    }
}

fn encrypt(c: &mut Criterion) {
    let kp = keygen(params().key_bits, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let m = DMatrix::from_fn(16, 16, |i, j| (i as f64 - j as f64) / 7.0);
    let mut g = c.benchmark_group("encrypt_matrix_16x16");
    g.sample_size(10);
    for (name, seq) in MODES {
        par::set_sequential(seq);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| encrypt_matrix(&kp.public, &m, params().scale_bits, &mut rng).unwrap())
        });
    }
    par::set_sequential(false);
    g.finish();
}

fn ring_session(c: &mut Criterion) {
    let (schema, data, _) = synth_numeric(3, &[300; 4], 6, 0.3).unwrap();
    let norm = NormalizationMap::from_schema(&schema).unwrap();
    let inputs: Vec<RingInput> = data
        .iter()
        .map(|d| RingInput {
            id: d.provenance().to_string(),
            stats: LocalStats::from_dataset(d, Some(&norm)).unwrap(),
        })
        .collect();
    let kp = keygen(params().key_bits, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
    let mut g = c.benchmark_group("ring_session_4x6");
    g.sample_size(10);
    for (name, seq) in MODES {
        par::set_sequential(seq);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                run_ring_session(&inputs, &SessionOptions::new(params()), Some(&kp), &mut rng)
                    .unwrap()
            })
        });
    }
    par::set_sequential(false);
    g.finish();
}

fn negotiation(c: &mut Criterion) {
    let policy = Arc::new(parse_policy("share : : :: ;\nacquire : : :: ;\n").unwrap());
    let (_, data, _) = synth_numeric(6, &[20; 13], 2, 0.1).unwrap();
    let members: Vec<MemberContext> = data
        .into_iter()
        .enumerate()
        .map(|(i, d)| MemberContext::new(&format!("P{}", i + 1), Arc::new(d), policy.clone()))
        .collect();
    let settings = NegotiationSettings::default();
    let mut g = c.benchmark_group("negotiate_13_open");
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| negotiate_consortium(&members, &settings).unwrap())
        });
    }
    par::set_sequential(false);
    g.finish();
}

criterion_group!(benches, encrypt, ring_session, negotiation);
criterion_main!(benches);
