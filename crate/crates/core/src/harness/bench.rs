//! Ring-session timings along one axis: members, rows or features.

use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{phase, HarnessError};
use crate::aggregation::{run_ring_session, LocalStats, RingInput, SessionOptions};
use crate::crypto::{keygen, HEParams};
use crate::data::synth::synth_numeric;
use crate::data::NormalizationMap;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Members,
    Rows,
    Features,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "members" => Ok(Axis::Members),
            "rows" => Ok(Axis::Rows),
            "features" => Ok(Axis::Features),
            _ => Err(format!("unknown axis `{s}` (members, rows or features)")),
        }
    }
}

/// Values held fixed while one axis varies. `rows` is per member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchBase {
    pub members: usize,
    pub rows: usize,
    pub features: usize,
}

impl Default for BenchBase {
    fn default() -> Self {
        BenchBase {
            members: 5,
            rows: 1000,
            features: 8,
        }
    }
}

/// Medians over the runs, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchPoint {
    pub axis: Axis,
    pub value: usize,
    pub members: usize,
    pub rows: usize,
    pub features: usize,
    pub runs: usize,
    pub keygen_s: f64,
    pub encrypt_s: f64,
    pub evaluate_s: f64,
    pub decrypt_s: f64,
    /// Encrypt, evaluate and decrypt, without key generation.
    pub encrypted_phase_s: f64,
    pub total_s: f64,
    pub messages: usize,
}

fn median(mut v: Vec<Duration>) -> f64 {
    v.sort();
    v[v.len() / 2].as_secs_f64()
}

#[derive(Default)]
struct Samples {
    keygen: Vec<Duration>,
    encrypt: Vec<Duration>,
    evaluate: Vec<Duration>,
    decrypt: Vec<Duration>,
    phase: Vec<Duration>,
    total: Vec<Duration>,
    messages: usize,
}

/// Each run generates its key from a stream that depends only on the seed and
/// run index, so key generation does the same work at every axis value. Runs
/// are interleaved across values so that slow spells on a shared machine do
/// not all land on one point.
pub fn run_bench(
    params: &HEParams,
    seed: u64,
    axis: Axis,
    values: &[usize],
    base: BenchBase,
    runs: usize,
) -> Result<Vec<BenchPoint>, HarnessError> {
    let runs = runs.max(1);
    let mut shapes = Vec::with_capacity(values.len());
    for &value in values {
        let mut shape = base;
        match axis {
            Axis::Members => shape.members = value,
            Axis::Rows => shape.rows = value,
            Axis::Features => shape.features = value,
        }
        if shape.members < 2 || shape.rows == 0 || shape.features == 0 {
            return Err(HarnessError::Phase {
                phase: "bench",
                message: format!("invalid {axis:?} value {value}"),
            });
        }
        let sizes = vec![shape.rows; shape.members];
        let (schema, data, _) = synth_numeric(
            seeds::derive_u64(seed, "bench/data"),
            &sizes,
            shape.features,
            0.3,
        )
        .map_err(phase("bench"))?;
        let norm = NormalizationMap::from_schema(&schema).map_err(phase("bench"))?;
        let inputs = data
            .iter()
            .map(|d| {
                Ok(RingInput {
                    id: d.provenance().to_string(),
                    stats: LocalStats::from_dataset(d, Some(&norm)).map_err(phase("bench"))?,
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        shapes.push((value, shape, inputs));
    }

    // untimed warm-up so the first point does not pay for cold caches
    keygen(params.key_bits, &mut seeds::rng(seed, "bench/keygen/0")).map_err(phase("bench"))?;
    let mut samples: Vec<Samples> = shapes.iter().map(|_| Samples::default()).collect();
    for r in 0..runs {
        for ((value, _, inputs), acc) in shapes.iter().zip(samples.iter_mut()) {
            let mut krng = seeds::rng(seed, &format!("bench/keygen/{r}"));
            let t = Instant::now();
            let keys = keygen(params.key_bits, &mut krng).map_err(phase("bench"))?;
            let keygen_time = t.elapsed();
            let mut rng = seeds::rng(seed, &format!("bench/{axis:?}/{value}/{r}"));
            let t = Instant::now();
            let s = run_ring_session(
                inputs,
                &SessionOptions::new(params.clone()),
                Some(&keys),
                &mut rng,
            )
            .map_err(phase("bench"))?;
            let session_time = t.elapsed();
            acc.keygen.push(keygen_time);
            acc.encrypt.push(s.timings.encrypt);
            acc.evaluate.push(s.timings.evaluate);
            acc.decrypt.push(s.timings.decrypt);
            acc.phase.push(s.timings.encrypted_phase());
            acc.total.push(keygen_time + session_time);
            acc.messages = s.transcript.len();
        }
    }

    Ok(shapes
        .into_iter()
        .zip(samples)
        .map(|((value, shape, _), s)| BenchPoint {
            axis,
            value,
            members: shape.members,
            rows: shape.rows,
            features: shape.features,
            runs,
            keygen_s: median(s.keygen),
            encrypt_s: median(s.encrypt),
            evaluate_s: median(s.evaluate),
            decrypt_s: median(s.decrypt),
            encrypted_phase_s: median(s.phase),
            total_s: median(s.total),
            messages: s.messages,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parses() {
        assert_eq!("rows".parse::<Axis>().unwrap(), Axis::Rows);
        assert!("cols".parse::<Axis>().is_err());
    }

    #[test]
    fn small_bench_counts_messages() {
        let params = HEParams {
            key_bits: 256,
            ..HEParams::default()
        };
        let base = BenchBase {
            members: 3,
            rows: 50,
            features: 2,
        };
        let pts = run_bench(&params, 1, Axis::Members, &[2, 4], base, 1).unwrap();
        assert_eq!(
            pts.iter().map(|p| p.messages).collect::<Vec<_>>(),
            vec![3, 7]
        );
        assert!(pts
            .iter()
            .all(|p| p.keygen_s >= 0.0 && p.total_s >= p.encrypted_phase_s));
    }
}
