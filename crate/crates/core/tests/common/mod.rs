#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use cpl_core::cpl::{
    parse_policy, serialize, ClauseKind, Conditional, Filter, PolicyAst, Selections,
};
use cpl_core::data::synth::{synth_members, SynthProfile, Truth};
use cpl_core::data::{Dataset, Schema};
use cpl_core::policy::{resolve_with, DdVerdict, Directory, Env, MemberContext};
use rand::{Rng, SeedableRng};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

pub fn corpus(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn policy(name: &str) -> Arc<PolicyAst> {
    Arc::new(parse_policy(&corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}")))
}

/// Walkthrough datasets: M1 young (20-40), M2 large (1200 rows), M3 old (60-85).
pub fn walkthrough_data(seed: u64) -> Vec<Arc<Dataset>> {
    let schema = Arc::new(Schema::walkthrough());
    let truth = Truth::default_homogeneous(&schema);
    let mut p1 = SynthProfile::new("M1", 300, truth.clone());
    p1.age_range = (20.0, 40.0);
    let p2 = SynthProfile::new("M2", 1200, truth.clone());
    let mut p3 = SynthProfile::new("M3", 400, truth);
    p3.age_range = (60.0, 85.0);
    synth_members(seed, &schema, &[p1, p2, p3])
        .unwrap()
        .into_iter()
        .map(Arc::new)
        .collect()
}

/// M1 is a North American NATO and EU member, M2 is in the EU, M3 in NATO.
pub fn walkthrough(m3_policy: &str) -> Vec<MemberContext> {
    let data = walkthrough_data(11);
    vec![
        MemberContext::new("M1", data[0].clone(), policy("walkthrough_m1.cpl"))
            .with_attribute("country", "US")
            .with_attribute("continent", "North America")
            .with_alliance("NATO")
            .with_alliance("EU"),
        MemberContext::new("M2", data[1].clone(), policy("walkthrough_m2.cpl"))
            .with_attribute("country", "SE")
            .with_attribute("continent", "Europe")
            .with_alliance("EU"),
        MemberContext::new("M3", data[2].clone(), policy(m3_policy))
            .with_attribute("country", "UK")
            .with_attribute("continent", "Europe")
            .with_alliance("NATO"),
    ]
}

/// A random numeric consortium: 2-10 members, 1-40 features, at most 5000
/// rows in total and enough of them to pin every coefficient.
pub struct RandomConsortium {
    pub features: usize,
    pub data: Vec<Dataset>,
}

pub fn random_consortium(seed: u64) -> RandomConsortium {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let members: usize = rng.random_range(2..=10);
    let features: usize = rng.random_range(1..=40);
    let floor = (4 * (features + 1)).div_ceil(members);
    let cap = 5000 / members;
    let sizes: Vec<usize> = (0..members)
        .map(|_| rng.random_range(floor..=cap.max(floor)))
        .collect();
    let (_, data, _) = cpl_core::data::synth::synth_numeric(seed, &sizes, features, 0.3)
        .expect("synthetic consortium");
    RandomConsortium { features, data }
}

/// Coefficients of least squares on the concatenated, normalized data,
/// through an SVD rather than the normal equations.
pub fn centralized_coefficients(data: &[Dataset]) -> nalgebra::DVector<f64> {
    let norm = cpl_core::data::NormalizationMap::from_schema(data[0].schema()).unwrap();
    let all = data[0].concat(&data[1..]).unwrap();
    let dm = cpl_core::data::to_design_matrix(&norm.apply(&all).unwrap());
    dm.x.svd(true, true).solve(&dm.y, 1e-12).unwrap()
}

pub fn rel_err(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

// Independent top-down matcher: no partitioning, no tracing, plain recursion.
fn oracle(
    policy: &PolicyAst,
    kind: &ClauseKind,
    env: &Env,
    truth: &dyn Fn(&str) -> bool,
) -> Option<(usize, Vec<Filter>)> {
    let holds = |c: &Conditional| match c {
        Conditional::Evaluate { .. } => truth(&serialize::conditional(c)),
        _ => env.eval_conditional(c).unwrap(),
    };
    fn expand(
        p: &PolicyAst,
        s: &Selections,
        holds: &dyn Fn(&Conditional) -> bool,
        depth: usize,
    ) -> Option<Vec<Filter>> {
        assert!(depth < 16);
        match s {
            Selections::Filters(f) => Some(f.clone()),
            Selections::TagRef(t) => p
                .sub_clauses
                .iter()
                .filter(|c| c.tag() == Some(t.as_str()))
                .filter(|c| c.conditionals.iter().all(holds))
                .find_map(|c| expand(p, &c.selections, holds, depth + 1)),
        }
    }
    policy.clauses.iter().enumerate().find_map(|(i, c)| {
        let applies = c.members.is_empty() || c.members.contains(&env.counterparty.id);
        if &c.kind != kind || !applies || !c.conditionals.iter().all(&holds) {
            return None;
        }
        expand(policy, &c.selections, &holds, 0).map(|f| (i, f))
    })
}

/// Compares `resolve_with` against the matcher above for every evaluator,
/// counterparty, clause kind and truth assignment of the data-dependent
/// conditionals, on both M3 variants and both M1 continents. Returns the
/// number of cases checked and the mismatches.
pub fn exhaustive_resolution_check() -> (usize, Vec<String>) {
    let mut bad = Vec::new();
    let mut checked = 0;
    for m3 in ["walkthrough_m3.cpl", "walkthrough_m3_strict.cpl"] {
        let mut ms = walkthrough(m3);
        for continent in ["North America", "Europe"] {
            ms[0] = ms[0].clone().with_attribute("continent", continent);
            let dir = Directory::from_members(&ms);
            for ev in &ms {
                let dd: Vec<String> = ev
                    .policy
                    .clauses
                    .iter()
                    .chain(&ev.policy.sub_clauses)
                    .flat_map(|c| &c.conditionals)
                    .filter(|c| matches!(c, Conditional::Evaluate { .. }))
                    .map(serialize::conditional)
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                for cp in &ms {
                    if cp.id == ev.id {
                        continue;
                    }
                    let env = Env {
                        evaluator: ev,
                        counterparty: cp,
                        directory: &dir,
                    };
                    for bits in 0..(1u32 << dd.len()) {
                        let truth =
                            |t: &str| bits >> dd.iter().position(|d| d == t).unwrap() & 1 == 1;
                        for kind in [ClauseKind::Share, ClauseKind::Acquire] {
                            let mut trace = Vec::new();
                            let mut hook = |c: &Conditional| {
                                Ok(DdVerdict {
                                    holds: truth(&serialize::conditional(c)),
                                    statistic: None,
                                })
                            };
                            let got =
                                resolve_with(kind.clone(), &env, &mut hook, &mut trace).unwrap();
                            let want = oracle(&ev.policy, &kind, &env, &truth);
                            let got = got.map(|r| (r.clause_index, r.selections));
                            let want = want.map(|(i, f)| (i, env.substitute(&f).unwrap()));
                            if got != want {
                                bad.push(format!("{} -> {} {kind} bits={bits}", ev.id, cp.id));
                            }
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    (checked, bad)
}

// Oracles: quadratic loops and two-pass moments, no hashing.

fn distinct(v: &[String]) -> Vec<&String> {
    let mut out: Vec<&String> = Vec::new();
    for x in v {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

pub fn oracle_intersection(a: &[String], b: &[String]) -> f64 {
    let db = distinct(b);
    distinct(a).iter().filter(|x| db.contains(x)).count() as f64
}

pub fn oracle_jaccard(a: &[String], b: &[String]) -> f64 {
    let inter = oracle_intersection(a, b);
    let union = distinct(a).len() as f64 + distinct(b).len() as f64 - inter;
    inter / union
}

pub fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for i in 0..a.len() {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma).powi(2);
        sbb += (b[i] - mb).powi(2);
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt()
        * b.iter().map(|x| x * x).sum::<f64>().sqrt())
}

pub fn words(rng: &mut rand_chacha::ChaCha20Rng) -> Vec<String> {
    let n = rng.random_range(1..40);
    let vocab = rng.random_range(2..60);
    (0..n)
        .map(|_| format!("v{}", rng.random_range(0..vocab)))
        .collect()
}

pub fn reals(rng: &mut rand_chacha::ChaCha20Rng, n: usize) -> Vec<f64> {
    let shift = rng.random_range(-50.0..50.0);
    (0..n)
        .map(|_| shift + rng.random_range(-100.0..100.0))
        .collect()
}
