//! Example configs, scenario runs and report determinism.

use std::path::{Path, PathBuf};

use cpl_core::cpl::parse_policy;
use cpl_core::harness::{
    load_config, run_scenario, Consortium, ConsortiumConfig, HarnessError, Mode,
};

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn small_keys(mut cfg: ConsortiumConfig) -> ConsortiumConfig {
    cfg.he.key_bits = 512;
    cfg.dd.key_bits = 256;
    cfg
}

fn load(name: &str) -> ConsortiumConfig {
    small_keys(load_config(&configs_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}")))
}

#[test]
fn every_example_config_loads() {
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".toml"))
        .collect();
    names.push("walkthrough/walkthrough.toml".into());
    assert!(names.len() >= 6);
    for n in &names {
        let c = Consortium::build(&load(n)).unwrap_or_else(|e| panic!("{n}: {e}"));
        assert!(c.members.len() >= 3, "{n}");
    }
}

#[test]
fn walkthrough_config_has_fourteen_clauses() {
    let cfg = load("walkthrough/walkthrough.toml");
    let total: usize = cfg
        .members
        .iter()
        .map(|m| {
            let ast =
                parse_policy(&std::fs::read_to_string(cfg.resolve(&m.policy)).unwrap()).unwrap();
            ast.clauses.len() + ast.sub_clauses.len()
        })
        .sum();
    assert_eq!(total, 14);
}

#[test]
fn negotiate_only_reports_are_byte_identical() {
    let cfg = load("walkthrough/walkthrough.toml");
    let a = run_scenario(&Consortium::build(&cfg).unwrap(), Mode::NegotiateOnly)
        .unwrap()
        .to_json();
    let b = run_scenario(&Consortium::build(&cfg).unwrap(), Mode::NegotiateOnly)
        .unwrap()
        .to_json();
    assert_eq!(a, b);
    assert!(!a.contains("timings"));
    let mut other = cfg.clone();
    other.seed += 1;
    let c = run_scenario(&Consortium::build(&other).unwrap(), Mode::NegotiateOnly)
        .unwrap()
        .to_json();
    assert_ne!(a, c);
}

fn open_consortium(dir: &Path, n: usize) -> ConsortiumConfig {
    std::fs::write(dir.join("open.cpl"), "share : : :: ;\nacquire : : :: ;\n").unwrap();
    let mut text = String::from(
        "version = 1\nname = \"open\"\nschema = \"numeric:2\"\n[he]\nkey_bits = 256\n",
    );
    for i in 1..=n {
        text.push_str(&format!(
            "[[members]]\nid = \"P{i}\"\npolicy = \"open.cpl\"\nsynth = {{ rows = 20 }}\n"
        ));
    }
    ConsortiumConfig::from_toml(&text, dir).unwrap()
}

#[test]
fn thirteen_open_members_exchange_312_messages() {
    let dir = tempfile::tempdir().unwrap();
    let c = Consortium::build(&open_consortium(dir.path(), 13)).unwrap();
    let r = run_scenario(&c, Mode::NegotiateOnly).unwrap();
    assert_eq!(r.messages.negotiation, 312);
    assert_eq!(r.messages.negotiation_expected, 312);
}

#[test]
fn single_source_has_no_sessions() {
    let c = Consortium::build(&load("p1_single_source.toml")).unwrap();
    let r = run_scenario(&c, Mode::Full).unwrap();
    assert!(r.sessions.is_empty());
    assert_eq!(r.local.len(), 12);
    assert_eq!(r.messages.negotiation, 0);
}

#[test]
fn global_pool_beats_every_member_on_average() {
    let base = load("p5_global.toml");
    let mut pooled = 0.0;
    let mut local = vec![0.0; base.members.len()];
    for seed in 0..10 {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let r = run_scenario(&Consortium::build(&cfg).unwrap(), Mode::Full).unwrap();
        let s = &r.sessions[0];
        assert!(s.transcript_clean);
        assert!(s.oracle_max_rel_diff < 1e-4, "{}", s.oracle_max_rel_diff);
        pooled += s.metrics.mae;
        for (acc, l) in local.iter_mut().zip(&r.local) {
            *acc += l.metrics.mae;
        }
    }
    for (m, l) in base.members.iter().zip(&local) {
        assert!(pooled <= *l, "{}: pooled {pooled} vs local {l}", m.id);
    }
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.cpl"), "share : : :: ;").unwrap();
    let text = "version = 1\nname = \"x\"\nschema = \"numeric:2\"\n[dp]\nepsilons = [1, -2]\n[[members]]\nid = \"A\"\npolicy = \"a.cpl\"\nsynth = { rows = 5 }\n";
    match ConsortiumConfig::from_toml(text, dir.path()) {
        Err(HarnessError::Config { path, .. }) => assert_eq!(path, "dp.epsilons[1]"),
        other => panic!("{other:?}"),
    }
}
