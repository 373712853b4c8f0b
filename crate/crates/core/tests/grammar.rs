//! Corpus, round-trip and fuzz checks for the policy parser.

use std::collections::BTreeSet;
use std::path::PathBuf;

use cpl_core::cpl::{
    parse_policy, productions_used, serialize, tokenize, validate, ClauseKind, Production, Severity,
};
use proptest::prelude::*;

fn corpus() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cpl"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn corpus_parses_and_round_trips() {
    let files = corpus();
    assert!(files.len() >= 25, "only {} corpus files", files.len());
    for (name, text) in &files {
        let ast = parse_policy(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = serialize(&ast);
        let again =
            parse_policy(&printed).unwrap_or_else(|e| panic!("{name} reprint: {e}\n{printed}"));
        assert_eq!(ast, again, "{name}");
        assert_eq!(
            serialize(&again),
            printed,
            "{name}: printing is not idempotent"
        );
        let errors: Vec<_> = validate(&ast)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
    }
}

#[test]
fn corpus_covers_every_production() {
    let used: BTreeSet<Production> = corpus()
        .iter()
        .flat_map(|(_, t)| productions_used(&parse_policy(t).unwrap()))
        .collect();
    let missing: Vec<_> = Production::ALL
        .iter()
        .filter(|p| !used.contains(p))
        .collect();
    assert!(missing.is_empty(), "uncovered: {missing:?}");
}

#[test]
fn walkthrough_has_fourteen_clauses() {
    let count: usize = [
        "walkthrough_m1.cpl",
        "walkthrough_m2.cpl",
        "walkthrough_m3.cpl",
    ]
    .iter()
    .map(|f| {
        let text = corpus().into_iter().find(|(n, _)| n == f).unwrap().1;
        let ast = parse_policy(&text).unwrap();
        ast.clauses.len() + ast.sub_clauses.len()
    })
    .sum();
    assert_eq!(count, 14);
    let m2 = parse_policy(
        &corpus()
            .into_iter()
            .find(|(n, _)| n == "walkthrough_m2.cpl")
            .unwrap()
            .1,
    )
    .unwrap();
    assert_eq!(
        m2.clauses
            .iter()
            .filter(|c| c.kind == ClauseKind::Share)
            .count(),
        2
    );
    assert_eq!(m2.sub_clauses.len(), 2);
}

#[test]
fn errors_carry_positions() {
    let e = parse_policy("share : M1 : :: ;\nacquire M2 : :: ;").unwrap_err();
    assert_eq!(e.span().line, 2);
    assert!(parse_policy("share : M1 : :: age >;").is_err());
    assert!(parse_policy("share : M1 : evaluate(&age, 'nonsense', 1) :: ;").is_err());
}

// Source-level generator: random but well-formed policies.

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["M1", "M2", "M3", "US1", "JP2", "site_a"]).prop_map(String::from)
}

fn value() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["\"US\"", "\"Asia\"", "'A/A'", "Asian", "White"])
            .prop_map(String::from),
        (0u32..500).prop_map(|n| n.to_string()),
        prop::collection::vec(prop::sample::select(vec!["\"a\"", "\"b\"", "Black"]), 1..4)
            .prop_map(|v| format!("<{}>", v.join(", "))),
    ]
}

fn filter() -> impl Strategy<Value = String> {
    (
        prop::sample::select(vec!["age", "race", "weight", "genotype"]),
        prop::sample::select(vec!["=", "<", ">", "!=", "in"]),
        value(),
    )
        .prop_map(|(c, op, v)| format!("{c} {op} {v}"))
}

fn conditional() -> impl Strategy<Value = String> {
    prop_oneof![
        (
            prop::sample::select(vec!["$country", "$continent"]),
            value()
        )
            .prop_map(|(v, x)| format!("{v} = {x}")),
        (
            prop::sample::select(vec!["age", "weight", "genotype"]),
            prop::sample::select(vec![
                "Jaccard",
                "intersection size",
                "pearson",
                "cosine similarity"
            ]),
            0u32..100
        )
            .prop_map(|(c, a, t)| format!("evaluate(&{c}, '{a}', {})", t as f64 / 10.0)),
        (ident(), prop::sample::select(vec!["$NATO", "$EU"]))
            .prop_map(|(m, a)| format!("{m} in {a}")),
        (1u32..5000).prop_map(|n| format!("size(data) > {n}")),
    ]
}

fn clause() -> impl Strategy<Value = String> {
    (
        prop::sample::select(vec!["share", "acquire"]),
        prop::collection::vec(ident(), 0..3),
        prop::collection::vec(conditional(), 0..3),
        prop::collection::vec(filter(), 0..3),
    )
        .prop_map(|(kw, m, c, f)| {
            format!(
                "{kw} : {} : {} :: {};",
                m.join(", "),
                c.join(", "),
                f.join(", ")
            )
        })
}

fn policy() -> impl Strategy<Value = String> {
    (
        prop::collection::vec(clause(), 1..6),
        prop::option::of(value()),
    )
        .prop_map(|(cs, attr)| {
            let mut s = String::new();
            if let Some(v) = attr {
                s.push_str(&format!("site := {v};\n"));
            }
            s.push_str(&cs.join("\n"));
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generated_policies_round_trip(src in policy()) {
        let ast = parse_policy(&src).unwrap();
        let again = parse_policy(&serialize(&ast)).unwrap();
        prop_assert_eq!(ast, again);
    }

    #[test]
    fn arbitrary_text_never_panics(src in "\\PC{0,200}") {
        let _ = tokenize(&src);
        if let Ok(ast) = parse_policy(&src) {
            let _ = validate(&ast);
            prop_assert_eq!(parse_policy(&serialize(&ast)).unwrap(), ast);
        }
    }

    #[test]
    fn mutated_corpus_never_panics(idx in 0usize..25, at in any::<prop::sample::Index>(), junk in "[:;,<>&$()'\"=!a-z0-9 \n]{0,6}", cut in 0usize..8) {
        let files = corpus();
        let text = &files[idx % files.len()].1;
        let chars: Vec<char> = text.chars().collect();
        let i = at.index(chars.len() + 1);
        let end = (i + cut).min(chars.len());
        let mutated: String = chars[..i].iter().chain(junk.chars().collect::<Vec<_>>().iter()).chain(chars[end..].iter()).collect();
        if let Ok(ast) = parse_policy(&mutated) {
            let _ = validate(&ast);
            let _ = productions_used(&ast);
        }
    }
}
