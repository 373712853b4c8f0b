mod common;

use std::sync::Arc;

use cpl_core::cpl::{parse_policy, ClauseKind, Conditional, Filter, Operation, Selections, Value};
use cpl_core::data::synth::synth_numeric;
use cpl_core::data::{selection_mask, Dataset, Schema};
use cpl_core::dd::{scan_for_raw_values, DataRef, DdMode, RefValues};
use cpl_core::policy::{
    negotiate_consortium, negotiate_pair, resolve_clause, Directory, Env, MemberContext,
    NegotiationSettings, PolicyError, Status,
};
use proptest::prelude::*;

fn settings(mode: DdMode) -> NegotiationSettings {
    let mut s = NegotiationSettings {
        seed: 3,
        ..Default::default()
    };
    s.dd.mode = mode;
    s.dd.key_bits = 256;
    s.dd.audit = true;
    s
}

fn filters(text: &str) -> Vec<Filter> {
    let ast = parse_policy(&format!("share : : :: {text};")).unwrap();
    match &ast.clauses[0].selections {
        Selections::Filters(f) => f.clone(),
        Selections::TagRef(t) => panic!("tag {t}"),
    }
}

fn by_id<'a>(ms: &'a [MemberContext], id: &str) -> &'a MemberContext {
    ms.iter().find(|m| m.id == id).unwrap()
}

#[test]
fn jaccard_and_intersection_hold_gives_requester_selection() {
    let ms = common::walkthrough("walkthrough_m3.cpl");
    let dir = Directory::from_members(&ms);
    let out = negotiate_pair(&ms[0], &ms[2], &dir, &settings(DdMode::Blinded)).unwrap();
    let a = &out.agreement;
    assert_eq!(a.selections, filters("race = Asian"));
    assert_eq!(a.status, Status::Full);
    assert_eq!(a.provenance.as_ref().unwrap().owner_clause, 0);
    assert_eq!(a.provenance.as_ref().unwrap().requester_clause, 2);
    let stats: Vec<_> = a.trace.iter().filter_map(|e| e.entry.statistic).collect();
    // ages 20-40 vs 60-85 are disjoint; at most 3 genotypes are shared
    assert_eq!(stats[0], 0.0);
    assert!(stats[1] <= 3.0);
    assert!(!out.dd_messages.is_empty());
}

#[test]
fn failed_intersection_falls_back_to_weight_clause() {
    let ms = common::walkthrough("walkthrough_m3_strict.cpl");
    let dir = Directory::from_members(&ms);
    let a = negotiate_pair(&ms[0], &ms[2], &dir, &settings(DdMode::Blinded))
        .unwrap()
        .agreement;
    assert_eq!(a.selections, filters("weight > 150, race = Asian"));
    assert_eq!(a.provenance.as_ref().unwrap().owner_clause, 1);
    assert!(a
        .conditionals
        .iter()
        .all(|c| matches!(c, Conditional::Evaluate { .. })));
    assert_eq!(
        a.conditionals.len(),
        1,
        "only the requester's evaluate held"
    );
    assert!(matches!(a.status, Status::Partial | Status::Empty));
    let mask = selection_mask(&ms[2].dataset, &a.selections).unwrap();
    assert_eq!(mask.iter().filter(|&&b| b).count(), a.released_rows);
}

#[test]
fn fine_select_branches_follow_the_continent() {
    let mut ms = common::walkthrough("walkthrough_m3.cpl");
    let dir = Directory::from_members(&ms);
    let a = negotiate_pair(&ms[0], &ms[1], &dir, &settings(DdMode::Plain))
        .unwrap()
        .agreement;
    assert_eq!(
        a.selections,
        filters("race in <'White', 'Asian'>, age > 25")
    );
    assert_eq!(a.provenance.as_ref().unwrap().owner_branches, vec![0]);
    assert_eq!(a.status, Status::Partial);

    ms[0] = ms[0].clone().with_attribute("continent", "Europe");
    let a = negotiate_pair(&ms[0], &ms[1], &dir, &settings(DdMode::Plain))
        .unwrap()
        .agreement;
    assert_eq!(a.selections, filters("race = White, age > 25"));
    assert_eq!(a.provenance.as_ref().unwrap().owner_branches, vec![1]);
}

#[test]
fn alliance_and_size_conditionals() {
    let ms = common::walkthrough("walkthrough_m3.cpl");
    let dir = Directory::from_members(&ms);
    let a = negotiate_pair(&ms[1], &ms[2], &dir, &settings(DdMode::Plain))
        .unwrap()
        .agreement;
    assert_eq!(a.status, Status::Full);
    assert_eq!(a.released_rows, ms[2].dataset.len());
    // M1 is not in the EU directory entry if we drop the alliance
    let mut ms2 = ms.clone();
    ms2[0].alliances.remove("EU");
    let dir2 = Directory::from_members(&ms2);
    let a = negotiate_pair(&ms2[0], &ms2[1], &dir2, &settings(DdMode::Plain))
        .unwrap()
        .agreement;
    assert_eq!(a.status, Status::Empty);
    assert!(a.reason.unwrap().contains("no share clause"));
}

#[test]
fn unnamed_member_gets_no_match() {
    let ms = common::walkthrough("walkthrough_m3.cpl");
    let stranger = MemberContext::new(
        "M4",
        ms[0].dataset.clone(),
        Arc::new(parse_policy("acquire : : :: ;").unwrap()),
    );
    let all = vec![ms[0].clone(), stranger.clone()];
    let dir = Directory::from_members(&all);
    let a = negotiate_pair(&stranger, &ms[0], &dir, &settings(DdMode::Plain))
        .unwrap()
        .agreement;
    assert_eq!(a.status, Status::Empty);
    assert_eq!(
        a.reason.as_deref(),
        Some("no share clause of M1 matches M4")
    );
    let env = Env {
        evaluator: &ms[0],
        counterparty: &stranger,
        directory: &dir,
    };
    assert!(resolve_clause(ClauseKind::Share, &env).unwrap().is_none());
}

#[test]
fn walkthrough_round_logs_ten_messages() {
    let ms = common::walkthrough("walkthrough_m3.cpl");
    let round = negotiate_consortium(&ms, &settings(DdMode::Blinded)).unwrap();
    assert_eq!(round.log.len(), 10);
    assert_eq!(round.agreements.len(), 5);
    assert!(round.agreement("M3", "M1").is_none());
    assert_eq!(
        round.agreement("M1", "M3").unwrap().selections,
        filters("race = Asian")
    );
    let refs: Vec<DataRef> = ms
        .iter()
        .flat_map(|m| {
            ["age", "genotype", "weight"].map(|c| DataRef {
                member: m.id.clone(),
                column: c.into(),
                values: RefValues::Text(m.dataset.column_strings(c).unwrap()),
            })
        })
        .collect();
    let refs: Vec<&DataRef> = refs.iter().collect();
    assert_eq!(
        scan_for_raw_values(&round.dd_transcript, &refs),
        Vec::<String>::new()
    );
}

fn open_members(n: usize) -> Vec<MemberContext> {
    let (_, data, _) = synth_numeric(1, &vec![5; n], 2, 0.1).unwrap();
    let policy = Arc::new(parse_policy("acquire : : :: ; share : : :: ;").unwrap());
    data.into_iter()
        .enumerate()
        .map(|(i, d)| MemberContext::new(&format!("P{}", i + 1), Arc::new(d), policy.clone()))
        .collect()
}

#[test]
fn message_count_is_two_per_directed_pair() {
    for n in [2usize, 3, 5, 8, 13] {
        let round = negotiate_consortium(&open_members(n), &settings(DdMode::Plain)).unwrap();
        assert_eq!(round.log.len(), 2 * n * (n - 1), "n = {n}");
        assert_eq!(round.agreements.len(), n * (n - 1));
        assert!(round.agreements.iter().all(|a| a.status == Status::Full));
    }
    assert_eq!(
        negotiate_consortium(&open_members(13), &settings(DdMode::Plain))
            .unwrap()
            .log
            .len(),
        312
    );
}

#[test]
fn one_way_request() {
    let mut ms = open_members(2);
    ms[1].policy = Arc::new(parse_policy("share : : :: ;").unwrap());
    let round = negotiate_consortium(&ms, &settings(DdMode::Plain)).unwrap();
    assert_eq!(round.log.len(), 2);
    assert_eq!(round.agreements.len(), 1);
    assert_eq!(
        (
            round.agreements[0].requester.as_str(),
            round.agreements[0].owner.as_str()
        ),
        ("P1", "P2")
    );
    assert!(negotiate_consortium(&ms[..1], &settings(DdMode::Plain)).is_err());
}

#[test]
fn schema_mismatch_is_an_error_and_an_empty_agreement() {
    let mut ms = open_members(2);
    let other = Dataset::new(Arc::new(Schema::numeric(3)), "P2");
    ms[1].dataset = Arc::new(other);
    let dir = Directory::from_members(&ms);
    assert!(matches!(
        negotiate_pair(&ms[0], &ms[1], &dir, &settings(DdMode::Plain)),
        Err(PolicyError::SchemaMismatch(_))
    ));
    let round = negotiate_consortium(&ms, &settings(DdMode::Plain)).unwrap();
    assert!(round
        .agreements
        .iter()
        .all(|a| a.status == Status::Empty && a.reason.is_some()));
    assert_eq!(round.log.len(), 4);
}

#[test]
fn runtime_errors_become_reasons() {
    let mut ms = open_members(2);
    ms[0].policy =
        Arc::new(parse_policy("acquire : : :: ; share : : $tier = 'gold' :: ;").unwrap());
    let round = negotiate_consortium(&ms, &settings(DdMode::Plain)).unwrap();
    let a = round.agreement("P2", "P1").unwrap();
    assert_eq!(a.status, Status::Empty);
    assert!(a.reason.as_ref().unwrap().contains("$tier"));
    assert_eq!(round.agreement("P1", "P2").unwrap().status, Status::Full);

    ms[0].policy = Arc::new(parse_policy("share : : :: a; a : :: b; b : :: a;").unwrap());
    let dir = Directory::from_members(&ms);
    let err = negotiate_pair(&ms[1], &ms[0], &dir, &settings(DdMode::Plain)).unwrap_err();
    assert!(
        matches!(err, PolicyError::Cycle(ref c) if c == &["a", "b", "a"]),
        "{err}"
    );

    ms[0].policy =
        Arc::new(parse_policy("share : : evaluate(&nope, 'pearson', 0.5) :: ;").unwrap());
    let err = negotiate_pair(&ms[1], &ms[0], &dir, &settings(DdMode::Plain)).unwrap_err();
    assert!(matches!(err, PolicyError::ColumnMismatch { ref column, .. } if column == "nope"));
}

#[test]
fn comparator_attribute_flips_decision() {
    let mut ms = open_members(2);
    ms[0].policy = Arc::new(parse_policy("share : : evaluate(&x1, 'cosine', 2) :: ;").unwrap());
    let dir = Directory::from_members(&ms);
    let a = negotiate_pair(&ms[1], &ms[0], &dir, &settings(DdMode::Plain))
        .unwrap()
        .agreement;
    assert_eq!(a.status, Status::Full);
    ms[0].policy = Arc::new(
        parse_policy("dd_comparator := <\"above\">; share : : evaluate(&x1, 'cosine', 2) :: ;")
            .unwrap(),
    );
    let a = negotiate_pair(&ms[1], &ms[0], &dir, &settings(DdMode::Plain))
        .unwrap()
        .agreement;
    assert_eq!(a.status, Status::Empty);
}

#[test]
fn deferred_resolution_reports_data_dependent_conditionals() {
    let ms = common::walkthrough("walkthrough_m3.cpl");
    let dir = Directory::from_members(&ms);
    let env = Env {
        evaluator: &ms[2],
        counterparty: &ms[0],
        directory: &dir,
    };
    let r = resolve_clause(ClauseKind::Share, &env).unwrap().unwrap();
    assert_eq!(r.clause_index, 0);
    assert_eq!(r.deferred.len(), 1);
    assert!(r.selections.is_empty());
}

#[test]
fn resolution_matches_exhaustive_oracle() {
    let (checked, bad) = common::exhaustive_resolution_check();
    assert_eq!(checked, 80);
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn identical_contexts_give_identical_rounds() {
    let ms = common::walkthrough("walkthrough_m3.cpl");
    let a = negotiate_consortium(&ms, &settings(DdMode::Plain)).unwrap();
    let b = negotiate_consortium(&ms, &settings(DdMode::Plain)).unwrap();
    assert_eq!(a.agreements, b.agreements);
    assert_eq!(a.log, b.log);
}

// Random two-member policies over x1, x2.

#[derive(Debug, Clone)]
struct GenClause {
    share: bool,
    named: bool,
    min_size: Option<u32>,
    x1_gt: Option<i8>,
    x2_lt: Option<i8>,
}

impl GenClause {
    fn text(&self, other: &str) -> String {
        let kw = if self.share { "share" } else { "acquire" };
        let members = if self.named { other } else { "" };
        let conds = self
            .min_size
            .map(|k| format!("size(data) > {k}"))
            .unwrap_or_default();
        let mut f = Vec::new();
        if let Some(t) = self.x1_gt {
            f.push(format!("x1 > {}", t as f64 / 100.0));
        }
        if let Some(t) = self.x2_lt {
            f.push(format!("x2 < {}", t as f64 / 100.0));
        }
        format!("{kw} : {members} : {conds} :: {};\n", f.join(", "))
    }
}

fn gen_clause() -> impl Strategy<Value = GenClause> {
    (
        any::<bool>(),
        any::<bool>(),
        proptest::option::of(0u32..40),
        proptest::option::of(-100i8..100),
        proptest::option::of(-100i8..100),
    )
        .prop_map(|(share, named, min_size, x1_gt, x2_lt)| GenClause {
            share,
            named,
            min_size,
            x1_gt,
            x2_lt,
        })
}

fn pair_with(pa: &str, pb: &str, sizes: (usize, usize)) -> Vec<MemberContext> {
    let (_, data, _) = synth_numeric(9, &[sizes.0, sizes.1], 2, 0.1).unwrap();
    let mut data = data.into_iter();
    vec![
        MemberContext::new(
            "A",
            Arc::new(data.next().unwrap()),
            Arc::new(parse_policy(pa).unwrap()),
        ),
        MemberContext::new(
            "B",
            Arc::new(data.next().unwrap()),
            Arc::new(parse_policy(pb).unwrap()),
        ),
    ]
}

fn released(ms: &[MemberContext], req: &str, owner: &str) -> Vec<bool> {
    let dir = Directory::from_members(ms);
    let a = negotiate_pair(
        by_id(ms, req),
        by_id(ms, owner),
        &dir,
        &settings(DdMode::Plain),
    )
    .unwrap()
    .agreement;
    let ds = &by_id(ms, owner).dataset;
    if a.status == Status::Empty {
        return vec![false; ds.len()];
    }
    selection_mask(ds, &a.selections).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn released_rows_satisfy_owner_share(ca in proptest::collection::vec(gen_clause(), 1..4),
                                         cb in proptest::collection::vec(gen_clause(), 1..4),
                                         na in 5usize..40, nb in 5usize..40) {
        let pa: String = ca.iter().map(|c| c.text("B")).collect();
        let pb: String = cb.iter().map(|c| c.text("A")).collect();
        let ms = pair_with(&pa, &pb, (na, nb));
        let dir = Directory::from_members(&ms);
        let got = released(&ms, "A", "B");
        let env = Env { evaluator: &ms[1], counterparty: &ms[0], directory: &dir };
        match resolve_clause(ClauseKind::Share, &env).unwrap() {
            Some(r) => {
                let allowed = selection_mask(&ms[1].dataset, &r.selections).unwrap();
                for (g, a) in got.iter().zip(&allowed) {
                    prop_assert!(!g || *a);
                }
            }
            None => prop_assert!(got.iter().all(|g| !g)),
        }
    }

    #[test]
    fn share_policy_of_requester_is_irrelevant(ca in proptest::collection::vec(gen_clause(), 1..4),
                                                cb in proptest::collection::vec(gen_clause(), 1..4),
                                                extra in proptest::collection::vec(gen_clause(), 1..3)) {
        let pa: String = ca.iter().map(|c| c.text("B")).collect();
        let pb: String = cb.iter().map(|c| c.text("A")).collect();
        let extra_share: String = extra.iter().map(|c| GenClause { share: true, ..c.clone() }.text("B")).collect();
        let before = pair_with(&pa, &pb, (20, 20));
        let after = pair_with(&format!("{extra_share}{pa}"), &pb, (20, 20));
        let dir_b = Directory::from_members(&before);
        let dir_a = Directory::from_members(&after);
        let x = negotiate_pair(&before[0], &before[1], &dir_b, &settings(DdMode::Plain)).unwrap().agreement;
        let y = negotiate_pair(&after[0], &after[1], &dir_a, &settings(DdMode::Plain)).unwrap().agreement;
        prop_assert_eq!(x.status, y.status);
        prop_assert_eq!(x.selections, y.selections);
        prop_assert_eq!(x.released_rows, y.released_rows);
    }

    // With one applicable clause per side, an added conditional can only
    // remove rows.
    #[test]
    fn added_conditional_never_enlarges(acq in gen_clause(), share in gen_clause(), k in 0u32..40, on_owner: bool) {
        let acq = GenClause { share: false, ..acq };
        let share = GenClause { share: true, ..share };
        let pa = acq.text("B");
        let pb = share.text("A");
        let base = released(&pair_with(&pa, &pb, (25, 25)), "A", "B");
        let tighten = |c: &GenClause, other: &str| {
            let t = c.text(other);
            let (head, tail) = t.split_once("::").unwrap();
            let sep = if c.min_size.is_some() { "," } else { "" };
            format!("{head}{sep} size(data) > {k} ::{tail}")
        };
        let (pa2, pb2) = if on_owner { (pa.clone(), tighten(&share, "A")) } else { (tighten(&acq, "B"), pb.clone()) };
        let tight = released(&pair_with(&pa2, &pb2, (25, 25)), "A", "B");
        for (t, b) in tight.iter().zip(&base) {
            prop_assert!(!t || *b);
        }
    }
}

#[test]
fn substituted_filters_reach_the_agreement() {
    let mut ms = open_members(2);
    ms[0].policy = Arc::new(parse_policy("limit := <0.25>; share : : :: x1 < $limit;").unwrap());
    let dir = Directory::from_members(&ms);
    let a = negotiate_pair(&ms[1], &ms[0], &dir, &settings(DdMode::Plain))
        .unwrap()
        .agreement;
    assert_eq!(
        a.selections,
        vec![Filter {
            column: "x1".into(),
            sigil: false,
            op: Operation::Lt,
            value: Value::Num(0.25)
        }]
    );
}
