//! Dose models, the functional mechanism and clinical metrics end to end.

mod common;

use std::sync::Arc;

use cpl_core::aggregation::{pool_plain, LocalStats, RingInput};
use cpl_core::data::schema::{DOSE_MAX, DOSE_MIN};
use cpl_core::data::synth::{synth_members, SynthProfile, Truth};
use cpl_core::data::{NormalizationMap, Schema};
use cpl_core::regression::{
    clinical_metrics, functional_mechanism, solve_ols, DoseModel, PrivacyBudget, RegressionError,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn warfarin(
    seed: u64,
    sizes: &[usize],
) -> (Arc<Schema>, NormalizationMap, Vec<cpl_core::data::Dataset>) {
    let schema = Arc::new(Schema::warfarin());
    let truth = Truth::default_race_dependent(&schema);
    let profiles: Vec<_> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| SynthProfile::new(&format!("H{i}"), n, truth.clone()))
        .collect();
    let data = synth_members(seed, &schema, &profiles).unwrap();
    let norm = NormalizationMap::from_schema(&schema).unwrap();
    (schema, norm, data)
}

fn pooled(norm: &NormalizationMap, data: &[cpl_core::data::Dataset]) -> LocalStats {
    let ring: Vec<RingInput> = data
        .iter()
        .map(|d| RingInput {
            id: d.provenance().into(),
            stats: LocalStats::from_dataset(d, Some(norm)).unwrap(),
        })
        .collect();
    pool_plain(&ring).unwrap()
}

#[test]
fn huge_budget_recovers_ols() {
    let (_, norm, data) = warfarin(1, &[400, 600]);
    let s = pooled(&norm, &data);
    let exact = solve_ols(&s.o, &s.v).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let noisy =
        functional_mechanism(&s.o, &s.v, s.n, PrivacyBudget::new(1e9).unwrap(), &mut rng).unwrap();
    assert!(common::rel_err(&noisy, &exact) < 1e-3);
}

#[test]
fn every_call_draws_fresh_noise() {
    let (_, norm, data) = warfarin(3, &[300]);
    let s = pooled(&norm, &data);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let b = PrivacyBudget::new(5.0).unwrap();
    let a = functional_mechanism(&s.o, &s.v, s.n, b, &mut rng).unwrap();
    let c = functional_mechanism(&s.o, &s.v, s.n, b, &mut rng).unwrap();
    assert_ne!(a, c);
}

#[test]
fn pooled_model_predicts_like_the_centralized_one() {
    let (schema, norm, data) = warfarin(5, &[200, 300, 250]);
    let s = pooled(&norm, &data);
    let model = DoseModel::fit(&schema, &norm, &s.o, &s.v).unwrap();
    let eta = common::centralized_coefficients(&data);
    let central =
        DoseModel::from_coefficients(&schema, &norm, eta.as_slice().to_vec(), model.privacy)
            .unwrap();
    let (_, _, val) = warfarin(6, &[500]);
    for (a, b) in model
        .predict(&val[0])
        .unwrap()
        .iter()
        .zip(central.predict(&val[0]).unwrap())
    {
        assert!((a - b).abs() <= 1e-6 * b.abs(), "{a} vs {b}");
    }
}

#[test]
fn private_predictions_stay_in_the_dose_range() {
    let (schema, norm, data) = warfarin(7, &[150]);
    let s = pooled(&norm, &data);
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let m = DoseModel::fit_dp(
        &schema,
        &norm,
        &s.o,
        &s.v,
        s.n,
        PrivacyBudget::new(0.25).unwrap(),
        &mut rng,
    )
    .unwrap();
    let pred = m.predict(&data[0]).unwrap();
    assert!(pred
        .iter()
        .all(|p| (DOSE_MIN - 1e-9..=DOSE_MAX + 1e-9).contains(p)));
    assert!(m.to_json().contains("\"epsilon\": 0.25"));
}

#[test]
fn unnormalized_statistics_are_refused() {
    let (_, _, data) = warfarin(9, &[100]);
    let raw = LocalStats::from_dataset(&data[0], None).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let r = functional_mechanism(
        &raw.o,
        &raw.v,
        raw.n,
        PrivacyBudget::new(1.0).unwrap(),
        &mut rng,
    );
    assert!(matches!(r, Err(RegressionError::Normalization(_))));
    assert!(PrivacyBudget::new(0.0).is_err());
    assert!(PrivacyBudget::new(f64::NAN).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_against_direct_count(pairs in prop::collection::vec((1.0f64..20.0, 0.5f64..1.5), 1..60)) {
        prop_assume!(pairs.iter().all(|p| ((p.1 - 1.0).abs() - 0.2).abs() > 1e-9));
        let truth: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<f64> = pairs.iter().map(|p| p.0 * p.1).collect();
        let r = clinical_metrics(&pred, &truth).unwrap();
        let n = truth.len() as f64;
        let mae = pred.iter().zip(&truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
        prop_assert!((r.mae - mae).abs() < 1e-9);
        let inside = pred.iter().zip(&truth).filter(|(p, t)| (*p / *t - 1.0).abs() <= 0.2).count() as f64 / n;
        prop_assert!((r.in_window - inside).abs() < 1e-9);
    }
}
