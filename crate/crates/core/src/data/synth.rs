//! Synthetic patient cohorts with a known linear dose model.
//!
//! Doses follow `y = eta_race . x + noise`, where `x` is the design row built
//! from inputs rescaled by the schema bounds. Rows whose dose falls outside the
//! declared dose range are redrawn.

use std::sync::Arc;

use nalgebra::DVector;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::dataset::{Cell, Dataset};
use super::design::Encoding;
use super::normalize::NormalizationMap;
use super::schema::{ColumnType, Schema, CYP2C9_LEVELS};
use super::DataError;
use crate::{par, seeds};

/// Coefficients of the generating model, one vector per race level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub per_race: [Vec<f64>; 3],
}

impl Truth {
    pub fn homogeneous(eta: Vec<f64>) -> Self {
        Truth {
            per_race: [eta.clone(), eta.clone(), eta],
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.per_race[0] == self.per_race[1] && self.per_race[1] == self.per_race[2]
    }

    /// Same dose model for everyone.
    pub fn default_homogeneous(schema: &Schema) -> Self {
        Truth::homogeneous(base_coefficients(schema))
    }

    /// Race-specific intercepts and genotype/age/weight effects, so that a
    /// single pooled linear model cannot fit every population exactly.
    pub fn default_race_dependent(schema: &Schema) -> Self {
        let enc = Encoding::for_schema(schema);
        let base = base_coefficients(schema);
        let mut per_race = [base.clone(), base.clone(), base];
        for (r, eta) in per_race.iter_mut().enumerate() {
            for (j, f) in enc.features.iter().enumerate() {
                let name = f.name.as_str();
                let (shift, scale) = match (r, name) {
                    (_, n) if n.starts_with("race=") => (Some(0.0), 1.0),
                    (0, "intercept") => (Some(3.6), 1.0),
                    (1, "intercept") => (Some(7.0), 1.0),
                    (2, "intercept") => (Some(5.2), 1.0),
                    (0, n) if n.starts_with("VKORC1=") || n.starts_with("genotype=") => (None, 1.8),
                    (1, n) if n.starts_with("VKORC1=") || n.starts_with("genotype=") => (None, 0.4),
                    (0, "age") => (None, 1.7),
                    (1, "weight") => (None, 2.0),
                    (1, "age") => (None, 0.3),
                    _ => (None, 1.0),
                };
                eta[j] = shift.unwrap_or(eta[j] * scale);
            }
        }
        Truth { per_race }
    }

    fn for_race(&self, level: Option<u16>) -> &[f64] {
        &self.per_race[level.map_or(0, |l| l as usize).min(2)]
    }
}

fn base_coefficients(schema: &Schema) -> Vec<f64> {
    let enc = Encoding::for_schema(schema);
    let w = enc.width();
    enc.features
        .iter()
        .enumerate()
        .map(|(j, f)| match f.name.as_str() {
            "intercept" => 5.5,
            "age" => -0.9,
            "height" => 0.4,
            "weight" => 0.9,
            "VKORC1=A/G" | "genotype=A/G" => 1.3,
            "VKORC1=G/G" | "genotype=G/G" => 2.6,
            "CYP2C9=*1/*2" => -0.6,
            "CYP2C9=*1/*3" => -1.1,
            "CYP2C9=*2/*2" => -1.3,
            "CYP2C9=*2/*3" => -1.6,
            "CYP2C9=*3/*3" => -2.0,
            "race=Black" => 0.9,
            "race=White" => 0.5,
            "enzyme_inducer" => 1.0,
            "amiodarone" => -0.9,
            _ => {
                // Generic inputs: alternating signs, shrinking with width so
                // the dose stays inside its range.
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * (1.0 + (j % 3) as f64 * 0.5) * 3.0 / (w as f64).sqrt()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub member_id: String,
    pub n: usize,
    /// Proportions of Asian, Black, White.
    pub race_mix: [f64; 3],
    pub age_range: (f64, f64),
    /// Proportions of A/A, A/G, G/G.
    pub genotype_mix: [f64; 3],
    pub noise_sigma: f64,
    pub truth: Truth,
}

impl SynthProfile {
    pub fn new(member_id: &str, n: usize, truth: Truth) -> Self {
        SynthProfile {
            member_id: member_id.to_string(),
            n,
            race_mix: [1.0 / 3.0; 3],
            age_range: (18.0, 90.0),
            genotype_mix: [0.3, 0.45, 0.25],
            noise_sigma: 0.5,
            truth,
        }
    }

    fn validate(&self, width: usize) -> Result<(), DataError> {
        let bad = |m: String| {
            Err(DataError::InvalidProfile(format!(
                "{}: {m}",
                self.member_id
            )))
        };
        for (name, mix) in [
            ("race mix", self.race_mix),
            ("genotype mix", self.genotype_mix),
        ] {
            if mix.iter().any(|&p| !(0.0..=1.0).contains(&p))
                || (mix.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return bad(format!("{name} must be probabilities summing to 1"));
            }
        }
        if !(self.age_range.0 < self.age_range.1) {
            return bad("age range is empty".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be non-negative".into());
        }
        if self.truth.per_race.iter().any(|e| e.len() != width) {
            return bad(format!("coefficient vectors must have {width} entries"));
        }
        Ok(())
    }
}

const MAX_REDRAWS: usize = 10_000;

fn boolean_rate(name: &str) -> f64 {
    match name {
        "enzyme_inducer" => 0.05,
        "amiodarone" => 0.1,
        _ => 0.2,
    }
}

fn draw_row(
    schema: &Schema,
    profile: &SynthProfile,
    enc: &Encoding,
    norm: &NormalizationMap,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<Cell>, DataError> {
    let race_dist = WeightedIndex::new(profile.race_mix)
        .map_err(|e| DataError::InvalidProfile(e.to_string()))?;
    let geno_dist = WeightedIndex::new(profile.genotype_mix)
        .map_err(|e| DataError::InvalidProfile(e.to_string()))?;
    let cyp_dist = WeightedIndex::new([0.65, 0.15, 0.1, 0.03, 0.04, 0.03]).expect("static weights");
    let noise = Normal::new(0.0, profile.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| DataError::InvalidProfile(e.to_string()))?;
    let target = schema.target_index();
    let (dmin, dmax) = (
        schema.columns[target].min.unwrap_or(f64::MIN_POSITIVE),
        schema.columns[target].max,
    );

    for _ in 0..MAX_REDRAWS {
        let mut row = Vec::with_capacity(schema.columns.len());
        let mut race = None;
        for (i, c) in schema.columns.iter().enumerate() {
            if i == target {
                row.push(Cell::Num(0.0));
                continue;
            }
            let cell = match &c.ty {
                ColumnType::Integer | ColumnType::Real => {
                    let (lo, hi) = match (c.min, c.max) {
                        (Some(lo), Some(hi)) => (lo, hi),
                        _ => (0.0, 1.0),
                    };
                    let v = if c.name == "age" {
                        rng.random_range(profile.age_range.0.max(lo)..=profile.age_range.1.min(hi))
                    } else {
                        let mid = 0.5 * (lo + hi);
                        let sd = (hi - lo) / 6.0;
                        (mid + sd * rng.sample::<f64, _>(rand_distr::StandardNormal)).clamp(lo, hi)
                    };
                    Cell::Num(if c.ty == ColumnType::Integer {
                        v.round()
                    } else {
                        v
                    })
                }
                ColumnType::Categorical(levels) => {
                    let l = match c.name.as_str() {
                        "race" if levels.len() == 3 => {
                            let l = race_dist.sample(rng) as u16;
                            race = Some(l);
                            l
                        }
                        "VKORC1" | "genotype" if levels.len() == 3 => geno_dist.sample(rng) as u16,
                        "CYP2C9" if levels.len() == CYP2C9_LEVELS.len() => {
                            cyp_dist.sample(rng) as u16
                        }
                        _ => rng.random_range(0..levels.len()) as u16,
                    };
                    Cell::Level(l)
                }
                ColumnType::Boolean => Cell::Bool(rng.random_bool(boolean_rate(&c.name))),
            };
            row.push(cell);
        }
        let x = design_row(schema, enc, norm, &row)?;
        let eta = DVector::from_column_slice(profile.truth.for_race(race));
        let eps = if profile.noise_sigma > 0.0 {
            noise.sample(rng)
        } else {
            0.0
        };
        let y = eta.dot(&x) + eps;
        if y >= dmin && dmax.is_none_or(|m| y <= m) && y > 0.0 {
            row[target] = Cell::Num(y);
            return Ok(row);
        }
    }
    Err(DataError::InvalidProfile(format!(
        "{}: could not draw a dose inside the target range",
        profile.member_id
    )))
}

/// Design row of `row` after rescaling numeric inputs by the schema bounds.
fn design_row(
    schema: &Schema,
    enc: &Encoding,
    norm: &NormalizationMap,
    row: &[Cell],
) -> Result<DVector<f64>, DataError> {
    let scaled: Vec<Cell> = row
        .iter()
        .zip(&schema.columns)
        .map(|(cell, col)| match (cell, norm.range(&col.name)) {
            (Cell::Num(v), Some(r)) => Cell::Num(r.normalize(*v)),
            (c, _) => *c,
        })
        .collect();
    enc.encode_row(&scaled)
}

/// Generates one dataset per profile. Each member draws from its own stream
/// derived from `seed` and the member id, so results do not depend on the
/// order or number of other members.
pub fn synth_members(
    seed: u64,
    schema: &Arc<Schema>,
    profiles: &[SynthProfile],
) -> Result<Vec<Dataset>, DataError> {
    let enc = Encoding::for_schema(schema);
    let norm = NormalizationMap::from_schema(schema)?;
    for p in profiles {
        p.validate(enc.width())?;
    }
    par::map(profiles, |p| {
        let mut rng = seeds::rng(seed, &format!("synth/{}", p.member_id));
        let mut ds = Dataset::new(schema.clone(), &p.member_id);
        for _ in 0..p.n {
            let row = draw_row(schema, p, &enc, &norm, &mut rng)?;
            ds.push_row(&row)?;
        }
        Ok(ds)
    })
    .into_iter()
    .collect()
}

/// Consortium over `Schema::numeric(features)` with one member per entry of
/// `sizes`, named `P1`, `P2`, ...
pub fn synth_numeric(
    seed: u64,
    sizes: &[usize],
    features: usize,
    noise_sigma: f64,
) -> Result<(Arc<Schema>, Vec<Dataset>, Truth), DataError> {
    let schema = Arc::new(Schema::numeric(features));
    let truth = Truth::default_homogeneous(&schema);
    let profiles: Vec<SynthProfile> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| SynthProfile {
            noise_sigma,
            ..SynthProfile::new(&format!("P{}", i + 1), n, truth.clone())
        })
        .collect();
    let data = synth_members(seed, &schema, &profiles)?;
    Ok((schema, data, truth))
}
