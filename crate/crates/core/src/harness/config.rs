//! Consortium configuration files.
//!
//! The format is TOML, versioned by a top-level `version = 1`. Paths are
//! relative to the directory holding the config file.
//!
//! ```toml
//! version = 1
//! name = "walkthrough"
//! seed = 7
//! schema = "walkthrough"        # warfarin | walkthrough | numeric:<k>
//! truth = "homogeneous"         # or race-dependent
//! ring = ["M1", "M2", "M3"]     # optional, defaults to member order
//! initiators = ["M1"]           # optional, defaults to the first in ring
//!
//! [he]
//! key_bits = 1024
//!
//! [dd]
//! mode = "blinded"
//!
//! [dp]
//! epsilons = [0.25, 1, 5, 20, 50, 100]
//! repetitions = 100
//!
//! [validation]
//! rows = 1000
//!
//! [[members]]
//! id = "M1"
//! policy = "m1.cpl"
//! attributes = { country = "US", continent = "North America" }
//! alliances = ["NATO", "EU"]
//! synth = { rows = 300, age_range = [20, 40] }   # or: data = "m1.csv"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::crypto::HEParams;
use crate::data::synth::Truth;
use crate::data::Schema;
use crate::dd::{DdMode, DdSettings};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthKind {
    Homogeneous,
    RaceDependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeConfig {
    #[serde(default = "default_key_bits")]
    pub key_bits: u64,
    #[serde(default = "default_scale_bits")]
    pub scale_bits: u32,
    #[serde(default = "default_n_max")]
    pub n_max: u64,
    #[serde(default = "default_m_max")]
    pub m_max: u64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
}

fn default_key_bits() -> u64 {
    HEParams::default().key_bits
}
fn default_scale_bits() -> u32 {
    HEParams::default().scale_bits
}
fn default_n_max() -> u64 {
    HEParams::default().n_max
}
fn default_m_max() -> u64 {
    HEParams::default().m_max
}
fn default_v_max() -> f64 {
    HEParams::default().v_max
}

impl Default for HeConfig {
    fn default() -> Self {
        let p = HEParams::default();
        HeConfig {
            key_bits: p.key_bits,
            scale_bits: p.scale_bits,
            n_max: p.n_max,
            m_max: p.m_max,
            v_max: p.v_max,
        }
    }
}

impl HeConfig {
    pub fn params(&self) -> HEParams {
        HEParams {
            key_bits: self.key_bits,
            scale_bits: self.scale_bits,
            n_max: self.n_max,
            m_max: self.m_max,
            v_max: self.v_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdConfig {
    #[serde(default)]
    pub mode: DdMode,
    #[serde(default = "default_dd_bits")]
    pub key_bits: u64,
    #[serde(default = "default_scale_bits")]
    pub scale_bits: u32,
    #[serde(default)]
    pub audit: bool,
}

fn default_dd_bits() -> u64 {
    DdSettings::default().key_bits
}

impl Default for DdConfig {
    fn default() -> Self {
        let d = DdSettings::default();
        DdConfig {
            mode: d.mode,
            key_bits: d.key_bits,
            scale_bits: d.scale_bits,
            audit: d.audit,
        }
    }
}

impl DdConfig {
    pub fn settings(&self) -> DdSettings {
        DdSettings {
            mode: self.mode,
            key_bits: self.key_bits,
            scale_bits: self.scale_bits,
            audit: self.audit,
        }
    }
}

pub const DEFAULT_EPSILONS: [f64; 6] = [0.25, 1.0, 5.0, 20.0, 50.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn default_epsilons() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}
fn default_repetitions() -> usize {
    100
}
fn default_resamples() -> usize {
    1000
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            enabled: false,
            epsilons: default_epsilons(),
            repetitions: default_repetitions(),
            bootstrap_resamples: default_resamples(),
        }
    }
}

/// Held-out cohort drawn from the consortium's generating model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default = "default_validation_rows")]
    pub rows: usize,
    #[serde(default = "even_mix")]
    pub race_mix: [f64; 3],
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
}

fn default_validation_rows() -> usize {
    1000
}
fn even_mix() -> [f64; 3] {
    [1.0 / 3.0; 3]
}
fn default_noise() -> f64 {
    0.5
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            rows: default_validation_rows(),
            race_mix: even_mix(),
            noise_sigma: default_noise(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub rows: usize,
    #[serde(default)]
    pub race_mix: Option<[f64; 3]>,
    #[serde(default)]
    pub age_range: Option<(f64, f64)>,
    #[serde(default)]
    pub genotype_mix: Option<[f64; 3]>,
    #[serde(default)]
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    pub id: String,
    pub policy: PathBuf,
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttributeValue>,
    #[serde(default)]
    pub alliances: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsortiumConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub schema: String,
    #[serde(default = "default_truth")]
    pub truth: TruthKind,
    #[serde(default)]
    pub ring: Vec<String>,
    #[serde(default)]
    pub initiators: Vec<String>,
    #[serde(default)]
    pub he: HeConfig,
    #[serde(default)]
    pub dd: DdConfig,
    #[serde(default)]
    pub dp: DpConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    pub members: Vec<MemberConfig>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_truth() -> TruthKind {
    TruthKind::Homogeneous
}

fn cfg_err(path: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// `warfarin`, `walkthrough` or `numeric:<k>`.
pub fn schema_by_name(name: &str) -> Option<Schema> {
    match name {
        "warfarin" => Some(Schema::warfarin()),
        "walkthrough" => Some(Schema::walkthrough()),
        _ => {
            let k: usize = name.strip_prefix("numeric:")?.parse().ok()?;
            (k > 0).then(|| Schema::numeric(k))
        }
    }
}

impl ConsortiumConfig {
    /// Parses and validates `text`; relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let de =
            toml::Deserializer::parse(text).map_err(|e| cfg_err("<document>", e.to_string()))?;
        let mut cfg: ConsortiumConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            cfg_err(path, e.into_inner().message().trim().to_string())
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.normalize_and_validate(true)?;
        Ok(cfg)
    }

    /// Like [`ConsortiumConfig::from_toml`] but does not require referenced
    /// files to exist.
    pub fn from_toml_unchecked(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut cfg: ConsortiumConfig =
            toml::from_str(text).map_err(|e| cfg_err("<document>", e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.normalize_and_validate(false)?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn schema(&self) -> Schema {
        schema_by_name(&self.schema).expect("validated at load")
    }

    pub fn truth_for(&self, schema: &Schema) -> Truth {
        match self.truth {
            TruthKind::Homogeneous => Truth::default_homogeneous(schema),
            TruthKind::RaceDependent => Truth::default_race_dependent(schema),
        }
    }

    pub fn member_ids(&self) -> Vec<String> {
        self.members.iter().map(|m| m.id.clone()).collect()
    }

    fn normalize_and_validate(&mut self, check_files: bool) -> Result<(), HarnessError> {
        if self.version != CONFIG_VERSION {
            return Err(cfg_err(
                "version",
                format!(
                    "unsupported version {}, expected {CONFIG_VERSION}",
                    self.version
                ),
            ));
        }
        if schema_by_name(&self.schema).is_none() {
            return Err(cfg_err(
                "schema",
                format!("unknown schema `{}`", self.schema),
            ));
        }
        if self.members.is_empty() {
            return Err(cfg_err("members", "at least one member is required"));
        }
        let mut ids = BTreeSet::new();
        for (i, m) in self.members.iter().enumerate() {
            let at = |f: &str| format!("members[{i}].{f}");
            if m.id.trim().is_empty() {
                return Err(cfg_err(at("id"), "empty member id"));
            }
            if !ids.insert(m.id.clone()) {
                return Err(cfg_err(at("id"), format!("duplicate member id `{}`", m.id)));
            }
            match (&m.data, &m.synth) {
                (Some(_), Some(_)) => {
                    return Err(cfg_err(
                        at("data"),
                        "give either `data` or `synth`, not both",
                    ))
                }
                (None, None) => {
                    return Err(cfg_err(at("data"), "one of `data` or `synth` is required"))
                }
                (None, Some(s)) if s.rows == 0 => {
                    return Err(cfg_err(at("synth.rows"), "must be positive"))
                }
                _ => {}
            }
            if check_files {
                let policy = self.resolve(&m.policy);
                if !policy.is_file() {
                    return Err(cfg_err(
                        at("policy"),
                        format!("no such file {}", policy.display()),
                    ));
                }
                if let Some(d) = &m.data {
                    let d = self.resolve(d);
                    if !d.is_file() {
                        return Err(cfg_err(at("data"), format!("no such file {}", d.display())));
                    }
                }
            }
        }
        if self.ring.is_empty() {
            self.ring = self.member_ids();
        } else {
            let ring: BTreeSet<String> = self.ring.iter().cloned().collect();
            if ring.len() != self.ring.len() {
                return Err(cfg_err("ring", "ring order repeats a member"));
            }
            if ring != ids {
                let missing: Vec<&String> = ids.difference(&ring).collect();
                let extra: Vec<&String> = ring.difference(&ids).collect();
                return Err(cfg_err(
                    "ring",
                    format!("ring order must list every member once (missing {missing:?}, unknown {extra:?})"),
                ));
            }
        }
        if self.initiators.is_empty() {
            self.initiators = vec![self.ring[0].clone()];
        }
        for (i, id) in self.initiators.iter().enumerate() {
            if !ids.contains(id) {
                return Err(cfg_err(
                    format!("initiators[{i}]"),
                    format!("unknown member `{id}`"),
                ));
            }
        }
        self.he
            .params()
            .validate()
            .map_err(|e| cfg_err("he", e.to_string()))?;
        for (i, e) in self.dp.epsilons.iter().enumerate() {
            if !(*e > 0.0 && e.is_finite()) {
                return Err(cfg_err(
                    format!("dp.epsilons[{i}]"),
                    format!("privacy budget must be positive, got {e}"),
                ));
            }
        }
        if self.dp.repetitions == 0 {
            return Err(cfg_err("dp.repetitions", "must be at least 1"));
        }
        if self.validation.rows == 0 {
            return Err(cfg_err("validation.rows", "must be positive"));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ConsortiumConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    ConsortiumConfig::from_toml(&text, &base)
}
