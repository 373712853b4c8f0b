//! JSON reports and CSV tables.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::bench::BenchPoint;
use super::scenario::Mode;
use super::sweep::DpTable;
use super::HarnessError;
use crate::aggregation::PhaseTimings;
use crate::cpl::serialize;
use crate::policy::{Agreement, Status};
use crate::regression::ClinicalReport;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementSummary {
    pub requester: String,
    pub owner: String,
    pub status: Status,
    pub conditionals: Vec<String>,
    pub selections: Vec<String>,
    pub released_rows: usize,
    pub requested_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl From<&Agreement> for AgreementSummary {
    fn from(a: &Agreement) -> Self {
        AgreementSummary {
            requester: a.requester.clone(),
            owner: a.owner.clone(),
            status: a.status,
            conditionals: a.conditionals.iter().map(serialize::conditional).collect(),
            selections: a.selections.iter().map(serialize::filter).collect(),
            released_rows: a.released_rows,
            requested_rows: a.requested_rows,
            reason: a.reason.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionMessages {
    pub initiator: String,
    pub key_broadcast: usize,
    pub ring: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MessageCounts {
    pub negotiation: usize,
    /// Two per negotiated directed pair.
    pub negotiation_expected: usize,
    pub directed_pairs: usize,
    pub dd: usize,
    pub sessions: Vec<SessionMessages>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub negotiation_s: f64,
    pub dd_s: f64,
    pub sessions: Vec<(String, PhaseTimings)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub feature: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    pub initiator: String,
    pub ring: Vec<String>,
    pub contributors: Vec<String>,
    pub pooled_rows: u64,
    pub metrics: ClinicalReport,
    /// Largest relative prediction gap to OLS on the concatenated data.
    pub oracle_max_rel_diff: f64,
    pub transcript_clean: bool,
    pub coefficients: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalReport {
    pub member: String,
    pub rows: usize,
    pub metrics: ClinicalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub report_version: u32,
    pub consortium: String,
    pub mode: Mode,
    pub seed: u64,
    /// Member id and row count.
    pub members: Vec<(String, usize)>,
    pub agreements: Vec<AgreementSummary>,
    pub messages: MessageCounts,
    /// Wall-clock figures; absent in negotiate-only reports so that those
    /// stay byte-identical across runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
    pub sessions: Vec<SessionReport>,
    pub local: Vec<LocalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpTable>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))?;
    f.write_all(b"\n").map_err(io_err(path))
}

fn write_rows<R: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = R>,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Serialize)]
struct AgreementRow<'a> {
    requester: &'a str,
    owner: &'a str,
    status: Status,
    selections: String,
    released_rows: usize,
    requested_rows: usize,
}

#[derive(Serialize)]
struct DpRow {
    epsilon: f64,
    pooled_mae: f64,
    pooled_lo: Option<f64>,
    pooled_hi: Option<f64>,
    local_mae: f64,
    local_lo: Option<f64>,
    local_hi: Option<f64>,
    advantage: f64,
    advantage_lo: Option<f64>,
    advantage_hi: Option<f64>,
}

/// Writes `agreements.csv`, plus `dp_sweep.csv` when the report has a sweep.
pub fn write_scenario_csv(report: &ScenarioReport, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_rows(
        &dir.join("agreements.csv"),
        report.agreements.iter().map(|a| AgreementRow {
            requester: &a.requester,
            owner: &a.owner,
            status: a.status,
            selections: a.selections.join(" & "),
            released_rows: a.released_rows,
            requested_rows: a.requested_rows,
        }),
    )?;
    if let Some(dp) = &report.dp {
        write_dp_csv(dp, &dir.join("dp_sweep.csv"))?;
    }
    Ok(())
}

pub fn write_dp_csv(dp: &DpTable, path: &Path) -> Result<(), HarnessError> {
    write_rows(
        path,
        dp.rows.iter().map(|r| DpRow {
            epsilon: r.epsilon,
            pooled_mae: r.pooled.mean,
            pooled_lo: r.pooled.ci.map(|c| c.0),
            pooled_hi: r.pooled.ci.map(|c| c.1),
            local_mae: r.local.mean,
            local_lo: r.local.ci.map(|c| c.0),
            local_hi: r.local.ci.map(|c| c.1),
            advantage: r.advantage.mean,
            advantage_lo: r.advantage.ci.map(|c| c.0),
            advantage_hi: r.advantage.ci.map(|c| c.1),
        }),
    )
}

pub fn write_bench_csv(points: &[BenchPoint], path: &Path) -> Result<(), HarnessError> {
    write_rows(path, points.iter())
}
