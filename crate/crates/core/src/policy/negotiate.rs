//! Pairwise and consortium-wide negotiation.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};

use super::env::{Directory, Env, MemberContext};
use super::resolve::{resolve_with, DdVerdict, Resolution, TraceEntry};
use super::PolicyError;
use crate::cpl::{serialize, AttrValue, ClauseKind, Conditional, Filter, PolicyAst, Value};
use crate::data::{apply_selections, check_shared_schema, selection_mask, Dataset};
use crate::dd::{evaluate_dd, Comparator, DataRef, DdError, DdMessage, DdSettings};
use crate::{par, seeds};

/// Policy attribute that flips the data-dependent comparator.
pub const COMPARATOR_ATTRIBUTE: &str = "dd_comparator";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    Full,
    Partial,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Requester,
    Owner,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideEntry {
    pub side: Side,
    #[serde(flatten)]
    pub entry: TraceEntry,
}

/// Which clauses produced an agreement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub owner_clause: usize,
    pub owner_branches: Vec<usize>,
    pub requester_clause: usize,
    pub requester_branches: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub owner: String,
    pub requester: String,
    pub status: Status,
    /// Owner's matched conditionals followed by the requester's.
    #[serde(serialize_with = "conditionals_text")]
    pub conditionals: Vec<Conditional>,
    /// Owner's selections followed by the requester's; a conjunction.
    #[serde(serialize_with = "filters_text")]
    pub selections: Vec<Filter>,
    pub provenance: Option<Provenance>,
    pub released_rows: usize,
    pub requested_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub trace: Vec<SideEntry>,
}

fn conditionals_text<S: Serializer>(v: &[Conditional], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(serialize::conditional))
}

fn filters_text<S: Serializer>(v: &[Filter], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(serialize::filter))
}

impl Agreement {
    fn empty(requester: &str, owner: &str, reason: String, trace: Vec<SideEntry>) -> Self {
        Agreement {
            owner: owner.into(),
            requester: requester.into(),
            status: Status::Empty,
            conditionals: Vec::new(),
            selections: Vec::new(),
            provenance: None,
            released_rows: 0,
            requested_rows: 0,
            reason: Some(reason),
            trace,
        }
    }

    /// Rows of the owner's dataset released under this agreement.
    pub fn released(&self, owner_data: &Dataset) -> Result<Dataset, PolicyError> {
        if self.status == Status::Empty {
            return Ok(owner_data.take(&[]));
        }
        Ok(apply_selections(owner_data, &self.selections)?)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NegotiationSettings {
    pub dd: DdSettings,
    /// Master seed for the data-dependent exchanges.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOutcome {
    pub agreement: Agreement,
    pub dd_messages: Vec<DdMessage>,
    /// Wall time spent in data-dependent exchanges.
    #[serde(skip)]
    pub dd_time: Duration,
}

/// Comparator declared by `dd_comparator := <"above">`, defaulting to below.
pub fn comparator_for(policy: &PolicyAst) -> Result<Comparator, PolicyError> {
    let Some(attr) = policy.attribute(COMPARATOR_ATTRIBUTE) else {
        return Ok(Comparator::default());
    };
    let text = match &attr.value {
        AttrValue::Single(Value::Str(s) | Value::Word(s)) => s.as_str(),
        AttrValue::List(v) if v.len() == 1 => match &v[0] {
            Value::Str(s) | Value::Word(s) => s.as_str(),
            _ => "",
        },
        _ => "",
    };
    Comparator::from_name(text).ok_or_else(|| {
        PolicyError::Type(format!(
            "`{COMPARATOR_ATTRIBUTE}` must be \"below\" or \"above\""
        ))
    })
}

struct DdRunner<'a> {
    settings: &'a DdSettings,
    rng: rand_chacha::ChaCha20Rng,
    messages: Vec<DdMessage>,
    elapsed: Duration,
}

impl DdRunner<'_> {
    fn run(
        &mut self,
        cond: &Conditional,
        author: &MemberContext,
        other: &MemberContext,
    ) -> Result<DdVerdict, PolicyError> {
        let Conditional::Evaluate {
            data_ref,
            algorithm,
            threshold,
        } = cond
        else {
            return Err(PolicyError::Type(
                "expected a data-dependent conditional".into(),
            ));
        };
        let comparator = comparator_for(&author.policy)?;
        let extract = |m: &MemberContext| {
            DataRef::from_dataset(&m.dataset, &m.id, data_ref, *algorithm).map_err(|e| match e {
                DdError::Column { message, .. } => PolicyError::ColumnMismatch {
                    column: data_ref.clone(),
                    message,
                },
                e => e.into(),
            })
        };
        let (a, b) = (extract(author)?, extract(other)?);
        let t = Instant::now();
        let out = evaluate_dd(
            *algorithm,
            *threshold,
            comparator,
            &a,
            &b,
            self.settings,
            &mut self.rng,
        );
        self.elapsed += t.elapsed();
        let out = out?;
        self.messages.extend(out.messages);
        Ok(DdVerdict {
            holds: out.decision,
            statistic: out.statistic,
        })
    }
}

fn tag(side: Side, entries: Vec<TraceEntry>) -> impl Iterator<Item = SideEntry> {
    entries
        .into_iter()
        .map(move |entry| SideEntry { side, entry })
}

/// Negotiates what `owner` releases to `requester`.
///
/// The requester's acquire clause for the owner is resolved in the
/// requester's view, then the owner's share clause in the owner's view.
/// Either side failing to match gives an Empty agreement. Data-dependent
/// conditionals run in place, so a failing one falls through to the next
/// clause or branch.
pub fn negotiate_pair(
    requester: &MemberContext,
    owner: &MemberContext,
    directory: &Directory,
    settings: &NegotiationSettings,
) -> Result<PairOutcome, PolicyError> {
    if let Err(diffs) = check_shared_schema(requester.dataset.schema(), owner.dataset.schema()) {
        let text: Vec<String> = diffs.iter().map(ToString::to_string).collect();
        return Err(PolicyError::SchemaMismatch(text.join("; ")));
    }
    let mut runner = DdRunner {
        settings: &settings.dd,
        rng: seeds::rng(settings.seed, &format!("dd/{}/{}", requester.id, owner.id)),
        messages: Vec::new(),
        elapsed: Duration::ZERO,
    };
    let mut trace = Vec::new();

    let req_env = Env {
        evaluator: requester,
        counterparty: owner,
        directory,
    };
    let mut req_trace = Vec::new();
    let acquire = resolve_with(
        ClauseKind::Acquire,
        &req_env,
        &mut |c: &Conditional| runner.run(c, requester, owner),
        &mut req_trace,
    )?;
    trace.extend(tag(Side::Requester, req_trace));
    let Some(acquire) = acquire else {
        let reason = format!("no acquire clause of {} matches {}", requester.id, owner.id);
        let agreement = Agreement::empty(&requester.id, &owner.id, reason, trace);
        return Ok(PairOutcome {
            agreement,
            dd_messages: runner.messages,
            dd_time: runner.elapsed,
        });
    };

    let own_env = Env {
        evaluator: owner,
        counterparty: requester,
        directory,
    };
    let mut own_trace = Vec::new();
    let share = resolve_with(
        ClauseKind::Share,
        &own_env,
        &mut |c: &Conditional| runner.run(c, owner, requester),
        &mut own_trace,
    )?;
    trace.extend(tag(Side::Owner, own_trace));
    let Some(share) = share else {
        let reason = format!("no share clause of {} matches {}", owner.id, requester.id);
        let agreement = Agreement::empty(&requester.id, &owner.id, reason, trace);
        return Ok(PairOutcome {
            agreement,
            dd_messages: runner.messages,
            dd_time: runner.elapsed,
        });
    };

    let agreement = merge(requester, owner, &acquire, share, trace)?;
    Ok(PairOutcome {
        agreement,
        dd_messages: runner.messages,
        dd_time: runner.elapsed,
    })
}

fn merge(
    requester: &MemberContext,
    owner: &MemberContext,
    acquire: &Resolution,
    share: Resolution,
    trace: Vec<SideEntry>,
) -> Result<Agreement, PolicyError> {
    let data = &owner.dataset;
    let requested_mask = selection_mask(data, &acquire.selections)?;
    let mut selections = share.selections;
    selections.extend(acquire.selections.iter().cloned());
    let released_mask = selection_mask(data, &selections)?;
    let requested = requested_mask.iter().filter(|&&b| b).count();
    let released = released_mask.iter().filter(|&&b| b).count();
    let status = match (released, requested) {
        (0, _) => Status::Empty,
        (r, q) if r == q => Status::Full,
        _ => Status::Partial,
    };
    let mut conditionals = share.conditionals;
    conditionals.extend(acquire.conditionals.iter().cloned());
    let reason = (status == Status::Empty).then(|| "merged selections match no rows".to_string());
    Ok(Agreement {
        owner: owner.id.clone(),
        requester: requester.id.clone(),
        status,
        conditionals,
        selections,
        provenance: Some(Provenance {
            owner_clause: share.clause_index,
            owner_branches: share.branches,
            requester_clause: acquire.clause_index,
            requester_branches: acquire.branches.clone(),
        }),
        released_rows: released,
        requested_rows: requested,
        reason,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Request,
    Response,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogMessage {
    pub seq: usize,
    pub from: String,
    pub to: String,
    pub kind: MessageKind,
    pub body: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MessageLog {
    pub messages: Vec<LogMessage>,
}

impl MessageLog {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    fn push(&mut self, from: &str, to: &str, kind: MessageKind, body: String) {
        let seq = self.messages.len();
        self.messages.push(LogMessage {
            seq,
            from: from.into(),
            to: to.into(),
            kind,
            body,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    pub agreements: Vec<Agreement>,
    pub log: MessageLog,
    pub dd_transcript: Vec<DdMessage>,
    /// Summed over pairs.
    #[serde(skip)]
    pub dd_time: Duration,
}

impl Round {
    pub fn agreement(&self, requester: &str, owner: &str) -> Option<&Agreement> {
        self.agreements
            .iter()
            .find(|a| a.requester == requester && a.owner == owner)
    }
}

/// True when some acquire clause of `requester` names `owner` or has an
/// empty member list.
pub fn requests_from(requester: &MemberContext, owner: &MemberContext) -> bool {
    requester
        .policy
        .clauses_of(ClauseKind::Acquire)
        .any(|(_, c)| c.applies_to(&owner.id))
}

/// Negotiates every ordered pair whose requester addresses the owner.
/// Each such pair logs one request and one response. Pair errors become
/// Empty agreements carrying the error as the reason.
pub fn negotiate_consortium(
    members: &[MemberContext],
    settings: &NegotiationSettings,
) -> Result<Round, PolicyError> {
    if members.len() < 2 {
        return Err(PolicyError::Consortium(format!(
            "need at least 2 members, got {}",
            members.len()
        )));
    }
    let mut seen = BTreeSet::new();
    for m in members {
        if !seen.insert(m.id.as_str()) {
            return Err(PolicyError::Consortium(format!(
                "duplicate member id `{}`",
                m.id
            )));
        }
    }
    let directory = Directory::from_members(members);
    let mut pairs = Vec::new();
    for r in members {
        for o in members {
            if r.id != o.id && requests_from(r, o) {
                pairs.push((r, o));
            }
        }
    }
    let outcomes = par::map(&pairs, |&(r, o)| {
        match negotiate_pair(r, o, &directory, settings) {
            Ok(out) => out,
            Err(e) => PairOutcome {
                agreement: Agreement::empty(&r.id, &o.id, e.to_string(), Vec::new()),
                dd_messages: Vec::new(),
                dd_time: Duration::ZERO,
            },
        }
    });
    let mut log = MessageLog::default();
    let mut agreements = Vec::with_capacity(outcomes.len());
    let mut dd_transcript = Vec::new();
    let mut dd_time = Duration::ZERO;
    for (&(r, o), out) in pairs.iter().zip(outcomes) {
        let body: Vec<String> = r
            .policy
            .clauses_of(ClauseKind::Acquire)
            .filter(|(_, c)| c.applies_to(&o.id))
            .map(|(_, c)| serialize::clause(c))
            .collect();
        log.push(&r.id, &o.id, MessageKind::Request, body.join(" "));
        let a = &out.agreement;
        let sel: Vec<String> = a.selections.iter().map(serialize::filter).collect();
        log.push(
            &o.id,
            &r.id,
            MessageKind::Response,
            format!("{:?} [{}]", a.status, sel.join(", ")),
        );
        agreements.push(out.agreement);
        dd_transcript.extend(out.dd_messages);
        dd_time += out.dd_time;
    }
    Ok(Round {
        agreements,
        log,
        dd_transcript,
        dd_time,
    })
}
