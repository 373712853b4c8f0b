//! Negotiate, aggregate, fit and score one consortium.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::config::{AttributeValue, ConsortiumConfig};
use super::report::{
    AgreementSummary, Coefficient, LocalReport, MessageCounts, ScenarioReport, SessionMessages,
    SessionReport, Timings, REPORT_VERSION,
};
use super::sweep::dp_sweep;
use super::{phase, HarnessError};
use crate::aggregation::{
    audit_transcript, local_stats, ring_from, run_ring_session, AggregationError, LocalStats,
    Phase, RingInput, SessionOptions, SessionOutput,
};
use crate::cpl::{parse_policy, validate, Severity};
use crate::crypto::KeyPair;
use crate::data::synth::{synth_members, SynthProfile, Truth};
use crate::data::{load_dataset, Dataset, NormalizationMap, Schema};
use crate::policy::{
    negotiate_consortium, Bound, MemberContext, NegotiationSettings, Round, Scalar, Status,
};
use crate::regression::{clinical_metrics, DoseModel};
use crate::seeds;

/// Ridge used when a member's own O is singular.
pub const RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    NegotiateOnly,
    Full,
    FullWithDp,
}

pub struct Consortium {
    pub config: ConsortiumConfig,
    pub schema: Arc<Schema>,
    pub truth: Truth,
    pub norm: NormalizationMap,
    /// In config order.
    pub members: Vec<MemberContext>,
    pub validation: Dataset,
}

impl Consortium {
    pub fn build(cfg: &ConsortiumConfig) -> Result<Self, HarnessError> {
        let schema = Arc::new(cfg.schema());
        let truth = cfg.truth_for(&schema);
        let norm = NormalizationMap::from_schema(&schema).map_err(phase("data"))?;

        let profiles: Vec<SynthProfile> = cfg
            .members
            .iter()
            .filter_map(|m| {
                let s = m.synth.as_ref()?;
                let mut p = SynthProfile::new(&m.id, s.rows, truth.clone());
                if let Some(mix) = s.race_mix {
                    p.race_mix = mix;
                }
                if let Some(r) = s.age_range {
                    p.age_range = r;
                }
                if let Some(mix) = s.genotype_mix {
                    p.genotype_mix = mix;
                }
                if let Some(sigma) = s.noise_sigma {
                    p.noise_sigma = sigma;
                }
                Some(p)
            })
            .collect();
        let mut synth = synth_members(cfg.seed, &schema, &profiles)
            .map_err(phase("data"))?
            .into_iter();

        let mut members = Vec::with_capacity(cfg.members.len());
        for m in &cfg.members {
            let data = match &m.data {
                Some(p) => {
                    let path = cfg.resolve(p);
                    let file = std::fs::File::open(&path).map_err(|e| HarnessError::Io {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })?;
                    load_dataset(file, schema.clone(), &m.id).map_err(|e| HarnessError::Io {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })?
                }
                None => synth
                    .next()
                    .expect("one synthetic dataset per synth member"),
            };
            let path = cfg.resolve(&m.policy);
            let policy_err = |message: String| HarnessError::Policy {
                member: m.id.clone(),
                path: path.display().to_string(),
                message,
            };
            let text = std::fs::read_to_string(&path).map_err(|e| policy_err(e.to_string()))?;
            let ast = parse_policy(&text).map_err(|e| policy_err(e.to_string()))?;
            if let Some(d) = validate(&ast)
                .into_iter()
                .find(|d| d.severity == Severity::Error)
            {
                return Err(policy_err(format!(
                    "{}:{}: {} [{}]",
                    d.span.line, d.span.col, d.message, d.code
                )));
            }
            let mut ctx = MemberContext::new(&m.id, Arc::new(data), Arc::new(ast));
            for (k, v) in &m.attributes {
                let scalar = match v {
                    AttributeValue::Num(x) => Scalar::Num(*x),
                    AttributeValue::Text(s) => Scalar::Text(s.clone()),
                };
                ctx.attributes.insert(k.clone(), Bound::One(scalar));
            }
            for a in &m.alliances {
                ctx = ctx.with_alliance(a);
            }
            members.push(ctx);
        }

        let mut vp = SynthProfile::new("validation", cfg.validation.rows, truth.clone());
        vp.race_mix = cfg.validation.race_mix;
        vp.noise_sigma = cfg.validation.noise_sigma;
        let validation = synth_members(seeds::derive_u64(cfg.seed, "validation"), &schema, &[vp])
            .map_err(phase("data"))?
            .remove(0);

        Ok(Consortium {
            config: cfg.clone(),
            schema,
            truth,
            norm,
            members,
            validation,
        })
    }

    pub fn member(&self, id: &str) -> Option<&MemberContext> {
        self.members.iter().find(|m| m.id == id)
    }

    pub fn negotiation_settings(&self) -> NegotiationSettings {
        NegotiationSettings {
            dd: self.config.dd.settings(),
            seed: self.config.seed,
        }
    }

    pub fn negotiate(&self) -> Result<Round, HarnessError> {
        if self.members.len() < 2 {
            return Ok(Round {
                agreements: Vec::new(),
                log: Default::default(),
                dd_transcript: Vec::new(),
                dd_time: Duration::ZERO,
            });
        }
        negotiate_consortium(&self.members, &self.negotiation_settings())
            .map_err(phase("negotiation"))
    }

    /// Statistics of a member's whole dataset.
    pub fn own_stats(&self, id: &str) -> Result<LocalStats, HarnessError> {
        let m = self.member(id).ok_or_else(|| HarnessError::Phase {
            phase: "data",
            message: format!("no member `{id}`"),
        })?;
        LocalStats::from_dataset(&m.dataset, Some(&self.norm)).map_err(phase("statistics"))
    }

    pub fn fit(&self, stats: &LocalStats) -> Result<DoseModel, HarnessError> {
        DoseModel::fit_or_ridge(&self.schema, &self.norm, &stats.o, &stats.v, RIDGE)
            .map_err(phase("model"))
    }

    pub fn mae(&self, model: &DoseModel) -> Result<f64, HarnessError> {
        let pred = model.predict(&self.validation).map_err(phase("metrics"))?;
        Ok(clinical_metrics(&pred, self.validation.target())
            .map_err(phase("metrics"))?
            .mae)
    }
}

pub struct SessionRun {
    pub initiator: String,
    pub inputs: Vec<RingInput>,
    /// Members whose contribution is non-empty, initiator first.
    pub contributors: Vec<String>,
    /// Initiator's data followed by every released set, in ring order.
    pub released: Vec<Dataset>,
    pub output: SessionOutput,
}

/// One ring session gathering what `initiator` negotiated. Returns `None`
/// when no owner releases anything to the initiator.
pub fn run_session(
    c: &Consortium,
    round: &Round,
    initiator: &str,
    keys: Option<&KeyPair>,
) -> Result<Option<SessionRun>, HarnessError> {
    let ring = ring_from(&c.config.ring, initiator).ok_or_else(|| HarnessError::Phase {
        phase: "session",
        message: format!("`{initiator}` is not in the ring"),
    })?;
    let own = c.member(initiator).expect("ring holds member ids");
    let m = crate::data::Encoding::for_schema(&c.schema).width();
    let mut inputs = vec![RingInput {
        id: initiator.to_string(),
        stats: c.own_stats(initiator)?,
    }];
    let mut contributors = vec![initiator.to_string()];
    let mut released = vec![(*own.dataset).clone()];
    for id in &ring[1..] {
        let owner = c.member(id).expect("ring holds member ids");
        let stats = match round.agreement(initiator, id) {
            Some(a) if a.status != Status::Empty => {
                match local_stats(&owner.dataset, a, Some(&c.norm)) {
                    Ok(s) => {
                        contributors.push(id.clone());
                        released.push(a.released(&owner.dataset).map_err(phase("session"))?);
                        s
                    }
                    Err(AggregationError::EmptyRelease(_)) => LocalStats::zeros(m),
                    Err(e) => return Err(phase("session")(e)),
                }
            }
            _ => LocalStats::zeros(m),
        };
        inputs.push(RingInput {
            id: id.clone(),
            stats,
        });
    }
    if contributors.len() < 2 {
        return Ok(None);
    }
    let label = format!("session/{initiator}");
    let opts = SessionOptions {
        params: c.config.he.params(),
        session_id: seeds::derive_u64(c.config.seed, &label),
        latency: None,
    };
    let mut rng = seeds::rng(c.config.seed, &label);
    let output = run_ring_session(&inputs, &opts, keys, &mut rng).map_err(phase("session"))?;
    Ok(Some(SessionRun {
        initiator: initiator.to_string(),
        inputs,
        contributors,
        released,
        output,
    }))
}

fn coefficients(model: &DoseModel) -> Vec<Coefficient> {
    model
        .encoding
        .features
        .iter()
        .zip(&model.eta)
        .map(|(f, &value)| Coefficient {
            feature: f.name.clone(),
            value,
        })
        .collect()
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-12))
        .fold(0.0, f64::max)
}

pub fn run_scenario(c: &Consortium, mode: Mode) -> Result<ScenarioReport, HarnessError> {
    let t = Instant::now();
    let round = c.negotiate()?;
    let negotiation_time = t.elapsed();

    let agreements: Vec<AgreementSummary> = round
        .agreements
        .iter()
        .map(AgreementSummary::from)
        .collect();
    let mut report = ScenarioReport {
        report_version: REPORT_VERSION,
        consortium: c.config.name.clone(),
        mode,
        seed: c.config.seed,
        members: c
            .members
            .iter()
            .map(|m| (m.id.clone(), m.dataset.len()))
            .collect(),
        messages: MessageCounts {
            negotiation: round.log.len(),
            negotiation_expected: 2 * round.agreements.len(),
            directed_pairs: round.agreements.len(),
            dd: round.dd_transcript.len(),
            sessions: Vec::new(),
        },
        agreements,
        timings: None,
        sessions: Vec::new(),
        local: Vec::new(),
        dp: None,
    };
    if mode == Mode::NegotiateOnly {
        return Ok(report);
    }

    let mut timings = Timings {
        negotiation_s: negotiation_time.as_secs_f64(),
        dd_s: round.dd_time.as_secs_f64(),
        sessions: Vec::new(),
    };
    let truth_doses = c.validation.target();

    for m in &c.members {
        let model = c.fit(&c.own_stats(&m.id)?)?;
        let pred = model.predict(&c.validation).map_err(phase("metrics"))?;
        report.local.push(LocalReport {
            member: m.id.clone(),
            rows: m.dataset.len(),
            metrics: clinical_metrics(&pred, truth_doses).map_err(phase("metrics"))?,
        });
    }

    let mut dp_source = None;
    for initiator in &c.config.initiators {
        let Some(run) = run_session(c, &round, initiator, None)? else {
            continue;
        };
        let out = &run.output;
        let model = c.fit(&out.pooled)?;
        let pred = model.predict(&c.validation).map_err(phase("metrics"))?;

        let first = &run.released[0];
        let central = first.concat(&run.released[1..]).map_err(phase("oracle"))?;
        let oracle =
            c.fit(&LocalStats::from_dataset(&central, Some(&c.norm)).map_err(phase("oracle"))?)?;
        let oracle_pred = oracle.predict(&c.validation).map_err(phase("oracle"))?;

        let audit = audit_transcript(
            &out.transcript,
            &run.inputs,
            &out.keys.public,
            c.config.he.params().scale(),
        );
        let msgs = SessionMessages {
            initiator: initiator.clone(),
            key_broadcast: out.transcript.count(Phase::KeyBroadcast),
            ring: out.transcript.count(Phase::Ring),
            total: out.transcript.len(),
        };
        timings.sessions.push((initiator.clone(), out.timings));
        report.messages.sessions.push(msgs);
        report.sessions.push(SessionReport {
            initiator: initiator.clone(),
            ring: out.ring.clone(),
            contributors: run.contributors.clone(),
            pooled_rows: out.pooled.n,
            metrics: clinical_metrics(&pred, truth_doses).map_err(phase("metrics"))?,
            oracle_max_rel_diff: max_rel_diff(&pred, &oracle_pred),
            transcript_clean: audit.clean(),
            coefficients: coefficients(&model),
        });
        if dp_source.is_none() {
            dp_source = Some((initiator.clone(), out.pooled.clone()));
        }
    }
    report.timings = Some(timings);

    if mode == Mode::FullWithDp {
        let (initiator, pooled) = dp_source.ok_or_else(|| HarnessError::Phase {
            phase: "dp",
            message: "no initiator ran a ring session, nothing to perturb".into(),
        })?;
        let local = c.own_stats(&initiator)?;
        let dp = &c.config.dp;
        let table = dp_sweep(
            c,
            &initiator,
            &pooled,
            &local,
            &dp.epsilons,
            dp.repetitions,
            dp.bootstrap_resamples,
            c.config.seed,
        )?;
        report.dp = Some(table);
    }
    Ok(report)
}

/// Negotiates, runs the first initiator's session that has contributors,
/// and sweeps the configured budgets over its pooled statistics.
pub fn run_dp_only(c: &Consortium) -> Result<super::sweep::DpTable, HarnessError> {
    let round = c.negotiate()?;
    for initiator in &c.config.initiators {
        if let Some(run) = run_session(c, &round, initiator, None)? {
            let dp = &c.config.dp;
            return dp_sweep(
                c,
                initiator,
                &run.output.pooled,
                &c.own_stats(initiator)?,
                &dp.epsilons,
                dp.repetitions,
                dp.bootstrap_resamples,
                c.config.seed,
            );
        }
    }
    Err(HarnessError::Phase {
        phase: "dp",
        message: "no initiator ran a ring session, nothing to perturb".into(),
    })
}
