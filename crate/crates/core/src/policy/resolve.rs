//! Top-down clause resolution with sub-clause expansion.

use serde::Serialize;

use super::env::Env;
use super::PolicyError;
use crate::cpl::{serialize, Clause, ClauseKind, Conditional, Filter, Selections};

/// Outcome of one data-dependent conditional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DdVerdict {
    pub holds: bool,
    pub statistic: Option<f64>,
}

/// One evaluated conditional, in evaluation order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub clause: String,
    pub conditional: String,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
}

/// The clause a policy resolved to, with its selections expanded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolution {
    /// Index into `PolicyAst::clauses`.
    pub clause_index: usize,
    pub clause_text: String,
    /// Indices into `PolicyAst::sub_clauses`, outermost first.
    pub branches: Vec<usize>,
    /// Conditionals that held, clause first, then each branch.
    pub conditionals: Vec<Conditional>,
    /// Conjunction of the expanded filters, with `$var` values substituted.
    pub selections: Vec<Filter>,
    /// Data-dependent conditionals left unevaluated by [`resolve_clause`].
    pub deferred: Vec<Conditional>,
}

/// Resolves the first clause of `kind` in the evaluator's policy that applies
/// to the counterparty and whose comparison conditionals hold. Data-dependent
/// conditionals are assumed to hold and returned in `deferred`.
pub fn resolve_clause(kind: ClauseKind, env: &Env) -> Result<Option<Resolution>, PolicyError> {
    let mut deferred = Vec::new();
    let mut trace = Vec::new();
    let mut hook = |c: &Conditional| {
        deferred.push(c.clone());
        Ok(DdVerdict {
            holds: true,
            statistic: None,
        })
    };
    let res = resolve_with(kind, env, &mut hook, &mut trace)?;
    Ok(res.map(|mut r| {
        r.deferred = deferred;
        r
    }))
}

/// Like [`resolve_clause`], but data-dependent conditionals are evaluated in
/// place by `dd`; one that fails sends resolution on to the next candidate.
pub fn resolve_with(
    kind: ClauseKind,
    env: &Env,
    dd: &mut dyn FnMut(&Conditional) -> Result<DdVerdict, PolicyError>,
    trace: &mut Vec<TraceEntry>,
) -> Result<Option<Resolution>, PolicyError> {
    let policy = &env.evaluator.policy;
    let target = &env.counterparty.id;
    for (index, clause) in policy.clauses_of(kind) {
        if !clause.applies_to(target) {
            continue;
        }
        let mut r = Resolver {
            env,
            dd: &mut *dd,
            trace: &mut *trace,
            conditionals: Vec::new(),
            branches: Vec::new(),
            visiting: Vec::new(),
        };
        if !r.conditionals_hold(clause)? {
            continue;
        }
        r.conditionals.extend(clause.conditionals.iter().cloned());
        if let Some(filters) = r.expand(&clause.selections)? {
            let selections = env.substitute(&filters)?;
            return Ok(Some(Resolution {
                clause_index: index,
                clause_text: serialize::clause(clause),
                branches: r.branches,
                conditionals: r.conditionals,
                selections,
                deferred: Vec::new(),
            }));
        }
    }
    Ok(None)
}

struct Resolver<'e, 'a, 't> {
    env: &'e Env<'a>,
    dd: &'e mut dyn FnMut(&Conditional) -> Result<DdVerdict, PolicyError>,
    trace: &'t mut Vec<TraceEntry>,
    conditionals: Vec<Conditional>,
    branches: Vec<usize>,
    visiting: Vec<String>,
}

impl Resolver<'_, '_, '_> {
    /// Comparison conditionals first, then data-dependent ones, stopping at
    /// the first that fails.
    fn conditionals_hold(&mut self, c: &Clause) -> Result<bool, PolicyError> {
        let text = serialize::clause(c);
        let (plain, dd): (Vec<_>, Vec<_>) = c
            .conditionals
            .iter()
            .partition(|c| matches!(c, Conditional::Comparison { .. }));
        for cond in plain.into_iter().chain(dd) {
            let verdict = match cond {
                Conditional::Comparison { .. } => DdVerdict {
                    holds: self.env.eval_conditional(cond)?,
                    statistic: None,
                },
                Conditional::Evaluate { .. } => (self.dd)(cond)?,
            };
            self.trace.push(TraceEntry {
                clause: text.clone(),
                conditional: serialize::conditional(cond),
                holds: verdict.holds,
                statistic: verdict.statistic,
            });
            if !verdict.holds {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn expand(&mut self, sel: &Selections) -> Result<Option<Vec<Filter>>, PolicyError> {
        let tag = match sel {
            Selections::Filters(f) => return Ok(Some(f.clone())),
            Selections::TagRef(tag) => tag,
        };
        if self.visiting.contains(tag) {
            let mut cycle = self.visiting.clone();
            cycle.push(tag.clone());
            return Err(PolicyError::Cycle(cycle));
        }
        let policy = self.env.evaluator.policy.clone();
        let branches: Vec<(usize, &Clause)> = policy
            .sub_clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.tag() == Some(tag.as_str()))
            .collect();
        if branches.is_empty() {
            return Err(PolicyError::UnknownTag(tag.clone()));
        }
        self.visiting.push(tag.clone());
        for (i, branch) in branches {
            let (cond_mark, branch_mark) = (self.conditionals.len(), self.branches.len());
            if self.conditionals_hold(branch)? {
                self.conditionals
                    .extend(branch.conditionals.iter().cloned());
                self.branches.push(i);
                if let Some(f) = self.expand(&branch.selections)? {
                    self.visiting.pop();
                    return Ok(Some(f));
                }
            }
            self.conditionals.truncate(cond_mark);
            self.branches.truncate(branch_mark);
        }
        self.visiting.pop();
        Ok(None)
    }
}
