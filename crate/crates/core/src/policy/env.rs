//! Member contexts and the environment conditionals are evaluated in.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::cpl::{AttrValue, Conditional, Expr, Filter, Operation, PolicyAst, Value};
use crate::data::Dataset;

/// A bound value: text or number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Text(String),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Num(n) => write!(f, "{n}"),
            Scalar::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    One(Scalar),
    Many(Vec<Scalar>),
}

impl Bound {
    fn items(&self) -> Vec<&Scalar> {
        match self {
            Bound::One(s) => vec![s],
            Bound::Many(v) => v.iter().collect(),
        }
    }

    fn to_value(&self) -> Value {
        fn one(s: &Scalar) -> Value {
            match s {
                Scalar::Num(n) => Value::Num(*n),
                Scalar::Text(t) => Value::Str(t.clone()),
            }
        }
        match self {
            Bound::One(s) => one(s),
            Bound::Many(v) => Value::List(v.iter().map(one).collect()),
        }
    }
}

/// Everything a member brings to a negotiation round.
#[derive(Debug, Clone)]
pub struct MemberContext {
    pub id: String,
    /// Public attributes such as `country` and `continent`.
    pub attributes: BTreeMap<String, Bound>,
    pub alliances: BTreeSet<String>,
    pub dataset: Arc<Dataset>,
    pub policy: Arc<PolicyAst>,
}

impl MemberContext {
    pub fn new(id: &str, dataset: Arc<Dataset>, policy: Arc<PolicyAst>) -> Self {
        MemberContext {
            id: id.into(),
            attributes: BTreeMap::new(),
            alliances: BTreeSet::new(),
            dataset,
            policy,
        }
    }

    pub fn with_attribute(mut self, name: &str, value: &str) -> Self {
        self.attributes
            .insert(name.into(), Bound::One(Scalar::Text(value.into())));
        self
    }

    pub fn with_alliance(mut self, name: &str) -> Self {
        self.alliances.insert(name.into());
        self
    }
}

/// Alliance name to member ids, derived from the consortium.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Directory {
    pub alliances: BTreeMap<String, Vec<String>>,
}

impl Directory {
    pub fn from_members(members: &[MemberContext]) -> Self {
        let mut alliances: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for m in members {
            for a in &m.alliances {
                alliances.entry(a.clone()).or_default().push(m.id.clone());
            }
        }
        Directory { alliances }
    }
}

/// The view of one member (`evaluator`) judging a request involving
/// `counterparty`.
///
/// `$name` resolves against, in order: the counterparty's attributes (plus
/// `$member` and `$alliances`), the evaluator's policy attributes, and the
/// alliance directory. `size(data)` is the counterparty's row count.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub evaluator: &'a MemberContext,
    pub counterparty: &'a MemberContext,
    pub directory: &'a Directory,
}

impl Env<'_> {
    pub fn lookup(&self, name: &str) -> Result<Bound, PolicyError> {
        let cp = self.counterparty;
        if let Some(b) = cp.attributes.get(name) {
            return Ok(b.clone());
        }
        match name {
            "member" => return Ok(Bound::One(Scalar::Text(cp.id.clone()))),
            "alliances" => {
                return Ok(Bound::Many(
                    cp.alliances
                        .iter()
                        .map(|a| Scalar::Text(a.clone()))
                        .collect(),
                ))
            }
            _ => {}
        }
        if let Some(attr) = self.evaluator.policy.attribute(name) {
            return match &attr.value {
                AttrValue::Single(v) => Ok(Bound::One(literal(v)?)),
                AttrValue::List(vs) => Ok(Bound::Many(
                    vs.iter().map(literal).collect::<Result<_, _>>()?,
                )),
            };
        }
        if let Some(ids) = self.directory.alliances.get(name) {
            return Ok(Bound::Many(
                ids.iter().map(|i| Scalar::Text(i.clone())).collect(),
            ));
        }
        Err(PolicyError::Unbound(name.to_string()))
    }

    fn resolve(&self, v: &Value) -> Result<Bound, PolicyError> {
        match v {
            Value::Var(name) => self.lookup(name),
            Value::List(items) => {
                let mut out = Vec::new();
                for item in items {
                    match self.resolve(item)? {
                        Bound::One(s) => out.push(s),
                        Bound::Many(v) => out.extend(v),
                    }
                }
                Ok(Bound::Many(out))
            }
            other => Ok(Bound::One(literal(other)?)),
        }
    }

    fn expr(&self, e: &Expr) -> Result<Bound, PolicyError> {
        match e {
            Expr::Var(name) => self.lookup(name),
            Expr::Member(id) => Ok(Bound::One(Scalar::Text(id.clone()))),
            Expr::DataSize => Ok(Bound::One(Scalar::Num(
                self.counterparty.dataset.len() as f64
            ))),
        }
    }

    /// Evaluates a comparison conditional. Data-dependent conditionals are
    /// not handled here.
    pub fn eval_conditional(&self, c: &Conditional) -> Result<bool, PolicyError> {
        let Conditional::Comparison { lhs, op, value } = c else {
            return Err(PolicyError::Type(
                "data-dependent conditional needs a counterparty exchange".into(),
            ));
        };
        let left = self.expr(lhs)?;
        let right = self.resolve(value)?;
        compare(&left, *op, &right)
    }

    /// Replaces `$var` filter values with their bindings.
    pub fn substitute(&self, filters: &[Filter]) -> Result<Vec<Filter>, PolicyError> {
        filters
            .iter()
            .map(|f| {
                let value = match &f.value {
                    Value::Var(_) | Value::List(_) => self.resolve(&f.value)?.to_value(),
                    v => v.clone(),
                };
                Ok(Filter { value, ..f.clone() })
            })
            .collect()
    }
}

fn literal(v: &Value) -> Result<Scalar, PolicyError> {
    match v {
        Value::Str(s) | Value::Word(s) => Ok(Scalar::Text(s.clone())),
        Value::Num(n) => Ok(Scalar::Num(*n)),
        Value::Var(name) => Err(PolicyError::Type(format!(
            "attribute value `${name}` cannot be another variable"
        ))),
        Value::List(_) => Err(PolicyError::Type("nested list".into())),
    }
}

fn as_num(s: &Scalar) -> Option<f64> {
    match s {
        Scalar::Num(n) => Some(*n),
        Scalar::Text(t) => t.trim().parse().ok(),
    }
}

fn scalar_eq(a: &Scalar, b: &Scalar) -> Result<bool, PolicyError> {
    match (a, b) {
        (Scalar::Text(x), Scalar::Text(y)) => Ok(x == y),
        _ => match (as_num(a), as_num(b)) {
            (Some(x), Some(y)) => Ok(x == y),
            _ => Err(PolicyError::Type(format!(
                "cannot compare `{a}` with `{b}`"
            ))),
        },
    }
}

fn one<'b>(b: &'b Bound, side: &str) -> Result<&'b Scalar, PolicyError> {
    match b {
        Bound::One(s) => Ok(s),
        Bound::Many(_) => Err(PolicyError::Type(format!(
            "{side} is a list; only `in` accepts lists"
        ))),
    }
}

/// `in` tests membership of every left item in the right-hand list; the
/// other operators need scalars, and `<`/`>` need numbers.
pub fn compare(left: &Bound, op: Operation, right: &Bound) -> Result<bool, PolicyError> {
    match op {
        Operation::In => {
            let rhs = right.items();
            for l in left.items() {
                let mut hit = false;
                for r in &rhs {
                    if scalar_eq(l, r).unwrap_or(false) {
                        hit = true;
                        break;
                    }
                }
                if !hit {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Operation::Eq => scalar_eq(one(left, "left operand")?, one(right, "right operand")?),
        Operation::Ne => Ok(!scalar_eq(
            one(left, "left operand")?,
            one(right, "right operand")?,
        )?),
        Operation::Lt | Operation::Gt => {
            let (l, r) = (one(left, "left operand")?, one(right, "right operand")?);
            let (Some(x), Some(y)) = (as_num(l), as_num(r)) else {
                return Err(PolicyError::Type(format!(
                    "`{op}` needs numbers, got `{l}` and `{r}`"
                )));
            };
            Ok(if op == Operation::Lt { x < y } else { x > y })
        }
    }
}
