//! Which grammar productions a document exercises.

use std::collections::BTreeSet;

use serde::Serialize;

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Production {
    MultipleStatements,
    ShareClause,
    AcquireClause,
    AttributeValue,
    AttributeValueList,
    SubClause,
    MembersList,
    MembersMultiple,
    MembersEmpty,
    ConditionalVarEquals,
    ConditionalEvaluate,
    ConditionalsMultiple,
    ConditionalsEmpty,
    DataRef,
    AlgIntersectionSize,
    AlgJaccardIndex,
    AlgPearsonCorrelation,
    AlgCosineSimilarity,
    SelectionsFilters,
    SelectionsTag,
    FiltersMultiple,
    FilterEmpty,
    OpEq,
    OpLt,
    OpGt,
    OpNe,
    OpIn,
    ValueString,
    ValueList,
    Var,
    // Extensions beyond the minimal grammar.
    ConditionalMemberExpr,
    ConditionalDataSize,
    ValueNumber,
    ValueWord,
}

impl Production {
    pub const ALL: [Production; 34] = [
        Production::MultipleStatements,
        Production::ShareClause,
        Production::AcquireClause,
        Production::AttributeValue,
        Production::AttributeValueList,
        Production::SubClause,
        Production::MembersList,
        Production::MembersMultiple,
        Production::MembersEmpty,
        Production::ConditionalVarEquals,
        Production::ConditionalEvaluate,
        Production::ConditionalsMultiple,
        Production::ConditionalsEmpty,
        Production::DataRef,
        Production::AlgIntersectionSize,
        Production::AlgJaccardIndex,
        Production::AlgPearsonCorrelation,
        Production::AlgCosineSimilarity,
        Production::SelectionsFilters,
        Production::SelectionsTag,
        Production::FiltersMultiple,
        Production::FilterEmpty,
        Production::OpEq,
        Production::OpLt,
        Production::OpGt,
        Production::OpNe,
        Production::OpIn,
        Production::ValueString,
        Production::ValueList,
        Production::Var,
        Production::ConditionalMemberExpr,
        Production::ConditionalDataSize,
        Production::ValueNumber,
        Production::ValueWord,
    ];
}

pub fn productions_used(ast: &PolicyAst) -> BTreeSet<Production> {
    let mut out = BTreeSet::new();
    if ast.statement_count() > 1 {
        out.insert(Production::MultipleStatements);
    }
    for a in &ast.attributes {
        match &a.value {
            AttrValue::Single(v) => {
                out.insert(Production::AttributeValue);
                value(v, &mut out);
            }
            AttrValue::List(vs) => {
                out.insert(Production::AttributeValueList);
                vs.iter().for_each(|v| value(v, &mut out));
            }
        }
    }
    for c in ast.clauses.iter().chain(&ast.sub_clauses) {
        clause(c, &mut out);
    }
    out
}

fn clause(c: &Clause, out: &mut BTreeSet<Production>) {
    match c.kind {
        ClauseKind::Share => out.insert(Production::ShareClause),
        ClauseKind::Acquire => out.insert(Production::AcquireClause),
        ClauseKind::Sub(_) => out.insert(Production::SubClause),
    };
    if !matches!(c.kind, ClauseKind::Sub(_)) {
        out.insert(match c.members.len() {
            0 => Production::MembersEmpty,
            1 => Production::MembersList,
            _ => Production::MembersMultiple,
        });
        if c.members.len() > 1 {
            out.insert(Production::MembersList);
        }
    }
    match c.conditionals.len() {
        0 => {
            out.insert(Production::ConditionalsEmpty);
        }
        1 => {}
        _ => {
            out.insert(Production::ConditionalsMultiple);
        }
    }
    for cond in &c.conditionals {
        match cond {
            Conditional::Comparison { lhs, op, value: v } => {
                match lhs {
                    Expr::Var(_) => {
                        out.insert(Production::Var);
                        if *op == Operation::Eq {
                            out.insert(Production::ConditionalVarEquals);
                        }
                    }
                    Expr::Member(_) => {
                        out.insert(Production::ConditionalMemberExpr);
                    }
                    Expr::DataSize => {
                        out.insert(Production::ConditionalDataSize);
                    }
                }
                operation(*op, out);
                value(v, out);
            }
            Conditional::Evaluate { algorithm, .. } => {
                out.insert(Production::ConditionalEvaluate);
                out.insert(Production::DataRef);
                out.insert(match algorithm {
                    Algorithm::IntersectionSize => Production::AlgIntersectionSize,
                    Algorithm::JaccardIndex => Production::AlgJaccardIndex,
                    Algorithm::PearsonCorrelation => Production::AlgPearsonCorrelation,
                    Algorithm::CosineSimilarity => Production::AlgCosineSimilarity,
                });
            }
        }
    }
    match &c.selections {
        Selections::TagRef(_) => {
            out.insert(Production::SelectionsTag);
        }
        Selections::Filters(fs) => {
            out.insert(Production::SelectionsFilters);
            if fs.is_empty() {
                out.insert(Production::FilterEmpty);
            }
            if fs.len() > 1 {
                out.insert(Production::FiltersMultiple);
            }
            for f in fs {
                if f.sigil {
                    out.insert(Production::Var);
                }
                operation(f.op, out);
                value(&f.value, out);
            }
        }
    }
}

fn operation(op: Operation, out: &mut BTreeSet<Production>) {
    out.insert(match op {
        Operation::Eq => Production::OpEq,
        Operation::Lt => Production::OpLt,
        Operation::Gt => Production::OpGt,
        Operation::Ne => Production::OpNe,
        Operation::In => Production::OpIn,
    });
}

fn value(v: &Value, out: &mut BTreeSet<Production>) {
    match v {
        Value::Str(_) => out.insert(Production::ValueString),
        Value::Word(_) => out.insert(Production::ValueWord),
        Value::Num(_) => out.insert(Production::ValueNumber),
        Value::Var(_) => out.insert(Production::Var),
        Value::List(items) => {
            items.iter().for_each(|i| value(i, out));
            out.insert(Production::ValueList)
        }
    };
}
