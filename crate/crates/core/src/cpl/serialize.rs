//! Canonical text form of a [`PolicyAst`].
//!
//! Attributes come first, then share/acquire clauses, then sub-clauses, one
//! statement per line. The output reparses to a structurally equal AST.

use std::fmt::Write;

use super::ast::*;

pub fn serialize(ast: &PolicyAst) -> String {
    let mut out = String::new();
    for a in &ast.attributes {
        let _ = writeln!(out, "{} := {};", a.name, attr_value(&a.value));
    }
    for c in ast.clauses.iter().chain(&ast.sub_clauses) {
        out.push_str(&clause(c));
        out.push('\n');
    }
    out
}

/// One clause or sub-clause, including the trailing `;`.
pub fn clause(c: &Clause) -> String {
    let conds = c
        .conditionals
        .iter()
        .map(conditional)
        .collect::<Vec<_>>()
        .join(", ");
    let sels = selections(&c.selections);
    match &c.kind {
        ClauseKind::Sub(tag) => format!("{tag} : {conds} :: {sels};"),
        kind => format!(
            "{} : {} : {conds} :: {sels};",
            kind.keyword(),
            c.members.join(", ")
        ),
    }
}

pub fn conditional(c: &Conditional) -> String {
    match c {
        Conditional::Comparison { lhs, op, value: v } => {
            format!("{} {} {}", expr(lhs), op, value(v))
        }
        Conditional::Evaluate {
            data_ref,
            algorithm,
            threshold,
        } => {
            format!(
                "evaluate(&{data_ref}, '{}', {threshold})",
                algorithm.canonical_name()
            )
        }
    }
}

pub fn selections(s: &Selections) -> String {
    match s {
        Selections::TagRef(tag) => tag.clone(),
        Selections::Filters(fs) => fs.iter().map(filter).collect::<Vec<_>>().join(", "),
    }
}

pub fn filter(f: &Filter) -> String {
    let sigil = if f.sigil { "$" } else { "" };
    format!("{sigil}{} {} {}", f.column, f.op, value(&f.value))
}

fn expr(e: &Expr) -> String {
    match e {
        Expr::Var(v) => format!("${v}"),
        Expr::Member(m) => m.clone(),
        Expr::DataSize => "size(data)".to_string(),
    }
}

pub fn value(v: &Value) -> String {
    match v {
        Value::Str(s) => quote(s),
        Value::Word(w) => w.clone(),
        Value::Num(n) => format!("{n}"),
        Value::Var(name) => format!("${name}"),
        Value::List(items) => format!(
            "<{}>",
            items.iter().map(value).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn attr_value(v: &AttrValue) -> String {
    match v {
        AttrValue::Single(x) => format!("<{}>", value(x)),
        AttrValue::List(xs) => {
            format!(
                "<{}>",
                xs.iter()
                    .map(|x| format!("{{{}}}", value(x)))
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        }
    }
}

fn quote(s: &str) -> String {
    if s.contains('"') {
        format!("'{s}'")
    } else {
        format!("\"{s}\"")
    }
}
