//! Static checks over a parsed policy.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::ast::*;
use super::diagnostics::{codes, Diagnostic};

/// Returns diagnostics sorted by source position.
pub fn validate(ast: &PolicyAst) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let declared: BTreeSet<&str> = ast.sub_clauses.iter().filter_map(|c| c.tag()).collect();

    let mut referenced = HashSet::new();
    for c in ast.clauses.iter().chain(&ast.sub_clauses) {
        if let Selections::TagRef(tag) = &c.selections {
            referenced.insert(tag.as_str());
            if !declared.contains(tag.as_str()) {
                out.push(Diagnostic::error(
                    codes::UNRESOLVED_TAG,
                    c.span,
                    format!(
                        "selections refer to `{tag}`, but no sub-clause with that tag is declared"
                    ),
                ));
            }
        }
    }

    let mut reported_unused = HashSet::new();
    for c in &ast.sub_clauses {
        let tag = c.tag().unwrap_or_default();
        if !referenced.contains(tag) && reported_unused.insert(tag) {
            out.push(Diagnostic::warning(
                codes::UNUSED_SUB_CLAUSE,
                c.span,
                format!("sub-clause `{tag}` is never referenced"),
            ));
        }
    }

    // Duplicates and shadowing among branches of the same tag.
    for (i, c) in ast.sub_clauses.iter().enumerate() {
        let earlier = &ast.sub_clauses[..i];
        let same_tag = earlier.iter().filter(|e| e.tag() == c.tag());
        let mut duplicate = false;
        let mut shadowed = false;
        for e in same_tag {
            if e.conditionals == c.conditionals {
                duplicate = true;
            }
            if always_matches(ast, e, &mut Vec::new()) {
                shadowed = true;
            }
        }
        let tag = c.tag().unwrap_or_default();
        if duplicate {
            out.push(Diagnostic::error(
                codes::DUPLICATE_SUB_CLAUSE,
                c.span,
                format!("sub-clause `{tag}` repeats the conditionals of an earlier branch"),
            ));
        } else if shadowed {
            out.push(Diagnostic::warning(
                codes::SHADOWED_SUB_CLAUSE,
                c.span,
                format!(
                    "branch of `{tag}` can never be selected: an earlier branch always matches"
                ),
            ));
        }
    }

    for (i, c) in ast.clauses.iter().enumerate() {
        let shadowing = ast.clauses[..i].iter().find(|e| {
            e.kind == c.kind
                && covers(&e.members, &c.members)
                && always_matches(ast, e, &mut Vec::new())
        });
        if let Some(e) = shadowing {
            out.push(Diagnostic::warning(
                codes::UNREACHABLE_CLAUSE,
                c.span,
                format!(
                    "{} clause is unreachable: the {} clause at line {} has no conditionals and covers the same members",
                    c.kind, e.kind, e.span.line
                ),
            ));
        }
    }

    out.extend(cycles(ast));
    out.sort_by_key(|d| (d.span.start, d.severity, d.code.clone()));
    out
}

/// True when every member matched by `later` is also matched by `earlier`.
fn covers(earlier: &[String], later: &[String]) -> bool {
    earlier.is_empty() || (!later.is_empty() && later.iter().all(|m| earlier.contains(m)))
}

/// A clause always matches when it has no conditionals and its selections
/// cannot fail to expand.
pub(crate) fn always_matches(ast: &PolicyAst, c: &Clause, visiting: &mut Vec<String>) -> bool {
    if !c.conditionals.is_empty() {
        return false;
    }
    match &c.selections {
        Selections::Filters(_) => true,
        Selections::TagRef(tag) => {
            if visiting.contains(tag) {
                return false;
            }
            visiting.push(tag.clone());
            let res = ast
                .sub_clauses_tagged(tag)
                .any(|s| always_matches(ast, s, visiting));
            visiting.pop();
            res
        }
    }
}

fn cycles(ast: &PolicyAst) -> Vec<Diagnostic> {
    // tag -> (referenced tag, span of the referencing sub-clause)
    let mut edges: BTreeMap<&str, Vec<(&str, Span)>> = BTreeMap::new();
    for c in &ast.sub_clauses {
        if let (Some(tag), Selections::TagRef(target)) = (c.tag(), &c.selections) {
            edges
                .entry(tag)
                .or_default()
                .push((target.as_str(), c.span));
        }
    }
    let mut out = Vec::new();
    let mut reported = HashSet::new();
    for &start in edges.keys() {
        let mut stack = vec![start];
        dfs(start, &edges, &mut stack, &mut reported, &mut out);
    }
    out
}

fn dfs<'a>(
    node: &'a str,
    edges: &BTreeMap<&'a str, Vec<(&'a str, Span)>>,
    stack: &mut Vec<&'a str>,
    reported: &mut HashSet<usize>,
    out: &mut Vec<Diagnostic>,
) {
    for &(next, span) in edges.get(node).map(Vec::as_slice).unwrap_or(&[]) {
        if let Some(pos) = stack.iter().position(|&t| t == next) {
            if reported.insert(span.start) {
                let mut path: Vec<&str> = stack[pos..].to_vec();
                path.push(next);
                out.push(Diagnostic::error(
                    codes::TAG_CYCLE,
                    span,
                    format!("sub-clause references form a cycle: {}", path.join(" -> ")),
                ));
            }
            continue;
        }
        stack.push(next);
        dfs(next, edges, stack, reported, out);
        stack.pop();
    }
}
