//! Syntax tree for CPL policy documents.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Byte range in the source plus the 1-based line/column of its start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(start: usize, end: usize, line: u32, col: u32) -> Self {
        Span {
            start,
            end,
            line,
            col,
        }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn join(self, other: Span) -> Span {
        if other.start < self.start {
            return other.join(self);
        }
        Span {
            start: self.start,
            end: self.end.max(other.end),
            line: self.line,
            col: self.col,
        }
    }
}

/// A parsed policy document.
///
/// Statements are split by category; relative order inside each category is
/// the source order, which is also the top-down evaluation order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PolicyAst {
    pub attributes: Vec<Attribute>,
    pub clauses: Vec<Clause>,
    pub sub_clauses: Vec<Clause>,
}

impl PartialEq for PolicyAst {
    fn eq(&self, other: &Self) -> bool {
        self.attributes == other.attributes
            && self.clauses == other.clauses
            && self.sub_clauses == other.sub_clauses
    }
}

impl PolicyAst {
    /// Total number of statements (attributes, clauses and sub-clauses).
    pub fn statement_count(&self) -> usize {
        self.attributes.len() + self.clauses.len() + self.sub_clauses.len()
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    /// Sub-clauses carrying `tag`, in source order.
    pub fn sub_clauses_tagged<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a Clause> + 'a {
        self.sub_clauses
            .iter()
            .filter(move |c| c.tag() == Some(tag))
    }

    /// Clauses of the given kind, with their index in `clauses`.
    pub fn clauses_of(&self, kind: ClauseKind) -> impl Iterator<Item = (usize, &Clause)> {
        self.clauses
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClauseKind {
    Share,
    Acquire,
    Sub(String),
}

impl ClauseKind {
    pub fn keyword(&self) -> &str {
        match self {
            ClauseKind::Share => "share",
            ClauseKind::Acquire => "acquire",
            ClauseKind::Sub(tag) => tag,
        }
    }
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A share, acquire or member-defined sub-clause.
///
/// Equality ignores `span`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Clause {
    pub kind: ClauseKind,
    /// Empty means every member. Always empty for sub-clauses.
    pub members: Vec<String>,
    pub conditionals: Vec<Conditional>,
    pub selections: Selections,
    #[serde(default)]
    pub span: Span,
}

impl PartialEq for Clause {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.members == other.members
            && self.conditionals == other.conditionals
            && self.selections == other.selections
    }
}

impl Clause {
    pub fn tag(&self) -> Option<&str> {
        match &self.kind {
            ClauseKind::Sub(tag) => Some(tag),
            _ => None,
        }
    }

    /// True when the members list is empty or names `member`.
    pub fn applies_to(&self, member: &str) -> bool {
        self.members.is_empty() || self.members.iter().any(|m| m == member)
    }

    pub fn has_data_dependent(&self) -> bool {
        self.conditionals
            .iter()
            .any(|c| matches!(c, Conditional::Evaluate { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Selections {
    /// Conjunction of filters; an empty list selects every row.
    Filters(Vec<Filter>),
    /// Delegation to the sub-clauses carrying this tag.
    TagRef(String),
}

impl Default for Selections {
    fn default() -> Self {
        Selections::Filters(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub column: String,
    /// Written as `$column` rather than a bare column name.
    #[serde(default)]
    pub sigil: bool,
    pub op: Operation,
    pub value: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operation {
    Eq,
    Lt,
    Gt,
    Ne,
    In,
}

impl Operation {
    pub fn symbol(self) -> &'static str {
        match self {
            Operation::Eq => "=",
            Operation::Lt => "<",
            Operation::Gt => ">",
            Operation::Ne => "!=",
            Operation::In => "in",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Conditional {
    Comparison {
        lhs: Expr,
        op: Operation,
        value: Value,
    },
    Evaluate {
        data_ref: String,
        algorithm: Algorithm,
        threshold: f64,
    },
}

/// Left-hand side of a comparison conditional.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    /// `$name`
    Var(String),
    /// A bare member identifier such as `M2`.
    Member(String),
    /// `size(data)`: row count of the counterparty's dataset.
    DataSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    /// Quoted string.
    Str(String),
    /// Unquoted identifier used as a value, e.g. `race=Asian`.
    Word(String),
    Num(f64),
    /// `$name`, resolved against the evaluation environment.
    Var(String),
    /// `<v1, v2, ...>`
    List(Vec<Value>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    IntersectionSize,
    JaccardIndex,
    PearsonCorrelation,
    CosineSimilarity,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::IntersectionSize,
        Algorithm::JaccardIndex,
        Algorithm::PearsonCorrelation,
        Algorithm::CosineSimilarity,
    ];

    /// Canonical spelling used by the serializer.
    pub fn canonical_name(self) -> &'static str {
        match self {
            Algorithm::IntersectionSize => "Intersection size",
            Algorithm::JaccardIndex => "Jaccard index",
            Algorithm::PearsonCorrelation => "Pearson correlation",
            Algorithm::CosineSimilarity => "Cosine similarity",
        }
    }

    /// Accepts the canonical names plus the short forms seen in practice
    /// (`'Jaccard'`, `'intersection size'`, `pearson`, ...). Case-insensitive.
    pub fn from_name(name: &str) -> Option<Algorithm> {
        let norm: String = name
            .trim()
            .chars()
            .map(|c| {
                if c == '_' || c == '-' {
                    ' '
                } else {
                    c.to_ascii_lowercase()
                }
            })
            .collect();
        let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
        match norm.as_str() {
            "intersection size" | "intersection" | "intersection cardinality" => {
                Some(Algorithm::IntersectionSize)
            }
            "jaccard index" | "jaccard" | "jaccard similarity" => Some(Algorithm::JaccardIndex),
            "pearson correlation" | "pearson" => Some(Algorithm::PearsonCorrelation),
            "cosine similarity" | "cosine" => Some(Algorithm::CosineSimilarity),
            _ => None,
        }
    }

    pub fn is_set_statistic(self) -> bool {
        matches!(self, Algorithm::IntersectionSize | Algorithm::JaccardIndex)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// `name := <value>` or `name := <{v1}, {v2}>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub value: AttrValue,
    #[serde(default)]
    pub span: Span,
}

impl PartialEq for Attribute {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.value == other.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttrValue {
    Single(Value),
    List(Vec<Value>),
}

impl AttrValue {
    pub fn values(&self) -> Vec<&Value> {
        match self {
            AttrValue::Single(v) => vec![v],
            AttrValue::List(vs) => vs.iter().collect(),
        }
    }
}
