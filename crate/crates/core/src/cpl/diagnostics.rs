use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

pub mod codes {
    pub const UNRESOLVED_TAG: &str = "unresolved-tag";
    pub const DUPLICATE_SUB_CLAUSE: &str = "duplicate-sub-clause";
    pub const TAG_CYCLE: &str = "tag-cycle";
    pub const UNREACHABLE_CLAUSE: &str = "unreachable-clause";
    pub const UNUSED_SUB_CLAUSE: &str = "unused-sub-clause";
    pub const SHADOWED_SUB_CLAUSE: &str = "shadowed-sub-clause";
    pub const SYNTAX: &str = "syntax";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: &str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            span,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn warning(code: &str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            span,
            code: code.to_string(),
            message: message.into(),
        }
    }

    /// `file:line:col: severity[code]: message`
    pub fn render(&self, file: &str) -> String {
        format!(
            "{file}:{}:{}: {}[{}]: {}",
            self.span.line, self.span.col, self.severity, self.code, self.message
        )
    }
}

impl From<&super::CplError> for Diagnostic {
    fn from(e: &super::CplError) -> Self {
        let message = match e {
            super::CplError::Lex { message, .. } | super::CplError::Invalid { message, .. } => {
                message.clone()
            }
            super::CplError::Parse {
                expected, found, ..
            } => {
                format!("expected {}, found {found}", expected.join(" or "))
            }
        };
        Diagnostic::error(codes::SYNTAX, e.span(), message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}
