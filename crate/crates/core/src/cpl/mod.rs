//! The CPL policy language: lexing, parsing, validation and canonical printing.

pub mod ast;
pub mod coverage;
pub mod diagnostics;
pub mod lexer;
pub mod parser;
pub mod serialize;
pub mod validate;

use thiserror::Error;

pub use ast::*;
pub use coverage::{productions_used, Production};
pub use diagnostics::{Diagnostic, Severity};
pub use lexer::{tokenize, tokenize_with_trivia, Token, TokenKind};
pub use parser::parse_policy;
pub use serialize::serialize;
pub use validate::validate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CplError {
    #[error("{}:{}: lex error: {message}", span.line, span.col)]
    Lex { message: String, span: Span },
    #[error("{}:{}: parse error: expected {}, found {found}", span.line, span.col, expected.join(" or "))]
    Parse {
        expected: Vec<String>,
        found: String,
        span: Span,
    },
    #[error("{}:{}: {message}", span.line, span.col)]
    Invalid { message: String, span: Span },
}

impl CplError {
    pub fn span(&self) -> Span {
        match self {
            CplError::Lex { span, .. }
            | CplError::Parse { span, .. }
            | CplError::Invalid { span, .. } => *span,
        }
    }
}
