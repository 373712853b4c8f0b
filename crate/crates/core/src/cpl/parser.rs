//! Recursive-descent parser producing a [`PolicyAst`].

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::CplError;

/// Parses a complete policy document. At least one statement is required and
/// every statement must end with `;`.
pub fn parse_policy(text: &str) -> Result<PolicyAst, CplError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    p.policy()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, CplError>;

impl Parser {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_at(&self, n: usize) -> &TokenKind {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn unexpected<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(CplError::Parse {
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
            span: self.span(),
        })
    }

    fn expect(&mut self, kind: TokenKind, label: &str) -> PResult<Token> {
        if *self.peek() == kind {
            Ok(self.advance())
        } else {
            self.unexpected(&[label])
        }
    }

    fn policy(&mut self) -> PResult<PolicyAst> {
        let mut ast = PolicyAst::default();
        if *self.peek() == TokenKind::Eof {
            return self.unexpected(&["a statement"]);
        }
        while *self.peek() != TokenKind::Eof {
            self.statement(&mut ast)?;
            self.expect(TokenKind::Semicolon, "`;`")?;
        }
        Ok(ast)
    }

    fn statement(&mut self, ast: &mut PolicyAst) -> PResult<()> {
        let start = self.span();
        match self.peek().clone() {
            TokenKind::Share | TokenKind::Acquire => {
                let kind = if *self.peek() == TokenKind::Share {
                    ClauseKind::Share
                } else {
                    ClauseKind::Acquire
                };
                self.advance();
                let members = if *self.peek() == TokenKind::DoubleColon {
                    // `share :: ...` is `share : : ...` written without a space.
                    self.advance();
                    Vec::new()
                } else {
                    self.expect(TokenKind::Colon, "`:`")?;
                    let members = self.members()?;
                    self.expect(TokenKind::Colon, "`:`")?;
                    members
                };
                let conditionals = self.conditionals()?;
                self.expect(TokenKind::DoubleColon, "`::`")?;
                let selections = self.selections()?;
                let span = start.join(self.prev_span());
                ast.clauses.push(Clause {
                    kind,
                    members,
                    conditionals,
                    selections,
                    span,
                });
                Ok(())
            }
            TokenKind::Ident(name) => {
                self.advance();
                match self.peek() {
                    TokenKind::Assign => {
                        self.advance();
                        let value = self.attr_value()?;
                        let span = start.join(self.prev_span());
                        ast.attributes.push(Attribute { name, value, span });
                        Ok(())
                    }
                    TokenKind::Colon => {
                        self.advance();
                        let conditionals = self.conditionals()?;
                        self.expect(TokenKind::DoubleColon, "`::`")?;
                        let selections = self.selections()?;
                        let span = start.join(self.prev_span());
                        ast.sub_clauses.push(Clause {
                            kind: ClauseKind::Sub(name),
                            members: Vec::new(),
                            conditionals,
                            selections,
                            span,
                        });
                        Ok(())
                    }
                    _ => self.unexpected(&["`:=`", "`:`"]),
                }
            }
            _ => self.unexpected(&["`share`", "`acquire`", "identifier"]),
        }
    }

    fn members(&mut self) -> PResult<Vec<String>> {
        let mut out = Vec::new();
        if *self.peek() == TokenKind::Colon {
            return Ok(out);
        }
        loop {
            match self.peek().clone() {
                TokenKind::Ident(m) => {
                    self.advance();
                    out.push(m);
                }
                _ => return self.unexpected(&["member identifier", "`:`"]),
            }
            if *self.peek() == TokenKind::Comma {
                self.advance();
            } else {
                return Ok(out);
            }
        }
    }

    fn conditionals(&mut self) -> PResult<Vec<Conditional>> {
        let mut out = Vec::new();
        if *self.peek() == TokenKind::DoubleColon {
            return Ok(out);
        }
        loop {
            out.push(self.conditional()?);
            if *self.peek() == TokenKind::Comma {
                self.advance();
            } else {
                return Ok(out);
            }
        }
    }

    fn conditional(&mut self) -> PResult<Conditional> {
        match self.peek().clone() {
            TokenKind::Evaluate => self.evaluate(),
            TokenKind::Var(v) => {
                self.advance();
                self.comparison(Expr::Var(v))
            }
            TokenKind::Ident(name) => {
                self.advance();
                if name == "size" && *self.peek() == TokenKind::LParen {
                    self.advance();
                    match self.peek() {
                        TokenKind::Ident(d) if d == "data" => {
                            self.advance();
                        }
                        _ => return self.unexpected(&["`data`"]),
                    }
                    self.expect(TokenKind::RParen, "`)`")?;
                    self.comparison(Expr::DataSize)
                } else {
                    self.comparison(Expr::Member(name))
                }
            }
            _ => self.unexpected(&[
                "`evaluate`",
                "variable",
                "member identifier",
                "`size(data)`",
                "`::`",
            ]),
        }
    }

    fn evaluate(&mut self) -> PResult<Conditional> {
        self.advance();
        self.expect(TokenKind::LParen, "`(`")?;
        let data_ref = match self.peek().clone() {
            TokenKind::DataRef(r) => {
                self.advance();
                r
            }
            _ => return self.unexpected(&["data reference `&name`"]),
        };
        self.expect(TokenKind::Comma, "`,`")?;
        let alg_span = self.span();
        let name = match self.peek().clone() {
            TokenKind::Str(s) => {
                self.advance();
                s
            }
            TokenKind::Ident(_) => {
                let mut words = Vec::new();
                while let TokenKind::Ident(w) = self.peek().clone() {
                    self.advance();
                    words.push(w);
                }
                words.join(" ")
            }
            _ => return self.unexpected(&["algorithm name"]),
        };
        let algorithm = Algorithm::from_name(&name).ok_or_else(|| CplError::Invalid {
            message: format!(
                "unknown algorithm {name:?}; expected one of {}",
                Algorithm::ALL
                    .iter()
                    .map(|a| format!("'{}'", a.canonical_name()))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            span: alg_span,
        })?;
        self.expect(TokenKind::Comma, "`,`")?;
        let threshold = match *self.peek() {
            TokenKind::Num(n) if n.is_finite() => {
                self.advance();
                n
            }
            _ => return self.unexpected(&["finite threshold"]),
        };
        self.expect(TokenKind::RParen, "`)`")?;
        Ok(Conditional::Evaluate {
            data_ref,
            algorithm,
            threshold,
        })
    }

    fn comparison(&mut self, lhs: Expr) -> PResult<Conditional> {
        let op = self.operation()?;
        let value = self.value()?;
        Ok(Conditional::Comparison { lhs, op, value })
    }

    fn operation(&mut self) -> PResult<Operation> {
        let op = match self.peek() {
            TokenKind::Eq => Operation::Eq,
            TokenKind::Lt => Operation::Lt,
            TokenKind::Gt => Operation::Gt,
            TokenKind::Ne => Operation::Ne,
            TokenKind::Ident(w) if w == "in" => Operation::In,
            _ => return self.unexpected(&["`=`", "`<`", "`>`", "`!=`", "`in`"]),
        };
        self.advance();
        Ok(op)
    }

    fn value(&mut self) -> PResult<Value> {
        let v = match self.peek().clone() {
            TokenKind::Str(s) => Value::Str(s),
            TokenKind::Num(n) => Value::Num(n),
            TokenKind::Var(v) => Value::Var(v),
            TokenKind::Ident(w) => Value::Word(w),
            TokenKind::Lt => {
                self.advance();
                let items = self.value_items()?;
                self.expect(TokenKind::Gt, "`>`")?;
                return Ok(Value::List(items));
            }
            _ => return self.unexpected(&["value"]),
        };
        self.advance();
        Ok(v)
    }

    /// Comma-separated items inside `<...>`; each item is `{v}` or a bare value.
    fn value_items(&mut self) -> PResult<Vec<Value>> {
        let mut out = Vec::new();
        loop {
            if *self.peek() == TokenKind::LBrace {
                self.advance();
                out.push(self.scalar_value()?);
                self.expect(TokenKind::RBrace, "`}`")?;
            } else {
                out.push(self.scalar_value()?);
            }
            if *self.peek() == TokenKind::Comma {
                self.advance();
            } else {
                return Ok(out);
            }
        }
    }

    fn scalar_value(&mut self) -> PResult<Value> {
        let v = match self.peek().clone() {
            TokenKind::Str(s) => Value::Str(s),
            TokenKind::Num(n) => Value::Num(n),
            TokenKind::Var(v) => Value::Var(v),
            TokenKind::Ident(w) => Value::Word(w),
            _ => return self.unexpected(&["value"]),
        };
        self.advance();
        Ok(v)
    }

    fn attr_value(&mut self) -> PResult<AttrValue> {
        if *self.peek() != TokenKind::Lt {
            return Ok(AttrValue::Single(self.scalar_value()?));
        }
        self.advance();
        let braced = *self.peek() == TokenKind::LBrace;
        let items = self.value_items()?;
        self.expect(TokenKind::Gt, "`>`")?;
        if items.len() == 1 && !braced {
            Ok(AttrValue::Single(items.into_iter().next().unwrap()))
        } else {
            Ok(AttrValue::List(items))
        }
    }

    fn selections(&mut self) -> PResult<Selections> {
        match (self.peek().clone(), self.peek_at(1)) {
            (TokenKind::Semicolon, _) => Ok(Selections::Filters(Vec::new())),
            (TokenKind::Ident(tag), TokenKind::Semicolon) => {
                self.advance();
                Ok(Selections::TagRef(tag))
            }
            _ => {
                let mut filters = Vec::new();
                loop {
                    filters.push(self.filter()?);
                    if *self.peek() == TokenKind::Comma {
                        self.advance();
                    } else {
                        return Ok(Selections::Filters(filters));
                    }
                }
            }
        }
    }

    fn filter(&mut self) -> PResult<Filter> {
        let (column, sigil) = match self.peek().clone() {
            TokenKind::Ident(c) => (c, false),
            TokenKind::Var(c) => (c, true),
            _ => return self.unexpected(&["column name", "sub-clause tag", "`;`"]),
        };
        self.advance();
        let op = self.operation()?;
        let value = self.value()?;
        Ok(Filter {
            column,
            sigil,
            op,
            value,
        })
    }
}
