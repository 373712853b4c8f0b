//! Tokenizer for CPL source text.

use std::fmt;

use super::ast::Span;
use super::CplError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Share,
    Acquire,
    Evaluate,
    Ident(String),
    /// `$name`
    Var(String),
    /// `&name`
    DataRef(String),
    Str(String),
    Num(f64),
    Colon,
    DoubleColon,
    /// `:=`
    Assign,
    Semicolon,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Eq,
    Ne,
    Lt,
    Gt,
    Whitespace,
    Comment,
    Eof,
}

impl TokenKind {
    pub fn is_trivia(&self) -> bool {
        matches!(self, TokenKind::Whitespace | TokenKind::Comment)
    }

    /// Short human description used in "expected ..." messages.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Share => "`share`".into(),
            TokenKind::Acquire => "`acquire`".into(),
            TokenKind::Evaluate => "`evaluate`".into(),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Var(s) => format!("variable `${s}`"),
            TokenKind::DataRef(s) => format!("data reference `&{s}`"),
            TokenKind::Str(s) => format!("string {s:?}"),
            TokenKind::Num(n) => format!("number {n}"),
            TokenKind::Colon => "`:`".into(),
            TokenKind::DoubleColon => "`::`".into(),
            TokenKind::Assign => "`:=`".into(),
            TokenKind::Semicolon => "`;`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::Eq => "`=`".into(),
            TokenKind::Ne => "`!=`".into(),
            TokenKind::Lt => "`<`".into(),
            TokenKind::Gt => "`>`".into(),
            TokenKind::Whitespace => "whitespace".into(),
            TokenKind::Comment => "comment".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

/// Maps byte offsets to line/column positions.
pub(crate) struct LineIndex<'a> {
    text: &'a str,
    line_starts: Vec<usize>,
}

impl<'a> LineIndex<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex { text, line_starts }
    }

    pub(crate) fn position(&self, offset: usize) -> (u32, u32) {
        let line = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let start = self.line_starts[line];
        let col = self.text[start..offset].chars().count() + 1;
        (line as u32 + 1, col as u32)
    }

    pub(crate) fn span(&self, start: usize, end: usize) -> Span {
        let (line, col) = self.position(start);
        Span::new(start, end, line, col)
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || !c.is_ascii()
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || !c.is_ascii()
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    index: LineIndex<'a>,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.text[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat_while(&mut self, pred: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            self.bump();
        }
    }

    fn error(&self, start: usize, message: impl Into<String>) -> CplError {
        let end = (self.pos.max(start + 1)).min(self.text.len()).max(start);
        CplError::Lex {
            message: message.into(),
            span: self.index.span(start, end),
        }
    }

    fn ident_after_sigil(&mut self, start: usize, sigil: char) -> Result<String, CplError> {
        match self.peek() {
            Some(c) if is_ident_start(c) || c.is_ascii_digit() => {
                let s = self.pos;
                self.eat_while(is_ident_continue);
                Ok(self.text[s..self.pos].to_string())
            }
            _ => Err(self.error(start, format!("expected an identifier after `{sigil}`"))),
        }
    }

    fn number(&mut self, start: usize) -> Result<TokenKind, CplError> {
        if self.peek() == Some('-') {
            self.bump();
        }
        self.eat_while(|c| c.is_ascii_digit());
        if self.peek() == Some('.') {
            self.bump();
            self.eat_while(|c| c.is_ascii_digit());
        }
        let literal = &self.text[start..self.pos];
        let mut value: f64 = literal
            .parse()
            .map_err(|_| self.error(start, format!("malformed number `{literal}`")))?;
        if let Some(suffix @ ('K' | 'k' | 'M')) = self.peek() {
            if !self.peek_nth(1).is_some_and(is_ident_continue) {
                self.bump();
                value *= if suffix == 'M' { 1e6 } else { 1e3 };
            }
        }
        if self.peek().is_some_and(is_ident_continue) {
            self.eat_while(is_ident_continue);
            return Err(self.error(
                start,
                format!("malformed number `{}`", &self.text[start..self.pos]),
            ));
        }
        Ok(TokenKind::Num(value))
    }

    fn next_token(&mut self) -> Result<Token, CplError> {
        let start = self.pos;
        let Some(c) = self.bump() else {
            return Ok(Token {
                kind: TokenKind::Eof,
                span: self.index.span(start, start),
            });
        };
        let kind = match c {
            c if c.is_whitespace() => {
                self.eat_while(char::is_whitespace);
                TokenKind::Whitespace
            }
            '#' => {
                self.eat_while(|c| c != '\n');
                TokenKind::Comment
            }
            ':' => match self.peek() {
                Some(':') => {
                    self.bump();
                    TokenKind::DoubleColon
                }
                Some('=') => {
                    self.bump();
                    TokenKind::Assign
                }
                _ => TokenKind::Colon,
            },
            ';' => TokenKind::Semicolon,
            ',' => TokenKind::Comma,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            '=' => TokenKind::Eq,
            '<' => TokenKind::Lt,
            '>' => TokenKind::Gt,
            '!' => {
                if self.peek() == Some('=') {
                    self.bump();
                    TokenKind::Ne
                } else {
                    return Err(self.error(start, "unexpected `!` (did you mean `!=`?)"));
                }
            }
            '$' => TokenKind::Var(self.ident_after_sigil(start, '$')?),
            '&' => TokenKind::DataRef(self.ident_after_sigil(start, '&')?),
            '"' | '\'' => {
                let body = self.pos;
                loop {
                    match self.bump() {
                        Some(q) if q == c => break,
                        Some(_) => {}
                        None => {
                            return Err(CplError::Lex {
                                message: "unterminated string literal".into(),
                                span: self.index.span(start, self.text.len()),
                            })
                        }
                    }
                }
                TokenKind::Str(self.text[body..self.pos - 1].to_string())
            }
            '-' if self.peek().is_some_and(|d| d.is_ascii_digit()) => {
                self.pos = start;
                self.number(start)?
            }
            d if d.is_ascii_digit() => {
                self.pos = start;
                self.number(start)?
            }
            c if is_ident_start(c) => {
                self.eat_while(is_ident_continue);
                match &self.text[start..self.pos] {
                    "share" => TokenKind::Share,
                    "acquire" => TokenKind::Acquire,
                    "evaluate" => TokenKind::Evaluate,
                    word => TokenKind::Ident(word.to_string()),
                }
            }
            other => return Err(self.error(start, format!("unexpected character {other:?}"))),
        };
        Ok(Token {
            kind,
            span: self.index.span(start, self.pos),
        })
    }
}

/// Tokenizes `text`, keeping whitespace and comment tokens. The spans of the
/// returned tokens tile the input exactly; the final token is `Eof`.
pub fn tokenize_with_trivia(text: &str) -> Result<Vec<Token>, CplError> {
    let mut lexer = Lexer {
        text,
        pos: 0,
        index: LineIndex::new(text),
    };
    let mut out = Vec::new();
    loop {
        let tok = lexer.next_token()?;
        let eof = tok.kind == TokenKind::Eof;
        out.push(tok);
        if eof {
            return Ok(out);
        }
    }
}

/// Tokenizes `text`, dropping whitespace and comments. Ends with `Eof`.
pub fn tokenize(text: &str) -> Result<Vec<Token>, CplError> {
    Ok(tokenize_with_trivia(text)?
        .into_iter()
        .filter(|t| !t.kind.is_trivia())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text)
            .unwrap()
            .into_iter()
            .map(|t| t.kind)
            .collect()
    }

    #[test]
    fn minimal_clause() {
        assert_eq!(
            kinds("share : M1 : :: ;"),
            vec![
                TokenKind::Share,
                TokenKind::Colon,
                TokenKind::Ident("M1".into()),
                TokenKind::Colon,
                TokenKind::DoubleColon,
                TokenKind::Semicolon,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn evaluate_call() {
        assert_eq!(
            kinds("evaluate(&local, 'Jaccard', 0.3)"),
            vec![
                TokenKind::Evaluate,
                TokenKind::LParen,
                TokenKind::DataRef("local".into()),
                TokenKind::Comma,
                TokenKind::Str("Jaccard".into()),
                TokenKind::Comma,
                TokenKind::Num(0.3),
                TokenKind::RParen,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn comparison_without_spaces() {
        assert_eq!(
            kinds("weight>150"),
            vec![
                TokenKind::Ident("weight".into()),
                TokenKind::Gt,
                TokenKind::Num(150.0),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn thousand_suffix() {
        assert_eq!(kinds("1K")[0], TokenKind::Num(1000.0));
        assert_eq!(kinds("2.5k")[0], TokenKind::Num(2500.0));
        assert_eq!(kinds("3M")[0], TokenKind::Num(3e6));
        assert_eq!(kinds("-4")[0], TokenKind::Num(-4.0));
    }

    #[test]
    fn hyphenated_tag_and_assign() {
        assert_eq!(
            kinds("fine-select x := <"),
            vec![
                TokenKind::Ident("fine-select".into()),
                TokenKind::Ident("x".into()),
                TokenKind::Assign,
                TokenKind::Lt,
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn comments_and_both_quote_styles() {
        assert_eq!(
            kinds("# leading\n'A/A' \"b c\" # trailing"),
            vec![
                TokenKind::Str("A/A".into()),
                TokenKind::Str("b c".into()),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn lex_errors_carry_location() {
        let err = tokenize("share :\n  @M1").unwrap_err();
        match err {
            CplError::Lex { span, .. } => {
                assert_eq!((span.line, span.col), (2, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(tokenize("'open").is_err());
        assert!(tokenize("a ! b").is_err());
        assert!(tokenize("12abc").is_err());
    }

    #[test]
    fn trivia_tiles_input() {
        let text = "acquire : M3 : M3 in $NATO :: ; # note\n";
        let toks = tokenize_with_trivia(text).unwrap();
        let mut pos = 0;
        for t in &toks {
            assert_eq!(t.span.start, pos);
            pos = t.span.end;
        }
        assert_eq!(pos, text.len());
    }
}
