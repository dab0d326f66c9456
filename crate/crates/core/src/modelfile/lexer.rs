use super::{ParseDiagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Str(String),
    /// Numeric literal kept as text; the parser decides int vs float.
    Number(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Eq,
    Star,
    DotDot,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Str(_) => "string".into(),
            TokenKind::Number(n) => format!("number `{n}`"),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LBracket => "`[`".into(),
            TokenKind::RBracket => "`]`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Eq => "`=`".into(),
            TokenKind::Star => "`*`".into(),
            TokenKind::DotDot => "`..`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.text[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> SourceSpan {
        SourceSpan {
            line: self.line,
            column: self.col,
            offset: self.pos,
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseDiagnostic> {
    let mut cur = Cursor {
        text,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c.is_whitespace() {
                cur.bump();
            } else if c == '#' {
                while let Some(c) = cur.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        let span = cur.span();
        let Some(c) = cur.peek() else {
            out.push(Token {
                kind: TokenKind::Eof,
                span,
            });
            return Ok(out);
        };
        let kind = match c {
            '{' => single(&mut cur, TokenKind::LBrace),
            '}' => single(&mut cur, TokenKind::RBrace),
            '[' => single(&mut cur, TokenKind::LBracket),
            ']' => single(&mut cur, TokenKind::RBracket),
            ';' => single(&mut cur, TokenKind::Semi),
            ',' => single(&mut cur, TokenKind::Comma),
            '=' => single(&mut cur, TokenKind::Eq),
            '*' => single(&mut cur, TokenKind::Star),
            '.' if cur.peek2() == Some('.') => {
                cur.bump();
                cur.bump();
                TokenKind::DotDot
            }
            '"' => TokenKind::Str(string(&mut cur, span)?),
            c if c.is_ascii_digit()
                || (c == '-' && cur.peek2().is_some_and(|d| d.is_ascii_digit())) =>
            {
                TokenKind::Number(number(&mut cur))
            }
            c if is_ident_start(c) => {
                let start = cur.pos;
                while cur.peek().is_some_and(is_ident_continue) {
                    cur.bump();
                }
                TokenKind::Ident(text[start..cur.pos].to_string())
            }
            other => {
                return Err(ParseDiagnostic::error(
                    span,
                    format!("unexpected character `{other}`"),
                ));
            }
        };
        out.push(Token { kind, span });
    }
}

fn single(cur: &mut Cursor<'_>, kind: TokenKind) -> TokenKind {
    cur.bump();
    kind
}

fn number(cur: &mut Cursor<'_>) -> String {
    let start = cur.pos;
    if cur.peek() == Some('-') {
        cur.bump();
    }
    while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
    }
    // a fraction needs a digit after the dot, so `0..5` stays a range
    if cur.peek() == Some('.') && cur.peek2().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
        while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            cur.bump();
        }
    }
    cur.text[start..cur.pos].to_string()
}

fn string(cur: &mut Cursor<'_>, start: SourceSpan) -> Result<String, ParseDiagnostic> {
    cur.bump();
    let mut out = String::new();
    loop {
        let here = cur.span();
        match cur.bump() {
            None => return Err(ParseDiagnostic::error(start, "unterminated string")),
            Some('"') => return Ok(out),
            Some('\\') => match cur.bump() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some(other) => {
                    return Err(ParseDiagnostic::error(
                        here,
                        format!("unknown escape `\\{other}`"),
                    ));
                }
                None => return Err(ParseDiagnostic::error(start, "unterminated string")),
            },
            Some(c) => out.push(c),
        }
    }
}
