use crate::diagnostic::{Diagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Number(f64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
    Eq,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Str(_) => "string".into(),
            Tok::Number(_) => "number".into(),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Semi => "';'".into(),
            Tok::Comma => "','".into(),
            Tok::Eq => "'='".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    column: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn pos(&self) -> (u32, u32) {
        (self.line, self.column)
    }
}

/// Span from `start` to the cursor. Tokens that run over a newline (strings
/// with raw line breaks) are reported as a single character at their start.
fn span_from(start: (u32, u32), cur: &Cursor<'_>) -> SourceSpan {
    let len = if cur.line == start.0 { cur.column - start.1 } else { 1 };
    SourceSpan::new(start.0, start.1, len)
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic()
}

pub(crate) fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Splits `text` into tokens. Lexical problems become diagnostics and the
/// offending characters are skipped; the token stream always ends with `Eof`.
pub(crate) fn tokenize(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<Token> {
    let mut cur = Cursor {
        chars: text.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        let start = cur.pos();
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                cur.bump();
            }
            '/' => {
                cur.bump();
                if cur.peek() == Some('/') {
                    while let Some(c) = cur.peek() {
                        if c == '\n' {
                            break;
                        }
                        cur.bump();
                    }
                } else {
                    diags.push(
                        Diagnostic::error("P-003", "unexpected character '/'")
                            .at(SourceSpan::new(start.0, start.1, 1)),
                    );
                }
            }
            '{' | '}' | '(' | ')' | ';' | ',' | '=' => {
                cur.bump();
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    _ => Tok::Eq,
                };
                out.push(Token {
                    tok,
                    span: SourceSpan::new(start.0, start.1, 1),
                });
            }
            '"' => out.extend(lex_string(&mut cur, diags)),
            c if c.is_ascii_digit() || c == '-' => out.extend(lex_number(&mut cur, diags)),
            c if is_ident_start(c) => {
                let mut s = String::new();
                while let Some(c) = cur.peek().filter(|c| is_ident_continue(*c)) {
                    s.push(c);
                    cur.bump();
                }
                let len = s.chars().count() as u32;
                out.push(Token {
                    tok: Tok::Ident(s),
                    span: SourceSpan::new(start.0, start.1, len),
                });
            }
            other => {
                cur.bump();
                diags.push(
                    Diagnostic::error("P-003", format!("unexpected character {other:?}"))
                        .at(SourceSpan::new(start.0, start.1, 1)),
                );
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        span: SourceSpan::new(cur.line, cur.column, 0),
    });
    out
}

fn lex_string(cur: &mut Cursor<'_>, diags: &mut Vec<Diagnostic>) -> Option<Token> {
    let start = cur.pos();
    cur.bump();
    let mut s = String::new();
    loop {
        match cur.bump() {
            None => {
                diags.push(
                    Diagnostic::error("P-004", "unterminated string").at(span_from(start, cur)),
                );
                return None;
            }
            Some('"') => {
                break;
            }
            Some('\\') => {
                let esc_pos = (cur.line, cur.column - 1);
                match cur.bump() {
                    Some(c @ ('"' | '\\')) => {
                        s.push(c);
                    }
                    Some(other) => {
                        diags.push(
                            Diagnostic::error("P-004", format!("invalid escape '\\{}'", other.escape_default()))
                                .at(SourceSpan::new(esc_pos.0, esc_pos.1, if other == '\n' { 1 } else { 2 })),
                        );
                    }
                    None => {
                        diags.push(
                            Diagnostic::error("P-004", "unterminated string").at(span_from(start, cur)),
                        );
                        return None;
                    }
                }
            }
            Some(c) => {
                s.push(c);
            }
        }
    }
    Some(Token {
        tok: Tok::Str(s),
        span: span_from(start, cur),
    })
}

fn lex_number(cur: &mut Cursor<'_>, diags: &mut Vec<Diagnostic>) -> Option<Token> {
    let start = cur.pos();
    let mut raw = String::new();
    if cur.peek() == Some('-') {
        raw.push('-');
        cur.bump();
    }
    let digits = |cur: &mut Cursor<'_>, raw: &mut String| {
        let mut n = 0;
        while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
            raw.push(c);
            cur.bump();
            n += 1;
        }
        n
    };
    let mut ok = digits(cur, &mut raw) > 0;
    if ok && cur.peek() == Some('.') {
        raw.push('.');
        cur.bump();
        ok = digits(cur, &mut raw) > 0;
    }
    if ok && matches!(cur.peek(), Some('e' | 'E')) {
        raw.push('e');
        cur.bump();
        if let Some(sign @ ('+' | '-')) = cur.peek() {
            raw.push(sign);
            cur.bump();
        }
        ok = digits(cur, &mut raw) > 0;
    }
    let span = SourceSpan::new(start.0, start.1, raw.chars().count() as u32);
    match raw.parse::<f64>() {
        Ok(v) if ok && v.is_finite() => Some(Token {
            tok: Tok::Number(v),
            span,
        }),
        _ => {
            diags.push(Diagnostic::error("P-003", format!("malformed number {raw:?}")).at(span));
            None
        }
    }
}
