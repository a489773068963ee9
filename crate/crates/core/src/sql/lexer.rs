use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Word(String),
    /// Backtick- or bracket-quoted identifier.
    QuotedIdent(String),
    /// Single- or double-quoted text. SPIDER gold queries use double quotes
    /// for string values, so both read as literals.
    Str(String),
    Number(String),
    Symbol(&'static str),
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Word(w) => write!(f, "'{w}'"),
            TokenKind::QuotedIdent(w) => write!(f, "identifier `{w}`"),
            TokenKind::Str(s) => write!(f, "string '{s}'"),
            TokenKind::Number(n) => write!(f, "number {n}"),
            TokenKind::Symbol(s) => write!(f, "'{s}'"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub offset: usize,
    pub end: usize,
}

impl Token {
    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    pub fn is_symbol(&self, sym: &str) -> bool {
        matches!(&self.kind, TokenKind::Symbol(s) if *s == sym)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

const SYMBOLS: [&str; 18] = [
    "<=", ">=", "!=", "<>", "||", "==", "=", "<", ">", ",", ".", "(", ")", "*", "+", "-", "/", ";",
];

pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = text[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        // `--` line comments
        if text[i..].starts_with("--") {
            i = text[i..].find('\n').map_or(bytes.len(), |n| i + n);
            continue;
        }
        let start = i;
        let kind = if c == '\'' || c == '"' {
            let (s, next) = read_quoted(text, i, c)?;
            i = next;
            TokenKind::Str(s)
        } else if c == '`' || c == '[' {
            let close = if c == '`' { '`' } else { ']' };
            let (s, next) = read_quoted(text, i, close)?;
            i = next;
            TokenKind::QuotedIdent(s)
        } else if c.is_ascii_digit()
            || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) && !prev_is_name(&tokens))
        {
            let end = scan_number(bytes, i);
            let s = text[i..end].to_string();
            i = end;
            TokenKind::Number(s)
        } else if c.is_alphabetic() || c == '_' {
            let end = text[i..]
                .char_indices()
                .find(|(_, ch)| !(ch.is_alphanumeric() || *ch == '_' || *ch == '$'))
                .map_or(text.len(), |(n, _)| i + n);
            let s = text[i..end].to_string();
            i = end;
            TokenKind::Word(s)
        } else if let Some(sym) = SYMBOLS.iter().find(|s| text[i..].starts_with(**s)) {
            i += sym.len();
            TokenKind::Symbol(if *sym == "==" { "=" } else { sym })
        } else if c == '%' {
            i += 1;
            TokenKind::Symbol("%")
        } else {
            return Err(LexError {
                offset: i,
                message: format!("unexpected character '{c}'"),
            });
        };
        tokens.push(Token {
            kind,
            offset: start,
            end: i,
        });
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        offset: text.len(),
        end: text.len(),
    });
    Ok(tokens)
}

fn prev_is_name(tokens: &[Token]) -> bool {
    matches!(
        tokens.last().map(|t| &t.kind),
        Some(TokenKind::Word(_) | TokenKind::QuotedIdent(_))
    )
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    } else if i < bytes.len() && bytes[i] == b'.' && !bytes.get(i + 1).is_some_and(|b| b.is_ascii_alphabetic()) {
        // trailing dot as in `1.`
        i += 1;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

/// Reads a quoted run starting at `start` (the opening quote). A doubled
/// closing quote is an escaped quote character.
fn read_quoted(text: &str, start: usize, close: char) -> Result<(String, usize), LexError> {
    let mut out = String::new();
    let open_len = text[start..].chars().next().unwrap().len_utf8();
    let mut iter = text[start + open_len..].char_indices().peekable();
    while let Some((n, ch)) = iter.next() {
        if ch == close {
            if iter.peek().is_some_and(|(_, c)| *c == close) {
                out.push(close);
                iter.next();
                continue;
            }
            return Ok((out, start + open_len + n + ch.len_utf8()));
        }
        out.push(ch);
    }
    Err(LexError {
        offset: start,
        message: "unterminated quoted text".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_basic_query() {
        assert_eq!(
            kinds("SELECT a.b, 'it''s' FROM t WHERE x >= 1.5;"),
            vec![
                TokenKind::Word("SELECT".into()),
                TokenKind::Word("a".into()),
                TokenKind::Symbol("."),
                TokenKind::Word("b".into()),
                TokenKind::Symbol(","),
                TokenKind::Str("it's".into()),
                TokenKind::Word("FROM".into()),
                TokenKind::Word("t".into()),
                TokenKind::Word("WHERE".into()),
                TokenKind::Word("x".into()),
                TokenKind::Symbol(">="),
                TokenKind::Number("1.5".into()),
                TokenKind::Symbol(";"),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn double_quotes_are_strings_and_backticks_identifiers() {
        assert_eq!(kinds("\"wyoming\"")[0], TokenKind::Str("wyoming".into()));
        assert_eq!(kinds("`my col`")[0], TokenKind::QuotedIdent("my col".into()));
        assert_eq!(kinds("[my col]")[0], TokenKind::QuotedIdent("my col".into()));
    }

    #[test]
    fn reports_unterminated_string() {
        let err = tokenize("SELECT 'abc").unwrap_err();
        assert_eq!(err.offset, 7);
    }

    #[test]
    fn offsets_point_at_token_start() {
        let toks = tokenize("  SELEC x").unwrap();
        assert_eq!(toks[0].offset, 2);
        assert_eq!(toks[1].offset, 8);
    }
}
