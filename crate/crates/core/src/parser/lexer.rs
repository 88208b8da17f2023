use std::fmt;

use crate::syntax::Span;

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Atom(String),
    Placeholder(usize),
    LParen,
    RParen,
    Comma,
    Slash,
    Assign,
    RevAssign,
    Eq,
    Neq,
    Lt,
    Gt,
    Precedes,
    Strictly,
    Simultaneous,
    KAnd,
    KOr,
    Bang,
    Amp,
    Pipe,
    Plus,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Atom(a) => write!(f, "`'{a}'`"),
            Tok::Placeholder(i) => write!(f, "`#{i}`"),
            Tok::Eof => f.write_str("end of input"),
            other => {
                let s = match other {
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::Comma => ",",
                    Tok::Slash => "/",
                    Tok::Assign => ":=",
                    Tok::RevAssign => "=:",
                    Tok::Eq => "=",
                    Tok::Neq => "!=",
                    Tok::Lt => "<",
                    Tok::Gt => ">",
                    Tok::Precedes => "<~",
                    Tok::Strictly => "<<",
                    Tok::Simultaneous => "~",
                    Tok::KAnd => "/\\",
                    Tok::KOr => "\\/",
                    Tok::Bang => "!",
                    Tok::Amp => "&",
                    Tok::Pipe => "|",
                    Tok::Plus => "+",
                    _ => unreachable!(),
                };
                write!(f, "`{s}`")
            }
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

pub fn tokenize(file: &str, src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |start: usize, end: usize, msg: String| ParseError::new(file, src, Span::new(start, end), msg);
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let two = src.get(i..i + 2).unwrap_or("");
        let tok = match two {
            ":=" => Some(Tok::Assign),
            "=:" => Some(Tok::RevAssign),
            "!=" => Some(Tok::Neq),
            "<~" => Some(Tok::Precedes),
            "<<" => Some(Tok::Strictly),
            "/\\" => Some(Tok::KAnd),
            "\\/" => Some(Tok::KOr),
            _ => None,
        };
        if let Some(tok) = tok {
            out.push((tok, Span::new(start, start + 2)));
            i += 2;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '/' => Some(Tok::Slash),
            '=' => Some(Tok::Eq),
            '<' => Some(Tok::Lt),
            '>' => Some(Tok::Gt),
            '~' => Some(Tok::Simultaneous),
            '!' => Some(Tok::Bang),
            '&' => Some(Tok::Amp),
            '|' => Some(Tok::Pipe),
            '+' => Some(Tok::Plus),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, Span::new(start, start + 1)));
            i += 1;
            continue;
        }
        if c == '#' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = src[start + 1..i]
                .parse::<usize>()
                .map_err(|_| err(start, i, "expected placeholder number after `#`".into()))?;
            out.push((Tok::Placeholder(n), Span::new(start, i)));
            continue;
        }
        if c == '\'' {
            i += 1;
            while i < bytes.len() && bytes[i] != b'\'' && bytes[i] != b'\n' {
                i += 1;
            }
            if i >= bytes.len() || bytes[i] != b'\'' {
                return Err(err(start, i, "unterminated atom literal".into()));
            }
            let name = &src[start + 1..i];
            if name.is_empty() {
                return Err(err(start, i + 1, "empty atom literal".into()));
            }
            i += 1;
            out.push((Tok::Atom(name.to_string()), Span::new(start, i)));
            continue;
        }
        let negative = c == '-' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit());
        if c.is_ascii_digit() || negative {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = src[start..i]
                .parse::<i64>()
                .map_err(|_| err(start, i, "integer literal out of range".into()))?;
            out.push((Tok::Int(n), Span::new(start, i)));
            continue;
        }
        if is_ident_start(c) {
            i += 1;
            while i < bytes.len() && is_ident_continue(bytes[i] as char) {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), Span::new(start, i)));
            continue;
        }
        let ch_len = src[i..].chars().next().map_or(1, char::len_utf8);
        return Err(err(
            start,
            start + ch_len,
            format!("unexpected character `{}`", &src[i..i + ch_len]),
        ));
    }
    out.push((Tok::Eof, Span::new(src.len(), src.len())));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize("t", src).unwrap().into_iter().map(|(t, _)| t).collect()
    }

    #[test]
    fn operators_longest_match() {
        assert_eq!(
            toks("a << b <~ c ~ d /\\ e \\/ !f"),
            vec![
                Tok::Ident("a".into()),
                Tok::Strictly,
                Tok::Ident("b".into()),
                Tok::Precedes,
                Tok::Ident("c".into()),
                Tok::Simultaneous,
                Tok::Ident("d".into()),
                Tok::KAnd,
                Tok::Ident("e".into()),
                Tok::KOr,
                Tok::Bang,
                Tok::Ident("f".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn literals_and_comments() {
        assert_eq!(
            toks("all-sent := -3 // note\n'x' #2"),
            vec![
                Tok::Ident("all-sent".into()),
                Tok::Assign,
                Tok::Int(-3),
                Tok::Atom("x".into()),
                Tok::Placeholder(2),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn bad_character() {
        let e = tokenize("t", "x := $").unwrap_err();
        assert_eq!(e.span, Span::new(5, 6));
    }
}
