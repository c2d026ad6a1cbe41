use super::ast::Span;
use super::diag::{Diagnostic, SpecError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(String),
    Initially,
    Always,
    Assume,
    Guarantee,
    True,
    False,
    Next,
    Globally,
    Finally,
    Until,
    WeakUntil,
    Release,
    Not,
    And,
    Or,
    Implies,
    Iff,
    Assign,
    Plus,
    Comma,
    Semi,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Number(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Initially => "initially",
            Tok::Always => "always",
            Tok::Assume => "assume",
            Tok::Guarantee => "guarantee",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Next => "X",
            Tok::Globally => "G",
            Tok::Finally => "F",
            Tok::Until => "U",
            Tok::WeakUntil => "W",
            Tok::Release => "R",
            Tok::Not => "!",
            Tok::And => "&&",
            Tok::Or => "||",
            Tok::Implies => "->",
            Tok::Iff => "<->",
            Tok::Assign => "<-",
            Tok::Plus => "+",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Ident(_) | Tok::Number(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SpecError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(SpecError::Lexical(Diagnostic::at(src, Span::new(start, start + 2), "unterminated block comment")));
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        let start = i;
        let single = |t: Tok| Some((t, 1));
        let two = |t: Tok| Some((t, 2));
        let rest = &bytes[i..];
        let punct = match c {
            b'!' => single(Tok::Not),
            b'&' if rest.starts_with(b"&&") => two(Tok::And),
            b'|' if rest.starts_with(b"||") => two(Tok::Or),
            b'-' if rest.starts_with(b"->") => two(Tok::Implies),
            b'<' if rest.starts_with(b"<->") => Some((Tok::Iff, 3)),
            b'<' if rest.starts_with(b"<-") => two(Tok::Assign),
            b'+' => single(Tok::Plus),
            b',' => single(Tok::Comma),
            b';' => single(Tok::Semi),
            b'(' => single(Tok::LParen),
            b')' => single(Tok::RParen),
            b'[' => single(Tok::LBracket),
            b']' => single(Tok::RBracket),
            b'{' => single(Tok::LBrace),
            b'}' => single(Tok::RBrace),
            _ => None,
        };
        if let Some((tok, len)) = punct {
            i += len;
            out.push(Token { tok, span: Span::new(start, i) });
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Token { tok: Tok::Number(src[start..i].to_string()), span: Span::new(start, i) });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            let tok = match word {
                "initially" => Tok::Initially,
                "always" => Tok::Always,
                "assume" => Tok::Assume,
                "guarantee" => Tok::Guarantee,
                "true" => Tok::True,
                "false" => Tok::False,
                "X" => Tok::Next,
                "G" => Tok::Globally,
                "F" => Tok::Finally,
                "U" => Tok::Until,
                "W" => Tok::WeakUntil,
                "R" => Tok::Release,
                _ => Tok::Ident(word.to_string()),
            };
            out.push(Token { tok, span: Span::new(start, i) });
            continue;
        }
        let ch = src[i..].chars().next().unwrap_or('?');
        let span = Span::new(i, i + ch.len_utf8());
        return Err(SpecError::Lexical(Diagnostic::at(src, span, format!("unexpected character `{ch}`"))));
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(src.len(), src.len()) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn arrows_take_longest_match() {
        assert_eq!(toks("<-> <- ->"), vec![Tok::Iff, Tok::Assign, Tok::Implies, Tok::Eof]);
    }

    #[test]
    fn operator_letters_are_reserved() {
        assert_eq!(toks("X Xs"), vec![Tok::Next, Tok::Ident("Xs".into()), Tok::Eof]);
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(toks("a // b c\n d /* e */ f"), vec![
            Tok::Ident("a".into()),
            Tok::Ident("d".into()),
            Tok::Ident("f".into()),
            Tok::Eof
        ]);
    }

    #[test]
    fn stray_character_is_reported_with_position() {
        let err = tokenize("guarantee {\n  p & q; }").unwrap_err();
        let d = err.diagnostic().unwrap();
        assert_eq!((d.line, d.column), (2, 5));
        assert!(d.message.contains('&'));
    }
}
