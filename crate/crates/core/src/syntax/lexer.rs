use super::{ErrorKind, SyntaxError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Var(String),
    Int(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Bar,
    Comma,
    Semi,
    Neck,
    Arrow,
    End,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) | Tok::Int(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrack => "`[`".into(),
            Tok::RBrack => "`]`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Arrow => "`=>`".into(),
            Tok::End => "end of clause `.`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut anon = 0usize;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            bump(1, &mut i, &mut col);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let tok = if c.is_ascii_lowercase() || c.is_ascii_uppercase() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            let word: String = chars[start..i].iter().collect();
            if word == "_" {
                anon += 1;
                Tok::Var(format!("_#{anon}"))
            } else if c.is_ascii_lowercase() {
                Tok::Ident(word)
            } else {
                Tok::Var(word)
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let digits: String = chars[start..i].iter().collect();
            let trimmed = digits.trim_start_matches('0');
            Tok::Int(if trimmed.is_empty() { "0".into() } else { trimmed.into() })
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, width) = match (c, next) {
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('[', _) => (Tok::LBrack, 1),
                (']', _) => (Tok::RBrack, 1),
                ('|', _) => (Tok::Bar, 1),
                (',', _) => (Tok::Comma, 1),
                (';', _) => (Tok::Semi, 1),
                (':', Some('-')) => (Tok::Neck, 2),
                ('=', Some('>')) => (Tok::Arrow, 2),
                ('.', n) if n.is_none_or(|n| n.is_whitespace() || n == '%') => (Tok::End, 1),
                _ => {
                    return Err(SyntaxError::new(ErrorKind::Lexical, tl, tc, format!("unexpected character {c:?}")));
                }
            };
            bump(width, &mut i, &mut col);
            tok
        };
        out.push(Token { tok, line: tl, col: tc });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
