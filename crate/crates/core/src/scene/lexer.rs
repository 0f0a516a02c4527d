use std::fmt;

use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Semi,
    Comma,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Ident => "identifier",
            TokenKind::Number => "number",
            TokenKind::Str => "string",
            TokenKind::LBrace => "'{'",
            TokenKind::RBrace => "'}'",
            TokenKind::LParen => "'('",
            TokenKind::RParen => "')'",
            TokenKind::Colon => "':'",
            TokenKind::Semi => "';'",
            TokenKind::Comma => "','",
            TokenKind::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text; for strings this includes the quotes and escapes.
    pub lexeme: String,
    pub line: usize,
    pub column: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
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

    fn take_digits(&mut self, out: &mut String) -> usize {
        let mut n = 0;
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            out.push(c);
            self.bump();
            n += 1;
        }
        n
    }
}

pub fn lex(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut cur = Cursor {
        chars: text.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    loop {
        let (line, column) = (cur.line, cur.column);
        let Some(c) = cur.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                lexeme: String::new(),
                line,
                column,
            });
            return Ok(tokens);
        };
        let err = |message: String| SyntaxError {
            line,
            column,
            message,
        };
        let single = match c {
            '{' => Some(TokenKind::LBrace),
            '}' => Some(TokenKind::RBrace),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            ':' => Some(TokenKind::Colon),
            ';' => Some(TokenKind::Semi),
            ',' => Some(TokenKind::Comma),
            _ => None,
        };
        if let Some(kind) = single {
            cur.bump();
            tokens.push(Token {
                kind,
                lexeme: c.to_string(),
                line,
                column,
            });
            continue;
        }
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' {
            cur.bump();
            if cur.peek() != Some('/') {
                return Err(err("unexpected character '/'".into()));
            }
            while cur.peek().is_some_and(|c| c != '\n') {
                cur.bump();
            }
            continue;
        }
        let mut lexeme = String::new();
        if c.is_ascii_alphabetic() || c == '_' {
            while let Some(c) = cur
                .peek()
                .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
            {
                lexeme.push(c);
                cur.bump();
            }
            tokens.push(Token {
                kind: TokenKind::Ident,
                lexeme,
                line,
                column,
            });
            continue;
        }
        if c.is_ascii_digit() || matches!(c, '+' | '-' | '.') {
            if matches!(c, '+' | '-') {
                lexeme.push(c);
                cur.bump();
            }
            let mut digits = cur.take_digits(&mut lexeme);
            if cur.peek() == Some('.') {
                lexeme.push('.');
                cur.bump();
                digits += cur.take_digits(&mut lexeme);
            }
            if digits == 0 {
                return Err(err(format!("malformed number '{lexeme}'")));
            }
            if matches!(cur.peek(), Some('e' | 'E')) {
                lexeme.push('e');
                cur.bump();
                if let Some(s) = cur.peek().filter(|c| matches!(c, '+' | '-')) {
                    lexeme.push(s);
                    cur.bump();
                }
                if cur.take_digits(&mut lexeme) == 0 {
                    return Err(err(format!("malformed exponent in '{lexeme}'")));
                }
            }
            match lexeme.parse::<f64>() {
                Ok(v) if v.is_finite() => {}
                _ => return Err(err(format!("number '{lexeme}' is not finite"))),
            }
            tokens.push(Token {
                kind: TokenKind::Number,
                lexeme,
                line,
                column,
            });
            continue;
        }
        if c == '"' {
            lexeme.push(cur.bump().unwrap());
            loop {
                match cur.bump() {
                    None | Some('\n') => return Err(err("unterminated string".into())),
                    Some('"') => {
                        lexeme.push('"');
                        break;
                    }
                    Some('\\') => match cur.bump() {
                        Some(e @ ('"' | '\\')) => {
                            lexeme.push('\\');
                            lexeme.push(e);
                        }
                        _ => return Err(err("invalid escape in string".into())),
                    },
                    Some(ch) => lexeme.push(ch),
                }
            }
            tokens.push(Token {
                kind: TokenKind::Str,
                lexeme,
                line,
                column,
            });
            continue;
        }
        return Err(err(format!("unexpected character '{c}'")));
    }
}

/// Value of a string token's lexeme with quotes and escapes removed.
pub fn unquote(lexeme: &str) -> String {
    let inner = &lexeme[1..lexeme.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(e) = chars.next() {
                out.push(e);
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Rebuilds source text from tokens, one space between lexemes.
pub fn detokenize(tokens: &[Token]) -> String {
    tokens
        .iter()
        .filter(|t| t.kind != TokenKind::Eof)
        .map(|t| t.lexeme.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        lex(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    /// Second scanner: classifies whitespace-separated chunks by their first
    /// character after splitting punctuation apart.
    fn oracle_kinds(text: &str) -> Vec<TokenKind> {
        let mut spaced = String::new();
        for c in text.chars() {
            if "{}():;,".contains(c) {
                spaced.push(' ');
                spaced.push(c);
                spaced.push(' ');
            } else {
                spaced.push(c);
            }
        }
        let mut out: Vec<TokenKind> = spaced
            .split_whitespace()
            .map(|w| match w.as_bytes()[0] {
                b'{' => LBrace,
                b'}' => RBrace,
                b'(' => LParen,
                b')' => RParen,
                b':' => Colon,
                b';' => Semi,
                b',' => Comma,
                b'"' => Str,
                b'0'..=b'9' | b'-' | b'+' | b'.' => Number,
                _ => Ident,
            })
            .collect();
        out.push(Eof);
        out
    }

    #[test]
    fn empty_input() {
        assert_eq!(kinds(""), vec![Eof]);
    }

    #[test]
    fn entry_with_tuple() {
        let text = "pos: (1, -2.5e1);";
        let want = vec![
            Ident, Colon, LParen, Number, Comma, Number, RParen, Semi, Eof,
        ];
        assert_eq!(kinds(text), want);
        assert_eq!(oracle_kinds(text), want);
        let toks = lex(text).unwrap();
        assert_eq!(toks[5].lexeme.parse::<f64>().unwrap(), -25.0);
        assert_eq!((toks[3].line, toks[3].column), (1, 7));
    }

    #[test]
    fn illegal_character_is_located() {
        let e = lex("@").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
        let e = lex("a {\n  b: #;").unwrap_err();
        assert_eq!((e.line, e.column), (2, 6));
    }

    #[test]
    fn comments_and_strings() {
        let toks = lex("// hello\nfile: \"a \\\"b\\\".obj\"; // tail").unwrap();
        assert_eq!(
            toks.iter().map(|t| t.kind).collect::<Vec<_>>(),
            vec![Ident, Colon, Str, Semi, Eof]
        );
        assert_eq!(toks[0].line, 2);
        assert_eq!(unquote(&toks[2].lexeme), "a \"b\".obj");
        assert_eq!(quote("a \"b\".obj"), toks[2].lexeme);
    }

    #[test]
    fn number_forms() {
        for (s, v) in [
            ("3", 3.0),
            ("+0.5", 0.5),
            ("-.25", -0.25),
            ("1e3", 1000.0),
            ("2.E-2", 0.02),
            ("7.", 7.0),
        ] {
            let t = lex(s).unwrap();
            assert_eq!(t[0].kind, Number, "{s}");
            assert_eq!(t[0].lexeme.parse::<f64>().unwrap(), v, "{s}");
        }
        assert!(lex("-").is_err());
        assert!(lex("1e").is_err());
        assert!(lex("1e999").is_err());
    }

    #[test]
    fn detokenize_preserves_kinds() {
        let text =
            "model { shape: \"cube\"; position: (0, 1.5, -2); material { color: (1,0,0); } }";
        let toks = lex(text).unwrap();
        assert_eq!(kinds(&detokenize(&toks)), kinds(text));
        assert_eq!(oracle_kinds(text), kinds(text));
    }
}
