use super::lexer::{unquote, Token, TokenKind};
use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Tuple(Vec<f64>),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeBody {
    Children(Vec<SyntaxNode>),
    Value(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxNode {
    pub name: String,
    pub line: usize,
    pub column: usize,
    pub body: NodeBody,
}

impl SyntaxNode {
    pub fn children(&self) -> &[SyntaxNode] {
        match &self.body {
            NodeBody::Children(c) => c,
            NodeBody::Value(_) => &[],
        }
    }

    pub fn value(&self) -> Option<&Value> {
        match &self.body {
            NodeBody::Value(v) => Some(v),
            NodeBody::Children(_) => None,
        }
    }
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &'a Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn next(&mut self) -> &'a Token {
        let t = self.peek();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, tok: &Token, expected: &str) -> Result<T, SyntaxError> {
        let found = match tok.kind {
            TokenKind::Eof => "end of input".to_string(),
            _ => format!("'{}'", tok.lexeme),
        };
        Err(SyntaxError {
            line: tok.line,
            column: tok.column,
            message: format!("expected {expected}, found {found}"),
        })
    }

    fn expect(&mut self, kind: TokenKind) -> Result<&'a Token, SyntaxError> {
        let t = self.next();
        if t.kind == kind {
            Ok(t)
        } else {
            self.fail(t, &kind.to_string())
        }
    }

    /// After the block name: `{ entry* }`.
    fn block_body(&mut self, name: &Token) -> Result<SyntaxNode, SyntaxError> {
        self.expect(TokenKind::LBrace)?;
        let mut children = Vec::new();
        loop {
            let t = self.next();
            match t.kind {
                TokenKind::RBrace => break,
                TokenKind::Ident => children.push(self.entry(t)?),
                _ => return self.fail(t, "identifier or '}'"),
            }
        }
        Ok(SyntaxNode {
            name: name.lexeme.clone(),
            line: name.line,
            column: name.column,
            body: NodeBody::Children(children),
        })
    }

    fn entry(&mut self, name: &Token) -> Result<SyntaxNode, SyntaxError> {
        let t = self.peek();
        match t.kind {
            TokenKind::LBrace => self.block_body(name),
            TokenKind::Colon => {
                self.next();
                let value = self.value()?;
                self.expect(TokenKind::Semi)?;
                Ok(SyntaxNode {
                    name: name.lexeme.clone(),
                    line: name.line,
                    column: name.column,
                    body: NodeBody::Value(value),
                })
            }
            _ => self.fail(t, "':' or '{'"),
        }
    }

    fn number(&mut self) -> Result<f64, SyntaxError> {
        let t = self.next();
        if t.kind != TokenKind::Number {
            return self.fail(t, "number");
        }
        Ok(t.lexeme.parse().expect("lexer validated number"))
    }

    fn value(&mut self) -> Result<Value, SyntaxError> {
        let t = self.peek();
        match t.kind {
            TokenKind::Number => Ok(Value::Number(self.number()?)),
            TokenKind::Str => {
                self.next();
                Ok(Value::Str(unquote(&t.lexeme)))
            }
            TokenKind::LParen => {
                self.next();
                let mut items = vec![self.number()?];
                loop {
                    let t = self.next();
                    match t.kind {
                        TokenKind::Comma => items.push(self.number()?),
                        TokenKind::RParen => break,
                        _ => return self.fail(t, "',' or ')'"),
                    }
                }
                Ok(Value::Tuple(items))
            }
            _ => self.fail(t, "value"),
        }
    }
}

/// Parses a token list into a root node (empty name) whose children are the
/// top-level blocks.
pub fn parse(tokens: &[Token]) -> Result<SyntaxNode, SyntaxError> {
    if tokens.last().map(|t| t.kind) != Some(TokenKind::Eof) {
        return Err(SyntaxError {
            line: 1,
            column: 1,
            message: "token list does not end with end of input".into(),
        });
    }
    let mut p = Parser { tokens, pos: 0 };
    let mut blocks = Vec::new();
    loop {
        let t = p.next();
        match t.kind {
            TokenKind::Eof => break,
            TokenKind::Ident => blocks.push(p.block_body(t)?),
            _ => return p.fail(t, "block name"),
        }
    }
    Ok(SyntaxNode {
        name: String::new(),
        line: 1,
        column: 1,
        body: NodeBody::Children(blocks),
    })
}

#[cfg(test)]
mod tests {
    use super::super::lexer::lex;
    use super::*;

    fn tree(text: &str) -> Result<SyntaxNode, SyntaxError> {
        parse(&lex(text)?)
    }

    fn depth(n: &SyntaxNode) -> usize {
        1 + n.children().iter().map(depth).max().unwrap_or(0)
    }

    #[test]
    fn simple_entry() {
        let root = tree("a { b: 1; }").unwrap();
        let a = &root.children()[0];
        assert_eq!(a.name, "a");
        assert_eq!(a.children()[0].name, "b");
        assert_eq!(a.children()[0].value(), Some(&Value::Number(1.0)));
    }

    #[test]
    fn nested_blocks() {
        let root = tree("m { mat { c: (1,0,0); } }").unwrap();
        // root, m, mat, c
        assert_eq!(depth(&root), 4);
        let c = &root.children()[0].children()[0].children()[0];
        assert_eq!(c.value(), Some(&Value::Tuple(vec![1.0, 0.0, 0.0])));
    }

    #[test]
    fn missing_value() {
        let e = tree("a { b: ; }").unwrap_err();
        assert!(e.message.starts_with("expected value"), "{}", e.message);
        assert_eq!((e.line, e.column), (1, 8));
    }

    #[test]
    fn unbalanced_braces_fail_at_eof() {
        let e = tree("a {\n b { c: 1; }\n").unwrap_err();
        assert!(e.message.contains("end of input"));
        assert_eq!(e.line, 3);
        assert!(tree("a { } }").is_err());
    }

    #[test]
    fn node_is_children_xor_value() {
        let root = tree("x { s: \"q\"; y { } }").unwrap();
        let x = &root.children()[0];
        assert!(x.value().is_none());
        assert!(x.children()[0].children().is_empty() && x.children()[0].value().is_some());
        assert!(x.children()[1].value().is_none());
    }
}
