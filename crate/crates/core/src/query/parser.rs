use std::collections::HashMap;

use super::ast::{CmpOp, Comparison, Direction, Length, NodePattern, Predicate, QueryAst, RelPattern};
use super::QueryError;
use crate::graph::{EdgeType, Scalar};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBracket,
    RBracket,
    Colon,
    Dot,
    DotDot,
    Star,
    Eq,
    Neq,
    /// `<-`
    LArrow,
    /// `->`
    RArrow,
    Dash,
    Ident(String),
    Str(String),
    Int(i64),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::Star => "`*`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Neq => "`<>`".into(),
            Tok::LArrow => "`<-`".into(),
            Tok::RArrow => "`->`".into(),
            Tok::Dash => "`-`".into(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Int(_) => "integer".into(),
            Tok::Eof => "end of query".into(),
        }
    }
}

struct Token {
    tok: Tok,
    offset: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> QueryError {
    QueryError::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, QueryError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let next = bytes.get(i + 1).copied();
        let simple = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'[' => Some(Tok::LBracket),
            b']' => Some(Tok::RBracket),
            b':' => Some(Tok::Colon),
            b'*' => Some(Tok::Star),
            b'=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, offset: start });
            i += 1;
            continue;
        }
        match c {
            c if c.is_ascii_whitespace() => i += 1,
            b'/' if next == Some(b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'.' if next == Some(b'.') => {
                out.push(Token {
                    tok: Tok::DotDot,
                    offset: start,
                });
                i += 2;
            }
            b'.' => {
                out.push(Token {
                    tok: Tok::Dot,
                    offset: start,
                });
                i += 1;
            }
            b'<' if next == Some(b'>') => {
                out.push(Token {
                    tok: Tok::Neq,
                    offset: start,
                });
                i += 2;
            }
            b'<' if next == Some(b'-') => {
                out.push(Token {
                    tok: Tok::LArrow,
                    offset: start,
                });
                i += 2;
            }
            b'-' if next == Some(b'>') => {
                out.push(Token {
                    tok: Tok::RArrow,
                    offset: start,
                });
                i += 2;
            }
            b'-' => {
                out.push(Token {
                    tok: Tok::Dash,
                    offset: start,
                });
                i += 1;
            }
            b'"' | b'\'' => {
                let quote = c;
                let mut value = String::new();
                let mut chars = text[i + 1..].char_indices();
                let mut closed = false;
                while let Some((j, ch)) = chars.next() {
                    match ch {
                        ch if ch as u32 == quote as u32 => {
                            i = i + 1 + j + 1;
                            closed = true;
                            break;
                        }
                        '\\' => match chars.next() {
                            Some((_, 'n')) => value.push('\n'),
                            Some((_, 't')) => value.push('\t'),
                            Some((_, e @ ('"' | '\'' | '\\'))) => value.push(e),
                            Some((k, other)) => return Err(syntax(i + 1 + k, format!("unknown escape `\\{other}`"))),
                            None => break,
                        },
                        ch => value.push(ch),
                    }
                }
                if !closed {
                    return Err(syntax(start, "unterminated string literal"));
                }
                out.push(Token {
                    tok: Tok::Str(value),
                    offset: start,
                });
            }
            c if c.is_ascii_digit() => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let value = text[start..i]
                    .parse()
                    .map_err(|_| syntax(start, "integer literal out of range"))?;
                out.push(Token {
                    tok: Tok::Int(value),
                    offset: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(text[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                let ch = text[i..].chars().next().expect("in bounds");
                return Err(syntax(start, format!("unexpected character `{ch}`")));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: text.len(),
    });
    Ok(out)
}

/// A variable use recorded for the binding check.
struct VarUse {
    name: String,
    offset: usize,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    uses: Vec<VarUse>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn unexpected(&self, wanted: &str) -> QueryError {
        syntax(
            self.offset(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), QueryError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(kw))
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<(String, usize), QueryError> {
        let offset = self.offset();
        match self.peek() {
            Tok::Ident(s) if !is_reserved(s) => {
                let s = s.clone();
                self.bump();
                Ok((s, offset))
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn query(&mut self) -> Result<QueryAst, QueryError> {
        self.keyword("MATCH")?;
        let path_var = if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Eq {
            let (name, _) = self.ident("a path variable")?;
            self.bump();
            Some(name)
        } else {
            None
        };
        let mut nodes = vec![self.node()?];
        let mut rels = Vec::new();
        while matches!(self.peek(), Tok::Dash | Tok::LArrow) {
            rels.push(self.rel()?);
            nodes.push(self.node()?);
        }
        let predicate = if self.at_keyword("WHERE") {
            self.bump();
            Some(self.or()?)
        } else {
            None
        };
        self.keyword("RETURN")?;
        let (return_item, offset) = self.ident("a variable to return")?;
        self.uses.push(VarUse {
            name: return_item.clone(),
            offset,
        });
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of query"));
        }
        Ok(QueryAst {
            path_var,
            nodes,
            rels,
            predicate,
            return_item,
        })
    }

    fn node(&mut self) -> Result<NodePattern, QueryError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut node = NodePattern::default();
        if matches!(self.peek(), Tok::Ident(_)) {
            node.var = Some(self.ident("a node variable")?.0);
        }
        if *self.peek() == Tok::Colon {
            self.bump();
            node.label = Some(self.ident("a label")?.0);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(node)
    }

    fn rel(&mut self) -> Result<RelPattern, QueryError> {
        let left = self.bump() == Tok::LArrow;
        let (var, kind, length) = self.rel_body()?;
        let direction = match (left, self.peek()) {
            (true, Tok::Dash) => Direction::Left,
            (true, Tok::RArrow) => return Err(syntax(self.offset(), "relationships cannot point both ways")),
            (false, Tok::RArrow) => Direction::Right,
            (false, Tok::Dash) => Direction::Undirected,
            _ => return Err(self.unexpected("`-` or `->`")),
        };
        self.bump();
        Ok(RelPattern {
            var,
            kind,
            direction,
            length,
        })
    }

    fn rel_body(&mut self) -> Result<(Option<String>, Option<EdgeType>, Length), QueryError> {
        if *self.peek() != Tok::LBracket {
            return Ok((None, None, Length::One));
        }
        self.bump();
        let var = if matches!(self.peek(), Tok::Ident(_)) {
            Some(self.ident("a relationship variable")?.0)
        } else {
            None
        };
        let kind = if *self.peek() == Tok::Colon {
            self.bump();
            let (name, offset) = self.ident("a relationship type")?;
            Some(
                name.parse::<EdgeType>()
                    .map_err(|_| syntax(offset, format!("unknown relationship type `{name}`")))?,
            )
        } else {
            None
        };
        let length = if *self.peek() == Tok::Star {
            self.bump();
            self.length()?
        } else {
            Length::One
        };
        self.expect(Tok::RBracket, "`]`")?;
        Ok((var, kind, length))
    }

    fn hops(&mut self) -> Result<Option<u32>, QueryError> {
        let offset = self.offset();
        match self.peek() {
            Tok::Int(n) => {
                let n = u32::try_from(*n).map_err(|_| syntax(offset, "hop count out of range"))?;
                self.bump();
                Ok(Some(n))
            }
            _ => Ok(None),
        }
    }

    fn length(&mut self) -> Result<Length, QueryError> {
        let offset = self.offset();
        let first = self.hops()?;
        if *self.peek() != Tok::DotDot {
            return match first {
                None => Ok(Length::Star { min: 1, max: None }),
                Some(0) => Err(syntax(offset, "hop count must be at least 1")),
                Some(k) => Ok(Length::Exact(k)),
            };
        }
        self.bump();
        let min = first.unwrap_or(1);
        let max = self.hops()?;
        if min == 0 {
            return Err(syntax(offset, "hop count must be at least 1"));
        }
        if max.is_some_and(|m| m < min) {
            return Err(syntax(offset, "maximum hop count is below the minimum"));
        }
        Ok(Length::Star { min, max })
    }

    fn or(&mut self) -> Result<Predicate, QueryError> {
        let mut left = self.and()?;
        while self.at_keyword("OR") {
            self.bump();
            let right = self.and()?;
            left = Predicate::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Predicate, QueryError> {
        let mut left = self.atom()?;
        while self.at_keyword("AND") {
            self.bump();
            let right = self.atom()?;
            left = Predicate::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn atom(&mut self) -> Result<Predicate, QueryError> {
        if *self.peek() == Tok::LParen {
            self.bump();
            let inner = self.or()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(inner);
        }
        let (var, offset) = self.ident("a variable")?;
        self.uses.push(VarUse {
            name: var.clone(),
            offset,
        });
        if *self.peek() == Tok::Dot {
            self.bump();
            let key = match self.peek() {
                // property keys may collide with keywords
                Tok::Ident(s) => s.clone(),
                _ => return Err(self.unexpected("a property key")),
            };
            self.bump();
            let op = self.op()?;
            let value = self.literal()?;
            return Ok(Predicate::Cmp(Comparison::Property { var, key, op, value }));
        }
        let op = self.op()?;
        let (right, offset) = self.ident("a variable")?;
        self.uses.push(VarUse {
            name: right.clone(),
            offset,
        });
        Ok(Predicate::Cmp(Comparison::Identity { left: var, op, right }))
    }

    fn op(&mut self) -> Result<CmpOp, QueryError> {
        match self.peek() {
            Tok::Eq => {
                self.bump();
                Ok(CmpOp::Eq)
            }
            Tok::Neq => {
                self.bump();
                Ok(CmpOp::Neq)
            }
            _ => Err(self.unexpected("`=` or `<>`")),
        }
    }

    fn literal(&mut self) -> Result<Scalar, QueryError> {
        let offset = self.offset();
        let value = match self.bump() {
            Tok::Str(s) => Scalar::Str(s),
            Tok::Int(n) => Scalar::Int(n),
            Tok::Dash => match self.bump() {
                Tok::Int(n) => Scalar::Int(-n),
                _ => return Err(syntax(offset, "expected an integer after `-`")),
            },
            Tok::Ident(s) if s.eq_ignore_ascii_case("true") => Scalar::Bool(true),
            Tok::Ident(s) if s.eq_ignore_ascii_case("false") => Scalar::Bool(false),
            other => {
                return Err(syntax(
                    offset,
                    format!("expected a literal, found {}", other.describe()),
                ))
            }
        };
        Ok(value)
    }
}

const RESERVED: [&str; 5] = ["MATCH", "WHERE", "RETURN", "AND", "OR"];

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

/// Parses and validates a query.
pub fn parse_query(text: &str) -> Result<QueryAst, QueryError> {
    let mut parser = Parser {
        tokens: lex(text)?,
        pos: 0,
        uses: Vec::new(),
    };
    let ast = parser.query()?;

    #[derive(PartialEq)]
    enum Binding {
        Node,
        Rel,
        Path,
    }
    let mut bound: HashMap<&str, Binding> = HashMap::new();
    for node in &ast.nodes {
        if let Some(v) = &node.var {
            bound.insert(v, Binding::Node);
        }
    }
    for rel in &ast.rels {
        if let Some(v) = &rel.var {
            if bound.insert(v, Binding::Rel).is_some() {
                return Err(QueryError::Conflict(v.clone()));
            }
        }
    }
    if let Some(p) = &ast.path_var {
        if bound.insert(p, Binding::Path).is_some() {
            return Err(QueryError::Conflict(p.clone()));
        }
    }

    let in_predicate = parser.uses.len() - 1;
    for (i, VarUse { name, offset }) in parser.uses.iter().enumerate() {
        match bound.get(name.as_str()) {
            None => {
                return Err(QueryError::UnboundVariable {
                    name: name.clone(),
                    offset: *offset,
                })
            }
            Some(Binding::Rel) => {
                return Err(QueryError::RelationshipVariable {
                    name: name.clone(),
                    offset: *offset,
                })
            }
            Some(Binding::Path) if i < in_predicate => {
                return Err(QueryError::PathInPredicate {
                    name: name.clone(),
                    offset: *offset,
                })
            }
            _ => {}
        }
    }
    Ok(ast)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_offset(text: &str) -> usize {
        match parse_query(text) {
            Err(QueryError::Syntax { offset, .. }) => offset,
            other => panic!("expected a syntax error, got {other:?}"),
        }
    }

    #[test]
    fn tls_listing_shape() {
        let ast = parse_query(
            "MATCH p=(n:Node)--(h:HttpEndpoint)--\n  (te:TransportEncryption) WHERE te.enabled = \n  false OR te.tlsVersion <> \"TLS1_2\" RETURN p",
        )
        .unwrap();
        assert_eq!(ast.path_var.as_deref(), Some("p"));
        assert_eq!(ast.nodes.len(), 3);
        assert!(ast
            .rels
            .iter()
            .all(|r| r.direction == Direction::Undirected && r.kind.is_none() && r.length == Length::One));
        assert!(matches!(ast.predicate, Some(Predicate::Or(..))));
        assert_eq!(ast.return_item, "p");
    }

    #[test]
    fn single_node() {
        let ast = parse_query("MATCH (n) RETURN n").unwrap();
        assert_eq!(
            ast.nodes,
            vec![NodePattern {
                var: Some("n".into()),
                label: None
            }]
        );
        assert!(ast.rels.is_empty());
        assert!(ast.predicate.is_none());
    }

    #[test]
    fn unclosed_parenthesis() {
        assert_eq!(err_offset("MATCH (n RETURN n"), 9);
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let a = parse_query("match (n:Storage) where n.name = 'x' return n").unwrap();
        let b = parse_query("MATCH (n:Storage) WHERE n.name = \"x\" RETURN n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn relationship_forms() {
        let ast =
            parse_query("MATCH (a)<-[:SOURCE]-(b)-[:DFG*]->(c)-[*2]-(d)-[]-(e)-[r:TO*2..4]->(f) RETURN a").unwrap();
        let rels: Vec<_> = ast.rels.iter().map(|r| (r.direction, r.kind, r.length)).collect();
        assert_eq!(
            rels,
            vec![
                (Direction::Left, Some(EdgeType::Source), Length::One),
                (
                    Direction::Right,
                    Some(EdgeType::Dfg),
                    Length::Star { min: 1, max: None }
                ),
                (Direction::Undirected, None, Length::Exact(2)),
                (Direction::Undirected, None, Length::One),
                (
                    Direction::Right,
                    Some(EdgeType::To),
                    Length::Star { min: 2, max: Some(4) }
                ),
            ]
        );
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let ast = parse_query("MATCH (a)--(b) WHERE a.x = 1 OR a.y = 2 AND b.z = -3 RETURN a").unwrap();
        match ast.predicate.unwrap() {
            Predicate::Or(_, right) => assert!(matches!(*right, Predicate::And(..))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors() {
        assert_eq!(err_offset("MATCH (a)-[:NOPE]-(b) RETURN a"), 12);
        assert_eq!(err_offset("MATCH (a)<-->(b) RETURN a"), 11);
        assert_eq!(err_offset("MATCH (a)-[*0]-(b) RETURN a"), 12);
        assert_eq!(err_offset("MATCH (a)-[*3..2]-(b) RETURN a"), 12);
        assert_eq!(err_offset("MATCH (a) WHERE a.x = \"open RETURN a"), 22);
        assert_eq!(err_offset("MATCH (a) RETURN a extra"), 19);
        assert_eq!(err_offset("MATCH (a) RETURN"), 16);
        assert_eq!(err_offset("MATCH (a) # RETURN a"), 10);
        assert!(matches!(
            parse_query("MATCH (a) WHERE b.x = 1 RETURN a"),
            Err(QueryError::UnboundVariable { ref name, offset: 16 }) if name == "b"
        ));
        assert!(matches!(
            parse_query("MATCH (a)-[r]-(b) RETURN r"),
            Err(QueryError::RelationshipVariable { .. })
        ));
        assert!(matches!(
            parse_query("MATCH p=(a)--(b) WHERE p.x = 1 RETURN a"),
            Err(QueryError::PathInPredicate { .. })
        ));
        assert!(matches!(
            parse_query("MATCH p=(p) RETURN p"),
            Err(QueryError::Conflict(_))
        ));
    }

    #[test]
    fn display_reparses() {
        for text in [
            "MATCH p=(r1:CloudResource)<-[:SOURCE]-(rq:ObjectStorageRequest)-[:TO]->(r2:Storage)--(:HttpEndpoint)-[:AUTHENTICITY]-(:NoAuthentication) WHERE rq.type = \"append\" RETURN p",
            "MATCH (a)-[x:DFG*2..]->(b) WHERE (a.k = 1 OR a.k = 2) AND a <> b AND b.s = \"q\\\"t\" RETURN b",
            "MATCH (a)-[*1..3]-(b) WHERE a.x = true OR (a.y = false OR a.z <> -1) RETURN a",
        ] {
            let ast = parse_query(text).unwrap();
            assert_eq!(parse_query(&ast.to_string()).unwrap(), ast, "{text}");
        }
    }
}
