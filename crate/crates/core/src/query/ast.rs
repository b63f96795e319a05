use std::fmt;

use crate::graph::{EdgeType, Scalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAst {
    pub path_var: Option<String>,
    /// Node patterns; `rels[i]` connects `nodes[i]` and `nodes[i + 1]`.
    pub nodes: Vec<NodePattern>,
    pub rels: Vec<RelPattern>,
    pub predicate: Option<Predicate>,
    pub return_item: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodePattern {
    pub var: Option<String>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `<-[]-`: from `nodes[i + 1]` to `nodes[i]`.
    Left,
    /// `-[]->`: from `nodes[i]` to `nodes[i + 1]`.
    Right,
    Undirected,
}

impl Direction {
    pub fn reversed(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Undirected => Direction::Undirected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Length {
    One,
    /// `*`, `*a..b`; a missing maximum defers to the evaluation options.
    Star {
        min: u32,
        max: Option<u32>,
    },
    /// `*k`
    Exact(u32),
}

impl Length {
    /// Inclusive hop bounds under a default star maximum.
    pub fn bounds(self, star_max: u32) -> (u32, u32) {
        match self {
            Length::One => (1, 1),
            Length::Exact(k) => (k, k),
            Length::Star { min, max } => (min, max.unwrap_or(star_max)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelPattern {
    pub var: Option<String>,
    pub kind: Option<EdgeType>,
    pub direction: Direction,
    pub length: Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Neq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Comparison {
    Property {
        var: String,
        key: String,
        op: CmpOp,
        value: Scalar,
    },
    Identity {
        left: String,
        op: CmpOp,
        right: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Cmp(Comparison),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Neq => "<>",
        })
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, value: &Scalar) -> fmt::Result {
    match value {
        Scalar::Str(s) => {
            f.write_str("\"")?;
            for c in s.chars() {
                match c {
                    '"' => f.write_str("\\\"")?,
                    '\\' => f.write_str("\\\\")?,
                    '\n' => f.write_str("\\n")?,
                    '\t' => f.write_str("\\t")?,
                    c => write!(f, "{c}")?,
                }
            }
            f.write_str("\"")
        }
        other => write!(f, "{other}"),
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, p: &Predicate, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({p})")
    } else {
        write!(f, "{p}")
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Cmp(Comparison::Property { var, key, op, value }) => {
                write!(f, "{var}.{key} {op} ")?;
                write_literal(f, value)
            }
            Predicate::Cmp(Comparison::Identity { left, op, right }) => write!(f, "{left} {op} {right}"),
            // Connectives are left-associative and OR binds looser than AND,
            // so parenthesize whatever would otherwise regroup on reparse.
            Predicate::And(a, b) => {
                write_operand(f, a, matches!(**a, Predicate::Or(..)))?;
                f.write_str(" AND ")?;
                write_operand(f, b, !matches!(**b, Predicate::Cmp(_)))
            }
            Predicate::Or(a, b) => {
                write_operand(f, a, false)?;
                f.write_str(" OR ")?;
                write_operand(f, b, matches!(**b, Predicate::Or(..)))
            }
        }
    }
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        if let Some(v) = &self.var {
            f.write_str(v)?;
        }
        if let Some(l) = &self.label {
            write!(f, ":{l}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for RelPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut body = String::new();
        if let Some(v) = &self.var {
            body.push_str(v);
        }
        if let Some(k) = self.kind {
            body.push(':');
            body.push_str(k.as_str());
        }
        match self.length {
            Length::One => {}
            Length::Exact(k) => body.push_str(&format!("*{k}")),
            Length::Star { min: 1, max: None } => body.push('*'),
            Length::Star { min, max: None } => body.push_str(&format!("*{min}..")),
            Length::Star { min, max: Some(max) } => body.push_str(&format!("*{min}..{max}")),
        }
        let body = if body.is_empty() {
            String::new()
        } else {
            format!("[{body}]")
        };
        match self.direction {
            Direction::Left => write!(f, "<-{body}-"),
            Direction::Right => write!(f, "-{body}->"),
            Direction::Undirected => write!(f, "-{body}-"),
        }
    }
}

impl fmt::Display for QueryAst {
    /// Canonical text that parses back to the same AST.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MATCH ")?;
        if let Some(p) = &self.path_var {
            write!(f, "{p}=")?;
        }
        write!(f, "{}", self.nodes[0])?;
        for (rel, node) in self.rels.iter().zip(&self.nodes[1..]) {
            write!(f, "{rel}{node}")?;
        }
        if let Some(pred) = &self.predicate {
            write!(f, " WHERE {pred}")?;
        }
        write!(f, " RETURN {}", self.return_item)
    }
}
