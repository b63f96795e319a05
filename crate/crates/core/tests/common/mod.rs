//! Fixture helpers and independent reference matchers for the query engine.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use cloudpg_core::props;
use cloudpg_core::query::{CmpOp, Comparison, Direction, Predicate};
use cloudpg_core::{
    build, evaluate, EdgeId, EdgeType, EvalOptions, Node, NodeId, Ontology, PropertyGraph, QueryAst, Scalar,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_manifest(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .join("manifest.yaml")
}

pub fn faulty() -> &'static PropertyGraph {
    static GRAPH: OnceLock<PropertyGraph> = OnceLock::new();
    GRAPH.get_or_init(|| {
        build(fixture_manifest("bookinfo"))
            .expect("faulty fixture builds")
            .graph
    })
}

pub fn clean() -> &'static PropertyGraph {
    static GRAPH: OnceLock<PropertyGraph> = OnceLock::new();
    GRAPH.get_or_init(|| {
        build(fixture_manifest("bookinfo-clean"))
            .expect("clean fixture builds")
            .graph
    })
}

pub fn ontology() -> Arc<Ontology> {
    static ONTOLOGY: OnceLock<Arc<Ontology>> = OnceLock::new();
    ONTOLOGY.get_or_init(|| Arc::new(Ontology::bundled())).clone()
}

/// One match as (pattern positions, named bindings, path nodes, path edges).
pub type Row = (Vec<NodeId>, BTreeMap<String, NodeId>, Vec<NodeId>, Vec<EdgeId>);

fn bindings_of(ast: &QueryAst, assign: &[NodeId]) -> BTreeMap<String, NodeId> {
    ast.nodes
        .iter()
        .zip(assign)
        .filter_map(|(n, &id)| n.var.clone().map(|v| (v, id)))
        .collect()
}

/// Engine results as rows, in engine order; requires a path variable.
pub fn engine(graph: &PropertyGraph, ast: &QueryAst, star_max: u32) -> Vec<Row> {
    evaluate(graph, ast, &EvalOptions { star_max })
        .into_iter()
        .map(|r| {
            let path = r.path.expect("query binds a path");
            (r.positions, r.bindings, path.nodes, path.edges)
        })
        .collect()
}

/// Walks parent links explicitly; `Node` is universal and `Expression`
/// covers the two expression subclasses of the code graph.
pub fn label_oracle(ontology: &Ontology, class: &str, label: &str) -> bool {
    if label == "Node" {
        return true;
    }
    let mut current = Some(class.to_string());
    while let Some(c) = current {
        if c == label {
            return true;
        }
        current = match c.as_str() {
            "CallExpression" | "Literal" => Some("Expression".to_string()),
            _ => ontology.class(&c).and_then(|k| k.parent.clone()),
        };
    }
    false
}

fn value_of(node: &Node, key: &str) -> Option<Scalar> {
    if let Some(v) = node.properties.get(key) {
        return Some(v.clone());
    }
    (key == "name").then(|| Scalar::Str(node.name.clone()))
}

fn holds(graph: &PropertyGraph, ast: &QueryAst, assign: &[NodeId], pred: &Predicate) -> bool {
    let bound = |var: &str| {
        let i = ast
            .nodes
            .iter()
            .position(|n| n.var.as_deref() == Some(var))
            .expect("bound var");
        assign[i]
    };
    match pred {
        Predicate::And(a, b) => holds(graph, ast, assign, a) && holds(graph, ast, assign, b),
        Predicate::Or(a, b) => holds(graph, ast, assign, a) || holds(graph, ast, assign, b),
        Predicate::Cmp(Comparison::Identity { left, op, right }) => {
            let same = bound(left) == bound(right);
            match op {
                CmpOp::Eq => same,
                CmpOp::Neq => !same,
            }
        }
        Predicate::Cmp(Comparison::Property { var, key, op, value }) => {
            match value_of(graph.node(bound(var)).unwrap(), key) {
                None => false,
                Some(v) => match op {
                    CmpOp::Eq => &v == value,
                    CmpOp::Neq => &v != value,
                },
            }
        }
    }
}

/// Checks labels, repeated variables and the predicate for a full
/// assignment of pattern positions.
fn accept(graph: &PropertyGraph, ast: &QueryAst, assign: &[NodeId]) -> bool {
    for (i, pattern) in ast.nodes.iter().enumerate() {
        let node = graph.node(assign[i]).unwrap();
        if let Some(label) = &pattern.label {
            if !label_oracle(graph.ontology(), &node.class, label) {
                return false;
            }
        }
        if let Some(var) = &pattern.var {
            let first = ast.nodes.iter().position(|n| n.var.as_ref() == Some(var)).unwrap();
            if assign[first] != assign[i] {
                return false;
            }
        }
    }
    ast.predicate.as_ref().is_none_or(|p| holds(graph, ast, assign, p))
}

/// A walk of one relationship pattern: visited nodes and traversed edges.
type Walk = (Vec<NodeId>, Vec<EdgeId>);

fn step_options(direction: Direction) -> &'static [bool] {
    // true: traverse from -> to
    match direction {
        Direction::Right => &[true],
        Direction::Left => &[false],
        Direction::Undirected => &[true, false],
    }
}

/// Every walk matching one relationship pattern, found by trying all edge
/// sequences and orientations of each admissible length.
fn all_walks(
    graph: &PropertyGraph,
    kind: Option<EdgeType>,
    direction: Direction,
    min: u32,
    max: u32,
) -> BTreeSet<Walk> {
    let edges: Vec<_> = graph.edges().filter(|e| kind.is_none_or(|k| e.kind == k)).collect();
    let mut walks = BTreeSet::new();
    for len in min..=max {
        let len = len as usize;
        if edges.is_empty() || len > edges.len() {
            continue;
        }
        let mut idx = vec![0usize; len];
        loop {
            let distinct = idx.iter().collect::<BTreeSet<_>>().len() == len;
            if distinct {
                let orientations = step_options(direction);
                let mut dirs = vec![0usize; len];
                loop {
                    let mut nodes = Vec::with_capacity(len + 1);
                    let mut ok = true;
                    for (s, &e) in idx.iter().enumerate() {
                        let edge = edges[e];
                        let (a, b) = if orientations[dirs[s]] {
                            (edge.from, edge.to)
                        } else {
                            (edge.to, edge.from)
                        };
                        match nodes.last() {
                            None => {
                                nodes.push(a);
                                nodes.push(b);
                            }
                            Some(&last) if last == a => nodes.push(b),
                            Some(_) => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        walks.insert((nodes, idx.iter().map(|&e| edges[e].id).collect()));
                    }
                    if !advance(&mut dirs, orientations.len()) {
                        break;
                    }
                }
            }
            if !advance(&mut idx, edges.len()) {
                break;
            }
        }
    }
    walks
}

fn advance(counter: &mut [usize], base: usize) -> bool {
    for digit in counter.iter_mut().rev() {
        *digit += 1;
        if *digit < base {
            return true;
        }
        *digit = 0;
    }
    false
}

/// Exhaustive reference: the product of all walks per relationship,
/// filtered by joins, edge uniqueness, labels, variables and predicate.
/// Rows are (pattern positions, path nodes, path edges), sorted.
pub fn brute_force(graph: &PropertyGraph, ast: &QueryAst, star_max: u32) -> Vec<Row> {
    let mut rows = BTreeSet::new();
    if ast.rels.is_empty() {
        for n in graph.nodes() {
            if accept(graph, ast, &[n.id]) {
                rows.insert((vec![n.id], bindings_of(ast, &[n.id]), vec![n.id], Vec::new()));
            }
        }
        return rows.into_iter().collect();
    }
    let per_rel: Vec<Vec<Walk>> = ast
        .rels
        .iter()
        .map(|r| {
            let (min, max) = r.length.bounds(star_max);
            all_walks(graph, r.kind, r.direction, min, max).into_iter().collect()
        })
        .collect();
    let mut chosen = Vec::with_capacity(per_rel.len());
    join(graph, ast, &per_rel, &mut chosen, &mut rows);
    rows.into_iter().collect()
}

/// Nested-loop join over the per-relationship walk lists.
fn join<'a>(
    graph: &PropertyGraph,
    ast: &QueryAst,
    per_rel: &'a [Vec<Walk>],
    chosen: &mut Vec<&'a Walk>,
    rows: &mut BTreeSet<Row>,
) {
    if chosen.len() == per_rel.len() {
        let edges: Vec<EdgeId> = chosen.iter().flat_map(|w| w.1.iter().copied()).collect();
        if edges.iter().collect::<BTreeSet<_>>().len() != edges.len() {
            return;
        }
        let mut assign: Vec<NodeId> = chosen.iter().map(|w| w.0[0]).collect();
        assign.push(*chosen.last().unwrap().0.last().unwrap());
        if accept(graph, ast, &assign) {
            let mut nodes = vec![assign[0]];
            for w in chosen.iter() {
                nodes.extend_from_slice(&w.0[1..]);
            }
            rows.insert((assign.clone(), bindings_of(ast, &assign), nodes, edges));
        }
        return;
    }
    for walk in &per_rel[chosen.len()] {
        if chosen.last().is_some_and(|prev| prev.0.last() != walk.0.first()) {
            continue;
        }
        chosen.push(walk);
        join(graph, ast, per_rel, chosen, rows);
        chosen.pop();
    }
}

/// Depth-first reference that always starts at the first pattern node and
/// extends relationship by relationship to the right.
pub fn naive(graph: &PropertyGraph, ast: &QueryAst, star_max: u32) -> Vec<Row> {
    struct Walker<'a> {
        graph: &'a PropertyGraph,
        ast: &'a QueryAst,
        star_max: u32,
        assign: Vec<NodeId>,
        nodes: Vec<NodeId>,
        edges: Vec<EdgeId>,
        rows: BTreeSet<Row>,
    }

    impl Walker<'_> {
        fn rel(&mut self, r: usize) {
            if r == self.ast.rels.len() {
                if accept(self.graph, self.ast, &self.assign) {
                    self.rows.insert((
                        self.assign.clone(),
                        bindings_of(self.ast, &self.assign),
                        self.nodes.clone(),
                        self.edges.clone(),
                    ));
                }
                return;
            }
            let (min, max) = self.ast.rels[r].length.bounds(self.star_max);
            self.hop(r, 0, min, max);
        }

        fn hop(&mut self, r: usize, done: u32, min: u32, max: u32) {
            let here = *self.nodes.last().unwrap();
            if done >= min {
                self.assign.push(here);
                self.rel(r + 1);
                self.assign.pop();
            }
            if done == max {
                return;
            }
            let rel = &self.ast.rels[r];
            let mut next = Vec::new();
            for e in self.graph.edges() {
                if rel.kind.is_some_and(|k| k != e.kind) || self.edges.contains(&e.id) {
                    continue;
                }
                let forward = e.from == here && matches!(rel.direction, Direction::Right | Direction::Undirected);
                let backward = e.to == here && matches!(rel.direction, Direction::Left | Direction::Undirected);
                if forward {
                    next.push((e.id, e.to));
                }
                if backward && !(forward && e.from == e.to) {
                    next.push((e.id, e.from));
                }
            }
            for (edge, node) in next {
                self.edges.push(edge);
                self.nodes.push(node);
                self.hop(r, done + 1, min, max);
                self.nodes.pop();
                self.edges.pop();
            }
        }
    }

    let mut walker = Walker {
        graph,
        ast,
        star_max,
        assign: Vec::new(),
        nodes: Vec::new(),
        edges: Vec::new(),
        rows: BTreeSet::new(),
    };
    for n in graph.nodes() {
        walker.assign = vec![n.id];
        walker.nodes = vec![n.id];
        walker.rel(0);
    }
    walker.rows.into_iter().collect()
}

/// A random graph of at most 12 nodes over a small class pool, with a few
/// properties that the generated predicates can test.
pub fn random_graph(rng: &mut ChaCha8Rng) -> PropertyGraph {
    const CLASSES: [&str; 10] = [
        "VirtualMachine",
        "Container",
        "ObjectStorage",
        "HttpEndpoint",
        "TransportEncryption",
        "GeoLocation",
        "Application",
        "Expression",
        "CallExpression",
        "Literal",
    ];
    const KINDS: [EdgeType; 4] = [EdgeType::Dfg, EdgeType::To, EdgeType::Source, EdgeType::RunsOn];
    let mut graph = PropertyGraph::new(ontology());
    let n = rng.gen_range(3..=12);
    let mut ids = Vec::new();
    for _ in 0..n {
        let class = *CLASSES.choose(rng).unwrap();
        let name = ["a", "b", "c"].choose(rng).unwrap().to_string();
        let mut p = props! {};
        let coin = |rng: &mut ChaCha8Rng| rng.gen_bool(0.6);
        match class {
            "TransportEncryption" => {
                if coin(rng) {
                    p.insert("enabled".into(), Scalar::Bool(rng.gen()));
                }
                if coin(rng) {
                    p.insert("tlsVersion".into(), (*["TLS1_1", "TLS1_2"].choose(rng).unwrap()).into());
                }
            }
            "ObjectStorage" if coin(rng) => {
                p.insert("public_access".into(), Scalar::Bool(rng.gen()));
            }
            "GeoLocation" if coin(rng) => {
                p.insert("region".into(), (*["us", "eu"].choose(rng).unwrap()).into());
            }
            "Expression" | "CallExpression" | "Literal" if coin(rng) => {
                p.insert("tier".into(), Scalar::Int(rng.gen_range(0..3)));
            }
            _ => {}
        }
        ids.push(graph.add_node(class, name.as_str(), p).expect("valid node"));
    }
    let m = rng.gen_range(n..=(2 * n).min(16));
    for _ in 0..m {
        let from = *ids.choose(rng).unwrap();
        let to = *ids.choose(rng).unwrap();
        let kind = *KINDS.choose(rng).unwrap();
        graph.add_edge(from, to, kind, props! {}).expect("valid edge");
    }
    graph
}

/// Query text over the vocabulary of [`random_graph`]; always binds `p`.
pub fn random_query(rng: &mut ChaCha8Rng) -> String {
    const LABELS: [&str; 9] = [
        "Node",
        "Compute",
        "Storage",
        "CloudResource",
        "HttpEndpoint",
        "TransportEncryption",
        "GeoLocation",
        "Expression",
        "Application",
    ];
    const TYPES: [&str; 3] = ["DFG", "TO", "RUNS_ON"];
    let k = rng.gen_range(1..=4);
    let mut vars = Vec::new();
    let mut text = String::from("MATCH p=");
    for i in 0..k {
        if i > 0 {
            let mut body = String::new();
            if rng.gen_bool(0.35) {
                body.push(':');
                body.push_str(TYPES.choose(rng).unwrap());
            }
            match rng.gen_range(0..4) {
                0 => body.push_str(&format!("*{}", rng.gen_range(1..=2))),
                1 => body.push('*'),
                2 => body.push_str(&format!("*{}..{}", 1, rng.gen_range(1..=3))),
                _ => {}
            }
            let body = if body.is_empty() && rng.gen_bool(0.5) {
                String::new()
            } else {
                format!("[{body}]")
            };
            text.push_str(&match rng.gen_range(0..3) {
                0 => format!("-{body}->"),
                1 => format!("<-{body}-"),
                _ => format!("-{body}-"),
            });
        }
        let var = match rng.gen_range(0..4) {
            0 => None,
            1 if !vars.is_empty() => Some(vars.choose(rng).cloned().unwrap()),
            _ => {
                let v = format!("v{i}");
                vars.push(v.clone());
                Some(v)
            }
        };
        let label = rng.gen_bool(0.35).then(|| *LABELS.choose(rng).unwrap());
        text.push('(');
        if let Some(v) = &var {
            text.push_str(v);
        }
        if let Some(l) = label {
            text.push(':');
            text.push_str(l);
        }
        text.push(')');
    }
    if !vars.is_empty() && rng.gen_bool(0.4) {
        let n = rng.gen_range(1..=2);
        let mut parts = Vec::new();
        for _ in 0..n {
            let v = vars.choose(rng).unwrap();
            let op = if rng.gen_bool(0.5) { "=" } else { "<>" };
            parts.push(match rng.gen_range(0..6) {
                0 => format!("{v}.name {op} \"{}\"", ["a", "b", "c"].choose(rng).unwrap()),
                1 => format!("{v}.enabled {op} {}", rng.gen_bool(0.5)),
                2 => format!("{v}.tlsVersion {op} \"TLS1_2\""),
                3 => format!("{v}.region {op} \"us\""),
                4 => format!("{v}.tier {op} {}", rng.gen_range(0..3)),
                _ => format!("{v} {op} {}", vars.choose(rng).unwrap()),
            });
        }
        text.push_str(" WHERE ");
        for (i, part) in parts.iter().enumerate() {
            if i > 0 {
                text.push_str(if rng.gen_bool(0.5) { " AND " } else { " OR " });
            }
            text.push_str(part);
        }
    }
    text.push_str(" RETURN p");
    text
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
