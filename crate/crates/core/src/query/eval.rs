use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::ast::{CmpOp, Comparison, Direction, Predicate, QueryAst};
use crate::graph::{EdgeId, EdgeType, Node, NodeId, Path, PropertyGraph, Scalar};

/// Default upper bound for `*` segments without an explicit maximum.
pub const DEFAULT_STAR_MAX: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub star_max: u32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            star_max: DEFAULT_STAR_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// Node variables of the pattern and the nodes they bind.
    pub bindings: BTreeMap<String, NodeId>,
    /// The matched path, present when the query binds a path variable.
    pub path: Option<Path>,
    /// The node at each pattern position, anonymous ones included; tells
    /// apart matches that split one path differently.
    pub positions: Vec<NodeId>,
}

/// Value of `key` on a node; `name` falls back to the display name.
pub fn property_value(node: &Node, key: &str) -> Option<Scalar> {
    match node.property(key) {
        Some(v) => Some(v.clone()),
        None if key == "name" => Some(Scalar::Str(node.name.clone())),
        None => None,
    }
}

/// One step of the search: expand `rel` from its left node to its right
/// node, or the other way round when `leftward`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expansion {
    pub rel: usize,
    pub leftward: bool,
    pub min: u32,
    pub max: u32,
}

/// The evaluation plan: a seed node pattern and the expansions from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub seed: usize,
    /// Label-index candidate count per node pattern.
    pub candidates: Vec<usize>,
    pub expansions: Vec<Expansion>,
    patterns: Vec<String>,
    rels: Vec<String>,
}

impl Plan {
    pub fn seed_pattern(&self) -> &str {
        &self.patterns[self.seed]
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "seed: pattern node {} {} ({} candidates)",
            self.seed, self.patterns[self.seed], self.candidates[self.seed]
        )?;
        for (i, (pattern, count)) in self.patterns.iter().zip(&self.candidates).enumerate() {
            writeln!(f, "  node {i} {pattern}: {count}")?;
        }
        for e in &self.expansions {
            let (from, to) = if e.leftward {
                (e.rel + 1, e.rel)
            } else {
                (e.rel, e.rel + 1)
            };
            writeln!(
                f,
                "expand node {from} -> node {to} via {} hops {}..{}",
                self.rels[e.rel], e.min, e.max
            )?;
        }
        Ok(())
    }
}

/// Chooses the seed (smallest candidate set, earliest on ties) and the
/// expansion order: rightwards from the seed, then leftwards.
pub fn explain(graph: &PropertyGraph, ast: &QueryAst, options: &EvalOptions) -> Plan {
    let candidates: Vec<usize> = ast
        .nodes
        .iter()
        .map(|n| match &n.label {
            None => graph.node_count(),
            Some(label) => graph.label_candidates(label).len(),
        })
        .collect();
    let seed = (0..candidates.len())
        .min_by_key(|&i| (candidates[i], i))
        .expect("a pattern has at least one node");
    let bounds = |rel: usize| ast.rels[rel].length.bounds(options.star_max);
    let mut expansions = Vec::with_capacity(ast.rels.len());
    for rel in seed..ast.rels.len() {
        let (min, max) = bounds(rel);
        expansions.push(Expansion {
            rel,
            leftward: false,
            min,
            max,
        });
    }
    for rel in (0..seed).rev() {
        let (min, max) = bounds(rel);
        expansions.push(Expansion {
            rel,
            leftward: true,
            min,
            max,
        });
    }
    Plan {
        seed,
        candidates,
        expansions,
        patterns: ast.nodes.iter().map(|n| n.to_string()).collect(),
        rels: ast.rels.iter().map(|r| r.to_string()).collect(),
    }
}

struct Search<'a> {
    graph: &'a PropertyGraph,
    ast: &'a QueryAst,
    plan: &'a Plan,
    /// Other positions bound to the same variable, per position.
    aliases: Vec<Vec<usize>>,
    /// First position of each node variable.
    var_pos: HashMap<&'a str, usize>,
    assign: Vec<Option<NodeId>>,
    /// Steps `(edge, node reached)` per relationship, in traversal order.
    segments: Vec<Vec<(EdgeId, NodeId)>>,
    used: Vec<EdgeId>,
    found: Vec<(Vec<NodeId>, Path)>,
}

impl<'a> Search<'a> {
    fn fits(&self, pos: usize, node: NodeId) -> bool {
        if let Some(label) = &self.ast.nodes[pos].label {
            if !self.graph.node_matches_label(node, label) {
                return false;
            }
        }
        self.aliases[pos]
            .iter()
            .all(|&q| self.assign[q].is_none_or(|bound| bound == node))
    }

    fn step(&mut self, k: usize) {
        let Some(&exp) = self.plan.expansions.get(k) else {
            self.finish();
            return;
        };
        let (from, to) = if exp.leftward {
            (exp.rel + 1, exp.rel)
        } else {
            (exp.rel, exp.rel + 1)
        };
        let start = self.assign[from].expect("expansions run outward from bound nodes");
        let rel = &self.ast.rels[exp.rel];
        let direction = if exp.leftward {
            rel.direction.reversed()
        } else {
            rel.direction
        };
        self.walk(k, exp, to, start, 0, direction, rel.kind);
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &mut self,
        k: usize,
        exp: Expansion,
        to: usize,
        at: NodeId,
        depth: u32,
        direction: Direction,
        kind: Option<EdgeType>,
    ) {
        if depth >= exp.min && depth > 0 && self.fits(to, at) {
            self.assign[to] = Some(at);
            self.step(k + 1);
            self.assign[to] = None;
        }
        if depth >= exp.max {
            return;
        }
        let graph = self.graph;
        let kind_ok = |t: EdgeType| kind.is_none_or(|want| want == t);
        let mut moves: Vec<(EdgeId, NodeId)> = Vec::new();
        if matches!(direction, Direction::Right | Direction::Undirected) {
            moves.extend(
                graph
                    .outgoing_edges(at)
                    .filter(|e| kind_ok(e.kind))
                    .map(|e| (e.id, e.to)),
            );
        }
        if matches!(direction, Direction::Left | Direction::Undirected) {
            // an undirected self-loop was already offered as outgoing
            let skip_loops = direction == Direction::Undirected;
            moves.extend(
                graph
                    .incoming_edges(at)
                    .filter(|e| kind_ok(e.kind) && !(skip_loops && e.from == e.to))
                    .map(|e| (e.id, e.from)),
            );
        }
        for (edge, next) in moves {
            if self.used.contains(&edge) {
                continue;
            }
            self.used.push(edge);
            self.segments[exp.rel].push((edge, next));
            self.walk(k, exp, to, next, depth + 1, direction, kind);
            self.segments[exp.rel].pop();
            self.used.pop();
        }
    }

    fn holds(&self, pred: &Predicate) -> bool {
        let node = |var: &str| self.assign[self.var_pos[var]].expect("all positions bound");
        match pred {
            Predicate::And(a, b) => self.holds(a) && self.holds(b),
            Predicate::Or(a, b) => self.holds(a) || self.holds(b),
            Predicate::Cmp(Comparison::Identity { left, op, right }) => {
                let same = node(left) == node(right);
                match op {
                    CmpOp::Eq => same,
                    CmpOp::Neq => !same,
                }
            }
            Predicate::Cmp(Comparison::Property { var, key, op, value }) => {
                let n = self.graph.node(node(var)).expect("bound nodes exist");
                // a missing property fails every comparison
                match (property_value(n, key), op) {
                    (None, _) => false,
                    (Some(v), CmpOp::Eq) => v == *value,
                    (Some(v), CmpOp::Neq) => v != *value,
                }
            }
        }
    }

    fn finish(&mut self) {
        if let Some(pred) = &self.ast.predicate {
            if !self.holds(pred) {
                return;
            }
        }
        let assign: Vec<NodeId> = self.assign.iter().map(|n| n.expect("all positions bound")).collect();
        let mut path = Path::start(assign[0]);
        for (rel, steps) in self.segments.iter().enumerate() {
            let leftward = self.plan.expansions.iter().any(|e| e.rel == rel && e.leftward);
            let ordered: Vec<(EdgeId, NodeId)> = if leftward {
                // steps run from the right node; replay them from the left
                let origin = assign[rel + 1];
                (0..steps.len())
                    .rev()
                    .map(|j| (steps[j].0, if j == 0 { origin } else { steps[j - 1].1 }))
                    .collect()
            } else {
                steps.clone()
            };
            for (edge, next) in ordered {
                let prev = *path.nodes.last().expect("path starts with a node");
                let e = self.graph.edge(edge).expect("matched edges exist");
                path.forward.push(e.from == prev && e.to == next);
                path.edges.push(edge);
                path.nodes.push(next);
            }
        }
        self.found.push((assign, path));
    }
}

/// Evaluates a validated query. Results are ordered by the nodes bound to
/// the pattern positions, then by the full path.
pub fn evaluate(graph: &PropertyGraph, ast: &QueryAst, options: &EvalOptions) -> Vec<MatchResult> {
    let plan = explain(graph, ast, options);
    let mut var_pos: HashMap<&str, usize> = HashMap::new();
    let mut aliases = vec![Vec::new(); ast.nodes.len()];
    for (i, node) in ast.nodes.iter().enumerate() {
        if let Some(v) = &node.var {
            for (j, other) in ast.nodes.iter().enumerate() {
                if j != i && other.var.as_deref() == Some(v) {
                    aliases[i].push(j);
                }
            }
            var_pos.entry(v.as_str()).or_insert(i);
        }
    }

    let mut search = Search {
        graph,
        ast,
        plan: &plan,
        aliases,
        var_pos,
        assign: vec![None; ast.nodes.len()],
        segments: vec![Vec::new(); ast.rels.len()],
        used: Vec::new(),
        found: Vec::new(),
    };
    let seeds = match &ast.nodes[plan.seed].label {
        Some(label) => graph.label_candidates(label),
        None => graph.nodes().map(|n| n.id).collect(),
    };
    for seed in seeds {
        if search.fits(plan.seed, seed) {
            search.assign[plan.seed] = Some(seed);
            search.step(0);
            search.assign[plan.seed] = None;
        }
    }

    let mut found = search.found;
    found.sort_by(|a, b| (&a.0, &a.1.nodes, &a.1.edges).cmp(&(&b.0, &b.1.nodes, &b.1.edges)));
    // A self-loop at a segment boundary can be split either way; both
    // splits bind the same positions and path, so they are one match.
    found.dedup_by(|a, b| a.0 == b.0 && a.1.nodes == b.1.nodes && a.1.edges == b.1.edges);
    found
        .into_iter()
        .map(|(assign, path)| MatchResult {
            bindings: ast
                .nodes
                .iter()
                .zip(&assign)
                .filter_map(|(n, &id)| n.var.clone().map(|v| (v, id)))
                .collect(),
            path: ast.path_var.is_some().then_some(path),
            positions: assign,
        })
        .collect()
}
