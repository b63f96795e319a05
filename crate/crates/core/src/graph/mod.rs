//! Labeled property graph holding the cloud property graph.
//!
//! Nodes carry a single concrete class (an ontology class or one of the
//! code-graph classes in [`CODE_CLASSES`]); label matching resolves ontology
//! inheritance at query time via [`PropertyGraph::node_matches_label`].
//! There is no deletion, so ids are never reused.

mod export;

pub use export::{export_graph, import_graph};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{Ontology, ScalarKind};

/// Classes that exist in the code graph independently of the ontology.
pub const CODE_CLASSES: [&str; 5] = [
    "Application",
    "FunctionDeclaration",
    "CallExpression",
    "Expression",
    "Literal",
];

/// The label every node carries.
pub const UNIVERSAL_LABEL: &str = "Node";

/// Property keys accepted on every ontology-classed node.
pub const UNIVERSAL_KEYS: [&str; 2] = ["name", "provider_id"];

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("unknown node class `{0}`")]
    UnknownClass(String),
    #[error("property `{key}` is not allowed on class `{class}`")]
    DisallowedProperty { class: String, key: String },
    #[error("property `{key}` on class `{class}` must be a {expected}")]
    PropertyType {
        class: String,
        key: String,
        expected: ScalarKind,
    },
    #[error("edge endpoint {0} does not exist")]
    DanglingEndpoint(String),
    #[error("unregistered edge type `{0}`")]
    UnregisteredEdgeType(String),
    #[error("graph document schema violation: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

fn parse_prefixed(s: &str, prefix: char) -> Option<u64> {
    let digits = s.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

impl FromStr for NodeId {
    type Err = GraphError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_prefixed(s, 'n')
            .map(NodeId)
            .ok_or_else(|| GraphError::Schema(format!("malformed node id `{s}`")))
    }
}

impl FromStr for EdgeId {
    type Err = GraphError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_prefixed(s, 'e')
            .map(EdgeId)
            .ok_or_else(|| GraphError::Schema(format!("malformed edge id `{s}`")))
    }
}

/// Scalar property value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl Scalar {
    pub fn kind(&self) -> ScalarKind {
        match self {
            Scalar::Bool(_) => ScalarKind::Boolean,
            Scalar::Int(_) => ScalarKind::Integer,
            Scalar::Str(_) => ScalarKind::String,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Scalar::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Str(s.to_string())
    }
}

impl From<String> for Scalar {
    fn from(s: String) -> Self {
        Scalar::Str(s)
    }
}

impl From<bool> for Scalar {
    fn from(b: bool) -> Self {
        Scalar::Bool(b)
    }
}

impl From<i64> for Scalar {
    fn from(i: i64) -> Self {
        Scalar::Int(i)
    }
}

pub type Properties = BTreeMap<String, Scalar>;

/// Builds a [`Properties`] map from `key => value` pairs.
#[macro_export]
macro_rules! props {
    () => { $crate::graph::Properties::new() };
    ($($k:expr => $v:expr),+ $(,)?) => {{
        let mut p = $crate::graph::Properties::new();
        $( p.insert(($k).to_string(), $crate::graph::Scalar::from($v)); )+
        p
    }};
}

macro_rules! edge_types {
    ($($variant:ident => $token:literal),+ $(,)?) => {
        /// Registered edge types.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum EdgeType { $($variant),+ }

        impl EdgeType {
            pub const ALL: &'static [EdgeType] = &[$(EdgeType::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $(EdgeType::$variant => $token),+ }
            }
        }

        impl FromStr for EdgeType {
            type Err = GraphError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($token => Ok(EdgeType::$variant),)+
                    other => Err(GraphError::UnregisteredEdgeType(other.to_string())),
                }
            }
        }
    };
}

edge_types! {
    Dfg => "DFG",
    Eog => "EOG",
    To => "TO",
    Source => "SOURCE",
    RunsOn => "RUNS_ON",
    Authenticity => "AUTHENTICITY",
    TransportEncryption => "TRANSPORT_ENCRYPTION",
    AtRestEncryption => "AT_REST_ENCRYPTION",
    GeoLocation => "GEO_LOCATION",
    Offers => "OFFERS",
    HasEndpoint => "HAS_ENDPOINT",
    Proxies => "PROXIES",
    Targets => "TARGETS",
    UsesImage => "USES_IMAGE",
    PushesTo => "PUSHES_TO",
    Contains => "CONTAINS",
    Calls => "CALLS",
    LogsTo => "LOGS_TO",
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub class: String,
    pub name: String,
    pub properties: Properties,
}

impl Node {
    pub fn property(&self, key: &str) -> Option<&Scalar> {
        self.properties.get(key)
    }

    pub fn str_property(&self, key: &str) -> Option<&str> {
        self.properties.get(key).and_then(Scalar::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub kind: EdgeType,
    pub from: NodeId,
    pub to: NodeId,
    pub properties: Properties,
}

impl Edge {
    /// The endpoint opposite to `node`.
    pub fn other(&self, node: NodeId) -> NodeId {
        if self.from == node {
            self.to
        } else {
            self.from
        }
    }
}

/// Alternating node/edge sequence; `forward[i]` is true when `edges[i]`
/// points from `nodes[i]` to `nodes[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    pub forward: Vec<bool>,
}

impl Path {
    pub fn start(node: NodeId) -> Self {
        Path {
            nodes: vec![node],
            edges: Vec::new(),
            forward: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// The in-memory property graph.
#[derive(Debug, Clone)]
pub struct PropertyGraph {
    ontology: Arc<Ontology>,
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<EdgeId, Edge>,
    outgoing: HashMap<NodeId, Vec<EdgeId>>,
    incoming: HashMap<NodeId, Vec<EdgeId>>,
    by_type: BTreeMap<EdgeType, Vec<EdgeId>>,
    labels: BTreeMap<String, BTreeSet<NodeId>>,
    next_node: u64,
    next_edge: u64,
}

impl PropertyGraph {
    pub fn new(ontology: Arc<Ontology>) -> Self {
        PropertyGraph {
            ontology,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            outgoing: HashMap::new(),
            incoming: HashMap::new(),
            by_type: BTreeMap::new(),
            labels: BTreeMap::new(),
            next_node: 0,
            next_edge: 0,
        }
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn shared_ontology(&self) -> Arc<Ontology> {
        Arc::clone(&self.ontology)
    }

    pub fn is_valid_class(&self, class: &str) -> bool {
        self.ontology.contains(class) || CODE_CLASSES.contains(&class)
    }

    fn validate_node(&self, class: &str, properties: &Properties) -> Result<(), GraphError> {
        if !self.ontology.contains(class) {
            // Code-graph classes carry free-form properties.
            return if CODE_CLASSES.contains(&class) {
                Ok(())
            } else {
                Err(GraphError::UnknownClass(class.to_string()))
            };
        }
        let declared = self
            .ontology
            .data_properties(class)
            .map_err(|_| GraphError::UnknownClass(class.to_string()))?;
        for (key, value) in properties {
            if UNIVERSAL_KEYS.contains(&key.as_str()) {
                continue;
            }
            match declared.iter().find(|p| &p.name == key) {
                None => {
                    return Err(GraphError::DisallowedProperty {
                        class: class.to_string(),
                        key: key.clone(),
                    })
                }
                Some(p) if p.kind != value.kind() => {
                    return Err(GraphError::PropertyType {
                        class: class.to_string(),
                        key: key.clone(),
                        expected: p.kind,
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn add_node(
        &mut self,
        class: &str,
        name: impl Into<String>,
        properties: Properties,
    ) -> Result<NodeId, GraphError> {
        let id = NodeId(self.next_node);
        self.insert_node(Node {
            id,
            class: class.to_string(),
            name: name.into(),
            properties,
        })?;
        Ok(id)
    }

    fn insert_node(&mut self, node: Node) -> Result<(), GraphError> {
        self.validate_node(&node.class, &node.properties)?;
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::Schema(format!("duplicate node id {}", node.id)));
        }
        self.next_node = self.next_node.max(node.id.0 + 1);
        self.labels.entry(node.class.clone()).or_default().insert(node.id);
        self.nodes.insert(node.id, node);
        Ok(())
    }

    pub fn add_edge(
        &mut self,
        from: NodeId,
        to: NodeId,
        kind: EdgeType,
        properties: Properties,
    ) -> Result<EdgeId, GraphError> {
        let id = EdgeId(self.next_edge);
        self.insert_edge(Edge {
            id,
            kind,
            from,
            to,
            properties,
        })?;
        Ok(id)
    }

    /// Adds an edge by its textual type token.
    pub fn add_edge_str(
        &mut self,
        from: NodeId,
        to: NodeId,
        kind: &str,
        properties: Properties,
    ) -> Result<EdgeId, GraphError> {
        self.add_edge(from, to, kind.parse()?, properties)
    }

    fn insert_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        for end in [edge.from, edge.to] {
            if !self.nodes.contains_key(&end) {
                return Err(GraphError::DanglingEndpoint(end.to_string()));
            }
        }
        if self.edges.contains_key(&edge.id) {
            return Err(GraphError::Schema(format!("duplicate edge id {}", edge.id)));
        }
        self.next_edge = self.next_edge.max(edge.id.0 + 1);
        self.outgoing.entry(edge.from).or_default().push(edge.id);
        self.incoming.entry(edge.to).or_default().push(edge.id);
        self.by_type.entry(edge.kind).or_default().push(edge.id);
        self.edges.insert(edge.id, edge);
        Ok(())
    }

    /// Adds `from -kind-> to` unless such an edge already exists.
    /// Returns whether an edge was created.
    pub fn ensure_edge(&mut self, from: NodeId, to: NodeId, kind: EdgeType) -> Result<bool, GraphError> {
        if self.has_edge(from, to, kind) {
            return Ok(false);
        }
        self.add_edge(from, to, kind, Properties::new())?;
        Ok(true)
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId, kind: EdgeType) -> bool {
        self.outgoing_edges(from).any(|e| e.to == to && e.kind == kind)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    /// Edges in id order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn outgoing_edges(&self, node: NodeId) -> impl Iterator<Item = &Edge> {
        self.outgoing
            .get(&node)
            .into_iter()
            .flatten()
            .map(move |id| &self.edges[id])
    }

    pub fn incoming_edges(&self, node: NodeId) -> impl Iterator<Item = &Edge> {
        self.incoming
            .get(&node)
            .into_iter()
            .flatten()
            .map(move |id| &self.edges[id])
    }

    pub fn edges_of_type(&self, kind: EdgeType) -> impl Iterator<Item = &Edge> {
        self.by_type
            .get(&kind)
            .into_iter()
            .flatten()
            .map(move |id| &self.edges[id])
    }

    /// Targets of outgoing `kind` edges, in edge order.
    pub fn successors(&self, node: NodeId, kind: EdgeType) -> Vec<NodeId> {
        self.outgoing_edges(node)
            .filter(|e| e.kind == kind)
            .map(|e| e.to)
            .collect()
    }

    /// Sources of incoming `kind` edges, in edge order.
    pub fn predecessors(&self, node: NodeId, kind: EdgeType) -> Vec<NodeId> {
        self.incoming_edges(node)
            .filter(|e| e.kind == kind)
            .map(|e| e.from)
            .collect()
    }

    /// Nodes whose concrete class is exactly `class`, in id order.
    pub fn nodes_of_class(&self, class: &str) -> Vec<NodeId> {
        self.labels
            .get(class)
            .map(|ids| ids.iter().copied().collect())
            .unwrap_or_default()
    }

    /// Nodes of `class` or any subclass of it, in id order.
    pub fn nodes_of_kind(&self, label: &str) -> Vec<NodeId> {
        self.label_candidates(label)
    }

    pub fn find_node(&self, class: &str, name: &str) -> Option<NodeId> {
        self.labels
            .get(class)?
            .iter()
            .copied()
            .find(|id| self.nodes[id].name == name)
    }

    /// Finds a node by its recorded inventory id.
    pub fn find_by_provider_id(&self, provider_id: &str) -> Option<NodeId> {
        self.nodes
            .values()
            .find(|n| n.str_property("provider_id") == Some(provider_id))
            .map(|n| n.id)
    }

    /// Whether a node of concrete class `class` carries `label`.
    pub fn class_matches_label(&self, class: &str, label: &str) -> bool {
        if label == UNIVERSAL_LABEL || label == class {
            return true;
        }
        if label == "Expression" && matches!(class, "CallExpression" | "Literal") {
            return true;
        }
        self.ontology.contains(label) && self.ontology.is_subclass(class, label).unwrap_or(false)
    }

    pub fn node_matches_label(&self, node: NodeId, label: &str) -> bool {
        self.nodes
            .get(&node)
            .is_some_and(|n| self.class_matches_label(&n.class, label))
    }

    /// All nodes carrying `label`, in id order.
    pub fn label_candidates(&self, label: &str) -> Vec<NodeId> {
        if label == UNIVERSAL_LABEL {
            return self.nodes.keys().copied().collect();
        }
        let mut out: Vec<NodeId> = self
            .labels
            .iter()
            .filter(|(class, _)| self.class_matches_label(class, label))
            .flat_map(|(_, ids)| ids.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Node counts per concrete class, sorted by class name.
    pub fn class_counts(&self) -> BTreeMap<&str, usize> {
        self.labels
            .iter()
            .filter(|(_, ids)| !ids.is_empty())
            .map(|(class, ids)| (class.as_str(), ids.len()))
            .collect()
    }

    /// Edge counts for every registered type, including zeros.
    pub fn edge_type_counts(&self) -> BTreeMap<EdgeType, usize> {
        EdgeType::ALL
            .iter()
            .map(|&t| (t, self.by_type.get(&t).map_or(0, Vec::len)))
            .collect()
    }

    /// Full-scan consistency check of the adjacency and label indices.
    pub fn check_indices(&self) -> Result<(), String> {
        for edge in self.edges.values() {
            let in_out = self.outgoing.get(&edge.from).is_some_and(|v| v.contains(&edge.id));
            let in_in = self.incoming.get(&edge.to).is_some_and(|v| v.contains(&edge.id));
            let in_type = self.by_type.get(&edge.kind).is_some_and(|v| v.contains(&edge.id));
            if !(in_out && in_in && in_type) {
                return Err(format!("edge {} missing from an adjacency index", edge.id));
            }
        }
        let indexed = |m: &HashMap<NodeId, Vec<EdgeId>>| m.values().map(Vec::len).sum::<usize>();
        let typed: usize = self.by_type.values().map(Vec::len).sum();
        if indexed(&self.outgoing) != self.edges.len()
            || indexed(&self.incoming) != self.edges.len()
            || typed != self.edges.len()
        {
            return Err("adjacency index sizes disagree with the edge list".into());
        }
        let labelled: usize = self.labels.values().map(BTreeSet::len).sum();
        if labelled != self.nodes.len() {
            return Err("label index size disagrees with the node list".into());
        }
        for node in self.nodes.values() {
            if !self.labels.get(&node.class).is_some_and(|s| s.contains(&node.id)) {
                return Err(format!("node {} missing from label index", node.id));
            }
        }
        Ok(())
    }

    /// Renders a path as `name(Class) -[TYPE]-> name(Class) ...`.
    pub fn render_path(&self, path: &Path) -> String {
        let label = |id: &NodeId| {
            let n = &self.nodes[id];
            format!("{}({})", n.name, n.class)
        };
        let mut out = label(&path.nodes[0]);
        for (i, edge) in path.edges.iter().enumerate() {
            let kind = self.edges[edge].kind;
            if path.forward[i] {
                out.push_str(&format!(" -[{kind}]-> "));
            } else {
                out.push_str(&format!(" <-[{kind}]- "));
            }
            out.push_str(&label(&path.nodes[i + 1]));
        }
        out
    }
}
