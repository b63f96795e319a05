//! JSON export/import of a [`PropertyGraph`].
//!
//! ```json
//! { "nodes": [{"id": "n0", "class": "...", "name": "...", "properties": {}}],
//!   "edges": [{"id": "e0", "type": "DFG", "from": "n0", "to": "n1", "properties": {}}] }
//! ```
//!
//! Nodes and edges are written in id order so identical graphs produce
//! byte-identical documents.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Edge, EdgeId, GraphError, Node, NodeId, Properties, PropertyGraph};
use crate::ontology::Ontology;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: String,
    class: String,
    name: String,
    #[serde(default)]
    properties: Properties,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    id: String,
    #[serde(rename = "type")]
    kind: String,
    from: String,
    to: String,
    #[serde(default)]
    properties: Properties,
}

pub fn export_graph(graph: &PropertyGraph) -> String {
    let doc = GraphDocument {
        nodes: graph
            .nodes()
            .map(|n| NodeRecord {
                id: n.id.to_string(),
                class: n.class.clone(),
                name: n.name.clone(),
                properties: n.properties.clone(),
            })
            .collect(),
        edges: graph
            .edges()
            .map(|e| EdgeRecord {
                id: e.id.to_string(),
                kind: e.kind.to_string(),
                from: e.from.to_string(),
                to: e.to.to_string(),
                properties: e.properties.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("graph document serializes");
    text.push('\n');
    text
}

/// Rebuilds a graph from an exported document, preserving ids. Node classes
/// and properties are validated against `ontology`.
pub fn import_graph(doc: &str, ontology: Arc<Ontology>) -> Result<PropertyGraph, GraphError> {
    let doc: GraphDocument = serde_json::from_str(doc).map_err(|e| GraphError::Schema(e.to_string()))?;
    let mut graph = PropertyGraph::new(ontology);
    for record in doc.nodes {
        graph.insert_node(Node {
            id: record.id.parse()?,
            class: record.class,
            name: record.name,
            properties: record.properties,
        })?;
    }
    for record in doc.edges {
        let from: NodeId = record.from.parse()?;
        let to: NodeId = record.to.parse()?;
        graph.insert_edge(Edge {
            id: record.id.parse::<EdgeId>()?,
            kind: record.kind.parse()?,
            from,
            to,
            properties: record.properties,
        })?;
    }
    Ok(graph)
}
