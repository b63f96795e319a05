//! Resource discovery from recorded inventories and CI workflows.
//!
//! Inventories are ingested in two phases: [`ingest_resources`] creates the
//! resource nodes and their security features, and [`link_resources`]
//! creates the structural edges once every document has been read, so link
//! targets may live in any document of the build.

mod features;
mod link;
mod workflow;

pub use features::{attach_security_features, geo_location_node};
pub use link::{link_applications, LinkReport};
pub use workflow::{normalize_image, registry_host, WorkflowDocument, WorkflowJob, WorkflowScanner, WorkflowStep};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::graph::{EdgeType, GraphError, NodeId, PropertyGraph};
use crate::ontology::OntologyError;
use crate::props;

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("malformed {what}: {source}")]
    Syntax {
        what: &'static str,
        #[source]
        source: serde_yaml::Error,
    },
    #[error("resource `{id}`: {source}")]
    Classification {
        id: String,
        #[source]
        source: OntologyError,
    },
    #[error("duplicate resource id `{0}`")]
    DuplicateResource(String),
    #[error("resource `{id}`: link `{link}` points to unknown resource `{target}`")]
    DanglingLink {
        id: String,
        link: &'static str,
        target: String,
    },
    #[error("resource `{id}`: link `{link}` needs a {expected} target, but `{target}` is a {actual}")]
    LinkTarget {
        id: String,
        link: &'static str,
        target: String,
        expected: &'static str,
        actual: String,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthMode {
    None,
    Token,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceProperties {
    #[serde(default)]
    pub public_access: Option<bool>,
    #[serde(default)]
    pub at_rest_encryption_enabled: Option<bool>,
    #[serde(default)]
    pub at_rest_algorithm: Option<String>,
    #[serde(default)]
    pub tls_enabled: Option<bool>,
    #[serde(default)]
    pub tls_version: Option<String>,
    #[serde(default)]
    pub http_url: Option<String>,
    #[serde(default)]
    pub auth: Option<AuthMode>,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceLinks {
    #[serde(default)]
    pub member_of: Option<String>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub targets: Vec<String>,
    #[serde(default)]
    pub image: Option<String>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub forwards_logs_to: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryResource {
    pub id: String,
    pub name: String,
    pub provider_type: String,
    #[serde(default)]
    pub region: Option<String>,
    #[serde(default)]
    pub properties: ResourceProperties,
    #[serde(default)]
    pub links: ResourceLinks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryDocument {
    pub provider: String,
    #[serde(default)]
    pub resources: Vec<InventoryResource>,
}

impl InventoryDocument {
    pub fn from_yaml(text: &str) -> Result<Self, DiscoveryError> {
        let doc: InventoryDocument = serde_yaml::from_str(text).map_err(|source| DiscoveryError::Syntax {
            what: "inventory document",
            source,
        })?;
        let mut seen = std::collections::HashSet::new();
        for r in &doc.resources {
            if !seen.insert(r.id.as_str()) {
                return Err(DiscoveryError::DuplicateResource(r.id.clone()));
            }
        }
        Ok(doc)
    }
}

/// Outcome of ingesting one inventory document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InventoryReport {
    pub resources: usize,
    pub features: usize,
    pub skipped: Vec<String>,
}

/// Creates resource nodes, their HTTP endpoints and security features.
///
/// With `skip_unclassified` set, resources whose provider type has no
/// mapping are reported in [`InventoryReport::skipped`] instead of failing.
pub fn ingest_resources(
    graph: &mut PropertyGraph,
    doc: &InventoryDocument,
    skip_unclassified: bool,
) -> Result<InventoryReport, DiscoveryError> {
    let mut report = InventoryReport::default();
    for res in &doc.resources {
        if graph.find_by_provider_id(&res.id).is_some() {
            return Err(DiscoveryError::DuplicateResource(res.id.clone()));
        }
        let class = match graph
            .ontology()
            .resolve_instance_class(&doc.provider, &res.provider_type)
        {
            Ok(class) => class.to_string(),
            Err(source) if skip_unclassified => {
                log::warn!("skipping resource `{}`: {source}", res.id);
                report.skipped.push(res.id.clone());
                continue;
            }
            Err(source) => {
                return Err(DiscoveryError::Classification {
                    id: res.id.clone(),
                    source,
                })
            }
        };

        let declared: Vec<String> = graph
            .ontology()
            .data_properties(&class)
            .map(|ps| ps.iter().map(|p| p.name.clone()).collect())
            .unwrap_or_default();
        let mut node_props = props! {"provider_id" => res.id.as_str()};
        if let Some(public) = res.properties.public_access {
            if declared.iter().any(|p| p == "public_access") {
                node_props.insert("public_access".into(), public.into());
            } else {
                log::warn!("resource `{}`: class {class} has no public_access property", res.id);
            }
        }
        if let Some(url) = &res.properties.http_url {
            if declared.iter().any(|p| p == "url") {
                node_props.insert("url".into(), url.as_str().into());
            }
        }
        let node = graph.add_node(&class, res.name.as_str(), node_props)?;

        if let Some(url) = &res.properties.http_url {
            let endpoint = graph.add_node(
                "HttpEndpoint",
                url.as_str(),
                props! {"url" => url.as_str(), "method" => "ANY"},
            )?;
            graph.add_edge(node, endpoint, EdgeType::HasEndpoint, props! {})?;
        }
        report.features += attach_security_features(graph, node, res)?;
        report.resources += 1;
    }
    Ok(report)
}

struct Linked<'a> {
    owner: &'a InventoryResource,
    node: NodeId,
}

fn resolve_target(
    index: &HashMap<&str, NodeId>,
    graph: &PropertyGraph,
    owner: &InventoryResource,
    link: &'static str,
    target: &str,
    expected: &'static str,
) -> Result<NodeId, DiscoveryError> {
    let node = *index.get(target).ok_or_else(|| DiscoveryError::DanglingLink {
        id: owner.id.clone(),
        link,
        target: target.to_string(),
    })?;
    if !graph.node_matches_label(node, expected) {
        return Err(DiscoveryError::LinkTarget {
            id: owner.id.clone(),
            link,
            target: target.to_string(),
            expected,
            actual: graph.node(node).map(|n| n.class.clone()).unwrap_or_default(),
        });
    }
    Ok(node)
}

/// Creates CONTAINS, TARGETS, USES_IMAGE and LOGS_TO edges for every
/// resource across `docs`, plus the append request that stands for each log
/// forwarding. Resources are visited in provider-id order so the result does
/// not depend on document order. Returns the number of edges created.
pub fn link_resources(graph: &mut PropertyGraph, docs: &[InventoryDocument]) -> Result<usize, DiscoveryError> {
    let mut index: HashMap<&str, NodeId> = HashMap::new();
    let mut linked: BTreeMap<&str, Linked> = BTreeMap::new();
    for res in docs.iter().flat_map(|d| &d.resources) {
        // Skipped (unclassified) resources have no node and cannot be linked.
        if let Some(node) = graph.find_by_provider_id(&res.id) {
            index.insert(res.id.as_str(), node);
            linked.insert(res.id.as_str(), Linked { owner: res, node });
        }
    }

    let mut created = 0;
    for Linked { owner, node } in linked.values() {
        let (owner, node) = (*owner, *node);
        if let Some(cluster) = &owner.links.member_of {
            let cluster = resolve_target(&index, graph, owner, "member_of", cluster, "Compute")?;
            created += graph.ensure_edge(cluster, node, EdgeType::Contains)? as usize;
        }
        for target in &owner.links.targets {
            let target = resolve_target(&index, graph, owner, "targets", target, "Compute")?;
            created += graph.ensure_edge(node, target, EdgeType::Targets)? as usize;
        }
        if let Some(image) = &owner.links.image {
            let name = normalize_image(image);
            let image = match graph.find_node("ContainerImage", &name) {
                Some(id) => id,
                None => graph.add_node("ContainerImage", name, props! {})?,
            };
            created += graph.ensure_edge(node, image, EdgeType::UsesImage)? as usize;
        }
        for sink in &owner.links.forwards_logs_to {
            let sink = resolve_target(&index, graph, owner, "forwards_logs_to", sink, "Storage")?;
            if graph.ensure_edge(node, sink, EdgeType::LogsTo)? {
                created += 1;
                created += synthesize_log_request(graph, node, sink)?;
            }
        }
    }
    Ok(created)
}

fn synthesize_log_request(graph: &mut PropertyGraph, source: NodeId, sink: NodeId) -> Result<usize, GraphError> {
    let storage = graph.node(sink).expect("resolved above").clone();
    let mut request_props = props! {"type" => "append", "container" => storage.name.as_str()};
    let endpoint_url = graph
        .successors(sink, EdgeType::HasEndpoint)
        .into_iter()
        .find_map(|e| graph.node(e).and_then(|n| n.str_property("url")).map(str::to_string));
    if let Some(url) = endpoint_url.and_then(|u| crate::dataflow::UrlParts::parse(&u)) {
        request_props.insert("account_url".into(), url.origin().into());
    }
    let request = graph.add_node(
        "ObjectStorageRequest",
        format!("append {}", storage.name),
        request_props,
    )?;
    graph.add_edge(request, source, EdgeType::Source, props! {})?;
    graph.add_edge(request, sink, EdgeType::To, props! {})?;
    Ok(2)
}

/// Both inventory phases over a set of documents.
pub fn ingest_inventories(
    graph: &mut PropertyGraph,
    docs: &[InventoryDocument],
    skip_unclassified: bool,
) -> Result<InventoryReport, DiscoveryError> {
    let mut total = InventoryReport::default();
    for doc in docs {
        let r = ingest_resources(graph, doc, skip_unclassified)?;
        total.resources += r.resources;
        total.features += r.features;
        total.skipped.extend(r.skipped);
    }
    link_resources(graph, docs)?;
    Ok(total)
}
