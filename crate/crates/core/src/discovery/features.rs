use crate::graph::{EdgeType, GraphError, NodeId, Properties, PropertyGraph};
use crate::props;

use super::{AuthMode, InventoryResource};

/// The GeoLocation node for `region`, created on first use. Regions are
/// shared, so two resources in the same region point at the same node.
pub fn geo_location_node(graph: &mut PropertyGraph, region: &str) -> Result<NodeId, GraphError> {
    match graph.find_node("GeoLocation", region) {
        Some(id) => Ok(id),
        None => graph.add_node("GeoLocation", region, props! {"region" => region}),
    }
}

fn attach(
    graph: &mut PropertyGraph,
    owner: NodeId,
    class: &str,
    name: &str,
    properties: Properties,
    kind: EdgeType,
) -> Result<(), GraphError> {
    let feature = graph.add_node(class, name, properties)?;
    graph.add_edge(owner, feature, kind, props! {})?;
    Ok(())
}

/// Materializes the security features the resource's class offers and the
/// inventory configures. Returns the number of features attached.
pub fn attach_security_features(
    graph: &mut PropertyGraph,
    resource: NodeId,
    inv: &InventoryResource,
) -> Result<usize, GraphError> {
    let class = graph
        .node(resource)
        .ok_or_else(|| GraphError::DanglingEndpoint(resource.to_string()))?
        .class
        .clone();
    let offered: Vec<String> = graph
        .ontology()
        .offered_features(&class)
        .map_err(|_| GraphError::UnknownClass(class.clone()))?
        .into_iter()
        .map(str::to_string)
        .collect();
    // Endpoint-level features sit on the resource's own endpoint if it has one.
    let endpoint = graph
        .successors(resource, EdgeType::HasEndpoint)
        .into_iter()
        .find(|&e| graph.node(e).is_some_and(|n| n.class == "HttpEndpoint"))
        .unwrap_or(resource);
    let p = &inv.properties;

    let mut attached = 0;
    for feature in &offered {
        match feature.as_str() {
            "GeoLocation" => {
                if let Some(region) = &inv.region {
                    let geo = geo_location_node(graph, region)?;
                    graph.ensure_edge(resource, geo, EdgeType::GeoLocation)?;
                    attached += 1;
                }
            }
            "AtRestEncryption" => {
                if p.at_rest_encryption_enabled.is_none() && p.at_rest_algorithm.is_none() {
                    continue;
                }
                let enabled = p.at_rest_encryption_enabled.unwrap_or(true);
                let mut fp = props! {"enabled" => enabled};
                if let Some(alg) = &p.at_rest_algorithm {
                    fp.insert("algorithm".into(), alg.as_str().into());
                }
                let name = p
                    .at_rest_algorithm
                    .as_deref()
                    .unwrap_or(if enabled { "enabled" } else { "disabled" });
                attach(
                    graph,
                    resource,
                    "AtRestEncryption",
                    name,
                    fp,
                    EdgeType::AtRestEncryption,
                )?;
                attached += 1;
            }
            "TransportEncryption" => {
                if p.tls_enabled.is_none() && p.tls_version.is_none() {
                    continue;
                }
                let enabled = p.tls_enabled.unwrap_or(true);
                let mut fp = props! {"enabled" => enabled};
                if let Some(v) = &p.tls_version {
                    fp.insert("tlsVersion".into(), v.as_str().into());
                }
                let name = p
                    .tls_version
                    .as_deref()
                    .unwrap_or(if enabled { "enabled" } else { "disabled" });
                attach(
                    graph,
                    endpoint,
                    "TransportEncryption",
                    name,
                    fp,
                    EdgeType::TransportEncryption,
                )?;
                attached += 1;
            }
            "NoAuthentication" if p.auth == Some(AuthMode::None) => {
                attach(
                    graph,
                    endpoint,
                    "NoAuthentication",
                    "none",
                    props! {},
                    EdgeType::Authenticity,
                )?;
                attached += 1;
            }
            "TokenBasedAuthentication" if p.auth == Some(AuthMode::Token) => {
                attach(
                    graph,
                    endpoint,
                    "TokenBasedAuthentication",
                    "token",
                    props! {},
                    EdgeType::Authenticity,
                )?;
                attached += 1;
            }
            _ => {}
        }
    }
    Ok(attached)
}
