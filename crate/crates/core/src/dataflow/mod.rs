//! Cross-service data-flow resolution.
//!
//! The passes run in a fixed order after discovery:
//! [`create_proxied_endpoints`], [`resolve_http_requests`],
//! [`resolve_storage_requests`], [`propagate_log_flows`]. Each pass only
//! adds edges that are not already present, so rerunning a pass is a no-op.

mod url;

pub use url::UrlParts;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::graph::{EdgeType, GraphError, NodeId, PropertyGraph};
use crate::props;

#[derive(Debug, Error, PartialEq)]
pub enum DataflowError {
    #[error("storage request `{request}` matches both `{first}` and `{second}`")]
    AmbiguousStorage {
        request: String,
        first: String,
        second: String,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// What a pass added.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PassReport {
    pub created: usize,
    pub warnings: Vec<String>,
}

fn str_prop(graph: &PropertyGraph, node: NodeId, key: &str) -> Option<String> {
    graph.node(node)?.str_property(key).map(str::to_string)
}

/// Local HTTP endpoints an application serves through its request handlers.
fn application_endpoints(graph: &PropertyGraph, app: NodeId) -> Vec<NodeId> {
    graph
        .successors(app, EdgeType::Offers)
        .into_iter()
        .filter(|&h| graph.node_matches_label(h, "HttpRequestHandler"))
        .flat_map(|h| graph.successors(h, EdgeType::HasEndpoint))
        .filter(|&e| graph.node(e).is_some_and(|n| n.class == "HttpEndpoint"))
        .collect()
}

/// Publishes every local endpoint of the applications behind each load
/// balancer as a ProxiedEndpoint under the balancer's URL.
pub fn create_proxied_endpoints(graph: &mut PropertyGraph) -> Result<PassReport, GraphError> {
    let mut report = PassReport::default();
    for lb in graph.nodes_of_kind("LoadBalancer") {
        let Some(base) = str_prop(graph, lb, "url") else {
            let name = &graph.node(lb).expect("indexed").name;
            let msg = format!("load balancer `{name}` has no url; its targets are not published");
            log::warn!("{msg}");
            report.warnings.push(msg);
            continue;
        };
        let apps: BTreeSet<NodeId> = graph
            .successors(lb, EdgeType::Targets)
            .into_iter()
            .filter(|&c| graph.node_matches_label(c, "Compute"))
            .flat_map(|c| graph.predecessors(c, EdgeType::RunsOn))
            .filter(|&a| graph.node_matches_label(a, "Application"))
            .collect();
        let existing: Vec<NodeId> = graph
            .successors(lb, EdgeType::HasEndpoint)
            .into_iter()
            .filter(|&p| graph.node_matches_label(p, "ProxiedEndpoint"))
            .flat_map(|p| graph.successors(p, EdgeType::Proxies))
            .collect();
        for app in apps {
            for endpoint in application_endpoints(graph, app) {
                if existing.contains(&endpoint) {
                    continue;
                }
                let path = str_prop(graph, endpoint, "path").unwrap_or_else(|| "/".into());
                let method = str_prop(graph, endpoint, "method").unwrap_or_else(|| "ANY".into());
                let url = format!("{base}{path}");
                let proxied = graph.add_node(
                    "ProxiedEndpoint",
                    url.as_str(),
                    props! {"url" => url.as_str(), "path" => path, "method" => method},
                )?;
                graph.add_edge(lb, proxied, EdgeType::HasEndpoint, props! {})?;
                graph.add_edge(proxied, endpoint, EdgeType::Proxies, props! {})?;
                report.created += 1;
            }
        }
    }
    Ok(report)
}

/// Whether an endpoint with `endpoint_method` serves a request with
/// `request_method`.
pub fn method_matches(endpoint_method: &str, request_method: &str) -> bool {
    endpoint_method == "ANY" || endpoint_method == request_method
}

/// Connects HTTP requests to the endpoints serving them and splices the
/// data flow between the calling expression and the handling function.
/// Returns the number of TO edges created.
pub fn resolve_http_requests(graph: &mut PropertyGraph) -> Result<PassReport, GraphError> {
    let endpoints: Vec<(NodeId, UrlParts, String)> = graph
        .nodes_of_kind("HttpEndpoint")
        .into_iter()
        .filter_map(|e| {
            let url = UrlParts::parse(&str_prop(graph, e, "url")?)?;
            Some((e, url, str_prop(graph, e, "method").unwrap_or_else(|| "ANY".into())))
        })
        .collect();

    let mut report = PassReport::default();
    for request in graph.nodes_of_class("HttpRequest") {
        let (Some(url), Some(method)) = (str_prop(graph, request, "url"), str_prop(graph, request, "method")) else {
            continue;
        };
        let Some(target) = UrlParts::parse(&url) else {
            report.warnings.push(format!("request url `{url}` cannot be parsed"));
            continue;
        };
        let calls = graph.successors(request, EdgeType::Source);
        for (endpoint, parts, endpoint_method) in &endpoints {
            if !parts.same_target(&target) || !method_matches(endpoint_method, &method) {
                continue;
            }
            report.created += graph.ensure_edge(request, *endpoint, EdgeType::To)? as usize;
            if !graph.node_matches_label(*endpoint, "ProxiedEndpoint") {
                continue;
            }
            for local in graph.successors(*endpoint, EdgeType::Proxies) {
                // The local endpoint has no URL of its own; it is reached
                // through the balancer.
                report.created += graph.ensure_edge(request, local, EdgeType::To)? as usize;
                for function in graph.successors(local, EdgeType::Calls) {
                    for &call in &calls {
                        graph.ensure_edge(call, function, EdgeType::Dfg)?;
                        graph.ensure_edge(function, call, EdgeType::Dfg)?;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Walks SOURCE -> call -> function -> application -> RUNS_ON.
fn owning_compute(graph: &PropertyGraph, request: NodeId) -> Vec<NodeId> {
    graph
        .successors(request, EdgeType::Source)
        .into_iter()
        .filter(|&c| graph.node(c).is_some_and(|n| n.class == "CallExpression"))
        .flat_map(|c| graph.predecessors(c, EdgeType::Contains))
        .flat_map(|f| graph.predecessors(f, EdgeType::Contains))
        .filter(|&a| graph.node(a).is_some_and(|n| n.class == "Application"))
        .flat_map(|a| graph.successors(a, EdgeType::RunsOn))
        .collect()
}

/// Connects storage requests to the storage they address: the storage's
/// endpoint host must equal the account host and its name the container.
/// Written requests also get a DFG edge into the storage, and requests made
/// from code gain a SOURCE edge to the compute their application runs on.
pub fn resolve_storage_requests(graph: &mut PropertyGraph) -> Result<PassReport, DataflowError> {
    let storages: Vec<(NodeId, String, Vec<String>)> = graph
        .nodes_of_kind("ObjectStorage")
        .into_iter()
        .map(|s| {
            let hosts = graph
                .successors(s, EdgeType::HasEndpoint)
                .into_iter()
                .filter_map(|e| UrlParts::parse(&str_prop(graph, e, "url")?))
                .map(|u| u.host)
                .collect();
            (s, graph.node(s).expect("indexed").name.clone(), hosts)
        })
        .collect();

    let mut report = PassReport::default();
    for request in graph.nodes_of_class("ObjectStorageRequest") {
        let (Some(account), Some(container)) = (
            str_prop(graph, request, "account_url"),
            str_prop(graph, request, "container"),
        ) else {
            continue;
        };
        let Some(account) = UrlParts::parse(&account) else {
            report
                .warnings
                .push(format!("account url `{account}` cannot be parsed"));
            continue;
        };
        let matches: Vec<NodeId> = storages
            .iter()
            .filter(|(_, name, hosts)| *name == container && hosts.contains(&account.host))
            .map(|(s, ..)| *s)
            .collect();
        let storage = match matches.as_slice() {
            [] => continue,
            [one] => *one,
            [first, second, ..] => {
                let name = |n: &NodeId| {
                    let node = graph.node(*n).expect("indexed");
                    node.str_property("provider_id").unwrap_or(&node.name).to_string()
                };
                return Err(DataflowError::AmbiguousStorage {
                    request: graph.node(request).expect("indexed").name.clone(),
                    first: name(first),
                    second: name(second),
                });
            }
        };
        report.created += graph.ensure_edge(request, storage, EdgeType::To)? as usize;
        let writes = matches!(str_prop(graph, request, "type").as_deref(), Some("create" | "append"));
        if writes {
            graph.ensure_edge(request, storage, EdgeType::Dfg)?;
        }
        for compute in owning_compute(graph, request) {
            graph.ensure_edge(request, compute, EdgeType::Source)?;
        }
    }
    Ok(report)
}

/// Extends application log output into the storage its compute (or the
/// cluster containing it) forwards logs to. Returns DFG edges created.
pub fn propagate_log_flows(graph: &mut PropertyGraph) -> Result<PassReport, GraphError> {
    let mut report = PassReport::default();
    for app in graph.nodes_of_class("Application") {
        let outputs: Vec<NodeId> = graph
            .successors(app, EdgeType::Offers)
            .into_iter()
            .filter(|&o| graph.node_matches_label(o, "LogOutput"))
            .collect();
        if outputs.is_empty() {
            continue;
        }
        for compute in graph.successors(app, EdgeType::RunsOn) {
            let mut sinks: BTreeSet<NodeId> = graph.successors(compute, EdgeType::LogsTo).into_iter().collect();
            for cluster in graph.predecessors(compute, EdgeType::Contains) {
                sinks.extend(graph.successors(cluster, EdgeType::LogsTo));
            }
            if sinks.is_empty() {
                continue;
            }
            for &output in &outputs {
                report.created += graph.ensure_edge(output, compute, EdgeType::Dfg)? as usize;
            }
            for sink in sinks {
                report.created += graph.ensure_edge(compute, sink, EdgeType::Dfg)? as usize;
            }
        }
    }
    Ok(report)
}

/// All four passes in order.
pub fn resolve_all(graph: &mut PropertyGraph) -> Result<[PassReport; 4], DataflowError> {
    Ok([
        create_proxied_endpoints(graph)?,
        resolve_http_requests(graph)?,
        resolve_storage_requests(graph)?,
        propagate_log_flows(graph)?,
    ])
}
