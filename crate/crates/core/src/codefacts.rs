//! Code-fact bundles: a language-independent description of one
//! application's functions, calls and intra-application data flows.
//!
//! A bundle stands in for a real language frontend. Framework detection
//! (REST controllers, HTTP client libraries, storage SDK builder chains) is
//! assumed to have been lowered into `http_handler`, `http_client` and
//! `storage_sdk` facts upstream.
//!
//! Expression references are bundle-scoped strings:
//!
//! * a call id refers to that call expression,
//! * `function#param` refers to a parameter of `function`,
//! * `function#return` refers to the value returned by `function`,
//! * any other id must be declared in a function's `expressions` list.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeType, GraphError, NodeId, PropertyGraph};
use crate::props;

#[derive(Debug, Error)]
pub enum CodeFactsError {
    #[error("malformed code-facts bundle: {0}")]
    Syntax(#[from] serde_yaml::Error),
    #[error("unresolved expression reference `{0}`")]
    UnresolvedRef(String),
    #[error("duplicate function `{0}`")]
    DuplicateFunction(String),
    #[error("duplicate expression reference `{0}`")]
    DuplicateRef(String),
    #[error("call `{call}` is inside unknown function `{function}`")]
    UnknownFunction { call: String, function: String },
    #[error("handler path `{path}` of `{function}` must start with '/'")]
    HandlerPath { function: String, path: String },
    #[error("call `{0}`: {1}")]
    CallShape(String, &'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    Get,
    Post,
    Put,
    Delete,
}

impl HttpMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            HttpMethod::Get => "GET",
            HttpMethod::Post => "POST",
            HttpMethod::Put => "PUT",
            HttpMethod::Delete => "DELETE",
        }
    }
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Plain,
    HttpClient,
    StorageSdk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageOperation {
    Create,
    Append,
    Read,
}

impl StorageOperation {
    pub fn as_str(self) -> &'static str {
        match self {
            StorageOperation::Create => "create",
            StorageOperation::Append => "append",
            StorageOperation::Read => "read",
        }
    }

    /// Whether the operation carries data into the storage.
    pub fn writes(self) -> bool {
        !matches!(self, StorageOperation::Read)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpHandler {
    pub path: String,
    pub method: HttpMethod,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredExpression {
    pub id: String,
    /// Source text, used as the node's display name.
    #[serde(default)]
    pub code: Option<String>,
    #[serde(default)]
    pub literal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionFact {
    #[serde(rename = "name")]
    pub qualified_name: String,
    #[serde(default)]
    pub parameters: Vec<String>,
    #[serde(default)]
    pub http_handler: Option<HttpHandler>,
    #[serde(default)]
    pub handler_class: Option<String>,
    #[serde(default)]
    pub log_calls: Vec<String>,
    #[serde(default)]
    pub expressions: Vec<DeclaredExpression>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpCall {
    pub url: String,
    pub method: HttpMethod,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageCall {
    pub account_url: String,
    pub container: String,
    pub operation: StorageOperation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallFact {
    pub id: String,
    pub inside: String,
    pub kind: CallKind,
    #[serde(default)]
    pub http: Option<HttpCall>,
    #[serde(default)]
    pub storage: Option<StorageCall>,
    #[serde(default)]
    pub arguments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfgPair {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeFactsBundle {
    pub application: String,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub image: Option<String>,
    /// Inventory id of the compute resource the application runs on, for
    /// applications not deployed from a container image.
    #[serde(default)]
    pub host: Option<String>,
    #[serde(default)]
    pub functions: Vec<FunctionFact>,
    #[serde(default)]
    pub calls: Vec<CallFact>,
    #[serde(default)]
    pub dfg: Vec<DfgPair>,
}

impl CodeFactsBundle {
    pub fn from_yaml(text: &str) -> Result<Self, CodeFactsError> {
        let bundle: CodeFactsBundle = serde_yaml::from_str(text)?;
        bundle.validate()?;
        Ok(bundle)
    }

    /// Checks the bundle invariants without touching a graph.
    pub fn validate(&self) -> Result<(), CodeFactsError> {
        self.reference_table().map(|_| ())
    }

    fn reference_table(&self) -> Result<HashSet<String>, CodeFactsError> {
        let mut functions = HashMap::new();
        for (i, f) in self.functions.iter().enumerate() {
            if functions.insert(f.qualified_name.as_str(), i).is_some() {
                return Err(CodeFactsError::DuplicateFunction(f.qualified_name.clone()));
            }
            if let Some(handler) = &f.http_handler {
                if !handler.path.starts_with('/') {
                    return Err(CodeFactsError::HandlerPath {
                        function: f.qualified_name.clone(),
                        path: handler.path.clone(),
                    });
                }
            }
        }

        let mut refs = HashSet::new();
        let mut declare = |key: String| {
            if refs.contains(&key) {
                return Err(CodeFactsError::DuplicateRef(key));
            }
            refs.insert(key);
            Ok(())
        };
        for f in &self.functions {
            for p in &f.parameters {
                declare(format!("{}#{}", f.qualified_name, p))?;
            }
            declare(format!("{}#return", f.qualified_name))?;
            for e in &f.expressions {
                declare(e.id.clone())?;
            }
        }
        for call in &self.calls {
            if !functions.contains_key(call.inside.as_str()) {
                return Err(CodeFactsError::UnknownFunction {
                    call: call.id.clone(),
                    function: call.inside.clone(),
                });
            }
            match (call.kind, call.http.is_some(), call.storage.is_some()) {
                (CallKind::HttpClient, true, false)
                | (CallKind::StorageSdk, false, true)
                | (CallKind::Plain, false, false) => {}
                (CallKind::HttpClient, ..) => {
                    return Err(CodeFactsError::CallShape(
                        call.id.clone(),
                        "http_client calls carry exactly an `http` block",
                    ))
                }
                (CallKind::StorageSdk, ..) => {
                    return Err(CodeFactsError::CallShape(
                        call.id.clone(),
                        "storage_sdk calls carry exactly a `storage` block",
                    ))
                }
                (CallKind::Plain, ..) => {
                    return Err(CodeFactsError::CallShape(
                        call.id.clone(),
                        "plain calls carry no `http` or `storage` block",
                    ))
                }
            }
            declare(call.id.clone())?;
        }

        let used = self
            .dfg
            .iter()
            .flat_map(|p| [&p.from, &p.to])
            .chain(self.functions.iter().flat_map(|f| &f.log_calls))
            .chain(self.calls.iter().flat_map(|c| &c.arguments));
        for r in used {
            if !refs.contains(r) {
                return Err(CodeFactsError::UnresolvedRef(r.clone()));
            }
        }
        Ok(refs)
    }
}

/// Handle returned by [`ingest_code_facts`]; the follow-up builders use it to
/// map bundle references onto graph nodes.
#[derive(Debug, Clone)]
pub struct IngestedApplication {
    pub node: NodeId,
    pub bundle: CodeFactsBundle,
    pub functions: Vec<NodeId>,
    pub calls: Vec<NodeId>,
    pub log_output: Option<NodeId>,
    refs: HashMap<String, NodeId>,
}

impl IngestedApplication {
    pub fn name(&self) -> &str {
        &self.bundle.application
    }

    /// Graph node of a bundle expression reference, if it was materialized.
    pub fn node_for_ref(&self, r: &str) -> Option<NodeId> {
        self.refs.get(r).copied()
    }
}

/// Creates the application's code nodes and intra-application DFG edges.
pub fn ingest_code_facts(
    graph: &mut PropertyGraph,
    bundle: &CodeFactsBundle,
) -> Result<IngestedApplication, CodeFactsError> {
    let table = bundle.reference_table()?;

    let mut app_props = props! {"language" => bundle.language.as_str()};
    if let Some(image) = &bundle.image {
        app_props.insert("image".into(), image.as_str().into());
    }
    if let Some(host) = &bundle.host {
        app_props.insert("host".into(), host.as_str().into());
    }
    let app = graph.add_node("Application", bundle.application.as_str(), app_props)?;

    let mut functions = Vec::with_capacity(bundle.functions.len());
    for f in &bundle.functions {
        let node = graph.add_node("FunctionDeclaration", f.qualified_name.as_str(), props! {})?;
        graph.add_edge(app, node, EdgeType::Contains, props! {})?;
        functions.push(node);
    }
    let fn_index: HashMap<&str, usize> = bundle
        .functions
        .iter()
        .enumerate()
        .map(|(i, f)| (f.qualified_name.as_str(), i))
        .collect();

    let mut refs = HashMap::new();
    let mut calls = Vec::with_capacity(bundle.calls.len());
    for call in &bundle.calls {
        let kind = match call.kind {
            CallKind::Plain => "plain",
            CallKind::HttpClient => "http_client",
            CallKind::StorageSdk => "storage_sdk",
        };
        let node = graph.add_node("CallExpression", call.id.as_str(), props! {"kind" => kind})?;
        graph.add_edge(
            functions[fn_index[call.inside.as_str()]],
            node,
            EdgeType::Contains,
            props! {},
        )?;
        refs.insert(call.id.clone(), node);
        calls.push(node);
    }

    // Parameters and returns only become nodes when something refers to them.
    let referenced: HashSet<&str> = bundle
        .dfg
        .iter()
        .flat_map(|p| [p.from.as_str(), p.to.as_str()])
        .chain(
            bundle
                .functions
                .iter()
                .flat_map(|f| f.log_calls.iter().map(String::as_str)),
        )
        .chain(bundle.calls.iter().flat_map(|c| c.arguments.iter().map(String::as_str)))
        .collect();
    for (fi, f) in bundle.functions.iter().enumerate() {
        let owner = functions[fi];
        let mut implicit: Vec<(String, String)> = f
            .parameters
            .iter()
            .map(|p| (format!("{}#{}", f.qualified_name, p), p.clone()))
            .collect();
        implicit.push((format!("{}#return", f.qualified_name), "return".to_string()));
        for (key, display) in implicit {
            if referenced.contains(key.as_str()) {
                let node = graph.add_node("Expression", display, props! {})?;
                graph.add_edge(owner, node, EdgeType::Contains, props! {})?;
                refs.insert(key, node);
            }
        }
        for e in &f.expressions {
            let class = if e.literal { "Literal" } else { "Expression" };
            let display = e.code.clone().unwrap_or_else(|| e.id.clone());
            let node = graph.add_node(class, display, props! {})?;
            graph.add_edge(owner, node, EdgeType::Contains, props! {})?;
            refs.insert(e.id.clone(), node);
        }
    }
    debug_assert!(table
        .iter()
        .filter(|k| referenced.contains(k.as_str()))
        .all(|k| refs.contains_key(k)));

    for pair in &bundle.dfg {
        graph.add_edge(refs[&pair.from], refs[&pair.to], EdgeType::Dfg, props! {})?;
    }

    let mut log_output = None;
    for f in &bundle.functions {
        for r in &f.log_calls {
            let sink = match log_output {
                Some(node) => node,
                None => {
                    let node = graph.add_node("LogOutput", format!("{} log", bundle.application), props! {})?;
                    graph.add_edge(app, node, EdgeType::Offers, props! {})?;
                    log_output = Some(node);
                    node
                }
            };
            graph.ensure_edge(refs[r], sink, EdgeType::Dfg)?;
        }
    }

    Ok(IngestedApplication {
        node: app,
        bundle: bundle.clone(),
        functions,
        calls,
        log_output,
        refs,
    })
}

/// Creates request handlers and their endpoints for annotated functions.
/// Returns the number of endpoints created.
pub fn build_http_server_nodes(graph: &mut PropertyGraph, app: &IngestedApplication) -> Result<usize, GraphError> {
    let mut handlers: BTreeMap<usize, (String, Vec<usize>)> = BTreeMap::new();
    let mut order: HashMap<String, usize> = HashMap::new();
    for (fi, f) in app.bundle.functions.iter().enumerate() {
        if f.http_handler.is_none() {
            continue;
        }
        let class = f
            .handler_class
            .clone()
            .unwrap_or_else(|| app.bundle.application.clone());
        let next = order.len();
        let slot = *order.entry(class.clone()).or_insert(next);
        handlers.entry(slot).or_insert_with(|| (class, Vec::new())).1.push(fi);
    }

    let mut created = 0;
    for (class, members) in handlers.into_values() {
        let handler = graph.add_node("HttpRequestHandler", class, props! {})?;
        graph.add_edge(app.node, handler, EdgeType::Offers, props! {})?;
        for fi in members {
            let spec = app.bundle.functions[fi].http_handler.as_ref().expect("filtered above");
            let endpoint = graph.add_node(
                "HttpEndpoint",
                spec.path.as_str(),
                props! {"path" => spec.path.as_str(), "method" => spec.method.as_str()},
            )?;
            graph.add_edge(handler, endpoint, EdgeType::HasEndpoint, props! {})?;
            graph.add_edge(endpoint, app.functions[fi], EdgeType::Calls, props! {})?;
            created += 1;
        }
    }
    Ok(created)
}

/// One `HttpRequest` per HTTP client call. TO edges are left to the
/// data-flow resolution.
pub fn build_http_client_nodes(graph: &mut PropertyGraph, app: &IngestedApplication) -> Result<usize, GraphError> {
    let mut created = 0;
    for (ci, call) in app.bundle.calls.iter().enumerate() {
        let Some(http) = &call.http else { continue };
        let request = graph.add_node(
            "HttpRequest",
            format!("{} {}", http.method, http.url),
            props! {"url" => http.url.as_str(), "method" => http.method.as_str()},
        )?;
        graph.add_edge(request, app.calls[ci], EdgeType::Source, props! {})?;
        graph.add_edge(app.node, request, EdgeType::Offers, props! {})?;
        created += 1;
    }
    Ok(created)
}

/// One `ObjectStorageRequest` per storage SDK call; written arguments flow
/// into the request node.
pub fn build_storage_request_nodes(graph: &mut PropertyGraph, app: &IngestedApplication) -> Result<usize, GraphError> {
    let mut created = 0;
    for (ci, call) in app.bundle.calls.iter().enumerate() {
        let Some(storage) = &call.storage else { continue };
        let request = graph.add_node(
            "ObjectStorageRequest",
            format!("{} {}", storage.operation.as_str(), storage.container),
            props! {
                "type" => storage.operation.as_str(),
                "account_url" => storage.account_url.as_str(),
                "container" => storage.container.as_str(),
            },
        )?;
        graph.add_edge(request, app.calls[ci], EdgeType::Source, props! {})?;
        if storage.operation.writes() {
            for arg in &call.arguments {
                graph.ensure_edge(app.refs[arg], request, EdgeType::Dfg)?;
            }
        }
        created += 1;
    }
    Ok(created)
}

/// Runs ingestion and all three functionality builders.
pub fn ingest_application(
    graph: &mut PropertyGraph,
    bundle: &CodeFactsBundle,
) -> Result<IngestedApplication, CodeFactsError> {
    let app = ingest_code_facts(graph, bundle)?;
    build_http_server_nodes(graph, &app)?;
    build_http_client_nodes(graph, &app)?;
    build_storage_request_nodes(graph, &app)?;
    Ok(app)
}
