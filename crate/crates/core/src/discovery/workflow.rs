use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeType, GraphError, NodeId, PropertyGraph};
use crate::props;

use super::{geo_location_node, DiscoveryError};

/// Registry used for image names without a host component.
pub const DEFAULT_REGISTRY: &str = "ghcr.io";
const DEFAULT_REGISTRY_REGION: &str = "us";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowStep {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub run: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowJob {
    pub name: String,
    #[serde(default)]
    pub steps: Vec<WorkflowStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowDocument {
    pub name: String,
    #[serde(default)]
    pub jobs: Vec<WorkflowJob>,
}

impl WorkflowDocument {
    pub fn from_yaml(text: &str) -> Result<Self, DiscoveryError> {
        serde_yaml::from_str(text).map_err(|source| DiscoveryError::Syntax {
            what: "workflow document",
            source,
        })
    }
}

/// Drops a `:tag` or `@digest` suffix from an image reference.
pub fn normalize_image(reference: &str) -> String {
    let reference = reference.split('@').next().unwrap_or(reference);
    let last_slash = reference.rfind('/').map_or(0, |i| i + 1);
    match reference[last_slash..].find(':') {
        Some(colon) => reference[..last_slash + colon].to_string(),
        None => reference.to_string(),
    }
}

/// Registry host of an image reference, following the docker convention
/// that the first component is a host only if it looks like one.
pub fn registry_host(image: &str) -> &str {
    match image.split_once('/') {
        Some((first, _)) if first.contains('.') || first.contains(':') || first == "localhost" => first,
        _ => DEFAULT_REGISTRY,
    }
}

#[derive(Debug, PartialEq, Eq)]
enum DockerCommand {
    Build(Vec<String>),
    Push(String),
}

fn commands(run: &str) -> Vec<Vec<String>> {
    let joined = run.replace("\\\n", " ");
    let mut out = Vec::new();
    for line in joined.lines() {
        let tokens = match shell_words::split(line) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("cannot tokenize workflow line `{line}`: {e}");
                continue;
            }
        };
        let mut current = Vec::new();
        for token in tokens {
            let (word, ends) = match token.as_str() {
                "&&" | "||" | ";" | "|" => (None, true),
                t if t.ends_with(';') => (Some(t.trim_end_matches(';').to_string()), true),
                _ => (Some(token), false),
            };
            if let Some(w) = word.filter(|w| !w.is_empty()) {
                current.push(w);
            }
            if ends && !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}

fn docker_command(tokens: &[String]) -> Option<DockerCommand> {
    let rest = match tokens {
        [docker, sub, rest @ ..] if docker == "docker" && sub == "build" => rest,
        [docker, buildx, sub, rest @ ..] if docker == "docker" && buildx == "buildx" && sub == "build" => rest,
        [docker, sub, rest @ ..] if docker == "docker" && sub == "push" => {
            return rest
                .iter()
                .find(|t| !t.starts_with('-'))
                .map(|t| DockerCommand::Push(t.clone()));
        }
        _ => return None,
    };
    let mut tags = Vec::new();
    let mut iter = rest.iter();
    while let Some(token) = iter.next() {
        if token == "-t" || token == "--tag" {
            if let Some(tag) = iter.next() {
                tags.push(tag.clone());
            }
        } else if let Some(tag) = token.strip_prefix("--tag=").or_else(|| token.strip_prefix("-t=")) {
            tags.push(tag.to_string());
        }
    }
    (!tags.is_empty()).then_some(DockerCommand::Build(tags))
}

/// Scans CI workflows for image builds and pushes. Warnings about pushes
/// of images never built are deferred to [`WorkflowScanner::finish`], since
/// the build may live in a later workflow.
#[derive(Debug)]
pub struct WorkflowScanner {
    registry_locations: BTreeMap<String, String>,
    built: BTreeSet<String>,
    pushed: BTreeSet<String>,
}

impl WorkflowScanner {
    pub fn new(registry_locations: BTreeMap<String, String>) -> Self {
        WorkflowScanner {
            registry_locations,
            built: BTreeSet::new(),
            pushed: BTreeSet::new(),
        }
    }

    fn image(graph: &mut PropertyGraph, name: &str) -> Result<NodeId, GraphError> {
        match graph.find_node("ContainerImage", name) {
            Some(id) => Ok(id),
            None => graph.add_node("ContainerImage", name, props! {}),
        }
    }

    fn registry(&self, graph: &mut PropertyGraph, host: &str) -> Result<NodeId, GraphError> {
        if let Some(id) = graph.find_node("ContainerRegistry", host) {
            return Ok(id);
        }
        let id = graph.add_node("ContainerRegistry", host, props! {})?;
        let region = match self.registry_locations.get(host) {
            Some(r) => Some(r.as_str()),
            None if host == DEFAULT_REGISTRY => Some(DEFAULT_REGISTRY_REGION),
            None => None,
        };
        if let Some(region) = region {
            let geo = geo_location_node(graph, region)?;
            graph.add_edge(id, geo, EdgeType::GeoLocation, props! {})?;
        }
        Ok(id)
    }

    /// Returns the number of distinct images the workflow builds or pushes.
    pub fn ingest(&mut self, graph: &mut PropertyGraph, doc: &WorkflowDocument) -> Result<usize, GraphError> {
        let mut images = BTreeSet::new();
        let runs = doc.jobs.iter().flat_map(|j| &j.steps).filter_map(|s| s.run.as_deref());
        for run in runs {
            for tokens in commands(run) {
                match docker_command(&tokens) {
                    Some(DockerCommand::Build(tags)) => {
                        for tag in tags {
                            let name = normalize_image(&tag);
                            Self::image(graph, &name)?;
                            self.built.insert(name.clone());
                            images.insert(name);
                        }
                    }
                    Some(DockerCommand::Push(reference)) => {
                        let name = normalize_image(&reference);
                        let image = Self::image(graph, &name)?;
                        let registry = self.registry(graph, registry_host(&name))?;
                        graph.ensure_edge(image, registry, EdgeType::PushesTo)?;
                        self.pushed.insert(name.clone());
                        images.insert(name);
                    }
                    None => {}
                }
            }
        }
        Ok(images.len())
    }

    /// Warnings for images pushed but never built by any scanned workflow.
    pub fn finish(self) -> Vec<String> {
        self.pushed
            .difference(&self.built)
            .map(|name| {
                let msg = format!("image `{name}` is pushed but never built by a scanned workflow");
                log::warn!("{msg}");
                msg
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Ontology;
    use std::sync::Arc;

    fn graph() -> PropertyGraph {
        PropertyGraph::new(Arc::new(Ontology::bundled()))
    }

    fn workflow(run: &str) -> WorkflowDocument {
        WorkflowDocument {
            name: "ci".into(),
            jobs: vec![WorkflowJob {
                name: "build".into(),
                steps: vec![WorkflowStep {
                    name: None,
                    run: Some(run.into()),
                }],
            }],
        }
    }

    #[test]
    fn image_references() {
        assert_eq!(normalize_image("ghcr.io/acme/app:1.2"), "ghcr.io/acme/app");
        assert_eq!(normalize_image("localhost:5000/app"), "localhost:5000/app");
        assert_eq!(normalize_image("localhost:5000/app:dev"), "localhost:5000/app");
        assert_eq!(normalize_image("app@sha256:abc"), "app");
        assert_eq!(registry_host("ghcr.io/acme/app"), "ghcr.io");
        assert_eq!(
            registry_host("bookinfoacr.azurecr.io/acme/app"),
            "bookinfoacr.azurecr.io"
        );
        assert_eq!(registry_host("acme/app"), "ghcr.io");
        assert_eq!(registry_host("app"), "ghcr.io");
        assert_eq!(registry_host("localhost/app"), "localhost");
    }

    #[test]
    fn command_splitting() {
        let cmds = commands("docker build -t a . && docker push a\necho hi; docker push \\\n  b");
        assert_eq!(
            cmds,
            vec![
                vec!["docker", "build", "-t", "a", "."],
                vec!["docker", "push", "a"],
                vec!["echo", "hi"],
                vec!["docker", "push", "b"],
            ]
        );
        assert_eq!(docker_command(&cmds[0]), Some(DockerCommand::Build(vec!["a".into()])));
        let tagged: Vec<String> = ["docker", "buildx", "build", "--tag=x", "-t", "y", "."]
            .map(String::from)
            .to_vec();
        assert_eq!(
            docker_command(&tagged),
            Some(DockerCommand::Build(vec!["x".into(), "y".into()]))
        );
        let untagged: Vec<String> = ["docker", "build", "."].map(String::from).to_vec();
        assert_eq!(docker_command(&untagged), None);
    }

    #[test]
    fn build_and_push_to_ghcr() {
        let mut g = graph();
        let mut scanner = WorkflowScanner::new(BTreeMap::new());
        let n = scanner
            .ingest(
                &mut g,
                &workflow(
                    "docker build -t ghcr.io/acme/productpage:latest .\ndocker push ghcr.io/acme/productpage:latest",
                ),
            )
            .unwrap();
        assert_eq!(n, 1);
        assert!(scanner.finish().is_empty());
        let image = g.find_node("ContainerImage", "ghcr.io/acme/productpage").unwrap();
        let registry = g.find_node("ContainerRegistry", "ghcr.io").unwrap();
        assert!(g.has_edge(image, registry, EdgeType::PushesTo));
        let geo = g.successors(registry, EdgeType::GeoLocation);
        assert_eq!(g.node(geo[0]).unwrap().str_property("region"), Some("us"));
    }

    #[test]
    fn no_docker_commands() {
        let mut g = graph();
        let mut scanner = WorkflowScanner::new(BTreeMap::new());
        assert_eq!(scanner.ingest(&mut g, &workflow("cargo test\nnpm ci")).unwrap(), 0);
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn duplicate_pushes_are_deduplicated() {
        let mut g = graph();
        let mut scanner = WorkflowScanner::new(BTreeMap::new());
        let wf = workflow("docker build -t acme/a .\ndocker push acme/a");
        scanner.ingest(&mut g, &wf).unwrap();
        scanner.ingest(&mut g, &wf).unwrap();
        assert_eq!(g.nodes_of_class("ContainerImage").len(), 1);
        assert_eq!(g.edges_of_type(EdgeType::PushesTo).count(), 1);
    }

    #[test]
    fn push_without_build_warns_and_side_table_sets_region() {
        let mut g = graph();
        let mut locations = BTreeMap::new();
        locations.insert("bookinfoacr.azurecr.io".to_string(), "europe".to_string());
        let mut scanner = WorkflowScanner::new(locations);
        scanner
            .ingest(&mut g, &workflow("docker push bookinfoacr.azurecr.io/acme/x"))
            .unwrap();
        let warnings = scanner.finish();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("bookinfoacr.azurecr.io/acme/x"));
        assert!(g.find_node("ContainerImage", "bookinfoacr.azurecr.io/acme/x").is_some());
        let reg = g.find_node("ContainerRegistry", "bookinfoacr.azurecr.io").unwrap();
        let geo = g.successors(reg, EdgeType::GeoLocation);
        assert_eq!(g.node(geo[0]).unwrap().name, "europe");
    }

    #[test]
    fn unknown_registry_has_no_location() {
        let mut g = graph();
        let mut scanner = WorkflowScanner::new(BTreeMap::new());
        scanner
            .ingest(
                &mut g,
                &workflow("docker build -t quay.io/x/y . && docker push quay.io/x/y"),
            )
            .unwrap();
        let reg = g.find_node("ContainerRegistry", "quay.io").unwrap();
        assert!(g.successors(reg, EdgeType::GeoLocation).is_empty());
    }
}
