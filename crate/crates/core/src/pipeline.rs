//! End-to-end build from a manifest file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codefacts::{ingest_application, CodeFactsBundle, CodeFactsError};
use crate::dataflow::{self, DataflowError};
use crate::discovery::{self, DiscoveryError, InventoryDocument, WorkflowDocument, WorkflowScanner};
use crate::graph::{EdgeType, GraphError, PropertyGraph, CODE_CLASSES};
use crate::ontology::{Ontology, OntologyError, BUNDLED_MAPPINGS, BUNDLED_ONTOLOGY};
use crate::query::{EvalOptions, DEFAULT_STAR_MAX};

fn default_star_max() -> u32 {
    DEFAULT_STAR_MAX
}

/// Build inputs. Relative paths are resolved against the manifest's
/// directory. Without `ontology`, the bundled ontology is used, together
/// with the bundled mappings unless `mappings` lists others.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildManifest {
    #[serde(default)]
    pub ontology: Option<PathBuf>,
    #[serde(default)]
    pub mappings: Vec<PathBuf>,
    #[serde(default)]
    pub inventories: Vec<PathBuf>,
    #[serde(default)]
    pub workflows: Vec<PathBuf>,
    #[serde(default)]
    pub codefacts: Vec<PathBuf>,
    #[serde(default)]
    pub registry_locations: BTreeMap<String, String>,
    #[serde(default = "default_star_max")]
    pub star_max: u32,
    /// Report inventory resources without an ontology mapping instead of
    /// failing the build.
    #[serde(default)]
    pub skip_unclassified: bool,
}

impl Default for BuildManifest {
    fn default() -> Self {
        BuildManifest {
            ontology: None,
            mappings: Vec::new(),
            inventories: Vec::new(),
            workflows: Vec::new(),
            codefacts: Vec::new(),
            registry_locations: BTreeMap::new(),
            star_max: DEFAULT_STAR_MAX,
            skip_unclassified: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed manifest: {source}", path.display())]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_yaml::Error,
    },
    #[error("{}: {source}", path.display())]
    Ontology {
        path: PathBuf,
        #[source]
        source: OntologyError,
    },
    #[error("{}: {source}", path.display())]
    CodeFacts {
        path: PathBuf,
        #[source]
        source: CodeFactsError,
    },
    #[error("{}: {source}", path.display())]
    Discovery {
        path: PathBuf,
        #[source]
        source: Box<DiscoveryError>,
    },
    #[error("linking inventories: {0}")]
    Link(#[source] Box<DiscoveryError>),
    #[error("data-flow resolution: {0}")]
    Dataflow(#[from] DataflowError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn read(path: &Path) -> Result<String, BuildError> {
    fs::read_to_string(path).map_err(|source| BuildError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl BuildManifest {
    pub fn from_yaml(text: &str, path: &Path) -> Result<Self, BuildError> {
        serde_yaml::from_str(text).map_err(|source| BuildError::Manifest {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Loads a manifest and makes its paths absolute relative to its directory.
    pub fn load(path: &Path) -> Result<Self, BuildError> {
        let mut manifest = Self::from_yaml(&read(path)?, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = manifest.ontology.as_mut() {
            resolve(p);
        }
        for list in [
            &mut manifest.mappings,
            &mut manifest.inventories,
            &mut manifest.workflows,
            &mut manifest.codefacts,
        ] {
            list.iter_mut().for_each(resolve);
        }
        Ok(manifest)
    }
}

/// Counts, timings and warnings of one build.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub timings: Vec<(&'static str, Duration)>,
    pub warnings: Vec<String>,
    pub stats: GraphStats,
}

impl BuildReport {
    pub fn total_time(&self) -> Duration {
        self.timings.iter().map(|(_, d)| *d).sum()
    }
}

impl fmt::Display for BuildReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.stats)?;
        writeln!(f, "passes:")?;
        for (pass, d) in &self.timings {
            writeln!(f, "  {pass}: {:.3} ms", d.as_secs_f64() * 1e3)?;
        }
        writeln!(f, "  total: {:.3} ms", self.total_time().as_secs_f64() * 1e3)?;
        if !self.warnings.is_empty() {
            writeln!(f, "warnings:")?;
            for w in &self.warnings {
                writeln!(f, "  {w}")?;
            }
        }
        Ok(())
    }
}

/// Node counts for every known class and edge counts for every registered
/// type, zeros included.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphStats {
    pub nodes: Vec<(String, usize)>,
    pub edges: Vec<(EdgeType, usize)>,
}

impl GraphStats {
    pub fn of(graph: &PropertyGraph) -> Self {
        let counts = graph.class_counts();
        let classes = graph
            .ontology()
            .classes()
            .map(|c| c.name.as_str())
            .chain(CODE_CLASSES.iter().copied().filter(|c| !graph.ontology().contains(c)));
        GraphStats {
            nodes: classes
                .map(|c| (c.to_string(), counts.get(c).copied().unwrap_or(0)))
                .collect(),
            edges: graph.edge_type_counts().into_iter().collect(),
        }
    }

    pub fn node_total(&self) -> usize {
        self.nodes.iter().map(|(_, n)| n).sum()
    }

    pub fn edge_total(&self) -> usize {
        self.edges.iter().map(|(_, n)| n).sum()
    }

    pub fn count(&self, class: &str) -> usize {
        self.nodes.iter().find(|(c, _)| c == class).map_or(0, |(_, n)| *n)
    }
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes: {}", self.node_total())?;
        for (class, n) in &self.nodes {
            writeln!(f, "  {class}: {n}")?;
        }
        writeln!(f, "edges: {}", self.edge_total())?;
        for (kind, n) in &self.edges {
            writeln!(f, "  {kind}: {n}")?;
        }
        Ok(())
    }
}

pub struct BuildOutcome {
    pub graph: PropertyGraph,
    pub report: BuildReport,
    /// Query defaults taken from the manifest.
    pub options: EvalOptions,
}

fn timed<T>(
    timings: &mut Vec<(&'static str, Duration)>,
    pass: &'static str,
    f: impl FnOnce() -> Result<T, BuildError>,
) -> Result<T, BuildError> {
    let start = Instant::now();
    let out = f()?;
    timings.push((pass, start.elapsed()));
    Ok(out)
}

fn load_ontology(manifest: &BuildManifest) -> Result<Ontology, BuildError> {
    let mapping_texts = manifest
        .mappings
        .iter()
        .map(|p| read(p))
        .collect::<Result<Vec<_>, _>>()?;
    let (doc, origin) = match &manifest.ontology {
        Some(path) => (read(path)?, path.clone()),
        None => (BUNDLED_ONTOLOGY.to_string(), PathBuf::from("<bundled ontology>")),
    };
    let result = if manifest.ontology.is_none() && mapping_texts.is_empty() {
        Ontology::load(&doc, &BUNDLED_MAPPINGS)
    } else {
        Ontology::load(&doc, &mapping_texts)
    };
    result.map_err(|source| BuildError::Ontology { path: origin, source })
}

/// Runs every pass over the inputs named by `manifest`, whose paths must
/// already be resolved.
pub fn build_manifest(manifest: &BuildManifest) -> Result<BuildOutcome, BuildError> {
    let mut timings = Vec::new();
    let mut warnings = Vec::new();

    let ontology = timed(&mut timings, "ontology", || load_ontology(manifest))?;
    let mut graph = PropertyGraph::new(Arc::new(ontology));

    timed(&mut timings, "codefacts", || {
        for path in &manifest.codefacts {
            let wrap = |source| BuildError::CodeFacts {
                path: path.clone(),
                source,
            };
            let bundle = CodeFactsBundle::from_yaml(&read(path)?).map_err(wrap)?;
            ingest_application(&mut graph, &bundle).map_err(wrap)?;
        }
        Ok(())
    })?;

    timed(&mut timings, "inventories", || {
        let mut docs = Vec::with_capacity(manifest.inventories.len());
        for path in &manifest.inventories {
            let wrap = |source| BuildError::Discovery {
                path: path.clone(),
                source: Box::new(source),
            };
            let doc = InventoryDocument::from_yaml(&read(path)?).map_err(wrap)?;
            let report = discovery::ingest_resources(&mut graph, &doc, manifest.skip_unclassified).map_err(wrap)?;
            warnings.extend(
                report
                    .skipped
                    .iter()
                    .map(|id| format!("{}: resource `{id}` has no ontology mapping", path.display())),
            );
            docs.push(doc);
        }
        discovery::link_resources(&mut graph, &docs).map_err(|e| BuildError::Link(Box::new(e)))?;
        Ok(())
    })?;

    timed(&mut timings, "workflows", || {
        let mut scanner = WorkflowScanner::new(manifest.registry_locations.clone());
        for path in &manifest.workflows {
            let wrap = |source| BuildError::Discovery {
                path: path.clone(),
                source: Box::new(source),
            };
            let doc = WorkflowDocument::from_yaml(&read(path)?).map_err(wrap)?;
            scanner.ingest(&mut graph, &doc)?;
        }
        warnings.extend(scanner.finish());
        Ok(())
    })?;

    timed(&mut timings, "link_applications", || {
        let report = discovery::link_applications(&mut graph)?;
        warnings.extend(report.warnings);
        Ok(())
    })?;

    timed(&mut timings, "create_proxied_endpoints", || {
        warnings.extend(dataflow::create_proxied_endpoints(&mut graph)?.warnings);
        Ok(())
    })?;
    timed(&mut timings, "resolve_http_requests", || {
        warnings.extend(dataflow::resolve_http_requests(&mut graph)?.warnings);
        Ok(())
    })?;
    timed(&mut timings, "resolve_storage_requests", || {
        warnings.extend(dataflow::resolve_storage_requests(&mut graph)?.warnings);
        Ok(())
    })?;
    timed(&mut timings, "propagate_log_flows", || {
        warnings.extend(dataflow::propagate_log_flows(&mut graph)?.warnings);
        Ok(())
    })?;

    let stats = GraphStats::of(&graph);
    Ok(BuildOutcome {
        graph,
        options: EvalOptions {
            star_max: manifest.star_max,
        },
        report: BuildReport {
            timings,
            warnings,
            stats,
        },
    })
}

/// Loads the manifest at `path` and builds the graph.
pub fn build(path: impl AsRef<Path>) -> Result<BuildOutcome, BuildError> {
    build_manifest(&BuildManifest::load(path.as_ref())?)
}
