//! Cloud property graph: a code property graph enriched with deployed cloud
//! resources, their security features, and cross-service data flows.
//!
//! The build runs as a fixed sequence of passes over one [`PropertyGraph`]:
//!
//! 1. [`codefacts`] turns per-application code-fact bundles into code nodes,
//!    intra-application DFG edges and framework functionality nodes.
//! 2. [`discovery`] ingests recorded cloud inventories and CI workflows,
//!    classifying resources through the [`Ontology`].
//! 3. [`dataflow`] resolves HTTP, storage and log flows across services.
//!
//! The finished graph is queried with the Cypher subset in [`query`].

pub mod catalog;
pub mod codefacts;
pub mod dataflow;
pub mod discovery;
pub mod graph;
pub mod ontology;
pub mod pipeline;
pub mod query;

pub use graph::{
    export_graph, import_graph, Edge, EdgeId, EdgeType, GraphError, Node, NodeId, Path, Properties, PropertyGraph,
    Scalar,
};
pub use ontology::{Ontology, OntologyError};
pub use pipeline::{build, BuildError, BuildManifest, BuildOutcome, BuildReport};
pub use query::{evaluate, explain, parse_query, EvalOptions, MatchResult, QueryAst, QueryError};
