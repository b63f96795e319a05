use crate::graph::{EdgeType, GraphError, PropertyGraph};

use super::normalize_image;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkReport {
    /// RUNS_ON edges created.
    pub runs_on: usize,
    /// Registry to container DFG edges created.
    pub pulls: usize,
    pub warnings: Vec<String>,
}

/// Anchors applications on compute resources and adds the registry pull
/// flows. Safe to rerun; existing edges are not duplicated.
pub fn link_applications(graph: &mut PropertyGraph) -> Result<LinkReport, GraphError> {
    let mut report = LinkReport::default();

    for app in graph.nodes_of_class("Application") {
        let node = graph.node(app).expect("listed by the label index");
        let image = node.str_property("image").map(normalize_image);
        let host = node.str_property("host").map(str::to_string);
        let name = node.name.clone();

        let mut targets = Vec::new();
        if let Some(image) = &image {
            if let Some(img) = graph.find_node("ContainerImage", image) {
                targets.extend(
                    graph
                        .predecessors(img, EdgeType::UsesImage)
                        .into_iter()
                        .filter(|&c| graph.node_matches_label(c, "Container")),
                );
            }
        }
        if let Some(host) = &host {
            match graph.find_by_provider_id(host) {
                Some(c) if graph.node_matches_label(c, "Compute") => targets.push(c),
                Some(_) => report
                    .warnings
                    .push(format!("application `{name}`: host `{host}` is not a compute resource")),
                None => report
                    .warnings
                    .push(format!("application `{name}`: host `{host}` is not in any inventory")),
            }
        }
        if targets.is_empty() {
            report.warnings.push(format!(
                "application `{name}` is not anchored on any compute resource; location queries will not see it"
            ));
        }
        for target in targets {
            report.runs_on += graph.ensure_edge(app, target, EdgeType::RunsOn)? as usize;
        }
    }

    for image in graph.nodes_of_class("ContainerImage") {
        let registries = graph.successors(image, EdgeType::PushesTo);
        let containers = graph.predecessors(image, EdgeType::UsesImage);
        for &registry in &registries {
            for &container in &containers {
                report.pulls += graph.ensure_edge(registry, container, EdgeType::Dfg)? as usize;
            }
        }
    }

    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(report)
}
