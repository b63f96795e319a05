mod common;

use std::collections::BTreeSet;
use std::fs;

use cloudpg_core::catalog::{
    CROSS_REGION_APPLICATION_FLOWS, CROSS_REGION_RESOURCE_FLOWS, EXPRESSIONS_TO_PUBLIC_STORAGE, PUBLIC_STORAGE_WRITES,
    WEAK_TRANSPORT_ENCRYPTION,
};
use cloudpg_core::pipeline::build_manifest;
use cloudpg_core::{
    build, evaluate, explain, export_graph, parse_query, BuildError, BuildManifest, EvalOptions, MatchResult,
    PropertyGraph,
};

use common::{clean, faulty, fixture_manifest};

fn run(graph: &PropertyGraph, text: &str) -> Vec<MatchResult> {
    evaluate(graph, &parse_query(text).unwrap(), &EvalOptions::default())
}

fn name(graph: &PropertyGraph, r: &MatchResult, var: &str) -> String {
    graph.node(r.bindings[var]).unwrap().name.clone()
}

fn names(graph: &PropertyGraph, results: &[MatchResult], vars: &[&str]) -> BTreeSet<Vec<String>> {
    results
        .iter()
        .map(|r| vars.iter().map(|v| name(graph, r, v)).collect())
        .collect()
}

fn set(rows: &[&[&str]]) -> BTreeSet<Vec<String>> {
    rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
}

#[test]
fn faulty_fixture_has_the_testbed_shape() {
    let stats = build(fixture_manifest("bookinfo")).unwrap().report.stats;
    assert_eq!(stats.count("Application"), 4);
    assert_eq!(stats.count("LoadBalancer"), 1);
    assert_eq!(stats.count("ObjectStorage"), 2);
    let g = faulty();
    let public: Vec<_> = g
        .nodes_of_kind("Storage")
        .into_iter()
        .map(|id| g.node(id).unwrap())
        .filter(|n| n.property("public_access") == Some(&true.into()))
        .map(|n| n.name.as_str())
        .collect();
    assert_eq!(public, ["am-containerlog"]);
    let providers: BTreeSet<_> = g
        .nodes_of_kind("CloudResource")
        .into_iter()
        .map(|id| g.node(id).unwrap())
        .filter_map(|n| n.str_property("provider_id"))
        .collect();
    assert!(
        providers.contains("i-0ratings") && providers.contains("aks-bookinfo") && providers.contains("pod/details-v1")
    );
}

#[test]
fn public_storage_writes_find_the_log_forwarder() {
    let g = faulty();
    let results = run(g, PUBLIC_STORAGE_WRITES);
    assert_eq!(
        names(g, &results, &["r1", "r2"]),
        set(&[&["kubernetes-logs", "am-containerlog"]])
    );
    assert_eq!(results.len(), 1);
    assert_eq!(
        g.node(results[0].bindings["rq"]).unwrap().str_property("type"),
        Some("append")
    );
    assert!(run(clean(), PUBLIC_STORAGE_WRITES).is_empty());
}

#[test]
fn logged_request_values_reach_public_storage() {
    let g = faulty();
    let results = run(g, EXPRESSIONS_TO_PUBLIC_STORAGE);
    assert_eq!(
        names(g, &results, &["e", "s"]),
        set(&[&["request", "am-containerlog"], &["request.values", "am-containerlog"]])
    );
    let direct = results.iter().find(|r| name(g, r, "e") == "request.values").unwrap();
    let classes: Vec<_> = direct
        .path
        .as_ref()
        .unwrap()
        .nodes
        .iter()
        .map(|id| g.node(*id).unwrap().class.as_str())
        .collect();
    assert_eq!(
        classes,
        [
            "Expression",
            "LogOutput",
            "Container",
            "ObjectStorage",
            "HttpEndpoint",
            "NoAuthentication"
        ]
    );
    assert!(run(clean(), EXPRESSIONS_TO_PUBLIC_STORAGE).is_empty());
}

#[test]
fn weak_transport_encryption_is_the_log_storage_endpoint() {
    let g = faulty();
    let results = run(g, WEAK_TRANSPORT_ENCRYPTION);
    assert_eq!(
        names(g, &results, &["h"]),
        set(&[&["https://amlogs.blob.core.windows.net/am-containerlog"]])
    );
    for r in &results {
        let te = g.node(r.bindings["te"]).unwrap();
        assert_eq!(te.str_property("tlsVersion"), Some("TLS1_1"));
    }
    // n is either the storage or the endpoint's authentication feature
    assert_eq!(names(g, &results, &["n"]), set(&[&["am-containerlog"], &["none"]]));
    assert!(run(clean(), WEAK_TRANSPORT_ENCRYPTION).is_empty());
}

#[test]
fn registry_in_us_feeds_european_containers() {
    let g = faulty();
    let results = run(g, CROSS_REGION_RESOURCE_FLOWS);
    assert_eq!(
        names(g, &results, &["l1", "l2"]),
        set(&[&["us", "europe"], &["europe", "us"]])
    );
    assert_eq!(results.len(), 6);
    let containers: BTreeSet<_> = results
        .iter()
        .flat_map(|r| r.path.as_ref().unwrap().nodes.clone())
        .filter_map(|id| {
            let n = g.node(id).unwrap();
            (n.class == "Container").then(|| n.name.clone())
        })
        .collect();
    assert_eq!(
        containers,
        ["details-v1", "productpage-v1", "reviews-v1"].map(String::from).into()
    );
    assert!(run(clean(), CROSS_REGION_RESOURCE_FLOWS).is_empty());
}

#[test]
fn ratings_vm_calls_into_europe() {
    let g = faulty();
    let results = run(g, CROSS_REGION_APPLICATION_FLOWS);
    assert_eq!(names(g, &results, &["l1", "l2"]), set(&[&["us-east-1", "europe"]]));
    assert_eq!(
        names(g, &results, &["r"]),
        set(&[&["POST https://bookinfo.example.io/reviews"]])
    );
    assert_eq!(names(g, &results, &["e"]), set(&[&["/reviews"]]));
    for r in &results {
        let path = r.path.as_ref().unwrap();
        let vm = g.node(path.nodes[1]).unwrap();
        assert_eq!((vm.class.as_str(), vm.name.as_str()), ("VirtualMachine", "ratings"));
    }
    assert!(run(clean(), CROSS_REGION_APPLICATION_FLOWS).is_empty());
}

#[test]
fn public_storage_writes_seed_at_the_storage_request() {
    let ast = parse_query(PUBLIC_STORAGE_WRITES).unwrap();
    let plan = explain(faulty(), &ast, &EvalOptions::default());
    // CloudResource: vm, 3 pods, cluster, 3 storages, ingress, 3 images,
    // registry. HttpEndpoint: 10 local or storage endpoints and 6 proxied.
    // ObjectStorageRequest and NoAuthentication tie at 2; the earlier
    // pattern position wins.
    assert_eq!(plan.candidates, [13, 2, 3, 16, 2]);
    assert_eq!(plan.seed, 1);
    assert_eq!(plan.seed_pattern(), "(rq:ObjectStorageRequest)");
}

#[test]
fn builds_are_byte_identical() {
    for name in ["bookinfo", "bookinfo-clean"] {
        let a = export_graph(&build(fixture_manifest(name)).unwrap().graph);
        let b = export_graph(&build(fixture_manifest(name)).unwrap().graph);
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn manifest_paths_resolve_against_the_manifest_directory() {
    let manifest = BuildManifest::load(&fixture_manifest("bookinfo")).unwrap();
    assert!(manifest.inventories.iter().all(|p| p.is_absolute() && p.exists()));
    assert_eq!(manifest.registry_locations["ghcr.io"], "us");
    let outcome = build_manifest(&manifest).unwrap();
    assert_eq!(outcome.options.star_max, 10);
    assert_eq!(outcome.report.timings.len(), 9);
}

#[test]
fn empty_manifest_builds_an_empty_graph() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.yaml");
    fs::write(&path, "inventories: []\ncodefacts: []\n").unwrap();
    let outcome = build(&path).unwrap();
    assert_eq!(outcome.graph.node_count(), 0);
    assert_eq!(outcome.graph.edge_count(), 0);
    assert_eq!(outcome.report.stats.node_total(), 0);
}

#[test]
fn missing_inventory_is_a_path_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.yaml");
    fs::write(&path, "inventories: [nowhere.yaml]\n").unwrap();
    match build(&path) {
        Err(BuildError::Io { path, .. }) => assert!(path.ends_with("nowhere.yaml")),
        Err(other) => panic!("unexpected error {other}"),
        Ok(_) => panic!("build should fail"),
    }
}

#[test]
fn unknown_provider_type_names_the_resource() {
    let dir = tempfile::tempdir().unwrap();
    let inventory = dir.path().join("aws.yaml");
    fs::write(
        &inventory,
        "provider: aws\nresources:\n  - { id: x-1, name: thing, provider_type: \"AWS::Unknown::Thing\" }\n",
    )
    .unwrap();
    let path = dir.path().join("manifest.yaml");
    fs::write(&path, "inventories: [aws.yaml]\n").unwrap();
    let err = build(&path)
        .err()
        .expect("unclassified resource fails the build")
        .to_string();
    assert!(err.contains("aws.yaml") && err.contains("AWS::Unknown::Thing"), "{err}");

    fs::write(&path, "inventories: [aws.yaml]\nskip_unclassified: true\n").unwrap();
    let outcome = build(&path).unwrap();
    assert_eq!(outcome.graph.node_count(), 0);
    assert_eq!(outcome.report.warnings.len(), 1);
}
