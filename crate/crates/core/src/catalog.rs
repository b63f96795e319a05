//! Stock weakness queries.

/// Append requests from a resource into a storage whose endpoint accepts
/// unauthenticated access.
pub const PUBLIC_STORAGE_WRITES: &str = r#"MATCH p=(r1:CloudResource)<-[:SOURCE]-
 (rq:ObjectStorageRequest)-[:TO]->(r2:Storage)--
 (:HttpEndpoint)-[:AUTHENTICITY]-(:NoAuthentication)
WHERE rq.type = "append" RETURN p"#;

/// Code expressions whose values flow into publicly accessible storage.
pub const EXPRESSIONS_TO_PUBLIC_STORAGE: &str = r#"MATCH p=(e:Expression)-[:DFG*]->(s:ObjectStorage)--
  ()-[:AUTHENTICITY]-(:NoAuthentication) RETURN p"#;

/// HTTP endpoints with transport encryption disabled or below TLS 1.2.
pub const WEAK_TRANSPORT_ENCRYPTION: &str = r#"MATCH p=(n:Node)--(h:HttpEndpoint)--
  (te:TransportEncryption) WHERE te.enabled =
  false OR te.tlsVersion <> "TLS1_2" RETURN p"#;

/// Data flows between cloud resources located in different regions.
pub const CROSS_REGION_RESOURCE_FLOWS: &str = r#"MATCH p=(l1:GeoLocation)--(:CloudResource)-
  [:DFG]-(:CloudResource)--(l2:GeoLocation)
WHERE l1 <> l2 RETURN p"#;

/// HTTP requests from an application to an application served from a
/// different region.
pub const CROSS_REGION_APPLICATION_FLOWS: &str = r#"MATCH p=(l1:GeoLocation)-[]-(:Compute)-[:RUNS_ON]-
  (:Application)-[]-(r:HttpRequest)-[:TO]-
  (e:HttpEndpoint)-[*2]-(:Application)-[:RUNS_ON]-
  (:Compute)-[]-(l2:GeoLocation)
WHERE l1 <> l2 RETURN p"#;

/// All stock queries with short names.
pub const ALL: [(&str, &str); 5] = [
    ("public-storage-writes", PUBLIC_STORAGE_WRITES),
    ("expressions-to-public-storage", EXPRESSIONS_TO_PUBLIC_STORAGE),
    ("weak-transport-encryption", WEAK_TRANSPORT_ENCRYPTION),
    ("cross-region-resource-flows", CROSS_REGION_RESOURCE_FLOWS),
    ("cross-region-application-flows", CROSS_REGION_APPLICATION_FLOWS),
];

/// Looks up a stock query by name.
pub fn lookup(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, q)| *q)
}
