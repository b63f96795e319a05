//! Cloud resource ontology.
//!
//! Three single-inheritance taxonomies (cloud resources, software frameworks,
//! functionalities and security features) plus per-provider instantiation
//! mappings that bind concrete resource types such as `AWS::EC2::Volume` to
//! abstract classes such as `BlockStorage`.
//!
//! The ontology is immutable once loaded and can be shared across threads.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled core ontology document.
pub const BUNDLED_ONTOLOGY: &str = include_str!("../data/ontology.yaml");

/// Bundled provider mapping documents (aws, azure, k8s).
pub const BUNDLED_MAPPINGS: [&str; 3] = [
    include_str!("../data/mappings/aws.yaml"),
    include_str!("../data/mappings/azure.yaml"),
    include_str!("../data/mappings/k8s.yaml"),
];

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("malformed ontology document: {0}")]
    Syntax(#[from] serde_yaml::Error),
    #[error("duplicate class `{0}`")]
    DuplicateClass(String),
    #[error("class `{class}` references unknown class `{reference}`")]
    UnresolvedReference { class: String, reference: String },
    #[error("class `{class}` has parent `{parent}` of a different kind")]
    ParentKindMismatch { class: String, parent: String },
    #[error("class `{class}` offers `{offered}`, which is not a functionality or security feature")]
    InvalidOffer { class: String, offered: String },
    #[error("inheritance cycle through class `{0}`")]
    Cycle(String),
    #[error("mapping {provider}/{provider_type} targets `{class}`, which is not a resource class")]
    MappingNotResource {
        provider: String,
        provider_type: String,
        class: String,
    },
    #[error("duplicate mapping for {provider}/{provider_type}")]
    DuplicateMapping { provider: String, provider_type: String },
    #[error("no ontology mapping for {provider} type `{provider_type}`")]
    UnknownMapping { provider: String, provider_type: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKind {
    Resource,
    Framework,
    Functionality,
    SecurityFeature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    String,
    Boolean,
    Integer,
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarKind::String => "string",
            ScalarKind::Boolean => "boolean",
            ScalarKind::Integer => "integer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataProperty {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ScalarKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologyClass {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub kind: ClassKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data_properties: Vec<DataProperty>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstanceMapping {
    pub provider: String,
    pub provider_type: String,
    pub ontology_class: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OntologyDocument {
    classes: Vec<OntologyClass>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    mappings: Vec<MappingDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingDocument {
    provider: String,
    types: Vec<MappingEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingEntry {
    provider_type: String,
    ontology_class: String,
}

/// A validated ontology. Every parent, offers and mapping reference resolves.
#[derive(Debug, Clone)]
pub struct Ontology {
    classes: BTreeMap<String, OntologyClass>,
    /// Declaration order, used for deterministic feature ordering.
    order: Vec<String>,
    mappings: Vec<InstanceMapping>,
    mapping_index: HashMap<(String, String), usize>,
}

impl Ontology {
    /// Parses and validates an ontology document plus any number of
    /// provider mapping documents.
    pub fn load<S: AsRef<str>>(ontology_doc: &str, mapping_docs: &[S]) -> Result<Self, OntologyError> {
        let doc: OntologyDocument = serde_yaml::from_str(ontology_doc)?;
        let mut mapping_sets = doc.mappings;
        for text in mapping_docs {
            mapping_sets.push(serde_yaml::from_str(text.as_ref())?);
        }

        let mut classes = BTreeMap::new();
        let mut order = Vec::with_capacity(doc.classes.len());
        for class in doc.classes {
            if classes.contains_key(&class.name) {
                return Err(OntologyError::DuplicateClass(class.name));
            }
            order.push(class.name.clone());
            classes.insert(class.name.clone(), class);
        }

        let mut mappings = Vec::new();
        for set in mapping_sets {
            for entry in set.types {
                mappings.push(InstanceMapping {
                    provider: set.provider.clone(),
                    provider_type: entry.provider_type,
                    ontology_class: entry.ontology_class,
                });
            }
        }

        let mut ontology = Ontology {
            classes,
            order,
            mappings: Vec::new(),
            mapping_index: HashMap::new(),
        };
        ontology.validate_classes()?;
        for mapping in mappings {
            ontology.add_mapping(mapping)?;
        }
        Ok(ontology)
    }

    /// The bundled core ontology with the aws, azure and k8s instantiations.
    pub fn bundled() -> Self {
        Self::load(BUNDLED_ONTOLOGY, &BUNDLED_MAPPINGS).expect("bundled ontology is valid")
    }

    fn validate_classes(&self) -> Result<(), OntologyError> {
        for name in &self.order {
            let class = &self.classes[name];
            if let Some(parent) = &class.parent {
                let parent_class = self
                    .classes
                    .get(parent)
                    .ok_or_else(|| OntologyError::UnresolvedReference {
                        class: name.clone(),
                        reference: parent.clone(),
                    })?;
                if parent_class.kind != class.kind {
                    return Err(OntologyError::ParentKindMismatch {
                        class: name.clone(),
                        parent: parent.clone(),
                    });
                }
            }
            for offered in &class.offers {
                let target = self
                    .classes
                    .get(offered)
                    .ok_or_else(|| OntologyError::UnresolvedReference {
                        class: name.clone(),
                        reference: offered.clone(),
                    })?;
                if !matches!(target.kind, ClassKind::Functionality | ClassKind::SecurityFeature) {
                    return Err(OntologyError::InvalidOffer {
                        class: name.clone(),
                        offered: offered.clone(),
                    });
                }
            }
        }
        // Walking parents from any class must reach a root within |classes| steps.
        for name in &self.order {
            let mut current = name.as_str();
            let mut steps = 0;
            while let Some(parent) = self.classes[current].parent.as_deref() {
                steps += 1;
                if steps > self.classes.len() {
                    return Err(OntologyError::Cycle(name.clone()));
                }
                current = parent;
            }
        }
        Ok(())
    }

    fn add_mapping(&mut self, mapping: InstanceMapping) -> Result<(), OntologyError> {
        match self.classes.get(&mapping.ontology_class) {
            None => {
                return Err(OntologyError::UnresolvedReference {
                    class: format!("{}/{}", mapping.provider, mapping.provider_type),
                    reference: mapping.ontology_class,
                })
            }
            Some(class) if class.kind != ClassKind::Resource => {
                return Err(OntologyError::MappingNotResource {
                    provider: mapping.provider,
                    provider_type: mapping.provider_type,
                    class: mapping.ontology_class,
                })
            }
            Some(_) => {}
        }
        let key = (mapping.provider.clone(), mapping.provider_type.clone());
        if self.mapping_index.contains_key(&key) {
            return Err(OntologyError::DuplicateMapping {
                provider: mapping.provider,
                provider_type: mapping.provider_type,
            });
        }
        self.mapping_index.insert(key, self.mappings.len());
        self.mappings.push(mapping);
        Ok(())
    }

    pub fn class(&self, name: &str) -> Option<&OntologyClass> {
        self.classes.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.classes.contains_key(name)
    }

    /// Classes in declaration order.
    pub fn classes(&self) -> impl Iterator<Item = &OntologyClass> {
        self.order.iter().map(move |name| &self.classes[name])
    }

    pub fn mappings(&self) -> &[InstanceMapping] {
        &self.mappings
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    fn require(&self, name: &str) -> Result<&OntologyClass, OntologyError> {
        self.classes
            .get(name)
            .ok_or_else(|| OntologyError::UnknownClass(name.to_string()))
    }

    /// The class itself followed by its parent chain up to the root.
    pub fn lineage<'a>(&'a self, name: &'a str) -> Result<Vec<&'a str>, OntologyError> {
        self.require(name)?;
        let mut chain = vec![name];
        let mut current = name;
        while let Some(parent) = self.classes[current].parent.as_deref() {
            chain.push(parent);
            current = parent;
        }
        Ok(chain)
    }

    /// Reflexive, transitive subclass test.
    pub fn is_subclass(&self, child: &str, ancestor: &str) -> Result<bool, OntologyError> {
        self.require(ancestor)?;
        Ok(self.lineage(child)?.contains(&ancestor))
    }

    /// Every class (including `ancestor` itself) that is a subclass of `ancestor`.
    pub fn descendants(&self, ancestor: &str) -> Result<BTreeSet<&str>, OntologyError> {
        self.require(ancestor)?;
        let mut out = BTreeSet::new();
        for name in &self.order {
            if self.lineage(name)?.contains(&ancestor) {
                out.insert(name.as_str());
            }
        }
        Ok(out)
    }

    pub fn resolve_instance_class(&self, provider: &str, provider_type: &str) -> Result<&str, OntologyError> {
        self.mapping_index
            .get(&(provider.to_string(), provider_type.to_string()))
            .map(|&i| self.mappings[i].ontology_class.as_str())
            .ok_or_else(|| OntologyError::UnknownMapping {
                provider: provider.to_string(),
                provider_type: provider_type.to_string(),
            })
    }

    /// Union of `offers` over the class and its ancestors, root first, each
    /// class contributing in declaration order, without duplicates.
    pub fn offered_features(&self, class_name: &str) -> Result<Vec<&str>, OntologyError> {
        let lineage = self.lineage(class_name)?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for name in lineage.iter().rev() {
            for offered in &self.classes[*name].offers {
                if seen.insert(offered.as_str()) {
                    out.push(offered.as_str());
                }
            }
        }
        Ok(out)
    }

    /// Data properties declared on the class or any ancestor.
    pub fn data_properties(&self, class_name: &str) -> Result<Vec<&DataProperty>, OntologyError> {
        let lineage = self.lineage(class_name)?;
        Ok(lineage
            .iter()
            .rev()
            .flat_map(|name| self.classes[*name].data_properties.iter())
            .collect())
    }

    /// Serializes classes and mappings into one ontology document that
    /// [`Ontology::load`] accepts.
    pub fn to_yaml(&self) -> String {
        let mut by_provider: BTreeMap<&str, Vec<MappingEntry>> = BTreeMap::new();
        for m in &self.mappings {
            by_provider.entry(&m.provider).or_default().push(MappingEntry {
                provider_type: m.provider_type.clone(),
                ontology_class: m.ontology_class.clone(),
            });
        }
        let doc = OntologyDocument {
            classes: self.classes().cloned().collect(),
            mappings: by_provider
                .into_iter()
                .map(|(provider, types)| MappingDocument {
                    provider: provider.to_string(),
                    types,
                })
                .collect(),
        };
        serde_yaml::to_string(&doc).expect("ontology serializes")
    }
}
