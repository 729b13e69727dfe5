//! Typed knowledge base of entities, semantic relations, data-item annotations
//! and declared value flows.
//!
//! The knowledge base is the graph every other module reasons over. Mutations go
//! through [`KnowledgeBase`] methods which enforce the relation schema and keep
//! `isPartOf` acyclic; [`validate`] re-checks everything for documents loaded
//! from disk.

mod document;
mod schema;
mod validate;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use document::{DocumentError, KbDocument};
pub use schema::{DisclosurePolicy, EntityKind, RelationKind, World};
pub use validate::{validate, Finding, ValidationReport};

/// Well-known attribute keys.
pub mod attr {
    /// Marks the single Person the knowledge base is built for.
    pub const IS_ME: &str = "is_me";
    /// On a Service: posts are publicly visible.
    pub const PUBLIC: &str = "public";
    /// On a Person: sees public posts of public services.
    pub const AUDIENCE_PUBLIC: &str = "audience_public";
    /// On an Organization: explicit company-group tag.
    pub const GROUP: &str = "group";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

pub type Attributes = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub name: String,
    #[serde(default)]
    pub attributes: Attributes,
    #[serde(default = "default_true")]
    pub known_to_user: bool,
}

fn default_true() -> bool {
    true
}

impl Entity {
    fn flag(&self, key: &str) -> bool {
        self.attributes.get(key).is_some_and(|v| v == "true")
    }

    pub fn is_me(&self) -> bool {
        self.kind == EntityKind::Person && self.flag(attr::IS_ME)
    }

    pub fn is_public(&self) -> bool {
        self.kind == EntityKind::Service && self.flag(attr::PUBLIC)
    }

    pub fn is_audience_public(&self) -> bool {
        self.kind == EntityKind::Person && self.flag(attr::AUDIENCE_PUBLIC)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataCategory {
    Identity,
    Contact,
    Location,
    Financial,
    Medical,
    Itinerary,
    Media,
    Credential,
    Other,
}

impl DataCategory {
    pub const ALL: [DataCategory; 9] = [
        DataCategory::Identity,
        DataCategory::Contact,
        DataCategory::Location,
        DataCategory::Financial,
        DataCategory::Medical,
        DataCategory::Itinerary,
        DataCategory::Media,
        DataCategory::Credential,
        DataCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataCategory::Identity => "identity",
            DataCategory::Contact => "contact",
            DataCategory::Location => "location",
            DataCategory::Financial => "financial",
            DataCategory::Medical => "medical",
            DataCategory::Itinerary => "itinerary",
            DataCategory::Media => "media",
            DataCategory::Credential => "credential",
            DataCategory::Other => "other",
        }
    }
}

impl fmt::Display for DataCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Category and sensitivity annotation on a Data entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataItem {
    pub entity: EntityId,
    pub category: DataCategory,
    pub sensitivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticRelation {
    pub id: RelationId,
    pub src: EntityId,
    pub dst: EntityId,
    pub kind: RelationKind,
    pub disclosure_policy: DisclosurePolicy,
}

impl SemanticRelation {
    /// The endpoint opposite to `from`, if `from` is an endpoint.
    pub fn other_end(&self, from: EntityId) -> Option<EntityId> {
        if self.src == from {
            Some(self.dst)
        } else if self.dst == from {
            Some(self.src)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Discount,
    Personalization,
    Convenience,
    LoyaltyReward,
    Other,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::Discount => "discount",
            ValueKind::Personalization => "personalization",
            ValueKind::Convenience => "convenience",
            ValueKind::LoyaltyReward => "loyalty reward",
            ValueKind::Other => "other",
        })
    }
}

/// Value returned to "me" by a service or organization once every package in
/// `condition` has been disclosed to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueFlowDecl {
    pub src: EntityId,
    pub dst: EntityId,
    pub value_kind: ValueKind,
    pub magnitude: f64,
    pub condition: BTreeSet<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KbError {
    #[error("entity name must not be empty")]
    EmptyName,
    #[error("duplicate entity {kind} {name:?}")]
    DuplicateEntity { kind: EntityKind, name: String },
    #[error("a \"me\" person already exists ({existing})")]
    SecondMe { existing: EntityId },
    #[error("attribute {key:?} is only valid on {expected} entities")]
    MisplacedAttribute { key: &'static str, expected: EntityKind },
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("schema violation: {kind} does not accept {src_kind} -> {dst_kind}")]
    SchemaViolation {
        src_kind: EntityKind,
        kind: RelationKind,
        dst_kind: EntityKind,
    },
    #[error("isPartOf {src} -> {dst} would close an ownership cycle")]
    OwnershipCycle { src: EntityId, dst: EntityId },
    #[error("{0} is not a Data entity")]
    NotData(EntityId),
    #[error("sensitivity {0} outside [0, 1]")]
    SensitivityOutOfRange(f64),
    #[error("invalid value flow: {0}")]
    InvalidValueFlow(String),
}

/// The entity/relation graph.
///
/// `version` increases on every successful mutation. Clones are cheap enough
/// to hand out as immutable snapshots; the service layer wraps them in `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    entities: BTreeMap<EntityId, Entity>,
    names: HashMap<(EntityKind, String), EntityId>,
    relations: BTreeMap<RelationId, SemanticRelation>,
    data_items: BTreeMap<EntityId, DataItem>,
    value_decls: Vec<ValueFlowDecl>,
    version: u64,
    outsourcing_return: bool,
    next_entity: u32,
    next_relation: u32,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        Self::new()
    }
}

impl KnowledgeBase {
    pub fn new() -> Self {
        KnowledgeBase {
            entities: BTreeMap::new(),
            names: HashMap::new(),
            relations: BTreeMap::new(),
            data_items: BTreeMap::new(),
            value_decls: Vec::new(),
            version: 0,
            outsourcing_return: true,
            next_entity: 1,
            next_relation: 1,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Whether outsourcing contracts return disclosed packages to the requesting service.
    pub fn outsourcing_return(&self) -> bool {
        self.outsourcing_return
    }

    pub fn set_outsourcing_return(&mut self, enabled: bool) {
        if self.outsourcing_return != enabled {
            self.outsourcing_return = enabled;
            self.version += 1;
        }
    }

    pub fn add_entity(
        &mut self,
        kind: EntityKind,
        name: &str,
        attributes: Attributes,
    ) -> Result<EntityId, KbError> {
        if name.trim().is_empty() {
            return Err(KbError::EmptyName);
        }
        if self.names.contains_key(&(kind, name.to_string())) {
            return Err(KbError::DuplicateEntity {
                kind,
                name: name.to_string(),
            });
        }
        for (key, expected) in [
            (attr::IS_ME, EntityKind::Person),
            (attr::AUDIENCE_PUBLIC, EntityKind::Person),
            (attr::PUBLIC, EntityKind::Service),
        ] {
            if kind != expected && attributes.contains_key(key) {
                return Err(KbError::MisplacedAttribute { key, expected });
            }
        }
        let id = EntityId(self.next_entity);
        let entity = Entity {
            id,
            kind,
            name: name.to_string(),
            attributes,
            known_to_user: true,
        };
        if entity.is_me() {
            if let Some(existing) = self.me() {
                return Err(KbError::SecondMe { existing });
            }
        }
        self.next_entity += 1;
        self.names.insert((kind, entity.name.clone()), id);
        self.entities.insert(id, entity);
        self.version += 1;
        Ok(id)
    }

    /// Convenience for the common case of an entity without attributes.
    pub fn add(&mut self, kind: EntityKind, name: &str) -> Result<EntityId, KbError> {
        self.add_entity(kind, name, Attributes::new())
    }

    pub fn add_me(&mut self, name: &str) -> Result<EntityId, KbError> {
        let attrs = Attributes::from([(attr::IS_ME.to_string(), "true".to_string())]);
        self.add_entity(EntityKind::Person, name, attrs)
    }

    pub fn set_known_to_user(&mut self, id: EntityId, known: bool) -> Result<(), KbError> {
        let entity = self.entities.get_mut(&id).ok_or(KbError::UnknownEntity(id))?;
        if entity.known_to_user != known {
            entity.known_to_user = known;
            self.version += 1;
        }
        Ok(())
    }

    pub fn add_relation(
        &mut self,
        src: EntityId,
        kind: RelationKind,
        dst: EntityId,
        disclosure_policy: Option<DisclosurePolicy>,
    ) -> Result<RelationId, KbError> {
        let src_kind = self.entity(src).ok_or(KbError::UnknownEntity(src))?.kind;
        let dst_kind = self.entity(dst).ok_or(KbError::UnknownEntity(dst))?.kind;
        if !kind.accepts(src_kind, dst_kind) {
            return Err(KbError::SchemaViolation {
                src_kind,
                kind,
                dst_kind,
            });
        }
        if kind == RelationKind::IsPartOf && (src == dst || self.is_part_of_reachable(dst, src)) {
            return Err(KbError::OwnershipCycle { src, dst });
        }
        let id = RelationId(self.next_relation);
        self.next_relation += 1;
        self.relations.insert(
            id,
            SemanticRelation {
                id,
                src,
                dst,
                kind,
                disclosure_policy: disclosure_policy.unwrap_or_else(|| kind.default_policy()),
            },
        );
        self.version += 1;
        Ok(id)
    }

    /// Depth-first search along `isPartOf` edges from `from` looking for `target`.
    fn is_part_of_reachable(&self, from: EntityId, target: EntityId) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(node) = stack.pop() {
            if node == target {
                return true;
            }
            if !seen.insert(node) {
                continue;
            }
            stack.extend(self.parents(node));
        }
        false
    }

    pub fn annotate_data(
        &mut self,
        entity: EntityId,
        category: DataCategory,
        sensitivity: f64,
    ) -> Result<(), KbError> {
        let kind = self.entity(entity).ok_or(KbError::UnknownEntity(entity))?.kind;
        if kind != EntityKind::Data {
            return Err(KbError::NotData(entity));
        }
        if !(0.0..=1.0).contains(&sensitivity) {
            return Err(KbError::SensitivityOutOfRange(sensitivity));
        }
        self.data_items.insert(
            entity,
            DataItem {
                entity,
                category,
                sensitivity,
            },
        );
        self.version += 1;
        Ok(())
    }

    pub fn declare_value_flow(&mut self, decl: ValueFlowDecl) -> Result<(), KbError> {
        let src = self.entity(decl.src).ok_or(KbError::UnknownEntity(decl.src))?;
        if !matches!(src.kind, EntityKind::Service | EntityKind::Organization) {
            return Err(KbError::InvalidValueFlow(format!(
                "source {} is a {}, expected Service or Organization",
                decl.src, src.kind
            )));
        }
        let dst = self.entity(decl.dst).ok_or(KbError::UnknownEntity(decl.dst))?;
        if !dst.is_me() {
            return Err(KbError::InvalidValueFlow(format!(
                "destination {} is not the \"me\" person",
                decl.dst
            )));
        }
        if !(0.0..=1.0).contains(&decl.magnitude) {
            return Err(KbError::InvalidValueFlow(format!(
                "magnitude {} outside [0, 1]",
                decl.magnitude
            )));
        }
        if decl.condition.is_empty() {
            return Err(KbError::InvalidValueFlow("empty condition".into()));
        }
        for package in &decl.condition {
            let entity = self.entity(*package).ok_or(KbError::UnknownEntity(*package))?;
            if entity.kind != EntityKind::DataPackage {
                return Err(KbError::InvalidValueFlow(format!(
                    "condition member {package} is not a DataPackage"
                )));
            }
        }
        self.value_decls.push(decl);
        self.version += 1;
        Ok(())
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn lookup(&self, kind: EntityKind, name: &str) -> Option<EntityId> {
        self.names.get(&(kind, name.to_string())).copied()
    }

    /// Resolve a name regardless of kind; `None` when absent or ambiguous.
    pub fn lookup_name(&self, name: &str) -> Option<EntityId> {
        let mut hits = EntityKind::ALL
            .iter()
            .filter_map(|kind| self.lookup(*kind, name));
        let first = hits.next()?;
        hits.next().is_none().then_some(first)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entities_of(&self, kind: EntityKind) -> impl Iterator<Item = &Entity> {
        self.entities.values().filter(move |e| e.kind == kind)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation(&self, id: RelationId) -> Option<&SemanticRelation> {
        self.relations.get(&id)
    }

    pub fn relations(&self) -> impl Iterator<Item = &SemanticRelation> {
        self.relations.values()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn relations_of(&self, kind: RelationKind) -> impl Iterator<Item = &SemanticRelation> {
        self.relations.values().filter(move |r| r.kind == kind)
    }

    pub fn data_item(&self, entity: EntityId) -> Option<&DataItem> {
        self.data_items.get(&entity)
    }

    pub fn data_items(&self) -> impl Iterator<Item = &DataItem> {
        self.data_items.values()
    }

    pub fn value_decls(&self) -> &[ValueFlowDecl] {
        &self.value_decls
    }

    pub fn me(&self) -> Option<EntityId> {
        self.entities.values().find(|e| e.is_me()).map(|e| e.id)
    }

    pub fn name_of(&self, id: EntityId) -> &str {
        self.entity(id).map_or("<unknown>", |e| e.name.as_str())
    }

    /// Direct `isPartOf` parents of an organization.
    pub fn parents(&self, org: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        self.relations
            .values()
            .filter(move |r| r.kind == RelationKind::IsPartOf && r.src == org)
            .map(|r| r.dst)
    }

    /// Data items contained in a package, in id order.
    pub fn package_items(&self, package: EntityId) -> Vec<EntityId> {
        let items: BTreeSet<_> = self
            .relations
            .values()
            .filter(|r| r.kind == RelationKind::Contains && r.src == package)
            .map(|r| r.dst)
            .collect();
        items.into_iter().collect()
    }

    /// Whether `item` is owned by "me". Items owned by anyone else are ignored by
    /// every projection from packages to items.
    pub fn is_my_item(&self, item: EntityId) -> bool {
        let Some(me) = self.me() else { return false };
        self.relations
            .values()
            .any(|r| r.kind == RelationKind::OwnsData && r.src == me && r.dst == item)
    }

    /// "My" items in a package with their annotations (unannotated items count as
    /// sensitivity 0, category other).
    pub fn my_package_items(&self, package: EntityId) -> Vec<DataItem> {
        self.package_items(package)
            .into_iter()
            .filter(|item| self.is_my_item(*item))
            .map(|item| {
                self.data_item(item).cloned().unwrap_or(DataItem {
                    entity: item,
                    category: DataCategory::Other,
                    sensitivity: 0.0,
                })
            })
            .collect()
    }

    /// Highest sensitivity among "my" items in the package; 0 when none.
    pub fn package_impact(&self, package: EntityId) -> f64 {
        self.my_package_items(package)
            .iter()
            .map(|item| item.sensitivity)
            .fold(0.0, f64::max)
    }

    /// Whether `package` has a `requiredBy` relation to `service`.
    pub fn is_required_by(&self, package: EntityId, service: EntityId) -> bool {
        self.relations.values().any(|r| {
            r.kind == RelationKind::RequiredBy && r.src == package && r.dst == service
        })
    }

    /// Company groups an organization belongs to: its explicit `group` tag, or
    /// else the names of its top-most `isPartOf` ancestors (itself when it has
    /// no parent).
    pub fn company_groups(&self, org: EntityId) -> BTreeSet<String> {
        if let Some(tag) = self.entity(org).and_then(|e| e.attributes.get(attr::GROUP)) {
            return BTreeSet::from([tag.clone()]);
        }
        let mut roots = BTreeSet::new();
        let mut stack = vec![org];
        let mut seen = BTreeSet::new();
        while let Some(node) = stack.pop() {
            if !seen.insert(node) {
                continue;
            }
            let parents: Vec<_> = self.parents(node).collect();
            if parents.is_empty() {
                roots.insert(self.name_of(node).to_string());
            }
            stack.extend(parents);
        }
        roots
    }

    /// The service itself, the organizations providing it, and all their
    /// `isPartOf` ancestors.
    pub fn provider_chain(&self, service: EntityId) -> BTreeSet<EntityId> {
        let mut chain = BTreeSet::from([service]);
        let mut stack: Vec<_> = self
            .relations
            .values()
            .filter(|r| r.kind == RelationKind::ProvidedBy && r.src == service)
            .map(|r| r.dst)
            .collect();
        while let Some(org) = stack.pop() {
            if chain.insert(org) {
                stack.extend(self.parents(org));
            }
        }
        chain
    }

    /// Rebuild from raw parts; used by document loading. Callers check references.
    fn from_parts(
        entities: Vec<Entity>,
        relations: Vec<SemanticRelation>,
        data_items: Vec<DataItem>,
        value_decls: Vec<ValueFlowDecl>,
        version: u64,
        outsourcing_return: bool,
    ) -> Self {
        let next_entity = entities.iter().map(|e| e.id.0 + 1).max().unwrap_or(1);
        let next_relation = relations.iter().map(|r| r.id.0 + 1).max().unwrap_or(1);
        KnowledgeBase {
            names: entities
                .iter()
                .map(|e| ((e.kind, e.name.clone()), e.id))
                .collect(),
            entities: entities.into_iter().map(|e| (e.id, e)).collect(),
            relations: relations.into_iter().map(|r| (r.id, r)).collect(),
            data_items: data_items.into_iter().map(|d| (d.entity, d)).collect(),
            value_decls,
            version,
            outsourcing_return,
            next_entity,
            next_relation,
        }
    }
}
