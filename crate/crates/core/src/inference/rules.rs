//! One-step propagation rules: where can a package sitting at an entity go next?

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::FlowEdgeKind;
use crate::kb::{DisclosurePolicy, EntityId, EntityKind, KnowledgeBase, RelationId, RelationKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    /// Step factor applied to discretionary relations and public posts.
    pub discretionary_factor: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            discretionary_factor: 0.5,
        }
    }
}

impl InferenceConfig {
    pub fn factor(&self, policy: DisclosurePolicy) -> Option<f64> {
        match policy {
            DisclosurePolicy::Always => Some(1.0),
            DisclosurePolicy::Discretionary => Some(self.discretionary_factor),
            DisclosurePolicy::Never => None,
        }
    }
}

/// A candidate propagation step out of an entity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub recipient: EntityId,
    pub kind: FlowEdgeKind,
    pub relation: Option<RelationId>,
    pub factor: f64,
}

/// Relation adjacency plus the precomputed public audience, built once per run.
pub(crate) struct RuleIndex<'a> {
    kb: &'a KnowledgeBase,
    config: InferenceConfig,
    me: Option<EntityId>,
    touching: HashMap<EntityId, Vec<RelationId>>,
    audience: Vec<EntityId>,
}

impl<'a> RuleIndex<'a> {
    pub fn new(kb: &'a KnowledgeBase, config: InferenceConfig) -> Self {
        let mut touching: HashMap<EntityId, Vec<RelationId>> = HashMap::new();
        for rel in kb.relations() {
            touching.entry(rel.src).or_default().push(rel.id);
            if rel.dst != rel.src {
                touching.entry(rel.dst).or_default().push(rel.id);
            }
        }
        let audience = kb
            .entities_of(EntityKind::Person)
            .filter(|p| p.is_audience_public())
            .map(|p| p.id)
            .collect();
        RuleIndex {
            kb,
            config,
            me: kb.me(),
            touching,
            audience,
        }
    }

    /// All steps a package at `at` may take, in relation-id order with public
    /// audience steps last. Steps to "me" are never produced.
    pub fn successors(&self, at: EntityId) -> Vec<Step> {
        let Some(entity) = self.kb.entity(at) else {
            return Vec::new();
        };
        let mut steps = Vec::new();
        for rel_id in self.touching.get(&at).map(Vec::as_slice).unwrap_or(&[]) {
            let rel = self.kb.relation(*rel_id).expect("index built from this kb");
            let Some(factor) = self.config.factor(rel.disclosure_policy) else {
                continue;
            };
            let forward = rel.src == at;
            let backward = rel.dst == at;
            let hop = match (entity.kind, rel.kind) {
                (EntityKind::Service, RelationKind::ProvidedBy) if forward => {
                    Some((rel.dst, FlowEdgeKind::E2))
                }
                (
                    EntityKind::Service,
                    RelationKind::OutsourcedTo | RelationKind::SuppliedBy | RelationKind::PoweredBy,
                ) if forward => Some((rel.dst, FlowEdgeKind::E4)),
                (EntityKind::Service, RelationKind::OutsourcedTo)
                    if backward && self.kb.outsourcing_return() =>
                {
                    Some((rel.src, FlowEdgeKind::E4))
                }
                (EntityKind::Service, RelationKind::Create) if forward => {
                    Some((rel.dst, FlowEdgeKind::E5))
                }
                (EntityKind::Service, RelationKind::Exist) if forward => {
                    Some((rel.dst, FlowEdgeKind::E8))
                }
                (EntityKind::Organization, RelationKind::IsPartOf) if forward => {
                    Some((rel.dst, FlowEdgeKind::E3))
                }
                (EntityKind::Organization, RelationKind::Invest | RelationKind::CollaborateWith) => {
                    rel.other_end(at).map(|o| (o, FlowEdgeKind::E3))
                }
                (EntityKind::Organization, RelationKind::WorksFor | RelationKind::OwnsOrg)
                    if backward =>
                {
                    Some((rel.src, FlowEdgeKind::E12a))
                }
                (EntityKind::OnlineAccount, RelationKind::Friend) if forward => {
                    Some((rel.dst, FlowEdgeKind::E6))
                }
                (EntityKind::OnlineAccount, RelationKind::Account) if forward => {
                    Some((rel.dst, FlowEdgeKind::E7))
                }
                (EntityKind::OnlineGroup, RelationKind::MemberOf) if backward => {
                    Some((rel.src, FlowEdgeKind::E9))
                }
                (EntityKind::Person, RelationKind::Know) if forward => {
                    Some((rel.dst, FlowEdgeKind::E10))
                }
                (EntityKind::Person, RelationKind::WorksFor | RelationKind::OwnsOrg)
                    if forward =>
                {
                    Some((rel.dst, FlowEdgeKind::E12b))
                }
                _ => None,
            };
            if let Some((recipient, kind)) = hop {
                if Some(recipient) != self.me && recipient != at {
                    steps.push(Step {
                        recipient,
                        kind,
                        relation: Some(rel.id),
                        factor,
                    });
                }
            }
        }
        if entity.is_public() {
            for person in &self.audience {
                if Some(*person) != self.me {
                    steps.push(Step {
                        recipient: *person,
                        kind: FlowEdgeKind::E11,
                        relation: None,
                        factor: self.config.discretionary_factor,
                    });
                }
            }
        }
        steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{attr, Attributes};

    #[test]
    fn never_policy_blocks_propagation() {
        let mut kb = KnowledgeBase::new();
        kb.add_me("me").unwrap();
        let s = kb.add(EntityKind::Service, "s").unwrap();
        let o = kb.add(EntityKind::Organization, "o").unwrap();
        kb.add_relation(s, RelationKind::ProvidedBy, o, Some(DisclosurePolicy::Never))
            .unwrap();
        let index = RuleIndex::new(&kb, InferenceConfig::default());
        assert!(index.successors(s).is_empty());
    }

    #[test]
    fn collaboration_propagates_both_ways_with_discretionary_factor() {
        let mut kb = KnowledgeBase::new();
        let a = kb.add(EntityKind::Organization, "a").unwrap();
        let b = kb.add(EntityKind::Organization, "b").unwrap();
        kb.add_relation(a, RelationKind::CollaborateWith, b, None).unwrap();
        let index = RuleIndex::new(&kb, InferenceConfig::default());
        let from_a = index.successors(a);
        let from_b = index.successors(b);
        assert_eq!(from_a.len(), 1);
        assert_eq!(from_a[0].recipient, b);
        assert_eq!(from_a[0].factor, 0.5);
        assert_eq!(from_b[0].recipient, a);
    }

    #[test]
    fn friend_is_directional_and_me_is_never_a_recipient() {
        let mut kb = KnowledgeBase::new();
        let me = kb.add_me("me").unwrap();
        let x = kb.add(EntityKind::OnlineAccount, "x").unwrap();
        let y = kb.add(EntityKind::OnlineAccount, "y").unwrap();
        kb.add_relation(x, RelationKind::Friend, y, None).unwrap();
        kb.add_relation(x, RelationKind::Account, me, None).unwrap();
        let index = RuleIndex::new(&kb, InferenceConfig::default());
        let steps = index.successors(x);
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].kind, FlowEdgeKind::E6);
        assert!(index.successors(y).is_empty());
    }

    #[test]
    fn public_service_reaches_audience() {
        let mut kb = KnowledgeBase::new();
        let s = kb
            .add_entity(
                EntityKind::Service,
                "photos",
                Attributes::from([(attr::PUBLIC.into(), "true".into())]),
            )
            .unwrap();
        let p = kb
            .add_entity(
                EntityKind::Person,
                "stranger",
                Attributes::from([(attr::AUDIENCE_PUBLIC.into(), "true".into())]),
            )
            .unwrap();
        kb.add(EntityKind::Person, "private person").unwrap();
        let index = RuleIndex::new(&kb, InferenceConfig::default());
        let steps = index.successors(s);
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].recipient, p);
        assert_eq!(steps[0].kind, FlowEdgeKind::E11);
        assert_eq!(steps[0].relation, None);
    }
}
