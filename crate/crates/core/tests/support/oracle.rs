//! Brute-force reference for flow inference.
//!
//! Repeatedly sweeps every known fact against every relation until nothing
//! improves. No adjacency index, no priority queue, no witness bookkeeping:
//! just `(event, recipient) -> best likelihood`.

#![allow(dead_code)]

use std::collections::BTreeMap;

use privflow_core::inference::{DisclosureEvent, EventId};
use privflow_core::kb::{DisclosurePolicy, EntityId, KnowledgeBase, RelationKind, SemanticRelation};

pub type Facts = BTreeMap<(EventId, EntityId), f64>;

/// Where a package at `at` goes over `rel`, if anywhere. Relation signatures
/// already pin the entity kinds, so only the direction matters.
fn hop(kb: &KnowledgeBase, rel: &SemanticRelation, at: EntityId) -> Option<EntityId> {
    use RelationKind::*;
    let from_src = rel.src == at;
    let from_dst = rel.dst == at;
    let forward = matches!(
        rel.kind,
        ProvidedBy
            | IsPartOf
            | Invest
            | CollaborateWith
            | SuppliedBy
            | PoweredBy
            | OutsourcedTo
            | Create
            | Friend
            | Account
            | Exist
            | Know
            | WorksFor
            | OwnsOrg
    );
    let backward = match rel.kind {
        Invest | CollaborateWith | WorksFor | OwnsOrg | MemberOf => true,
        OutsourcedTo => kb.outsourcing_return(),
        _ => false,
    };
    if from_src && forward {
        Some(rel.dst)
    } else if from_dst && backward {
        Some(rel.src)
    } else {
        None
    }
}

fn weight(policy: DisclosurePolicy, discretionary: f64) -> Option<f64> {
    match policy {
        DisclosurePolicy::Always => Some(1.0),
        DisclosurePolicy::Discretionary => Some(discretionary),
        DisclosurePolicy::Never => None,
    }
}

pub fn oracle_facts(kb: &KnowledgeBase, events: &[DisclosureEvent], discretionary: f64) -> Facts {
    let me = kb.me();
    let audience: Vec<EntityId> = kb
        .entities()
        .filter(|e| e.attributes.get("audience_public").map(String::as_str) == Some("true"))
        .map(|e| e.id)
        .filter(|id| Some(*id) != me)
        .collect();

    let mut facts = Facts::new();
    for e in events {
        facts.insert((e.id, e.service), 1.0);
    }
    loop {
        let mut changed = false;
        let snapshot: Vec<((EventId, EntityId), f64)> =
            facts.iter().map(|(k, v)| (*k, *v)).collect();
        for ((event, at), likelihood) in snapshot {
            let mut targets: Vec<(EntityId, f64)> = Vec::new();
            for rel in kb.relations() {
                if let (Some(to), Some(w)) = (hop(kb, rel, at), weight(rel.disclosure_policy, discretionary)) {
                    targets.push((to, w));
                }
            }
            let public = kb
                .entity(at)
                .and_then(|e| e.attributes.get("public"))
                .is_some_and(|v| v == "true");
            let is_service = kb
                .entity(at)
                .is_some_and(|e| e.kind == privflow_core::kb::EntityKind::Service);
            if public && is_service {
                targets.extend(audience.iter().map(|p| (*p, discretionary)));
            }
            for (to, w) in targets {
                if Some(to) == me || to == at {
                    continue;
                }
                let candidate = likelihood * w;
                let current = facts.entry((event, to)).or_insert(0.0);
                if candidate > *current {
                    *current = candidate;
                    changed = true;
                }
            }
        }
        if !changed {
            return facts;
        }
    }
}

/// Organizations reached by packages containing `item`, counted from facts.
pub fn orgs_reached(kb: &KnowledgeBase, events: &[DisclosureEvent], facts: &Facts, item: EntityId) -> Vec<EntityId> {
    let packages: Vec<EntityId> = kb
        .relations()
        .filter(|r| r.kind == RelationKind::Contains && r.dst == item)
        .map(|r| r.src)
        .collect();
    let mut orgs: Vec<EntityId> = facts
        .keys()
        .filter(|(event, _)| {
            events
                .iter()
                .any(|e| e.id == *event && packages.contains(&e.package))
        })
        .map(|(_, to)| *to)
        .filter(|to| {
            kb.entity(*to)
                .is_some_and(|e| e.kind == privflow_core::kb::EntityKind::Organization)
        })
        .collect();
    orgs.sort();
    orgs.dedup();
    orgs
}
