//! Seeded generator of small valid knowledge bases with disclosure events.

#![allow(dead_code)]

use std::collections::BTreeMap;

use privflow_core::inference::{DisclosureEvent, EventId, EventSource};
use privflow_core::kb::{
    attr, Attributes, DataCategory, DisclosurePolicy, EntityId, EntityKind, KnowledgeBase,
    RelationKind,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub const MAX_ENTITIES: usize = 30;
pub const MAX_RELATIONS: usize = 60;
pub const MAX_EVENTS: usize = 5;

pub struct Generated {
    pub kb: KnowledgeBase,
    pub events: Vec<DisclosureEvent>,
}

const CATEGORIES: [DataCategory; 5] = [
    DataCategory::Identity,
    DataCategory::Location,
    DataCategory::Medical,
    DataCategory::Financial,
    DataCategory::Itinerary,
];

/// Relation kinds that carry packages somewhere; bookkeeping relations are
/// added separately.
const PROPAGATING: [RelationKind; 14] = [
    RelationKind::ProvidedBy,
    RelationKind::IsPartOf,
    RelationKind::Invest,
    RelationKind::CollaborateWith,
    RelationKind::SuppliedBy,
    RelationKind::PoweredBy,
    RelationKind::OutsourcedTo,
    RelationKind::Create,
    RelationKind::Friend,
    RelationKind::Account,
    RelationKind::Exist,
    RelationKind::MemberOf,
    RelationKind::Know,
    RelationKind::WorksFor,
];

fn pick(rng: &mut StdRng, pool: &[EntityId]) -> Option<EntityId> {
    pool.choose(rng).copied()
}

fn policy(rng: &mut StdRng) -> Option<DisclosurePolicy> {
    match rng.gen_range(0..10) {
        0 => Some(DisclosurePolicy::Never),
        1 => Some(DisclosurePolicy::Discretionary),
        2 => Some(DisclosurePolicy::Always),
        _ => None,
    }
}

/// Try to add one random relation that respects the schema. Returns false
/// when the draw was rejected (missing endpoints, cycle, duplicate).
pub fn random_relation(rng: &mut StdRng, kb: &mut KnowledgeBase) -> bool {
    let mut by_kind: BTreeMap<EntityKind, Vec<EntityId>> = BTreeMap::new();
    for e in kb.entities() {
        by_kind.entry(e.kind).or_default().push(e.id);
    }
    let mut kind = *PROPAGATING.choose(rng).unwrap();
    if kind == RelationKind::WorksFor && rng.gen_bool(0.5) {
        kind = RelationKind::OwnsOrg;
    }
    let (src_kind, dst_kind) = kind.signature();
    let empty = Vec::new();
    let srcs = by_kind.get(&src_kind).unwrap_or(&empty);
    let dsts = by_kind.get(&dst_kind).unwrap_or(&empty);
    let (Some(src), Some(dst)) = (pick(rng, srcs), pick(rng, dsts)) else {
        return false;
    };
    // Keep isPartOf pointing to older organizations so it stays acyclic.
    if kind == RelationKind::IsPartOf && src <= dst {
        return false;
    }
    kb.add_relation(src, kind, dst, policy(rng)).is_ok()
}

pub fn generate(seed: u64) -> Generated {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut kb = KnowledgeBase::new();
    kb.set_outsourcing_return(rng.gen_bool(0.7));
    let me = kb.add_me("me").unwrap();

    let budget = rng.gen_range(8..=MAX_ENTITIES) - 1;
    let mut counts: BTreeMap<EntityKind, usize> = BTreeMap::new();
    let weights = [
        (EntityKind::Data, 3),
        (EntityKind::DataPackage, 2),
        (EntityKind::Service, 3),
        (EntityKind::Organization, 3),
        (EntityKind::OnlineAccount, 2),
        (EntityKind::OnlineGroup, 1),
        (EntityKind::Person, 2),
    ];
    let total: u32 = weights.iter().map(|(_, w)| w).sum();
    // At least one package with one item and one service.
    let mut kinds = vec![EntityKind::Data, EntityKind::DataPackage, EntityKind::Service];
    while kinds.len() < budget {
        let mut roll = rng.gen_range(0..total);
        for (kind, w) in weights {
            if roll < w {
                let packages = kinds.iter().filter(|k| **k == EntityKind::DataPackage).count();
                let kind = if kind == EntityKind::DataPackage && packages >= 6 {
                    EntityKind::Data
                } else {
                    kind
                };
                kinds.push(kind);
                break;
            }
            roll -= w;
        }
    }

    let mut data = Vec::new();
    let mut packages = Vec::new();
    let mut services = Vec::new();
    for kind in kinds {
        let n = counts.entry(kind).or_default();
        *n += 1;
        let mut attrs = Attributes::new();
        if kind == EntityKind::Service && rng.gen_bool(0.15) {
            attrs.insert(attr::PUBLIC.into(), "true".into());
        }
        if kind == EntityKind::Person && rng.gen_bool(0.3) {
            attrs.insert(attr::AUDIENCE_PUBLIC.into(), "true".into());
        }
        if kind == EntityKind::Organization && rng.gen_bool(0.2) {
            attrs.insert(attr::GROUP.into(), format!("group{}", rng.gen_range(0..3)));
        }
        let id = kb
            .add_entity(kind, &format!("{}{}", kind.as_str().to_lowercase(), n), attrs)
            .unwrap();
        if rng.gen_bool(0.2) {
            kb.set_known_to_user(id, false).unwrap();
        }
        match kind {
            EntityKind::Data => {
                let owner_is_me = rng.gen_bool(0.85);
                if owner_is_me {
                    kb.add_relation(me, RelationKind::OwnsData, id, None).unwrap();
                }
                let category = *CATEGORIES.choose(&mut rng).unwrap();
                let sensitivity = rng.gen_range(0..=10) as f64 / 10.0;
                kb.annotate_data(id, category, sensitivity).unwrap();
                data.push(id);
            }
            EntityKind::DataPackage => packages.push(id),
            EntityKind::Service => services.push(id),
            _ => {}
        }
    }
    for &p in &packages {
        let n = rng.gen_range(1..=data.len().min(3));
        let mut chosen = data.clone();
        chosen.shuffle(&mut rng);
        for item in chosen.into_iter().take(n) {
            kb.add_relation(p, RelationKind::Contains, item, None).unwrap();
        }
    }

    // Leave room for requiredBy relations added with the events.
    let target = rng.gen_range(kb.relation_count()..=MAX_RELATIONS - MAX_EVENTS);
    for _ in 0..400 {
        if kb.relation_count() >= target {
            break;
        }
        random_relation(&mut rng, &mut kb);
    }

    let mut events = Vec::new();
    let n_events = rng.gen_range(1..=MAX_EVENTS);
    for i in 0..n_events {
        let package = pick(&mut rng, &packages).unwrap();
        let service = pick(&mut rng, &services).unwrap();
        let ad_hoc = if kb.is_required_by(package, service) {
            false
        } else if rng.gen_bool(0.6) {
            kb.add_relation(package, RelationKind::RequiredBy, service, None).unwrap();
            false
        } else {
            true
        };
        events.push(DisclosureEvent {
            id: EventId(i as u64 + 1),
            package,
            service,
            timestamp: 1_700_000_000 + i as i64 * 60,
            source: EventSource::Simulated,
            ad_hoc,
        });
    }
    Generated { kb, events }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}
