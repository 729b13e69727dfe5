//! Bundled travel scenarios.
//!
//! `case_study` is the flight + hotel booking setup where one holding company
//! ends up with both packages. `sensitive_reach` has a medical certificate
//! fanning out through two company groups. The JSON copies under `data/` are
//! generated from these builders and checked against them in tests.

use std::collections::BTreeSet;

use crate::inference::{DisclosureEvent, EventId, EventSource};
use crate::kb::{
    DataCategory, EntityId, EntityKind, KbError, KnowledgeBase, RelationKind,
    ValueFlowDecl, ValueKind,
};

pub const CASE_STUDY_JSON: &str = include_str!("../data/case_study.kb.json");
pub const SENSITIVE_REACH_JSON: &str = include_str!("../data/sensitive_reach.kb.json");

/// Fixed base timestamp for scenario events (2024-06-01T00:00:00Z).
pub const BASE_TIMESTAMP: i64 = 1_717_200_000;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kb: KnowledgeBase,
    pub events: Vec<DisclosureEvent>,
}

fn event(id: u64, package: EntityId, service: EntityId) -> DisclosureEvent {
    DisclosureEvent {
        id: EventId(id),
        package,
        service,
        timestamp: BASE_TIMESTAMP + id as i64 * 3600,
        source: EventSource::Simulated,
        ad_hoc: false,
    }
}

fn item(
    kb: &mut KnowledgeBase,
    me: EntityId,
    package: EntityId,
    name: &str,
    category: DataCategory,
    sensitivity: f64,
) -> Result<EntityId, KbError> {
    let id = kb.add(EntityKind::Data, name)?;
    kb.add_relation(me, RelationKind::OwnsData, id, None)?;
    kb.add_relation(package, RelationKind::Contains, id, None)?;
    kb.annotate_data(id, category, sensitivity)?;
    Ok(id)
}

fn org(kb: &mut KnowledgeBase, name: &str, parent: Option<EntityId>, known: bool) -> Result<EntityId, KbError> {
    let id = kb.add(EntityKind::Organization, name)?;
    if let Some(parent) = parent {
        kb.add_relation(id, RelationKind::IsPartOf, parent, None)?;
    }
    if !known {
        kb.set_known_to_user(id, false)?;
    }
    Ok(id)
}

fn service(kb: &mut KnowledgeBase, name: &str, provider: EntityId, known: bool) -> Result<EntityId, KbError> {
    let id = kb.add(EntityKind::Service, name)?;
    kb.add_relation(id, RelationKind::ProvidedBy, provider, None)?;
    if !known {
        kb.set_known_to_user(id, false)?;
    }
    Ok(id)
}

fn build_case_study() -> Result<Scenario, KbError> {
    let mut kb = KnowledgeBase::new();
    let me = kb.add_me("Traveler")?;

    let dp1 = kb.add(EntityKind::DataPackage, "Data Package 1")?;
    let dp2 = kb.add(EntityKind::DataPackage, "Data Package 2")?;
    item(&mut kb, me, dp1, "passenger name", DataCategory::Identity, 0.3)?;
    item(&mut kb, me, dp1, "flight itinerary", DataCategory::Itinerary, 0.5)?;
    item(&mut kb, me, dp1, "payment card", DataCategory::Financial, 0.5)?;
    item(&mut kb, me, dp2, "guest name", DataCategory::Identity, 0.3)?;
    item(&mut kb, me, dp2, "hotel stay dates", DataCategory::Itinerary, 0.4)?;

    let holdings = org(&mut kb, "Booking Holdings Inc.", None, false)?;
    let booking = org(&mut kb, "Booking.com", Some(holdings), true)?;
    let agoda = org(&mut kb, "Agoda", Some(holdings), true)?;
    let etraveli = org(&mut kb, "Etraveli Group", None, false)?;
    let gotogate = org(&mut kb, "GotoGate", Some(etraveli), false)?;

    let flight = service(&mut kb, "FlightBookingSvc", booking, true)?;
    let gotogate_svc = service(&mut kb, "GotoGateSvc", gotogate, false)?;
    let hotel = service(&mut kb, "HotelBookingSvc", agoda, true)?;
    kb.add_relation(flight, RelationKind::OutsourcedTo, gotogate_svc, None)?;
    kb.add_relation(dp1, RelationKind::RequiredBy, flight, None)?;
    kb.add_relation(dp2, RelationKind::RequiredBy, hotel, None)?;

    kb.declare_value_flow(ValueFlowDecl {
        src: booking,
        dst: me,
        value_kind: ValueKind::Discount,
        magnitude: 0.5,
        condition: BTreeSet::from([dp1]),
    })?;
    kb.declare_value_flow(ValueFlowDecl {
        src: holdings,
        dst: me,
        value_kind: ValueKind::Personalization,
        magnitude: 0.3,
        condition: BTreeSet::from([dp1, dp2]),
    })?;

    let events = vec![event(1, dp1, flight), event(2, dp2, hotel)];
    Ok(Scenario { kb, events })
}

fn build_sensitive_reach() -> Result<Scenario, KbError> {
    let mut kb = KnowledgeBase::new();
    let me = kb.add_me("Traveler")?;
    let dp = kb.add(EntityKind::DataPackage, "special assistance request")?;
    item(&mut kb, me, dp, "MEDICAL_CERTIFICATE", DataCategory::Medical, 0.9)?;
    item(&mut kb, me, dp, "passenger name", DataCategory::Identity, 0.3)?;

    let sky = org(&mut kb, "SkyAlliance Holdings", None, false)?;
    let wanderly = org(&mut kb, "Wanderly Group", None, false)?;
    let airline = org(&mut kb, "SkyAlliance Airlines", Some(sky), true)?;
    let entry = service(&mut kb, "AssistanceBookingSvc", airline, true)?;
    kb.add_relation(dp, RelationKind::RequiredBy, entry, None)?;

    let partners = [
        ("SkyAlliance Ground", sky, "GroundHandlingSvc", RelationKind::SuppliedBy, true),
        ("SkyAlliance Lounges", sky, "LoungeAccessSvc", RelationKind::SuppliedBy, true),
        ("SkyAlliance Care", sky, "MedicalDeskSvc", RelationKind::SuppliedBy, false),
        ("SkyAlliance Catering", sky, "CateringSvc", RelationKind::PoweredBy, false),
        ("Wanderly Transfers", wanderly, "WheelchairTransferSvc", RelationKind::OutsourcedTo, false),
        ("Wanderly Hotels", wanderly, "AccessibleRoomSvc", RelationKind::OutsourcedTo, true),
        ("Wanderly Insurance", wanderly, "TravelInsuranceSvc", RelationKind::SuppliedBy, false),
        ("Wanderly Rail", wanderly, "RailAssistSvc", RelationKind::SuppliedBy, false),
    ];
    for (org_name, parent, svc_name, link, known) in partners {
        let provider = org(&mut kb, org_name, Some(parent), known)?;
        let svc = service(&mut kb, svc_name, provider, known)?;
        kb.add_relation(entry, link, svc, None)?;
    }

    let events = vec![event(1, dp, entry)];
    Ok(Scenario { kb, events })
}

pub fn case_study() -> Scenario {
    build_case_study().expect("case study builder is consistent")
}

pub fn sensitive_reach() -> Scenario {
    build_sensitive_reach().expect("sensitive reach builder is consistent")
}

/// Look up an entity by name in a scenario KB, panicking when absent.
pub fn id(kb: &KnowledgeBase, name: &str) -> EntityId {
    kb.lookup_name(name)
        .unwrap_or_else(|| panic!("no entity named {name:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::validate;

    #[test]
    fn scenarios_validate_clean() {
        for s in [case_study(), sensitive_reach()] {
            let report = validate(&s.kb);
            assert!(report.is_clean(), "{report}");
        }
    }

    #[test]
    fn shipped_documents_match_builders() {
        assert_eq!(
            KnowledgeBase::from_json(CASE_STUDY_JSON).unwrap(),
            case_study().kb
        );
        assert_eq!(
            KnowledgeBase::from_json(SENSITIVE_REACH_JSON).unwrap(),
            sensitive_reach().kb
        );
    }
}
