mod support;

use std::collections::BTreeSet;

use privflow_core::assessment::{joint_assessment, Verdict};
use privflow_core::inference::{
    detect_issues, infer_flows, reach_set, replay_witness, FlowEdgeKind, InferenceConfig, IssueConfig, IssuePattern,
};
use privflow_core::kb::{validate, EntityId};
use privflow_core::nudge::{build_level1, build_level2, record_action, BehaviorLog, Template};
use privflow_core::preference::{Action, PreferenceProfile, Segment};
use privflow_core::scenario::{case_study, id, sensitive_reach};
use support::oracle::{oracle_facts, orgs_reached};

fn names(kb: &privflow_core::KnowledgeBase, ids: &BTreeSet<EntityId>) -> BTreeSet<String> {
    ids.iter().map(|i| kb.name_of(*i).to_string()).collect()
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn case_study_recipients() {
    let s = case_study();
    assert!(validate(&s.kb).is_clean());
    let flows = infer_flows(&s.kb, &s.events, &InferenceConfig::default()).unwrap();
    let dp1 = names(&s.kb, &flows.recipients_of(id(&s.kb, "Data Package 1")));
    let dp2 = names(&s.kb, &flows.recipients_of(id(&s.kb, "Data Package 2")));
    assert_eq!(
        dp1,
        set(&["FlightBookingSvc", "GotoGateSvc", "GotoGate", "Etraveli Group", "Booking.com", "Booking Holdings Inc."])
    );
    assert_eq!(dp2, set(&["HotelBookingSvc", "Agoda", "Booking Holdings Inc."]));
    assert!(flows.flows.iter().all(|f| f.likelihood == 1.0));
    assert_eq!(flows.facts(), oracle_facts(&s.kb, &s.events, 0.5));
}

#[test]
fn case_study_witness_to_holding_replays() {
    let s = case_study();
    let config = InferenceConfig::default();
    let flows = infer_flows(&s.kb, &s.events, &config).unwrap();
    let holdings = id(&s.kb, "Booking Holdings Inc.");
    let dp1 = id(&s.kb, "Data Package 1");
    let flow = flows
        .flows
        .iter()
        .find(|f| f.payload == dp1 && f.recipient == holdings)
        .unwrap();
    let path = flows.witness_path(flow.id);
    assert_eq!(path.first().unwrap().kind, FlowEdgeKind::E1);
    assert_eq!(path.last().unwrap().kind, FlowEdgeKind::E3);
    let event = flows.event(flow.root).unwrap();
    assert_eq!(replay_witness(&s.kb, event, &path, &config).unwrap(), (dp1, holdings, 1.0));
}

#[test]
fn case_study_aggregation_and_verdicts() {
    let s = case_study();
    let profile = PreferenceProfile::for_segment(Segment::Pragmatist);
    let flows = infer_flows(&s.kb, &s.events, &InferenceConfig::default()).unwrap();
    let issues = detect_issues(&s.kb, &flows, &profile, &IssueConfig::default());
    let aggregation: Vec<_> = issues.iter().filter(|i| i.pattern == IssuePattern::Aggregation).collect();
    assert_eq!(aggregation.len(), 1);
    assert_eq!(aggregation[0].focus_name, "Booking Holdings Inc.");
    let payloads: BTreeSet<EntityId> = aggregation[0]
        .evidence
        .iter()
        .map(|f| flows.flow(*f).unwrap().payload)
        .collect();
    assert_eq!(names(&s.kb, &payloads), set(&["Data Package 1", "Data Package 2"]));

    let reports = joint_assessment(&s.kb, &flows, &issues, &profile);
    let verdict = |name: &str| reports.iter().find(|r| r.service_name == name).unwrap();
    let flight = verdict("FlightBookingSvc");
    let hotel = verdict("HotelBookingSvc");
    assert_eq!(flight.verdict, Verdict::RiskyButValuable);
    assert_eq!(hotel.verdict, Verdict::Risky);
    assert!((flight.value.realized - 0.65).abs() < 1e-12);
    for r in [flight, hotel] {
        assert!(r.issues.contains(&aggregation[0].id), "{}", r.service_name);
    }

    let cards = build_level1(&reports, &issues, &profile, 0);
    let card = cards
        .iter()
        .find(|c| c.template == Template::RiskyAppCard && c.service == Some(flight.service))
        .unwrap();
    assert!(card.body[0].text.contains("risky app"));
    assert!(card.body[1].text.contains("added value 0.65"));
    assert!(cards.iter().any(|c| c.template == Template::ValueAtCostCard));

    let mut log = BehaviorLog::new();
    log.mark_shown(card, 1);
    record_action(&mut log, card, Action::More, 2).unwrap();
    let detail = build_level2(&log, card, Some(aggregation[0]), &s.kb, &flows, 3).unwrap();
    assert_eq!(detail.parent.as_deref(), Some(card.id.as_str()));
    assert_eq!(detail.scope.packages.len(), 2);
    assert!(detail.body.iter().any(|l| l.text.contains("Data Package 1 -> ")));
    assert!(detail.body.iter().any(|l| l.text.contains("Data Package 2 -> ")));
    assert!(detail.body.iter().any(|l| l.text.starts_with("At stake: discount 0.50 from Booking.com")));
    record_action(&mut log, &detail, Action::Delete, 4).unwrap();
    assert_eq!(log.deletion_requests().count(), 1);
}

#[test]
fn sensitive_reach_counts() {
    let s = sensitive_reach();
    assert!(validate(&s.kb).is_clean());
    let profile = PreferenceProfile::for_segment(Segment::Pragmatist);
    let flows = infer_flows(&s.kb, &s.events, &InferenceConfig::default()).unwrap();
    let issues = detect_issues(&s.kb, &flows, &profile, &IssueConfig::default());
    let reach: Vec<_> = issues.iter().filter(|i| i.pattern == IssuePattern::SensitiveReach).collect();
    assert_eq!(reach.len(), 1);
    assert_eq!(reach[0].focus_name, "MEDICAL_CERTIFICATE");
    assert_eq!(reach[0].metric("orgs_reached"), 11);
    assert_eq!(reach[0].metric("groups_reached"), 2);
    assert!((reach[0].severity - 0.9).abs() < 1e-12);

    let medical = id(&s.kb, "MEDICAL_CERTIFICATE");
    let facts = oracle_facts(&s.kb, &s.events, 0.5);
    let orgs = orgs_reached(&s.kb, &s.events, &facts, medical);
    assert_eq!(orgs.len(), 11);
    let groups: BTreeSet<String> = orgs.iter().flat_map(|o| s.kb.company_groups(*o)).collect();
    assert_eq!(groups.len(), 2);

    let reached = reach_set(&s.kb, &flows, medical).unwrap();
    assert!(reached.iter().any(|r| r.entity == id(&s.kb, "Wanderly Rail")));

    let reports = joint_assessment(&s.kb, &flows, &issues, &profile);
    let cards = build_level1(&reports, &issues, &profile, 0);
    assert_eq!(cards.len(), 1);
    let mut log = BehaviorLog::new();
    log.mark_shown(&cards[0], 1);
    let detail = build_level2(&log, &cards[0], Some(reach[0]), &s.kb, &flows, 2).unwrap();
    assert!(detail.body[0].text.contains("2 company groups, 11 organizations"), "{}", detail.body[0].text);
    assert_eq!(detail.category, Some(privflow_core::kb::DataCategory::Medical));
}

#[test]
fn lone_flow_raises_no_issue() {
    let s = case_study();
    let profile = PreferenceProfile::for_segment(Segment::Pragmatist);
    let mut kb = privflow_core::KnowledgeBase::new();
    let me = kb.add_me("me").unwrap();
    let item = kb.add(privflow_core::EntityKind::Data, "email").unwrap();
    let dp = kb.add(privflow_core::EntityKind::DataPackage, "signup").unwrap();
    let svc = kb.add(privflow_core::EntityKind::Service, "newsletter").unwrap();
    kb.add_relation(me, privflow_core::RelationKind::OwnsData, item, None).unwrap();
    kb.add_relation(dp, privflow_core::RelationKind::Contains, item, None).unwrap();
    kb.add_relation(dp, privflow_core::RelationKind::RequiredBy, svc, None).unwrap();
    kb.annotate_data(item, privflow_core::kb::DataCategory::Contact, 0.9).unwrap();
    let mut event = s.events[0].clone();
    event.package = dp;
    event.service = svc;
    let flows = infer_flows(&kb, &[event], &InferenceConfig::default()).unwrap();
    assert_eq!(flows.flows.len(), 1);
    assert!(detect_issues(&kb, &flows, &profile, &IssueConfig::default()).is_empty());
}
