//! Two-level nudges built from assessment reports and privacy issues, plus the
//! append-only behavior log that records what the user did with them.
//!
//! Level 1 cards raise awareness (what is risky, what value was gained at what
//! cost). Drilling into a shown card produces a level 2 nudge with the
//! evidence, the value at stake and the available interventions. Every body
//! line carries provenance back to the report field, issue metric, flow or
//! value declaration it was rendered from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::{ServiceReport, Verdict};
use crate::inference::metric;
use crate::inference::{FlowId, FlowSet, IssuePattern, PrivacyIssue};
use crate::kb::{DataCategory, EntityId, KnowledgeBase};
use crate::preference::{Action, BehaviorEvent, BehaviorKind, NudgeRef, PreferenceProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Template {
    RiskyAppCard,
    ValueAtCostCard,
    IssueDetail,
    ActionMenu,
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Template::RiskyAppCard => "RISKY_APP_CARD",
            Template::ValueAtCostCard => "VALUE_AT_COST_CARD",
            Template::IssueDetail => "ISSUE_DETAIL",
            Template::ActionMenu => "ACTION_MENU",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NudgeSubject {
    Service { service: EntityId },
    Issue { issue: String },
}

/// Where a rendered line came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    ReportField { service: EntityId, field: String },
    Issue { issue: String },
    IssueMetric { issue: String, metric: String },
    IssueEvidence { issue: String, flow: FlowId },
    ValueDecl { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyLine {
    pub text: String,
    pub provenance: Vec<Provenance>,
}

impl BodyLine {
    fn new(text: impl Into<String>, provenance: Vec<Provenance>) -> Self {
        BodyLine {
            text: text.into(),
            provenance,
        }
    }
}

/// Packages and recipients a level 2 intervention would act on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NudgeScope {
    pub packages: Vec<EntityId>,
    pub recipients: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nudge {
    pub id: String,
    pub level: u8,
    pub template: Template,
    pub subject: NudgeSubject,
    pub body: Vec<BodyLine>,
    pub options: Vec<Action>,
    pub created_at: i64,
    /// Level 1 nudge this one was drilled from.
    pub parent: Option<String>,
    pub service: Option<EntityId>,
    pub category: Option<DataCategory>,
    #[serde(default)]
    pub scope: NudgeScope,
}

impl Nudge {
    pub fn reference(&self) -> NudgeRef {
        NudgeRef {
            id: self.id.clone(),
            template: self.template,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NudgeError {
    #[error("parent nudge {0} has not been shown")]
    UnshownParent(String),
    #[error("nudge {0} is not a level 1 nudge")]
    NotLevelOne(String),
    #[error("option {action} is not offered by nudge {nudge}")]
    InvalidOption { nudge: String, action: Action },
}

fn report_field(report: &ServiceReport, field: &str) -> Provenance {
    Provenance::ReportField {
        service: report.service,
        field: field.to_string(),
    }
}

/// Category driving the report's threshold: the one with the strictest
/// per-category threshold, first in category order on ties.
fn driving_category(report: &ServiceReport, profile: &PreferenceProfile) -> Option<DataCategory> {
    report
        .categories
        .iter()
        .copied()
        .min_by(|a, b| {
            profile
                .threshold_for([*a])
                .total_cmp(&profile.threshold_for([*b]))
        })
}

pub fn level1_id(template: Template, service: EntityId) -> String {
    match template {
        Template::ValueAtCostCard => format!("l1-value-{}", service.0),
        _ => format!("l1-risky-{}", service.0),
    }
}

pub fn level2_id(parent: &str, issue: Option<&str>) -> String {
    format!("l2-{}-{}", parent, issue.unwrap_or("actions"))
}

/// One risky-app card per report whose verdict is not ok, followed by a
/// value-at-cost card when the service is risky but valuable.
pub fn build_level1(
    reports: &[ServiceReport],
    issues: &[PrivacyIssue],
    profile: &PreferenceProfile,
    created_at: i64,
) -> Vec<Nudge> {
    let mut nudges = Vec::new();
    for report in reports.iter().filter(|r| r.verdict != Verdict::Ok) {
        let category = driving_category(report, profile);
        let mut body = vec![BodyLine::new(
            format!(
                "{} is a risky app: privacy risk {:.2} is above your threshold {:.2}",
                report.service_name, report.risk.score, report.risk_threshold
            ),
            vec![report_field(report, "risk.score"), report_field(report, "risk_threshold")],
        )];
        if report.verdict == Verdict::RiskyButValuable {
            let mut provenance = vec![report_field(report, "value.realized")];
            provenance.extend(report.value.decls.iter().map(|i| Provenance::ValueDecl { index: *i }));
            body.push(BodyLine::new(
                format!(
                    "You have also gained a lot from it: added value {:.2} ({})",
                    report.value.realized,
                    kinds_text(&report.value.value_kinds)
                ),
                provenance,
            ));
        }
        let touching: Vec<&PrivacyIssue> = issues
            .iter()
            .filter(|i| report.issues.contains(&i.id))
            .collect();
        if !touching.is_empty() {
            body.push(BodyLine::new(
                format!("{} privacy issues found", touching.len()),
                touching
                    .iter()
                    .map(|i| Provenance::Issue { issue: i.id.clone() })
                    .collect(),
            ));
        }
        nudges.push(Nudge {
            id: level1_id(Template::RiskyAppCard, report.service),
            level: 1,
            template: Template::RiskyAppCard,
            subject: NudgeSubject::Service {
                service: report.service,
            },
            body,
            options: vec![Action::Keep, Action::More],
            created_at,
            parent: None,
            service: Some(report.service),
            category,
            scope: NudgeScope::default(),
        });

        if report.verdict == Verdict::RiskyButValuable {
            let mut provenance = vec![
                report_field(report, "value.realized"),
                report_field(report, "risk.score"),
            ];
            provenance.extend(report.value.decls.iter().map(|i| Provenance::ValueDecl { index: *i }));
            nudges.push(Nudge {
                id: level1_id(Template::ValueAtCostCard, report.service),
                level: 1,
                template: Template::ValueAtCostCard,
                subject: NudgeSubject::Service {
                    service: report.service,
                },
                body: vec![BodyLine::new(
                    format!(
                        "{}: value {:.2} gained at a privacy cost of {:.2}",
                        report.service_name, report.value.realized, report.risk.score
                    ),
                    provenance,
                )],
                options: vec![Action::Keep, Action::More],
                created_at,
                parent: None,
                service: Some(report.service),
                category,
                scope: NudgeScope::default(),
            });
        }
    }
    nudges
}

fn kinds_text(kinds: &[crate::kb::ValueKind]) -> String {
    let names: BTreeSet<String> = kinds.iter().map(ToString::to_string).collect();
    names.into_iter().collect::<Vec<_>>().join(", ")
}

/// Render a flow's witness path as an entity chain.
pub fn chain_text(kb: &KnowledgeBase, flows: &FlowSet, flow: FlowId) -> String {
    let Some(f) = flows.flow(flow) else {
        return String::new();
    };
    let mut parts = vec![kb.name_of(f.payload).to_string()];
    for step in flows.witness_path(flow) {
        let via = step
            .relation
            .and_then(|r| kb.relation(r))
            .map(|r| format!(" {}", r.kind))
            .unwrap_or_default();
        parts.push(format!("{} ({}{})", kb.name_of(step.recipient), step.kind, via));
    }
    parts.join(" -> ")
}

/// Drill down from a shown level 1 card. With an issue the result is an
/// `ISSUE_DETAIL` nudge; without one, an `ACTION_MENU` for the card's service.
pub fn build_level2(
    log: &BehaviorLog,
    parent: &Nudge,
    issue: Option<&PrivacyIssue>,
    kb: &KnowledgeBase,
    flows: &FlowSet,
    created_at: i64,
) -> Result<Nudge, NudgeError> {
    if parent.level != 1 {
        return Err(NudgeError::NotLevelOne(parent.id.clone()));
    }
    if !log.was_shown(&parent.id) {
        return Err(NudgeError::UnshownParent(parent.id.clone()));
    }

    let evidence: Vec<FlowId> = match issue {
        Some(issue) => issue.evidence.clone(),
        None => parent
            .service
            .map(|s| flows.flows_rooted_at_service(s).map(|f| f.id).collect())
            .unwrap_or_default(),
    };
    let packages: BTreeSet<EntityId> = evidence
        .iter()
        .filter_map(|id| flows.flow(*id))
        .map(|f| f.payload)
        .collect();
    let recipients: BTreeSet<EntityId> = evidence
        .iter()
        .filter_map(|id| flows.flow(*id))
        .map(|f| f.recipient)
        .collect();

    let mut body = Vec::new();
    let mut category = parent.category;
    match issue {
        Some(issue) => {
            body.push(headline(kb, issue));
            for flow in &evidence {
                body.push(BodyLine::new(
                    chain_text(kb, flows, *flow),
                    vec![Provenance::IssueEvidence {
                        issue: issue.id.clone(),
                        flow: *flow,
                    }],
                ));
            }
            category = issue_category(kb, issue, &packages).or(category);
        }
        None => {
            if let Some(first) = parent.body.first() {
                body.push(first.clone());
            }
            for flow in &evidence {
                let text = chain_text(kb, flows, *flow);
                let provenance = parent
                    .service
                    .map(|s| {
                        vec![Provenance::ReportField {
                            service: s,
                            field: format!("flows.{}", flow.0),
                        }]
                    })
                    .unwrap_or_default();
                body.push(BodyLine::new(text, provenance));
            }
        }
    }

    for (index, decl) in kb.value_decls().iter().enumerate() {
        if decl.condition.iter().any(|p| packages.contains(p)) {
            body.push(BodyLine::new(
                format!(
                    "At stake: {} {:.2} from {} depends on this disclosure",
                    decl.value_kind,
                    decl.magnitude,
                    kb.name_of(decl.src)
                ),
                vec![Provenance::ValueDecl { index }],
            ));
        }
    }

    let (template, subject) = match issue {
        Some(issue) => (
            Template::IssueDetail,
            NudgeSubject::Issue {
                issue: issue.id.clone(),
            },
        ),
        None => (
            Template::ActionMenu,
            match parent.service {
                Some(service) => NudgeSubject::Service { service },
                None => parent.subject.clone(),
            },
        ),
    };
    Ok(Nudge {
        id: level2_id(&parent.id, issue.map(|i| i.id.as_str())),
        level: 2,
        template,
        subject,
        body,
        options: vec![Action::Keep, Action::Delete, Action::DisableSharing],
        created_at,
        parent: Some(parent.id.clone()),
        service: parent.service,
        category,
        scope: NudgeScope {
            packages: packages.into_iter().collect(),
            recipients: recipients.into_iter().collect(),
        },
    })
}

fn headline(kb: &KnowledgeBase, issue: &PrivacyIssue) -> BodyLine {
    let m = |key: &str| Provenance::IssueMetric {
        issue: issue.id.clone(),
        metric: key.to_string(),
    };
    match issue.pattern {
        IssuePattern::SensitiveReach => BodyLine::new(
            format!(
                "{} could have flowed to {} company groups, {} organizations",
                issue.focus_name,
                issue.metric(metric::GROUPS_REACHED),
                issue.metric(metric::ORGS_REACHED)
            ),
            vec![m(metric::GROUPS_REACHED), m(metric::ORGS_REACHED)],
        ),
        IssuePattern::Aggregation => BodyLine::new(
            format!(
                "{} can combine {} of your data packages",
                issue.focus_name,
                issue.metric(metric::PACKAGES)
            ),
            vec![m(metric::PACKAGES)],
        ),
        IssuePattern::CrossPlatformLink => BodyLine::new(
            format!(
                "{} can link {} of your packages across {} services",
                issue.focus_name,
                issue.metric(metric::PACKAGES),
                issue.metric(metric::SERVICES)
            ),
            vec![m(metric::PACKAGES), m(metric::SERVICES)],
        ),
        IssuePattern::UnknownRecipient => BodyLine::new(
            format!(
                "{} received {} of your data packages and may be unknown to you",
                kb.name_of(issue.focus),
                issue.metric(metric::PACKAGES)
            ),
            vec![m(metric::PACKAGES)],
        ),
    }
}

fn issue_category(
    kb: &KnowledgeBase,
    issue: &PrivacyIssue,
    packages: &BTreeSet<EntityId>,
) -> Option<DataCategory> {
    if issue.pattern == IssuePattern::SensitiveReach {
        if let Some(item) = kb.data_item(issue.focus) {
            return Some(item.category);
        }
    }
    packages
        .iter()
        .flat_map(|p| kb.my_package_items(*p))
        .max_by(|a, b| a.sensitivity.total_cmp(&b.sensitivity).then(b.entity.cmp(&a.entity)))
        .map(|item| item.category)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionRequest {
    /// Id of the behavior event that triggered the request.
    pub event: u64,
    pub nudge: String,
    pub timestamp: i64,
    pub packages: Vec<EntityId>,
    pub recipients: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum BehaviorRecord {
    Shown { nudge: NudgeRef, timestamp: i64 },
    Behavior(BehaviorEvent),
    Deletion(DeletionRequest),
}

/// Append-only record of nudge displays, user responses and deletion requests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BehaviorLog {
    records: Vec<BehaviorRecord>,
    next_event: u64,
}

impl BehaviorLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[BehaviorRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn was_shown(&self, nudge: &str) -> bool {
        self.records
            .iter()
            .any(|r| matches!(r, BehaviorRecord::Shown { nudge: n, .. } if n.id == nudge))
    }

    /// Record a display. Repeated displays of the same nudge are recorded once;
    /// returns whether a record was appended.
    pub fn mark_shown(&mut self, nudge: &Nudge, timestamp: i64) -> bool {
        if self.was_shown(&nudge.id) {
            return false;
        }
        self.records.push(BehaviorRecord::Shown {
            nudge: nudge.reference(),
            timestamp,
        });
        true
    }

    /// Append an externally observed behavior (e.g. sharing switched off).
    pub fn record_external(&mut self, mut event: BehaviorEvent) -> BehaviorEvent {
        self.next_event += 1;
        event.id = self.next_event;
        event.kind = BehaviorKind::External;
        self.records.push(BehaviorRecord::Behavior(event.clone()));
        event
    }

    /// Re-append a record read back from storage, keeping event ids monotone.
    pub fn restore(&mut self, record: BehaviorRecord) {
        if let BehaviorRecord::Behavior(event) = &record {
            self.next_event = self.next_event.max(event.id);
        }
        self.records.push(record);
    }

    /// Id the next recorded behavior event will receive.
    pub fn next_event_id(&self) -> u64 {
        self.next_event + 1
    }

    pub fn behavior_events(&self) -> impl Iterator<Item = &BehaviorEvent> {
        self.records.iter().filter_map(|r| match r {
            BehaviorRecord::Behavior(e) => Some(e),
            _ => None,
        })
    }

    pub fn deletion_requests(&self) -> impl Iterator<Item = &DeletionRequest> {
        self.records.iter().filter_map(|r| match r {
            BehaviorRecord::Deletion(d) => Some(d),
            _ => None,
        })
    }
}

/// Append the user's response to a nudge. A delete also appends a deletion
/// request covering the nudge's packages and recipients.
pub fn record_action(
    log: &mut BehaviorLog,
    nudge: &Nudge,
    action: Action,
    timestamp: i64,
) -> Result<BehaviorEvent, NudgeError> {
    if !nudge.options.contains(&action) {
        return Err(NudgeError::InvalidOption {
            nudge: nudge.id.clone(),
            action,
        });
    }
    log.next_event += 1;
    let event = BehaviorEvent {
        id: log.next_event,
        timestamp,
        kind: BehaviorKind::Internal,
        action,
        nudge: Some(nudge.reference()),
        category: nudge.category,
        service: nudge.service,
        control: None,
    };
    log.records.push(BehaviorRecord::Behavior(event.clone()));
    if action == Action::Delete {
        log.records.push(BehaviorRecord::Deletion(DeletionRequest {
            event: event.id,
            nudge: nudge.id.clone(),
            timestamp,
            packages: nudge.scope.packages.clone(),
            recipients: nudge.scope.recipients.clone(),
        }));
    }
    Ok(event)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NudgeStats {
    pub template: Template,
    pub shown: u64,
    pub acted: BTreeMap<Action, u64>,
    pub protective_rate: f64,
}

/// Per-template display and response counts. Pure and order-independent.
pub fn nudge_stats(log: &BehaviorLog) -> Vec<NudgeStats> {
    let mut shown: BTreeMap<Template, u64> = BTreeMap::new();
    let mut acted: BTreeMap<Template, BTreeMap<Action, u64>> = BTreeMap::new();
    for record in log.records() {
        match record {
            BehaviorRecord::Shown { nudge, .. } => *shown.entry(nudge.template).or_default() += 1,
            BehaviorRecord::Behavior(event) => {
                if let Some(nudge) = &event.nudge {
                    *acted
                        .entry(nudge.template)
                        .or_default()
                        .entry(event.action)
                        .or_default() += 1;
                }
            }
            BehaviorRecord::Deletion(_) => {}
        }
    }
    let templates: BTreeSet<Template> = shown.keys().chain(acted.keys()).copied().collect();
    templates
        .into_iter()
        .map(|template| {
            let shown = shown.get(&template).copied().unwrap_or(0);
            let acted = acted.remove(&template).unwrap_or_default();
            let protective: u64 = acted
                .iter()
                .filter(|(a, _)| a.is_protective())
                .map(|(_, n)| *n)
                .sum();
            let protective_rate = if shown > 0 {
                (protective as f64 / shown as f64).min(1.0)
            } else {
                0.0
            };
            NudgeStats {
                template,
                shown,
                acted,
                protective_rate,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assessment::{RiskScore, ValueScore};

    fn report(service: u32, score: f64, verdict: Verdict) -> ServiceReport {
        ServiceReport {
            service: EntityId(service),
            service_name: format!("svc{service}"),
            risk: RiskScore::new(score, 1.0),
            value: ValueScore::NONE,
            risk_threshold: 0.5,
            value_floor: 0.4,
            categories: vec![DataCategory::Identity],
            issues: vec![],
            verdict,
            explanation: vec![],
        }
    }

    fn card(id: &str, template: Template) -> Nudge {
        Nudge {
            id: id.into(),
            level: 1,
            template,
            subject: NudgeSubject::Service {
                service: EntityId(1),
            },
            body: vec![],
            options: vec![Action::Keep, Action::More],
            created_at: 0,
            parent: None,
            service: Some(EntityId(1)),
            category: Some(DataCategory::Medical),
            scope: NudgeScope::default(),
        }
    }

    #[test]
    fn no_cards_when_everything_is_ok() {
        let profile = PreferenceProfile::for_segment(crate::preference::Segment::Pragmatist);
        let reports = vec![report(1, 0.1, Verdict::Ok)];
        assert!(build_level1(&reports, &[], &profile, 0).is_empty());
    }

    #[test]
    fn cards_follow_report_order_and_offer_more() {
        let profile = PreferenceProfile::for_segment(crate::preference::Segment::Pragmatist);
        let reports = vec![report(2, 0.9, Verdict::Risky), report(1, 0.7, Verdict::Risky)];
        let cards = build_level1(&reports, &[], &profile, 5);
        assert_eq!(cards.len(), 2);
        assert_eq!(cards[0].service, Some(EntityId(2)));
        assert_eq!(cards[1].service, Some(EntityId(1)));
        for c in &cards {
            assert!(c.options.contains(&Action::More));
            assert_eq!(c.level, 1);
            assert!(c.body.iter().all(|l| !l.provenance.is_empty()));
        }
    }

    #[test]
    fn invalid_option_rejected_and_log_untouched() {
        let mut log = BehaviorLog::new();
        let c = card("c", Template::RiskyAppCard);
        assert!(matches!(
            record_action(&mut log, &c, Action::Delete, 0),
            Err(NudgeError::InvalidOption { .. })
        ));
        assert!(log.is_empty());
        let event = record_action(&mut log, &c, Action::Keep, 3).unwrap();
        assert_eq!(event.action, Action::Keep);
        assert_eq!(event.kind, BehaviorKind::Internal);
        assert_eq!(event.category, Some(DataCategory::Medical));
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn delete_appends_deletion_request() {
        let mut log = BehaviorLog::new();
        let mut c = card("l2", Template::IssueDetail);
        c.level = 2;
        c.options = vec![Action::Keep, Action::Delete, Action::DisableSharing];
        c.scope.packages = vec![EntityId(7)];
        let event = record_action(&mut log, &c, Action::Delete, 9).unwrap();
        assert_eq!(log.len(), 2);
        let req: Vec<_> = log.deletion_requests().collect();
        assert_eq!(req.len(), 1);
        assert_eq!(req[0].event, event.id);
        assert_eq!(req[0].packages, vec![EntityId(7)]);
    }

    #[test]
    fn unshown_parent_rejected() {
        let log = BehaviorLog::new();
        let parent = card("p", Template::RiskyAppCard);
        let kb = KnowledgeBase::new();
        let flows = FlowSet::default();
        assert_eq!(
            build_level2(&log, &parent, None, &kb, &flows, 0),
            Err(NudgeError::UnshownParent("p".into()))
        );
    }

    #[test]
    fn stats_protective_rate() {
        let mut log = BehaviorLog::new();
        let mut nudges = Vec::new();
        for i in 0..4 {
            let mut n = card(&format!("n{i}"), Template::IssueDetail);
            n.options = vec![Action::Keep, Action::Delete, Action::DisableSharing];
            log.mark_shown(&n, 0);
            nudges.push(n);
        }
        record_action(&mut log, &nudges[0], Action::Delete, 1).unwrap();
        record_action(&mut log, &nudges[1], Action::DisableSharing, 1).unwrap();
        record_action(&mut log, &nudges[2], Action::Keep, 1).unwrap();
        let stats = nudge_stats(&log);
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].shown, 4);
        assert_eq!(stats[0].protective_rate, 0.5);
        assert!(nudge_stats(&BehaviorLog::new()).is_empty());
    }

    #[test]
    fn shown_is_recorded_once() {
        let mut log = BehaviorLog::new();
        let c = card("c", Template::RiskyAppCard);
        assert!(log.mark_shown(&c, 0));
        assert!(!log.mark_shown(&c, 1));
        assert_eq!(log.len(), 1);
    }
}
