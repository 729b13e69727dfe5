//! Joint privacy-risk / added-value assessment.
//!
//! Risk of a single flow is impact times likelihood; per-service risk and value
//! are noisy-or aggregates so they stay in `[0, 1]` and never shrink when
//! another flow or value declaration is added.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::inference::{DisclosureEvent, FlowSet, InferredFlow, PrivacyIssue};
use crate::kb::{DataCategory, EntityId, KnowledgeBase, ValueKind};
use crate::preference::PreferenceProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub impact: f64,
    pub likelihood: f64,
    pub score: f64,
}

impl RiskScore {
    pub const ZERO: RiskScore = RiskScore {
        impact: 0.0,
        likelihood: 0.0,
        score: 0.0,
    };

    pub fn new(impact: f64, likelihood: f64) -> Self {
        RiskScore {
            impact,
            likelihood,
            score: impact * likelihood,
        }
    }
}

/// `1 - prod(1 - p)`.
pub fn noisy_or(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    // Incremental form keeps the singleton case exact.
    probabilities
        .into_iter()
        .fold(0.0, |acc, p| acc + p - acc * p)
}

pub fn flow_risk(flow: &InferredFlow, kb: &KnowledgeBase) -> RiskScore {
    RiskScore::new(kb.package_impact(flow.payload), flow.likelihood)
}

/// Noisy-or over every flow rooted at an event on `service`. The reported
/// likelihood is `score / impact`, capped at 1 because several flows can
/// together exceed the impact of any single package.
pub fn service_risk(service: EntityId, flows: &FlowSet, kb: &KnowledgeBase) -> RiskScore {
    let rooted: Vec<&InferredFlow> = flows.flows_rooted_at_service(service).collect();
    if rooted.is_empty() {
        return RiskScore::ZERO;
    }
    let score = noisy_or(rooted.iter().map(|f| flow_risk(f, kb).score));
    let impact = rooted
        .iter()
        .map(|f| kb.package_impact(f.payload))
        .fold(0.0, f64::max);
    let likelihood = if impact > 0.0 {
        (score / impact).min(1.0)
    } else {
        0.0
    };
    RiskScore {
        impact,
        likelihood,
        score,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueScore {
    pub realized: f64,
    pub value_kinds: Vec<ValueKind>,
    /// Indexes into the knowledge base's value declarations that contributed.
    pub decls: Vec<usize>,
}

impl ValueScore {
    pub const NONE: ValueScore = ValueScore {
        realized: 0.0,
        value_kinds: Vec::new(),
        decls: Vec::new(),
    };
}

/// Value returned through `service`'s provider chain: declarations whose
/// source sits in the chain and whose condition packages have all been
/// disclosed to a service in that source's reach.
pub fn service_value(
    service: EntityId,
    events: &[DisclosureEvent],
    kb: &KnowledgeBase,
) -> ValueScore {
    let chain = kb.provider_chain(service);
    let event_chains: Vec<(EntityId, BTreeSet<EntityId>)> = events
        .iter()
        .map(|e| (e.package, kb.provider_chain(e.service)))
        .collect();
    let mut decls = Vec::new();
    for (index, decl) in kb.value_decls().iter().enumerate() {
        if !chain.contains(&decl.src) {
            continue;
        }
        let satisfied = decl.condition.iter().all(|package| {
            event_chains
                .iter()
                .any(|(p, c)| p == package && c.contains(&decl.src))
        });
        if satisfied {
            decls.push(index);
        }
    }
    let mut value_kinds: Vec<ValueKind> = decls
        .iter()
        .map(|i| kb.value_decls()[*i].value_kind)
        .collect();
    value_kinds.sort();
    ValueScore {
        realized: noisy_or(decls.iter().map(|i| kb.value_decls()[*i].magnitude)),
        value_kinds,
        decls,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    Risky,
    RiskyButValuable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Ok => "ok",
            Verdict::Risky => "risky",
            Verdict::RiskyButValuable => "risky_but_valuable",
        })
    }
}

pub fn verdict(risk: f64, value: f64, risk_threshold: f64, value_floor: f64) -> Verdict {
    if risk > risk_threshold {
        if value >= value_floor {
            Verdict::RiskyButValuable
        } else {
            Verdict::Risky
        }
    } else {
        Verdict::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceReport {
    pub service: EntityId,
    pub service_name: String,
    pub risk: RiskScore,
    pub value: ValueScore,
    /// Threshold actually compared against, after per-category adjustment.
    pub risk_threshold: f64,
    pub value_floor: f64,
    pub categories: Vec<DataCategory>,
    pub issues: Vec<String>,
    pub verdict: Verdict,
    pub explanation: Vec<String>,
}

pub fn joint_assessment(
    kb: &KnowledgeBase,
    flows: &FlowSet,
    issues: &[PrivacyIssue],
    profile: &PreferenceProfile,
) -> Vec<ServiceReport> {
    let services: BTreeSet<EntityId> = flows.events.iter().map(|e| e.service).collect();
    let mut reports: Vec<ServiceReport> = services
        .into_iter()
        .map(|service| assess_service(kb, flows, issues, profile, service))
        .collect();
    reports.sort_by(|a, b| {
        b.risk
            .score
            .total_cmp(&a.risk.score)
            .then_with(|| a.service_name.cmp(&b.service_name))
            .then_with(|| a.service.cmp(&b.service))
    });
    reports
}

fn assess_service(
    kb: &KnowledgeBase,
    flows: &FlowSet,
    issues: &[PrivacyIssue],
    profile: &PreferenceProfile,
    service: EntityId,
) -> ServiceReport {
    let risk = service_risk(service, flows, kb);
    let value = service_value(service, &flows.events, kb);
    let categories: BTreeSet<DataCategory> = flows
        .events
        .iter()
        .filter(|e| e.service == service)
        .flat_map(|e| kb.my_package_items(e.package))
        .map(|item| item.category)
        .collect();
    let risk_threshold = profile.threshold_for(categories.iter().copied());
    let touching: Vec<&PrivacyIssue> = issues
        .iter()
        .filter(|issue| {
            issue.evidence.iter().any(|id| {
                flows
                    .flow(*id)
                    .and_then(|f| flows.root_service(f))
                    .is_some_and(|s| s == service)
            })
        })
        .collect();
    let verdict = verdict(risk.score, value.realized, risk_threshold, profile.value_floor);

    let rooted: Vec<&InferredFlow> = flows.flows_rooted_at_service(service).collect();
    let recipients: BTreeSet<EntityId> = rooted.iter().map(|f| f.recipient).collect();
    let mut explanation = vec![format!(
        "privacy risk {:.2} (impact {:.2}) from {} flows reaching {} entities; your threshold {:.2}",
        risk.score,
        risk.impact,
        rooted.len(),
        recipients.len(),
        risk_threshold
    )];
    if value.decls.is_empty() {
        explanation.push("no added value recorded".to_string());
    } else {
        let sources: Vec<String> = value
            .decls
            .iter()
            .map(|i| {
                let decl = &kb.value_decls()[*i];
                format!("{} from {}", decl.value_kind, kb.name_of(decl.src))
            })
            .collect();
        explanation.push(format!(
            "added value {:.2}: {}; your floor {:.2}",
            value.realized,
            sources.join(", "),
            profile.value_floor
        ));
    }
    for issue in &touching {
        explanation.push(format!(
            "{} at {} (severity {:.2})",
            issue.pattern, issue.focus_name, issue.severity
        ));
    }

    ServiceReport {
        service,
        service_name: kb.name_of(service).to_string(),
        risk,
        value,
        risk_threshold,
        value_floor: profile.value_floor,
        categories: categories.into_iter().collect(),
        issues: touching.iter().map(|i| i.id.clone()).collect(),
        verdict,
        explanation,
    }
}
