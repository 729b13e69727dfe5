//! Privacy issues as topological patterns over inferred flows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FlowId, FlowSet, InferredFlow};
use crate::kb::{EntityId, EntityKind, KnowledgeBase};
use crate::preference::PreferenceProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssuePattern {
    /// One organization holds several separately disclosed packages.
    Aggregation,
    /// A sensitive item reaches too many organizations or company groups.
    SensitiveReach,
    /// Another person receives packages through social chains on different services.
    CrossPlatformLink,
    /// Data reaches an entity the user does not know about.
    UnknownRecipient,
}

impl IssuePattern {
    pub fn as_str(self) -> &'static str {
        match self {
            IssuePattern::Aggregation => "AGGREGATION",
            IssuePattern::SensitiveReach => "SENSITIVE_REACH",
            IssuePattern::CrossPlatformLink => "CROSS_PLATFORM_LINK",
            IssuePattern::UnknownRecipient => "UNKNOWN_RECIPIENT",
        }
    }
}

impl fmt::Display for IssuePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IssueConfig {
    pub cross_platform_severity: f64,
    pub unknown_recipient_severity: f64,
}

impl Default for IssueConfig {
    fn default() -> Self {
        IssueConfig {
            cross_platform_severity: 0.7,
            unknown_recipient_severity: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyIssue {
    /// Stable across recomputation: pattern plus focus entity.
    pub id: String,
    pub pattern: IssuePattern,
    pub focus: EntityId,
    pub focus_name: String,
    pub evidence: Vec<FlowId>,
    pub metrics: BTreeMap<String, u64>,
    pub severity: f64,
}

impl PrivacyIssue {
    fn new(
        pattern: IssuePattern,
        focus: EntityId,
        kb: &KnowledgeBase,
        evidence: Vec<FlowId>,
        metrics: BTreeMap<String, u64>,
        severity: f64,
    ) -> Self {
        PrivacyIssue {
            id: format!("{}-{}", pattern.as_str().to_ascii_lowercase(), focus.0),
            pattern,
            focus,
            focus_name: kb.name_of(focus).to_string(),
            evidence,
            metrics,
            severity,
        }
    }

    pub fn metric(&self, key: &str) -> u64 {
        self.metrics.get(key).copied().unwrap_or(0)
    }
}

pub mod metric {
    pub const PACKAGES: &str = "packages";
    pub const ROOTS: &str = "roots";
    pub const ORGS_REACHED: &str = "orgs_reached";
    pub const GROUPS_REACHED: &str = "groups_reached";
    pub const SERVICES: &str = "services";
    pub const FLOWS: &str = "flows";
}

fn ids(flows: &[&InferredFlow]) -> Vec<FlowId> {
    flows.iter().map(|f| f.id).collect()
}

fn distinct<T: Ord>(items: impl Iterator<Item = T>) -> u64 {
    items.collect::<BTreeSet<_>>().len() as u64
}

pub fn detect_issues(
    kb: &KnowledgeBase,
    flows: &FlowSet,
    profile: &PreferenceProfile,
    config: &IssueConfig,
) -> Vec<PrivacyIssue> {
    let mut by_recipient: BTreeMap<EntityId, Vec<&InferredFlow>> = BTreeMap::new();
    for flow in &flows.flows {
        by_recipient.entry(flow.recipient).or_default().push(flow);
    }

    let mut issues = Vec::new();

    for (&recipient, incoming) in &by_recipient {
        let Some(entity) = kb.entity(recipient) else { continue };

        if entity.kind == EntityKind::Organization {
            let packages: BTreeSet<EntityId> = incoming.iter().map(|f| f.payload).collect();
            if packages.len() >= 2 {
                let severity = packages
                    .iter()
                    .map(|p| kb.package_impact(*p))
                    .fold(0.0, f64::max);
                let metrics = BTreeMap::from([
                    (metric::PACKAGES.to_string(), packages.len() as u64),
                    (metric::ROOTS.to_string(), distinct(incoming.iter().map(|f| f.root))),
                ]);
                issues.push(PrivacyIssue::new(
                    IssuePattern::Aggregation,
                    recipient,
                    kb,
                    ids(incoming),
                    metrics,
                    severity,
                ));
            }
        }

        if entity.kind == EntityKind::Person && !entity.is_me() {
            let social: Vec<&InferredFlow> = incoming
                .iter()
                .copied()
                .filter(|f| {
                    flows
                        .witness_path(f.id)
                        .iter()
                        .any(|step| step.kind.is_social())
                })
                .collect();
            let packages = distinct(social.iter().map(|f| f.payload));
            let services = distinct(social.iter().filter_map(|f| flows.root_service(f)));
            if packages >= 2 && services >= 2 {
                let metrics = BTreeMap::from([
                    (metric::PACKAGES.to_string(), packages),
                    (metric::SERVICES.to_string(), services),
                ]);
                issues.push(PrivacyIssue::new(
                    IssuePattern::CrossPlatformLink,
                    recipient,
                    kb,
                    ids(&social),
                    metrics,
                    config.cross_platform_severity,
                ));
            }
        }

        if !entity.known_to_user {
            let metrics = BTreeMap::from([
                (metric::FLOWS.to_string(), incoming.len() as u64),
                (metric::PACKAGES.to_string(), distinct(incoming.iter().map(|f| f.payload))),
            ]);
            issues.push(PrivacyIssue::new(
                IssuePattern::UnknownRecipient,
                recipient,
                kb,
                ids(incoming),
                metrics,
                config.unknown_recipient_severity,
            ));
        }
    }

    // Sensitive reach, per data item.
    for item in kb.data_items() {
        if item.sensitivity < profile.sensitive_floor || !kb.is_my_item(item.entity) {
            continue;
        }
        let packages: BTreeSet<EntityId> = kb
            .relations_of(crate::kb::RelationKind::Contains)
            .filter(|r| r.dst == item.entity)
            .map(|r| r.src)
            .collect();
        let to_orgs: Vec<&InferredFlow> = flows
            .flows
            .iter()
            .filter(|f| packages.contains(&f.payload))
            .filter(|f| kb.entity(f.recipient).is_some_and(|e| e.kind == EntityKind::Organization))
            .collect();
        let orgs: BTreeSet<EntityId> = to_orgs.iter().map(|f| f.recipient).collect();
        let groups: BTreeSet<String> = orgs.iter().flat_map(|o| kb.company_groups(*o)).collect();
        let limit = profile.reach_limit.max(1);
        if orgs.len() as u64 > limit || groups.len() > 1 {
            let ratio = (orgs.len() as f64 / limit as f64).min(1.0);
            let metrics = BTreeMap::from([
                (metric::ORGS_REACHED.to_string(), orgs.len() as u64),
                (metric::GROUPS_REACHED.to_string(), groups.len() as u64),
            ]);
            issues.push(PrivacyIssue::new(
                IssuePattern::SensitiveReach,
                item.entity,
                kb,
                ids(&to_orgs),
                metrics,
                item.sensitivity * ratio,
            ));
        }
    }

    issues.sort_by(|a, b| {
        b.severity
            .total_cmp(&a.severity)
            .then_with(|| a.focus_name.cmp(&b.focus_name))
            .then_with(|| a.pattern.cmp(&b.pattern))
            .then_with(|| a.focus.cmp(&b.focus))
    });
    issues
}
