//! Possible data flows derived from disclosure events.
//!
//! Each disclosure event roots a propagation: the package lands at the
//! requesting service (E1) and then follows the one-step rules in [`rules`]
//! until nothing new can be reached. Every recipient keeps its best
//! (highest-likelihood) derivation, so the result is the least fixed point of
//! the rules with max-product likelihoods.

mod graph;
mod issues;
mod rules;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{validate, EntityId, EntityKind, KnowledgeBase, RelationId, ValidationReport};

pub use graph::{FlowGraph, GraphEdge, GraphNode};
pub use issues::{detect_issues, metric, IssueConfig, IssuePattern, PrivacyIssue};
pub use rules::{InferenceConfig, Step};

use rules::RuleIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u64);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ev{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    UserEntry,
    Import,
    Simulated,
}

/// A data package submitted to a service at a point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisclosureEvent {
    pub id: EventId,
    pub package: EntityId,
    pub service: EntityId,
    /// UTC seconds.
    pub timestamp: i64,
    pub source: EventSource,
    /// Set when the service did not declare that it requires the package.
    #[serde(default)]
    pub ad_hoc: bool,
}

/// Type 2 edge classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowEdgeKind {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
    E9,
    E10,
    E11,
    E12a,
    E12b,
}

impl FlowEdgeKind {
    /// Steps that run through online accounts or groups.
    pub fn is_social(self) -> bool {
        matches!(
            self,
            FlowEdgeKind::E5
                | FlowEdgeKind::E6
                | FlowEdgeKind::E7
                | FlowEdgeKind::E8
                | FlowEdgeKind::E9
        )
    }
}

impl fmt::Display for FlowEdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub u32);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "flow{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredFlow {
    pub id: FlowId,
    /// `F<event>-<n>`: event position (1-based) and derivation order within it.
    pub label: String,
    pub root: EventId,
    pub payload: EntityId,
    pub recipient: EntityId,
    pub step_kind: FlowEdgeKind,
    pub via_relation: Option<RelationId>,
    pub parent_flow: Option<FlowId>,
    pub likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessStep {
    pub kind: FlowEdgeKind,
    pub relation: Option<RelationId>,
    pub recipient: EntityId,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("knowledge base has {} validation findings", .0.findings.len())]
    InvalidKb(ValidationReport),
    #[error("{event}: unknown entity {entity}")]
    UnknownEntity { event: EventId, entity: EntityId },
    #[error("{event}: {entity} is not a {expected}")]
    WrongKind {
        event: EventId,
        entity: EntityId,
        expected: EntityKind,
    },
    #[error("{event}: package {package} is not required by service {service} and the event is not ad hoc")]
    NotRequired {
        event: EventId,
        package: EntityId,
        service: EntityId,
    },
    #[error("duplicate event id {0}")]
    DuplicateEvent(EventId),
    #[error("discretionary factor {0} outside (0, 1]")]
    InvalidFactor(f64),
    #[error("propagation did not reach a fixed point within {0} iterations")]
    RuleDivergence(usize),
    #[error("unknown data item {0}")]
    UnknownItem(EntityId),
}

/// Inferred flows for one knowledge-base snapshot and event list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowSet {
    pub kb_version: u64,
    pub events: Vec<DisclosureEvent>,
    pub flows: Vec<InferredFlow>,
}

impl FlowSet {
    pub fn flow(&self, id: FlowId) -> Option<&InferredFlow> {
        // Ids are assigned densely in order.
        self.flows
            .get(id.0 as usize)
            .filter(|f| f.id == id)
            .or_else(|| self.flows.iter().find(|f| f.id == id))
    }

    pub fn event(&self, id: EventId) -> Option<&DisclosureEvent> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn root_service(&self, flow: &InferredFlow) -> Option<EntityId> {
        self.event(flow.root).map(|e| e.service)
    }

    pub fn flows_to(&self, recipient: EntityId) -> impl Iterator<Item = &InferredFlow> {
        self.flows.iter().filter(move |f| f.recipient == recipient)
    }

    pub fn flows_rooted_at_service(&self, service: EntityId) -> impl Iterator<Item = &InferredFlow> {
        let roots: BTreeSet<EventId> = self
            .events
            .iter()
            .filter(|e| e.service == service)
            .map(|e| e.id)
            .collect();
        self.flows.iter().filter(move |f| roots.contains(&f.root))
    }

    /// Recipients of a package across all of its roots.
    pub fn recipients_of(&self, package: EntityId) -> BTreeSet<EntityId> {
        self.flows
            .iter()
            .filter(|f| f.payload == package)
            .map(|f| f.recipient)
            .collect()
    }

    /// `(root, recipient) -> likelihood`; the comparison key for oracles.
    pub fn facts(&self) -> BTreeMap<(EventId, EntityId), f64> {
        self.flows
            .iter()
            .map(|f| ((f.root, f.recipient), f.likelihood))
            .collect()
    }

    /// Chain of steps from the E1 root to `flow`.
    pub fn witness_path(&self, flow: FlowId) -> Vec<WitnessStep> {
        let mut path = Vec::new();
        let mut cursor = self.flow(flow);
        while let Some(f) = cursor {
            path.push(WitnessStep {
                kind: f.step_kind,
                relation: f.via_relation,
                recipient: f.recipient,
            });
            cursor = f.parent_flow.and_then(|p| self.flow(p));
        }
        path.reverse();
        path
    }
}

/// Check events against the knowledge base before propagation.
pub fn check_event(kb: &KnowledgeBase, event: &DisclosureEvent) -> Result<(), InferenceError> {
    for (entity, expected) in [
        (event.package, EntityKind::DataPackage),
        (event.service, EntityKind::Service),
    ] {
        let found = kb.entity(entity).ok_or(InferenceError::UnknownEntity {
            event: event.id,
            entity,
        })?;
        if found.kind != expected {
            return Err(InferenceError::WrongKind {
                event: event.id,
                entity,
                expected,
            });
        }
    }
    if !event.ad_hoc && !kb.is_required_by(event.package, event.service) {
        return Err(InferenceError::NotRequired {
            event: event.id,
            package: event.package,
            service: event.service,
        });
    }
    Ok(())
}

/// Heap entry; max-likelihood first, then first-pushed.
struct Candidate {
    likelihood: f64,
    seq: u64,
    recipient: EntityId,
    kind: FlowEdgeKind,
    relation: Option<RelationId>,
    parent: Option<FlowId>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.likelihood
            .total_cmp(&other.likelihood)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn infer_flows(
    kb: &KnowledgeBase,
    events: &[DisclosureEvent],
    config: &InferenceConfig,
) -> Result<FlowSet, InferenceError> {
    if !(config.discretionary_factor > 0.0 && config.discretionary_factor <= 1.0) {
        return Err(InferenceError::InvalidFactor(config.discretionary_factor));
    }
    let report = validate(kb);
    if !report.is_clean() {
        return Err(InferenceError::InvalidKb(report));
    }
    let mut seen = BTreeSet::new();
    for event in events {
        if !seen.insert(event.id) {
            return Err(InferenceError::DuplicateEvent(event.id));
        }
        check_event(kb, event)?;
    }

    let index = RuleIndex::new(kb, *config);
    let limit = kb.entity_count().max(1) * (kb.relation_count() + kb.entity_count()).max(1);
    let mut flows = Vec::new();

    for (position, event) in events.iter().enumerate() {
        let mut settled: HashMap<EntityId, FlowId> = HashMap::new();
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        heap.push(Candidate {
            likelihood: 1.0,
            seq,
            recipient: event.service,
            kind: FlowEdgeKind::E1,
            relation: None,
            parent: None,
        });
        let mut iterations = 0usize;
        while let Some(candidate) = heap.pop() {
            iterations += 1;
            if iterations > limit {
                return Err(InferenceError::RuleDivergence(limit));
            }
            if settled.contains_key(&candidate.recipient) {
                continue;
            }
            let id = FlowId(flows.len() as u32);
            settled.insert(candidate.recipient, id);
            flows.push(InferredFlow {
                id,
                label: format!("F{}-{}", position + 1, settled.len()),
                root: event.id,
                payload: event.package,
                recipient: candidate.recipient,
                step_kind: candidate.kind,
                via_relation: candidate.relation,
                parent_flow: candidate.parent,
                likelihood: candidate.likelihood,
            });
            for step in index.successors(candidate.recipient) {
                if settled.contains_key(&step.recipient) {
                    continue;
                }
                seq += 1;
                heap.push(Candidate {
                    likelihood: candidate.likelihood * step.factor,
                    seq,
                    recipient: step.recipient,
                    kind: step.kind,
                    relation: step.relation,
                    parent: Some(id),
                });
            }
        }
    }

    Ok(FlowSet {
        kb_version: kb.version(),
        events: events.to_vec(),
        flows,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("path is empty")]
    Empty,
    #[error("path must start with an E1 step to the event's service")]
    BadRoot,
    #[error("step {index} ({kind}) is not licensed by any rule")]
    Unlicensed { index: usize, kind: FlowEdgeKind },
}

/// Re-derive a flow from its witness path by applying the rules step by step.
/// Returns `(payload, recipient, likelihood)`.
pub fn replay_witness(
    kb: &KnowledgeBase,
    event: &DisclosureEvent,
    path: &[WitnessStep],
    config: &InferenceConfig,
) -> Result<(EntityId, EntityId, f64), ReplayError> {
    let (first, rest) = path.split_first().ok_or(ReplayError::Empty)?;
    if first.kind != FlowEdgeKind::E1 || first.recipient != event.service || first.relation.is_some()
    {
        return Err(ReplayError::BadRoot);
    }
    let index = RuleIndex::new(kb, *config);
    let mut at = event.service;
    let mut likelihood = 1.0;
    for (i, step) in rest.iter().enumerate() {
        let licensed = index.successors(at).into_iter().find(|s| {
            s.kind == step.kind && s.relation == step.relation && s.recipient == step.recipient
        });
        let Some(licensed) = licensed else {
            return Err(ReplayError::Unlicensed {
                index: i + 1,
                kind: step.kind,
            });
        };
        likelihood *= licensed.factor;
        at = licensed.recipient;
    }
    Ok((event.package, at, likelihood))
}

/// One entry of a reach set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reach {
    pub entity: EntityId,
    pub likelihood: f64,
    pub flow: FlowId,
    pub witness: Vec<WitnessStep>,
}

/// Entities that received some package containing `item`, with the best
/// likelihood over all delivering flows. Items not owned by "me" reach nobody.
pub fn reach_set(
    kb: &KnowledgeBase,
    flows: &FlowSet,
    item: EntityId,
) -> Result<Vec<Reach>, InferenceError> {
    match kb.entity(item) {
        Some(e) if e.kind == EntityKind::Data => {}
        _ => return Err(InferenceError::UnknownItem(item)),
    }
    if !kb.is_my_item(item) {
        return Ok(Vec::new());
    }
    let packages: BTreeSet<EntityId> = kb
        .relations_of(crate::kb::RelationKind::Contains)
        .filter(|r| r.dst == item)
        .map(|r| r.src)
        .collect();
    let mut best: BTreeMap<EntityId, &InferredFlow> = BTreeMap::new();
    for flow in flows.flows.iter().filter(|f| packages.contains(&f.payload)) {
        best.entry(flow.recipient)
            .and_modify(|current| {
                if flow.likelihood > current.likelihood {
                    *current = flow;
                }
            })
            .or_insert(flow);
    }
    Ok(best
        .into_iter()
        .map(|(entity, flow)| Reach {
            entity,
            likelihood: flow.likelihood,
            flow: flow.id,
            witness: flows.witness_path(flow.id),
        })
        .collect())
}
