//! Node/edge export for visualization consumers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::FlowSet;
use crate::kb::{EntityId, EntityKind, KnowledgeBase, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: EntityId,
    pub kind: EntityKind,
    pub world: World,
    pub name: String,
    pub known_to_user: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: EntityId,
    pub dst: EntityId,
    /// `relation:<kind>` for semantic relations, `flow:<E..>` for inferred flows.
    pub kind: String,
    pub label: Option<String>,
    pub likelihood: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl FlowGraph {
    /// Every entity plus every relation, overlaid with the inferred flow steps.
    pub fn build(kb: &KnowledgeBase, flows: &FlowSet) -> Self {
        let nodes = kb
            .entities()
            .map(|e| GraphNode {
                id: e.id,
                kind: e.kind,
                world: e.kind.world(),
                name: e.name.clone(),
                known_to_user: e.known_to_user,
            })
            .collect();
        let mut edges: Vec<GraphEdge> = kb
            .relations()
            .map(|r| GraphEdge {
                src: r.src,
                dst: r.dst,
                kind: format!("relation:{}", r.kind),
                label: None,
                likelihood: None,
            })
            .collect();
        let mut seen = BTreeSet::new();
        for flow in &flows.flows {
            let src = match flow.parent_flow.and_then(|p| flows.flow(p)) {
                Some(parent) => parent.recipient,
                None => flow.payload,
            };
            if seen.insert((flow.root, src, flow.recipient)) {
                edges.push(GraphEdge {
                    src,
                    dst: flow.recipient,
                    kind: format!("flow:{}", flow.step_kind),
                    label: Some(flow.label.clone()),
                    likelihood: Some(flow.likelihood),
                });
            }
        }
        FlowGraph { nodes, edges }
    }
}
