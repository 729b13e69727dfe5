use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{EntityId, EntityKind, KnowledgeBase, RelationId, RelationKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    MissingMe,
    MultipleMe { persons: Vec<EntityId> },
    DanglingRef { field: String, id: EntityId },
    SchemaViolation { relation: RelationId, detail: String },
    OwnershipCycle { organizations: Vec<EntityId> },
    EmptyPackage { package: EntityId },
    DuplicateEntity { kind: EntityKind, name: String },
    InvalidDataItem { entity: EntityId, detail: String },
    InvalidValueDecl { index: usize, detail: String },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::MissingMe => write!(f, "no person is marked as \"me\""),
            Finding::MultipleMe { persons } => {
                write!(f, "{} persons are marked as \"me\"", persons.len())
            }
            Finding::DanglingRef { field, id } => write!(f, "{field} refers to missing {id}"),
            Finding::SchemaViolation { relation, detail } => write!(f, "{relation}: {detail}"),
            Finding::OwnershipCycle { organizations } => {
                write!(f, "isPartOf cycle through {} organizations", organizations.len())
            }
            Finding::EmptyPackage { package } => write!(f, "package {package} contains no data"),
            Finding::DuplicateEntity { kind, name } => write!(f, "duplicate {kind} {name:?}"),
            Finding::InvalidDataItem { entity, detail } => write!(f, "data item {entity}: {detail}"),
            Finding::InvalidValueDecl { index, detail } => {
                write!(f, "value_decls[{index}]: {detail}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return writeln!(f, "ok: 0 findings");
        }
        writeln!(f, "{} findings", self.findings.len())?;
        for finding in &self.findings {
            writeln!(f, "  - {finding}")?;
        }
        Ok(())
    }
}

/// Full scan of a knowledge base. Never fails; problems are reported as findings.
pub fn validate(kb: &KnowledgeBase) -> ValidationReport {
    let mut findings = Vec::new();

    let mes: Vec<_> = kb.entities().filter(|e| e.is_me()).map(|e| e.id).collect();
    match mes.len() {
        0 => findings.push(Finding::MissingMe),
        1 => {}
        _ => findings.push(Finding::MultipleMe { persons: mes }),
    }

    let mut seen_names = BTreeSet::new();
    for entity in kb.entities() {
        if !seen_names.insert((entity.kind, entity.name.as_str())) {
            findings.push(Finding::DuplicateEntity {
                kind: entity.kind,
                name: entity.name.clone(),
            });
        }
    }

    for rel in kb.relations() {
        let src = kb.entity(rel.src);
        let dst = kb.entity(rel.dst);
        if src.is_none() {
            findings.push(Finding::DanglingRef {
                field: format!("relation {} src", rel.id),
                id: rel.src,
            });
        }
        if dst.is_none() {
            findings.push(Finding::DanglingRef {
                field: format!("relation {} dst", rel.id),
                id: rel.dst,
            });
        }
        if let (Some(src), Some(dst)) = (src, dst) {
            if !rel.kind.accepts(src.kind, dst.kind) {
                findings.push(Finding::SchemaViolation {
                    relation: rel.id,
                    detail: format!("{} does not accept {} -> {}", rel.kind, src.kind, dst.kind),
                });
            }
        }
    }

    if let Some(cycle) = find_ownership_cycle(kb) {
        findings.push(Finding::OwnershipCycle {
            organizations: cycle,
        });
    }

    for package in kb.entities_of(EntityKind::DataPackage) {
        let has_data = kb.package_items(package.id).into_iter().any(|item| {
            kb.entity(item).is_some_and(|e| e.kind == EntityKind::Data)
        });
        if !has_data {
            findings.push(Finding::EmptyPackage { package: package.id });
        }
    }

    for item in kb.data_items() {
        match kb.entity(item.entity) {
            None => findings.push(Finding::DanglingRef {
                field: "data_items entity".into(),
                id: item.entity,
            }),
            Some(e) if e.kind != EntityKind::Data => findings.push(Finding::InvalidDataItem {
                entity: item.entity,
                detail: format!("annotated entity is a {}", e.kind),
            }),
            Some(_) => {}
        }
        if !(0.0..=1.0).contains(&item.sensitivity) {
            findings.push(Finding::InvalidDataItem {
                entity: item.entity,
                detail: format!("sensitivity {} outside [0, 1]", item.sensitivity),
            });
        }
    }

    for (index, decl) in kb.value_decls().iter().enumerate() {
        let mut bad = |detail: String| findings.push(Finding::InvalidValueDecl { index, detail });
        match kb.entity(decl.src) {
            Some(e) if matches!(e.kind, EntityKind::Service | EntityKind::Organization) => {}
            Some(e) => bad(format!("source is a {}", e.kind)),
            None => bad(format!("source {} missing", decl.src)),
        }
        if !kb.entity(decl.dst).is_some_and(|e| e.is_me()) {
            bad("destination is not \"me\"".into());
        }
        if !(0.0..=1.0).contains(&decl.magnitude) {
            bad(format!("magnitude {} outside [0, 1]", decl.magnitude));
        }
        if decl.condition.is_empty() {
            bad("empty condition".into());
        }
        for package in &decl.condition {
            if !kb
                .entity(*package)
                .is_some_and(|e| e.kind == EntityKind::DataPackage)
            {
                bad(format!("condition member {package} is not a DataPackage"));
            }
        }
    }

    ValidationReport { findings }
}

/// Colour-marking DFS over isPartOf edges; returns the organizations on one cycle.
fn find_ownership_cycle(kb: &KnowledgeBase) -> Option<Vec<EntityId>> {
    let mut edges: BTreeMap<EntityId, Vec<EntityId>> = BTreeMap::new();
    for rel in kb.relations_of(RelationKind::IsPartOf) {
        edges.entry(rel.src).or_default().push(rel.dst);
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: BTreeMap<EntityId, Mark> = BTreeMap::new();

    for &start in edges.keys() {
        if marks.contains_key(&start) {
            continue;
        }
        // Stack of (node, next child index); `path` mirrors the active chain.
        let mut stack = vec![(start, 0usize)];
        let mut path = vec![start];
        marks.insert(start, Mark::Active);
        while let Some((node, idx)) = stack.last_mut() {
            let children = edges.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if let Some(&child) = children.get(*idx) {
                *idx += 1;
                match marks.get(&child) {
                    Some(Mark::Active) => {
                        let pos = path.iter().position(|n| *n == child).unwrap_or(0);
                        return Some(path[pos..].to_vec());
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(child, Mark::Active);
                        stack.push((child, 0));
                        path.push(child);
                    }
                }
            } else {
                marks.insert(*node, Mark::Done);
                stack.pop();
                path.pop();
            }
        }
    }
    None
}
