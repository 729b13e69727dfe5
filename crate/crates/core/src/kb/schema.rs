//! Entity kinds, relation kinds and the closed relation signature table.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Which world an entity lives in, from the user's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum World {
    Physical,
    Cyber,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Person,
    Data,
    Service,
    DataPackage,
    Organization,
    OnlineAccount,
    OnlineGroup,
}

impl EntityKind {
    pub const ALL: [EntityKind; 7] = [
        EntityKind::Person,
        EntityKind::Data,
        EntityKind::Service,
        EntityKind::DataPackage,
        EntityKind::Organization,
        EntityKind::OnlineAccount,
        EntityKind::OnlineGroup,
    ];

    pub fn world(self) -> World {
        match self {
            EntityKind::Person => World::Physical,
            EntityKind::Service | EntityKind::OnlineAccount | EntityKind::OnlineGroup => {
                World::Cyber
            }
            EntityKind::Data | EntityKind::DataPackage | EntityKind::Organization => World::Hybrid,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Person => "Person",
            EntityKind::Data => "Data",
            EntityKind::Service => "Service",
            EntityKind::DataPackage => "DataPackage",
            EntityKind::Organization => "Organization",
            EntityKind::OnlineAccount => "OnlineAccount",
            EntityKind::OnlineGroup => "OnlineGroup",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a relation may carry data, and with what confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisclosurePolicy {
    /// Contractual flow: data always passes.
    Always,
    /// Social or business flow that may pass; weighted by the discretionary factor.
    Discretionary,
    /// Relation is recorded but never carries data.
    Never,
}

/// Semantic (Type 1) relation kinds. Each kind has exactly one endpoint signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RelationKind {
    OwnsData,
    Contains,
    RequiredBy,
    ProvidedBy,
    IsPartOf,
    Invest,
    CollaborateWith,
    SuppliedBy,
    PoweredBy,
    OutsourcedTo,
    Create,
    Friend,
    Account,
    Exist,
    MemberOf,
    Know,
    WorksFor,
    OwnsOrg,
}

impl RelationKind {
    pub const ALL: [RelationKind; 18] = [
        RelationKind::OwnsData,
        RelationKind::Contains,
        RelationKind::RequiredBy,
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
        RelationKind::OwnsOrg,
    ];

    /// The (source kind, destination kind) signature of this relation.
    pub fn signature(self) -> (EntityKind, EntityKind) {
        use EntityKind::*;
        match self {
            RelationKind::OwnsData => (Person, Data),
            RelationKind::Contains => (DataPackage, Data),
            RelationKind::RequiredBy => (DataPackage, Service),
            RelationKind::ProvidedBy => (Service, Organization),
            RelationKind::IsPartOf
            | RelationKind::Invest
            | RelationKind::CollaborateWith => (Organization, Organization),
            RelationKind::SuppliedBy | RelationKind::PoweredBy | RelationKind::OutsourcedTo => {
                (Service, Service)
            }
            RelationKind::Create => (Service, OnlineAccount),
            RelationKind::Friend => (OnlineAccount, OnlineAccount),
            RelationKind::Account => (OnlineAccount, Person),
            RelationKind::Exist => (Service, OnlineGroup),
            RelationKind::MemberOf => (OnlineAccount, OnlineGroup),
            RelationKind::Know => (Person, Person),
            RelationKind::WorksFor | RelationKind::OwnsOrg => (Person, Organization),
        }
    }

    pub fn accepts(self, src: EntityKind, dst: EntityKind) -> bool {
        self.signature() == (src, dst)
    }

    /// Contractual relations default to `Always`, social and business ties to `Discretionary`.
    pub fn default_policy(self) -> DisclosurePolicy {
        match self {
            RelationKind::Invest
            | RelationKind::CollaborateWith
            | RelationKind::Friend
            | RelationKind::Know
            | RelationKind::MemberOf
            | RelationKind::WorksFor
            | RelationKind::OwnsOrg => DisclosurePolicy::Discretionary,
            _ => DisclosurePolicy::Always,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::OwnsData => "ownsData",
            RelationKind::Contains => "contains",
            RelationKind::RequiredBy => "requiredBy",
            RelationKind::ProvidedBy => "providedBy",
            RelationKind::IsPartOf => "isPartOf",
            RelationKind::Invest => "invest",
            RelationKind::CollaborateWith => "collaborateWith",
            RelationKind::SuppliedBy => "suppliedBy",
            RelationKind::PoweredBy => "poweredBy",
            RelationKind::OutsourcedTo => "outsourcedTo",
            RelationKind::Create => "create",
            RelationKind::Friend => "friend",
            RelationKind::Account => "account",
            RelationKind::Exist => "exist",
            RelationKind::MemberOf => "memberOf",
            RelationKind::Know => "know",
            RelationKind::WorksFor => "worksFor",
            RelationKind::OwnsOrg => "ownsOrg",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
