//! In-memory assurance-case graph.
//!
//! A case is a tree of claims rooted at a single goal, plus a pool of evidence
//! declarations referenced by id. Edits never mutate in place: each one returns
//! a new [`AssuranceCase`] with `revision` bumped by one.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricId;

/// Identifier of a claim or evidence node, matching `[A-Za-z][A-Za-z0-9_-]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(value: impl Into<String>) -> Result<Self, CaseError> {
        let value = value.into();
        if is_valid_node_id(&value) {
            Ok(NodeId(value))
        } else {
            Err(CaseError::InvalidId(value))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_valid_node_id(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for NodeId {
    type Err = CaseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeId::new(s)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        NodeId::new(s).map_err(serde::de::Error::custom)
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClaimKind {
    Goal,
    Intermediate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub id: NodeId,
    pub statement: String,
    pub kind: ClaimKind,
    /// Lifecycle stage tag. Kept as raw text so that unknown tags survive
    /// decoding and surface as validator findings.
    pub stage: Option<String>,
    pub considers: BTreeSet<String>,
    pub children: Vec<NodeId>,
    pub evidence_refs: BTreeSet<NodeId>,
}

impl Claim {
    pub fn new(id: NodeId, statement: impl Into<String>, kind: ClaimKind) -> Self {
        Claim {
            id,
            statement: statement.into(),
            kind,
            stage: None,
            considers: BTreeSet::new(),
            children: Vec::new(),
            evidence_refs: BTreeSet::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceKind {
    Document,
    Metric,
    Record,
}

impl EvidenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EvidenceKind::Document => "document",
            EvidenceKind::Metric => "metric",
            EvidenceKind::Record => "record",
        }
    }
}

impl fmt::Display for EvidenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Lte,
    Gte,
}

impl Comparator {
    /// Closed comparison: a value equal to the threshold satisfies both.
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Lte => value <= threshold,
            Comparator::Gte => value >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lte => "<=",
            Comparator::Gte => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "<=" => Some(Comparator::Lte),
            ">=" => Some(Comparator::Gte),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentPayload {
    pub uri: String,
    /// Lowercase hex SHA-256 of the referenced file.
    pub sha256: Option<String>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricPayload {
    pub dataset_ref: String,
    pub metric: MetricId,
    pub group_column: String,
    pub condition_column: Option<String>,
    pub comparator: Comparator,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordPayload {
    pub description: String,
    /// ISO-8601 calendar date, `YYYY-MM-DD`.
    pub date: String,
    pub participants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvidencePayload {
    Document(DocumentPayload),
    Metric(MetricPayload),
    Record(RecordPayload),
}

impl EvidencePayload {
    pub fn kind(&self) -> EvidenceKind {
        match self {
            EvidencePayload::Document(_) => EvidenceKind::Document,
            EvidencePayload::Metric(_) => EvidenceKind::Metric,
            EvidencePayload::Record(_) => EvidenceKind::Record,
        }
    }

    /// Checks the payload-level invariants (digest shape, finite threshold,
    /// calendar date).
    pub fn check(&self) -> Result<(), CaseError> {
        match self {
            EvidencePayload::Document(d) => {
                if let Some(sha) = &d.sha256 {
                    if !is_sha256_hex(sha) {
                        return Err(CaseError::Invalid(format!(
                            "sha256 must be 64 lowercase hex characters, got {sha:?}"
                        )));
                    }
                }
                Ok(())
            }
            EvidencePayload::Metric(m) => {
                if !m.threshold.is_finite() {
                    return Err(CaseError::Invalid("metric threshold must be finite".into()));
                }
                Ok(())
            }
            EvidencePayload::Record(r) => {
                if !is_iso_date(&r.date) {
                    return Err(CaseError::Invalid(format!(
                        "record date must be an ISO-8601 date (YYYY-MM-DD), got {:?}",
                        r.date
                    )));
                }
                Ok(())
            }
        }
    }
}

pub(crate) fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

pub(crate) fn is_iso_date(s: &str) -> bool {
    s.len() == 10 && chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub id: NodeId,
    pub title: String,
    pub payload: EvidencePayload,
}

impl Evidence {
    pub fn new(id: NodeId, title: impl Into<String>, payload: EvidencePayload) -> Result<Self, CaseError> {
        let title = title.into();
        if title.is_empty() {
            return Err(CaseError::Empty("evidence title"));
        }
        payload.check()?;
        Ok(Evidence { id, title, payload })
    }

    pub fn kind(&self) -> EvidenceKind {
        self.payload.kind()
    }
}

/// Explicit, reviewable opt-out of one consideration in the fairness map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Waiver {
    pub consideration_id: String,
    pub rationale: String,
}

impl Waiver {
    pub fn new(consideration_id: impl Into<String>, rationale: impl Into<String>) -> Result<Self, CaseError> {
        let rationale = rationale.into();
        if rationale.trim().is_empty() {
            return Err(CaseError::Empty("waiver rationale"));
        }
        Ok(Waiver {
            consideration_id: consideration_id.into(),
            rationale,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CaseError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("invalid node id {0:?}: expected [A-Za-z][A-Za-z0-9_-]*")]
    InvalidId(String),
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("{0}")]
    Invalid(String),
}

/// The argument graph: one goal, a tree of claims, an evidence pool and waivers.
///
/// The edit methods keep the tree invariants. Values assembled by hand can
/// break them; [`validate`](crate::validate::validate) reports how.
#[derive(Debug, Clone, PartialEq)]
pub struct AssuranceCase {
    pub title: String,
    pub root_id: NodeId,
    pub claims: IndexMap<NodeId, Claim>,
    pub evidence: IndexMap<NodeId, Evidence>,
    pub waivers: Vec<Waiver>,
    pub revision: u64,
}

/// Root id used by [`AssuranceCase::new`].
pub const DEFAULT_ROOT_ID: &str = "G1";

impl AssuranceCase {
    /// Creates a case holding a single goal claim with id `G1`.
    pub fn new(title: impl Into<String>, root_statement: impl Into<String>) -> Result<Self, CaseError> {
        Self::with_root(title, NodeId(DEFAULT_ROOT_ID.to_owned()), root_statement)
    }

    pub fn with_root(
        title: impl Into<String>,
        root_id: NodeId,
        root_statement: impl Into<String>,
    ) -> Result<Self, CaseError> {
        let title = title.into();
        let root_statement = root_statement.into();
        if title.is_empty() {
            return Err(CaseError::Empty("case title"));
        }
        if root_statement.is_empty() {
            return Err(CaseError::Empty("goal statement"));
        }
        let mut claims = IndexMap::new();
        claims.insert(root_id.clone(), Claim::new(root_id.clone(), root_statement, ClaimKind::Goal));
        Ok(AssuranceCase {
            title,
            root_id,
            claims,
            evidence: IndexMap::new(),
            waivers: Vec::new(),
            revision: 0,
        })
    }

    pub fn root(&self) -> Option<&Claim> {
        self.claims.get(&self.root_id)
    }

    pub fn claim(&self, id: &str) -> Option<&Claim> {
        self.claims.get(id)
    }

    pub fn evidence(&self, id: &str) -> Option<&Evidence> {
        self.evidence.get(id)
    }

    /// Parent of `id`, found by scanning children lists.
    pub fn parent_of(&self, id: &str) -> Option<&NodeId> {
        self.claims
            .values()
            .find(|c| c.children.iter().any(|ch| ch.as_str() == id))
            .map(|c| &c.id)
    }

    /// Claims reachable from the root in pre-order (each visited once), then
    /// any unreachable claims in storage order.
    pub fn claims_preorder(&self) -> Vec<&Claim> {
        let mut out = Vec::with_capacity(self.claims.len());
        let mut seen: HashSet<&str> = HashSet::new();
        let mut stack: Vec<&str> = vec![self.root_id.as_str()];
        while let Some(id) = stack.pop() {
            let Some(claim) = self.claims.get(id) else { continue };
            if !seen.insert(claim.id.as_str()) {
                continue;
            }
            out.push(claim);
            for child in claim.children.iter().rev() {
                stack.push(child.as_str());
            }
        }
        for claim in self.claims.values() {
            if !seen.contains(claim.id.as_str()) {
                seen.insert(claim.id.as_str());
                out.push(claim);
            }
        }
        out
    }

    /// Equality ignoring `revision`. The textual format does not carry a
    /// revision, so this is the notion of equality a parse/format round trip
    /// preserves.
    pub fn structurally_eq(&self, other: &AssuranceCase) -> bool {
        self.title == other.title
            && self.root_id == other.root_id
            && self.claims == other.claims
            && self.evidence == other.evidence
            && self.waivers == other.waivers
    }

    fn bumped(mut self) -> Self {
        self.revision += 1;
        self
    }

    fn claim_mut(&mut self, id: &str) -> Result<&mut Claim, CaseError> {
        self.claims.get_mut(id).ok_or_else(|| not_found("claim", id))
    }

    pub fn add_claim(&self, parent_id: &str, id: NodeId, statement: impl Into<String>) -> Result<Self, CaseError> {
        let statement = statement.into();
        if statement.is_empty() {
            return Err(CaseError::Empty("claim statement"));
        }
        if !self.claims.contains_key(parent_id) {
            return Err(not_found("claim", parent_id));
        }
        if self.claims.contains_key(&id) {
            return Err(CaseError::DuplicateId {
                kind: "claim",
                id: id.0,
            });
        }
        let mut next = self.clone();
        next.claim_mut(parent_id)?.children.push(id.clone());
        next.claims
            .insert(id.clone(), Claim::new(id, statement, ClaimKind::Intermediate));
        Ok(next.bumped())
    }

    pub fn add_evidence(&self, evidence: Evidence) -> Result<Self, CaseError> {
        if self.evidence.contains_key(&evidence.id) {
            return Err(CaseError::DuplicateId {
                kind: "evidence",
                id: evidence.id.0,
            });
        }
        evidence.payload.check()?;
        let mut next = self.clone();
        next.evidence.insert(evidence.id.clone(), evidence);
        Ok(next.bumped())
    }

    /// Links evidence to a claim. Linking an already-linked pair returns an
    /// identical case (same revision).
    pub fn link_evidence(&self, claim_id: &str, evidence_id: &str) -> Result<Self, CaseError> {
        let claim = self.claims.get(claim_id).ok_or_else(|| not_found("claim", claim_id))?;
        let (ev_id, _) = self
            .evidence
            .get_key_value(evidence_id)
            .ok_or_else(|| not_found("evidence", evidence_id))?;
        if claim.evidence_refs.contains(evidence_id) {
            return Ok(self.clone());
        }
        let ev_id = ev_id.clone();
        let mut next = self.clone();
        next.claim_mut(claim_id)?.evidence_refs.insert(ev_id);
        Ok(next.bumped())
    }

    pub fn unlink_evidence(&self, claim_id: &str, evidence_id: &str) -> Result<Self, CaseError> {
        let claim = self.claims.get(claim_id).ok_or_else(|| not_found("claim", claim_id))?;
        if !claim.evidence_refs.contains(evidence_id) {
            return Err(not_found("evidence link", evidence_id));
        }
        let mut next = self.clone();
        next.claim_mut(claim_id)?.evidence_refs.remove(evidence_id);
        Ok(next.bumped())
    }

    pub fn set_stage(&self, claim_id: &str, stage: Option<&str>) -> Result<Self, CaseError> {
        let mut next = self.clone();
        next.claim_mut(claim_id)?.stage = stage.map(str::to_owned);
        Ok(next.bumped())
    }

    pub fn tag_consideration(&self, claim_id: &str, consideration_id: &str) -> Result<Self, CaseError> {
        let mut next = self.clone();
        next.claim_mut(claim_id)?
            .considers
            .insert(consideration_id.to_owned());
        Ok(next.bumped())
    }

    pub fn untag_consideration(&self, claim_id: &str, consideration_id: &str) -> Result<Self, CaseError> {
        let mut next = self.clone();
        if !next.claim_mut(claim_id)?.considers.remove(consideration_id) {
            return Err(not_found("consideration tag", consideration_id));
        }
        Ok(next.bumped())
    }

    pub fn add_waiver(&self, waiver: Waiver) -> Result<Self, CaseError> {
        if self
            .waivers
            .iter()
            .any(|w| w.consideration_id == waiver.consideration_id)
        {
            return Err(CaseError::DuplicateId {
                kind: "waiver",
                id: waiver.consideration_id,
            });
        }
        let mut next = self.clone();
        next.waivers.push(waiver);
        Ok(next.bumped())
    }

    /// Removes a claim and all of its descendants. Evidence declarations stay
    /// in the pool even when nothing references them any more.
    pub fn remove_subtree(&self, claim_id: &str) -> Result<Self, CaseError> {
        if !self.claims.contains_key(claim_id) {
            return Err(not_found("claim", claim_id));
        }
        if self.root_id.as_str() == claim_id {
            return Err(CaseError::Forbidden("the root claim cannot be removed".into()));
        }
        let mut doomed: HashSet<NodeId> = HashSet::new();
        let mut stack = vec![claim_id.to_owned()];
        while let Some(id) = stack.pop() {
            if let Some((key, claim)) = self.claims.get_key_value(id.as_str()) {
                if doomed.insert(key.clone()) {
                    stack.extend(claim.children.iter().map(|c| c.0.clone()));
                }
            }
        }
        let mut next = self.clone();
        next.claims.retain(|id, _| !doomed.contains(id));
        for claim in next.claims.values_mut() {
            claim.children.retain(|c| !doomed.contains(c));
        }
        Ok(next.bumped())
    }
}

fn not_found(kind: &'static str, id: &str) -> CaseError {
    CaseError::NotFound {
        kind,
        id: id.to_owned(),
    }
}
