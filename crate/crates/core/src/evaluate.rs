//! Evidence verdicts and bottom-up claim status propagation.
//!
//! Claims hold conjunctively: a claim is supported only when every child
//! claim and every directly attached evidence item holds. A failure anywhere
//! below dominates missing data.

use std::collections::HashMap;
use std::fmt;
use std::path::{Component, Path, PathBuf};

use indexmap::IndexMap;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagnostic::Diagnostic;
use crate::fairness::{default_map, ConsiderationMap};
use crate::metrics::{evaluate_metric_evidence, DatasetSource, FsDatasets, MetricResult, Verdict};
use crate::model::{AssuranceCase, DocumentPayload, Evidence, EvidencePayload, NodeId};
use crate::validate::validate_with_map;

/// Outcome of looking up a document by uri.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DocumentLookup {
    Found(Vec<u8>),
    Missing,
    Rejected(String),
}

pub trait DocumentSource {
    fn read(&self, uri: &str) -> DocumentLookup;
}

/// Resolves uris relative to an evidence directory. Absolute paths, parent
/// components and remote schemes are refused.
#[derive(Debug, Clone)]
pub struct FsDocuments {
    pub dir: PathBuf,
}

impl FsDocuments {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FsDocuments { dir: dir.into() }
    }
}

impl DocumentSource for FsDocuments {
    fn read(&self, uri: &str) -> DocumentLookup {
        if uri.contains("://") {
            return DocumentLookup::Rejected(format!("remote document {uri} is not fetched"));
        }
        let rel = Path::new(uri);
        if !rel.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir)) {
            return DocumentLookup::Rejected(format!("document uri {uri} escapes the evidence directory"));
        }
        match std::fs::read(self.dir.join(rel)) {
            Ok(bytes) => DocumentLookup::Found(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => DocumentLookup::Missing,
            Err(e) => DocumentLookup::Rejected(format!("reading {uri}: {e}")),
        }
    }
}

impl DocumentSource for HashMap<String, Vec<u8>> {
    fn read(&self, uri: &str) -> DocumentLookup {
        match self.get(uri) {
            Some(b) => DocumentLookup::Found(b.clone()),
            None => DocumentLookup::Missing,
        }
    }
}

/// Everything evaluation reads from the outside world.
#[derive(Clone, Copy)]
pub struct Stores<'a> {
    pub documents: &'a dyn DocumentSource,
    pub datasets: &'a dyn DatasetSource,
}

/// Directory-backed stores: documents under one directory, `{name}.csv`
/// datasets under another.
#[derive(Debug, Clone)]
pub struct FsStores {
    pub documents: FsDocuments,
    pub datasets: FsDatasets,
}

impl FsStores {
    pub fn new(evidence_dir: impl Into<PathBuf>, dataset_dir: impl Into<PathBuf>) -> Self {
        FsStores {
            documents: FsDocuments::new(evidence_dir),
            datasets: FsDatasets::new(dataset_dir),
        }
    }

    pub fn stores(&self) -> Stores<'_> {
        Stores {
            documents: &self.documents,
            datasets: &self.datasets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceVerdict {
    pub verdict: Verdict,
    /// Document passed without a digest to check it against.
    pub unverified: bool,
    /// Human-attested record; always passes.
    pub attested: bool,
    pub notes: Vec<String>,
    pub metric: Option<MetricResult>,
}

impl EvidenceVerdict {
    pub fn plain(verdict: Verdict) -> Self {
        EvidenceVerdict {
            verdict,
            unverified: false,
            attested: false,
            notes: Vec::new(),
            metric: None,
        }
    }

    fn note(verdict: Verdict, note: String) -> Self {
        EvidenceVerdict {
            notes: vec![note],
            ..EvidenceVerdict::plain(verdict)
        }
    }

    /// A pass that rests on human attestation or an unchecked document.
    fn attested_only(&self) -> bool {
        self.attested || self.unverified
    }
}

pub fn evaluate_evidence(evidence: &Evidence, stores: Stores<'_>) -> EvidenceVerdict {
    match &evidence.payload {
        EvidencePayload::Document(doc) => evaluate_document(doc, stores.documents),
        EvidencePayload::Metric(m) => {
            let e = evaluate_metric_evidence(m, stores.datasets);
            EvidenceVerdict {
                verdict: e.verdict,
                unverified: false,
                attested: false,
                notes: e.notes,
                metric: e.result,
            }
        }
        EvidencePayload::Record(r) => EvidenceVerdict {
            attested: true,
            notes: vec![format!("attested record dated {}", r.date)],
            ..EvidenceVerdict::plain(Verdict::Pass)
        },
    }
}

fn evaluate_document(doc: &DocumentPayload, documents: &dyn DocumentSource) -> EvidenceVerdict {
    let bytes = match documents.read(&doc.uri) {
        DocumentLookup::Found(b) => b,
        DocumentLookup::Missing => {
            return EvidenceVerdict::note(Verdict::Indeterminate, format!("document not found: {}", doc.uri))
        }
        DocumentLookup::Rejected(why) => return EvidenceVerdict::note(Verdict::Indeterminate, why),
    };
    match &doc.sha256 {
        None => EvidenceVerdict {
            unverified: true,
            notes: vec![format!("{} present; no digest to verify", doc.uri)],
            ..EvidenceVerdict::plain(Verdict::Pass)
        },
        Some(expected) => {
            let actual = hex::encode(Sha256::digest(&bytes));
            if actual == *expected {
                EvidenceVerdict::note(Verdict::Pass, format!("{} digest verified", doc.uri))
            } else {
                EvidenceVerdict::note(
                    Verdict::Fail,
                    format!("{} digest mismatch: expected {expected}, found {actual}", doc.uri),
                )
            }
        }
    }
}

/// Ordered by dominance: `Supported < Undetermined < Unsupported`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Supported,
    Undetermined,
    Unsupported,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Supported => "supported",
            Status::Undetermined => "undetermined",
            Status::Unsupported => "unsupported",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<Verdict> for Status {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => Status::Supported,
            Verdict::Indeterminate => Status::Undetermined,
            Verdict::Fail => Status::Unsupported,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClaimStatus {
    pub status: Status,
    /// Set only for supported claims: true when every pass underneath came
    /// from attested records or unverified documents.
    pub attested_only: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    /// In evidence declaration order.
    pub evidence_verdicts: IndexMap<NodeId, EvidenceVerdict>,
    /// In claim pre-order.
    pub claim_statuses: IndexMap<NodeId, ClaimStatus>,
    pub root_status: ClaimStatus,
}

impl EvaluationResult {
    /// `{root, rootAttestedOnly, claims: [...], evidence: [...]}`
    pub fn to_json(&self, case: &AssuranceCase) -> serde_json::Value {
        let claims: Vec<_> = self
            .claim_statuses
            .iter()
            .map(|(id, s)| {
                serde_json::json!({
                    "id": id,
                    "status": s.status,
                    "attestedOnly": s.attested_only,
                })
            })
            .collect();
        let evidence: Vec<_> = self
            .evidence_verdicts
            .iter()
            .map(|(id, v)| {
                serde_json::json!({
                    "id": id,
                    "kind": case.evidence(id.as_str()).map(|e| e.kind().as_str()),
                    "verdict": v.verdict,
                    "unverified": v.unverified,
                    "attested": v.attested,
                    "notes": v.notes,
                    "metric": v.metric,
                })
            })
            .collect();
        serde_json::json!({
            "root": self.root_status.status,
            "rootAttestedOnly": self.root_status.attested_only,
            "claims": claims,
            "evidence": evidence,
        })
    }
}

#[derive(Debug, Clone, Error)]
#[error("case has {} blocking diagnostic(s); evaluation requires a structurally valid case", .diagnostics.len())]
pub struct PreconditionError {
    pub diagnostics: Vec<Diagnostic>,
}

pub fn evaluate_case(case: &AssuranceCase, stores: Stores<'_>) -> Result<EvaluationResult, PreconditionError> {
    evaluate_case_with_map(case, stores, &default_map())
}

/// Validates, computes a verdict for every evidence item, then propagates.
pub fn evaluate_case_with_map(
    case: &AssuranceCase,
    stores: Stores<'_>,
    map: &ConsiderationMap,
) -> Result<EvaluationResult, PreconditionError> {
    let blocking: Vec<Diagnostic> = validate_with_map(case, map)
        .into_iter()
        .filter(Diagnostic::is_error)
        .collect();
    if !blocking.is_empty() {
        return Err(PreconditionError { diagnostics: blocking });
    }
    let verdicts = case
        .evidence
        .iter()
        .map(|(id, ev)| (id.clone(), evaluate_evidence(ev, stores)))
        .collect();
    Ok(propagate(case, verdicts))
}

/// Pure propagation of given evidence verdicts up the claim tree. Evidence
/// without a verdict counts as indeterminate.
pub fn propagate(case: &AssuranceCase, verdicts: IndexMap<NodeId, EvidenceVerdict>) -> EvaluationResult {
    let order = case.claims_preorder();
    let mut statuses: HashMap<&str, ClaimStatus> = HashMap::with_capacity(order.len());
    // Reverse pre-order visits every child before its parent.
    for claim in order.iter().rev() {
        let mut worst = None::<Status>;
        let mut attested_only = true;
        let mut fold = |status: Status, attested: bool| {
            worst = Some(worst.map_or(status, |w| w.max(status)));
            if status == Status::Supported {
                attested_only &= attested;
            }
        };
        for child in &claim.children {
            match statuses.get(child.as_str()) {
                Some(s) => fold(s.status, s.attested_only.unwrap_or(false)),
                None => fold(Status::Undetermined, false),
            }
        }
        for r in &claim.evidence_refs {
            match verdicts.get(r) {
                Some(v) => fold(Status::from(v.verdict), v.attested_only()),
                None => fold(Status::Undetermined, false),
            }
        }
        let status = worst.unwrap_or(Status::Undetermined);
        statuses.insert(
            claim.id.as_str(),
            ClaimStatus {
                status,
                attested_only: (status == Status::Supported).then_some(attested_only),
            },
        );
    }
    let claim_statuses: IndexMap<NodeId, ClaimStatus> =
        order.iter().map(|c| (c.id.clone(), statuses[c.id.as_str()])).collect();
    let root_status = claim_statuses.get(&case.root_id).copied().unwrap_or(ClaimStatus {
        status: Status::Undetermined,
        attested_only: None,
    });
    let mut evidence_verdicts = IndexMap::with_capacity(case.evidence.len());
    let mut verdicts = verdicts;
    for id in case.evidence.keys() {
        let v = verdicts
            .swap_remove(id)
            .unwrap_or_else(|| EvidenceVerdict::note(Verdict::Indeterminate, "not evaluated".into()));
        evidence_verdicts.insert(id.clone(), v);
    }
    EvaluationResult {
        evidence_verdicts,
        claim_statuses,
        root_status,
    }
}
