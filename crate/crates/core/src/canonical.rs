//! Canonical JSON encoding of an [`AssuranceCase`] (`"schema": "tea-case/1"`).
//!
//! Output is byte-deterministic: keys appear in a fixed order, claims are
//! written in pre-order from the root, evidence in declaration order, and
//! numbers never use exponent notation.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::metrics::MetricId;
use crate::model::{
    AssuranceCase, Claim, ClaimKind, Comparator, DocumentPayload, Evidence, EvidenceKind, EvidencePayload,
    MetricPayload, NodeId, RecordPayload, Waiver,
};

pub const SCHEMA: &str = "tea-case/1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct DecodeError {
    /// JSON path of the offending value, e.g. `claims[3].statement`.
    pub path: String,
    pub message: String,
}

impl DecodeError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        DecodeError {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseDoc {
    schema: String,
    title: String,
    revision: u64,
    root: NodeId,
    claims: Vec<ClaimDoc>,
    evidence: Vec<EvidenceDoc>,
    waivers: Vec<WaiverDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClaimDoc {
    id: NodeId,
    statement: String,
    kind: ClaimKind,
    #[serde(default)]
    stage: Option<String>,
    considers: Vec<String>,
    children: Vec<NodeId>,
    evidence: Vec<NodeId>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvidenceDoc {
    id: NodeId,
    title: String,
    kind: EvidenceKind,
    payload: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentDoc {
    uri: String,
    #[serde(default)]
    sha256: Option<String>,
    #[serde(default)]
    description: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricDoc {
    dataset: String,
    metric: MetricId,
    group: String,
    #[serde(default)]
    condition: Option<String>,
    comparator: Comparator,
    threshold: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordDoc {
    description: String,
    date: String,
    participants: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaiverDoc {
    consideration: String,
    rationale: String,
}

/// Pretty printer with 2-space indentation that writes floats in plain
/// positional notation.
struct CanonicalFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for CanonicalFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        // Display for f64 is shortest-round-trip and never uses an exponent.
        write!(writer, "{value}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes any value with the canonical formatter (2-space indent, no
/// exponent notation, trailing newline).
pub fn to_canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("serializing to a Vec<u8> cannot fail");
    out.push(b'\n');
    out
}

pub fn to_canonical_json(case: &AssuranceCase) -> Vec<u8> {
    to_canonical_bytes(&to_doc(case))
}

/// The canonical document as a JSON value (key order preserved).
pub fn to_json_value(case: &AssuranceCase) -> serde_json::Value {
    serde_json::to_value(to_doc(case)).expect("case document is always representable as JSON")
}

fn to_doc(case: &AssuranceCase) -> CaseDoc {
    let claims = case
        .claims_preorder()
        .into_iter()
        .map(|c| ClaimDoc {
            id: c.id.clone(),
            statement: c.statement.clone(),
            kind: c.kind,
            stage: c.stage.clone(),
            considers: c.considers.iter().cloned().collect(),
            children: c.children.clone(),
            evidence: c.evidence_refs.iter().cloned().collect(),
        })
        .collect();
    let evidence = case
        .evidence
        .values()
        .map(|e| EvidenceDoc {
            id: e.id.clone(),
            title: e.title.clone(),
            kind: e.kind(),
            payload: payload_value(&e.payload),
        })
        .collect();
    let waivers = case
        .waivers
        .iter()
        .map(|w| WaiverDoc {
            consideration: w.consideration_id.clone(),
            rationale: w.rationale.clone(),
        })
        .collect();
    CaseDoc {
        schema: SCHEMA.to_owned(),
        title: case.title.clone(),
        revision: case.revision,
        root: case.root_id.clone(),
        claims,
        evidence,
        waivers,
    }
}

fn payload_value(payload: &EvidencePayload) -> serde_json::Value {
    let value = match payload {
        EvidencePayload::Document(d) => serde_json::to_value(DocumentDoc {
            uri: d.uri.clone(),
            sha256: d.sha256.clone(),
            description: d.description.clone(),
        }),
        EvidencePayload::Metric(m) => serde_json::to_value(MetricDoc {
            dataset: m.dataset_ref.clone(),
            metric: m.metric,
            group: m.group_column.clone(),
            condition: m.condition_column.clone(),
            comparator: m.comparator,
            threshold: m.threshold,
        }),
        EvidencePayload::Record(r) => serde_json::to_value(RecordDoc {
            description: r.description.clone(),
            date: r.date.clone(),
            participants: r.participants.clone(),
        }),
    };
    value.expect("payload is always representable as JSON")
}

pub fn from_canonical_json(bytes: &[u8]) -> Result<AssuranceCase, DecodeError> {
    let text = std::str::from_utf8(bytes).map_err(|e| DecodeError::at("$", format!("invalid UTF-8: {e}")))?;
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: CaseDoc = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        DecodeError::at(if path == "." { "$".to_owned() } else { path }, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| DecodeError::at("$", e.to_string()))?;
    from_doc(doc)
}

pub fn from_json_value(value: serde_json::Value) -> Result<AssuranceCase, DecodeError> {
    let doc: CaseDoc = serde_path_to_error::deserialize(value)
        .map_err(|e| DecodeError::at(e.path().to_string(), e.into_inner().to_string()))?;
    from_doc(doc)
}

fn from_doc(doc: CaseDoc) -> Result<AssuranceCase, DecodeError> {
    if doc.schema != SCHEMA {
        return Err(DecodeError::at(
            "schema",
            format!("unsupported schema {:?}, expected {SCHEMA:?}", doc.schema),
        ));
    }
    if doc.title.is_empty() {
        return Err(DecodeError::at("title", "title must not be empty"));
    }

    let mut claims: IndexMap<NodeId, Claim> = IndexMap::with_capacity(doc.claims.len());
    for (i, c) in doc.claims.into_iter().enumerate() {
        if c.statement.is_empty() {
            return Err(DecodeError::at(format!("claims[{i}].statement"), "statement must not be empty"));
        }
        if claims.contains_key(&c.id) {
            return Err(DecodeError::at(format!("claims[{i}].id"), format!("duplicate claim id {}", c.id)));
        }
        let claim = Claim {
            id: c.id.clone(),
            statement: c.statement,
            kind: c.kind,
            stage: c.stage,
            considers: c.considers.into_iter().collect(),
            children: c.children,
            evidence_refs: c.evidence.into_iter().collect::<BTreeSet<_>>(),
        };
        claims.insert(c.id, claim);
    }
    if !claims.contains_key(&doc.root) {
        return Err(DecodeError::at("root", format!("root claim {} is not declared", doc.root)));
    }
    check_tree(&doc.root, &claims)?;

    let mut evidence: IndexMap<NodeId, Evidence> = IndexMap::with_capacity(doc.evidence.len());
    for (i, e) in doc.evidence.into_iter().enumerate() {
        if evidence.contains_key(&e.id) {
            return Err(DecodeError::at(
                format!("evidence[{i}].id"),
                format!("duplicate evidence id {}", e.id),
            ));
        }
        if e.title.is_empty() {
            return Err(DecodeError::at(format!("evidence[{i}].title"), "title must not be empty"));
        }
        let payload = decode_payload(e.kind, e.payload, &format!("evidence[{i}].payload"))?;
        evidence.insert(e.id.clone(), Evidence { id: e.id, title: e.title, payload });
    }

    let mut waivers: Vec<Waiver> = Vec::with_capacity(doc.waivers.len());
    for (i, w) in doc.waivers.into_iter().enumerate() {
        if waivers.iter().any(|x| x.consideration_id == w.consideration) {
            return Err(DecodeError::at(
                format!("waivers[{i}].consideration"),
                format!("duplicate waiver for {}", w.consideration),
            ));
        }
        let waiver = Waiver::new(w.consideration, w.rationale)
            .map_err(|e| DecodeError::at(format!("waivers[{i}].rationale"), e.to_string()))?;
        waivers.push(waiver);
    }

    Ok(AssuranceCase {
        title: doc.title,
        root_id: doc.root,
        claims,
        evidence,
        waivers,
        revision: doc.revision,
    })
}

fn decode_payload(kind: EvidenceKind, value: serde_json::Value, path: &str) -> Result<EvidencePayload, DecodeError> {
    fn de<T: serde::de::DeserializeOwned>(value: serde_json::Value, path: &str) -> Result<T, DecodeError> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let inner = e.path().to_string();
            let full = if inner == "." { path.to_owned() } else { format!("{path}.{inner}") };
            DecodeError::at(full, e.into_inner().to_string())
        })
    }
    let payload = match kind {
        EvidenceKind::Document => {
            let d: DocumentDoc = de(value, path)?;
            EvidencePayload::Document(DocumentPayload {
                uri: d.uri,
                sha256: d.sha256,
                description: d.description,
            })
        }
        EvidenceKind::Metric => {
            let m: MetricDoc = de(value, path)?;
            EvidencePayload::Metric(MetricPayload {
                dataset_ref: m.dataset,
                metric: m.metric,
                group_column: m.group,
                condition_column: m.condition,
                comparator: m.comparator,
                threshold: m.threshold,
            })
        }
        EvidenceKind::Record => {
            let r: RecordDoc = de(value, path)?;
            EvidencePayload::Record(RecordPayload {
                description: r.description,
                date: r.date,
                participants: r.participants,
            })
        }
    };
    payload.check().map_err(|e| DecodeError::at(path, e.to_string()))?;
    Ok(payload)
}

const NOT_A_TREE: &str = "claims must form a tree";

fn check_tree(root: &NodeId, claims: &IndexMap<NodeId, Claim>) -> Result<(), DecodeError> {
    let mut parent: HashMap<&str, &str> = HashMap::new();
    for (i, claim) in claims.values().enumerate() {
        for (j, child) in claim.children.iter().enumerate() {
            if !claims.contains_key(child) {
                return Err(DecodeError::at(
                    format!("claims[{i}].children[{j}]"),
                    format!("unknown child claim {child}"),
                ));
            }
            if let Some(prev) = parent.insert(child.as_str(), claim.id.as_str()) {
                return Err(DecodeError::at(
                    "claims",
                    format!("{NOT_A_TREE}: {child} has parents {prev} and {}", claim.id),
                ));
            }
        }
    }
    if let Some(p) = parent.get(root.as_str()) {
        return Err(DecodeError::at("claims", format!("{NOT_A_TREE}: root {root} has parent {p}")));
    }
    // With single parents and a parentless root, reachability from the root
    // rules out cycles as well.
    let mut seen: HashSet<&str> = HashSet::new();
    let mut stack = vec![root.as_str()];
    while let Some(id) = stack.pop() {
        if seen.insert(id) {
            stack.extend(claims[id].children.iter().map(NodeId::as_str));
        }
    }
    if let Some(orphan) = claims.keys().find(|k| !seen.contains(k.as_str())) {
        return Err(DecodeError::at(
            "claims",
            format!("{NOT_A_TREE}: {orphan} is not reachable from root {root}"),
        ));
    }
    Ok(())
}
