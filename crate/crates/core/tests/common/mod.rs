#![allow(dead_code)]

use std::collections::BTreeSet;

use indexmap::IndexMap;
use proptest::prelude::*;
use tea_core::lifecycle::stage_registry;
use tea_core::metrics::MetricId;
use tea_core::model::{Comparator, DocumentPayload, MetricPayload, RecordPayload};
use tea_core::{AssuranceCase, Claim, ClaimKind, Evidence, EvidencePayload, NodeId, Waiver};

pub const CONSIDERATIONS: [&str; 14] = [
    "FC-PD-01", "FC-PD-02", "FC-PD-03", "FC-PD-04", "FC-MD-05", "FC-MD-06", "FC-MD-07", "FC-MD-08", "FC-SD-09",
    "FC-SD-10", "FC-SD-11", "FC-SD-12", "FC-SD-13", "FC-SD-14",
];

pub fn nid(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

pub fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 .,;:'\"\\\\{}()é–\n]{0,24}".prop_map(|s| format!("x{s}"))
}

fn payload() -> impl Strategy<Value = EvidencePayload> {
    let document = ("[a-z/]{1,12}\\.md", proptest::option::of("[0-9a-f]{64}"), "[a-z \"]{0,10}").prop_map(
        |(uri, sha256, description)| EvidencePayload::Document(DocumentPayload { uri, sha256, description }),
    );
    let metric = (
        "[a-z][a-z0-9_]{0,8}",
        prop::sample::select(MetricId::ALL.to_vec()),
        "[a-z]{1,6}",
        proptest::option::of("[a-z]{1,6}"),
        prop::bool::ANY,
        prop_oneof![-1e6..1e6f64, Just(1e-7), Just(0.1), Just(1.0), Just(-0.0)],
    )
        .prop_map(|(dataset_ref, metric, group_column, condition_column, lte, threshold)| {
            EvidencePayload::Metric(MetricPayload {
                dataset_ref,
                metric,
                group_column,
                condition_column,
                comparator: if lte { Comparator::Lte } else { Comparator::Gte },
                threshold,
            })
        });
    let record = (text(), 1990..2031u32, 1..13u32, 1..29u32, prop::collection::vec(text(), 0..3)).prop_map(
        |(description, y, m, d, participants)| {
            EvidencePayload::Record(RecordPayload {
                description,
                date: format!("{y:04}-{m:02}-{d:02}"),
                participants,
            })
        },
    );
    prop_oneof![document, metric, record]
}

#[derive(Debug, Clone)]
struct ClaimSeed {
    parent: usize,
    statement: String,
    stage: Option<usize>,
    considers: Vec<usize>,
    evidence: Vec<usize>,
}

/// Random well-formed cases: a claim tree of up to `max_claims` nodes and at
/// most six levels, evidence of every kind, tags drawn from the registries.
pub fn arb_case(max_claims: usize) -> impl Strategy<Value = AssuranceCase> {
    let seed = (
        any::<usize>(),
        text(),
        proptest::option::of(0..12usize),
        prop::collection::vec(0..14usize, 0..3),
        prop::collection::vec(any::<usize>(), 0..3),
    )
        .prop_map(|(parent, statement, stage, considers, evidence)| ClaimSeed {
            parent,
            statement,
            stage,
            considers,
            evidence,
        });
    (
        text(),
        prop::collection::vec(seed, 1..=max_claims),
        prop::collection::vec((text(), payload()), 0..8),
        prop::collection::btree_set(0..14usize, 0..3),
        text(),
    )
        .prop_map(|(title, seeds, evidence, waived, rationale)| build_case(title, seeds, evidence, waived, rationale))
}

fn build_case(
    title: String,
    seeds: Vec<ClaimSeed>,
    evidence: Vec<(String, EvidencePayload)>,
    waived: BTreeSet<usize>,
    rationale: String,
) -> AssuranceCase {
    let ev_ids: Vec<NodeId> = (0..evidence.len()).map(|i| nid(&format!("E{}", i + 1))).collect();
    let mut depth = vec![0usize; seeds.len()];
    let mut parents = vec![usize::MAX; seeds.len()];
    for i in 1..seeds.len() {
        let mut p = seeds[i].parent % i;
        while depth[p] >= 5 {
            p = parents[p];
        }
        parents[i] = p;
        depth[i] = depth[p] + 1;
    }
    let ids: Vec<NodeId> = (0..seeds.len()).map(|i| nid(&format!("C{}", i + 1))).collect();
    let mut claims: IndexMap<NodeId, Claim> = IndexMap::new();
    for (i, s) in seeds.iter().enumerate() {
        let kind = if i == 0 { ClaimKind::Goal } else { ClaimKind::Intermediate };
        let mut c = Claim::new(ids[i].clone(), s.statement.clone(), kind);
        c.stage = s.stage.map(|k| stage_registry()[k].id.to_owned());
        c.considers = s.considers.iter().map(|k| CONSIDERATIONS[*k].to_owned()).collect();
        if !ev_ids.is_empty() {
            c.evidence_refs = s.evidence.iter().map(|k| ev_ids[k % ev_ids.len()].clone()).collect();
        }
        claims.insert(ids[i].clone(), c);
    }
    for i in 1..seeds.len() {
        let child = ids[i].clone();
        claims[parents[i]].children.push(child);
    }
    let evidence = evidence
        .into_iter()
        .zip(&ev_ids)
        .map(|((title, payload), id)| (id.clone(), Evidence::new(id.clone(), title, payload).unwrap()))
        .collect();
    let waivers = waived
        .into_iter()
        .map(|k| Waiver::new(CONSIDERATIONS[k], rationale.clone()).unwrap())
        .collect();
    AssuranceCase {
        title,
        root_id: ids[0].clone(),
        claims,
        evidence,
        waivers,
        revision: 0,
    }
}

/// Depth of the deepest claim, counting the root as level one.
pub fn levels(case: &AssuranceCase) -> usize {
    fn walk(case: &AssuranceCase, id: &NodeId) -> usize {
        1 + case.claims[id].children.iter().map(|c| walk(case, c)).max().unwrap_or(0)
    }
    walk(case, &case.root_id)
}
