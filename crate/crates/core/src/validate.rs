//! Structural well-formedness rules for assurance cases.
//!
//! | code | severity | rule |
//! |------|----------|------|
//! | W1 | error   | exactly one goal claim, and it is the root |
//! | W2 | error   | the claim graph is a tree rooted at the root |
//! | W3 | error   | every leaf claim references at least one evidence item |
//! | W4 | warning | every declared evidence item is referenced by some claim |
//! | W5 | error   | every evidence reference resolves |
//! | W6 | error   | node ids are unique within their namespace |
//! | W7 | error   | stage and consideration tags name registry entries |
//! | W8 | warning | no claim statement is repeated verbatim |

use std::collections::{HashMap, HashSet};

use crate::diagnostic::{sort_diagnostics, Diagnostic};
use crate::fairness::{default_map, ConsiderationMap};
use crate::lifecycle::is_stage_id;
use crate::model::{AssuranceCase, ClaimKind};

/// Validates against the bundled `fairness-v1` map.
pub fn validate(case: &AssuranceCase) -> Vec<Diagnostic> {
    validate_with_map(case, &default_map())
}

/// Runs every rule and returns the findings sorted by (severity, code, node).
/// An empty result means the case is well-formed.
pub fn validate_with_map(case: &AssuranceCase, map: &ConsiderationMap) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_goal(case, &mut out);
    check_tree(case, &mut out);
    check_evidence_refs(case, &mut out);
    check_unique_ids(case, &mut out);
    check_tags(case, map, &mut out);
    check_duplicate_statements(case, &mut out);
    sort_diagnostics(&mut out);
    out
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

fn check_goal(case: &AssuranceCase, out: &mut Vec<Diagnostic>) {
    let root = &case.root_id;
    match case.claims.get(root) {
        None => out.push(
            Diagnostic::error("W1", format!("root claim {root} is not declared")).on(root.as_str()),
        ),
        Some(c) if c.kind != ClaimKind::Goal => out.push(
            Diagnostic::error("W1", format!("root claim {root} must have kind goal")).on(root.as_str()),
        ),
        Some(_) => {}
    }
    for (key, claim) in &case.claims {
        if claim.kind == ClaimKind::Goal && key != root {
            out.push(
                Diagnostic::error("W1", format!("claim {key} is a goal but the root is {root}")).on(key.as_str()),
            );
        }
    }
}

fn check_tree(case: &AssuranceCase, out: &mut Vec<Diagnostic>) {
    let mut parents: HashMap<&str, Vec<&str>> = HashMap::new();
    for (key, claim) in &case.claims {
        for child in &claim.children {
            if !case.claims.contains_key(child) {
                out.push(
                    Diagnostic::error("W2", format!("child {child} of {key} is not a declared claim"))
                        .on(key.as_str()),
                );
            } else {
                parents.entry(child.as_str()).or_default().push(key.as_str());
            }
        }
    }
    for key in case.claims.keys() {
        if let Some(ps) = parents.get(key.as_str()) {
            if *key == case.root_id {
                out.push(
                    Diagnostic::error("W2", format!("root {key} is listed as a child of {}", ps.join(", ")))
                        .on(key.as_str()),
                );
            } else if ps.len() > 1 {
                out.push(
                    Diagnostic::error("W2", format!("claim {key} has {} parents: {}", ps.len(), ps.join(", ")))
                        .on(key.as_str()),
                );
            }
        }
    }
    if !case.claims.contains_key(&case.root_id) {
        return;
    }
    let mut seen: HashSet<&str> = HashSet::new();
    let mut stack = vec![case.root_id.as_str()];
    while let Some(id) = stack.pop() {
        if let Some(claim) = case.claims.get(id) {
            if seen.insert(id) {
                stack.extend(claim.children.iter().map(|c| c.as_str()));
            }
        }
    }
    for key in case.claims.keys() {
        if !seen.contains(key.as_str()) {
            out.push(
                Diagnostic::error("W2", format!("claim {key} is not reachable from root {}", case.root_id))
                    .on(key.as_str()),
            );
        }
    }
}

fn check_evidence_refs(case: &AssuranceCase, out: &mut Vec<Diagnostic>) {
    let mut referenced: HashSet<&str> = HashSet::new();
    for (key, claim) in &case.claims {
        if claim.children.is_empty() && claim.evidence_refs.is_empty() {
            out.push(
                Diagnostic::error("W3", format!("leaf claim {key} is not supported by any evidence"))
                    .on(key.as_str()),
            );
        }
        for r in &claim.evidence_refs {
            referenced.insert(r.as_str());
            if !case.evidence.contains_key(r) {
                out.push(
                    Diagnostic::error("W5", format!("claim {key} references undeclared evidence {r}"))
                        .on(key.as_str()),
                );
            }
        }
    }
    for key in case.evidence.keys() {
        if !referenced.contains(key.as_str()) {
            out.push(
                Diagnostic::warning("W4", format!("evidence {key} is not referenced by any claim"))
                    .on(key.as_str()),
            );
        }
    }
}

fn check_unique_ids(case: &AssuranceCase, out: &mut Vec<Diagnostic>) {
    fn scan<'a>(
        kind: &str,
        entries: impl Iterator<Item = (&'a str, &'a str)>,
        out: &mut Vec<Diagnostic>,
    ) {
        let mut seen: HashSet<&str> = HashSet::new();
        for (key, id) in entries {
            if key != id {
                out.push(
                    Diagnostic::error("W6", format!("{kind} {id} is stored under mismatched key {key}")).on(id),
                );
            }
            if !seen.insert(id) {
                out.push(Diagnostic::error("W6", format!("duplicate {kind} id {id}")).on(id));
            }
        }
    }
    scan(
        "claim",
        case.claims.iter().map(|(k, c)| (k.as_str(), c.id.as_str())),
        out,
    );
    scan(
        "evidence",
        case.evidence.iter().map(|(k, e)| (k.as_str(), e.id.as_str())),
        out,
    );
}

fn check_tags(case: &AssuranceCase, map: &ConsiderationMap, out: &mut Vec<Diagnostic>) {
    for (key, claim) in &case.claims {
        if let Some(stage) = &claim.stage {
            if !is_stage_id(stage) {
                out.push(
                    Diagnostic::error("W7", format!("claim {key} has unknown stage {stage}")).on(key.as_str()),
                );
            }
        }
        for c in &claim.considers {
            if !map.contains(c) {
                out.push(
                    Diagnostic::error(
                        "W7",
                        format!("claim {key} considers {c}, which is not in map {}", map.id),
                    )
                    .on(key.as_str()),
                );
            }
        }
    }
}

fn check_duplicate_statements(case: &AssuranceCase, out: &mut Vec<Diagnostic>) {
    let mut first: HashMap<&str, &str> = HashMap::new();
    for claim in case.claims_preorder() {
        match first.get(claim.statement.as_str()) {
            Some(orig) => out.push(
                Diagnostic::warning(
                    "W8",
                    format!("claim {} repeats the statement of claim {orig}", claim.id),
                )
                .on(claim.id.as_str()),
            ),
            None => {
                first.insert(&claim.statement, claim.id.as_str());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostic::Severity;
    use crate::model::tests::{cdss, id};

    fn codes(ds: &[Diagnostic]) -> Vec<(&str, Severity, Option<&str>)> {
        ds.iter().map(|d| (d.code.as_str(), d.severity, d.node.as_deref())).collect()
    }

    #[test]
    fn fixture_is_clean() {
        assert!(validate(&cdss()).is_empty());
    }

    #[test]
    fn unlinked_evidence_gives_w3_and_w4() {
        let c = cdss().unlink_evidence("C4", "E4").unwrap();
        assert_eq!(
            codes(&validate(&c)),
            [("W3", Severity::Error, Some("C4")), ("W4", Severity::Warning, Some("E4"))]
        );
    }

    #[test]
    fn unknown_stage_is_w7() {
        let c = cdss().set_stage("C2", Some("banana")).unwrap();
        assert_eq!(codes(&validate(&c)), [("W7", Severity::Error, Some("C2"))]);
        let c = cdss().tag_consideration("C2", "FC-XX-99").unwrap();
        assert_eq!(codes(&validate(&c)), [("W7", Severity::Error, Some("C2"))]);
    }

    #[test]
    fn second_goal_is_w1() {
        let mut c = cdss();
        c.claims.get_mut("C3").unwrap().kind = ClaimKind::Goal;
        assert_eq!(codes(&validate(&c)), [("W1", Severity::Error, Some("C3"))]);
    }

    #[test]
    fn hand_built_cycle_and_multi_parent_are_w2() {
        let mut c = cdss();
        c.claims.get_mut("C3").unwrap().children.push(id("C5"));
        let ds = validate(&c);
        assert_eq!(codes(&ds), [("W2", Severity::Error, Some("C5"))]);

        let mut c = cdss();
        c.claims.get_mut("C7").unwrap().children.push(id("C1"));
        let ds = validate(&c);
        assert!(ds.iter().any(|d| d.code == "W2" && d.node.as_deref() == Some("C1")));
    }

    #[test]
    fn dangling_ref_is_w5() {
        let mut c = cdss();
        c.claims.get_mut("C5").unwrap().evidence_refs.insert(id("E9"));
        assert_eq!(codes(&validate(&c)), [("W5", Severity::Error, Some("C5"))]);
    }

    #[test]
    fn mismatched_key_is_w6() {
        let mut c = cdss();
        let mut clone = c.claims["C7"].clone();
        clone.id = id("C6");
        c.claims.insert(id("C7"), clone);
        let ds = validate(&c);
        assert!(ds.iter().any(|d| d.code == "W6"));
    }

    #[test]
    fn repeated_statement_is_w8() {
        let c = cdss().add_claim("C4", id("C8"), "Clinician roles are clearly defined").unwrap();
        let c = c.link_evidence("C8", "E4").unwrap();
        assert_eq!(codes(&validate(&c)), [("W8", Severity::Warning, Some("C8"))]);
    }

    #[test]
    fn goal_only_case_fails_w3() {
        let c = AssuranceCase::new("x", "y").unwrap();
        assert_eq!(codes(&validate(&c)), [("W3", Severity::Error, Some("G1"))]);
    }
}
