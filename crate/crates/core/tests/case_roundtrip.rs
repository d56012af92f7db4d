mod common;

use std::collections::HashMap;

use common::{arb_case, levels, nid, text};
use proptest::prelude::*;
use tea_core::canonical::{from_canonical_json, to_canonical_json};
use tea_core::dsl::{format, parse};
use tea_core::model::DocumentPayload;
use tea_core::{AssuranceCase, Evidence, EvidencePayload};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn generated_cases_respect_bounds(case in arb_case(200)) {
        prop_assert!(case.claims.len() <= 200);
        prop_assert!(levels(&case) <= 6);
    }

    #[test]
    fn json_round_trip_is_identity(case in arb_case(200)) {
        let bytes = to_canonical_json(&case);
        let back = from_canonical_json(&bytes).unwrap();
        prop_assert_eq!(&back, &case);
        prop_assert_eq!(to_canonical_json(&back), bytes);
    }

    #[test]
    fn dsl_round_trip_is_identity(case in arb_case(60)) {
        let text = format(&case);
        let outcome = parse(&text);
        prop_assert!(outcome.diagnostics.is_empty(), "{:?}\n{}", outcome.diagnostics, text);
        let back = outcome.case.unwrap();
        prop_assert_eq!(&back, &case);
        prop_assert_eq!(format(&back), text);
    }

    #[test]
    fn tree_law(case in arb_case(200)) {
        let mut parents: HashMap<&str, usize> = HashMap::new();
        for c in case.claims.values() {
            for child in &c.children {
                *parents.entry(child.as_str()).or_default() += 1;
            }
        }
        let total_children: usize = case.claims.values().map(|c| c.children.len()).sum();
        prop_assert_eq!(case.claims.len(), 1 + total_children);
        for id in case.claims.keys() {
            let expected = usize::from(*id != case.root_id);
            prop_assert_eq!(parents.get(id.as_str()).copied().unwrap_or(0), expected);
        }
    }

    #[test]
    fn edits_bump_revision_by_one(case in arb_case(30), statement in text(), pick in any::<usize>()) {
        let ids: Vec<_> = case.claims.keys().cloned().collect();
        let parent = &ids[pick % ids.len()];
        let next = case.add_claim(parent.as_str(), nid("Znew"), statement).unwrap();
        prop_assert_eq!(next.revision, case.revision + 1);
        prop_assert!(next.claims.contains_key("Znew"));
        prop_assert!(!case.claims.contains_key("Znew"));

        let dup = next.add_claim(parent.as_str(), nid("Znew"), "again");
        prop_assert!(dup.is_err());

        let ev = Evidence::new(nid("Enew"), "doc", EvidencePayload::Document(DocumentPayload {
            uri: "x.md".into(),
            sha256: None,
            description: String::new(),
        })).unwrap();
        let with_ev = next.add_evidence(ev).unwrap();
        prop_assert_eq!(with_ev.revision, next.revision + 1);
        let linked = with_ev.link_evidence("Znew", "Enew").unwrap();
        prop_assert_eq!(linked.revision, with_ev.revision + 1);

        let victim = &ids[pick.wrapping_mul(7) % ids.len()];
        let removed = case.remove_subtree(victim.as_str());
        if *victim == case.root_id {
            prop_assert!(removed.is_err());
        } else {
            let removed = removed.unwrap();
            prop_assert_eq!(removed.revision, case.revision + 1);
            prop_assert!(!removed.claims.contains_key(victim));
            prop_assert_eq!(removed.evidence.len(), case.evidence.len());
        }
    }

    #[test]
    fn canonical_bytes_are_deterministic(case in arb_case(50)) {
        let copy: AssuranceCase = case.clone();
        prop_assert_eq!(to_canonical_json(&case), to_canonical_json(&copy));
        prop_assert_eq!(format(&case), format(&copy));
    }
}
