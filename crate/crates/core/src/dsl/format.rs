use std::fmt::Write;

use crate::model::{AssuranceCase, Claim, ClaimKind, EvidencePayload};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

pub(crate) fn format(case: &AssuranceCase) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "case {} {{", quote(&case.title));
    if let Some(root) = case.root() {
        write_claim(&mut out, case, root, 1);
    }
    for ev in case.evidence.values() {
        let _ = writeln!(
            out,
            "  evidence {} {} kind({}) {{",
            ev.id,
            quote(&ev.title),
            ev.kind().as_str()
        );
        let mut field = |key: &str, value: String| {
            let _ = writeln!(out, "    {key} = {value};");
        };
        match &ev.payload {
            EvidencePayload::Document(d) => {
                field("uri", quote(&d.uri));
                if let Some(sha) = &d.sha256 {
                    field("sha256", quote(sha));
                }
                if !d.description.is_empty() {
                    field("description", quote(&d.description));
                }
            }
            EvidencePayload::Metric(m) => {
                field("dataset", quote(&m.dataset_ref));
                field("metric", quote(m.metric.as_str()));
                field("group", quote(&m.group_column));
                if let Some(c) = &m.condition_column {
                    field("condition", quote(c));
                }
                field("comparator", quote(m.comparator.symbol()));
                field("threshold", m.threshold.to_string());
            }
            EvidencePayload::Record(r) => {
                field("description", quote(&r.description));
                field("date", quote(&r.date));
                for p in &r.participants {
                    field("participant", quote(p));
                }
            }
        }
        out.push_str("  }\n");
    }
    for w in &case.waivers {
        let _ = writeln!(out, "  waive {} {};", w.consideration_id, quote(&w.rationale));
    }
    out.push_str("}\n");
    out
}

fn write_claim(out: &mut String, case: &AssuranceCase, claim: &Claim, depth: usize) {
    indent(out, depth);
    let kw = match claim.kind {
        ClaimKind::Goal => "goal",
        ClaimKind::Intermediate => "claim",
    };
    let _ = write!(out, "{kw} {} {}", claim.id, quote(&claim.statement));
    if let Some(stage) = &claim.stage {
        let _ = write!(out, " stage({stage})");
    }
    if !claim.considers.is_empty() {
        let tags: Vec<&str> = claim.considers.iter().map(String::as_str).collect();
        let _ = write!(out, " considers({})", tags.join(", "));
    }
    let children: Vec<&Claim> = claim.children.iter().filter_map(|c| case.claim(c.as_str())).collect();
    if children.is_empty() && claim.evidence_refs.is_empty() {
        out.push_str(";\n");
        return;
    }
    out.push_str(" {\n");
    for r in &claim.evidence_refs {
        indent(out, depth + 1);
        let _ = writeln!(out, "by {r};");
    }
    for child in children {
        write_claim(out, case, child, depth + 1);
    }
    indent(out, depth);
    out.push_str("}\n");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::model::tests::cdss;

    #[test]
    fn minimal_case() {
        let c = AssuranceCase::new("x", "y").unwrap();
        assert_eq!(format(&c), "case \"x\" {\n  goal G1 \"y\";\n}\n");
    }

    #[test]
    fn cdss_round_trips() {
        let c = cdss()
            .set_stage("C2", Some("data_analysis"))
            .unwrap()
            .tag_consideration("C3", "FC-PD-01")
            .unwrap();
        let text = format(&c);
        let back = parse(&text).case.expect("reparse");
        assert!(back.structurally_eq(&c));
        assert_eq!(format(&back), text);
    }

    #[test]
    fn escapes_quotes_and_backslashes() {
        let c = AssuranceCase::new("a \"q\" \\", "y").unwrap();
        let back = parse(&format(&c)).case.unwrap();
        assert_eq!(back.title, c.title);
    }
}
