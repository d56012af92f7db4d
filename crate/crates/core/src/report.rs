//! DOT and Markdown renderings of a case.

use std::fmt::Write;

use crate::diagnostic::{count_by_severity, Diagnostic};
use crate::evaluate::EvaluationResult;
use crate::fairness::{ConsiderationMap, CoverageStatus, MapCoverage};
use crate::lifecycle::{stage_registry, StageCoverage};
use crate::model::AssuranceCase;

fn dot_quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Claims become boxes and evidence ellipses. With an evaluation, each node
/// carries a `class` attribute naming its status.
pub fn export_dot(case: &AssuranceCase, evaluation: Option<&EvaluationResult>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", dot_quote(&case.title));
    out.push_str("  rankdir=TB;\n");
    let claims = case.claims_preorder();
    for c in &claims {
        let label = format!("{}\n{}", c.id, c.statement);
        let _ = write!(out, "  {} [shape=box, label={}", dot_quote(c.id.as_str()), dot_quote(&label));
        if let Some(s) = evaluation.and_then(|e| e.claim_statuses.get(&c.id)) {
            let _ = write!(out, ", class=\"{}\"", s.status);
        }
        out.push_str("];\n");
    }
    for e in case.evidence.values() {
        let label = format!("{}\n{}", e.id, e.title);
        let _ = write!(out, "  {} [shape=ellipse, label={}", dot_quote(e.id.as_str()), dot_quote(&label));
        if let Some(v) = evaluation.and_then(|r| r.evidence_verdicts.get(&e.id)) {
            let status: crate::evaluate::Status = v.verdict.into();
            let _ = write!(out, ", class=\"{status}\"");
        }
        out.push_str("];\n");
    }
    for c in &claims {
        for child in &c.children {
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"decomposes\"];",
                dot_quote(c.id.as_str()),
                dot_quote(child.as_str())
            );
        }
    }
    for c in &claims {
        for r in &c.evidence_refs {
            let _ = writeln!(out, "  {} -> {} [label=\"by\"];", dot_quote(c.id.as_str()), dot_quote(r.as_str()));
        }
    }
    out.push_str("}\n");
    out
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace(['\n', '\r'], " ")
}

pub struct ReportInputs<'a> {
    pub case: &'a AssuranceCase,
    pub diagnostics: &'a [Diagnostic],
    pub stages: &'a StageCoverage,
    pub map: &'a ConsiderationMap,
    pub coverage: &'a MapCoverage,
    pub evaluation: Option<&'a EvaluationResult>,
}

/// Markdown report with Summary, Diagnostics, Lifecycle Coverage,
/// Considerations and Evidence Verdicts sections.
pub fn render_report(inputs: &ReportInputs<'_>) -> String {
    let ReportInputs {
        case,
        diagnostics,
        stages,
        map,
        coverage,
        evaluation,
    } = *inputs;
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", cell(&case.title));

    out.push_str("## Summary\n\n");
    match evaluation {
        Some(e) => {
            let _ = writeln!(out, "Root claim {}: **{}**", case.root_id, e.root_status.status);
            if e.root_status.attested_only == Some(true) {
                out.push_str("\nSupport rests only on attested records or unverified documents.\n");
            }
        }
        None => {
            let _ = writeln!(out, "Root claim {}: not evaluated", case.root_id);
        }
    }
    let (errors, warnings) = count_by_severity(diagnostics);
    let _ = writeln!(
        out,
        "\nClaims: {}. Evidence items: {}. Diagnostics: {errors} errors, {warnings} warnings.\n",
        case.claims.len(),
        case.evidence.len()
    );

    out.push_str("## Diagnostics\n\n");
    if diagnostics.is_empty() {
        out.push_str("No findings.\n\n");
    } else {
        out.push_str("| Code | Severity | Node | Message |\n|---|---|---|---|\n");
        for d in diagnostics {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                d.code,
                d.severity,
                d.node.as_deref().unwrap_or("-"),
                cell(&d.message)
            );
        }
        out.push('\n');
    }

    out.push_str("## Lifecycle Coverage\n\n| Stage | Phase | Claims |\n|---|---|---|\n");
    for s in stage_registry() {
        let _ = writeln!(out, "| {} | {} | {} |", s.name, s.phase.name(), stages.count(s.id));
    }
    if stages.uncovered.is_empty() {
        out.push_str("\nUncovered stages: none\n\n");
    } else {
        let _ = writeln!(out, "\nUncovered stages: {}\n", stages.uncovered.join(", "));
    }

    let _ = writeln!(
        out,
        "## Considerations\n\nMap: {}\n\n| Id | Stage | Status | Claims | Notes |\n|---|---|---|---|---|",
        map.id
    );
    for entry in &map.entries {
        let status = coverage.status(&entry.id).unwrap_or(CoverageStatus::Unaddressed);
        let claims = coverage
            .addressing_claims
            .get(&entry.id)
            .filter(|c| !c.is_empty())
            .map(|c| c.iter().map(|id| id.as_str()).collect::<Vec<_>>().join(", "))
            .unwrap_or_else(|| "-".into());
        let notes = match status {
            CoverageStatus::Waived => case
                .waivers
                .iter()
                .find(|w| w.consideration_id == entry.id)
                .map(|w| cell(&w.rationale))
                .unwrap_or_default(),
            _ => cell(&entry.summary),
        };
        let _ = writeln!(out, "| {} | {} | {status} | {claims} | {notes} |", entry.id, entry.stage);
    }
    out.push('\n');

    out.push_str("## Evidence Verdicts\n\n");
    match evaluation {
        None => out.push_str("Not evaluated.\n"),
        Some(e) => {
            out.push_str("| Evidence | Kind | Verdict | Notes |\n|---|---|---|---|\n");
            for (id, v) in &e.evidence_verdicts {
                let kind = case.evidence(id.as_str()).map_or("-", |ev| ev.kind().as_str());
                let mut verdict = v.verdict.to_string();
                if v.unverified {
                    verdict.push_str(" (unverified)");
                }
                if v.attested {
                    verdict.push_str(" (attested)");
                }
                let _ = writeln!(out, "| {id} | {kind} | {verdict} | {} |", cell(&v.notes.join("; ")));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::{propagate, EvidenceVerdict};
    use crate::fairness::{default_map, map_coverage};
    use crate::lifecycle::stage_coverage;
    use crate::metrics::Verdict;
    use crate::model::{tests::cdss, Waiver};
    use indexmap::IndexMap;

    #[test]
    fn cdss_dot_counts() {
        let dot = export_dot(&cdss(), None);
        assert_eq!(dot.matches("shape=box").count(), 7);
        assert_eq!(dot.matches("shape=ellipse").count(), 4);
        assert_eq!(dot.matches("\"decomposes\"").count(), 6);
        assert_eq!(dot.matches("label=\"by\"").count(), 4);
        assert_eq!(dot, export_dot(&cdss(), None));
    }

    #[test]
    fn single_goal_dot() {
        let c = AssuranceCase::new("x", "y").unwrap();
        let dot = export_dot(&c, None);
        assert_eq!(dot.matches("shape=").count(), 1);
        assert_eq!(dot.matches("->").count(), 0);
    }

    #[test]
    fn report_shows_waiver_and_failure() {
        let case = cdss().add_waiver(Waiver::new("FC-SD-14", "Model is retired quarterly").unwrap()).unwrap();
        let mut verdicts = IndexMap::new();
        for e in case.evidence.keys() {
            let v = if e.as_str() == "E2" { Verdict::Fail } else { Verdict::Pass };
            verdicts.insert(e.clone(), EvidenceVerdict::plain(v));
        }
        let eval = propagate(&case, verdicts);
        let map = default_map();
        let text = render_report(&ReportInputs {
            case: &case,
            diagnostics: &[],
            stages: &stage_coverage(&case),
            map: &map,
            coverage: &map_coverage(&case, &map),
            evaluation: Some(&eval),
        });
        assert!(text.contains("**unsupported**"));
        assert!(text.contains("| E2 | document | fail |"));
        let row = text.lines().find(|l| l.starts_with("| FC-SD-14 ")).unwrap();
        assert!(row.contains("waived") && row.contains("Model is retired quarterly"));
        let order = ["## Summary", "## Diagnostics", "## Lifecycle Coverage", "## Considerations", "## Evidence Verdicts"];
        let pos: Vec<usize> = order.iter().map(|h| text.find(h).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }
}
