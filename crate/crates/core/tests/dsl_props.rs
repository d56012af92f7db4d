mod common;

use common::arb_case;
use proptest::prelude::*;
use tea_core::dsl::{format, parse, parse_bytes, ParseOutcome};

fn assert_spans_in_bounds(text: &str, outcome: &ParseOutcome) -> Result<(), TestCaseError> {
    let lines: Vec<usize> = text.split('\n').map(|l| l.chars().count()).collect();
    for d in &outcome.diagnostics {
        let span = d.span.ok_or_else(|| TestCaseError::fail(format!("{} has no span", d.code)))?;
        prop_assert!(span.line >= 1 && span.column >= 1, "{d}");
        let width = *lines
            .get(span.line as usize - 1)
            .ok_or_else(|| TestCaseError::fail(format!("line out of range: {d}")))?;
        prop_assert!(
            (span.column + span.length) as usize <= width + 1,
            "{d} exceeds line of {width} chars"
        );
    }
    Ok(())
}

fn check_outcome(outcome: &ParseOutcome) -> Result<(), TestCaseError> {
    prop_assert_eq!(outcome.case.is_some(), !outcome.has_errors());
    prop_assert!(outcome.case.is_some() || !outcome.diagnostics.is_empty());
    Ok(())
}

const TOKENS: &[&str] = &[
    "case", "goal", "claim", "by", "evidence", "waive", "kind", "stage", "considers", "document", "metric",
    "record", "{", "}", "(", ")", ";", ",", "=", "\"s\"", "\"", "\\", "E1", "C1", "1.5", "-", "//", "\n", " ",
    "uri", "threshold", "é",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let outcome = parse_bytes(&bytes);
        check_outcome(&outcome)?;
    }

    #[test]
    fn token_soup_is_total_and_spans_are_bounded(parts in prop::collection::vec(prop::sample::select(TOKENS), 0..60)) {
        let text = parts.join(" ");
        let outcome = parse(&text);
        check_outcome(&outcome)?;
        assert_spans_in_bounds(&text, &outcome)?;
    }

    #[test]
    fn mutated_valid_text_is_total(case in arb_case(12), cut in any::<usize>(), insert in prop::sample::select(TOKENS)) {
        let text = format(&case);
        let chars: Vec<char> = text.chars().collect();
        let at = cut % (chars.len() + 1);
        let mut mutated: String = chars[..at].iter().collect();
        mutated.push_str(insert);
        mutated.extend(&chars[at..]);
        let outcome = parse(&mutated);
        check_outcome(&outcome)?;
        assert_spans_in_bounds(&mutated, &outcome)?;

        let truncated: String = chars[..at].iter().collect();
        let outcome = parse(&truncated);
        check_outcome(&outcome)?;
        assert_spans_in_bounds(&truncated, &outcome)?;
    }

    #[test]
    fn k_unresolved_references_give_k_diagnostics(k in 1..12usize, layout in prop::collection::vec(0..3usize, 12)) {
        let mut text = String::from("case \"t\" {\n  goal G1 \"g\" {\n    by E1;\n");
        for (i, shape) in layout.iter().enumerate().take(k) {
            match shape {
                0 => text.push_str(&format!("    by X{i};\n")),
                1 => text.push_str(&format!("    claim C{i} \"c{i}\" {{\n      by X{i};\n    }}\n")),
                _ => text.push_str(&format!("    claim C{i} \"c{i}\" {{\n      by E1;\n      by X{i};\n    }}\n")),
            }
        }
        text.push_str("  }\n  evidence E1 \"e\" kind(record) { description = \"d\"; date = \"2024-01-01\"; }\n}\n");
        let outcome = parse(&text);
        let p010 = outcome.diagnostics.iter().filter(|d| d.code == "P-010").count();
        prop_assert_eq!(p010, k);
        prop_assert_eq!(outcome.diagnostics.len(), k);
        assert_spans_in_bounds(&text, &outcome)?;
    }
}

#[test]
fn unresolved_span_covers_the_identifier() {
    let text = "case \"x\" {\n  goal G1 \"y\" {\n    by E9;\n  }\n}\n";
    let outcome = parse(text);
    let span = outcome.diagnostics[0].span.unwrap();
    let line: Vec<char> = text.lines().nth(span.line as usize - 1).unwrap().chars().collect();
    let covered: String = line[span.column as usize - 1..][..span.length as usize].iter().collect();
    assert_eq!(covered, "E9");
}
