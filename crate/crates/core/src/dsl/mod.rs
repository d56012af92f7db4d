//! The `.tea` authoring notation.
//!
//! ```text
//! file     := "case" STRING "{" goal evidence* waiver* "}"
//! goal     := "goal" IDENT STRING attr* (block | ";")
//! claim    := "claim" IDENT STRING attr* (block | ";")
//! block    := "{" (claim | "by" IDENT ";")* "}"
//! attr     := "stage" "(" IDENT ")" | "considers" "(" IDENT {"," IDENT} ")"
//! evidence := "evidence" IDENT STRING "kind" "(" KIND ")" "{" {IDENT "=" (STRING | NUMBER) ";"} "}"
//! waiver   := "waive" IDENT STRING ";"
//! ```
//!
//! Items inside the case block may appear in any order. The formatter always
//! writes them as goal, evidence, waivers.

mod format;
mod lexer;
mod parser;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::diagnostic::Diagnostic;
use crate::model::AssuranceCase;

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub case: Option<AssuranceCase>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseOutcome {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }
}

#[derive(Debug, Error)]
#[error("{}: {source}", path.display())]
pub struct DslIoError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

pub fn parse(text: &str) -> ParseOutcome {
    parser::parse(text)
}

/// Parses raw bytes. Invalid UTF-8 is reported as P-000 at the first bad byte.
pub fn parse_bytes(bytes: &[u8]) -> ParseOutcome {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let prefix = std::str::from_utf8(valid).unwrap_or_default();
            let line = prefix.matches('\n').count() as u32 + 1;
            let column = prefix.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32 + 1;
            ParseOutcome {
                case: None,
                diagnostics: vec![Diagnostic::error("P-000", "input is not valid UTF-8")
                    .at(crate::diagnostic::SourceSpan::new(line, column, 1))],
            }
        }
    }
}

pub fn format(case: &AssuranceCase) -> String {
    format::format(case)
}

pub fn parse_file(path: &Path) -> Result<ParseOutcome, DslIoError> {
    let bytes = std::fs::read(path).map_err(|source| DslIoError {
        path: path.to_owned(),
        source,
    })?;
    Ok(parse_bytes(&bytes))
}

pub fn format_file(case: &AssuranceCase, path: &Path) -> Result<(), DslIoError> {
    std::fs::write(path, format(case)).map_err(|source| DslIoError {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bom_is_stripped() {
        let plain = "case \"x\" {\n  goal G1 \"y\";\n}\n";
        let with_bom = format!("\u{FEFF}{plain}");
        let a = parse_bytes(plain.as_bytes()).case.unwrap();
        let b = parse_bytes(with_bom.as_bytes()).case.unwrap();
        assert!(a.structurally_eq(&b));
    }

    #[test]
    fn invalid_utf8() {
        let o = parse_bytes(b"case \"\xff\"");
        assert_eq!(o.diagnostics[0].code, "P-000");
        assert_eq!(o.diagnostics[0].span.unwrap().column, 7);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = parse_file(Path::new("/nonexistent/x.tea")).unwrap_err();
        assert_eq!(err.path, Path::new("/nonexistent/x.tea"));
    }

    #[test]
    fn crlf_accepted() {
        let o = parse("case \"x\" {\r\n  goal G1 \"y\";\r\n}\r\n");
        assert!(o.case.is_some());
    }
}
