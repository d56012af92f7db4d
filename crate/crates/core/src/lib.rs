//! Assurance-case engine for fairness arguments: case model, `.tea` notation,
//! structural validation, lifecycle and consideration coverage, fairness
//! metrics, evidence evaluation and report rendering.

pub mod canonical;
pub mod diagnostic;
pub mod dsl;
pub mod evaluate;
pub mod fairness;
pub mod lifecycle;
pub mod metrics;
pub mod model;
pub mod report;
pub mod validate;

pub use diagnostic::{Diagnostic, Severity, SourceSpan};
pub use model::{AssuranceCase, CaseError, Claim, ClaimKind, Evidence, EvidenceKind, EvidencePayload, NodeId, Waiver};
