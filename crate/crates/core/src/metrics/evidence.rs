use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use super::{compute_metric, ingest_table_with, Columns, MetricResult, MetricValue, PredictionTable, TableError};
use crate::model::MetricPayload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset not found: {0}")]
    NotFound(String),
    #[error("invalid dataset reference {0:?}")]
    InvalidRef(String),
    #[error("dataset {name}: {source}")]
    Table {
        name: String,
        #[source]
        source: TableError,
    },
    #[error("dataset {name}: {source}")]
    Io {
        name: String,
        #[source]
        source: std::io::Error,
    },
}

/// Resolves a dataset reference into a prediction table.
pub trait DatasetSource {
    fn load(&self, dataset_ref: &str, columns: &Columns) -> Result<PredictionTable, DatasetError>;
}

/// Dataset references must be plain names: no separators, no leading dot.
pub fn is_valid_dataset_ref(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Reads `{dir}/{ref}.csv`.
#[derive(Debug, Clone)]
pub struct FsDatasets {
    pub dir: PathBuf,
}

impl FsDatasets {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FsDatasets { dir: dir.into() }
    }

    pub fn path_for(&self, dataset_ref: &str) -> Option<PathBuf> {
        is_valid_dataset_ref(dataset_ref).then(|| self.dir.join(format!("{dataset_ref}.csv")))
    }
}

impl DatasetSource for FsDatasets {
    fn load(&self, dataset_ref: &str, columns: &Columns) -> Result<PredictionTable, DatasetError> {
        let path = self
            .path_for(dataset_ref)
            .ok_or_else(|| DatasetError::InvalidRef(dataset_ref.to_owned()))?;
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(DatasetError::NotFound(dataset_ref.to_owned()))
            }
            Err(source) => {
                return Err(DatasetError::Io {
                    name: dataset_ref.to_owned(),
                    source,
                })
            }
        };
        ingest_table_with(&bytes, columns).map_err(|source| DatasetError::Table {
            name: dataset_ref.to_owned(),
            source,
        })
    }
}

/// In-memory CSV sources keyed by dataset name.
impl DatasetSource for HashMap<String, String> {
    fn load(&self, dataset_ref: &str, columns: &Columns) -> Result<PredictionTable, DatasetError> {
        let csv = self
            .get(dataset_ref)
            .ok_or_else(|| DatasetError::NotFound(dataset_ref.to_owned()))?;
        ingest_table_with(csv.as_bytes(), columns).map_err(|source| DatasetError::Table {
            name: dataset_ref.to_owned(),
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricEvaluation {
    pub result: Option<MetricResult>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

/// Computes the metric named by the payload and compares it with the
/// threshold. Missing data or an undefined value is indeterminate, never a
/// pass.
pub fn evaluate_metric_evidence(payload: &MetricPayload, source: &dyn DatasetSource) -> MetricEvaluation {
    let indeterminate = |note: String| MetricEvaluation {
        result: None,
        verdict: Verdict::Indeterminate,
        notes: vec![note],
    };
    if payload.metric.needs_condition() && payload.condition_column.is_none() {
        return indeterminate(format!("{} needs a condition column", payload.metric));
    }
    let columns = Columns {
        group: payload.group_column.clone(),
        condition: payload.condition_column.clone(),
    };
    let table = match source.load(&payload.dataset_ref, &columns) {
        Ok(t) => t,
        Err(e) => return indeterminate(e.to_string()),
    };
    let result = match compute_metric(&table, payload.metric) {
        Ok(r) => r,
        Err(e) => return indeterminate(e.to_string()),
    };
    let (verdict, note) = match result.value {
        MetricValue::Undefined => (Verdict::Indeterminate, format!("{} is undefined", payload.metric)),
        MetricValue::Defined(v) => {
            let ok = payload.comparator.holds(v, payload.threshold);
            let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
            (
                verdict,
                format!(
                    "{} = {v} {} {} {}",
                    payload.metric,
                    if ok { "satisfies" } else { "violates" },
                    payload.comparator.symbol(),
                    payload.threshold
                ),
            )
        }
    };
    MetricEvaluation {
        result: Some(result),
        verdict,
        notes: vec![note],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricId;
    use crate::model::Comparator;

    fn payload(metric: MetricId, comparator: Comparator, threshold: f64) -> MetricPayload {
        MetricPayload {
            dataset_ref: "val".into(),
            metric,
            group_column: "sex".into(),
            condition_column: None,
            comparator,
            threshold,
        }
    }

    fn csv(rows: &[(&str, u8, u8, usize)]) -> String {
        let mut s = String::from("sex,y_true,y_pred\n");
        for (g, t, p, n) in rows {
            for _ in 0..*n {
                s.push_str(&format!("{g},{t},{p}\n"));
            }
        }
        s
    }

    fn store(text: String) -> HashMap<String, String> {
        HashMap::from([("val".to_owned(), text)])
    }

    #[test]
    fn parity_gap_fails_tight_threshold() {
        let s = store(csv(&[("A", 1, 1, 4), ("A", 0, 1, 4), ("A", 1, 0, 1), ("A", 0, 0, 1), ("B", 1, 1, 3), ("B", 0, 1, 2), ("B", 1, 0, 2), ("B", 0, 0, 3)]));
        let e = evaluate_metric_evidence(&payload(MetricId::StatisticalParityDifference, Comparator::Lte, 0.1), &s);
        assert_eq!(e.verdict, Verdict::Fail);
    }

    #[test]
    fn kappa_passes() {
        let s = store(csv(&[("A", 1, 1, 4), ("A", 1, 0, 1), ("A", 0, 1, 1), ("A", 0, 0, 4)]));
        let e = evaluate_metric_evidence(&payload(MetricId::CohensKappa, Comparator::Gte, 0.5), &s);
        assert_eq!(e.verdict, Verdict::Pass);
    }

    #[test]
    fn equal_threshold_passes_both_ways() {
        let s = store(csv(&[("A", 1, 1, 4), ("A", 1, 0, 1), ("A", 0, 1, 1), ("A", 0, 0, 4)]));
        for cmp in [Comparator::Lte, Comparator::Gte] {
            let e = evaluate_metric_evidence(&payload(MetricId::OverallAccuracy, cmp, 0.8), &s);
            assert_eq!(e.verdict, Verdict::Pass);
        }
    }

    #[test]
    fn missing_dataset_is_indeterminate() {
        let e = evaluate_metric_evidence(
            &payload(MetricId::CohensKappa, Comparator::Gte, 0.5),
            &HashMap::<String, String>::new(),
        );
        assert_eq!(e.verdict, Verdict::Indeterminate);
        assert!(e.notes[0].contains("dataset not found"));
    }

    #[test]
    fn undefined_value_is_indeterminate() {
        let s = store(csv(&[("A", 1, 1, 2), ("B", 0, 0, 2)]));
        let e = evaluate_metric_evidence(&payload(MetricId::FprDifference, Comparator::Lte, 0.1), &s);
        assert_eq!(e.verdict, Verdict::Indeterminate);
    }

    #[test]
    fn fs_source_rejects_paths() {
        let dir = tempfile::tempdir().unwrap();
        let fs = FsDatasets::new(dir.path());
        assert!(matches!(fs.load("../x", &Columns::default()), Err(DatasetError::InvalidRef(_))));
        assert!(matches!(fs.load("absent", &Columns::default()), Err(DatasetError::NotFound(_))));
        std::fs::write(dir.path().join("d.csv"), "group,y_true,y_pred\nA,1,1\n").unwrap();
        assert_eq!(fs.load("d", &Columns::default()).unwrap().len(), 1);
    }
}
