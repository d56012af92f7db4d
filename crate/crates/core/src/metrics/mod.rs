//! Group-fairness and agreement metrics over binary prediction tables.
//!
//! Counting is exact; each reported value is produced by a single division of
//! integer numerator and denominator, so small fixtures come out exact.

mod evidence;
mod rates;
mod table;

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize, Serializer};

pub use evidence::{
    evaluate_metric_evidence, is_valid_dataset_ref, DatasetError, DatasetSource, FsDatasets, MetricEvaluation, Verdict,
};
pub use rates::{
    cohens_kappa, compute_metric, conditional_group_rate_difference, confusion_by_group, group_rate_difference,
    overall_accuracy, GroupConfusion, RateKind,
};
pub use table::{ingest_table, ingest_table_with, Columns, PredictionRow, PredictionTable, TableError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    StatisticalParityDifference,
    ConditionalStatisticalParityDifference,
    FprDifference,
    FnrDifference,
    PpvDifference,
    AccuracyDifference,
    OverallAccuracy,
    CohensKappa,
}

impl MetricId {
    pub const ALL: [MetricId; 8] = [
        MetricId::StatisticalParityDifference,
        MetricId::ConditionalStatisticalParityDifference,
        MetricId::FprDifference,
        MetricId::FnrDifference,
        MetricId::PpvDifference,
        MetricId::AccuracyDifference,
        MetricId::OverallAccuracy,
        MetricId::CohensKappa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::StatisticalParityDifference => "statistical_parity_difference",
            MetricId::ConditionalStatisticalParityDifference => "conditional_statistical_parity_difference",
            MetricId::FprDifference => "fpr_difference",
            MetricId::FnrDifference => "fnr_difference",
            MetricId::PpvDifference => "ppv_difference",
            MetricId::AccuracyDifference => "accuracy_difference",
            MetricId::OverallAccuracy => "overall_accuracy",
            MetricId::CohensKappa => "cohens_kappa",
        }
    }

    pub fn needs_condition(self) -> bool {
        self == MetricId::ConditionalStatisticalParityDifference
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

/// A metric value, or `Undefined` when a required denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue {
    Defined(f64),
    Undefined,
}

impl MetricValue {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            MetricValue::Defined(v) => Some(v),
            MetricValue::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, MetricValue::Defined(_))
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Defined(v) => write!(f, "{v}"),
            MetricValue::Undefined => f.write_str("UNDEFINED"),
        }
    }
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MetricValue::Defined(v) => s.serialize_f64(*v),
            MetricValue::Undefined => s.serialize_str("UNDEFINED"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricResult {
    pub metric: MetricId,
    pub value: MetricValue,
    pub per_group: IndexMap<String, MetricValue>,
    pub notes: Vec<String>,
}
