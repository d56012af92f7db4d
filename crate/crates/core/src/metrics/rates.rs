use std::cmp::Ordering;
use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::Serialize;

use super::{MetricId, MetricResult, MetricValue, PredictionRow, PredictionTable, TableError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupConfusion {
    pub group: String,
    pub tp: u64,
    pub fp: u64,
    pub r#fn: u64,
    pub tn: u64,
}

impl GroupConfusion {
    fn empty(group: &str) -> Self {
        GroupConfusion {
            group: group.to_owned(),
            tp: 0,
            fp: 0,
            r#fn: 0,
            tn: 0,
        }
    }

    fn add(&mut self, row: &PredictionRow) {
        match (row.y_true, row.y_pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.r#fn += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.r#fn + self.tn
    }
}

/// Per-group confusion counts, sorted by group label.
pub fn confusion_by_group(table: &PredictionTable) -> Vec<GroupConfusion> {
    confusion_of(table.rows().iter())
}

fn confusion_of<'a>(rows: impl Iterator<Item = &'a PredictionRow>) -> Vec<GroupConfusion> {
    let mut by_group: BTreeMap<&str, GroupConfusion> = BTreeMap::new();
    for row in rows {
        by_group
            .entry(row.group.as_str())
            .or_insert_with(|| GroupConfusion::empty(&row.group))
            .add(row);
    }
    by_group.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateKind {
    /// (tp+fp)/N
    Selection,
    /// fp/(fp+tn)
    Fpr,
    /// fn/(fn+tp)
    Fnr,
    /// tp/(tp+fp)
    Ppv,
    /// (tp+tn)/N
    Accuracy,
}

impl RateKind {
    pub fn metric(self) -> MetricId {
        match self {
            RateKind::Selection => MetricId::StatisticalParityDifference,
            RateKind::Fpr => MetricId::FprDifference,
            RateKind::Fnr => MetricId::FnrDifference,
            RateKind::Ppv => MetricId::PpvDifference,
            RateKind::Accuracy => MetricId::AccuracyDifference,
        }
    }

    fn ratio(self, c: &GroupConfusion) -> Ratio {
        let (num, den) = match self {
            RateKind::Selection => (c.tp + c.fp, c.total()),
            RateKind::Fpr => (c.fp, c.fp + c.tn),
            RateKind::Fnr => (c.r#fn, c.r#fn + c.tp),
            RateKind::Ppv => (c.tp, c.tp + c.fp),
            RateKind::Accuracy => (c.tp + c.tn, c.total()),
        };
        Ratio { num, den }
    }

    fn undefined_reason(self) -> &'static str {
        match self {
            RateKind::Selection | RateKind::Accuracy => "no rows",
            RateKind::Fpr => "no actual negatives; false positive rate undefined",
            RateKind::Fnr => "no actual positives; false negative rate undefined",
            RateKind::Ppv => "no predicted positives; positive predictive value undefined",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    fn value(self) -> MetricValue {
        if self.den == 0 {
            MetricValue::Undefined
        } else {
            MetricValue::Defined(self.num as f64 / self.den as f64)
        }
    }

    /// Exact comparison of two defined ratios.
    fn cmp(self, other: Ratio) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }

    /// `self - other` with a single rounding step; requires `self >= other`.
    fn minus(self, other: Ratio) -> f64 {
        let num = self.num as u128 * other.den as u128 - other.num as u128 * self.den as u128;
        let den = self.den as u128 * other.den as u128;
        num as f64 / den as f64
    }
}

struct Spread {
    value: MetricValue,
    per_group: Vec<(String, MetricValue)>,
    notes: Vec<String>,
}

/// max - min of the per-group rate; undefined when any group's rate is.
fn spread(confusions: &[GroupConfusion], rate: RateKind, label: impl Fn(&str) -> String) -> Spread {
    let mut per_group = Vec::with_capacity(confusions.len());
    let mut notes = Vec::new();
    let mut defined: Vec<Ratio> = Vec::with_capacity(confusions.len());
    for c in confusions {
        let ratio = rate.ratio(c);
        let key = label(&c.group);
        if ratio.den == 0 {
            notes.push(format!("group {key}: {}", rate.undefined_reason()));
        } else {
            defined.push(ratio);
        }
        per_group.push((key, ratio.value()));
    }
    let value = if defined.len() < confusions.len() {
        MetricValue::Undefined
    } else {
        let max = defined.iter().copied().max_by(|a, b| a.cmp(*b));
        let min = defined.iter().copied().min_by(|a, b| a.cmp(*b));
        match (max, min) {
            (Some(max), Some(min)) => MetricValue::Defined(max.minus(min)),
            _ => MetricValue::Undefined,
        }
    };
    Spread { value, per_group, notes }
}

/// Largest gap between groups in the chosen rate.
pub fn group_rate_difference(table: &PredictionTable, rate: RateKind) -> MetricResult {
    let s = spread(&confusion_by_group(table), rate, str::to_owned);
    MetricResult {
        metric: rate.metric(),
        value: s.value,
        per_group: s.per_group.into_iter().collect(),
        notes: s.notes,
    }
}

/// The group gap computed within each condition stratum; the result is the
/// largest stratum gap. Per-group keys are `"stratum|group"`.
///
/// With `RateKind::Selection` this is conditional statistical parity; for
/// other rates the result carries that rate's metric id.
pub fn conditional_group_rate_difference(table: &PredictionTable, rate: RateKind) -> Result<MetricResult, TableError> {
    let mut strata: BTreeMap<&str, Vec<&PredictionRow>> = BTreeMap::new();
    for row in table.rows() {
        let stratum = row
            .condition
            .as_deref()
            .ok_or_else(|| TableError::Schema("condition".into()))?;
        strata.entry(stratum).or_default().push(row);
    }

    let mut per_group = IndexMap::new();
    let mut notes = Vec::new();
    let mut worst: Option<f64> = None;
    let mut undefined = false;
    for (stratum, rows) in &strata {
        let s = spread(&confusion_of(rows.iter().copied()), rate, |g| format!("{stratum}|{g}"));
        per_group.extend(s.per_group);
        notes.extend(s.notes);
        match s.value {
            MetricValue::Defined(v) => worst = Some(worst.map_or(v, |w: f64| w.max(v))),
            MetricValue::Undefined => undefined = true,
        }
    }
    let value = match (undefined, worst) {
        (false, Some(v)) => MetricValue::Defined(v),
        _ => MetricValue::Undefined,
    };
    let metric = match rate {
        RateKind::Selection => MetricId::ConditionalStatisticalParityDifference,
        other => other.metric(),
    };
    Ok(MetricResult {
        metric,
        value,
        per_group,
        notes,
    })
}

/// Agreement between actual and predicted labels, corrected for chance.
pub fn cohens_kappa(table: &PredictionTable) -> MetricResult {
    let n = table.len() as u128;
    let mut agree = 0u128;
    let mut true_pos = 0u128;
    let mut pred_pos = 0u128;
    for row in table.rows() {
        agree += u128::from(row.y_true == row.y_pred);
        true_pos += u128::from(row.y_true);
        pred_pos += u128::from(row.y_pred);
    }
    // kappa = (p_o - p_e) / (1 - p_e), scaled through by n^2.
    let chance = true_pos * pred_pos + (n - true_pos) * (n - pred_pos);
    let denom = n * n - chance;
    let (value, notes) = if denom == 0 {
        (
            MetricValue::Undefined,
            vec!["chance agreement is 1 (both label columns are constant and equal); kappa undefined".to_owned()],
        )
    } else {
        let num = (agree * n) as i128 - chance as i128;
        (MetricValue::Defined(num as f64 / denom as f64), Vec::new())
    };
    MetricResult {
        metric: MetricId::CohensKappa,
        value,
        per_group: IndexMap::new(),
        notes,
    }
}

/// Fraction of rows where the prediction matches the actual label.
pub fn overall_accuracy(table: &PredictionTable) -> MetricResult {
    let correct = table.rows().iter().filter(|r| r.y_true == r.y_pred).count() as u64;
    MetricResult {
        metric: MetricId::OverallAccuracy,
        value: Ratio {
            num: correct,
            den: table.len() as u64,
        }
        .value(),
        per_group: IndexMap::new(),
        notes: Vec::new(),
    }
}

pub fn compute_metric(table: &PredictionTable, metric: MetricId) -> Result<MetricResult, TableError> {
    Ok(match metric {
        MetricId::StatisticalParityDifference => group_rate_difference(table, RateKind::Selection),
        MetricId::ConditionalStatisticalParityDifference => {
            conditional_group_rate_difference(table, RateKind::Selection)?
        }
        MetricId::FprDifference => group_rate_difference(table, RateKind::Fpr),
        MetricId::FnrDifference => group_rate_difference(table, RateKind::Fnr),
        MetricId::PpvDifference => group_rate_difference(table, RateKind::Ppv),
        MetricId::AccuracyDifference => group_rate_difference(table, RateKind::Accuracy),
        MetricId::OverallAccuracy => overall_accuracy(table),
        MetricId::CohensKappa => cohens_kappa(table),
    })
}
