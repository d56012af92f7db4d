use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use tea_core::metrics::{
    compute_metric, confusion_by_group, ingest_table, MetricId, MetricValue, PredictionRow, PredictionTable,
};
use tea_core::model::Comparator;

type Raw = (usize, bool, bool, usize);

fn table_of(raw: &[Raw], names: &[&str]) -> PredictionTable {
    let rows = raw
        .iter()
        .map(|&(g, t, p, s)| PredictionRow {
            group: names[g].to_owned(),
            y_true: t,
            y_pred: p,
            score: None,
            condition: Some(["low", "high"][s].to_owned()),
        })
        .collect();
    PredictionTable::new(rows).unwrap()
}

fn arb_rows() -> impl Strategy<Value = Vec<Raw>> {
    prop::collection::vec((0..3usize, any::<bool>(), any::<bool>(), 0..2usize), 1..=40)
}

/// Brute-force reference: filters the raw rows for every quantity.
mod oracle {
    use super::*;

    fn rate(rows: &[&Raw], metric: MetricId) -> Option<f64> {
        let count = |f: &dyn Fn(&Raw) -> bool| rows.iter().filter(|r| f(r)).count() as f64;
        let (num, den) = match metric {
            MetricId::StatisticalParityDifference | MetricId::ConditionalStatisticalParityDifference => {
                (count(&|r| r.2), rows.len() as f64)
            }
            MetricId::FprDifference => (count(&|r| !r.1 && r.2), count(&|r| !r.1)),
            MetricId::FnrDifference => (count(&|r| r.1 && !r.2), count(&|r| r.1)),
            MetricId::PpvDifference => (count(&|r| r.1 && r.2), count(&|r| r.2)),
            MetricId::AccuracyDifference => (count(&|r| r.1 == r.2), rows.len() as f64),
            _ => unreachable!(),
        };
        (den > 0.0).then(|| num / den)
    }

    fn spread(rows: &[&Raw], metric: MetricId) -> Option<f64> {
        let groups: BTreeSet<usize> = rows.iter().map(|r| r.0).collect();
        let mut vals = Vec::new();
        for g in groups {
            let members: Vec<&Raw> = rows.iter().copied().filter(|r| r.0 == g).collect();
            vals.push(rate(&members, metric)?);
        }
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        Some(max - min)
    }

    pub fn value(raw: &[Raw], metric: MetricId) -> Option<f64> {
        let all: Vec<&Raw> = raw.iter().collect();
        let n = raw.len() as f64;
        match metric {
            MetricId::OverallAccuracy => Some(raw.iter().filter(|r| r.1 == r.2).count() as f64 / n),
            MetricId::CohensKappa => {
                let po = raw.iter().filter(|r| r.1 == r.2).count() as f64 / n;
                let t1 = raw.iter().filter(|r| r.1).count() as f64 / n;
                let p1 = raw.iter().filter(|r| r.2).count() as f64 / n;
                let pe = t1 * p1 + (1.0 - t1) * (1.0 - p1);
                (pe != 1.0).then(|| (po - pe) / (1.0 - pe))
            }
            MetricId::ConditionalStatisticalParityDifference => {
                let mut best: f64 = 0.0;
                for s in [0, 1] {
                    let stratum: Vec<&Raw> = raw.iter().filter(|r| r.3 == s).collect();
                    if !stratum.is_empty() {
                        best = best.max(spread(&stratum, metric)?);
                    }
                }
                Some(best)
            }
            _ => spread(&all, metric),
        }
    }
}

fn value_of(table: &PredictionTable, metric: MetricId) -> Option<f64> {
    compute_metric(table, metric).unwrap().value.as_f64()
}

const NAMES: [&str; 3] = ["A", "B", "C"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn matches_brute_force_oracle(raw in arb_rows()) {
        let table = table_of(&raw, &NAMES);
        for metric in MetricId::ALL {
            let got = value_of(&table, metric);
            let want = oracle::value(&raw, metric);
            match (got, want) {
                (Some(g), Some(w)) => prop_assert!((g - w).abs() <= 1e-12, "{metric}: {g} vs {w}"),
                (None, None) => {}
                _ => prop_assert!(false, "{metric}: {got:?} vs {want:?}"),
            }
        }
    }

    #[test]
    fn counts_are_conserved(raw in arb_rows()) {
        let table = table_of(&raw, &NAMES);
        let groups = confusion_by_group(&table);
        let total: u64 = groups.iter().map(|g| g.tp + g.fp + g.r#fn + g.tn).sum();
        prop_assert_eq!(total as usize, raw.len());
        let labels: Vec<&str> = groups.iter().map(|g| g.group.as_str()).collect();
        let mut sorted = labels.clone();
        sorted.sort();
        prop_assert_eq!(labels, sorted);
        for g in &groups {
            prop_assert!(g.tp + g.fp + g.r#fn + g.tn >= 1);
        }
    }

    #[test]
    fn values_stay_in_range(raw in arb_rows()) {
        let table = table_of(&raw, &NAMES);
        for metric in MetricId::ALL {
            let result = compute_metric(&table, metric).unwrap();
            let (lo, hi) = if metric == MetricId::CohensKappa { (-1.0, 1.0) } else { (0.0, 1.0) };
            if let MetricValue::Defined(v) = result.value {
                prop_assert!((lo..=hi).contains(&v), "{metric} = {v}");
            }
            for v in result.per_group.values().filter_map(|v| v.as_f64()) {
                prop_assert!((0.0..=1.0).contains(&v) || metric == MetricId::CohensKappa);
            }
        }
    }

    #[test]
    fn row_order_is_irrelevant(raw in arb_rows(), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut shuffled = raw.clone();
        shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
        let a = table_of(&raw, &NAMES);
        let b = table_of(&shuffled, &NAMES);
        for metric in MetricId::ALL {
            prop_assert_eq!(compute_metric(&a, metric).unwrap(), compute_metric(&b, metric).unwrap());
        }
    }

    #[test]
    fn renaming_groups_keeps_values(raw in arb_rows(), perm in Just([0usize, 1, 2]).prop_shuffle()) {
        let renamed: Vec<&str> = perm.iter().map(|&i| ["zeta", "alpha", "mid"][i]).collect();
        let a = table_of(&raw, &NAMES);
        let b = table_of(&raw, &renamed);
        for metric in MetricId::ALL {
            prop_assert_eq!(compute_metric(&a, metric).unwrap().value, compute_metric(&b, metric).unwrap().value);
        }
    }

    #[test]
    fn equal_threshold_passes_both_comparators(raw in arb_rows()) {
        let table = table_of(&raw, &NAMES);
        for metric in MetricId::ALL {
            if let Some(v) = value_of(&table, metric) {
                prop_assert!(Comparator::Lte.holds(v, v) && Comparator::Gte.holds(v, v));
            }
        }
    }

    #[test]
    fn csv_ingest_agrees_with_rows(raw in arb_rows()) {
        let mut csv = String::from("group,y_true,y_pred,condition\n");
        for &(g, t, p, s) in &raw {
            csv.push_str(&format!("{},{},{},{}\n", NAMES[g], u8::from(t), u8::from(p), ["low", "high"][s]));
        }
        let ingested = ingest_table(csv.as_bytes()).unwrap();
        prop_assert_eq!(ingested, table_of(&raw, &NAMES));
    }
}

#[test]
fn compas_style_conflict() {
    let mut raw = Vec::new();
    for (g, tp, fp, fnn, tn) in [(0, 21, 9, 9, 61), (1, 42, 18, 18, 22)] {
        raw.extend(std::iter::repeat_n((g, true, true, 0), tp));
        raw.extend(std::iter::repeat_n((g, false, true, 0), fp));
        raw.extend(std::iter::repeat_n((g, true, false, 0), fnn));
        raw.extend(std::iter::repeat_n((g, false, false, 0), tn));
    }
    let table = table_of(&raw, &NAMES);
    assert_eq!(value_of(&table, MetricId::PpvDifference), Some(0.0));
    let fpr = value_of(&table, MetricId::FprDifference).unwrap();
    assert!((fpr - (18.0 / 40.0 - 9.0 / 70.0)).abs() < 1e-12);
    let by_count: BTreeMap<_, _> = confusion_by_group(&table)
        .into_iter()
        .map(|g| (g.group.clone(), (g.tp, g.fp, g.r#fn, g.tn)))
        .collect();
    assert_eq!(by_count["A"], (21, 9, 9, 61));
    assert_eq!(by_count["B"], (42, 18, 18, 22));
}
