//! Confusion matrix, per-class precision/recall/F1, and the classification
//! report in text and JSON form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::corpus::LabelSet;
use crate::error::{Error, Result};

/// `counts[i][j]` is the number of examples of true class `i` predicted as `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.classes..(truth + 1) * self.classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(Error::Argument(format!(
                "class pair ({truth}, {predicted}) outside {} classes",
                self.classes
            )));
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Argument(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        cm.add(t, p)?;
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Precision, recall and F1 averaged over classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One-vs-rest metrics per class. Undefined ratios are reported as 0.
pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    let k = cm.num_classes();
    (0..k)
        .map(|c| {
            let tp = cm.get(c, c);
            let predicted: u64 = (0..k).map(|i| cm.get(i, c)).sum();
            let support: u64 = cm.row(c).iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            ClassMetrics {
                precision,
                recall,
                f1: f1_score(precision, recall),
                support,
            }
        })
        .collect()
}

pub fn aggregate(per_class: &[ClassMetrics], cm: &ConfusionMatrix) -> Result<Aggregate> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Argument(
            "cannot aggregate metrics over zero examples".into(),
        ));
    }
    if per_class.len() != cm.num_classes() {
        return Err(Error::Argument(format!(
            "{} per-class entries for {} classes",
            per_class.len(),
            cm.num_classes()
        )));
    }
    let k = per_class.len() as f64;
    let sum = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>();
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|m| m.support as f64 * f(m))
            .sum::<f64>()
            / total as f64
    };
    Ok(Aggregate {
        accuracy: ratio(cm.trace(), total),
        macro_avg: Averages {
            precision: sum(|m| m.precision) / k,
            recall: sum(|m| m.recall) / k,
            f1: sum(|m| m.f1) / k,
        },
        weighted_avg: Averages {
            precision: weighted(|m| m.precision),
            // support * recall is the class's true-positive count, so the
            // weighted recall is the trace over the total, bit for bit.
            recall: ratio(cm.trace(), total),
            f1: weighted(|m| m.f1),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub labels: Vec<String>,
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total_support: u64,
}

impl ClassReport {
    pub fn from_confusion(cm: &ConfusionMatrix, labels: &LabelSet) -> Result<Self> {
        if labels.len() != cm.num_classes() {
            return Err(Error::Argument(format!(
                "{} labels for a {}-class confusion matrix",
                labels.len(),
                cm.num_classes()
            )));
        }
        let classes = per_class_metrics(cm);
        let agg = aggregate(&classes, cm)?;
        Ok(ClassReport {
            labels: labels.labels().to_vec(),
            classes,
            accuracy: agg.accuracy,
            macro_avg: agg.macro_avg,
            weighted_avg: agg.weighted_avg,
            total_support: cm.total(),
        })
    }

    pub fn from_predictions(y_true: &[usize], y_pred: &[usize], labels: &LabelSet) -> Result<Self> {
        Self::from_confusion(&confusion(y_true, y_pred, labels.len())?, labels)
    }

    /// Unrounded JSON twin of the text report.
    pub fn to_json(&self) -> Value {
        let entry = |p: f64, r: f64, f: f64, s: u64| json!({"precision": p, "recall": r, "f1-score": f, "support": s});
        let mut map = Map::new();
        for (label, m) in self.labels.iter().zip(&self.classes) {
            map.insert(label.clone(), entry(m.precision, m.recall, m.f1, m.support));
        }
        map.insert("accuracy".into(), json!(self.accuracy));
        for (key, avg) in [
            ("macro_avg", self.macro_avg),
            ("weighted_avg", self.weighted_avg),
        ] {
            map.insert(
                key.into(),
                entry(avg.precision, avg.recall, avg.f1, self.total_support),
            );
        }
        map.insert("total_support".into(), json!(self.total_support));
        Value::Object(map)
    }
}

const COLUMN: usize = 9;

/// Fixed-width text table: one row per class, then accuracy, macro and
/// weighted averages. Metric values are rounded to two decimals.
pub fn render_report(report: &ClassReport) -> String {
    let width = report
        .labels
        .iter()
        .map(|l| l.chars().count())
        .chain(["weighted avg".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = write!(out, "{:>width$} ", "");
    for h in ["precision", "recall", "f1-score", "support"] {
        let _ = write!(out, " {h:>COLUMN$}");
    }
    out.push_str("\n\n");
    let mut row = |name: &str, p: f64, r: f64, f: f64, s: u64| {
        let _ = writeln!(
            out,
            "{name:>width$}  {p:>COLUMN$.2} {r:>COLUMN$.2} {f:>COLUMN$.2} {s:>COLUMN$}"
        );
    };
    for (label, m) in report.labels.iter().zip(&report.classes) {
        row(label, m.precision, m.recall, m.f1, m.support);
    }
    let (macro_avg, weighted_avg) = (report.macro_avg, report.weighted_avg);
    let mut tail = String::new();
    let _ = writeln!(
        tail,
        "\n{:>width$}  {:>COLUMN$} {:>COLUMN$} {:>COLUMN$.2} {:>COLUMN$}",
        "accuracy", "", "", report.accuracy, report.total_support
    );
    out.push_str(&tail);
    let mut row = |name: &str, a: Averages| {
        let _ = writeln!(
            out,
            "{name:>width$}  {:>COLUMN$.2} {:>COLUMN$.2} {:>COLUMN$.2} {:>COLUMN$}",
            a.precision, a.recall, a.f1, report.total_support
        );
    };
    row("macro avg", macro_avg);
    row("weighted avg", weighted_avg);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> LabelSet {
        LabelSet::new((0..n).map(|i| format!("c{i}")))
    }

    #[test]
    fn hand_counted_confusion() {
        let cm = confusion(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(cm.row(0), &[1, 1]);
        assert_eq!(cm.row(1), &[0, 1]);
        assert_eq!(cm.total(), 3);
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let y = [0, 1, 2, 2, 1];
        let cm = confusion(&y, &y, 3).unwrap();
        assert_eq!(cm.trace(), 5);
        let r = ClassReport::from_confusion(&cm, &labels(3)).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_avg.f1, 1.0);
    }

    #[test]
    fn empty_inputs_and_bad_indices() {
        let cm = confusion(&[], &[], 3).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(matches!(
            aggregate(&per_class_metrics(&cm), &cm),
            Err(Error::Argument(_))
        ));
        assert!(matches!(confusion(&[3], &[0], 3), Err(Error::Argument(_))));
        assert!(matches!(confusion(&[0], &[], 3), Err(Error::Argument(_))));
    }

    #[test]
    fn precision_from_counts() {
        // class 0: TP 3, FP 1
        let cm = confusion(&[0, 0, 0, 1, 1], &[0, 0, 0, 0, 1], 2).unwrap();
        assert_eq!(per_class_metrics(&cm)[0].precision, 0.75);
    }

    #[test]
    fn class_without_support_scores_zero() {
        let cm = confusion(&[0, 0], &[0, 1], 3).unwrap();
        let m = per_class_metrics(&cm);
        assert_eq!(
            (m[2].precision, m[2].recall, m[2].f1, m[2].support),
            (0.0, 0.0, 0.0, 0)
        );
        assert_eq!((m[1].precision, m[1].f1), (0.0, 0.0));
    }

    #[test]
    fn equal_precision_and_recall_give_same_f1() {
        assert!((f1_score(0.4, 0.4) - 0.4).abs() < 1e-15);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn balanced_supports_make_macro_equal_weighted() {
        let y_true = [0, 0, 1, 1, 2, 2];
        let y_pred = [0, 1, 1, 2, 2, 0];
        let r = ClassReport::from_predictions(&y_true, &y_pred, &labels(3)).unwrap();
        assert!((r.macro_avg.precision - r.weighted_avg.precision).abs() < 1e-15);
        assert!((r.macro_avg.recall - r.weighted_avg.recall).abs() < 1e-15);
        assert!((r.macro_avg.f1 - r.weighted_avg.f1).abs() < 1e-15);
    }

    #[test]
    fn json_twin_keys() {
        let r = ClassReport::from_predictions(&[0, 1, 1], &[0, 1, 0], &labels(2)).unwrap();
        let v = r.to_json();
        assert_eq!(v["c1"]["support"], 2);
        assert_eq!(v["c1"]["recall"], 0.5);
        assert_eq!(v["accuracy"].as_f64().unwrap(), 2.0 / 3.0);
        assert_eq!(v["total_support"], 3);
        assert!(v["macro_avg"]["f1-score"].is_number());
        assert!(v["weighted_avg"]["precision"].is_number());
    }

    #[test]
    fn single_class_report_has_four_rows() {
        let r = ClassReport::from_predictions(&[0, 0], &[0, 0], &labels(1)).unwrap();
        let text = render_report(&r);
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        assert_eq!(rows.len(), 5); // header + class + accuracy + 2 averages
        assert!(rows[1].trim_start().starts_with("c0"));
    }
}
