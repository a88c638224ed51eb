//! Accuracy summaries with per-class, per-device and confusion views.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One recording's true and predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: String,
    pub device: String,
    pub truth: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub name: String,
    pub count: usize,
    pub correct: usize,
    /// Percent.
    pub accuracy: f64,
}

impl GroupAccuracy {
    fn new(name: String, count: usize, correct: usize) -> Self {
        GroupAccuracy {
            name,
            count,
            correct,
            accuracy: percent(correct, count),
        }
    }
}

fn percent(correct: usize, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        100.0 * correct as f64 / count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    pub branches: Vec<String>,
    pub fused: bool,
    pub total: usize,
    pub correct: usize,
    /// Percent of recordings labelled correctly.
    pub accuracy: f64,
    pub per_class: Vec<GroupAccuracy>,
    pub per_device: Vec<GroupAccuracy>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub outcomes: Vec<Outcome>,
}

impl EvalReport {
    pub fn from_outcomes(
        labels: &[String],
        branches: &[String],
        fused: bool,
        outcomes: Vec<Outcome>,
    ) -> Result<Self> {
        let c = labels.len();
        let mut confusion = vec![vec![0usize; c]; c];
        let mut devices: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for o in &outcomes {
            if o.truth >= c || o.predicted >= c {
                return Err(Error::Validation(format!(
                    "{}: class index out of range for {c} labels",
                    o.id
                )));
            }
            confusion[o.truth][o.predicted] += 1;
            let d = devices.entry(o.device.as_str()).or_default();
            d.0 += 1;
            d.1 += usize::from(o.truth == o.predicted);
        }
        let correct = (0..c).map(|i| confusion[i][i]).sum();
        let per_class = labels
            .iter()
            .enumerate()
            .map(|(i, l)| GroupAccuracy::new(l.clone(), confusion[i].iter().sum(), confusion[i][i]))
            .collect();
        let per_device = devices
            .into_iter()
            .map(|(d, (n, k))| GroupAccuracy::new(d.to_string(), n, k))
            .collect();
        Ok(EvalReport {
            labels: labels.to_vec(),
            branches: branches.to_vec(),
            fused,
            total: outcomes.len(),
            correct,
            accuracy: percent(correct, outcomes.len()),
            per_class,
            per_device,
            confusion,
            outcomes,
        })
    }

    /// Trace of the confusion matrix divided by its sum, in percent.
    pub fn confusion_accuracy(&self) -> f64 {
        let trace: usize = (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum();
        let sum: usize = self.confusion.iter().flatten().sum();
        percent(trace, sum)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mode = if self.fused { "PROD fusion of" } else { "single branch" };
        let _ = writeln!(s, "Evaluation: {mode} {}", self.branches.join(" + "));
        let _ = writeln!(
            s,
            "Overall accuracy: {:.1}% ({}/{})\n",
            self.accuracy, self.correct, self.total
        );
        group_table(&mut s, "Class", &self.per_class);
        s.push('\n');
        group_table(&mut s, "Device", &self.per_device);
        s.push('\n');

        let w = self
            .labels
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("truth \\ pred".len());
        let cell = self
            .confusion
            .iter()
            .flatten()
            .map(|v| v.to_string().len())
            .max()
            .unwrap_or(1)
            .max(3);
        let _ = write!(s, "{:<w$}", "truth \\ pred");
        for i in 0..self.labels.len() {
            let _ = write!(s, " {:>cell$}", i);
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(s, "{:<w$}", format!("{i} {}", self.labels[i]));
            for v in row {
                let _ = write!(s, " {v:>cell$}");
            }
            s.push('\n');
        }
        s
    }
}

fn group_table(s: &mut String, title: &str, rows: &[GroupAccuracy]) {
    let w = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(title.len());
    let _ = writeln!(s, "{title:<w$}  {:>6}  {:>7}  {:>8}", "count", "correct", "acc (%)");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<w$}  {:>6}  {:>7}  {:>8.1}",
            r.name, r.count, r.correct, r.accuracy
        );
    }
}
