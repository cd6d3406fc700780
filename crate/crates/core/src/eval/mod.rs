//! Smatch, action accuracy and plain-text reports.

mod smatch;

use std::fmt::Write as _;

use thiserror::Error;

use crate::actions::ActionLabel;

pub use smatch::{smatch, smatch_exact, SmatchError, SmatchResult, DEFAULT_RESTARTS, EXACT_LIMIT};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("label sequences differ in length ({pred} predicted, {gold} gold)")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("no labels to score")]
    Empty,
}

/// Exact-match accuracy with a gold-by-predicted confusion matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionAccuracy {
    pub correct: usize,
    pub total: usize,
    /// `confusion[gold][pred]`, indexed by [`ActionLabel::index`].
    pub confusion: [[usize; 9]; 9],
}

impl ActionAccuracy {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    pub fn gold_count(&self, label: ActionLabel) -> usize {
        self.confusion[label.index()].iter().sum()
    }

    /// Accuracy on tokens whose gold label is `label`, if any.
    pub fn class_accuracy(&self, label: ActionLabel) -> Option<f64> {
        let n = self.gold_count(label);
        (n > 0).then(|| self.confusion[label.index()][label.index()] as f64 / n as f64)
    }

    /// Accuracy line, per-class table and confusion matrix. Rows are gold,
    /// columns predicted; DICT row and column are starred.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "accuracy\t{:.4}\t{}/{}",
            self.accuracy(),
            self.correct,
            self.total
        );
        let _ = writeln!(out, "\naction\tgold\tcorrect\taccuracy");
        for a in ActionLabel::ALL {
            let n = self.gold_count(a);
            if n == 0 {
                continue;
            }
            let acc = self.class_accuracy(a).unwrap_or(0.0);
            let _ = writeln!(
                out,
                "{a}\t{n}\t{}\t{acc:.4}",
                self.confusion[a.index()][a.index()]
            );
        }
        let star = |a: ActionLabel| if a == ActionLabel::Dict { "*" } else { "" };
        let _ = write!(out, "\ngold\\pred");
        for a in ActionLabel::ALL {
            let _ = write!(out, "\t{a}{}", star(a));
        }
        out.push('\n');
        for g in ActionLabel::ALL {
            let _ = write!(out, "{g}{}", star(g));
            for p in ActionLabel::ALL {
                let _ = write!(out, "\t{}", self.confusion[g.index()][p.index()]);
            }
            out.push('\n');
        }
        out
    }
}

pub fn action_accuracy(
    pred: &[ActionLabel],
    gold: &[ActionLabel],
) -> Result<ActionAccuracy, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut confusion = [[0; 9]; 9];
    for (p, g) in pred.iter().zip(gold) {
        confusion[g.index()][p.index()] += 1;
    }
    Ok(ActionAccuracy {
        correct: pred.iter().zip(gold).filter(|(p, g)| p == g).count(),
        total: gold.len(),
        confusion,
    })
}

/// Token count per action, indexed by [`ActionLabel::index`].
pub fn action_distribution<'a>(labels: impl IntoIterator<Item = &'a ActionLabel>) -> [usize; 9] {
    let mut counts = [0; 9];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}

/// Action, token count and percentage of all tokens, most frequent first.
pub fn render_distribution(counts: &[usize; 9]) -> String {
    let total: usize = counts.iter().sum();
    let mut rows: Vec<ActionLabel> = ActionLabel::ALL.to_vec();
    rows.sort_by_key(|a| (std::cmp::Reverse(counts[a.index()]), a.index()));
    let mut out = String::from("action\ttokens\t% total\n");
    for a in rows {
        let n = counts[a.index()];
        let pct = if total == 0 {
            0.0
        } else {
            100.0 * n as f64 / total as f64
        };
        let _ = writeln!(out, "{a}\t{n}\t{pct:.1}");
    }
    let _ = writeln!(out, "total\t{total}\t100.0");
    out
}

pub fn render_smatch(r: &SmatchResult) -> String {
    format!(
        "precision\t{:.4}\nrecall\t{:.4}\nf1\t{:.4}\nmatched\t{}\npredicted_triples\t{}\ngold_triples\t{}\n",
        r.precision, r.recall, r.f1, r.matched, r.pred_total, r.gold_total
    )
}
