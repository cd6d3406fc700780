//! Nine-way multinomial logistic regression over sparse features.

use std::collections::BTreeMap;

use thiserror::Error;

use super::FeatureVector;
use crate::actions::ActionLabel;

const CLASSES: usize = 9;
const HEADER: &str = "# amr-maxent v1";

type Row = [f64; CLASSES];

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub l2: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
    pub initial_step: f64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            l2: 1.0,
            max_epochs: 500,
            tolerance: 1e-4,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MaxentError {
    #[error("no training data")]
    Empty,
    #[error("loss became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("l2 strength must be finite and non-negative, got {0}")]
    BadL2(f64),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// Training instances with features interned to column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    vocab: BTreeMap<String, usize>,
    rows: Vec<(Vec<(usize, f64)>, usize)>,
}

impl Dataset {
    pub fn new(data: &[(FeatureVector, ActionLabel)]) -> Dataset {
        let mut vocab = BTreeMap::new();
        for (f, _) in data {
            for k in f.keys() {
                if !vocab.contains_key(k) {
                    let id = vocab.len();
                    vocab.insert(k.clone(), id);
                }
            }
        }
        let rows = data
            .iter()
            .map(|(f, y)| (f.iter().map(|(k, &v)| (vocab[k], v)).collect(), y.index()))
            .collect();
        Dataset { vocab, rows }
    }

    pub fn features(&self) -> usize {
        self.vocab.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn softmax(scores: &Row) -> Row {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; CLASSES];
    let mut z = 0.0;
    for k in 0..CLASSES {
        p[k] = (scores[k] - m).exp();
        z += p[k];
    }
    for v in &mut p {
        *v /= z;
    }
    p
}

fn row_scores(weights: &[Row], x: &[(usize, f64)]) -> Row {
    let mut s = [0.0; CLASSES];
    for &(f, v) in x {
        for k in 0..CLASSES {
            s[k] += v * weights[f][k];
        }
    }
    s
}

/// Summed negative log-likelihood plus `l2 / 2 * |w|^2`, and its gradient.
pub fn loss_and_gradient(weights: &[Row], data: &Dataset, l2: f64) -> (f64, Vec<Row>) {
    let mut loss = 0.0;
    let mut grad: Vec<Row> = weights
        .iter()
        .map(|w| {
            let mut g = [0.0; CLASSES];
            for k in 0..CLASSES {
                g[k] = l2 * w[k];
                loss += 0.5 * l2 * w[k] * w[k];
            }
            g
        })
        .collect();
    for (x, y) in &data.rows {
        let s = row_scores(weights, x);
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += log_z - s[*y];
        let p = softmax(&s);
        for &(f, v) in x {
            for k in 0..CLASSES {
                let target = if k == *y { 1.0 } else { 0.0 };
                grad[f][k] += v * (p[k] - target);
            }
        }
    }
    (loss, grad)
}

fn norm(g: &[Row]) -> f64 {
    g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Trained classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxentModel {
    vocab: BTreeMap<String, usize>,
    weights: Vec<Row>,
    pub l2: f64,
    /// Iterations used by training (0 for a loaded model).
    pub iterations: usize,
}

impl MaxentModel {
    /// Unnormalised class scores; unseen features contribute nothing.
    pub fn scores(&self, f: &FeatureVector) -> Row {
        let mut s = [0.0; CLASSES];
        for (k, v) in f {
            if let Some(&i) = self.vocab.get(k) {
                for (sc, w) in s.iter_mut().zip(&self.weights[i]) {
                    *sc += v * w;
                }
            }
        }
        s
    }

    pub fn probabilities(&self, f: &FeatureVector) -> Row {
        softmax(&self.scores(f))
    }

    /// Labels by descending probability (ties in canonical label order).
    pub fn ranked(&self, f: &FeatureVector) -> Vec<(ActionLabel, f64)> {
        let p = self.probabilities(f);
        let mut out: Vec<(ActionLabel, f64)> = ActionLabel::ALL
            .iter()
            .map(|&a| (a, p[a.index()]))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.index().cmp(&b.0.index())));
        out
    }

    pub fn predict(&self, f: &FeatureVector) -> ActionLabel {
        self.ranked(f)[0].0
    }

    pub fn weight(&self, feature: &str, label: ActionLabel) -> f64 {
        self.vocab
            .get(feature)
            .map_or(0.0, |&i| self.weights[i][label.index()])
    }

    /// `feature TAB label TAB weight`, features sorted, zero weights omitted.
    pub fn serialize(&self) -> String {
        let mut out = format!("{HEADER}\nl2\t{}\n", self.l2);
        for (name, &i) in &self.vocab {
            for a in ActionLabel::ALL {
                let w = self.weights[i][a.index()];
                if w != 0.0 {
                    out.push_str(&format!("{name}\t{a}\t{w}\n"));
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<MaxentModel, MaxentError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, msg: &str| MaxentError::Format {
            line: line + 1,
            msg: msg.to_string(),
        };
        match lines.next() {
            Some((_, h)) if h == HEADER => {}
            _ => return Err(err(0, "missing model header")),
        }
        let l2 = match lines.next() {
            Some((i, l)) => l
                .strip_prefix("l2\t")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| err(i, "expected `l2 TAB value`"))?,
            None => return Err(err(1, "missing l2 line")),
        };
        let mut vocab = BTreeMap::new();
        let mut weights: Vec<Row> = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [name, label, w] = fields.as_slice() else {
                return Err(err(i, "expected `feature TAB label TAB weight`"));
            };
            let label: ActionLabel = label.parse().map_err(|_| err(i, "unknown label"))?;
            let w: f64 = w
                .parse()
                .ok()
                .filter(|w: &f64| w.is_finite())
                .ok_or_else(|| err(i, "bad weight"))?;
            let idx = *vocab.entry(name.to_string()).or_insert_with(|| {
                weights.push([0.0; CLASSES]);
                weights.len() - 1
            });
            weights[idx][label.index()] = w;
        }
        Ok(MaxentModel {
            vocab,
            weights,
            l2,
            iterations: 0,
        })
    }
}

/// Full-batch gradient descent. A step that raises the loss is rejected and
/// the step size halved; an accepted step grows it by 10%. Stops when the
/// gradient norm drops below the tolerance or after `max_epochs` steps.
pub fn train(
    data: &[(FeatureVector, ActionLabel)],
    config: &TrainConfig,
) -> Result<MaxentModel, MaxentError> {
    if data.is_empty() {
        return Err(MaxentError::Empty);
    }
    if !(config.l2.is_finite() && config.l2 >= 0.0) {
        return Err(MaxentError::BadL2(config.l2));
    }
    let ds = Dataset::new(data);
    let mut w: Vec<Row> = vec![[0.0; CLASSES]; ds.features()];
    let (mut loss, mut grad) = loss_and_gradient(&w, &ds, config.l2);
    let mut step = config.initial_step;
    let mut iterations = 0;
    while iterations < config.max_epochs && norm(&grad) >= config.tolerance {
        iterations += 1;
        let candidate: Vec<Row> = w
            .iter()
            .zip(&grad)
            .map(|(wr, gr)| {
                let mut r = *wr;
                for k in 0..CLASSES {
                    r[k] -= step * gr[k];
                }
                r
            })
            .collect();
        let (l, g) = loss_and_gradient(&candidate, &ds, config.l2);
        if !l.is_finite() {
            return Err(MaxentError::NonFinite {
                iteration: iterations,
            });
        }
        if l <= loss {
            w = candidate;
            loss = l;
            grad = g;
            step *= 1.1;
        } else {
            step *= 0.5;
        }
    }
    Ok(MaxentModel {
        vocab: ds.vocab,
        weights: w,
        l2: config.l2,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fv(pairs: &[(&str, f64)]) -> FeatureVector {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let data: Vec<(FeatureVector, ActionLabel)> = (0..5)
                .map(|_| {
                    let mut f = FeatureVector::new();
                    for j in 0..4 {
                        if rng.gen_bool(0.6) {
                            f.insert(format!("f{j}"), rng.gen_range(-2.0..2.0));
                        }
                    }
                    f.insert("bias".to_string(), 1.0);
                    (f, ActionLabel::from_index(rng.gen_range(0..9)))
                })
                .collect();
            let ds = Dataset::new(&data);
            let w: Vec<Row> = (0..ds.features())
                .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
                .collect();
            let l2 = rng.gen_range(0.0..2.0);
            let (_, g) = loss_and_gradient(&w, &ds, l2);
            let h = 1e-5;
            for f in 0..ds.features() {
                for k in 0..CLASSES {
                    let mut plus = w.clone();
                    plus[f][k] += h;
                    let mut minus = w.clone();
                    minus[f][k] -= h;
                    let num = (loss_and_gradient(&plus, &ds, l2).0
                        - loss_and_gradient(&minus, &ds, l2).0)
                        / (2.0 * h);
                    let rel = (num - g[f][k]).abs() / num.abs().max(g[f][k].abs()).max(1e-8);
                    assert!(
                        rel < 1e-5 || (num - g[f][k]).abs() < 1e-9,
                        "{num} vs {}",
                        g[f][k]
                    );
                }
            }
        }
    }

    #[test]
    fn separable_data_is_fit() {
        let data: Vec<(FeatureVector, ActionLabel)> = (0..20)
            .map(|i| {
                let x = i as f64 / 10.0 - 1.0 + 0.05;
                let y = if x > 0.0 {
                    ActionLabel::Verb
                } else {
                    ActionLabel::None
                };
                (fv(&[("x", x), ("bias", 1.0)]), y)
            })
            .collect();
        let m = train(&data, &TrainConfig::default()).unwrap();
        assert!(m.iterations <= 500);
        assert!(data.iter().all(|(f, y)| m.predict(f) == *y));
    }

    #[test]
    fn single_example_is_learned() {
        // Under the default L2 strength one indicator feature caps the
        // probability well below 0.9, so the prior is weakened here.
        let data = vec![(fv(&[("w=dog", 1.0)]), ActionLabel::Identity)];
        let config = TrainConfig {
            l2: 0.01,
            ..TrainConfig::default()
        };
        let m = train(&data, &config).unwrap();
        assert!(m.probabilities(&data[0].0)[ActionLabel::Identity.index()] > 0.9);
    }

    #[test]
    fn distribution_properties() {
        let data = vec![
            (fv(&[("a", 1.0)]), ActionLabel::Identity),
            (fv(&[("b", 1.0)]), ActionLabel::Dict),
        ];
        let m = train(&data, &TrainConfig::default()).unwrap();
        let f = fv(&[("a", 1.0), ("unseen", 3.0)]);
        let p = m.probabilities(&f);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(m.scores(&f), m.scores(&fv(&[("a", 1.0)])));
        let mut shifted = m.scores(&f);
        for v in &mut shifted {
            *v += 3.5;
        }
        let q = softmax(&shifted);
        assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn text_round_trip_and_errors() {
        let data = vec![
            (fv(&[("a", 1.0), ("bias", 1.0)]), ActionLabel::Identity),
            (fv(&[("b", 0.5), ("bias", 1.0)]), ActionLabel::Dict),
        ];
        let m = train(&data, &TrainConfig::default()).unwrap();
        let text = m.serialize();
        let back = MaxentModel::parse(&text).unwrap();
        assert_eq!(back.serialize(), text);
        for (f, _) in &data {
            assert_eq!(back.scores(f), m.scores(f));
        }
        assert_eq!(train(&[], &TrainConfig::default()), Err(MaxentError::Empty));
        assert!(MaxentModel::parse("nope").is_err());
        assert!(MaxentModel::parse(&format!("{HEADER}\nl2\t1\na\tFOO\t1\n")).is_err());
    }
}
