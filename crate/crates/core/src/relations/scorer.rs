//! Linear edge scorer and its averaged-perceptron trainer.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::CandidateEdge;
use crate::classifier::{induce_fragments, pair_tokens, ExtractError, Induction};
use crate::corpus::{AnnotatedSentence, TrainingPair};
use crate::graph::{AmrFragment, AmrGraph, NodeKind};

/// Labels offered for a source title never seen in training.
pub const GENERIC_LABELS: [&str; 9] = [
    "ARG0", "ARG1", "ARG2", "ARG3", "ARG4", "mod", "op1", "poss", "domain",
];

const HEADER: &str = "# amr-edge-scorer v1";
const LABELS_PREFIX: &str = "@labels";
/// Score subtracted per token of distance between head tokens.
const DISTANCE_PENALTY: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct ScorerConfig {
    pub epochs: usize,
}

impl Default for ScorerConfig {
    fn default() -> ScorerConfig {
        ScorerConfig { epochs: 10 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScorerError {
    #[error("no training pairs")]
    Empty,
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeScorer {
    /// feature -> label -> weight
    weights: BTreeMap<String, BTreeMap<String, f64>>,
    /// source head title -> labels seen leaving it in training
    labels: BTreeMap<String, BTreeSet<String>>,
}

impl EdgeScorer {
    pub fn candidate_labels(&self, source_title: &str) -> Vec<String> {
        match self.labels.get(source_title) {
            Some(ls) => ls.iter().cloned().collect(),
            None => GENERIC_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Linear score of `label` given label-independent features.
    pub fn weight_sum(&self, features: &[String], label: &str) -> f64 {
        features
            .iter()
            .filter_map(|f| self.weights.get(f)?.get(label))
            .sum()
    }

    pub fn serialize(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for (title, ls) in &self.labels {
            let ls: Vec<&str> = ls.iter().map(String::as_str).collect();
            out.push_str(&format!("{LABELS_PREFIX}\t{title}\t{}\n", ls.join(" ")));
        }
        for (f, by_label) in &self.weights {
            for (l, w) in by_label {
                if *w != 0.0 {
                    out.push_str(&format!("{f}\t{l}\t{w}\n"));
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<EdgeScorer, ScorerError> {
        let err = |line: usize, msg: &str| ScorerError::Format {
            line: line + 1,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == HEADER => {}
            _ => return Err(err(0, "missing scorer header")),
        }
        let mut s = EdgeScorer::default();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                [LABELS_PREFIX, title, ls] => {
                    s.labels.insert(
                        title.to_string(),
                        ls.split(' ')
                            .filter(|l| !l.is_empty())
                            .map(String::from)
                            .collect(),
                    );
                }
                [f, l, w] => {
                    let w: f64 = w
                        .parse()
                        .ok()
                        .filter(|w: &f64| w.is_finite())
                        .ok_or_else(|| err(i, "bad weight"))?;
                    s.weights
                        .entry(f.to_string())
                        .or_default()
                        .insert(l.to_string(), w);
                }
                _ => return Err(err(i, "expected `feature TAB label TAB weight`")),
            }
        }
        Ok(s)
    }
}

fn head_token(f: &AmrFragment, sentence: &AnnotatedSentence) -> usize {
    sentence.span_head(f.span)
}

/// Dependency path between two tokens: `U:rel` steps up from `from` to the
/// common ancestor, then `D:rel` steps down to `to`. Long paths collapse.
pub fn dependency_path(sentence: &AnnotatedSentence, from: usize, to: usize) -> String {
    let chain = |mut t: usize| {
        let mut out = vec![t];
        while let Some(h) = sentence.parent(t).head {
            out.push(h);
            t = h;
        }
        out
    };
    let (up, down) = (chain(from), chain(to));
    let Some((i, j)) = up
        .iter()
        .enumerate()
        .find_map(|(i, t)| down.iter().position(|d| d == t).map(|j| (i, j)))
    else {
        return "none".into();
    };
    if i + j > 4 {
        return "long".into();
    }
    let mut steps: Vec<String> = up[..i]
        .iter()
        .map(|&t| format!("U:{}", sentence.parent(t).relation))
        .collect();
    steps.extend(
        down[..j]
            .iter()
            .rev()
            .map(|&t| format!("D:{}", sentence.parent(t).relation)),
    );
    if steps.is_empty() {
        "self".into()
    } else {
        steps.join(">")
    }
}

/// Label-independent features of an edge from `src` to `tgt`.
pub fn edge_features(
    src: &AmrFragment,
    tgt: &AmrFragment,
    sentence: &AnnotatedSentence,
) -> Vec<String> {
    let (a, b) = (head_token(src, sentence), head_token(tgt, sentence));
    let dist = a.abs_diff(b);
    let bucket = match dist {
        0..=3 => dist.to_string(),
        4..=6 => "4-6".into(),
        _ => "7+".into(),
    };
    let (st, tt) = (src.head_title(), tgt.head_title());
    let (sp, tp) = (&sentence.token(a).pos, &sentence.token(b).pos);
    let path = dependency_path(sentence, a, b);
    let mut out = vec![
        "bias".to_string(),
        format!("src={st}"),
        format!("tgt={tt}"),
        format!("pair={st}>{tt}"),
        format!("path={path}"),
        format!("src+path={st}+{path}"),
        format!("dir={}", if a <= b { "R" } else { "L" }),
        format!("dist={bucket}"),
        format!("pos={sp}>{tp}"),
        format!("tgtword={}", sentence.token(b).lower),
    ];
    if tgt.graph.node(tgt.head()).kind != NodeKind::Concept {
        out.push("tgt_constant".into());
    }
    out
}

fn distance(src: &AmrFragment, tgt: &AmrFragment, sentence: &AnnotatedSentence) -> f64 {
    head_token(src, sentence).abs_diff(head_token(tgt, sentence)) as f64
}

/// Every labeled candidate edge between fragment heads. Constant heads are
/// never sources.
pub fn score_edges(
    fragments: &[AmrFragment],
    sentence: &AnnotatedSentence,
    scorer: &EdgeScorer,
) -> Vec<CandidateEdge> {
    let mut out = Vec::new();
    for (i, src) in fragments.iter().enumerate() {
        if src.graph.node(src.head()).kind != NodeKind::Concept {
            continue;
        }
        for (j, tgt) in fragments.iter().enumerate() {
            if i == j {
                continue;
            }
            let feats = edge_features(src, tgt, sentence);
            let penalty = DISTANCE_PENALTY * distance(src, tgt, sentence);
            for label in scorer.candidate_labels(src.head_title()) {
                let score = scorer.weight_sum(&feats, &label) - penalty;
                out.push(CandidateEdge {
                    source: i,
                    target: j,
                    label,
                    score,
                });
            }
        }
    }
    out
}

/// Gold `(source fragment, target fragment, label)` triples: graph edges
/// whose endpoints fall in different kept fragments.
pub fn gold_edges(graph: &AmrGraph, induction: &Induction) -> BTreeSet<(usize, usize, String)> {
    let owner = induction.owner(graph);
    graph
        .edges()
        .iter()
        .filter_map(|e| match (owner[e.source.0], owner[e.target.0]) {
            (Some(i), Some(j)) if i != j => Some((i, j, e.label.clone())),
            _ => None,
        })
        .collect()
}

/// Averaged perceptron over candidate edges on gold fragments: a gold edge
/// scoring at or below zero is pushed up, a non-gold edge at or above zero
/// is pushed down.
pub fn train_scorer(
    pairs: &[TrainingPair],
    config: &ScorerConfig,
) -> Result<EdgeScorer, ScorerError> {
    if pairs.is_empty() {
        return Err(ScorerError::Empty);
    }
    struct Example {
        fragments: Vec<AmrFragment>,
        gold: BTreeSet<(usize, usize, String)>,
    }
    let mut labels: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut examples = Vec::with_capacity(pairs.len());
    for p in pairs {
        let toks = pair_tokens(p)?;
        let ind = induce_fragments(&p.graph, &toks);
        let gold = gold_edges(&p.graph, &ind);
        let fragments: Vec<AmrFragment> = ind.fragments.into_iter().map(|f| f.fragment).collect();
        for (i, _, l) in &gold {
            labels
                .entry(fragments[*i].head_title().to_string())
                .or_default()
                .insert(l.clone());
        }
        examples.push(Example { fragments, gold });
    }
    let mut scorer = EdgeScorer {
        weights: BTreeMap::new(),
        labels,
    };
    // Running sums for averaging: weight = w - u / c.
    let mut u: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut c = 1.0;
    for _ in 0..config.epochs {
        for (ex, pair) in examples.iter().zip(pairs) {
            let s = &pair.sentence;
            for (i, src) in ex.fragments.iter().enumerate() {
                if src.graph.node(src.head()).kind != NodeKind::Concept {
                    continue;
                }
                for (j, tgt) in ex.fragments.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let feats = edge_features(src, tgt, s);
                    let penalty = DISTANCE_PENALTY * distance(src, tgt, s);
                    for label in scorer.candidate_labels(src.head_title()) {
                        let score = scorer.weight_sum(&feats, &label) - penalty;
                        let is_gold = ex.gold.contains(&(i, j, label.clone()));
                        let delta = match (is_gold, score) {
                            (true, s) if s <= 0.0 => 1.0,
                            (false, s) if s >= 0.0 => -1.0,
                            _ => 0.0,
                        };
                        if delta != 0.0 {
                            for f in &feats {
                                *scorer
                                    .weights
                                    .entry(f.clone())
                                    .or_default()
                                    .entry(label.clone())
                                    .or_insert(0.0) += delta;
                                *u.entry((f.clone(), label.clone())).or_insert(0.0) += c * delta;
                            }
                        }
                        c += 1.0;
                    }
                }
            }
        }
    }
    for ((f, l), acc) in u {
        let w = scorer
            .weights
            .get_mut(&f)
            .and_then(|m| m.get_mut(&l))
            .expect("every running sum has a weight");
        *w -= acc / c;
    }
    Ok(scorer)
}
