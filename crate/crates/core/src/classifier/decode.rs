//! Turning per-token action labels into fragments.

use super::{featurize, DictTable, MaxentModel};
use crate::actions::{execute, ActionLabel};
use crate::corpus::{AnnotatedSentence, LexicalResources};
use crate::graph::{AmrFragment, Span};

/// Counts of the fallback steps taken while decoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub spans: usize,
    pub dict_misses: usize,
    pub action_failures: usize,
    pub fallbacks: usize,
    pub abandoned: usize,
}

impl DecodeStats {
    pub fn add(&mut self, o: &DecodeStats) {
        self.spans += o.spans;
        self.dict_misses += o.dict_misses;
        self.action_failures += o.action_failures;
        self.fallbacks += o.fallbacks;
        self.abandoned += o.abandoned;
    }
}

/// Groups labels into spans: adjacent tokens with the same span action
/// merge, token-level labels stay single. NONE tokens are skipped.
pub fn collapse(labels: &[ActionLabel]) -> Vec<(Span, ActionLabel)> {
    let mut out: Vec<(Span, ActionLabel)> = Vec::new();
    for (i, &a) in labels.iter().enumerate() {
        if a == ActionLabel::None {
            continue;
        }
        if let Some((span, last)) = out.last_mut() {
            if *last == a && a.is_span_action() && span.end == i {
                span.end = i + 1;
                continue;
            }
        }
        out.push((Span::single(i), a));
    }
    out
}

fn run_label(
    label: ActionLabel,
    span: Span,
    sentence: &AnnotatedSentence,
    resources: &LexicalResources,
    dict: &DictTable,
    stats: &mut DecodeStats,
) -> Option<Vec<AmrFragment>> {
    // Token-level actions over a multi-token span run token by token.
    let pieces: Vec<Span> = if !label.is_span_action() && span.len() > 1 {
        span.indices().map(Span::single).collect()
    } else {
        vec![span]
    };
    let mut out = Vec::new();
    for piece in pieces {
        match execute(label, piece, sentence, resources, dict) {
            Ok(Some(f)) => out.push(f),
            Ok(None) => {}
            Err(crate::actions::ActionError::DictMiss { .. }) => {
                stats.dict_misses += 1;
                return None;
            }
            Err(_) => {
                stats.action_failures += 1;
                return None;
            }
        }
    }
    Some(out)
}

/// Executes labeled spans. When an action fails the span backs off through
/// `ranking` (labels by descending summed log-probability over the span),
/// stopping at NONE; without a ranking the span is dropped.
pub fn decode_labels(
    sentence: &AnnotatedSentence,
    labels: &[ActionLabel],
    ranking: Option<&dyn Fn(Span) -> Vec<ActionLabel>>,
    dict: &DictTable,
    resources: &LexicalResources,
) -> (Vec<AmrFragment>, DecodeStats) {
    let mut stats = DecodeStats::default();
    let mut fragments = Vec::new();
    for (span, label) in collapse(labels) {
        stats.spans += 1;
        if let Some(f) = run_label(label, span, sentence, resources, dict, &mut stats) {
            fragments.extend(f);
            continue;
        }
        let Some(rank) = ranking else {
            stats.abandoned += 1;
            continue;
        };
        let mut done = false;
        for alt in rank(span).into_iter().filter(|&a| a != label) {
            if alt == ActionLabel::None {
                break;
            }
            stats.fallbacks += 1;
            if let Some(f) = run_label(alt, span, sentence, resources, dict, &mut stats) {
                fragments.extend(f);
                done = true;
                break;
            }
        }
        if !done {
            stats.abandoned += 1;
        }
    }
    fragments.sort_by_key(|f| f.span.start);
    (fragments, stats)
}

/// Per-token label distributions from the classifier.
pub fn predict_distributions(
    sentence: &AnnotatedSentence,
    model: &MaxentModel,
    dict: &DictTable,
    resources: &LexicalResources,
) -> Vec<[f64; 9]> {
    (0..sentence.len())
        .map(|i| model.probabilities(&featurize(i, sentence, resources, dict)))
        .collect()
}

/// Argmax label per token.
pub fn predict_labels(dists: &[[f64; 9]]) -> Vec<ActionLabel> {
    dists
        .iter()
        .map(|p| {
            let mut best = 0;
            for k in 1..9 {
                if p[k] > p[best] {
                    best = k;
                }
            }
            ActionLabel::from_index(best)
        })
        .collect()
}

/// Labels, collapses and executes a sentence with the classifier.
pub fn decode(
    sentence: &AnnotatedSentence,
    model: &MaxentModel,
    dict: &DictTable,
    resources: &LexicalResources,
) -> (Vec<AmrFragment>, DecodeStats) {
    let dists = predict_distributions(sentence, model, dict, resources);
    let labels = predict_labels(&dists);
    let rank = |span: Span| -> Vec<ActionLabel> {
        let mut scored: Vec<(ActionLabel, f64)> = ActionLabel::ALL
            .iter()
            .map(|&a| {
                let lp: f64 = span
                    .indices()
                    .map(|i| dists[i][a.index()].max(1e-300).ln())
                    .sum();
                (a, lp)
            })
            .collect();
        scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.index().cmp(&y.0.index())));
        scored.into_iter().map(|(a, _)| a).collect()
    };
    decode_labels(sentence, &labels, Some(&rank), dict, resources)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::extract::tests::fig1;
    use crate::classifier::label_sentence;
    use crate::corpus::{DepArc, TokenSpec};
    use crate::graph::parse_penman;
    use ActionLabel::*;

    #[test]
    fn collapse_rule() {
        assert_eq!(
            collapse(&[Name, Name, None, Identity, Identity, Dict, Dict]),
            vec![
                (Span::new(0, 2), Name),
                (Span::single(3), Identity),
                (Span::single(4), Identity),
                (Span::new(5, 7), Dict),
            ]
        );
        assert!(collapse(&[None, None]).is_empty());
    }

    #[test]
    fn fig1_oracle_labels_give_gold_fragments() {
        let (s, g, a) = fig1();
        let r = LexicalResources::from_frames_text("run run-01 5\n", "f").unwrap();
        let labeled = label_sentence(&s, &g, &a, &r, &Default::default());
        let (frags, stats) =
            decode_labels(&s, &labeled.labels, Option::None, &DictTable::default(), &r);
        assert_eq!(stats.abandoned, 0);
        assert_eq!(frags.len(), 5);
        for (f, gold) in frags.iter().zip(&labeled.induction.fragments) {
            assert_eq!(f.span, gold.fragment.span);
            assert!(f.same_graph(&gold.fragment));
        }
    }

    #[test]
    fn barack_obama_is_one_name() {
        let specs = [
            TokenSpec {
                text: "Barack",
                pos: "NNP",
                lemma: "Barack",
                ner: "PERSON",
            },
            TokenSpec {
                text: "Obama",
                pos: "NNP",
                lemma: "Obama",
                ner: "PERSON",
            },
        ];
        let deps = vec![
            DepArc {
                head: Some(1),
                dependent: 0,
                relation: "nn".into(),
            },
            DepArc {
                head: Option::None,
                dependent: 1,
                relation: "root".into(),
            },
        ];
        let s = AnnotatedSentence::new("b", &specs, deps, vec![]).unwrap();
        let (frags, _) = decode_labels(
            &s,
            &[Name, Name],
            Option::None,
            &DictTable::default(),
            &LexicalResources::default(),
        );
        assert_eq!(frags.len(), 1);
        assert!(crate::graph::is_isomorphic(
            &frags[0].graph,
            &parse_penman("(n / name :op1 \"Barack\" :op2 \"Obama\")").unwrap()
        ));
    }

    #[test]
    fn dict_miss_backs_off_down_the_ranking() {
        let (s, _, _) = fig1();
        let r = LexicalResources::default();
        let mut labels = vec![None; 8];
        labels[5] = Dict;
        let rank = |_: Span| vec![Dict, Identity, None, Lemma];
        let (frags, stats) = decode_labels(&s, &labels, Some(&rank), &DictTable::default(), &r);
        assert_eq!(frags.len(), 1);
        assert_eq!(frags[0].head_title(), "dog");
        assert_eq!(stats.dict_misses, 1);
        assert_eq!(stats.fallbacks, 1);
        // NONE ends the back-off.
        let rank = |_: Span| vec![Dict, None, Identity];
        let (frags, stats) = decode_labels(&s, &labels, Some(&rank), &DictTable::default(), &r);
        assert!(frags.is_empty());
        assert_eq!(stats.abandoned, 1);
    }
}
