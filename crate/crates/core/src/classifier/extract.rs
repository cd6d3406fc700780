//! Gold fragments from aligned pairs, and the per-token training labels they imply.

use std::collections::BTreeSet;

use thiserror::Error;

use super::DictTable;
use crate::actions::{
    applicable_actions, intended_action, most_reliable, ActionLabel, LabeledSpan, ReliabilityTable,
};
use crate::align::Alignment;
use crate::corpus::{AnnotatedSentence, LexicalResources, TrainingPair};
use crate::graph::{AmrFragment, AmrGraph, NodeId, Span};

/// A gold fragment together with the graph nodes it was cut from.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedFragment {
    pub nodes: Vec<NodeId>,
    pub fragment: AmrFragment,
}

impl InducedFragment {
    /// Graph node that heads the fragment.
    pub fn head_node(&self) -> NodeId {
        self.nodes[self.fragment.head().0]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Induction {
    /// Node-disjoint fragments ordered by span.
    pub fragments: Vec<InducedFragment>,
    /// Nodes lost to overlapping fragments.
    pub dropped: Vec<NodeId>,
}

impl Induction {
    /// Fragment index of every graph node, if kept.
    pub fn owner(&self, graph: &AmrGraph) -> Vec<Option<usize>> {
        let mut out = vec![None; graph.len()];
        for (i, f) in self.fragments.iter().enumerate() {
            for n in &f.nodes {
                out[n.0] = Some(i);
            }
        }
        out
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Cuts a graph into per-span fragments according to a total alignment.
///
/// Nodes joined by an edge and aligned to the same token share a fragment,
/// as do `name` and `date-entity` nodes and their constants. A fragment's
/// span runs from its leftmost to its rightmost aligned token and its head is
/// the member nearest the graph root. When spans overlap the larger fragment
/// is kept.
pub fn induce_fragments(graph: &AmrGraph, alignment: &[usize]) -> Induction {
    let n = graph.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for e in graph.edges() {
        let (s, t) = (e.source.0, e.target.0);
        let structured = graph.node(e.target).kind.is_constant()
            && matches!(graph.node(e.source).title.as_str(), "name" | "date-entity");
        if alignment[s] == alignment[t] || structured {
            union(&mut parent, s, t);
        }
    }
    let depth = graph.depths();
    let mut groups: Vec<Vec<NodeId>> = Vec::new();
    let mut group_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if group_of[r] == usize::MAX {
            group_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of[r]].push(NodeId(i));
    }
    let mut candidates: Vec<(Vec<NodeId>, NodeId, Span)> = groups
        .into_iter()
        .map(|nodes| {
            let head = *nodes
                .iter()
                .min_by_key(|m| (depth[m.0], m.0))
                .expect("non-empty group");
            let lo = nodes.iter().map(|m| alignment[m.0]).min().unwrap_or(0);
            let hi = nodes.iter().map(|m| alignment[m.0]).max().unwrap_or(0);
            (nodes, head, Span::new(lo, hi + 1))
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.0.len()
            .cmp(&a.0.len())
            .then(a.2.start.cmp(&b.2.start))
            .then(a.1.cmp(&b.1))
    });
    let mut out = Induction::default();
    for (nodes, head, span) in candidates {
        if out
            .fragments
            .iter()
            .any(|f| f.fragment.span.overlaps(&span))
        {
            out.dropped.extend(nodes);
            continue;
        }
        let g = graph
            .induced(&nodes, head)
            .expect("a connected group induces a valid graph");
        // `induced` keeps member order, so local ids index into `nodes`.
        out.fragments.push(InducedFragment {
            nodes,
            fragment: AmrFragment::new(g, span),
        });
    }
    out.fragments.sort_by_key(|f| f.fragment.span.start);
    out.dropped.sort();
    out
}

/// A token with its training label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabeledToken {
    /// Position of the sentence in the corpus.
    pub sentence: usize,
    pub index: usize,
    pub label: ActionLabel,
}

/// Per-sentence result of label extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceLabels {
    pub labels: Vec<ActionLabel>,
    /// Gold fragments with the action they are attributed to, for reliability
    /// estimation.
    pub spans: Vec<LabeledSpan>,
    pub induction: Induction,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("pair {id} has no alignment")]
    MissingAlignment { id: String },
    #[error("alignment of pair {id} does not cover every node")]
    PartialAlignment { id: String },
    #[error("alignment of pair {id} points past the sentence")]
    TokenOutOfRange { id: String },
}

pub fn pair_tokens(pair: &TrainingPair) -> Result<Vec<usize>, ExtractError> {
    let id = pair.id().to_string();
    let a: &Alignment = pair
        .alignment
        .as_ref()
        .ok_or_else(|| ExtractError::MissingAlignment { id: id.clone() })?;
    let toks = a
        .tokens(&pair.graph)
        .filter(|_| a.is_total(&pair.graph))
        .ok_or_else(|| ExtractError::PartialAlignment { id: id.clone() })?;
    if toks.iter().any(|&t| t >= pair.sentence.len()) {
        return Err(ExtractError::TokenOutOfRange { id });
    }
    Ok(toks)
}

/// Labels every token of one aligned pair.
///
/// Span-typed actions label every token of their span; a fragment whose best
/// action is token-level but that spans several tokens falls back to DICT.
pub fn label_sentence(
    sentence: &AnnotatedSentence,
    graph: &AmrGraph,
    alignment: &[usize],
    resources: &LexicalResources,
    table: &ReliabilityTable,
) -> SentenceLabels {
    let induction = induce_fragments(graph, alignment);
    let mut labels = vec![ActionLabel::None; sentence.len()];
    let mut spans = Vec::new();
    for f in &induction.fragments {
        let span = f.fragment.span;
        let mut applicable = applicable_actions(Some(&f.fragment), span, sentence, resources);
        if span.len() > 1 {
            applicable.retain(|a| a.is_span_action());
        }
        let label = most_reliable(&applicable, table).expect("DICT is always applicable");
        for i in span.indices() {
            labels[i] = label;
        }
        spans.push(LabeledSpan {
            span,
            gold: Some(f.fragment.clone()),
            label: intended_action(&f.fragment, span, sentence, resources, table),
        });
    }
    SentenceLabels {
        labels,
        spans,
        induction,
    }
}

/// Labelled tokens and the span dictionary of an aligned corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub tokens: Vec<LabeledToken>,
    pub sentences: Vec<SentenceLabels>,
    pub dict: DictTable,
}

impl Extraction {
    /// Every gold span paired with its sentence, for reliability estimation.
    pub fn labeled_spans<'a>(
        &'a self,
        pairs: &'a [TrainingPair],
    ) -> impl Iterator<Item = (&'a AnnotatedSentence, &'a LabeledSpan)> + 'a {
        pairs
            .iter()
            .zip(&self.sentences)
            .flat_map(|(p, s)| s.spans.iter().map(move |l| (&p.sentence, l)))
    }

    pub fn label_counts(&self) -> [usize; 9] {
        let mut c = [0; 9];
        for t in &self.tokens {
            c[t.label.index()] += 1;
        }
        c
    }
}

/// Labels every token of an aligned corpus and memorises every gold span.
pub fn extract_training(
    pairs: &[TrainingPair],
    resources: &LexicalResources,
    table: &ReliabilityTable,
) -> Result<Extraction, ExtractError> {
    let mut tokens = Vec::new();
    let mut sentences = Vec::with_capacity(pairs.len());
    let mut dict = DictTable::default();
    for (si, pair) in pairs.iter().enumerate() {
        let toks = pair_tokens(pair)?;
        let labeled = label_sentence(&pair.sentence, &pair.graph, &toks, resources, table);
        for f in &labeled.induction.fragments {
            dict.add(&pair.sentence.span_key(f.fragment.span), &f.fragment.graph);
        }
        tokens.extend(
            labeled
                .labels
                .iter()
                .enumerate()
                .map(|(index, &label)| LabeledToken {
                    sentence: si,
                    index,
                    label,
                }),
        );
        sentences.push(labeled);
    }
    Ok(Extraction {
        tokens,
        sentences,
        dict,
    })
}

/// Distinct labels in a corpus, for reports.
pub fn labels_used(tokens: &[LabeledToken]) -> BTreeSet<ActionLabel> {
    tokens.iter().map(|t| t.label).collect()
}
