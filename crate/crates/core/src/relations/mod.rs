//! Relation identification: linking fragments into one graph.
//!
//! Candidate edges between fragment heads are scored by a linear model and
//! selected greedily, Kruskal style, under an ARG0-ARG5 uniqueness
//! constraint.

mod scorer;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::corpus::AnnotatedSentence;
use crate::graph::{AmrFragment, AmrGraph, GraphBuilder, GraphError, NodeId, NodeKind};

pub use scorer::{
    dependency_path, edge_features, gold_edges, score_edges, train_scorer, EdgeScorer,
    ScorerConfig, ScorerError, GENERIC_LABELS,
};

/// A labeled edge from the head of fragment `source` to the head of `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateEdge {
    pub source: usize,
    pub target: usize,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum RelationError {
    #[error("no fragments to connect")]
    NoFragments,
    #[error("edge {from}->{to} refers to a missing fragment")]
    MissingFragment { from: usize, to: usize },
    #[error("edge from fragment {0} starts at a constant")]
    ConstantSource(usize),
    #[error("edge {0}->{0} is a self loop")]
    SelfLoop(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Labels that a node may carry at most once.
pub fn is_functional(label: &str) -> bool {
    matches!(label, "ARG0" | "ARG1" | "ARG2" | "ARG3" | "ARG4" | "ARG5")
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn edge_order(a: &CandidateEdge, b: &CandidateEdge) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.label.cmp(&b.label))
        .then(a.source.cmp(&b.source))
        .then(a.target.cmp(&b.target))
}

/// Indices into `edges` chosen by the constrained greedy procedure.
///
/// Edges are visited best first (score, then label, then endpoints). An edge
/// is taken when it joins two components, or when its score is positive;
/// either way it must not repeat a fragment pair or give a source a second
/// copy of a functional label. If that leaves the fragments disconnected, a
/// second pass joins components ignoring the functional constraint.
pub fn select_edges(fragment_count: usize, edges: &[CandidateEdge]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| edge_order(&edges[a], &edges[b]));
    let mut parent: Vec<usize> = (0..fragment_count).collect();
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut functional: BTreeSet<(usize, String)> = BTreeSet::new();
    let mut chosen = Vec::new();
    let mut components = fragment_count;
    for relaxed in [false, true] {
        for &i in &order {
            if relaxed && components == 1 {
                break;
            }
            let e = &edges[i];
            let pair = (e.source.min(e.target), e.source.max(e.target));
            if pairs.contains(&pair) {
                continue;
            }
            if !relaxed
                && is_functional(&e.label)
                && functional.contains(&(e.source, e.label.clone()))
            {
                continue;
            }
            let (a, b) = (find(&mut parent, e.source), find(&mut parent, e.target));
            let joins = a != b;
            if joins || (!relaxed && e.score > 0.0) {
                if joins {
                    parent[a.max(b)] = a.min(b);
                    components -= 1;
                }
                pairs.insert(pair);
                if is_functional(&e.label) {
                    functional.insert((e.source, e.label.clone()));
                }
                chosen.push(i);
            }
        }
    }
    chosen
}

/// Joins fragments into one rooted graph.
///
/// The root is the head of the concept-headed fragment whose head token is
/// shallowest in the dependency tree (leftmost on ties). Components that no
/// edge can join are gathered under an `and` node.
pub fn connect(
    fragments: &[AmrFragment],
    edges: &[CandidateEdge],
    sentence: &AnnotatedSentence,
) -> Result<AmrGraph, RelationError> {
    if fragments.is_empty() {
        return Err(RelationError::NoFragments);
    }
    for e in edges {
        if e.source >= fragments.len() || e.target >= fragments.len() {
            return Err(RelationError::MissingFragment {
                from: e.source,
                to: e.target,
            });
        }
        if e.source == e.target {
            return Err(RelationError::SelfLoop(e.source));
        }
        let f = &fragments[e.source];
        if f.graph.node(f.head()).kind != NodeKind::Concept {
            return Err(RelationError::ConstantSource(e.source));
        }
    }
    let mut b = GraphBuilder::new();
    let heads: Vec<NodeId> = fragments
        .iter()
        .map(|f| b.append(&f.graph)[f.head().0])
        .collect();
    let chosen = select_edges(fragments.len(), edges);
    let mut parent: Vec<usize> = (0..fragments.len()).collect();
    for &i in &chosen {
        let e = &edges[i];
        b.edge(heads[e.source], heads[e.target], &e.label);
        let (x, y) = (find(&mut parent, e.source), find(&mut parent, e.target));
        parent[x.max(y)] = x.min(y);
    }
    let concept_heads: Vec<usize> = (0..fragments.len())
        .filter(|&i| fragments[i].graph.node(fragments[i].head()).kind == NodeKind::Concept)
        .collect();
    let pick = |candidates: &[usize]| -> Option<usize> {
        candidates.iter().copied().min_by_key(|&i| {
            let span = fragments[i].span;
            let tok = if span.end <= sentence.len() {
                sentence.span_head(span)
            } else {
                span.start
            };
            let depth = if tok < sentence.len() {
                sentence.depth(tok)
            } else {
                usize::MAX
            };
            (depth, span.start, i)
        })
    };
    let roots: BTreeSet<usize> = (0..fragments.len()).map(|i| find(&mut parent, i)).collect();
    let root = if roots.len() == 1 {
        heads[pick(&concept_heads).unwrap_or(0)]
    } else {
        let and = b.concept("and");
        let mut k = 0;
        for comp in &roots {
            let members: Vec<usize> = (0..fragments.len())
                .filter(|&i| find(&mut parent, i) == *comp)
                .collect();
            let concepts: Vec<usize> = members
                .iter()
                .copied()
                .filter(|i| concept_heads.contains(i))
                .collect();
            let top = pick(&concepts).unwrap_or(members[0]);
            k += 1;
            b.edge(and, heads[top], &format!("op{k}"));
        }
        and
    };
    Ok(b.build(root)?)
}
