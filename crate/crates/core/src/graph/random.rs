//! Random valid graphs for property tests and benchmarks.

use rand::Rng;

use super::{AmrGraph, GraphBuilder, NodeId};

const TITLES: [&str; 10] = [
    "dog", "cat", "run-01", "want-01", "he", "name", "city", "and", "person", "see-01",
];
const LABELS: [&str; 10] = [
    "ARG0", "ARG1", "ARG2", "mod", "name", "op1", "op2", "poss", "location", "time",
];
const STRINGS: [&str; 4] = ["Rover", "Paris", "New York", "-"];

/// A random rooted graph with 1 to `max_nodes` nodes.
///
/// A spanning tree hangs every node off an earlier concept; constants are
/// leaves. A few extra edges between concepts add re-entrancy and the odd cycle. Titles come
/// from a small vocabulary so repeats are common.
pub fn random_graph<R: Rng>(rng: &mut R, max_nodes: usize) -> AmrGraph {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let mut b = GraphBuilder::new();
    let mut concepts: Vec<NodeId> = Vec::new();
    let mut pairs = std::collections::BTreeSet::new();
    for i in 0..n {
        let roll: f64 = rng.gen();
        let id = if i == 0 || roll < 0.7 {
            let id = b.concept(TITLES[rng.gen_range(0..TITLES.len())]);
            concepts.push(id);
            id
        } else if roll < 0.85 {
            b.string(STRINGS[rng.gen_range(0..STRINGS.len())])
        } else {
            b.number(rng.gen_range(-3..2020))
        };
        if i > 0 {
            let parent = concepts[rng.gen_range(0..concepts.len())];
            let parent = if parent == id { concepts[0] } else { parent };
            b.edge(parent, id, LABELS[rng.gen_range(0..LABELS.len())]);
            pairs.insert((parent, id));
        }
    }
    let extra = rng.gen_range(0..=n / 3);
    for _ in 0..extra {
        let s = concepts[rng.gen_range(0..concepts.len())];
        let t = concepts[rng.gen_range(0..concepts.len())];
        if s != t && pairs.insert((s, t)) {
            b.edge(s, t, LABELS[rng.gen_range(0..LABELS.len())]);
        }
    }
    b.build(NodeId(0)).expect("generated graphs are valid")
}
