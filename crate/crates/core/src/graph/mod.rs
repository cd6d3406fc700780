//! AMR graphs: concept nodes, labelled relation edges and a distinguished root.
//!
//! Graphs are built through [`GraphBuilder`], which checks the structural
//! invariants once; an [`AmrGraph`] is immutable afterwards. Fragments are
//! small graphs tied to the token span that produced them.

mod iso;
pub mod penman;
pub mod random;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use iso::is_isomorphic;
pub use penman::{layout_parents, parse_penman, print_penman, PenmanError};

/// Index of a node inside its graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Concept,
    StringConstant,
    NumericConstant,
}

impl NodeKind {
    pub fn is_constant(self) -> bool {
        !matches!(self, NodeKind::Concept)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmrNode {
    pub id: NodeId,
    pub title: String,
    pub kind: NodeKind,
    /// Variable name from the source notation, if the node came from Penman.
    pub var: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmrEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub label: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("root {0:?} is not a node of the graph")]
    MissingRoot(NodeId),
    #[error("node {0:?} has an empty title")]
    EmptyTitle(NodeId),
    #[error("numeric constant {title:?} does not parse as an integer")]
    BadNumber { title: String },
    #[error("edge {from:?} -> {to:?} has an empty label")]
    EmptyLabel { from: NodeId, to: NodeId },
    #[error("edge references unknown node {0:?}")]
    DanglingEdge(NodeId),
    #[error("constant node {0:?} cannot have outgoing edges or be the root")]
    ConstantNotLeaf(NodeId),
    #[error("node {0:?} is not reachable from the root")]
    Unreachable(NodeId),
}

/// Rooted, directed, possibly cyclic graph of concepts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmrGraph {
    nodes: Vec<AmrNode>,
    edges: Vec<AmrEdge>,
    root: NodeId,
}

impl AmrGraph {
    /// Single-concept graph.
    pub fn singleton(title: &str) -> AmrGraph {
        let mut b = GraphBuilder::new();
        let r = b.concept(title);
        b.build(r).expect("singleton graph with non-empty title")
    }

    pub fn nodes(&self) -> &[AmrNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[AmrEdge] {
        &self.edges
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &AmrNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn outgoing(&self, id: NodeId) -> impl Iterator<Item = &AmrEdge> {
        self.edges.iter().filter(move |e| e.source == id)
    }

    pub fn incoming(&self, id: NodeId) -> impl Iterator<Item = &AmrEdge> {
        self.edges.iter().filter(move |e| e.target == id)
    }

    /// Undirected adjacency lists, in edge order.
    pub fn neighbours(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.source.0].push(e.target);
            if e.source != e.target {
                adj[e.target.0].push(e.source);
            }
        }
        adj
    }

    /// Undirected BFS distance of every node from the root.
    pub fn depths(&self) -> Vec<usize> {
        let adj = self.neighbours();
        let mut depth = vec![usize::MAX; self.nodes.len()];
        let mut queue = std::collections::VecDeque::new();
        depth[self.root.0] = 0;
        queue.push_back(self.root);
        while let Some(n) = queue.pop_front() {
            for &m in &adj[n.0] {
                if depth[m.0] == usize::MAX {
                    depth[m.0] = depth[n.0] + 1;
                    queue.push_back(m);
                }
            }
        }
        depth
    }

    /// Stable textual handle for every node, used by the alignment file format.
    ///
    /// Concepts use their source variable (or a generated one); constants are
    /// addressed as `<parent handle>:<label>`, with `#k` appended when the same
    /// parent has several constants under one label.
    pub fn handles(&self) -> Vec<String> {
        let mut taken: std::collections::BTreeSet<String> =
            self.nodes.iter().filter_map(|n| n.var.clone()).collect();
        let mut handles = vec![String::new(); self.nodes.len()];
        let mut counters: BTreeMap<char, usize> = BTreeMap::new();
        for n in &self.nodes {
            if n.kind.is_constant() {
                continue;
            }
            handles[n.id.0] = match &n.var {
                Some(v) => v.clone(),
                None => loop {
                    let letter = var_letter(&n.title);
                    let k = counters.entry(letter).or_insert(0);
                    *k += 1;
                    let candidate = if *k == 1 {
                        letter.to_string()
                    } else {
                        format!("{letter}{k}")
                    };
                    if taken.insert(candidate.clone()) {
                        break candidate;
                    }
                },
            };
        }
        let mut seen: BTreeMap<(usize, String), usize> = BTreeMap::new();
        for n in &self.nodes {
            if !n.kind.is_constant() {
                continue;
            }
            handles[n.id.0] = match self.incoming(n.id).next() {
                Some(e) => {
                    let k = seen.entry((e.source.0, e.label.clone())).or_insert(0);
                    *k += 1;
                    let base = format!("{}:{}", handles[e.source.0], e.label);
                    if *k == 1 {
                        base
                    } else {
                        format!("{base}#{k}")
                    }
                }
                None => format!("#{}", n.id.0),
            };
        }
        handles
    }

    /// Smatch triples: one instance triple per node, one per edge, one root triple.
    ///
    /// Variables are named `v<index>`.
    pub fn triples(&self) -> Vec<Triple> {
        let var = |id: NodeId| format!("v{}", id.0);
        let mut out = Vec::with_capacity(self.nodes.len() + self.edges.len() + 1);
        out.push(Triple::new("TOP", "root", &var(self.root)));
        for n in &self.nodes {
            out.push(Triple::new(&var(n.id), "instance", &n.title));
        }
        for e in &self.edges {
            out.push(Triple::new(&var(e.source), &e.label, &var(e.target)));
        }
        out
    }

    /// Subgraph induced by `members` (edges with both endpoints inside), rooted at `root`.
    pub fn induced(&self, members: &[NodeId], root: NodeId) -> Result<AmrGraph, GraphError> {
        let mut b = GraphBuilder::new();
        let mut map = BTreeMap::new();
        for &m in members {
            let n = self.node(m);
            let id = b.push(n.title.clone(), n.kind, n.var.clone());
            map.insert(m, id);
        }
        for e in &self.edges {
            if let (Some(&s), Some(&t)) = (map.get(&e.source), map.get(&e.target)) {
                b.edge(s, t, &e.label);
            }
        }
        let r = *map.get(&root).ok_or(GraphError::MissingRoot(root))?;
        b.build(r)
    }
}

impl fmt::Display for AmrGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match print_penman(self) {
            Ok(s) => f.write_str(&s),
            Err(e) => write!(f, "<unprintable graph: {e}>"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub source: String,
    pub relation: String,
    pub target: String,
}

impl Triple {
    fn new(source: &str, relation: &str, target: &str) -> Triple {
        Triple {
            source: source.to_string(),
            relation: relation.to_string(),
            target: target.to_string(),
        }
    }
}

/// Incremental graph construction; invariants are checked in [`GraphBuilder::build`].
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<AmrNode>,
    edges: Vec<AmrEdge>,
}

impl GraphBuilder {
    pub fn new() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn push(&mut self, title: String, kind: NodeKind, var: Option<String>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(AmrNode {
            id,
            title,
            kind,
            var,
        });
        id
    }

    pub fn concept(&mut self, title: &str) -> NodeId {
        self.push(title.to_string(), NodeKind::Concept, None)
    }

    pub fn string(&mut self, value: &str) -> NodeId {
        self.push(value.to_string(), NodeKind::StringConstant, None)
    }

    pub fn number(&mut self, value: i64) -> NodeId {
        self.push(value.to_string(), NodeKind::NumericConstant, None)
    }

    pub fn edge(&mut self, source: NodeId, target: NodeId, label: &str) {
        self.edges.push(AmrEdge {
            source,
            target,
            label: label.to_string(),
        });
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Copies `g` into the builder and returns the id mapping (old index -> new id).
    pub fn append(&mut self, g: &AmrGraph) -> Vec<NodeId> {
        let map: Vec<NodeId> = g
            .nodes
            .iter()
            .map(|n| self.push(n.title.clone(), n.kind, None))
            .collect();
        for e in &g.edges {
            self.edge(map[e.source.0], map[e.target.0], &e.label);
        }
        map
    }

    pub fn build(self, root: NodeId) -> Result<AmrGraph, GraphError> {
        if self.nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        if root.0 >= self.nodes.len() {
            return Err(GraphError::MissingRoot(root));
        }
        for n in &self.nodes {
            if n.title.is_empty() {
                return Err(GraphError::EmptyTitle(n.id));
            }
            if n.kind == NodeKind::NumericConstant && n.title.parse::<i64>().is_err() {
                return Err(GraphError::BadNumber {
                    title: n.title.clone(),
                });
            }
        }
        // A lone constant is a valid graph (the VALUE fragment); otherwise
        // constants are leaves.
        if self.nodes[root.0].kind.is_constant() && self.nodes.len() > 1 {
            return Err(GraphError::ConstantNotLeaf(root));
        }
        for e in &self.edges {
            for id in [e.source, e.target] {
                if id.0 >= self.nodes.len() {
                    return Err(GraphError::DanglingEdge(id));
                }
            }
            if e.label.is_empty() {
                return Err(GraphError::EmptyLabel {
                    from: e.source,
                    to: e.target,
                });
            }
            if self.nodes[e.source.0].kind.is_constant() {
                return Err(GraphError::ConstantNotLeaf(e.source));
            }
        }
        let g = AmrGraph {
            nodes: self.nodes,
            edges: self.edges,
            root,
        };
        if let Some(pos) = g.depths().iter().position(|&d| d == usize::MAX) {
            return Err(GraphError::Unreachable(NodeId(pos)));
        }
        Ok(g)
    }
}

/// Token interval `[start, end)` in a sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        assert!(start < end, "empty span [{start}, {end})");
        Span { start, end }
    }

    pub fn single(index: usize) -> Span {
        Span::new(index, index + 1)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index < self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// The subgraph generated by one token span. The graph root is the head,
/// the node that relation identification attaches edges to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmrFragment {
    pub graph: AmrGraph,
    pub span: Span,
}

impl AmrFragment {
    pub fn new(graph: AmrGraph, span: Span) -> AmrFragment {
        AmrFragment { graph, span }
    }

    pub fn head(&self) -> NodeId {
        self.graph.root()
    }

    pub fn head_title(&self) -> &str {
        &self.graph.node(self.graph.root()).title
    }

    /// Same subgraph, ignoring the span.
    pub fn same_graph(&self, other: &AmrFragment) -> bool {
        is_isomorphic(&self.graph, &other.graph)
    }
}

/// First letter used for generated variable names.
pub(crate) fn var_letter(title: &str) -> char {
    match title.chars().next() {
        Some(c) if c.is_ascii_alphabetic() => c.to_ascii_lowercase(),
        _ => 'x',
    }
}

/// Orders relation labels so that numbered roles sort numerically
/// (`op2` before `op10`, `ARG1` before `ARG1-of`).
pub fn compare_labels(a: &str, b: &str) -> Ordering {
    label_key(a).cmp(&label_key(b))
}

fn label_key(label: &str) -> (&str, u64, &str) {
    let digits_at = label.find(|c: char| c.is_ascii_digit());
    match digits_at {
        Some(i) => {
            let rest = &label[i..];
            let len = rest
                .find(|c: char| !c.is_ascii_digit())
                .unwrap_or(rest.len());
            let num = rest[..len].parse().unwrap_or(u64::MAX);
            (&label[..i], num, &rest[len..])
        }
        None => (label, 0, ""),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_like() -> AmrGraph {
        let mut b = GraphBuilder::new();
        let r = b.concept("run-01");
        let h = b.concept("he");
        b.edge(r, h, "ARG0");
        b.build(r).unwrap()
    }

    #[test]
    fn triple_count_is_nodes_plus_edges_plus_one() {
        let g = fig1_like();
        let t = g.triples();
        assert_eq!(t.len(), g.len() + g.edges().len() + 1);
        assert!(t.contains(&Triple::new("v0", "ARG0", "v1")));
        assert!(t.contains(&Triple::new("TOP", "root", "v0")));
    }

    #[test]
    fn single_node_triples() {
        let g = AmrGraph::singleton("dog");
        assert_eq!(
            g.triples(),
            vec![
                Triple::new("TOP", "root", "v0"),
                Triple::new("v0", "instance", "dog")
            ]
        );
    }

    #[test]
    fn builder_rejects_disconnected_and_bad_constants() {
        let mut b = GraphBuilder::new();
        let a = b.concept("a");
        b.concept("b");
        assert_eq!(b.build(a), Err(GraphError::Unreachable(NodeId(1))));

        let mut b = GraphBuilder::new();
        let a = b.concept("a");
        let c = b.push("five".into(), NodeKind::NumericConstant, None);
        b.edge(a, c, "quant");
        assert!(matches!(b.build(a), Err(GraphError::BadNumber { .. })));

        let mut b = GraphBuilder::new();
        let a = b.concept("a");
        let s = b.string("x");
        b.edge(s, a, "op1");
        assert_eq!(b.build(a), Err(GraphError::ConstantNotLeaf(s)));
    }

    #[test]
    fn cycles_are_allowed() {
        let mut b = GraphBuilder::new();
        let a = b.concept("a");
        let c = b.concept("c");
        b.edge(a, c, "ARG0");
        b.edge(c, a, "ARG1");
        b.edge(a, a, "mod");
        assert!(b.build(a).is_ok());
    }

    #[test]
    fn handles_for_constants_use_parent_and_label() {
        let mut b = GraphBuilder::new();
        let n = b.concept("name");
        let s1 = b.string("Barack");
        let s2 = b.string("Obama");
        b.edge(n, s1, "op1");
        b.edge(n, s2, "op2");
        let g = b.build(n).unwrap();
        assert_eq!(g.handles(), vec!["n", "n:op1", "n:op2"]);
    }

    #[test]
    fn label_order_is_numeric_aware() {
        let mut labels = vec!["op10", "op2", "ARG1-of", "ARG1", "ARG0", "mod", "day"];
        labels.sort_by(|a, b| compare_labels(a, b));
        assert_eq!(
            labels,
            vec!["ARG0", "ARG1", "ARG1-of", "day", "mod", "op2", "op10"]
        );
    }
}
