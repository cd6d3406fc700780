use std::collections::BTreeMap;

use super::{AmrGraph, NodeId};

/// Rooted graph isomorphism respecting titles, node kinds and edge labels.
///
/// Backtracking over node bijections in BFS order from the root, with
/// candidates pruned by a local signature. Intended for fragment-sized graphs.
pub fn is_isomorphic(a: &AmrGraph, b: &AmrGraph) -> bool {
    if a.len() != b.len() || a.edges().len() != b.edges().len() {
        return false;
    }
    let sig_a = signatures(a);
    let sig_b = signatures(b);
    {
        let mut sa = sig_a.clone();
        let mut sb = sig_b.clone();
        sa.sort();
        sb.sort();
        if sa != sb {
            return false;
        }
    }
    if sig_a[a.root().0] != sig_b[b.root().0] {
        return false;
    }

    let edges_a = edge_counts(a);
    let edges_b = edge_counts(b);
    let order = bfs_order(a);
    let mut forward = vec![None; a.len()];
    let mut used = vec![false; b.len()];

    // Root is fixed.
    forward[a.root().0] = Some(b.root());
    used[b.root().0] = true;
    if !consistent(a.root(), b.root(), &forward, &edges_a, &edges_b) {
        return false;
    }
    search(
        1,
        &order,
        &sig_a,
        &sig_b,
        &edges_a,
        &edges_b,
        &mut forward,
        &mut used,
    )
}

type Signature = (String, super::NodeKind, Vec<String>, Vec<String>);
type EdgeCounts = BTreeMap<(usize, usize), BTreeMap<String, usize>>;

fn signatures(g: &AmrGraph) -> Vec<Signature> {
    g.nodes()
        .iter()
        .map(|n| {
            let mut out: Vec<String> = g.outgoing(n.id).map(|e| e.label.clone()).collect();
            let mut inc: Vec<String> = g.incoming(n.id).map(|e| e.label.clone()).collect();
            out.sort();
            inc.sort();
            (n.title.clone(), n.kind, out, inc)
        })
        .collect()
}

fn edge_counts(g: &AmrGraph) -> EdgeCounts {
    let mut m: EdgeCounts = BTreeMap::new();
    for e in g.edges() {
        *m.entry((e.source.0, e.target.0))
            .or_default()
            .entry(e.label.clone())
            .or_insert(0) += 1;
    }
    m
}

fn bfs_order(g: &AmrGraph) -> Vec<NodeId> {
    let adj = g.neighbours();
    let mut seen = vec![false; g.len()];
    let mut order = vec![g.root()];
    seen[g.root().0] = true;
    let mut i = 0;
    while i < order.len() {
        let n = order[i];
        for &m in &adj[n.0] {
            if !seen[m.0] {
                seen[m.0] = true;
                order.push(m);
            }
        }
        i += 1;
    }
    // Unreachable nodes cannot exist in a built graph, but keep the order total.
    for (idx, s) in seen.iter().enumerate() {
        if !s {
            order.push(NodeId(idx));
        }
    }
    order
}

/// Checks edges between `u` (mapped to `v`) and every already-mapped node.
fn consistent(
    u: NodeId,
    v: NodeId,
    forward: &[Option<NodeId>],
    edges_a: &EdgeCounts,
    edges_b: &EdgeCounts,
) -> bool {
    let empty = BTreeMap::new();
    for (w, mapped) in forward.iter().enumerate() {
        let Some(x) = mapped else { continue };
        let ab = edges_a.get(&(u.0, w)).unwrap_or(&empty);
        let bb = edges_b.get(&(v.0, x.0)).unwrap_or(&empty);
        if ab != bb {
            return false;
        }
        let ab = edges_a.get(&(w, u.0)).unwrap_or(&empty);
        let bb = edges_b.get(&(x.0, v.0)).unwrap_or(&empty);
        if ab != bb {
            return false;
        }
    }
    true
}

#[allow(clippy::too_many_arguments)]
fn search(
    pos: usize,
    order: &[NodeId],
    sig_a: &[Signature],
    sig_b: &[Signature],
    edges_a: &EdgeCounts,
    edges_b: &EdgeCounts,
    forward: &mut Vec<Option<NodeId>>,
    used: &mut Vec<bool>,
) -> bool {
    if pos == order.len() {
        return true;
    }
    let u = order[pos];
    for v in 0..used.len() {
        if used[v] || sig_a[u.0] != sig_b[v] {
            continue;
        }
        let v = NodeId(v);
        if !consistent(u, v, forward, edges_a, edges_b) {
            continue;
        }
        forward[u.0] = Some(v);
        used[v.0] = true;
        if search(
            pos + 1,
            order,
            sig_a,
            sig_b,
            edges_a,
            edges_b,
            forward,
            used,
        ) {
            return true;
        }
        forward[u.0] = None;
        used[v.0] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    #[test]
    fn permuted_node_order_is_isomorphic() {
        let mut b = GraphBuilder::new();
        let r = b.concept("run-01");
        let h = b.concept("he");
        let d = b.concept("dog");
        b.edge(r, h, "ARG0");
        b.edge(r, d, "destination");
        b.edge(d, h, "poss");
        let g1 = b.build(r).unwrap();

        let mut b = GraphBuilder::new();
        let d = b.concept("dog");
        let h = b.concept("he");
        let r = b.concept("run-01");
        b.edge(d, h, "poss");
        b.edge(r, d, "destination");
        b.edge(r, h, "ARG0");
        let g2 = b.build(r).unwrap();
        assert!(is_isomorphic(&g1, &g2));
    }

    #[test]
    fn label_swap_breaks_isomorphism() {
        let mut b = GraphBuilder::new();
        let r = b.concept("x");
        let p = b.concept("y");
        let q = b.concept("y");
        b.edge(r, p, "ARG0");
        b.edge(p, q, "ARG1");
        let g1 = b.build(r).unwrap();

        let mut b = GraphBuilder::new();
        let r = b.concept("x");
        let p = b.concept("y");
        let q = b.concept("y");
        b.edge(r, p, "ARG0");
        b.edge(r, q, "ARG1");
        let g2 = b.build(r).unwrap();
        assert!(!is_isomorphic(&g1, &g2));
    }

    #[test]
    fn root_must_map_to_root() {
        let mut b = GraphBuilder::new();
        let a = b.concept("a");
        let c = b.concept("a");
        b.edge(a, c, "mod");
        let g1 = b.build(a).unwrap();
        let mut b = GraphBuilder::new();
        let a = b.concept("a");
        let c = b.concept("a");
        b.edge(a, c, "mod");
        let g2 = b.build(c).unwrap();
        assert!(!is_isomorphic(&g1, &g2));
    }
}
