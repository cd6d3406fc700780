//! Smatch: triple-overlap F1 under the best node mapping.
//!
//! Triples are one root triple, one instance triple per node (constants
//! included) and one per distinct edge. A mapping sends predicted nodes to
//! distinct gold nodes; a triple matches when its image is a gold triple.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::AmrGraph;

/// Largest graph, in nodes, that [`smatch_exact`] accepts on either side.
pub const EXACT_LIMIT: usize = 8;
pub const DEFAULT_RESTARTS: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum SmatchError {
    #[error(
        "exhaustive smatch is limited to {EXACT_LIMIT} nodes per graph (got {pred} and {gold})"
    )]
    TooLarge { pred: usize, gold: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SmatchResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub gold_total: usize,
    pub pred_total: usize,
}

impl SmatchResult {
    pub fn from_counts(matched: usize, pred_total: usize, gold_total: usize) -> SmatchResult {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (p, r) = (ratio(matched, pred_total), ratio(matched, gold_total));
        let f1 = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        SmatchResult {
            precision: p,
            recall: r,
            f1,
            matched,
            gold_total,
            pred_total,
        }
    }

    /// Micro-average: counts are summed, then P/R/F1 recomputed.
    pub fn sum<'a>(results: impl IntoIterator<Item = &'a SmatchResult>) -> SmatchResult {
        let (mut m, mut p, mut g) = (0, 0, 0);
        for r in results {
            m += r.matched;
            p += r.pred_total;
            g += r.gold_total;
        }
        SmatchResult::from_counts(m, p, g)
    }
}

/// Graph flattened to indices for fast triple lookup.
struct Flat {
    titles: Vec<String>,
    root: usize,
    edges: Vec<(usize, usize, usize)>,
    incident: Vec<Vec<usize>>,
}

impl Flat {
    fn new(g: &AmrGraph, labels: &mut BTreeMap<String, usize>) -> Flat {
        let mut set = BTreeSet::new();
        for e in g.edges() {
            let next = labels.len();
            let l = *labels.entry(e.label.clone()).or_insert(next);
            set.insert((e.source.0, l, e.target.0));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut incident = vec![Vec::new(); g.len()];
        for (k, &(s, _, t)) in edges.iter().enumerate() {
            incident[s].push(k);
            if t != s {
                incident[t].push(k);
            }
        }
        Flat {
            titles: g.nodes().iter().map(|n| n.title.clone()).collect(),
            root: g.root().0,
            edges,
            incident,
        }
    }

    fn triple_count(&self) -> usize {
        1 + self.titles.len() + self.edges.len()
    }
}

struct Matcher {
    pred: Flat,
    gold: Flat,
    gold_edges: BTreeSet<(usize, usize, usize)>,
    same_title: Vec<Vec<bool>>,
}

type Mapping = Vec<Option<usize>>;

impl Matcher {
    fn new(pred: &AmrGraph, gold: &AmrGraph) -> Matcher {
        let mut labels = BTreeMap::new();
        let pred = Flat::new(pred, &mut labels);
        let gold = Flat::new(gold, &mut labels);
        let gold_edges = gold.edges.iter().copied().collect();
        let same_title = pred
            .titles
            .iter()
            .map(|p| gold.titles.iter().map(|g| p == g).collect())
            .collect();
        Matcher {
            pred,
            gold,
            gold_edges,
            same_title,
        }
    }

    fn edge_matches(&self, k: usize, map: &Mapping) -> bool {
        let (s, l, t) = self.pred.edges[k];
        match (map[s], map[t]) {
            (Some(a), Some(b)) => self.gold_edges.contains(&(a, l, b)),
            _ => false,
        }
    }

    fn node_matches(&self, i: usize, map: &Mapping) -> usize {
        let Some(j) = map[i] else { return 0 };
        usize::from(self.same_title[i][j]) + usize::from(i == self.pred.root && j == self.gold.root)
    }

    /// Matched triples that involve any of `nodes`, each counted once.
    fn local(&self, nodes: &[usize], map: &Mapping) -> usize {
        let mut seen = BTreeSet::new();
        let mut n = 0;
        for &i in nodes {
            n += self.node_matches(i, map);
            for &k in &self.pred.incident[i] {
                if seen.insert(k) && self.edge_matches(k, map) {
                    n += 1;
                }
            }
        }
        n
    }

    fn total(&self, map: &Mapping) -> usize {
        let nodes: usize = (0..map.len()).map(|i| self.node_matches(i, map)).sum();
        nodes
            + (0..self.pred.edges.len())
                .filter(|&k| self.edge_matches(k, map))
                .count()
    }

    /// Steepest-ascent over reassignments and swaps until no move helps.
    fn climb(&self, map: &mut Mapping) -> usize {
        let (n, m) = (self.pred.titles.len(), self.gold.titles.len());
        let mut score = self.total(map);
        loop {
            let mut used = vec![false; m];
            for j in map.iter().flatten() {
                used[*j] = true;
            }
            let mut best: Option<(isize, usize, usize, Option<usize>)> = None;
            let consider =
                |delta: isize, best: &mut Option<(isize, usize, usize, Option<usize>)>, i, k, j| {
                    if delta > 0 && best.is_none_or(|b| delta > b.0) {
                        *best = Some((delta, i, k, j));
                    }
                };
            for i in 0..n {
                let before = self.local(&[i], map) as isize;
                let old = map[i];
                for j in (0..m).filter(|&j| !used[j]).map(Some).chain([None]) {
                    if j == old {
                        continue;
                    }
                    map[i] = j;
                    let delta = self.local(&[i], map) as isize - before;
                    consider(delta, &mut best, i, usize::MAX, j);
                }
                map[i] = old;
            }
            for i in 0..n {
                for k in i + 1..n {
                    if map[i] == map[k] {
                        continue;
                    }
                    let before = self.local(&[i, k], map) as isize;
                    map.swap(i, k);
                    let delta = self.local(&[i, k], map) as isize - before;
                    map.swap(i, k);
                    consider(delta, &mut best, i, k, None);
                }
            }
            match best {
                None => return score,
                Some((delta, i, k, j)) => {
                    if k == usize::MAX {
                        map[i] = j;
                    } else {
                        map.swap(i, k);
                    }
                    score = (score as isize + delta) as usize;
                }
            }
        }
    }

    /// Each predicted node takes the first free gold node with its title,
    /// roots first.
    fn seeded(&self) -> Mapping {
        let (n, m) = (self.pred.titles.len(), self.gold.titles.len());
        let mut map = vec![None; n];
        let mut used = vec![false; m];
        let (pr, gr) = (self.pred.root, self.gold.root);
        if self.same_title[pr][gr] {
            map[pr] = Some(gr);
            used[gr] = true;
        }
        for (i, slot) in map.iter_mut().enumerate() {
            if slot.is_some() {
                continue;
            }
            if let Some(j) = (0..m).find(|&j| !used[j] && self.same_title[i][j]) {
                *slot = Some(j);
                used[j] = true;
            }
        }
        map
    }

    /// Random start. Even restarts only pair equal titles; odd ones pair
    /// nodes freely.
    fn random(&self, rng: &mut ChaCha8Rng, restricted: bool) -> Mapping {
        let (n, m) = (self.pred.titles.len(), self.gold.titles.len());
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut map = vec![None; n];
        let mut used = vec![false; m];
        for i in order {
            let free: Vec<usize> = (0..m)
                .filter(|&j| !used[j] && (!restricted || self.same_title[i][j]))
                .collect();
            if free.is_empty() {
                continue;
            }
            let j = free[rng.gen_range(0..free.len())];
            map[i] = Some(j);
            used[j] = true;
        }
        map
    }

    fn result(&self, matched: usize) -> SmatchResult {
        SmatchResult::from_counts(matched, self.pred.triple_count(), self.gold.triple_count())
    }
}

/// Hill-climbing smatch from one title-seeded start plus `restarts` random
/// starts. Deterministic for a given seed. A `restarts` of 0 is treated as 1.
pub fn smatch(pred: &AmrGraph, gold: &AmrGraph, restarts: usize, seed: u64) -> SmatchResult {
    let m = Matcher::new(pred, gold);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = m.climb(&mut m.seeded());
    for r in 0..restarts.max(1) {
        let mut map = m.random(&mut rng, r % 2 == 0);
        best = best.max(m.climb(&mut map));
    }
    m.result(best)
}

/// Global optimum by enumerating every maximal injective mapping.
pub fn smatch_exact(pred: &AmrGraph, gold: &AmrGraph) -> Result<SmatchResult, SmatchError> {
    if pred.len() > EXACT_LIMIT || gold.len() > EXACT_LIMIT {
        return Err(SmatchError::TooLarge {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    let m = Matcher::new(pred, gold);
    let n = m.pred.titles.len();
    let mut map = vec![None; n];
    let mut used = vec![false; m.gold.titles.len()];
    let mut best = 0;
    enumerate(&m, 0, &mut map, &mut used, 0, &mut best);
    Ok(m.result(best))
}

/// Assigns pred node `i` onward. `score` counts triples whose endpoints are
/// all among nodes `< i`. Leaving a node unmapped is only tried when there
/// are more nodes left than free gold nodes, since extra pairs never lose.
fn enumerate(
    m: &Matcher,
    i: usize,
    map: &mut Mapping,
    used: &mut [bool],
    score: usize,
    best: &mut usize,
) {
    let n = map.len();
    if i == n {
        *best = (*best).max(score);
        return;
    }
    let gain = |map: &Mapping| {
        let mut g = m.node_matches(i, map);
        for &k in &m.pred.incident[i] {
            let (s, _, t) = m.pred.edges[k];
            if s <= i && t <= i && m.edge_matches(k, map) {
                g += 1;
            }
        }
        g
    };
    let free = used.iter().filter(|u| !**u).count();
    for j in 0..used.len() {
        if used[j] {
            continue;
        }
        used[j] = true;
        map[i] = Some(j);
        let g = gain(map);
        enumerate(m, i + 1, map, used, score + g, best);
        used[j] = false;
    }
    map[i] = None;
    if n - i > free {
        enumerate(m, i + 1, map, used, score, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_penman;

    fn g(s: &str) -> AmrGraph {
        parse_penman(s).unwrap()
    }

    #[test]
    fn identical_graphs() {
        let a = g("(r / run-01 :ARG0 (h / he) :manner (g / glee))");
        let r = smatch(&a, &a, 1, 0);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        assert_eq!(r.matched, 6);
        assert_eq!(smatch_exact(&a, &a).unwrap(), r);
    }

    #[test]
    fn run_he_versus_run_dog() {
        // root, two instances, one edge per side; only the child title differs.
        let r = smatch(
            &g("(r / run-01 :ARG0 (h / he))"),
            &g("(r / run-01 :ARG0 (d / dog))"),
            4,
            1,
        );
        assert_eq!((r.matched, r.pred_total, r.gold_total), (3, 4, 4));
        assert!((r.f1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn disjoint_titles_share_only_the_root() {
        let r = smatch_exact(
            &g("(a / alpha :mod (b / beta))"),
            &g("(c / gamma :poss (d / delta))"),
        )
        .unwrap();
        assert_eq!(r.matched, 1);
        let r = smatch_exact(&g("(a / alpha)"), &g("(a / alpha)")).unwrap();
        assert_eq!(r.f1, 1.0);
    }

    #[test]
    fn exact_rejects_large_graphs() {
        let big = g("(a / a :op1 (b / b) :op2 (c / c) :op3 (d / d) :op4 (e / e) :op5 (f / f) :op6 (h / h) :op7 (i / i) :op8 (j / j))");
        assert_eq!(
            smatch_exact(&big, &big),
            Err(SmatchError::TooLarge { pred: 9, gold: 9 })
        );
    }

    #[test]
    fn micro_average_sums_counts() {
        let a = SmatchResult::from_counts(3, 4, 4);
        let b = SmatchResult::from_counts(1, 6, 2);
        let s = SmatchResult::sum([&a, &b]);
        assert_eq!((s.matched, s.pred_total, s.gold_total), (4, 10, 6));
        assert!((s.precision - 0.4).abs() < 1e-12);
        assert_eq!(SmatchResult::from_counts(0, 0, 0).f1, 0.0);
    }

    #[test]
    fn re_entrancy_counts() {
        let pred = g("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-01 :ARG0 b))");
        let gold = g("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-01 :ARG0 (b2 / boy)))");
        let r = smatch_exact(&pred, &gold).unwrap();
        // Root, three instances and the two want-01 edges match; go-01's
        // ARG0 points at a different boy in gold.
        assert_eq!((r.matched, r.pred_total, r.gold_total), (6, 7, 8));
        assert_eq!(smatch(&pred, &gold, 8, 3), r);
    }
}
