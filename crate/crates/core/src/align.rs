//! Node-to-token alignment biased towards reliable action sequences.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::actions::{
    jaro_winkler, month_number, parse_date, parse_number, ActionLabel, ReliabilityTable,
};
use crate::corpus::{AnnotatedSentence, LexicalResources};
use crate::graph::{layout_parents, AmrGraph, NodeId, NodeKind};

/// Map from graph nodes to token indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alignment {
    map: BTreeMap<NodeId, usize>,
}

impl Alignment {
    /// Node `i` aligned to `tokens[i]`.
    pub fn from_tokens(tokens: &[usize]) -> Alignment {
        Alignment {
            map: tokens
                .iter()
                .enumerate()
                .map(|(i, &t)| (NodeId(i), t))
                .collect(),
        }
    }

    pub fn get(&self, node: NodeId) -> Option<usize> {
        self.map.get(&node).copied()
    }

    pub fn insert(&mut self, node: NodeId, token: usize) {
        self.map.insert(node, token);
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, usize)> + '_ {
        self.map.iter().map(|(&n, &t)| (n, t))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Every node of `graph`, and nothing else, is aligned.
    pub fn is_total(&self, graph: &AmrGraph) -> bool {
        self.map.len() == graph.len() && self.map.keys().all(|n| n.0 < graph.len())
    }

    /// Token per node, if total over `graph`.
    pub fn tokens(&self, graph: &AmrGraph) -> Option<Vec<usize>> {
        (0..graph.len()).map(|i| self.get(NodeId(i))).collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("alignments cover different node sets")]
    NodeSetMismatch,
    #[error("alignments are empty")]
    Empty,
}

/// Fraction of nodes aligned to the same token in both alignments.
pub fn evaluate_alignment(predicted: &Alignment, gold: &Alignment) -> Result<f64, AlignError> {
    if !predicted.map.keys().eq(gold.map.keys()) {
        return Err(AlignError::NodeSetMismatch);
    }
    if gold.is_empty() {
        return Err(AlignError::Empty);
    }
    let same = gold
        .iter()
        .filter(|&(n, t)| predicted.get(n) == Some(t))
        .count();
    Ok(same as f64 / gold.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignConfig {
    /// Bonus per edge whose endpoints share a token.
    pub beta: f64,
    /// Bonus per edge whose target token is a dependency child of its
    /// source token.
    pub gamma: f64,
    pub hill_climb_iters: usize,
}

impl Default for AlignConfig {
    fn default() -> AlignConfig {
        AlignConfig {
            beta: 0.1,
            gamma: 0.05,
            hill_climb_iters: 100,
        }
    }
}

/// Penalty for two same-titled concepts drawn from one token.
const DUPLICATE_PENALTY: f64 = 1.0;

fn stem(title: &str) -> &str {
    title.split('-').next().unwrap_or(title)
}

fn is_frame(title: &str) -> bool {
    title
        .rsplit_once('-')
        .is_some_and(|(_, s)| s.len() == 2 && s.chars().all(|c| c.is_ascii_digit()))
}

fn ordinal_day(word: &str) -> Option<i64> {
    let w = word.to_lowercase();
    let digits = ["st", "nd", "rd", "th"]
        .iter()
        .find_map(|s| w.strip_suffix(s))
        .unwrap_or(&w);
    digits.parse().ok()
}

fn date_field_matches(role: &str, word: &str, value: i64) -> bool {
    match role {
        "year" => parse_date(&[word]).and_then(|d| d.year) == Some(value),
        "month" => month_number(word) == Some(value) || word.parse() == Ok(value),
        "day" => ordinal_day(word) == Some(value),
        _ => false,
    }
}

/// Alignment objective for one sentence/graph pair.
pub struct AlignScorer<'a> {
    graph: &'a AmrGraph,
    /// `unary[n][j]`: score of deriving node `n` from token `j` alone.
    unary: Vec<Vec<f64>>,
    /// Score of the all-DICT fallback only.
    dict_only: Vec<Vec<f64>>,
    /// Concepts (other than frames) with no lexical match anywhere; they
    /// follow their children.
    inherits: Vec<bool>,
    layout_children: Vec<Vec<NodeId>>,
    same_title: Vec<(NodeId, NodeId)>,
    /// Dependency head of each token.
    heads: Vec<Option<usize>>,
    lambda: f64,
    beta: f64,
    gamma: f64,
}

impl<'a> AlignScorer<'a> {
    pub fn new(
        sentence: &AnnotatedSentence,
        graph: &'a AmrGraph,
        resources: &LexicalResources,
        table: &ReliabilityTable,
        config: &AlignConfig,
    ) -> AlignScorer<'a> {
        let lambda = table.get(ActionLabel::Dict);
        let n = graph.len();
        let mut unary = vec![vec![0.0; sentence.len()]; n];
        let mut dict_only = vec![vec![0.0; sentence.len()]; n];
        let mut inherits = vec![false; n];
        let verb_targets: Vec<Option<(String, f64)>> = sentence
            .tokens
            .iter()
            .map(|t| {
                let lemma = t.lemma.to_lowercase();
                let (best, sim) = resources.most_similar_lemma(&lemma)?;
                Some((resources.most_frequent_sense(best), sim))
            })
            .collect();
        for node in graph.nodes() {
            let parent = graph.incoming(node.id).next();
            let parent_title = parent.map(|e| graph.node(e.source).title.as_str());
            let mut any_lexical = false;
            for (j, tok) in sentence.tokens.iter().enumerate() {
                let fallback = lambda * jaro_winkler(&tok.lower, &stem(&node.title).to_lowercase());
                dict_only[node.id.0][j] = fallback;
                let lexical = match node.kind {
                    NodeKind::Concept => {
                        let mut s: f64 = 0.0;
                        if tok.lower == node.title {
                            s = s.max(table.get(ActionLabel::Identity));
                        }
                        if tok.lemma.to_lowercase() == node.title {
                            s = s.max(table.get(ActionLabel::Lemma));
                        }
                        if let Some((frame, sim)) = &verb_targets[j] {
                            if *frame == node.title {
                                s = s.max(table.get(ActionLabel::Verb) * sim);
                            }
                        }
                        s
                    }
                    NodeKind::StringConstant => {
                        if parent_title == Some("name") && tok.text == node.title {
                            table.get(ActionLabel::Name)
                        } else {
                            0.0
                        }
                    }
                    NodeKind::NumericConstant => {
                        let value: i64 = node.title.parse().expect("validated numeric title");
                        let role = parent.map(|e| e.label.as_str()).unwrap_or("");
                        if parent_title == Some("date-entity")
                            && date_field_matches(role, &tok.text, value)
                        {
                            table.get(ActionLabel::Date)
                        } else if parse_number(&[tok.text.as_str()]) == Some(value) {
                            table.get(ActionLabel::Value)
                        } else {
                            0.0
                        }
                    }
                };
                any_lexical |= lexical > 0.0;
                unary[node.id.0][j] = lexical.max(fallback);
            }
            inherits[node.id.0] =
                node.kind == NodeKind::Concept && !any_lexical && !is_frame(&node.title);
        }
        let mut layout_children = vec![Vec::new(); n];
        for (child, p) in layout_parents(graph).into_iter().enumerate() {
            if let Some(p) = p {
                layout_children[p.0].push(NodeId(child));
            }
        }
        let mut same_title = Vec::new();
        for a in graph.nodes() {
            for b in graph.nodes() {
                if a.id < b.id && a.kind == NodeKind::Concept && a.title == b.title {
                    same_title.push((a.id, b.id));
                }
            }
        }
        AlignScorer {
            graph,
            unary,
            dict_only,
            inherits,
            layout_children,
            same_title,
            heads: (0..sentence.len())
                .map(|j| sentence.parent(j).head)
                .collect(),
            lambda,
            beta: config.beta,
            gamma: config.gamma,
        }
    }

    /// Objective over the assigned nodes of a partial alignment.
    pub fn score(&self, assign: &[Option<usize>]) -> f64 {
        let mut s = 0.0;
        for (n, a) in assign.iter().enumerate() {
            let Some(j) = *a else { continue };
            s += self.unary[n][j];
            if self.inherits[n]
                && self.layout_children[n]
                    .iter()
                    .any(|c| assign[c.0] == Some(j))
            {
                s += self.lambda;
            }
        }
        for e in self.graph.edges() {
            if let (Some(x), Some(y)) = (assign[e.source.0], assign[e.target.0]) {
                if x == y {
                    s += self.beta;
                } else if self.heads[y] == Some(x) {
                    s += self.gamma;
                }
            }
        }
        for &(a, b) in &self.same_title {
            if assign[a.0].is_some() && assign[a.0] == assign[b.0] {
                s -= DUPLICATE_PENALTY;
            }
        }
        s
    }

    fn total(&self, tokens: &[usize]) -> f64 {
        let assign: Vec<Option<usize>> = tokens.iter().map(|&t| Some(t)).collect();
        self.score(&assign)
    }

    fn argmax_token(row: &[f64]) -> usize {
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        best
    }

    /// Every node at its best DICT-similarity token.
    pub fn dict_baseline(&self) -> Vec<usize> {
        self.dict_only
            .iter()
            .map(|r| Self::argmax_token(r))
            .collect()
    }

    fn greedy(&self) -> Vec<usize> {
        let n = self.graph.len();
        let depth = self.graph.depths();
        let mut order: Vec<usize> = (0..n).collect();
        let best: Vec<f64> = self
            .unary
            .iter()
            .map(|r| r.iter().copied().fold(f64::MIN, f64::max))
            .collect();
        // Lexically grounded nodes first, best score first and shallow
        // first on ties; then inheriting nodes bottom-up so each follows
        // already placed children.
        order.sort_by(|&a, &b| {
            self.inherits[a]
                .cmp(&self.inherits[b])
                .then_with(|| {
                    if self.inherits[a] {
                        depth[b].cmp(&depth[a]).then(best[b].total_cmp(&best[a]))
                    } else {
                        best[b].total_cmp(&best[a]).then(depth[a].cmp(&depth[b]))
                    }
                })
                .then(a.cmp(&b))
        });
        let mut assign: Vec<Option<usize>> = vec![None; n];
        let tokens = self.unary.first().map_or(0, Vec::len);
        for node in order {
            let mut best_tok = 0;
            let mut best_score = f64::MIN;
            for j in 0..tokens {
                assign[node] = Some(j);
                let s = self.score(&assign);
                if s > best_score {
                    best_score = s;
                    best_tok = j;
                }
            }
            assign[node] = Some(best_tok);
        }
        assign
            .into_iter()
            .map(|a| a.expect("all assigned"))
            .collect()
    }

    /// Best improving move until none is left or the cap is hit. A move
    /// either sends one node to another token or swaps everything aligned
    /// to two tokens.
    fn hill_climb(&self, mut tokens: Vec<usize>, iters: usize) -> Vec<usize> {
        let width = self.unary.first().map_or(0, Vec::len);
        let mut current = self.total(&tokens);
        for _ in 0..iters {
            let mut best: Option<(f64, Vec<usize>)> = None;
            let consider = |candidate: &[usize], best: &mut Option<(f64, Vec<usize>)>| {
                let s = self.total(candidate);
                if s > current + 1e-12 && best.as_ref().is_none_or(|(b, _)| s > *b) {
                    *best = Some((s, candidate.to_vec()));
                }
            };
            for node in 0..tokens.len() {
                let old = tokens[node];
                for j in 0..width {
                    if j == old {
                        continue;
                    }
                    tokens[node] = j;
                    consider(&tokens, &mut best);
                }
                tokens[node] = old;
            }
            for x in 0..width {
                for y in x + 1..width {
                    if !tokens.iter().any(|&t| t == x || t == y) {
                        continue;
                    }
                    let swapped: Vec<usize> = tokens
                        .iter()
                        .map(|&t| {
                            if t == x {
                                y
                            } else if t == y {
                                x
                            } else {
                                t
                            }
                        })
                        .collect();
                    consider(&swapped, &mut best);
                }
            }
            match best {
                Some((s, next)) => {
                    tokens = next;
                    current = s;
                }
                None => break,
            }
        }
        tokens
    }
}

/// Total alignment of `graph` to `sentence`.
///
/// Greedy assignment followed by hill climbing; the search is also run from
/// the all-DICT baseline and the better local optimum is kept, so the result
/// never scores below that baseline.
pub fn align(
    sentence: &AnnotatedSentence,
    graph: &AmrGraph,
    resources: &LexicalResources,
    table: &ReliabilityTable,
    config: &AlignConfig,
) -> Alignment {
    assert!(!sentence.is_empty(), "cannot align to an empty sentence");
    let scorer = AlignScorer::new(sentence, graph, resources, table, config);
    let greedy = scorer.hill_climb(scorer.greedy(), config.hill_climb_iters);
    let baseline = scorer.hill_climb(scorer.dict_baseline(), config.hill_climb_iters);
    let chosen = if scorer.total(&baseline) > scorer.total(&greedy) + 1e-12 {
        baseline
    } else {
        greedy
    };
    Alignment::from_tokens(&chosen)
}

/// Objective value of a total alignment.
pub fn alignment_score(
    sentence: &AnnotatedSentence,
    graph: &AmrGraph,
    alignment: &Alignment,
    resources: &LexicalResources,
    table: &ReliabilityTable,
    config: &AlignConfig,
) -> Option<f64> {
    let tokens = alignment.tokens(graph)?;
    Some(AlignScorer::new(sentence, graph, resources, table, config).total(&tokens))
}

/// The all-DICT baseline alignment.
pub fn dict_baseline_alignment(
    sentence: &AnnotatedSentence,
    graph: &AmrGraph,
    resources: &LexicalResources,
    table: &ReliabilityTable,
    config: &AlignConfig,
) -> Alignment {
    let scorer = AlignScorer::new(sentence, graph, resources, table, config);
    Alignment::from_tokens(&scorer.dict_baseline())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DepArc, TokenSpec};
    use crate::graph::parse_penman;
    use proptest::prelude::*;

    fn sentence(words: &[(&str, &str)]) -> AnnotatedSentence {
        let specs: Vec<TokenSpec<'_>> = words
            .iter()
            .map(|(t, l)| TokenSpec {
                text: t,
                pos: "X",
                lemma: l,
                ner: "O",
            })
            .collect();
        let deps = (0..words.len())
            .map(|i| DepArc {
                head: (i > 0).then_some(0),
                dependent: i,
                relation: "dep".into(),
            })
            .collect();
        AnnotatedSentence::new("t", &specs, deps, vec![]).unwrap()
    }

    fn resources() -> LexicalResources {
        LexicalResources::from_frames_text("run run-01 5\nsail sail-01 5\n", "f").unwrap()
    }

    fn run_align(s: &AnnotatedSentence, g: &AmrGraph) -> Vec<usize> {
        align(
            s,
            g,
            &resources(),
            &ReliabilityTable::default(),
            &AlignConfig::default(),
        )
        .tokens(g)
        .unwrap()
    }

    #[test]
    fn fig1_alignment() {
        let s = sentence(&[
            ("He", "he"),
            ("gleefully", "glee"),
            ("ran", "run"),
            ("to", "to"),
            ("his", "he"),
            ("dog", "dog"),
            ("Rover", "Rover"),
            (".", "."),
        ]);
        let g = parse_penman(
            "(r / run-01 :ARG0 (h / he) :mod (g / glee) \
             :destination (d / dog :poss h :name (n / name :op1 \"Rover\")))",
        )
        .unwrap();
        // run-01, he, glee, dog, name, "Rover"
        assert_eq!(run_align(&s, &g), vec![2, 0, 1, 5, 6, 6]);
    }

    #[test]
    fn single_dog() {
        let s = sentence(&[("the", "the"), ("dog", "dog")]);
        assert_eq!(run_align(&s, &parse_penman("(d / dog)").unwrap()), vec![1]);
    }

    #[test]
    fn verb_beats_dict_similarity() {
        let s = sentence(&[("sailors", "sailor"), ("sail", "sail")]);
        let g = parse_penman("(s / sail-01)").unwrap();
        assert_eq!(run_align(&s, &g), vec![1]);
        // Enumerate both alignments.
        let r = resources();
        let t = ReliabilityTable::default();
        let c = AlignConfig::default();
        let score =
            |tok| alignment_score(&s, &g, &Alignment::from_tokens(&[tok]), &r, &t, &c).unwrap();
        assert!(score(1) > score(0));
    }

    #[test]
    fn derived_nominal_stays_with_its_token() {
        let s = sentence(&[
            ("The", "the"),
            ("sailor", "sailor"),
            ("sailed", "sail"),
            (".", "."),
        ]);
        let g = parse_penman("(s / sail-01 :ARG0 (p / person :ARG0-of (s2 / sail-01)))").unwrap();
        assert_eq!(run_align(&s, &g), vec![2, 1, 1]);
    }

    #[test]
    fn name_clusters_share_a_token() {
        let s = sentence(&[("John", "John"), ("Smith", "Smith"), ("lives", "live")]);
        let g = parse_penman(
            "(l / live-01 :ARG0 (p / person :name (n / name :op1 \"John\" :op2 \"Smith\")))",
        )
        .unwrap();
        let a = run_align(&s, &g);
        assert_eq!(&a[3..], &[0, 1]);
        assert_eq!(a[1], a[2]);
        assert!(a[1] < 2);
    }

    #[test]
    fn accuracy_definition() {
        let a = Alignment::from_tokens(&[0, 1]);
        assert_eq!(evaluate_alignment(&a, &a), Ok(1.0));
        assert_eq!(
            evaluate_alignment(&Alignment::from_tokens(&[0, 0]), &a),
            Ok(0.5)
        );
        assert_eq!(
            evaluate_alignment(&Alignment::from_tokens(&[0]), &a),
            Err(AlignError::NodeSetMismatch)
        );
    }

    fn graph_over(titles: &[String], parents: &[usize]) -> AmrGraph {
        let mut b = crate::graph::GraphBuilder::new();
        let ids: Vec<NodeId> = titles.iter().map(|t| b.concept(t)).collect();
        for (i, &p) in parents.iter().enumerate() {
            b.edge(ids[p % (i + 1)], ids[i + 1], "ARG0");
        }
        b.build(ids[0]).unwrap()
    }

    fn words() -> impl Strategy<Value = Vec<String>> {
        prop::collection::btree_set("[a-z]{3,7}", 1..7).prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn total_bounded_deterministic_and_above_baseline(
            ws in words(),
            extra in prop::collection::vec("[a-z]{2,6}", 0..4),
            parents in prop::collection::vec(0usize..10, 6),
            perm in 0usize..100,
        ) {
            let n = ws.len();
            let g = graph_over(&ws[..n], &parents[..n - 1]);
            let mut toks: Vec<String> = ws.iter().chain(&extra).cloned().collect();
            let k = toks.len();
            toks.rotate_left(perm % k);
            let pairs: Vec<(&str, &str)> = toks.iter().map(|t| (t.as_str(), t.as_str())).collect();
            let s = sentence(&pairs);
            let (r, t, c) = (resources(), ReliabilityTable::default(), AlignConfig::default());
            let a = align(&s, &g, &r, &t, &c);
            prop_assert!(a.is_total(&g));
            prop_assert!(a.iter().all(|(_, tok)| tok < s.len()));
            prop_assert_eq!(&a, &align(&s, &g, &r, &t, &c));
            let base = dict_baseline_alignment(&s, &g, &r, &t, &c);
            prop_assert!(
                alignment_score(&s, &g, &a, &r, &t, &c).unwrap()
                    >= alignment_score(&s, &g, &base, &r, &t, &c).unwrap() - 1e-12
            );
        }

        #[test]
        fn recovers_a_title_token_bijection(ws in words(), parents in prop::collection::vec(0usize..10, 6), perm in 0usize..100) {
            let n = ws.len();
            let g = graph_over(&ws, &parents[..n - 1]);
            let mut toks = ws.clone();
            toks.rotate_left(perm % n);
            let pairs: Vec<(&str, &str)> = toks.iter().map(|t| (t.as_str(), t.as_str())).collect();
            let s = sentence(&pairs);
            let a = align(&s, &g, &resources(), &ReliabilityTable::default(), &AlignConfig::default());
            for node in g.nodes() {
                let tok = a.get(node.id).unwrap();
                prop_assert_eq!(&s.token(tok).text, &node.title);
            }
        }
    }
}
