//! Annotated sentences and their JSON Lines encoding.
//!
//! One record per line:
//!
//! ```text
//! {"id":"s1","tokens":["He","ran"],"pos":["PRP","VBD"],"lemmas":["he","run"],
//!  "ner":["O","O"],"deps":[[1,0,"nsubj"],[null,1,"root"]],"coref":[[0]]}
//! ```
//!
//! `deps` entries are `[head, dependent, relation]` with `null` for the root.

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::graph::Span;

pub const LEFT_SENTINEL: &str = "<S>";
pub const RIGHT_SENTINEL: &str = "</S>";
pub const ROOT: &str = "ROOT";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub lower: String,
    pub pos: String,
    pub lemma: String,
    pub ner: String,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepArc {
    pub head: Option<usize>,
    pub dependent: usize,
    pub relation: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub id: String,
    pub tokens: Vec<Token>,
    pub deps: Vec<DepArc>,
    pub coref_chains: Vec<Vec<usize>>,
    /// Incoming arc index per token.
    parent_arc: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    tokens: Vec<String>,
    pos: Vec<String>,
    lemmas: Vec<String>,
    ner: Vec<String>,
    deps: Vec<(Option<usize>, usize, String)>,
    #[serde(default)]
    coref: Vec<Vec<usize>>,
}

/// Why a sentence failed validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SentenceDefect {
    LayerLength { layer: &'static str, len: usize },
    EmptyToken(usize),
    IndexOutOfRange(usize),
    IncomingArcs { token: usize, count: usize },
    Cycle(usize),
}

impl std::fmt::Display for SentenceDefect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SentenceDefect::LayerLength { layer, len } => {
                write!(f, "layer {layer} has {len} entries")
            }
            SentenceDefect::EmptyToken(i) => write!(f, "token {i} is empty"),
            SentenceDefect::IndexOutOfRange(i) => write!(f, "token index {i} out of range"),
            SentenceDefect::IncomingArcs { token, count } => {
                write!(f, "token {token} has {count} incoming dependency arcs")
            }
            SentenceDefect::Cycle(i) => write!(f, "dependency cycle through token {i}"),
        }
    }
}

pub struct TokenSpec<'a> {
    pub text: &'a str,
    pub pos: &'a str,
    pub lemma: &'a str,
    pub ner: &'a str,
}

impl AnnotatedSentence {
    /// Builds and validates a sentence.
    pub fn new(
        id: &str,
        tokens: &[TokenSpec<'_>],
        deps: Vec<DepArc>,
        coref_chains: Vec<Vec<usize>>,
    ) -> Result<AnnotatedSentence, SentenceDefect> {
        let tokens: Vec<Token> = tokens
            .iter()
            .enumerate()
            .map(|(index, t)| Token {
                text: t.text.to_string(),
                lower: t.text.to_lowercase(),
                pos: t.pos.to_string(),
                lemma: t.lemma.to_string(),
                ner: t.ner.to_string(),
                index,
            })
            .collect();
        let n = tokens.len();
        if let Some(t) = tokens.iter().find(|t| t.text.is_empty()) {
            return Err(SentenceDefect::EmptyToken(t.index));
        }
        let mut parent_arc = vec![usize::MAX; n];
        let mut counts = vec![0usize; n];
        for (a, arc) in deps.iter().enumerate() {
            if arc.dependent >= n {
                return Err(SentenceDefect::IndexOutOfRange(arc.dependent));
            }
            if let Some(h) = arc.head {
                if h >= n {
                    return Err(SentenceDefect::IndexOutOfRange(h));
                }
            }
            counts[arc.dependent] += 1;
            parent_arc[arc.dependent] = a;
        }
        if let Some((token, &count)) = counts.iter().enumerate().find(|(_, &c)| c != 1) {
            return Err(SentenceDefect::IncomingArcs { token, count });
        }
        for chain in &coref_chains {
            if let Some(&i) = chain.iter().find(|&&i| i >= n) {
                return Err(SentenceDefect::IndexOutOfRange(i));
            }
        }
        let s = AnnotatedSentence {
            id: id.to_string(),
            tokens,
            deps,
            coref_chains,
            parent_arc,
        };
        for i in 0..n {
            s.depth_checked(i).ok_or(SentenceDefect::Cycle(i))?;
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, i: usize) -> &Token {
        &self.tokens[i]
    }

    /// The incoming arc of token `i`.
    pub fn parent(&self, i: usize) -> &DepArc {
        &self.deps[self.parent_arc[i]]
    }

    pub fn children(&self, i: usize) -> impl Iterator<Item = &DepArc> {
        self.deps.iter().filter(move |a| a.head == Some(i))
    }

    fn depth_checked(&self, i: usize) -> Option<usize> {
        let mut cur = i;
        for depth in 0..=self.len() {
            match self.parent(cur).head {
                None => return Some(depth),
                Some(h) => cur = h,
            }
        }
        None
    }

    /// Distance from the dependency root (root token has depth 0).
    pub fn depth(&self, i: usize) -> usize {
        self.depth_checked(i).expect("validated dependency tree")
    }

    pub fn in_coref_chain(&self, i: usize) -> bool {
        self.coref_chains.iter().any(|c| c.contains(&i))
    }

    pub fn span_texts(&self, span: Span) -> Vec<&str> {
        span.indices()
            .map(|i| self.tokens[i].text.as_str())
            .collect()
    }

    /// Lowercased, space-joined text of a span (the dictionary key).
    pub fn span_key(&self, span: Span) -> String {
        span.indices()
            .map(|i| self.tokens[i].lower.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Token that dominates the span syntactically (shallowest, then leftmost).
    pub fn span_head(&self, span: Span) -> usize {
        span.indices()
            .min_by_key(|&i| (self.depth(i), i))
            .expect("non-empty span")
    }

    /// Canonical JSON Lines encoding (no trailing newline).
    pub fn to_json_line(&self) -> String {
        let rec = Record {
            id: self.id.clone(),
            tokens: self.tokens.iter().map(|t| t.text.clone()).collect(),
            pos: self.tokens.iter().map(|t| t.pos.clone()).collect(),
            lemmas: self.tokens.iter().map(|t| t.lemma.clone()).collect(),
            ner: self.tokens.iter().map(|t| t.ner.clone()).collect(),
            deps: self
                .deps
                .iter()
                .map(|a| (a.head, a.dependent, a.relation.clone()))
                .collect(),
            coref: self.coref_chains.clone(),
        };
        serde_json::to_string(&rec).expect("record serialisation")
    }
}

/// Parses annotation records, one per non-blank line.
pub fn parse_annotations(text: &str, path: &str) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let mut out = Vec::new();
    let mut ids = std::collections::BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |msg: String| CorpusError::Malformed {
            path: path.to_string(),
            line: line_no,
            msg,
        };
        let rec: Record = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let n = rec.tokens.len();
        for (layer, len) in [
            ("pos", rec.pos.len()),
            ("lemmas", rec.lemmas.len()),
            ("ner", rec.ner.len()),
        ] {
            if len != n {
                return Err(CorpusError::TokenCountMismatch {
                    id: rec.id.clone(),
                    line: line_no,
                    layer,
                    expected: n,
                    found: len,
                });
            }
        }
        if !ids.insert(rec.id.clone()) {
            return Err(malformed(format!("duplicate sentence id {:?}", rec.id)));
        }
        let specs: Vec<TokenSpec<'_>> = (0..n)
            .map(|i| TokenSpec {
                text: &rec.tokens[i],
                pos: &rec.pos[i],
                lemma: &rec.lemmas[i],
                ner: &rec.ner[i],
            })
            .collect();
        let deps = rec
            .deps
            .iter()
            .map(|(h, d, r)| DepArc {
                head: *h,
                dependent: *d,
                relation: r.clone(),
            })
            .collect();
        let s = AnnotatedSentence::new(&rec.id, &specs, deps, rec.coref.clone())
            .map_err(|d| malformed(format!("sentence {}: {d}", rec.id)))?;
        out.push(s);
    }
    Ok(out)
}

pub fn write_annotations(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&s.to_json_line());
        out.push('\n');
    }
    out
}
