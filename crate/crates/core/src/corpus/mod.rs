//! Corpus ingestion: annotated sentences, gold AMR files, alignment files and
//! lexical resources.

mod annotation;
mod resources;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::align::Alignment;
use crate::graph::{parse_penman, print_penman, AmrGraph, NodeId, PenmanError};

pub use annotation::{
    parse_annotations, write_annotations, AnnotatedSentence, DepArc, SentenceDefect, Token,
    TokenSpec, LEFT_SENTINEL, RIGHT_SENTINEL, ROOT,
};
pub use resources::{Embeddings, Frame, LexicalResources};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: {source}")]
    Penman {
        path: String,
        line: usize,
        source: PenmanError,
    },
    #[error("sentence {id} (line {line}): layer {layer} has {found} entries, expected {expected}")]
    TokenCountMismatch {
        id: String,
        line: usize,
        layer: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("id {id:?} appears only in {only_in}")]
    OrphanId { id: String, only_in: &'static str },
    #[error("alignment for {id}: unknown node {node:?}")]
    UnknownNode { id: String, node: String },
    #[error("alignment for {id}: token index {index} out of range (sentence has {len} tokens)")]
    TokenOutOfRange {
        id: String,
        index: usize,
        len: usize,
    },
    #[error("alignment for {id}: node {node:?} aligned twice")]
    DuplicateAlignment { id: String, node: String },
}

pub(crate) fn read_file(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// A gold graph with its sentence and, optionally, an alignment.
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub sentence: AnnotatedSentence,
    pub graph: AmrGraph,
    pub alignment: Option<Alignment>,
}

impl TrainingPair {
    pub fn id(&self) -> &str {
        &self.sentence.id
    }
}

/// One block of an AMR corpus file.
#[derive(Clone, Debug)]
pub struct AmrRecord {
    pub id: String,
    pub snt: Option<String>,
    pub graph: AmrGraph,
}

/// Parses blank-line separated Penman blocks with `# ::id` / `# ::snt` comments.
pub fn parse_amr_file(text: &str, path: &str) -> Result<Vec<AmrRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let start = i;
        let mut id = None;
        let mut snt = None;
        let mut body = String::new();
        let mut body_line = None;
        while i < lines.len() && !lines[i].trim().is_empty() {
            let line = lines[i];
            if let Some(comment) = line.trim_start().strip_prefix('#') {
                if let Some(rest) = comment.trim_start().strip_prefix("::id") {
                    id = rest.split_whitespace().next().map(str::to_string);
                } else if let Some(rest) = comment.trim_start().strip_prefix("::snt") {
                    snt = Some(rest.trim().to_string());
                }
            } else {
                body_line.get_or_insert(i + 1);
                body.push_str(line);
                body.push('\n');
            }
            i += 1;
        }
        let malformed = |msg: &str| CorpusError::Malformed {
            path: path.to_string(),
            line: start + 1,
            msg: msg.to_string(),
        };
        let id = id.ok_or_else(|| malformed("block has no # ::id line"))?;
        let body_line = body_line.ok_or_else(|| malformed("block has no graph"))?;
        let graph = parse_penman(&body).map_err(|source| CorpusError::Penman {
            path: path.to_string(),
            line: body_line,
            source,
        })?;
        if !seen.insert(id.clone()) {
            return Err(malformed(&format!("duplicate id {id:?}")));
        }
        records.push(AmrRecord { id, snt, graph });
    }
    Ok(records)
}

pub fn write_amr_record(id: &str, snt: &str, graph: &AmrGraph) -> String {
    let body = print_penman(graph).unwrap_or_else(|e| format!("# unprintable: {e}"));
    format!("# ::id {id}\n# ::snt {snt}\n{body}\n\n")
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    parse_annotations(&read_file(path)?, &path.display().to_string())
}

pub fn load_amr(path: &Path) -> Result<Vec<AmrRecord>, CorpusError> {
    parse_amr_file(&read_file(path)?, &path.display().to_string())
}

/// Pairs annotation records with AMR blocks by id, in annotation order.
pub fn pair_records(
    sentences: Vec<AnnotatedSentence>,
    records: Vec<AmrRecord>,
) -> Result<Vec<TrainingPair>, CorpusError> {
    let mut graphs: BTreeMap<String, AmrGraph> =
        records.into_iter().map(|r| (r.id, r.graph)).collect();
    let mut pairs = Vec::with_capacity(sentences.len());
    for sentence in sentences {
        let graph = graphs
            .remove(&sentence.id)
            .ok_or_else(|| CorpusError::OrphanId {
                id: sentence.id.clone(),
                only_in: "the annotation file",
            })?;
        pairs.push(TrainingPair {
            sentence,
            graph,
            alignment: None,
        });
    }
    if let Some(id) = graphs.into_keys().next() {
        return Err(CorpusError::OrphanId {
            id,
            only_in: "the AMR file",
        });
    }
    Ok(pairs)
}

pub fn load_corpus(
    amr_path: &Path,
    annotations_path: &Path,
) -> Result<Vec<TrainingPair>, CorpusError> {
    pair_records(load_annotations(annotations_path)?, load_amr(amr_path)?)
}

/// Parses `<sentence-id> TAB <node-handle> TAB <token-index>` lines against a corpus.
///
/// Node handles are those of [`AmrGraph::handles`]. Lines starting with `#`
/// and blank lines are ignored. Alignments are returned as read; use
/// [`Alignment::is_total`] where totality is required.
pub fn parse_alignments(
    text: &str,
    path: &str,
    corpus: &[TrainingPair],
) -> Result<BTreeMap<String, Alignment>, CorpusError> {
    let index: BTreeMap<&str, (&TrainingPair, BTreeMap<String, NodeId>)> = corpus
        .iter()
        .map(|p| {
            let handles = p
                .graph
                .handles()
                .into_iter()
                .enumerate()
                .map(|(i, h)| (h, NodeId(i)))
                .collect();
            (p.id(), (p, handles))
        })
        .collect();
    let mut out: BTreeMap<String, Alignment> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |msg: &str| CorpusError::Malformed {
            path: path.to_string(),
            line: lineno + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, node, tok] = fields.as_slice() else {
            return Err(malformed("expected 3 tab-separated fields"));
        };
        let tok: usize = tok
            .trim()
            .parse()
            .map_err(|_| malformed("token index is not a number"))?;
        let (pair, handles) = index.get(id).ok_or_else(|| CorpusError::OrphanId {
            id: id.to_string(),
            only_in: "the alignment file",
        })?;
        let node_id = *handles.get(*node).ok_or_else(|| CorpusError::UnknownNode {
            id: id.to_string(),
            node: node.to_string(),
        })?;
        if tok >= pair.sentence.len() {
            return Err(CorpusError::TokenOutOfRange {
                id: id.to_string(),
                index: tok,
                len: pair.sentence.len(),
            });
        }
        let a = out.entry(id.to_string()).or_default();
        if a.get(node_id).is_some() {
            return Err(CorpusError::DuplicateAlignment {
                id: id.to_string(),
                node: node.to_string(),
            });
        }
        a.insert(node_id, tok);
    }
    Ok(out)
}

pub fn load_alignments(
    path: &Path,
    corpus: &[TrainingPair],
) -> Result<BTreeMap<String, Alignment>, CorpusError> {
    parse_alignments(&read_file(path)?, &path.display().to_string(), corpus)
}

/// Alignment TSV for the pairs that carry an alignment, in corpus order.
pub fn write_alignments(corpus: &[TrainingPair]) -> String {
    let mut out = String::new();
    for p in corpus {
        let Some(a) = &p.alignment else { continue };
        let handles = p.graph.handles();
        for (node, tok) in a.iter() {
            out.push_str(&format!("{}\t{}\t{}\n", p.id(), handles[node.0], tok));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const AMR: &str = "# ::id s1\n# ::snt He ran .\n(r / run-01\n   :ARG0 (h / he))\n\n# ::id s2 ::date x\n(d / dog)\n";
    const ANN: &str = concat!(
        r#"{"id":"s1","tokens":["He","ran","."],"pos":["PRP","VBD","."],"lemmas":["he","run","."],"ner":["O","O","O"],"deps":[[1,0,"nsubj"],[null,1,"root"],[1,2,"punct"]],"coref":[]}"#,
        "\n",
        r#"{"id":"s2","tokens":["dog"],"pos":["NN"],"lemmas":["dog"],"ner":["O"],"deps":[[null,0,"root"]],"coref":[]}"#,
        "\n"
    );

    fn corpus() -> Vec<TrainingPair> {
        pair_records(
            parse_annotations(ANN, "a").unwrap(),
            parse_amr_file(AMR, "g").unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn amr_blocks_parse_with_ids() {
        let recs = parse_amr_file(AMR, "g").unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].snt.as_deref(), Some("He ran ."));
        assert_eq!(recs[1].id, "s2");
    }

    #[test]
    fn empty_inputs_give_empty_corpus() {
        let pairs = pair_records(
            parse_annotations("", "a").unwrap(),
            parse_amr_file("", "g").unwrap(),
        )
        .unwrap();
        assert!(pairs.is_empty());
    }

    #[test]
    fn orphan_ids_are_named() {
        let recs = parse_amr_file("# ::id s1\n(r / run-01 :ARG0 (h / he))\n", "g").unwrap();
        let err = pair_records(parse_annotations(ANN, "a").unwrap(), recs).unwrap_err();
        match err {
            CorpusError::OrphanId { id, .. } => assert_eq!(id, "s2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn penman_errors_report_line() {
        let err = parse_amr_file("\n# ::id s1\n(r / run-01\n", "g").unwrap_err();
        assert!(matches!(err, CorpusError::Penman { line: 3, .. }));
    }

    #[test]
    fn alignment_lines_resolve_handles() {
        let c = corpus();
        let a = parse_alignments("s1\tr\t1\n", "al", &c).unwrap();
        let run = &a["s1"];
        assert_eq!(run.get(NodeId(0)), Some(1));
        assert_eq!(c[0].sentence.token(1).text, "ran");
        assert!(!run.is_total(&c[0].graph));

        assert!(parse_alignments("", "al", &c).unwrap().is_empty());
        assert!(matches!(
            parse_alignments("s1\tr\t1\ns1\tr\t0\n", "al", &c),
            Err(CorpusError::DuplicateAlignment { .. })
        ));
        assert!(matches!(
            parse_alignments("s1\tq\t1\n", "al", &c),
            Err(CorpusError::UnknownNode { .. })
        ));
        assert!(matches!(
            parse_alignments("s1\th\t9\n", "al", &c),
            Err(CorpusError::TokenOutOfRange { index: 9, .. })
        ));
    }

    #[test]
    fn alignment_file_round_trips() {
        let mut c = corpus();
        let text = "s1\tr\t1\ns1\th\t0\ns2\td\t0\n";
        let a = parse_alignments(text, "al", &c).unwrap();
        for p in &mut c {
            p.alignment = a.get(p.id()).cloned();
        }
        assert_eq!(write_alignments(&c), text);
    }
}
