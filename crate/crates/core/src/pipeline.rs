//! Stage drivers shared by the command line and the end-to-end tests, plus
//! the text formats of their artifacts.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::actions::{estimate_reliability, ActionLabel, ReliabilityTable};
use crate::align::align;
use crate::classifier::{
    decode, extract_training, featurize, train, DecodeStats, DictError, DictTable, ExtractError,
    Extraction, FeatureVector, MaxentError, MaxentModel,
};
use crate::config::PipelineConfig;
use crate::corpus::{AnnotatedSentence, CorpusError, LexicalResources, TrainingPair};
use crate::graph::{AmrFragment, AmrGraph};
use crate::relations::{
    connect, score_edges, train_scorer, EdgeScorer, RelationError, ScorerError,
};

pub const CLASSIFIER_FILE: &str = "classifier.model";
pub const SCORER_FILE: &str = "scorer.model";
pub const DICT_FILE: &str = "dict.tsv";
pub const RELIABILITY_FILE: &str = "reliability.tsv";
pub const LABELS_FILE: &str = "labels.tsv";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("classifier: {0}")]
    Maxent(#[from] MaxentError),
    #[error("edge scorer: {0}")]
    Scorer(#[from] ScorerError),
    #[error("dict table: {0}")]
    Dict(#[from] DictError),
    #[error("{file}:{line}: {msg}")]
    Format {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl PipelineError {
    fn format(file: &str, line: usize, msg: impl ToString) -> PipelineError {
        PipelineError::Format {
            file: file.to_string(),
            line,
            msg: msg.to_string(),
        }
    }
}

/// Aligns every pair that has no alignment yet. With `overwrite`, every pair.
pub fn align_pairs(
    pairs: &mut [TrainingPair],
    resources: &LexicalResources,
    config: &PipelineConfig,
    overwrite: bool,
) {
    let table = config.apply_overrides(&ReliabilityTable::default());
    for p in pairs.iter_mut() {
        if overwrite || p.alignment.is_none() {
            p.alignment = Some(align(
                &p.sentence,
                &p.graph,
                resources,
                &table,
                &config.align,
            ));
        }
    }
}

/// Training labels with the reliability table they were derived under.
#[derive(Clone, Debug, PartialEq)]
pub struct Extracted {
    pub extraction: Extraction,
    pub reliability: ReliabilityTable,
}

/// Labels an aligned corpus. With estimation on, reliabilities are first
/// estimated from the corpus under the default table, then the corpus is
/// relabeled with the estimates. Configured overrides win throughout.
pub fn extract(
    pairs: &[TrainingPair],
    resources: &LexicalResources,
    config: &PipelineConfig,
) -> Result<Extracted, ExtractError> {
    let initial = config.apply_overrides(&ReliabilityTable::default());
    let first = extract_training(pairs, resources, &initial)?;
    if !config.estimate_reliability {
        return Ok(Extracted {
            extraction: first,
            reliability: initial,
        });
    }
    let estimated = estimate_reliability(first.labeled_spans(pairs), resources, &first.dict);
    let reliability = config.apply_overrides(&estimated);
    let extraction = extract_training(pairs, resources, &reliability)?;
    Ok(Extracted {
        extraction,
        reliability,
    })
}

/// Everything `parse` needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Models {
    pub classifier: MaxentModel,
    pub scorer: EdgeScorer,
    pub dict: DictTable,
    pub reliability: ReliabilityTable,
}

/// Classifier training instances: one per token of every sentence.
pub fn classifier_examples(
    sentences: &[&AnnotatedSentence],
    labels: &[Vec<ActionLabel>],
    dict: &DictTable,
    resources: &LexicalResources,
) -> Vec<(FeatureVector, ActionLabel)> {
    sentences
        .iter()
        .zip(labels)
        .flat_map(|(s, ls)| {
            ls.iter()
                .enumerate()
                .map(move |(i, &l)| (featurize(i, s, resources, dict), l))
        })
        .collect()
}

/// Trains the classifier on `labels` and the edge scorer on the aligned pairs.
pub fn train_models(
    pairs: &[TrainingPair],
    labels: &[Vec<ActionLabel>],
    dict: DictTable,
    reliability: ReliabilityTable,
    resources: &LexicalResources,
    config: &PipelineConfig,
) -> Result<Models, PipelineError> {
    let sentences: Vec<&AnnotatedSentence> = pairs.iter().map(|p| &p.sentence).collect();
    let examples = classifier_examples(&sentences, labels, &dict, resources);
    let classifier = train(&examples, &config.maxent)?;
    let scorer = train_scorer(pairs, &config.scorer)?;
    Ok(Models {
        classifier,
        scorer,
        dict,
        reliability,
    })
}

/// Per-sentence labels of an extraction, in corpus order.
pub fn sentence_labels(extraction: &Extraction) -> Vec<Vec<ActionLabel>> {
    extraction
        .sentences
        .iter()
        .map(|s| s.labels.clone())
        .collect()
}

/// Extraction and training in one go on aligned pairs.
pub fn train_all(
    pairs: &[TrainingPair],
    resources: &LexicalResources,
    config: &PipelineConfig,
) -> Result<Models, PipelineError> {
    let ex = extract(pairs, resources, config)?;
    let labels = sentence_labels(&ex.extraction);
    train_models(
        pairs,
        &labels,
        ex.extraction.dict,
        ex.reliability,
        resources,
        config,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parse {
    pub graph: AmrGraph,
    pub fragments: Vec<AmrFragment>,
    pub stats: DecodeStats,
}

/// Concept identification then relation identification. A sentence with no
/// fragments parses to a single concept: the lemma of its syntactic root.
pub fn parse_sentence(
    sentence: &AnnotatedSentence,
    models: &Models,
    resources: &LexicalResources,
) -> Result<Parse, RelationError> {
    let (fragments, stats) = decode(sentence, &models.classifier, &models.dict, resources);
    let graph = if fragments.is_empty() {
        let root = sentence.span_head(crate::graph::Span::new(0, sentence.len()));
        AmrGraph::singleton(&sentence.token(root).lemma.to_lowercase())
    } else {
        let edges = score_edges(&fragments, sentence, &models.scorer);
        connect(&fragments, &edges, sentence)?
    };
    Ok(Parse {
        graph,
        fragments,
        stats,
    })
}

/// `id TAB index TAB token TAB label`, one line per token.
pub fn write_labels(sentences: &[&AnnotatedSentence], labels: &[Vec<ActionLabel>]) -> String {
    let mut out = String::new();
    for (s, ls) in sentences.iter().zip(labels) {
        for (i, l) in ls.iter().enumerate() {
            out.push_str(&format!("{}\t{i}\t{}\t{l}\n", s.id, s.token(i).text));
        }
    }
    out
}

/// Reads a labels file back against its sentences. Every token of every
/// sentence must be labeled exactly once.
pub fn parse_labels(
    text: &str,
    file: &str,
    sentences: &[&AnnotatedSentence],
) -> Result<Vec<Vec<ActionLabel>>, PipelineError> {
    let index: std::collections::BTreeMap<&str, usize> = sentences
        .iter()
        .enumerate()
        .map(|(k, s)| (s.id.as_str(), k))
        .collect();
    let mut out: Vec<Vec<Option<ActionLabel>>> =
        sentences.iter().map(|s| vec![None; s.len()]).collect();
    for (n, line) in text.lines().enumerate() {
        let n = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, i, _, label] = fields.as_slice() else {
            return Err(PipelineError::format(
                file,
                n,
                "expected `id TAB index TAB token TAB label`",
            ));
        };
        let &k = index
            .get(id)
            .ok_or_else(|| PipelineError::format(file, n, format!("unknown sentence {id}")))?;
        let i: usize = i
            .parse()
            .ok()
            .filter(|&i| i < sentences[k].len())
            .ok_or_else(|| PipelineError::format(file, n, format!("bad token index {i}")))?;
        let label: ActionLabel = label
            .parse()
            .map_err(|e| PipelineError::format(file, n, e))?;
        if out[k][i].replace(label).is_some() {
            return Err(PipelineError::format(
                file,
                n,
                format!("token {i} of {id} labeled twice"),
            ));
        }
    }
    out.into_iter()
        .zip(sentences)
        .map(|(ls, s)| {
            ls.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| {
                PipelineError::format(file, 0, format!("sentence {} is not fully labeled", s.id))
            })
        })
        .collect()
}

/// `ACTION TAB value` for all nine actions.
pub fn write_reliability(table: &ReliabilityTable) -> String {
    ActionLabel::ALL
        .iter()
        .map(|&a| format!("{a}\t{}\n", table.get(a)))
        .collect()
}

pub fn parse_reliability(text: &str, file: &str) -> Result<ReliabilityTable, PipelineError> {
    let mut t = ReliabilityTable::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| PipelineError::format(file, n + 1, msg);
        let (a, v) = line
            .split_once('\t')
            .ok_or_else(|| err("expected `ACTION TAB value`".into()))?;
        let a: ActionLabel = a.parse().map_err(|e| err(format!("{e}")))?;
        let v: f64 = v.parse().map_err(|_| err(format!("bad value {v:?}")))?;
        t.set(a, v).map_err(|e| err(e.to_string()))?;
    }
    Ok(t)
}

fn read(dir: &Path, name: &str) -> Result<String, PipelineError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl Models {
    /// File name and contents of each model artifact.
    pub fn artifacts(&self) -> Vec<(&'static str, String)> {
        vec![
            (CLASSIFIER_FILE, self.classifier.serialize()),
            (SCORER_FILE, self.scorer.serialize()),
            (DICT_FILE, self.dict.serialize()),
            (RELIABILITY_FILE, write_reliability(&self.reliability)),
        ]
    }

    pub fn load(dir: &Path) -> Result<Models, PipelineError> {
        Ok(Models {
            classifier: MaxentModel::parse(&read(dir, CLASSIFIER_FILE)?)?,
            scorer: EdgeScorer::parse(&read(dir, SCORER_FILE)?)?,
            dict: DictTable::parse(&read(dir, DICT_FILE)?)?,
            reliability: parse_reliability(&read(dir, RELIABILITY_FILE)?, RELIABILITY_FILE)?,
        })
    }
}
