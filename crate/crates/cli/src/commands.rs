//! Subcommand bodies. Each returns its files without touching `--out`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use amr_core::align::{evaluate_alignment, AlignError};
use amr_core::classifier::{DictTable, ExtractError, MaxentModel};
use amr_core::config::{ConfigError, PipelineConfig};
use amr_core::corpus::{
    pair_records, parse_alignments, parse_amr_file, parse_annotations, write_alignments,
    write_amr_record, AmrRecord, AnnotatedSentence, CorpusError, LexicalResources, TrainingPair,
};
use amr_core::eval::{
    action_accuracy, render_distribution, render_smatch, smatch, EvalError, SmatchResult,
};
use amr_core::pipeline::{
    self, parse_labels, parse_reliability, sentence_labels, train_all, train_models, write_labels,
    write_reliability, Models, PipelineError, CLASSIFIER_FILE, DICT_FILE, LABELS_FILE,
    RELIABILITY_FILE, SCORER_FILE,
};
use amr_core::relations::{EdgeScorer, RelationError, ScorerError};

use crate::output::sha256_hex;
use crate::CorpusArgs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Data(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> CliError {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(
    CorpusError,
    PipelineError,
    ExtractError,
    EvalError,
    ScorerError
);

impl From<RelationError> for CliError {
    fn from(e: RelationError) -> CliError {
        CliError::Internal(e.to_string())
    }
}

/// Files to write, the inputs they came from, and a line for stdout.
#[derive(Default)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub inputs: Vec<(PathBuf, String)>,
    pub summary: String,
}

impl RunOutput {
    fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        self.inputs
            .push((path.to_path_buf(), sha256_hex(text.as_bytes())));
        Ok(text)
    }

    fn file(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text));
    }

    fn sentences(&mut self, path: &Path) -> Result<Vec<AnnotatedSentence>, CliError> {
        let text = self.read(path)?;
        Ok(parse_annotations(&text, &path.display().to_string())?)
    }

    fn amr(&mut self, path: &Path) -> Result<Vec<AmrRecord>, CliError> {
        let text = self.read(path)?;
        Ok(parse_amr_file(&text, &path.display().to_string())?)
    }

    fn pairs(&mut self, amr: &Path, sentences: &Path) -> Result<Vec<TrainingPair>, CliError> {
        let s = self.sentences(sentences)?;
        let r = self.amr(amr)?;
        Ok(pair_records(s, r)?)
    }

    /// The corpus with given alignments attached and the rest aligned.
    /// Returns the pairs and how many alignments came from the file.
    fn aligned(
        &mut self,
        args: &CorpusArgs,
        resources: &LexicalResources,
        config: &PipelineConfig,
    ) -> Result<(Vec<TrainingPair>, usize), CliError> {
        let mut pairs = self.pairs(&args.amr, &args.sentences)?;
        let mut given = 0;
        if let Some(path) = &args.alignments {
            let text = self.read(path)?;
            let map = parse_alignments(&text, &path.display().to_string(), &pairs)?;
            for p in pairs.iter_mut() {
                if let Some(a) = map.get(p.id()) {
                    if !a.is_total(&p.graph) {
                        return Err(CliError::Data(format!(
                            "{}: alignment for {} does not cover every node",
                            path.display(),
                            p.id()
                        )));
                    }
                    p.alignment = Some(a.clone());
                    given += 1;
                }
            }
        }
        pipeline::align_pairs(&mut pairs, resources, config, false);
        Ok((pairs, given))
    }
}

fn resources(config: &PipelineConfig) -> Result<LexicalResources, CliError> {
    Ok(config.resources()?)
}

pub fn align(args: &CorpusArgs, config: &PipelineConfig) -> Result<RunOutput, CliError> {
    let r = resources(config)?;
    let mut out = RunOutput::default();
    let (pairs, given) = out.aligned(args, &r, config)?;
    out.file("alignments.tsv", write_alignments(&pairs));
    out.summary = format!(
        "aligned {} sentences ({given} given)\n",
        pairs.len() - given
    );
    Ok(out)
}

pub fn extract(args: &CorpusArgs, config: &PipelineConfig) -> Result<RunOutput, CliError> {
    let r = resources(config)?;
    let mut out = RunOutput::default();
    let (pairs, _) = out.aligned(args, &r, config)?;
    let ex = pipeline::extract(&pairs, &r, config)?;
    let sentences: Vec<&AnnotatedSentence> = pairs.iter().map(|p| &p.sentence).collect();
    out.file(
        LABELS_FILE,
        write_labels(&sentences, &sentence_labels(&ex.extraction)),
    );
    out.file(DICT_FILE, ex.extraction.dict.serialize());
    out.file(RELIABILITY_FILE, write_reliability(&ex.reliability));
    out.summary = render_distribution(&ex.extraction.label_counts());
    Ok(out)
}

pub fn train(
    args: &CorpusArgs,
    extracted: Option<&Path>,
    config: &PipelineConfig,
) -> Result<RunOutput, CliError> {
    let r = resources(config)?;
    let mut out = RunOutput::default();
    let (pairs, _) = out.aligned(args, &r, config)?;
    let models = match extracted {
        None => train_all(&pairs, &r, config)?,
        Some(dir) => {
            let sentences: Vec<&AnnotatedSentence> = pairs.iter().map(|p| &p.sentence).collect();
            let labels_path = dir.join(LABELS_FILE);
            let labels = parse_labels(
                &out.read(&labels_path)?,
                &labels_path.display().to_string(),
                &sentences,
            )?;
            let dict =
                DictTable::parse(&out.read(&dir.join(DICT_FILE))?).map_err(PipelineError::from)?;
            let rel_path = dir.join(RELIABILITY_FILE);
            let reliability =
                parse_reliability(&out.read(&rel_path)?, &rel_path.display().to_string())?;
            train_models(&pairs, &labels, dict, reliability, &r, config)?
        }
    };
    for (name, text) in models.artifacts() {
        out.file(name, text);
    }
    out.summary = format!(
        "trained on {} sentences; classifier stopped after {} iterations\n",
        pairs.len(),
        models.classifier.iterations
    );
    Ok(out)
}

fn load_models(out: &mut RunOutput, dir: &Path) -> Result<Models, CliError> {
    let classifier =
        MaxentModel::parse(&out.read(&dir.join(CLASSIFIER_FILE))?).map_err(PipelineError::from)?;
    let scorer = EdgeScorer::parse(&out.read(&dir.join(SCORER_FILE))?)?;
    let dict = DictTable::parse(&out.read(&dir.join(DICT_FILE))?).map_err(PipelineError::from)?;
    let rel_path = dir.join(RELIABILITY_FILE);
    let reliability = parse_reliability(&out.read(&rel_path)?, &rel_path.display().to_string())?;
    Ok(Models {
        classifier,
        scorer,
        dict,
        reliability,
    })
}

pub fn parse(
    models: &Path,
    sentences: &Path,
    config: &PipelineConfig,
) -> Result<RunOutput, CliError> {
    let r = resources(config)?;
    let mut out = RunOutput::default();
    let models = load_models(&mut out, models)?;
    let sentences = out.sentences(sentences)?;
    let mut text = String::new();
    let mut fallbacks = 0;
    for s in &sentences {
        let parse = pipeline::parse_sentence(s, &models, &r)?;
        fallbacks += parse.stats.fallbacks;
        text.push_str(&write_amr_record(&s.id, &s.text(), &parse.graph));
    }
    out.file("parses.amr", text);
    out.summary = format!(
        "parsed {} sentences ({fallbacks} action fallbacks)\n",
        sentences.len()
    );
    Ok(out)
}

pub fn eval_smatch(
    pred: &Path,
    gold: &Path,
    config: &PipelineConfig,
) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::default();
    let predicted: BTreeMap<String, AmrRecord> = out
        .amr(pred)?
        .into_iter()
        .map(|r| (r.id.clone(), r))
        .collect();
    let gold_records = out.amr(gold)?;
    if let Some(id) = predicted
        .keys()
        .find(|id| !gold_records.iter().any(|g| &g.id == *id))
    {
        return Err(CliError::Data(format!(
            "{}: id {id:?} has no gold graph",
            pred.display()
        )));
    }
    let mut rows = String::from("id\tprecision\trecall\tf1\n");
    let mut results = Vec::new();
    for g in &gold_records {
        let p = predicted.get(&g.id).ok_or_else(|| {
            CliError::Data(format!("{}: no prediction for {:?}", pred.display(), g.id))
        })?;
        let s = smatch(&p.graph, &g.graph, config.smatch_restarts, config.seed);
        rows.push_str(&format!(
            "{}\t{:.4}\t{:.4}\t{:.4}\n",
            g.id, s.precision, s.recall, s.f1
        ));
        results.push(s);
    }
    let total = SmatchResult::sum(&results);
    rows.push_str(&format!(
        "total\t{:.4}\t{:.4}\t{:.4}\n",
        total.precision, total.recall, total.f1
    ));
    out.file("smatch.tsv", rows);
    out.summary = render_smatch(&total);
    Ok(out)
}

pub fn eval_actions(pred: &Path, gold: &Path, sentences: &Path) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::default();
    let sentences = out.sentences(sentences)?;
    let gold_text = out.read(gold)?;
    // Scored over the sentences the gold file labels.
    let labeled: std::collections::BTreeSet<&str> = gold_text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split('\t').next())
        .collect();
    let refs: Vec<&AnnotatedSentence> = sentences
        .iter()
        .filter(|s| labeled.contains(s.id.as_str()))
        .collect();
    let g = parse_labels(&gold_text, &gold.display().to_string(), &refs)?;
    let pred_text: String = {
        let text = out.read(pred)?;
        text.lines()
            .filter(|l| l.split('\t').next().is_some_and(|id| labeled.contains(id)))
            .map(|l| format!("{l}\n"))
            .collect()
    };
    let p = parse_labels(&pred_text, &pred.display().to_string(), &refs)?;
    let flat = |ls: Vec<Vec<_>>| ls.into_iter().flatten().collect::<Vec<_>>();
    let acc = action_accuracy(&flat(p), &flat(g))?;
    out.file("actions.tsv", acc.render());
    out.summary = format!(
        "token accuracy {:.4} ({}/{})\n",
        acc.accuracy(),
        acc.correct,
        acc.total
    );
    Ok(out)
}

pub fn eval_align(
    pred: &Path,
    gold: &Path,
    amr: &Path,
    sentences: &Path,
) -> Result<RunOutput, CliError> {
    let mut out = RunOutput::default();
    let pairs = out.pairs(amr, sentences)?;
    let p = parse_alignments(&out.read(pred)?, &pred.display().to_string(), &pairs)?;
    let g = parse_alignments(&out.read(gold)?, &gold.display().to_string(), &pairs)?;
    let mut rows = String::from("id\tnodes\taccuracy\n");
    let (mut same, mut nodes) = (0usize, 0usize);
    for (id, gold_alignment) in &g {
        let predicted = p.get(id).ok_or_else(|| {
            CliError::Data(format!("{}: no alignment for {id:?}", pred.display()))
        })?;
        let acc = evaluate_alignment(predicted, gold_alignment)
            .map_err(|e: AlignError| CliError::Data(format!("{id}: {e}")))?;
        let n = gold_alignment.len();
        same += (acc * n as f64).round() as usize;
        nodes += n;
        rows.push_str(&format!("{id}\t{n}\t{acc:.4}\n"));
    }
    if nodes == 0 {
        return Err(CliError::Data(format!("{}: no alignments", gold.display())));
    }
    let total = same as f64 / nodes as f64;
    rows.push_str(&format!("total\t{nodes}\t{total:.4}\n"));
    out.file("align_eval.tsv", rows);
    out.summary = format!("alignment accuracy {total:.4} ({same}/{nodes} nodes)\n");
    Ok(out)
}

pub fn report(args: &CorpusArgs, config: &PipelineConfig) -> Result<RunOutput, CliError> {
    let r = resources(config)?;
    let mut out = RunOutput::default();
    let (pairs, _) = out.aligned(args, &r, config)?;
    let ex = pipeline::extract(&pairs, &r, config)?;
    let table = render_distribution(&ex.extraction.label_counts());
    out.file("report.tsv", table.clone());
    out.summary = table;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        let config = CliError::from(ConfigError::UnknownKey("x".into()));
        assert_eq!(config.exit_code(), 1);
        assert_eq!(CliError::from(EvalError::Empty).exit_code(), 2);
        assert_eq!(CliError::Internal("x".into()).exit_code(), 3);
    }
}
