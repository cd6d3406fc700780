//! The nine derivation actions, their reliabilities and applicability tests.

mod dates;
mod numbers;
mod similarity;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::classifier::DictTable;
use crate::corpus::{AnnotatedSentence, LexicalResources};
use crate::graph::{AmrFragment, GraphBuilder, NodeKind, Span};

pub use dates::{month_number, parse_date, DateFields};
pub use numbers::parse_number;
pub use similarity::{jaro, jaro_winkler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionLabel {
    Identity,
    None,
    Verb,
    Value,
    Lemma,
    Name,
    Person,
    Date,
    Dict,
}

impl ActionLabel {
    /// Canonical order; also the class index order of the classifier.
    pub const ALL: [ActionLabel; 9] = [
        ActionLabel::Identity,
        ActionLabel::None,
        ActionLabel::Verb,
        ActionLabel::Value,
        ActionLabel::Lemma,
        ActionLabel::Name,
        ActionLabel::Person,
        ActionLabel::Date,
        ActionLabel::Dict,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> ActionLabel {
        ActionLabel::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionLabel::Identity => "IDENTITY",
            ActionLabel::None => "NONE",
            ActionLabel::Verb => "VERB",
            ActionLabel::Value => "VALUE",
            ActionLabel::Lemma => "LEMMA",
            ActionLabel::Name => "NAME",
            ActionLabel::Person => "PERSON",
            ActionLabel::Date => "DATE",
            ActionLabel::Dict => "DICT",
        }
    }

    /// Actions that consume a whole span; the rest work on single tokens.
    pub fn is_span_action(self) -> bool {
        matches!(
            self,
            ActionLabel::Name
                | ActionLabel::Person
                | ActionLabel::Date
                | ActionLabel::Value
                | ActionLabel::Dict
        )
    }

    /// Position in the fixed tie-break order (lower wins):
    /// NONE, IDENTITY, PERSON, NAME, DATE, VERB, LEMMA, VALUE, DICT.
    pub fn tie_rank(self) -> usize {
        match self {
            ActionLabel::None => 0,
            ActionLabel::Identity => 1,
            ActionLabel::Person => 2,
            ActionLabel::Name => 3,
            ActionLabel::Date => 4,
            ActionLabel::Verb => 5,
            ActionLabel::Lemma => 6,
            ActionLabel::Value => 7,
            ActionLabel::Dict => 8,
        }
    }

    /// Actions whose reliability is fixed at 1.0.
    pub fn is_pinned(self) -> bool {
        matches!(
            self,
            ActionLabel::Identity | ActionLabel::Name | ActionLabel::Person | ActionLabel::None
        )
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown action label {0:?}")]
pub struct UnknownLabel(pub String);

impl FromStr for ActionLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<ActionLabel, UnknownLabel> {
        ActionLabel::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActionError {
    #[error("{action} works on single tokens, got a span of {len}")]
    SpanTooLong { action: ActionLabel, len: usize },
    #[error("span {span} is outside a sentence of {len} tokens")]
    SpanOutOfRange { span: Span, len: usize },
    #[error("no number in {text:?}")]
    NotANumber { text: String },
    #[error("no date in {text:?}")]
    NotADate { text: String },
    #[error("no dictionary entry for {key:?}")]
    DictMiss { key: String },
    #[error("the PropBank frame list is empty")]
    NoFrames,
    #[error("no candidate actions")]
    NoCandidates,
    #[error("reliability of {action} must be in [0, 1], got {value}")]
    BadReliability { action: ActionLabel, value: f64 },
    #[error("reliability of {0} is fixed at 1.0")]
    PinnedReliability(ActionLabel),
}

/// Per-action probability of deriving the right fragment given the right label.
#[derive(Clone, Debug, PartialEq)]
pub struct ReliabilityTable {
    values: [f64; 9],
}

impl Default for ReliabilityTable {
    fn default() -> ReliabilityTable {
        let mut values = [1.0; 9];
        values[ActionLabel::Verb.index()] = 0.94;
        values[ActionLabel::Date.index()] = 0.92;
        values[ActionLabel::Lemma.index()] = 0.90;
        values[ActionLabel::Value.index()] = 0.90;
        values[ActionLabel::Dict.index()] = 0.67;
        ReliabilityTable { values }
    }
}

impl ReliabilityTable {
    pub fn get(&self, action: ActionLabel) -> f64 {
        self.values[action.index()]
    }

    /// Overrides one entry. Pinned actions only accept 1.0.
    pub fn set(&mut self, action: ActionLabel, value: f64) -> Result<(), ActionError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(ActionError::BadReliability { action, value });
        }
        if action.is_pinned() && value != 1.0 {
            return Err(ActionError::PinnedReliability(action));
        }
        self.values[action.index()] = value;
        Ok(())
    }

    /// True when `a` is preferred over `b`.
    pub fn prefers(&self, a: ActionLabel, b: ActionLabel) -> bool {
        let (ra, rb) = (self.get(a), self.get(b));
        ra > rb || (ra == rb && a.tie_rank() < b.tie_rank())
    }

    /// All actions, most preferred first.
    pub fn ranked(&self) -> Vec<ActionLabel> {
        let mut all = ActionLabel::ALL.to_vec();
        all.sort_by(|&a, &b| {
            self.get(b)
                .total_cmp(&self.get(a))
                .then(a.tie_rank().cmp(&b.tie_rank()))
        });
        all
    }

    /// Pulls DICT strictly below every other action.
    fn clamp_dict(&mut self) {
        let floor = ActionLabel::ALL
            .into_iter()
            .filter(|&a| a != ActionLabel::Dict)
            .map(|a| self.get(a))
            .fold(f64::INFINITY, f64::min);
        let d = ActionLabel::Dict.index();
        if self.values[d] >= floor {
            self.values[d] = (floor - 0.01).max(0.0);
        }
    }
}

pub fn most_reliable(
    candidates: &BTreeSet<ActionLabel>,
    table: &ReliabilityTable,
) -> Result<ActionLabel, ActionError> {
    let mut it = candidates.iter().copied();
    let first = it.next().ok_or(ActionError::NoCandidates)?;
    Ok(it.fold(
        first,
        |best, a| if table.prefers(a, best) { a } else { best },
    ))
}

fn single_token(action: ActionLabel, span: Span) -> Result<usize, ActionError> {
    if span.len() != 1 {
        return Err(ActionError::SpanTooLong {
            action,
            len: span.len(),
        });
    }
    Ok(span.start)
}

/// Frame VERB would produce for a lemma.
pub fn verb_frame(lemma: &str, resources: &LexicalResources) -> Result<String, ActionError> {
    let (best, _) = resources
        .most_similar_lemma(&lemma.to_lowercase())
        .ok_or(ActionError::NoFrames)?;
    Ok(resources.most_frequent_sense(best))
}

fn name_builder(texts: &[&str]) -> (GraphBuilder, crate::graph::NodeId) {
    let mut b = GraphBuilder::new();
    let name = b.concept("name");
    for (i, t) in texts.iter().enumerate() {
        let op = b.string(t);
        b.edge(name, op, &format!("op{}", i + 1));
    }
    (b, name)
}

/// Runs one action over a span.
///
/// `Ok(None)` is returned only for NONE; every failure to derive a fragment
/// is an error.
pub fn execute(
    action: ActionLabel,
    span: Span,
    sentence: &AnnotatedSentence,
    resources: &LexicalResources,
    dict: &DictTable,
) -> Result<Option<AmrFragment>, ActionError> {
    if span.end > sentence.len() {
        return Err(ActionError::SpanOutOfRange {
            span,
            len: sentence.len(),
        });
    }
    let one = |title: &str| AmrFragment::new(crate::graph::AmrGraph::singleton(title), span);
    let built = |b: GraphBuilder, root| {
        let g = b.build(root).expect("action output is a valid graph");
        AmrFragment::new(g, span)
    };
    let fragment = match action {
        ActionLabel::None => return Ok(None),
        ActionLabel::Identity => one(&sentence.token(single_token(action, span)?).lower),
        ActionLabel::Lemma => one(&sentence
            .token(single_token(action, span)?)
            .lemma
            .to_lowercase()),
        ActionLabel::Verb => {
            let t = sentence.token(single_token(action, span)?);
            one(&verb_frame(&t.lemma, resources)?)
        }
        ActionLabel::Value => {
            let texts = sentence.span_texts(span);
            let v = parse_number(&texts).ok_or_else(|| ActionError::NotANumber {
                text: texts.join(" "),
            })?;
            let mut b = GraphBuilder::new();
            let n = b.number(v);
            built(b, n)
        }
        ActionLabel::Name => {
            let (b, name) = name_builder(&sentence.span_texts(span));
            built(b, name)
        }
        ActionLabel::Person => {
            let (mut b, name) = name_builder(&sentence.span_texts(span));
            let person = b.concept("person");
            b.edge(person, name, "name");
            built(b, person)
        }
        ActionLabel::Date => {
            let texts = sentence.span_texts(span);
            let fields = parse_date(&texts).ok_or_else(|| ActionError::NotADate {
                text: texts.join(" "),
            })?;
            let mut b = GraphBuilder::new();
            let d = b.concept("date-entity");
            for (role, v) in [
                ("year", fields.year),
                ("month", fields.month),
                ("day", fields.day),
            ] {
                if let Some(v) = v {
                    let c = b.number(v);
                    b.edge(d, c, role);
                }
            }
            built(b, d)
        }
        ActionLabel::Dict => {
            let key = sentence.span_key(span);
            let g = dict.lookup(&key).ok_or(ActionError::DictMiss { key })?;
            AmrFragment::new(g.clone(), span)
        }
    };
    Ok(Some(fragment))
}

/// Actions whose output matches `gold` on `span`. DICT is always included
/// for a present fragment; NONE only when `gold` is absent.
pub fn applicable_actions(
    gold: Option<&AmrFragment>,
    span: Span,
    sentence: &AnnotatedSentence,
    resources: &LexicalResources,
) -> BTreeSet<ActionLabel> {
    let Some(gold) = gold else {
        return BTreeSet::from([ActionLabel::None]);
    };
    let empty = DictTable::default();
    let mut out = BTreeSet::from([ActionLabel::Dict]);
    for a in ActionLabel::ALL {
        if matches!(a, ActionLabel::None | ActionLabel::Dict) {
            continue;
        }
        if let Ok(Some(f)) = execute(a, span, sentence, resources, &empty) {
            if f.same_graph(gold) {
                out.insert(a);
            }
        }
    }
    out
}

/// The action a fragment is meant to come from, whether or not that action
/// derives it correctly: the best applicable action if one exists, otherwise
/// a guess from the fragment's shape (dates, numbers, sense-tagged verbs),
/// otherwise DICT. Used to measure action reliability.
pub fn intended_action(
    gold: &AmrFragment,
    span: Span,
    sentence: &AnnotatedSentence,
    resources: &LexicalResources,
    table: &ReliabilityTable,
) -> ActionLabel {
    let mut applicable = applicable_actions(Some(gold), span, sentence, resources);
    applicable.remove(&ActionLabel::Dict);
    if let Ok(a) = most_reliable(&applicable, table) {
        return a;
    }
    let g = &gold.graph;
    let head = g.node(g.root());
    if head.title == "date-entity" {
        return ActionLabel::Date;
    }
    if g.len() == 1 && head.kind == NodeKind::NumericConstant {
        return ActionLabel::Value;
    }
    if g.len() == 1 && span.len() == 1 && head.kind == NodeKind::Concept {
        if let Some((stem, sense)) = head.title.rsplit_once('-') {
            let lemma = sentence.token(span.start).lemma.to_lowercase();
            let sense_tagged = sense.len() == 2 && sense.chars().all(|c| c.is_ascii_digit());
            let nearest = resources.most_similar_lemma(&lemma).map(|(l, _)| l);
            if sense_tagged && nearest == Some(stem) {
                return ActionLabel::Verb;
            }
        }
    }
    ActionLabel::Dict
}

/// A gold fragment (or its absence) over a span, with the action it is
/// attributed to.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSpan {
    pub span: Span,
    pub gold: Option<AmrFragment>,
    pub label: ActionLabel,
}

/// Fraction of spans labeled with each action that the action derives
/// correctly. Pinned actions stay at 1.0, actions that never occur keep the
/// default value, and DICT is scored leave-one-out (the span's own
/// occurrence is removed from the table) and kept strictly lowest.
pub fn estimate_reliability<'a>(
    items: impl IntoIterator<Item = (&'a AnnotatedSentence, &'a LabeledSpan)>,
    resources: &LexicalResources,
    dict: &DictTable,
) -> ReliabilityTable {
    let mut correct = [0usize; 9];
    let mut total = [0usize; 9];
    for (sentence, item) in items {
        let a = item.label;
        let Some(gold) = &item.gold else { continue };
        if a.is_pinned() {
            continue;
        }
        total[a.index()] += 1;
        let ok = if a == ActionLabel::Dict {
            let key = sentence.span_key(item.span);
            dict.lookup_excluding(&key, &gold.graph)
                .is_some_and(|g| crate::graph::is_isomorphic(g, &gold.graph))
        } else {
            matches!(execute(a, item.span, sentence, resources, dict),
                Ok(Some(f)) if f.same_graph(gold))
        };
        if ok {
            correct[a.index()] += 1;
        }
    }
    let mut table = ReliabilityTable::default();
    for a in ActionLabel::ALL {
        if !a.is_pinned() && total[a.index()] > 0 {
            table.values[a.index()] = correct[a.index()] as f64 / total[a.index()] as f64;
        }
    }
    table.clamp_dict();
    table
}
