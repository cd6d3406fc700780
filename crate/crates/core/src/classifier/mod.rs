//! Training-label induction, featurisation, the maxent action classifier and
//! decoding.

mod decode;
mod dict;
pub(crate) mod extract;
mod features;
mod maxent;

pub use decode::{
    collapse, decode, decode_labels, predict_distributions, predict_labels, DecodeStats,
};
pub use dict::{DictEntry, DictError, DictTable};
pub use extract::{
    extract_training, induce_fragments, label_sentence, labels_used, pair_tokens, ExtractError,
    Extraction, InducedFragment, Induction, LabeledToken, SentenceLabels,
};
pub use features::{featurize, max_propbank_similarity, Capitalization, FeatureVector};
pub use maxent::{loss_and_gradient, train, Dataset, MaxentError, MaxentModel, TrainConfig};
