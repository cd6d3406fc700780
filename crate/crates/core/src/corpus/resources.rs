//! PropBank frame list and optional word embeddings.

use std::collections::BTreeMap;
use std::path::Path;

use super::{read_file, CorpusError};
use crate::actions::jaro_winkler;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub name: String,
    pub freq: u64,
}

impl Frame {
    fn sense(&self) -> u32 {
        self.name
            .rsplit('-')
            .next()
            .and_then(|s| s.parse().ok())
            .unwrap_or(u32::MAX)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl Embeddings {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// `word v1 ... vd` per line; every vector must have the same length.
    pub fn parse(text: &str, path: &str) -> Result<Embeddings, CorpusError> {
        let mut dim = None;
        let mut vectors = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let malformed = |msg: String| CorpusError::Malformed {
                path: path.to_string(),
                line: lineno + 1,
                msg,
            };
            let v: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| malformed(e.to_string()))?;
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(malformed("vector is empty or not finite".into()));
            }
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(malformed(format!("dimension {} differs from {d}", v.len())))
                }
                _ => {}
            }
            vectors.insert(word.to_string(), v);
        }
        Ok(Embeddings {
            dim: dim.unwrap_or(0),
            vectors,
        })
    }
}

/// Frame inventory keyed by lemma, plus optional embeddings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LexicalResources {
    frames: BTreeMap<String, Vec<Frame>>,
    pub embeddings: Option<Embeddings>,
}

const BUNDLED_FRAMES: &str = include_str!("../../data/propbank_frames.txt");

impl LexicalResources {
    /// The small frame list shipped with the crate.
    pub fn bundled() -> LexicalResources {
        LexicalResources::from_frames_text(BUNDLED_FRAMES, "bundled propbank_frames.txt")
            .expect("bundled frame list is valid")
    }

    pub fn load(frames: &Path, embeddings: Option<&Path>) -> Result<LexicalResources, CorpusError> {
        let mut r =
            LexicalResources::from_frames_text(&read_file(frames)?, &frames.display().to_string())?;
        if let Some(e) = embeddings {
            r.embeddings = Some(Embeddings::parse(&read_file(e)?, &e.display().to_string())?);
        }
        Ok(r)
    }

    /// `lemma frame freq` per line, `#` comments allowed.
    pub fn from_frames_text(text: &str, path: &str) -> Result<LexicalResources, CorpusError> {
        let mut frames: BTreeMap<String, Vec<Frame>> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |msg: String| CorpusError::Malformed {
                path: path.to_string(),
                line: lineno + 1,
                msg,
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [lemma, frame, freq] = parts.as_slice() else {
                return Err(malformed("expected `lemma frame freq`".into()));
            };
            let sense = frame
                .strip_prefix(lemma)
                .and_then(|s| s.strip_prefix('-'))
                .filter(|s| s.len() == 2 && s.chars().all(|c| c.is_ascii_digit()));
            if sense.is_none() {
                return Err(malformed(format!(
                    "frame {frame:?} does not match {lemma}-NN"
                )));
            }
            let freq: u64 = freq
                .parse()
                .map_err(|_| malformed(format!("bad frequency {freq:?}")))?;
            frames.entry(lemma.to_string()).or_default().push(Frame {
                name: frame.to_string(),
                freq,
            });
        }
        Ok(LexicalResources {
            frames,
            embeddings: None,
        })
    }

    pub fn frames(&self, lemma: &str) -> Option<&[Frame]> {
        self.frames.get(lemma).map(Vec::as_slice)
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.frames.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// PropBank lemma with the highest Jaro-Winkler similarity to `word`
    /// (ties go to the alphabetically first lemma).
    pub fn most_similar_lemma(&self, word: &str) -> Option<(&str, f64)> {
        if let Some((l, _)) = self.frames.get_key_value(word) {
            return Some((l.as_str(), 1.0));
        }
        let mut best: Option<(&str, f64)> = None;
        for lemma in self.frames.keys() {
            let s = jaro_winkler(word, lemma);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((lemma.as_str(), s));
            }
        }
        best
    }

    /// Most frequent sense of `lemma`; lower sense numbers win ties, and a
    /// lemma without listed frames falls back to `lemma-01`.
    pub fn most_frequent_sense(&self, lemma: &str) -> String {
        self.frames
            .get(lemma)
            .and_then(|fs| {
                fs.iter()
                    .min_by(|a, b| b.freq.cmp(&a.freq).then(a.sense().cmp(&b.sense())))
            })
            .map(|f| f.name.clone())
            .unwrap_or_else(|| format!("{lemma}-01"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_list_parses_and_picks_frequent_sense() {
        let r = LexicalResources::from_frames_text(
            "# test\nrun run-01 50\nrun run-02 80\nsprint sprint-01 9\nsprint sprint-02 3\n",
            "f",
        )
        .unwrap();
        assert_eq!(r.most_frequent_sense("run"), "run-02");
        assert_eq!(r.most_frequent_sense("sprint"), "sprint-01");
        assert_eq!(r.most_frequent_sense("walk"), "walk-01");
        assert_eq!(r.most_similar_lemma("run"), Some(("run", 1.0)));
        assert_eq!(r.most_similar_lemma("sprinting").unwrap().0, "sprint");
    }

    #[test]
    fn frame_pattern_is_checked() {
        assert!(LexicalResources::from_frames_text("run walk-01 3\n", "f").is_err());
        assert!(LexicalResources::from_frames_text("run run-1 3\n", "f").is_err());
        assert!(LexicalResources::from_frames_text("run run-01\n", "f").is_err());
    }

    #[test]
    fn embeddings_share_one_dimension() {
        let e = Embeddings::parse("a 1 2\nb 3 4\n", "e").unwrap();
        assert_eq!(e.dim(), 2);
        assert_eq!(e.get("b"), Some(&[3.0, 4.0][..]));
        assert!(Embeddings::parse("a 1 2\nb 3\n", "e").is_err());
    }

    #[test]
    fn bundled_list_loads() {
        let r = LexicalResources::bundled();
        assert_eq!(r.most_frequent_sense("run"), "run-01");
        assert!(r.frames("sail").is_some());
    }
}
