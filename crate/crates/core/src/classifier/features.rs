//! Sparse per-token features for the action classifier.

use std::collections::BTreeMap;

use super::DictTable;
use crate::actions::{execute, verb_frame, ActionLabel};
use crate::corpus::{AnnotatedSentence, LexicalResources, LEFT_SENTINEL, RIGHT_SENTINEL, ROOT};
use crate::graph::{print_penman, Span};

/// Feature name to value; indicators carry 1.0.
pub type FeatureVector = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Capitalization {
    Lower,
    AllCaps,
    InitialCap,
    Mixed,
    NoAlpha,
}

impl Capitalization {
    pub fn of(word: &str) -> Capitalization {
        let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).collect();
        if letters.is_empty() {
            return Capitalization::NoAlpha;
        }
        if letters.iter().all(|c| c.is_lowercase()) {
            Capitalization::Lower
        } else if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
            Capitalization::AllCaps
        } else if letters[0].is_uppercase() && letters[1..].iter().all(|c| c.is_lowercase()) {
            Capitalization::InitialCap
        } else {
            Capitalization::Mixed
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Capitalization::Lower => "Lower",
            Capitalization::AllCaps => "AllCaps",
            Capitalization::InitialCap => "AllInit",
            Capitalization::Mixed => "Mixed",
            Capitalization::NoAlpha => "NoAlpha",
        }
    }
}

fn length_bucket(n: usize) -> &'static str {
    match n {
        0 | 1 => "1",
        2 => "2",
        3 => "3",
        4 => "4",
        5..=7 => "5-7",
        _ => "8+",
    }
}

fn clean(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect()
}

const PRONOUN_TAGS: [&str; 4] = ["PRP", "PRP$", "WP", "WP$"];

/// Max Jaro-Winkler of the token (or its lemma) to any PropBank lemma.
pub fn max_propbank_similarity(word: &str, lemma: &str, resources: &LexicalResources) -> f64 {
    [word, lemma]
        .iter()
        .filter_map(|w| resources.most_similar_lemma(w).map(|(_, s)| s))
        .fold(0.0, f64::max)
}

pub fn featurize(
    index: usize,
    sentence: &AnnotatedSentence,
    resources: &LexicalResources,
    dict: &DictTable,
) -> FeatureVector {
    let mut f = FeatureVector::new();
    let mut on = |name: String| {
        f.insert(clean(&name), 1.0);
    };
    let tok = sentence.token(index);
    let word = |i: isize| -> String {
        if i < 0 {
            LEFT_SENTINEL.to_string()
        } else if i as usize >= sentence.len() {
            RIGHT_SENTINEL.to_string()
        } else {
            sentence.token(i as usize).lower.clone()
        }
    };
    let tag = |i: isize, ner: bool| -> String {
        if i < 0 {
            LEFT_SENTINEL.to_string()
        } else if i as usize >= sentence.len() {
            RIGHT_SENTINEL.to_string()
        } else {
            let t = sentence.token(i as usize);
            if ner {
                t.ner.clone()
            } else {
                t.pos.clone()
            }
        }
    };
    let i = index as isize;
    let (lw, rw) = (word(i - 1), word(i + 1));

    on("bias".into());
    on(format!("w={}", tok.lower));
    on(format!("lw={lw}"));
    on(format!("rw={rw}"));
    on(format!("lw+w={lw}+{}", tok.lower));
    on(format!("w+rw={}+{rw}", tok.lower));
    on(format!("len={}", length_bucket(tok.text.chars().count())));
    if tok.lower.starts_with("non") {
        on("starts_non".into());
    }

    let (lp, rp) = (tag(i - 1, false), tag(i + 1, false));
    on(format!("pos={}", tok.pos));
    on(format!("lpos={lp}"));
    on(format!("rpos={rp}"));
    on(format!("lpos+pos={lp}+{}", tok.pos));
    on(format!("pos+rpos={}+{rp}", tok.pos));

    let arc = sentence.parent(index);
    match arc.head {
        Some(h) => {
            let p = sentence.token(h);
            on(format!("dep_parent={}", p.lower));
            on(format!("dep_parent_pos={}", p.pos));
        }
        None => {
            on(format!("dep_parent={ROOT}"));
            on(format!("dep_parent_pos={ROOT}"));
        }
    }
    on(format!("dep_in={}", arc.relation));
    let mut outgoing = 0;
    for c in sentence.children(index) {
        on(format!("dep_out={}", c.relation));
        outgoing += 1;
    }
    on(format!("dep_out_count={}", outgoing.min(5)));

    let jw = max_propbank_similarity(&tok.lower, &tok.lemma.to_lowercase(), resources);
    if jw >= 0.95 {
        on("jw>=0.95".into());
    }
    if let Ok(frame) = verb_frame(&tok.lemma, resources) {
        on(format!("verb_out={frame}"));
    }
    if let Ok(Some(frag)) = execute(
        ActionLabel::Dict,
        Span::single(index),
        sentence,
        resources,
        dict,
    ) {
        on(format!(
            "dict_out={}",
            print_penman(&frag.graph).expect("stored fragments print")
        ));
    }

    let (ln, rn) = (tag(i - 1, true), tag(i + 1, true));
    on(format!("ner={}", tok.ner));
    on(format!("lner+ner={ln}+{}", tok.ner));
    on(format!("ner+rner={}+{rn}", tok.ner));

    on(format!("cap={}", Capitalization::of(&tok.text).as_str()));

    if let Some(h) = arc.head {
        let rel = arc.relation.as_str();
        if (rel.starts_with("prep_") || rel == "appos") && sentence.token(h).ner != "O" {
            on(format!("ner_parent_arc={rel}"));
        }
    }
    let pronoun = PRONOUN_TAGS.contains(&tok.pos.as_str());
    let coref = sentence.in_coref_chain(index);
    if pronoun {
        on("pronoun".into());
    }
    if coref {
        on("coref".into());
    }
    if pronoun && coref {
        on("pronoun+coref".into());
    }

    f.insert("jw_max".into(), jw);
    if let Some(vec) = resources
        .embeddings
        .as_ref()
        .and_then(|e| e.get(&tok.lower))
    {
        for (d, v) in vec.iter().enumerate() {
            f.insert(format!("emb{d}"), *v);
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::extract::tests::fig1;
    use crate::corpus::Embeddings;

    #[test]
    fn ran_in_fig1() {
        let (s, _, _) = fig1();
        let r = LexicalResources::from_frames_text("run run-01 5\n", "f").unwrap();
        let f = featurize(2, &s, &r, &DictTable::default());
        for k in [
            "w=ran",
            "pos=VBD",
            "verb_out=run-01",
            "jw>=0.95",
            "dep_in=root",
            "bias",
        ] {
            assert_eq!(f.get(k), Some(&1.0), "{k}");
        }
        assert_eq!(f.get("jw_max"), Some(&1.0));
        assert!(f.keys().all(|k| !k.starts_with("dict_out")));
    }

    #[test]
    fn boundaries_and_rover() {
        let (s, _, _) = fig1();
        let r = LexicalResources::default();
        let f = featurize(0, &s, &r, &DictTable::default());
        assert!(f.contains_key("lw=<S>"));
        assert!(f.contains_key("pronoun+coref"));
        let f = featurize(6, &s, &r, &DictTable::default());
        assert!(f.contains_key("cap=AllInit"));
        assert!(f.contains_key("ner=O"));
        assert!(!f.contains_key("coref"));
        assert!(!f.contains_key("pronoun"));
        let f = featurize(7, &s, &r, &DictTable::default());
        assert!(f.contains_key("rw=</S>"));
        assert!(f.contains_key("cap=NoAlpha"));
    }

    #[test]
    fn dict_output_and_embeddings() {
        let (s, _, _) = fig1();
        let mut r = LexicalResources::default();
        r.embeddings = Some(Embeddings::parse("dog 0.5 -1\n", "e").unwrap());
        let mut d = DictTable::default();
        d.add("dog", &crate::graph::parse_penman("(d / dog)").unwrap());
        let f = featurize(5, &s, &r, &d);
        assert!(f.contains_key("dict_out=(d_/_dog)"));
        assert_eq!(f.get("emb1"), Some(&-1.0));
        assert!(f.values().all(|v| v.is_finite()));
    }

    #[test]
    fn capitalization_classes() {
        assert_eq!(Capitalization::of("dog"), Capitalization::Lower);
        assert_eq!(Capitalization::of("NASA"), Capitalization::AllCaps);
        assert_eq!(Capitalization::of("Rover"), Capitalization::InitialCap);
        assert_eq!(Capitalization::of("iPhone"), Capitalization::Mixed);
        assert_eq!(Capitalization::of("1,000"), Capitalization::NoAlpha);
        assert_eq!(Capitalization::of("A"), Capitalization::InitialCap);
    }
}
