//! Sparse binary feature extraction for the taggers.
//!
//! Each token yields the word form, the two previous and two subsequent
//! forms (with per-offset boundary sentinels), its POS tag, and in
//! autoregressive mode the two previous lexical type labels.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};

pub const BOS1: &str = "<BOS1>";
pub const BOS2: &str = "<BOS2>";
pub const EOS1: &str = "<EOS1>";
pub const EOS2: &str = "<EOS2>";
pub const BOS_T1: &str = "<BOS-T1>";
pub const BOS_T2: &str = "<BOS-T2>";

/// String-to-id vocabulary. Mutable while building, frozen for decoding:
/// a frozen interner never allocates, unseen strings simply look up to None.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Interner {
    #[serde(skip)]
    forward: HashMap<String, u32>,
    reverse: Vec<String>,
    frozen: bool,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Id for `s`, allocating a fresh one unless frozen.
    pub fn intern(&mut self, s: &str) -> Option<u32> {
        if let Some(&id) = self.forward.get(s) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = self.reverse.len() as u32;
        self.forward.insert(s.to_string(), id);
        self.reverse.push(s.to_string());
        Some(id)
    }

    pub fn lookup(&self, s: &str) -> Option<u32> {
        self.forward.get(s).copied()
    }

    pub fn resolve(&self, id: u32) -> Option<&str> {
        self.reverse.get(id as usize).map(|s| s.as_str())
    }

    /// Rebuilds the forward map after deserialization.
    pub fn rebuild_forward(&mut self) {
        self.forward = self
            .reverse
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
    }
}

/// Sorted, duplicate-free list of active binary feature ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ids: Vec<u32>,
}

impl FeatureVector {
    pub fn from_ids(mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        FeatureVector { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateConfig {
    pub autoregressive: bool,
    pub use_pos: bool,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            autoregressive: false,
            use_pos: true,
        }
    }
}

impl TemplateConfig {
    pub fn autoregressive() -> Self {
        TemplateConfig {
            autoregressive: true,
            use_pos: true,
        }
    }

    /// Number of feature strings emitted per token.
    pub fn arity(&self) -> usize {
        let mut n = 5; // w0, w-1, w-2, w+1, w+2
        if self.use_pos {
            n += 1;
        }
        if self.autoregressive {
            n += 2;
        }
        n
    }
}

/// The previous-tag pair for position `index`, taken from the label history
/// with boundary sentinels. Used both in training (gold history) and greedy
/// decoding (the model's own history).
pub fn prev_tag_pair(history: &[String], index: usize) -> (String, String) {
    let t1 = if index >= 1 {
        history[index - 1].clone()
    } else {
        BOS_T1.to_string()
    };
    let t2 = if index >= 2 {
        history[index - 2].clone()
    } else {
        BOS_T2.to_string()
    };
    (t1, t2)
}

/// Emits the raw feature strings for one token, in template order.
pub fn extract_feature_strings(
    sentence: &Sentence,
    index: usize,
    prev_tags: Option<(&str, &str)>,
    config: &TemplateConfig,
) -> Result<Vec<String>> {
    let n = sentence.tokens.len();
    if index >= n {
        return Err(Error::Validation(format!(
            "token index {index} out of range for sentence {} of length {n}",
            sentence.id
        )));
    }
    if config.autoregressive != prev_tags.is_some() {
        return Err(Error::Validation(
            "prev_tags must be supplied exactly when the template is autoregressive".to_string(),
        ));
    }

    let form = |i: isize, sentinel: &str| -> String {
        if i < 0 || i as usize >= n {
            sentinel.to_string()
        } else {
            sentence.tokens[i as usize].form.clone()
        }
    };

    let i = index as isize;
    let mut feats = Vec::with_capacity(config.arity());
    feats.push(format!("w0={}", sentence.tokens[index].form));
    feats.push(format!("w-1={}", form(i - 1, BOS1)));
    feats.push(format!("w-2={}", form(i - 2, BOS2)));
    feats.push(format!("w+1={}", form(i + 1, EOS1)));
    feats.push(format!("w+2={}", form(i + 2, EOS2)));
    if config.use_pos {
        feats.push(format!("p0={}", sentence.tokens[index].pos));
    }
    if let Some((t1, t2)) = prev_tags {
        feats.push(format!("t-1={t1}"));
        feats.push(format!("t-2={t2}"));
    }
    Ok(feats)
}

/// Interns feature strings into a vector. With a frozen interner, unseen
/// features are dropped (equivalent to a zero weight).
pub fn vectorize(strings: &[String], interner: &mut Interner) -> FeatureVector {
    let ids = strings
        .iter()
        .filter_map(|s| interner.intern(s))
        .collect::<Vec<_>>();
    FeatureVector::from_ids(ids)
}

/// Extracts the feature vector for one token against an existing vocabulary.
pub fn extract_features(
    sentence: &Sentence,
    index: usize,
    prev_tags: Option<(&str, &str)>,
    config: &TemplateConfig,
    interner: &mut Interner,
) -> Result<FeatureVector> {
    let strings = extract_feature_strings(sentence, index, prev_tags, config)?;
    Ok(vectorize(&strings, interner))
}

/// Builds the frozen training vocabulary: every feature string occurring in
/// training extraction is kept (no frequency cutoff). Autoregressive
/// templates use the gold previous tags.
pub fn build_vocabulary(train: &Corpus, config: &TemplateConfig) -> Result<Interner> {
    let mut interner = Interner::new();
    for sent in &train.sentences {
        let gold: Vec<String> = sent
            .tokens
            .iter()
            .map(|t| t.gold_tag.clone().unwrap_or_default())
            .collect();
        for i in 0..sent.tokens.len() {
            let prev = if config.autoregressive {
                let (t1, t2) = prev_tag_pair(&gold, i);
                Some((t1, t2))
            } else {
                None
            };
            let prev_ref = prev.as_ref().map(|(a, b)| (a.as_str(), b.as_str()));
            let strings = extract_feature_strings(sent, i, prev_ref, config)?;
            for s in &strings {
                interner.intern(s);
            }
        }
    }
    interner.freeze();
    Ok(interner)
}
