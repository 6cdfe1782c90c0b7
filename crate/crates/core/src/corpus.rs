//! Token-classification corpora: loading, validation, conversion and splits.
//!
//! Two on-disk formats are supported. The TSV format is one token per line
//! (`FORM<TAB>POS<TAB>TAG`, the tag column optional), a `# id = X` comment
//! before each sentence and a blank line after it. Since TSV carries no raw
//! text, character spans are synthesized by joining forms with single spaces.
//! The JSONL format stores one sentence object per line with explicit spans
//! and optional gold dependency triples, and is what the parser consumes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Character span into a sentence's raw text, start inclusive, end exclusive.
pub type Span = (usize, usize);

/// Token index range, start inclusive, end exclusive.
pub type TokenRange = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    pub pos: String,
    #[serde(rename = "tag", skip_serializing_if = "Option::is_none")]
    pub gold_tag: Option<String>,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn span(&self) -> Span {
        (self.start, self.end)
    }
}

/// A semantic dependency: head predicate, role label, dependent predicate,
/// with the token ranges of the lexical heads on both sides.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DependencyTriple {
    pub head: String,
    pub head_span: TokenRange,
    pub role: String,
    pub dep: String,
    pub dep_span: TokenRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    #[serde(rename = "text")]
    pub raw_text: String,
    pub tokens: Vec<Token>,
    #[serde(rename = "triples", skip_serializing_if = "Option::is_none")]
    pub gold_triples: Option<BTreeSet<DependencyTriple>>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks the token invariants: non-empty forms, well-ordered
    /// non-overlapping spans that index into the raw text, and forms that
    /// match the indexed text slice.
    pub fn validate(&self) -> Result<()> {
        let mut prev_end = 0usize;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.form.is_empty() {
                return Err(Error::Validation(format!(
                    "sentence {}: token {} has empty form",
                    self.id, i
                )));
            }
            if tok.start >= tok.end {
                return Err(Error::Validation(format!(
                    "sentence {}: token {} has empty span ({}, {})",
                    self.id, i, tok.start, tok.end
                )));
            }
            if i > 0 && tok.start < prev_end {
                return Err(Error::Validation(format!(
                    "sentence {}: token {} span overlaps or precedes token {}",
                    self.id,
                    i,
                    i - 1
                )));
            }
            prev_end = tok.end;
            match self.raw_text.get(tok.start..tok.end) {
                Some(slice) if slice.trim() == tok.form => {}
                Some(slice) => {
                    return Err(Error::Validation(format!(
                        "sentence {}: token {} form {:?} does not match text slice {:?}",
                        self.id, i, tok.form, slice
                    )));
                }
                None => {
                    return Err(Error::Validation(format!(
                        "sentence {}: token {} span ({}, {}) outside text of length {}",
                        self.id,
                        i,
                        tok.start,
                        tok.end,
                        self.raw_text.len()
                    )));
                }
            }
        }
        if let Some(triples) = &self.gold_triples {
            for t in triples {
                for (s, e) in [t.head_span, t.dep_span] {
                    if s >= e || e > self.tokens.len() {
                        return Err(Error::Validation(format!(
                            "sentence {}: triple span ({}, {}) outside sentence of {} tokens",
                            self.id,
                            s,
                            e,
                            self.tokens.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self> {
        let corpus = Corpus {
            name: name.into(),
            sentences,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for sent in &self.sentences {
            if !seen.insert(sent.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate sentence id {:?} in corpus {}",
                    sent.id, self.name
                )));
            }
            sent.validate()?;
        }
        Ok(())
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Tsv,
    Jsonl,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(CorpusFormat::Tsv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::Validation(format!("unknown corpus format {other:?}"))),
        }
    }
}

/// Loads a token corpus from `path`. The corpus name is the file stem.
pub fn load_token_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());
    let content = fs::read_to_string(path)?;
    let file = path.to_string_lossy().into_owned();
    match format {
        CorpusFormat::Tsv => parse_tsv(&file, &name, &content),
        CorpusFormat::Jsonl => parse_jsonl(&file, &name, &content),
    }
}

/// Parses the TSV token format. Spans are synthesized by joining forms with
/// single spaces, so `write_tsv(parse_tsv(x)) == x` for canonical input.
pub fn parse_tsv(file: &str, name: &str, content: &str) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut current_id: Option<String> = None;
    let mut tokens: Vec<Token> = Vec::new();
    let mut offset = 0usize;
    let mut anon_counter = 0usize;

    let mut flush = |current_id: &mut Option<String>,
                     tokens: &mut Vec<Token>,
                     offset: &mut usize,
                     sentences: &mut Vec<Sentence>,
                     anon_counter: &mut usize| {
        if current_id.is_none() && tokens.is_empty() {
            return;
        }
        let id = current_id.take().unwrap_or_else(|| {
            *anon_counter += 1;
            format!("s{}", *anon_counter)
        });
        let raw_text = tokens
            .iter()
            .map(|t| t.form.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        sentences.push(Sentence {
            id,
            raw_text,
            tokens: std::mem::take(tokens),
            gold_triples: None,
        });
        *offset = 0;
    };

    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            flush(
                &mut current_id,
                &mut tokens,
                &mut offset,
                &mut sentences,
                &mut anon_counter,
            );
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(id) = rest.strip_prefix("id =") {
                if current_id.is_some() || !tokens.is_empty() {
                    flush(
                        &mut current_id,
                        &mut tokens,
                        &mut offset,
                        &mut sentences,
                        &mut anon_counter,
                    );
                }
                current_id = Some(id.trim().to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols.len() > 3 || cols[0].is_empty() {
            return Err(Error::parse(
                file,
                lineno,
                format!("expected FORM<TAB>POS[<TAB>TAG], got {line:?}"),
            ));
        }
        let form = cols[0].to_string();
        let start = if tokens.is_empty() { 0 } else { offset + 1 };
        let end = start + form.len();
        offset = end;
        tokens.push(Token {
            form,
            pos: cols[1].to_string(),
            gold_tag: cols.get(2).map(|t| t.to_string()),
            start,
            end,
        });
    }
    flush(
        &mut current_id,
        &mut tokens,
        &mut offset,
        &mut sentences,
        &mut anon_counter,
    );

    Corpus::new(name, sentences)
}

pub fn parse_jsonl(file: &str, name: &str, content: &str) -> Result<Corpus> {
    let mut sentences = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sent: Sentence = serde_json::from_str(line).map_err(|e| {
            Error::parse(file, lineno + 1, format!("invalid sentence object: {e}"))
        })?;
        sentences.push(sent);
    }
    Corpus::new(name, sentences)
}

/// Serializes a corpus to the canonical TSV form.
pub fn write_tsv(corpus: &Corpus) -> String {
    let mut out = String::new();
    for sent in &corpus.sentences {
        let _ = writeln!(out, "# id = {}", sent.id);
        for tok in &sent.tokens {
            match &tok.gold_tag {
                Some(tag) => {
                    let _ = writeln!(out, "{}\t{}\t{}", tok.form, tok.pos, tag);
                }
                None => {
                    let _ = writeln!(out, "{}\t{}", tok.form, tok.pos);
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_jsonl(corpus: &Corpus) -> String {
    let mut out = String::new();
    for sent in &corpus.sentences {
        out.push_str(&serde_json::to_string(sent).expect("sentence serializes"));
        out.push('\n');
    }
    out
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>, format: CorpusFormat) -> Result<()> {
    let text = match format {
        CorpusFormat::Tsv => write_tsv(corpus),
        CorpusFormat::Jsonl => write_jsonl(corpus),
    };
    fs::write(path, text)?;
    Ok(())
}

/// Maps ordered POS-tag sequences of multi-token terminals to a single
/// PTB-style tag. Unknown combinations fall back to the first tag.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PosComboMap {
    entries: BTreeMap<Vec<String>, String>,
}

impl PosComboMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, combo: Vec<String>, tag: String) -> Result<()> {
        if combo.len() < 2 {
            return Err(Error::Validation(
                "POS combo keys must have length >= 2".to_string(),
            ));
        }
        self.entries.insert(combo, tag);
        Ok(())
    }

    /// Parses `POS1+POS2<TAB>POS` lines; `#` starts a comment.
    pub fn parse(file: &str, content: &str) -> Result<Self> {
        let mut map = PosComboMap::new();
        for (lineno, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('\t').ok_or_else(|| {
                Error::parse(file, lineno + 1, "expected COMBO<TAB>POS".to_string())
            })?;
            let combo: Vec<String> = key.split('+').map(|s| s.trim().to_string()).collect();
            if combo.len() < 2 || combo.iter().any(|c| c.is_empty()) {
                return Err(Error::parse(
                    file,
                    lineno + 1,
                    format!("combo key {key:?} must list >= 2 tags joined by '+'"),
                ));
            }
            map.entries.insert(combo, value.trim().to_string());
        }
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path)?;
        Self::parse(&path.to_string_lossy(), &content)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, combo: &[String]) -> Option<&str> {
        self.entries.get(combo).map(|s| s.as_str())
    }
}

/// Collapses a POS-tag combination to a single tag. Total: singleton combos
/// pass through, mapped combos use the map, anything else takes the first tag.
pub fn map_pos_combo(combo: &[String], map: &PosComboMap) -> String {
    assert!(!combo.is_empty(), "POS combo must be non-empty");
    if combo.len() == 1 {
        return combo[0].clone();
    }
    match map.get(combo) {
        Some(tag) => tag.to_string(),
        None => combo[0].clone(),
    }
}

/// The lexicographically ordered set of gold lexical types in the corpus.
/// Errors if any token is missing its gold tag.
pub fn tag_inventory(corpus: &Corpus) -> Result<Vec<String>> {
    let mut tags = BTreeSet::new();
    for sent in &corpus.sentences {
        for (i, tok) in sent.tokens.iter().enumerate() {
            match &tok.gold_tag {
                Some(tag) => {
                    tags.insert(tag.clone());
                }
                None => {
                    return Err(Error::Validation(format!(
                        "corpus {} lacks gold tags (sentence {}, token {})",
                        corpus.name, sent.id, i
                    )));
                }
            }
        }
    }
    Ok(tags.into_iter().collect())
}

/// One atom of a split pattern. Atoms within a pattern are joined by `+`.
#[derive(Debug, Clone)]
enum SplitAtom {
    Exact(String),
    Range(u64, u64),
    Prefix(String),
}

impl SplitAtom {
    fn parse(atom: &str) -> Result<Self> {
        let atom = atom.trim();
        if atom.is_empty() {
            return Err(Error::Validation("empty split pattern atom".to_string()));
        }
        if let Some(prefix) = atom.strip_suffix('*') {
            return Ok(SplitAtom::Prefix(prefix.to_string()));
        }
        if let Some((lo, hi)) = atom.split_once('-') {
            if let (Ok(lo), Ok(hi)) = (lo.parse::<u64>(), hi.parse::<u64>()) {
                if lo > hi {
                    return Err(Error::Validation(format!(
                        "descending range {lo}-{hi} in split pattern"
                    )));
                }
                return Ok(SplitAtom::Range(lo, hi));
            }
        }
        Ok(SplitAtom::Exact(atom.to_string()))
    }

    fn matches(&self, id: &str) -> bool {
        match self {
            SplitAtom::Exact(s) => s == id,
            SplitAtom::Prefix(p) => id.starts_with(p.as_str()),
            SplitAtom::Range(lo, hi) => id
                .parse::<u64>()
                .map(|n| n >= *lo && n <= *hi)
                .unwrap_or(false),
        }
    }
}

/// Partitions a corpus into named splits. Each pattern is a `+`-joined list
/// of atoms: exact ids, numeric ranges `a-b`, or prefixes `wsj*`. Every
/// sentence must match exactly one split.
pub fn split_corpus(corpus: &Corpus, spec: &[(String, String)]) -> Result<Vec<Corpus>> {
    let mut patterns = Vec::new();
    for (name, pattern) in spec {
        let atoms: Vec<SplitAtom> = pattern
            .split('+')
            .map(SplitAtom::parse)
            .collect::<Result<_>>()?;
        patterns.push((name.clone(), atoms));
    }

    let mut buckets: Vec<Vec<Sentence>> = vec![Vec::new(); patterns.len()];
    let mut unmatched = Vec::new();
    for sent in &corpus.sentences {
        let hits: Vec<usize> = patterns
            .iter()
            .enumerate()
            .filter(|(_, (_, atoms))| atoms.iter().any(|a| a.matches(&sent.id)))
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [only] => buckets[*only].push(sent.clone()),
            [] => unmatched.push(sent.id.clone()),
            many => {
                let names: Vec<&str> = many.iter().map(|&i| patterns[i].0.as_str()).collect();
                return Err(Error::Validation(format!(
                    "sentence {} matches multiple splits: {}",
                    sent.id,
                    names.join(", ")
                )));
            }
        }
    }
    if !unmatched.is_empty() {
        return Err(Error::Validation(format!(
            "{} sentences match no split: {}",
            unmatched.len(),
            unmatched.join(", ")
        )));
    }

    Ok(patterns
        .into_iter()
        .zip(buckets)
        .map(|((name, _), sentences)| Corpus { name, sentences })
        .collect())
}

/// Per-sentence predicted tags, aligned with a corpus by construction.
pub type TagSequences = Vec<Vec<String>>;

/// Convenience map from sentence id to its index, for alignment checks.
pub fn sentence_index(corpus: &Corpus) -> HashMap<&str, usize> {
    corpus
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_token_tsv() -> &'static str {
        "# id = s1\nThe\tDT\td-the\ndog\tNN\tn-c\n\n"
    }

    #[test]
    fn tsv_spans_are_synthesized_with_single_spaces() {
        let corpus = parse_tsv("<test>", "t", two_token_tsv()).unwrap();
        assert_eq!(corpus.sentences.len(), 1);
        let sent = &corpus.sentences[0];
        assert_eq!(sent.tokens.len(), 2);
        assert_eq!(sent.raw_text, "The dog");
        assert_eq!(sent.tokens[0].span(), (0, 3));
        assert_eq!(sent.tokens[1].span(), (4, 7));
        assert_eq!(sent.tokens[1].gold_tag.as_deref(), Some("n-c"));
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let corpus = parse_tsv("<test>", "t", "").unwrap();
        assert_eq!(corpus.sentences.len(), 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_tsv("<test>", "t", "# id = s1\nonlyform\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn duplicate_sentence_id_is_rejected() {
        let text = "# id = s1\na\tDT\n\n# id = s1\nb\tNN\n\n";
        let err = parse_tsv("<test>", "t", text).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn tsv_round_trip_is_byte_identical() {
        let input = two_token_tsv();
        let corpus = parse_tsv("<test>", "t", input).unwrap();
        assert_eq!(write_tsv(&corpus), input);
    }

    #[test]
    fn jsonl_round_trip_preserves_triples() {
        let line = r#"{"id":"s1","text":"The dog barks","tokens":[{"form":"The","pos":"DT","tag":"d-the","start":0,"end":3},{"form":"dog","pos":"NN","tag":"n-c","start":4,"end":7},{"form":"barks","pos":"VBZ","tag":"v-itr","start":8,"end":13}],"triples":[{"head":"_bark_v","head_span":[2,3],"role":"ARG1","dep":"_dog_n","dep_span":[1,2]}]}"#;
        let corpus = parse_jsonl("<test>", "t", line).unwrap();
        let triples = corpus.sentences[0].gold_triples.as_ref().unwrap();
        assert_eq!(triples.len(), 1);
        let again = parse_jsonl("<test>", "t", &write_jsonl(&corpus)).unwrap();
        assert_eq!(corpus, again);
    }

    #[test]
    fn jsonl_span_mismatch_is_rejected() {
        let line = r#"{"id":"s1","text":"The dog","tokens":[{"form":"cat","pos":"DT","start":0,"end":3}]}"#;
        let err = parse_jsonl("<test>", "t", line).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn pos_combo_lookup_and_fallbacks() {
        let mut map = PosComboMap::new();
        map.insert(
            vec!["IN".to_string(), "DT".to_string()],
            "IN".to_string(),
        )
        .unwrap();

        // singleton passthrough
        assert_eq!(map_pos_combo(&["NN".to_string()], &map), "NN");
        // direct lookup
        assert_eq!(
            map_pos_combo(&["IN".to_string(), "DT".to_string()], &map),
            "IN"
        );
        // unseen combination falls back to the first tag
        assert_eq!(
            map_pos_combo(&["DT".to_string(), "NNP".to_string()], &map),
            "DT"
        );
    }

    #[test]
    fn pos_combo_file_format() {
        let map = PosComboMap::parse("<test>", "# comment\nIN+DT\tIN\nRB+JJ+NN\tJJ\n").unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(
            map.get(&["RB".to_string(), "JJ".to_string(), "NN".to_string()]),
            Some("JJ")
        );
    }

    #[test]
    fn tag_inventory_sorts_and_dedups() {
        let text = "# id = s1\nx\tNN\tb\ny\tNN\ta\n\n# id = s2\nz\tNN\ta\n\n";
        let corpus = parse_tsv("<test>", "t", text).unwrap();
        assert_eq!(tag_inventory(&corpus).unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn tag_inventory_requires_gold_tags() {
        let corpus = parse_tsv("<test>", "t", "# id = s1\nx\tNN\n\n").unwrap();
        assert!(tag_inventory(&corpus).is_err());
    }

    fn numbered_corpus(n: usize) -> Corpus {
        let sentences = (0..n)
            .map(|i| Sentence {
                id: i.to_string(),
                raw_text: "x".to_string(),
                tokens: vec![Token {
                    form: "x".to_string(),
                    pos: "NN".to_string(),
                    gold_tag: None,
                    start: 0,
                    end: 1,
                }],
                gold_triples: None,
            })
            .collect();
        Corpus {
            name: "nums".to_string(),
            sentences,
        }
    }

    #[test]
    fn split_by_ranges() {
        let corpus = numbered_corpus(10);
        let spec = vec![
            ("train".to_string(), "0-7".to_string()),
            ("dev".to_string(), "8".to_string()),
            ("test".to_string(), "9".to_string()),
        ];
        let splits = split_corpus(&corpus, &spec).unwrap();
        let sizes: Vec<usize> = splits.iter().map(|c| c.sentences.len()).collect();
        assert_eq!(sizes, vec![8, 1, 1]);
        assert_eq!(sizes.iter().sum::<usize>(), corpus.sentences.len());
    }

    #[test]
    fn overlapping_split_patterns_error() {
        let corpus = numbered_corpus(4);
        let spec = vec![
            ("a".to_string(), "0-2".to_string()),
            ("b".to_string(), "2-3".to_string()),
        ];
        assert!(split_corpus(&corpus, &spec).is_err());
    }

    #[test]
    fn unmatched_ids_are_listed() {
        let corpus = numbered_corpus(3);
        let spec = vec![("a".to_string(), "0-1".to_string())];
        let err = split_corpus(&corpus, &spec).unwrap_err();
        assert!(err.to_string().contains('2'), "{err}");
    }

    #[test]
    fn split_supports_prefix_atoms() {
        let mut corpus = numbered_corpus(2);
        corpus.sentences[0].id = "wsj001".to_string();
        corpus.sentences[1].id = "cb001".to_string();
        let spec = vec![
            ("wsj".to_string(), "wsj*".to_string()),
            ("cb".to_string(), "cb*".to_string()),
        ];
        let splits = split_corpus(&corpus, &spec).unwrap();
        assert_eq!(splits[0].sentences.len(), 1);
        assert_eq!(splits[1].sentences.len(), 1);
    }
}
