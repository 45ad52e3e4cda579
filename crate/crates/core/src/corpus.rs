//! Documents, keywords, queries, and corpus loading.
//!
//! Text documents are modeled as bags of lowercased words; structured
//! documents are bags of `entity:attribute:value` features. A feature
//! contributes its serialized triplet as one atomic keyword plus each
//! component as a plain keyword, so both whole-feature and per-word
//! conjunctive queries can match it.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A canonical (lowercased) query/index term. Canonicalization is
/// idempotent: `Keyword::new(k.as_str()) == k`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Keyword(String);

impl Keyword {
    pub fn new(raw: &str) -> Self {
        Keyword(raw.to_lowercase())
    }

    pub fn triplet(entity: &str, attribute: &str, value: &str) -> Self {
        Keyword(format!("{entity}:{attribute}:{value}").to_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DocKind {
    Text,
    Structured,
}

/// One searchable unit: an id, a token multiset, and a ranking score.
#[derive(Clone, Debug)]
pub struct Document {
    pub id: String,
    pub kind: DocKind,
    tokens: BTreeMap<Keyword, u32>,
    pub rank_score: f64,
}

impl Document {
    pub fn text(id: impl Into<String>, content: &str, rank_score: f64) -> Self {
        Document {
            id: id.into(),
            kind: DocKind::Text,
            tokens: tokenize_text(content),
            rank_score,
        }
    }

    pub fn structured(
        id: impl Into<String>,
        features: &[(String, String, String)],
        rank_score: f64,
    ) -> Self {
        Document {
            id: id.into(),
            kind: DocKind::Structured,
            tokens: tokenize_features(features),
            rank_score,
        }
    }

    /// Token multiset as keyword -> occurrence count.
    pub fn token_counts(&self) -> &BTreeMap<Keyword, u32> {
        &self.tokens
    }

    pub fn contains(&self, keyword: &Keyword) -> bool {
        self.tokens.contains_key(keyword)
    }

    pub fn contains_all<'a, I: IntoIterator<Item = &'a Keyword>>(&self, keywords: I) -> bool {
        keywords.into_iter().all(|k| self.contains(k))
    }

    fn drop_stopwords(&mut self, stopwords: &BTreeSet<Keyword>) {
        if !stopwords.is_empty() {
            self.tokens.retain(|k, _| !stopwords.contains(k));
        }
    }
}

/// Lowercase, split on non-alphanumeric boundaries, drop empty tokens.
pub fn tokenize_text(content: &str) -> BTreeMap<Keyword, u32> {
    let mut counts = BTreeMap::new();
    for token in content.split(|c: char| !c.is_alphanumeric()) {
        if token.is_empty() {
            continue;
        }
        *counts.entry(Keyword::new(token)).or_insert(0) += 1;
    }
    counts
}

/// Each feature yields its atomic `entity:attribute:value` keyword plus
/// each lowercased component as a plain keyword.
pub fn tokenize_features(features: &[(String, String, String)]) -> BTreeMap<Keyword, u32> {
    let mut counts = BTreeMap::new();
    for (entity, attribute, value) in features {
        *counts
            .entry(Keyword::triplet(entity, attribute, value))
            .or_insert(0) += 1;
        for part in [entity, attribute, value] {
            if part.is_empty() {
                continue;
            }
            *counts.entry(Keyword::new(part)).or_insert(0) += 1;
        }
    }
    counts
}

/// A conjunctive keyword query: the user's original keywords plus a
/// disjoint set of expansion keywords.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Query {
    original: BTreeSet<Keyword>,
    expansion: BTreeSet<Keyword>,
}

impl Query {
    pub fn new<I: IntoIterator<Item = Keyword>>(original: I) -> Self {
        Query {
            original: original.into_iter().collect(),
            expansion: BTreeSet::new(),
        }
    }

    pub fn original(&self) -> &BTreeSet<Keyword> {
        &self.original
    }

    pub fn expansion(&self) -> &BTreeSet<Keyword> {
        &self.expansion
    }

    /// All keywords, original first, each set in lexicographic order.
    pub fn keywords(&self) -> impl Iterator<Item = &Keyword> {
        self.original.iter().chain(self.expansion.iter())
    }

    pub fn len(&self) -> usize {
        self.original.len() + self.expansion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty() && self.expansion.is_empty()
    }

    pub fn contains(&self, keyword: &Keyword) -> bool {
        self.original.contains(keyword) || self.expansion.contains(keyword)
    }

    pub fn add_expansion(&mut self, keyword: Keyword) {
        debug_assert!(
            !self.original.contains(&keyword),
            "expansion must stay disjoint from the original query"
        );
        self.expansion.insert(keyword);
    }

    pub fn remove_expansion(&mut self, keyword: &Keyword) -> bool {
        self.expansion.remove(keyword)
    }

    pub fn with_expansion(mut self, keyword: Keyword) -> Self {
        self.add_expansion(keyword);
        self
    }

    /// Same query without one expansion keyword.
    pub fn without(&self, keyword: &Keyword) -> Self {
        let mut q = self.clone();
        q.remove_expansion(keyword);
        q
    }

    pub fn terms(&self) -> Vec<String> {
        self.keywords().map(|k| k.as_str().to_string()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    JsonlText,
    JsonlStructured,
}

/// Corpus loading knobs. The stopword list is applied to every produced
/// keyword and defaults to empty.
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    pub stopwords: BTreeSet<Keyword>,
}

#[derive(Deserialize)]
struct TextRecord {
    id: String,
    text: String,
    score: Option<f64>,
}

#[derive(Deserialize)]
struct StructuredRecord {
    id: String,
    features: Vec<(String, String, String)>,
    score: Option<f64>,
}

/// Load a JSONL corpus, one document per line. Any malformed line aborts
/// the load with its line number; duplicate ids are rejected.
pub fn load_corpus(path: &Path, format: CorpusFormat, options: &LoadOptions) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut documents = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (line_index, line) in reader.lines().enumerate() {
        let line_no = line_index + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut document = parse_line(&line, format).map_err(|message| Error::MalformedLine {
            path: path.to_path_buf(),
            line: line_no,
            message,
        })?;
        if !seen.insert(document.id.clone()) {
            return Err(Error::DuplicateId(document.id));
        }
        document.drop_stopwords(&options.stopwords);
        documents.push(document);
    }
    Ok(documents)
}

fn parse_line(line: &str, format: CorpusFormat) -> std::result::Result<Document, String> {
    match format {
        CorpusFormat::JsonlText => {
            let record: TextRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
            let score = validate_score(record.score)?;
            Ok(Document::text(record.id, &record.text, score))
        }
        CorpusFormat::JsonlStructured => {
            let record: StructuredRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
            let score = validate_score(record.score)?;
            Ok(Document::structured(record.id, &record.features, score))
        }
    }
}

fn validate_score(score: Option<f64>) -> std::result::Result<f64, String> {
    let score = score.unwrap_or(1.0);
    if !score.is_finite() || score < 0.0 {
        return Err(format!("score {score} must be a non-negative real"));
    }
    Ok(score)
}
