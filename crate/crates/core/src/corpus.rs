//! Preprocessed narrative documents, character-pair sequences and annotations.
//!
//! Documents arrive in a canonical JSON format produced by an upstream
//! adapter (tokenization, tagging, parsing, coreference and frame parsing
//! already done). This module validates them, extracts the sentence sequence
//! for every character pair that co-occurs often enough, attaches gold
//! relationship states and partitions the result into fully labeled,
//! partially labeled and unlabeled sequences.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rng;

pub const DEFAULT_MIN_COOCCURRENCE: usize = 5;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: parse error: {message}")]
    Parse { location: String, message: String },
    #[error("validation failed at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("annotation references unknown sequence {doc_id} {pair}")]
    UnknownSequence { doc_id: String, pair: Pair },
    #[error("annotation index {index} out of range for {doc_id} {pair} (length {len})")]
    IndexOutOfRange {
        doc_id: String,
        pair: Pair,
        index: usize,
        len: usize,
    },
    #[error("invalid relationship state {0} (expected 1 or -1)")]
    InvalidState(i64),
    #[error("conflicting labels for {doc_id} {pair} position {index}")]
    ConflictingLabel {
        doc_id: String,
        pair: Pair,
        index: usize,
    },
    #[error("need at least {needed} fully labeled sequences, found {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

fn invalid(path: impl Into<String>, message: impl Into<String>) -> CorpusError {
    CorpusError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

/// Binary relationship state of a sentence: cooperative (+1) or not (-1).
///
/// Models index states as `0 = Cooperative`, `1 = NonCooperative`; the
/// default tie preference therefore favours +1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum State {
    Cooperative,
    NonCooperative,
}

impl State {
    pub const ALL: [State; 2] = [State::Cooperative, State::NonCooperative];

    pub fn sign(self) -> i64 {
        match self {
            State::Cooperative => 1,
            State::NonCooperative => -1,
        }
    }

    pub fn from_sign(value: i64) -> Result<State> {
        match value {
            1 => Ok(State::Cooperative),
            -1 => Ok(State::NonCooperative),
            other => Err(CorpusError::InvalidState(other)),
        }
    }

    pub fn index(self) -> usize {
        match self {
            State::Cooperative => 0,
            State::NonCooperative => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<State> {
        Self::ALL.get(index).copied()
    }

    pub fn flipped(self) -> State {
        match self {
            State::Cooperative => State::NonCooperative,
            State::NonCooperative => State::Cooperative,
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            State::Cooperative => "+",
            State::NonCooperative => "-",
        })
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_i64(self.sign())
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(deserializer)?;
        State::from_sign(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unordered character pair, stored with the smaller id first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub a: EntityId,
    pub b: EntityId,
}

impl Pair {
    /// Canonical pair; `None` when both ids are equal.
    pub fn new(x: EntityId, y: EntityId) -> Option<Pair> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(Pair { a: x, b: y }),
            std::cmp::Ordering::Greater => Some(Pair { a: y, b: x }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.a == e || self.b == e
    }

    pub fn swapped(&self) -> (EntityId, EntityId) {
        (self.b, self.a)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

impl Serialize for Pair {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        [self.a, self.b].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [x, y] = <[EntityId; 2]>::deserialize(deserializer)?;
        Pair::new(x, y).ok_or_else(|| serde::de::Error::custom("pair needs two distinct ids"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: String,
}

impl Token {
    pub fn is_verb(&self) -> bool {
        self.pos.starts_with("VB")
    }
}

mod root_index {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(i) => s.serialize_i64(*i as i64),
            None => s.serialize_i64(-1),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        let v = i64::deserialize(d)?;
        match v {
            -1 => Ok(None),
            v if v >= 0 => Ok(Some(v as usize)),
            v => Err(serde::de::Error::custom(format!("invalid head index {v}"))),
        }
    }
}

/// Dependency arc; `head == None` marks the root (serialized as -1).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyEdge {
    #[serde(with = "root_index")]
    pub head: Option<usize>,
    pub dep: usize,
    pub rel: String,
}

/// Token range `[start, end)` referring to one character.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSpan {
    pub entity: EntityId,
    pub start: usize,
    pub end: usize,
}

impl MentionSpan {
    pub fn contains(&self, token: usize) -> bool {
        self.start <= token && token < self.end
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameElement {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub name: String,
    /// Token index of the lexical unit that evoked the frame.
    pub lu: usize,
    #[serde(default)]
    pub elements: Vec<FrameElement>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub deps: Vec<DependencyEdge>,
    #[serde(default)]
    pub mentions: Vec<MentionSpan>,
    #[serde(default)]
    pub frames: Vec<FrameAnnotation>,
    /// Global 0-based sentence index, assigned from file order on load.
    #[serde(skip)]
    pub doc_position: usize,
}

impl Sentence {
    pub fn mentions_of(&self, entity: EntityId) -> impl Iterator<Item = &MentionSpan> + '_ {
        self.mentions.iter().filter(move |m| m.entity == entity)
    }

    pub fn mentions_entity(&self, entity: EntityId) -> bool {
        self.mentions.iter().any(|m| m.entity == entity)
    }

    /// Entities with a mention covering `token`.
    pub fn entities_at(&self, token: usize) -> BTreeSet<EntityId> {
        self.mentions
            .iter()
            .filter(|m| m.contains(token))
            .map(|m| m.entity)
            .collect()
    }

    pub fn entities(&self) -> BTreeSet<EntityId> {
        self.mentions.iter().map(|m| m.entity).collect()
    }

    fn validate(&self, path: &str, declared: &BTreeSet<EntityId>) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(invalid(format!("{path}.tokens"), "sentence has no tokens"));
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.surface.is_empty() {
                return Err(invalid(
                    format!("{path}.tokens[{i}].surface"),
                    "empty surface form",
                ));
            }
        }
        for (i, d) in self.deps.iter().enumerate() {
            if let Some(h) = d.head {
                if h >= n {
                    return Err(invalid(
                        format!("{path}.deps[{i}].head"),
                        format!("token index {h} out of range (sentence length {n})"),
                    ));
                }
            }
            if d.dep >= n {
                return Err(invalid(
                    format!("{path}.deps[{i}].dep"),
                    format!("token index {} out of range (sentence length {n})", d.dep),
                ));
            }
            if d.rel.is_empty() {
                return Err(invalid(
                    format!("{path}.deps[{i}].rel"),
                    "empty relation label",
                ));
            }
        }
        for (i, m) in self.mentions.iter().enumerate() {
            if !(m.start < m.end && m.end <= n) {
                return Err(invalid(
                    format!("{path}.mentions[{i}]"),
                    format!(
                        "invalid span [{}, {}) for sentence length {n}",
                        m.start, m.end
                    ),
                ));
            }
            if !declared.contains(&m.entity) {
                return Err(invalid(
                    format!("{path}.mentions[{i}].entity"),
                    format!("entity {} is not a declared character", m.entity),
                ));
            }
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.lu >= n {
                return Err(invalid(
                    format!("{path}.frames[{i}].lu"),
                    format!("token index {} out of range (sentence length {n})", f.lu),
                ));
            }
            for (j, e) in f.elements.iter().enumerate() {
                if e.name.is_empty() {
                    return Err(invalid(
                        format!("{path}.frames[{i}].elements[{j}].name"),
                        "empty element name",
                    ));
                }
                if !(e.start < e.end && e.end <= n) {
                    return Err(invalid(
                        format!("{path}.frames[{i}].elements[{j}]"),
                        format!(
                            "invalid span [{}, {}) for sentence length {n}",
                            e.start, e.end
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character {
    pub id: EntityId,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub characters: Vec<Character>,
    pub sentences: Vec<Sentence>,
}

impl Document {
    /// Parses and validates a document from canonical JSON.
    pub fn from_json(text: &str, location: &str) -> Result<Document> {
        let mut doc: Document = serde_json::from_str(text).map_err(|e| CorpusError::Parse {
            location: format!("{location}:{}:{}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        for (i, s) in doc.sentences.iter_mut().enumerate() {
            s.doc_position = i;
        }
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.doc_id.is_empty() {
            return Err(invalid("doc_id", "empty document id"));
        }
        let mut declared = BTreeSet::new();
        for (i, c) in self.characters.iter().enumerate() {
            if !declared.insert(c.id) {
                return Err(invalid(
                    format!("characters[{i}].id"),
                    format!("duplicate character id {}", c.id),
                ));
            }
        }
        if self.sentences.is_empty() {
            return Err(invalid("sentences", "document has no sentences"));
        }
        let mut last = None;
        for (i, s) in self.sentences.iter().enumerate() {
            if last.is_some_and(|p| s.doc_position <= p) {
                return Err(invalid(
                    format!("sentences[{i}]"),
                    "sentence positions not increasing",
                ));
            }
            last = Some(s.doc_position);
            s.validate(&format!("sentences[{i}]"), &declared)?;
        }
        Ok(())
    }

    pub fn character_name(&self, id: EntityId) -> Option<&str> {
        self.characters
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.name.as_str())
    }
}

pub fn load_document(path: &Path) -> Result<Document> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    Document::from_json(&text, &path.display().to_string())
}

/// Loads every `*.json` file of a directory, in file-name order.
pub fn load_documents(dir: &Path) -> Result<Vec<Document>> {
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Io {
            path: dir.to_owned(),
            source,
        })?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    paths.iter().map(|p| load_document(p)).collect()
}

/// Ordered co-occurrence sentences for one character pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSequence {
    pub doc_id: String,
    pub pair: Pair,
    pub sentences: Vec<Sentence>,
    pub labels: Option<Vec<Option<State>>>,
}

impl PairSequence {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn doc_positions(&self) -> Vec<usize> {
        self.sentences.iter().map(|s| s.doc_position).collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|s| s.is_some()).count())
    }

    pub fn is_fully_labeled(&self) -> bool {
        !self.is_empty() && self.labeled_count() == self.len()
    }

    /// Gold states when every position is labeled.
    pub fn gold(&self) -> Option<Vec<State>> {
        self.labels.as_ref()?.iter().copied().collect()
    }
}

/// One sequence per unordered pair co-occurring in at least
/// `min_cooccurrence` sentences, ordered by pair id.
pub fn extract_pair_sequences(doc: &Document, min_cooccurrence: usize) -> Vec<PairSequence> {
    let mut by_pair: BTreeMap<Pair, Vec<usize>> = BTreeMap::new();
    for (i, sentence) in doc.sentences.iter().enumerate() {
        let present: Vec<EntityId> = sentence.entities().into_iter().collect();
        for (j, &x) in present.iter().enumerate() {
            for &y in &present[j + 1..] {
                if let Some(pair) = Pair::new(x, y) {
                    by_pair.entry(pair).or_default().push(i);
                }
            }
        }
    }
    by_pair
        .into_iter()
        .filter(|(_, idx)| !idx.is_empty() && idx.len() >= min_cooccurrence)
        .map(|(pair, idx)| PairSequence {
            doc_id: doc.doc_id.clone(),
            pair,
            sentences: idx.iter().map(|&i| doc.sentences[i].clone()).collect(),
            labels: None,
        })
        .collect()
}

/// One labeled sentence in the JSON Lines annotation format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub doc_id: String,
    pub pair: [EntityId; 2],
    pub seq_index: usize,
    pub state: i64,
}

pub fn parse_annotations(text: &str, location: &str) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let rec: AnnotationRecord = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            location: format!("{location}:{}", lineno + 1),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_annotations(records: &[AnnotationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("annotation serializes"));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<S = PairSequence> {
    pub fully_labeled: Vec<S>,
    pub partially_labeled: Vec<S>,
    pub unlabeled: Vec<S>,
}

impl<S> Default for Dataset<S> {
    fn default() -> Self {
        Dataset {
            fully_labeled: Vec::new(),
            partially_labeled: Vec::new(),
            unlabeled: Vec::new(),
        }
    }
}

impl<S> Dataset<S> {
    pub fn len(&self) -> usize {
        self.fully_labeled.len() + self.partially_labeled.len() + self.unlabeled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn map<U>(&self, mut f: impl FnMut(&S) -> U) -> Dataset<U> {
        Dataset {
            fully_labeled: self.fully_labeled.iter().map(&mut f).collect(),
            partially_labeled: self.partially_labeled.iter().map(&mut f).collect(),
            unlabeled: self.unlabeled.iter().map(&mut f).collect(),
        }
    }
}

impl Dataset<PairSequence> {
    /// Partitions sequences by label coverage.
    pub fn from_sequences(sequences: impl IntoIterator<Item = PairSequence>) -> Self {
        let mut ds = Dataset::default();
        for seq in sequences {
            let labeled = seq.labeled_count();
            if labeled == 0 {
                ds.unlabeled.push(seq);
            } else if labeled == seq.len() {
                ds.fully_labeled.push(seq);
            } else {
                ds.partially_labeled.push(seq);
            }
        }
        ds
    }
}

/// Attaches annotation records to sequences and partitions the result.
pub fn attach_annotations(
    records: &[AnnotationRecord],
    sequences: Vec<PairSequence>,
) -> Result<Dataset> {
    let mut sequences = sequences;
    let lookup: HashMap<(String, Pair), usize> = sequences
        .iter()
        .enumerate()
        .map(|(i, s)| ((s.doc_id.clone(), s.pair), i))
        .collect();
    for rec in records {
        let state = State::from_sign(rec.state)?;
        let pair = Pair::new(rec.pair[0], rec.pair[1]).ok_or_else(|| {
            invalid(
                "pair",
                format!("pair must name two distinct characters, got {:?}", rec.pair),
            )
        })?;
        let &i = lookup.get(&(rec.doc_id.clone(), pair)).ok_or_else(|| {
            CorpusError::UnknownSequence {
                doc_id: rec.doc_id.clone(),
                pair,
            }
        })?;
        let seq = &mut sequences[i];
        let len = seq.len();
        if rec.seq_index >= len {
            return Err(CorpusError::IndexOutOfRange {
                doc_id: rec.doc_id.clone(),
                pair,
                index: rec.seq_index,
                len,
            });
        }
        let labels = seq.labels.get_or_insert_with(|| vec![None; len]);
        match labels[rec.seq_index] {
            Some(prev) if prev != state => {
                return Err(CorpusError::ConflictingLabel {
                    doc_id: rec.doc_id.clone(),
                    pair,
                    index: rec.seq_index,
                })
            }
            _ => labels[rec.seq_index] = Some(state),
        }
    }
    Ok(Dataset::from_sequences(sequences))
}

pub fn load_annotations(path: &Path, sequences: Vec<PairSequence>) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let records = parse_annotations(&text, &path.display().to_string())?;
    attach_annotations(&records, sequences)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fold<S = PairSequence> {
    pub train: Dataset<S>,
    pub test: Vec<S>,
}

/// k-fold split over fully labeled sequences.
///
/// Sequences are shuffled with a seeded generator and dealt round-robin into
/// `k` test folds; partial and unlabeled data joins every training split.
pub fn split_folds<S: Clone>(dataset: &Dataset<S>, k: usize, seed: u64) -> Result<Vec<Fold<S>>> {
    if k < 2 {
        return Err(CorpusError::InvalidFoldCount(k));
    }
    let n = dataset.fully_labeled.len();
    if n < k {
        return Err(CorpusError::InsufficientData {
            needed: k,
            available: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::streams::FOLDS));
    let mut assignment = vec![0usize; n];
    for (slot, &i) in order.iter().enumerate() {
        assignment[i] = slot % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train_full): (Vec<_>, Vec<_>) = (0..n).partition(|&i| assignment[i] == f);
            Fold {
                train: Dataset {
                    fully_labeled: train_full
                        .iter()
                        .map(|&i| dataset.fully_labeled[i].clone())
                        .collect(),
                    partially_labeled: dataset.partially_labeled.clone(),
                    unlabeled: dataset.unlabeled.clone(),
                },
                test: test
                    .iter()
                    .map(|&i| dataset.fully_labeled[i].clone())
                    .collect(),
            }
        })
        .collect())
}
