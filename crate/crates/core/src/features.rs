//! Per-sentence content features and the joint feature map.
//!
//! Each sentence of a pair sequence is summarised by 33 counts (F1..F33):
//!
//! | features | evidence |
//! |----------|----------|
//! | F1       | both characters are agents (or both patients) of one verb |
//! | F2-F7    | verbs with one character as agent and the other as patient |
//! | F8-F13   | verbs attached to exactly one character, no third character present |
//! | F14-F19  | adverbs modifying the F2-F7 verbs |
//! | F20-F25  | adverbs modifying the F8-F13 verbs |
//! | F26-F27  | connotation of non-stopwords between mentions of the two characters |
//! | F28-F30  | positive / negative / relationship frames with a character in a relevant element |
//! | F31-F33  | positive / negative / relationship frames anywhere in the sentence |
//!
//! Six-count blocks are ordered connotation(+,-), sentiment(+,-),
//! prior polarity(+,-). The joint map conjoins each count with the state of
//! its sentence and adds indicator features for the initial state, the first
//! transition and every second-order transition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{EntityId, Pair, PairSequence, Sentence, State};
use crate::lexicons::{
    classify_frame, normalize_frame_name, token_polarity, FrameClass, Lexicons, Polarity,
};
use crate::scalar::Scalar;

pub const NUM_CONTENT: usize = 33;
pub const INDEX_VERSION: u32 = 1;

const TEAM: usize = 0;
const ACTS: usize = 1;
const SURROGATE_ACTS: usize = 7;
const ADVERBS: usize = 13;
const SURROGATE_ADVERBS: usize = 19;
const LEXICAL: usize = 25;
const FRAMES_WITH_PAIR: usize = 27;
const FRAMES_ANY: usize = 30;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("sequence has {contents} sentences but {states} states")]
    LengthMismatch { contents: usize, states: usize },
    #[error("state index {state} out of range for {num_states} states")]
    InvalidState { state: usize, num_states: usize },
    #[error("feature index version {found} does not match {expected}")]
    IndexVersion { found: u32, expected: u32 },
    #[error("feature index layout is not canonical for {0} states")]
    IndexLayout(usize),
}

/// Counts F1..F33 for one sentence; slot `i` holds F(i+1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ContentVector(pub [u32; NUM_CONTENT]);

impl Default for ContentVector {
    fn default() -> Self {
        ContentVector([0; NUM_CONTENT])
    }
}

impl Serialize for ContentVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ContentVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Vec::<u32>::deserialize(deserializer)?;
        let arr: [u32; NUM_CONTENT] = v.try_into().map_err(|v: Vec<u32>| {
            serde::de::Error::invalid_length(v.len(), &"33 feature counts")
        })?;
        Ok(ContentVector(arr))
    }
}

impl ContentVector {
    /// Value of feature `F{n}`, 1-based.
    pub fn feature(&self, n: usize) -> u32 {
        self.0[n - 1]
    }

    pub fn values(&self) -> &[u32; NUM_CONTENT] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }
}

/// A verb with the characters acting through it and on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerbGroup {
    pub verb_token: usize,
    pub lemma: String,
    pub agents: BTreeSet<EntityId>,
    pub patients: BTreeSet<EntityId>,
    pub negated: bool,
    /// Token indices of `advmod` dependents.
    pub adverbs: Vec<usize>,
}

impl VerbGroup {
    pub fn adverb_lemmas<'a>(
        &'a self,
        sentence: &'a Sentence,
    ) -> impl Iterator<Item = &'a str> + 'a {
        self.adverbs
            .iter()
            .map(move |&i| sentence.tokens[i].lemma.as_str())
    }

    fn involves(&self, e: EntityId) -> bool {
        self.agents.contains(&e) || self.patients.contains(&e)
    }
}

/// Verbs of a sentence with agents (`nsubj`, `agent`), patients (`dobj`,
/// `nsubjpass`), negation (`neg`) and adverbs (`advmod`).
///
/// A verb without agents of its own takes those of the verbs it is
/// `conj`-linked to (one step, either direction); likewise for patients.
pub fn analyze_actions(sentence: &Sentence) -> Vec<VerbGroup> {
    let mut groups: BTreeMap<usize, VerbGroup> = sentence
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_verb())
        .map(|(i, t)| {
            (
                i,
                VerbGroup {
                    verb_token: i,
                    lemma: t.lemma.clone(),
                    agents: BTreeSet::new(),
                    patients: BTreeSet::new(),
                    negated: false,
                    adverbs: Vec::new(),
                },
            )
        })
        .collect();
    let mut conj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for edge in &sentence.deps {
        let Some(head) = edge.head else { continue };
        if edge.rel == "conj" && groups.contains_key(&head) && groups.contains_key(&edge.dep) {
            conj.entry(head).or_default().insert(edge.dep);
            conj.entry(edge.dep).or_default().insert(head);
        }
        let Some(g) = groups.get_mut(&head) else {
            continue;
        };
        match edge.rel.as_str() {
            "nsubj" | "agent" => g.agents.extend(sentence.entities_at(edge.dep)),
            "dobj" | "nsubjpass" => g.patients.extend(sentence.entities_at(edge.dep)),
            "neg" => g.negated = true,
            "advmod" => g.adverbs.push(edge.dep),
            _ => {}
        }
    }
    let own: BTreeMap<usize, (BTreeSet<EntityId>, BTreeSet<EntityId>)> = groups
        .iter()
        .map(|(&i, g)| (i, (g.agents.clone(), g.patients.clone())))
        .collect();
    for (i, partners) in &conj {
        let g = groups.get_mut(i).expect("conj endpoints are verbs");
        if g.agents.is_empty() {
            for p in partners {
                g.agents.extend(own[p].0.iter().copied());
            }
        }
        if g.patients.is_empty() {
            for p in partners {
                g.patients.extend(own[p].1.iter().copied());
            }
        }
    }
    groups.into_values().collect()
}

fn add_polarity_counts(
    values: &mut [u32; NUM_CONTENT],
    base: usize,
    lexicons: &Lexicons,
    token: &crate::corpus::Token,
    negated: bool,
) {
    for (k, lex) in lexicons.polarity().into_iter().enumerate() {
        match token_polarity(lex, token, negated) {
            Some(Polarity::Positive) => values[base + 2 * k] += 1,
            Some(Polarity::Negative) => values[base + 2 * k + 1] += 1,
            None => {}
        }
    }
}

/// Content features of one sentence for the pair `(a, b)`.
pub fn content_features(sentence: &Sentence, pair: Pair, lexicons: &Lexicons) -> ContentVector {
    let (a, b) = (pair.a, pair.b);
    let mut v = [0u32; NUM_CONTENT];
    let third_present = sentence.mentions.iter().any(|m| !pair.contains(m.entity));

    for g in analyze_actions(sentence) {
        let both = |set: &BTreeSet<EntityId>| set.contains(&a) && set.contains(&b);
        if both(&g.agents) || both(&g.patients) {
            v[TEAM] = 1;
        }
        let acts_together = (g.agents.contains(&a) && g.patients.contains(&b))
            || (g.agents.contains(&b) && g.patients.contains(&a));
        let surrogate = !third_present && (g.involves(a) != g.involves(b));
        let (verb_base, adverb_base) = if acts_together {
            (ACTS, ADVERBS)
        } else if surrogate {
            (SURROGATE_ACTS, SURROGATE_ADVERBS)
        } else {
            continue;
        };
        add_polarity_counts(
            &mut v,
            verb_base,
            lexicons,
            &sentence.tokens[g.verb_token],
            g.negated,
        );
        for &adv in &g.adverbs {
            add_polarity_counts(
                &mut v,
                adverb_base,
                lexicons,
                &sentence.tokens[adv],
                g.negated,
            );
        }
    }

    for ma in sentence.mentions_of(a) {
        for mb in sentence.mentions_of(b) {
            let (first, second) = if ma.start <= mb.start {
                (ma, mb)
            } else {
                (mb, ma)
            };
            for t in first.end..second.start {
                let token = &sentence.tokens[t];
                if lexicons.stopwords.is_stopword(token) {
                    continue;
                }
                match lexicons.connotation.lookup(token) {
                    Some(Polarity::Positive) => v[LEXICAL] += 1,
                    Some(Polarity::Negative) => v[LEXICAL + 1] += 1,
                    None => {}
                }
            }
        }
    }

    for frame in &sentence.frames {
        let Some(class) = classify_frame(&lexicons.frames, &lexicons.connotation, frame, sentence)
        else {
            continue;
        };
        let slot = match class {
            FrameClass::Positive => 0,
            FrameClass::Negative => 1,
            FrameClass::Relationship => 2,
        };
        v[FRAMES_ANY + slot] += 1;
        let relevant = &lexicons
            .frames
            .get(&frame.name)
            .expect("classified frame is listed")
            .relevant_elements;
        let involves_pair = frame.elements.iter().any(|e| {
            relevant.contains(&normalize_frame_name(&e.name))
                && sentence
                    .mentions
                    .iter()
                    .any(|m| pair.contains(m.entity) && m.overlaps(e.start, e.end))
        });
        if involves_pair {
            v[FRAMES_WITH_PAIR + slot] += 1;
        }
    }
    ContentVector(v)
}

/// Model input for one pair sequence: content vectors plus optional gold
/// state indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub contents: Vec<ContentVector>,
    pub labels: Vec<Option<usize>>,
}

impl Instance {
    pub fn unlabeled(contents: Vec<ContentVector>) -> Self {
        let labels = vec![None; contents.len()];
        Instance { contents, labels }
    }

    pub fn labeled(contents: Vec<ContentVector>, states: &[usize]) -> Self {
        Instance {
            contents,
            labels: states.iter().map(|&s| Some(s)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    /// Gold state indices when every position is labeled.
    pub fn gold(&self) -> Option<Vec<usize>> {
        self.labels.iter().copied().collect()
    }
}

pub fn encode_sequence(seq: &PairSequence, lexicons: &Lexicons) -> Instance {
    let contents = seq
        .sentences
        .iter()
        .map(|s| content_features(s, seq.pair, lexicons))
        .collect();
    let labels = match &seq.labels {
        Some(l) => l.iter().map(|s| s.map(State::index)).collect(),
        None => vec![None; seq.len()],
    };
    Instance { contents, labels }
}

/// TSV rows `doc_id, pair, seq_index, F1..F33` for a set of sequences.
pub fn feature_dump(sequences: &[PairSequence], lexicons: &Lexicons) -> String {
    let mut out = String::from("doc_id\tpair\tseq_index");
    for n in 1..=NUM_CONTENT {
        write!(out, "\tF{n}").unwrap();
    }
    out.push('\n');
    for seq in sequences {
        for (i, s) in seq.sentences.iter().enumerate() {
            let cv = content_features(s, seq.pair, lexicons);
            write!(out, "{}\t{},{}\t{}", seq.doc_id, seq.pair.a, seq.pair.b, i).unwrap();
            for v in cv.values() {
                write!(out, "\t{v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKey {
    /// Content feature `F{feature}` while the sentence is in `state`.
    Content {
        feature: u8,
        state: usize,
    },
    Trans2 {
        cur: usize,
        prev: usize,
        prev2: usize,
    },
    Trans1 {
        cur: usize,
        prev: usize,
    },
    Init {
        state: usize,
    },
}

/// Dense ids for every feature template.
///
/// Layout: content features (F-major, state-minor), then second-order
/// transitions, first transitions and initial states, giving
/// `33·K + K³ + K² + K` features for `K` states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureIndex {
    num_states: usize,
    keys: Vec<FeatureKey>,
}

impl FeatureIndex {
    pub fn new(num_states: usize) -> Self {
        assert!(num_states >= 1, "need at least one state");
        let k = num_states;
        let mut keys = Vec::with_capacity(NUM_CONTENT * k + k * k * k + k * k + k);
        for f in 1..=NUM_CONTENT {
            for state in 0..k {
                keys.push(FeatureKey::Content {
                    feature: f as u8,
                    state,
                });
            }
        }
        for cur in 0..k {
            for prev in 0..k {
                for prev2 in 0..k {
                    keys.push(FeatureKey::Trans2 { cur, prev, prev2 });
                }
            }
        }
        for cur in 0..k {
            for prev in 0..k {
                keys.push(FeatureKey::Trans1 { cur, prev });
            }
        }
        for state in 0..k {
            keys.push(FeatureKey::Init { state });
        }
        FeatureIndex { num_states, keys }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[FeatureKey] {
        &self.keys
    }

    pub fn key(&self, id: usize) -> FeatureKey {
        self.keys[id]
    }

    /// Id of content feature `F{feature}` (1-based) in `state`.
    pub fn content(&self, feature: usize, state: usize) -> usize {
        (feature - 1) * self.num_states + state
    }

    pub fn trans2(&self, cur: usize, prev: usize, prev2: usize) -> usize {
        let k = self.num_states;
        NUM_CONTENT * k + (cur * k + prev) * k + prev2
    }

    pub fn trans1(&self, cur: usize, prev: usize) -> usize {
        let k = self.num_states;
        NUM_CONTENT * k + k * k * k + cur * k + prev
    }

    pub fn init(&self, state: usize) -> usize {
        let k = self.num_states;
        NUM_CONTENT * k + k * k * k + k * k + state
    }

    pub fn id(&self, key: FeatureKey) -> Option<usize> {
        let k = self.num_states;
        let id = match key {
            FeatureKey::Content { feature, state } => {
                let f = feature as usize;
                if !(1..=NUM_CONTENT).contains(&f) || state >= k {
                    return None;
                }
                self.content(f, state)
            }
            FeatureKey::Trans2 { cur, prev, prev2 } => {
                if cur >= k || prev >= k || prev2 >= k {
                    return None;
                }
                self.trans2(cur, prev, prev2)
            }
            FeatureKey::Trans1 { cur, prev } => {
                if cur >= k || prev >= k {
                    return None;
                }
                self.trans1(cur, prev)
            }
            FeatureKey::Init { state } => {
                if state >= k {
                    return None;
                }
                self.init(state)
            }
        };
        Some(id)
    }
}

#[derive(Serialize, Deserialize)]
struct IndexRepr {
    version: u32,
    num_states: usize,
    keys: Vec<FeatureKey>,
}

impl Serialize for FeatureIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        IndexRepr {
            version: INDEX_VERSION,
            num_states: self.num_states,
            keys: self.keys.clone(),
        }
        .serialize(serializer)
    }
}

impl TryFrom<IndexRepr> for FeatureIndex {
    type Error = FeatureError;

    fn try_from(repr: IndexRepr) -> Result<Self, FeatureError> {
        if repr.version != INDEX_VERSION {
            return Err(FeatureError::IndexVersion {
                found: repr.version,
                expected: INDEX_VERSION,
            });
        }
        if repr.num_states == 0 {
            return Err(FeatureError::IndexLayout(0));
        }
        let index = FeatureIndex::new(repr.num_states);
        if index.keys != repr.keys {
            return Err(FeatureError::IndexLayout(repr.num_states));
        }
        Ok(index)
    }
}

impl<'de> Deserialize<'de> for FeatureIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = IndexRepr::deserialize(deserializer)?;
        FeatureIndex::try_from(repr).map_err(serde::de::Error::custom)
    }
}

/// Sparse feature vector with unique, sorted ids and no zero entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector<T> {
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> SparseVector<T> {
    pub fn from_accumulator(acc: BTreeMap<usize, T>) -> Self {
        SparseVector {
            entries: acc.into_iter().filter(|(_, v)| !v.is_zero()).collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> T {
        self.entries
            .binary_search_by_key(&id, |e| e.0)
            .map_or(T::zero(), |i| self.entries[i].1)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dot(&self, dense: &[T]) -> T {
        let mut acc = T::zero();
        for &(id, v) in &self.entries {
            acc += dense[id] * v;
        }
        acc
    }

    pub fn to_dense(&self, len: usize) -> Vec<T> {
        let mut out = vec![T::zero(); len];
        for &(id, v) in &self.entries {
            out[id] = v;
        }
        out
    }

    pub fn add_to(&self, dense: &mut [T]) {
        for &(id, v) in &self.entries {
            dense[id] += v;
        }
    }

    pub fn sub_from(&self, dense: &mut [T]) {
        for &(id, v) in &self.entries {
            dense[id] -= v;
        }
    }
}

/// Joint feature map Φ(x, y): content counts emitted into the slots of each
/// sentence's state plus initial, first-transition and second-order
/// transition indicators.
pub fn joint_features<T: Scalar>(
    contents: &[ContentVector],
    states: &[usize],
    index: &FeatureIndex,
) -> Result<SparseVector<T>, FeatureError> {
    if contents.len() != states.len() {
        return Err(FeatureError::LengthMismatch {
            contents: contents.len(),
            states: states.len(),
        });
    }
    let k = index.num_states();
    if let Some(&state) = states.iter().find(|&&s| s >= k) {
        return Err(FeatureError::InvalidState {
            state,
            num_states: k,
        });
    }
    let mut acc: BTreeMap<usize, T> = BTreeMap::new();
    for (i, (cv, &y)) in contents.iter().zip(states).enumerate() {
        for (f, &count) in cv.values().iter().enumerate() {
            if count != 0 {
                *acc.entry(index.content(f + 1, y)).or_insert_with(T::zero) += T::from_count(count);
            }
        }
        let transition = match i {
            0 => index.init(y),
            1 => index.trans1(y, states[0]),
            _ => index.trans2(y, states[i - 1], states[i - 2]),
        };
        *acc.entry(transition).or_insert_with(T::zero) += T::one();
    }
    Ok(SparseVector::from_accumulator(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DependencyEdge, FrameAnnotation, FrameElement, MentionSpan, Token};
    use crate::lexicons::{FrameLexicon, LexiconName, PolarityLexicon, StopwordList};

    pub(crate) fn lexicons() -> Lexicons {
        let p = |name, text| PolarityLexicon::parse(name, text, "t").unwrap().0;
        Lexicons {
            connotation: p(
                LexiconName::Connotation,
                "persuade\t+1\naccept\t+1\nnobly\t+1\nshun\t-1\ntickle\t+1\npicnic\t+1\nblame\t-1\n",
            ),
            sentiment: p(LexiconName::Sentiment, "nobly\t+1\nshun\t-1\n"),
            prior_polarity: p(LexiconName::PriorPolarity, "persuade\t+1\n"),
            frames: FrameLexicon::builtin(),
            stopwords: StopwordList::builtin(),
        }
    }

    fn t(surface: &str, lemma: &str, pos: &str) -> Token {
        Token {
            surface: surface.into(),
            lemma: lemma.into(),
            pos: pos.into(),
        }
    }

    fn dep(head: usize, dep: usize, rel: &str) -> DependencyEdge {
        DependencyEdge {
            head: Some(head),
            dep,
            rel: rel.into(),
        }
    }

    fn mention(e: u32, start: usize, end: usize) -> MentionSpan {
        MentionSpan {
            entity: EntityId(e),
            start,
            end,
        }
    }

    fn pair() -> Pair {
        Pair::new(EntityId(1), EntityId(2)).unwrap()
    }

    // Tom nobly accepts the blame .
    fn accepts_blame() -> Sentence {
        Sentence {
            tokens: vec![
                t("Tom", "Tom", "NNP"),
                t("nobly", "nobly", "RB"),
                t("accepts", "accept", "VBZ"),
                t("the", "the", "DT"),
                t("blame", "blame", "NN"),
                t(".", ".", "."),
            ],
            deps: vec![
                dep(2, 0, "nsubj"),
                dep(2, 1, "advmod"),
                dep(4, 3, "det"),
                dep(2, 4, "dobj"),
                dep(2, 5, "punct"),
            ],
            mentions: vec![mention(1, 0, 1)],
            frames: vec![],
            doc_position: 0,
        }
    }

    #[test]
    fn actions_resolve_entities() {
        let groups = analyze_actions(&accepts_blame());
        assert_eq!(groups.len(), 1);
        let g = &groups[0];
        assert_eq!(g.lemma, "accept");
        assert_eq!(g.agents, BTreeSet::from([EntityId(1)]));
        assert!(g.patients.is_empty());
        assert!(!g.negated);
        assert_eq!(g.adverbs, vec![1]);
    }

    // Tom hugged and kissed Becky .  (Becky attached to kissed only)
    fn hugged_kissed(negate_kissed: bool) -> Sentence {
        let mut deps = vec![
            dep(1, 0, "nsubj"),
            dep(1, 2, "cc"),
            dep(1, 3, "conj"),
            dep(3, 4, "dobj"),
        ];
        let mut tokens = vec![
            t("Tom", "Tom", "NNP"),
            t("hugged", "hug", "VBD"),
            t("and", "and", "CC"),
            t("kissed", "kiss", "VBD"),
            t("Becky", "Becky", "NNP"),
        ];
        if negate_kissed {
            tokens.push(t("not", "not", "RB"));
            deps.push(dep(3, 5, "neg"));
        }
        Sentence {
            tokens,
            deps,
            mentions: vec![mention(1, 0, 1), mention(2, 4, 5)],
            frames: vec![],
            doc_position: 0,
        }
    }

    #[test]
    fn conj_inherits_missing_roles_one_step() {
        let groups = analyze_actions(&hugged_kissed(true));
        let hug = groups.iter().find(|g| g.lemma == "hug").unwrap();
        let kiss = groups.iter().find(|g| g.lemma == "kiss").unwrap();
        assert_eq!(kiss.agents, BTreeSet::from([EntityId(1)]));
        assert_eq!(hug.patients, BTreeSet::from([EntityId(2)]));
        assert!(kiss.negated);
        assert!(!hug.negated);
    }

    #[test]
    fn persuades_counts_acts_together() {
        // Tom persuades Becky
        let s = Sentence {
            tokens: vec![
                t("Tom", "Tom", "NNP"),
                t("persuades", "persuade", "VBZ"),
                t("Becky", "Becky", "NNP"),
            ],
            deps: vec![dep(1, 0, "nsubj"), dep(1, 2, "dobj")],
            mentions: vec![mention(1, 0, 1), mention(2, 2, 3)],
            frames: vec![],
            doc_position: 0,
        };
        let cv = content_features(&s, pair(), &lexicons());
        assert_eq!(cv.feature(2), 1);
        assert_eq!(cv.feature(6), 1);
        // "persuades" also sits between the two mentions
        assert_eq!(cv.feature(26), 1);
        assert_eq!(cv.values().iter().sum::<u32>(), 3);
    }

    #[test]
    fn empty_evidence_is_zero() {
        let s = Sentence {
            tokens: vec![t("Tom", "Tom", "NNP"), t("Becky", "Becky", "NNP")],
            deps: vec![],
            mentions: vec![mention(1, 0, 1), mention(2, 1, 2)],
            frames: vec![],
            doc_position: 0,
        };
        assert!(content_features(&s, pair(), &lexicons()).is_zero());
    }

    #[test]
    fn killing_frame_with_victim() {
        // Tom killed Becky (frame only; verb not in lexicons)
        let s = Sentence {
            tokens: vec![
                t("Tom", "Tom", "NNP"),
                t("killed", "kill", "VBD"),
                t("Becky", "Becky", "NNP"),
            ],
            deps: vec![],
            mentions: vec![mention(1, 0, 1), mention(2, 2, 3)],
            frames: vec![FrameAnnotation {
                name: "Killing".into(),
                lu: 1,
                elements: vec![FrameElement {
                    name: "Victim".into(),
                    start: 2,
                    end: 3,
                }],
            }],
            doc_position: 0,
        };
        let cv = content_features(&s, pair(), &lexicons());
        assert_eq!(cv.feature(29), 1);
        assert_eq!(cv.feature(32), 1);
        assert_eq!(cv.values().iter().sum::<u32>(), 2);
    }

    #[test]
    fn third_character_blocks_surrogates() {
        let mut s = accepts_blame();
        s.tokens.push(t("Becky", "Becky", "NNP"));
        s.mentions.push(mention(2, 6, 7));
        let cv = content_features(&s, pair(), &lexicons());
        // accept: connotation +; nobly: connotation + and sentiment +
        assert_eq!(cv.feature(8), 1);
        assert_eq!(cv.feature(20), 1);
        assert_eq!(cv.feature(22), 1);
        s.tokens.push(t("Huck", "Huck", "NNP"));
        s.mentions.push(mention(3, 7, 8));
        let cv = content_features(&s, pair(), &lexicons());
        assert!((8..=13).chain(20..=25).all(|f| cv.feature(f) == 0));
    }

    #[test]
    fn index_layout_and_round_trip() {
        for k in 2..=3 {
            let idx = FeatureIndex::new(k);
            assert_eq!(idx.len(), 33 * k + k * k * k + k * k + k);
            for (id, key) in idx.keys().iter().enumerate() {
                assert_eq!(idx.id(*key), Some(id));
            }
            let json = serde_json::to_string(&idx).unwrap();
            let back: FeatureIndex = serde_json::from_str(&json).unwrap();
            assert_eq!(back, idx);
        }
        let bad = r#"{"version":99,"num_states":2,"keys":[]}"#;
        assert!(serde_json::from_str::<FeatureIndex>(bad).is_err());
    }

    #[test]
    fn joint_features_templates() {
        let idx = FeatureIndex::new(2);
        let z = ContentVector::default();
        let phi = joint_features::<f64>(&[z], &[0], &idx).unwrap();
        assert_eq!(phi.entries(), &[(idx.init(0), 1.0)]);

        let phi = joint_features::<f64>(&[z, z, z], &[0, 1, 0], &idx).unwrap();
        assert_eq!(phi.nnz(), 3);
        assert_eq!(phi.get(idx.init(0)), 1.0);
        assert_eq!(phi.get(idx.trans1(1, 0)), 1.0);
        assert_eq!(phi.get(idx.trans2(0, 1, 0)), 1.0);

        assert_eq!(
            joint_features::<f64>(&[z, z], &[0], &idx),
            Err(FeatureError::LengthMismatch {
                contents: 2,
                states: 1
            })
        );
        assert!(joint_features::<f64>(&[z], &[2], &idx).is_err());
    }
}
