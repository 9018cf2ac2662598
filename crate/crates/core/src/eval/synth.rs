//! Synthetic corpora with known relationship trajectories.
//!
//! Each document holds one pair sequence for characters 1 and 2. States follow
//! a two-state Markov chain that keeps the previous state with probability
//! `persistence`; every sentence carries one piece of evidence drawn from a
//! template whose polarity matches the state except with probability `noise`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::corpus::{
    attach_annotations, extract_pair_sequences, AnnotationRecord, Character, Dataset,
    DependencyEdge, Document, EntityId, FrameAnnotation, FrameElement, MentionSpan, Pair, Sentence,
    State, Token,
};
use crate::features::{encode_sequence, Instance};
use crate::lexicons::{
    FrameLexicon, LexiconName, Lexicons, Polarity, PolarityLexicon, StopwordList,
};
use crate::rng::{self, streams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub num_sequences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of keeping the previous state.
    pub persistence: f64,
    /// Probability that a sentence's evidence contradicts its state.
    pub noise: f64,
    /// Share of sequences with some labels hidden.
    pub partial_fraction: f64,
    /// Share of sequences with no labels.
    pub unlabeled_fraction: f64,
    /// Per-sentence probability of hiding a label in a partial sequence.
    pub mask_rate: f64,
    /// Per-sentence probability that a third character looks on.
    pub bystander_rate: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            num_sequences: 200,
            min_len: 5,
            max_len: 12,
            persistence: 0.9,
            noise: 0.3,
            partial_fraction: 0.0,
            unlabeled_fraction: 0.0,
            mask_rate: 0.5,
            bystander_rate: 0.1,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EvalError::InvalidParameter(m.into()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.num_sequences == 0 {
            return bad("num_sequences must be at least 1");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad("need 1 <= min_len <= max_len");
        }
        if !(self.persistence > 0.0 && self.persistence <= 1.0) {
            return bad("persistence must lie in (0, 1]");
        }
        if !(0.0..0.5).contains(&self.noise) {
            return bad("noise must lie in [0, 0.5)");
        }
        for (name, v) in [
            ("partial_fraction", self.partial_fraction),
            ("unlabeled_fraction", self.unlabeled_fraction),
            ("mask_rate", self.mask_rate),
            ("bystander_rate", self.bystander_rate),
        ] {
            if !unit(v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.partial_fraction + self.unlabeled_fraction > 1.0 {
            return bad("partial_fraction + unlabeled_fraction must not exceed 1");
        }
        Ok(())
    }
}

/// Expected number of segments per sequence for this spec.
pub fn expected_segments(spec: &GeneratorSpec) -> f64 {
    let mean_len = (spec.min_len + spec.max_len) as f64 / 2.0;
    1.0 + (1.0 - spec.persistence) * (mean_len - 1.0)
}

pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub annotations: Vec<AnnotationRecord>,
    pub lexicons: Lexicons,
    /// Sequences of the pair (1, 2) with the generated annotations attached.
    pub dataset: Dataset,
    /// True states of every sequence, by document id.
    pub gold: BTreeMap<String, Vec<State>>,
}

impl SyntheticCorpus {
    pub fn instances(&self) -> Dataset<Instance> {
        self.dataset.map(|s| encode_sequence(s, &self.lexicons))
    }

    /// Every sequence with its full gold labels, regardless of masking.
    pub fn gold_instances(&self) -> Vec<Instance> {
        let all = self
            .dataset
            .fully_labeled
            .iter()
            .chain(&self.dataset.partially_labeled)
            .chain(&self.dataset.unlabeled);
        let mut out: Vec<(String, Instance)> = all
            .map(|s| {
                let states: Vec<usize> = self.gold[&s.doc_id].iter().map(|s| s.index()).collect();
                let contents = encode_sequence(s, &self.lexicons).contents;
                (s.doc_id.clone(), Instance::labeled(contents, &states))
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out.into_iter().map(|(_, i)| i).collect()
    }
}

const POSITIVE_VERBS: [&str; 5] = ["help", "praise", "thank", "protect", "comfort"];
const NEGATIVE_VERBS: [&str; 5] = ["betray", "insult", "threaten", "deceive", "mock"];
const POSITIVE_ADVERBS: [&str; 3] = ["kindly", "warmly", "gently"];
const NEGATIVE_ADVERBS: [&str; 3] = ["coldly", "cruelly", "harshly"];
const POSITIVE_ADJECTIVES: [&str; 3] = ["grateful", "fond", "loyal"];
const NEGATIVE_ADJECTIVES: [&str; 3] = ["bitter", "hostile", "resentful"];
const NAMES: [&str; 5] = ["Ann", "Ben", "Cal", "Dora", "Eli"];
const BYSTANDERS: [u32; 3] = [3, 4, 5];

/// Lexicons matching the generator's vocabulary. Connotation covers every
/// word; sentiment covers adverbs, adjectives and some verbs; prior polarity
/// covers verbs only.
pub fn synthetic_lexicons() -> Lexicons {
    let tagged = |words: &[&'static str], p: Polarity| {
        words.iter().map(move |&w| (w, p)).collect::<Vec<_>>()
    };
    let mut connotation = Vec::new();
    for (pos, neg) in [
        (&POSITIVE_VERBS[..], &NEGATIVE_VERBS[..]),
        (&POSITIVE_ADVERBS[..], &NEGATIVE_ADVERBS[..]),
        (&POSITIVE_ADJECTIVES[..], &NEGATIVE_ADJECTIVES[..]),
        (
            &["support", "forgive", "tickle"][..],
            &["attack", "burn"][..],
        ),
    ] {
        connotation.extend(tagged(pos, Polarity::Positive));
        connotation.extend(tagged(neg, Polarity::Negative));
    }
    let mut sentiment = tagged(&POSITIVE_ADVERBS, Polarity::Positive);
    sentiment.extend(tagged(&NEGATIVE_ADVERBS, Polarity::Negative));
    sentiment.extend(tagged(&POSITIVE_ADJECTIVES, Polarity::Positive));
    sentiment.extend(tagged(&NEGATIVE_ADJECTIVES, Polarity::Negative));
    sentiment.extend(tagged(&POSITIVE_VERBS[..2], Polarity::Positive));
    sentiment.extend(tagged(&NEGATIVE_VERBS[..2], Polarity::Negative));
    let mut prior = tagged(&POSITIVE_VERBS, Polarity::Positive);
    prior.extend(tagged(&NEGATIVE_VERBS, Polarity::Negative));
    Lexicons {
        connotation: PolarityLexicon::from_entries(LexiconName::Connotation, connotation),
        sentiment: PolarityLexicon::from_entries(LexiconName::Sentiment, sentiment),
        prior_polarity: PolarityLexicon::from_entries(LexiconName::PriorPolarity, prior),
        frames: FrameLexicon::builtin(),
        stopwords: StopwordList::builtin(),
    }
}

#[derive(Default)]
struct Builder {
    s: Sentence,
}

impl Builder {
    fn word(&mut self, surface: &str, lemma: &str, pos: &str) -> usize {
        self.s.tokens.push(Token {
            surface: surface.into(),
            lemma: lemma.into(),
            pos: pos.into(),
        });
        self.s.tokens.len() - 1
    }

    fn name(&mut self, entity: u32) -> usize {
        let name = NAMES[entity as usize - 1];
        let i = self.word(name, name, "NNP");
        self.s.mentions.push(MentionSpan {
            entity: EntityId(entity),
            start: i,
            end: i + 1,
        });
        i
    }

    fn dep(&mut self, head: Option<usize>, dep: usize, rel: &str) {
        self.s.deps.push(DependencyEdge {
            head,
            dep,
            rel: rel.into(),
        });
    }

    fn frame(&mut self, name: &str, lu: usize, elements: &[(&str, usize, usize)]) {
        self.s.frames.push(FrameAnnotation {
            name: name.into(),
            lu,
            elements: elements
                .iter()
                .map(|&(n, start, end)| FrameElement {
                    name: n.into(),
                    start,
                    end,
                })
                .collect(),
        });
    }
}

fn past(lemma: &str) -> String {
    match lemma {
        "forgive" => "forgave".into(),
        "burn" => "burned".into(),
        l if l.ends_with('e') => format!("{l}d"),
        l if l.ends_with('y') => format!("{}ied", &l[..l.len() - 1]),
        l => format!("{l}ed"),
    }
}

fn pick<'a>(
    rng: &mut rng::Rng,
    positive: &[&'a str],
    negative: &[&'a str],
    p: Polarity,
) -> &'a str {
    match p {
        Polarity::Positive => positive.choose(rng).expect("non-empty"),
        Polarity::Negative => negative.choose(rng).expect("non-empty"),
    }
}

/// One sentence between `x` (acting) and `y` carrying evidence `p`.
fn evidence_sentence(rng: &mut rng::Rng, x: u32, y: u32, p: Polarity) -> Builder {
    let mut b = Builder::default();
    match rng.gen_range(0..8) {
        0 => {
            let v = pick(rng, &POSITIVE_VERBS, &NEGATIVE_VERBS, p);
            let xi = b.name(x);
            let vi = b.word(&past(v), v, "VBD");
            let yi = b.name(y);
            b.dep(None, vi, "root");
            b.dep(Some(vi), xi, "nsubj");
            b.dep(Some(vi), yi, "dobj");
        }
        1 => {
            let a = pick(rng, &POSITIVE_ADVERBS, &NEGATIVE_ADVERBS, p);
            let v = pick(rng, &POSITIVE_VERBS, &NEGATIVE_VERBS, p);
            let xi = b.name(x);
            let ai = b.word(a, a, "RB");
            let vi = b.word(&past(v), v, "VBD");
            let yi = b.name(y);
            b.dep(None, vi, "root");
            b.dep(Some(vi), xi, "nsubj");
            b.dep(Some(vi), ai, "advmod");
            b.dep(Some(vi), yi, "dobj");
        }
        2 => {
            let v = pick(rng, &POSITIVE_VERBS, &NEGATIVE_VERBS, p.flipped());
            let xi = b.name(x);
            let di = b.word("did", "do", "VBD");
            let ni = b.word("not", "not", "RB");
            let vi = b.word(v, v, "VB");
            let yi = b.name(y);
            b.dep(None, vi, "root");
            b.dep(Some(vi), xi, "nsubj");
            b.dep(Some(vi), di, "aux");
            b.dep(Some(vi), ni, "neg");
            b.dep(Some(vi), yi, "dobj");
        }
        3 => {
            let adj = pick(rng, &POSITIVE_ADJECTIVES, &NEGATIVE_ADJECTIVES, p);
            let xi = b.name(x);
            let fi = b.word("felt", "feel", "VBD");
            let ji = b.word(adj, adj, "JJ");
            let ti = b.word("toward", "toward", "IN");
            let yi = b.name(y);
            b.dep(None, fi, "root");
            b.dep(Some(fi), xi, "nsubj");
            b.dep(Some(fi), ji, "acomp");
            b.dep(Some(ji), ti, "prep");
            b.dep(Some(ti), yi, "pobj");
        }
        4 => {
            let (v, frame, roles) = match p {
                Polarity::Negative => ("attack", "Attack", ["Assailant", "Victim"]),
                Polarity::Positive if rng.gen_bool(0.5) => {
                    ("support", "Supporting", ["Supporter", "Supported"])
                }
                Polarity::Positive => ("forgive", "Forgiveness", ["Judge", "Evaluee"]),
            };
            let xi = b.name(x);
            let vi = b.word(&past(v), v, "VBD");
            let yi = b.name(y);
            b.dep(None, vi, "root");
            b.dep(Some(vi), xi, "nsubj");
            b.dep(Some(vi), yi, "dobj");
            b.frame(frame, vi, &[(roles[0], xi, xi + 1), (roles[1], yi, yi + 1)]);
        }
        5 => {
            let v = pick(rng, &POSITIVE_VERBS, &NEGATIVE_VERBS, p);
            let xi = b.name(x);
            let vi = b.word(&past(v), v, "VBD");
            let di = b.word("the", "the", "DT");
            let gi = b.word("guards", "guard", "NNS");
            let bi = b.word("before", "before", "IN");
            let yi = b.name(y);
            let ai = b.word("arrived", "arrive", "VBD");
            b.dep(None, vi, "root");
            b.dep(Some(vi), xi, "nsubj");
            b.dep(Some(gi), di, "det");
            b.dep(Some(vi), gi, "dobj");
            b.dep(Some(ai), bi, "mark");
            b.dep(Some(ai), yi, "nsubj");
            b.dep(Some(vi), ai, "advcl");
        }
        6 => {
            let v = if p == Polarity::Positive {
                "tickle"
            } else {
                "burn"
            };
            let xi = b.name(x);
            let vi = b.word(&past(v), v, "VBD");
            let yi = b.name(y);
            b.dep(None, vi, "root");
            b.dep(Some(vi), xi, "nsubj");
            b.dep(Some(vi), yi, "dobj");
            b.frame(
                "Cause_bodily_experience",
                vi,
                &[("Agent", xi, xi + 1), ("Experiencer", yi, yi + 1)],
            );
        }
        _ => {
            let (v, frame, roles) = match p {
                Polarity::Positive => ("support", "Supporting", ["Supporter", "Supported"]),
                Polarity::Negative => ("attack", "Attack", ["Assailant", "Victim"]),
            };
            let xi = b.name(x);
            let ci = b.word("and", "and", "CC");
            let yi = b.name(y);
            let vi = b.word(&past(v), v, "VBD");
            let di = b.word("the", "the", "DT");
            let gi = b.word("guards", "guard", "NNS");
            b.dep(None, vi, "root");
            b.dep(Some(vi), xi, "nsubj");
            b.dep(Some(xi), ci, "cc");
            b.dep(Some(vi), yi, "nsubj");
            b.dep(Some(gi), di, "det");
            b.dep(Some(vi), gi, "dobj");
            b.frame(frame, vi, &[(roles[0], xi, yi + 1), (roles[1], gi, gi + 1)]);
        }
    }
    b
}

fn with_bystander(mut b: Builder, z: u32) -> Builder {
    let root = b.s.deps.iter().find(|d| d.head.is_none()).map(|d| d.dep);
    let ci = b.word(",", ",", ",");
    let wi = b.word("while", "while", "IN");
    let zi = b.name(z);
    let vi = b.word("watched", "watch", "VBD");
    b.dep(Some(vi), wi, "mark");
    b.dep(Some(vi), zi, "nsubj");
    if let Some(r) = root {
        b.dep(Some(r), ci, "punct");
        b.dep(Some(r), vi, "advcl");
    }
    b
}

fn finish(mut b: Builder) -> Sentence {
    let root = b.s.deps.iter().find(|d| d.head.is_none()).map(|d| d.dep);
    let pi = b.word(".", ".", ".");
    if let Some(r) = root {
        b.dep(Some(r), pi, "punct");
    }
    b.s
}

/// Draws a corpus from `spec`; identical seeds give identical corpora.
pub fn generate_synthetic(spec: &GeneratorSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = rng::stream(seed, streams::GENERATOR);
    let n = spec.num_sequences;
    let width = n.to_string().len().max(4);

    let mut roles: Vec<u8> = vec![0; n];
    let unlabeled = (spec.unlabeled_fraction * n as f64).round() as usize;
    let partial = ((spec.partial_fraction * n as f64).round() as usize).min(n - unlabeled);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    for &i in &order[..unlabeled] {
        roles[i] = 2;
    }
    for &i in &order[unlabeled..unlabeled + partial] {
        roles[i] = 1;
    }

    let mut documents = Vec::with_capacity(n);
    let mut annotations = Vec::new();
    let mut gold = BTreeMap::new();
    for (d, &role) in roles.iter().enumerate() {
        let doc_id = format!("synth-{d:0width$}");
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let mut states = Vec::with_capacity(len);
        let mut state = if rng.gen_bool(0.5) {
            State::Cooperative
        } else {
            State::NonCooperative
        };
        let mut sentences = Vec::with_capacity(len);
        let mut cast: Vec<u32> = vec![1, 2];
        for t in 0..len {
            if t > 0 && !rng.gen_bool(spec.persistence) {
                state = state.flipped();
            }
            states.push(state);
            let mut evidence = match state {
                State::Cooperative => Polarity::Positive,
                State::NonCooperative => Polarity::Negative,
            };
            if rng.gen_bool(spec.noise) {
                evidence = evidence.flipped();
            }
            let (x, y) = if rng.gen_bool(0.5) { (1, 2) } else { (2, 1) };
            let mut b = evidence_sentence(&mut rng, x, y, evidence);
            if rng.gen_bool(spec.bystander_rate) {
                let z = *BYSTANDERS.choose(&mut rng).expect("non-empty");
                if !cast.contains(&z) {
                    cast.push(z);
                }
                b = with_bystander(b, z);
            }
            let mut s = finish(b);
            s.doc_position = t;
            sentences.push(s);
        }
        cast.sort_unstable();
        let doc = Document {
            doc_id: doc_id.clone(),
            characters: cast
                .iter()
                .map(|&id| Character {
                    id: EntityId(id),
                    name: NAMES[id as usize - 1].into(),
                })
                .collect(),
            sentences,
        };
        doc.validate()?;

        let mut visible: Vec<bool> = match role {
            0 => vec![true; len],
            1 => (0..len).map(|_| !rng.gen_bool(spec.mask_rate)).collect(),
            _ => vec![false; len],
        };
        if role == 1 && len >= 2 {
            // keep the sequence partial: at least one label shown and one hidden
            if visible.iter().all(|&v| v) {
                visible[rng.gen_range(0..len)] = false;
            }
            if visible.iter().all(|&v| !v) {
                visible[rng.gen_range(0..len)] = true;
            }
        }
        for (i, (&s, _)) in states
            .iter()
            .zip(&visible)
            .enumerate()
            .filter(|(_, (_, &v))| v)
        {
            annotations.push(AnnotationRecord {
                doc_id: doc_id.clone(),
                pair: [EntityId(1), EntityId(2)],
                seq_index: i,
                state: s.sign(),
            });
        }
        gold.insert(doc_id, states);
        documents.push(doc);
    }

    let target = Pair::new(EntityId(1), EntityId(2)).expect("distinct ids");
    let sequences = documents
        .iter()
        .flat_map(|d| extract_pair_sequences(d, 1))
        .filter(|s| s.pair == target)
        .collect();
    let dataset = attach_annotations(&annotations, sequences)?;
    Ok(SyntheticCorpus {
        documents,
        annotations,
        lexicons: synthetic_lexicons(),
        dataset,
        gold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::collapse;
    use crate::features::content_features;

    #[test]
    fn same_seed_same_corpus() {
        let spec = GeneratorSpec {
            num_sequences: 20,
            ..Default::default()
        };
        let a = generate_synthetic(&spec, 3).unwrap();
        let b = generate_synthetic(&spec, 3).unwrap();
        let c = generate_synthetic(&spec, 4).unwrap();
        assert_eq!(a.documents, b.documents);
        assert_eq!(a.annotations, b.annotations);
        assert_ne!(a.documents, c.documents);
    }

    #[test]
    fn partitions_follow_fractions() {
        let spec = GeneratorSpec {
            num_sequences: 40,
            partial_fraction: 0.5,
            unlabeled_fraction: 0.25,
            ..Default::default()
        };
        let c = generate_synthetic(&spec, 1).unwrap();
        assert_eq!(c.dataset.fully_labeled.len(), 10);
        assert_eq!(c.dataset.partially_labeled.len(), 20);
        assert_eq!(c.dataset.unlabeled.len(), 10);
        assert_eq!(c.gold_instances().len(), 40);
    }

    #[test]
    fn every_sentence_carries_evidence() {
        let spec = GeneratorSpec {
            num_sequences: 50,
            ..Default::default()
        };
        let c = generate_synthetic(&spec, 7).unwrap();
        let pair = Pair::new(EntityId(1), EntityId(2)).unwrap();
        for doc in &c.documents {
            for s in &doc.sentences {
                let v = content_features(s, pair, &c.lexicons);
                let polar: u32 = (2..=33).map(|n| v.feature(n)).sum();
                assert!(polar > 0, "no evidence in {:?}", s.tokens);
            }
        }
    }

    #[test]
    fn noiseless_evidence_matches_state() {
        // lexical counts ignore negation, so only the net balance is checked
        let spec = GeneratorSpec {
            num_sequences: 30,
            noise: 0.0,
            bystander_rate: 0.0,
            ..Default::default()
        };
        let c = generate_synthetic(&spec, 11).unwrap();
        let pair = Pair::new(EntityId(1), EntityId(2)).unwrap();
        for doc in &c.documents {
            for (s, state) in doc.sentences.iter().zip(&c.gold[&doc.doc_id]) {
                let v = content_features(s, pair, &c.lexicons);
                let pos: u32 = [2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 31]
                    .iter()
                    .map(|&n| v.feature(n))
                    .sum();
                let neg: u32 = [3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 32]
                    .iter()
                    .map(|&n| v.feature(n))
                    .sum();
                match state {
                    State::Cooperative => assert!(pos > neg, "{:?}", s.tokens),
                    State::NonCooperative => assert!(neg > pos, "{:?}", s.tokens),
                }
            }
        }
    }

    #[test]
    fn segment_statistics_match_the_chain() {
        let spec = GeneratorSpec::default();
        let mut segments = 0usize;
        let mut positives = 0usize;
        let mut sentences = 0usize;
        let mut sequences = 0usize;
        for seed in 0..10 {
            let c = generate_synthetic(&spec, seed).unwrap();
            for states in c.gold.values() {
                segments += collapse(states).unwrap().len();
                positives += states.iter().filter(|&&s| s == State::Cooperative).count();
                sentences += states.len();
                sequences += 1;
            }
        }
        let mean_segments = segments as f64 / sequences as f64;
        let share = positives as f64 / sentences as f64;
        assert!(
            (mean_segments / expected_segments(&spec) - 1.0).abs() < 0.05,
            "{mean_segments}"
        );
        assert!((share - 0.5).abs() < 0.05 * 0.5, "{share}");
    }

    #[test]
    fn rejects_bad_parameters() {
        for spec in [
            GeneratorSpec {
                persistence: 0.0,
                ..Default::default()
            },
            GeneratorSpec {
                noise: 0.5,
                ..Default::default()
            },
            GeneratorSpec {
                min_len: 6,
                max_len: 5,
                ..Default::default()
            },
            GeneratorSpec {
                partial_fraction: 0.7,
                unlabeled_fraction: 0.5,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                generate_synthetic(&spec, 0),
                Err(EvalError::InvalidParameter(_))
            ));
        }
    }
}
