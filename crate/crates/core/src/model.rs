//! Second-order segmentation model: scoring, decoding and training.
//!
//! A state sequence `y` for sentences `x` scores `w · Φ(x, y)`. Decoding runs
//! over a lattice of state pairs: a pair `(p, c)` at position `t` may only be
//! followed by a pair `(c, n)` at `t + 1`, which makes second-order
//! transitions first-order in the pair space.

use std::cmp::Ordering;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Dataset;
use crate::eval::collapse;
use crate::features::{
    joint_features, ContentVector, FeatureError, FeatureIndex, Instance, NUM_CONTENT,
};
use crate::rng::{self, streams};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("cannot decode an empty sequence")]
    EmptySequence,
    #[error("label {state} at position {position} is not a valid state")]
    InvalidLabel { position: usize, state: usize },
    #[error("{labels} partial labels for a sequence of length {contents}")]
    ConstraintLength { labels: usize, contents: usize },
    #[error("feature index has {index} states but decoder expects {decoder}")]
    StateCountMismatch { index: usize, decoder: usize },
    #[error("weight vector has {found} entries, feature index has {expected}")]
    WeightLength { found: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training sequence {0} is not fully labeled")]
    NotFullyLabeled(usize),
    #[error("no fully labeled training sequences")]
    EmptyTrainingSet,
    #[error("model file: {0}")]
    ModelFile(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Number of states and the order in which tied states are preferred.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    pub num_states: usize,
    /// States from most to least preferred; a permutation of `0..num_states`.
    pub preference: Vec<usize>,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig::new(2)
    }
}

impl DecoderConfig {
    /// Lower state indices preferred (for binary states: +1 before -1).
    pub fn new(num_states: usize) -> Self {
        DecoderConfig {
            num_states,
            preference: (0..num_states).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states < 2 {
            return Err(ModelError::InvalidConfig(
                "num_states must be at least 2".into(),
            ));
        }
        let mut seen = vec![false; self.num_states];
        for &s in &self.preference {
            if s >= self.num_states || std::mem::replace(&mut seen[s], true) {
                return Err(ModelError::InvalidConfig(
                    "preference must be a permutation of the states".into(),
                ));
            }
        }
        if self.preference.len() != self.num_states {
            return Err(ModelError::InvalidConfig(
                "preference must list every state".into(),
            ));
        }
        Ok(())
    }

    /// Position of each state in the preference order.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.num_states];
        for (r, &s) in self.preference.iter().enumerate() {
            ranks[s] = r;
        }
        ranks
    }

    fn check(&self, index: &FeatureIndex) -> Result<()> {
        self.validate()?;
        if index.num_states() != self.num_states {
            return Err(ModelError::StateCountMismatch {
                index: index.num_states(),
                decoder: self.num_states,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub states: Vec<usize>,
    pub relationship_sequence: Vec<usize>,
    pub score: T,
}

impl<T> Prediction<T> {
    /// True when the relationship changes at least once.
    pub fn has_change(&self) -> bool {
        self.relationship_sequence.len() >= 2
    }
}

fn check_weights<T>(weights: &[T], index: &FeatureIndex) -> Result<()> {
    if weights.len() != index.len() {
        return Err(ModelError::WeightLength {
            found: weights.len(),
            expected: index.len(),
        });
    }
    Ok(())
}

/// `w · Φ(x, y)`.
pub fn score_sequence<T: Scalar>(
    contents: &[ContentVector],
    states: &[usize],
    weights: &[T],
    index: &FeatureIndex,
) -> Result<T> {
    check_weights(weights, index)?;
    Ok(joint_features::<T>(contents, states, index)?.dot(weights))
}

/// Weight tables laid out for decoding.
struct Lattice<T> {
    k: usize,
    len: usize,
    init: Vec<T>,
    /// `[cur * k + prev]`
    trans1: Vec<T>,
    /// `[(cur * k + prev) * k + prev2]`
    trans2: Vec<T>,
    /// `[t * k + state]`
    emit: Vec<T>,
}

impl<T: Scalar> Lattice<T> {
    fn new(contents: &[ContentVector], weights: &[T], index: &FeatureIndex) -> Self {
        let k = index.num_states();
        let init = (0..k).map(|s| weights[index.init(s)]).collect();
        let mut trans1 = Vec::with_capacity(k * k);
        for cur in 0..k {
            for prev in 0..k {
                trans1.push(weights[index.trans1(cur, prev)]);
            }
        }
        let mut trans2 = Vec::with_capacity(k * k * k);
        for cur in 0..k {
            for prev in 0..k {
                for prev2 in 0..k {
                    trans2.push(weights[index.trans2(cur, prev, prev2)]);
                }
            }
        }
        let mut emit = Vec::with_capacity(contents.len() * k);
        for cv in contents {
            for s in 0..k {
                let mut acc = T::zero();
                for (f, &count) in cv.values().iter().enumerate() {
                    if count != 0 {
                        acc += weights[index.content(f + 1, s)] * T::from_count(count);
                    }
                }
                emit.push(acc);
            }
        }
        Lattice {
            k,
            len: contents.len(),
            init,
            trans1,
            trans2,
            emit,
        }
    }

    fn emit(&self, t: usize, s: usize) -> T {
        self.emit[t * self.k + s]
    }

    fn trans1(&self, cur: usize, prev: usize) -> T {
        self.trans1[cur * self.k + prev]
    }

    fn trans2(&self, cur: usize, prev: usize, prev2: usize) -> T {
        self.trans2[(cur * self.k + prev) * self.k + prev2]
    }

    /// Best-scoring sequence consistent with `allowed`, preferring states
    /// earlier in `preference` from the first position onward.
    ///
    /// A backward pass over state pairs computes, for every `(y[t-1], y[t])`,
    /// the best score of positions `t+1..`. The forward pass then fixes one
    /// state at a time, keeping the most preferred state that still reaches
    /// the optimum, which yields the lexicographically first argmax.
    fn decode(&self, allowed: &[Vec<bool>], preference: &[usize]) -> Vec<usize> {
        let (k, n) = (self.k, self.len);
        // suffix[t][p * k + c]: best score of positions t+1..n given y[t-1]=p, y[t]=c
        let mut suffix: Vec<Vec<Option<T>>> = vec![Vec::new(); n];
        if n >= 2 {
            suffix[n - 1] = vec![Some(T::zero()); k * k];
            for t in (1..n - 1).rev() {
                let mut table = vec![None; k * k];
                for p in 0..k {
                    for c in 0..k {
                        let mut best: Option<T> = None;
                        for nx in (0..k).filter(|&s| allowed[t + 1][s]) {
                            let Some(rest) = suffix[t + 1][c * k + nx] else {
                                continue;
                            };
                            let v = self.trans2(nx, c, p) + self.emit(t + 1, nx) + rest;
                            if best.is_none_or(|b| v > b) {
                                best = Some(v);
                            }
                        }
                        table[p * k + c] = best;
                    }
                }
                suffix[t] = table;
            }
        }

        let mut states: Vec<usize> = Vec::with_capacity(n);
        for t in 0..n {
            let mut chosen: Option<(usize, T)> = None;
            for &s in preference.iter().filter(|&&s| allowed[t][s]) {
                let value = match t {
                    0 => {
                        let head = self.init[s] + self.emit(0, s);
                        if n == 1 {
                            Some(head)
                        } else {
                            let mut best: Option<T> = None;
                            for nx in (0..k).filter(|&x| allowed[1][x]) {
                                let Some(rest) = suffix[1][s * k + nx] else {
                                    continue;
                                };
                                let v = self.trans1(nx, s) + self.emit(1, nx) + rest;
                                if best.is_none_or(|b| v > b) {
                                    best = Some(v);
                                }
                            }
                            best.map(|b| head + b)
                        }
                    }
                    1 => suffix[1][states[0] * k + s]
                        .map(|rest| self.trans1(s, states[0]) + self.emit(1, s) + rest),
                    _ => {
                        let (p, p2) = (states[t - 1], states[t - 2]);
                        suffix[t][p * k + s]
                            .map(|rest| self.trans2(s, p, p2) + self.emit(t, s) + rest)
                    }
                };
                if let Some(v) = value {
                    if chosen.is_none_or(|(_, b)| v > b) {
                        chosen = Some((s, v));
                    }
                }
            }
            states.push(chosen.expect("every position admits at least one state").0);
        }
        states
    }
}

fn finish<T: Scalar>(
    contents: &[ContentVector],
    states: Vec<usize>,
    weights: &[T],
    index: &FeatureIndex,
) -> Result<Prediction<T>> {
    let score = score_sequence(contents, &states, weights, index)?;
    Ok(Prediction {
        relationship_sequence: collapse(&states).expect("non-empty"),
        states,
        score,
    })
}

/// Exact argmax of `score_sequence` over all state sequences.
pub fn viterbi_decode<T: Scalar>(
    contents: &[ContentVector],
    weights: &[T],
    index: &FeatureIndex,
    config: &DecoderConfig,
) -> Result<Prediction<T>> {
    constrained_viterbi(
        contents,
        &vec![None; contents.len()],
        weights,
        index,
        config,
    )
}

/// Exact argmax over state sequences that agree with every given label.
pub fn constrained_viterbi<T: Scalar>(
    contents: &[ContentVector],
    partial_labels: &[Option<usize>],
    weights: &[T],
    index: &FeatureIndex,
    config: &DecoderConfig,
) -> Result<Prediction<T>> {
    config.check(index)?;
    check_weights(weights, index)?;
    if contents.is_empty() {
        return Err(ModelError::EmptySequence);
    }
    if partial_labels.len() != contents.len() {
        return Err(ModelError::ConstraintLength {
            labels: partial_labels.len(),
            contents: contents.len(),
        });
    }
    let k = config.num_states;
    let mut allowed = Vec::with_capacity(contents.len());
    for (position, label) in partial_labels.iter().enumerate() {
        allowed.push(match *label {
            Some(state) if state >= k => return Err(ModelError::InvalidLabel { position, state }),
            Some(state) => (0..k).map(|s| s == state).collect(),
            None => vec![true; k],
        });
    }
    let lattice = Lattice::new(contents, weights, index);
    let states = lattice.decode(&allowed, &config.preference);
    finish(contents, states, weights, index)
}

/// Weight vector plus the running sum used for averaging.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights<T> {
    pub w: Vec<T>,
    pub sum_w: Vec<T>,
    /// Number of instance visits accumulated into `sum_w`.
    pub update_count: u64,
}

impl<T: Scalar> ModelWeights<T> {
    pub fn new(initial: Vec<T>) -> Self {
        let sum_w = vec![T::zero(); initial.len()];
        ModelWeights {
            w: initial,
            sum_w,
            update_count: 0,
        }
    }

    /// `sum_w / max(update_count, 1)`.
    pub fn averaged(&self) -> Vec<T> {
        let n = T::from_u64(self.update_count.max(1)).expect("visit count representable");
        self.sum_w.iter().map(|&s| s / n).collect()
    }

    fn accumulate(&mut self) {
        for (s, &w) in self.sum_w.iter_mut().zip(&self.w) {
            *s += w;
        }
        self.update_count += 1;
    }
}

/// Uniform initial weights in `[-scale, scale]` on a grid of 2^16 steps.
pub fn initial_weights<T: Scalar>(index: &FeatureIndex, scale: f64, seed: u64) -> Vec<T> {
    const STEPS: i64 = 1 << 16;
    let mut rng = rng::stream(seed, streams::WEIGHT_INIT);
    let scale = T::from_real(scale);
    let steps = T::from_i64(STEPS).expect("grid size representable");
    (0..index.len())
        .map(|_| {
            scale * T::from_i64(rng.gen_range(-STEPS..=STEPS)).expect("grid value representable")
                / steps
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceptronLog {
    /// Updates made in each epoch.
    pub mistakes_per_epoch: Vec<usize>,
}

impl PerceptronLog {
    pub fn first_clean_epoch(&self) -> Option<usize> {
        self.mistakes_per_epoch.iter().position(|&m| m == 0)
    }
}

/// Averaged structured perceptron with unit learning rate.
///
/// Each epoch visits the training sequences in a fresh seeded order, decodes
/// with the current weights and on a mistake adds `Φ(x, gold) − Φ(x, pred)`.
/// The running sum for averaging is updated after every visit.
pub fn perceptron_train<T: Scalar>(
    train: &[Instance],
    initial: &[T],
    epochs: usize,
    seed: u64,
    index: &FeatureIndex,
    config: &DecoderConfig,
) -> Result<(ModelWeights<T>, PerceptronLog)> {
    config.check(index)?;
    check_weights(initial, index)?;
    let golds: Vec<Vec<usize>> = train
        .iter()
        .enumerate()
        .map(|(i, inst)| inst.gold().ok_or(ModelError::NotFullyLabeled(i)))
        .collect::<Result<_>>()?;
    if train.iter().any(Instance::is_empty) {
        return Err(ModelError::EmptySequence);
    }
    let gold_phi = train
        .iter()
        .zip(&golds)
        .map(|(inst, y)| joint_features::<T>(&inst.contents, y, index))
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let mut model = ModelWeights::new(initial.to_vec());
    let mut log = PerceptronLog::default();
    let mut rng = rng::stream(seed, streams::PERCEPTRON_ORDER);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..epochs {
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut mistakes = 0;
        for &i in &order {
            let inst = &train[i];
            let pred = viterbi_decode(&inst.contents, &model.w, index, config)?;
            if pred.states != golds[i] {
                mistakes += 1;
                gold_phi[i].add_to(&mut model.w);
                joint_features::<T>(&inst.contents, &pred.states, index)?.sub_from(&mut model.w);
            }
            model.accumulate();
        }
        log.mistakes_per_epoch.push(mistakes);
    }
    Ok((model, log))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Outer completion/retraining rounds.
    pub outer_iterations: usize,
    pub perceptron_epochs: usize,
    pub seed: u64,
    pub init_scale: f64,
    /// Also decode unlabeled sequences and train on the result.
    pub use_unlabeled: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            outer_iterations: 10,
            perceptron_epochs: 100,
            seed: 0,
            init_scale: 0.01,
            use_unlabeled: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iterations == 0 || self.perceptron_epochs == 0 {
            return Err(ModelError::InvalidConfig(
                "outer_iterations and perceptron_epochs must be at least 1".into(),
            ));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(ModelError::InvalidConfig(
                "init_scale must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Outer rounds that actually retrained; later rounds are skipped once
    /// the completions stop changing, since they would reproduce the same
    /// weights.
    pub rounds: usize,
    pub perceptron: PerceptronLog,
}

/// Semi-supervised training over fully and partially labeled sequences.
///
/// Weights start uniformly random. Each round completes every partially
/// labeled sequence with the constrained decoder under the current averaged
/// weights, then retrains the perceptron from the same initial weights and
/// seed on the fully labeled plus completed sequences.
pub fn semisupervised_train<T: Scalar>(
    data: &Dataset<Instance>,
    config: &TrainConfig,
    index: &FeatureIndex,
    decoder: &DecoderConfig,
) -> Result<(ModelWeights<T>, TrainLog)> {
    config.validate()?;
    decoder.check(index)?;
    if data.fully_labeled.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let init: Vec<T> = initial_weights(index, config.init_scale, config.seed);
    let mut current = init.clone();
    let mut previous: Option<Vec<Vec<usize>>> = None;
    let mut result = None;
    let mut log = TrainLog::default();
    for _ in 0..config.outer_iterations {
        let mut completions = Vec::new();
        for inst in &data.partially_labeled {
            completions.push(
                constrained_viterbi(&inst.contents, &inst.labels, &current, index, decoder)?.states,
            );
        }
        if config.use_unlabeled {
            for inst in &data.unlabeled {
                completions.push(viterbi_decode(&inst.contents, &current, index, decoder)?.states);
            }
        }
        if result.is_some() && previous.as_ref() == Some(&completions) {
            break;
        }
        let completed_sources = data
            .partially_labeled
            .iter()
            .chain(if config.use_unlabeled {
                &data.unlabeled[..]
            } else {
                &[]
            });
        let train: Vec<Instance> = data
            .fully_labeled
            .iter()
            .cloned()
            .chain(
                completed_sources
                    .zip(&completions)
                    .map(|(inst, y)| Instance::labeled(inst.contents.clone(), y)),
            )
            .collect();
        let (model, plog) = perceptron_train(
            &train,
            &init,
            config.perceptron_epochs,
            config.seed,
            index,
            decoder,
        )?;
        current = model.averaged();
        log.rounds += 1;
        log.perceptron = plog;
        result = Some(model);
        previous = Some(completions);
    }
    Ok((result.expect("at least one round"), log))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            epochs: 50,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

/// Per-sentence logistic regression over the 33 content counts.
///
/// State index 0 (cooperative) is the positive class; an exact zero score
/// predicts the preferred state 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticBaseline<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Scalar + Float> LogisticBaseline<T> {
    /// Seeded stochastic gradient descent on the log loss.
    pub fn train(examples: &[(ContentVector, usize)], config: &BaselineConfig) -> Result<Self> {
        if examples.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        if let Some(&(_, state)) = examples.iter().find(|e| e.1 > 1) {
            return Err(ModelError::InvalidLabel { position: 0, state });
        }
        if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        let lr = T::from_real(config.learning_rate);
        let mut model = LogisticBaseline {
            weights: vec![T::zero(); NUM_CONTENT],
            bias: T::zero(),
        };
        let mut rng = rng::stream(config.seed, streams::BASELINE);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        for _ in 0..config.epochs {
            order.sort_unstable();
            order.shuffle(&mut rng);
            for &i in &order {
                let (cv, state) = &examples[i];
                let target = if *state == 0 { T::one() } else { T::zero() };
                let grad = model.probability(cv) - target;
                for (w, &x) in model.weights.iter_mut().zip(cv.values()) {
                    if x != 0 {
                        *w -= lr * grad * T::from_count(x);
                    }
                }
                model.bias -= lr * grad;
            }
        }
        Ok(model)
    }

    pub fn score(&self, cv: &ContentVector) -> T {
        let mut acc = self.bias;
        for (&w, &x) in self.weights.iter().zip(cv.values()) {
            if x != 0 {
                acc += w * T::from_count(x);
            }
        }
        acc
    }

    /// Probability of state 0.
    pub fn probability(&self, cv: &ContentVector) -> T {
        T::one() / (T::one() + (-self.score(cv)).exp())
    }

    pub fn predict(&self, cv: &ContentVector) -> usize {
        match self.score(cv).partial_cmp(&T::zero()) {
            Some(Ordering::Less) => 1,
            _ => 0,
        }
    }

    pub fn predict_sequence(&self, contents: &[ContentVector]) -> Vec<usize> {
        contents.iter().map(|cv| self.predict(cv)).collect()
    }
}

/// Labeled sentences of fully and partially labeled sequences.
pub fn baseline_examples(data: &Dataset<Instance>) -> Vec<(ContentVector, usize)> {
    data.fully_labeled
        .iter()
        .chain(&data.partially_labeled)
        .flat_map(|inst| {
            inst.contents
                .iter()
                .zip(&inst.labels)
                .filter_map(|(cv, l)| l.map(|s| (*cv, s)))
        })
        .collect()
}

pub const MODEL_FORMAT: &str = "relseq-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub rounds: usize,
}

/// On-disk model: feature index, averaged weights and decoder settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format: String,
    pub version: u32,
    pub index: FeatureIndex,
    pub decoder: DecoderConfig,
    pub weights: Vec<f64>,
    pub training: TrainingMetadata,
}

impl SavedModel {
    pub fn new(
        index: FeatureIndex,
        decoder: DecoderConfig,
        weights: Vec<f64>,
        training: TrainingMetadata,
    ) -> Self {
        SavedModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            index,
            decoder,
            weights,
            training,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: SavedModel =
            serde_json::from_str(text).map_err(|e| ModelError::ModelFile(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(ModelError::ModelFile(format!(
                "unexpected format `{}`",
                model.format
            )));
        }
        if model.version != MODEL_VERSION {
            return Err(ModelError::ModelFile(format!(
                "model version {} is not supported (expected {MODEL_VERSION})",
                model.version
            )));
        }
        model.decoder.check(&model.index)?;
        check_weights(&model.weights, &model.index)?;
        Ok(model)
    }

    pub fn predict(&self, contents: &[ContentVector]) -> Result<Prediction<f64>> {
        viterbi_decode(contents, &self.weights, &self.index, &self.decoder)
    }
}
