//! Repeated k-fold cross-validation of the structured model against the
//! per-sentence baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_sequences, ModelMetrics, Result};
use crate::corpus::{split_folds, Dataset, Fold};
use crate::features::{FeatureIndex, Instance};
use crate::model::{
    baseline_examples, semisupervised_train, viterbi_decode, BaselineConfig, DecoderConfig,
    LogisticBaseline, TrainConfig,
};
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub restarts: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub decoder: DecoderConfig,
    pub baseline: BaselineConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            restarts: 1,
            seed: 0,
            train: TrainConfig::default(),
            decoder: DecoderConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub restart: usize,
    pub fold: usize,
    pub test_sequences: usize,
    pub test_sentences: usize,
    pub structured: ModelMetrics,
    pub baseline: ModelMetrics,
    pub rounds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartResult {
    pub restart: usize,
    pub seed: u64,
    pub structured: ModelMetrics,
    pub baseline: ModelMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub structured: ModelMetrics,
    pub baseline: ModelMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: CvConfig,
    /// Means over every fold of every restart.
    pub summary: Summary,
    pub per_restart: Vec<RestartResult>,
    pub per_fold: Vec<FoldResult>,
}

fn run_fold(
    fold: &Fold<Instance>,
    restart: usize,
    index: usize,
    seed: u64,
    config: &CvConfig,
) -> Result<FoldResult> {
    let feature_index = FeatureIndex::new(config.decoder.num_states);
    let train_config = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let (model, log) =
        semisupervised_train::<f64>(&fold.train, &train_config, &feature_index, &config.decoder)?;
    let weights = model.averaged();
    let baseline_config = BaselineConfig {
        seed,
        ..config.baseline.clone()
    };
    let baseline =
        LogisticBaseline::<f64>::train(&baseline_examples(&fold.train), &baseline_config)?;

    let mut golds = Vec::with_capacity(fold.test.len());
    let mut structured = Vec::with_capacity(fold.test.len());
    let mut flat = Vec::with_capacity(fold.test.len());
    for inst in &fold.test {
        golds.push(
            inst.gold()
                .expect("test folds hold fully labeled sequences"),
        );
        structured.push(
            viterbi_decode(&inst.contents, &weights, &feature_index, &config.decoder)?.states,
        );
        flat.push(baseline.predict_sequence(&inst.contents));
    }
    Ok(FoldResult {
        restart,
        fold: index,
        test_sequences: fold.test.len(),
        test_sentences: fold.test.iter().map(Instance::len).sum(),
        structured: evaluate_sequences(&golds, &structured)?,
        baseline: evaluate_sequences(&golds, &flat)?,
        rounds: log.rounds,
    })
}

/// Runs `restarts` independent k-fold splits. Fold jobs run in parallel on
/// the current rayon pool; results are reported in (restart, fold) order and
/// do not depend on the number of workers.
pub fn cross_validate(data: &Dataset<Instance>, config: &CvConfig) -> Result<MetricsReport> {
    config.train.validate()?;
    config.decoder.validate()?;
    let restart_seeds: Vec<u64> = (0..config.restarts.max(1))
        .map(|r| derive_seed(config.seed, r as u64))
        .collect();
    let mut jobs = Vec::new();
    for (r, &seed) in restart_seeds.iter().enumerate() {
        for (f, fold) in split_folds(data, config.k, seed)?.into_iter().enumerate() {
            jobs.push((r, f, seed, fold));
        }
    }
    let per_fold: Vec<FoldResult> = jobs
        .par_iter()
        .map(|(r, f, seed, fold)| run_fold(fold, *r, *f, *seed, config))
        .collect::<Result<_>>()?;

    let per_restart = restart_seeds
        .iter()
        .enumerate()
        .map(|(r, &seed)| {
            let folds: Vec<&FoldResult> = per_fold.iter().filter(|x| x.restart == r).collect();
            RestartResult {
                restart: r,
                seed,
                structured: ModelMetrics::mean(
                    &folds.iter().map(|x| x.structured).collect::<Vec<_>>(),
                ),
                baseline: ModelMetrics::mean(&folds.iter().map(|x| x.baseline).collect::<Vec<_>>()),
            }
        })
        .collect();
    let summary = Summary {
        structured: ModelMetrics::mean(&per_fold.iter().map(|x| x.structured).collect::<Vec<_>>()),
        baseline: ModelMetrics::mean(&per_fold.iter().map(|x| x.baseline).collect::<Vec<_>>()),
    };
    Ok(MetricsReport {
        config: config.clone(),
        summary,
        per_restart,
        per_fold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ContentVector;

    fn toy_dataset() -> Dataset<Instance> {
        let mut pos = ContentVector::default();
        pos.0[1] = 1;
        let mut neg = ContentVector::default();
        neg.0[2] = 1;
        let fully_labeled = (0..10)
            .map(|i| {
                let states: Vec<usize> = (0..4).map(|t| usize::from((t + i) % 3 == 0)).collect();
                let contents = states
                    .iter()
                    .map(|&s| if s == 0 { pos } else { neg })
                    .collect();
                Instance::labeled(contents, &states)
            })
            .collect();
        Dataset {
            fully_labeled,
            ..Default::default()
        }
    }

    #[test]
    fn report_shape_and_separable_scores() {
        let config = CvConfig {
            k: 5,
            restarts: 2,
            train: TrainConfig {
                outer_iterations: 1,
                perceptron_epochs: 10,
                ..Default::default()
            },
            ..Default::default()
        };
        let report = cross_validate(&toy_dataset(), &config).unwrap();
        assert_eq!(report.per_fold.len(), 10);
        assert_eq!(report.per_restart.len(), 2);
        assert_eq!(
            report
                .per_fold
                .iter()
                .map(|f| f.test_sequences)
                .sum::<usize>(),
            20
        );
        assert_eq!(report.summary.structured.averaged_f, 1.0);
        assert_eq!(report.summary.structured.mean_edit_distance, 0.0);
    }

    #[test]
    fn too_few_sequences_is_an_error() {
        let mut data = toy_dataset();
        data.fully_labeled.truncate(3);
        assert!(cross_validate(&data, &CvConfig::default()).is_err());
    }
}
