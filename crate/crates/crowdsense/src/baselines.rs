//! Comparison methods: interval-estimation labeler selection (IEThresh), the
//! random just-over-half subset voter, and the static average/best labeler
//! accuracies.

use std::collections::HashMap;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::core::{crowd_majority, unweighted_majority, Vote, VoteMatrix};
use crate::engine::{validate_ordering, EngineError, GoldSet, RoundTrace, RunMetrics, RunOutcome};
use crate::rngutil::sample_distinct;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("selection threshold must lie strictly inside (0, 1), got {0}")]
    InvalidSelectionThreshold(f64),
    #[error("significance level must lie strictly inside (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Upper critical value of Student's t with `df` degrees of freedom at tail
/// probability `alpha / 2`.
fn t_critical(df: u64, alpha: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("valid t distribution parameters")
        .inverse_cdf(1.0 - alpha / 2.0)
}

/// Upper interval-estimation score `m + t * s / sqrt(n)` of a reward sample
/// of agreement indicators in `{-1, +1}`, with `s` the (n-1)-denominator
/// sample standard deviation.
///
/// With fewer than two samples the deviation (or the t value) is undefined;
/// the score is positive infinity so under-sampled labelers are always
/// explored first.
pub fn iethresh_ui(samples: &[i8], alpha: f64) -> f64 {
    let n = samples.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let nf = n as f64;
    let mean = samples.iter().map(|&s| s as f64).sum::<f64>() / nf;
    let var = samples
        .iter()
        .map(|&s| (s as f64 - mean).powi(2))
        .sum::<f64>()
        / (nf - 1.0);
    mean + t_critical(n as u64 - 1, alpha) * var.sqrt() / nf.sqrt()
}

/// IEThresh parameters. Unlike the engine's threshold, a larger `epsilon`
/// here selects fewer labelers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IeThreshConfig {
    /// Selection threshold in `(0, 1)`: query every labeler whose score
    /// exceeds `epsilon x max score`.
    pub epsilon: f64,
    /// Significance level for the t critical value. 0.05 by default.
    pub alpha: f64,
}

impl IeThreshConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            alpha: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(BaselineError::InvalidSelectionThreshold(self.epsilon));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BaselineError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }
}

/// Per-labeler reward history driving IEThresh's selection.
#[derive(Debug, Clone)]
pub struct IeThreshState {
    rewards: Vec<Vec<i8>>,
    config: IeThreshConfig,
    t_cache: HashMap<u64, f64>,
}

impl IeThreshState {
    pub fn new(n_labelers: usize, config: IeThreshConfig) -> Result<Self, BaselineError> {
        config.validate()?;
        Ok(Self {
            rewards: vec![Vec::new(); n_labelers],
            config,
            t_cache: HashMap::new(),
        })
    }

    pub fn rewards(&self, labeler: usize) -> &[i8] {
        &self.rewards[labeler]
    }

    pub fn record(&mut self, labeler: usize, agreed: bool) {
        self.rewards[labeler].push(if agreed { 1 } else { -1 });
    }

    pub fn ui(&mut self, labeler: usize) -> f64 {
        let samples = &self.rewards[labeler];
        let n = samples.len();
        if n < 2 {
            return f64::INFINITY;
        }
        // identical math to `iethresh_ui`, with the t value memoized per df
        let nf = n as f64;
        let mean = samples.iter().map(|&s| s as f64).sum::<f64>() / nf;
        let var = samples
            .iter()
            .map(|&s| (s as f64 - mean).powi(2))
            .sum::<f64>()
            / (nf - 1.0);
        let alpha = self.config.alpha;
        let t = *self
            .t_cache
            .entry(n as u64 - 1)
            .or_insert_with(|| t_critical(n as u64 - 1, alpha));
        mean + t * var.sqrt() / nf.sqrt()
    }

    /// Labelers whose score exceeds `epsilon x max`, plus everyone tied with
    /// the maximum (so at least one labeler is always queried, and a round
    /// where several labelers are still unexplored queries all of them).
    pub fn select(&mut self) -> Vec<usize> {
        let scores: Vec<f64> = (0..self.rewards.len()).map(|i| self.ui(i)).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let threshold = self.config.epsilon * max;
        scores
            .iter()
            .enumerate()
            .filter(|&(_, &ui)| ui > threshold || ui == max)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Runs IEThresh over the stream: per example it queries the selected
/// labelers, decides by their unweighted majority, and rewards each queried
/// labeler +1/-1 for agreeing/disagreeing with that decision. Gold examples,
/// when given, contribute one reward per labeler (agreement with the gold
/// example's full-crowd label) at full-crowd cost before the stream starts.
///
/// The procedure is fully deterministic given the ordering: selection,
/// decision and rewards involve no random draws.
pub fn run_iethresh(
    matrix: &VoteMatrix,
    ordering: &[usize],
    config: &IeThreshConfig,
    gold: Option<&GoldSet>,
) -> Result<RunOutcome<f64>, BaselineError> {
    config.validate()?;
    validate_ordering(matrix, ordering, gold)?;
    let m = matrix.n_labelers();
    let mut state = IeThreshState::new(m, *config)?;

    let mut gold_cost = 0u64;
    if let Some(gold) = gold {
        for ex in gold.examples() {
            matrix.check_example(ex.example_index()).map_err(EngineError::from)?;
            if ex.votes().len() != m {
                return Err(BaselineError::Engine(EngineError::GoldVoteWidth {
                    example: ex.example_index(),
                    found: ex.votes().len(),
                    expected: m,
                }));
            }
            let label = ex.crowd_label();
            for (labeler, &vote) in ex.votes().iter().enumerate() {
                state.record(labeler, vote == label);
            }
        }
        gold_cost = gold.cost(m);
    }

    let mut traces = Vec::with_capacity(ordering.len());
    let mut running_accuracy = Vec::with_capacity(ordering.len());
    let mut total_votes = gold_cost;
    let mut correct = 0usize;
    for (t, &example) in ordering.iter().enumerate() {
        let selected = state.select();
        let votes: Vec<Vote> = selected.iter().map(|&i| matrix.vote(example, i)).collect();
        let decision = unweighted_majority(&votes);
        for (&labeler, &vote) in selected.iter().zip(&votes) {
            state.record(labeler, vote == decision);
        }
        total_votes += selected.len() as u64;
        let crowd_label = crowd_majority(matrix, example).map_err(EngineError::from)?;
        if decision == crowd_label {
            correct += 1;
        }
        running_accuracy.push(correct as f64 / (t + 1) as f64);
        let final_score = votes.iter().map(|v| v.as_i8() as f64).sum();
        traces.push(RoundTrace {
            example_index: example,
            queried: selected.into_iter().zip(votes).collect(),
            final_score,
            decision,
            crowd_label,
        });
    }

    let accuracy = if ordering.is_empty() {
        None
    } else {
        Some(correct as f64 / ordering.len() as f64)
    };
    Ok(RunOutcome {
        traces,
        metrics: RunMetrics {
            total_votes,
            accuracy,
            running_accuracy,
        },
        states: Vec::new(),
        gold_cost,
    })
}

/// Per-labeler agreement with the crowd majority, as percentages.
pub fn agreement_rates(matrix: &VoteMatrix) -> Vec<f64> {
    let n = matrix.n_examples();
    let mut agreements = vec![0usize; matrix.n_labelers()];
    for example in 0..n {
        let label = unweighted_majority(matrix.row(example));
        for (labeler, &vote) in matrix.row(example).iter().enumerate() {
            if vote == label {
                agreements[labeler] += 1;
            }
        }
    }
    agreements
        .into_iter()
        .map(|a| 100.0 * a as f64 / n as f64)
        .collect()
}

/// Mean of an agreement-rate profile: the average-labeler baseline.
pub fn mean_agreement(rates: &[f64]) -> f64 {
    rates.iter().sum::<f64>() / rates.len() as f64
}

/// Maximum of an agreement-rate profile: the best-labeler-in-hindsight
/// baseline.
pub fn best_agreement(rates: &[f64]) -> f64 {
    rates.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Mean accuracy of the individual labelers against the crowd majority, as a
/// percentage.
pub fn average_labeler(matrix: &VoteMatrix) -> f64 {
    mean_agreement(&agreement_rates(matrix))
}

/// Accuracy of the overall best labeler in hindsight, as a percentage.
pub fn best_labeler(matrix: &VoteMatrix) -> f64 {
    best_agreement(&agreement_rates(matrix))
}

/// Size of the "just over half" random subset: `floor(M/2) + 1`.
pub fn just_over_half(n_labelers: usize) -> usize {
    n_labelers / 2 + 1
}

/// Per example, queries a uniform random subset of just over half the
/// labelers and decides by their unweighted majority.
pub fn run_random_subset<R: Rng>(
    matrix: &VoteMatrix,
    ordering: &[usize],
    rng: &mut R,
) -> Result<RunOutcome<f64>, BaselineError> {
    validate_ordering(matrix, ordering, None)?;
    let m = matrix.n_labelers();
    let subset_size = just_over_half(m);

    let mut traces = Vec::with_capacity(ordering.len());
    let mut running_accuracy = Vec::with_capacity(ordering.len());
    let mut total_votes = 0u64;
    let mut correct = 0usize;
    for (t, &example) in ordering.iter().enumerate() {
        let selected = sample_distinct(m, subset_size, rng);
        let votes: Vec<Vote> = selected.iter().map(|&i| matrix.vote(example, i)).collect();
        let decision = unweighted_majority(&votes);
        total_votes += subset_size as u64;
        let crowd_label = crowd_majority(matrix, example).map_err(EngineError::from)?;
        if decision == crowd_label {
            correct += 1;
        }
        running_accuracy.push(correct as f64 / (t + 1) as f64);
        let final_score = votes.iter().map(|v| v.as_i8() as f64).sum();
        traces.push(RoundTrace {
            example_index: example,
            queried: selected.into_iter().zip(votes).collect(),
            final_score,
            decision,
            crowd_label,
        });
    }

    let accuracy = if ordering.is_empty() {
        None
    } else {
        Some(correct as f64 / ordering.len() as f64)
    };
    Ok(RunOutcome {
        traces,
        metrics: RunMetrics {
            total_votes,
            accuracy,
            running_accuracy,
        },
        states: Vec::new(),
        gold_cost: 0,
    })
}
