//! The CrowdSense engine: an online vote collector that approximates the
//! full crowd's majority on each arriving example by querying a small,
//! adaptively grown set of labelers.
//!
//! Each round works on one example:
//!
//! 1. recompute every labeler's quality estimate from its agreement counts
//!    (held fixed for the rest of the round) and rank the labelers;
//! 2. query a three-labeler seed set (by default the two top-ranked labelers
//!    plus one drawn uniformly from the rest);
//! 3. walk the remaining labelers (by default in rank order) and keep adding
//!    the next candidate while `(|score| - q_candidate) / (|S| + 1) < epsilon`,
//!    i.e. while one more vote could still flip or nearly tie the decision;
//!    stop at the first rejection;
//! 4. decide by the quality-weighted sign of the queried votes and update the
//!    agreement counts of everyone queried.
//!
//! Randomness is read from a single seeded stream with a fixed draw protocol
//! (see each [`SeedMode`]): the default seed mode consumes exactly one
//! `random_range(0..M-2)` draw per round, which keeps runs reproducible and
//! lets an external step-through replay every choice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::core::{
    crowd_majority, quality_estimate, rank_by_quality, unweighted_majority, CoreError,
    LabelerState, Quality, Vote, VoteMatrix,
};
use crate::rngutil::{sample_distinct, shuffle};
use crate::scalar::{count, half, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("need at least 3 labelers, got {0}")]
    TooFewLabelers(usize),
    #[error("epsilon must satisfy 0 < epsilon <= 1, got {0}")]
    InvalidEpsilon(f64),
    #[error("smoothing must be finite and non-negative, got {0}")]
    InvalidSmoothing(f64),
    #[error("labeler states must be index-aligned and sized to the labeler count")]
    MisalignedStates,
    #[error("gold initialization requires freshly zeroed labeler states")]
    StatesNotFresh,
    #[error("gold example {example} has {found} votes, expected {expected}")]
    GoldVoteWidth {
        example: usize,
        found: usize,
        expected: usize,
    },
    #[error("gold set repeats example {0}")]
    DuplicateGoldExample(usize),
    #[error("gold set is ragged: examples carry differing vote counts")]
    RaggedGold,
    #[error("ordering entry {0} appears more than once")]
    DuplicateOrdering(usize),
    #[error("ordering includes gold example {0}")]
    OrderingHitsGold(usize),
    #[error(transparent)]
    Core(#[from] CoreError),
}

fn scalar_display<F: Scalar>(value: F) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// How the initial three-labeler query set is composed each round.
///
/// Draw protocol per round (from the run's single random stream):
/// `TwoQualityOneRandom` one draw, `ThreeQuality` none,
/// `OneQualityTwoRandom` two draws, `ZeroQualityThreeRandom` three draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedMode {
    /// Two top-quality labelers plus one drawn uniformly from the remaining
    /// rank positions.
    #[default]
    TwoQualityOneRandom,
    /// The top three by quality; no exploration in the seed.
    ThreeQuality,
    /// The top labeler plus two distinct uniform draws from the rest.
    OneQualityTwoRandom,
    /// Three distinct uniform draws, ignoring quality entirely.
    ZeroQualityThreeRandom,
}

/// Order in which candidates beyond the seed are offered to the add rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AddOrder {
    /// Descending quality rank, skipping labelers already queried.
    #[default]
    ByQuality,
    /// A uniform shuffle of the unqueried remainder.
    Random,
}

/// Vote combination scheme for the confidence score and the decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Votes weighted by the current quality estimates.
    #[default]
    Weighted,
    /// Every queried vote counts 1; the add rule sees candidate weight 1.
    Unweighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig<F> {
    /// Uncertainty the run is willing to leave unresolved, in `(0, 1]`.
    /// Larger values buy more votes per example.
    pub epsilon: F,
    /// Smoothing strength `K` of the quality estimate `(a + K) / (c + 2K)`.
    pub smoothing: F,
    pub seed_mode: SeedMode,
    pub add_order: AddOrder,
    pub weighting: Weighting,
    /// When on, a labeler whose current estimate is below 1/2 contributes its
    /// negated vote with weight `1 - q`. Off by default.
    pub flip_low_quality: bool,
    pub rng_seed: u64,
}

impl<F: Scalar> EngineConfig<F> {
    pub fn new(epsilon: F, smoothing: F) -> Self {
        Self {
            epsilon,
            smoothing,
            seed_mode: SeedMode::default(),
            add_order: AddOrder::default(),
            weighting: Weighting::default(),
            flip_low_quality: false,
            rng_seed: 0,
        }
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.epsilon.is_finite() && self.epsilon > F::zero() && self.epsilon <= F::one()) {
            return Err(EngineError::InvalidEpsilon(scalar_display(self.epsilon)));
        }
        if !(self.smoothing.is_finite() && self.smoothing >= F::zero()) {
            return Err(EngineError::InvalidSmoothing(scalar_display(self.smoothing)));
        }
        Ok(())
    }
}

/// Record of one processed example: who was queried in what order, the final
/// confidence score, the decision and the full-crowd label it is scored
/// against.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace<F> {
    pub example_index: usize,
    /// `(labeler_id, vote)` in query order: seed first, then each accepted
    /// candidate.
    pub queried: Vec<(usize, Vote)>,
    pub final_score: F,
    pub decision: Vote,
    pub crowd_label: Vote,
}

impl<F> RoundTrace<F> {
    pub fn votes_spent(&self) -> usize {
        self.queried.len()
    }

    pub fn queried_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.queried.iter().map(|(id, _)| *id)
    }
}

/// One example whose full-crowd votes are known up front.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldExample {
    example_index: usize,
    votes: Vec<Vote>,
}

impl GoldExample {
    pub fn new(example_index: usize, votes: Vec<Vote>) -> Self {
        Self {
            example_index,
            votes,
        }
    }

    pub fn example_index(&self) -> usize {
        self.example_index
    }

    pub fn votes(&self) -> &[Vote] {
        &self.votes
    }

    /// Label of this example under the full, equal-weight crowd.
    pub fn crowd_label(&self) -> Vote {
        unweighted_majority(&self.votes)
    }
}

/// Examples with known full-crowd votes, used to seed the agreement counters
/// before the stream starts. Paying for every vote on every gold example is
/// part of the run's cost.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GoldSet {
    examples: Vec<GoldExample>,
}

impl GoldSet {
    pub fn new(examples: Vec<GoldExample>) -> Result<Self, EngineError> {
        if let Some(first) = examples.first() {
            let width = first.votes.len();
            let mut seen = std::collections::HashSet::new();
            for ex in &examples {
                if ex.votes.len() != width {
                    return Err(EngineError::RaggedGold);
                }
                if !seen.insert(ex.example_index) {
                    return Err(EngineError::DuplicateGoldExample(ex.example_index));
                }
            }
        }
        Ok(Self { examples })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[GoldExample] {
        &self.examples
    }

    pub fn contains_example(&self, example_index: usize) -> bool {
        self.examples
            .iter()
            .any(|ex| ex.example_index == example_index)
    }

    /// Votes spent to observe the full crowd on every gold example.
    pub fn cost(&self, n_labelers: usize) -> u64 {
        (n_labelers * self.examples.len()) as u64
    }
}

/// Per-run statistics: votes bought (gold included), final agreement with the
/// crowd majority, and the agreement fraction after each processed example.
/// `accuracy` is `None` for a run that processed no examples.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub total_votes: u64,
    pub accuracy: Option<f64>,
    pub running_accuracy: Vec<f64>,
}

/// Everything a single run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome<F> {
    pub traces: Vec<RoundTrace<F>>,
    pub metrics: RunMetrics,
    /// Final agreement counters, index-aligned with the labelers.
    pub states: Vec<LabelerState>,
    /// Portion of `metrics.total_votes` spent on gold initialization.
    pub gold_cost: u64,
}

/// Quality estimate used inside a round. With zero smoothing a labeler that
/// has never been queried has an undefined raw rate; the engine treats it as
/// the all-equal 1/2 until its first observation.
fn round_quality<F: Scalar>(state: &LabelerState, smoothing: F) -> F {
    if smoothing == F::zero() && state.observations() == 0 {
        half()
    } else {
        quality_estimate(state.agreements(), state.observations(), smoothing)
            .expect("labeler counts are consistent")
            .get()
    }
}

/// Signed contribution of one vote to the confidence score.
fn contribution<F: Scalar>(vote: Vote, quality: F, weighting: Weighting, flip: bool) -> F {
    let inverted = flip && quality < half();
    let effective_vote = if inverted { vote.flipped() } else { vote };
    let weight = match weighting {
        Weighting::Weighted => {
            if inverted {
                F::one() - quality
            } else {
                quality
            }
        }
        Weighting::Unweighted => F::one(),
    };
    effective_vote.value::<F>() * weight
}

/// Picks the three-labeler seed for one round. `ranked` is the full quality
/// ranking; the returned ids are in query order.
pub fn select_seed<R: Rng>(
    ranked: &[usize],
    mode: SeedMode,
    rng: &mut R,
) -> Result<Vec<usize>, EngineError> {
    let m = ranked.len();
    if m < 3 {
        return Err(EngineError::TooFewLabelers(m));
    }
    let positions = match mode {
        SeedMode::TwoQualityOneRandom => vec![0, 1, 2 + rng.random_range(0..m - 2)],
        SeedMode::ThreeQuality => vec![0, 1, 2],
        SeedMode::OneQualityTwoRandom => {
            let mut positions = vec![0];
            positions.extend(sample_distinct(m - 1, 2, rng).into_iter().map(|p| p + 1));
            positions
        }
        SeedMode::ZeroQualityThreeRandom => sample_distinct(m, 3, rng),
    };
    Ok(positions.into_iter().map(|p| ranked[p]).collect())
}

/// The add rule: one more labeler is queried while
/// `(|score| - q_candidate) / (current_size + 1)` stays below `epsilon`,
/// i.e. while the candidate could still flip the decision or drag the score
/// into the near-tie zone.
pub fn should_add_labeler<F: Scalar>(
    score: F,
    candidate_quality: Quality<F>,
    current_size: usize,
    epsilon: F,
) -> bool {
    debug_assert!(current_size >= 1);
    (score.abs() - candidate_quality.get()) / count::<F>(current_size as u64 + 1) < epsilon
}

/// Runs one full round on `example`: rank, seed, grow, decide, update counts.
/// Mutates `states` (which must be index-aligned, one per labeler) and
/// returns the round's trace.
pub fn process_example<F: Scalar, R: Rng>(
    states: &mut [LabelerState],
    matrix: &VoteMatrix,
    example: usize,
    config: &EngineConfig<F>,
    rng: &mut R,
) -> Result<RoundTrace<F>, EngineError> {
    config.validate()?;
    let m = matrix.n_labelers();
    if m < 3 {
        return Err(EngineError::TooFewLabelers(m));
    }
    if states.len() != m || states.iter().enumerate().any(|(i, s)| s.labeler_id() != i) {
        return Err(EngineError::MisalignedStates);
    }
    matrix.check_example(example)?;

    // Step 1: quality estimates, fixed for the whole round.
    let qualities: Vec<F> = states
        .iter()
        .map(|s| round_quality(s, config.smoothing))
        .collect();
    if config.flip_low_quality {
        for (state, &q) in states.iter_mut().zip(&qualities) {
            state.flipped = q < half();
        }
    }
    let scored: Vec<(usize, F)> = qualities.iter().copied().enumerate().collect();
    let ranked = rank_by_quality(&scored);

    // Step 2: seed queries.
    let mut queried = select_seed(&ranked, config.seed_mode, rng)?;
    let mut votes: Vec<Vote> = queried.iter().map(|&i| matrix.vote(example, i)).collect();
    let mut score = queried
        .iter()
        .zip(&votes)
        .fold(F::zero(), |acc, (&i, &v)| {
            acc + contribution(v, qualities[i], config.weighting, config.flip_low_quality)
        });

    // Step 3: grow the queried set until the add rule rejects a candidate.
    let mut candidates: Vec<usize> = ranked
        .iter()
        .copied()
        .filter(|id| !queried.contains(id))
        .collect();
    if config.add_order == AddOrder::Random {
        shuffle(&mut candidates, rng);
    }
    for candidate in candidates {
        let candidate_quality = match config.weighting {
            Weighting::Weighted => Quality::new(qualities[candidate])?,
            Weighting::Unweighted => Quality::new(F::one())?,
        };
        if !should_add_labeler(score, candidate_quality, queried.len(), config.epsilon) {
            break;
        }
        let vote = matrix.vote(example, candidate);
        score = score
            + contribution(
                vote,
                qualities[candidate],
                config.weighting,
                config.flip_low_quality,
            );
        queried.push(candidate);
        votes.push(vote);
    }

    // Step 4: decide and book agreements against the raw votes.
    let decision = Vote::from_sign(score);
    for (&labeler, &vote) in queried.iter().zip(&votes) {
        states[labeler].record(vote == decision);
    }

    Ok(RoundTrace {
        example_index: example,
        queried: queried.into_iter().zip(votes).collect(),
        final_score: score,
        decision,
        crowd_label: crowd_majority(matrix, example)?,
    })
}

/// Seeds freshly zeroed counters from a gold set: every labeler is observed
/// once per gold example and credited when its recorded vote matches that
/// example's full-crowd label. Returns the votes spent (`M x |gold|`).
pub fn init_gold(states: &mut [LabelerState], gold: &GoldSet) -> Result<u64, EngineError> {
    if states.iter().any(|s| !s.is_fresh()) {
        return Err(EngineError::StatesNotFresh);
    }
    for ex in gold.examples() {
        if ex.votes().len() != states.len() {
            return Err(EngineError::GoldVoteWidth {
                example: ex.example_index(),
                found: ex.votes().len(),
                expected: states.len(),
            });
        }
        let label = ex.crowd_label();
        for (state, &vote) in states.iter_mut().zip(ex.votes()) {
            state.record(vote == label);
        }
    }
    Ok(gold.cost(states.len()))
}

/// Checks that `ordering` holds distinct, in-range example indices that stay
/// clear of the gold set. Shared by every run entry point in the crate.
pub(crate) fn validate_ordering(
    matrix: &VoteMatrix,
    ordering: &[usize],
    gold: Option<&GoldSet>,
) -> Result<(), EngineError> {
    let mut seen = vec![false; matrix.n_examples()];
    for &example in ordering {
        matrix.check_example(example)?;
        if seen[example] {
            return Err(EngineError::DuplicateOrdering(example));
        }
        seen[example] = true;
        if gold.is_some_and(|g| g.contains_example(example)) {
            return Err(EngineError::OrderingHitsGold(example));
        }
    }
    Ok(())
}

/// Processes the whole stream in the given order, applying gold
/// initialization first when present. All randomness comes from a ChaCha
/// stream seeded with `config.rng_seed`, so identical inputs give
/// bit-identical traces.
pub fn run<F: Scalar>(
    matrix: &VoteMatrix,
    ordering: &[usize],
    config: &EngineConfig<F>,
    gold: Option<&GoldSet>,
) -> Result<RunOutcome<F>, EngineError> {
    config.validate()?;
    let m = matrix.n_labelers();
    if m < 3 {
        return Err(EngineError::TooFewLabelers(m));
    }
    validate_ordering(matrix, ordering, gold)?;

    let mut states: Vec<LabelerState> = (0..m).map(LabelerState::new).collect();
    let mut gold_cost = 0;
    if let Some(gold) = gold {
        for ex in gold.examples() {
            matrix.check_example(ex.example_index())?;
        }
        gold_cost = init_gold(&mut states, gold)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut traces = Vec::with_capacity(ordering.len());
    let mut running_accuracy = Vec::with_capacity(ordering.len());
    let mut total_votes = gold_cost;
    let mut correct = 0usize;
    for (t, &example) in ordering.iter().enumerate() {
        let trace = process_example(&mut states, matrix, example, config, &mut rng)?;
        total_votes += trace.votes_spent() as u64;
        if trace.decision == trace.crowd_label {
            correct += 1;
        }
        running_accuracy.push(correct as f64 / (t + 1) as f64);
        traces.push(trace);
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
        states,
        gold_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_from_i8(rows: &[&[i8]]) -> VoteMatrix {
        VoteMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| Vote::from_i8(v).unwrap()).collect())
                .collect(),
        )
        .unwrap()
    }

    /// Finds a ChaCha seed whose first `random_range(0..span)` draw hits
    /// `want`, so tests can pin the round's random seed labeler.
    fn seed_forcing_draw(span: usize, want: usize) -> u64 {
        (0..10_000u64)
            .find(|&s| {
                ChaCha8Rng::seed_from_u64(s).random_range(0..span) == want
            })
            .expect("a forcing seed exists in range")
    }

    #[test]
    fn should_add_examples() {
        let q = |v: f64| Quality::new(v).unwrap();
        assert!(should_add_labeler(0.7, q(0.7), 3, 0.1));
        assert!(!should_add_labeler(1.5, q(0.5), 3, 0.1));
        assert!(should_add_labeler(0.0, q(0.55), 5, 0.005));
    }

    #[test]
    fn select_seed_examples() {
        let ranked = [2usize, 0, 4, 1, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let top3 = select_seed(&ranked, SeedMode::ThreeQuality, &mut rng).unwrap();
        assert_eq!(top3, vec![2, 0, 4]);

        // force the random member to be the first remaining rank
        let seed = seed_forcing_draw(3, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = select_seed(&ranked, SeedMode::TwoQualityOneRandom, &mut rng).unwrap();
        assert_eq!(picked, vec![2, 0, 4]);
    }

    #[test]
    fn select_seed_with_three_labelers_is_everyone() {
        let ranked = [0usize, 1, 2];
        for mode in [
            SeedMode::TwoQualityOneRandom,
            SeedMode::ThreeQuality,
            SeedMode::OneQualityTwoRandom,
            SeedMode::ZeroQualityThreeRandom,
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut picked = select_seed(&ranked, mode, &mut rng).unwrap();
            picked.sort_unstable();
            assert_eq!(picked, vec![0, 1, 2]);
        }
    }

    #[test]
    fn select_seed_rejects_small_crowds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            select_seed(&[0, 1], SeedMode::ThreeQuality, &mut rng),
            Err(EngineError::TooFewLabelers(2))
        );
    }

    /// Hand-worked round: qualities pinned to [0.9, 0.8, 0.7, 0.6, 0.55] via
    /// raw rates (zero smoothing), seed {L0, L1, L3} with L3 as the random
    /// member, votes +1/-1/+1. L2 joins at score 0.7 ((0.7-0.7)/4 < 0.1) and
    /// cancels to 0.0, L4 joins ((0-0.55)/5 < 0.1) and decides +1.
    #[test]
    fn process_example_full_round_trace() {
        let matrix = matrix_from_i8(&[&[1, -1, -1, 1, 1]]);
        let mut states = vec![
            LabelerState::with_counts(0, 9, 10).unwrap(),
            LabelerState::with_counts(1, 8, 10).unwrap(),
            LabelerState::with_counts(2, 7, 10).unwrap(),
            LabelerState::with_counts(3, 6, 10).unwrap(),
            LabelerState::with_counts(4, 11, 20).unwrap(),
        ];
        let seed = seed_forcing_draw(3, 1); // ranks 3..5 are ids [2, 3, 4]; pick id 3
        let config: EngineConfig<f64> = EngineConfig::new(0.1, 0.0).with_seed(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trace = process_example(&mut states, &matrix, 0, &config, &mut rng).unwrap();

        assert_eq!(
            trace.queried,
            vec![
                (0, Vote::Plus),
                (1, Vote::Minus),
                (3, Vote::Plus),
                (2, Vote::Minus),
                (4, Vote::Plus),
            ]
        );
        assert!((trace.final_score - 0.55).abs() < 1e-12);
        assert_eq!(trace.decision, Vote::Plus);
        assert_eq!(trace.votes_spent(), 5);

        let agreements: Vec<u64> = states.iter().map(|s| s.agreements()).collect();
        let observations: Vec<u64> = states.iter().map(|s| s.observations()).collect();
        assert_eq!(agreements, vec![10, 8, 7, 7, 12]);
        assert_eq!(observations, vec![11, 11, 11, 11, 21]);
    }

    #[test]
    fn epsilon_one_queries_the_whole_crowd() {
        let matrix = matrix_from_i8(&[
            &[1, -1, 1, 1, -1, 1, -1],
            &[-1, -1, 1, -1, -1, 1, 1],
            &[1, 1, 1, -1, -1, -1, -1],
        ]);
        let config = EngineConfig::new(1.0, 10.0).with_seed(3);
        let ordering = [0, 1, 2];
        let outcome = run(&matrix, &ordering, &config, None).unwrap();
        for trace in &outcome.traces {
            assert_eq!(trace.votes_spent(), matrix.n_labelers());
        }
        assert_eq!(outcome.metrics.total_votes, 21);
    }

    /// With every labeler queried (epsilon = 1), accuracy is exactly the
    /// fraction of rounds where the quality-weighted full-crowd sign agrees
    /// with the unweighted one. Round one always agrees: the estimates are
    /// all exactly 1/2, and sums of +/-0.5 are exact, so the tie rules line
    /// up bitwise.
    #[test]
    fn epsilon_one_accuracy_is_the_weighted_unweighted_agreement_fraction() {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<Vote>> = (0..20)
                .map(|_| {
                    (0..7)
                        .map(|_| if rng.random_bool(0.5) { Vote::Plus } else { Vote::Minus })
                        .collect()
                })
                .collect();
            let matrix = VoteMatrix::from_rows(rows).unwrap();
            let ordering: Vec<usize> = (0..20).collect();
            let config = EngineConfig::new(1.0, 10.0).with_seed(seed);
            let outcome = run(&matrix, &ordering, &config, None).unwrap();

            assert_eq!(outcome.traces[0].decision, outcome.traces[0].crowd_label);
            let agreements = outcome
                .traces
                .iter()
                .filter(|t| t.decision == t.crowd_label)
                .count();
            assert_eq!(
                outcome.metrics.accuracy,
                Some(agreements as f64 / 20.0)
            );
        }
    }

    #[test]
    fn three_labelers_spend_exactly_three_votes() {
        let matrix = matrix_from_i8(&[&[1, -1, 1], &[-1, -1, 1]]);
        let config = EngineConfig::new(0.01, 10.0).with_seed(5);
        let outcome = run(&matrix, &[0, 1], &config, None).unwrap();
        for trace in &outcome.traces {
            assert_eq!(trace.votes_spent(), 3);
        }
    }

    #[test]
    fn unweighted_mode_decides_by_raw_sign() {
        let matrix = matrix_from_i8(&[
            &[1, -1, -1, 1, -1],
            &[1, 1, -1, -1, -1],
            &[-1, 1, 1, 1, 1],
        ]);
        let config = EngineConfig {
            weighting: Weighting::Unweighted,
            ..EngineConfig::new(0.4, 10.0).with_seed(17)
        };
        let outcome = run(&matrix, &[0, 1, 2], &config, None).unwrap();
        for trace in &outcome.traces {
            let votes: Vec<Vote> = trace.queried.iter().map(|&(_, v)| v).collect();
            assert_eq!(trace.decision, unweighted_majority(&votes));
        }
    }

    #[test]
    fn init_gold_counts_agreements_and_cost() {
        let mut states: Vec<LabelerState> = (0..3).map(LabelerState::new).collect();
        let gold = GoldSet::new(vec![
            GoldExample::new(0, vec![Vote::Plus, Vote::Plus, Vote::Minus]),
            GoldExample::new(1, vec![Vote::Minus, Vote::Minus, Vote::Plus]),
            GoldExample::new(2, vec![Vote::Plus, Vote::Plus, Vote::Minus]),
            GoldExample::new(3, vec![Vote::Plus, Vote::Plus, Vote::Minus]),
        ])
        .unwrap();
        let cost = init_gold(&mut states, &gold).unwrap();
        assert_eq!(cost, 12);
        // labelers 0 and 1 always match the gold majority, labeler 2 never
        assert_eq!(states[0].agreements(), 4);
        assert_eq!(states[1].agreements(), 4);
        assert_eq!(states[2].agreements(), 0);
        assert!(states.iter().all(|s| s.observations() == 4));
    }

    #[test]
    fn init_gold_requires_fresh_states_and_empty_is_free() {
        let mut states: Vec<LabelerState> = (0..3).map(LabelerState::new).collect();
        assert_eq!(init_gold(&mut states, &GoldSet::empty()).unwrap(), 0);
        assert!(states.iter().all(|s| s.is_fresh()));

        states[1].record(true);
        let gold = GoldSet::new(vec![GoldExample::new(
            0,
            vec![Vote::Plus, Vote::Plus, Vote::Plus],
        )])
        .unwrap();
        assert_eq!(
            init_gold(&mut states, &gold),
            Err(EngineError::StatesNotFresh)
        );
    }

    #[test]
    fn run_is_deterministic_and_empty_stream_is_marked() {
        let matrix = matrix_from_i8(&[
            &[1, -1, 1, 1, -1],
            &[-1, -1, 1, -1, -1],
            &[1, 1, 1, -1, -1],
            &[-1, 1, -1, 1, 1],
        ]);
        let config = EngineConfig::new(0.1, 10.0).with_seed(42);
        let a = run(&matrix, &[2, 0, 3, 1], &config, None).unwrap();
        let b = run(&matrix, &[2, 0, 3, 1], &config, None).unwrap();
        assert_eq!(a, b);

        let empty = run(&matrix, &[], &config, None).unwrap();
        assert!(empty.traces.is_empty());
        assert_eq!(empty.metrics.accuracy, None);
    }

    #[test]
    fn run_rejects_bad_orderings() {
        let matrix = matrix_from_i8(&[&[1, 1, 1], &[-1, -1, -1]]);
        let config = EngineConfig::new(0.1, 10.0);
        assert_eq!(
            run(&matrix, &[0, 0], &config, None),
            Err(EngineError::DuplicateOrdering(0))
        );
        assert!(matches!(
            run(&matrix, &[0, 7], &config, None),
            Err(EngineError::Core(CoreError::ExampleOutOfRange { .. }))
        ));
        let gold = GoldSet::new(vec![GoldExample::new(
            1,
            vec![Vote::Minus, Vote::Minus, Vote::Minus],
        )])
        .unwrap();
        assert_eq!(
            run(&matrix, &[0, 1], &config, Some(&gold)),
            Err(EngineError::OrderingHitsGold(1))
        );
    }

    #[test]
    fn config_validation_bounds() {
        assert!(EngineConfig::new(0.0, 1.0).validate().is_err());
        assert!(EngineConfig::new(1.5, 1.0).validate().is_err());
        assert!(EngineConfig::new(0.5, -1.0).validate().is_err());
        assert!(EngineConfig::new(1.0, 0.0).validate().is_ok());
    }

    #[test]
    fn heavy_smoothing_matches_unweighted_decisions() {
        let matrix = matrix_from_i8(&[
            &[1, -1, 1, 1, -1, -1, 1],
            &[-1, 1, 1, -1, -1, 1, -1],
            &[1, 1, -1, -1, 1, 1, 1],
            &[-1, -1, -1, 1, 1, -1, -1],
        ]);
        let config = EngineConfig::new(0.2, 1e6).with_seed(8);
        let outcome = run(&matrix, &[0, 1, 2, 3], &config, None).unwrap();
        for (state, trace) in outcome.states.iter().zip(&outcome.traces) {
            let q: f64 = round_quality(state, 1e6);
            assert!((q - 0.5).abs() < 1e-4);
            let votes: Vec<Vote> = trace.queried.iter().map(|&(_, v)| v).collect();
            assert_eq!(trace.decision, unweighted_majority(&votes));
        }
    }

    #[test]
    fn engine_runs_in_f32_too() {
        let matrix = matrix_from_i8(&[&[1, -1, 1, -1], &[-1, 1, 1, 1]]);
        let config: EngineConfig<f32> = EngineConfig::new(0.1f32, 10.0f32).with_seed(2);
        let outcome = run(&matrix, &[1, 0], &config, None).unwrap();
        assert_eq!(outcome.traces.len(), 2);
        for trace in &outcome.traces {
            assert!(trace.votes_spent() >= 3);
        }
    }
}
