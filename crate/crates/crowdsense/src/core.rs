//! Shared data model and arithmetic: votes, vote matrices, labeler
//! bookkeeping, quality estimates and the (weighted) majority primitives that
//! every aggregation method in this crate builds on.
//!
//! Everything here is a pure function of its inputs. Values are immutable
//! once constructed and safe to share across threads.

use thiserror::Error;

use crate::scalar::{count, half, two, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum CoreError {
    /// `(a + K) / (c + 2K)` is 0/0 when there are no observations and no
    /// smoothing. Callers must either smooth (K > 0) or seed counts first.
    #[error("quality estimate undefined: no observations and no smoothing")]
    UndefinedQuality,
    #[error("agreement count {agreements} exceeds observation count {observations}")]
    InvalidCounts { agreements: u64, observations: u64 },
    #[error("smoothing parameter must be finite and non-negative")]
    InvalidSmoothing,
    #[error("quality value {0} outside [0, 1]")]
    QualityOutOfRange(f64),
    #[error("vote/quality length mismatch: {votes} votes vs {qualities} qualities")]
    LengthMismatch { votes: usize, qualities: usize },
    #[error("empty vote set")]
    EmptyVotes,
    #[error("no labeler states given")]
    EmptyStates,
    #[error("example index {index} out of range for {len} examples")]
    ExampleOutOfRange { index: usize, len: usize },
    #[error("a vote matrix needs at least one example and one labeler")]
    EmptyMatrix,
    #[error("example row {row} has {found} votes, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{ids} example ids for {rows} vote rows")]
    IdCountMismatch { ids: usize, rows: usize },
}

/// A single binary label. There is no missing/abstain value: every cell of a
/// [`VoteMatrix`] holds exactly one of the two labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vote {
    Plus,
    Minus,
}

impl Vote {
    /// Sign of a score, with the crate-wide tie rule: an exact zero decides
    /// `Plus` so that identical runs stay reproducible.
    pub fn from_sign<F: Scalar>(score: F) -> Self {
        if score >= F::zero() {
            Vote::Plus
        } else {
            Vote::Minus
        }
    }

    pub fn from_i8(value: i8) -> Option<Self> {
        match value {
            1 => Some(Vote::Plus),
            -1 => Some(Vote::Minus),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Vote::Plus => 1,
            Vote::Minus => -1,
        }
    }

    pub fn value<F: Scalar>(self) -> F {
        match self {
            Vote::Plus => F::one(),
            Vote::Minus => -F::one(),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Vote::Plus => Vote::Minus,
            Vote::Minus => Vote::Plus,
        }
    }
}

/// Dense `N x M` grid of votes: every example voted on by every labeler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteMatrix {
    example_ids: Vec<String>,
    votes: Vec<Vote>,
    n_labelers: usize,
}

impl VoteMatrix {
    /// Builds a matrix from per-example vote rows. Rows must be non-empty and
    /// rectangular; `example_ids` must match the row count.
    ///
    /// A single labeler is enough for the static baselines; the engine itself
    /// checks its stronger `M >= 3` requirement at entry.
    pub fn new(example_ids: Vec<String>, rows: Vec<Vec<Vote>>) -> Result<Self, CoreError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(CoreError::EmptyMatrix);
        }
        if example_ids.len() != rows.len() {
            return Err(CoreError::IdCountMismatch {
                ids: example_ids.len(),
                rows: rows.len(),
            });
        }
        let n_labelers = rows[0].len();
        let mut votes = Vec::with_capacity(rows.len() * n_labelers);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n_labelers {
                return Err(CoreError::RaggedRow {
                    row,
                    expected: n_labelers,
                    found: r.len(),
                });
            }
            votes.extend_from_slice(r);
        }
        Ok(Self {
            example_ids,
            votes,
            n_labelers,
        })
    }

    /// Convenience constructor with generated example ids `e0, e1, ...`.
    pub fn from_rows(rows: Vec<Vec<Vote>>) -> Result<Self, CoreError> {
        let ids = (0..rows.len()).map(|i| format!("e{i}")).collect();
        Self::new(ids, rows)
    }

    pub fn n_examples(&self) -> usize {
        self.example_ids.len()
    }

    pub fn n_labelers(&self) -> usize {
        self.n_labelers
    }

    pub fn example_id(&self, example: usize) -> &str {
        &self.example_ids[example]
    }

    pub fn example_ids(&self) -> &[String] {
        &self.example_ids
    }

    pub fn vote(&self, example: usize, labeler: usize) -> Vote {
        self.votes[example * self.n_labelers + labeler]
    }

    /// All votes on one example, indexed by labeler.
    pub fn row(&self, example: usize) -> &[Vote] {
        let start = example * self.n_labelers;
        &self.votes[start..start + self.n_labelers]
    }

    pub fn check_example(&self, example: usize) -> Result<(), CoreError> {
        if example < self.n_examples() {
            Ok(())
        } else {
            Err(CoreError::ExampleOutOfRange {
                index: example,
                len: self.n_examples(),
            })
        }
    }
}

/// Running agreement bookkeeping for one labeler: how often it was queried
/// and how often its vote matched the decision taken on those rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelerState {
    labeler_id: usize,
    agreements: u64,
    observations: u64,
    /// Set by the engine when low-quality inversion is enabled and this
    /// labeler's current estimate fell below 1/2. Off by default.
    pub flipped: bool,
}

impl LabelerState {
    pub fn new(labeler_id: usize) -> Self {
        Self {
            labeler_id,
            agreements: 0,
            observations: 0,
            flipped: false,
        }
    }

    /// State with pre-seeded counts, e.g. from gold-standard initialization.
    pub fn with_counts(
        labeler_id: usize,
        agreements: u64,
        observations: u64,
    ) -> Result<Self, CoreError> {
        if agreements > observations {
            return Err(CoreError::InvalidCounts {
                agreements,
                observations,
            });
        }
        Ok(Self {
            labeler_id,
            agreements,
            observations,
            flipped: false,
        })
    }

    pub fn labeler_id(&self) -> usize {
        self.labeler_id
    }

    pub fn agreements(&self) -> u64 {
        self.agreements
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn is_fresh(&self) -> bool {
        self.agreements == 0 && self.observations == 0
    }

    /// Records one queried round: the observation count always grows, the
    /// agreement count only when the labeler's vote matched the decision.
    pub fn record(&mut self, agreed: bool) {
        self.observations += 1;
        if agreed {
            self.agreements += 1;
        }
    }

    pub fn quality<F: Scalar>(&self, smoothing: F) -> Result<Quality<F>, CoreError> {
        quality_estimate(self.agreements, self.observations, smoothing)
    }
}

/// Shrinkage estimate of how often a labeler agrees with the decision,
/// pulled toward 1/2 while observations are scarce. Always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Quality<F>(F);

impl<F: Scalar> Quality<F> {
    pub fn new(value: F) -> Result<Self, CoreError> {
        if value >= F::zero() && value <= F::one() {
            Ok(Self(value))
        } else {
            Err(CoreError::QualityOutOfRange(
                value.to_f64().unwrap_or(f64::NAN),
            ))
        }
    }

    pub fn half() -> Self {
        Self(half())
    }

    pub fn get(self) -> F {
        self.0
    }
}

/// Shrinkage agreement estimate `(a + K) / (c + 2K)`.
///
/// With no data and positive smoothing this is exactly 1/2; with `K = 0` it
/// reduces to the raw agreement rate and is undefined until the labeler has
/// been observed at least once.
pub fn quality_estimate<F: Scalar>(
    agreements: u64,
    observations: u64,
    smoothing: F,
) -> Result<Quality<F>, CoreError> {
    if !(smoothing.is_finite() && smoothing >= F::zero()) {
        return Err(CoreError::InvalidSmoothing);
    }
    if agreements > observations {
        return Err(CoreError::InvalidCounts {
            agreements,
            observations,
        });
    }
    if observations == 0 && smoothing == F::zero() {
        return Err(CoreError::UndefinedQuality);
    }
    let value = (count::<F>(agreements) + smoothing)
        / (count::<F>(observations) + two::<F>() * smoothing);
    Quality::new(value)
}

/// Confidence score of a queried set: the quality-weighted sum of its votes,
/// accumulated in vote order.
pub fn weighted_score<F: Scalar>(votes: &[Vote], qualities: &[Quality<F>]) -> Result<F, CoreError> {
    if votes.is_empty() {
        return Err(CoreError::EmptyVotes);
    }
    if votes.len() != qualities.len() {
        return Err(CoreError::LengthMismatch {
            votes: votes.len(),
            qualities: qualities.len(),
        });
    }
    Ok(votes
        .iter()
        .zip(qualities)
        .fold(F::zero(), |acc, (v, q)| acc + v.value::<F>() * q.get()))
}

/// Sign of the weighted score; an exact zero decides `Plus`.
pub fn weighted_majority<F: Scalar>(
    votes: &[Vote],
    qualities: &[Quality<F>],
) -> Result<Vote, CoreError> {
    weighted_score(votes, qualities).map(Vote::from_sign)
}

/// The ground truth this crate scores against: the equal-weight majority of
/// all labelers on one example. A zero sum decides `Plus`.
pub fn crowd_majority(matrix: &VoteMatrix, example: usize) -> Result<Vote, CoreError> {
    matrix.check_example(example)?;
    Ok(unweighted_majority(matrix.row(example)))
}

/// Equal-weight majority of a vote slice with the `Plus` tie rule.
pub fn unweighted_majority(votes: &[Vote]) -> Vote {
    let sum: i64 = votes.iter().map(|v| v.as_i8() as i64).sum();
    if sum >= 0 {
        Vote::Plus
    } else {
        Vote::Minus
    }
}

/// Labeler ids in descending order of their quality estimates, ties broken
/// by ascending id so the order is total and reproducible.
pub fn rank_labelers<F: Scalar>(
    states: &[LabelerState],
    smoothing: F,
) -> Result<Vec<usize>, CoreError> {
    if states.is_empty() {
        return Err(CoreError::EmptyStates);
    }
    let scored: Vec<(usize, F)> = states
        .iter()
        .map(|s| Ok((s.labeler_id(), s.quality(smoothing)?.get())))
        .collect::<Result<_, CoreError>>()?;
    Ok(rank_by_quality(&scored))
}

/// Sorts `(id, quality)` pairs by quality descending, then id ascending, and
/// returns the ids. Shared by [`rank_labelers`] and the engine's per-round
/// ranking (which substitutes a fallback quality for unobserved labelers when
/// smoothing is zero).
pub fn rank_by_quality<F: Scalar>(scored: &[(usize, F)]) -> Vec<usize> {
    let mut order: Vec<(usize, F)> = scored.to_vec();
    order.sort_by(|(id_a, q_a), (id_b, q_b)| {
        q_b.partial_cmp(q_a)
            .expect("quality estimates are never NaN")
            .then(id_a.cmp(id_b))
    });
    order.into_iter().map(|(id, _)| id).collect()
}
