//! Crowd data supply: synthetic crowds with target labeler accuracies, label
//! noise injection, run orderings, gold-set selection, and the vote-matrix
//! CSV format.
//!
//! Synthesis draws a latent truth per example and lets each labeler match it
//! with its configured accuracy. The evaluation target stays the crowd's own
//! majority, so realized agreement-with-majority rates approximate, but do
//! not equal, the configured accuracies: the majority is correlated with each
//! of its members.

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::core::{crowd_majority, CoreError, Vote, VoteMatrix};
use crate::engine::{GoldExample, GoldSet};
use crate::rngutil::{sample_distinct, shuffle};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("labeler {labeler} accuracy {value} outside [0, 1]")]
    BadAccuracy { labeler: usize, value: f64 },
    #[error("base rate {0} outside [0, 1]")]
    BadBaseRate(f64),
    #[error("flip probability {0} outside [0, 1]")]
    BadFlipProb(f64),
    #[error("a crowd needs at least one example and one labeler")]
    EmptyCrowd,
    #[error("noise labeler id {id} out of range for {n_labelers} labelers")]
    NoiseIdOutOfRange { id: usize, n_labelers: usize },
    #[error("noise labeler id {0} listed twice")]
    DuplicateNoiseId(usize),
    #[error("not enough {class} examples for the gold set: need {needed}, have {available}")]
    ClassExhausted {
        class: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("vote matrix input is empty")]
    EmptyInput,
    #[error("line 1: malformed header {0:?} (want example_id,l1,...,lM)")]
    BadHeader(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RowLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, labeler column {column}: invalid vote {value:?} (want -1 or 1)")]
    BadCell {
        line: usize,
        column: usize,
        value: String,
    },
    #[error("crowd spec line {line}: {message}")]
    SpecParse { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Recipe for a synthetic crowd: per-labeler target accuracies against a
/// latent truth with the given positive-label base rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CrowdSpec {
    pub n_examples: usize,
    pub labeler_accuracies: Vec<f64>,
    pub base_rate: f64,
    pub rng_seed: u64,
}

impl CrowdSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_examples == 0 || self.labeler_accuracies.is_empty() {
            return Err(SimError::EmptyCrowd);
        }
        for (labeler, &value) in self.labeler_accuracies.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::BadAccuracy { labeler, value });
            }
        }
        if !(0.0..=1.0).contains(&self.base_rate) {
            return Err(SimError::BadBaseRate(self.base_rate));
        }
        Ok(())
    }

    /// Parses the `key = value` crowd-spec text format:
    ///
    /// ```text
    /// # comment
    /// n_examples = 500
    /// accuracies = 0.48,0.9,0.93
    /// base_rate = 0.5
    /// seed = 1
    /// ```
    ///
    /// `base_rate` defaults to 0.5 and `seed` to 0 when omitted.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut n_examples: Option<usize> = None;
        let mut accuracies: Option<Vec<f64>> = None;
        let mut base_rate = 0.5;
        let mut rng_seed = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(SimError::SpecParse {
                line,
                message: "expected key = value".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |message: String| SimError::SpecParse { line, message };
            match key {
                "n_examples" => {
                    n_examples = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("invalid n_examples {value:?}")))?,
                    );
                }
                "accuracies" => {
                    let parsed = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| bad(format!("invalid accuracies list {value:?}")))?;
                    accuracies = Some(parsed);
                }
                "base_rate" => {
                    base_rate = value
                        .parse()
                        .map_err(|_| bad(format!("invalid base_rate {value:?}")))?;
                }
                "seed" => {
                    rng_seed = value
                        .parse()
                        .map_err(|_| bad(format!("invalid seed {value:?}")))?;
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let spec = Self {
            n_examples: n_examples.ok_or(SimError::SpecParse {
                line: 0,
                message: "missing n_examples".into(),
            })?,
            labeler_accuracies: accuracies.ok_or(SimError::SpecParse {
                line: 0,
                message: "missing accuracies".into(),
            })?,
            base_rate,
            rng_seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Which labeler columns get independent vote flips, and how often.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub labeler_ids: Vec<usize>,
    pub flip_prob: f64,
}

impl NoiseSpec {
    fn validate(&self, n_labelers: usize) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(SimError::BadFlipProb(self.flip_prob));
        }
        let mut seen = vec![false; n_labelers];
        for &id in &self.labeler_ids {
            if id >= n_labelers {
                return Err(SimError::NoiseIdOutOfRange { id, n_labelers });
            }
            if seen[id] {
                return Err(SimError::DuplicateNoiseId(id));
            }
            seen[id] = true;
        }
        Ok(())
    }
}

/// Draws a crowd from the recipe: one latent truth per example, then one
/// vote per labeler matching the truth with its configured accuracy. Draw
/// order is fixed (truth first, then labelers 0..M) so a seed pins the whole
/// matrix.
pub fn synthesize_crowd(spec: &CrowdSpec) -> Result<VoteMatrix, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut rows = Vec::with_capacity(spec.n_examples);
    for _ in 0..spec.n_examples {
        let truth = if rng.random_bool(spec.base_rate) {
            Vote::Plus
        } else {
            Vote::Minus
        };
        let row = spec
            .labeler_accuracies
            .iter()
            .map(|&acc| {
                if rng.random_bool(acc) {
                    truth
                } else {
                    truth.flipped()
                }
            })
            .collect();
        rows.push(row);
    }
    Ok(VoteMatrix::from_rows(rows)?)
}

/// Copy of the matrix with the listed labelers' votes independently flipped
/// with the given probability. The input is untouched.
pub fn inject_noise<R: Rng>(
    matrix: &VoteMatrix,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<VoteMatrix, SimError> {
    noise.validate(matrix.n_labelers())?;
    let noisy = vec![false; matrix.n_labelers()];
    let mut noisy = noisy;
    for &id in &noise.labeler_ids {
        noisy[id] = true;
    }
    let mut rows = Vec::with_capacity(matrix.n_examples());
    for example in 0..matrix.n_examples() {
        let row = matrix
            .row(example)
            .iter()
            .enumerate()
            .map(|(labeler, &vote)| {
                if noisy[labeler] && rng.random_bool(noise.flip_prob) {
                    vote.flipped()
                } else {
                    vote
                }
            })
            .collect();
        rows.push(row);
    }
    Ok(VoteMatrix::new(matrix.example_ids().to_vec(), rows)?)
}

/// Uniform permutation of `0..n`.
pub fn random_ordering<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut ordering: Vec<usize> = (0..n).collect();
    shuffle(&mut ordering, rng);
    ordering
}

/// Samples a gold set with the requested class balance: `n_pos` examples
/// whose crowd majority is `Plus` and `n_neg` whose majority is `Minus`,
/// each drawn uniformly without replacement.
pub fn make_gold<R: Rng>(
    matrix: &VoteMatrix,
    n_pos: usize,
    n_neg: usize,
    rng: &mut R,
) -> Result<GoldSet, SimError> {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for example in 0..matrix.n_examples() {
        match crowd_majority(matrix, example)? {
            Vote::Plus => positives.push(example),
            Vote::Minus => negatives.push(example),
        }
    }
    if positives.len() < n_pos {
        return Err(SimError::ClassExhausted {
            class: "crowd-positive",
            needed: n_pos,
            available: positives.len(),
        });
    }
    if negatives.len() < n_neg {
        return Err(SimError::ClassExhausted {
            class: "crowd-negative",
            needed: n_neg,
            available: negatives.len(),
        });
    }
    let mut picked: Vec<usize> = sample_distinct(positives.len(), n_pos, rng)
        .into_iter()
        .map(|i| positives[i])
        .collect();
    picked.extend(
        sample_distinct(negatives.len(), n_neg, rng)
            .into_iter()
            .map(|i| negatives[i]),
    );
    let examples = picked
        .into_iter()
        .map(|example| GoldExample::new(example, matrix.row(example).to_vec()))
        .collect();
    GoldSet::new(examples).map_err(|_| SimError::ClassExhausted {
        class: "distinct",
        needed: n_pos + n_neg,
        available: matrix.n_examples(),
    })
}

/// Reads the vote-matrix CSV format: header `example_id,l1,...,lM`, then one
/// line per example holding an id token and M fields that are exactly `-1`
/// or `1`.
pub fn load_matrix<R: Read>(reader: R) -> Result<VoteMatrix, SimError> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(SimError::EmptyInput),
    };
    let mut header_fields = header.split(',');
    if header_fields.next() != Some("example_id") {
        return Err(SimError::BadHeader(header.clone()));
    }
    let n_labelers = header_fields.count();
    if n_labelers == 0 {
        return Err(SimError::BadHeader(header));
    }

    let mut example_ids = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        let line_no = i + 2;
        if fields.len() != n_labelers + 1 {
            return Err(SimError::RowLength {
                line: line_no,
                expected: n_labelers + 1,
                found: fields.len(),
            });
        }
        example_ids.push(fields[0].to_string());
        let mut row = Vec::with_capacity(n_labelers);
        for (column, field) in fields[1..].iter().enumerate() {
            let vote = match *field {
                "1" => Vote::Plus,
                "-1" => Vote::Minus,
                other => {
                    return Err(SimError::BadCell {
                        line: line_no,
                        column: column + 1,
                        value: other.to_string(),
                    })
                }
            };
            row.push(vote);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SimError::EmptyInput);
    }
    Ok(VoteMatrix::new(example_ids, rows)?)
}

/// Writes the matrix in the same CSV format `load_matrix` reads. Output is
/// bit-stable: unquoted fields, LF line endings, no trailing separators.
pub fn save_matrix<W: Write>(matrix: &VoteMatrix, mut writer: W) -> std::io::Result<()> {
    write!(writer, "example_id")?;
    for labeler in 1..=matrix.n_labelers() {
        write!(writer, ",l{labeler}")?;
    }
    writeln!(writer)?;
    for example in 0..matrix.n_examples() {
        write!(writer, "{}", matrix.example_id(example))?;
        for &vote in matrix.row(example) {
            write!(writer, ",{}", vote.as_i8())?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines;

    fn spec(accuracies: &[f64], n: usize, seed: u64) -> CrowdSpec {
        CrowdSpec {
            n_examples: n,
            labeler_accuracies: accuracies.to_vec(),
            base_rate: 0.5,
            rng_seed: seed,
        }
    }

    #[test]
    fn perfect_labelers_vote_unanimously() {
        let matrix = synthesize_crowd(&spec(&[1.0; 5], 200, 3)).unwrap();
        for rate in baselines::agreement_rates(&matrix) {
            assert_eq!(rate, 100.0);
        }
    }

    #[test]
    fn coin_flip_labeler_agrees_with_majority_about_half_the_time() {
        // one fair-coin labeler among ten competent ones
        let mut accuracies = vec![0.9; 11];
        accuracies[4] = 0.5;
        for seed in 0..20 {
            let matrix = synthesize_crowd(&spec(&accuracies, 10_000, seed)).unwrap();
            let rate = baselines::agreement_rates(&matrix)[4];
            assert!(
                (45.0..=55.0).contains(&rate),
                "seed {seed}: realized rate {rate}"
            );
        }
    }

    #[test]
    fn movielens_profile_calibrates_near_published_average() {
        let accuracies: Vec<f64> = crate::MOVIELENS_AGREEMENT_RATES
            .iter()
            .map(|r| r / 100.0)
            .collect();
        let matrix = synthesize_crowd(&spec(&accuracies, 10_000, 99)).unwrap();
        let avg = baselines::average_labeler(&matrix);
        assert!(
            (avg - 74.05).abs() <= 2.0,
            "average labeler rate {avg} drifted more than 2 points from 74.05"
        );
    }

    #[test]
    fn synthesis_is_deterministic_per_seed() {
        let a = synthesize_crowd(&spec(&[0.9, 0.7, 0.6], 50, 8)).unwrap();
        let b = synthesize_crowd(&spec(&[0.9, 0.7, 0.6], 50, 8)).unwrap();
        let c = synthesize_crowd(&spec(&[0.9, 0.7, 0.6], 50, 9)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_identity_and_full_inversion() {
        let matrix = synthesize_crowd(&spec(&[0.9, 0.8, 0.7, 0.6], 100, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let same = inject_noise(
            &matrix,
            &NoiseSpec {
                labeler_ids: vec![1, 3],
                flip_prob: 0.0,
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(same, matrix);

        let inverted = inject_noise(
            &matrix,
            &NoiseSpec {
                labeler_ids: vec![1],
                flip_prob: 1.0,
            },
            &mut rng,
        )
        .unwrap();
        for example in 0..matrix.n_examples() {
            assert_eq!(inverted.vote(example, 1), matrix.vote(example, 1).flipped());
            assert_eq!(inverted.vote(example, 0), matrix.vote(example, 0));
            assert_eq!(inverted.vote(example, 2), matrix.vote(example, 2));
        }
    }

    #[test]
    fn half_noise_flips_about_half_the_cells() {
        let matrix = synthesize_crowd(&spec(&[0.9; 4], 10_000, 5)).unwrap();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy = inject_noise(
                &matrix,
                &NoiseSpec {
                    labeler_ids: vec![2],
                    flip_prob: 0.5,
                },
                &mut rng,
            )
            .unwrap();
            let kept = (0..matrix.n_examples())
                .filter(|&e| noisy.vote(e, 2) == matrix.vote(e, 2))
                .count() as f64
                / matrix.n_examples() as f64;
            assert!((0.48..=0.52).contains(&kept), "seed {seed}: kept {kept}");
        }
    }

    #[test]
    fn noise_rejects_bad_ids() {
        let matrix = synthesize_crowd(&spec(&[0.9; 3], 5, 0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            inject_noise(
                &matrix,
                &NoiseSpec {
                    labeler_ids: vec![3],
                    flip_prob: 0.5
                },
                &mut rng
            ),
            Err(SimError::NoiseIdOutOfRange { id: 3, .. })
        ));
    }

    #[test]
    fn random_ordering_edges_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(random_ordering(0, &mut rng).is_empty());
        assert_eq!(random_ordering(1, &mut rng), vec![0]);
        let a = random_ordering(5, &mut ChaCha8Rng::seed_from_u64(13));
        let b = random_ordering(5, &mut ChaCha8Rng::seed_from_u64(13));
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn gold_sets_are_balanced_and_relabelable() {
        let matrix = synthesize_crowd(&spec(&[0.9, 0.85, 0.8, 0.75, 0.7], 200, 21)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gold = make_gold(&matrix, 2, 2, &mut rng).unwrap();
        assert_eq!(gold.len(), 4);
        let labels: Vec<Vote> = gold.examples().iter().map(|ex| ex.crowd_label()).collect();
        assert_eq!(labels.iter().filter(|&&l| l == Vote::Plus).count(), 2);
        for ex in gold.examples() {
            assert_eq!(
                ex.crowd_label(),
                crowd_majority(&matrix, ex.example_index()).unwrap()
            );
        }

        let empty = make_gold(&matrix, 0, 0, &mut rng).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn gold_exhaustion_is_an_error() {
        let matrix = VoteMatrix::from_rows(vec![vec![Vote::Plus; 4]; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            make_gold(&matrix, 0, 1, &mut rng),
            Err(SimError::ClassExhausted {
                class: "crowd-negative",
                needed: 1,
                available: 0,
            })
        ));
    }

    #[test]
    fn load_matrix_parses_and_reports_coordinates() {
        let csv = "example_id,l1,l2,l3\na,1,1,1\nb,1,1,1\n";
        let matrix = load_matrix(csv.as_bytes()).unwrap();
        assert_eq!(matrix.n_examples(), 2);
        assert_eq!(matrix.n_labelers(), 3);
        assert_eq!(matrix.example_id(1), "b");

        let zero = "example_id,l1,l2\na,1,0\n";
        assert!(matches!(
            load_matrix(zero.as_bytes()),
            Err(SimError::BadCell {
                line: 2,
                column: 2,
                ..
            })
        ));

        let ragged = "example_id,l1,l2\na,1\n";
        assert!(matches!(
            load_matrix(ragged.as_bytes()),
            Err(SimError::RowLength {
                line: 2,
                expected: 3,
                found: 2,
            })
        ));

        assert!(matches!(
            load_matrix("".as_bytes()),
            Err(SimError::EmptyInput)
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let matrix = synthesize_crowd(&spec(&[0.9, 0.6, 0.5, 0.8], 40, 77)).unwrap();
        let mut buffer = Vec::new();
        save_matrix(&matrix, &mut buffer).unwrap();
        let reloaded = load_matrix(buffer.as_slice()).unwrap();
        assert_eq!(reloaded, matrix);
    }

    #[test]
    fn crowd_spec_parse_round_trips_keys() {
        let text = "# a profile\nn_examples = 12\naccuracies = 0.9, 0.8, 0.7\nbase_rate = 0.4\nseed = 5\n";
        let parsed = CrowdSpec::parse(text).unwrap();
        assert_eq!(parsed.n_examples, 12);
        assert_eq!(parsed.labeler_accuracies, vec![0.9, 0.8, 0.7]);
        assert_eq!(parsed.base_rate, 0.4);
        assert_eq!(parsed.rng_seed, 5);

        assert!(matches!(
            CrowdSpec::parse("accuracies = 0.9\n"),
            Err(SimError::SpecParse { .. })
        ));
        assert!(matches!(
            CrowdSpec::parse("n_examples = 3\naccuracies = 0.9\nwat = 1\n"),
            Err(SimError::SpecParse { line: 3, .. })
        ));
    }
}
