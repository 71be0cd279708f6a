//! Shared acceptance-test machinery: a reference step-through of the default
//! collector written independently of the engine, and a trace replay that
//! re-checks every add/stop decision from a finished run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crowdsense::engine::{GoldSet, RoundTrace};
use crowdsense::{Vote, VoteMatrix};

pub struct OracleRound {
    pub queried: Vec<(usize, Vote)>,
    pub final_score: f64,
    pub decision: Vote,
}

pub struct OracleRun {
    pub rounds: Vec<OracleRound>,
    pub agreements: Vec<u64>,
    pub observations: Vec<u64>,
    pub total_votes: u64,
}

/// Brute-force run of the default configuration (two top-quality seeds plus
/// one random, candidates in rank order, weighted votes, no flipping).
///
/// Everything is recomputed from scratch each round with its own arithmetic;
/// the only things shared with the engine are the data types and the seeded
/// generator, which it consumes with the same protocol (one
/// `random_range(0..m-2)` draw per round).
pub fn oracle_run(
    matrix: &VoteMatrix,
    ordering: &[usize],
    epsilon: f64,
    smoothing: f64,
    gold: Option<&GoldSet>,
    rng_seed: u64,
) -> OracleRun {
    let m = matrix.n_labelers();
    let mut agreements = vec![0u64; m];
    let mut observations = vec![0u64; m];
    let mut total_votes = 0u64;

    if let Some(gold) = gold {
        for ex in gold.examples() {
            let sum: i64 = ex.votes().iter().map(|v| v.as_i8() as i64).sum();
            let label = if sum >= 0 { Vote::Plus } else { Vote::Minus };
            for (i, &vote) in ex.votes().iter().enumerate() {
                observations[i] += 1;
                if vote == label {
                    agreements[i] += 1;
                }
            }
            total_votes += m as u64;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut rounds = Vec::with_capacity(ordering.len());
    for &example in ordering {
        let quality: Vec<f64> = (0..m)
            .map(|i| {
                if smoothing == 0.0 && observations[i] == 0 {
                    0.5
                } else {
                    (agreements[i] as f64 + smoothing)
                        / (observations[i] as f64 + 2.0 * smoothing)
                }
            })
            .collect();
        let mut ranked: Vec<usize> = (0..m).collect();
        ranked.sort_by(|&a, &b| {
            quality[b]
                .partial_cmp(&quality[a])
                .unwrap()
                .then(a.cmp(&b))
        });

        // seed: the two best ranks plus one uniform draw from the rest
        let k = 2 + rng.random_range(0..m - 2);
        let mut queried = vec![ranked[0], ranked[1], ranked[k]];

        // keep offering the next-ranked unqueried labeler while the margin
        // per vote stays under epsilon; stop at the first rejection
        for (j, &candidate) in ranked.iter().enumerate().skip(2) {
            if j == k {
                continue;
            }
            let score: f64 = queried
                .iter()
                .map(|&i| matrix.vote(example, i).as_i8() as f64 * quality[i])
                .sum();
            if (score.abs() - quality[candidate]) / (queried.len() as f64 + 1.0) < epsilon {
                queried.push(candidate);
            } else {
                break;
            }
        }

        let final_score: f64 = queried
            .iter()
            .map(|&i| matrix.vote(example, i).as_i8() as f64 * quality[i])
            .sum();
        let decision = if final_score >= 0.0 {
            Vote::Plus
        } else {
            Vote::Minus
        };
        for &i in &queried {
            observations[i] += 1;
            if matrix.vote(example, i) == decision {
                agreements[i] += 1;
            }
        }
        total_votes += queried.len() as u64;
        rounds.push(OracleRound {
            queried: queried
                .into_iter()
                .map(|i| (i, matrix.vote(example, i)))
                .collect(),
            final_score,
            decision,
        });
    }

    OracleRun {
        rounds,
        agreements,
        observations,
        total_votes,
    }
}

/// Replays a default-configuration run from its traces and verifies the
/// stopping behavior of every round: the seed is the two top ranks plus one
/// member of the remainder, each accepted candidate is the next unqueried
/// rank and satisfied the add rule at acceptance time, and when the round
/// stopped short of the whole crowd the next candidate failed it.
pub fn verify_stopping(
    matrix: &VoteMatrix,
    traces: &[RoundTrace<f64>],
    epsilon: f64,
    smoothing: f64,
    gold: Option<&GoldSet>,
) {
    let m = matrix.n_labelers();
    let mut agreements = vec![0u64; m];
    let mut observations = vec![0u64; m];
    if let Some(gold) = gold {
        for ex in gold.examples() {
            let label = ex.crowd_label();
            for (i, &vote) in ex.votes().iter().enumerate() {
                observations[i] += 1;
                if vote == label {
                    agreements[i] += 1;
                }
            }
        }
    }

    for trace in traces {
        let quality: Vec<f64> = (0..m)
            .map(|i| {
                if smoothing == 0.0 && observations[i] == 0 {
                    0.5
                } else {
                    (agreements[i] as f64 + smoothing)
                        / (observations[i] as f64 + 2.0 * smoothing)
                }
            })
            .collect();
        let mut ranked: Vec<usize> = (0..m).collect();
        ranked.sort_by(|&a, &b| {
            quality[b]
                .partial_cmp(&quality[a])
                .unwrap()
                .then(a.cmp(&b))
        });

        let queried_ids: Vec<usize> = trace.queried.iter().map(|&(id, _)| id).collect();
        assert!(queried_ids.len() >= 3, "a round queries at least the seed");
        assert_eq!(queried_ids[0], ranked[0], "first seed member is rank 1");
        assert_eq!(queried_ids[1], ranked[1], "second seed member is rank 2");
        let k_id = queried_ids[2];
        assert!(
            ranked[2..].contains(&k_id),
            "random seed member comes from the remaining ranks"
        );

        let candidates: Vec<usize> = ranked[2..]
            .iter()
            .copied()
            .filter(|&id| id != k_id)
            .collect();
        let accepted = &queried_ids[3..];
        assert_eq!(
            accepted,
            &candidates[..accepted.len()],
            "accepted candidates are a rank-order prefix"
        );

        let score_of = |ids: &[usize]| -> f64 {
            ids.iter()
                .map(|&i| matrix.vote(trace.example_index, i).as_i8() as f64 * quality[i])
                .sum()
        };
        for (pos, &candidate) in accepted.iter().enumerate() {
            let size = 3 + pos;
            let score = score_of(&queried_ids[..size]);
            assert!(
                (score.abs() - quality[candidate]) / (size as f64 + 1.0) < epsilon,
                "accepted candidate {candidate} satisfied the add rule"
            );
        }
        if queried_ids.len() < m {
            let rejected = candidates[accepted.len()];
            let score = score_of(&queried_ids);
            assert!(
                (score.abs() - quality[rejected]) / (queried_ids.len() as f64 + 1.0) >= epsilon,
                "first rejected candidate {rejected} failed the add rule"
            );
        }

        let final_score = score_of(&queried_ids);
        assert_eq!(final_score.to_bits(), trace.final_score.to_bits());
        let decision = if final_score >= 0.0 {
            Vote::Plus
        } else {
            Vote::Minus
        };
        assert_eq!(decision, trace.decision);

        for &(id, vote) in &trace.queried {
            observations[id] += 1;
            if vote == decision {
                agreements[id] += 1;
            }
        }
    }
}

/// Random complete vote matrix with i.i.d. fair-coin votes.
pub fn random_matrix(n_examples: usize, n_labelers: usize, seed: u64) -> VoteMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n_examples)
        .map(|_| {
            (0..n_labelers)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        Vote::Plus
                    } else {
                        Vote::Minus
                    }
                })
                .collect()
        })
        .collect();
    VoteMatrix::from_rows(rows).unwrap()
}
