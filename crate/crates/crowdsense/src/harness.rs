//! Experiment orchestration: repeated seeded runs (optionally fanned out to
//! worker threads), parameter sweeps, aggregation across runs, and the
//! bit-stable CSV report formats.
//!
//! Every random choice in an experiment comes from a lane of a counter-based
//! ChaCha stream keyed by `(root_seed, run_index, lane)`, so results are a
//! pure function of the plan: reruns are byte-identical, parallel and serial
//! execution produce the same files, and adding runs never perturbs the
//! streams of earlier runs.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{run_iethresh, run_random_subset, BaselineError, IeThreshConfig};
use crate::core::VoteMatrix;
use crate::crowdsim::{make_gold, SimError};
use crate::engine::{self, EngineConfig, EngineError, GoldSet, RunMetrics, RunOutcome};
use crate::rngutil::shuffle;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot aggregate an empty run list")]
    EmptyMetrics,
    #[error("cannot aggregate runs that processed no examples")]
    MissingAccuracy,
    #[error("running-accuracy series differ in length across runs")]
    MismatchedRunningSeries,
    #[error("{param} grid value {value} out of range")]
    BadGridValue { param: &'static str, value: f64 },
    #[error("this sweep requires a CrowdSense plan")]
    WrongAlgorithm,
    #[error("need at least one run")]
    NoRuns,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Independent random lanes of one run. Keeping gold selection, stream
/// ordering and algorithm draws on separate lanes lets matched comparisons
/// (e.g. with/without gold) share orderings exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    Gold = 0,
    Ordering = 1,
    Algorithm = 2,
    Noise = 3,
}

const LANES: u64 = 4;

/// Deterministic generator for `(root_seed, run_index, lane)`.
pub fn lane_rng(root_seed: u64, run_index: u64, lane: Lane) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(run_index.wrapping_mul(LANES).wrapping_add(lane as u64));
    rng
}

/// Which vote collector an experiment drives.
#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    CrowdSense(EngineConfig<f64>),
    IeThresh(IeThreshConfig),
    RandomSubset,
}

/// A reproducible experiment: n independent runs of one algorithm on one
/// matrix, each with a fresh ordering (and gold set) derived from the root
/// seed and the run index.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub algorithm: Algorithm,
    pub gold_pos: usize,
    pub gold_neg: usize,
    pub n_runs: usize,
    pub root_seed: u64,
    pub parallel: bool,
}

impl Plan {
    pub fn new(algorithm: Algorithm, n_runs: usize, root_seed: u64) -> Self {
        Self {
            algorithm,
            gold_pos: 0,
            gold_neg: 0,
            n_runs,
            root_seed,
            parallel: true,
        }
    }
}

/// Ascending non-gold example indices, shuffled into a run ordering.
fn stream_ordering<R: Rng>(
    matrix: &VoteMatrix,
    gold: Option<&GoldSet>,
    rng: &mut R,
) -> Vec<usize> {
    let mut ordering: Vec<usize> = (0..matrix.n_examples())
        .filter(|&e| !gold.is_some_and(|g| g.contains_example(e)))
        .collect();
    shuffle(&mut ordering, rng);
    ordering
}

fn execute(
    matrix: &VoteMatrix,
    ordering: &[usize],
    algorithm: &Algorithm,
    gold: Option<&GoldSet>,
    root_seed: u64,
    run_index: u64,
) -> Result<RunOutcome<f64>, HarnessError> {
    match algorithm {
        Algorithm::CrowdSense(config) => {
            let mut config = config.clone();
            config.rng_seed = lane_rng(root_seed, run_index, Lane::Algorithm).random();
            Ok(engine::run(matrix, ordering, &config, gold)?)
        }
        Algorithm::IeThresh(config) => Ok(run_iethresh(matrix, ordering, config, gold)?),
        Algorithm::RandomSubset => {
            let mut rng = lane_rng(root_seed, run_index, Lane::Algorithm);
            Ok(run_random_subset(matrix, ordering, &mut rng)?)
        }
    }
}

fn single_run(
    matrix: &VoteMatrix,
    plan: &Plan,
    run_index: u64,
) -> Result<RunOutcome<f64>, HarnessError> {
    let gold = if plan.gold_pos + plan.gold_neg > 0 {
        let mut rng = lane_rng(plan.root_seed, run_index, Lane::Gold);
        Some(make_gold(matrix, plan.gold_pos, plan.gold_neg, &mut rng)?)
    } else {
        None
    };
    let mut order_rng = lane_rng(plan.root_seed, run_index, Lane::Ordering);
    let ordering = stream_ordering(matrix, gold.as_ref(), &mut order_rng);
    execute(
        matrix,
        &ordering,
        &plan.algorithm,
        gold.as_ref(),
        plan.root_seed,
        run_index,
    )
}

/// Executes the plan's runs and returns their outcomes in run-index order,
/// identical whether the runs were executed serially or on worker threads.
pub fn repeat_runs(matrix: &VoteMatrix, plan: &Plan) -> Result<Vec<RunOutcome<f64>>, HarnessError> {
    if plan.n_runs == 0 {
        return Err(HarnessError::NoRuns);
    }
    if plan.parallel {
        (0..plan.n_runs as u64)
            .into_par_iter()
            .map(|r| single_run(matrix, plan, r))
            .collect()
    } else {
        (0..plan.n_runs as u64)
            .map(|r| single_run(matrix, plan, r))
            .collect()
    }
}

/// Aggregate of a metric list: means, the sample (n-1) standard deviation of
/// accuracy, and the pointwise mean running-accuracy series. A single run
/// reports a standard deviation of 0 by convention; n is carried alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_total_votes: f64,
    pub mean_running_accuracy: Vec<f64>,
    pub n_runs: usize,
}

pub fn aggregate<'a>(
    metrics: impl IntoIterator<Item = &'a RunMetrics>,
) -> Result<Aggregate, HarnessError> {
    let metrics: Vec<&RunMetrics> = metrics.into_iter().collect();
    if metrics.is_empty() {
        return Err(HarnessError::EmptyMetrics);
    }
    let series_len = metrics[0].running_accuracy.len();
    let mut accuracies = Vec::with_capacity(metrics.len());
    let mut votes = Vec::with_capacity(metrics.len());
    let mut running_sums = vec![0.0; series_len];
    for m in &metrics {
        accuracies.push(m.accuracy.ok_or(HarnessError::MissingAccuracy)?);
        votes.push(m.total_votes as f64);
        if m.running_accuracy.len() != series_len {
            return Err(HarnessError::MismatchedRunningSeries);
        }
        for (sum, &value) in running_sums.iter_mut().zip(&m.running_accuracy) {
            *sum += value;
        }
    }
    let n = metrics.len() as f64;
    Ok(Aggregate {
        mean_accuracy: mean(&accuracies),
        std_accuracy: sample_std(&accuracies),
        mean_total_votes: mean(&votes),
        mean_running_accuracy: running_sums.into_iter().map(|s| s / n).collect(),
        n_runs: metrics.len(),
    })
}

pub fn aggregate_outcomes(outcomes: &[RunOutcome<f64>]) -> Result<Aggregate, HarnessError> {
    aggregate(outcomes.iter().map(|o| &o.metrics))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Epsilon,
    Smoothing,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::Smoothing => "k",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub mean_total_votes: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub n_runs: usize,
}

/// One aggregated row per grid value; together they trace the cost/accuracy
/// tradeoff curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

fn crowdsense_config(plan: &Plan) -> Result<EngineConfig<f64>, HarnessError> {
    match &plan.algorithm {
        Algorithm::CrowdSense(config) => Ok(config.clone()),
        _ => Err(HarnessError::WrongAlgorithm),
    }
}

fn sweep_over(
    matrix: &VoteMatrix,
    grid: &[f64],
    plan: &Plan,
    param: SweepParam,
) -> Result<SweepResult, HarnessError> {
    let base = crowdsense_config(plan)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut config = base.clone();
        match param {
            SweepParam::Epsilon => {
                if !(value > 0.0 && value <= 1.0) {
                    return Err(HarnessError::BadGridValue {
                        param: "epsilon",
                        value,
                    });
                }
                config.epsilon = value;
            }
            SweepParam::Smoothing => {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(HarnessError::BadGridValue { param: "k", value });
                }
                config.smoothing = value;
            }
        }
        let row_plan = Plan {
            algorithm: Algorithm::CrowdSense(config),
            ..plan.clone()
        };
        let outcomes = repeat_runs(matrix, &row_plan)?;
        let agg = aggregate_outcomes(&outcomes)?;
        rows.push(SweepRow {
            value,
            mean_total_votes: agg.mean_total_votes,
            mean_accuracy: agg.mean_accuracy,
            std_accuracy: agg.std_accuracy,
            n_runs: agg.n_runs,
        });
    }
    Ok(SweepResult { param, rows })
}

/// Cost/accuracy tradeoff across uncertainty thresholds. Grid values must
/// lie in `(0, 1]`; an empty grid yields an empty result.
pub fn sweep_epsilon(
    matrix: &VoteMatrix,
    grid: &[f64],
    plan: &Plan,
) -> Result<SweepResult, HarnessError> {
    sweep_over(matrix, grid, plan, SweepParam::Epsilon)
}

/// Smoothing-strength comparison at the plan's fixed epsilon.
pub fn sweep_k(matrix: &VoteMatrix, grid: &[f64], plan: &Plan) -> Result<SweepResult, HarnessError> {
    sweep_over(matrix, grid, plan, SweepParam::Smoothing)
}

/// Selection-threshold sweep for an IEThresh plan. Grid values must lie
/// strictly inside `(0, 1)`; note the threshold works opposite to the
/// engine's epsilon (larger values select fewer labelers).
pub fn sweep_iethresh_epsilon(
    matrix: &VoteMatrix,
    grid: &[f64],
    plan: &Plan,
) -> Result<SweepResult, HarnessError> {
    let base = match &plan.algorithm {
        Algorithm::IeThresh(config) => *config,
        _ => return Err(HarnessError::WrongAlgorithm),
    };
    let mut rows = Vec::with_capacity(grid.len());
    for &value in grid {
        if !(value > 0.0 && value < 1.0) {
            return Err(HarnessError::BadGridValue {
                param: "epsilon",
                value,
            });
        }
        let row_plan = Plan {
            algorithm: Algorithm::IeThresh(IeThreshConfig {
                epsilon: value,
                ..base
            }),
            ..plan.clone()
        };
        let outcomes = repeat_runs(matrix, &row_plan)?;
        let agg = aggregate_outcomes(&outcomes)?;
        rows.push(SweepRow {
            value,
            mean_total_votes: agg.mean_total_votes,
            mean_accuracy: agg.mean_accuracy,
            std_accuracy: agg.std_accuracy,
            n_runs: agg.n_runs,
        });
    }
    Ok(SweepResult {
        param: SweepParam::Epsilon,
        rows,
    })
}

/// Matched with/without-gold comparison of CrowdSense and IEThresh.
///
/// All four arms of one run share the same gold draw and the same stream
/// ordering (gold examples are excluded from the evaluated stream in every
/// arm, so the running-accuracy series are over identical example
/// sequences); the without-gold arms simply skip counter initialization and
/// its cost.
#[derive(Debug, Clone)]
pub struct GoldComparison {
    pub crowdsense_with_gold: Vec<RunOutcome<f64>>,
    pub crowdsense_without_gold: Vec<RunOutcome<f64>>,
    pub iethresh_with_gold: Vec<RunOutcome<f64>>,
    pub iethresh_without_gold: Vec<RunOutcome<f64>>,
}

#[allow(clippy::too_many_arguments)]
pub fn compare_gold(
    matrix: &VoteMatrix,
    gold_pos: usize,
    gold_neg: usize,
    crowdsense: &EngineConfig<f64>,
    iethresh: &IeThreshConfig,
    n_runs: usize,
    root_seed: u64,
    parallel: bool,
) -> Result<GoldComparison, HarnessError> {
    if n_runs == 0 {
        return Err(HarnessError::NoRuns);
    }
    type Arms = (
        RunOutcome<f64>,
        RunOutcome<f64>,
        RunOutcome<f64>,
        RunOutcome<f64>,
    );
    let one_run = |run_index: u64| -> Result<Arms, HarnessError> {
        let gold = if gold_pos + gold_neg > 0 {
            let mut rng = lane_rng(root_seed, run_index, Lane::Gold);
            Some(make_gold(matrix, gold_pos, gold_neg, &mut rng)?)
        } else {
            None
        };
        let mut order_rng = lane_rng(root_seed, run_index, Lane::Ordering);
        let ordering = stream_ordering(matrix, gold.as_ref(), &mut order_rng);
        let mut cs_config = crowdsense.clone();
        cs_config.rng_seed = lane_rng(root_seed, run_index, Lane::Algorithm).random();
        Ok((
            engine::run(matrix, &ordering, &cs_config, gold.as_ref())?,
            engine::run(matrix, &ordering, &cs_config, None)?,
            run_iethresh(matrix, &ordering, iethresh, gold.as_ref())?,
            run_iethresh(matrix, &ordering, iethresh, None)?,
        ))
    };
    let runs: Vec<Arms> = if parallel {
        (0..n_runs as u64)
            .into_par_iter()
            .map(one_run)
            .collect::<Result<_, _>>()?
    } else {
        (0..n_runs as u64).map(one_run).collect::<Result<_, _>>()?
    };
    let mut comparison = GoldComparison {
        crowdsense_with_gold: Vec::with_capacity(n_runs),
        crowdsense_without_gold: Vec::with_capacity(n_runs),
        iethresh_with_gold: Vec::with_capacity(n_runs),
        iethresh_without_gold: Vec::with_capacity(n_runs),
    };
    for (cs_with, cs_without, ie_with, ie_without) in runs {
        comparison.crowdsense_with_gold.push(cs_with);
        comparison.crowdsense_without_gold.push(cs_without);
        comparison.iethresh_with_gold.push(ie_with);
        comparison.iethresh_without_gold.push(ie_without);
    }
    Ok(comparison)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation with the n-1 denominator; 0 for fewer than two
/// values. Identical values give exactly 0 (no accumulation residue).
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 || values.iter().all(|&v| v == values[0]) {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN ranks"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks, ties share their average rank
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. NaN when either
/// side has zero rank variance.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "paired samples required");
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let mx = mean(&rx);
    let my = mean(&ry);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    cov / (vx.sqrt() * vy.sqrt())
}

fn effective_votes(outcome: &RunOutcome<f64>, include_gold_cost: bool) -> u64 {
    if include_gold_cost {
        outcome.metrics.total_votes
    } else {
        outcome.metrics.total_votes - outcome.gold_cost
    }
}

/// `run,t,example_id,votes_spent,decision,crowd_label,correct` with one row
/// per processed example per run.
pub fn write_trace_csv<W: Write>(
    mut writer: W,
    outcomes: &[RunOutcome<f64>],
    matrix: &VoteMatrix,
) -> std::io::Result<()> {
    writeln!(
        writer,
        "run,t,example_id,votes_spent,decision,crowd_label,correct"
    )?;
    for (run, outcome) in outcomes.iter().enumerate() {
        for (t, trace) in outcome.traces.iter().enumerate() {
            writeln!(
                writer,
                "{},{},{},{},{},{},{}",
                run,
                t + 1,
                matrix.example_id(trace.example_index),
                trace.votes_spent(),
                trace.decision.as_i8(),
                trace.crowd_label.as_i8(),
                u8::from(trace.decision == trace.crowd_label),
            )?;
        }
    }
    Ok(())
}

/// `run,total_votes,accuracy`; the accuracy field is empty for a run that
/// processed no examples.
pub fn write_metrics_csv<W: Write>(
    mut writer: W,
    outcomes: &[RunOutcome<f64>],
    include_gold_cost: bool,
) -> std::io::Result<()> {
    writeln!(writer, "run,total_votes,accuracy")?;
    for (run, outcome) in outcomes.iter().enumerate() {
        let accuracy = outcome
            .metrics
            .accuracy
            .map(|a| a.to_string())
            .unwrap_or_default();
        writeln!(
            writer,
            "{},{},{}",
            run,
            effective_votes(outcome, include_gold_cost),
            accuracy
        )?;
    }
    Ok(())
}

/// `run,t,cum_votes,running_accuracy`: the running agreement fraction against
/// cumulative votes, one row per processed example per run.
pub fn write_running_csv<W: Write>(
    mut writer: W,
    outcomes: &[RunOutcome<f64>],
    include_gold_cost: bool,
) -> std::io::Result<()> {
    writeln!(writer, "run,t,cum_votes,running_accuracy")?;
    for (run, outcome) in outcomes.iter().enumerate() {
        let mut cum_votes = if include_gold_cost {
            outcome.gold_cost
        } else {
            0
        };
        for (t, (trace, accuracy)) in outcome
            .traces
            .iter()
            .zip(&outcome.metrics.running_accuracy)
            .enumerate()
        {
            cum_votes += trace.votes_spent() as u64;
            writeln!(writer, "{},{},{},{}", run, t + 1, cum_votes, accuracy)?;
        }
    }
    Ok(())
}

/// `param,value,mean_total_votes,mean_accuracy,std_accuracy,n_runs`.
pub fn write_sweep_csv<W: Write>(mut writer: W, sweep: &SweepResult) -> std::io::Result<()> {
    writeln!(
        writer,
        "param,value,mean_total_votes,mean_accuracy,std_accuracy,n_runs"
    )?;
    for row in &sweep.rows {
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            sweep.param.as_str(),
            row.value,
            row.mean_total_votes,
            row.mean_accuracy,
            row.std_accuracy,
            row.n_runs
        )?;
    }
    Ok(())
}
