//! Fork alignment over proposal ranges, against a vote-shuffle baseline.
//!
//! The baseline permutes each proposal's yes/no values among the addresses
//! that actually voted on it, so turnout and outcome survive and only who
//! voted which way changes. Shuffle iteration `i` uses the literal seed `i`
//! with the crate's ChaCha8 stream (see [`crate::seed`]); the per-proposal
//! MDS and k-means seeds are the same as in the genuine run.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusteringResult;
use crate::ingest::{Address, ForkGroundTruth, VoteEvent};
use crate::matrix::{MatrixError, VoterMatrix};
use crate::pipeline::{analyze, Analysis, PipelineConfig, PipelineError};
use crate::seed::SeedStream;

#[derive(Debug, Error, PartialEq)]
pub enum ValidateError {
    #[error("no analyzed proposals in range {}–{}", .0.0, .0.1)]
    EmptyRange((u64, u64)),
    #[error("proposal {0} is not a column of the matrix")]
    UnknownProposal(u64),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Permutes each column's yes/no values among that column's voters.
/// Columns are visited in order and share one stream seeded with `seed`.
pub fn shuffle_votes(matrix: &VoterMatrix, seed: u64) -> VoterMatrix {
    let (n, m) = (matrix.n_addresses(), matrix.n_proposals());
    let mut cells = matrix.cells().to_vec();
    let mut rng = SeedStream::new(seed);
    for col in 0..m {
        let rows: Vec<usize> = (0..n).filter(|&r| cells[r * m + col] >= 0).collect();
        let mut values: Vec<i8> = rows.iter().map(|&r| cells[r * m + col]).collect();
        rng.shuffle(&mut values);
        for (r, v) in rows.into_iter().zip(values) {
            cells[r * m + col] = v;
        }
    }
    matrix.with_cells(cells)
}

/// Fork addresses per cluster, largest first, padded to `k_star`.
pub fn fork_distribution(result: &ClusteringResult, fork: &ForkGroundTruth) -> Vec<usize> {
    let mut counts = vec![0usize; result.k_star];
    for (a, &c) in result.addresses.iter().zip(&result.assignments) {
        if fork.contains(a) {
            counts[c] += 1;
        }
    }
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts
}

/// Largest share of the clustered fork addresses held by one cluster, or
/// `None` when fewer than `min_fork_present` of them were clustered.
pub fn fork_cluster_share(result: &ClusteringResult, fork: &ForkGroundTruth, min_fork_present: usize) -> Option<f64> {
    let counts = fork_distribution(result, fork);
    let total: usize = counts.iter().sum();
    if total == 0 || total < min_fork_present {
        return None;
    }
    Some(counts[0] as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSummary {
    pub range: (u64, u64),
    pub avg_clusters: f64,
    /// Unweighted mean over proposals where the share is defined.
    pub fork_share: Option<f64>,
    pub proposals_counted: usize,
    pub fork_proposals_counted: usize,
}

pub fn summarize_range(
    results: &[ClusteringResult],
    fork: &ForkGroundTruth,
    range: (u64, u64),
    min_fork_present: usize,
) -> Result<RangeSummary, ValidateError> {
    let inside: Vec<&ClusteringResult> = results
        .iter()
        .filter(|r| (range.0..=range.1).contains(&r.proposal_id))
        .collect();
    if inside.is_empty() {
        return Err(ValidateError::EmptyRange(range));
    }
    let avg_clusters = inside.iter().map(|r| r.k_star as f64).sum::<f64>() / inside.len() as f64;
    let shares: Vec<f64> = inside
        .iter()
        .filter_map(|r| fork_cluster_share(r, fork, min_fork_present))
        .collect();
    let fork_share = (!shares.is_empty()).then(|| shares.iter().sum::<f64>() / shares.len() as f64);
    Ok(RangeSummary {
        range,
        avg_clusters,
        fork_share,
        proposals_counted: inside.len(),
        fork_proposals_counted: shares.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub pipeline: PipelineConfig,
    pub ranges: Vec<(u64, u64)>,
    pub iterations: u64,
    pub min_fork_present: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            ranges: Vec::new(),
            iterations: 100,
            min_fork_present: 1,
        }
    }
}

/// Genuine value and the spread over successful shuffle iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub value: Option<f64>,
    pub rand_min: Option<f64>,
    pub rand_max: Option<f64>,
    pub rand_avg: Option<f64>,
    pub rand_n: usize,
}

impl MetricRow {
    fn new(value: Option<f64>, samples: &[f64]) -> Self {
        let n = samples.len();
        Self {
            value,
            rand_min: samples.iter().copied().reduce(f64::min),
            rand_max: samples.iter().copied().reduce(f64::max),
            rand_avg: (n > 0).then(|| samples.iter().sum::<f64>() / n as f64),
            rand_n: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub range: (u64, u64),
    pub proposals_counted: usize,
    pub fork_proposals_counted: usize,
    pub avg_clusters: MetricRow,
    pub fork_share: MetricRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSeed {
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub iterations: u64,
    pub seeds: Vec<u64>,
    pub min_fork_present: usize,
    pub failed_seeds: Vec<FailedSeed>,
    pub ranges: Vec<RangeReport>,
}

/// One shuffle iteration's per-range summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Iteration {
    pub seed: u64,
    pub summaries: Vec<RangeSummary>,
}

fn active_fingerprint(a: &Analysis) -> Vec<(u64, &[Address])> {
    a.active_sets.iter().map(|s| (s.proposal_id, &s.addresses[..])).collect()
}

fn summarize_all(
    analysis: &Analysis,
    fork: &ForkGroundTruth,
    config: &ValidationConfig,
) -> Result<Vec<RangeSummary>, ValidateError> {
    config
        .ranges
        .iter()
        .map(|&r| summarize_range(&analysis.clusters, fork, r, config.min_fork_present))
        .collect()
}

/// Ranges default to the whole analyzed span when `config.ranges` is empty.
pub fn run_validation(
    events: &[VoteEvent],
    fork: &ForkGroundTruth,
    config: &ValidationConfig,
) -> Result<(ValidationReport, Analysis, Vec<Iteration>), ValidateError> {
    let matrix = VoterMatrix::from_events(events)?;
    run_validation_on(&matrix, fork, config)
}

pub fn run_validation_on(
    matrix: &VoterMatrix,
    fork: &ForkGroundTruth,
    config: &ValidationConfig,
) -> Result<(ValidationReport, Analysis, Vec<Iteration>), ValidateError> {
    let genuine = analyze(matrix, &config.pipeline)?;
    let mut config = config.clone();
    if config.ranges.is_empty() {
        let ids: Vec<u64> = genuine.clusters.iter().map(|c| c.proposal_id).collect();
        match (ids.first(), ids.last()) {
            (Some(&a), Some(&b)) => config.ranges.push((a, b)),
            _ => return Err(ValidateError::EmptyRange((0, 0))),
        }
    }
    let genuine_summaries = summarize_all(&genuine, fork, &config)?;
    let fingerprint = active_fingerprint(&genuine);

    let seeds: Vec<u64> = (0..config.iterations).collect();
    let runs: Vec<Result<Iteration, FailedSeed>> = seeds
        .par_iter()
        .map(|&seed| {
            let shuffled = shuffle_votes(matrix, seed);
            let fail = |reason: String| FailedSeed { seed, reason };
            let a = analyze(&shuffled, &config.pipeline).map_err(|e| fail(e.to_string()))?;
            assert_eq!(
                active_fingerprint(&a),
                fingerprint,
                "shuffle seed {seed} changed an active set"
            );
            let summaries = summarize_all(&a, fork, &config).map_err(|e| fail(e.to_string()))?;
            Ok(Iteration { seed, summaries })
        })
        .collect();
    let mut iterations = Vec::new();
    let mut failed_seeds = Vec::new();
    for r in runs {
        match r {
            Ok(it) => iterations.push(it),
            Err(f) => failed_seeds.push(f),
        }
    }

    let ranges = genuine_summaries
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let clusters: Vec<f64> = iterations.iter().map(|it| it.summaries[i].avg_clusters).collect();
            let shares: Vec<f64> = iterations.iter().filter_map(|it| it.summaries[i].fork_share).collect();
            RangeReport {
                range: g.range,
                proposals_counted: g.proposals_counted,
                fork_proposals_counted: g.fork_proposals_counted,
                avg_clusters: MetricRow::new(Some(g.avg_clusters), &clusters),
                fork_share: MetricRow::new(g.fork_share, &shares),
            }
        })
        .collect();
    let report = ValidationReport {
        iterations: config.iterations,
        seeds,
        min_fork_present: config.min_fork_present,
        failed_seeds,
        ranges,
    };
    Ok((report, genuine, iterations))
}

/// Per-proposal fork spread: `proposal_id,k_star,fork_active,share,c1..c{width}`
/// where `c1` is the largest cluster's fraction of the active fork addresses.
pub fn write_fork_share_csv<W: Write>(
    results: &[ClusteringResult],
    fork: &ForkGroundTruth,
    width: usize,
    mut out: W,
) -> std::io::Result<()> {
    write!(out, "proposal_id,k_star,fork_active,share")?;
    for c in 1..=width {
        write!(out, ",c{c}")?;
    }
    writeln!(out)?;
    for r in results {
        let counts = fork_distribution(r, fork);
        let total: usize = counts.iter().sum();
        let frac = |c: usize| if total == 0 { 0.0 } else { c as f64 / total as f64 };
        write!(out, "{},{},{total},", r.proposal_id, r.k_star)?;
        if total > 0 {
            write!(out, "{}", frac(counts[0]))?;
        }
        for c in 0..width {
            write!(out, ",{}", frac(counts.get(c).copied().unwrap_or(0)))?;
        }
        writeln!(out)?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipationStats {
    pub split_at: u64,
    pub early_fork_avg: f64,
    pub late_fork_avg: f64,
    /// Averages over addresses outside the fork set.
    pub early_other_avg: f64,
    pub late_other_avg: f64,
    pub early_proposals: usize,
    pub late_proposals: usize,
}

/// Mean yes/no voters per proposal, fork vs. everyone else, before and from
/// `split_at`. An empty side averages to 0.
pub fn participation_stats(
    matrix: &VoterMatrix,
    fork: &ForkGroundTruth,
    split_at: u64,
) -> Result<ParticipationStats, ValidateError> {
    let split = matrix
        .proposal_index(split_at)
        .ok_or(ValidateError::UnknownProposal(split_at))?;
    let is_fork: Vec<bool> = matrix.addresses().iter().map(|a| fork.contains(a)).collect();
    let counts: Vec<(usize, usize)> = (0..matrix.n_proposals())
        .map(|col| {
            let mut f = 0;
            let mut o = 0;
            for (row, &forker) in is_fork.iter().enumerate() {
                if matrix.cell(row, col) >= 0 {
                    if forker {
                        f += 1;
                    } else {
                        o += 1;
                    }
                }
            }
            (f, o)
        })
        .collect();
    let avg = |part: &[(usize, usize)], pick: fn(&(usize, usize)) -> usize| {
        if part.is_empty() {
            0.0
        } else {
            part.iter().map(pick).sum::<usize>() as f64 / part.len() as f64
        }
    };
    let (early, late) = counts.split_at(split);
    Ok(ParticipationStats {
        split_at,
        early_fork_avg: avg(early, |c| c.0),
        late_fork_avg: avg(late, |c| c.0),
        early_other_avg: avg(early, |c| c.1),
        late_other_avg: avg(late, |c| c.1),
        early_proposals: early.len(),
        late_proposals: late.len(),
    })
}

/// Distinct voters per column, for checking shuffles.
pub fn column_signature(matrix: &VoterMatrix) -> Vec<(usize, usize, BTreeSet<Address>)> {
    (0..matrix.n_proposals())
        .map(|col| {
            let c = matrix.column_votes_at(col);
            (c.yes, c.no, c.voters.into_iter().collect())
        })
        .collect()
}
