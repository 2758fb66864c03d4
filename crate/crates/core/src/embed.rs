//! Metric MDS into the plane by stress majorization (SMACOF).
//!
//! Each iteration applies the Guttman transform
//! `x_i ← (1/n) Σ_{k≠i} (d_ik / ‖x_i − x_k‖) (x_i − x_k)`,
//! which never increases raw stress `Σ_{i<k} (d_ik − ‖x_i − x_k‖)²`.
//! Reported stress is the normalized form
//! `sqrt(Σ (d_ik − ‖x_i − x_k‖)² / Σ d_ik²)`.
//! Iteration stops when the relative decrease `(old − new) / old` drops
//! below the tolerance, when stress reaches zero, or after `max_iterations`.
//!
//! Consecutive proposals are chained: proposal `j` starts from proposal
//! `j − 1`'s coordinates (see [`warm_start`]), which keeps orientation stable
//! across the series without any Procrustes step.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dissim::DissimilarityMatrix;
use crate::ingest::Address;
use crate::seed::SeedStream;

pub type Point = [f64; 2];

#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("all dissimilarities are zero; stress is undefined")]
    AllZeroDissimilarity,
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("{coords} coordinates for {points} points")]
    DimensionMismatch { coords: usize, points: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdsConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for MdsConfig {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub proposal_id: u64,
    pub addresses: Vec<Address>,
    pub coords: Vec<Point>,
    pub stress: f64,
    pub iterations_used: usize,
    pub seed: u64,
    /// Normalized stress of the initial configuration followed by one entry
    /// per iteration.
    pub stress_history: Vec<f64>,
}

impl Embedding {
    /// CSV rows `address,x,y,proposal_id` (no header).
    pub fn write_csv_rows<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (a, p) in self.addresses.iter().zip(&self.coords) {
            writeln!(out, "{a},{},{},{}", p[0], p[1], self.proposal_id)?;
        }
        Ok(())
    }
}

fn dist(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn raw_stress(d: &DissimilarityMatrix, coords: &[Point]) -> f64 {
    let n = d.len();
    let mut s = 0.0;
    for i in 0..n {
        for k in i + 1..n {
            let r = d.get(i, k) - dist(&coords[i], &coords[k]);
            s += r * r;
        }
    }
    s
}

fn sum_sq(d: &DissimilarityMatrix) -> f64 {
    let n = d.len();
    let mut s = 0.0;
    for i in 0..n {
        for k in i + 1..n {
            s += d.get(i, k) * d.get(i, k);
        }
    }
    s
}

fn check_coords(d: &DissimilarityMatrix, coords: &[Point]) -> Result<(), EmbedError> {
    if coords.len() != d.len() {
        return Err(EmbedError::DimensionMismatch {
            coords: coords.len(),
            points: d.len(),
        });
    }
    if coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EmbedError::NonFiniteInput("coordinates".into()));
    }
    if d.cells().iter().any(|v| !v.is_finite()) {
        return Err(EmbedError::NonFiniteInput("dissimilarities".into()));
    }
    Ok(())
}

/// Normalized stress of `coords` against `d`.
pub fn stress(d: &DissimilarityMatrix, coords: &[Point]) -> Result<f64, EmbedError> {
    check_coords(d, coords)?;
    let denom = sum_sq(d);
    if denom == 0.0 {
        return Err(EmbedError::AllZeroDissimilarity);
    }
    Ok((raw_stress(d, coords) / denom).sqrt())
}

fn guttman(d: &DissimilarityMatrix, x: &[Point], out: &mut [Point]) {
    let n = x.len();
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let mut acc = [0.0; 2];
        for k in 0..n {
            if k == i {
                continue;
            }
            let dk = dist(&x[i], &x[k]);
            if dk > 0.0 {
                let ratio = d.get(i, k) / dk;
                acc[0] += ratio * (x[i][0] - x[k][0]);
                acc[1] += ratio * (x[i][1] - x[k][1]);
            }
        }
        out[i] = [acc[0] * inv_n, acc[1] * inv_n];
    }
}

/// Runs SMACOF from `init`, or from seeded uniform points in the unit
/// square when `init` is `None`.
pub fn mds_embed(d: &DissimilarityMatrix, init: Option<&[Point]>, config: &MdsConfig) -> Result<Embedding, EmbedError> {
    let n = d.len();
    if n < 2 {
        return Err(EmbedError::TooFewPoints(n));
    }
    if config.tolerance.is_nan() || config.tolerance <= 0.0 {
        return Err(EmbedError::InvalidConfig(format!("tolerance {}", config.tolerance)));
    }
    let mut x: Vec<Point> = match init {
        Some(c) => c.to_vec(),
        None => random_points(n, config.seed),
    };
    check_coords(d, &x)?;
    let denom = sum_sq(d);
    if denom == 0.0 {
        return Err(EmbedError::AllZeroDissimilarity);
    }
    let normalized = |raw: f64| (raw / denom).sqrt();

    let mut current = raw_stress(d, &x);
    let mut history = vec![normalized(current)];
    let mut next = vec![[0.0; 2]; n];
    let mut iterations = 0;
    while iterations < config.max_iterations && current > 0.0 {
        guttman(d, &x, &mut next);
        let candidate = raw_stress(d, &next);
        std::mem::swap(&mut x, &mut next);
        iterations += 1;
        let previous = current;
        current = candidate;
        history.push(normalized(current));
        if (previous - current) / previous < config.tolerance {
            break;
        }
    }
    Ok(Embedding {
        proposal_id: d.proposal_id,
        addresses: d.addresses.clone(),
        coords: x,
        stress: normalized(current),
        iterations_used: iterations,
        seed: config.seed,
        stress_history: history,
    })
}

fn random_points(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = SeedStream::new(seed);
    (0..n).map(|_| [rng.next_f64(), rng.next_f64()]).collect()
}

/// Initial coordinates for `current` given the previous proposal's embedding.
///
/// Carried-over addresses keep their coordinates. New ones are placed at the
/// previous centroid plus a seeded offset of radius at most 1% of the
/// previous spread (the larger of the x and y extents). Without a previous
/// embedding every point is drawn uniformly from the unit square.
pub fn warm_start(previous: Option<&Embedding>, current: &[Address], seed: u64) -> Vec<Point> {
    let Some(prev) = previous.filter(|p| !p.coords.is_empty()) else {
        return random_points(current.len(), seed);
    };
    let known: HashMap<&Address, &Point> = prev.addresses.iter().zip(&prev.coords).collect();
    let n = prev.coords.len() as f64;
    let centroid = [
        prev.coords.iter().map(|p| p[0]).sum::<f64>() / n,
        prev.coords.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let extent = |axis: usize| {
        let (lo, hi) = prev
            .coords
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[axis]), hi.max(p[axis])));
        hi - lo
    };
    let spread = extent(0).max(extent(1));
    let radius = 0.01 * if spread > 0.0 { spread } else { 1.0 };
    let mut rng = SeedStream::new(seed);
    current
        .iter()
        .map(|a| match known.get(a) {
            Some(p) => **p,
            None => {
                let angle = std::f64::consts::TAU * rng.next_f64();
                // strictly positive so two newcomers never coincide with the centroid
                let r = radius * (1.0 - rng.next_f64());
                [centroid[0] + r * angle.cos(), centroid[1] + r * angle.sin()]
            }
        })
        .collect()
}
