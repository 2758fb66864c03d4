//! Per-proposal analysis over a voter matrix: active set, dissimilarities,
//! the warm-started embedding chain, then k selection.
//!
//! Seeds come from the root seed: proposal `p`'s embedding uses
//! `stage_seed(root, WarmStart, p)` and its k-means sweep uses
//! `stage_seed(root, KMeans, p)`. Window and clustering stages fan out
//! across proposals; the embedding chain runs in proposal order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{cluster_embedding, ClusteringResult, KMeansConfig};
use crate::dissim::{active_set, dissimilarity_matrix, ActiveSet, DissimError, DissimilarityMatrix, WindowSpec};
use crate::embed::{mds_embed, warm_start, Embedding, MdsConfig};
use crate::matrix::VoterMatrix;
use crate::seed::{stage_seed, Stage};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Window(#[from] DissimError),
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub window: WindowSpec,
    pub mds: MdsConfig,
    pub kmeans: KMeansConfig,
    pub k_min: usize,
    pub k_max: usize,
    pub root_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec::default(),
            mds: MdsConfig::default(),
            kmeans: KMeansConfig::default(),
            k_min: 2,
            k_max: 5,
            root_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.window.validate()?;
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(PipelineError::Config(format!("k range [{}, {}]", self.k_min, self.k_max)));
        }
        if self.mds.max_iterations == 0 || self.mds.tolerance.is_nan() || self.mds.tolerance <= 0.0 {
            return Err(PipelineError::Config("mds needs max_iterations ≥ 1 and tolerance > 0".into()));
        }
        Ok(())
    }
}

/// Why a proposal produced no clustering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub proposal_id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub active_sets: Vec<ActiveSet>,
    pub dissimilarities: Vec<DissimilarityMatrix>,
    pub embeddings: Vec<Embedding>,
    pub clusters: Vec<ClusteringResult>,
    pub skipped: Vec<Skipped>,
}

impl Analysis {
    pub fn cluster(&self, proposal_id: u64) -> Option<&ClusteringResult> {
        self.clusters.iter().find(|c| c.proposal_id == proposal_id)
    }

    pub fn embedding(&self, proposal_id: u64) -> Option<&Embedding> {
        self.embeddings.iter().find(|e| e.proposal_id == proposal_id)
    }
}

pub fn analyze(matrix: &VoterMatrix, config: &PipelineConfig) -> Result<Analysis, PipelineError> {
    config.validate()?;
    let ids = matrix.proposal_ids();
    let mut skipped = Vec::new();
    if let Some(&first) = ids.first() {
        skipped.push(Skipped {
            proposal_id: first,
            reason: DissimError::FirstProposal.to_string(),
        });
    }

    let windows: Vec<Result<(ActiveSet, DissimilarityMatrix), (u64, DissimError)>> = (2..=ids.len())
        .into_par_iter()
        .map(|j| {
            let tag = |e| (ids[j - 1], e);
            let active = active_set(matrix, j, &config.window).map_err(tag)?;
            let d = dissimilarity_matrix(matrix, &active).map_err(tag)?;
            Ok((active, d))
        })
        .collect();

    let mut active_sets = Vec::new();
    let mut dissimilarities = Vec::new();
    let mut embeddings: Vec<Embedding> = Vec::new();
    for w in windows {
        let (active, d) = match w {
            Ok(pair) => pair,
            Err((proposal_id, e)) => {
                skipped.push(Skipped {
                    proposal_id,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let seed = stage_seed(config.root_seed, Stage::WarmStart, d.proposal_id);
        let init = warm_start(embeddings.last(), &d.addresses, seed);
        let mds = MdsConfig { seed, ..config.mds };
        match mds_embed(&d, Some(&init), &mds) {
            Ok(e) => embeddings.push(e),
            Err(e) => skipped.push(Skipped {
                proposal_id: d.proposal_id,
                reason: e.to_string(),
            }),
        }
        active_sets.push(active);
        dissimilarities.push(d);
    }

    let clustered: Vec<Result<ClusteringResult, Skipped>> = embeddings
        .par_iter()
        .map(|e| {
            let seed = stage_seed(config.root_seed, Stage::KMeans, e.proposal_id);
            cluster_embedding(e, config.k_min, config.k_max, seed, &config.kmeans).map_err(|err| Skipped {
                proposal_id: e.proposal_id,
                reason: err.to_string(),
            })
        })
        .collect();
    let mut clusters = Vec::new();
    for c in clustered {
        match c {
            Ok(c) => clusters.push(c),
            Err(s) => skipped.push(s),
        }
    }
    skipped.sort_by_key(|s| s.proposal_id);
    Ok(Analysis {
        active_sets,
        dissimilarities,
        embeddings,
        clusters,
        skipped,
    })
}
