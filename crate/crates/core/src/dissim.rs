//! Active voters per proposal window and their pairwise dissimilarity.
//!
//! For the `j`-th surviving proposal (1-based), the window is the trailing
//! `w` columns ending at `j`, truncated at the start of history. An address
//! is active when it cast a yes/no vote on at least a fraction `τ` of the
//! window. Between two active addresses, dissimilarity is the share of
//! co-voted window proposals on which they voted differently, or `1` when
//! they never co-voted.
//!
//! Windows are positional over matrix columns, so proposals dropped for
//! having no yes/no votes never shrink a window.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Address;
use crate::matrix::{VoterMatrix, YES};

#[derive(Debug, Error, PartialEq)]
pub enum DissimError {
    #[error("proposal index {j} outside 1..={m}")]
    IndexOutOfRange { j: usize, m: usize },
    #[error("the first proposal has no analyzable window")]
    FirstProposal,
    #[error("address {0} is not a row of the matrix")]
    UnknownAddress(Address),
    #[error("proposal {0} is not a column of the matrix")]
    UnknownProposal(u64),
    #[error("proposal {proposal_id}: only {survivors} active address(es), need 2")]
    EmptyActiveSet { proposal_id: u64, survivors: usize },
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_size: usize,
    pub participation_threshold: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window_size: 10,
            participation_threshold: 0.40,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), DissimError> {
        if self.window_size == 0 {
            return Err(DissimError::InvalidSpec("window_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.participation_threshold) {
            return Err(DissimError::InvalidSpec(format!(
                "participation threshold {} outside [0, 1]",
                self.participation_threshold
            )));
        }
        Ok(())
    }
}

/// Column positions `start..=j-1` (0-based) of the window ending at the
/// 1-based position `j`.
pub fn window_positions(m: usize, j: usize, w: usize) -> Result<std::ops::Range<usize>, DissimError> {
    if j == 0 || j > m {
        return Err(DissimError::IndexOutOfRange { j, m });
    }
    assert!(w >= 1, "window size must be positive");
    Ok(j.saturating_sub(w)..j)
}

/// Proposal ids of the window ending at the 1-based position `j`.
pub fn sliding_window(proposal_ids: &[u64], j: usize, w: usize) -> Result<Vec<u64>, DissimError> {
    Ok(proposal_ids[window_positions(proposal_ids.len(), j, w)?].to_vec())
}

/// Fraction of `window` proposals on which `address` voted yes or no.
pub fn participation(matrix: &VoterMatrix, address: &Address, window: &[u64]) -> Result<f64, DissimError> {
    assert!(!window.is_empty(), "window must be non-empty");
    let row = matrix
        .address_index(address)
        .ok_or(DissimError::UnknownAddress(*address))?;
    let mut voted = 0usize;
    for &p in window {
        let col = matrix.proposal_index(p).ok_or(DissimError::UnknownProposal(p))?;
        if matrix.cell(row, col) >= 0 {
            voted += 1;
        }
    }
    Ok(voted as f64 / window.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub proposal_id: u64,
    pub window: Vec<u64>,
    pub addresses: Vec<Address>,
    pub participation: Vec<f64>,
}

/// Addresses with participation `≥ τ` in the window ending at the 1-based
/// position `j`. Requires `j ≥ 2`.
pub fn active_set(matrix: &VoterMatrix, j: usize, spec: &WindowSpec) -> Result<ActiveSet, DissimError> {
    spec.validate()?;
    let cols = window_positions(matrix.n_proposals(), j, spec.window_size)?;
    if j == 1 {
        return Err(DissimError::FirstProposal);
    }
    let len = cols.len();
    let mut addresses = Vec::new();
    let mut shares = Vec::new();
    for (i, a) in matrix.addresses().iter().enumerate() {
        let voted = matrix.row(i)[cols.clone()].iter().filter(|&&c| c >= 0).count();
        let pi = voted as f64 / len as f64;
        if pi >= spec.participation_threshold {
            addresses.push(*a);
            shares.push(pi);
        }
    }
    let proposal_id = matrix.proposal_ids()[j - 1];
    if addresses.len() < 2 {
        return Err(DissimError::EmptyActiveSet {
            proposal_id,
            survivors: addresses.len(),
        });
    }
    Ok(ActiveSet {
        proposal_id,
        window: matrix.proposal_ids()[cols].to_vec(),
        addresses,
        participation: shares,
    })
}

/// Symmetric `n × n` dissimilarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    pub proposal_id: u64,
    pub addresses: Vec<Address>,
    cells: Vec<f64>,
}

impl DissimilarityMatrix {
    /// Checks shape, symmetry, zero diagonal and the `[0, 1]` range.
    pub fn new(proposal_id: u64, addresses: Vec<Address>, cells: Vec<f64>) -> Result<Self, String> {
        let n = addresses.len();
        if cells.len() != n * n {
            return Err(format!("{} cells for {n} addresses", cells.len()));
        }
        for i in 0..n {
            if cells[i * n + i] != 0.0 {
                return Err(format!("nonzero diagonal at {i}"));
            }
            for k in 0..n {
                let v = cells[i * n + k];
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("cell ({i},{k}) = {v} outside [0, 1]"));
                }
                if v != cells[k * n + i] {
                    return Err(format!("asymmetric at ({i},{k})"));
                }
            }
        }
        Ok(Self {
            proposal_id,
            addresses,
            cells,
        })
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.cells[i * self.addresses.len() + k]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// CSV with an address header row and an address first column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "address")?;
        for a in &self.addresses {
            write!(out, ",{a}")?;
        }
        writeln!(out)?;
        for (i, a) in self.addresses.iter().enumerate() {
            write!(out, "{a}")?;
            for k in 0..self.addresses.len() {
                write!(out, ",{}", self.get(i, k))?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}

/// Per-address vote bitmasks over a window: `valid` marks yes/no votes,
/// `yes` marks yes votes.
struct VoteBits {
    valid: Vec<u64>,
    yes: Vec<u64>,
}

impl VoteBits {
    fn from_row(row: &[i8]) -> Self {
        let words = row.len().div_ceil(64).max(1);
        let mut valid = vec![0u64; words];
        let mut yes = vec![0u64; words];
        for (b, &c) in row.iter().enumerate() {
            if c >= 0 {
                valid[b / 64] |= 1 << (b % 64);
            }
            if c == YES {
                yes[b / 64] |= 1 << (b % 64);
            }
        }
        Self { valid, yes }
    }

    /// `(shared, opposing)` counts against `other`.
    fn compare(&self, other: &Self) -> (u32, u32) {
        let mut shared = 0;
        let mut opposing = 0;
        for w in 0..self.valid.len() {
            let both = self.valid[w] & other.valid[w];
            shared += both.count_ones();
            opposing += (both & (self.yes[w] ^ other.yes[w])).count_ones();
        }
        (shared, opposing)
    }
}

/// Pairwise dissimilarities among `active.addresses` over `active.window`.
pub fn dissimilarity_matrix(matrix: &VoterMatrix, active: &ActiveSet) -> Result<DissimilarityMatrix, DissimError> {
    let n = active.addresses.len();
    if n < 2 {
        return Err(DissimError::EmptyActiveSet {
            proposal_id: active.proposal_id,
            survivors: n,
        });
    }
    let cols = active
        .window
        .iter()
        .map(|&p| matrix.proposal_index(p).ok_or(DissimError::UnknownProposal(p)))
        .collect::<Result<Vec<_>, _>>()?;
    let bits = active
        .addresses
        .iter()
        .map(|a| {
            let r = matrix.address_index(a).ok_or(DissimError::UnknownAddress(*a))?;
            let row: Vec<i8> = cols.iter().map(|&c| matrix.cell(r, c)).collect();
            Ok(VoteBits::from_row(&row))
        })
        .collect::<Result<Vec<_>, DissimError>>()?;
    let mut cells = vec![0.0; n * n];
    for i in 0..n {
        for k in i + 1..n {
            let (shared, opposing) = bits[i].compare(&bits[k]);
            let d = if shared == 0 { 1.0 } else { opposing as f64 / shared as f64 };
            cells[i * n + k] = d;
            cells[k * n + i] = d;
        }
    }
    Ok(DissimilarityMatrix {
        proposal_id: active.proposal_id,
        addresses: active.addresses.clone(),
        cells,
    })
}
