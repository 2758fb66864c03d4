//! The voter matrix: addresses × proposals over {1, 0, −1}.
//!
//! `1` is a yes vote, `0` a no vote, and `−1` everything else (abstain,
//! other support codes, no vote at all). Proposals nobody voted yes/no on
//! are dropped, as are addresses that never cast a yes/no vote.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use thiserror::Error;

use crate::ingest::{normalize_events, Address, VoteEvent};

pub const YES: i8 = 1;
pub const NO: i8 = 0;
pub const OTHER: i8 = -1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("no yes/no votes in input")]
    EmptyInput,
    #[error("proposal {0} is not a column of the matrix")]
    UnknownProposal(u64),
}

/// Collapses a raw support value.
pub fn collapse_support(support: u8) -> i8 {
    match support {
        1 => YES,
        0 => NO,
        _ => OTHER,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoterMatrix {
    addresses: Vec<Address>,
    proposal_ids: Vec<u64>,
    /// Row-major, `addresses.len() × proposal_ids.len()`.
    cells: Vec<i8>,
}

/// Yes/no tallies for one column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnVotes {
    pub yes: usize,
    pub no: usize,
    pub voters: Vec<Address>,
}

impl VoterMatrix {
    /// Builds the matrix. Duplicate `(voter, proposal)` events resolve to the
    /// latest by chain position.
    pub fn from_events(events: &[VoteEvent]) -> Result<Self, MatrixError> {
        let events = normalize_events(events.to_vec()).events;
        let valid: Vec<&VoteEvent> = events
            .iter()
            .filter(|e| collapse_support(e.support) != OTHER)
            .collect();
        let addresses: Vec<Address> = valid.iter().map(|e| e.voter).collect::<BTreeSet<_>>().into_iter().collect();
        let proposal_ids: Vec<u64> = valid
            .iter()
            .map(|e| e.proposal_id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if proposal_ids.is_empty() {
            return Err(MatrixError::EmptyInput);
        }
        let row: BTreeMap<Address, usize> = addresses.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let col: BTreeMap<u64, usize> = proposal_ids.iter().enumerate().map(|(j, p)| (*p, j)).collect();
        let m = proposal_ids.len();
        let mut cells = vec![OTHER; addresses.len() * m];
        for e in valid {
            cells[row[&e.voter] * m + col[&e.proposal_id]] = collapse_support(e.support);
        }
        Ok(Self {
            addresses,
            proposal_ids,
            cells,
        })
    }

    /// Builds from explicit parts; every cell must be in {1, 0, −1}.
    /// Rows and columns without a yes/no vote are removed.
    pub fn from_cells(addresses: Vec<Address>, proposal_ids: Vec<u64>, cells: Vec<i8>) -> Result<Self, MatrixError> {
        assert_eq!(cells.len(), addresses.len() * proposal_ids.len(), "cell count");
        assert!(cells.iter().all(|c| (-1..=1).contains(c)), "cell values");
        let m = proposal_ids.len();
        let mut events = Vec::new();
        for (i, a) in addresses.iter().enumerate() {
            for (j, p) in proposal_ids.iter().enumerate() {
                let c = cells[i * m + j];
                if c != OTHER {
                    events.push(VoteEvent {
                        voter: *a,
                        proposal_id: *p,
                        support: c as u8,
                        block_number: 0,
                        log_index: 0,
                    });
                }
            }
        }
        Self::from_events(&events)
    }

    pub fn n_addresses(&self) -> usize {
        self.addresses.len()
    }

    pub fn n_proposals(&self) -> usize {
        self.proposal_ids.len()
    }

    pub fn addresses(&self) -> &[Address] {
        &self.addresses
    }

    pub fn proposal_ids(&self) -> &[u64] {
        &self.proposal_ids
    }

    pub fn cell(&self, row: usize, col: usize) -> i8 {
        self.cells[row * self.proposal_ids.len() + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        let m = self.proposal_ids.len();
        &self.cells[row * m..(row + 1) * m]
    }

    pub fn address_index(&self, a: &Address) -> Option<usize> {
        self.addresses.binary_search(a).ok()
    }

    pub fn proposal_index(&self, id: u64) -> Option<usize> {
        self.proposal_ids.binary_search(&id).ok()
    }

    pub fn column_votes(&self, proposal_id: u64) -> Result<ColumnVotes, MatrixError> {
        let col = self
            .proposal_index(proposal_id)
            .ok_or(MatrixError::UnknownProposal(proposal_id))?;
        Ok(self.column_votes_at(col))
    }

    pub fn column_votes_at(&self, col: usize) -> ColumnVotes {
        let mut out = ColumnVotes {
            yes: 0,
            no: 0,
            voters: Vec::new(),
        };
        for (i, a) in self.addresses.iter().enumerate() {
            match self.cell(i, col) {
                YES => out.yes += 1,
                NO => out.no += 1,
                _ => continue,
            }
            out.voters.push(*a);
        }
        out
    }

    /// Same shape with new cell values; −1 positions must match.
    pub(crate) fn with_cells(&self, cells: Vec<i8>) -> Self {
        debug_assert_eq!(cells.len(), self.cells.len());
        Self {
            addresses: self.addresses.clone(),
            proposal_ids: self.proposal_ids.clone(),
            cells,
        }
    }

    pub(crate) fn cells(&self) -> &[i8] {
        &self.cells
    }

    /// CSV: header `address,<proposal ids>`, one row per address.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "address")?;
        for p in &self.proposal_ids {
            write!(out, ",{p}")?;
        }
        writeln!(out)?;
        for (i, a) in self.addresses.iter().enumerate() {
            write!(out, "{a}")?;
            for c in self.row(i) {
                write!(out, ",{c}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}
