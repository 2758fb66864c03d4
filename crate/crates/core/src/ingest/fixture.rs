//! Line-delimited JSON vote fixtures.
//!
//! One object per line with `voter`, `proposal_id`, `support`,
//! `block_number` and `log_index`; unknown keys are ignored.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::{Address, IngestError, VoteEvent};

/// A `(voter, proposal)` pair that appeared more than once. The event at
/// `kept` (chain position) superseded the others.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateKey {
    pub voter: Address,
    pub proposal_id: u64,
    pub occurrences: usize,
    pub kept: (u64, u64),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureLoad {
    pub events: Vec<VoteEvent>,
    pub duplicates: Vec<DuplicateKey>,
}

/// Sorts by chain position and keeps the last event per `(voter, proposal)`.
pub fn normalize_events(mut events: Vec<VoteEvent>) -> FixtureLoad {
    events.sort_by_key(VoteEvent::sort_key);
    let mut latest: BTreeMap<(Address, u64), (usize, usize)> = BTreeMap::new();
    for (i, ev) in events.iter().enumerate() {
        let entry = latest.entry((ev.voter, ev.proposal_id)).or_insert((i, 0));
        entry.0 = i;
        entry.1 += 1;
    }
    let mut keep = vec![false; events.len()];
    let mut duplicates = Vec::new();
    for (&(voter, proposal_id), &(idx, count)) in &latest {
        keep[idx] = true;
        if count > 1 {
            duplicates.push(DuplicateKey {
                voter,
                proposal_id,
                occurrences: count,
                kept: (events[idx].block_number, events[idx].log_index),
            });
        }
    }
    let events = events
        .into_iter()
        .zip(keep)
        .filter_map(|(ev, k)| k.then_some(ev))
        .collect();
    FixtureLoad { events, duplicates }
}

pub fn parse_fixture(text: &str, source_name: &str) -> Result<FixtureLoad, IngestError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev: VoteEvent = serde_json::from_str(line).map_err(|e| IngestError::Parse {
            source_name: source_name.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if ev.proposal_id == 0 {
            return Err(IngestError::Parse {
                source_name: source_name.to_string(),
                line: i + 1,
                message: "proposal_id must be positive".into(),
            });
        }
        events.push(ev);
    }
    Ok(normalize_events(events))
}

pub fn load_fixture(path: &Path) -> Result<FixtureLoad, IngestError> {
    let text = std::fs::read_to_string(path)?;
    parse_fixture(&text, &path.display().to_string())
}

/// Writes events one per line in the order given, with a fixed key order.
pub fn write_fixture<W: Write>(events: &[VoteEvent], mut out: W) -> std::io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut out, ev)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
