//! `eth_getLogs` fetching over a pluggable transport.
//!
//! The block range is split into fixed-size chunks fetched in parallel.
//! Transient failures are retried with exponential backoff; a provider that
//! rejects a chunk as too large gets the chunk bisected until it fits.
//! Results are sorted by chain position, so output does not depend on the
//! chunk size.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use super::{decode_vote_event, Address, DaoRegistryEntry, EventSignature, IngestError, RawLog, VoteEvent};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    /// Worth retrying: network errors, rate limits, 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("provider rejected range {from}..={to} as too large")]
    RangeTooLarge { from: u64, to: u64 },
    #[error("rpc error: {0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogFilter {
    pub address: Address,
    /// Accepted first topics (OR).
    pub topics: Vec<[u8; 32]>,
    pub from_block: u64,
    pub to_block: u64,
}

pub trait LogTransport: Sync {
    fn get_logs(&self, filter: &LogFilter) -> Result<Vec<RawLog>, TransportError>;
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub chunk_size: u64,
    pub max_retries: u32,
    pub backoff: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            chunk_size: 10_000,
            max_retries: 5,
            backoff: Duration::from_millis(250),
        }
    }
}

fn with_retries(
    transport: &dyn LogTransport,
    filter: &LogFilter,
    opts: &FetchOptions,
) -> Result<Vec<RawLog>, TransportError> {
    let mut attempt = 0;
    loop {
        match transport.get_logs(filter) {
            Err(TransportError::Transient(msg)) => {
                if attempt >= opts.max_retries {
                    return Err(TransportError::Transient(format!(
                        "{msg} (gave up after {} attempts)",
                        attempt + 1
                    )));
                }
                std::thread::sleep(opts.backoff * 2u32.saturating_pow(attempt));
                attempt += 1;
            }
            other => return other,
        }
    }
}

fn fetch_chunk(
    transport: &dyn LogTransport,
    base: &LogFilter,
    from: u64,
    to: u64,
    opts: &FetchOptions,
) -> Result<Vec<RawLog>, TransportError> {
    let filter = LogFilter {
        from_block: from,
        to_block: to,
        ..base.clone()
    };
    match with_retries(transport, &filter, opts) {
        Err(TransportError::RangeTooLarge { .. }) if from < to => {
            let mid = from + (to - from) / 2;
            let mut left = fetch_chunk(transport, base, from, mid, opts)?;
            left.extend(fetch_chunk(transport, base, mid + 1, to, opts)?);
            Ok(left)
        }
        other => other,
    }
}

fn check_range(entry: &DaoRegistryEntry, (from, to): (u64, u64)) -> Result<(), IngestError> {
    if from > to || from < entry.deploy_block || to > entry.end_block {
        return Err(IngestError::InvalidRange { from, to });
    }
    Ok(())
}

/// Raw logs for `entry` over the inclusive `block_range`, sorted by
/// `(block_number, log_index)`.
pub fn fetch_raw_logs(
    transport: &dyn LogTransport,
    entry: &DaoRegistryEntry,
    block_range: (u64, u64),
    opts: &FetchOptions,
) -> Result<Vec<RawLog>, IngestError> {
    check_range(entry, block_range)?;
    let signatures = entry.signatures()?;
    let base = LogFilter {
        address: entry.governance_contract,
        topics: signatures.iter().map(EventSignature::topic).collect(),
        from_block: block_range.0,
        to_block: block_range.1,
    };
    let step = opts.chunk_size.max(1);
    let chunks: Vec<(u64, u64)> = {
        let mut v = Vec::new();
        let mut start = block_range.0;
        loop {
            let end = start.saturating_add(step - 1).min(block_range.1);
            v.push((start, end));
            if end == block_range.1 {
                break;
            }
            start = end + 1;
        }
        v
    };
    let pieces = chunks
        .par_iter()
        .map(|&(from, to)| fetch_chunk(transport, &base, from, to, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let mut logs: Vec<RawLog> = pieces.into_iter().flatten().collect();
    logs.sort_by_key(|l| (l.block_number, l.log_index));
    Ok(logs)
}

/// Fetches and decodes every vote event of `entry` in `block_range`.
pub fn fetch_logs(
    transport: &dyn LogTransport,
    entry: &DaoRegistryEntry,
    block_range: (u64, u64),
    opts: &FetchOptions,
) -> Result<Vec<VoteEvent>, IngestError> {
    let signatures = entry.signatures()?;
    let logs = fetch_raw_logs(transport, entry, block_range, opts)?;
    logs.iter()
        .map(|log| {
            let sig = log
                .topics
                .first()
                .and_then(|t| signatures.iter().find(|s| s.topic() == *t))
                .unwrap_or(&signatures[0]);
            decode_vote_event(log, sig)
        })
        .collect()
}

/// JSON-RPC over HTTP(S).
pub struct HttpTransport {
    url: String,
    agent: ureq::Agent,
    next_id: AtomicUsize,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.into(),
            agent,
            next_id: AtomicUsize::new(1),
        }
    }
}

/// Maps a JSON-RPC error object to a transport error.
fn classify_rpc_error(err: &Value, filter: &LogFilter) -> TransportError {
    let code = err.get("code").and_then(Value::as_i64).unwrap_or(0);
    let msg = err.get("message").and_then(Value::as_str).unwrap_or("").to_string();
    let lower = msg.to_lowercase();
    if code == -32005
        || ["range", "too many", "limit", "exceed", "10000 results"].iter().any(|k| lower.contains(k))
    {
        TransportError::RangeTooLarge {
            from: filter.from_block,
            to: filter.to_block,
        }
    } else if code == 429 || lower.contains("rate") || lower.contains("timeout") {
        TransportError::Transient(msg)
    } else {
        TransportError::Fatal(format!("{code}: {msg}"))
    }
}

impl LogTransport for HttpTransport {
    fn get_logs(&self, filter: &LogFilter) -> Result<Vec<RawLog>, TransportError> {
        let topics: Vec<String> = filter.topics.iter().map(|t| format!("0x{}", hex::encode(t))).collect();
        let body = json!({
            "jsonrpc": "2.0",
            "id": self.next_id.fetch_add(1, Ordering::Relaxed),
            "method": "eth_getLogs",
            "params": [{
                "address": filter.address.to_string(),
                "topics": [topics],
                "fromBlock": format!("{:#x}", filter.from_block),
                "toBlock": format!("{:#x}", filter.to_block),
            }],
        });
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(TransportError::Transient(format!("http status {status}")));
        }
        let reply: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::Transient(format!("http status {status}: {e}")))?;
        if let Some(err) = reply.get("error") {
            return Err(classify_rpc_error(err, filter));
        }
        let logs = reply
            .get("result")
            .and_then(Value::as_array)
            .ok_or_else(|| TransportError::Fatal("response has no result array".into()))?;
        logs.iter()
            .map(|v| RawLog::from_rpc_json(v).map_err(TransportError::Fatal))
            .collect()
    }
}

/// Serves a recorded `eth_getLogs` trace (a JSON array of log objects).
///
/// `max_span` and `transient_failures` emulate provider limits and flaky
/// networks.
pub struct ReplayTransport {
    logs: Vec<RawLog>,
    pub max_span: Option<u64>,
    transient_failures: AtomicUsize,
    calls: Mutex<Vec<(u64, u64)>>,
}

impl ReplayTransport {
    pub fn new(mut logs: Vec<RawLog>) -> Self {
        logs.sort_by_key(|l| (l.block_number, l.log_index));
        Self {
            logs,
            max_span: None,
            transient_failures: AtomicUsize::new(0),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn from_trace(text: &str) -> Result<Self, IngestError> {
        let values: Vec<Value> = serde_json::from_str(text).map_err(|e| IngestError::Parse {
            source_name: "trace".into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let logs = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                RawLog::from_rpc_json(v).map_err(|message| IngestError::Parse {
                    source_name: "trace".into(),
                    line: i + 1,
                    message,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(logs))
    }

    pub fn to_trace(logs: &[RawLog]) -> String {
        let values: Vec<Value> = logs.iter().map(RawLog::to_rpc_json).collect();
        serde_json::to_string_pretty(&values).expect("trace serializes")
    }

    pub fn with_max_span(mut self, span: u64) -> Self {
        self.max_span = Some(span);
        self
    }

    pub fn with_transient_failures(self, n: usize) -> Self {
        self.transient_failures.store(n, Ordering::SeqCst);
        self
    }

    /// Ranges requested so far, including rejected ones.
    pub fn calls(&self) -> Vec<(u64, u64)> {
        self.calls.lock().expect("calls lock").clone()
    }
}

impl LogTransport for ReplayTransport {
    fn get_logs(&self, filter: &LogFilter) -> Result<Vec<RawLog>, TransportError> {
        self.calls
            .lock()
            .expect("calls lock")
            .push((filter.from_block, filter.to_block));
        if self
            .transient_failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
        {
            return Err(TransportError::Transient("injected failure".into()));
        }
        if let Some(span) = self.max_span {
            if filter.to_block - filter.from_block + 1 > span {
                return Err(TransportError::RangeTooLarge {
                    from: filter.from_block,
                    to: filter.to_block,
                });
            }
        }
        Ok(self
            .logs
            .iter()
            .filter(|l| {
                l.address == filter.address
                    && (filter.from_block..=filter.to_block).contains(&l.block_number)
                    && l.topics.first().is_some_and(|t| filter.topics.contains(t))
            })
            .cloned()
            .collect())
    }
}
