//! Vote-event acquisition: ABI decoding, fixture replay, live `eth_getLogs`
//! fetching, DAO registry, and fork ground truth.

mod abi;
mod fixture;
mod ground_truth;
mod registry;
mod rpc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use abi::{decode_vote_event, encode_vote_log, keccak256, EventSignature, ParamKind, RawLog};
pub use fixture::{load_fixture, normalize_events, parse_fixture, write_fixture, DuplicateKey, FixtureLoad};
pub use ground_truth::{load_ground_truth, parse_ground_truth, ForkGroundTruth};
pub use registry::{DaoRegistryEntry, Registry, BUNDLED_REGISTRY};
pub use rpc::{fetch_logs, FetchOptions, HttpTransport, LogFilter, LogTransport, ReplayTransport, TransportError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("log {block}:{log_index}: topic {found} does not match signature hash {expected}")]
    SignatureMismatch {
        block: u64,
        log_index: u64,
        expected: String,
        found: String,
    },
    #[error("log {block}:{log_index}: malformed data: {reason}")]
    MalformedData {
        block: u64,
        log_index: u64,
        reason: String,
    },
    #[error("invalid event signature {0:?}: {1}")]
    InvalidSignature(String, String),
    #[error("invalid address {0:?}")]
    InvalidAddress(String),
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("ground-truth file {0} lists no addresses")]
    EmptySet(String),
    #[error("invalid registry: {0}")]
    Registry(String),
    #[error("invalid block range {from}..={to}")]
    InvalidRange { from: u64, to: u64 },
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A 20-byte EVM account address.
///
/// Always rendered as lowercase `0x`-prefixed hex, so string equality and
/// byte equality coincide. Ordering is byte order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }
}

impl FromStr for Address {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t
            .strip_prefix("0x")
            .or_else(|| t.strip_prefix("0X"))
            .ok_or_else(|| IngestError::InvalidAddress(s.to_string()))?;
        if digits.len() != 40 {
            return Err(IngestError::InvalidAddress(s.to_string()));
        }
        let mut out = [0u8; 20];
        hex::decode_to_slice(digits, &mut out).map_err(|_| IngestError::InvalidAddress(s.to_string()))?;
        Ok(Address(out))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One decoded on-chain vote. `support` is kept raw (0 against, 1 for,
/// 2 abstain on most governors); collapsing happens in the matrix builder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteEvent {
    pub voter: Address,
    pub proposal_id: u64,
    pub support: u8,
    pub block_number: u64,
    pub log_index: u64,
}

impl VoteEvent {
    /// Chain position followed by the remaining fields, so sorting is total.
    pub fn sort_key(&self) -> (u64, u64, Address, u64, u8) {
        (self.block_number, self.log_index, self.voter, self.proposal_id, self.support)
    }
}
