//! Event-signature parsing and ABI decoding of vote logs.
//!
//! Signatures are written in human-readable Solidity form, optionally with
//! `indexed` markers and parameter names:
//!
//! ```text
//! VoteCast(address indexed voter, uint256 proposalId, uint8 support, uint256 votes, string reason)
//! CastVote(uint256 indexed voteId, address indexed voter, bool supports, uint256 stake)
//! ```
//!
//! The topic hash is keccak-256 of the canonical form (`VoteCast(address,uint256,...)`).
//! When no parameter carries `indexed`, the first `address` is taken to be
//! indexed, which is the Governor Bravo / OpenZeppelin Governor layout.
//!
//! Field roles are positional by type: the voter is the first `address`, the
//! proposal id is the first `uintN` with `N > 8`, and support is the first
//! `uint8` or `bool`.

use std::fmt;

use serde::{Deserialize, Serialize};
use tiny_keccak::{Hasher, Keccak};

use super::{Address, IngestError, VoteEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Address,
    Uint(u16),
    Int(u16),
    Bool,
    FixedBytes(u8),
    Bytes,
    String,
    Array,
}

impl ParamKind {
    fn parse(ty: &str) -> Option<Self> {
        if ty.ends_with(']') {
            return Some(ParamKind::Array);
        }
        let kind = match ty {
            "address" => ParamKind::Address,
            "bool" => ParamKind::Bool,
            "string" => ParamKind::String,
            "bytes" => ParamKind::Bytes,
            "uint" => ParamKind::Uint(256),
            "int" => ParamKind::Int(256),
            _ => {
                if let Some(bits) = ty.strip_prefix("uint") {
                    ParamKind::Uint(valid_bits(bits)?)
                } else if let Some(bits) = ty.strip_prefix("int") {
                    ParamKind::Int(valid_bits(bits)?)
                } else if let Some(n) = ty.strip_prefix("bytes") {
                    let n: u8 = n.parse().ok()?;
                    if !(1..=32).contains(&n) {
                        return None;
                    }
                    ParamKind::FixedBytes(n)
                } else {
                    return None;
                }
            }
        };
        Some(kind)
    }

    fn is_dynamic(self) -> bool {
        matches!(self, ParamKind::Bytes | ParamKind::String | ParamKind::Array)
    }
}

fn valid_bits(s: &str) -> Option<u16> {
    let bits: u16 = s.parse().ok()?;
    (bits > 0 && bits <= 256 && bits % 8 == 0).then_some(bits)
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKind::Address => write!(f, "address"),
            ParamKind::Uint(b) => write!(f, "uint{b}"),
            ParamKind::Int(b) => write!(f, "int{b}"),
            ParamKind::Bool => write!(f, "bool"),
            ParamKind::FixedBytes(n) => write!(f, "bytes{n}"),
            ParamKind::Bytes => write!(f, "bytes"),
            ParamKind::String => write!(f, "string"),
            ParamKind::Array => write!(f, "array"),
        }
    }
}

#[derive(Debug, Clone)]
struct Param {
    kind: ParamKind,
    raw_type: String,
    indexed: bool,
}

/// A parsed vote-event signature with its topic hash and field roles.
#[derive(Debug, Clone)]
pub struct EventSignature {
    text: String,
    canonical: String,
    topic: [u8; 32],
    params: Vec<Param>,
    voter: usize,
    proposal: usize,
    support: usize,
}

pub fn keccak256(bytes: &[u8]) -> [u8; 32] {
    let mut k = Keccak::v256();
    k.update(bytes);
    let mut out = [0u8; 32];
    k.finalize(&mut out);
    out
}

impl EventSignature {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let bad = |why: &str| IngestError::InvalidSignature(text.to_string(), why.to_string());
        let t = text.trim();
        let open = t.find('(').ok_or_else(|| bad("missing '('"))?;
        if !t.ends_with(')') {
            return Err(bad("missing ')'"));
        }
        let name = t[..open].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(bad("bad event name"));
        }
        let inner = &t[open + 1..t.len() - 1];
        if inner.contains('(') || inner.contains(')') {
            return Err(bad("tuple parameters are not supported"));
        }
        let mut params = Vec::new();
        if !inner.trim().is_empty() {
            for piece in inner.split(',') {
                let mut words = piece.split_whitespace();
                let raw_type = words.next().ok_or_else(|| bad("empty parameter"))?;
                let kind = ParamKind::parse(raw_type).ok_or_else(|| bad("unknown parameter type"))?;
                let rest: Vec<&str> = words.collect();
                let indexed = rest.first() == Some(&"indexed");
                if rest.len() > if indexed { 2 } else { 1 } {
                    return Err(bad("unexpected tokens in parameter"));
                }
                let raw_type = match kind {
                    ParamKind::Uint(256) if raw_type == "uint" => "uint256".to_string(),
                    ParamKind::Int(256) if raw_type == "int" => "int256".to_string(),
                    _ => raw_type.to_string(),
                };
                params.push(Param { kind, raw_type, indexed });
            }
        }
        if params.iter().filter(|p| p.indexed).count() > 3 {
            return Err(bad("more than three indexed parameters"));
        }
        let voter = params
            .iter()
            .position(|p| p.kind == ParamKind::Address)
            .ok_or_else(|| bad("no address parameter for the voter"))?;
        if !params.iter().any(|p| p.indexed) {
            params[voter].indexed = true;
        }
        let proposal = params
            .iter()
            .position(|p| matches!(p.kind, ParamKind::Uint(b) if b > 8))
            .ok_or_else(|| bad("no uint parameter for the proposal id"))?;
        let support = params
            .iter()
            .position(|p| matches!(p.kind, ParamKind::Uint(8) | ParamKind::Bool))
            .ok_or_else(|| bad("no uint8/bool parameter for support"))?;

        let canonical = format!(
            "{name}({})",
            params.iter().map(|p| p.raw_type.as_str()).collect::<Vec<_>>().join(",")
        );
        let topic = keccak256(canonical.as_bytes());
        Ok(Self {
            text: t.to_string(),
            canonical,
            topic,
            params,
            voter,
            proposal,
            support,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// `Name(type,type,...)`, the string that is hashed.
    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    pub fn topic(&self) -> [u8; 32] {
        self.topic
    }

    fn indexed_count(&self) -> usize {
        self.params.iter().filter(|p| p.indexed).count()
    }

    /// Where parameter `i` lives: `Ok(topic index)` or `Err(data head slot)`.
    fn location(&self, i: usize) -> Result<usize, usize> {
        let before = &self.params[..i];
        if self.params[i].indexed {
            Ok(1 + before.iter().filter(|p| p.indexed).count())
        } else {
            Err(before.iter().filter(|p| !p.indexed).count())
        }
    }
}

/// One log entry as returned by `eth_getLogs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawLog {
    pub address: Address,
    pub topics: Vec<[u8; 32]>,
    pub data: Vec<u8>,
    pub block_number: u64,
    pub log_index: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RpcLog {
    address: Address,
    topics: Vec<String>,
    data: String,
    block_number: String,
    log_index: String,
}

fn parse_hex_u64(s: &str) -> Option<u64> {
    u64::from_str_radix(s.strip_prefix("0x")?, 16).ok()
}

fn parse_hex_bytes(s: &str) -> Option<Vec<u8>> {
    hex::decode(s.strip_prefix("0x")?).ok()
}

impl RawLog {
    /// Parses the JSON-RPC log object shape (hex quantities, `0x` data).
    pub fn from_rpc_json(value: &serde_json::Value) -> Result<Self, String> {
        let log: RpcLog = serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
        let topics = log
            .topics
            .iter()
            .map(|t| {
                let bytes = parse_hex_bytes(t).ok_or_else(|| format!("bad topic {t}"))?;
                <[u8; 32]>::try_from(bytes.as_slice()).map_err(|_| format!("topic {t} is not 32 bytes"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RawLog {
            address: log.address,
            topics,
            data: parse_hex_bytes(&log.data).ok_or_else(|| format!("bad data {}", log.data))?,
            block_number: parse_hex_u64(&log.block_number).ok_or("bad blockNumber")?,
            log_index: parse_hex_u64(&log.log_index).ok_or("bad logIndex")?,
        })
    }

    pub fn to_rpc_json(&self) -> serde_json::Value {
        let log = RpcLog {
            address: self.address,
            topics: self.topics.iter().map(|t| format!("0x{}", hex::encode(t))).collect(),
            data: format!("0x{}", hex::encode(&self.data)),
            block_number: format!("{:#x}", self.block_number),
            log_index: format!("{:#x}", self.log_index),
        };
        serde_json::to_value(log).expect("log serializes")
    }
}

fn word(v: u64) -> [u8; 32] {
    let mut w = [0u8; 32];
    w[24..].copy_from_slice(&v.to_be_bytes());
    w
}

fn address_word(a: &Address) -> [u8; 32] {
    let mut w = [0u8; 32];
    w[12..].copy_from_slice(a.as_bytes());
    w
}

/// Decodes a vote log against `signature`.
pub fn decode_vote_event(log: &RawLog, signature: &EventSignature) -> Result<VoteEvent, IngestError> {
    let malformed = |reason: String| IngestError::MalformedData {
        block: log.block_number,
        log_index: log.log_index,
        reason,
    };
    match log.topics.first() {
        Some(t) if *t == signature.topic => {}
        other => {
            return Err(IngestError::SignatureMismatch {
                block: log.block_number,
                log_index: log.log_index,
                expected: format!("0x{}", hex::encode(signature.topic)),
                found: other.map_or_else(|| "<none>".to_string(), |t| format!("0x{}", hex::encode(t))),
            })
        }
    }
    let expected_topics = 1 + signature.indexed_count();
    if log.topics.len() != expected_topics {
        return Err(malformed(format!(
            "expected {expected_topics} topics, found {}",
            log.topics.len()
        )));
    }
    let data_params: Vec<&Param> = signature.params.iter().filter(|p| !p.indexed).collect();
    let head_len = 32 * data_params.len();
    if log.data.len() < head_len {
        return Err(malformed(format!(
            "data is {} bytes, head needs {head_len}",
            log.data.len()
        )));
    }
    for (slot, p) in data_params.iter().enumerate() {
        if p.kind.is_dynamic() {
            let head = &log.data[32 * slot..32 * slot + 32];
            let offset = small_word(head).ok_or_else(|| malformed(format!("offset in slot {slot} overflows")))?;
            let len_end = offset.checked_add(32).filter(|&e| e <= log.data.len());
            let len_end = len_end.ok_or_else(|| malformed(format!("offset {offset} past end of data")))?;
            let len = small_word(&log.data[offset..len_end])
                .ok_or_else(|| malformed(format!("length at {offset} overflows")))?;
            // arrays count elements, not bytes; only bounds-check byte payloads
            if p.kind != ParamKind::Array && len_end.checked_add(len).map_or(true, |e| e > log.data.len()) {
                return Err(malformed(format!("payload of {len} bytes at {offset} past end of data")));
            }
        }
    }
    let word_of = |i: usize| -> &[u8] {
        match signature.location(i) {
            Ok(topic) => &log.topics[topic],
            Err(slot) => &log.data[32 * slot..32 * slot + 32],
        }
    };

    let voter_word = word_of(signature.voter);
    if voter_word[..12].iter().any(|&b| b != 0) {
        return Err(malformed("voter word has dirty high bytes".into()));
    }
    let mut voter = [0u8; 20];
    voter.copy_from_slice(&voter_word[12..]);

    let proposal_id = small_word(word_of(signature.proposal))
        .and_then(|v| u64::try_from(v).ok())
        .ok_or_else(|| malformed("proposal id does not fit in 64 bits".into()))?;
    if proposal_id == 0 {
        return Err(malformed("proposal id 0".into()));
    }
    let support_word = word_of(signature.support);
    let support = small_word(support_word)
        .filter(|&v| v <= 255)
        .ok_or_else(|| malformed("support value out of range".into()))? as u8;
    if signature.params[signature.support].kind == ParamKind::Bool && support > 1 {
        return Err(malformed(format!("bool support value {support}")));
    }

    Ok(VoteEvent {
        voter: Address(voter),
        proposal_id,
        support,
        block_number: log.block_number,
        log_index: log.log_index,
    })
}

/// Reads a big-endian word that must fit in `usize`/`u64`.
fn small_word(w: &[u8]) -> Option<usize> {
    if w[..24].iter().any(|&b| b != 0) {
        return None;
    }
    let mut b = [0u8; 8];
    b.copy_from_slice(&w[24..32]);
    usize::try_from(u64::from_be_bytes(b)).ok()
}

/// Encodes `event` as a synthetic log of `signature` emitted by `contract`.
///
/// Parameters without a role are zero; dynamic ones are empty.
pub fn encode_vote_log(event: &VoteEvent, signature: &EventSignature, contract: Address) -> Result<RawLog, IngestError> {
    if signature.params[signature.support].kind == ParamKind::Bool && event.support > 1 {
        return Err(IngestError::MalformedData {
            block: event.block_number,
            log_index: event.log_index,
            reason: format!("support {} cannot be encoded as bool", event.support),
        });
    }
    let mut topics = vec![signature.topic];
    let mut head: Vec<[u8; 32]> = Vec::new();
    let mut dynamic_slots = Vec::new();
    for (i, p) in signature.params.iter().enumerate() {
        let w = if i == signature.voter {
            address_word(&event.voter)
        } else if i == signature.proposal {
            word(event.proposal_id)
        } else if i == signature.support {
            word(u64::from(event.support))
        } else {
            [0u8; 32]
        };
        if p.indexed {
            topics.push(w);
        } else {
            if p.kind.is_dynamic() {
                dynamic_slots.push(head.len());
            }
            head.push(w);
        }
    }
    // every dynamic parameter points at its own zero-length tail
    let mut tail: Vec<[u8; 32]> = Vec::new();
    for &slot in &dynamic_slots {
        head[slot] = word((32 * (head.len() + tail.len())) as u64);
        tail.push([0u8; 32]);
    }
    let data = head.iter().chain(tail.iter()).flat_map(|w| w.iter().copied()).collect();
    Ok(RawLog {
        address: contract,
        topics,
        data,
        block_number: event.block_number,
        log_index: event.log_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BRAVO: &str = "VoteCast(address indexed voter, uint256 proposalId, uint8 support, uint256 votes, string reason)";
    // keccak-256 of the canonical signature, computed with pycryptodome
    const BRAVO_TOPIC: &str = "b8e138887d0aa13bab447e82de9d5c1777041ecd21ca36ba824ff1e6c07ddda4";
    const ARAGON_TOPIC: &str = "b34ee265e3d4f5ec4e8b52d59b2a9be8fceca2f274ebc080d8fba797fea9391f";

    fn h32(s: &str) -> [u8; 32] {
        hex::decode(s).unwrap().try_into().unwrap()
    }

    #[test]
    fn keccak_of_empty_string() {
        assert_eq!(
            hex::encode(keccak256(b"")),
            "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
        );
    }

    #[test]
    fn canonical_form_and_topic() {
        let sig = EventSignature::parse(BRAVO).unwrap();
        assert_eq!(sig.canonical(), "VoteCast(address,uint256,uint8,uint256,string)");
        assert_eq!(hex::encode(sig.topic()), BRAVO_TOPIC);
        let bare = EventSignature::parse("VoteCast(address,uint256,uint8,uint256,string)").unwrap();
        assert_eq!(bare.topic(), sig.topic());
        assert!(bare.params[0].indexed);
        let aragon = EventSignature::parse("CastVote(uint256 indexed voteId, address indexed voter, bool supports, uint256 stake)").unwrap();
        assert_eq!(hex::encode(aragon.topic()), ARAGON_TOPIC);
    }

    #[test]
    fn rejects_unusable_signatures() {
        for bad in ["VoteCast", "VoteCast(uint256,uint8)", "VoteCast(address,uint8)", "VoteCast(address,uint256)", "V((address,uint256),uint8)", "VoteCast(address,uint7,uint8)"] {
            assert!(EventSignature::parse(bad).is_err(), "{bad}");
        }
    }

    // topic1 and data hand-encoded in Python: voter 0xaa..aa, proposal 7,
    // support 1, votes 42, reason "gm"
    fn hand_encoded() -> RawLog {
        let data = "0000000000000000000000000000000000000000000000000000000000000007\
                    0000000000000000000000000000000000000000000000000000000000000001\
                    000000000000000000000000000000000000000000000000000000000000002a\
                    0000000000000000000000000000000000000000000000000000000000000080\
                    0000000000000000000000000000000000000000000000000000000000000002\
                    676d000000000000000000000000000000000000000000000000000000000000";
        RawLog {
            address: "0x6f3E6272A167e8AcCb32072d08E0957F9c79223d".parse().unwrap(),
            topics: vec![
                h32(BRAVO_TOPIC),
                h32("000000000000000000000000aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa"),
            ],
            data: hex::decode(data).unwrap(),
            block_number: 13_000_000,
            log_index: 4,
        }
    }

    #[test]
    fn decodes_hand_encoded_bravo_log() {
        let sig = EventSignature::parse("VoteCast(address,uint256,uint8,uint256,string)").unwrap();
        let ev = decode_vote_event(&hand_encoded(), &sig).unwrap();
        assert_eq!(
            ev,
            VoteEvent {
                voter: Address([0xaa; 20]),
                proposal_id: 7,
                support: 1,
                block_number: 13_000_000,
                log_index: 4,
            }
        );
    }

    #[test]
    fn topic_mismatch_is_reported_with_position() {
        let sig = EventSignature::parse(BRAVO).unwrap();
        let mut log = hand_encoded();
        log.topics[0][0] ^= 1;
        match decode_vote_event(&log, &sig) {
            Err(IngestError::SignatureMismatch { block, log_index, .. }) => {
                assert_eq!((block, log_index), (13_000_000, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_or_broken_data_is_malformed() {
        let sig = EventSignature::parse(BRAVO).unwrap();
        let mut short = hand_encoded();
        short.data.truncate(100);
        assert!(matches!(decode_vote_event(&short, &sig), Err(IngestError::MalformedData { .. })));

        let mut bad_offset = hand_encoded();
        bad_offset.data[127] = 0xff;
        assert!(matches!(decode_vote_event(&bad_offset, &sig), Err(IngestError::MalformedData { .. })));

        let mut missing_topic = hand_encoded();
        missing_topic.topics.pop();
        assert!(matches!(decode_vote_event(&missing_topic, &sig), Err(IngestError::MalformedData { .. })));

        let mut zero_id = hand_encoded();
        zero_id.data[31] = 0;
        assert!(matches!(decode_vote_event(&zero_id, &sig), Err(IngestError::MalformedData { .. })));
    }

    #[test]
    fn aragon_layout_decodes_indexed_proposal() {
        let sig = EventSignature::parse("CastVote(uint256 indexed voteId, address indexed voter, bool supports, uint256 stake)").unwrap();
        let ev = VoteEvent {
            voter: Address([0x11; 20]),
            proposal_id: 99,
            support: 0,
            block_number: 5,
            log_index: 1,
        };
        let log = encode_vote_log(&ev, &sig, Address([0; 20])).unwrap();
        assert_eq!(log.topics.len(), 3);
        assert_eq!(decode_vote_event(&log, &sig).unwrap(), ev);
        let abstain = VoteEvent { support: 2, ..ev };
        assert!(encode_vote_log(&abstain, &sig, Address([0; 20])).is_err());
    }

    #[test]
    fn rpc_json_round_trip() {
        let log = hand_encoded();
        let v = log.to_rpc_json();
        assert_eq!(v["blockNumber"], "0xc65d40");
        assert_eq!(RawLog::from_rpc_json(&v).unwrap(), log);
    }

    proptest! {
        #[test]
        fn encode_then_decode_is_identity(
            voter in any::<[u8; 20]>(),
            proposal_id in 1u64..,
            support in any::<u8>(),
            block_number in any::<u64>(),
            log_index in any::<u64>(),
        ) {
            let sig = EventSignature::parse(BRAVO).unwrap();
            let ev = VoteEvent { voter: Address(voter), proposal_id, support, block_number, log_index };
            let log = encode_vote_log(&ev, &sig, Address([1; 20])).unwrap();
            prop_assert_eq!(decode_vote_event(&log, &sig).unwrap(), ev);
        }
    }
}
