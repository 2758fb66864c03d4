use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Address, EventSignature, IngestError};

/// The registry shipped with the crate.
pub const BUNDLED_REGISTRY: &str = include_str!("../../registry.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaoRegistryEntry {
    pub name: String,
    pub chain: String,
    pub governance_contract: Address,
    pub deploy_block: u64,
    pub end_block: u64,
    pub event_signatures: Vec<String>,
}

impl DaoRegistryEntry {
    /// Parses every signature; topic hashes are computed here.
    pub fn signatures(&self) -> Result<Vec<EventSignature>, IngestError> {
        self.event_signatures.iter().map(|s| EventSignature::parse(s)).collect()
    }

    fn validate(&self) -> Result<(), IngestError> {
        if self.deploy_block > self.end_block {
            return Err(IngestError::Registry(format!(
                "{}: deploy_block {} after end_block {}",
                self.name, self.deploy_block, self.end_block
            )));
        }
        if self.event_signatures.is_empty() {
            return Err(IngestError::Registry(format!("{}: no event signatures", self.name)));
        }
        self.signatures().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    #[serde(rename = "dao")]
    pub entries: Vec<DaoRegistryEntry>,
}

impl Registry {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let reg: Registry = toml::from_str(text).map_err(|e| IngestError::Registry(e.to_string()))?;
        for (i, e) in reg.entries.iter().enumerate() {
            e.validate()?;
            if reg.entries[..i].iter().any(|o| o.name == e.name) {
                return Err(IngestError::Registry(format!("duplicate entry {}", e.name)));
            }
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_REGISTRY).expect("bundled registry is valid")
    }

    pub fn get(&self, name: &str) -> Option<&DaoRegistryEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}
