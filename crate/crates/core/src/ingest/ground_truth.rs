use std::collections::BTreeSet;
use std::path::Path;

use super::{Address, IngestError};

/// Addresses known to have left in a fork ("forkers"); everyone else is a
/// stayer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForkGroundTruth {
    pub fork_label: String,
    pub addresses: BTreeSet<Address>,
}

impl ForkGroundTruth {
    pub fn contains(&self, a: &Address) -> bool {
        self.addresses.contains(a)
    }

    pub fn len(&self) -> usize {
        self.addresses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addresses.is_empty()
    }
}

/// One address per line; `#` starts a comment, blank lines are skipped.
pub fn parse_ground_truth(text: &str, fork_label: &str) -> Result<ForkGroundTruth, IngestError> {
    let mut addresses = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let addr = content.parse::<Address>().map_err(|_| IngestError::Parse {
            source_name: fork_label.to_string(),
            line: i + 1,
            message: format!("not an address: {content:?}"),
        })?;
        addresses.insert(addr);
    }
    if addresses.is_empty() {
        return Err(IngestError::EmptySet(fork_label.to_string()));
    }
    Ok(ForkGroundTruth {
        fork_label: fork_label.to_string(),
        addresses,
    })
}

/// Loads a ground-truth list; the label is the file stem.
pub fn load_ground_truth(path: &Path) -> Result<ForkGroundTruth, IngestError> {
    let text = std::fs::read_to_string(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "fork".to_string());
    parse_ground_truth(&text, &label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_addresses() {
        let text: String = (1..=15u8).map(|i| format!("0x{}\n", hex::encode([i; 20]))).collect();
        assert_eq!(parse_ground_truth(&text, "f").unwrap().len(), 15);
    }

    #[test]
    fn case_variants_collapse() {
        let text = "0xABCDEFabcdefABCDEFabcdefABCDEFabcdefABCD\n0xabcdefabcdefabcdefabcdefabcdefabcdefabcd\n";
        assert_eq!(parse_ground_truth(text, "f").unwrap().len(), 1);
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# forkers\n\n0x1111111111111111111111111111111111111111  # first\n   \n# 0x2222222222222222222222222222222222222222\n0x3333333333333333333333333333333333333333\n";
        let gt = parse_ground_truth(text, "f").unwrap();
        assert_eq!(gt.len(), 2);
        assert!(gt.contains(&Address([0x11; 20])));
        assert!(!gt.contains(&Address([0x22; 20])));
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_ground_truth("# nothing\n", "f"), Err(IngestError::EmptySet(_))));
        match parse_ground_truth("0x1111111111111111111111111111111111111111\nnope\n", "f") {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
