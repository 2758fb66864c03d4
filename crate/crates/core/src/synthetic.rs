//! Planted two-bloc voting data with known membership.
//!
//! On each proposal the majority bloc takes a position uniformly at random
//! and the minority bloc matches it with probability `q`. Every member
//! follows its bloc's position with probability `p` and votes the other way
//! otherwise, and shows up at all with probability `participation`.
//! Two members of one bloc agree with probability `p² + (1−p)²`, so `p` is
//! solved from `within_agreement`. Members of different blocs agree with
//! probability `q·w + (1−q)(1−w)` where `w` is the within-bloc agreement,
//! which gives `q` from `across_agreement`.

use serde::{Deserialize, Serialize};

use crate::ingest::{keccak256, Address, ForkGroundTruth, VoteEvent};
use crate::seed::{stage_seed, SeedStream, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub majority: usize,
    pub minority: usize,
    pub proposals: usize,
    pub within_agreement: f64,
    pub across_agreement: f64,
    pub participation: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            majority: 20,
            minority: 10,
            proposals: 60,
            within_agreement: 0.9,
            across_agreement: 0.2,
            participation: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDao {
    pub events: Vec<VoteEvent>,
    /// The minority bloc, labelled `planted`.
    pub minority: ForkGroundTruth,
    pub majority: Vec<Address>,
}

impl PlantedSpec {
    /// Probability a member follows its bloc.
    pub fn follow_probability(&self) -> f64 {
        (1.0 + (2.0 * self.within_agreement - 1.0).sqrt()) / 2.0
    }

    /// Probability the two blocs take the same position.
    pub fn bloc_agreement(&self) -> f64 {
        let w = self.within_agreement;
        (self.across_agreement - (1.0 - w)) / (2.0 * w - 1.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.majority + self.minority < 2 || self.proposals == 0 {
            return Err("need at least two voters and one proposal".into());
        }
        if !(0.5..=1.0).contains(&self.within_agreement) || self.within_agreement == 0.5 {
            return Err(format!("within_agreement {} must be in (0.5, 1]", self.within_agreement));
        }
        let q = self.bloc_agreement();
        if !(0.0..=1.0).contains(&q) {
            return Err(format!(
                "across_agreement {} is unreachable with within_agreement {}",
                self.across_agreement, self.within_agreement
            ));
        }
        if !(0.0..=1.0).contains(&self.participation) || self.participation == 0.0 {
            return Err(format!("participation {} must be in (0, 1]", self.participation));
        }
        Ok(())
    }
}

pub fn planted_address(i: usize) -> Address {
    let h = keccak256(format!("planted-voter-{i}").as_bytes());
    let mut b = [0u8; 20];
    b.copy_from_slice(&h[12..]);
    Address(b)
}

/// Proposal `j` (1-based) sits at block `1000·j`; log indices count up
/// within each block.
pub fn generate(spec: &PlantedSpec) -> Result<PlantedDao, String> {
    spec.validate()?;
    let p = spec.follow_probability();
    let q = spec.bloc_agreement();
    let n = spec.majority + spec.minority;
    let voters: Vec<Address> = (0..n).map(planted_address).collect();
    let mut rng = SeedStream::new(stage_seed(spec.seed, Stage::Synthetic, 0));
    let mut events = Vec::new();
    for j in 1..=spec.proposals as u64 {
        let major = (rng.next_f64() < 0.5) as u8;
        let minor = if rng.next_f64() < q { major } else { 1 - major };
        let mut cast = Vec::new();
        for i in 0..n {
            let bloc = if i < spec.majority { major } else { minor };
            let shows = rng.next_f64() < spec.participation;
            let follows = rng.next_f64() < p;
            if shows {
                cast.push((i, if follows { bloc } else { 1 - bloc }));
            }
        }
        if cast.is_empty() {
            cast.push((0, major));
        }
        events.extend(cast.into_iter().enumerate().map(|(idx, (i, support))| VoteEvent {
            voter: voters[i],
            proposal_id: j,
            support,
            block_number: 1000 * j,
            log_index: idx as u64,
        }));
    }
    Ok(PlantedDao {
        events,
        minority: ForkGroundTruth {
            fork_label: "planted".into(),
            addresses: voters[spec.majority..].iter().copied().collect(),
        },
        majority: voters[..spec.majority].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::VoterMatrix;

    #[test]
    fn probabilities_solve_the_targets() {
        let s = PlantedSpec::default();
        let p = s.follow_probability();
        let w = p * p + (1.0 - p) * (1.0 - p);
        assert!((w - 0.9).abs() < 1e-12);
        let q = s.bloc_agreement();
        assert!((q - 0.125).abs() < 1e-12);
        let across = q * w + (1.0 - q) * (1.0 - w);
        assert!((across - 0.2).abs() < 1e-12);
    }

    #[test]
    fn default_shape() {
        let dao = generate(&PlantedSpec::default()).unwrap();
        let m = VoterMatrix::from_events(&dao.events).unwrap();
        assert_eq!(m.n_addresses(), 30);
        assert_eq!(m.n_proposals(), 60);
        assert_eq!(dao.minority.len(), 10);
        assert_eq!(dao, generate(&PlantedSpec::default()).unwrap());
    }

    #[test]
    fn empirical_agreement_is_near_target() {
        let spec = PlantedSpec {
            proposals: 4000,
            ..PlantedSpec::default()
        };
        let dao = generate(&spec).unwrap();
        let m = VoterMatrix::from_events(&dao.events).unwrap();
        let col = |a: &Address| m.row(m.address_index(a).unwrap()).to_vec();
        let rate = |x: &[i8], y: &[i8]| {
            let both: Vec<(i8, i8)> = x.iter().zip(y).filter(|(a, b)| **a >= 0 && **b >= 0).map(|(a, b)| (*a, *b)).collect();
            both.iter().filter(|(a, b)| a == b).count() as f64 / both.len() as f64
        };
        let minority: Vec<Address> = dao.minority.addresses.iter().copied().collect();
        let within = rate(&col(&dao.majority[0]), &col(&dao.majority[1]));
        let across = rate(&col(&dao.majority[0]), &col(&minority[0]));
        assert!((within - 0.9).abs() < 0.03, "{within}");
        assert!((across - 0.2).abs() < 0.03, "{across}");
        let shown = m.row(0).iter().filter(|&&c| c >= 0).count() as f64 / 4000.0;
        assert!((shown - 0.8).abs() < 0.03, "{shown}");
    }

    #[test]
    fn unreachable_targets_are_rejected() {
        let s = PlantedSpec {
            across_agreement: 0.01,
            ..PlantedSpec::default()
        };
        assert!(generate(&s).is_err());
        let s = PlantedSpec {
            within_agreement: 0.4,
            ..PlantedSpec::default()
        };
        assert!(generate(&s).is_err());
    }
}
