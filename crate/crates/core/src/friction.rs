//! Community friction: per-proposal disagreement with the winning side, its
//! trailing rolling mean, and the rule that flags a DAO for deeper analysis.
//!
//! Disagreement is `min(yes, no) / (yes + no)` counted per address, so it
//! lives in `[0, 0.5]` and a tie scores exactly `0.5`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::matrix::{MatrixError, VoterMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Unanimous,
    Low,
    Medium,
    High,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Unanimous, Category::Low, Category::Medium, Category::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Unanimous => "unanimous",
            Category::Low => "low",
            Category::Medium => "medium",
            Category::High => "high",
        }
    }
}

/// Category boundaries: unanimous at 0, low in `(0, low_upper)`, medium in
/// `[low_upper, medium_upper)`, high in `[medium_upper, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub low_upper: f64,
    pub medium_upper: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            low_upper: 0.20,
            medium_upper: 0.40,
        }
    }
}

impl Thresholds {
    pub fn categorize(&self, disagreement: f64) -> Category {
        if disagreement <= 0.0 {
            Category::Unanimous
        } else if disagreement < self.low_upper {
            Category::Low
        } else if disagreement < self.medium_upper {
            Category::Medium
        } else {
            Category::High
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementRecord {
    pub proposal_id: u64,
    pub disagreement: f64,
    pub category: Category,
}

pub fn static_disagreement(
    matrix: &VoterMatrix,
    proposal_id: u64,
    thresholds: &Thresholds,
) -> Result<DisagreementRecord, MatrixError> {
    let c = matrix.column_votes(proposal_id)?;
    let disagreement = c.yes.min(c.no) as f64 / (c.yes + c.no) as f64;
    Ok(DisagreementRecord {
        proposal_id,
        disagreement,
        category: thresholds.categorize(disagreement),
    })
}

/// Trailing mean over the last `min(window, j)` records ending at each `j`.
pub fn rolling_disagreement(records: &[DisagreementRecord], window: usize) -> Vec<(u64, f64)> {
    assert!(window >= 1, "window must be positive");
    (0..records.len())
        .map(|j| {
            let slice = &records[(j + 1).saturating_sub(window)..=j];
            let sum: f64 = slice.iter().map(|r| r.disagreement).sum();
            let (lo, hi) = slice
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r.disagreement), hi.max(r.disagreement))
                });
            // keep rounding from pushing the mean outside its inputs
            (records[j].proposal_id, (sum / slice.len() as f64).clamp(lo, hi))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RollingStat {
    #[default]
    Max,
    Mean,
}

/// Flag when medium+high share exceeds `share_threshold` and the rolling
/// series (by `rolling_stat`) exceeds `rolling_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagRule {
    pub share_threshold: f64,
    pub rolling_threshold: f64,
    pub rolling_stat: RollingStat,
}

impl Default for FlagRule {
    fn default() -> Self {
        Self {
            share_threshold: 0.20,
            rolling_threshold: 0.15,
            rolling_stat: RollingStat::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryShares {
    pub unanimous: f64,
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl CategoryShares {
    pub fn get(&self, c: Category) -> f64 {
        match c {
            Category::Unanimous => self.unanimous,
            Category::Low => self.low,
            Category::Medium => self.medium,
            Category::High => self.high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionReport {
    pub dao_name: String,
    pub records: Vec<DisagreementRecord>,
    pub rolling: Vec<(u64, f64)>,
    pub category_shares: CategoryShares,
    pub flagged: bool,
}

pub fn flag_dao(report: &FrictionReport, rule: &FlagRule) -> bool {
    let discord = report.category_shares.medium + report.category_shares.high;
    let values = report.rolling.iter().map(|&(_, v)| v);
    let rolling = match rule.rolling_stat {
        RollingStat::Max => values.fold(f64::NEG_INFINITY, f64::max),
        RollingStat::Mean => {
            if report.rolling.is_empty() {
                f64::NEG_INFINITY
            } else {
                values.sum::<f64>() / report.rolling.len() as f64
            }
        }
    };
    discord > rule.share_threshold && rolling > rule.rolling_threshold
}

fn shares(records: &[DisagreementRecord]) -> CategoryShares {
    if records.is_empty() {
        return CategoryShares::default();
    }
    let n = records.len() as f64;
    let count = |c| records.iter().filter(|r| r.category == c).count() as f64 / n;
    CategoryShares {
        unanimous: count(Category::Unanimous),
        low: count(Category::Low),
        medium: count(Category::Medium),
        high: count(Category::High),
    }
}

impl FrictionReport {
    /// Assembles a report from precomputed records (ordered by proposal).
    pub fn from_records(dao_name: &str, records: Vec<DisagreementRecord>, window: usize, rule: &FlagRule) -> Self {
        let rolling = rolling_disagreement(&records, window);
        let mut report = Self {
            dao_name: dao_name.to_string(),
            category_shares: shares(&records),
            records,
            rolling,
            flagged: false,
        };
        report.flagged = flag_dao(&report, rule);
        report
    }

    pub fn from_matrix(
        dao_name: &str,
        matrix: &VoterMatrix,
        thresholds: &Thresholds,
        window: usize,
        rule: &FlagRule,
    ) -> Self {
        let records = matrix
            .proposal_ids()
            .iter()
            .map(|&p| static_disagreement(matrix, p, thresholds).expect("column exists"))
            .collect();
        Self::from_records(dao_name, records, window, rule)
    }

    /// CSV: `proposal_id,disagreement,category,rolling`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "proposal_id,disagreement,category,rolling")?;
        for (r, (_, roll)) in self.records.iter().zip(&self.rolling) {
            writeln!(out, "{},{},{},{}", r.proposal_id, r.disagreement, r.category.as_str(), roll)?;
        }
        out.flush()
    }
}
