use std::path::{Path, PathBuf};

use clap::Args;
use factions::cluster::KMeansConfig;
use factions::dissim::WindowSpec;
use factions::embed::MdsConfig;
use factions::friction::RollingStat;
use factions::pipeline::PipelineConfig;
use factions::validate::ValidationConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a run needs. Defaults match the Nouns parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dao: Option<String>,
    pub fixture: Option<PathBuf>,
    pub rpc_url: Option<String>,
    pub replay: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub from_block: Option<u64>,
    pub to_block: Option<u64>,
    pub window_size: usize,
    pub participation_threshold: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub mds_max_iterations: usize,
    pub mds_tolerance: f64,
    pub kmeans_restarts: usize,
    pub iterations: u64,
    pub root_seed: u64,
    pub ranges: Vec<(u64, u64)>,
    pub min_fork_present: usize,
    pub rolling_window: usize,
    pub rolling_stat: RollingStat,
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dao: None,
            fixture: None,
            rpc_url: None,
            replay: None,
            registry: None,
            ground_truth: None,
            from_block: None,
            to_block: None,
            window_size: 10,
            participation_threshold: 0.40,
            k_min: 2,
            k_max: 5,
            mds_max_iterations: 300,
            mds_tolerance: 1e-6,
            kmeans_restarts: 10,
            iterations: 100,
            root_seed: 0,
            ranges: Vec::new(),
            min_fork_present: 1,
            rolling_window: 10,
            rolling_stat: RollingStat::Max,
            output_dir: PathBuf::from("out"),
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn dao(&self) -> Result<&str, CliError> {
        self.dao
            .as_deref()
            .ok_or_else(|| CliError::Config("--dao is required".into()))
    }

    pub fn dao_dir(&self) -> Result<PathBuf, CliError> {
        Ok(self.output_dir.join(self.dao()?))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            window: WindowSpec {
                window_size: self.window_size,
                participation_threshold: self.participation_threshold,
            },
            mds: MdsConfig {
                max_iterations: self.mds_max_iterations,
                tolerance: self.mds_tolerance,
                seed: self.root_seed,
            },
            kmeans: KMeansConfig {
                restarts: self.kmeans_restarts,
                ..KMeansConfig::default()
            },
            k_min: self.k_min,
            k_max: self.k_max,
            root_seed: self.root_seed,
        }
    }

    pub fn validation(&self) -> ValidationConfig {
        ValidationConfig {
            pipeline: self.pipeline(),
            ranges: self.ranges.clone(),
            iterations: self.iterations,
            min_fork_present: self.min_fork_present,
        }
    }

    pub fn check(&self) -> Result<(), CliError> {
        self.pipeline()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.rolling_window == 0 {
            return Err(CliError::Config("rolling window must be at least 1".into()));
        }
        if self.min_fork_present == 0 {
            return Err(CliError::Config("min fork present must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if let Some((a, b)) = self.ranges.iter().find(|(a, b)| a > b) {
            return Err(CliError::Config(format!("range {a}-{b} is reversed")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeList(pub Vec<(u64, u64)>);

impl From<RangeList> for Vec<(u64, u64)> {
    fn from(r: RangeList) -> Self {
        r.0
    }
}

fn parse_ranges(text: &str) -> Result<RangeList, String> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|part| {
            let part = part.trim();
            let (a, b) = part.split_once('-').unwrap_or((part, part));
            let n = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("{part:?}: {e}"));
            Ok((n(a)?, n(b)?))
        })
        .collect::<Result<_, _>>()
        .map(RangeList)
}

fn parse_stat(text: &str) -> Result<RollingStat, String> {
    match text {
        "max" => Ok(RollingStat::Max),
        "mean" => Ok(RollingStat::Mean),
        _ => Err(format!("expected max or mean, got {text:?}")),
    }
}

/// Flags shared by the pipeline commands. Anything set here overrides the
/// config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with any RunConfig fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Registry name; also names the output subdirectory.
    #[arg(long)]
    pub dao: Option<String>,
    /// JSONL vote fixture.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, env = "DAO_RPC_URL")]
    pub rpc_url: Option<String>,
    /// Serve eth_getLogs from a recorded JSON trace instead of RPC.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Fork participants, one address per line.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub from_block: Option<u64>,
    #[arg(long)]
    pub to_block: Option<u64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub mds_max_iterations: Option<usize>,
    #[arg(long)]
    pub mds_tolerance: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Shuffle iterations for the baseline (seeds 0..n).
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Proposal ranges like `319-362,349-362`.
    #[arg(long, value_parser = parse_ranges)]
    pub ranges: Option<RangeList>,
    #[arg(long)]
    pub min_fork_present: Option<usize>,
    #[arg(long)]
    pub rolling_window: Option<usize>,
    /// `max` or `mean` rolling disagreement for the flag rule.
    #[arg(long, value_parser = parse_stat)]
    pub rolling_stat: Option<RollingStat>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = &self.$flag { c.$field = v.clone().into(); })*
            };
        }
        set!(
            dao => dao, fixture => fixture, rpc_url => rpc_url, replay => replay,
            registry => registry, ground_truth => ground_truth,
            from_block => from_block, to_block => to_block,
            window => window_size, threshold => participation_threshold,
            k_min => k_min, k_max => k_max,
            mds_max_iterations => mds_max_iterations, mds_tolerance => mds_tolerance,
            restarts => kmeans_restarts, iterations => iterations, seed => root_seed,
            ranges => ranges, min_fork_present => min_fork_present,
            rolling_window => rolling_window, rolling_stat => rolling_stat,
            out => output_dir, workers => workers,
        );
        c.check()?;
        Ok(c)
    }
}
