use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use factions::friction::{FlagRule, FrictionReport, Thresholds};
use factions::ingest::{
    fetch_logs, load_fixture, load_ground_truth, write_fixture, FetchOptions, ForkGroundTruth, HttpTransport,
    LogTransport, Registry, ReplayTransport, VoteEvent,
};
use factions::matrix::VoterMatrix;
use factions::pipeline::{analyze, Analysis};
use factions::report::{self, render_chart, render_mds_scatter, ChartKind, ChartSpec, ScatterLabels, Series};
use factions::synthetic::{generate, PlantedSpec};
use factions::validate::{run_validation_on, write_fork_share_csv, Iteration, ValidationReport};

use crate::config::RunConfig;
use crate::error::{io, CliError};

pub const FIXTURE_NAME: &str = "fixture.jsonl";

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io(path))?))
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut out = create(path)?;
    f(&mut out).and_then(|_| out.flush()).map_err(io(path))
}

fn registry(config: &RunConfig) -> Result<Registry, CliError> {
    Ok(match &config.registry {
        Some(p) => Registry::load(p)?,
        None => Registry::bundled(),
    })
}

/// Fetches vote events over RPC (or a replay trace) into `<out>/<dao>/fixture.jsonl`.
pub fn cmd_ingest(config: &RunConfig) -> Result<PathBuf, CliError> {
    let name = config.dao()?;
    let reg = registry(config)?;
    let entry = reg
        .get(name)
        .ok_or_else(|| CliError::Config(format!("{name} is not in the registry")))?;
    let transport: Box<dyn LogTransport> = match (&config.replay, &config.rpc_url) {
        (Some(trace), _) => {
            let text = fs::read_to_string(trace).map_err(|_| CliError::MissingArtifact {
                path: trace.clone(),
                hint: "replay trace".into(),
            })?;
            Box::new(ReplayTransport::from_trace(&text)?)
        }
        (None, Some(url)) => Box::new(HttpTransport::new(url.clone())),
        (None, None) => return Err(CliError::Config("ingest needs --rpc-url, DAO_RPC_URL or --replay".into())),
    };
    let range = (
        config.from_block.unwrap_or(entry.deploy_block),
        config.to_block.unwrap_or(entry.end_block),
    );
    let events = fetch_logs(transport.as_ref(), entry, range, &FetchOptions::default())?;
    let path = config.dao_dir()?.join(FIXTURE_NAME);
    write_with(&path, |out| write_fixture(&events, out))?;
    println!("ingest: {} events for {name} -> {}", events.len(), path.display());
    Ok(path)
}

fn load_events(config: &RunConfig) -> Result<Vec<VoteEvent>, CliError> {
    let path = match &config.fixture {
        Some(p) => p.clone(),
        None => config.dao_dir()?.join(FIXTURE_NAME),
    };
    if !path.exists() {
        return Err(CliError::MissingArtifact {
            path,
            hint: "pass --fixture or run `factions ingest` first".into(),
        });
    }
    let load = load_fixture(&path)?;
    if !load.duplicates.is_empty() {
        eprintln!(
            "note: {} duplicate (voter, proposal) pairs resolved to the latest vote",
            load.duplicates.len()
        );
    }
    Ok(load.events)
}

fn load_fork(config: &RunConfig, required: bool) -> Result<Option<ForkGroundTruth>, CliError> {
    match &config.ground_truth {
        Some(p) if p.exists() => Ok(Some(load_ground_truth(p)?)),
        Some(p) => Err(CliError::MissingArtifact {
            path: p.clone(),
            hint: "ground-truth address list".into(),
        }),
        None if required => Err(CliError::Config("validate needs --ground-truth".into())),
        None => Ok(None),
    }
}

pub fn cmd_friction(config: &RunConfig) -> Result<FrictionReport, CliError> {
    let events = load_events(config)?;
    let matrix = VoterMatrix::from_events(&events)?;
    write_friction(config, &matrix)
}

fn write_friction(config: &RunConfig, matrix: &VoterMatrix) -> Result<FrictionReport, CliError> {
    let dir = config.dao_dir()?;
    let rule = FlagRule {
        rolling_stat: config.rolling_stat,
        ..FlagRule::default()
    };
    let report = FrictionReport::from_matrix(config.dao()?, matrix, &Thresholds::default(), config.rolling_window, &rule);
    write_with(&dir.join("matrix.csv"), |out| matrix.write_csv(out))?;
    write_with(&dir.join("friction.csv"), |out| report.write_csv(out))?;
    write_with(&dir.join("friction.json"), |out| {
        serde_json::to_writer_pretty(&mut *out, &report)?;
        writeln!(out)
    })?;
    render_chart(&report::rolling_chart(&report), &dir.join("charts/disagreement.svg"))?;
    render_chart(&report::friction_chart(std::slice::from_ref(&report)), &dir.join("charts/categories.svg"))?;
    println!(
        "friction: {} proposals, medium+high {:.3}, flagged {}",
        report.records.len(),
        report.category_shares.medium + report.category_shares.high,
        report.flagged
    );
    Ok(report)
}

pub fn cmd_analyze(config: &RunConfig) -> Result<Analysis, CliError> {
    let events = load_events(config)?;
    let fork = load_fork(config, false)?;
    let matrix = VoterMatrix::from_events(&events)?;
    let analysis = analyze(&matrix, &config.pipeline())?;
    write_analysis(config, &analysis, fork.as_ref())?;
    Ok(analysis)
}

fn write_analysis(config: &RunConfig, a: &Analysis, fork: Option<&ForkGroundTruth>) -> Result<(), CliError> {
    let dir = config.dao_dir()?;
    for d in &a.dissimilarities {
        write_with(&dir.join(format!("dissim/{}.csv", d.proposal_id)), |out| d.write_csv(out))?;
    }
    write_with(&dir.join("embeddings.csv"), |out| {
        writeln!(out, "address,x,y,proposal_id")?;
        a.embeddings.iter().try_for_each(|e| e.write_csv_rows(out))
    })?;
    write_with(&dir.join("embedding-stats.csv"), |out| {
        writeln!(out, "proposal_id,addresses,stress,iterations,seed")?;
        for e in &a.embeddings {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.proposal_id,
                e.addresses.len(),
                e.stress,
                e.iterations_used,
                e.seed
            )?;
        }
        Ok(())
    })?;
    write_with(&dir.join("clusters.csv"), |out| {
        writeln!(out, "proposal_id,address,cluster,k_star,silhouette_mean")?;
        a.clusters.iter().try_for_each(|c| c.write_csv_rows(out))
    })?;
    write_with(&dir.join("silhouette.csv"), |out| {
        writeln!(out, "proposal_id,k,silhouette")?;
        for c in &a.clusters {
            for (k, s) in &c.silhouette_by_k {
                writeln!(out, "{},{k},{s}", c.proposal_id)?;
            }
        }
        Ok(())
    })?;
    write_with(&dir.join("skipped.csv"), |out| {
        writeln!(out, "proposal_id,reason")?;
        for s in &a.skipped {
            writeln!(out, "{},\"{}\"", s.proposal_id, s.reason.replace('"', "'"))?;
        }
        Ok(())
    })?;
    for e in &a.embeddings {
        if let Some(f) = fork {
            render_mds_scatter(e, &ScatterLabels::Fork(f), &dir.join(format!("mds/{}.svg", e.proposal_id)))?;
        }
        if let Some(c) = a.cluster(e.proposal_id) {
            render_mds_scatter(
                e,
                &ScatterLabels::Clusters(c),
                &dir.join(format!("mds/{}-clusters.svg", e.proposal_id)),
            )?;
            render_chart(
                &report::silhouette_chart(c),
                &dir.join(format!("charts/silhouette/{}.svg", c.proposal_id)),
            )?;
        }
    }
    render_chart(&report::k_star_chart(&a.clusters), &dir.join("charts/k-star.svg"))?;
    if let Some(f) = fork {
        write_with(&dir.join("fork_share.csv"), |out| {
            write_fork_share_csv(&a.clusters, f, config.k_max, out)
        })?;
        render_chart(
            &report::fork_spread_chart(&a.clusters, f, config.k_max),
            &dir.join("charts/fork-spread.svg"),
        )?;
    }
    println!(
        "analyze: {} embeddings, {} clusterings, {} skipped",
        a.embeddings.len(),
        a.clusters.len(),
        a.skipped.len()
    );
    Ok(())
}

fn validation_chart(report: &ValidationReport) -> ChartSpec {
    let mut spec = ChartSpec::new(
        ChartKind::Bar,
        "Fork addresses in one cluster: genuine vs shuffled",
        "proposal range",
        "mean share",
    );
    spec.categories = report.ranges.iter().map(|r| format!("{}-{}", r.range.0, r.range.1)).collect();
    let pick = |f: fn(&factions::validate::MetricRow) -> Option<f64>| {
        report.ranges.iter().map(|r| f(&r.fork_share).unwrap_or(0.0)).collect()
    };
    spec.series = vec![
        Series {
            name: "genuine".into(),
            x: Vec::new(),
            y: pick(|m| m.value),
        },
        Series {
            name: "shuffled mean".into(),
            x: Vec::new(),
            y: pick(|m| m.rand_avg),
        },
    ];
    spec
}

fn write_validation(
    config: &RunConfig,
    report: &ValidationReport,
    iterations: &[Iteration],
) -> Result<(), CliError> {
    let dir = config.dao_dir()?;
    write_with(&dir.join("validation.json"), |out| {
        serde_json::to_writer_pretty(&mut *out, report)?;
        writeln!(out)
    })?;
    write_with(&dir.join("validation-iterations.csv"), |out| {
        writeln!(out, "seed,range_start,range_end,avg_clusters,fork_share")?;
        for it in iterations {
            for s in &it.summaries {
                let share = s.fork_share.map(|v| v.to_string()).unwrap_or_default();
                writeln!(out, "{},{},{},{},{share}", it.seed, s.range.0, s.range.1, s.avg_clusters)?;
            }
        }
        Ok(())
    })?;
    render_chart(&validation_chart(report), &dir.join("charts/validation.svg"))?;
    for r in &report.ranges {
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "validate {}-{}: clusters {} (shuffled {}), fork share {} (shuffled {})",
            r.range.0,
            r.range.1,
            fmt(r.avg_clusters.value),
            fmt(r.avg_clusters.rand_avg),
            fmt(r.fork_share.value),
            fmt(r.fork_share.rand_avg)
        );
    }
    if !report.failed_seeds.is_empty() {
        eprintln!("note: {} shuffle iterations failed", report.failed_seeds.len());
    }
    Ok(())
}

fn validate_matrix(
    config: &RunConfig,
    matrix: &VoterMatrix,
    fork: &ForkGroundTruth,
) -> Result<(ValidationReport, Analysis), CliError> {
    let (report, genuine, iterations) = run_validation_on(matrix, fork, &config.validation())?;
    write_validation(config, &report, &iterations)?;
    Ok((report, genuine))
}

pub fn cmd_validate(config: &RunConfig) -> Result<ValidationReport, CliError> {
    let events = load_events(config)?;
    let fork = load_fork(config, true)?.expect("required");
    let matrix = VoterMatrix::from_events(&events)?;
    Ok(validate_matrix(config, &matrix, &fork)?.0)
}

/// Friction, analysis and (with ground truth) validation in one pass.
pub fn cmd_all(config: &RunConfig) -> Result<(), CliError> {
    let events = load_events(config)?;
    let fork = load_fork(config, false)?;
    let matrix = VoterMatrix::from_events(&events)?;
    write_friction(config, &matrix)?;
    let analysis = match &fork {
        Some(f) => validate_matrix(config, &matrix, f)?.1,
        None => analyze(&matrix, &config.pipeline())?,
    };
    write_analysis(config, &analysis, fork.as_ref())
}

/// Stacked category bars across every `<out>/*/friction.json`.
pub fn cmd_compare(output_dir: &Path) -> Result<PathBuf, CliError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(output_dir)
        .map_err(io(output_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("friction.json").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::MissingArtifact {
            path: output_dir.join("*/friction.json"),
            hint: "run `factions friction` for at least one DAO".into(),
        });
    }
    let reports = dirs
        .iter()
        .map(|d| {
            let path = d.join("friction.json");
            let text = fs::read_to_string(&path).map_err(io(&path))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<FrictionReport>, CliError>>()?;
    let path = output_dir.join("friction-categories.svg");
    render_chart(&report::friction_chart(&reports), &path)?;
    for r in &reports {
        println!("{}: flagged {}", r.dao_name, r.flagged);
    }
    Ok(path)
}

/// Writes the planted two-bloc fixture and its minority-bloc address list.
pub fn cmd_synth(spec: &PlantedSpec, fixture: &Path, ground_truth: &Path) -> Result<(), CliError> {
    let dao = generate(spec).map_err(CliError::Config)?;
    write_with(fixture, |out| write_fixture(&dao.events, out))?;
    write_with(ground_truth, |out| {
        writeln!(out, "# minority bloc of the planted two-bloc fixture (seed {})", spec.seed)?;
        dao.minority.addresses.iter().try_for_each(|a| writeln!(out, "{a}"))
    })?;
    println!(
        "synth: {} events, {} planted addresses -> {}",
        dao.events.len(),
        dao.minority.len(),
        fixture.display()
    );
    Ok(())
}
