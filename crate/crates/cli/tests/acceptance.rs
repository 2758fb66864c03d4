//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use factions::cluster::{kmeans, KMeansConfig};
use factions::dissim::{active_set, dissimilarity_matrix, DissimilarityMatrix, WindowSpec};
use factions::embed::{mds_embed, warm_start, MdsConfig, Point};
use factions::friction::{static_disagreement, Category, Thresholds};
use factions::ingest::{load_fixture, load_ground_truth, Address, ForkGroundTruth};
use factions::matrix::VoterMatrix;
use factions::pipeline::{analyze, PipelineConfig};
use factions::seed::SeedStream;
use factions::synthetic::{generate, PlantedDao, PlantedSpec};
use factions::validate::{
    column_signature, fork_cluster_share, fork_distribution, run_validation_on, shuffle_votes, summarize_range,
    ValidationConfig,
};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(outcome: Outcome, elapsed: Duration, limit: Option<Duration>) -> Outcome {
    let secs = elapsed.as_secs_f64();
    match (outcome, limit) {
        (Outcome::Pass(d), Some(l)) if elapsed > l => {
            Outcome::Fail(format!("{d}; took {secs:.1}s, limit {}s", l.as_secs()))
        }
        (Outcome::Pass(d), _) => Outcome::Pass(format!("{d}; {secs:.1}s")),
        (Outcome::Fail(d), _) => Outcome::Fail(format!("{d}; {secs:.1}s")),
        (o, _) => o,
    }
}

fn addr(i: usize) -> Address {
    let mut b = [0u8; 20];
    b[0] = 0xac;
    b[19] = i as u8;
    Address(b)
}

/// Pair re-count straight from the definition: opposed / co-voted over the
/// window, 1 with no co-voted proposal.
fn recount(m: &VoterMatrix, window: &[u64], a: &Address, b: &Address) -> f64 {
    let (ra, rb) = (m.address_index(a).unwrap(), m.address_index(b).unwrap());
    let mut shared = 0usize;
    let mut opposed = 0usize;
    for p in window {
        let c = m.proposal_index(*p).unwrap();
        let (x, y) = (m.cell(ra, c), m.cell(rb, c));
        if x >= 0 && y >= 0 {
            shared += 1;
            if x != y {
                opposed += 1;
            }
        }
    }
    if shared == 0 {
        1.0
    } else {
        opposed as f64 / shared as f64
    }
}

fn criterion_1() -> Outcome {
    let mut rng = SeedStream::new(1);
    let mut compared = 0usize;
    let mut mismatches = 0usize;
    let mut built = 0usize;
    while built < 200 {
        let n = 1 + rng.below(10) as usize;
        let m = 1 + rng.below(10) as usize;
        let cells: Vec<i8> = (0..n * m).map(|_| rng.below(3) as i8 - 1).collect();
        let Ok(matrix) = VoterMatrix::from_cells((0..n).map(addr).collect(), (1..=m as u64).collect(), cells) else {
            continue;
        };
        built += 1;
        let spec = WindowSpec {
            window_size: 1 + rng.below(10) as usize,
            participation_threshold: [0.0, 0.2, 0.4, 0.6][rng.below(4) as usize],
        };
        for j in 2..=matrix.n_proposals() {
            let Ok(active) = active_set(&matrix, j, &spec) else {
                continue;
            };
            let d = dissimilarity_matrix(&matrix, &active).unwrap();
            for (i, a) in active.addresses.iter().enumerate() {
                for (k, b) in active.addresses.iter().enumerate() {
                    let expected = if i == k { 0.0 } else { recount(&matrix, &active.window, a, b) };
                    compared += 1;
                    if d.get(i, k) != expected {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    check(
        mismatches == 0 && compared > 0,
        format!("{built} matrices, {compared} cells compared, {mismatches} mismatches"),
    )
}

fn random_dissimilarity(n: usize, rng: &mut SeedStream) -> DissimilarityMatrix {
    let mut cells = vec![0.0; n * n];
    for i in 0..n {
        for k in i + 1..n {
            let v = rng.next_f64();
            cells[i * n + k] = v;
            cells[k * n + i] = v;
        }
    }
    DissimilarityMatrix::new(1, (0..n).map(addr).collect(), cells).unwrap()
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut steps = 0usize;
    for seed in 0..100u64 {
        let mut rng = SeedStream::new(1000 + seed);
        let n = 2 + rng.below(29) as usize;
        let d = random_dissimilarity(n, &mut rng);
        let init = warm_start(None, &d.addresses, seed);
        let e = mds_embed(&d, Some(&init), &MdsConfig { seed, ..MdsConfig::default() }).unwrap();
        for w in e.stress_history.windows(2) {
            worst = worst.max(w[1] - w[0]);
            steps += 1;
        }
    }
    check(
        worst <= 1e-12,
        format!("100 runs, {steps} iterations, largest increase {worst:e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut worst_gap = 0.0f64;
    let mut worst_stress = 0.0f64;
    for t in 1..=9 {
        let v = t as f64 / 10.0;
        let d = DissimilarityMatrix::new(1, vec![addr(0), addr(1)], vec![0.0, v, v, 0.0]).unwrap();
        let e = mds_embed(&d, None, &MdsConfig { seed: t, ..MdsConfig::default() }).unwrap();
        let dist = (e.coords[0][0] - e.coords[1][0]).hypot(e.coords[0][1] - e.coords[1][1]);
        worst_gap = worst_gap.max((dist - v).abs());
        worst_stress = worst_stress.max(e.stress);
    }
    check(
        worst_gap <= 1e-3 && worst_stress < 1e-6,
        format!("max |dist − d| {worst_gap:e}, max stress {worst_stress:e}"),
    )
}

/// Minimum WCSS over all partitions into exactly `k` non-empty groups.
fn partition_minimum(pts: &[Point], k: usize) -> f64 {
    let n = pts.len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    let total = k.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        let mut sum = vec![[0.0; 2]; k];
        let mut count = vec![0usize; k];
        for (p, &l) in pts.iter().zip(&labels) {
            sum[l][0] += p[0];
            sum[l][1] += p[1];
            count[l] += 1;
        }
        if count.contains(&0) {
            continue;
        }
        let w: f64 = pts
            .iter()
            .zip(&labels)
            .map(|(p, &l)| {
                let (mx, my) = (sum[l][0] / count[l] as f64, sum[l][1] / count[l] as f64);
                (p[0] - mx).powi(2) + (p[1] - my).powi(2)
            })
            .sum();
        best = best.min(w);
    }
    best
}

fn criterion_4() -> Outcome {
    let mut rng = SeedStream::new(4);
    let mut misses = Vec::new();
    for instance in 0..50u64 {
        let n = 3 + rng.below(6) as usize;
        let pts: Vec<Point> = (0..n).map(|_| [10.0 * rng.next_f64(), 10.0 * rng.next_f64()]).collect();
        for k in [2, 3] {
            let got = kmeans(&pts, k, instance, &KMeansConfig::default()).unwrap().wcss;
            let best = partition_minimum(&pts, k);
            if (got - best).abs() > 1e-9 * best.max(1.0) {
                misses.push(format!("instance {instance} k={k}: {got} vs {best}"));
            }
        }
    }
    check(
        misses.is_empty(),
        format!("100 (instance, k) pairs, {} above the exhaustive minimum {:?}", misses.len(), misses),
    )
}

fn planted() -> (PlantedDao, VoterMatrix) {
    let dao = generate(&PlantedSpec::default()).unwrap();
    let m = VoterMatrix::from_events(&dao.events).unwrap();
    (dao, m)
}

fn criterion_5() -> Outcome {
    let (dao, m) = planted();
    let a = analyze(&m, &PipelineConfig::default()).unwrap();
    let two = a.clusters.iter().filter(|c| c.k_star == 2).count();
    let rate = two as f64 / a.clusters.len() as f64;
    let tail = &a.clusters[a.clusters.len().saturating_sub(20)..];
    let shares: Vec<f64> = tail.iter().filter_map(|c| fork_cluster_share(c, &dao.minority, 1)).collect();
    let share = shares.iter().sum::<f64>() / shares.len() as f64;
    check(
        rate >= 0.8 && share >= 0.85 && shares.len() == 20,
        format!(
            "k*=2 on {two}/{} analyzable proposals ({rate:.3}), bloc share over final 20 = {share:.4}",
            a.clusters.len()
        ),
    )
}

fn criterion_6_and_7() -> (Outcome, Outcome) {
    let (dao, m) = planted();
    let cfg = ValidationConfig {
        iterations: 20,
        ..ValidationConfig::default()
    };
    let (report, _, _) = run_validation_on(&m, &dao.minority, &cfg).unwrap();
    let r = &report.ranges[0];
    let (g_share, r_share) = (r.fork_share.value.unwrap(), r.fork_share.rand_avg.unwrap());
    let (g_k, r_k) = (r.avg_clusters.value.unwrap(), r.avg_clusters.rand_avg.unwrap());
    let six = check(
        report.failed_seeds.is_empty() && g_share - r_share >= 0.2 && g_k < r_k,
        format!(
            "range {}-{}: bloc share {g_share:.4} vs shuffled {r_share:.4} (diff {:.4}), avg clusters {g_k:.3} vs {r_k:.3}, {} failed seeds",
            r.range.0,
            r.range.1,
            g_share - r_share,
            report.failed_seeds.len()
        ),
    );

    let before = column_signature(&m);
    let mut bad = Vec::new();
    for seed in &report.seeds {
        let after = column_signature(&shuffle_votes(&m, *seed));
        for (col, (x, y)) in before.iter().zip(&after).enumerate() {
            if x != y {
                bad.push((seed, col));
            }
        }
    }
    let seven = check(
        bad.is_empty() && report.seeds.len() == 20,
        format!(
            "{} seeds × {} columns, {} differing columns",
            report.seeds.len(),
            before.len(),
            bad.len()
        ),
    );
    (six, seven)
}

/// Column with `yes` yes votes and `no` no votes.
fn column(yes: usize, no: usize) -> VoterMatrix {
    let n = yes + no;
    let cells = (0..n).map(|i| if i < yes { 1 } else { 0 }).collect();
    VoterMatrix::from_cells((0..n).map(|i| {
        let mut b = [0u8; 20];
        b[18] = (i >> 8) as u8;
        b[19] = i as u8;
        Address(b)
    }).collect(), vec![1], cells)
    .unwrap()
}

fn criterion_8() -> Outcome {
    let t = Thresholds::default();
    let direct = [
        (0.0, Category::Unanimous),
        (0.199_999_999, Category::Low),
        (0.20, Category::Medium),
        (0.399_999_999, Category::Medium),
        (0.40, Category::High),
        (0.50, Category::High),
    ];
    let mut wrong = Vec::new();
    for (v, want) in direct {
        if t.categorize(v) != want {
            wrong.push(format!("{v} → {:?}", t.categorize(v)));
        }
    }
    // the same boundaries reached through vote columns
    let columns = [
        ((5, 0), 0.0, Category::Unanimous),
        ((801, 199), 0.199, Category::Low),
        ((4, 1), 0.2, Category::Medium),
        ((601, 399), 0.399, Category::Medium),
        ((3, 2), 0.4, Category::High),
        ((1, 1), 0.5, Category::High),
    ];
    for ((yes, no), value, want) in columns {
        let r = static_disagreement(&column(yes, no), 1, &t).unwrap();
        if r.disagreement != value || r.category != want {
            wrong.push(format!("{yes}/{no} → {} {:?}", r.disagreement, r.category));
        }
    }
    check(wrong.is_empty(), format!("12 boundary cases, wrong: {wrong:?}"))
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_factions"))
            .arg("all")
            .arg("--dao")
            .arg("planted")
            .arg("--fixture")
            .arg(fixtures.join("planted.jsonl"))
            .arg("--ground-truth")
            .arg(fixtures.join("planted-fork.txt"))
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        if !status.status.success() {
            return Outcome::Fail(format!("run {run} failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        trees.push(tree(&out));
    }
    let differing: Vec<&PathBuf> = trees[0]
        .iter()
        .filter(|(p, bytes)| trees[1].get(*p) != Some(bytes))
        .map(|(p, _)| p)
        .collect();
    check(
        differing.is_empty() && trees[0].len() == trees[1].len() && !trees[0].is_empty(),
        format!("{} files per run, {} differ", trees[0].len(), differing.len()),
    )
}

fn criterion_10() -> Outcome {
    let (Ok(fixture), Ok(fork)) = (std::env::var("FACTIONS_NOUNS_FIXTURE"), std::env::var("FACTIONS_NOUNS_FORK")) else {
        return Outcome::Skip("set FACTIONS_NOUNS_FIXTURE and FACTIONS_NOUNS_FORK to run the chain-data tier".into());
    };
    let events = load_fixture(Path::new(&fixture)).unwrap().events;
    let fork: ForkGroundTruth = load_ground_truth(Path::new(&fork)).unwrap();
    let m = VoterMatrix::from_events(&events).unwrap();
    let a = analyze(&m, &PipelineConfig::default()).unwrap();
    let shape = (m.n_addresses(), m.n_proposals());
    let (k334, largest, active) = match a.cluster(334) {
        Some(c) => {
            let counts = fork_distribution(c, &fork);
            (c.k_star, counts[0], counts.iter().sum::<usize>())
        }
        None => (0, 0, 0),
    };
    let share = summarize_range(&a.clusters, &fork, (319, 362), 1)
        .ok()
        .and_then(|s| s.fork_share);
    check(
        shape == (629, 330) && k334 == 2 && largest >= 14 && share.is_some_and(|s| (s - 0.9096).abs() <= 0.05),
        format!(
            "matrix {}×{}, proposal 334: k*={k334}, {largest}/{active} fork addresses together, 319–362 share {share:?}",
            shape.0, shape.1
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {n:>2} {name}: {detail}");
    };
    let timed = |f: &dyn Fn() -> Outcome, limit: Option<u64>| {
        let start = Instant::now();
        let o = f();
        within(o, start.elapsed(), limit.map(Duration::from_secs))
    };

    report(1, "dissimilarity oracle", timed(&criterion_1, Some(5)));
    report(2, "stress monotonicity", timed(&criterion_2, Some(30)));
    report(3, "two-point MDS exactness", timed(&criterion_3, None));
    report(4, "k-means exhaustive oracle", timed(&criterion_4, Some(10)));
    report(5, "planted-partition recovery", timed(&criterion_5, Some(60)));
    let start = Instant::now();
    let (six, seven) = criterion_6_and_7();
    let elapsed = start.elapsed();
    report(6, "shuffle differential", within(six, elapsed, Some(Duration::from_secs(600))));
    report(7, "shuffle preservation", seven);
    report(8, "friction category boundaries", timed(&criterion_8, None));
    report(9, "end-to-end determinism", timed(&criterion_9, None));
    report(10, "chain-data tier", timed(&criterion_10, None));

    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
