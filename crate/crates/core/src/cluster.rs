//! k-means on embedded coordinates, with k chosen by mean silhouette.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{Embedding, Point};
use crate::ingest::Address;
use crate::seed::{derive_seed, SeedStream};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("{labels} labels for {points} points")]
    LabelMismatch { labels: usize, points: usize },
    #[error("non-finite coordinates")]
    NonFinite,
    #[error("invalid k range [{k_min}, {k_max}]")]
    InvalidRange { k_min: usize, k_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iterations: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Labels in `[0, k)`, numbered by first appearance.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Point>,
    pub wcss: f64,
    /// WCSS after each Lloyd iteration and transfer of the winning restart.
    pub wcss_history: Vec<f64>,
}

fn sq(a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

fn nearest(p: &Point, centroids: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, q) in centroids.iter().enumerate() {
        let d = sq(p, q);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Within-cluster sum of squared distances to the given centroids.
pub fn wcss(coords: &[Point], assignments: &[usize], centroids: &[Point]) -> f64 {
    coords.iter().zip(assignments).map(|(p, &c)| sq(p, &centroids[c])).sum()
}

fn means(coords: &[Point], assignments: &[usize], k: usize) -> Vec<Point> {
    let mut sums = vec![[0.0; 2]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in coords.iter().zip(assignments) {
        sums[c][0] += p[0];
        sums[c][1] += p[1];
        counts[c] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &n)| [s[0] / n as f64, s[1] / n as f64])
        .collect()
}

fn plus_plus(coords: &[Point], k: usize, rng: &mut SeedStream) -> Vec<Point> {
    let n = coords.len();
    let mut centroids = vec![coords[rng.below(n as u64) as usize]];
    let mut d2: Vec<f64> = coords.iter().map(|p| sq(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc > target {
                    chosen = i;
                    break;
                }
            }
            // guard against rounding landing on a zero-weight tail point
            while d2[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.below(n as u64) as usize
        };
        let c = coords[pick];
        for (p, d) in coords.iter().zip(d2.iter_mut()) {
            *d = d.min(sq(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Moves the farthest member of a multi-point cluster into each empty one.
fn fill_empty(coords: &[Point], assignments: &mut [usize], centroids: &[Point], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignments.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = f64::NEG_INFINITY;
        for (i, (p, &c)) in coords.iter().zip(assignments.iter()).enumerate() {
            if counts[c] > 1 {
                let d = sq(p, &centroids[c]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        assignments[far.expect("k <= n leaves a cluster with two members")] = empty;
    }
}

fn lloyd(coords: &[Point], k: usize, seed: u64, max_iterations: usize) -> KMeansResult {
    let mut rng = SeedStream::new(seed);
    let mut centroids = plus_plus(coords, k, &mut rng);
    let mut assignments: Vec<usize> = coords.iter().map(|p| nearest(p, &centroids)).collect();
    let mut history = Vec::new();
    for it in 0..max_iterations {
        if it > 0 {
            let next: Vec<usize> = coords.iter().map(|p| nearest(p, &centroids)).collect();
            if next == assignments {
                break;
            }
            assignments = next;
        }
        fill_empty(coords, &mut assignments, &centroids, k);
        centroids = means(coords, &assignments, k);
        history.push(wcss(coords, &assignments, &centroids));
    }
    hartigan(coords, &mut assignments, &mut centroids, &mut history);
    KMeansResult {
        wcss: *history.last().unwrap_or(&wcss(coords, &assignments, &centroids)),
        assignments,
        centroids,
        wcss_history: history,
    }
}

/// Single-point transfers: moving `x` from cluster `a` to `b` lowers WCSS
/// iff `n_b/(n_b+1)·‖x−μ_b‖² < n_a/(n_a−1)·‖x−μ_a‖²`. Repeats until no
/// transfer helps, which also leaves a Lloyd fixed point.
fn hartigan(coords: &[Point], assignments: &mut [usize], centroids: &mut [Point], history: &mut Vec<f64>) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &c in assignments.iter() {
        counts[c] += 1;
    }
    let mut moved = true;
    while moved {
        moved = false;
        for (i, p) in coords.iter().enumerate() {
            let a = assignments[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let removal = na / (na - 1.0) * sq(p, &centroids[a]);
            let mut best = None;
            let mut best_cost = removal;
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let cost = nb / (nb + 1.0) * sq(p, &centroids[b]);
                // relative margin keeps rounding noise from cycling
                if cost < best_cost * (1.0 - 1e-12) {
                    best = Some(b);
                    best_cost = cost;
                }
            }
            if let Some(b) = best {
                assignments[i] = b;
                counts[a] -= 1;
                counts[b] += 1;
                let fresh = means(coords, assignments, k);
                centroids[a] = fresh[a];
                centroids[b] = fresh[b];
                history.push(wcss(coords, assignments, centroids));
                moved = true;
            }
        }
    }
}

fn canonicalize(mut r: KMeansResult) -> KMeansResult {
    let k = r.centroids.len();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &c in &r.assignments {
        if map[c] == usize::MAX {
            map[c] = next;
            next += 1;
        }
    }
    let mut centroids = vec![[0.0; 2]; k];
    for (old, &new) in map.iter().enumerate() {
        centroids[new] = r.centroids[old];
    }
    for c in r.assignments.iter_mut() {
        *c = map[*c];
    }
    r.centroids = centroids;
    r
}

fn check_finite(coords: &[Point]) -> Result<(), ClusterError> {
    if coords.iter().flatten().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ClusterError::NonFinite)
    }
}

/// Best of `config.restarts` k-means++ / Lloyd runs (each polished by
/// single-point transfers) by WCSS. Restart `r`
/// draws from `derive_seed(seed, [r])`; ties keep the earliest restart.
pub fn kmeans(coords: &[Point], k: usize, seed: u64, config: &KMeansConfig) -> Result<KMeansResult, ClusterError> {
    if k == 0 || k > coords.len() {
        return Err(ClusterError::TooFewPoints {
            needed: k.max(1),
            got: coords.len(),
        });
    }
    check_finite(coords)?;
    let best = (0..config.restarts.max(1) as u64)
        .map(|r| lloyd(coords, k, derive_seed(seed, &[r]), config.max_iterations.max(1)))
        .reduce(|best, cand| if cand.wcss < best.wcss { cand } else { best })
        .expect("at least one restart");
    Ok(canonicalize(best))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    pub per_point: Vec<f64>,
    pub mean: f64,
}

/// `s(i) = (b − a) / max(a, b)` with Euclidean distances. Members of
/// singleton clusters score 0, as do points where `a = b = 0`.
pub fn silhouette(coords: &[Point], assignments: &[usize]) -> Result<Silhouette, ClusterError> {
    if coords.len() != assignments.len() {
        return Err(ClusterError::LabelMismatch {
            labels: assignments.len(),
            points: coords.len(),
        });
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &c in assignments {
        sizes[c] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(ClusterError::SingleCluster);
    }
    let per_point: Vec<f64> = coords
        .iter()
        .zip(assignments)
        .map(|(p, &own)| {
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (q, &c) in coords.iter().zip(assignments) {
                sums[c] += sq(p, q).sqrt();
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    let mean = per_point.iter().sum::<f64>() / per_point.len() as f64;
    Ok(Silhouette { per_point, mean })
}

/// Outcome of the k sweep on one set of coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k_star: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Point>,
    pub silhouette_by_k: BTreeMap<usize, f64>,
}

/// Runs k-means for each k in `[k_min, min(k_max, n)]` (seeded with
/// `derive_seed(seed, [k])`) and keeps the k with the highest mean
/// silhouette, preferring the smaller k on ties.
pub fn select_k(
    coords: &[Point],
    k_min: usize,
    k_max: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<KSelection, ClusterError> {
    let n = coords.len();
    if k_min < 2 || k_max < k_min {
        return Err(ClusterError::InvalidRange { k_min, k_max });
    }
    if n < k_min {
        return Err(ClusterError::TooFewPoints { needed: k_min, got: n });
    }
    let k_hi = k_max.min(n);
    let runs: Vec<(usize, KMeansResult, f64)> = (k_min..=k_hi)
        .into_par_iter()
        .map(|k| {
            let r = kmeans(coords, k, derive_seed(seed, &[k as u64]), config)?;
            let s = silhouette(coords, &r.assignments)?;
            Ok((k, r, s.mean))
        })
        .collect::<Result<_, ClusterError>>()?;
    let silhouette_by_k = runs.iter().map(|(k, _, s)| (*k, *s)).collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.2 > runs[best].2 {
            best = i;
        }
    }
    let (k_star, r, _) = runs.into_iter().nth(best).expect("non-empty sweep");
    Ok(KSelection {
        k_star,
        assignments: r.assignments,
        centroids: r.centroids,
        silhouette_by_k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub proposal_id: u64,
    pub addresses: Vec<Address>,
    pub assignments: Vec<usize>,
    pub k_star: usize,
    pub silhouette_by_k: BTreeMap<usize, f64>,
    pub centroids: Vec<Point>,
    pub seed: u64,
}

impl ClusteringResult {
    pub fn silhouette_mean(&self) -> f64 {
        self.silhouette_by_k[&self.k_star]
    }

    /// CSV rows `proposal_id,address,cluster,k_star,silhouette_mean` (no header).
    pub fn write_csv_rows<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let s = self.silhouette_mean();
        for (a, c) in self.addresses.iter().zip(&self.assignments) {
            writeln!(out, "{},{a},{c},{},{s}", self.proposal_id, self.k_star)?;
        }
        Ok(())
    }
}

/// [`select_k`] on an embedding's coordinates.
pub fn cluster_embedding(
    embedding: &Embedding,
    k_min: usize,
    k_max: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<ClusteringResult, ClusterError> {
    let sel = select_k(&embedding.coords, k_min, k_max, seed, config)?;
    Ok(ClusteringResult {
        proposal_id: embedding.proposal_id,
        addresses: embedding.addresses.clone(),
        assignments: sel.assignments,
        k_star: sel.k_star,
        silhouette_by_k: sel.silhouette_by_k,
        centroids: sel.centroids,
        seed,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Minimum WCSS over every partition of the points into exactly `k`
    /// non-empty groups.
    pub(crate) fn exhaustive_wcss(coords: &[Point], k: usize) -> f64 {
        fn rec(coords: &[Point], k: usize, i: usize, labels: &mut Vec<usize>, used: usize, best: &mut f64) {
            if coords.len() - i < k - used {
                return;
            }
            if i == coords.len() {
                let c = means(coords, labels, k);
                *best = best.min(wcss(coords, labels, &c));
                return;
            }
            // restricted growth strings enumerate each set partition once
            for c in 0..=used.min(k - 1) {
                labels.push(c);
                rec(coords, k, i + 1, labels, used.max(c + 1), best);
                labels.pop();
            }
        }
        let mut best = f64::INFINITY;
        rec(coords, k, 0, &mut Vec::new(), 0, &mut best);
        best
    }

    pub(crate) fn blobs(centers: &[Point], per: usize, radius: f64, seed: u64) -> Vec<Point> {
        let mut rng = SeedStream::new(seed);
        let mut out = Vec::new();
        for c in centers {
            for _ in 0..per {
                let angle = std::f64::consts::TAU * rng.next_f64();
                let r = radius * rng.next_f64();
                out.push([c[0] + r * angle.cos(), c[1] + r * angle.sin()]);
            }
        }
        out
    }

    fn cfg() -> KMeansConfig {
        KMeansConfig::default()
    }

    #[test]
    fn duplicate_pairs() {
        let pts = [[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0]];
        let r = kmeans(&pts, 2, 1, &cfg()).unwrap();
        assert_eq!(r.assignments, vec![0, 0, 1, 1]);
        assert_eq!(r.wcss, 0.0);
    }

    #[test]
    fn line_split_matches_oracle() {
        let pts: Vec<Point> = [0.0, 1.0, 2.0, 10.0, 11.0].iter().map(|&x| [x, 0.0]).collect();
        let r = kmeans(&pts, 2, 3, &cfg()).unwrap();
        assert_eq!(r.assignments, vec![0, 0, 0, 1, 1]);
        let oracle = exhaustive_wcss(&pts, 2);
        assert!((r.wcss - oracle).abs() < 1e-12);
        assert!((oracle - 2.5).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [3.0, 3.0]];
        let r = kmeans(&pts, 4, 0, &cfg()).unwrap();
        assert_eq!(r.assignments, vec![0, 1, 2, 3]);
        assert_eq!(r.wcss, 0.0);
        assert_eq!(
            kmeans(&pts, 5, 0, &cfg()),
            Err(ClusterError::TooFewPoints { needed: 5, got: 4 })
        );
    }

    #[test]
    fn identical_points_never_leave_a_cluster_empty() {
        let pts = [[1.0, 1.0]; 6];
        let r = kmeans(&pts, 3, 7, &cfg()).unwrap();
        let mut seen = r.assignments.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen, vec![0, 1, 2]);
        let s = silhouette(&pts, &r.assignments).unwrap();
        assert!(s.per_point.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn silhouette_of_separated_blobs() {
        let pts = blobs(&[[0.0, 0.0], [10.0, 0.0]], 10, 0.5, 2);
        let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
        let s = silhouette(&pts, &labels).unwrap();
        assert!(s.mean > 0.9, "{}", s.mean);
        assert_eq!(silhouette(&pts, &[0; 20]), Err(ClusterError::SingleCluster));
        assert!(matches!(silhouette(&pts, &[0, 1]), Err(ClusterError::LabelMismatch { .. })));
    }

    #[test]
    fn silhouette_hand_value() {
        // a(0) = 1, b(0) = mean(4, 5) = 4.5 → s = 3.5 / 4.5
        let pts = [[0.0, 0.0], [1.0, 0.0], [4.0, 0.0], [5.0, 0.0]];
        let s = silhouette(&pts, &[0, 0, 1, 1]).unwrap();
        assert!((s.per_point[0] - 3.5 / 4.5).abs() < 1e-12);
        // singleton cluster scores zero
        let s = silhouette(&pts, &[0, 0, 0, 1]).unwrap();
        assert_eq!(s.per_point[3], 0.0);
    }

    #[test]
    fn blobs_beat_uniform_noise() {
        let planted = blobs(&[[0.0, 0.0], [10.0, 0.0], [5.0, 8.0]], 8, 1.0, 5);
        let mut rng = SeedStream::new(5);
        let noise: Vec<Point> = (0..24).map(|_| [10.0 * rng.next_f64(), 10.0 * rng.next_f64()]).collect();
        let a = select_k(&planted, 2, 5, 1, &cfg()).unwrap();
        let b = select_k(&noise, 2, 5, 1, &cfg()).unwrap();
        assert!(a.silhouette_by_k[&a.k_star] > b.silhouette_by_k[&b.k_star]);
    }

    #[test]
    fn select_k_recovers_planted_blobs() {
        for seed in 0..5 {
            let two = blobs(&[[0.0, 0.0], [10.0, 0.0]], 12, 1.0, seed);
            assert_eq!(select_k(&two, 2, 5, seed, &cfg()).unwrap().k_star, 2);
            let four = blobs(&[[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]], 8, 1.0, seed);
            let sel = select_k(&four, 2, 5, seed, &cfg()).unwrap();
            assert_eq!(sel.k_star, 4);
            assert_eq!(sel.silhouette_by_k.keys().copied().collect::<Vec<_>>(), vec![2, 3, 4, 5]);
        }
    }

    #[test]
    fn select_k_clamps_and_validates() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [9.0, 0.0]];
        let sel = select_k(&pts, 2, 5, 0, &cfg()).unwrap();
        assert_eq!(sel.silhouette_by_k.len(), 2);
        assert!(matches!(
            select_k(&pts[..1], 2, 5, 0, &cfg()),
            Err(ClusterError::TooFewPoints { .. })
        ));
        assert!(matches!(select_k(&pts, 3, 2, 0, &cfg()), Err(ClusterError::InvalidRange { .. })));
    }

    #[test]
    fn ties_prefer_smaller_k() {
        // all coincident: every k scores 0
        let pts = [[2.0, 2.0]; 7];
        assert_eq!(select_k(&pts, 2, 5, 0, &cfg()).unwrap().k_star, 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig {
            cases: 64,
            rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
            ..ProptestConfig::default()
        })]
        #[test]
        fn small_instances_hit_the_exhaustive_minimum(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..9),
            k in 2usize..4,
            seed in any::<u64>(),
        ) {
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            prop_assume!(k <= pts.len());
            let r = kmeans(&pts, k, seed, &cfg()).unwrap();
            let oracle = exhaustive_wcss(&pts, k);
            prop_assert!((r.wcss - oracle).abs() <= 1e-9 * oracle.max(1.0), "{} vs {}", r.wcss, oracle);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn wcss_history_never_increases(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            prop_assume!(k <= pts.len());
            for r in 0..3 {
                let run = lloyd(&pts, k, derive_seed(seed, &[r]), 300);
                for w in run.wcss_history.windows(2) {
                    prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{} -> {}", w[0], w[1]);
                }
            }
        }

        #[test]
        fn silhouette_in_range(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..30),
            seed in any::<u64>(),
        ) {
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let sel = select_k(&pts, 2, 5, seed, &cfg()).unwrap();
            let s = silhouette(&pts, &sel.assignments).unwrap();
            prop_assert!(s.per_point.iter().all(|v| (-1.0..=1.0).contains(v)));
            prop_assert_eq!(sel.assignments.iter().max().unwrap() + 1, sel.k_star);
        }

        #[test]
        fn select_k_is_reorder_invariant_on_blobs(seed in 0u64..1000, rot in 1usize..23) {
            let pts = blobs(&[[0.0, 0.0], [10.0, 0.0], [5.0, 9.0]], 8, 1.0, seed);
            let a = select_k(&pts, 2, 5, 11, &cfg()).unwrap();
            let mut moved = pts.clone();
            moved.rotate_left(rot);
            let b = select_k(&moved, 2, 5, 11, &cfg()).unwrap();
            prop_assert_eq!(a.k_star, b.k_star);
            // same partition up to labels
            let n = pts.len();
            for i in 0..n {
                for j in 0..n {
                    let same_a = a.assignments[i] == a.assignments[j];
                    let same_b = b.assignments[(i + n - rot) % n] == b.assignments[(j + n - rot) % n];
                    prop_assert_eq!(same_a, same_b);
                }
            }
        }
    }
}
