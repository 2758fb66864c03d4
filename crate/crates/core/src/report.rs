//! Static SVG charts. Each chart is written next to a CSV holding every
//! plotted value.
//!
//! Palette: forkers are red `#d62728`, stayers blue `#1f77b4`; other series
//! cycle through [`PALETTE`] unless `color_map` names them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusteringResult;
use crate::embed::Embedding;
use crate::friction::{Category, FrictionReport};
use crate::ingest::ForkGroundTruth;
use crate::validate::fork_distribution;

pub const FORK_COLOR: &str = "#d62728";
pub const STAY_COLOR: &str = "#1f77b4";
pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("inconsistent series: {0}")]
    InconsistentSeries(String),
    #[error("{labels} labels for {points} embedded addresses")]
    LabelMismatch { labels: usize, points: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    StackedBar,
    Line,
    Scatter,
    StackedArea,
    Bar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    /// Unused by the bar kinds, which index by `categories`.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub categories: Vec<String>,
    pub series: Vec<Series>,
    pub color_map: BTreeMap<String, String>,
}

impl ChartSpec {
    pub fn new(kind: ChartKind, title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            kind,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            categories: Vec::new(),
            series: Vec::new(),
            color_map: BTreeMap::new(),
        }
    }

    fn color(&self, i: usize) -> &str {
        self.color_map
            .get(&self.series[i].name)
            .map(String::as_str)
            .unwrap_or(PALETTE[i % PALETTE.len()])
    }

    fn is_empty(&self) -> bool {
        self.series.iter().all(|s| s.y.is_empty())
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |m: String| Err(ReportError::InconsistentSeries(m));
        for s in &self.series {
            if s.x.iter().chain(&s.y).any(|v| !v.is_finite()) {
                return bad(format!("series {:?} has non-finite values", s.name));
            }
            match self.kind {
                ChartKind::StackedBar | ChartKind::Bar => {
                    if s.y.len() != self.categories.len() {
                        return bad(format!(
                            "series {:?} has {} values for {} categories",
                            s.name,
                            s.y.len(),
                            self.categories.len()
                        ));
                    }
                }
                ChartKind::Line | ChartKind::Scatter | ChartKind::StackedArea => {
                    if s.x.len() != s.y.len() {
                        return bad(format!("series {:?}: {} x vs {} y", s.name, s.x.len(), s.y.len()));
                    }
                }
            }
        }
        if self.kind == ChartKind::StackedArea {
            if let Some(first) = self.series.first() {
                if self.series.iter().any(|s| s.x != first.x) {
                    return bad("stacked area series must share x".into());
                }
            }
        }
        if matches!(self.kind, ChartKind::StackedBar | ChartKind::StackedArea)
            && self.series.iter().flat_map(|s| &s.y).any(|v| *v < 0.0)
        {
            return bad("stacked charts need non-negative values".into());
        }
        Ok(())
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Roughly five round ticks spanning `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let count = ((end - start) / step).round() as usize;
    let t = (0..=count).map(|i| start + i as f64 * step).collect();
    (start, end, t)
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn axes(out: &mut String, spec: &ChartSpec, f: &Frame, xt: Option<&[f64]>, yt: &[f64]) {
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r##"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"##,
        num(WIDTH / 2.0),
        esc(&spec.title)
    );
    let _ = writeln!(out, r##"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="#000"/>"##);
    let _ = writeln!(out, r##"<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="#000"/>"##);
    for &v in yt {
        let y = num(f.py(v));
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{y}" x2="{l}" y2="{y}" stroke="#000"/><text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle" font-size="11">{}</text>"##,
            l - 4.0,
            l - 6.0,
            tick_label(v)
        );
    }
    if let Some(xt) = xt {
        for &v in xt {
            let x = num(f.px(v));
            let _ = writeln!(
                out,
                r##"<line x1="{x}" y1="{b}" x2="{x}" y2="{}" stroke="#000"/><text x="{x}" y="{}" text-anchor="middle" font-size="11">{}</text>"##,
                b + 4.0,
                b + 16.0,
                tick_label(v)
            );
        }
    }
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"##,
        num((l + r) / 2.0),
        HEIGHT - 14.0,
        esc(&spec.x_label)
    );
    let _ = writeln!(
        out,
        r##"<text x="18" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {})">{}</text>"##,
        num((t + b) / 2.0),
        num((t + b) / 2.0),
        esc(&spec.y_label)
    );
}

fn legend(out: &mut String, spec: &ChartSpec) {
    let x = WIDTH - RIGHT + 16.0;
    for (i, s) in spec.series.iter().enumerate() {
        let y = TOP + 8.0 + 20.0 * i as f64;
        let _ = writeln!(
            out,
            r##"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}" font-size="12">{}</text>"##,
            num(y - 6.0),
            spec.color(i),
            x + 18.0,
            num(y + 4.0),
            esc(&s.name)
        );
    }
}

fn category_axis(out: &mut String, spec: &ChartSpec, slot: f64) {
    let b = HEIGHT - BOTTOM;
    for (i, c) in spec.categories.iter().enumerate() {
        let x = LEFT + slot * (i as f64 + 0.5);
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" text-anchor="middle" font-size="11">{}</text>"##,
            num(x),
            b + 16.0,
            esc(c)
        );
    }
}

/// SVG text for `spec`; a pure function of its input.
pub fn chart_svg(spec: &ChartSpec) -> Result<String, ReportError> {
    spec.validate()?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"##
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    if spec.is_empty() {
        let f = Frame {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        };
        axes(&mut out, spec, &f, Some(&[0.0, 1.0]), &[0.0, 1.0]);
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" text-anchor="middle" font-size="14" fill="#666">no data</text>"##,
            num((LEFT + WIDTH - RIGHT) / 2.0),
            num((TOP + HEIGHT - BOTTOM) / 2.0)
        );
        legend(&mut out, spec);
        out.push_str("</svg>\n");
        return Ok(out);
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    match spec.kind {
        ChartKind::StackedBar | ChartKind::Bar => {
            let stacked = spec.kind == ChartKind::StackedBar;
            let n = spec.categories.len();
            let top = (0..n)
                .map(|c| {
                    if stacked {
                        spec.series.iter().map(|s| s.y[c]).sum()
                    } else {
                        spec.series.iter().map(|s| s.y[c]).fold(0.0, f64::max)
                    }
                })
                .fold(0.0, f64::max);
            let low = if stacked {
                0.0
            } else {
                spec.series.iter().flat_map(|s| &s.y).copied().fold(0.0, f64::min)
            };
            let (y0, y1, yt) = ticks(low, top);
            let f = Frame { x0: 0.0, x1: 1.0, y0, y1 };
            axes(&mut out, spec, &f, None, &yt);
            let slot = plot_w / n.max(1) as f64;
            category_axis(&mut out, spec, slot);
            for c in 0..n {
                let mut base = 0.0;
                for (i, s) in spec.series.iter().enumerate() {
                    let (x, w, lo, hi) = if stacked {
                        (LEFT + slot * (c as f64 + 0.15), slot * 0.7, base, base + s.y[c])
                    } else {
                        let bw = slot * 0.7 / spec.series.len() as f64;
                        (LEFT + slot * (c as f64 + 0.15) + bw * i as f64, bw, 0.0f64.min(s.y[c]), 0.0f64.max(s.y[c]))
                    };
                    let _ = writeln!(
                        out,
                        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"##,
                        num(x),
                        num(f.py(hi)),
                        num(w),
                        num(f.py(lo) - f.py(hi)),
                        spec.color(i)
                    );
                    base += s.y[c];
                }
            }
        }
        ChartKind::Line | ChartKind::Scatter | ChartKind::StackedArea => {
            let xs = spec.series.iter().flat_map(|s| &s.x).copied();
            let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let (ymin, ymax) = if spec.kind == ChartKind::StackedArea {
                let len = spec.series[0].y.len();
                let top = (0..len)
                    .map(|i| spec.series.iter().map(|s| s.y[i]).sum::<f64>())
                    .fold(0.0, f64::max);
                (0.0, top)
            } else {
                spec.series
                    .iter()
                    .flat_map(|s| &s.y)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)))
            };
            let (x0, x1, xt) = ticks(xmin, xmax);
            let (y0, y1, yt) = ticks(ymin, ymax);
            let f = Frame { x0, x1, y0, y1 };
            axes(&mut out, spec, &f, Some(&xt), &yt);
            match spec.kind {
                ChartKind::StackedArea => {
                    let len = spec.series[0].x.len();
                    let mut base = vec![0.0; len];
                    for (i, s) in spec.series.iter().enumerate() {
                        let top: Vec<f64> = base.iter().zip(&s.y).map(|(b, y)| b + y).collect();
                        let mut pts = Vec::new();
                        for k in 0..len {
                            pts.push(format!("{},{}", num(f.px(s.x[k])), num(f.py(top[k]))));
                        }
                        for k in (0..len).rev() {
                            pts.push(format!("{},{}", num(f.px(s.x[k])), num(f.py(base[k]))));
                        }
                        let _ = writeln!(out, r##"<polygon points="{}" fill="{}"/>"##, pts.join(" "), spec.color(i));
                        base = top;
                    }
                }
                ChartKind::Line => {
                    for (i, s) in spec.series.iter().enumerate() {
                        let pts: Vec<String> =
                            s.x.iter().zip(&s.y).map(|(x, y)| format!("{},{}", num(f.px(*x)), num(f.py(*y)))).collect();
                        let _ = writeln!(
                            out,
                            r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"##,
                            pts.join(" "),
                            spec.color(i)
                        );
                    }
                }
                _ => {
                    for (i, s) in spec.series.iter().enumerate() {
                        for (x, y) in s.x.iter().zip(&s.y) {
                            let _ = writeln!(
                                out,
                                r##"<circle cx="{}" cy="{}" r="4" fill="{}" fill-opacity="0.8"/>"##,
                                num(f.px(*x)),
                                num(f.py(*y)),
                                spec.color(i)
                            );
                        }
                    }
                }
            }
        }
    }
    legend(&mut out, spec);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Long-form CSV of every plotted value: `series,x,y`, where `x` is the
/// category name for the bar kinds.
pub fn chart_csv(spec: &ChartSpec) -> String {
    let mut out = String::from("series,x,y\n");
    for s in &spec.series {
        for (i, y) in s.y.iter().enumerate() {
            let x = match spec.kind {
                ChartKind::StackedBar | ChartKind::Bar => spec.categories.get(i).cloned().unwrap_or_default(),
                _ => s.x.get(i).map(|v| v.to_string()).unwrap_or_default(),
            };
            let _ = writeln!(out, "{},{},{y}", s.name, x);
        }
    }
    out
}

fn write(path: &Path, text: &str) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

/// Writes `path` (SVG) and the same path with a `.csv` extension.
pub fn render_chart(spec: &ChartSpec, path: &Path) -> Result<(), ReportError> {
    let svg = chart_svg(spec)?;
    write(path, &svg)?;
    write(&path.with_extension("csv"), &chart_csv(spec))
}

pub enum ScatterLabels<'a> {
    Fork(&'a ForkGroundTruth),
    Clusters(&'a ClusteringResult),
}

/// Scatter of one embedding, coloured by fork membership or by cluster,
/// plus an `address,x,y,label` CSV sibling.
pub fn render_mds_scatter(embedding: &Embedding, labels: &ScatterLabels, path: &Path) -> Result<(), ReportError> {
    let (names, label_of): (Vec<String>, Vec<usize>) = match labels {
        ScatterLabels::Fork(f) => (
            vec!["stay".into(), "fork".into()],
            embedding.addresses.iter().map(|a| f.contains(a) as usize).collect(),
        ),
        ScatterLabels::Clusters(c) => {
            if c.addresses != embedding.addresses {
                return Err(ReportError::LabelMismatch {
                    labels: c.addresses.len(),
                    points: embedding.addresses.len(),
                });
            }
            ((1..=c.k_star).map(|k| format!("cluster {k}")).collect(), c.assignments.clone())
        }
    };
    let mut spec = ChartSpec::new(
        ChartKind::Scatter,
        &format!("Proposal {}", embedding.proposal_id),
        "MDS 1",
        "MDS 2",
    );
    if matches!(labels, ScatterLabels::Fork(_)) {
        spec.color_map.insert("fork".into(), FORK_COLOR.into());
        spec.color_map.insert("stay".into(), STAY_COLOR.into());
    }
    spec.series = names
        .iter()
        .enumerate()
        .map(|(l, name)| {
            let pts: Vec<&[f64; 2]> = embedding
                .coords
                .iter()
                .zip(&label_of)
                .filter(|(_, &k)| k == l)
                .map(|(p, _)| p)
                .collect();
            Series {
                name: name.clone(),
                x: pts.iter().map(|p| p[0]).collect(),
                y: pts.iter().map(|p| p[1]).collect(),
            }
        })
        .collect();
    write(path, &chart_svg(&spec)?)?;
    let mut csv = String::from("address,x,y,label\n");
    for ((a, p), &l) in embedding.addresses.iter().zip(&embedding.coords).zip(&label_of) {
        let _ = writeln!(csv, "{a},{},{},{}", p[0], p[1], names[l]);
    }
    write(&path.with_extension("csv"), &csv)
}

fn category_colors(spec: &mut ChartSpec) {
    for (c, col) in Category::ALL.iter().zip(["#2ca02c", "#bcbd22", "#ff7f0e", "#d62728"]) {
        spec.color_map.insert(c.as_str().into(), col.into());
    }
}

/// Percent stacked bar of disagreement categories, one bar per DAO.
pub fn friction_chart(reports: &[FrictionReport]) -> ChartSpec {
    let mut spec = ChartSpec::new(ChartKind::StackedBar, "Disagreement by DAO", "DAO", "share of proposals");
    spec.categories = reports.iter().map(|r| r.dao_name.clone()).collect();
    spec.series = Category::ALL
        .iter()
        .map(|&c| Series {
            name: c.as_str().into(),
            x: Vec::new(),
            y: reports.iter().map(|r| r.category_shares.get(c)).collect(),
        })
        .collect();
    category_colors(&mut spec);
    spec
}

/// Per-proposal disagreement with its rolling mean.
pub fn rolling_chart(report: &FrictionReport) -> ChartSpec {
    let mut spec = ChartSpec::new(
        ChartKind::Line,
        &format!("Disagreement over time: {}", report.dao_name),
        "proposal",
        "disagreement",
    );
    spec.series = vec![
        Series {
            name: "per proposal".into(),
            x: report.records.iter().map(|r| r.proposal_id as f64).collect(),
            y: report.records.iter().map(|r| r.disagreement).collect(),
        },
        Series {
            name: "rolling mean".into(),
            x: report.rolling.iter().map(|r| r.0 as f64).collect(),
            y: report.rolling.iter().map(|r| r.1).collect(),
        },
    ];
    spec
}

/// Mean silhouette for each evaluated k.
pub fn silhouette_chart(result: &ClusteringResult) -> ChartSpec {
    let mut spec = ChartSpec::new(
        ChartKind::Bar,
        &format!("Silhouette by k, proposal {}", result.proposal_id),
        "k",
        "mean silhouette",
    );
    spec.categories = result.silhouette_by_k.keys().map(|k| k.to_string()).collect();
    spec.series = vec![Series {
        name: "silhouette".into(),
        x: Vec::new(),
        y: result.silhouette_by_k.values().copied().collect(),
    }];
    spec
}

/// Fraction of active fork addresses in the largest, second largest, …
/// cluster of each proposal, stacked.
pub fn fork_spread_chart(results: &[ClusteringResult], fork: &ForkGroundTruth, width: usize) -> ChartSpec {
    let mut spec = ChartSpec::new(
        ChartKind::StackedArea,
        "Fork addresses by cluster",
        "proposal",
        "share of active fork addresses",
    );
    let rows: Vec<(f64, Vec<f64>)> = results
        .iter()
        .filter_map(|r| {
            let counts = fork_distribution(r, fork);
            let total: usize = counts.iter().sum();
            (total > 0).then(|| {
                let frac = (0..width)
                    .map(|c| counts.get(c).copied().unwrap_or(0) as f64 / total as f64)
                    .collect();
                (r.proposal_id as f64, frac)
            })
        })
        .collect();
    spec.series = (0..width)
        .map(|c| Series {
            name: match c {
                0 => "largest cluster".into(),
                _ => format!("cluster #{}", c + 1),
            },
            x: rows.iter().map(|r| r.0).collect(),
            y: rows.iter().map(|r| r.1[c]).collect(),
        })
        .collect();
    spec
}

/// Selected k per proposal.
pub fn k_star_chart(results: &[ClusteringResult]) -> ChartSpec {
    let mut spec = ChartSpec::new(ChartKind::Line, "Selected cluster count", "proposal", "k*");
    spec.series = vec![Series {
        name: "k*".into(),
        x: results.iter().map(|r| r.proposal_id as f64).collect(),
        y: results.iter().map(|r| r.k_star as f64).collect(),
    }];
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::friction::Thresholds;
    use crate::ingest::Address;

    fn embedding() -> Embedding {
        Embedding {
            proposal_id: 3,
            addresses: vec![Address([1; 20]), Address([2; 20])],
            coords: vec![[0.0, 0.0], [1.0, 0.5]],
            stress: 0.0,
            iterations_used: 1,
            seed: 0,
            stress_history: vec![0.0],
        }
    }

    #[test]
    fn empty_chart_says_no_data() {
        let spec = ChartSpec::new(ChartKind::Line, "t", "x", "y");
        let svg = chart_svg(&spec).unwrap();
        assert!(svg.contains("no data"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<line").count(), 2 + 4);
    }

    #[test]
    fn inconsistent_series_are_rejected() {
        let mut spec = ChartSpec::new(ChartKind::Line, "t", "x", "y");
        spec.series.push(Series {
            name: "a".into(),
            x: vec![1.0, 2.0],
            y: vec![1.0],
        });
        assert!(matches!(chart_svg(&spec), Err(ReportError::InconsistentSeries(_))));
        let mut bar = ChartSpec::new(ChartKind::StackedBar, "t", "x", "y");
        bar.categories = vec!["a".into()];
        bar.series.push(Series {
            name: "s".into(),
            x: vec![],
            y: vec![1.0, 2.0],
        });
        assert!(chart_svg(&bar).is_err());
    }

    #[test]
    fn stacked_bar_has_a_band_per_category_and_dao() {
        let reports: Vec<FrictionReport> = ["a", "b", "c", "d", "e", "f"]
            .iter()
            .map(|name| {
                let records = (1..=4u64)
                    .map(|id| crate::friction::DisagreementRecord {
                        proposal_id: id,
                        disagreement: [0.0, 0.1, 0.3, 0.5][id as usize - 1],
                        category: Thresholds::default().categorize([0.0, 0.1, 0.3, 0.5][id as usize - 1]),
                    })
                    .collect();
                FrictionReport::from_records(name, records, 10, &Default::default())
            })
            .collect();
        let spec = friction_chart(&reports);
        let svg = chart_svg(&spec).unwrap();
        // 6 DAOs × 4 bands + 4 legend swatches + background
        assert_eq!(svg.matches("<rect").count(), 24 + 4 + 1);
        let csv = chart_csv(&spec);
        assert_eq!(csv.lines().count(), 1 + 24);
        assert!(csv.contains("high,f,0.25"));
    }

    #[test]
    fn scatter_is_deterministic_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let fork = ForkGroundTruth {
            fork_label: "f".into(),
            addresses: [Address([2; 20])].into(),
        };
        let p = dir.path().join("mds/3.svg");
        render_mds_scatter(&embedding(), &ScatterLabels::Fork(&fork), &p).unwrap();
        let first = std::fs::read(&p).unwrap();
        render_mds_scatter(&embedding(), &ScatterLabels::Fork(&fork), &p).unwrap();
        assert_eq!(first, std::fs::read(&p).unwrap());
        let svg = String::from_utf8(first).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains(FORK_COLOR) && svg.contains(STAY_COLOR));
        let csv = std::fs::read_to_string(dir.path().join("mds/3.csv")).unwrap();
        assert!(csv.contains(",1,0.5,fork"));
    }

    #[test]
    fn cluster_labels_must_match() {
        let c = ClusteringResult {
            proposal_id: 3,
            addresses: vec![Address([1; 20])],
            assignments: vec![0],
            k_star: 2,
            silhouette_by_k: BTreeMap::new(),
            centroids: vec![],
            seed: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let err = render_mds_scatter(&embedding(), &ScatterLabels::Clusters(&c), &dir.path().join("x.svg"));
        assert!(matches!(err, Err(ReportError::LabelMismatch { labels: 1, points: 2 })));
    }

    #[test]
    fn ticks_cover_range() {
        let (a, b, t) = ticks(0.13, 0.87);
        assert!(a <= 0.13 && b >= 0.87);
        assert!(t.len() >= 3 && t.len() <= 12);
        let (a, b, _) = ticks(2.0, 2.0);
        assert!(a < 2.0 && b > 2.0);
    }
}
