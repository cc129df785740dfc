//! Exploratory statistics over labeled datasets, written as CSV/JSON tables.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{
    find_duplicate_posts, ClassLabel, LabeledDataset, JUDGMENT_LEVELS, LEVEL_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("class {0} has no records")]
    EmptyClass(ClassLabel),
    #[error("histogram needs at least 2 bins, got {0}")]
    Bins(usize),
    #[error("bin width must be positive")]
    BinWidth,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub total: usize,
    pub clickbait: usize,
    pub no_clickbait: usize,
}

pub fn class_counts(ds: &LabeledDataset) -> ClassCounts {
    let clickbait = ds
        .records
        .iter()
        .filter(|r| r.judgment.class_label.is_clickbait())
        .count();
    ClassCounts {
        total: ds.len(),
        clickbait,
        no_clickbait: ds.len() - clickbait,
    }
}

/// Records per (median level, class). Rows follow [`JUDGMENT_LEVELS`], columns [`ClassLabel::ALL`].
/// Medians off the four levels are not counted.
pub fn median_label_table(ds: &LabeledDataset) -> [[usize; 2]; 4] {
    let mut t = [[0usize; 2]; 4];
    for r in &ds.records {
        if let Some(level) = JUDGMENT_LEVELS
            .iter()
            .position(|l| (r.judgment.median - l).abs() <= LEVEL_TOLERANCE)
        {
            t[level][r.judgment.class_label.index()] += 1;
        }
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl BoxStats {
    /// Five-number summary with Tukey hinges (the median joins both halves when n is odd).
    pub fn tukey(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let lower = &v[..n.div_ceil(2)];
        let upper = &v[n / 2..];
        Some(Self {
            min: v[0],
            q1: median_sorted(lower),
            median: median_sorted(&v),
            q3: median_sorted(upper),
            max: v[n - 1],
        })
    }
}

fn class_values(
    ds: &LabeledDataset,
    label: ClassLabel,
    f: impl Fn(&crate::ingest::LabeledPost) -> f64,
) -> Vec<f64> {
    ds.records
        .iter()
        .filter(|r| r.judgment.class_label == label)
        .map(f)
        .collect()
}

/// Box statistics of truthMean for [clickbait, no-clickbait].
pub fn score_box_stats(ds: &LabeledDataset) -> Result<[BoxStats; 2], AnalyticsError> {
    let stats = |label| {
        BoxStats::tukey(&class_values(ds, label, |r| r.judgment.mean))
            .ok_or(AnalyticsError::EmptyClass(label))
    };
    Ok([
        stats(ClassLabel::Clickbait)?,
        stats(ClassLabel::NoClickbait)?,
    ])
}

/// Per-class counts over contiguous bins. The last bin is closed on the right.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    /// Indexed by [`ClassLabel::index`].
    pub counts: [Vec<usize>; 2],
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    /// Counts as a percentage of the class total; all zero for an empty class.
    pub fn percentages(&self, label: ClassLabel) -> Vec<f64> {
        let c = &self.counts[label.index()];
        let total: usize = c.iter().sum();
        c.iter()
            .map(|&k| {
                if total == 0 {
                    0.0
                } else {
                    100.0 * k as f64 / total as f64
                }
            })
            .collect()
    }

    fn bin_of(&self, v: f64) -> usize {
        let last = self.bins() - 1;
        match self.bin_edges[1..].iter().position(|e| v < *e) {
            Some(i) => i,
            None => last,
        }
    }

    fn fill(&mut self, v: f64, label: ClassLabel) {
        let b = self.bin_of(v);
        self.counts[label.index()][b] += 1;
    }

    fn empty(bin_edges: Vec<f64>) -> Self {
        let n = bin_edges.len() - 1;
        Self {
            bin_edges,
            counts: [vec![0; n], vec![0; n]],
        }
    }
}

/// Histogram of truthMean over `[0, 1]` in `bins` equal-width bins.
pub fn score_histogram(ds: &LabeledDataset, bins: usize) -> Result<Histogram, AnalyticsError> {
    if bins < 2 {
        return Err(AnalyticsError::Bins(bins));
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut h = Histogram::empty(edges);
    for r in &ds.records {
        h.fill(r.judgment.mean, r.judgment.class_label);
    }
    Ok(h)
}

/// Histogram of joined post length in characters, bins of `bin_width` starting at 0.
pub fn length_distribution(
    ds: &LabeledDataset,
    bin_width: usize,
) -> Result<Histogram, AnalyticsError> {
    if bin_width == 0 {
        return Err(AnalyticsError::BinWidth);
    }
    let lengths: Vec<(usize, ClassLabel)> = ds
        .records
        .iter()
        .map(|r| {
            (
                r.post.joined_post_text().chars().count(),
                r.judgment.class_label,
            )
        })
        .collect();
    let max = lengths.iter().map(|(l, _)| *l).max().unwrap_or(0);
    let bins = (max / bin_width + 1).max(2);
    let edges = (0..=bins).map(|i| (i * bin_width) as f64).collect();
    let mut h = Histogram::empty(edges);
    for (len, label) in lengths {
        h.fill(len as f64, label);
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnalyzeOptions {
    pub score_bins: usize,
    pub length_bin_width: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            score_bins: 20,
            length_bin_width: 10,
        }
    }
}

pub const ANALYSIS_FILES: [&str; 6] = [
    "counts.json",
    "fig1_median_label.csv",
    "fig2_box.csv",
    "fig3_score_hist.csv",
    "fig4_length_hist.csv",
    "duplicates.csv",
];

#[derive(Serialize)]
struct CountsFile {
    total: usize,
    clickbait: usize,
    no_clickbait: usize,
    duplicate_post_texts: usize,
    label_violations: usize,
}

#[allow(clippy::needless_range_loop)]
fn write_histogram(path: &Path, h: &Histogram, percent: bool) -> Result<(), AnalyticsError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_start", "bin_end", "clickbait", "no_clickbait"])?;
    let pc = [
        h.percentages(ClassLabel::Clickbait),
        h.percentages(ClassLabel::NoClickbait),
    ];
    for b in 0..h.bins() {
        let cell = |k: usize| {
            if percent {
                pc[k][b].to_string()
            } else {
                h.counts[k][b].to_string()
            }
        };
        w.write_record([
            h.bin_edges[b].to_string(),
            h.bin_edges[b + 1].to_string(),
            cell(0),
            cell(1),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every analytics artifact in [`ANALYSIS_FILES`] into `out`.
pub fn write_analysis(
    ds: &LabeledDataset,
    out: &Path,
    opts: AnalyzeOptions,
) -> Result<(), AnalyticsError> {
    fs::create_dir_all(out)?;
    let counts = class_counts(ds);
    let dups = find_duplicate_posts(ds);
    let violations = crate::ingest::validate_labels(ds);
    let file = CountsFile {
        total: counts.total,
        clickbait: counts.clickbait,
        no_clickbait: counts.no_clickbait,
        duplicate_post_texts: dups.len(),
        label_violations: violations.len(),
    };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    fs::write(out.join(ANALYSIS_FILES[0]), json)?;

    let mut w = csv::Writer::from_path(out.join(ANALYSIS_FILES[1]))?;
    w.write_record(["median", "clickbait", "no_clickbait"])?;
    for (level, row) in ["0", "0.33333", "0.66667", "1"]
        .iter()
        .zip(median_label_table(ds))
    {
        w.write_record([level.to_string(), row[0].to_string(), row[1].to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join(ANALYSIS_FILES[2]))?;
    w.write_record(["class", "min", "q1", "median", "q3", "max"])?;
    for label in ClassLabel::ALL {
        if let Some(b) = BoxStats::tukey(&class_values(ds, label, |r| r.judgment.mean)) {
            w.write_record([
                label.as_str().to_owned(),
                b.min.to_string(),
                b.q1.to_string(),
                b.median.to_string(),
                b.q3.to_string(),
                b.max.to_string(),
            ])?;
        }
    }
    w.flush()?;

    write_histogram(
        &out.join(ANALYSIS_FILES[3]),
        &score_histogram(ds, opts.score_bins)?,
        false,
    )?;
    write_histogram(
        &out.join(ANALYSIS_FILES[4]),
        &length_distribution(ds, opts.length_bin_width)?,
        true,
    )?;

    let mut w = csv::Writer::from_path(out.join(ANALYSIS_FILES[5]))?;
    for g in &dups {
        w.serialize(g)?;
    }
    if dups.is_empty() {
        w.write_record(["post_text", "count", "clickbait", "no_clickbait"])?;
    }
    w.flush()?;
    Ok(())
}
