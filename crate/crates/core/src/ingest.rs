//! Challenge JSONL ingestion: instance and truth files, label derivation,
//! stratified splitting and duplicate-text detection.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};

/// Tolerance for matching the truncated decimals used in truth files.
pub const LEVEL_TOLERANCE: f64 = 1e-3;

/// The four annotator levels, from "not click baiting" to "clickbait".
pub const JUDGMENT_LEVELS: [f64; 4] = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];

pub const INSTANCES_FILE: &str = "instances.jsonl";
pub const TRUTH_FILE: &str = "truth.jsonl";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: missing required field \"{field}\"")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: expected 5 judgments, found {found}")]
    JudgmentCount { line: usize, found: usize },
    #[error("line {line}: judgment {value} is not one of the four annotator levels")]
    JudgmentLevel { line: usize, value: f64 },
    #[error("line {line}: truthMean {stated} disagrees with mean of judgments {computed}")]
    MeanMismatch {
        line: usize,
        stated: f64,
        computed: f64,
    },
    #[error("line {line}: truthMedian {stated} disagrees with median of judgments {computed}")]
    MedianMismatch {
        line: usize,
        stated: f64,
        computed: f64,
    },
    #[error("line {line}: unknown truthClass \"{value}\"")]
    UnknownClass { line: usize, value: String },
    #[error("median {0} is not one of the four annotator levels")]
    InvalidMedian(f64),
    #[error("duplicate id \"{0}\"")]
    DuplicateId(String),
    #[error("truth id \"{0}\" has no matching instance")]
    UnmatchedTruth(String),
    #[error("instance id \"{0}\" has no truth record")]
    UnlabeledInstance(String),
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    FractionOutOfRange(f64),
    #[error("class {0} has no members; cannot stratify")]
    EmptyClass(ClassLabel),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Stream(#[from] io::Error),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "clickbait")]
    Clickbait,
    #[serde(rename = "no-clickbait")]
    NoClickbait,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::Clickbait, ClassLabel::NoClickbait];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Clickbait => "clickbait",
            ClassLabel::NoClickbait => "no-clickbait",
        }
    }

    pub fn index(self) -> usize {
        match self {
            ClassLabel::Clickbait => 0,
            ClassLabel::NoClickbait => 1,
        }
    }

    pub fn is_clickbait(self) -> bool {
        self == ClassLabel::Clickbait
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which instance field supplies the modeling text.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum TextField {
    #[default]
    #[serde(rename = "postText")]
    #[value(name = "postText")]
    PostText,
    #[serde(rename = "targetDescription")]
    #[value(name = "targetDescription")]
    TargetDescription,
    #[serde(rename = "targetTitle")]
    #[value(name = "targetTitle")]
    TargetTitle,
}

/// One tweet from an instances file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PostRecord {
    pub id: String,
    pub post_text: Vec<String>,
    pub post_timestamp: String,
    pub post_media: Vec<String>,
    pub target_title: String,
    pub target_description: String,
    pub target_keywords: String,
    pub target_paragraphs: Vec<String>,
    pub target_captions: Vec<String>,
}

impl PostRecord {
    /// The post text segments joined with single spaces.
    pub fn joined_post_text(&self) -> String {
        self.post_text.join(" ")
    }

    pub fn text(&self, field: TextField) -> String {
        match field {
            TextField::PostText => self.joined_post_text(),
            TextField::TargetDescription => self.target_description.clone(),
            TextField::TargetTitle => self.target_title.clone(),
        }
    }
}

/// The five annotator scores of one tweet and their summaries.
#[derive(Clone, Debug, PartialEq)]
pub struct Judgment {
    pub scores: [f64; 5],
    pub mean: f64,
    pub median: f64,
    pub class_label: ClassLabel,
}

impl Judgment {
    /// Builds a judgment from raw scores, computing mean, median and the median-derived label.
    pub fn from_scores(scores: [f64; 5]) -> Result<Self> {
        let median = order_median(&scores);
        Ok(Self {
            scores,
            mean: scores.iter().sum::<f64>() / 5.0,
            median,
            class_label: derive_label(median)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPost {
    pub post: PostRecord,
    pub judgment: Judgment,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub records: Vec<LabeledPost>,
}

impl LabeledDataset {
    /// Pairs instances with truth records by id. The result follows instance order.
    pub fn join(
        name: impl Into<String>,
        instances: Vec<PostRecord>,
        truth: Vec<(String, Judgment)>,
    ) -> Result<Self> {
        let mut by_id: HashMap<String, Judgment> = HashMap::with_capacity(truth.len());
        for (id, j) in truth {
            if by_id.insert(id.clone(), j).is_some() {
                return Err(IngestError::DuplicateId(id));
            }
        }
        let mut seen = HashSet::with_capacity(instances.len());
        let mut records = Vec::with_capacity(instances.len());
        for post in instances {
            if !seen.insert(post.id.clone()) {
                return Err(IngestError::DuplicateId(post.id));
            }
            let judgment = by_id
                .remove(&post.id)
                .ok_or_else(|| IngestError::UnlabeledInstance(post.id.clone()))?;
            records.push(LabeledPost { post, judgment });
        }
        if let Some(id) = by_id.into_keys().min() {
            return Err(IngestError::UnmatchedTruth(id));
        }
        Ok(Self {
            name: name.into(),
            records,
        })
    }

    /// Reads `instances.jsonl` and `truth.jsonl` from a directory.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        Self::load_files(&dir.join(INSTANCES_FILE), &dir.join(TRUTH_FILE))
    }

    pub fn load_files(instances: &Path, truth: &Path) -> Result<Self> {
        let posts = parse_instances(open(instances)?)?;
        let judgments = parse_truth(open(truth)?)?;
        let name = instances
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::join(name, posts, judgments)
    }

    /// Writes the two-file layout into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| IngestError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let inst_path = dir.join(INSTANCES_FILE);
        let mut inst = create(&inst_path)?;
        write_instances(&mut inst, self.records.iter().map(|r| &r.post))?;
        inst.flush()?;
        let truth_path = dir.join(TRUTH_FILE);
        let mut truth = create(&truth_path)?;
        write_truth(
            &mut truth,
            self.records
                .iter()
                .map(|r| (r.post.id.as_str(), &r.judgment)),
        )?;
        truth.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Concatenates datasets, rejecting ids that appear twice.
    pub fn merge(name: impl Into<String>, parts: Vec<LabeledDataset>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut records = Vec::new();
        for part in parts {
            for r in part.records {
                if !seen.insert(r.post.id.clone()) {
                    return Err(IngestError::DuplicateId(r.post.id));
                }
                records.push(r);
            }
        }
        Ok(Self {
            name: name.into(),
            records,
        })
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Scalar {
    Str(String),
    Num(serde_json::Number),
}

impl Scalar {
    fn into_string(self) -> String {
        match self {
            Scalar::Str(s) => s,
            Scalar::Num(n) => n.to_string(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TextOrList {
    List(Vec<Option<String>>),
    Text(String),
}

impl TextOrList {
    fn into_list(self) -> Vec<String> {
        match self {
            TextOrList::List(v) => v.into_iter().map(Option::unwrap_or_default).collect(),
            TextOrList::Text(s) => vec![s],
        }
    }

    fn into_text(self) -> String {
        match self {
            TextOrList::List(v) => v
                .into_iter()
                .map(Option::unwrap_or_default)
                .collect::<Vec<_>>()
                .join(" "),
            TextOrList::Text(s) => s,
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawInstance {
    id: Option<Scalar>,
    post_text: Option<TextOrList>,
    post_timestamp: Option<String>,
    post_media: Option<TextOrList>,
    target_title: Option<TextOrList>,
    target_description: Option<TextOrList>,
    target_keywords: Option<TextOrList>,
    target_paragraphs: Option<TextOrList>,
    target_captions: Option<TextOrList>,
}

fn non_blank_lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, io::Result<String>)> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
}

/// Parses an instances file, one JSON object per line. Blank lines are skipped.
pub fn parse_instances<R: BufRead>(reader: R) -> Result<Vec<PostRecord>> {
    let mut out = Vec::new();
    for (line, text) in non_blank_lines(reader) {
        let text = text?;
        let raw: RawInstance =
            serde_json::from_str(&text).map_err(|source| IngestError::Json { line, source })?;
        let id = raw
            .id
            .map(Scalar::into_string)
            .filter(|s| !s.is_empty())
            .ok_or(IngestError::MissingField { line, field: "id" })?;
        let post_text = raw
            .post_text
            .ok_or(IngestError::MissingField {
                line,
                field: "postText",
            })?
            .into_list();
        out.push(PostRecord {
            id,
            post_text,
            post_timestamp: raw.post_timestamp.unwrap_or_default(),
            post_media: raw
                .post_media
                .map(TextOrList::into_list)
                .unwrap_or_default(),
            target_title: raw
                .target_title
                .map(TextOrList::into_text)
                .unwrap_or_default(),
            target_description: raw
                .target_description
                .map(TextOrList::into_text)
                .unwrap_or_default(),
            target_keywords: raw
                .target_keywords
                .map(TextOrList::into_text)
                .unwrap_or_default(),
            target_paragraphs: raw
                .target_paragraphs
                .map(TextOrList::into_list)
                .unwrap_or_default(),
            target_captions: raw
                .target_captions
                .map(TextOrList::into_list)
                .unwrap_or_default(),
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawTruth {
    id: Option<Scalar>,
    truth_judgments: Option<Vec<f64>>,
    truth_mean: Option<f64>,
    truth_median: Option<f64>,
    truth_class: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TruthLine<'a> {
    id: &'a str,
    truth_judgments: &'a [f64; 5],
    truth_mean: f64,
    truth_median: f64,
    truth_class: ClassLabel,
}

fn snap_level(v: f64) -> Option<f64> {
    JUDGMENT_LEVELS
        .iter()
        .copied()
        .find(|l| (v - l).abs() <= LEVEL_TOLERANCE)
}

/// Median of an odd-length sample as its middle order statistic.
fn order_median(scores: &[f64; 5]) -> f64 {
    let mut s = *scores;
    s.sort_by(f64::total_cmp);
    s[2]
}

/// Parses a truth file, validating every judgment against its stated summaries.
pub fn parse_truth<R: BufRead>(reader: R) -> Result<Vec<(String, Judgment)>> {
    let mut out = Vec::new();
    for (line, text) in non_blank_lines(reader) {
        let text = text?;
        let raw: RawTruth =
            serde_json::from_str(&text).map_err(|source| IngestError::Json { line, source })?;
        let id = raw
            .id
            .map(Scalar::into_string)
            .filter(|s| !s.is_empty())
            .ok_or(IngestError::MissingField { line, field: "id" })?;
        let judgments = raw.truth_judgments.ok_or(IngestError::MissingField {
            line,
            field: "truthJudgments",
        })?;
        let scores: [f64; 5] =
            judgments
                .as_slice()
                .try_into()
                .map_err(|_| IngestError::JudgmentCount {
                    line,
                    found: judgments.len(),
                })?;
        if let Some(&bad) = scores.iter().find(|v| snap_level(**v).is_none()) {
            return Err(IngestError::JudgmentLevel { line, value: bad });
        }
        let mean = raw.truth_mean.ok_or(IngestError::MissingField {
            line,
            field: "truthMean",
        })?;
        let median = raw.truth_median.ok_or(IngestError::MissingField {
            line,
            field: "truthMedian",
        })?;
        let computed_mean = scores.iter().sum::<f64>() / 5.0;
        if (computed_mean - mean).abs() > LEVEL_TOLERANCE {
            return Err(IngestError::MeanMismatch {
                line,
                stated: mean,
                computed: computed_mean,
            });
        }
        let computed_median = order_median(&scores);
        if (computed_median - median).abs() > LEVEL_TOLERANCE {
            return Err(IngestError::MedianMismatch {
                line,
                stated: median,
                computed: computed_median,
            });
        }
        let class = raw.truth_class.ok_or(IngestError::MissingField {
            line,
            field: "truthClass",
        })?;
        let class_label = match class.as_str() {
            "clickbait" => ClassLabel::Clickbait,
            "no-clickbait" => ClassLabel::NoClickbait,
            _ => return Err(IngestError::UnknownClass { line, value: class }),
        };
        out.push((
            id,
            Judgment {
                scores,
                mean,
                median,
                class_label,
            },
        ));
    }
    Ok(out)
}

pub fn write_instances<'a, W: Write>(
    mut w: W,
    posts: impl IntoIterator<Item = &'a PostRecord>,
) -> Result<()> {
    for p in posts {
        serde_json::to_writer(&mut w, p).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_truth<'a, W: Write>(
    mut w: W,
    records: impl IntoIterator<Item = (&'a str, &'a Judgment)>,
) -> Result<()> {
    for (id, j) in records {
        let line = TruthLine {
            id,
            truth_judgments: &j.scores,
            truth_mean: j.mean,
            truth_median: j.median,
            truth_class: j.class_label,
        };
        serde_json::to_writer(&mut w, &line).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Maps a median judgment to its binary label: clickbait iff the median is at least 0.5.
pub fn derive_label(median: f64) -> Result<ClassLabel> {
    match snap_level(median) {
        Some(_) if median >= 0.5 => Ok(ClassLabel::Clickbait),
        Some(_) => Ok(ClassLabel::NoClickbait),
        None => Err(IngestError::InvalidMedian(median)),
    }
}

/// A record whose stated class disagrees with the median rule.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelViolation {
    pub id: String,
    pub median: f64,
    pub stated: ClassLabel,
    pub derived: Option<ClassLabel>,
}

/// Reports every record whose truthClass is not what `derive_label` gives for its median.
pub fn validate_labels(ds: &LabeledDataset) -> Vec<LabelViolation> {
    ds.records
        .iter()
        .filter_map(|r| {
            let derived = derive_label(r.judgment.median).ok();
            (derived != Some(r.judgment.class_label)).then(|| LabelViolation {
                id: r.post.id.clone(),
                median: r.judgment.median,
                stated: r.judgment.class_label,
                derived,
            })
        })
        .collect()
}

/// Number of test records per class: round-half-up on the total, then
/// largest-remainder allocation proportional to class size.
pub fn stratified_quotas(class_sizes: [usize; 2], test_fraction: f64) -> [usize; 2] {
    let total: usize = class_sizes.iter().sum();
    if total == 0 {
        return [0, 0];
    }
    let n_test = ((test_fraction * total as f64) + 0.5).floor() as usize;
    let n_test = n_test.min(total);
    let mut quotas = [0usize; 2];
    let mut remainders = [(0u128, 0usize); 2];
    for (k, &size) in class_sizes.iter().enumerate() {
        // exact integer arithmetic: ideal = n_test * size / total
        let num = n_test as u128 * size as u128;
        quotas[k] = (num / total as u128) as usize;
        remainders[k] = (num % total as u128, k);
    }
    let mut left = n_test - quotas.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, k) in remainders.iter() {
        if left == 0 {
            break;
        }
        if quotas[k] < class_sizes[k] {
            quotas[k] += 1;
            left -= 1;
        }
    }
    quotas
}

/// Splits a dataset into (train, test) while preserving class proportions.
/// Both outputs keep the input's record order.
pub fn stratified_split(
    ds: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(IngestError::FractionOutOfRange(test_fraction));
    }
    if ds.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, r) in ds.records.iter().enumerate() {
        by_class[r.judgment.class_label.index()].push(i);
    }
    for label in ClassLabel::ALL {
        if by_class[label.index()].is_empty() {
            return Err(IngestError::EmptyClass(label));
        }
    }
    let quotas = stratified_quotas([by_class[0].len(), by_class[1].len()], test_fraction);
    let mut rng = rng::stream(seed, Stream::Split);
    let mut in_test = vec![false; ds.len()];
    for (members, quota) in by_class.iter_mut().zip(quotas) {
        members.shuffle(&mut rng);
        for &i in &members[..quota] {
            in_test[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, t) in ds.records.iter().zip(in_test) {
        if t {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok((
        LabeledDataset {
            name: format!("{}-train", ds.name),
            records: train,
        },
        LabeledDataset {
            name: format!("{}-test", ds.name),
            records: test,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DuplicateGroup {
    pub post_text: String,
    pub count: usize,
    pub clickbait: usize,
    pub no_clickbait: usize,
}

/// Groups records by exact joined post text and returns groups of two or more,
/// largest first, ties by text.
pub fn find_duplicate_posts(ds: &LabeledDataset) -> Vec<DuplicateGroup> {
    let mut groups: BTreeMap<String, [usize; 2]> = BTreeMap::new();
    for r in &ds.records {
        groups.entry(r.post.joined_post_text()).or_default()[r.judgment.class_label.index()] += 1;
    }
    let mut out: Vec<DuplicateGroup> = groups
        .into_iter()
        .filter(|(_, c)| c[0] + c[1] >= 2)
        .map(|(post_text, c)| DuplicateGroup {
            post_text,
            count: c[0] + c[1],
            clickbait: c[0],
            no_clickbait: c[1],
        })
        .collect();
    out.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.post_text.cmp(&b.post_text))
    });
    out
}
