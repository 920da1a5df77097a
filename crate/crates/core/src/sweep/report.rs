//! Sweep reports: score rows, aggregation, CSV/JSON emission and parsing.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{OutputFormat, SweepConfig};
use crate::dataset::EmbeddingKind;
use crate::error::{Error, Result};
use crate::metrics::mean_and_sem;
use crate::result::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Silhouette,
    Ari5,
    Purity5,
    Ari3,
    Purity3,
    NClusters,
    NNoise,
    Inertia,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Silhouette,
        Metric::Ari5,
        Metric::Purity5,
        Metric::Ari3,
        Metric::Purity3,
        Metric::NClusters,
        Metric::NNoise,
        Metric::Inertia,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Metric::Silhouette => "silhouette",
            Metric::Ari5 => "ari_5",
            Metric::Purity5 => "purity_5",
            Metric::Ari3 => "ari_3",
            Metric::Purity3 => "purity_3",
            Metric::NClusters => "n_clusters",
            Metric::NNoise => "n_noise",
            Metric::Inertia => "inertia",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.column() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric `{s}`")))
    }
}

/// One value per [`Metric`]; `None` means undefined or not computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub silhouette: Option<f64>,
    pub ari_5: Option<f64>,
    pub purity_5: Option<f64>,
    pub ari_3: Option<f64>,
    pub purity_3: Option<f64>,
    pub n_clusters: Option<f64>,
    pub n_noise: Option<f64>,
    pub inertia: Option<f64>,
}

impl Scores {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Silhouette => self.silhouette,
            Metric::Ari5 => self.ari_5,
            Metric::Purity5 => self.purity_5,
            Metric::Ari3 => self.ari_3,
            Metric::Purity3 => self.purity_3,
            Metric::NClusters => self.n_clusters,
            Metric::NNoise => self.n_noise,
            Metric::Inertia => self.inertia,
        }
    }

    pub fn set(&mut self, metric: Metric, value: Option<f64>) {
        let slot = match metric {
            Metric::Silhouette => &mut self.silhouette,
            Metric::Ari5 => &mut self.ari_5,
            Metric::Purity5 => &mut self.purity_5,
            Metric::Ari3 => &mut self.ari_3,
            Metric::Purity3 => &mut self.purity_3,
            Metric::NClusters => &mut self.n_clusters,
            Metric::NNoise => &mut self.n_noise,
            Metric::Inertia => &mut self.inertia,
        };
        *slot = value;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// A single fit.
    Run,
    /// Mean over the seeds of one grid point; `sem` holds standard errors.
    Aggregate,
}

impl RowKind {
    fn tag(self) -> &'static str {
        match self {
            RowKind::Run => "run",
            RowKind::Aggregate => "aggregate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub kind: RowKind,
    pub algorithm: Algorithm,
    pub embedding: String,
    pub embedding_kind: EmbeddingKind,
    pub param: String,
    pub value: f64,
    pub seed: Option<u64>,
    pub n_runs: usize,
    pub scores: Scores,
    pub sem: Option<Scores>,
}

impl ScoreRecord {
    /// Mean and SEM over the defined values of each metric.
    pub fn aggregate(runs: &[ScoreRecord]) -> Result<ScoreRecord> {
        let first = runs
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))?;
        let mut scores = Scores::default();
        let mut sem = Scores::default();
        for metric in Metric::ALL {
            let values: Vec<f64> = runs.iter().filter_map(|r| r.scores.get(metric)).collect();
            if let Ok((m, s)) = mean_and_sem(&values) {
                scores.set(metric, Some(m));
                sem.set(metric, Some(s));
            }
        }
        Ok(ScoreRecord {
            kind: RowKind::Aggregate,
            algorithm: first.algorithm,
            embedding: first.embedding.clone(),
            embedding_kind: first.embedding_kind,
            param: first.param.clone(),
            value: first.value,
            seed: None,
            n_runs: runs.len(),
            scores,
            sem: Some(sem),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub version: String,
    pub generated_at: String,
    pub config: Option<SweepConfig>,
}

impl ReportMetadata {
    pub fn new(config: Option<SweepConfig>) -> Self {
        ReportMetadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ScoreRecord>,
}

const FIXED_COLUMNS: [&str; 8] = [
    "kind",
    "algorithm",
    "embedding",
    "embedding_kind",
    "param",
    "value",
    "seed",
    "n_runs",
];

pub fn csv_header() -> Vec<String> {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    for m in Metric::ALL {
        cols.push(m.column().to_string());
    }
    for m in Metric::ALL {
        cols.push(format!("{}_sem", m.column()));
    }
    cols
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Where the metadata of a CSV report goes: `<path>.meta.json`.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(csv_header()).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.kind.tag().to_string(),
                r.algorithm.tag().to_string(),
                r.embedding.clone(),
                r.embedding_kind.tag().to_string(),
                r.param.clone(),
                r.value.to_string(),
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                r.n_runs.to_string(),
            ];
            rec.extend(Metric::ALL.iter().map(|&m| cell(r.scores.get(m))));
            rec.extend(Metric::ALL.iter().map(|&m| cell(r.sem.and_then(|s| s.get(m)))));
            w.write_record(rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Parses the rows of a CSV report; metadata is left empty.
    pub fn rows_from_csv(text: &str) -> Result<Vec<ScoreRecord>> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Report(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != csv_header() {
            return Err(Error::Report("unexpected CSV header".into()));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Report(e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |what: &str| Error::Report(format!("line {line}: bad {what}"));
            let opt = |i: usize| -> Result<Option<f64>> {
                match &rec[i] {
                    "" => Ok(None),
                    s => s.parse().map(Some).map_err(|_| bad(&csv_header()[i])),
                }
            };
            let kind = match &rec[0] {
                "run" => RowKind::Run,
                "aggregate" => RowKind::Aggregate,
                _ => return Err(bad("kind")),
            };
            let mut scores = Scores::default();
            let mut sem = Scores::default();
            let base = FIXED_COLUMNS.len();
            for (k, m) in Metric::ALL.into_iter().enumerate() {
                scores.set(m, opt(base + k)?);
                sem.set(m, opt(base + Metric::ALL.len() + k)?);
            }
            rows.push(ScoreRecord {
                kind,
                algorithm: rec[1].parse().map_err(|_| bad("algorithm"))?,
                embedding: rec[2].to_string(),
                embedding_kind: rec[3].parse().map_err(|_| bad("embedding_kind"))?,
                param: rec[4].to_string(),
                value: rec[5].parse().map_err(|_| bad("value"))?,
                seed: match &rec[6] {
                    "" => None,
                    s => Some(s.parse().map_err(|_| bad("seed"))?),
                },
                n_runs: rec[7].parse().map_err(|_| bad("n_runs"))?,
                scores,
                sem: (kind == RowKind::Aggregate).then_some(sem),
            });
        }
        Ok(rows)
    }

    pub fn from_json(text: &str) -> Result<SweepReport> {
        serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))
    }

    /// Loads a report written by [`emit_report`]; the format follows the
    /// extension.
    pub fn load(path: &Path) -> Result<SweepReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match OutputFormat::from_path(path) {
            OutputFormat::Json => SweepReport::from_json(&text),
            OutputFormat::Csv => {
                let rows = SweepReport::rows_from_csv(&text)?;
                let meta_path = metadata_path(path);
                let metadata = match std::fs::read_to_string(&meta_path) {
                    Ok(m) => serde_json::from_str(&m).map_err(|e| Error::Report(e.to_string()))?,
                    Err(_) => ReportMetadata::new(None),
                };
                Ok(SweepReport { metadata, rows })
            }
        }
    }

    pub fn embeddings(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.embedding) {
                out.push(r.embedding.clone());
            }
        }
        out
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the report. CSV output carries rows only; its metadata goes to
/// [`metadata_path`].
pub fn emit_report(report: &SweepReport, path: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            write_file(path, &report.to_csv())?;
            let mut meta = serde_json::to_string_pretty(&report.metadata).expect("metadata serializes");
            meta.push('\n');
            write_file(&metadata_path(path), &meta)
        }
        OutputFormat::Json => write_file(path, &report.to_json()),
    }
}

/// Grid value with the best score for `metric`, among aggregate rows when
/// the embedding has any and single runs otherwise. Ties go to the smaller
/// grid value.
pub fn select_best(report: &SweepReport, metric: Metric, embedding: Option<&str>) -> Result<f64> {
    let matches = |r: &&ScoreRecord| embedding.map_or(true, |e| r.embedding == e);
    let has_aggregates = report
        .rows
        .iter()
        .filter(matches)
        .any(|r| r.kind == RowKind::Aggregate);
    let wanted = if has_aggregates { RowKind::Aggregate } else { RowKind::Run };
    let mut best: Option<(f64, f64)> = None;
    for r in report.rows.iter().filter(matches).filter(|r| r.kind == wanted) {
        let Some(score) = r.scores.get(metric).filter(|s| !s.is_nan()) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((b, v)) => score > b || (score == b && r.value < v),
        };
        if better {
            best = Some((score, r.value));
        }
    }
    best.map(|(_, v)| v).ok_or_else(|| {
        Error::Report(format!("no defined `{metric}` values to choose from"))
    })
}
