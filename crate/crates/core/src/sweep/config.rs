use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::LabelScheme;
use crate::error::{Error, Result};
use crate::metrics::NoisePolicy;
use crate::result::Algorithm;

/// Which ground-truth label schemes to score against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelSelection {
    #[serde(rename = "5")]
    Five,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "both")]
    Both,
}

impl LabelSelection {
    pub fn schemes(self) -> &'static [LabelScheme] {
        match self {
            LabelSelection::Five => &[LabelScheme::FiveClass],
            LabelSelection::Three => &[LabelScheme::ThreeClass],
            LabelSelection::Both => &[LabelScheme::FiveClass, LabelScheme::ThreeClass],
        }
    }
}

impl FromStr for LabelSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "5" => Ok(LabelSelection::Five),
            "3" => Ok(LabelSelection::Three),
            "both" => Ok(LabelSelection::Both),
            _ => Err(Error::InvalidArgument(format!("labels must be 5, 3 or both, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    /// Picks JSON for `.json` paths, CSV otherwise.
    pub fn from_path(path: &Path) -> OutputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidArgument(format!("format must be csv or json, got `{s}`"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// Inclusive integer range written `A:B`.
pub fn parse_range(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidArgument(format!("expected a range `A:B`, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

/// Comma-separated list of reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("`{x}` is not a number")))
        })
        .collect()
}

/// Everything that determines the contents of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub algorithm: Algorithm,
    pub embeddings: Vec<PathBuf>,
    pub labels: LabelSelection,
    /// Values of the algorithm's swept hyperparameter.
    pub grid: Vec<f64>,
    /// k-means only.
    pub seeds: Vec<u64>,
    pub noise_policy: NoisePolicy,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub dbscan_min_samples: usize,
    /// `None` ties HDBSCAN's min_samples to min_cluster_size.
    pub hdbscan_min_samples: Option<usize>,
}

impl SweepConfig {
    pub fn new(algorithm: Algorithm, embeddings: Vec<PathBuf>) -> Self {
        SweepConfig {
            algorithm,
            embeddings,
            labels: LabelSelection::Both,
            grid: default_grid(algorithm),
            seeds: if algorithm == Algorithm::Kmeans { (1..=50).collect() } else { Vec::new() },
            noise_policy: NoisePolicy::default(),
            kmeans_max_iter: 300,
            kmeans_tol: 1e-4,
            dbscan_min_samples: 5,
            hdbscan_min_samples: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embeddings.is_empty() {
            return Err(Error::InvalidArgument("no embedding files given".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
        }
        let integral = matches!(
            self.algorithm,
            Algorithm::Kmeans | Algorithm::SingleLinkage | Algorithm::Hdbscan
        );
        for &v in &self.grid {
            let ok = if integral { v >= 1.0 && v.fract() == 0.0 } else { v > 0.0 && v.is_finite() };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "invalid {} value {v}",
                    self.algorithm.grid_param()
                )));
            }
        }
        if self.algorithm == Algorithm::Kmeans && self.seeds.is_empty() {
            return Err(Error::InvalidArgument("k-means needs at least one seed".into()));
        }
        let mut stems: Vec<String> = self.embeddings.iter().map(|p| embedding_name(p)).collect();
        stems.sort();
        if let Some(w) = stems.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "two embedding files share the name `{}`",
                w[0]
            )));
        }
        Ok(())
    }

    /// Seeds actually iterated: the configured seeds for k-means, one
    /// seedless run otherwise.
    pub fn effective_seeds(&self) -> Vec<Option<u64>> {
        if self.algorithm == Algorithm::Kmeans {
            self.seeds.iter().copied().map(Some).collect()
        } else {
            vec![None]
        }
    }
}

pub fn default_grid(algorithm: Algorithm) -> Vec<f64> {
    match algorithm {
        Algorithm::Kmeans | Algorithm::SingleLinkage => (3..=19).map(f64::from).collect(),
        Algorithm::Dbscan => vec![0.5, 1.0, 5.0, 10.0, 15.0],
        Algorithm::Hdbscan => vec![2.0, 5.0, 10.0, 15.0, 20.0],
    }
}

/// Report name of an embedding file: its stem.
pub fn embedding_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// On-disk config file; every field optional so flags can fill the gaps.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub algorithm: Option<Algorithm>,
    pub embeddings: Option<Vec<PathBuf>>,
    pub labels: Option<LabelSelection>,
    pub grid: Option<Vec<f64>>,
    pub seeds: Option<String>,
    pub noise_policy: Option<NoisePolicy>,
    pub kmeans_max_iter: Option<usize>,
    pub kmeans_tol: Option<f64>,
    pub dbscan_min_samples: Option<usize>,
    pub hdbscan_min_samples: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub jobs: Option<usize>,
}

impl ConfigFile {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |msg: String| Error::InvalidArgument(format!("{}: {msg}", path.display()));
        if OutputFormat::from_path(path) == OutputFormat::Json {
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| bad(e.to_string()))
        }
    }
}
