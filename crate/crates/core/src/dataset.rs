//! Embedding datasets: loading, writing, z-scoring and rating labels.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which construction produced an embedding matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// Mean of static 300-d word vectors.
    W2vAvg,
    /// Final-layer state of the classification token, 768-d.
    BertCls,
    /// Mean of final-layer token states, 768-d.
    BertAvg,
    Other,
}

impl EmbeddingKind {
    pub const ALL: [EmbeddingKind; 4] = [
        EmbeddingKind::W2vAvg,
        EmbeddingKind::BertCls,
        EmbeddingKind::BertAvg,
        EmbeddingKind::Other,
    ];

    /// Declared dimensionality, `None` for [`EmbeddingKind::Other`].
    pub fn dims(self) -> Option<usize> {
        match self {
            EmbeddingKind::W2vAvg => Some(300),
            EmbeddingKind::BertCls | EmbeddingKind::BertAvg => Some(768),
            EmbeddingKind::Other => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            EmbeddingKind::W2vAvg => "w2v_avg",
            EmbeddingKind::BertCls => "bert_cls",
            EmbeddingKind::BertAvg => "bert_avg",
            EmbeddingKind::Other => "other",
        }
    }

    /// Infers the kind from the `<dataset>_<kind>.csv` naming convention.
    pub fn from_path(path: &Path) -> EmbeddingKind {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        [
            EmbeddingKind::W2vAvg,
            EmbeddingKind::BertCls,
            EmbeddingKind::BertAvg,
        ]
        .into_iter()
        .find(|kind| stem == kind.tag() || stem.ends_with(&format!("_{}", kind.tag())))
        .unwrap_or(EmbeddingKind::Other)
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EmbeddingKind::ALL
            .into_iter()
            .find(|kind| kind.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown embedding kind `{s}`")))
    }
}

/// How star ratings become ground-truth classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelScheme {
    /// Ratings used as-is, classes 1..=5.
    #[serde(rename = "5")]
    FiveClass,
    /// 1,2 -> 1; 3 -> 2; 4,5 -> 3.
    #[serde(rename = "3")]
    ThreeClass,
}

impl LabelScheme {
    pub fn apply(self, ratings: &[u8]) -> Result<Vec<u8>> {
        match self {
            LabelScheme::FiveClass => {
                check_ratings(ratings)?;
                Ok(ratings.to_vec())
            }
            LabelScheme::ThreeClass => transform_ratings_to_three(ratings),
        }
    }

    pub fn n_classes(self) -> u8 {
        match self {
            LabelScheme::FiveClass => 5,
            LabelScheme::ThreeClass => 3,
        }
    }
}

fn check_ratings(ratings: &[u8]) -> Result<()> {
    match ratings.iter().position(|r| !(1..=5).contains(r)) {
        Some(i) => Err(Error::InvalidArgument(format!(
            "rating {} at index {i} is outside 1..=5",
            ratings[i]
        ))),
        None => Ok(()),
    }
}

/// Collapses 1–5 star ratings into negative / neutral / positive classes.
pub fn transform_ratings_to_three(ratings: &[u8]) -> Result<Vec<u8>> {
    check_ratings(ratings)?;
    Ok(ratings
        .iter()
        .map(|&r| match r {
            1 | 2 => 1,
            3 => 2,
            _ => 3,
        })
        .collect())
}

/// Dense row-major `n_samples × n_dims` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            data,
            rows: rows.len(),
            cols,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        (0..self.rows).map(move |i| self.row(i))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// An embedding matrix with one star rating and one id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    ids: Vec<String>,
    ratings: Vec<u8>,
    matrix: Matrix,
    kind: EmbeddingKind,
}

impl EmbeddingDataset {
    pub fn new(
        ids: Vec<String>,
        ratings: Vec<u8>,
        matrix: Matrix,
        kind: EmbeddingKind,
    ) -> Result<Self> {
        let n = matrix.nrows();
        if ids.len() != n || ratings.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} ids and {} ratings for {n} rows",
                ids.len(),
                ratings.len()
            )));
        }
        if let Some(i) = ratings.iter().position(|r| !(1..=5).contains(r)) {
            return Err(Error::InvalidDataset(format!(
                "rating {} of sample {i} is outside 1..=5",
                ratings[i]
            )));
        }
        if let Some(d) = kind.dims() {
            if matrix.ncols() != d {
                return Err(Error::InvalidDataset(format!(
                    "{kind} embeddings must have {d} dimensions, found {}",
                    matrix.ncols()
                )));
            }
        }
        if let Some(pos) = matrix.as_slice().iter().position(|v| !v.is_finite()) {
            let cols = matrix.ncols().max(1);
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(EmbeddingDataset {
            ids,
            ratings,
            matrix,
            kind,
        })
    }

    /// Builds a dataset with ids `0..n`; handy for synthetic data.
    pub fn from_rows(rows: &[Vec<f64>], ratings: Vec<u8>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        EmbeddingDataset::new(ids, ratings, Matrix::from_rows(rows)?, EmbeddingKind::Other)
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn ratings(&self) -> &[u8] {
        &self.ratings
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    /// Per-dimension z-scoring with the population standard deviation.
    ///
    /// Constant dimensions become all-zero.
    pub fn standardize(&self) -> Result<EmbeddingDataset> {
        let n = self.n_samples();
        if n < 2 {
            return Err(Error::InvalidDataset(format!(
                "standardizing needs at least 2 samples, found {n}"
            )));
        }
        let d = self.n_dims();
        let nf = n as f64;
        let mut out = self.matrix.clone();
        for j in 0..d {
            let column = || (0..n).map(|i| self.matrix.get(i, j));
            let first = self.matrix.get(0, j);
            if column().all(|v| v == first) {
                for i in 0..n {
                    out.row_mut(i)[j] = 0.0;
                }
                continue;
            }
            let mean = column().sum::<f64>() / nf;
            let var = column().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
            let std = var.sqrt();
            for i in 0..n {
                let v = &mut out.row_mut(i)[j];
                *v = (*v - mean) / std;
            }
        }
        Ok(EmbeddingDataset {
            ids: self.ids.clone(),
            ratings: self.ratings.clone(),
            matrix: out,
            kind: self.kind,
        })
    }
}

/// Reads the canonical embedding CSV (`id,rating,e0,...,e{d-1}`).
///
/// Lines starting with `#` are comments. The kind is inferred from the file
/// name.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(file, path, EmbeddingKind::from_path(path))
}

/// Like [`load_embeddings`] with an explicit kind.
pub fn load_embeddings_as(path: impl AsRef<Path>, kind: EmbeddingKind) -> Result<EmbeddingDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(file, path, kind)
}

pub(crate) fn read_embeddings(
    reader: impl std::io::Read,
    path: &Path,
    kind: EmbeddingKind,
) -> Result<EmbeddingDataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let line_of = |rec: &csv::StringRecord| rec.position().map_or(0, |p| p.line() as usize);
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        Error::parse(path, line, e.to_string())
    };

    let mut records = csv.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(csv_err)?,
        None => return Err(Error::parse(path, 1, "missing header")),
    };
    let header_line = line_of(&header);
    if header.len() < 3 || &header[0] != "id" || &header[1] != "rating" {
        return Err(Error::parse(
            path,
            header_line,
            "header must start with `id,rating,e0`",
        ));
    }
    let d = header.len() - 2;
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("e{j}") {
            return Err(Error::parse(
                path,
                header_line,
                format!("expected column `e{j}`, found `{name}`"),
            ));
        }
    }

    let mut ids = Vec::new();
    let mut ratings = Vec::new();
    let mut data = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        if rec.len() != d + 2 {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, found {}", d + 2, rec.len()),
            ));
        }
        let rating: u8 = rec[1]
            .trim()
            .parse()
            .ok()
            .filter(|r| (1..=5).contains(r))
            .ok_or_else(|| {
                Error::parse(path, line, format!("rating `{}` is not an integer in 1..=5", &rec[1]))
            })?;
        for (j, cell) in rec.iter().skip(2).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::parse(path, line, format!("column e{j}: `{cell}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(path, line, format!("column e{j}: non-finite value")));
            }
            data.push(v);
        }
        ids.push(rec[0].to_string());
        ratings.push(rating);
    }
    let n = ids.len();
    let matrix = Matrix::new(data, n, d)?;
    EmbeddingDataset::new(ids, ratings, matrix, kind).map_err(|e| Error::parse(path, header_line, e.to_string()))
}

/// Writes the canonical embedding CSV at full precision.
pub fn write_embeddings(dataset: &EmbeddingDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_embeddings_to(dataset, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_embeddings_to(dataset: &EmbeddingDataset, out: &mut impl Write) -> std::io::Result<()> {
    write!(out, "id,rating")?;
    for j in 0..dataset.n_dims() {
        write!(out, ",e{j}")?;
    }
    writeln!(out)?;
    for i in 0..dataset.n_samples() {
        write!(out, "{},{}", dataset.ids[i], dataset.ratings[i])?;
        // `Display` for f64 prints the shortest string that parses back exactly.
        for v in dataset.row(i) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
