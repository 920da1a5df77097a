//! Grid sweeps over (embedding × hyperparameter × seed).

mod config;
mod report;

use std::sync::atomic::{AtomicUsize, Ordering};

use log::{info, warn};
use rayon::prelude::*;

pub use config::{
    default_grid, embedding_name, parse_list, parse_range, ConfigFile, LabelSelection,
    OutputFormat, SweepConfig,
};
pub use report::{
    csv_header, emit_report, metadata_path, select_best, Metric, ReportMetadata, RowKind,
    ScoreRecord, Scores, SweepReport,
};

use crate::dataset::{load_embeddings, EmbeddingDataset, EmbeddingKind, LabelScheme};
use crate::dbscan::{self, DbscanConfig};
use crate::distance::{pairwise_distances, DistanceMatrix};
use crate::error::{Error, Result};
use crate::hdbscan::{self, HdbscanConfig};
use crate::kmeans::{self, KMeansConfig};
use crate::linkage::{build_dendrogram, Dendrogram};
use crate::metrics::{adjusted_rand_index, purity, silhouette};
use crate::result::{Algorithm, ClusteringResult};

/// A standardized dataset with everything the fits share.
pub struct PreparedEmbedding {
    pub name: String,
    pub dataset: EmbeddingDataset,
    pub distances: DistanceMatrix,
    classes_5: Vec<i64>,
    classes_3: Vec<i64>,
    dendrogram: Option<Dendrogram>,
}

impl PreparedEmbedding {
    /// Standardizes `dataset` and precomputes distances (and the
    /// single-linkage hierarchy when `algorithm` needs it).
    pub fn new(name: String, dataset: &EmbeddingDataset, algorithm: Algorithm) -> Result<Self> {
        let dataset = dataset.standardize()?;
        let distances = pairwise_distances(&dataset)?;
        let classes = |scheme: LabelScheme| -> Result<Vec<i64>> {
            Ok(scheme.apply(dataset.ratings())?.into_iter().map(i64::from).collect())
        };
        let dendrogram = match algorithm {
            Algorithm::SingleLinkage => Some(build_dendrogram(&distances)?),
            _ => None,
        };
        Ok(PreparedEmbedding {
            name,
            classes_5: classes(LabelScheme::FiveClass)?,
            classes_3: classes(LabelScheme::ThreeClass)?,
            dataset,
            distances,
            dendrogram,
        })
    }

    fn classes(&self, scheme: LabelScheme) -> &[i64] {
        match scheme {
            LabelScheme::FiveClass => &self.classes_5,
            LabelScheme::ThreeClass => &self.classes_3,
        }
    }
}

struct Job {
    embedding: usize,
    value: f64,
    seed: Option<u64>,
}

fn fit_one(config: &SweepConfig, emb: &PreparedEmbedding, value: f64, seed: Option<u64>) -> Result<(ClusteringResult, Option<f64>)> {
    let as_count = || value as usize;
    match config.algorithm {
        Algorithm::Kmeans => {
            let cfg = KMeansConfig {
                k: as_count(),
                max_iter: config.kmeans_max_iter,
                seed: seed.expect("k-means jobs carry a seed"),
                tol: config.kmeans_tol,
            };
            let (model, result) = kmeans::fit(&emb.dataset, &cfg)?;
            Ok((result, Some(model.inertia)))
        }
        Algorithm::SingleLinkage => {
            let dendrogram = emb.dendrogram.as_ref().expect("prepared for single linkage");
            Ok((dendrogram.cut(as_count())?, None))
        }
        Algorithm::Dbscan => {
            let cfg = DbscanConfig {
                eps: value,
                min_samples: config.dbscan_min_samples,
            };
            Ok((dbscan::fit_precomputed(&emb.distances, &cfg)?, None))
        }
        Algorithm::Hdbscan => {
            let cfg = HdbscanConfig {
                min_cluster_size: as_count(),
                min_samples: config.hdbscan_min_samples,
            };
            Ok((hdbscan::fit_precomputed(&emb.distances, &cfg)?, None))
        }
    }
}

fn score(config: &SweepConfig, emb: &PreparedEmbedding, result: &ClusteringResult, inertia: Option<f64>) -> Result<Scores> {
    let labels = result.labels();
    let mut s = Scores {
        silhouette: silhouette(&emb.distances, labels, config.noise_policy)?,
        n_clusters: Some(result.n_clusters() as f64),
        n_noise: Some(result.count_noise() as f64),
        inertia,
        ..Scores::default()
    };
    for &scheme in config.labels.schemes() {
        let truth = emb.classes(scheme);
        let ari = Some(adjusted_rand_index(truth, labels)?);
        let pur = purity(truth, labels, config.noise_policy)?;
        match scheme {
            LabelScheme::FiveClass => {
                s.ari_5 = ari;
                s.purity_5 = pur;
            }
            LabelScheme::ThreeClass => {
                s.ari_3 = ari;
                s.purity_3 = pur;
            }
        }
    }
    Ok(s)
}

fn run_job(config: &SweepConfig, emb: &PreparedEmbedding, job: &Job) -> ScoreRecord {
    let scores = fit_one(config, emb, job.value, job.seed)
        .and_then(|(result, inertia)| score(config, emb, &result, inertia))
        .unwrap_or_else(|e| {
            warn!(
                "{} {}={} seed={:?}: {e}",
                emb.name,
                config.algorithm.grid_param(),
                job.value,
                job.seed
            );
            Scores::default()
        });
    ScoreRecord {
        kind: RowKind::Run,
        algorithm: config.algorithm,
        embedding: emb.name.clone(),
        embedding_kind: emb.dataset.kind(),
        param: config.algorithm.grid_param().to_string(),
        value: job.value,
        seed: job.seed,
        n_runs: 1,
        scores,
        sem: None,
    }
}

/// Runs the sweep over already loaded datasets, named as given.
///
/// Rows come out sorted by embedding (input order), grid value (input
/// order) and seed, each k-means grid point followed by its aggregate.
pub fn run_sweep_on(config: &SweepConfig, datasets: &[(String, EmbeddingDataset)], jobs: usize) -> Result<SweepReport> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| {
        let prepared: Vec<PreparedEmbedding> = datasets
            .iter()
            .map(|(name, ds)| {
                info!("{name}: {} samples × {} dims, standardizing", ds.n_samples(), ds.n_dims());
                PreparedEmbedding::new(name.clone(), ds, config.algorithm)
            })
            .collect::<Result<_>>()?;

        let seeds = config.effective_seeds();
        let work: Vec<Job> = (0..prepared.len())
            .flat_map(|e| {
                let seeds = &seeds;
                config.grid.iter().flat_map(move |&value| {
                    seeds.iter().map(move |&seed| Job {
                        embedding: e,
                        value,
                        seed,
                    })
                })
            })
            .collect();
        let total = work.len();
        let done = AtomicUsize::new(0);
        info!("{} {} fits on {} worker(s)", total, config.algorithm, pool.current_num_threads());
        let runs: Vec<ScoreRecord> = work
            .par_iter()
            .map(|job| {
                let rec = run_job(config, &prepared[job.embedding], job);
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if k == total || k % (total / 10).max(1) == 0 {
                    info!("{k}/{total} fits done");
                }
                rec
            })
            .collect();

        let mut rows = Vec::with_capacity(runs.len() + runs.len() / seeds.len().max(1));
        for group in runs.chunks(seeds.len()) {
            rows.extend_from_slice(group);
            if config.algorithm == Algorithm::Kmeans {
                rows.push(ScoreRecord::aggregate(group)?);
            }
        }
        Ok(SweepReport {
            metadata: ReportMetadata::new(Some(config.clone())),
            rows,
        })
    })
}

/// Loads every embedding file and runs the sweep. Any unreadable file aborts
/// the run.
pub fn run_sweep(config: &SweepConfig, jobs: usize) -> Result<SweepReport> {
    config.validate()?;
    let datasets = config
        .embeddings
        .iter()
        .map(|path| {
            info!("loading {}", path.display());
            let ds = load_embeddings(path)?;
            if ds.kind() == EmbeddingKind::Other {
                info!("{}: embedding kind not recognized from file name", path.display());
            }
            Ok((embedding_name(path), ds))
        })
        .collect::<Result<Vec<_>>>()?;
    run_sweep_on(config, &datasets, jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> EmbeddingDataset {
        let mut rows = Vec::new();
        let mut ratings = Vec::new();
        for (c, r) in [(0.0, 1u8), (10.0, 3), (20.0, 5)] {
            for i in 0..6 {
                rows.push(vec![c + i as f64 * 0.1, c - (i % 3) as f64 * 0.1]);
                ratings.push(r);
            }
        }
        EmbeddingDataset::from_rows(&rows, ratings).unwrap()
    }

    #[test]
    fn kmeans_rows_and_aggregates() {
        let mut cfg = SweepConfig::new(Algorithm::Kmeans, vec!["toy.csv".into()]);
        cfg.grid = vec![2.0, 3.0];
        cfg.seeds = vec![1, 2, 3];
        let report = run_sweep_on(&cfg, &[("toy".into(), toy())], 1).unwrap();
        assert_eq!(report.rows.len(), 2 * (3 + 1));
        assert_eq!(report.rows[3].kind, RowKind::Aggregate);
        assert_eq!(report.rows[3].n_runs, 3);
        let agg3 = &report.rows[7];
        assert_eq!(agg3.value, 3.0);
        assert!(agg3.scores.silhouette.unwrap() > 0.9);
        assert_eq!(agg3.scores.ari_5, Some(1.0));
        assert_eq!(agg3.scores.purity_3, Some(1.0));
        assert!(agg3.scores.inertia.is_some());
        assert_eq!(select_best(&report, Metric::Silhouette, None).unwrap(), 3.0);
    }

    #[test]
    fn failed_grid_point_is_recorded_undefined() {
        let mut cfg = SweepConfig::new(Algorithm::SingleLinkage, vec!["toy.csv".into()]);
        cfg.grid = vec![3.0, 40.0];
        let report = run_sweep_on(&cfg, &[("toy".into(), toy())], 1).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].scores.n_clusters, Some(3.0));
        assert_eq!(report.rows[1].scores, Scores::default());
    }

    #[test]
    fn density_sweeps_have_single_rows() {
        let mut cfg = SweepConfig::new(Algorithm::Hdbscan, vec!["toy.csv".into()]);
        cfg.grid = vec![3.0, 5.0];
        let report = run_sweep_on(&cfg, &[("toy".into(), toy())], 2).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.kind == RowKind::Run && r.seed.is_none()));
        assert_eq!(report.rows[0].scores.n_clusters, Some(3.0));
    }
}
