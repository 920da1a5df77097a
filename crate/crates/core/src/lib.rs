//! Clustering benchmark engine for text-embedding matrices.
//!
//! Loads embedding CSVs, runs k-means, single linkage, DBSCAN and HDBSCAN
//! over hyperparameter grids, and scores each fit with silhouette, adjusted
//! Rand index and cluster purity.
//!
//! ```
//! use cluster_bench::dataset::EmbeddingDataset;
//! use cluster_bench::dbscan::{self, DbscanConfig};
//!
//! let rows = vec![vec![0.0], vec![0.1], vec![0.2], vec![9.0], vec![9.1], vec![9.2]];
//! let data = EmbeddingDataset::from_rows(&rows, vec![1, 1, 1, 5, 5, 5]).unwrap();
//! let result = dbscan::fit(&data, &DbscanConfig { eps: 0.5, min_samples: 3 }).unwrap();
//! assert_eq!(result.n_clusters(), 2);
//! ```

pub mod dataset;
pub mod dbscan;
pub mod distance;
pub mod error;
pub mod hdbscan;
pub mod kmeans;
pub mod linkage;
pub mod metrics;
pub mod mst;
pub mod result;
pub mod sweep;

pub use dataset::{load_embeddings, write_embeddings, EmbeddingDataset, EmbeddingKind, LabelScheme};
pub use distance::{euclidean_distance, pairwise_distances, DistanceMatrix};
pub use error::{Error, Result};
pub use metrics::NoisePolicy;
pub use result::{Algorithm, ClusteringResult, NOISE};
