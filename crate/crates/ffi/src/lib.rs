//! C interface to the cluster-bench engine.
//!
//! Datasets and clustering results are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns a
//! [`CbStatus`]; on failure [`cb_last_error_message`] describes what went wrong
//! on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cluster_bench::dbscan::{self, DbscanConfig};
use cluster_bench::hdbscan::{self, HdbscanConfig};
use cluster_bench::kmeans::{self, KMeansConfig};
use cluster_bench::metrics;
use cluster_bench::{linkage, pairwise_distances, ClusteringResult, EmbeddingDataset, Error, NoisePolicy};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidDataset = 5,
    /// The requested score is undefined for this labeling.
    Undefined = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbNoisePolicy {
    ExcludeNoise = 0,
    NoiseAsCluster = 1,
}

impl From<CbNoisePolicy> for NoisePolicy {
    fn from(p: CbNoisePolicy) -> Self {
        match p {
            CbNoisePolicy::ExcludeNoise => NoisePolicy::ExcludeNoise,
            CbNoisePolicy::NoiseAsCluster => NoisePolicy::NoiseAsCluster,
        }
    }
}

/// Opaque embedding dataset.
pub struct CbDataset(EmbeddingDataset);

/// Opaque clustering result.
pub struct CbResult(ClusteringResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(CbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => CbStatus::Io,
            Error::Parse { .. } | Error::Report(_) => CbStatus::Parse,
            Error::InvalidDataset(_) => CbStatus::InvalidDataset,
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => CbStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CbStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, converting errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_last_error();
            CbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CbStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed_result(out: *mut *mut CbResult, result: ClusteringResult) -> Result<(), Failure> {
    unsafe { write_out(out, Box::into_raw(Box::new(CbResult(result))), "out") }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL after a
/// successful call. The pointer stays valid until the next call into the
/// library on the same thread.
#[no_mangle]
pub extern "C" fn cb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads an embedding CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_dataset_load(path: *const c_char, out: *mut *mut CbDataset) -> CbStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(CbStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let ds = cluster_bench::load_embeddings(path)?;
        write_out(out, Box::into_raw(Box::new(CbDataset(ds))), "out")
    })
}

/// Builds a dataset from a row-major `n_samples × n_dims` buffer and one
/// rating (1..=5) per sample.
///
/// # Safety
/// `data` must hold `n_samples * n_dims` values, `ratings` `n_samples`
/// values, and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_dataset_from_raw(
    data: *const f64,
    n_samples: usize,
    n_dims: usize,
    ratings: *const u8,
    out: *mut *mut CbDataset,
) -> CbStatus {
    guard(|| {
        let len = n_samples
            .checked_mul(n_dims)
            .ok_or_else(|| Failure(CbStatus::InvalidArgument, "n_samples * n_dims overflows".into()))?;
        let data = slice(data, len, "data")?;
        let ratings = slice(ratings, n_samples, "ratings")?;
        let rows: Vec<Vec<f64>> = if n_dims == 0 {
            vec![Vec::new(); n_samples]
        } else {
            data.chunks(n_dims).map(<[f64]>::to_vec).collect()
        };
        let ds = EmbeddingDataset::from_rows(&rows, ratings.to_vec())?;
        write_out(out, Box::into_raw(Box::new(CbDataset(ds))), "out")
    })
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `dataset` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cb_dataset_free(dataset: *mut CbDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_dataset_n_samples(dataset: *const CbDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n_samples())
}

/// Number of dimensions, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_dataset_n_dims(dataset: *const CbDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n_dims())
}

/// Writes a z-scored copy of `dataset` to `out`.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_dataset_standardize(dataset: *const CbDataset, out: *mut *mut CbDataset) -> CbStatus {
    guard(|| {
        let ds = deref(dataset, "dataset")?.0.standardize()?;
        write_out(out, Box::into_raw(Box::new(CbDataset(ds))), "out")
    })
}

/// k-means++ / Lloyd. `max_iter == 0` and `tol < 0` select the defaults.
/// `inertia` may be NULL.
///
/// # Safety
/// `dataset` must be a live handle, `out` a valid pointer, `inertia` NULL or
/// valid.
#[no_mangle]
pub unsafe extern "C" fn cb_kmeans(
    dataset: *const CbDataset,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    out: *mut *mut CbResult,
    inertia: *mut f64,
) -> CbStatus {
    guard(|| {
        let ds = &deref(dataset, "dataset")?.0;
        let mut cfg = KMeansConfig::new(k, seed);
        if max_iter > 0 {
            cfg.max_iter = max_iter;
        }
        if tol >= 0.0 {
            cfg.tol = tol;
        }
        let (model, result) = kmeans::fit(ds, &cfg)?;
        if !inertia.is_null() {
            inertia.write(model.inertia);
        }
        boxed_result(out, result)
    })
}

/// Single-linkage clustering cut into `n_clusters` groups.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_single_linkage(
    dataset: *const CbDataset,
    n_clusters: usize,
    out: *mut *mut CbResult,
) -> CbStatus {
    guard(|| {
        let result = linkage::fit(&deref(dataset, "dataset")?.0, n_clusters)?;
        boxed_result(out, result)
    })
}

/// DBSCAN with a closed `eps` ball that counts the point itself.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_dbscan(
    dataset: *const CbDataset,
    eps: f64,
    min_samples: usize,
    out: *mut *mut CbResult,
) -> CbStatus {
    guard(|| {
        let cfg = DbscanConfig { eps, min_samples };
        let result = dbscan::fit(&deref(dataset, "dataset")?.0, &cfg)?;
        boxed_result(out, result)
    })
}

/// HDBSCAN with excess-of-mass selection. `min_samples == 0` uses
/// `min_cluster_size`.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_hdbscan(
    dataset: *const CbDataset,
    min_cluster_size: usize,
    min_samples: usize,
    out: *mut *mut CbResult,
) -> CbStatus {
    guard(|| {
        let cfg = HdbscanConfig {
            min_cluster_size,
            min_samples: (min_samples > 0).then_some(min_samples),
        };
        let result = hdbscan::fit(&deref(dataset, "dataset")?.0, &cfg)?;
        boxed_result(out, result)
    })
}

/// Releases a result. NULL is ignored.
///
/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cb_result_free(result: *mut CbResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of labeled points, or 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_result_len(result: *const CbResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.len())
}

/// Number of clusters, noise excluded, or 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_result_n_clusters(result: *const CbResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.n_clusters())
}

/// Number of points labeled noise (-1), or 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cb_result_n_noise(result: *const CbResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.count_noise())
}

/// Copies the labels into `buf`, which must have room for
/// `cb_result_len(result)` values.
///
/// # Safety
/// `result` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cb_result_labels(result: *const CbResult, buf: *mut i64, len: usize) -> CbStatus {
    guard(|| {
        let labels = deref(result, "result")?.0.labels();
        if len < labels.len() {
            return Err(Failure(
                CbStatus::BufferTooSmall,
                format!("buffer holds {len} labels, need {}", labels.len()),
            ));
        }
        if labels.is_empty() {
            return Ok(());
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(labels.as_ptr(), buf, labels.len());
        Ok(())
    })
}

fn defined(value: Option<f64>, out: *mut f64, what: &str) -> Result<(), Failure> {
    let v = value.ok_or_else(|| Failure(CbStatus::Undefined, format!("{what} is undefined for this labeling")))?;
    unsafe { write_out(out, v, "out") }
}

/// Mean silhouette of `labels` over the Euclidean distances of `dataset`.
/// Returns `CB_STATUS_UNDEFINED` when fewer than two clusters remain.
///
/// # Safety
/// `dataset` must be a live handle, `labels` valid for `len` reads and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_silhouette(
    dataset: *const CbDataset,
    labels: *const i64,
    len: usize,
    policy: CbNoisePolicy,
    out: *mut f64,
) -> CbStatus {
    guard(|| {
        let ds = &deref(dataset, "dataset")?.0;
        let labels = slice(labels, len, "labels")?;
        let d = pairwise_distances(ds)?;
        defined(metrics::silhouette(&d, labels, policy.into())?, out, "silhouette")
    })
}

/// Adjusted Rand index between two labelings of `len` points.
///
/// # Safety
/// `a` and `b` must be valid for `len` reads and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_adjusted_rand_index(a: *const i64, b: *const i64, len: usize, out: *mut f64) -> CbStatus {
    guard(|| {
        let ari = metrics::adjusted_rand_index(slice(a, len, "a")?, slice(b, len, "b")?)?;
        write_out(out, ari, "out")
    })
}

/// Purity of `pred` against `truth`.
///
/// # Safety
/// `truth` and `pred` must be valid for `len` reads and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_purity(
    truth: *const i64,
    pred: *const i64,
    len: usize,
    policy: CbNoisePolicy,
    out: *mut f64,
) -> CbStatus {
    guard(|| {
        let p = metrics::purity(slice(truth, len, "truth")?, slice(pred, len, "pred")?, policy.into())?;
        defined(p, out, "purity")
    })
}
