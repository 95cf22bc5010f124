//! C ABI over the clustering engine: opaque handles, status codes, and a
//! thread-local last-error message. The generated header lives in
//! `include/lwclust.h`.
//!
//! Ownership rules: constructors hand back a pointer through an out
//! parameter and the matching `_free` function releases it. Passing null
//! where a handle is required returns `LW_STATUS_NULL_POINTER`; all other
//! failures return `LW_STATUS_INVALID_INPUT` or `LW_STATUS_RUN_FAILED` and
//! store a message retrievable with `lw_last_error`.

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use lwclust::transport::InProcTransport;
use lwclust::{
    run_distributed, serial_cluster, CondensedMatrix, Dendrogram, EngineOptions, Error, Execution,
    LinkageScheme,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LwStatus {
    Ok = 0,
    NullPointer = 1,
    /// Rejected data or arguments (bad distances, wrong lengths, k out of
    /// range, zero workers).
    InvalidInput = 2,
    /// A clustering run failed internally (transport or protocol fault).
    RunFailed = 3,
    /// The caller's buffer is too small.
    BufferTooSmall = 4,
    /// A panic was caught at the boundary.
    Panic = 5,
}

/// Linkage scheme selector, mirroring the six supported schemes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LwScheme {
    Single = 0,
    Complete = 1,
    GroupAverage = 2,
    WeightedAverage = 3,
    Centroid = 4,
    Ward = 5,
}

impl From<LwScheme> for LinkageScheme {
    fn from(scheme: LwScheme) -> Self {
        match scheme {
            LwScheme::Single => LinkageScheme::Single,
            LwScheme::Complete => LinkageScheme::Complete,
            LwScheme::GroupAverage => LinkageScheme::GroupAverage,
            LwScheme::WeightedAverage => LinkageScheme::WeightedAverage,
            LwScheme::Centroid => LinkageScheme::Centroid,
            LwScheme::Ward => LinkageScheme::Ward,
        }
    }
}

/// One merge record: `left`/`right` are cluster ids (leaves `0..n-1`, merge
/// k creates `n+k`), `height` the merge distance, `size` the new cluster's
/// member count.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LwMerge {
    pub left: u64,
    pub right: u64,
    pub height: f64,
    pub size: u64,
}

/// Opaque distance matrix handle.
pub struct LwMatrix(CondensedMatrix);

/// Opaque dendrogram handle.
pub struct LwDendrogram(Dendrogram);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.into());
}

fn status_of(error: &Error) -> LwStatus {
    if error.is_internal() {
        LwStatus::RunFailed
    } else {
        LwStatus::InvalidInput
    }
}

fn guarded(body: impl FnOnce() -> LwStatus) -> LwStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic caught at the C boundary");
            LwStatus::Panic
        }
    }
}

/// Copies the last error message for this thread into `buffer` (always
/// NUL-terminated when `len > 0`) and returns the full length of the
/// message including the NUL, so callers can size a retry.
/// # Safety
///
/// `buffer` must be null or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lw_last_error(buffer: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buffer.is_null() && len > 0 {
            let copy = bytes.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buffer.cast::<u8>(), copy);
                *buffer.add(copy) = 0;
            }
        }
        bytes.len() + 1
    })
}

/// Builds a matrix from its condensed upper-triangle cells (`len` must be
/// `items*(items-1)/2`). Distances must be finite and non-negative.
/// # Safety
///
/// `cells` must be null or valid for `len` reads; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn lw_matrix_from_condensed(
    items: usize,
    cells: *const f64,
    len: usize,
    out: *mut *mut LwMatrix,
) -> LwStatus {
    guarded(|| {
        if out.is_null() || (cells.is_null() && len > 0) {
            set_error("null pointer argument");
            return LwStatus::NullPointer;
        }
        let values = if len == 0 {
            Vec::new()
        } else {
            unsafe { std::slice::from_raw_parts(cells, len) }.to_vec()
        };
        match CondensedMatrix::new(items, values) {
            Ok(matrix) => {
                unsafe { *out = Box::into_raw(Box::new(LwMatrix(matrix))) };
                LwStatus::Ok
            }
            Err(error) => {
                set_error(error.to_string());
                status_of(&error)
            }
        }
    })
}

/// Builds a matrix of pairwise Euclidean distances from `count` points of
/// `dims` coordinates each, laid out row-major.
/// # Safety
///
/// `points` must be null or valid for `count * dims` reads; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn lw_matrix_from_points(
    points: *const f64,
    count: usize,
    dims: usize,
    out: *mut *mut LwMatrix,
) -> LwStatus {
    guarded(|| {
        if out.is_null() || (points.is_null() && count * dims > 0) {
            set_error("null pointer argument");
            return LwStatus::NullPointer;
        }
        let flat = if count * dims == 0 {
            &[][..]
        } else {
            unsafe { std::slice::from_raw_parts(points, count * dims) }
        };
        let distance = |i: usize, j: usize| {
            let a = &flat[i * dims..(i + 1) * dims];
            let b = &flat[j * dims..(j + 1) * dims];
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        match CondensedMatrix::from_fn(count, distance) {
            Ok(matrix) => {
                unsafe { *out = Box::into_raw(Box::new(LwMatrix(matrix))) };
                LwStatus::Ok
            }
            Err(error) => {
                set_error(error.to_string());
                status_of(&error)
            }
        }
    })
}

/// Number of items the matrix covers; 0 for null.
/// # Safety
///
/// `matrix` must be null or a live handle from a constructor.
#[no_mangle]
pub unsafe extern "C" fn lw_matrix_items(matrix: *const LwMatrix) -> usize {
    if matrix.is_null() {
        return 0;
    }
    unsafe { &*matrix }.0.items()
}

/// # Safety
///
/// `matrix` must be null or a live handle, which is consumed.
#[no_mangle]
pub unsafe extern "C" fn lw_matrix_free(matrix: *mut LwMatrix) {
    if !matrix.is_null() {
        drop(unsafe { Box::from_raw(matrix) });
    }
}

unsafe fn cluster_common(
    matrix: *const LwMatrix,
    out: *mut *mut LwDendrogram,
    run: impl FnOnce(&CondensedMatrix) -> Result<Dendrogram, Error>,
) -> LwStatus {
    if matrix.is_null() || out.is_null() {
        set_error("null pointer argument");
        return LwStatus::NullPointer;
    }
    let matrix = unsafe { &*matrix };
    match run(&matrix.0) {
        Ok(dendrogram) => {
            unsafe { *out = Box::into_raw(Box::new(LwDendrogram(dendrogram))) };
            LwStatus::Ok
        }
        Err(error) => {
            set_error(error.to_string());
            status_of(&error)
        }
    }
}

/// Serial clustering.
/// # Safety
///
/// `matrix` must be null or a live handle; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn lw_cluster_serial(
    matrix: *const LwMatrix,
    scheme: LwScheme,
    out: *mut *mut LwDendrogram,
) -> LwStatus {
    guarded(|| cluster_common(matrix, out, |m| Ok(serial_cluster(m, scheme.into()))))
}

/// Distributed clustering over `workers` threads; the output is identical
/// to `lw_cluster_serial` for every worker count.
/// # Safety
///
/// `matrix` must be null or a live handle; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn lw_cluster_distributed(
    matrix: *const LwMatrix,
    scheme: LwScheme,
    workers: usize,
    out: *mut *mut LwDendrogram,
) -> LwStatus {
    guarded(|| {
        cluster_common(matrix, out, |m| {
            let transport = InProcTransport::new(workers);
            let options = EngineOptions { execution: Execution::Threaded, trace: false };
            Ok(run_distributed(m, scheme.into(), &transport, &options)?.dendrogram)
        })
    })
}

/// Number of original items (leaves); 0 for null.
/// # Safety
///
/// `dendrogram` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lw_dendrogram_items(dendrogram: *const LwDendrogram) -> usize {
    if dendrogram.is_null() {
        return 0;
    }
    unsafe { &*dendrogram }.0.items()
}

/// Number of merges (`items - 1` for non-degenerate inputs); 0 for null.
/// # Safety
///
/// `dendrogram` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lw_dendrogram_merge_count(dendrogram: *const LwDendrogram) -> usize {
    if dendrogram.is_null() {
        return 0;
    }
    unsafe { &*dendrogram }.0.merges().len()
}

/// Copies merge `index` into `out`.
/// # Safety
///
/// `dendrogram` must be null or a live handle; `out` must be valid for one record write.
#[no_mangle]
pub unsafe extern "C" fn lw_dendrogram_merge_at(
    dendrogram: *const LwDendrogram,
    index: usize,
    out: *mut LwMerge,
) -> LwStatus {
    guarded(|| {
        if dendrogram.is_null() || out.is_null() {
            set_error("null pointer argument");
            return LwStatus::NullPointer;
        }
        let merges = unsafe { &*dendrogram }.0.merges();
        let Some(merge) = merges.get(index) else {
            set_error(format!("merge index {index} out of range ({} merges)", merges.len()));
            return LwStatus::InvalidInput;
        };
        unsafe {
            *out = LwMerge {
                left: merge.left as u64,
                right: merge.right as u64,
                height: merge.height,
                size: merge.size as u64,
            };
        }
        LwStatus::Ok
    })
}

/// Writes the `k`-cluster flat labels (one per item, `0..k-1` in order of
/// first appearance) into `labels`, which must hold at least
/// `lw_dendrogram_items` entries.
/// # Safety
///
/// `dendrogram` must be null or a live handle; `labels` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lw_dendrogram_cut(
    dendrogram: *const LwDendrogram,
    k: usize,
    labels: *mut u64,
    len: usize,
) -> LwStatus {
    guarded(|| {
        if dendrogram.is_null() || labels.is_null() {
            set_error("null pointer argument");
            return LwStatus::NullPointer;
        }
        let dendrogram = unsafe { &*dendrogram };
        let items = dendrogram.0.items();
        if len < items {
            set_error(format!("label buffer holds {len} entries; {items} required"));
            return LwStatus::BufferTooSmall;
        }
        match dendrogram.0.cluster_labels(k) {
            Ok(assignment) => {
                let out = unsafe { std::slice::from_raw_parts_mut(labels, items) };
                for (slot, label) in out.iter_mut().zip(assignment) {
                    *slot = label as u64;
                }
                LwStatus::Ok
            }
            Err(error) => {
                set_error(error.to_string());
                status_of(&error)
            }
        }
    })
}

/// Writes the dendrogram's hex SHA-256 digest (64 characters plus NUL;
/// `len` must be at least 65). Two dendrograms share a digest exactly when
/// they are bitwise identical.
/// # Safety
///
/// `dendrogram` must be null or a live handle; `buffer` must be null or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lw_dendrogram_digest(
    dendrogram: *const LwDendrogram,
    buffer: *mut c_char,
    len: usize,
) -> LwStatus {
    guarded(|| {
        if dendrogram.is_null() || buffer.is_null() {
            set_error("null pointer argument");
            return LwStatus::NullPointer;
        }
        let digest = unsafe { &*dendrogram }.0.digest();
        if len < digest.len() + 1 {
            set_error(format!("digest buffer holds {len} bytes; {} required", digest.len() + 1));
            return LwStatus::BufferTooSmall;
        }
        unsafe {
            std::ptr::copy_nonoverlapping(digest.as_ptr(), buffer.cast::<u8>(), digest.len());
            *buffer.add(digest.len()) = 0;
        }
        LwStatus::Ok
    })
}

/// # Safety
///
/// `dendrogram` must be null or a live handle, which is consumed.
#[no_mangle]
pub unsafe extern "C" fn lw_dendrogram_free(dendrogram: *mut LwDendrogram) {
    if !dendrogram.is_null() {
        drop(unsafe { Box::from_raw(dendrogram) });
    }
}
