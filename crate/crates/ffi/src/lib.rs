//! C ABI over the segmentation engine.
//!
//! Every fallible function returns an [`LsStatus`]; on failure the message is
//! available from [`ls_last_error`] on the same thread. Handles are opaque and
//! must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::path::Path;
use std::ptr;

use loadseg::dataset::{load_csv, IngestOptions, ProfileSet};
use loadseg::distance;
use loadseg::engines::ClusterLibrary;
use loadseg::evaluation;
use loadseg::pipeline::{benchmark, two_stage, PipelineConfig};
use loadseg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Data = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// A cleaned set of equal-length daily profiles.
pub struct LsProfileSet {
    inner: ProfileSet,
}

/// A cluster library produced by the two-stage method or the benchmark.
pub struct LsLibrary {
    inner: ClusterLibrary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let msg = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> LsStatus {
    if matches!(err, Error::Io { .. }) {
        LsStatus::Io
    } else if err.is_usage() {
        LsStatus::InvalidArgument
    } else if err.is_numerical() {
        LsStatus::Numerical
    } else {
        LsStatus::Data
    }
}

struct Fail(LsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail> + UnwindSafe>(f: F) -> LsStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => LsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LsStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(LsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn band_arg(band: i64) -> Option<usize> {
    usize::try_from(band).ok()
}

fn config_arg(json: &str) -> Result<PipelineConfig, Fail> {
    if json.trim().is_empty() {
        return Ok(PipelineConfig::default());
    }
    PipelineConfig::from_json_str(json).map_err(|e| Fail(LsStatus::InvalidArgument, e.to_string()))
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a long-format meter CSV (`timestamp,household_id,power_kw`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ls_profile_set_from_csv(
    path: *const c_char,
    resolution_minutes: u32,
    normalize: bool,
    out: *mut *mut LsProfileSet,
) -> LsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let options = IngestOptions {
            resolution_minutes,
            normalize,
        };
        let (inner, _) = load_csv(Path::new(path), &options)?;
        *out = Box::into_raw(Box::new(LsProfileSet { inner }));
        Ok(())
    })
}

/// Builds a profile set from a row-major `n_profiles * samples_per_day` buffer.
///
/// # Safety
/// `values` must point to `n_profiles * samples_per_day` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_profile_set_from_rows(
    values: *const f64,
    n_profiles: usize,
    samples_per_day: usize,
    out: *mut *mut LsProfileSet,
) -> LsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n_profiles
            .checked_mul(samples_per_day)
            .ok_or_else(|| Fail(LsStatus::InvalidArgument, "buffer size overflows".into()))?;
        let values = slice_arg(values, len, "values")?;
        let rows = if samples_per_day == 0 {
            vec![Vec::new(); n_profiles]
        } else {
            values.chunks(samples_per_day).map(<[f64]>::to_vec).collect()
        };
        let inner = ProfileSet::from_rows(rows)?;
        *out = Box::into_raw(Box::new(LsProfileSet { inner }));
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ls_profile_set_free(set: *mut LsProfileSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of profiles, or 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_profile_set_len(set: *const LsProfileSet) -> usize {
    set.as_ref().map_or(0, |s| s.inner.len())
}

/// Samples per profile, or 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_profile_set_samples_per_day(set: *const LsProfileSet) -> usize {
    set.as_ref().map_or(0, |s| s.inner.samples_per_day())
}

/// Runs the two-stage method. `config_json` is a pipeline configuration
/// document (its input and output keys are ignored); null or empty selects the defaults.
///
/// # Safety
/// `set` must be a live handle, `config_json` null or NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ls_two_stage(
    set: *const LsProfileSet,
    config_json: *const c_char,
    out: *mut *mut LsLibrary,
) -> LsStatus {
    guard(|| {
        let set = handle(set, "set")?;
        let json = if config_json.is_null() { "" } else { str_arg(config_json, "config_json")? };
        if out.is_null() {
            return Err(null("out"));
        }
        let config = config_arg(json)?;
        let result = two_stage(&set.inner, &config)?;
        *out = Box::into_raw(Box::new(LsLibrary { inner: result.library }));
        Ok(())
    })
}

/// Runs the engine directly at `k_final` with Euclidean-mean centroids.
///
/// # Safety
/// Same contract as [`ls_two_stage`].
#[no_mangle]
pub unsafe extern "C" fn ls_benchmark(
    set: *const LsProfileSet,
    config_json: *const c_char,
    out: *mut *mut LsLibrary,
) -> LsStatus {
    guard(|| {
        let set = handle(set, "set")?;
        let json = if config_json.is_null() { "" } else { str_arg(config_json, "config_json")? };
        if out.is_null() {
            return Err(null("out"));
        }
        let config = config_arg(json)?;
        let (inner, _) = benchmark(&set.inner, &config)?;
        *out = Box::into_raw(Box::new(LsLibrary { inner }));
        Ok(())
    })
}

/// # Safety
/// `lib` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ls_library_free(lib: *mut LsLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

/// Number of clusters, or 0 for a null handle.
///
/// # Safety
/// `lib` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_library_k(lib: *const LsLibrary) -> usize {
    lib.as_ref().map_or(0, |l| l.inner.k())
}

/// Id and size of the cluster at `index`.
///
/// # Safety
/// `lib` must be a live handle; `id` and `size` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ls_library_cluster(
    lib: *const LsLibrary,
    index: usize,
    id: *mut usize,
    size: *mut usize,
) -> LsStatus {
    guard(|| {
        let lib = handle(lib, "lib")?;
        if id.is_null() || size.is_null() {
            return Err(null("output pointer"));
        }
        let c = lib
            .inner
            .clusters()
            .get(index)
            .ok_or_else(|| Fail(LsStatus::InvalidArgument, format!("cluster index {index} out of range")))?;
        *id = c.id;
        *size = c.len();
        Ok(())
    })
}

/// Copies the centroid of the cluster at `index` into `buf`, which holds `len` doubles.
///
/// # Safety
/// `lib` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ls_library_centroid(
    lib: *const LsLibrary,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> LsStatus {
    guard(|| {
        let lib = handle(lib, "lib")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let c = lib
            .inner
            .clusters()
            .get(index)
            .ok_or_else(|| Fail(LsStatus::InvalidArgument, format!("cluster index {index} out of range")))?;
        if len != c.centroid.len() {
            return Err(Fail(
                LsStatus::InvalidArgument,
                format!("buffer holds {len} values, centroid has {}", c.centroid.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&c.centroid);
        Ok(())
    })
}

/// Writes the cluster id of every profile into `buf`, which holds `len` entries.
///
/// # Safety
/// `lib` must be a live handle and `buf` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn ls_library_assignments(lib: *const LsLibrary, buf: *mut usize, len: usize) -> LsStatus {
    guard(|| {
        let lib = handle(lib, "lib")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != lib.inner.n_profiles() {
            return Err(Fail(
                LsStatus::InvalidArgument,
                format!("buffer holds {len} entries, library covers {}", lib.inner.n_profiles()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for (slot, pos) in out.iter_mut().zip(lib.inner.assignments()) {
            *slot = lib.inner.clusters()[pos].id;
        }
        Ok(())
    })
}

/// Weighted average centroid-member correlation of `lib` over `set`.
///
/// # Safety
/// Both handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ls_library_wac(set: *const LsProfileSet, lib: *const LsLibrary, out: *mut f64) -> LsStatus {
    guard(|| {
        let set = handle(set, "set")?;
        let lib = handle(lib, "lib")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = evaluation::wac(&set.inner, &lib.inner)?;
        Ok(())
    })
}

/// DTW between two series. A negative `band` means unconstrained.
///
/// # Safety
/// `p` and `q` must hold `n` and `m` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_dtw(p: *const f64, n: usize, q: *const f64, m: usize, band: i64, out: *mut f64) -> LsStatus {
    guard(|| {
        let (p, q) = (slice_arg(p, n, "p")?, slice_arg(q, m, "q")?);
        if out.is_null() {
            return Err(null("out"));
        }
        *out = distance::dtw(p, q, band_arg(band))?;
        Ok(())
    })
}

/// Complexity-invariant DTW. A negative `band` means unconstrained.
///
/// # Safety
/// Same contract as [`ls_dtw`].
#[no_mangle]
pub unsafe extern "C" fn ls_cidtw(
    p: *const f64,
    n: usize,
    q: *const f64,
    m: usize,
    band: i64,
    out: *mut f64,
) -> LsStatus {
    guard(|| {
        let (p, q) = (slice_arg(p, n, "p")?, slice_arg(q, m, "q")?);
        if out.is_null() {
            return Err(null("out"));
        }
        *out = distance::cidtw(p, q, band_arg(band))?;
        Ok(())
    })
}
