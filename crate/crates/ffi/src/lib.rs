//! C ABI over the counterlens core.
//!
//! Conventions:
//! - Every fallible function returns a [`ClStatus`]; on failure the message is
//!   available from [`cl_last_error`] on the same thread.
//! - Counter arrays are `double[12]` in wire order (see [`cl_metric_key`]).
//! - Strings returned through `char **` are owned by the caller and must be
//!   released with [`cl_string_free`]. Strings returned directly as
//!   `const char *` stay valid as long as the handle they came from.
//! - Handles are opaque and released with their `*_free` function; passing
//!   NULL to a `*_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use counterlens::eval::relative_error;
use counterlens::predict::{extract_json, ExtractMode};
use counterlens::roofline::{
    arithmetic_intensity, attainable_performance, denormalize, normalize, CounterBlock, CounterVector, MachinePeaks,
    MemoryLevel, Metric, NormRanges, NormalizedCounters,
};
use counterlens::synth::{generate, rename_source, GeneratedKernel, KernelGenSpec};

/// Number of metrics in a counter array.
pub const CL_METRIC_COUNT: usize = 12;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    OutOfRange = 4,
    ParseError = 5,
    Panic = 6,
}

/// Memory level selector for roofline calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClMemoryLevel {
    L1 = 0,
    L2 = 1,
    Hbm = 2,
}

impl From<ClMemoryLevel> for MemoryLevel {
    fn from(l: ClMemoryLevel) -> Self {
        match l {
            ClMemoryLevel::L1 => MemoryLevel::L1,
            ClMemoryLevel::L2 => MemoryLevel::L2,
            ClMemoryLevel::Hbm => MemoryLevel::Hbm,
        }
    }
}

/// Normalization ranges.
pub struct ClRanges(NormRanges);

/// A generated kernel with its source, fingerprint and metadata.
pub struct ClKernel {
    source: CString,
    fingerprint: CString,
    inner: GeneratedKernel,
}

/// Machine peaks for one architecture.
pub struct ClPeaks(MachinePeaks);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(ClStatus, String);

impl Failure {
    fn arg(msg: impl Into<String>) -> Self {
        Failure(ClStatus::InvalidArgument, msg.into())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, recording its error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ClStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            ClStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside counterlens");
            ClStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(ClStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(ClStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(ClStatus::NullPointer, format!("{name} is NULL")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(ClStatus::NullPointer, format!("{name} is NULL")))
}

unsafe fn values_in<'a>(p: *const f64, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure(ClStatus::NullPointer, format!("{name} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, CL_METRIC_COUNT))
}

unsafe fn values_out<'a>(p: *mut f64, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure(ClStatus::NullPointer, format!("{name} is NULL")));
    }
    Ok(std::slice::from_raw_parts_mut(p, CL_METRIC_COUNT))
}

fn give_string(s: String, out: &mut *mut c_char) -> Result<(), Failure> {
    *out = CString::new(s).map_err(|_| Failure::arg("result contains a NUL byte"))?.into_raw();
    Ok(())
}

fn range_failure(e: counterlens::roofline::RooflineError) -> Failure {
    use counterlens::roofline::RooflineError as E;
    let status = match e {
        E::OutOfRange { .. } | E::NormalizedOutOfRange { .. } => ClStatus::OutOfRange,
        _ => ClStatus::InvalidArgument,
    };
    Failure(status, e.to_string())
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn cl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned through a `char **` out-parameter.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Wire key of metric `index` (0..12), or NULL when out of bounds. Static.
#[no_mangle]
pub extern "C" fn cl_metric_key(index: usize) -> *const c_char {
    static KEYS: std::sync::OnceLock<Vec<CString>> = std::sync::OnceLock::new();
    let keys = KEYS.get_or_init(|| Metric::ALL.iter().map(|m| CString::new(m.key()).unwrap()).collect());
    keys.get(index).map_or(std::ptr::null(), |k| k.as_ptr())
}

/// Default normalization ranges. Never NULL.
#[no_mangle]
pub extern "C" fn cl_ranges_default() -> *mut ClRanges {
    Box::into_raw(Box::new(ClRanges(NormRanges::default())))
}

/// Ranges from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_ranges_from_toml(toml: *const c_char, out: *mut *mut ClRanges) -> ClStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        let out = out_arg(out, "out")?;
        let ranges = NormRanges::from_toml_str(text).map_err(|e| Failure(ClStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(ClRanges(ranges)));
        Ok(())
    })
}

/// # Safety
/// `r` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cl_ranges_free(r: *mut ClRanges) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Maps physical values onto [0, 1]; no quantization.
///
/// # Safety
/// `physical` and `normalized` must point to 12 doubles.
#[no_mangle]
pub unsafe extern "C" fn cl_normalize(ranges: *const ClRanges, physical: *const f64, normalized: *mut f64) -> ClStatus {
    guard(|| {
        let ranges = &ref_arg(ranges, "ranges")?.0;
        let raw: CounterVector =
            Metric::ALL.iter().copied().zip(values_in(physical, "physical")?.iter().copied()).collect();
        let norm = normalize(&raw, ranges).map_err(range_failure)?;
        for (slot, m) in values_out(normalized, "normalized")?.iter_mut().zip(Metric::ALL) {
            *slot = norm.get(m).unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Inverse of [`cl_normalize`].
///
/// # Safety
/// `normalized` and `physical` must point to 12 doubles.
#[no_mangle]
pub unsafe extern "C" fn cl_denormalize(
    ranges: *const ClRanges,
    normalized: *const f64,
    physical: *mut f64,
) -> ClStatus {
    guard(|| {
        let ranges = &ref_arg(ranges, "ranges")?.0;
        let norm = normalized_from(values_in(normalized, "normalized")?)?;
        let raw = denormalize(&norm, ranges).map_err(range_failure)?;
        for (slot, m) in values_out(physical, "physical")?.iter_mut().zip(Metric::ALL) {
            *slot = raw.get(m).unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

fn normalized_from(values: &[f64]) -> Result<NormalizedCounters, Failure> {
    let mut norm = NormalizedCounters::new();
    for (m, &v) in Metric::ALL.iter().zip(values) {
        norm.set(*m, v).map_err(range_failure)?;
    }
    Ok(norm)
}

/// Renders the counter block text for normalized values.
///
/// # Safety
/// `architecture` and `flags` must be NUL-terminated; `normalized` must point
/// to 12 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_render_block(
    architecture: *const c_char,
    flags: *const c_char,
    normalized: *const f64,
    out: *mut *mut c_char,
) -> ClStatus {
    guard(|| {
        let block = CounterBlock {
            architecture: str_arg(architecture, "architecture")?.to_string(),
            compiler_flags: str_arg(flags, "flags")?.to_string(),
            counters: normalized_from(values_in(normalized, "normalized")?)?,
        };
        let text = block.to_json_text().map_err(range_failure)?;
        give_string(text, out_arg(out, "out")?)
    })
}

/// Recovers normalized values from model output. Metrics absent in lenient
/// mode are written as NaN.
///
/// # Safety
/// `text` must be NUL-terminated; `normalized` must point to 12 doubles.
#[no_mangle]
pub unsafe extern "C" fn cl_extract(text: *const c_char, lenient: bool, normalized: *mut f64) -> ClStatus {
    guard(|| {
        let mode = if lenient { ExtractMode::Lenient } else { ExtractMode::Strict };
        let got =
            extract_json(str_arg(text, "text")?, mode).map_err(|e| Failure(ClStatus::ParseError, e.to_string()))?;
        for (slot, m) in values_out(normalized, "normalized")?.iter_mut().zip(Metric::ALL) {
            *slot = got.counters.get(m).unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Generates a kernel from a JSON spec object.
///
/// # Safety
/// `spec_json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_kernel_generate(spec_json: *const c_char, out: *mut *mut ClKernel) -> ClStatus {
    guard(|| {
        let spec: KernelGenSpec = serde_json::from_str(str_arg(spec_json, "spec_json")?)
            .map_err(|e| Failure(ClStatus::ParseError, e.to_string()))?;
        let out = out_arg(out, "out")?;
        let k = generate(&spec).map_err(|e| Failure::arg(e.to_string()))?;
        *out = Box::into_raw(Box::new(kernel_handle(k)?));
        Ok(())
    })
}

fn kernel_handle(k: GeneratedKernel) -> Result<ClKernel, Failure> {
    let nul = |_| Failure::arg("kernel text contains a NUL byte");
    Ok(ClKernel {
        source: CString::new(k.source.clone()).map_err(nul)?,
        fingerprint: CString::new(k.fingerprint.clone()).map_err(nul)?,
        inner: k,
    })
}

/// Kernel source; NULL for a NULL handle.
///
/// # Safety
/// `k` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cl_kernel_source(k: *const ClKernel) -> *const c_char {
    k.as_ref().map_or(std::ptr::null(), |k| k.source.as_ptr())
}

/// Structural fingerprint; NULL for a NULL handle.
///
/// # Safety
/// `k` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cl_kernel_fingerprint(k: *const ClKernel) -> *const c_char {
    k.as_ref().map_or(std::ptr::null(), |k| k.fingerprint.as_ptr())
}

/// Kernel metadata as a JSON object.
///
/// # Safety
/// `k` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_kernel_metadata_json(k: *const ClKernel, out: *mut *mut c_char) -> ClStatus {
    guard(|| {
        let k = ref_arg(k, "kernel")?;
        let json = serde_json::to_string(&k.inner.metadata).map_err(|e| Failure::arg(e.to_string()))?;
        give_string(json, out_arg(out, "out")?)
    })
}

/// # Safety
/// `k` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cl_kernel_free(k: *mut ClKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Alpha-renames every non-reserved identifier of `source`.
///
/// # Safety
/// `source` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_rename(source: *const c_char, seed: u64, out: *mut *mut c_char) -> ClStatus {
    guard(|| {
        let (renamed, _) = rename_source(str_arg(source, "source")?, seed)
            .map_err(|e| Failure(ClStatus::ParseError, e.to_string()))?;
        give_string(renamed, out_arg(out, "out")?)
    })
}

/// `|pred - truth| / truth`. `*counted` is false, and `*out` untouched, when
/// `truth < epsilon`.
///
/// # Safety
/// `out` and `counted` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_relative_error(
    pred: f64,
    truth: f64,
    epsilon: f64,
    out: *mut f64,
    counted: *mut bool,
) -> ClStatus {
    guard(|| {
        let (out, counted) = (out_arg(out, "out")?, out_arg(counted, "counted")?);
        match relative_error(pred, truth, epsilon).map_err(|e| Failure::arg(e.to_string()))? {
            Some(e) => {
                *out = e;
                *counted = true;
            }
            None => *counted = false,
        }
        Ok(())
    })
}

/// FLOPs per byte.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_arithmetic_intensity(flops: f64, bytes: f64, out: *mut f64) -> ClStatus {
    guard(|| {
        *out_arg(out, "out")? = arithmetic_intensity(flops, bytes).map_err(range_failure)?;
        Ok(())
    })
}

/// Built-in peaks for `architecture`.
///
/// # Safety
/// `architecture` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_peaks_builtin(architecture: *const c_char, out: *mut *mut ClPeaks) -> ClStatus {
    guard(|| {
        let arch = str_arg(architecture, "architecture")?;
        let out = out_arg(out, "out")?;
        let peaks = MachinePeaks::builtin(arch).ok_or_else(|| Failure::arg(format!("no built-in peaks for {arch}")))?;
        *out = Box::into_raw(Box::new(ClPeaks(peaks)));
        Ok(())
    })
}

/// Peaks from a compute ceiling (GFLOP/s) and L1, L2, HBM bandwidths (GB/s).
///
/// # Safety
/// `architecture` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_peaks_new(
    architecture: *const c_char,
    peak_gflops: f64,
    l1_gbps: f64,
    l2_gbps: f64,
    hbm_gbps: f64,
    out: *mut *mut ClPeaks,
) -> ClStatus {
    guard(|| {
        let arch = str_arg(architecture, "architecture")?;
        let out = out_arg(out, "out")?;
        let peaks = MachinePeaks::new(
            arch,
            peak_gflops,
            [(MemoryLevel::L1, l1_gbps), (MemoryLevel::L2, l2_gbps), (MemoryLevel::Hbm, hbm_gbps)],
        )
        .map_err(range_failure)?;
        *out = Box::into_raw(Box::new(ClPeaks(peaks)));
        Ok(())
    })
}

/// # Safety
/// `p` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cl_peaks_free(p: *mut ClPeaks) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Attainable GFLOP/s at intensity `ai` under the `level` bandwidth roof.
///
/// # Safety
/// `peaks` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cl_attainable_performance(
    peaks: *const ClPeaks,
    level: ClMemoryLevel,
    ai: f64,
    out: *mut f64,
) -> ClStatus {
    guard(|| {
        let peaks = &ref_arg(peaks, "peaks")?.0;
        *out_arg(out, "out")? = attainable_performance(peaks, level.into(), ai).map_err(range_failure)?;
        Ok(())
    })
}
