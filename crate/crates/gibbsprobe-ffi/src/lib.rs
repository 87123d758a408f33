//! C ABI for the `gibbsprobe` library.
//!
//! Conventions:
//!
//! * Every function returns a [`GpStatus`]; results travel through `out`
//!   pointers. `GP_STATUS_OK` is zero.
//! * Handles (`GpModel`, `GpNoise`, `GpSampleSet`) are opaque. Each
//!   `*_new`/`*_read_*`/producer call transfers ownership to the caller, who
//!   must release it with the matching `*_free`. `NULL` is always accepted
//!   by the `free` functions.
//! * Strings returned by the library (`gp_model_to_json`) are NUL-terminated
//!   and must be released with [`gp_string_free`]. Strings passed in must be
//!   NUL-terminated UTF-8.
//! * On failure, a human-readable message for the most recent failing call
//!   on the current thread is available via [`gp_last_error_message`]; the
//!   pointer stays valid until the next library call on the same thread.
//! * Every entry point catches panics and converts them to
//!   `GP_STATUS_PANIC`; panics never cross the FFI boundary.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use gibbsprobe::learn::{learn_model, LearnConfig, LearnError, WeightedData};
use gibbsprobe::model::{
    exact_distribution, model_from_json, model_to_json, read_model, write_model, GibbsModel,
    ModelError,
};
use gibbsprobe::oracle::{effective_coupling, effective_field, OracleError, ToySpec2, ToySpec3};
use gibbsprobe::sampler::{
    read_noise, read_sample_file, sample_exact, sample_noisy, write_sample_file, NoiseSpec,
    SampleSet, SamplerError,
};
use gibbsprobe::single_qubit::{estimate_hout, HoutEstimate, SingleQubitError};

/// Status code returned by every library call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument was rejected; see `gp_last_error_message`.
    InvalidArgument = 2,
    /// A file could not be read or written.
    Io = 3,
    /// A string argument was not valid UTF-8.
    Utf8 = 4,
    /// An internal panic was caught; see `gp_last_error_message`.
    Panic = 5,
}

/// Opaque handle to an interaction model.
pub struct GpModel {
    inner: GibbsModel,
}

/// Opaque handle to a noise-layer description.
pub struct GpNoise {
    inner: NoiseSpec,
}

/// Opaque handle to a set of observed configurations with multiplicities.
pub struct GpSampleSet {
    inner: SampleSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let stored = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained NUL bytes").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: GpStatus, message: impl Into<String>) -> GpStatus {
    set_error(message.into());
    status
}

/// Runs `f` with panic containment; the error slot is cleared first so that
/// `gp_last_error_message` always describes the most recent call.
fn guarded(f: impl FnOnce() -> GpStatus) -> GpStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(GpStatus::Panic, format!("internal panic: {message}"))
        }
    }
}

fn model_status(error: &ModelError) -> GpStatus {
    match error {
        ModelError::Io { .. } => GpStatus::Io,
        _ => GpStatus::InvalidArgument,
    }
}

fn sampler_status(error: &SamplerError) -> GpStatus {
    match error {
        SamplerError::Io { .. } => GpStatus::Io,
        _ => GpStatus::InvalidArgument,
    }
}

fn learn_status(_: &LearnError) -> GpStatus {
    GpStatus::InvalidArgument
}

fn oracle_status(_: &OracleError) -> GpStatus {
    GpStatus::InvalidArgument
}

fn single_qubit_status(_: &SingleQubitError) -> GpStatus {
    GpStatus::InvalidArgument
}

/// Reads a NUL-terminated UTF-8 string argument.
///
/// # Safety
/// `ptr` must point to a NUL-terminated buffer or be NULL.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, GpStatus> {
    if ptr.is_null() {
        return Err(fail(GpStatus::NullPointer, format!("{name} is NULL")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(GpStatus::Utf8, format!("{name} is not valid UTF-8")))
}

unsafe fn path_arg(ptr: *const c_char, name: &str) -> Result<PathBuf, GpStatus> {
    unsafe { utf8_arg(ptr, name) }.map(PathBuf::from)
}

unsafe fn handle_ref<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, GpStatus> {
    if ptr.is_null() {
        Err(fail(GpStatus::NullPointer, format!("{name} is NULL")))
    } else {
        Ok(unsafe { &*ptr })
    }
}

unsafe fn handle_mut<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, GpStatus> {
    if ptr.is_null() {
        Err(fail(GpStatus::NullPointer, format!("{name} is NULL")))
    } else {
        Ok(unsafe { &mut *ptr })
    }
}

unsafe fn out_slot<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, GpStatus> {
    unsafe { handle_mut(ptr, name) }
}

unsafe fn spins_arg<'a>(
    spins: *const usize,
    n_terms: usize,
    name: &str,
) -> Result<&'a [usize], GpStatus> {
    if n_terms == 0 {
        return Err(fail(
            GpStatus::InvalidArgument,
            format!("{name} must contain at least one index"),
        ));
    }
    if spins.is_null() {
        return Err(fail(GpStatus::NullPointer, format!("{name} is NULL")));
    }
    Ok(unsafe { std::slice::from_raw_parts(spins, n_terms) })
}

// ---------------------------------------------------------------------------
// Library metadata and error reporting
// ---------------------------------------------------------------------------

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Returns the message for the most recent failing call on this thread, or
/// NULL if the most recent call succeeded. The pointer is invalidated by the
/// next library call on the same thread; copy the string if you keep it.
#[no_mangle]
pub extern "C" fn gp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `text` must be a pointer previously returned by `gp_model_to_json` (or
/// NULL) and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(unsafe { CString::from_raw(text) });
    }
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Creates an empty model on `n_spins` spins.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_model_new(n_spins: usize, out: *mut *mut GpModel) -> GpStatus {
    guarded(|| {
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match GibbsModel::new(n_spins) {
            Ok(inner) => {
                *slot = Box::into_raw(Box::new(GpModel { inner }));
                GpStatus::Ok
            }
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Releases a model handle. NULL is ignored.
///
/// # Safety
/// `model` must be a handle from this library (or NULL) and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_model_free(model: *mut GpModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Parses a model from JSON text.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_model_read_json(
    json: *const c_char,
    out: *mut *mut GpModel,
) -> GpStatus {
    guarded(|| {
        let text = match unsafe { utf8_arg(json, "json") } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match model_from_json(text, "<string>") {
            Ok(inner) => {
                *slot = Box::into_raw(Box::new(GpModel { inner }));
                GpStatus::Ok
            }
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Serialises a model to JSON. The returned string must be released with
/// `gp_string_free`.
///
/// # Safety
/// `model` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_model_to_json(
    model: *const GpModel,
    out: *mut *mut c_char,
) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(model, "model") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let text = model_to_json(&handle.inner);
        match CString::new(text) {
            Ok(s) => {
                *slot = s.into_raw();
                GpStatus::Ok
            }
            Err(_) => fail(GpStatus::Panic, "serialised text contained NUL"),
        }
    })
}

/// Reads a model from a JSON file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_model_read_file(
    path: *const c_char,
    out: *mut *mut GpModel,
) -> GpStatus {
    guarded(|| {
        let path = match unsafe { path_arg(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match read_model(&path) {
            Ok(inner) => {
                *slot = Box::into_raw(Box::new(GpModel { inner }));
                GpStatus::Ok
            }
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Writes a model to a JSON file.
///
/// # Safety
/// `model` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_model_write_file(
    model: *const GpModel,
    path: *const c_char,
) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(model, "model") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let path = match unsafe { path_arg(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match write_model(&handle.inner, &path) {
            Ok(()) => GpStatus::Ok,
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Reports the number of spins of a model.
///
/// # Safety
/// `model` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_model_n_spins(model: *const GpModel, out: *mut usize) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(model, "model") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        *slot = handle.inner.n_spins();
        GpStatus::Ok
    })
}

/// Reports the number of stored (non-zero) interaction terms.
///
/// # Safety
/// `model` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_model_num_terms(model: *const GpModel, out: *mut usize) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(model, "model") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        *slot = handle.inner.num_terms();
        GpStatus::Ok
    })
}

/// Sets the coefficient of the interaction on the given strictly increasing
/// spin indices (`n_spins` of them). Zero values are stored explicitly, like
/// any other coefficient.
///
/// # Safety
/// `model` must be a live handle; `spins` must point to `n_spins` indices.
#[no_mangle]
pub unsafe extern "C" fn gp_model_set_term(
    model: *mut GpModel,
    spins: *const usize,
    n_spins: usize,
    value: f64,
) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_mut(model, "model") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let key = match unsafe { spins_arg(spins, n_spins, "spins") } {
            Ok(k) => k,
            Err(status) => return status,
        };
        match handle.inner.set_term(key, value) {
            Ok(()) => GpStatus::Ok,
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Reads the coefficient of the interaction on the given spin indices
/// (zero when the term is absent).
///
/// # Safety
/// `model` must be a live handle; `spins` must point to `n_spins` indices;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_model_get_term(
    model: *const GpModel,
    spins: *const usize,
    n_spins: usize,
    out: *mut f64,
) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(model, "model") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let key = match unsafe { spins_arg(spins, n_spins, "spins") } {
            Ok(k) => k,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        *slot = handle.inner.term(key);
        GpStatus::Ok
    })
}

/// Evaluates the energy of the configuration with the given little-endian
/// index (bit `i` set means spin `i` is +1).
///
/// # Safety
/// `model` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_model_energy(
    model: *const GpModel,
    config_index: u64,
    out: *mut f64,
) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(model, "model") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let n = handle.inner.n_spins();
        if n < 64 && config_index >= (1u64 << n) {
            return fail(
                GpStatus::InvalidArgument,
                format!("configuration index {config_index} out of range for {n} spins"),
            );
        }
        *slot = handle.inner.energy_of_index(config_index as usize);
        GpStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

/// Reads a noise-layer description from a JSON file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_noise_read_file(
    path: *const c_char,
    out: *mut *mut GpNoise,
) -> GpStatus {
    guarded(|| {
        let path = match unsafe { path_arg(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match read_noise(&path) {
            Ok(inner) => {
                *slot = Box::into_raw(Box::new(GpNoise { inner }));
                GpStatus::Ok
            }
            Err(e) => fail(sampler_status(&e), e.to_string()),
        }
    })
}

/// Releases a noise handle. NULL is ignored.
///
/// # Safety
/// `noise` must be a handle from this library (or NULL) and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_noise_free(noise: *mut GpNoise) {
    if !noise.is_null() {
        drop(unsafe { Box::from_raw(noise) });
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Draws `m` configurations from the exact Gibbs distribution of `model`
/// (deterministic in `seed`).
///
/// # Safety
/// `model` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_exact(
    model: *const GpModel,
    m: u64,
    seed: u64,
    out: *mut *mut GpSampleSet,
) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(model, "model") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let dist = match exact_distribution(&handle.inner) {
            Ok(d) => d,
            Err(e) => return fail(model_status(&e), e.to_string()),
        };
        match sample_exact(&dist, m, seed) {
            Ok(inner) => {
                *slot = Box::into_raw(Box::new(GpSampleSet { inner }));
                GpStatus::Ok
            }
            Err(e) => fail(sampler_status(&e), e.to_string()),
        }
    })
}

/// Draws `m` configurations through the noise layer: each draw samples a
/// fresh noise realization, then one configuration from the conditional
/// distribution (deterministic in `seed`).
///
/// # Safety
/// `model` and `noise` must be live handles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_noisy(
    model: *const GpModel,
    noise: *const GpNoise,
    m: u64,
    seed: u64,
    out: *mut *mut GpSampleSet,
) -> GpStatus {
    guarded(|| {
        let model = match unsafe { handle_ref(model, "model") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let noise = match unsafe { handle_ref(noise, "noise") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match sample_noisy(&model.inner, &noise.inner, m, seed) {
            Ok(inner) => {
                *slot = Box::into_raw(Box::new(GpSampleSet { inner }));
                GpStatus::Ok
            }
            Err(e) => fail(sampler_status(&e), e.to_string()),
        }
    })
}

/// Releases a sample-set handle. NULL is ignored.
///
/// # Safety
/// `set` must be a handle from this library (or NULL) and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_set_free(set: *mut GpSampleSet) {
    if !set.is_null() {
        drop(unsafe { Box::from_raw(set) });
    }
}

/// Reports the total number of observations in a sample set.
///
/// # Safety
/// `set` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_set_total(set: *const GpSampleSet, out: *mut u64) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(set, "set") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        *slot = handle.inner.total();
        GpStatus::Ok
    })
}

/// Reports how many times the configuration with the given little-endian
/// bit pattern was observed (zero when absent).
///
/// # Safety
/// `set` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_set_count(
    set: *const GpSampleSet,
    config_bits: u64,
    out: *mut u64,
) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(set, "set") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        *slot = handle.inner.counts().get(&config_bits).copied().unwrap_or(0);
        GpStatus::Ok
    })
}

/// Writes a sample set to the plain-text sample format.
///
/// # Safety
/// `set` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_set_write_file(
    set: *const GpSampleSet,
    path: *const c_char,
) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(set, "set") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let path = match unsafe { path_arg(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match write_sample_file(&handle.inner, &path) {
            Ok(()) => GpStatus::Ok,
            Err(e) => fail(sampler_status(&e), e.to_string()),
        }
    })
}

/// Reads a sample set from the plain-text sample format.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_sample_set_read_file(
    path: *const c_char,
    out: *mut *mut GpSampleSet,
) -> GpStatus {
    guarded(|| {
        let path = match unsafe { path_arg(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match read_sample_file(&path) {
            Ok(inner) => {
                *slot = Box::into_raw(Box::new(GpSampleSet { inner }));
                GpStatus::Ok
            }
            Err(e) => fail(sampler_status(&e), e.to_string()),
        }
    })
}

// ---------------------------------------------------------------------------
// Learning
// ---------------------------------------------------------------------------

/// Reconstructs an interaction model from observed samples by convex
/// per-neighbourhood estimation.
///
/// `order` caps the interaction order (2 = fields and pair couplings);
/// `grad_tol` is the convergence tolerance on the gradient norm; `max_iter`
/// bounds the iterations per neighbourhood; `l1_penalty` of zero disables
/// the sparsity penalty.
///
/// # Safety
/// `set` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_learn(
    set: *const GpSampleSet,
    order: usize,
    grad_tol: f64,
    max_iter: usize,
    l1_penalty: f64,
    out: *mut *mut GpModel,
) -> GpStatus {
    guarded(|| {
        let handle = match unsafe { handle_ref(set, "set") } {
            Ok(h) => h,
            Err(status) => return status,
        };
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let config = LearnConfig {
            order,
            grad_tol,
            max_iter,
            l1_penalty,
        };
        let data = WeightedData::from(&handle.inner);
        match learn_model(&data, &config) {
            Ok(inner) => {
                *slot = Box::into_raw(Box::new(GpModel { inner }));
                GpStatus::Ok
            }
            Err(e) => fail(learn_status(&e), e.to_string()),
        }
    })
}

// ---------------------------------------------------------------------------
// Closed-form references
// ---------------------------------------------------------------------------

/// Closed-form effective field induced on a probe spin by a coupled
/// neighbour carrying symmetric binary field noise.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_effective_field(
    j: f64,
    h2: f64,
    h_sd1: f64,
    beta: f64,
    out: *mut f64,
) -> GpStatus {
    guarded(|| {
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match ToySpec2::new(j, h2, h_sd1, beta) {
            Ok(spec) => {
                *slot = effective_field(&spec);
                GpStatus::Ok
            }
            Err(e) => fail(oracle_status(&e), e.to_string()),
        }
    })
}

/// Closed-form effective coupling induced between the end spins of a
/// three-spin chain whose ends carry symmetric binary field noise.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_effective_coupling(
    j12: f64,
    j23: f64,
    h_sd1: f64,
    h_sd3: f64,
    beta: f64,
    out: *mut f64,
) -> GpStatus {
    guarded(|| {
        let slot = match unsafe { out_slot(out, "out") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match ToySpec3::new(j12, j23, h_sd1, h_sd3, beta) {
            Ok(spec) => {
                *slot = effective_coupling(&spec);
                GpStatus::Ok
            }
            Err(e) => fail(oracle_status(&e), e.to_string()),
        }
    })
}

// ---------------------------------------------------------------------------
// Single-spin field estimation
// ---------------------------------------------------------------------------

/// Estimates the output field of a single spin from `s` positive
/// observations out of `m`, with an equal-tailed confidence interval at
/// level `alpha`.
///
/// `out_saturation` receives 0 when the estimate is finite, -1 when all
/// observations were negative (estimate unbounded below; only `out_ci_high`
/// is meaningful), and +1 when all were positive (only `out_ci_low` is
/// meaningful). Slots without meaning are set to NaN.
///
/// # Safety
/// All out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gp_estimate_hout(
    s: u64,
    m: u64,
    alpha: f64,
    out_h: *mut f64,
    out_ci_low: *mut f64,
    out_ci_high: *mut f64,
    out_saturation: *mut i32,
) -> GpStatus {
    guarded(|| {
        let slot_h = match unsafe { out_slot(out_h, "out_h") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let slot_low = match unsafe { out_slot(out_ci_low, "out_ci_low") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let slot_high = match unsafe { out_slot(out_ci_high, "out_ci_high") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let slot_sat = match unsafe { out_slot(out_saturation, "out_saturation") } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match estimate_hout(s, m, alpha) {
            Ok(HoutEstimate::Finite {
                h_out,
                ci_low,
                ci_high,
            }) => {
                *slot_h = h_out;
                *slot_low = ci_low;
                *slot_high = ci_high;
                *slot_sat = 0;
                GpStatus::Ok
            }
            Ok(HoutEstimate::SaturatedLow { ci_high }) => {
                *slot_h = f64::NAN;
                *slot_low = f64::NAN;
                *slot_high = ci_high;
                *slot_sat = -1;
                GpStatus::Ok
            }
            Ok(HoutEstimate::SaturatedHigh { ci_low }) => {
                *slot_h = f64::NAN;
                *slot_low = ci_low;
                *slot_high = f64::NAN;
                *slot_sat = 1;
                GpStatus::Ok
            }
            Err(e) => fail(single_qubit_status(&e), e.to_string()),
        }
    })
}
