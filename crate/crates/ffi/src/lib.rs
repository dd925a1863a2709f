//! C ABI for the `tpp` toolkit.
//!
//! Handles are opaque pointers created and destroyed by this library; every
//! fallible call returns a [`TppStatus`] and leaves a human-readable message
//! retrievable through [`tpp_last_error_message`] (thread-local, valid until
//! the next failing call on the same thread). Buffers returned through
//! out-pointers must be released with the matching `tpp_buffer_free_*`.
//!
//! The header `include/tpp.h` is generated at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use tpp::ingest::{load_sequences_csv, ColumnMapping};
use tpp::learning::{fit, validation, FitConfig, LossKind};
use tpp::manifest::{model_load, model_save, Provenance};
use tpp::model::DataDims;
use tpp::presets::{build_preset, PresetName, PresetOptions};
use tpp::simulate::{simulate, SimConfig};
use tpp::{Database, HawkesModel};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TppStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// File system failure.
    Io = 3,
    /// A file exists but cannot be understood (CSV, manifest, version).
    Parse = 4,
    /// Model and data disagree (type counts, horizons).
    Incompatible = 5,
    /// Invalid argument or numerically inadmissible configuration.
    Domain = 6,
    /// Unexpected internal failure.
    Internal = 7,
}

/// Opaque model handle.
#[repr(C)]
pub struct TppModel {
    _opaque: [u8; 0],
}

/// Opaque corpus handle.
#[repr(C)]
pub struct TppDatabase {
    _opaque: [u8; 0],
}

/// Fit hyperparameters; obtain defaults from [`tpp_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TppFitOptions {
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    /// Per-epoch learning-rate decay in (0, 1].
    pub lr_decay: f64,
    pub l1_weight: f64,
    pub l2_weight: f64,
    /// History window length attached to each training sample.
    pub memory_size: u32,
    pub seed: u64,
    /// Fraction of sequences held out for validation, in [0, 1).
    pub validation_fraction: f64,
}

struct ModelBox {
    model: HawkesModel,
    type_names: Vec<String>,
    loss: LossKind,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let safe = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = safe);
}

fn status_of(err: &tpp::Error) -> TppStatus {
    use tpp::Error::*;
    match err {
        Io(_) => TppStatus::Io,
        Json(_) | Csv(_) | ManifestVersion { .. } | ManifestArrayShape { .. }
        | ManifestMissingArray(_) | ManifestUnknownArray(_) => TppStatus::Parse,
        IncompatibleTypes { .. } | PredictHorizon { .. } | TypeVocabMismatch => {
            TppStatus::Incompatible
        }
        Divergence { .. } | EnvelopeViolated { .. } => TppStatus::Internal,
        _ => TppStatus::Domain,
    }
}

fn fail(err: tpp::Error) -> TppStatus {
    set_error(&err.to_string());
    status_of(&err)
}

/// Run `f` with panics converted into `Internal` status.
fn guarded<F: FnOnce() -> TppStatus>(f: F) -> TppStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            TppStatus::Internal
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, TppStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(TppStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        TppStatus::Utf8
    })
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn tpp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failure on this thread; valid until the next failing
/// call on the same thread. Do not free.
#[no_mangle]
pub extern "C" fn tpp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn tpp_fit_options_default() -> TppFitOptions {
    TppFitOptions {
        epochs: 10,
        batch_size: 128,
        learning_rate: 0.01,
        lr_decay: 0.95,
        l1_weight: 0.0,
        l2_weight: 0.0,
        memory_size: 64,
        seed: 0,
        validation_fraction: 0.0,
    }
}

/// Load an event-sequence CSV (header row required) into a corpus handle.
///
/// # Safety
/// String arguments must be valid NUL-terminated pointers; `out` must point
/// to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn tpp_database_load_csv(
    path: *const c_char,
    seq_col: *const c_char,
    time_col: *const c_char,
    event_col: *const c_char,
    out: *mut *mut TppDatabase,
) -> TppStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null out pointer");
            return TppStatus::NullPointer;
        }
        let (path, seq, time, event) = match (cstr(path), cstr(seq_col), cstr(time_col), cstr(event_col)) {
            (Ok(a), Ok(b), Ok(c), Ok(d)) => (a, b, c, d),
            (Err(s), ..) | (_, Err(s), ..) | (_, _, Err(s), _) | (_, _, _, Err(s)) => return s,
        };
        let mapping = ColumnMapping::new(seq, time, event);
        match load_sequences_csv(path, &mapping) {
            Ok(db) => {
                *out = Box::into_raw(Box::new(db)) as *mut TppDatabase;
                TppStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `db` must be a pointer from `tpp_database_load_csv`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tpp_database_free(db: *mut TppDatabase) {
    if !db.is_null() {
        drop(Box::from_raw(db as *mut Database));
    }
}

unsafe fn db_ref<'a>(db: *const TppDatabase) -> Option<&'a Database> {
    (db as *const Database).as_ref()
}

unsafe fn model_ref<'a>(model: *const TppModel) -> Option<&'a ModelBox> {
    (model as *const ModelBox).as_ref()
}

/// Number of event types, or 0 for a null handle.
///
/// # Safety
/// `db` must be null or a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn tpp_database_num_types(db: *const TppDatabase) -> u64 {
    db_ref(db).map(|d| d.num_types as u64).unwrap_or(0)
}

/// # Safety
/// `db` must be null or a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn tpp_database_num_sequences(db: *const TppDatabase) -> u64 {
    db_ref(db).map(|d| d.sequences.len() as u64).unwrap_or(0)
}

/// # Safety
/// `db` must be null or a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn tpp_database_num_events(db: *const TppDatabase) -> u64 {
    db_ref(db).map(|d| d.total_events() as u64).unwrap_or(0)
}

/// Build a named preset against the corpus and fit it.
///
/// Preset names: linear-hawkes-exp, linear-hawkes-multigauss-mle,
/// linear-hawkes-multigauss-lse, factorized-pp, semi-parametric-hawkes,
/// self-correcting, mutually-correcting.
///
/// # Safety
/// `db` must be a live corpus handle; `preset` a NUL-terminated string;
/// `opts` null (defaults) or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tpp_model_fit_preset(
    db: *const TppDatabase,
    preset: *const c_char,
    opts: *const TppFitOptions,
    out: *mut *mut TppModel,
) -> TppStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null out pointer");
            return TppStatus::NullPointer;
        }
        let Some(db) = db_ref(db) else {
            set_error("null database handle");
            return TppStatus::NullPointer;
        };
        let name = match cstr(preset) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let preset: PresetName = match name.parse() {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let o = if opts.is_null() {
            tpp_fit_options_default()
        } else {
            *opts
        };
        let preset_opts = PresetOptions {
            memory_size: o.memory_size.max(1) as usize,
            init_seed: o.seed,
            ..PresetOptions::default()
        };
        let (config, loss) = build_preset(preset, db, &preset_opts);
        let mut model = match config.build(&DataDims::from_database(db)) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        let nonneg = if matches!(
            config.impact.activation,
            tpp::model::Activation::Softplus { .. } | tpp::model::Activation::SoftplusPaper { .. }
        ) {
            None
        } else {
            Some(vec!["all".to_string()])
        };
        let fit_cfg = FitConfig {
            epochs: o.epochs.max(1) as usize,
            batch_size: o.batch_size.max(1) as usize,
            learning_rate: o.learning_rate,
            lr_decay_gamma: o.lr_decay,
            l1_weight: o.l1_weight,
            l2_weight: o.l2_weight,
            nonnegative: nonneg,
            memory_size: o.memory_size.max(1) as usize,
            rng_seed: o.seed,
            validation_fraction: o.validation_fraction,
            ..FitConfig::default()
        };
        if let Err(e) = fit(&mut model, db, &fit_cfg, loss) {
            return fail(e);
        }
        let boxed = ModelBox {
            model,
            type_names: db.idx2type.clone(),
            loss,
        };
        *out = Box::into_raw(Box::new(boxed)) as *mut TppModel;
        TppStatus::Ok
    })
}

/// Read a model manifest from disk.
///
/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tpp_model_load(path: *const c_char, out: *mut *mut TppModel) -> TppStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null out pointer");
            return TppStatus::NullPointer;
        }
        let path = match cstr(path) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match model_load(path) {
            Ok((model, manifest)) => {
                let loss = manifest
                    .provenance
                    .loss
                    .as_deref()
                    .unwrap_or("mle")
                    .parse()
                    .unwrap_or(LossKind::MaxLogLike);
                let boxed = ModelBox {
                    model,
                    type_names: manifest.type_names,
                    loss,
                };
                *out = Box::into_raw(Box::new(boxed)) as *mut TppModel;
                TppStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write the model manifest to disk.
///
/// # Safety
/// `model` must be a live model handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tpp_model_save(model: *const TppModel, path: *const c_char) -> TppStatus {
    guarded(|| {
        let Some(b) = model_ref(model) else {
            set_error("null model handle");
            return TppStatus::NullPointer;
        };
        let path = match cstr(path) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let prov = Provenance {
            loss: Some(b.loss.name().to_string()),
            ..Provenance::default()
        };
        match model_save(&b.model, &b.type_names, prov, path) {
            Ok(()) => TppStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must be a pointer from a `tpp_model_*` constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tpp_model_free(model: *mut TppModel) {
    if !model.is_null() {
        drop(Box::from_raw(model as *mut ModelBox));
    }
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn tpp_model_num_types(model: *const TppModel) -> u64 {
    model_ref(model).map(|b| b.model.num_types() as u64).unwrap_or(0)
}

/// Copy the C×C Granger-causality (infectivity) matrix, row-major, into a
/// caller buffer of exactly `len` = C·C doubles.
///
/// # Safety
/// `model` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tpp_model_infectivity(
    model: *const TppModel,
    out: *mut f64,
    len: u64,
) -> TppStatus {
    guarded(|| {
        let Some(b) = model_ref(model) else {
            set_error("null model handle");
            return TppStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null out pointer");
            return TppStatus::NullPointer;
        }
        let c = b.model.num_types();
        if len as usize != c * c {
            set_error(&format!("buffer holds {len} values, need {}", c * c));
            return TppStatus::Domain;
        }
        let m = b.model.infectivity_matrix();
        std::ptr::copy_nonoverlapping(m.as_ptr(), out, m.len());
        TppStatus::Ok
    })
}

/// Copy the per-type exogenous intensity into a caller buffer of `len` = C.
///
/// # Safety
/// `model` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tpp_model_exogenous(
    model: *const TppModel,
    out: *mut f64,
    len: u64,
) -> TppStatus {
    guarded(|| {
        let Some(b) = model_ref(model) else {
            set_error("null model handle");
            return TppStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null out pointer");
            return TppStatus::NullPointer;
        }
        if len as usize != b.model.num_types() {
            set_error(&format!(
                "buffer holds {len} values, need {}",
                b.model.num_types()
            ));
            return TppStatus::Domain;
        }
        match b.model.exo_vector_default() {
            Ok(mu) => {
                std::ptr::copy_nonoverlapping(mu.as_ptr(), out, mu.len());
                TppStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Simulate one sequence over `(t_begin, t_end]` by thinning. On success the
/// event times and type indices are returned through freshly allocated
/// buffers of length `*out_len`; release both with the buffer-free calls.
///
/// # Safety
/// `model` must be a live handle; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn tpp_model_simulate(
    model: *const TppModel,
    t_begin: f64,
    t_end: f64,
    max_events: u64,
    seed: u64,
    out_times: *mut *mut f64,
    out_types: *mut *mut u32,
    out_len: *mut u64,
) -> TppStatus {
    guarded(|| {
        let Some(b) = model_ref(model) else {
            set_error("null model handle");
            return TppStatus::NullPointer;
        };
        if out_times.is_null() || out_types.is_null() || out_len.is_null() {
            set_error("null out pointer");
            return TppStatus::NullPointer;
        }
        let cfg = SimConfig {
            t_begin,
            t_end,
            seed_sequence: None,
            max_events: max_events.max(1) as usize,
            rng_seed: seed,
            bound_refresh_width: 1.0,
            seq_index: 0,
        };
        match simulate(&b.model, &cfg) {
            Ok(seq) => {
                let mut times = seq.times.into_boxed_slice();
                let mut types: Box<[u32]> =
                    seq.events.iter().map(|&e| e as u32).collect::<Vec<_>>().into_boxed_slice();
                *out_len = times.len() as u64;
                *out_times = times.as_mut_ptr();
                *out_types = types.as_mut_ptr();
                std::mem::forget(times);
                std::mem::forget(types);
                TppStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Average per-event loss of the model on a corpus (no updates). `loss` is
/// "mle", "lse", or "crossentropy"; null means the loss the model was
/// trained with.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tpp_model_validate(
    model: *const TppModel,
    db: *const TppDatabase,
    loss: *const c_char,
    out: *mut f64,
) -> TppStatus {
    guarded(|| {
        let Some(b) = model_ref(model) else {
            set_error("null model handle");
            return TppStatus::NullPointer;
        };
        let Some(db) = db_ref(db) else {
            set_error("null database handle");
            return TppStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null out pointer");
            return TppStatus::NullPointer;
        }
        if db.num_types != b.model.num_types() {
            return fail(tpp::Error::IncompatibleTypes {
                manifest: b.model.num_types(),
                data: db.num_types,
            });
        }
        let kind = if loss.is_null() {
            b.loss
        } else {
            match cstr(loss) {
                Ok(s) => match s.parse() {
                    Ok(k) => k,
                    Err(e) => return fail(e),
                },
                Err(s) => return s,
            }
        };
        let cfg = FitConfig {
            memory_size: b.model.memory_size(),
            ..FitConfig::default()
        };
        match validation(&b.model, db, &cfg, kind) {
            Ok(v) => {
                *out = v;
                TppStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a double buffer returned by this library.
///
/// # Safety
/// `ptr`/`len` must come from one successful `tpp_model_simulate` call.
#[no_mangle]
pub unsafe extern "C" fn tpp_buffer_free_f64(ptr: *mut f64, len: u64) {
    if !ptr.is_null() {
        drop(Box::from_raw(std::ptr::slice_from_raw_parts_mut(ptr, len as usize)));
    }
}

/// Release a u32 buffer returned by this library.
///
/// # Safety
/// `ptr`/`len` must come from one successful `tpp_model_simulate` call.
#[no_mangle]
pub unsafe extern "C" fn tpp_buffer_free_u32(ptr: *mut u32, len: u64) {
    if !ptr.is_null() {
        drop(Box::from_raw(std::ptr::slice_from_raw_parts_mut(ptr, len as usize)));
    }
}
