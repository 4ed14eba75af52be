//! C ABI over `mindisc`.
//!
//! Conventions:
//!
//! - Every function returns an [`MdStatus`]; results go through out-pointers.
//! - On failure, [`md_last_error`] returns a message for the calling thread.
//! - Handles (`MdDataset`, `MdConfig`, `MdModel`) are opaque; free each with
//!   its `*_free` function. Freeing NULL is a no-op.
//! - Matrices are row-major `double` arrays.
//! - Panics never cross the boundary; they surface as `MD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mindisc::checkpoint::Checkpoint;
use mindisc::data::{gen_two_moons, load_csv, CsvOptions, Dataset};
use mindisc::evaluation::{accuracy, export_embedding};
use mindisc::losses::{coral_loss, mmd2_loss, KernelBank};
use mindisc::numerics::argmax;
use mindisc::trainer::{TrainConfig, Trainer};
use mindisc::{Error, Matrix};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    BadData = 5,
    ShapeMismatch = 6,
    NonFiniteLoss = 7,
    CorruptCheckpoint = 8,
    Panic = 99,
}

pub struct MdDataset {
    inner: Dataset,
}

pub struct MdConfig {
    inner: TrainConfig,
}

/// A trained network together with its optimizer state and configuration.
pub struct MdModel {
    inner: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => MdStatus::Config,
            Error::InvalidParam(_) | Error::InvalidSpec(_) => MdStatus::InvalidArgument,
            Error::Io(_) | Error::FileNotFound(_) => MdStatus::Io,
            Error::MalformedRow { .. }
            | Error::NonFiniteValue { .. }
            | Error::LabelOutOfRange { .. }
            | Error::UnlabeledDataset
            | Error::EmptyDataset
            | Error::EmptyBatch(_)
            | Error::DegenerateBatch(_) => MdStatus::BadData,
            Error::ShapeMismatch(_) => MdStatus::ShapeMismatch,
            Error::NonFiniteLoss { .. } => MdStatus::NonFiniteLoss,
            Error::CorruptCheckpoint(_) | Error::VersionMismatch { .. } => {
                MdStatus::CorruptCheckpoint
            }
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MdStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(MdStatus::InvalidArgument, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdStatus::Ok,
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
            MdStatus::Panic
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

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn matrix(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<Matrix, Failure> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| invalid(format!("{what}: size overflow")))?;
    Ok(Matrix::new(rows, cols, slice(p, len, what)?.to_vec())?)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value;
    Ok(())
}

/// Message of the last failure on this thread, or NULL if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn md_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Generates a labeled two-moons dataset.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn md_dataset_two_moons(
    n: usize,
    noise: f64,
    rotation_deg: f64,
    seed: u64,
    out: *mut *mut MdDataset,
) -> MdStatus {
    guard(|| {
        let inner = gen_two_moons(n, noise, rotation_deg, seed)?;
        put(out, MdDataset { inner })
    })
}

/// Builds a dataset from a row-major `rows × cols` feature array. `labels`
/// may be NULL for an unlabeled dataset; otherwise it holds `rows` entries in
/// `[0, num_classes)`.
///
/// # Safety
/// `features` must point to `rows * cols` doubles, `labels` (if non-NULL) to
/// `rows` integers, and `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn md_dataset_from_arrays(
    features: *const f64,
    rows: usize,
    cols: usize,
    labels: *const i64,
    num_classes: usize,
    out: *mut *mut MdDataset,
) -> MdStatus {
    guard(|| {
        let x = matrix(features, rows, cols, "features")?;
        let labels = if labels.is_null() {
            None
        } else {
            let raw = slice(labels, rows, "labels")?;
            let mut v = Vec::with_capacity(rows);
            for (row, &label) in raw.iter().enumerate() {
                if label < 0 || label as u64 >= num_classes as u64 {
                    return Err(Error::LabelOutOfRange {
                        row: row + 1,
                        label,
                        num_classes,
                    }
                    .into());
                }
                v.push(label as usize);
            }
            Some(v)
        };
        let inner = Dataset::new(x, labels, "arrays", num_classes)?;
        put(out, MdDataset { inner })
    })
}

/// Loads a headerless CSV; when `labeled` is nonzero the last column is the
/// class id.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_dataset_load_csv(
    path: *const c_char,
    num_classes: usize,
    labeled: bool,
    out: *mut *mut MdDataset,
) -> MdStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        let opts = CsvOptions {
            num_classes,
            labeled,
            header: false,
        };
        let inner = load_csv(path, &opts)?;
        put(out, MdDataset { inner })
    })
}

/// Number of rows and feature columns.
///
/// # Safety
/// `dataset` must be a live handle; `rows` and `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn md_dataset_shape(
    dataset: *const MdDataset,
    rows: *mut usize,
    cols: *mut usize,
) -> MdStatus {
    guard(|| {
        let d = &deref(dataset, "dataset")?.inner;
        write(rows, d.len())?;
        write(cols, d.dim())
    })
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_dataset_free(dataset: *mut MdDataset) {
    if !dataset.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(dataset))));
    }
}

/// A configuration with every key at its default.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_config_new(out: *mut *mut MdConfig) -> MdStatus {
    guard(|| {
        put(
            out,
            MdConfig {
                inner: TrainConfig::default(),
            },
        )
    })
}

/// Sets one key from its text form, e.g. `("layers", "2,32,32,2")`.
///
/// # Safety
/// `config` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn md_config_set(
    config: *mut MdConfig,
    key: *const c_char,
    value: *const c_char,
) -> MdStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        let key = text(key, "key")?;
        let value = text(value, "value")?;
        Ok(cfg.inner.set(key, value)?)
    })
}

/// # Safety
/// `config` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_config_free(config: *mut MdConfig) {
    if !config.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(config))));
    }
}

/// Trains on a labeled source and the target's features (its labels, if
/// any, are ignored). `history_len` (may be NULL) receives the number of
/// optimizer steps taken.
///
/// # Safety
/// All handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_train(
    config: *const MdConfig,
    source: *const MdDataset,
    target: *const MdDataset,
    out: *mut *mut MdModel,
    history_len: *mut usize,
) -> MdStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.inner;
        let source = &deref(source, "source")?.inner;
        let target = &deref(target, "target")?.inner;
        let mut trainer = Trainer::new(cfg.clone(), source, target.unlabeled())?;
        trainer.run()?;
        if !history_len.is_null() {
            *history_len = trainer.history().len();
        }
        put(
            out,
            MdModel {
                inner: trainer.checkpoint(),
            },
        )
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_model_load(path: *const c_char, out: *mut *mut MdModel) -> MdStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        let inner = Checkpoint::load(path)?;
        put(out, MdModel { inner })
    })
}

/// # Safety
/// `model` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn md_model_save(model: *const MdModel, path: *const c_char) -> MdStatus {
    guard(|| {
        let model = &deref(model, "model")?.inner;
        let path = PathBuf::from(text(path, "path")?);
        Ok(model.save(path)?)
    })
}

/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_model_num_classes(model: *const MdModel, out: *mut usize) -> MdStatus {
    guard(|| write(out, deref(model, "model")?.inner.network.num_classes()))
}

/// Predicted class (argmax, ties to the lowest index) for each of `rows`
/// feature rows; writes `rows` entries to `out_labels`.
///
/// # Safety
/// `features` must point to `rows * cols` doubles and `out_labels` to `rows`
/// writable slots.
#[no_mangle]
pub unsafe extern "C" fn md_model_predict(
    model: *const MdModel,
    features: *const f64,
    rows: usize,
    cols: usize,
    out_labels: *mut usize,
) -> MdStatus {
    guard(|| {
        let net = &deref(model, "model")?.inner.network;
        let x = matrix(features, rows, cols, "features")?;
        let logits = net.predict(&x)?;
        if rows > 0 && out_labels.is_null() {
            return Err(null("out_labels"));
        }
        for r in 0..rows {
            *out_labels.add(r) = argmax(logits.row(r));
        }
        Ok(())
    })
}

/// Accuracy in percent on a labeled dataset.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_model_accuracy(
    model: *const MdModel,
    dataset: *const MdDataset,
    out: *mut f64,
) -> MdStatus {
    guard(|| {
        let net = &deref(model, "model")?.inner.network;
        let d = &deref(dataset, "dataset")?.inner;
        write(out, accuracy(net, d)?)
    })
}

/// Writes the 2-D embedding CSV (`x,y,domain,label`) of both datasets.
///
/// # Safety
/// Handles must be live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn md_model_export_embedding(
    model: *const MdModel,
    source: *const MdDataset,
    target: *const MdDataset,
    path: *const c_char,
) -> MdStatus {
    guard(|| {
        let net = &deref(model, "model")?.inner.network;
        let s = &deref(source, "source")?.inner;
        let t = &deref(target, "target")?.inner;
        let path = PathBuf::from(text(path, "path")?);
        Ok(export_embedding(net, s, t, path)?)
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_model_free(model: *mut MdModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// CORAL distance between two `n × dim` activation matrices.
///
/// # Safety
/// `source` must point to `ns * dim` doubles, `target` to `nt * dim`.
#[no_mangle]
pub unsafe extern "C" fn md_coral_loss(
    source: *const f64,
    ns: usize,
    target: *const f64,
    nt: usize,
    dim: usize,
    out: *mut f64,
) -> MdStatus {
    guard(|| {
        let s = matrix(source, ns, dim, "source")?;
        let t = matrix(target, nt, dim, "target")?;
        write(out, coral_loss(&s, &t)?.value)
    })
}

/// Biased MMD² with an equally weighted Gaussian kernel bank.
///
/// # Safety
/// `source` must point to `ns * dim` doubles, `target` to `nt * dim`,
/// `bandwidths` to `count` doubles.
#[no_mangle]
pub unsafe extern "C" fn md_mmd2_loss(
    source: *const f64,
    ns: usize,
    target: *const f64,
    nt: usize,
    dim: usize,
    bandwidths: *const f64,
    count: usize,
    out: *mut f64,
) -> MdStatus {
    guard(|| {
        let s = matrix(source, ns, dim, "source")?;
        let t = matrix(target, nt, dim, "target")?;
        let bank = KernelBank::uniform(slice(bandwidths, count, "bandwidths")?.to_vec())?;
        write(out, mmd2_loss(&s, &t, &bank)?.value)
    })
}
