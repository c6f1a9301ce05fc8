//! C interface to the nfimaging toolkit.
//!
//! Configs and reconstructions are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns an
//! [`NfiStatus`]; the message of the most recent failure on the calling thread
//! is available through [`nfi_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nfimaging::config::Config;
use nfimaging::experiment::{unit_max, CellKey, Reconstruction, Setup};
use nfimaging::metrics::{to_complex, MetricSet};
use nfimaging::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Io = 5,
    Numerical = 6,
    ShapeMismatch = 7,
    Format = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Parsed and validated configuration.
pub struct NfiConfig(Config);

/// Reconstructed magnitudes plus their score against the ground truth.
pub struct NfiImage {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    metrics: NfiMetrics,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NfiMetrics {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub pcc: f64,
}

impl From<MetricSet> for NfiMetrics {
    fn from(m: MetricSet) -> Self {
        NfiMetrics { mse: m.mse, psnr: m.psnr, ssim: m.ssim, pcc: m.pcc }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> NfiStatus {
    match e {
        Error::Config(_) => NfiStatus::Config,
        Error::Io(_) => NfiStatus::Io,
        Error::Numerical(_) => NfiStatus::Numerical,
        Error::ShapeMismatch(_) => NfiStatus::ShapeMismatch,
        Error::Format(_) | Error::Csv(_) => NfiStatus::Format,
        _ => NfiStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), (NfiStatus, String)>) -> NfiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NfiStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            NfiStatus::Panic
        }
    }
}

fn lib(e: Error) -> (NfiStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NfiStatus, String) {
    (NfiStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (NfiStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (NfiStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Parse a TOML config held in a NUL-terminated string.
///
/// # Safety
/// `toml` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nfi_config_from_str(toml: *const c_char, out: *mut *mut NfiConfig) -> NfiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = Config::from_toml_str(text(toml, "toml")?).map_err(lib)?;
        *out = Box::into_raw(Box::new(NfiConfig(cfg)));
        Ok(())
    })
}

/// Parse a TOML config file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nfi_config_from_file(path: *const c_char, out: *mut *mut NfiConfig) -> NfiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = Config::load(Path::new(text(path, "path")?)).map_err(lib)?;
        *out = Box::into_raw(Box::new(NfiConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from `nfi_config_from_*` and not be used afterwards. Null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn nfi_config_free(cfg: *mut NfiConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Simulate and reconstruct the first cell of the config's sweep with the
/// given seed. Planar scenes give a rows × cols image, voxel scenes a
/// cells × 1 column of magnitudes.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nfi_run_cell(cfg: *const NfiConfig, seed: u64, out: *mut *mut NfiImage) -> NfiStatus {
    guard(|| {
        if cfg.is_null() {
            return Err(null("cfg"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = &(*cfg).0;
        let e = &cfg.experiment;
        let key = CellKey { solver: e.solvers[0], power: e.powers[0], depth: e.depths[0].0, seed };
        let setup = Setup::new(cfg, key.depth, seed).map_err(lib)?;
        let stim = setup.stimulus(cfg, key.power, seed).map_err(lib)?;
        let obs = setup.simulate(cfg, &stim, seed).map_err(lib)?;
        let recon = setup.reconstruct(cfg, &stim, &obs, key.solver).map_err(lib)?;
        let scores = setup.score(&recon).map_err(lib)?;
        let get = |name: &str| scores.iter().find(|(n, _)| *n == name).map(|x| x.1).unwrap_or(f64::NAN);
        let metrics = NfiMetrics { mse: get("mse"), psnr: get("psnr"), ssim: get("ssim"), pcc: get("pcc") };
        let img = match recon {
            Reconstruction::Image(g) => NfiImage { rows: g.rows, cols: g.cols, data: g.data, metrics },
            Reconstruction::Voxels(v) => {
                let data = v.magnitude();
                NfiImage { rows: data.len(), cols: 1, data, metrics }
            }
        };
        *out = Box::into_raw(Box::new(img));
        Ok(())
    })
}

/// # Safety
/// `img` must be a live image handle; `rows` and `cols` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn nfi_image_shape(img: *const NfiImage, rows: *mut usize, cols: *mut usize) -> NfiStatus {
    guard(|| {
        if img.is_null() || rows.is_null() || cols.is_null() {
            return Err(null("argument"));
        }
        *rows = (*img).rows;
        *cols = (*img).cols;
        Ok(())
    })
}

/// Copy the row-major magnitudes into `buf`, which must hold rows × cols
/// values.
///
/// # Safety
/// `img` must be a live image handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn nfi_image_copy(img: *const NfiImage, buf: *mut f64, len: usize) -> NfiStatus {
    guard(|| {
        if img.is_null() || buf.is_null() {
            return Err(null("argument"));
        }
        let data = &(*img).data;
        if len < data.len() {
            return Err((NfiStatus::BufferTooSmall, format!("buffer holds {len} values, image has {}", data.len())));
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

/// Metrics of the reconstruction against the scene's ground truth.
///
/// # Safety
/// `img` must be a live image handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn nfi_image_metrics(img: *const NfiImage, out: *mut NfiMetrics) -> NfiStatus {
    guard(|| {
        if img.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        *out = (*img).metrics;
        Ok(())
    })
}

/// # Safety
/// `img` must come from `nfi_run_cell` and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn nfi_image_free(img: *mut NfiImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Metrics of two equally long magnitude vectors, each scaled to unit max.
///
/// # Safety
/// `reference` and `estimate` must be valid for `len` reads; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nfi_metrics(reference: *const f64, estimate: *const f64, len: usize, out: *mut NfiMetrics) -> NfiStatus {
    guard(|| {
        if reference.is_null() || estimate.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        if len == 0 {
            return Err((NfiStatus::InvalidArgument, "empty input".into()));
        }
        let a = unit_max(std::slice::from_raw_parts(reference, len));
        let b = unit_max(std::slice::from_raw_parts(estimate, len));
        *out = MetricSet::compute(&to_complex(&a), &to_complex(&b)).map_err(lib)?.into();
        Ok(())
    })
}

/// Copy the calling thread's last error message into `buf` (truncated and
/// NUL-terminated). Returns the full message length excluding the NUL, so a
/// caller can size a buffer with `nfi_last_error_message(NULL, 0) + 1`.
///
/// # Safety
/// `buf` must be valid for `len` writes, or null with `len` = 0.
#[no_mangle]
pub unsafe extern "C" fn nfi_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn nfi_status_name(status: NfiStatus) -> *const c_char {
    let s: &'static CStr = match status {
        NfiStatus::Ok => c"ok",
        NfiStatus::NullPointer => c"null-pointer",
        NfiStatus::InvalidUtf8 => c"invalid-utf8",
        NfiStatus::InvalidArgument => c"invalid-argument",
        NfiStatus::Config => c"config",
        NfiStatus::Io => c"io",
        NfiStatus::Numerical => c"numerical",
        NfiStatus::ShapeMismatch => c"shape-mismatch",
        NfiStatus::Format => c"format",
        NfiStatus::BufferTooSmall => c"buffer-too-small",
        NfiStatus::Panic => c"panic",
    };
    s.as_ptr()
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn nfi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
