//! C ABI over `pulse2d`.
//!
//! Objects are opaque handles created by `*_new`/`*_read`/`*_parse` calls and
//! released with the matching `*_free`. Every fallible call returns a
//! [`P2dStatus`]; on failure the message is available from
//! [`p2d_last_error_message`] until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pulse2d::analysis::compare_spectra;
use pulse2d::config::{parse_config, ExperimentConfig};
use pulse2d::dsfd::{dsfd_spectrum, Detection, DsfdSettings};
use pulse2d::experiment::run_experiment;
use pulse2d::fd::DetectionMode;
use pulse2d::spectrum::{Component, Spectrum2D};
use pulse2d::system::{DephasingChannel, JumpChannel, QuantumSystem};
use pulse2d::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P2dStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Validation = 4,
    Integration = 5,
    Unsupported = 6,
    Calibration = 7,
    Singular = 8,
    AxisMismatch = 9,
    Parse = 10,
    Sweep = 11,
    Io = 12,
    Format = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P2dDetection {
    Heterodyne = 0,
    Fluorescence = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P2dComponent {
    Rephasing = 0,
    Nonrephasing = 1,
    Dqc = 2,
    Total = 3,
}

/// Lindblad relaxation channel `from -> to` with rate in eV.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct P2dJump {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// Opaque level structure.
pub struct P2dSystem {
    inner: QuantumSystem,
}

/// Opaque complex spectrum with its axes.
pub struct P2dSpectrum {
    inner: Spectrum2D,
}

/// Opaque validated experiment configuration.
pub struct P2dConfig {
    inner: ExperimentConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> P2dStatus {
    match e {
        Error::Dimension(_) => P2dStatus::Dimension,
        Error::Validation(_) => P2dStatus::Validation,
        Error::Integration { .. } => P2dStatus::Integration,
        Error::Unsupported(_) => P2dStatus::Unsupported,
        Error::Calibration(_) => P2dStatus::Calibration,
        Error::Singular { .. } => P2dStatus::Singular,
        Error::AxisMismatch(_) => P2dStatus::AxisMismatch,
        Error::Parse { .. } => P2dStatus::Parse,
        Error::AtPoint { source, .. } => status_of(source),
        Error::Sweep { .. } => P2dStatus::Sweep,
        Error::Io(_) => P2dStatus::Io,
        Error::Format(_) => P2dStatus::Format,
    }
}

/// Failure raised before reaching the library.
struct Rejected(P2dStatus, String);

impl From<Error> for Rejected {
    fn from(e: Error) -> Self {
        Rejected(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Rejected {
    Rejected(P2dStatus::NullArgument, format!("{name} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Rejected>>(f: F) -> P2dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => P2dStatus::Ok,
        Ok(Err(Rejected(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            P2dStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Rejected> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Rejected(P2dStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Rejected> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Rejected> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failure on this thread; empty when none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn p2d_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn p2d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The four-level dimer model with its default channels.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn p2d_system_dimer(out: *mut *mut P2dSystem) -> P2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        store(out, P2dSystem { inner: QuantumSystem::dimer_model() });
        Ok(())
    })
}

/// Builds an `n`-level system. `dipoles` is row-major `n x n`; `dephasing`
/// holds one strength (eV) per level; zero entries add no channel.
///
/// # Safety
/// Array arguments must point to the stated number of readable elements and
/// `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn p2d_system_new(
    n: usize,
    energies: *const f64,
    dipoles: *const f64,
    excitation: *const u32,
    yields: *const f64,
    dephasing: *const f64,
    jumps: *const P2dJump,
    n_jumps: usize,
    out: *mut *mut P2dSystem,
) -> P2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let e = slice(energies, n, "energies")?.to_vec();
        let d = slice(dipoles, n * n, "dipoles")?;
        let x = slice(excitation, n, "excitation")?.to_vec();
        let y = slice(yields, n, "yields")?.to_vec();
        let deph = slice(dephasing, n, "dephasing")?;
        let j = slice(jumps, n_jumps, "jumps")?;
        let system = QuantumSystem::new(
            e,
            nalgebra::DMatrix::from_row_slice(n, n, d),
            j.iter().map(|c| JumpChannel { from: c.from, to: c.to, rate: c.rate }).collect(),
            deph.iter()
                .enumerate()
                .filter(|(_, s)| **s != 0.0)
                .map(|(level, s)| DephasingChannel { level, strength: *s })
                .collect(),
            y,
            x,
        )?;
        store(out, P2dSystem { inner: system });
        Ok(())
    })
}

/// Number of levels.
///
/// # Safety
/// `system` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn p2d_system_dim(system: *const P2dSystem) -> usize {
    system.as_ref().map_or(0, |s| s.inner.dim())
}

/// # Safety
/// `system` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn p2d_system_free(system: *mut P2dSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Parses and validates a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn p2d_config_parse(toml: *const c_char, out: *mut *mut P2dConfig) -> P2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = parse_config(text(toml, "toml")?)?;
        store(out, P2dConfig { inner: cfg });
        Ok(())
    })
}

/// Replaces the output directory of a configuration.
///
/// # Safety
/// `config` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn p2d_config_set_output(config: *mut P2dConfig, dir: *const c_char) -> P2dStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        cfg.inner.output = Path::new(text(dir, "dir")?).to_path_buf();
        Ok(())
    })
}

/// Runs the configured sweep; writes the number of spectra produced.
///
/// # Safety
/// `config` must be a live handle; `n_spectra` may be null.
#[no_mangle]
pub unsafe extern "C" fn p2d_config_run(config: *const P2dConfig, n_spectra: *mut usize) -> P2dStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        let manifest = run_experiment(&cfg.inner)?;
        if !n_spectra.is_null() {
            *n_spectra = manifest.entries.len();
        }
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn p2d_config_free(config: *mut P2dConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

fn component(c: P2dComponent) -> Component {
    match c {
        P2dComponent::Rephasing => Component::Rephasing,
        P2dComponent::Nonrephasing => Component::Nonrephasing,
        P2dComponent::Dqc => Component::Dqc,
        P2dComponent::Total => Component::Total,
    }
}

/// Perturbative pathway spectrum on explicit axes (absolute eV). For
/// fluorescence detection `t_acq > 0` integrates the emission over that
/// window (fs) and `t_acq <= 0` reads populations right after the train.
///
/// # Safety
/// `system` must be a live handle, the axes must hold `n_tau` and `n_t`
/// readable values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn p2d_dsfd_spectrum(
    system: *const P2dSystem,
    detection: P2dDetection,
    which: P2dComponent,
    waiting: f64,
    tau_f: f64,
    carrier: f64,
    t_acq: f64,
    omega_tau: *const f64,
    n_tau: usize,
    omega_t: *const f64,
    n_t: usize,
    out: *mut *mut P2dSpectrum,
) -> P2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sys = handle(system, "system")?;
        let w_tau = slice(omega_tau, n_tau, "omega_tau")?;
        let w_t = slice(omega_t, n_t, "omega_t")?;
        let mode = if t_acq > 0.0 {
            DetectionMode::IntegratedFluorescence { t_acq }
        } else {
            DetectionMode::PopulationProxy
        };
        let detection = match detection {
            P2dDetection::Heterodyne => Detection::Heterodyne,
            P2dDetection::Fluorescence => Detection::Fluorescence,
        };
        let settings = DsfdSettings { waiting, tau_f, carrier, mode };
        let s = dsfd_spectrum(&sys.inner, detection, component(which), &settings, w_tau, w_t)?;
        store(out, P2dSpectrum { inner: s });
        Ok(())
    })
}

/// Reads a spectrum file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn p2d_spectrum_read(path: *const c_char, out: *mut *mut P2dSpectrum) -> P2dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = Spectrum2D::read(Path::new(text(path, "path")?))?;
        store(out, P2dSpectrum { inner: s });
        Ok(())
    })
}

/// Writes a spectrum file.
///
/// # Safety
/// `spectrum` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn p2d_spectrum_write(spectrum: *const P2dSpectrum, path: *const c_char) -> P2dStatus {
    guard(|| {
        let s = handle(spectrum, "spectrum")?;
        s.inner.write(Path::new(text(path, "path")?))?;
        Ok(())
    })
}

/// Number of `omega_tau` rows and `omega_t` columns.
///
/// # Safety
/// `spectrum` must be a live handle; `rows` and `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn p2d_spectrum_shape(
    spectrum: *const P2dSpectrum,
    rows: *mut usize,
    cols: *mut usize,
) -> P2dStatus {
    guard(|| {
        let s = handle(spectrum, "spectrum")?;
        if rows.is_null() || cols.is_null() {
            return Err(null("rows/cols"));
        }
        *rows = s.inner.omega_tau().len();
        *cols = s.inner.omega_t().len();
        Ok(())
    })
}

/// Copies the axes into caller buffers of `rows` and `cols` elements.
///
/// # Safety
/// `spectrum` must be a live handle and the buffers writable for the
/// lengths reported by [`p2d_spectrum_shape`].
#[no_mangle]
pub unsafe extern "C" fn p2d_spectrum_axes(
    spectrum: *const P2dSpectrum,
    omega_tau: *mut f64,
    omega_t: *mut f64,
) -> P2dStatus {
    guard(|| {
        let s = handle(spectrum, "spectrum")?;
        if omega_tau.is_null() || omega_t.is_null() {
            return Err(null("axis buffer"));
        }
        ptr::copy_nonoverlapping(s.inner.omega_tau().as_ptr(), omega_tau, s.inner.omega_tau().len());
        ptr::copy_nonoverlapping(s.inner.omega_t().as_ptr(), omega_t, s.inner.omega_t().len());
        Ok(())
    })
}

/// Copies real and imaginary parts in row-major order (`rows * cols` each).
///
/// # Safety
/// `spectrum` must be a live handle and both buffers writable for
/// `rows * cols` values.
#[no_mangle]
pub unsafe extern "C" fn p2d_spectrum_data(spectrum: *const P2dSpectrum, re: *mut f64, im: *mut f64) -> P2dStatus {
    guard(|| {
        let s = handle(spectrum, "spectrum")?;
        if re.is_null() || im.is_null() {
            return Err(null("data buffer"));
        }
        let d = s.inner.data();
        let cols = d.ncols();
        for i in 0..d.nrows() {
            for j in 0..cols {
                *re.add(i * cols + j) = d[(i, j)].re;
                *im.add(i * cols + j) = d[(i, j)].im;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `spectrum` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn p2d_spectrum_free(spectrum: *mut P2dSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Relative L2 distance of the max-normalized real parts (against `b`) and
/// the largest peak displacement in bins.
///
/// # Safety
/// `a` and `b` must be live handles; the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn p2d_compare(
    a: *const P2dSpectrum,
    b: *const P2dSpectrum,
    relative_l2: *mut f64,
    max_peak_shift: *mut usize,
) -> P2dStatus {
    guard(|| {
        let (a, b) = (handle(a, "a")?, handle(b, "b")?);
        if relative_l2.is_null() || max_peak_shift.is_null() {
            return Err(null("output"));
        }
        let c = compare_spectra(&a.inner, &b.inner)?;
        *relative_l2 = c.relative_l2;
        *max_peak_shift = c.peak_deltas.iter().map(|d| d.max_bins() as usize).max().unwrap_or(0);
        Ok(())
    })
}
