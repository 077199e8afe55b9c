//! C ABI over the simulator and the LDPC codec.
//!
//! Every entry point returns a [`CfmStatus`] (or a plain value for infallible
//! calls). On failure the message is kept per thread and can be read with
//! [`cfm_last_error`]. Panics are caught at the boundary and reported as
//! [`CfmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cfmimo::idd::DetectorKind;
use cfmimo::ldpc::{self, LdpcCode};
use cfmimo::selection::ApMode;
use cfmimo::sim::{self, BerRecord, SimConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfmDetector {
    Mmse = 0,
    SoftIc = 1,
    List = 2,
    Genie = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfmApMode {
    All = 0,
    Sel = 1,
}

/// One row of a BER sweep.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfmBerPoint {
    pub snr_db: f64,
    pub detector: CfmDetector,
    pub ap_mode: CfmApMode,
    pub idd_iter: u32,
    pub trials: u64,
    pub bits_total: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub seed_base: u64,
}

/// Opaque simulator handle.
pub struct CfmSimulator {
    cfg: SimConfig,
    code: LdpcCode,
}

/// Opaque list of sweep results.
pub struct CfmRecords {
    rows: Vec<BerRecord>,
}

/// Opaque LDPC code handle.
pub struct CfmLdpc {
    code: LdpcCode,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CfmStatus, String);

impl From<cfmimo::Error> for Failure {
    fn from(e: cfmimo::Error) -> Self {
        use cfmimo::Error as E;
        let status = match &e {
            E::Config(_) | E::Toml(_) | E::Code(_) => CfmStatus::Config,
            E::Dimension(_) => CfmStatus::InvalidArgument,
            E::NotPositiveDefinite(_) | E::ZeroChannel | E::NonPositiveNoise(_) => CfmStatus::Numerical,
            E::Io(_) | E::Csv(_) => CfmStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CfmStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(CfmStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CfmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CfmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cfm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn cfm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a simulator from a TOML configuration string. `config` may be
/// empty for the defaults.
///
/// # Safety
/// `config` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfm_simulator_new(config: *const c_char, out: *mut *mut CfmSimulator) -> CfmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = SimConfig::from_toml_str(str_arg(config, "config")?)?;
        cfg.validate()?;
        let code = cfg.load_code()?;
        cfg.validate_code(&code)?;
        *out = Box::into_raw(Box::new(CfmSimulator { cfg, code }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from [`cfm_simulator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cfm_simulator_free(sim: *mut CfmSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Overrides the trial count and seed base of an existing simulator.
///
/// # Safety
/// `sim` must be a live simulator handle.
#[no_mangle]
pub unsafe extern "C" fn cfm_simulator_set_trials(sim: *mut CfmSimulator, trials: u64, seed: u64) -> CfmStatus {
    guard(|| {
        let sim = out_arg(sim, "sim")?;
        if trials == 0 {
            return Err(invalid("trials must be positive"));
        }
        sim.cfg.trials = trials;
        sim.cfg.seed = seed;
        Ok(())
    })
}

/// Runs the configured sweep.
///
/// # Safety
/// `sim` must be a live simulator handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfm_simulator_sweep(sim: *const CfmSimulator, out: *mut *mut CfmRecords) -> CfmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let sim = ref_arg(sim, "sim")?;
        let rows = sim::sweep_with_code(&sim.cfg, &sim.code)?;
        *out = Box::into_raw(Box::new(CfmRecords { rows }));
        Ok(())
    })
}

/// Number of rows; zero for a null handle.
///
/// # Safety
/// `records` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cfm_records_len(records: *const CfmRecords) -> usize {
    records.as_ref().map_or(0, |r| r.rows.len())
}

/// # Safety
/// `records` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfm_records_get(records: *const CfmRecords, index: usize, out: *mut CfmBerPoint) -> CfmStatus {
    guard(|| {
        let records = ref_arg(records, "records")?;
        let out = out_arg(out, "out")?;
        let r = records
            .rows
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range ({} rows)", records.rows.len())))?;
        *out = CfmBerPoint {
            snr_db: r.snr_db,
            detector: match r.detector {
                DetectorKind::Mmse => CfmDetector::Mmse,
                DetectorKind::SoftIc => CfmDetector::SoftIc,
                DetectorKind::List => CfmDetector::List,
                DetectorKind::Genie => CfmDetector::Genie,
            },
            ap_mode: match r.ap_mode {
                ApMode::All => CfmApMode::All,
                ApMode::Sel => CfmApMode::Sel,
            },
            idd_iter: r.idd_iter as u32,
            trials: r.trials,
            bits_total: r.bits_total,
            bit_errors: r.bit_errors,
            ber: r.ber,
            seed_base: r.seed_base,
        };
        Ok(())
    })
}

/// Writes the rows in the CLI's CSV format.
///
/// # Safety
/// `records` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cfm_records_write_csv(records: *const CfmRecords, path: *const c_char) -> CfmStatus {
    guard(|| {
        let records = ref_arg(records, "records")?;
        let path = str_arg(path, "path")?;
        sim::write_csv(&records.rows, Path::new(path))?;
        Ok(())
    })
}

/// # Safety
/// `records` must come from [`cfm_simulator_sweep`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cfm_records_free(records: *mut CfmRecords) {
    if !records.is_null() {
        drop(Box::from_raw(records));
    }
}

/// The bundled rate-1/2 code of length 256.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfm_ldpc_default(out: *mut *mut CfmLdpc) -> CfmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(CfmLdpc { code: LdpcCode::default_code() }));
        Ok(())
    })
}

/// Loads a code from an alist file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfm_ldpc_from_alist(path: *const c_char, out: *mut *mut CfmLdpc) -> CfmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let code = LdpcCode::from_alist_file(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(CfmLdpc { code }));
        Ok(())
    })
}

/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cfm_ldpc_length(code: *const CfmLdpc) -> usize {
    code.as_ref().map_or(0, |c| c.code.length())
}

/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cfm_ldpc_message_len(code: *const CfmLdpc) -> usize {
    code.as_ref().map_or(0, |c| c.code.message_len())
}

/// Systematic encoding. Bits are bytes holding 0 or 1.
///
/// # Safety
/// `msg` must hold `msg_len` bytes and `codeword` `codeword_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn cfm_ldpc_encode(
    code: *const CfmLdpc,
    msg: *const u8,
    msg_len: usize,
    codeword: *mut u8,
    codeword_len: usize,
) -> CfmStatus {
    guard(|| {
        let code = &ref_arg(code, "code")?.code;
        let msg = slice_arg(msg, msg_len, "msg")?;
        let cw_out = slice_out(codeword, codeword_len, "codeword")?;
        if msg.iter().any(|&b| b > 1) {
            return Err(invalid("message bits must be 0 or 1"));
        }
        if codeword_len != code.length() {
            return Err(invalid(format!("codeword buffer has {codeword_len} bytes, code length is {}", code.length())));
        }
        cw_out.copy_from_slice(&code.encode(msg)?);
        Ok(())
    })
}

/// Sum-product decoding of channel LLRs (`log P(0)/P(1)`). `posterior` may
/// be null; `iterations` and `converged` may be null.
///
/// # Safety
/// `llr`, `bits` and a non-null `posterior` must each hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn cfm_ldpc_decode(
    code: *const CfmLdpc,
    llr: *const f64,
    len: usize,
    max_iter: u32,
    bits: *mut u8,
    posterior: *mut f64,
    iterations: *mut u32,
    converged: *mut bool,
) -> CfmStatus {
    guard(|| {
        let code = &ref_arg(code, "code")?.code;
        if len != code.length() {
            return Err(invalid(format!("{len} LLRs given, code length is {}", code.length())));
        }
        let llr = slice_arg(llr, len, "llr")?;
        if llr.iter().any(|v| v.is_nan()) {
            return Err(invalid("LLRs must not be NaN"));
        }
        let bits = slice_out(bits, len, "bits")?;
        let res = ldpc::decode(code, llr, max_iter as usize);
        bits.copy_from_slice(&res.bits);
        if !posterior.is_null() {
            std::slice::from_raw_parts_mut(posterior, len).copy_from_slice(&res.posterior);
        }
        if let Some(it) = iterations.as_mut() {
            *it = res.iterations as u32;
        }
        if let Some(c) = converged.as_mut() {
            *c = res.converged;
        }
        Ok(())
    })
}

/// # Safety
/// `code` must come from one of the constructors and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cfm_ldpc_free(code: *mut CfmLdpc) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// Box-plus of two LLRs.
#[no_mangle]
pub extern "C" fn cfm_box_plus(a: f64, b: f64) -> f64 {
    ldpc::box_plus(a, b)
}
