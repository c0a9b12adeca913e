//! C ABI over the DBB format and the array simulator.
//!
//! Conventions:
//!
//! - Every fallible call returns an `int32_t` status: `S2TA_OK` (0) or a
//!   negative `S2TA_ERR_*` code. The matching message is kept per thread
//!   and fetched with [`s2ta_last_error_message`].
//! - `S2taArrayConfig` is an opaque handle created by
//!   [`s2ta_config_reference`] / [`s2ta_config_load`] and released with
//!   [`s2ta_config_free`].
//! - Strings returned through `char**` out-parameters are owned by the
//!   library and must be released with [`s2ta_string_free`].
//! - Panics never cross the boundary; they surface as `S2TA_ERR_PANIC`.
//!
//! The matching header lives at `include/s2ta.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use s2ta_core::arch::{buffer_account, load_array_config, ArrayConfig, Mode};
use s2ta_core::dbb::DbbConfig;
use s2ta_core::energy::EnergyCoefficients;
use s2ta_core::error::{Error, ErrorCategory};
use s2ta_core::pruning::{dap_prune_block, DapArrayConfig};
use s2ta_core::report::report_to_json;
use s2ta_core::sim::run_network;
use s2ta_core::workloads::{builtin, load_network};

pub const S2TA_OK: c_int = 0;
pub const S2TA_ERR_DATA: c_int = -1;
pub const S2TA_ERR_IO: c_int = -2;
pub const S2TA_ERR_CONFIG: c_int = -3;
pub const S2TA_ERR_WORKLOAD: c_int = -4;
pub const S2TA_ERR_NULL_ARGUMENT: c_int = -5;
pub const S2TA_ERR_UTF8: c_int = -6;
pub const S2TA_ERR_PANIC: c_int = -7;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn status_of(err: &Error) -> c_int {
    match err.category() {
        ErrorCategory::Data => S2TA_ERR_DATA,
        ErrorCategory::Io => S2TA_ERR_IO,
        ErrorCategory::Config => S2TA_ERR_CONFIG,
        ErrorCategory::Workload => S2TA_ERR_WORKLOAD,
    }
}

fn run<F: FnOnce() -> Result<(), (c_int, String)>>(f: F) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => S2TA_OK,
        Ok(Err((code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            S2TA_ERR_PANIC
        }
    }
}

fn core_err(e: Error) -> (c_int, String) {
    (status_of(&e), format!("{}: {e}", e.code()))
}

fn null_err(what: &str) -> (c_int, String) {
    (S2TA_ERR_NULL_ARGUMENT, format!("null argument: {what}"))
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, (c_int, String)> {
    if p.is_null() {
        return Err(null_err(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (S2TA_ERR_UTF8, format!("{what} is not valid UTF-8")))
}

/// Opaque accelerator instance handle.
pub struct S2taArrayConfig(ArrayConfig);

/// Library version string (static, do not free).
#[no_mangle]
pub extern "C" fn s2ta_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length in
/// bytes excluding the NUL, or 0 when no error is recorded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn s2ta_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Serialized bytes per DBB block (`nnz` values plus the bitmask), or a
/// negative status on an invalid geometry.
#[no_mangle]
pub extern "C" fn s2ta_storage_bytes_per_block(block_size: u8, nnz: u8) -> c_int {
    match DbbConfig::new(block_size, nnz) {
        Ok(cfg) => cfg.storage_bytes_per_block() as c_int,
        Err(e) => {
            set_error(&e.to_string());
            S2TA_ERR_CONFIG
        }
    }
}

/// Losslessly compress one dense block of `block_size` signed bytes.
/// Writes exactly `nnz` values to `out_values` and the positional bitmask
/// (bit 0 = position 0) to `out_mask`.
///
/// # Safety
/// `dense` must point to `block_size` readable bytes and `out_values` to
/// `nnz` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn s2ta_compress_block(
    dense: *const i8,
    block_size: u8,
    nnz: u8,
    out_values: *mut i8,
    out_mask: *mut u64,
) -> c_int {
    run(|| {
        if dense.is_null() {
            return Err(null_err("dense"));
        }
        if out_values.is_null() || out_mask.is_null() {
            return Err(null_err("out_values / out_mask"));
        }
        let cfg = DbbConfig::new(block_size, nnz).map_err(core_err)?;
        let input = std::slice::from_raw_parts(dense, block_size as usize);
        let block = s2ta_core::dbb::compress_block(input, &cfg).map_err(core_err)?;
        ptr::copy_nonoverlapping(block.values().as_ptr(), out_values, nnz as usize);
        *out_mask = block.mask();
        Ok(())
    })
}

/// Scatter a compressed block back to `block_size` dense bytes.
///
/// # Safety
/// `values` must point to `nnz` readable bytes and `out_dense` to
/// `block_size` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn s2ta_decompress_block(
    values: *const i8,
    nnz: u8,
    mask: u64,
    block_size: u8,
    out_dense: *mut i8,
) -> c_int {
    run(|| {
        if values.is_null() || out_dense.is_null() {
            return Err(null_err("values / out_dense"));
        }
        let cfg = DbbConfig::new(block_size, nnz).map_err(core_err)?;
        let stored = std::slice::from_raw_parts(values, nnz as usize).to_vec();
        let block = s2ta_core::dbb::DbbBlock::new(stored, mask).map_err(core_err)?;
        let dense = s2ta_core::dbb::decompress_block(&block, &cfg).map_err(core_err)?;
        ptr::copy_nonoverlapping(dense.as_ptr(), out_dense, block_size as usize);
        Ok(())
    })
}

/// Top-NNZ magnitude pruning of one dense block through the cascaded
/// maxpool model. `max_stages` caps the runtime NNZ (5 in the reference
/// design; pass `block_size` for library mode). Reports the comparator
/// work in `out_compare_ops` when non-null.
///
/// # Safety
/// `dense` must point to `block_size` readable bytes and `out_values` to
/// `nnz` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn s2ta_dap_prune_block(
    dense: *const i8,
    block_size: u8,
    nnz: u8,
    max_stages: u8,
    out_values: *mut i8,
    out_mask: *mut u64,
    out_compare_ops: *mut u64,
) -> c_int {
    run(|| {
        if dense.is_null() || out_values.is_null() || out_mask.is_null() {
            return Err(null_err("dense / out_values / out_mask"));
        }
        let cfg = DapArrayConfig::new(block_size, max_stages).map_err(core_err)?;
        let input = std::slice::from_raw_parts(dense, block_size as usize);
        let (block, events) = dap_prune_block(input, nnz, &cfg).map_err(core_err)?;
        ptr::copy_nonoverlapping(block.values().as_ptr(), out_values, nnz as usize);
        *out_mask = block.mask();
        if !out_compare_ops.is_null() {
            *out_compare_ops = events.compare_ops;
        }
        Ok(())
    })
}

/// Reference instance for a mode name (`"sa"`, `"sa-zvcg"`, `"s2ta-w"`,
/// `"s2ta-aw"`). Returns null on error.
///
/// # Safety
/// `mode` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn s2ta_config_reference(mode: *const c_char) -> *mut S2taArrayConfig {
    let mut out: *mut S2taArrayConfig = ptr::null_mut();
    run(|| {
        let mode = Mode::parse(cstr(mode, "mode")?).map_err(core_err)?;
        out = Box::into_raw(Box::new(S2taArrayConfig(ArrayConfig::reference(mode))));
        Ok(())
    });
    out
}

/// Load an instance from a key-value config file. Returns null on error.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn s2ta_config_load(path: *const c_char) -> *mut S2taArrayConfig {
    let mut out: *mut S2taArrayConfig = ptr::null_mut();
    run(|| {
        let path = cstr(path, "path")?;
        let cfg = load_array_config(Path::new(path)).map_err(core_err)?;
        out = Box::into_raw(Box::new(S2taArrayConfig(cfg)));
        Ok(())
    });
    out
}

/// Release a config handle. Null is a no-op.
///
/// # Safety
/// `cfg` must be a pointer previously returned by this library.
#[no_mangle]
pub unsafe extern "C" fn s2ta_config_free(cfg: *mut S2taArrayConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Physical INT8 MAC count of an instance, or a negative status.
///
/// # Safety
/// `cfg` must be a valid config handle.
#[no_mangle]
pub unsafe extern "C" fn s2ta_physical_macs(cfg: *const S2taArrayConfig) -> i64 {
    if cfg.is_null() {
        set_error("null argument: cfg");
        return S2TA_ERR_NULL_ARGUMENT as i64;
    }
    (*cfg).0.physical_macs() as i64
}

/// Per-MAC PE buffer account: operand register bytes, accumulator bytes
/// and their sum. `out_flagged` is set to 1 when the published figures for
/// this design point are known not to follow from its geometry.
///
/// # Safety
/// `cfg` must be a valid config handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2ta_buffer_account(
    cfg: *const S2taArrayConfig,
    out_operand_bytes: *mut c_double,
    out_accumulator_bytes: *mut c_double,
    out_total_bytes: *mut c_double,
    out_flagged: *mut c_int,
) -> c_int {
    run(|| {
        if cfg.is_null() {
            return Err(null_err("cfg"));
        }
        let acct = buffer_account(&(*cfg).0);
        if !out_operand_bytes.is_null() {
            *out_operand_bytes = acct.operand_bytes_per_mac;
        }
        if !out_accumulator_bytes.is_null() {
            *out_accumulator_bytes = acct.accumulator_bytes_per_mac;
        }
        if !out_total_bytes.is_null() {
            *out_total_bytes = acct.total_bytes_per_mac;
        }
        if !out_flagged.is_null() {
            *out_flagged = acct.reference_discrepancy as c_int;
        }
        Ok(())
    })
}

unsafe fn simulate_impl(
    cfg: *const S2taArrayConfig,
    net: s2ta_core::workloads::NetworkSpec,
    seed: u64,
    out_report_json: *mut *mut c_char,
) -> Result<(), (c_int, String)> {
    if cfg.is_null() {
        return Err(null_err("cfg"));
    }
    if out_report_json.is_null() {
        return Err(null_err("out_report_json"));
    }
    let coeffs = EnergyCoefficients::default();
    let report = run_network(&net, &(*cfg).0, &coeffs, seed, None).map_err(core_err)?;
    let json = report_to_json(&report).map_err(core_err)?;
    let c = CString::new(json)
        .map_err(|_| (S2TA_ERR_UTF8, "report contained a NUL byte".to_string()))?;
    *out_report_json = c.into_raw();
    Ok(())
}

/// Simulate a built-in network (`"alexnet"`, `"vgg16"`, `"mobilenetv1"`,
/// `"resnet50v1"`) with the embedded coefficient table; the JSON report is
/// returned through `out_report_json` (release with [`s2ta_string_free`]).
///
/// # Safety
/// `cfg` must be a valid config handle; `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn s2ta_simulate_builtin(
    cfg: *const S2taArrayConfig,
    name: *const c_char,
    seed: u64,
    out_report_json: *mut *mut c_char,
) -> c_int {
    run(|| {
        let net = builtin(cstr(name, "name")?).map_err(core_err)?;
        simulate_impl(cfg, net, seed, out_report_json)
    })
}

/// Simulate a network described by a JSON file.
///
/// # Safety
/// `cfg` must be a valid config handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn s2ta_simulate_network_file(
    cfg: *const S2taArrayConfig,
    path: *const c_char,
    seed: u64,
    out_report_json: *mut *mut c_char,
) -> c_int {
    run(|| {
        let net = load_network(Path::new(cstr(path, "path")?)).map_err(core_err)?;
        simulate_impl(cfg, net, seed, out_report_json)
    })
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn s2ta_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
