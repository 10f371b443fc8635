//! C ABI over the instance library.
//!
//! Handles are opaque pointers created and destroyed here; every other
//! function returns a [`ZcStatus`] and writes results through caller-owned
//! buffers whose lengths are checked exactly against the instance
//! dimensions. Nothing unwinds across the boundary: panics are caught and
//! reported as [`ZcStatus::Panic`]. After any non-Ok status,
//! [`zc_last_error_message`] retrieves a description on the calling thread.
//!
//! The generated header is committed at `include/zerochain.h` and
//! regenerated on every build.

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use zerochain::instance::{self, InstanceConfig};
use zerochain::linops::{self, OperatorTag};
use zerochain::oracle::Oracle;
use zerochain::prox;
use zerochain::stationarity;
use zerochain::{BlockVector, Error, InstanceParams, YVector};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArg = 1,
    /// A buffer length did not match the instance dimension.
    BadDimension = 2,
    /// Configuration rejected (invalid sizes, beta below its lower bound,
    /// malformed JSON, or non-UTF-8 text).
    BadConfig = 3,
    /// An index argument was outside its valid range.
    OutOfRange = 4,
    /// An iterative computation hit its iteration cap.
    NoConvergence = 5,
    /// A non-finite value was encountered.
    Numeric = 6,
    /// Unexpected internal failure; see `zc_last_error_message`.
    Internal = 7,
    /// A panic was caught at the boundary.
    Panic = 8,
}

/// Matrix-free operators selectable in `zc_apply` / `zc_opnorm`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZcOp {
    A = 0,
    Abar = 1,
    H = 2,
    AAdj = 3,
    AbarAdj = 4,
    HAdj = 5,
    AtA = 6,
    AbarTAbar = 7,
    HtH = 8,
    AAt = 9,
    AbarAbarT = 10,
}

fn op_tag(op: u32) -> Option<OperatorTag> {
    Some(match op {
        0 => OperatorTag::A,
        1 => OperatorTag::Abar,
        2 => OperatorTag::H,
        3 => OperatorTag::AAdj,
        4 => OperatorTag::AbarAdj,
        5 => OperatorTag::HAdj,
        6 => OperatorTag::AtA,
        7 => OperatorTag::AbarTAbar,
        8 => OperatorTag::HtH,
        9 => OperatorTag::AAt,
        10 => OperatorTag::AbarAbarT,
        _ => return None,
    })
}

/// Scalar facts about an instance, filled by `zc_instance_info`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ZcInstanceInfo {
    pub m: usize,
    pub dbar: usize,
    /// Primal dimension `m * dbar`.
    pub d: usize,
    /// Rows of the constraint operator.
    pub n: usize,
    /// Rows of the coupling operator.
    pub nbar: usize,
    pub eps: f64,
    pub lf: f64,
    pub beta: f64,
    pub scale: f64,
    pub a_norm: f64,
    pub abar_norm: f64,
    pub h_norm: f64,
}

pub struct ZcInstance {
    p: InstanceParams,
}

pub struct ZcOracle {
    o: Oracle,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: impl AsRef<str>) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.as_ref().bytes().filter(|&b| b != 0));
    });
}

fn fail(status: ZcStatus, msg: impl AsRef<str>) -> ZcStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> ZcStatus {
    match err {
        Error::InvalidParams(_) => ZcStatus::BadConfig,
        Error::DimensionMismatch { .. } => ZcStatus::BadDimension,
        Error::IndexOutOfRange { .. } => ZcStatus::OutOfRange,
        Error::NoConvergence { .. } => ZcStatus::NoConvergence,
        Error::Diverged(_) => ZcStatus::Numeric,
        _ => ZcStatus::Internal,
    }
}

fn from_err(err: Error) -> ZcStatus {
    fail(status_of(&err), err.to_string())
}

fn guard(body: impl FnOnce() -> ZcStatus) -> ZcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic with non-string payload".into());
            fail(ZcStatus::Panic, format!("caught panic: {msg}"))
        }
    }
}

unsafe fn in_slice<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

unsafe fn out_slice<'a>(ptr: *mut f64, len: usize) -> Option<&'a mut [f64]> {
    if len == 0 {
        Some(&mut [])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts_mut(ptr, len))
    }
}

macro_rules! nonnull {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => return fail(ZcStatus::NullArg, concat!(stringify!($ptr), " is null")),
        }
    };
}

macro_rules! nonnull_mut {
    ($ptr:expr) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => return fail(ZcStatus::NullArg, concat!(stringify!($ptr), " is null")),
        }
    };
}

macro_rules! in_vec {
    ($ptr:expr, $len:expr, $want:expr) => {{
        let want = $want;
        if $len != want {
            return fail(
                ZcStatus::BadDimension,
                format!(
                    "{}: expected length {}, got {}",
                    stringify!($ptr),
                    want,
                    $len
                ),
            );
        }
        match unsafe { in_slice($ptr, $len) } {
            Some(s) => s,
            None => return fail(ZcStatus::NullArg, concat!(stringify!($ptr), " is null")),
        }
    }};
}

macro_rules! out_vec {
    ($ptr:expr, $len:expr, $want:expr) => {{
        let want = $want;
        if $len != want {
            return fail(
                ZcStatus::BadDimension,
                format!(
                    "{}: expected length {}, got {}",
                    stringify!($ptr),
                    want,
                    $len
                ),
            );
        }
        match unsafe { out_slice($ptr, $len) } {
            Some(s) => s,
            None => return fail(ZcStatus::NullArg, concat!(stringify!($ptr), " is null")),
        }
    }};
}

fn block_vec(p: &InstanceParams, data: &[f64]) -> BlockVector {
    BlockVector::from_vec(p.dbar, data.to_vec())
}

fn y_vec(p: &InstanceParams, data: &[f64]) -> YVector {
    YVector::from_vec(p.dbar, data.to_vec())
}

/// Copy the most recent error message for this thread into `buf` as a
/// NUL-terminated string. Returns the number of bytes required, including
/// the terminator; if `buf` is null or `cap` is too small, nothing is
/// copied and the caller should retry with the returned size.
#[no_mangle]
pub unsafe extern "C" fn zc_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let need = e.len() + 1;
        if !buf.is_null() && cap >= need {
            let dst = std::slice::from_raw_parts_mut(buf as *mut u8, need);
            dst[..e.len()].copy_from_slice(&e);
            dst[e.len()] = 0;
        }
        need
    })
}

/// Build an instance from explicit parameters. `beta <= 0` selects the
/// default coupling weight. On success writes a handle that must be
/// released with `zc_instance_destroy`.
#[no_mangle]
pub unsafe extern "C" fn zc_instance_create(
    eps: f64,
    lf: f64,
    m1: usize,
    m2: usize,
    dbar: usize,
    beta: f64,
    out: *mut *mut ZcInstance,
) -> ZcStatus {
    guard(|| {
        let out = nonnull_mut!(out);
        let cfg = InstanceConfig {
            eps,
            lf,
            m1,
            m2,
            dbar,
            beta: (beta > 0.0).then_some(beta),
        };
        match InstanceParams::new(&cfg) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(ZcInstance { p }));
                ZcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Build an instance from a JSON object with optional keys
/// `eps, lf, m1, m2, dbar, beta`; omitted keys take the reference defaults.
/// Unknown keys are rejected.
#[no_mangle]
pub unsafe extern "C" fn zc_instance_create_json(
    json: *const c_char,
    out: *mut *mut ZcInstance,
) -> ZcStatus {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Patch {
        eps: f64,
        lf: f64,
        m1: usize,
        m2: usize,
        dbar: usize,
        beta: Option<f64>,
    }
    impl Default for Patch {
        fn default() -> Self {
            let c = InstanceConfig::default();
            Patch {
                eps: c.eps,
                lf: c.lf,
                m1: c.m1,
                m2: c.m2,
                dbar: c.dbar,
                beta: c.beta,
            }
        }
    }

    guard(|| {
        let out = nonnull_mut!(out);
        if json.is_null() {
            return fail(ZcStatus::NullArg, "json is null");
        }
        let text = match std::ffi::CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(_) => return fail(ZcStatus::BadConfig, "json is not valid UTF-8"),
        };
        let patch: Patch = match serde_json::from_str(text) {
            Ok(p) => p,
            Err(e) => return fail(ZcStatus::BadConfig, format!("json rejected: {e}")),
        };
        let cfg = InstanceConfig {
            eps: patch.eps,
            lf: patch.lf,
            m1: patch.m1,
            m2: patch.m2,
            dbar: patch.dbar,
            beta: patch.beta,
        };
        match InstanceParams::new(&cfg) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(ZcInstance { p }));
                ZcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Release an instance handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn zc_instance_destroy(inst: *mut ZcInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Fill `info` with the instance's dimensions and scalar constants.
#[no_mangle]
pub unsafe extern "C" fn zc_instance_info(
    inst: *const ZcInstance,
    info: *mut ZcInstanceInfo,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let info = nonnull_mut!(info);
        let p = &inst.p;
        *info = ZcInstanceInfo {
            m: p.m,
            dbar: p.dbar,
            d: p.d,
            n: p.n,
            nbar: p.nbar,
            eps: p.eps,
            lf: p.lf,
            beta: p.beta,
            scale: p.scale,
            a_norm: p.a_norm,
            abar_norm: p.abar_norm,
            h_norm: p.h_norm,
        };
        ZcStatus::Ok
    })
}

/// Smooth objective `f0` at `x` (length `d`).
#[no_mangle]
pub unsafe extern "C" fn zc_f0(
    inst: *const ZcInstance,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        let x = in_vec!(x, x_len, inst.p.d);
        *out = instance::f0(&inst.p, &block_vec(&inst.p, x));
        ZcStatus::Ok
    })
}

/// Gradient of `f0` at `x`; `out` has length `d`.
#[no_mangle]
pub unsafe extern "C" fn zc_grad_f0(
    inst: *const ZcInstance,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let x = in_vec!(x, x_len, inst.p.d);
        let out = out_vec!(out, out_len, inst.p.d);
        let g = instance::grad_f0(&inst.p, &block_vec(&inst.p, x));
        out.copy_from_slice(&g.data);
        ZcStatus::Ok
    })
}

/// Coupling penalty `g` at `x` (length `d`).
#[no_mangle]
pub unsafe extern "C" fn zc_g_value(
    inst: *const ZcInstance,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        let x = in_vec!(x, x_len, inst.p.d);
        *out = instance::g_val(&inst.p, &block_vec(&inst.p, x));
        ZcStatus::Ok
    })
}

/// Split-form penalty `gbar` at `y` (length `nbar`).
#[no_mangle]
pub unsafe extern "C" fn zc_gbar_value(
    inst: *const ZcInstance,
    y: *const f64,
    y_len: usize,
    out: *mut f64,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        let y = in_vec!(y, y_len, inst.p.nbar);
        *out = instance::gbar_val(&inst.p, &y_vec(&inst.p, y));
        ZcStatus::Ok
    })
}

/// Apply the operator selected by `op` (a `ZcOp` value). Input and output
/// lengths must match that operator's shape for this instance.
#[no_mangle]
pub unsafe extern "C" fn zc_apply(
    inst: *const ZcInstance,
    op: u32,
    input: *const f64,
    input_len: usize,
    out: *mut f64,
    out_len: usize,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let tag = match op_tag(op) {
            Some(t) => t,
            None => return fail(ZcStatus::OutOfRange, format!("unknown operator id {op}")),
        };
        let input = in_vec!(input, input_len, tag.in_dim(&inst.p));
        let out = out_vec!(out, out_len, tag.out_dim(&inst.p));
        match linops::apply(&inst.p, tag, input) {
            Ok(v) => {
                out.copy_from_slice(&v);
                ZcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Operator norm of the operator selected by `op` (a `ZcOp` value).
#[no_mangle]
pub unsafe extern "C" fn zc_opnorm(inst: *const ZcInstance, op: u32, out: *mut f64) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        let tag = match op_tag(op) {
            Some(t) => t,
            None => return fail(ZcStatus::OutOfRange, format!("unknown operator id {op}")),
        };
        match linops::opnorm(&inst.p, tag) {
            Ok(v) => {
                *out = v;
                ZcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// `i`-th closed-form eigenvalue of `H Hᵀ` (1-based, `1..=m-1`); each has
/// multiplicity `dbar` in the dense spectrum.
#[no_mangle]
pub unsafe extern "C" fn zc_eig_hht(
    inst: *const ZcInstance,
    i: usize,
    out: *mut f64,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        match linops::eig_hht(&inst.p, i) {
            Ok(v) => {
                *out = v;
                ZcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Joint condition number of the stacked row groups.
#[no_mangle]
pub unsafe extern "C" fn zc_kappa_joint(inst: *const ZcInstance, out: *mut f64) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        *out = linops::kappa_joint(&inst.p);
        ZcStatus::Ok
    })
}

/// Condition number of the constraint rows alone.
#[no_mangle]
pub unsafe extern "C" fn zc_kappa_a(inst: *const ZcInstance, out: *mut f64) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        match linops::kappa_a(&inst.p) {
            Ok(v) => {
                *out = v;
                ZcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Proximal map of `eta * g` at `x`; `x` and `out` have length `d`.
#[no_mangle]
pub unsafe extern "C" fn zc_prox_g(
    inst: *const ZcInstance,
    x: *const f64,
    x_len: usize,
    eta: f64,
    out: *mut f64,
    out_len: usize,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let x = in_vec!(x, x_len, inst.p.d);
        let out = out_vec!(out, out_len, inst.p.d);
        match prox::prox_g(&inst.p, &block_vec(&inst.p, x), eta) {
            Ok(v) => {
                out.copy_from_slice(&v.data);
                ZcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Proximal map of `eta * gbar` at `y`; `y` and `out` have length `nbar`.
#[no_mangle]
pub unsafe extern "C" fn zc_prox_gbar(
    inst: *const ZcInstance,
    y: *const f64,
    y_len: usize,
    eta: f64,
    out: *mut f64,
    out_len: usize,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let y = in_vec!(y, y_len, inst.p.nbar);
        let out = out_vec!(out, out_len, inst.p.nbar);
        match prox::prox_gbar(&inst.p, &y_vec(&inst.p, y), eta) {
            Ok(v) => {
                out.copy_from_slice(&v.data);
                ZcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Stationarity residual of the fully constrained smooth problem at `x`.
#[no_mangle]
pub unsafe extern "C" fn zc_residual_ap(
    inst: *const ZcInstance,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        let x = in_vec!(x, x_len, inst.p.d);
        *out = stationarity::residual_ap(&inst.p, &block_vec(&inst.p, x)).residual;
        ZcStatus::Ok
    })
}

/// Computable lower bound on the stationarity residual at `x`.
#[no_mangle]
pub unsafe extern "C" fn zc_certificate_lb(
    inst: *const ZcInstance,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        let x = in_vec!(x, x_len, inst.p.d);
        *out = stationarity::certificate_lb(&inst.p, &block_vec(&inst.p, x));
        ZcStatus::Ok
    })
}

/// Largest 1-based coordinate index active in any block of `x`
/// (0 when `x` is the zero vector).
#[no_mangle]
pub unsafe extern "C" fn zc_support_front(
    inst: *const ZcInstance,
    x: *const f64,
    x_len: usize,
    out: *mut usize,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        let x = in_vec!(x, x_len, inst.p.d);
        *out = zerochain::oracle::support_front(&block_vec(&inst.p, x));
        ZcStatus::Ok
    })
}

/// Create a metered oracle over the instance. The handle must be released
/// with `zc_oracle_destroy` and is not thread-safe.
#[no_mangle]
pub unsafe extern "C" fn zc_oracle_create(
    inst: *const ZcInstance,
    out: *mut *mut ZcOracle,
) -> ZcStatus {
    guard(|| {
        let inst = nonnull!(inst);
        let out = nonnull_mut!(out);
        *out = Box::into_raw(Box::new(ZcOracle {
            o: Oracle::new(inst.p.clone()),
        }));
        ZcStatus::Ok
    })
}

/// Release an oracle handle. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn zc_oracle_destroy(oracle: *mut ZcOracle) {
    if !oracle.is_null() {
        drop(Box::from_raw(oracle));
    }
}

/// Number of oracle calls made so far.
#[no_mangle]
pub unsafe extern "C" fn zc_oracle_count(oracle: *const ZcOracle, out: *mut usize) -> ZcStatus {
    guard(|| {
        let oracle = nonnull!(oracle);
        let out = nonnull_mut!(out);
        *out = oracle.o.count();
        ZcStatus::Ok
    })
}

/// First-kind oracle call: at `x` (length `d`), dual `z` (length `n`), and
/// step `eta`, writes the gradient (`d`), the constraint image (`n`), its
/// adjoint applied to `z` (`d`), and the prox of `eta * g` at `x` (`d`).
#[no_mangle]
pub unsafe extern "C" fn zc_oracle1(
    oracle: *mut ZcOracle,
    x: *const f64,
    x_len: usize,
    z: *const f64,
    z_len: usize,
    eta: f64,
    grad_f0_out: *mut f64,
    grad_f0_len: usize,
    ax_out: *mut f64,
    ax_len: usize,
    at_z_out: *mut f64,
    at_z_len: usize,
    prox_out: *mut f64,
    prox_len: usize,
) -> ZcStatus {
    guard(|| {
        let oracle = nonnull_mut!(oracle);
        let p = oracle.o.params().clone();
        let x = in_vec!(x, x_len, p.d);
        let z = in_vec!(z, z_len, p.n);
        let grad_out = out_vec!(grad_f0_out, grad_f0_len, p.d);
        let ax_out = out_vec!(ax_out, ax_len, p.n);
        let at_z_out = out_vec!(at_z_out, at_z_len, p.d);
        let prox_out = out_vec!(prox_out, prox_len, p.d);
        match oracle.o.oracle1(&block_vec(&p, x), z, eta) {
            Ok(b) => {
                grad_out.copy_from_slice(&b.grad_f0.data);
                ax_out.copy_from_slice(&b.ax);
                at_z_out.copy_from_slice(&b.at_z.data);
                prox_out.copy_from_slice(&b.prox.data);
                ZcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Second-kind oracle call: at `x` (length `d`), split variable `y`
/// (length `nbar`), dual `z` (length `n`), and step `eta`, writes the
/// gradient (`d`), the coupling image of `x` (`nbar`), the constraint
/// image of `x` (`n`), the coupling adjoint of `y` (`d`), the constraint
/// adjoint of `z` (`d`), and the prox of `eta * gbar` at `y` (`nbar`).
#[no_mangle]
pub unsafe extern "C" fn zc_oracle2(
    oracle: *mut ZcOracle,
    x: *const f64,
    x_len: usize,
    y: *const f64,
    y_len: usize,
    z: *const f64,
    z_len: usize,
    eta: f64,
    grad_f0_out: *mut f64,
    grad_f0_len: usize,
    abar_x_out: *mut f64,
    abar_x_len: usize,
    ax_out: *mut f64,
    ax_len: usize,
    abar_t_y_out: *mut f64,
    abar_t_y_len: usize,
    at_z_out: *mut f64,
    at_z_len: usize,
    prox_out: *mut f64,
    prox_len: usize,
) -> ZcStatus {
    guard(|| {
        let oracle = nonnull_mut!(oracle);
        let p = oracle.o.params().clone();
        let x = in_vec!(x, x_len, p.d);
        let y = in_vec!(y, y_len, p.nbar);
        let z = in_vec!(z, z_len, p.n);
        let grad_out = out_vec!(grad_f0_out, grad_f0_len, p.d);
        let abar_x_out = out_vec!(abar_x_out, abar_x_len, p.nbar);
        let ax_out = out_vec!(ax_out, ax_len, p.n);
        let abar_t_y_out = out_vec!(abar_t_y_out, abar_t_y_len, p.d);
        let at_z_out = out_vec!(at_z_out, at_z_len, p.d);
        let prox_out = out_vec!(prox_out, prox_len, p.nbar);
        match oracle
            .o
            .oracle2(&block_vec(&p, x), &y_vec(&p, y), z, eta)
        {
            Ok(b) => {
                grad_out.copy_from_slice(&b.grad_f0.data);
                abar_x_out.copy_from_slice(&b.abar_x.data);
                ax_out.copy_from_slice(&b.ax);
                abar_t_y_out.copy_from_slice(&b.abar_t_y.data);
                at_z_out.copy_from_slice(&b.at_z.data);
                prox_out.copy_from_slice(&b.prox.data);
                ZcStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}
