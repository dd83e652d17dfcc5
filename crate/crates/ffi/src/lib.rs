//! C ABI over the `asem` solvers.
//!
//! Problems and reports are opaque heap handles created by `asem_*_new` /
//! `asem_solve_*` and released with the matching `*_free`. Every fallible
//! call returns an [`AsemStatus`]; the message for the most recent failure
//! on the calling thread is available from [`asem_last_error`]. Panics are
//! caught at the boundary and reported as [`AsemStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use asem::crs::{
    solve_asem, solve_exact, solve_krylov, AsemConfig, CrsError, CrsProblem, EigenSource, KrylovConfig, SolveReport,
};
use asem::operators::{EigenConfig, SymmetricOperator};
use asem::secular::{ModelOrder, MuRule};
use nalgebra::DMatrix;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// `b` is (numerically) orthogonal to the bottom eigenvector.
    HardCase = 3,
    NumericalFailure = 4,
    /// The caller's buffer is shorter than the data to be written.
    BufferTooSmall = 5,
    Panic = 6,
}

/// Surrogate rule for the unseen part of the spectrum.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsemMuRule {
    Auto = 0,
    Mean = 1,
    Weighted = 2,
    LargestKnown = 3,
    /// Uses [`AsemOptions::mu_value`].
    Fixed = 4,
}

/// Options for [`asem_solve_asem`]; start from [`asem_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AsemOptions {
    /// Number of eigenpairs to estimate.
    pub m: usize,
    /// Secular model order, 1 or 2.
    pub order: u32,
    pub mu_rule: AsemMuRule,
    pub mu_value: f64,
    /// Lanczos dimension per cycle; 0 picks `max(2m, 20)`.
    pub krylov_dim: usize,
    pub restarts: usize,
    /// Total matvec budget; 0 means unlimited.
    pub budget: u64,
    pub seed: u64,
    /// Take eigenpairs from a full decomposition instead of Lanczos.
    pub use_oracle: bool,
}

/// Bit set in [`AsemSummary::flags`].
pub const ASEM_FLAG_CONVERGED: u32 = 1;
pub const ASEM_FLAG_EIGEN_CONVERGED: u32 = 1 << 1;
pub const ASEM_FLAG_LINEAR_SOLVE_CONVERGED: u32 = 1 << 2;
pub const ASEM_FLAG_HARD_CASE_SUSPECTED: u32 = 1 << 3;
pub const ASEM_FLAG_TRACE_ESTIMATED: u32 = 1 << 4;
pub const ASEM_FLAG_MU_CLAMPED: u32 = 1 << 5;
pub const ASEM_FLAG_INDEFINITE_SHIFT: u32 = 1 << 6;
pub const ASEM_FLAG_DIVERGED: u32 = 1 << 7;
pub const ASEM_FLAG_BUDGET_EXHAUSTED: u32 = 1 << 8;

/// Scalar results of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AsemSummary {
    pub dim: usize,
    pub sigma: f64,
    pub grad_norm: f64,
    pub objective: f64,
    pub residual_norm: f64,
    pub matvecs: u64,
    /// `ASEM_FLAG_*` bits.
    pub flags: u32,
}

/// Writes `y = A x` for vectors of length `n`. Must be symmetric, and safe
/// to call from several threads at once with the same `ctx`.
pub type AsemMatvecFn = Option<unsafe extern "C" fn(ctx: *mut c_void, x: *const f64, y: *mut f64, n: usize)>;

/// Opaque problem handle.
pub struct AsemProblem {
    inner: CrsProblem<'static>,
}

/// Opaque solve result.
pub struct AsemReport {
    inner: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: impl std::fmt::Display) {
    LAST_ERROR.with(|e| {
        let mut bytes = msg.to_string().into_bytes();
        bytes.retain(|&b| b != 0);
        *e.borrow_mut() = bytes;
    });
}

fn fail(status: AsemStatus, msg: impl std::fmt::Display) -> AsemStatus {
    set_error(msg);
    status
}

fn crs_status(e: CrsError) -> AsemStatus {
    let status = if e.is_hard_case() {
        AsemStatus::HardCase
    } else {
        match e {
            CrsError::InvalidConfig(_) | CrsError::InvalidProblem(_) => AsemStatus::InvalidArgument,
            _ => AsemStatus::NumericalFailure,
        }
    };
    fail(status, e)
}

/// Runs `f`, converting panics into [`AsemStatus::Panic`].
fn guard(f: impl FnOnce() -> AsemStatus) -> AsemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(AsemStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn read_slice<'a>(p: *const f64, len: usize) -> Option<&'a [f64]> {
    if p.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(p, len))
    }
}

fn store_problem(p: CrsProblem<'static>, out: *mut *mut AsemProblem) -> AsemStatus {
    // SAFETY: callers check `out` for null before building the problem.
    unsafe { *out = Box::into_raw(Box::new(AsemProblem { inner: p })) };
    AsemStatus::Ok
}

/// Builds `min b^T x + 1/2 x^T diag(d) x + rho/3 ||x||^3`.
///
/// # Safety
/// `diag` and `b` must be valid for `n` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asem_problem_new_diagonal(
    diag: *const f64,
    b: *const f64,
    n: usize,
    rho: f64,
    out: *mut *mut AsemProblem,
) -> AsemStatus {
    guard(|| {
        let (Some(d), Some(b)) = (read_slice(diag, n), read_slice(b, n)) else {
            return fail(AsemStatus::NullPointer, "null input array");
        };
        if out.is_null() {
            return fail(AsemStatus::NullPointer, "null output handle");
        }
        match CrsProblem::new(SymmetricOperator::diagonal(d.to_vec()), b.to_vec(), rho) {
            Ok(p) => store_problem(p, out),
            Err(e) => crs_status(e),
        }
    })
}

/// Builds a problem from a dense symmetric `n x n` matrix stored row-major.
///
/// # Safety
/// `matrix` must be valid for `n * n` reads, `b` for `n`; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn asem_problem_new_dense(
    matrix: *const f64,
    b: *const f64,
    n: usize,
    rho: f64,
    out: *mut *mut AsemProblem,
) -> AsemStatus {
    guard(|| {
        let Some(len) = n.checked_mul(n) else {
            return fail(AsemStatus::InvalidArgument, "n * n overflows");
        };
        let (Some(a), Some(b)) = (read_slice(matrix, len), read_slice(b, n)) else {
            return fail(AsemStatus::NullPointer, "null input array");
        };
        if out.is_null() {
            return fail(AsemStatus::NullPointer, "null output handle");
        }
        let op = match SymmetricOperator::dense(DMatrix::from_row_slice(n, n, a)) {
            Ok(op) => op,
            Err(e) => return fail(AsemStatus::InvalidArgument, e),
        };
        match CrsProblem::new(op, b.to_vec(), rho) {
            Ok(p) => store_problem(p, out),
            Err(e) => crs_status(e),
        }
    })
}

struct Callback {
    f: unsafe extern "C" fn(*mut c_void, *const f64, *mut f64, usize),
    ctx: *mut c_void,
}

// SAFETY: the contract on `AsemMatvecFn` makes the callback thread-safe.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Callback {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        // SAFETY: `x` and `y` both have the operator dimension.
        unsafe { (self.f)(self.ctx, x.as_ptr(), y.as_mut_ptr(), x.len()) }
    }
}

/// Builds a matrix-free problem whose operator is applied through `matvec`.
/// `trace` is used for the first-order surrogate when finite; pass NaN to
/// have it estimated. `ctx` must outlive the problem handle.
///
/// # Safety
/// `b` must be valid for `n` reads, `out` writable, and `matvec` must honour
/// the [`AsemMatvecFn`] contract.
#[no_mangle]
pub unsafe extern "C" fn asem_problem_new_matvec(
    n: usize,
    matvec: AsemMatvecFn,
    ctx: *mut c_void,
    trace: f64,
    b: *const f64,
    rho: f64,
    out: *mut *mut AsemProblem,
) -> AsemStatus {
    guard(|| {
        let Some(f) = matvec else {
            return fail(AsemStatus::NullPointer, "null matvec callback");
        };
        let Some(b) = read_slice(b, n) else {
            return fail(AsemStatus::NullPointer, "null input array");
        };
        if out.is_null() {
            return fail(AsemStatus::NullPointer, "null output handle");
        }
        let cb = Callback { f, ctx };
        let mut op = SymmetricOperator::from_fn(n, move |x, y| cb.apply(x, y));
        if trace.is_finite() {
            op = op.with_trace(trace);
        }
        match CrsProblem::new(op, b.to_vec(), rho) {
            Ok(p) => store_problem(p, out),
            Err(e) => crs_status(e),
        }
    })
}

/// Dimension of the problem, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asem_problem_dim(problem: *const AsemProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.dim())
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn asem_problem_free(problem: *mut AsemProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// First-order model, `mu_1`, `m = 10`, Lanczos without restarts.
#[no_mangle]
pub extern "C" fn asem_options_default() -> AsemOptions {
    AsemOptions {
        m: 10,
        order: 1,
        mu_rule: AsemMuRule::Auto,
        mu_value: 0.0,
        krylov_dim: 0,
        restarts: 0,
        budget: 0,
        seed: 0,
        use_oracle: false,
    }
}

fn asem_config(o: &AsemOptions) -> Result<AsemConfig, String> {
    let order = match o.order {
        1 => ModelOrder::FirstOrder,
        2 => ModelOrder::SecondOrder,
        k => return Err(format!("order must be 1 or 2, got {k}")),
    };
    let mu_rule = match o.mu_rule {
        AsemMuRule::Auto => MuRule::Auto,
        AsemMuRule::Mean => MuRule::Mean,
        AsemMuRule::Weighted => MuRule::Weighted,
        AsemMuRule::LargestKnown => MuRule::LargestKnown,
        AsemMuRule::Fixed => MuRule::Fixed(o.mu_value),
    };
    let eigen = if o.use_oracle {
        EigenSource::Oracle
    } else {
        EigenSource::Lanczos(EigenConfig {
            krylov_dim: (o.krylov_dim > 0).then_some(o.krylov_dim),
            restarts: o.restarts,
            seed: o.seed,
            ..EigenConfig::default()
        })
    };
    Ok(AsemConfig {
        m: o.m,
        order,
        mu_rule,
        eigen,
        budget: (o.budget > 0).then_some(o.budget),
        seed: o.seed,
        ..AsemConfig::default()
    })
}

fn finish(result: Result<SolveReport, CrsError>, out: *mut *mut AsemReport) -> AsemStatus {
    match result {
        Ok(r) => {
            // SAFETY: checked non-null by every caller.
            unsafe { *out = Box::into_raw(Box::new(AsemReport { inner: r })) };
            AsemStatus::Ok
        }
        Err(e) => crs_status(e),
    }
}

/// Solves with the approximate secular equation method. `options` may be
/// null for the defaults.
///
/// # Safety
/// `problem` must be a live handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn asem_solve_asem(
    problem: *const AsemProblem,
    options: *const AsemOptions,
    out: *mut *mut AsemReport,
) -> AsemStatus {
    guard(|| {
        let Some(p) = problem.as_ref() else {
            return fail(AsemStatus::NullPointer, "null problem handle");
        };
        if out.is_null() {
            return fail(AsemStatus::NullPointer, "null output handle");
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| asem_options_default());
        match asem_config(&opts) {
            Ok(cfg) => finish(solve_asem(&p.inner, &cfg), out),
            Err(msg) => fail(AsemStatus::InvalidArgument, msg),
        }
    })
}

/// Solves through a full eigendecomposition (diagonal or small dense).
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn asem_solve_exact(problem: *const AsemProblem, out: *mut *mut AsemReport) -> AsemStatus {
    guard(|| {
        let Some(p) = problem.as_ref() else {
            return fail(AsemStatus::NullPointer, "null problem handle");
        };
        if out.is_null() {
            return fail(AsemStatus::NullPointer, "null output handle");
        }
        finish(solve_exact(&p.inner), out)
    })
}

/// Solves the subproblem restricted to a `k`-dimensional Krylov subspace.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn asem_solve_krylov(
    problem: *const AsemProblem,
    k: usize,
    out: *mut *mut AsemReport,
) -> AsemStatus {
    guard(|| {
        let Some(p) = problem.as_ref() else {
            return fail(AsemStatus::NullPointer, "null problem handle");
        };
        if out.is_null() {
            return fail(AsemStatus::NullPointer, "null output handle");
        }
        let cfg = KrylovConfig {
            k,
            ..KrylovConfig::default()
        };
        finish(solve_krylov(&p.inner, &cfg), out)
    })
}

/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn asem_report_summary(report: *const AsemReport, out: *mut AsemSummary) -> AsemStatus {
    let (Some(r), false) = (report.as_ref(), out.is_null()) else {
        return fail(AsemStatus::NullPointer, "null report or output");
    };
    let r = &r.inner;
    let f = &r.flags;
    let bits = [
        (f.converged, ASEM_FLAG_CONVERGED),
        (f.eigen_converged, ASEM_FLAG_EIGEN_CONVERGED),
        (f.linear_solve_converged, ASEM_FLAG_LINEAR_SOLVE_CONVERGED),
        (f.hard_case_suspected, ASEM_FLAG_HARD_CASE_SUSPECTED),
        (f.trace_estimated, ASEM_FLAG_TRACE_ESTIMATED),
        (f.mu_clamped, ASEM_FLAG_MU_CLAMPED),
        (f.indefinite_shift, ASEM_FLAG_INDEFINITE_SHIFT),
        (f.diverged, ASEM_FLAG_DIVERGED),
        (f.budget_exhausted, ASEM_FLAG_BUDGET_EXHAUSTED),
    ];
    *out = AsemSummary {
        dim: r.x.len(),
        sigma: r.sigma,
        grad_norm: r.grad_norm,
        objective: r.objective,
        residual_norm: r.residual_norm,
        matvecs: r.matvecs,
        flags: bits.iter().filter(|(on, _)| *on).fold(0, |acc, (_, bit)| acc | bit),
    };
    AsemStatus::Ok
}

/// Copies the solution into `x`, which must hold at least the problem
/// dimension.
///
/// # Safety
/// `report` must be a live handle and `x` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn asem_report_solution(report: *const AsemReport, x: *mut f64, len: usize) -> AsemStatus {
    let (Some(r), false) = (report.as_ref(), x.is_null()) else {
        return fail(AsemStatus::NullPointer, "null report or buffer");
    };
    let src = &r.inner.x;
    if len < src.len() {
        return fail(
            AsemStatus::BufferTooSmall,
            format!("buffer holds {len}, solution has {}", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), x, src.len());
    AsemStatus::Ok
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn asem_report_free(report: *mut AsemReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to fit) and returns the full message length without the NUL.
/// Call with a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn asem_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn asem_status_str(status: AsemStatus) -> *const c_char {
    let s: &'static CStr = match status {
        AsemStatus::Ok => c"ok",
        AsemStatus::NullPointer => c"null pointer",
        AsemStatus::InvalidArgument => c"invalid argument",
        AsemStatus::HardCase => c"hard case: b is orthogonal to the bottom eigenvector",
        AsemStatus::NumericalFailure => c"numerical failure",
        AsemStatus::BufferTooSmall => c"buffer too small",
        AsemStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}
