//! C ABI over `laplace-stein`.
//!
//! Every fallible function returns an `LsStatus` and writes results
//! through out-pointers. On failure the message is kept per thread and can
//! be read with `ls_last_error_message`. Solutions and sources are opaque
//! handles released with their `_free` functions.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use laplace_stein::metrics::{kolmogorov_empirical, kolmogorov_from_bl, wasserstein_empirical, EmpiricalSample};
use laplace_stein::random_sums::{random_sum_sample, theorem7_bound, RandomSumSpec};
use laplace_stein::stein::{solve, SteinSolution, TestFunction};
use laplace_stein::{Error, LaplaceParams, SourceDistribution};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    InvalidParameter = 3,
    Quadrature = 4,
    Unsupported = 5,
    Contract = 6,
    Truncation = 7,
    Panic = 8,
}

/// Built-in test functions for `ls_stein_solution_new`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsTestFunction {
    Sine = 0,
    Cosine = 1,
    Tanh = 2,
    ClampUnit = 3,
    /// `param1 = c`: `clamp(z - c, -1, 1)`.
    ShiftedClamp = 4,
    /// `param1 = x0`, `param2 = eps`: ramp from `eps` down to 0 on `[x0, x0 + eps]`.
    SmoothedIndicator = 5,
}

/// Summand laws for `ls_source_new`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsSourceKind {
    /// `±c`.
    Rademacher = 0,
    /// `Uniform(-c, c)`.
    Uniform = 1,
    /// `Laplace(0, c)`.
    Laplace = 2,
    /// Atoms `-2c`, `c`, `3c` with weights ½, ¼, ¼.
    Skewed = 3,
}

/// `g`, `g'`, `g''`, `g'''` at a point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LsSteinValues {
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

/// Opaque Stein solution.
pub struct LsSteinSolution(SteinSolution);

/// Opaque summand law.
pub struct LsSource(SourceDistribution);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> LsStatus {
    match e {
        Error::Domain(_) => LsStatus::Domain,
        Error::InvalidParameter(_) => LsStatus::InvalidParameter,
        Error::Quadrature { .. } => LsStatus::Quadrature,
        Error::Unsupported(_) => LsStatus::Unsupported,
        Error::Contract(_) => LsStatus::Contract,
        Error::Truncation { .. } => LsStatus::Truncation,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            LsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            LsStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Copy the calling thread's last error message into `buf` (at most `len`
/// bytes including the terminating NUL). Returns the full message length
/// plus one, so a return value above `len` means truncation.
#[no_mangle]
pub unsafe extern "C" fn ls_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let k = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, k);
            *buf.add(k) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Density of `Laplace(a, b)` at `x`.
#[no_mangle]
pub unsafe extern "C" fn ls_laplace_pdf(a: f64, b: f64, x: f64, result: *mut f64) -> LsStatus {
    guard(|| {
        *out(result, "result")? = LaplaceParams::new(a, b)?.pdf(x)?;
        Ok(())
    })
}

/// Distribution function of `Laplace(a, b)` at `x`.
#[no_mangle]
pub unsafe extern "C" fn ls_laplace_cdf(a: f64, b: f64, x: f64, result: *mut f64) -> LsStatus {
    guard(|| {
        *out(result, "result")? = LaplaceParams::new(a, b)?.cdf(x)?;
        Ok(())
    })
}

/// Quantile of `Laplace(a, b)` at level `q ∈ (0, 1)`.
#[no_mangle]
pub unsafe extern "C" fn ls_laplace_quantile(a: f64, b: f64, q: f64, result: *mut f64) -> LsStatus {
    guard(|| {
        *out(result, "result")? = LaplaceParams::new(a, b)?.quantile(q)?;
        Ok(())
    })
}

/// Solve the Stein equation for a built-in test function at scale `b`.
/// Unused parameters are ignored.
#[no_mangle]
pub unsafe extern "C" fn ls_stein_solution_new(
    kind: LsTestFunction,
    param1: f64,
    param2: f64,
    b: f64,
    handle: *mut *mut LsSteinSolution,
) -> LsStatus {
    guard(|| {
        let slot = out(handle, "handle")?;
        let h = match kind {
            LsTestFunction::Sine => TestFunction::sine(),
            LsTestFunction::Cosine => TestFunction::cosine(),
            LsTestFunction::Tanh => TestFunction::tanh(),
            LsTestFunction::ClampUnit => TestFunction::clamp_unit(),
            LsTestFunction::ShiftedClamp => TestFunction::shifted_clamp(param1),
            LsTestFunction::SmoothedIndicator => TestFunction::smoothed_indicator(param1, param2)?,
        };
        *slot = Box::into_raw(Box::new(LsSteinSolution(solve(&h, b)?)));
        Ok(())
    })
}

/// Evaluate a solution and its first three derivatives at `x`.
#[no_mangle]
pub unsafe extern "C" fn ls_stein_solution_eval(
    handle: *const LsSteinSolution,
    x: f64,
    values: *mut LsSteinValues,
) -> LsStatus {
    guard(|| {
        let sol = handle.as_ref().ok_or(Failure::Null("handle"))?;
        let v = sol.0.evaluate(x)?;
        *out(values, "values")? = LsSteinValues { g: v.g, g1: v.g1, g2: v.g2, g3: v.g3 };
        Ok(())
    })
}

/// Release a solution; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ls_stein_solution_free(handle: *mut LsSteinSolution) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Create a summand law with magnitude `c`.
#[no_mangle]
pub unsafe extern "C" fn ls_source_new(kind: LsSourceKind, c: f64, handle: *mut *mut LsSource) -> LsStatus {
    guard(|| {
        let slot = out(handle, "handle")?;
        let s = match kind {
            LsSourceKind::Rademacher => SourceDistribution::rademacher(c)?,
            LsSourceKind::Uniform => SourceDistribution::uniform(c)?,
            LsSourceKind::Laplace => SourceDistribution::laplace(c)?,
            LsSourceKind::Skewed => SourceDistribution::skewed_atoms(c)?,
        };
        *slot = Box::into_raw(Box::new(LsSource(s)));
        Ok(())
    })
}

/// `E X²` of a source.
#[no_mangle]
pub unsafe extern "C" fn ls_source_variance(handle: *const LsSource, result: *mut f64) -> LsStatus {
    guard(|| {
        let s = handle.as_ref().ok_or(Failure::Null("handle"))?;
        *out(result, "result")? = s.0.sigma2();
        Ok(())
    })
}

/// Release a source; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ls_source_free(handle: *mut LsSource) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Fill `buf[0..n]` with sorted draws of `√p (X_1 + … + X_N)`, `N`
/// geometric with parameter `p`.
#[no_mangle]
pub unsafe extern "C" fn ls_geometric_sum_sample(
    source: *const LsSource,
    p: f64,
    seed: u64,
    buf: *mut f64,
    n: usize,
) -> LsStatus {
    guard(|| {
        let s = source.as_ref().ok_or(Failure::Null("source"))?;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        let spec = RandomSumSpec::geometric(p, s.0.clone())?;
        let sample = random_sum_sample(&spec, n, seed)?;
        std::slice::from_raw_parts_mut(buf, n).copy_from_slice(sample.values());
        Ok(())
    })
}

/// Kolmogorov distance between `values[0..n]` and `Laplace(a, b)`.
#[no_mangle]
pub unsafe extern "C" fn ls_kolmogorov_empirical(
    values: *const f64,
    n: usize,
    a: f64,
    b: f64,
    result: *mut f64,
) -> LsStatus {
    guard(|| {
        let target = LaplaceParams::new(a, b)?;
        let s = EmpiricalSample::new(slice(values, n, "values")?.to_vec())?;
        *out(result, "result")? = kolmogorov_empirical(&s, &target).value;
        Ok(())
    })
}

/// Wasserstein distance between `values[0..n]` and `Laplace(a, b)`.
#[no_mangle]
pub unsafe extern "C" fn ls_wasserstein_empirical(
    values: *const f64,
    n: usize,
    a: f64,
    b: f64,
    result: *mut f64,
) -> LsStatus {
    guard(|| {
        let target = LaplaceParams::new(a, b)?;
        let s = EmpiricalSample::new(slice(values, n, "values")?.to_vec())?;
        *out(result, "result")? = wasserstein_empirical(&s, &target).value;
        Ok(())
    })
}

/// Kolmogorov bound from a bounded-Lipschitz distance `d_bl` against a
/// law with density bounded by `density_sup`.
#[no_mangle]
pub unsafe extern "C" fn ls_kolmogorov_from_bl(d_bl: f64, density_sup: f64, result: *mut f64) -> LsStatus {
    guard(|| {
        *out(result, "result")? = kolmogorov_from_bl(d_bl, density_sup)?;
        Ok(())
    })
}

/// Bounded-Lipschitz bound for a geometric sum; `capped` is `min(value, 2)`.
/// Either out-pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn ls_theorem7_bound(p: f64, b: f64, rho: f64, value: *mut f64, capped: *mut f64) -> LsStatus {
    guard(|| {
        let r = theorem7_bound(p, b, rho)?;
        if let Some(v) = value.as_mut() {
            *v = r.value;
        }
        if let Some(c) = capped.as_mut() {
            *c = r.capped;
        }
        Ok(())
    })
}
