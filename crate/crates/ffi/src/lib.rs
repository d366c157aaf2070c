//! C ABI for the linmed toolkit.
//!
//! Every function returns a `LINMED_*` status code and writes results
//! through out-pointers. On failure, `linmed_last_error` returns a message
//! describing the most recent error on the calling thread. Handles are
//! created by `*_new` functions and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use linmed::envs::Instance;
use linmed::harness::{build_policy, PolicySpec};
use linmed::ope::{ipw_estimate, LogRecord};
use linmed::{approx_design, ArmVector, ConfidenceParams, Error, GramState, Policy, SimRng};
use rand::SeedableRng;

pub const LINMED_OK: i32 = 0;
pub const LINMED_ERR_INVALID_ARGUMENT: i32 = 1;
pub const LINMED_ERR_INTERNAL: i32 = 2;
pub const LINMED_ERR_PARSE: i32 = 3;
pub const LINMED_ERR_SCHEMA: i32 = 4;
pub const LINMED_ERR_ESTIMATOR_UNDEFINED: i32 = 5;
pub const LINMED_ERR_UNSUPPORTED: i32 = 6;
pub const LINMED_ERR_CONFIG: i32 = 7;
pub const LINMED_ERR_IO: i32 = 8;
pub const LINMED_ERR_NULL_POINTER: i32 = 9;
pub const LINMED_ERR_PANIC: i32 = 10;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => LINMED_ERR_INVALID_ARGUMENT,
        Error::Internal { .. } => LINMED_ERR_INTERNAL,
        Error::Parse { .. } => LINMED_ERR_PARSE,
        Error::Schema { .. } => LINMED_ERR_SCHEMA,
        Error::EstimatorUndefined { .. } => LINMED_ERR_ESTIMATOR_UNDEFINED,
        Error::Unsupported(_) => LINMED_ERR_UNSUPPORTED,
        Error::Config(_) => LINMED_ERR_CONFIG,
        Error::File { .. } | Error::Io(_) | Error::Csv(_) => LINMED_ERR_IO,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult = Result<(), Failure>;

fn guard(body: impl FnOnce() -> FfiResult) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LINMED_OK,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            LINMED_ERR_NULL_POINTER
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            code_of(&e)
        }
        Err(_) => {
            set_last_error("panic inside linmed".into());
            LINMED_ERR_PANIC
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: the caller guarantees `data` points to `len` readable elements.
    Ok(unsafe { std::slice::from_raw_parts(data, len) })
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: the caller guarantees `data` points to `len` writable elements.
    Ok(unsafe { std::slice::from_raw_parts_mut(data, len) })
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: non-null out-pointers must be valid for writes.
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

unsafe fn arm(coords: *const f64, dim: usize) -> Result<ArmVector, Failure> {
    Ok(ArmVector::new(unsafe { slice(coords, dim, "arm") }?.to_vec())?)
}

/// Reads a row-major `k × dim` matrix of arms.
unsafe fn arm_rows(data: *const f64, k: usize, dim: usize) -> Result<Vec<ArmVector>, Failure> {
    let flat = unsafe { slice(data, k * dim, "arms") }?;
    if k == 0 || dim == 0 {
        return Err(Error::InvalidArgument("arm matrix must be nonempty".into()).into());
    }
    Ok(flat
        .chunks(dim)
        .map(|row| ArmVector::new(row.to_vec()))
        .collect::<Result<_, _>>()?)
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn linmed_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn linmed_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Online ridge-regression state.
pub struct LinmedGram {
    inner: GramState,
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn linmed_gram_new(dim: usize, lambda: f64, out_gram: *mut *mut LinmedGram) -> i32 {
    guard(|| {
        let slot = unsafe { out(out_gram, "out_gram") }?;
        let inner = GramState::new(dim, lambda)?;
        *slot = Box::into_raw(Box::new(LinmedGram { inner }));
        Ok(())
    })
}

/// # Safety
/// `gram` must be NULL or a handle from `linmed_gram_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn linmed_gram_free(gram: *mut LinmedGram) {
    if !gram.is_null() {
        drop(unsafe { Box::from_raw(gram) });
    }
}

/// # Safety
/// `gram` must be a live handle and `arm` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn linmed_gram_update(
    gram: *mut LinmedGram,
    arm_coords: *const f64,
    dim: usize,
    reward: f64,
) -> i32 {
    guard(|| {
        let g = unsafe { out(gram, "gram") }?;
        let a = unsafe { arm(arm_coords, dim) }?;
        g.inner.update(&a, reward)?;
        Ok(())
    })
}

/// Writes `‖a‖²_{V⁻¹}`.
///
/// # Safety
/// `gram` must be a live handle, `arm` must point to `dim` doubles and
/// `out_leverage` must be writable.
#[no_mangle]
pub unsafe extern "C" fn linmed_gram_leverage(
    gram: *const LinmedGram,
    arm_coords: *const f64,
    dim: usize,
    out_leverage: *mut f64,
) -> i32 {
    guard(|| {
        let g = unsafe { gram.as_ref() }.ok_or(Failure::Null("gram"))?;
        let a = unsafe { arm(arm_coords, dim) }?;
        *unsafe { out(out_leverage, "out_leverage") }? = g.inner.leverage(&a)?;
        Ok(())
    })
}

/// Copies `θ̂` into `out_theta`, which must hold `dim` doubles.
///
/// # Safety
/// `gram` must be a live handle and `out_theta` must point to `dim`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn linmed_gram_theta_hat(gram: *const LinmedGram, out_theta: *mut f64, dim: usize) -> i32 {
    guard(|| {
        let g = unsafe { gram.as_ref() }.ok_or(Failure::Null("gram"))?;
        if dim != g.inner.dim() {
            return Err(Error::InvalidArgument(format!(
                "buffer holds {dim} values, state has dimension {}",
                g.inner.dim()
            ))
            .into());
        }
        unsafe { slice_mut(out_theta, dim, "out_theta") }?.copy_from_slice(g.inner.theta_hat().as_slice());
        Ok(())
    })
}

/// Writes `log det V − log det λI` and the number of absorbed rounds.
///
/// # Safety
/// `gram` must be a live handle; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn linmed_gram_log_det_ratio(
    gram: *const LinmedGram,
    out_log_det_ratio: *mut f64,
    out_rounds: *mut u64,
) -> i32 {
    guard(|| {
        let g = unsafe { gram.as_ref() }.ok_or(Failure::Null("gram"))?;
        *unsafe { out(out_log_det_ratio, "out_log_det_ratio") }? = g.inner.log_det_ratio();
        *unsafe { out(out_rounds, "out_rounds") }? = g.inner.rounds();
        Ok(())
    })
}

/// Writes the confidence radius `β` for guesses `sigma` and `s` under the
/// default `δ_t = 1/(t+1)` schedule.
///
/// # Safety
/// `gram` must be a live handle and `out_beta` writable.
#[no_mangle]
pub unsafe extern "C" fn linmed_gram_beta(gram: *const LinmedGram, sigma: f64, s: f64, out_beta: *mut f64) -> i32 {
    guard(|| {
        let g = unsafe { gram.as_ref() }.ok_or(Failure::Null("gram"))?;
        let conf = ConfidenceParams::new(sigma, s)?;
        *unsafe { out(out_beta, "out_beta") }? = g.inner.beta(&conf)?;
        Ok(())
    })
}

/// Approximate G-optimal design over `k` arms given row-major in `arms`.
/// Writes one weight per arm into `out_weights`, the certificate
/// `g(π) = max_a ‖a‖²_{M(π)⁻¹}` into `out_max_leverage` and the support
/// budget into `out_tau`.
///
/// # Safety
/// `arms` must point to `k·dim` doubles, `out_weights` to `k` writable
/// doubles; the scalar out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn linmed_approx_design(
    arms: *const f64,
    k: usize,
    dim: usize,
    out_weights: *mut f64,
    out_max_leverage: *mut f64,
    out_tau: *mut usize,
) -> i32 {
    guard(|| {
        let set = unsafe { arm_rows(arms, k, dim) }?;
        let (design, report) = approx_design(&set)?;
        unsafe { slice_mut(out_weights, k, "out_weights") }?.copy_from_slice(&design.to_dense(k));
        *unsafe { out(out_max_leverage, "out_max_leverage") }? = report.max_leverage;
        *unsafe { out(out_tau, "out_tau") }? = report.tau;
        Ok(())
    })
}

/// A bandit policy with its own random stream.
pub struct LinmedPolicy {
    dim: usize,
    policy: Box<dyn Policy>,
    rng: SimRng,
}

/// Creates a policy by name (`LinMED-99`, `LinMED-90`, `LinMED-50`,
/// `LinMEDNOPT`, `OFUL`, `LinTS-Freq`, `LinTS-Bayes`, `EXP2`) with noise guess
/// `sigma`, norm guess `s`, regularizer `lambda` and EXP2 horizon `horizon`.
/// A positive `mc_samples` makes Thompson sampling estimate propensities.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out_policy` writable.
#[no_mangle]
pub unsafe extern "C" fn linmed_policy_new(
    name: *const c_char,
    dim: usize,
    sigma: f64,
    s: f64,
    lambda: f64,
    horizon: usize,
    mc_samples: usize,
    seed: u64,
    out_policy: *mut *mut LinmedPolicy,
) -> i32 {
    guard(|| {
        let slot = unsafe { out(out_policy, "out_policy") }?;
        if name.is_null() {
            return Err(Failure::Null("name"));
        }
        let name = unsafe { CStr::from_ptr(name) }
            .to_str()
            .map_err(|_| Error::InvalidArgument("policy name is not UTF-8".into()))?;
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()).into());
        }
        let spec = PolicySpec {
            sigma: Some(sigma),
            s: Some(s),
            lambda: Some(lambda),
            mc_samples: (mc_samples > 0).then_some(mc_samples),
            ..PolicySpec::named(name)
        };
        // Only the dimension of the instance matters when every guess is given.
        let shape = Instance::new(
            "ffi",
            vec![0.0; dim],
            0.0,
            linmed::envs::ArmSource::Fixed(vec![ArmVector::zeros(dim)]),
        )?;
        let policy = build_policy(&spec, &shape, horizon.max(1), false)?;
        *slot = Box::into_raw(Box::new(LinmedPolicy {
            dim,
            policy,
            rng: SimRng::seed_from_u64(seed),
        }));
        Ok(())
    })
}

/// # Safety
/// `policy` must be NULL or a handle from `linmed_policy_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn linmed_policy_free(policy: *mut LinmedPolicy) {
    if !policy.is_null() {
        drop(unsafe { Box::from_raw(policy) });
    }
}

/// Chooses among `k` row-major arms. Writes the chosen index and its
/// propensity; the propensity is NaN when the policy cannot report one.
///
/// # Safety
/// `policy` must be a live handle, `arms` must point to `k·dim` doubles and
/// the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn linmed_policy_decide(
    policy: *mut LinmedPolicy,
    arms: *const f64,
    k: usize,
    dim: usize,
    out_index: *mut usize,
    out_propensity: *mut f64,
) -> i32 {
    guard(|| {
        let p = unsafe { out(policy, "policy") }?;
        if dim != p.dim {
            return Err(Error::InvalidArgument(format!("arms have dimension {dim}, policy expects {}", p.dim)).into());
        }
        let set = unsafe { arm_rows(arms, k, dim) }?;
        let decision = p.policy.decide(&set, &mut p.rng)?;
        *unsafe { out(out_index, "out_index") }? = decision.arm_index;
        *unsafe { out(out_propensity, "out_propensity") }? = decision.propensity.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Feeds back the reward of a played arm.
///
/// # Safety
/// `policy` must be a live handle and `arm` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn linmed_policy_observe(
    policy: *mut LinmedPolicy,
    arm_coords: *const f64,
    dim: usize,
    reward: f64,
) -> i32 {
    guard(|| {
        let p = unsafe { out(policy, "policy") }?;
        let a = unsafe { arm(arm_coords, dim) }?;
        p.policy.observe(&a, reward)?;
        Ok(())
    })
}

/// IPW estimate `(1/n)·Σ target[i]/propensity[i]·reward[i]`, where
/// `target[i]` is the target policy's probability of the logged arm.
///
/// # Safety
/// The three input arrays must each hold `n` doubles and `out_estimate`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn linmed_ipw_estimate(
    propensities: *const f64,
    rewards: *const f64,
    target_probs: *const f64,
    n: usize,
    out_estimate: *mut f64,
) -> i32 {
    guard(|| {
        let props = unsafe { slice(propensities, n, "propensities") }?;
        let rewards = unsafe { slice(rewards, n, "rewards") }?;
        let target = unsafe { slice(target_probs, n, "target_probs") }?;
        let log: Vec<LogRecord> = props
            .iter()
            .zip(rewards)
            .enumerate()
            .map(|(i, (&propensity, &reward))| LogRecord {
                round: i + 1,
                arm_index: i,
                propensity,
                reward,
                mc_samples: None,
            })
            .collect();
        let result = ipw_estimate(&log, |_, i| target[i])?;
        *unsafe { out(out_estimate, "out_estimate") }? = result.estimate;
        Ok(())
    })
}
