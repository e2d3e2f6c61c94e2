//! C interface to `spinfiber`.
//!
//! Every fallible function returns an [`SfStatus`]; on failure a message is
//! stored per thread and can be copied out with [`sf_last_error`]. Handles
//! are opaque and must be released with their `_free` function.
//!
//! Phase points are passed as 14 doubles in the order
//! `x1 x2 x3 p1 p2 p3 omega1 omega2 omega3 pi1 pi2 pi3 phi pi_phi`.
//! Four-vectors are 4 doubles `(t, x, y, z)` with metric `diag(-1, 1, 1, 1)`.

#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use nalgebra::{Matrix3, Vector3};

use spinfiber::cli::{self, CliError, ScenarioConfig};
use spinfiber::constraints::{ConstraintSet, DiracBracket};
use spinfiber::dynamics::{
    eom, integrate, FieldConfig, GaugeFunction, IntegrateOptions, ModelParams, PotentialSign,
    Trajectory,
};
use spinfiber::lorentz::{self, FourVector};
use spinfiber::phasespace::{poisson_bracket, CanonicalStructure, Observable, PhasePoint, DIM};
use spinfiber::Error;

/// Number of doubles in a phase point.
pub const SF_STATE_DIM: usize = 14;

const _: () = assert!(SF_STATE_DIM == DIM);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonFinite = 3,
    OffSurface = 4,
    Degenerate = 5,
    SingularGauge = 6,
    Superluminal = 7,
    IntegrationFailed = 8,
    ConfigError = 9,
    IoError = 10,
    RuntimeError = 11,
    ChecksFailed = 12,
    Panic = 13,
}

/// Integration sign convention of the spin potential.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfConvention {
    Hamiltonian = 0,
    Reversed = 1,
}

/// Physical parameters, field, gauge function and solver settings.
pub struct SfModel {
    params: ModelParams,
    field: FieldConfig,
    gauge: GaugeFunction,
    options: IntegrateOptions,
}

/// A computed trajectory.
pub struct SfTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> SfStatus {
    match err {
        Error::NonFinite { .. } => SfStatus::NonFinite,
        Error::OffSurface { .. } | Error::ProjectionFailed { .. } => SfStatus::OffSurface,
        Error::DegenerateConstraints { .. } | Error::Singular(_) => SfStatus::Degenerate,
        Error::SingularGauge { .. } => SfStatus::SingularGauge,
        Error::Superluminal(_) | Error::NotTimelike(_) => SfStatus::Superluminal,
        Error::StepUnderflow { .. } => SfStatus::IntegrationFailed,
        _ => SfStatus::InvalidArgument,
    }
}

struct Failure(SfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: SfStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SfStatus::Ok
        }
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
            SfStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return fail(SfStatus::NullPointer, format!("`{name}` is null"));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a>(p: *mut f64, n: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return fail(SfStatus::NullPointer, format!("`{name}` is null"));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(SfStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(SfStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(SfStatus::NullPointer, format!("`{name}` is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(SfStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

fn vec3(s: &[f64]) -> Vector3<f64> {
    Vector3::new(s[0], s[1], s[2])
}

fn four(s: &[f64]) -> FourVector {
    FourVector::new(s[0], s[1], s[2], s[3])
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// including the terminator; pass `buf = NULL` to query it.
#[no_mangle]
pub unsafe extern "C" fn sf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Static NUL-terminated library version.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a model with `b` chosen so that `S² = 3ħ²/4`, zero field,
/// constant gauge `φ = 1` and default solver settings.
#[no_mangle]
pub unsafe extern "C" fn sf_model_new(
    m: f64,
    e: f64,
    mu: f64,
    c: f64,
    a: f64,
    hbar: f64,
    out: *mut *mut SfModel,
) -> SfStatus {
    guard(|| {
        if out.is_null() {
            return fail(SfStatus::NullPointer, "`out` is null");
        }
        let params = ModelParams::with_hbar(m, e, mu, c, a, hbar);
        params.validate()?;
        *out = Box::into_raw(Box::new(SfModel {
            params,
            field: FieldConfig::zero(),
            gauge: GaugeFunction::constant(1.0),
            options: IntegrateOptions::default(),
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_model_free(model: *mut SfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Overrides the radius `b` of the `π` sphere.
#[no_mangle]
pub unsafe extern "C" fn sf_model_set_b(model: *mut SfModel, b: f64) -> SfStatus {
    guard(|| {
        let model = handle_mut(model, "model")?;
        let mut params = model.params;
        params.b = b;
        params.validate()?;
        model.params = params;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_model_set_convention(
    model: *mut SfModel,
    convention: SfConvention,
) -> SfStatus {
    guard(|| {
        handle_mut(model, "model")?.params.convention = match convention {
            SfConvention::Hamiltonian => PotentialSign::Hamiltonian,
            SfConvention::Reversed => PotentialSign::Reversed,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_model_set_uniform_field(
    model: *mut SfModel,
    b: *const f64,
) -> SfStatus {
    guard(|| {
        let model = handle_mut(model, "model")?;
        model.field = FieldConfig::uniform(vec3(input(b, 3, "b")?));
        Ok(())
    })
}

/// `B(x) = b0 + G x` with `G` given row-major; `G` must be traceless.
#[no_mangle]
pub unsafe extern "C" fn sf_model_set_linear_gradient_field(
    model: *mut SfModel,
    b0: *const f64,
    gradient: *const f64,
) -> SfStatus {
    guard(|| {
        let model = handle_mut(model, "model")?;
        let g = Matrix3::from_row_slice(input(gradient, 9, "gradient")?);
        model.field = FieldConfig::linear_gradient(vec3(input(b0, 3, "b0")?), g)?;
        Ok(())
    })
}

/// Gauge function `φ(t)` from an expression in `t`, e.g. `"1 + 0.5*sin(t)"`.
#[no_mangle]
pub unsafe extern "C" fn sf_model_set_gauge(model: *mut SfModel, expr: *const c_char) -> SfStatus {
    guard(|| {
        let model = handle_mut(model, "model")?;
        let src = string(expr, "expr")?;
        model.gauge = GaugeFunction::from_expr(src)
            .or_else(|e| fail(SfStatus::InvalidArgument, format!("gauge `{src}`: {e}")))?;
        Ok(())
    })
}

/// Tolerances and projection period (0 disables projection); `max_step <= 0`
/// means unbounded.
#[no_mangle]
pub unsafe extern "C" fn sf_model_set_solver(
    model: *mut SfModel,
    rel_tol: f64,
    abs_tol: f64,
    project_every: usize,
    max_step: f64,
) -> SfStatus {
    guard(|| {
        let model = handle_mut(model, "model")?;
        if !(rel_tol > 0.0) || !(abs_tol > 0.0) {
            return fail(SfStatus::InvalidArgument, "tolerances must be positive");
        }
        model.options.rel_tol = rel_tol;
        model.options.abs_tol = abs_tol;
        model.options.project_every = project_every;
        model.options.max_step = (max_step > 0.0).then_some(max_step);
        Ok(())
    })
}

/// Time derivative of the phase point `z` at time `t`.
#[no_mangle]
pub unsafe extern "C" fn sf_model_eom(
    model: *const SfModel,
    z: *const f64,
    t: f64,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let z = PhasePoint::from_coords(input(z, DIM, "z")?);
        let d = eom(&z, t, &model.params, &model.field, &model.gauge)?;
        output(out, DIM, "out")?.copy_from_slice(&d.to_coords());
        Ok(())
    })
}

/// Integrates from `z0` over `[t0, t1]`.
#[no_mangle]
pub unsafe extern "C" fn sf_integrate(
    model: *const SfModel,
    z0: *const f64,
    t0: f64,
    t1: f64,
    out: *mut *mut SfTrajectory,
) -> SfStatus {
    guard(|| {
        let model = handle(model, "model")?;
        if out.is_null() {
            return fail(SfStatus::NullPointer, "`out` is null");
        }
        let z = PhasePoint::from_coords(input(z0, DIM, "z0")?);
        let inner = integrate(
            &z,
            (t0, t1),
            &model.params,
            &model.field,
            &model.gauge,
            &model.options,
        )?;
        *out = Box::into_raw(Box::new(SfTrajectory { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_free(traj: *mut SfTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_len(traj: *const SfTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// Time, phase point and spin `S = ω × π` of sample `index`. Any of the
/// output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_sample(
    traj: *const SfTrajectory,
    index: usize,
    t: *mut f64,
    z: *mut f64,
    spin: *mut f64,
) -> SfStatus {
    guard(|| {
        let traj = &handle(traj, "traj")?.inner;
        if index >= traj.len() {
            return fail(
                SfStatus::InvalidArgument,
                format!("index {index} out of range (len {})", traj.len()),
            );
        }
        if !t.is_null() {
            *t = traj.times[index];
        }
        if !z.is_null() {
            output(z, DIM, "z")?.copy_from_slice(&traj.states[index].to_coords());
        }
        if !spin.is_null() {
            output(spin, 3, "spin")?.copy_from_slice(traj.diagnostics[index].spin.as_slice());
        }
        Ok(())
    })
}

/// Dense output at `t` inside the integrated interval.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_interpolate(
    traj: *const SfTrajectory,
    t: f64,
    z: *mut f64,
) -> SfStatus {
    guard(|| {
        let traj = &handle(traj, "traj")?.inner;
        let p = traj.interpolate(t)?;
        output(z, DIM, "z")?.copy_from_slice(&p.to_coords());
        Ok(())
    })
}

/// Largest constraint residual over all samples.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_max_drift(
    traj: *const SfTrajectory,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let traj = &handle(traj, "traj")?.inner;
        output(out, 1, "out")?[0] = traj.max_constraint_drift();
        Ok(())
    })
}

/// Writes the time-series table as CSV.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_write_csv(
    traj: *const SfTrajectory,
    path: *const c_char,
) -> SfStatus {
    guard(|| {
        let traj = &handle(traj, "traj")?.inner;
        let path = string(path, "path")?;
        cli::write_timeseries(traj, path.as_ref())
            .or_else(|e| fail(SfStatus::IoError, e.to_string()))
    })
}

/// Poisson bracket `{S_i, S_j}` at `z`.
#[no_mangle]
pub unsafe extern "C" fn sf_spin_poisson_bracket(
    z: *const f64,
    i: c_int,
    j: c_int,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let (i, j) = spin_indices(i, j)?;
        let z = input(z, DIM, "z")?;
        let v = poisson_bracket(
            &Observable::spin(i),
            &Observable::spin(j),
            z,
            &CanonicalStructure::pauli(),
        )?;
        output(out, 1, "out")?[0] = v;
        Ok(())
    })
}

/// Dirac bracket `{S_i, S_j}_D` with respect to `{ω² − a², ωπ}` at `z`.
#[no_mangle]
pub unsafe extern "C" fn sf_spin_dirac_bracket(
    z: *const f64,
    a: f64,
    i: c_int,
    j: c_int,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let (i, j) = spin_indices(i, j)?;
        let z = input(z, DIM, "z")?;
        let structure = CanonicalStructure::pauli();
        let d = DiracBracket::new(&ConstraintSet::pauli_second_class(a), z, &structure)?;
        output(out, 1, "out")?[0] = d.bracket(&Observable::spin(i), &Observable::spin(j))?;
        Ok(())
    })
}

fn spin_indices(i: c_int, j: c_int) -> Result<(usize, usize), Failure> {
    match (usize::try_from(i), usize::try_from(j)) {
        (Ok(i), Ok(j)) if i < 3 && j < 3 => Ok((i, j)),
        _ => fail(
            SfStatus::InvalidArgument,
            format!("spin indices ({i}, {j}) out of range"),
        ),
    }
}

/// Boost matrix for velocity `beta` (units of c), row-major 4×4.
#[no_mangle]
pub unsafe extern "C" fn sf_boost_matrix(beta: *const f64, out: *mut f64) -> SfStatus {
    guard(|| {
        let m = lorentz::boost_matrix(&vec3(input(beta, 3, "beta")?))?;
        let out = output(out, 16, "out")?;
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = m[(r, c)];
            }
        }
        Ok(())
    })
}

/// `J_{μν} J^{μν}` for `J^{μν} = 2(ω^μ π^ν − ω^ν π^μ)`.
#[no_mangle]
pub unsafe extern "C" fn sf_casimir(omega: *const f64, pi: *const f64, out: *mut f64) -> SfStatus {
    guard(|| {
        let j = lorentz::spin_tensor(&four(input(omega, 4, "omega")?), &four(input(pi, 4, "pi")?));
        output(out, 1, "out")?[0] = lorentz::casimir(&j);
        Ok(())
    })
}

/// Residuals `(π² − a3, ω² − a4, ωπ, Pω, Pπ)` of the covariant surface.
#[no_mangle]
pub unsafe extern "C" fn sf_t3_residuals(
    omega: *const f64,
    pi: *const f64,
    momentum: *const f64,
    a3: f64,
    a4: f64,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let r = lorentz::t3_constraints(
            &four(input(omega, 4, "omega")?),
            &four(input(pi, 4, "pi")?),
            &four(input(momentum, 4, "momentum")?),
            a3,
            a4,
        )?;
        output(out, 5, "out")?.copy_from_slice(&r);
        Ok(())
    })
}

/// Spin four-vector `S^μ = ε^{μναβ} P_ν ω_α π_β / m̃c`.
#[no_mangle]
pub unsafe extern "C" fn sf_bmt_vector(
    omega: *const f64,
    pi: *const f64,
    momentum: *const f64,
    out: *mut f64,
) -> SfStatus {
    guard(|| {
        let s = lorentz::bmt_vector(
            &four(input(omega, 4, "omega")?),
            &four(input(pi, 4, "pi")?),
            &four(input(momentum, 4, "momentum")?),
        )?;
        output(out, 4, "out")?.copy_from_slice(s.0.as_slice());
        Ok(())
    })
}

/// Runs a scenario file (TOML, or JSON by extension). Artifacts go to
/// `out_dir` if non-null, else to the configured directory. `passed` (may be
/// null) receives 1 if every check passed. A completed run with failing
/// checks returns `ChecksFailed`.
#[no_mangle]
pub unsafe extern "C" fn sf_run_config(
    path: *const c_char,
    out_dir: *const c_char,
    passed: *mut c_int,
) -> SfStatus {
    guard(|| {
        let path = string(path, "path")?;
        let cfg = ScenarioConfig::load(path.as_ref())
            .or_else(|e| fail(SfStatus::ConfigError, e.to_string()))?;
        let dir = if out_dir.is_null() {
            cli::output_dir(&cfg)
        } else {
            PathBuf::from(string(out_dir, "out_dir")?)
        };
        let report = cli::run_config(&cfg, &dir).map_err(|e| match e {
            CliError::Config(c) => Failure(SfStatus::ConfigError, c.to_string()),
            CliError::Runtime(m) => Failure(SfStatus::RuntimeError, m),
        })?;
        if !passed.is_null() {
            *passed = c_int::from(report.summary.passed);
        }
        if report.summary.passed {
            Ok(())
        } else {
            let failed: Vec<_> = report
                .summary
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.as_str())
                .collect();
            fail(
                SfStatus::ChecksFailed,
                format!("failed checks: {}", failed.join(", ")),
            )
        }
    })
}
