//! Equations of motion of the non-relativistic spinning particle in a
//! stationary magnetic field.
//!
//! The spin sector carries the multiplier `λ₁`, which is never hard-coded:
//! it is solved at every evaluation from the consistency condition
//! `d(ωπ)/dt = 0`. The auxiliary variable `φ` is prescribed by a
//! [`GaugeFunction`] rather than evolved freely.

mod analysis;
mod integrator;

pub use analysis::{
    cyclotron_frequency, cyclotron_radius, fit_cosine, fit_rotation, guiding_center,
    larmor_frequency, phase_rate, CosineFit, RotationFit,
};
pub use integrator::{integrate, IntegrateOptions, SampleDiagnostics, StepStats, Trajectory};

use std::fmt;
use std::sync::Arc;

use log::warn;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::phasespace::PhasePoint;

/// `|φ(t)|` must stay above this on the integration interval.
pub const GAUGE_MIN: f64 = 1e-6;

/// Sign convention for the `(2/φ) ω` term of `π̇`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialSign {
    /// `π̇ = −∂H/∂ω`, i.e. `−(2/φ) ω`.
    #[default]
    Hamiltonian,
    /// `π̇ = +(2/φ) ω`.
    Reversed,
}

impl PotentialSign {
    fn factor(self) -> f64 {
        match self {
            Self::Hamiltonian => -1.0,
            Self::Reversed => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub m: f64,
    pub e: f64,
    pub mu: f64,
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub hbar: f64,
    #[serde(default)]
    pub convention: PotentialSign,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::with_hbar(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    }
}

impl ModelParams {
    /// Parameters with `b² = 3ħ²/4a²`, so that `S² = 3ħ²/4` on the surface.
    pub fn with_hbar(m: f64, e: f64, mu: f64, c: f64, a: f64, hbar: f64) -> Self {
        Self {
            m,
            e,
            mu,
            c,
            a,
            b: Self::spin_half_b(a, hbar),
            hbar,
            convention: PotentialSign::default(),
        }
    }

    pub fn spin_half_b(a: f64, hbar: f64) -> f64 {
        0.75f64.sqrt() * hbar / a
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("c", self.c), ("a", self.a), ("b", self.b)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [("e", self.e), ("mu", self.mu), ("hbar", self.hbar)] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// `μe/(mc)`.
    pub fn spin_coupling(&self) -> f64 {
        self.mu * self.e / (self.m * self.c)
    }

    /// `e/c`.
    pub fn charge_coupling(&self) -> f64 {
        self.e / self.c
    }

    pub fn spin_surface(&self) -> ConstraintSet {
        ConstraintSet::so3_surface(self.a, self.b)
    }
}

type VecFn = dyn Fn(&Vector3<f64>) -> Vector3<f64> + Send + Sync;
type MatFn = dyn Fn(&Vector3<f64>) -> Matrix3<f64> + Send + Sync;

/// User-supplied field; matrices use the `(i, j) = ∂_i F_j` convention.
#[derive(Clone)]
pub struct CustomField {
    pub b: Arc<VecFn>,
    pub a: Arc<VecFn>,
    pub grad_a: Arc<MatFn>,
    pub grad_b: Arc<MatFn>,
}

/// A stationary magnetic field with its vector potential.
#[derive(Clone)]
pub enum FieldConfig {
    /// Constant `B`, symmetric gauge `A = ½ B × x`.
    Uniform {
        b: Vector3<f64>,
    },
    /// `B = B₀ + G x` with `tr G = 0`, Poincaré gauge `A = (B₀/2 + G x/3) × x`.
    LinearGradient {
        b0: Vector3<f64>,
        gradient: Matrix3<f64>,
    },
    Custom(CustomField),
}

impl fmt::Debug for FieldConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { b } => f.debug_struct("Uniform").field("b", b).finish(),
            Self::LinearGradient { b0, gradient } => f
                .debug_struct("LinearGradient")
                .field("b0", b0)
                .field("gradient", gradient)
                .finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

fn eps3(i: usize, j: usize, k: usize) -> f64 {
    if i == j || j == k || i == k {
        0.0
    } else if (i + 1) % 3 == j {
        1.0
    } else {
        -1.0
    }
}

impl FieldConfig {
    pub fn zero() -> Self {
        Self::Uniform {
            b: Vector3::zeros(),
        }
    }

    pub fn uniform(b: Vector3<f64>) -> Self {
        Self::Uniform { b }
    }

    /// Fails unless `tr G = 0` (divergence-free).
    pub fn linear_gradient(b0: Vector3<f64>, gradient: Matrix3<f64>) -> Result<Self> {
        let scale = gradient.amax().max(1.0);
        if gradient.trace().abs() > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "field gradient must be traceless (div B = 0), trace = {}",
                gradient.trace()
            )));
        }
        Ok(Self::LinearGradient { b0, gradient })
    }

    fn linear_parts(&self) -> Option<(Vector3<f64>, Matrix3<f64>)> {
        match self {
            Self::Uniform { b } => Some((*b, Matrix3::zeros())),
            Self::LinearGradient { b0, gradient } => Some((*b0, *gradient)),
            Self::Custom(_) => None,
        }
    }

    pub fn b(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match self.linear_parts() {
            Some((b0, g)) => b0 + g * x,
            None => match self {
                Self::Custom(c) => (c.b)(x),
                _ => unreachable!(),
            },
        }
    }

    pub fn a(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match self.linear_parts() {
            Some((b0, g)) => (b0 * 0.5 + g * x / 3.0).cross(x),
            None => match self {
                Self::Custom(c) => (c.a)(x),
                _ => unreachable!(),
            },
        }
    }

    /// `(i, j) = ∂_i A_j`.
    pub fn grad_a(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        match self.linear_parts() {
            Some((b0, g)) => {
                // A_j = ε_jkl c_k x_l with c = B₀/2 + G x/3
                let c = b0 * 0.5 + g * x / 3.0;
                Matrix3::from_fn(|i, j| {
                    let mut acc = 0.0;
                    for k in 0..3 {
                        acc += eps3(j, k, i) * c[k];
                        for l in 0..3 {
                            acc += eps3(j, k, l) * g[(k, i)] / 3.0 * x[l];
                        }
                    }
                    acc
                })
            }
            None => match self {
                Self::Custom(c) => (c.grad_a)(x),
                _ => unreachable!(),
            },
        }
    }

    /// `(i, j) = ∂_i B_j`.
    pub fn grad_b(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        match self.linear_parts() {
            Some((_, g)) => g.transpose(),
            None => match self {
                Self::Custom(c) => (c.grad_b)(x),
                _ => unreachable!(),
            },
        }
    }

    /// `∇ × A` by central differences.
    pub fn curl_a_numeric(&self, x: &Vector3<f64>, h: f64) -> Vector3<f64> {
        let mut d = Matrix3::zeros(); // (i, j) = ∂_i A_j
        for i in 0..3 {
            let mut up = *x;
            let mut down = *x;
            up[i] += h;
            down[i] -= h;
            let col = (self.a(&up) - self.a(&down)) / (2.0 * h);
            for j in 0..3 {
                d[(i, j)] = col[j];
            }
        }
        Vector3::new(
            d[(1, 2)] - d[(2, 1)],
            d[(2, 0)] - d[(0, 2)],
            d[(0, 1)] - d[(1, 0)],
        )
    }

    /// Checks `∇ × A = B` at the given points.
    pub fn check_curl(&self, points: &[Vector3<f64>], tol: f64) -> Result<()> {
        for x in points {
            let diff = (self.curl_a_numeric(x, 1e-5) - self.b(x)).amax();
            if diff > tol {
                return Err(Error::InvalidArgument(format!(
                    "curl A differs from B by {diff:.3e} at {x:?}"
                )));
            }
        }
        Ok(())
    }
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Prescribed `φ(t)` and its derivative `λ_φ = φ̇`.
#[derive(Clone)]
pub struct GaugeFunction {
    phi: Arc<ScalarFn>,
    phi_dot: Arc<ScalarFn>,
    description: String,
}

impl fmt::Debug for GaugeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GaugeFunction({})", self.description)
    }
}

impl GaugeFunction {
    pub fn constant(value: f64) -> Self {
        Self {
            phi: Arc::new(move |_| value),
            phi_dot: Arc::new(|_| 0.0),
            description: format!("{value}"),
        }
    }

    pub fn from_fns<F, G>(phi: F, phi_dot: G, description: impl Into<String>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            phi: Arc::new(phi),
            phi_dot: Arc::new(phi_dot),
            description: description.into(),
        }
    }

    /// Parses an expression in `t`; the derivative is taken symbolically.
    pub fn from_expr(src: &str) -> std::result::Result<Self, crate::expr::ParseError> {
        let e = Expr::parse(src)?;
        let d = e.derivative();
        Ok(Self {
            description: src.trim().to_string(),
            phi: Arc::new(move |t| e.eval(t)),
            phi_dot: Arc::new(move |t| d.eval(t)),
        })
    }

    pub fn phi(&self, t: f64) -> f64 {
        (self.phi)(t)
    }

    pub fn phi_dot(&self, t: f64) -> f64 {
        (self.phi_dot)(t)
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Scans `samples + 1` grid points of `[t0, t1]` for `|φ| ≤ GAUGE_MIN`
    /// or a sign change between neighbours.
    pub fn check_nonvanishing(&self, t0: f64, t1: f64, samples: usize) -> Result<()> {
        let n = samples.max(1);
        let mut prev: Option<f64> = None;
        for i in 0..=n {
            let t = t0 + (t1 - t0) * i as f64 / n as f64;
            let phi = self.phi(t);
            let flipped = prev.is_some_and(|p| p.signum() != phi.signum());
            if !(phi.abs() > GAUGE_MIN) || flipped {
                return Err(Error::SingularGauge { t, phi });
            }
            prev = Some(phi);
        }
        Ok(())
    }
}

fn gauge_value(gauge: &GaugeFunction, t: f64) -> Result<f64> {
    let phi = gauge.phi(t);
    if !(phi.abs() > GAUGE_MIN) {
        return Err(Error::SingularGauge { t, phi });
    }
    Ok(phi)
}

/// Spin-sector rates for a given `λ₁`.
fn spin_rates(
    omega: &Vector3<f64>,
    pi: &Vector3<f64>,
    b: &Vector3<f64>,
    params: &ModelParams,
    phi: f64,
    lambda1: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let k = params.spin_coupling();
    let s = params.convention.factor();
    let omega_dot = pi * lambda1 + omega.cross(b) * k;
    let pi_dot = omega * (s * 2.0 / phi) + pi.cross(b) * k;
    (omega_dot, pi_dot)
}

fn consistent_multiplier(
    omega: &Vector3<f64>,
    pi: &Vector3<f64>,
    b: &Vector3<f64>,
    params: &ModelParams,
    phi: f64,
) -> Result<f64> {
    let p2 = pi.norm_squared();
    if !(p2 > 1e-300) {
        return Err(Error::Singular("π² = 0; λ₁ is undetermined".into()));
    }
    // d(ωπ)/dt = α + λ₁ π², α from the λ₁ = 0 flow
    let (wd, pd) = spin_rates(omega, pi, b, params, phi, 0.0);
    let alpha = wd.dot(pi) + omega.dot(&pd);
    Ok(-alpha / p2)
}

/// `λ₁` from `d(ωπ)/dt = 0` along the flow at `z`, with `φ = phi_val`.
pub fn solve_multiplier(
    z: &PhasePoint,
    params: &ModelParams,
    field: &FieldConfig,
    phi_val: f64,
) -> Result<f64> {
    let surface = params.spin_surface();
    let coords = z.to_coords();
    if !surface.is_satisfied(&coords)? {
        warn!(
            "solving λ₁ off the spin surface (max residual {:.3e})",
            surface.max_residual(&coords)?
        );
    }
    if !(phi_val.abs() > GAUGE_MIN) {
        return Err(Error::SingularGauge {
            t: f64::NAN,
            phi: phi_val,
        });
    }
    consistent_multiplier(&z.omega, &z.pi, &field.b(&z.x), params, phi_val)
}

/// Time derivative of every coordinate. `φ` is taken from `gauge` at `t`,
/// not from `z.phi`.
pub fn eom(
    z: &PhasePoint,
    t: f64,
    params: &ModelParams,
    field: &FieldConfig,
    gauge: &GaugeFunction,
) -> Result<PhasePoint> {
    let phi = gauge_value(gauge, t)?;
    let b = field.b(&z.x);
    let xdot = velocity(z, params, field);
    let spin = z.spin();
    let pdot = field.grad_a(&z.x) * xdot * params.charge_coupling()
        + field.grad_b(&z.x) * spin * params.spin_coupling();
    let lambda1 = consistent_multiplier(&z.omega, &z.pi, &b, params, phi)?;
    let (omega_dot, pi_dot) = spin_rates(&z.omega, &z.pi, &b, params, phi, lambda1);
    Ok(PhasePoint::new(
        xdot,
        pdot,
        omega_dot,
        pi_dot,
        gauge.phi_dot(t),
        0.0,
    ))
}

/// `ẋ = (p − (e/c) A)/m`.
pub fn velocity(z: &PhasePoint, params: &ModelParams, field: &FieldConfig) -> Vector3<f64> {
    (z.p - field.a(&z.x) * params.charge_coupling()) / params.m
}

/// `ẍ` from the right-hand sides: `(ṗ − (e/c)(ẋ·∇)A)/m`.
pub fn acceleration(z: &PhasePoint, params: &ModelParams, field: &FieldConfig) -> Vector3<f64> {
    let xdot = velocity(z, params, field);
    let grad_a = field.grad_a(&z.x);
    let pdot = grad_a * xdot * params.charge_coupling()
        + field.grad_b(&z.x) * z.spin() * params.spin_coupling();
    (pdot - grad_a.transpose() * xdot * params.charge_coupling()) / params.m
}

/// `H = (p − (e/c)A)²/2m − (μe/mc) B·S`.
pub fn physical_hamiltonian(z: &PhasePoint, params: &ModelParams, field: &FieldConfig) -> f64 {
    let kinetic = z.p - field.a(&z.x) * params.charge_coupling();
    kinetic.norm_squared() / (2.0 * params.m)
        - params.spin_coupling() * field.b(&z.x).dot(&z.spin())
}

/// `|m ẍ − (e/c) ẋ × B − (μe/mc) S_k ∂_i B_k|` at one point.
pub fn second_order_residual_at(z: &PhasePoint, params: &ModelParams, field: &FieldConfig) -> f64 {
    let xdot = velocity(z, params, field);
    let lorentz = xdot.cross(&field.b(&z.x)) * params.charge_coupling();
    let gradient_force = field.grad_b(&z.x) * z.spin() * params.spin_coupling();
    (acceleration(z, params, field) * params.m - lorentz - gradient_force).norm()
}

pub fn second_order_residual(
    traj: &Trajectory,
    params: &ModelParams,
    field: &FieldConfig,
) -> Vec<f64> {
    traj.states
        .iter()
        .map(|z| second_order_residual_at(z, params, field))
        .collect()
}
