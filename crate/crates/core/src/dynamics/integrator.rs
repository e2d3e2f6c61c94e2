//! Dormand–Prince 5(4) with FSAL, Hairer's error norm and optional
//! constraint projection after accepted steps.

use log::{debug, warn};
use nalgebra::{SVector, Vector3};

use super::{eom, physical_hamiltonian, solve_multiplier, FieldConfig, GaugeFunction, ModelParams};
use crate::constraints::{project, ProjectOptions};
use crate::error::{Error, Result};
use crate::phasespace::{PhasePoint, DIM};

type State = SVector<f64, DIM>;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// b − b̂ (fifth-order minus embedded fourth-order weights)
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Project onto the spin surface every this many accepted steps; 0
    /// disables. Defaults to every step.
    pub project_every: usize,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    pub projection: ProjectOptions,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            project_every: 1,
            max_steps: 1_000_000,
            initial_step: None,
            max_step: None,
            projection: ProjectOptions::default(),
        }
    }
}

impl IntegrateOptions {
    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument("max_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Derived quantities recorded at every sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDiagnostics {
    pub spin: Vector3<f64>,
    pub hamiltonian: f64,
    /// `ω² − a²`, `π² − b²`, `ωπ`.
    pub residuals: [f64; 3],
    pub lambda1: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub projections: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub derivatives: Vec<PhasePoint>,
    pub diagnostics: Vec<SampleDiagnostics>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn spins(&self) -> Vec<Vector3<f64>> {
        self.diagnostics.iter().map(|d| d.spin).collect()
    }

    /// Largest `|residual|` over all samples and constraints.
    pub fn max_constraint_drift(&self) -> f64 {
        self.diagnostics
            .iter()
            .flat_map(|d| d.residuals)
            .fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Cubic Hermite interpolation between recorded samples.
    pub fn interpolate(&self, t: f64) -> Result<PhasePoint> {
        let (first, last) = match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::InvalidArgument("empty trajectory".into())),
        };
        if !(t >= first && t <= last) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside [{first}, {last}]"
            )));
        }
        let i = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            n if n >= self.times.len() => return Ok(self.states[self.times.len() - 1]),
            n => n - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let y0 = self.states[i].to_coords();
        let y1 = self.states[i + 1].to_coords();
        let d0 = self.derivatives[i].to_coords();
        let d1 = self.derivatives[i + 1].to_coords();
        let z: Vec<f64> = (0..DIM)
            .map(|k| h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k])
            .collect();
        Ok(PhasePoint::from_coords(&z))
    }
}

struct System<'a> {
    params: &'a ModelParams,
    field: &'a FieldConfig,
    gauge: &'a GaugeFunction,
    evaluations: usize,
}

impl System<'_> {
    fn rhs(&mut self, t: f64, y: &State) -> Result<State> {
        self.evaluations += 1;
        let z = PhasePoint::from_coords(y.as_slice());
        let d = eom(&z, t, self.params, self.field, self.gauge)?;
        let out = State::from_row_slice(&d.to_coords());
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                coordinate: format!("d/dt z[{i}] at t = {t}"),
            });
        }
        Ok(out)
    }

    fn diagnostics(&self, t: f64, z: &PhasePoint) -> Result<SampleDiagnostics> {
        let a = self.params.a;
        let b = self.params.b;
        Ok(SampleDiagnostics {
            spin: z.spin(),
            hamiltonian: physical_hamiltonian(z, self.params, self.field),
            residuals: [
                z.omega.norm_squared() - a * a,
                z.pi.norm_squared() - b * b,
                z.omega.dot(&z.pi),
            ],
            lambda1: super::consistent_multiplier(
                &z.omega,
                &z.pi,
                &self.field.b(&z.x),
                self.params,
                self.gauge.phi(t),
            )?,
        })
    }
}

fn error_norm(err: &State, y0: &State, y1: &State, opts: &IntegrateOptions) -> f64 {
    let sum: f64 = (0..DIM)
        .map(|i| {
            let sc = opts.abs_tol + opts.rel_tol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / DIM as f64).sqrt()
}

fn initial_step(
    sys: &mut System<'_>,
    t0: f64,
    y0: &State,
    f0: &State,
    opts: &IntegrateOptions,
    span: f64,
) -> Result<f64> {
    let scale = y0.map(|v| opts.abs_tol + opts.rel_tol * v.abs());
    let d0 = y0.component_div(&scale).norm() / (DIM as f64).sqrt();
    let d1 = f0.component_div(&scale).norm() / (DIM as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1 = y0 + f0 * h0;
    let f1 = sys.rhs(t0 + h0, &y1)?;
    let d2 = (f1 - f0).component_div(&scale).norm() / (DIM as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Integrates the equations of motion over `t_span`, recording every
/// accepted step.
pub fn integrate(
    z0: &PhasePoint,
    t_span: (f64, f64),
    params: &ModelParams,
    field: &FieldConfig,
    gauge: &GaugeFunction,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    params.validate()?;
    opts.validate()?;
    let (t0, t1) = t_span;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_span must satisfy t0 < t1, got ({t0}, {t1})"
        )));
    }
    if !z0.is_finite() {
        return Err(Error::NonFinite {
            coordinate: "initial state".into(),
        });
    }
    gauge.check_nonvanishing(t0, t1, 1000)?;

    let surface = params.spin_surface();
    let mut start = *z0;
    if !surface.is_satisfied(&start.to_coords())? {
        warn!(
            "initial state off the spin surface (max residual {:.3e}); projecting",
            surface.max_residual(&start.to_coords())?
        );
        start = project(&start, &surface, &opts.projection)?.point;
    }
    start.phi = gauge.phi(t0);
    // fail early on a degenerate multiplier
    solve_multiplier(&start, params, field, start.phi)?;

    let mut sys = System {
        params,
        field,
        gauge,
        evaluations: 0,
    };
    let span = t1 - t0;
    let mut stats = StepStats::default();
    let mut y = State::from_row_slice(&start.to_coords());
    let mut f = sys.rhs(t0, &y)?;
    let mut t = t0;
    let mut h = match opts.initial_step {
        Some(h) if h > 0.0 => h.min(span),
        _ => initial_step(&mut sys, t0, &y, &f, opts, span)?,
    };
    if let Some(hm) = opts.max_step {
        h = h.min(hm);
    }

    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![start],
        derivatives: vec![PhasePoint::from_coords(f.as_slice())],
        diagnostics: vec![sys.diagnostics(t0, &start)?],
        stats,
    };

    let h_min = 1e-14 * span.max(t0.abs()).max(1.0);
    while t < t1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= t1 || (t1 - (t + h)) < h_min;
        if last {
            h = t1 - t;
        }
        let mut k = [State::zeros(); 7];
        k[0] = f;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    ys += kj * (h * A[s][j]);
                }
            }
            k[s] = sys.rhs(t + C[s] * h, &ys)?;
        }
        let mut y_new = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            if A[6][j] != 0.0 {
                y_new += kj * (h * A[6][j]);
            }
        }
        let mut err = State::zeros();
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err += kj * (h * E[j]);
            }
        }
        let en = error_norm(&err, &y, &y_new, opts);
        let factor = if en == 0.0 {
            5.0
        } else {
            (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
        };
        if !en.is_finite() || en > 1.0 {
            stats.rejected += 1;
            h *= factor.min(1.0);
            if h < h_min {
                return Err(Error::StepUnderflow { t, h });
            }
            continue;
        }

        t = if last { t1 } else { t + h };
        stats.accepted += 1;
        let mut z = PhasePoint::from_coords(y_new.as_slice());
        z.phi = gauge.phi(t);
        let mut f_new = k[6];
        let mut reset = z.phi != y_new[crate::phasespace::layout::PHI];
        if opts.project_every > 0 && stats.accepted % opts.project_every == 0 {
            z = project(&z, &surface, &opts.projection)?.point;
            stats.projections += 1;
            reset = true;
        }
        if reset {
            y_new = State::from_row_slice(&z.to_coords());
            f_new = sys.rhs(t, &y_new)?;
        }
        y = y_new;
        f = f_new;

        traj.times.push(t);
        traj.states.push(z);
        traj.derivatives.push(PhasePoint::from_coords(f.as_slice()));
        traj.diagnostics.push(sys.diagnostics(t, &z)?);

        h *= factor;
        if let Some(hm) = opts.max_step {
            h = h.min(hm);
        }
    }
    stats.evaluations = sys.evaluations;
    traj.stats = stats;
    debug!(
        "integrated to t = {t1}: {} accepted, {} rejected, {} evaluations",
        stats.accepted, stats.rejected, stats.evaluations
    );
    Ok(traj)
}
