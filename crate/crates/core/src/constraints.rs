//! Constraint sets, their bracket matrix, first/second-class classification,
//! the Dirac bracket, and Newton projection back onto a constraint surface.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::phasespace::{layout, minkowski_layout, CanonicalStructure, Observable, PhasePoint};

/// Δ condition numbers above this are treated as degenerate.
pub const MAX_CONDITION: f64 = 1e12;

/// Default first-class detection tolerance.
pub const CLASSIFY_TOL: f64 = 1e-8;

/// A constraint `func(z) − target = 0`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub func: Observable,
    pub target: f64,
}

impl Constraint {
    pub fn new(name: impl Into<String>, func: Observable, target: f64) -> Self {
        Self {
            name: name.into(),
            func,
            target,
        }
    }

    pub fn residual(&self, z: &[f64]) -> Result<f64> {
        let r = self.func.eval(z) - self.target;
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::Domain {
                constraint: self.name.clone(),
                reason: "evaluates to a non-finite value".into(),
            })
        }
    }

    /// The constraint function `func − target` as an observable.
    pub fn as_observable(&self) -> Observable {
        if self.target == 0.0 {
            self.func.clone()
        } else {
            self.func.sum(&Observable::constant(-self.target))
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintSet {
    constraints: Vec<Constraint>,
    /// Surface-membership threshold.
    pub tolerance: f64,
}

impl ConstraintSet {
    /// Names must be unique.
    pub fn new(constraints: Vec<Constraint>) -> Result<Self> {
        for (i, c) in constraints.iter().enumerate() {
            if constraints[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate constraint name `{}`",
                    c.name
                )));
            }
        }
        Ok(Self {
            constraints,
            tolerance: 1e-9,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.constraints.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }

    /// Subset in the given name order.
    pub fn subset(&self, names: &[&str]) -> Result<Self> {
        let picked = names
            .iter()
            .map(|n| {
                self.get(n)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("no constraint named `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(picked)?.with_tolerance(self.tolerance))
    }

    /// `{ω² − a², π² − b², ωπ}` on the particle layout.
    pub fn so3_surface(a: f64, b: f64) -> Self {
        Self::new(vec![
            Constraint::new("omega_sq", Observable::omega_sq(), a * a),
            Constraint::new("pi_sq", Observable::pi_sq(), b * b),
            Constraint::new("omega_pi", Observable::omega_dot_pi(), 0.0),
        ])
        .expect("unique names")
    }

    /// The second-class pair `{ω² − a², ωπ}`.
    pub fn pauli_second_class(a: f64) -> Self {
        Self::new(vec![
            Constraint::new("omega_sq", Observable::omega_sq(), a * a),
            Constraint::new("omega_pi", Observable::omega_dot_pi(), 0.0),
        ])
        .expect("unique names")
    }

    /// `{π_φ, π² − b² + (b²/a²)(ω² − a²)}`.
    pub fn pauli_first_class(a: f64, b: f64) -> Self {
        let ratio = b * b / (a * a);
        let combo = Observable::pi_sq().sum(&Observable::omega_sq().scaled(ratio));
        Self::new(vec![
            Constraint::new("pi_phi", Observable::pi_phi(), 0.0),
            Constraint::new("pi_sq_combined", combo, 2.0 * b * b),
        ])
        .expect("unique names")
    }

    /// Second-class pair followed by the first-class pair.
    pub fn pauli_model(a: f64, b: f64) -> Self {
        let mut all = Self::pauli_second_class(a).constraints;
        all.extend(Self::pauli_first_class(a, b).constraints);
        Self::new(all).expect("unique names")
    }

    /// `{ωπ, π² − a/ω²}` on the particle layout.
    pub fn t4_surface(a: f64) -> Self {
        let (o, p) = (layout::OMEGA, layout::PI);
        let hyperbola = Observable::new("pi^2 - a/omega^2", move |z| {
            let w2: f64 = (0..3).map(|i| z[o + i] * z[o + i]).sum();
            let p2: f64 = (0..3).map(|i| z[p + i] * z[p + i]).sum();
            p2 - a / w2
        })
        .with_gradient(move |z| {
            let w2: f64 = (0..3).map(|i| z[o + i] * z[o + i]).sum();
            let mut d = vec![0.0; z.len()];
            for i in 0..3 {
                d[o + i] = 2.0 * a * z[o + i] / (w2 * w2);
                d[p + i] = 2.0 * z[p + i];
            }
            d
        });
        Self::new(vec![
            Constraint::new("omega_pi", Observable::omega_dot_pi(), 0.0),
            Constraint::new("pi_sq_hyperbola", hyperbola, 0.0),
        ])
        .expect("unique names")
    }

    /// Covariant T³ set `(π² − a₃, ω² − a₄, ωπ, 𝒫ω, 𝒫π)` on the covariant
    /// layout, with `𝒫` an external four-vector.
    pub fn t3_covariant(momentum: [f64; 4], a3: f64, a4: f64) -> Self {
        let (o, p) = (minkowski_layout::OMEGA, minkowski_layout::PI);
        Self::new(vec![
            Constraint::new("T3", Observable::minkowski_block_dot(p, p, "pi.pi"), a3),
            Constraint::new(
                "T4",
                Observable::minkowski_block_dot(o, o, "omega.omega"),
                a4,
            ),
            Constraint::new("T5", Observable::minkowski_block_dot(o, p, "omega.pi"), 0.0),
            Constraint::new(
                "T6",
                Observable::minkowski_contract(momentum, o, "P.omega"),
                0.0,
            ),
            Constraint::new(
                "T7",
                Observable::minkowski_contract(momentum, p, "P.pi"),
                0.0,
            ),
        ])
        .expect("unique names")
    }

    pub fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.constraints.iter().map(|c| c.residual(z)).collect()
    }

    pub fn max_residual(&self, z: &[f64]) -> Result<f64> {
        Ok(self
            .evaluate(z)?
            .into_iter()
            .fold(0.0, |m, r| m.max(r.abs())))
    }

    pub fn is_satisfied(&self, z: &[f64]) -> Result<bool> {
        Ok(self.max_residual(z)? <= self.tolerance)
    }

    fn gradients(&self, z: &[f64], structure: &CanonicalStructure) -> Result<Vec<Vec<f64>>> {
        self.constraints
            .iter()
            .map(|c| {
                c.residual(z)?;
                structure.gradient(&c.func, z)
            })
            .collect()
    }
}

/// `Δ_ab = {Φ_a, Φ_b}` at one point.
#[derive(Debug, Clone)]
pub struct BracketMatrix {
    pub names: Vec<String>,
    pub delta: DMatrix<f64>,
    /// Scale `max(1, |∇Φ_a| |∇Φ_b|)` for each entry, used by classification.
    pub scale: DMatrix<f64>,
}

impl BracketMatrix {
    pub fn is_antisymmetric(&self, tol: f64) -> bool {
        let n = self.delta.nrows();
        (0..n).all(|i| (0..n).all(|j| (self.delta[(i, j)] + self.delta[(j, i)]).abs() <= tol))
    }

    /// 2-norm condition number; infinite when singular.
    pub fn condition_number(&self) -> f64 {
        condition_number(&self.delta)
    }

    /// Numerical rank of Δ: the number of independent second-class directions.
    pub fn rank(&self, rel_tol: f64) -> usize {
        if self.delta.is_empty() {
            return 0;
        }
        let sv = self.delta.clone().singular_values();
        let max = sv.max();
        if max == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > rel_tol * max).count()
    }
}

pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn constraint_matrix(
    set: &ConstraintSet,
    z: &[f64],
    structure: &CanonicalStructure,
) -> Result<BracketMatrix> {
    if !set.is_satisfied(z)? {
        warn!(
            "constraint matrix requested off the surface (max residual {:.3e})",
            set.max_residual(z)?
        );
    }
    let grads = set.gradients(z, structure)?;
    let n = grads.len();
    let norms: Vec<f64> = grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let delta = DMatrix::from_fn(n, n, |a, b| {
        structure.bracket_of_gradients(&grads[a], &grads[b])
    });
    let scale = DMatrix::from_fn(n, n, |a, b| (norms[a] * norms[b]).max(1.0));
    Ok(BracketMatrix {
        names: set.constraints.iter().map(|c| c.name.clone()).collect(),
        delta,
        scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintClass {
    FirstClass,
    SecondClass,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub names: Vec<String>,
    pub classes: Vec<ConstraintClass>,
    /// Rank of Δ; the number of independent second-class constraints.
    pub second_class_rank: usize,
}

impl Classification {
    pub fn count(&self, class: ConstraintClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    pub fn class_of(&self, name: &str) -> Option<ConstraintClass> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.classes[i])
    }
}

/// A constraint is first-class iff all its brackets with the set vanish
/// within `tol · max(1, |∇Φ_a||∇Φ_b|)`.
pub fn classify(
    set: &ConstraintSet,
    z: &[f64],
    structure: &CanonicalStructure,
    tol: f64,
) -> Result<Classification> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "classification tolerance must be positive, got {tol}"
        )));
    }
    let m = constraint_matrix(set, z, structure)?;
    let n = m.delta.nrows();
    let classes = (0..n)
        .map(|a| {
            let first = (0..n).all(|b| m.delta[(a, b)].abs() <= tol * m.scale[(a, b)]);
            if first {
                ConstraintClass::FirstClass
            } else {
                ConstraintClass::SecondClass
            }
        })
        .collect();
    let second_class_rank = m.rank(tol);
    Ok(Classification {
        names: m.names,
        classes,
        second_class_rank,
    })
}

/// The Dirac bracket for a fixed second-class set at a fixed point, with Δ
/// already factored.
#[derive(Debug, Clone)]
pub struct DiracBracket<'a> {
    structure: &'a CanonicalStructure,
    z: Vec<f64>,
    constraint_grads: Vec<Vec<f64>>,
    delta_inv: DMatrix<f64>,
    condition: f64,
}

impl<'a> DiracBracket<'a> {
    pub fn new(
        second_class: &ConstraintSet,
        z: &[f64],
        structure: &'a CanonicalStructure,
    ) -> Result<Self> {
        let m = constraint_matrix(second_class, z, structure)?;
        let condition = m.condition_number();
        if !(condition <= MAX_CONDITION) {
            return Err(Error::DegenerateConstraints { condition });
        }
        let n = m.delta.nrows();
        let delta_inv = m
            .delta
            .clone()
            .lu()
            .solve(&DMatrix::identity(n, n))
            .ok_or(Error::DegenerateConstraints { condition })?;
        Ok(Self {
            structure,
            z: z.to_vec(),
            constraint_grads: second_class.gradients(z, structure)?,
            delta_inv,
            condition,
        })
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// `{f, g}_D = {f, g} − {f, Φ_a} Δ⁻¹_ab {Φ_b, g}`.
    pub fn bracket(&self, f: &Observable, g: &Observable) -> Result<f64> {
        let df = self.structure.gradient(f, &self.z)?;
        let dg = self.structure.gradient(g, &self.z)?;
        let s = self.structure;
        let f_phi = DVector::from_iterator(
            self.constraint_grads.len(),
            self.constraint_grads
                .iter()
                .map(|dphi| s.bracket_of_gradients(&df, dphi)),
        );
        let phi_g = DVector::from_iterator(
            self.constraint_grads.len(),
            self.constraint_grads
                .iter()
                .map(|dphi| s.bracket_of_gradients(dphi, &dg)),
        );
        let correction = f_phi.dot(&(&self.delta_inv * phi_g));
        Ok(s.bracket_of_gradients(&df, &dg) - correction)
    }
}

pub fn dirac_bracket(
    f: &Observable,
    g: &Observable,
    second_class: &ConstraintSet,
    z: &[f64],
    structure: &CanonicalStructure,
) -> Result<f64> {
    DiracBracket::new(second_class, z, structure)?.bracket(f, g)
}

/// Which coordinates a projection may move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProjectionBlock {
    /// `(ω, π)` of the particle layout.
    Spin,
    /// `(ω, π, φ, π_φ)` of the particle layout.
    SpinAndAuxiliary,
    Indices(Vec<usize>),
}

impl ProjectionBlock {
    pub fn indices(&self) -> Vec<usize> {
        match self {
            Self::Spin => (layout::OMEGA..layout::PI + 3).collect(),
            Self::SpinAndAuxiliary => (layout::OMEGA..=layout::PI_PHI).collect(),
            Self::Indices(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub block: ProjectionBlock,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        Self {
            max_iter: 20,
            tol: 1e-12,
            block: ProjectionBlock::Spin,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coords: Vec<f64>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

/// Newton iterations with minimum-norm updates `δ = −Jᵀ(JJᵀ)⁻¹ r`, moving
/// only the coordinates selected by `opts.block`.
pub fn project_coords(z: &[f64], set: &ConstraintSet, opts: &ProjectOptions) -> Result<Projection> {
    let free = opts.block.indices();
    let mut coords = z.to_vec();
    let mut residuals = set.evaluate(&coords)?;
    if let Some((c, r)) = set
        .constraints
        .iter()
        .zip(&residuals)
        .find(|(c, r)| r.abs() > 0.1 * c.target.abs().max(1.0))
    {
        warn!(
            "projecting from far off the surface: `{}` residual {:.3e}",
            c.name, r
        );
    }
    for iteration in 0..=opts.max_iter {
        let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if max_residual < opts.tol {
            return Ok(Projection {
                coords,
                iterations: iteration,
                residuals,
            });
        }
        if iteration == opts.max_iter {
            return Err(Error::ProjectionFailed {
                iterations: opts.max_iter,
                residuals,
                max_residual,
            });
        }
        let n = set.len();
        let k = free.len();
        let mut jac = DMatrix::zeros(n, k);
        for (a, c) in set.constraints.iter().enumerate() {
            let g = c.func.gradient(&coords)?;
            for (col, &idx) in free.iter().enumerate() {
                jac[(a, col)] = g[idx];
            }
            if jac.row(a).norm() == 0.0 {
                return Err(Error::Domain {
                    constraint: c.name.clone(),
                    reason: "constraint gradient vanishes; Jacobian is singular".into(),
                });
            }
        }
        let gram = &jac * jac.transpose();
        let r = DVector::from_column_slice(&residuals);
        let y = gram.lu().solve(&r).ok_or_else(|| Error::Domain {
            constraint: set.names().join(","),
            reason: "constraint Jacobian is rank deficient".into(),
        })?;
        let step = jac.transpose() * y;
        for (col, &idx) in free.iter().enumerate() {
            coords[idx] -= step[col];
        }
        residuals = set.evaluate(&coords)?;
    }
    unreachable!("loop returns on its final iteration")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    pub point: PhasePoint,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

/// Projects a particle phase point; `x`, `p` (and `φ`, `π_φ` unless requested) stay fixed.
pub fn project(
    z: &PhasePoint,
    set: &ConstraintSet,
    opts: &ProjectOptions,
) -> Result<ProjectedPoint> {
    let proj = project_coords(&z.to_coords(), set, opts)?;
    Ok(ProjectedPoint {
        point: PhasePoint::from_coords(&proj.coords),
        iterations: proj.iterations,
        residuals: proj.residuals,
    })
}
