//! Canonical phase space, observables and the numeric Poisson bracket.
//!
//! Observables act on a flat coordinate slice. Two layouts are used in the
//! crate: the non-relativistic particle phase space `(x, p, ω, π, φ, π_φ)`
//! described by [`layout`], and the covariant spin sector `(ω^μ, π^μ)`
//! described by [`minkowski_layout`].

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Dimension of the non-relativistic particle phase space.
pub const DIM: usize = 14;

/// Dimension of the covariant spin sector `(ω^μ, π^μ)`.
pub const MINKOWSKI_DIM: usize = 8;

/// Offsets into the flat coordinate array of a [`PhasePoint`].
pub mod layout {
    pub const X: usize = 0;
    pub const P: usize = 3;
    pub const OMEGA: usize = 6;
    pub const PI: usize = 9;
    pub const PHI: usize = 12;
    pub const PI_PHI: usize = 13;
}

/// Offsets into the flat coordinate array of the covariant spin sector.
pub mod minkowski_layout {
    pub const OMEGA: usize = 0;
    pub const PI: usize = 4;
}

/// Minkowski metric `η = diag(−1, +1, +1, +1)`.
pub const METRIC: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

/// A point of the particle phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: Vector3<f64>,
    pub p: Vector3<f64>,
    pub omega: Vector3<f64>,
    pub pi: Vector3<f64>,
    pub phi: f64,
    pub pi_phi: f64,
}

impl PhasePoint {
    pub fn new(
        x: Vector3<f64>,
        p: Vector3<f64>,
        omega: Vector3<f64>,
        pi: Vector3<f64>,
        phi: f64,
        pi_phi: f64,
    ) -> Self {
        Self {
            x,
            p,
            omega,
            pi,
            phi,
            pi_phi,
        }
    }

    /// Spin-sector point at the origin with zero momentum, `φ = 1`.
    pub fn spin_only(omega: Vector3<f64>, pi: Vector3<f64>) -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros(), omega, pi, 1.0, 0.0)
    }

    pub fn to_coords(&self) -> [f64; DIM] {
        let mut z = [0.0; DIM];
        z[layout::X..layout::X + 3].copy_from_slice(self.x.as_slice());
        z[layout::P..layout::P + 3].copy_from_slice(self.p.as_slice());
        z[layout::OMEGA..layout::OMEGA + 3].copy_from_slice(self.omega.as_slice());
        z[layout::PI..layout::PI + 3].copy_from_slice(self.pi.as_slice());
        z[layout::PHI] = self.phi;
        z[layout::PI_PHI] = self.pi_phi;
        z
    }

    /// Panics if `z.len() != DIM`.
    pub fn from_coords(z: &[f64]) -> Self {
        assert_eq!(z.len(), DIM, "phase point needs {DIM} coordinates");
        let v = |o: usize| Vector3::new(z[o], z[o + 1], z[o + 2]);
        Self {
            x: v(layout::X),
            p: v(layout::P),
            omega: v(layout::OMEGA),
            pi: v(layout::PI),
            phi: z[layout::PHI],
            pi_phi: z[layout::PI_PHI],
        }
    }

    /// `S = ω × π`.
    pub fn spin(&self) -> Vector3<f64> {
        self.omega.cross(&self.pi)
    }

    pub fn is_finite(&self) -> bool {
        self.to_coords().iter().all(|v| v.is_finite())
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A scalar function of canonical coordinates, optionally carrying its
/// analytic gradient.
#[derive(Clone)]
pub struct Observable {
    name: String,
    eval: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("analytic_gradient", &self.grad.is_some())
            .finish()
    }
}

impl Observable {
    pub fn new<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            grad: None,
        }
    }

    pub fn with_gradient<G>(mut self, grad: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(grad));
        self
    }

    /// Drops the analytic gradient, forcing finite differences.
    pub fn without_gradient(mut self) -> Self {
        self.grad = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        (self.eval)(z)
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn analytic_gradient(&self, z: &[f64]) -> Option<Vec<f64>> {
        self.grad.as_ref().map(|g| g(z))
    }

    /// Analytic gradient when available, central differences otherwise.
    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        match &self.grad {
            Some(g) => {
                let d = g(z);
                if let Some(i) = d.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        coordinate: format!("z[{i}]"),
                    });
                }
                Ok(d)
            }
            None => gradient(self, z, FiniteDifference::default()),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c).with_gradient(|z| vec![0.0; z.len()])
    }

    /// The canonical coordinate at `index`.
    pub fn coordinate(index: usize, name: impl Into<String>) -> Self {
        Self::new(name, move |z| z[index]).with_gradient(move |z| {
            let mut d = vec![0.0; z.len()];
            d[index] = 1.0;
            d
        })
    }

    pub fn x(i: usize) -> Self {
        Self::coordinate(layout::X + i, format!("x{}", i + 1))
    }

    pub fn p(i: usize) -> Self {
        Self::coordinate(layout::P + i, format!("p{}", i + 1))
    }

    pub fn omega(i: usize) -> Self {
        Self::coordinate(layout::OMEGA + i, format!("omega{}", i + 1))
    }

    pub fn pi(i: usize) -> Self {
        Self::coordinate(layout::PI + i, format!("pi{}", i + 1))
    }

    pub fn phi() -> Self {
        Self::coordinate(layout::PHI, "phi")
    }

    pub fn pi_phi() -> Self {
        Self::coordinate(layout::PI_PHI, "pi_phi")
    }

    /// Spin component `S_i = ε_ijk ω_j π_k` on the particle layout.
    pub fn spin(i: usize) -> Self {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let (o, p) = (layout::OMEGA, layout::PI);
        Self::new(format!("S{}", i + 1), move |z| {
            z[o + j] * z[p + k] - z[o + k] * z[p + j]
        })
        .with_gradient(move |z| {
            let mut d = vec![0.0; z.len()];
            d[o + j] = z[p + k];
            d[o + k] = -z[p + j];
            d[p + k] = z[o + j];
            d[p + j] = -z[o + k];
            d
        })
    }

    /// Euclidean dot product of two 3-blocks starting at `u` and `v`.
    pub fn block_dot(u: usize, v: usize, name: impl Into<String>) -> Self {
        Self::new(name, move |z| (0..3).map(|i| z[u + i] * z[v + i]).sum()).with_gradient(
            move |z| {
                let mut d = vec![0.0; z.len()];
                for i in 0..3 {
                    d[u + i] += z[v + i];
                    d[v + i] += z[u + i];
                }
                d
            },
        )
    }

    pub fn omega_sq() -> Self {
        Self::block_dot(layout::OMEGA, layout::OMEGA, "omega^2")
    }

    pub fn pi_sq() -> Self {
        Self::block_dot(layout::PI, layout::PI, "pi^2")
    }

    pub fn omega_dot_pi() -> Self {
        Self::block_dot(layout::OMEGA, layout::PI, "omega.pi")
    }

    /// Minkowski product of two 4-blocks of the covariant layout, `η_μν u^μ v^ν`.
    pub fn minkowski_block_dot(u: usize, v: usize, name: impl Into<String>) -> Self {
        Self::new(name, move |z| {
            (0..4).map(|m| METRIC[m] * z[u + m] * z[v + m]).sum()
        })
        .with_gradient(move |z| {
            let mut d = vec![0.0; z.len()];
            for m in 0..4 {
                d[u + m] += METRIC[m] * z[v + m];
                d[v + m] += METRIC[m] * z[u + m];
            }
            d
        })
    }

    /// `η_μν P^μ y^ν` for a fixed external four-vector `P` and the 4-block at `v`.
    pub fn minkowski_contract(p: [f64; 4], v: usize, name: impl Into<String>) -> Self {
        Self::new(name, move |z| {
            (0..4).map(|m| METRIC[m] * p[m] * z[v + m]).sum()
        })
        .with_gradient(move |z| {
            let mut d = vec![0.0; z.len()];
            for m in 0..4 {
                d[v + m] = METRIC[m] * p[m];
            }
            d
        })
    }

    /// Spin-tensor component `J^{μν} = 2(ω^μ π^ν − ω^ν π^μ)` on the covariant layout.
    pub fn spin_tensor(mu: usize, nu: usize) -> Self {
        let (o, p) = (minkowski_layout::OMEGA, minkowski_layout::PI);
        Self::new(format!("J{mu}{nu}"), move |z| {
            2.0 * (z[o + mu] * z[p + nu] - z[o + nu] * z[p + mu])
        })
        .with_gradient(move |z| {
            let mut d = vec![0.0; z.len()];
            d[o + mu] += 2.0 * z[p + nu];
            d[p + nu] += 2.0 * z[o + mu];
            d[o + nu] -= 2.0 * z[p + mu];
            d[p + mu] -= 2.0 * z[o + nu];
            d
        })
    }

    pub fn sum(&self, other: &Observable) -> Self {
        let (f, g) = (self.clone(), other.clone());
        let name = format!("({} + {})", f.name, g.name);
        let mut out = {
            let (f, g) = (f.clone(), g.clone());
            Self::new(name, move |z| f.eval(z) + g.eval(z))
        };
        if let (Some(df), Some(dg)) = (f.grad, g.grad) {
            out = out.with_gradient(move |z| df(z).iter().zip(dg(z)).map(|(a, b)| a + b).collect());
        }
        out
    }

    pub fn product(&self, other: &Observable) -> Self {
        let (f, g) = (self.clone(), other.clone());
        let name = format!("({} * {})", f.name, g.name);
        let mut out = {
            let (f, g) = (f.clone(), g.clone());
            Self::new(name, move |z| f.eval(z) * g.eval(z))
        };
        if f.grad.is_some() && g.grad.is_some() {
            out = out.with_gradient(move |z| {
                let (fv, gv) = (f.eval(z), g.eval(z));
                let df = f.analytic_gradient(z).unwrap_or_default();
                let dg = g.analytic_gradient(z).unwrap_or_default();
                df.iter().zip(dg).map(|(a, b)| a * gv + fv * b).collect()
            });
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        let f = self.clone();
        let name = format!("{c}*{}", f.name);
        let mut out = {
            let f = f.clone();
            Self::new(name, move |z| c * f.eval(z))
        };
        if let Some(df) = f.grad {
            out = out.with_gradient(move |z| df(z).into_iter().map(|v| c * v).collect());
        }
        out
    }
}

/// Central finite-difference settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifference {
    /// Step relative to `max(1, |z_i|)`.
    pub rel_step: f64,
    pub richardson: bool,
}

impl Default for FiniteDifference {
    fn default() -> Self {
        Self {
            rel_step: 1e-6,
            richardson: false,
        }
    }
}

/// Central finite-difference gradient of `f` at `z`.
pub fn gradient(f: &Observable, z: &[f64], fd: FiniteDifference) -> Result<Vec<f64>> {
    if !(fd.rel_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {}",
            fd.rel_step
        )));
    }
    let mut work = z.to_vec();
    let mut central = |i: usize, h: f64| -> Result<f64> {
        let orig = work[i];
        work[i] = orig + h;
        let up = f.eval(&work);
        work[i] = orig - h;
        let down = f.eval(&work);
        work[i] = orig;
        let d = (up - down) / (2.0 * h);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::NonFinite {
                coordinate: format!("z[{i}]"),
            })
        }
    };
    (0..z.len())
        .map(|i| {
            let h = fd.rel_step * z[i].abs().max(1.0);
            let d = central(i, h)?;
            if fd.richardson {
                let d2 = central(i, 0.5 * h)?;
                Ok((4.0 * d2 - d) / 3.0)
            } else {
                Ok(d)
            }
        })
        .collect()
}

/// One conjugate pair with its bracket weight, `{q, p} = weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalPair {
    pub q: usize,
    pub p: usize,
    pub weight: f64,
}

/// Coordinate labels plus the conjugate pairing that defines the bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalStructure {
    labels: Vec<String>,
    pairs: Vec<CanonicalPair>,
}

impl CanonicalStructure {
    /// Each coordinate must appear in exactly one pair.
    pub fn new(labels: Vec<String>, pairs: Vec<CanonicalPair>) -> Result<Self> {
        let mut seen = vec![0usize; labels.len()];
        for pair in &pairs {
            for idx in [pair.q, pair.p] {
                let slot = seen
                    .get_mut(idx)
                    .ok_or_else(|| Error::Structure(format!("pair index {idx} out of range")))?;
                *slot += 1;
            }
        }
        if let Some(i) = seen.iter().position(|&n| n != 1) {
            return Err(Error::Structure(format!(
                "coordinate `{}` appears in {} pairs",
                labels[i], seen[i]
            )));
        }
        Ok(Self { labels, pairs })
    }

    /// `(x, p)`, `(ω, π)`, `(φ, π_φ)` with unit brackets.
    pub fn pauli() -> Self {
        let mut labels = Vec::with_capacity(DIM);
        for block in ["x", "p", "omega", "pi"] {
            for i in 1..=3 {
                labels.push(format!("{block}{i}"));
            }
        }
        labels.push("phi".into());
        labels.push("pi_phi".into());
        let mut pairs: Vec<CanonicalPair> = (0..3)
            .flat_map(|i| {
                [
                    CanonicalPair {
                        q: layout::X + i,
                        p: layout::P + i,
                        weight: 1.0,
                    },
                    CanonicalPair {
                        q: layout::OMEGA + i,
                        p: layout::PI + i,
                        weight: 1.0,
                    },
                ]
            })
            .collect();
        pairs.push(CanonicalPair {
            q: layout::PHI,
            p: layout::PI_PHI,
            weight: 1.0,
        });
        Self::new(labels, pairs).expect("pauli structure is well formed")
    }

    /// `{ω^μ, π^ν} = η^{μν}`.
    pub fn minkowski_spin() -> Self {
        let mut labels = Vec::with_capacity(MINKOWSKI_DIM);
        for block in ["omega", "pi"] {
            for mu in 0..4 {
                labels.push(format!("{block}^{mu}"));
            }
        }
        let pairs = (0..4)
            .map(|mu| CanonicalPair {
                q: minkowski_layout::OMEGA + mu,
                p: minkowski_layout::PI + mu,
                weight: METRIC[mu],
            })
            .collect();
        Self::new(labels, pairs).expect("minkowski structure is well formed")
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn pairs(&self) -> &[CanonicalPair] {
        &self.pairs
    }

    fn relabel(&self, err: Error) -> Error {
        match err {
            Error::NonFinite { coordinate } => {
                let label = coordinate
                    .strip_prefix("z[")
                    .and_then(|s| s.strip_suffix(']'))
                    .and_then(|s| s.parse::<usize>().ok())
                    .and_then(|i| self.labels.get(i).cloned())
                    .unwrap_or(coordinate);
                Error::NonFinite { coordinate: label }
            }
            other => other,
        }
    }

    /// Gradient with coordinate labels attached to any error.
    pub fn gradient(&self, f: &Observable, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                z.len()
            )));
        }
        f.gradient(z).map_err(|e| self.relabel(e))
    }

    /// Bracket of two gradients already evaluated at the same point.
    pub fn bracket_of_gradients(&self, df: &[f64], dg: &[f64]) -> f64 {
        self.pairs
            .iter()
            .map(|c| c.weight * (df[c.q] * dg[c.p] - df[c.p] * dg[c.q]))
            .sum()
    }
}

/// `{f, g}(z) = Σ_pairs w (∂f/∂q ∂g/∂p − ∂f/∂p ∂g/∂q)`.
pub fn poisson_bracket(
    f: &Observable,
    g: &Observable,
    z: &[f64],
    structure: &CanonicalStructure,
) -> Result<f64> {
    let df = structure.gradient(f, z)?;
    let dg = structure.gradient(g, z)?;
    Ok(structure.bracket_of_gradients(&df, &dg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn canonical_point() -> [f64; DIM] {
        PhasePoint::spin_only(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)).to_coords()
    }

    #[test]
    fn canonical_pair_brackets() {
        let s = CanonicalStructure::pauli();
        let z = canonical_point();
        let b = poisson_bracket(&Observable::omega(0), &Observable::pi(0), &z, &s).unwrap();
        assert_eq!(b, 1.0);
        let b = poisson_bracket(&Observable::omega(0), &Observable::omega(1), &z, &s).unwrap();
        assert_eq!(b, 0.0);
        let b = poisson_bracket(&Observable::x(2), &Observable::p(2), &z, &s).unwrap();
        assert_eq!(b, 1.0);
    }

    #[test]
    fn spin_bracket_at_canonical_point() {
        // {S1, S2} = S3 = 1 at ω = e1, π = e2, by hand and by finite differences.
        let s = CanonicalStructure::pauli();
        let z = canonical_point();
        let exact = poisson_bracket(&Observable::spin(0), &Observable::spin(1), &z, &s).unwrap();
        assert_abs_diff_eq!(exact, 1.0, epsilon = 1e-15);
        let fd = poisson_bracket(
            &Observable::spin(0).without_gradient(),
            &Observable::spin(1).without_gradient(),
            &z,
            &s,
        )
        .unwrap();
        assert_abs_diff_eq!(fd, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn gradient_examples() {
        let mut z = [0.0; DIM];
        z[layout::OMEGA] = 2.0;
        let f = Observable::new("w1^2", |z| z[layout::OMEGA].powi(2));
        let d = gradient(&f, &z, FiniteDifference::default()).unwrap();
        assert_abs_diff_eq!(d[layout::OMEGA], 4.0, epsilon = 1e-8);

        let c = Observable::new("c", |_| 3.5);
        let d = gradient(&c, &z, FiniteDifference::default()).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));

        let z = canonical_point();
        let s3 = Observable::spin(2).without_gradient();
        let d = gradient(&s3, &z, FiniteDifference::default()).unwrap();
        let mut expected = [0.0; DIM];
        expected[layout::OMEGA] = 1.0;
        expected[layout::PI + 1] = 1.0;
        for (a, b) in d.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn richardson_is_at_least_as_good() {
        let z = [0.7; DIM];
        let f = Observable::new("sin", |z| (3.0 * z[0]).sin());
        let exact = 3.0 * (2.1f64).cos();
        let plain = gradient(&f, &z, FiniteDifference::default()).unwrap()[0];
        let rich = gradient(
            &f,
            &z,
            FiniteDifference {
                rel_step: 1e-3,
                richardson: true,
            },
        )
        .unwrap()[0];
        assert!((plain - exact).abs() < 1e-8);
        assert!((rich - exact).abs() < 1e-9);
    }

    #[test]
    fn nonfinite_gradient_names_coordinate() {
        let s = CanonicalStructure::pauli();
        let z = [0.0; DIM];
        let f = Observable::new("sqrt(phi)", |z| z[layout::PHI].sqrt());
        let err = poisson_bracket(&f, &Observable::pi_phi(), &z, &s).unwrap_err();
        assert_eq!(
            err,
            Error::NonFinite {
                coordinate: "phi".into()
            }
        );
    }

    #[test]
    fn structure_rejects_duplicate_coordinates() {
        let labels = vec!["q".to_string(), "p".to_string()];
        let pairs = vec![
            CanonicalPair {
                q: 0,
                p: 1,
                weight: 1.0,
            },
            CanonicalPair {
                q: 0,
                p: 1,
                weight: 1.0,
            },
        ];
        assert!(CanonicalStructure::new(labels, pairs).is_err());
    }

    #[test]
    fn phase_point_round_trip() {
        let z: Vec<f64> = (0..DIM).map(|i| i as f64 * 0.5 - 2.0).collect();
        let p = PhasePoint::from_coords(&z);
        assert_eq!(p.to_coords().to_vec(), z);
    }
}
