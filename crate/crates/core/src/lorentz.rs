//! Covariant spin bundles: boosts, the spin tensor, the T³ and T⁴ surfaces,
//! the Frenkel condition, the Casimir, the base ellipsoid, the BMT vector,
//! the tetrad and the two-parameter structure group of T⁴.
//!
//! Signature is `η = diag(−1, +1, +1, +1)` throughout, and `ε^{0123} = +1`.

use nalgebra::{Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::phasespace::METRIC;

/// Sign of `ε^{0123}`.
pub const LEVI_CIVITA_SIGN: f64 = 1.0;

/// A frame is treated as the rest frame when `|𝒫| / |𝒫⁰|` is below this.
pub const REST_FRAME_TOL: f64 = 1e-12;

/// `a₃ = a₄ = (√3/2) ħ` so that `8 a₃ a₄ = 6ħ²`.
pub fn default_t3_targets(hbar: f64) -> (f64, f64) {
    let a = 0.75f64.sqrt() * hbar;
    (a, a)
}

/// `a = 3ħ²/4`, the spin one-half value.
pub fn default_t4_target(hbar: f64) -> f64 {
    0.75 * hbar * hbar
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourVector(pub Vector4<f64>);

impl FourVector {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self(Vector4::new(t, x, y, z))
    }

    pub fn from_parts(time: f64, space: Vector3<f64>) -> Self {
        Self::new(time, space.x, space.y, space.z)
    }

    pub fn zero() -> Self {
        Self(Vector4::zeros())
    }

    pub fn time(&self) -> f64 {
        self.0[0]
    }

    pub fn spatial(&self) -> Vector3<f64> {
        Vector3::new(self.0[1], self.0[2], self.0[3])
    }

    /// Covariant components `η_μν v^ν`.
    pub fn lower(&self) -> Vector4<f64> {
        Vector4::from_fn(|m, _| METRIC[m] * self.0[m])
    }

    pub fn dot(&self, other: &FourVector) -> f64 {
        minkowski_dot(self, other)
    }

    pub fn square(&self) -> f64 {
        self.dot(self)
    }

    pub fn transformed(&self, lambda: &Matrix4<f64>) -> Self {
        Self(lambda * self.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0 * c)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }
}

/// `η_μν u^μ v^ν`.
pub fn minkowski_dot(u: &FourVector, v: &FourVector) -> f64 {
    (0..4).map(|m| METRIC[m] * u.0[m] * v.0[m]).sum()
}

/// A timelike four-momentum `𝒫`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumVector(FourVector);

impl MomentumVector {
    pub fn new(p: FourVector) -> Result<Self> {
        let m2 = p.time().powi(2) - p.spatial().norm_squared();
        if !(m2 > 0.0) || !p.is_finite() {
            return Err(Error::NotTimelike(m2));
        }
        Ok(Self(p))
    }

    /// Rest-frame momentum `(m, 0, 0, 0)`.
    pub fn at_rest(mass: f64) -> Result<Self> {
        Self::new(FourVector::new(mass, 0.0, 0.0, 0.0))
    }

    pub fn four(&self) -> &FourVector {
        &self.0
    }

    /// `m̃c = √(𝒫₀² − 𝓟²)`.
    pub fn mass_c(&self) -> f64 {
        (self.0.time().powi(2) - self.0.spatial().norm_squared()).sqrt()
    }

    pub fn gamma(&self) -> f64 {
        self.0.time().abs() / self.mass_c()
    }

    /// `β = 𝓟 / 𝒫⁰`.
    pub fn beta(&self) -> Vector3<f64> {
        self.0.spatial() / self.0.time()
    }

    pub fn is_rest_frame(&self) -> bool {
        self.0.spatial().norm() / self.0.time().abs() < REST_FRAME_TOL
    }

    pub fn transformed(&self, lambda: &Matrix4<f64>) -> Result<Self> {
        Self::new(self.0.transformed(lambda))
    }
}

/// Pure boost `(γ, γβᵀ; γβ, I + (γ−1)/β² ββᵀ)`.
pub fn boost_matrix(beta: &Vector3<f64>) -> Result<Matrix4<f64>> {
    let b2 = beta.norm_squared();
    if !(b2 < 1.0) {
        return Err(Error::Superluminal(b2.sqrt()));
    }
    let gamma = 1.0 / (1.0 - b2).sqrt();
    // (γ − 1)/β² = 1/2 + 3β²/8 + 5β⁴/16 + ...
    let coeff = if b2.sqrt() < 1e-8 {
        0.5 + 0.375 * b2
    } else {
        (gamma - 1.0) / b2
    };
    let mut m = Matrix4::identity();
    m[(0, 0)] = gamma;
    for i in 0..3 {
        m[(0, i + 1)] = gamma * beta[i];
        m[(i + 1, 0)] = gamma * beta[i];
        for j in 0..3 {
            m[(i + 1, j + 1)] += coeff * beta[i] * beta[j];
        }
    }
    Ok(m)
}

/// Antisymmetric `J^{μν}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinTensor(pub Matrix4<f64>);

impl SpinTensor {
    /// Builds `J` from `(k, j)` with
    /// `J^{0i} = k_i`, `J^{12} = j₃`, `J^{13} = −j₂`, `J^{23} = j₁`.
    pub fn compose(k: &Vector3<f64>, j: &Vector3<f64>) -> Self {
        let mut m = Matrix4::zeros();
        for i in 0..3 {
            m[(0, i + 1)] = k[i];
            m[(i + 1, 0)] = -k[i];
        }
        m[(1, 2)] = j[2];
        m[(2, 1)] = -j[2];
        m[(1, 3)] = -j[1];
        m[(3, 1)] = j[1];
        m[(2, 3)] = j[0];
        m[(3, 2)] = -j[0];
        Self(m)
    }

    /// `Λ J Λᵀ`.
    pub fn transformed(&self, lambda: &Matrix4<f64>) -> Self {
        Self(lambda * self.0 * lambda.transpose())
    }

    /// `J_{μν}` with both indices lowered.
    pub fn lowered(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|m, n| METRIC[m] * METRIC[n] * self.0[(m, n)])
    }
}

/// `J^{μν} = 2(ω^μ π^ν − ω^ν π^μ)`.
pub fn spin_tensor(omega: &FourVector, pi: &FourVector) -> SpinTensor {
    SpinTensor(Matrix4::from_fn(|m, n| {
        2.0 * (omega.0[m] * pi.0[n] - omega.0[n] * pi.0[m])
    }))
}

/// Splits `J` into `(k, j)`. Fails if `J` is not antisymmetric.
pub fn decompose_j(j: &SpinTensor) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let m = &j.0;
    let scale = m.amax().max(1.0);
    for a in 0..4 {
        for b in a..4 {
            if (m[(a, b)] + m[(b, a)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "spin tensor is not antisymmetric at ({a}, {b})"
                )));
            }
        }
    }
    let k = Vector3::new(m[(0, 1)], m[(0, 2)], m[(0, 3)]);
    let jv = Vector3::new(m[(2, 3)], -m[(1, 3)], m[(1, 2)]);
    Ok((k, jv))
}

fn check_timelike(p: &FourVector) -> Result<MomentumVector> {
    MomentumVector::new(*p)
}

/// `(π² − a₃, ω² − a₄, ωπ, 𝒫ω, 𝒫π)`.
pub fn t3_constraints(
    omega: &FourVector,
    pi: &FourVector,
    momentum: &FourVector,
    a3: f64,
    a4: f64,
) -> Result<[f64; 5]> {
    check_timelike(momentum)?;
    Ok([
        pi.square() - a3,
        omega.square() - a4,
        omega.dot(pi),
        momentum.dot(omega),
        momentum.dot(pi),
    ])
}

/// `(𝒫ω, 𝒫π, ωπ, π² − a/ω²)`.
pub fn t4_constraints(
    omega: &FourVector,
    pi: &FourVector,
    momentum: &FourVector,
    a: f64,
) -> Result<[f64; 4]> {
    check_timelike(momentum)?;
    let w2 = omega.square();
    if w2 == 0.0 {
        return Err(Error::Singular("ω² = 0 in π² − a/ω²".into()));
    }
    Ok([
        momentum.dot(omega),
        momentum.dot(pi),
        omega.dot(pi),
        pi.square() - a / w2,
    ])
}

/// `J^{μν} 𝒫_ν`.
pub fn frenkel_residual(j: &SpinTensor, momentum: &FourVector) -> FourVector {
    FourVector(j.0 * momentum.lower())
}

/// `J_{μν} J^{μν}`.
pub fn casimir(j: &SpinTensor) -> f64 {
    j.lowered().component_mul(&j.0).sum()
}

/// `j² − [j × 𝓟]²/𝒫₀² − 3ħ²`.
pub fn base_ellipsoid_residual(j: &Vector3<f64>, momentum: &FourVector, hbar: f64) -> Result<f64> {
    let p = check_timelike(momentum)?;
    let p0 = p.four().time();
    Ok(j.norm_squared()
        - j.cross(&p.four().spatial()).norm_squared() / (p0 * p0)
        - 3.0 * hbar * hbar)
}

/// Sign of the permutation `(a, b, c, d)` of `(0, 1, 2, 3)`; zero if any repeat.
pub fn levi_civita(idx: [usize; 4]) -> f64 {
    let mut sign = LEVI_CIVITA_SIGN;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if idx[i] == idx[j] {
                return 0.0;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// `S^μ = (1/m̃c) ε^{μναβ} 𝒫_ν ω_α π_β`.
pub fn bmt_vector(
    omega: &FourVector,
    pi: &FourVector,
    momentum: &FourVector,
) -> Result<FourVector> {
    let p = check_timelike(momentum)?;
    let (pl, wl, ql) = (p.four().lower(), omega.lower(), pi.lower());
    let mut s = Vector4::zeros();
    for mu in 0..4 {
        let mut acc = 0.0;
        for nu in 0..4 {
            for al in 0..4 {
                for be in 0..4 {
                    let e = levi_civita([mu, nu, al, be]);
                    if e != 0.0 {
                        acc += e * pl[nu] * wl[al] * ql[be];
                    }
                }
            }
        }
        s[mu] = acc / p.mass_c();
    }
    Ok(FourVector(s))
}

/// `S⁰ = (γ/2)(β·j)`, `S = ½(j/γ + γβ(β·j))`.
pub fn spin_from_j(j: &Vector3<f64>, momentum: &FourVector) -> Result<FourVector> {
    let p = check_timelike(momentum)?;
    let (g, b) = (p.gamma(), p.beta());
    let bj = b.dot(j);
    Ok(FourVector::from_parts(
        0.5 * g * bj,
        0.5 * (j / g + b * (g * bj)),
    ))
}

/// `j = 2γ(S − β(β·S))`.
pub fn j_from_spin(s: &FourVector, momentum: &FourVector) -> Result<Vector3<f64>> {
    let p = check_timelike(momentum)?;
    let (g, b) = (p.gamma(), p.beta());
    let sv = s.spatial();
    Ok((sv - b * b.dot(&sv)) * (2.0 * g))
}

/// `k = 2γ [S × β]`.
pub fn k_from_spin(s: &FourVector, momentum: &FourVector) -> Result<Vector3<f64>> {
    let p = check_timelike(momentum)?;
    Ok(s.spatial().cross(&p.beta()) * (2.0 * p.gamma()))
}

/// An `SO(1,3)` element built from `(𝒫, ω, π, S)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tetrad {
    /// Rows are the contravariant components of the four basis vectors.
    pub matrix: Matrix4<f64>,
}

impl Tetrad {
    /// `max |Λ η Λᵀ − η|`.
    pub fn pseudo_orthogonality_error(&self) -> f64 {
        let eta = Matrix4::from_diagonal(&Vector4::from(METRIC));
        (self.matrix * eta * self.matrix.transpose() - eta).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }
}

/// Rows `(𝒫/m̃c, ω/√a₄, π/√a₃, S/√(a₃a₄))` for a point on T³.
pub fn tetrad(
    momentum: &FourVector,
    omega: &FourVector,
    pi: &FourVector,
    a3: f64,
    a4: f64,
) -> Result<Tetrad> {
    let residuals = t3_constraints(omega, pi, momentum, a3, a4)?;
    let scale = 1.0
        + a3.abs()
        + a4.abs()
        + momentum.0.norm() * (omega.0.norm() + pi.0.norm())
        + omega.0.norm() * pi.0.norm();
    if residuals.iter().any(|r| r.abs() > 1e-9 * scale) {
        return Err(Error::OffSurface {
            residuals: residuals.to_vec(),
        });
    }
    let p = MomentumVector::new(*momentum)?;
    let s = bmt_vector(omega, pi, momentum)?;
    let rows = [
        momentum.0 / p.mass_c(),
        omega.0 / a4.sqrt(),
        pi.0 / a3.sqrt(),
        s.0 / (a3 * a4).sqrt(),
    ];
    Ok(Tetrad {
        matrix: Matrix4::from_fn(|r, c| rows[r][c]),
    })
}

/// Two-parameter structure group of T⁴: scaling by `k` and rotation by `β`
/// in the `(ω, π)` plane.
pub fn t4_structure_action(
    omega: &Vector3<f64>,
    pi: &Vector3<f64>,
    k: f64,
    beta: f64,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale k must be positive, got {k}"
        )));
    }
    let (wn, pn) = (omega.norm(), pi.norm());
    if wn == 0.0 || pn == 0.0 {
        return Err(Error::InvalidArgument("ω and π must be nonzero".into()));
    }
    let (s, c) = beta.sin_cos();
    let w = omega * (k * c) + pi * (k * wn / pn * s);
    let p = -omega * (pn / (k * wn) * s) + pi * (c / k);
    Ok((w, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dot_examples() {
        let t = FourVector::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(t.dot(&t), -1.0);
        let n = FourVector::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(n.dot(&n), 0.0);
        let s = FourVector::new(0.0, 3.0, 0.0, 0.0);
        assert_eq!(s.dot(&s), 9.0);
    }

    #[test]
    fn boost_examples() {
        assert_eq!(
            boost_matrix(&Vector3::zeros()).unwrap(),
            Matrix4::identity()
        );
        let b = boost_matrix(&Vector3::new(0.6, 0.0, 0.0)).unwrap();
        let v = FourVector::new(1.0, 0.0, 0.0, 0.0).transformed(&b);
        assert_abs_diff_eq!(v.0, Vector4::new(1.25, 0.75, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(b, b.transpose());
        assert!(matches!(
            boost_matrix(&Vector3::new(0.6, 0.8, 0.0)),
            Err(Error::Superluminal(_))
        ));
    }

    #[test]
    fn tiny_boost_uses_series() {
        let beta = Vector3::new(1e-9, -2e-9, 0.5e-9);
        let b = boost_matrix(&beta).unwrap();
        let u = FourVector::new(1.0, 0.3, -0.2, 0.9);
        let v = FourVector::new(-0.4, 1.1, 0.5, 0.2);
        assert_abs_diff_eq!(
            u.transformed(&b).dot(&v.transformed(&b)),
            u.dot(&v),
            epsilon = 1e-14
        );
    }

    #[test]
    fn spin_tensor_examples() {
        let w = FourVector::new(0.0, 1.0, 0.0, 0.0);
        let p = FourVector::new(0.0, 0.0, 1.0, 0.0);
        let j = spin_tensor(&w, &p);
        assert_eq!(j.0[(1, 2)], 2.0);
        assert_eq!(j.0[(2, 1)], -2.0);
        assert_eq!(j.0.abs().sum(), 4.0);
        let (k, jv) = decompose_j(&j).unwrap();
        assert_eq!(k, Vector3::zeros());
        assert_eq!(jv, Vector3::new(0.0, 0.0, 2.0));
        assert_eq!(spin_tensor(&w, &w.scaled(3.0)).0, Matrix4::zeros());
    }

    #[test]
    fn compose_inverts_decompose() {
        let k = Vector3::new(0.1, -0.4, 2.0);
        let j = Vector3::new(-1.0, 0.3, 0.7);
        let (k2, j2) = decompose_j(&SpinTensor::compose(&k, &j)).unwrap();
        assert_eq!((k, j), (k2, j2));
        let mut bad = SpinTensor::compose(&k, &j);
        bad.0[(0, 1)] += 1.0;
        assert!(decompose_j(&bad).is_err());
    }

    #[test]
    fn t3_rest_frame_and_linear_response() {
        let (a3, a4, m): (f64, f64, f64) = (0.5, 2.0, 1.7);
        let w = FourVector::new(0.0, a4.sqrt(), 0.0, 0.0);
        let p = FourVector::new(0.0, 0.0, a3.sqrt(), 0.0);
        let pm = FourVector::new(m, 0.0, 0.0, 0.0);
        for r in t3_constraints(&w, &p, &pm, a3, a4).unwrap() {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
        }
        let eps = 1e-3;
        let shifted = FourVector::new(eps, a4.sqrt(), 0.0, 0.0);
        let r = t3_constraints(&shifted, &p, &pm, a3, a4).unwrap();
        assert_abs_diff_eq!(r[3], -m * eps, epsilon = 1e-15);
        let spacelike = FourVector::new(1.0, 2.0, 0.0, 0.0);
        assert!(matches!(
            t3_constraints(&w, &p, &spacelike, a3, a4),
            Err(Error::NotTimelike(_))
        ));
    }

    #[test]
    fn t4_rest_frame_and_null_omega() {
        let w = FourVector::new(0.0, 2.0, 0.0, 0.0);
        let p = FourVector::new(0.0, 0.0, 3f64.sqrt() / 4.0, 0.0);
        let pm = FourVector::new(1.0, 0.0, 0.0, 0.0);
        for r in t4_constraints(&w, &p, &pm, 0.75).unwrap() {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
        }
        let null = FourVector::new(1.0, 1.0, 0.0, 0.0);
        assert!(matches!(
            t4_constraints(&null, &p, &pm, 0.75),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn casimir_and_frenkel_trivial_cases() {
        let zero = SpinTensor(Matrix4::zeros());
        assert_eq!(casimir(&zero), 0.0);
        let pm = FourVector::new(2.0, 0.1, 0.2, 0.3);
        assert_eq!(frenkel_residual(&zero, &pm), FourVector::zero());
    }

    #[test]
    fn ellipsoid_rest_frame_is_sphere() {
        let pm = FourVector::new(1.0, 0.0, 0.0, 0.0);
        let j = Vector3::new(1.0, 1.0, 1.0);
        assert_abs_diff_eq!(
            base_ellipsoid_residual(&j, &pm, 1.0).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        // j along 𝓟: residual = j² − 3ħ²
        let pm = FourVector::new(2.0, 0.0, 0.0, 1.5);
        let j = Vector3::new(0.0, 0.0, 2.0);
        assert_abs_diff_eq!(
            base_ellipsoid_residual(&j, &pm, 1.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn bmt_rest_frame() {
        let w = FourVector::new(0.0, 0.3, 1.0, -0.2);
        let p = FourVector::new(0.0, -0.5, 0.4, 0.9);
        let pm = FourVector::new(1.3, 0.0, 0.0, 0.0);
        let s = bmt_vector(&w, &p, &pm).unwrap();
        let (_, j) = decompose_j(&spin_tensor(&w, &p)).unwrap();
        assert_abs_diff_eq!(s.time(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.spatial(), j / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            bmt_vector(&w, &w, &pm).unwrap().0,
            FourVector::zero().0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn levi_civita_parity() {
        assert_eq!(levi_civita([0, 1, 2, 3]), 1.0);
        assert_eq!(levi_civita([1, 0, 2, 3]), -1.0);
        assert_eq!(levi_civita([1, 2, 3, 0]), -1.0);
        assert_eq!(levi_civita([0, 0, 2, 3]), 0.0);
    }

    #[test]
    fn tetrad_rest_frame_is_identity_like() {
        let (a3, a4) = default_t3_targets(1.0);
        let w = FourVector::new(0.0, a4.sqrt(), 0.0, 0.0);
        let p = FourVector::new(0.0, 0.0, a3.sqrt(), 0.0);
        let pm = FourVector::new(1.0, 0.0, 0.0, 0.0);
        let t = tetrad(&pm, &w, &p, a3, a4).unwrap();
        assert_abs_diff_eq!(t.matrix, Matrix4::identity(), epsilon = 1e-15);
        let off = FourVector::new(0.1, a4.sqrt(), 0.0, 0.0);
        assert!(matches!(
            tetrad(&pm, &off, &p, a3, a4),
            Err(Error::OffSurface { .. })
        ));
    }

    #[test]
    fn t4_action_examples() {
        let w = Vector3::new(1.0, 2.0, 0.0);
        let p = Vector3::new(-2.0, 1.0, 0.5);
        let (w1, p1) = t4_structure_action(&w, &p, 1.0, 0.0).unwrap();
        assert_eq!((w1, p1), (w, p));
        let (w2, p2) = t4_structure_action(&w, &p, 2.0, 0.0).unwrap();
        assert_eq!((w2, p2), (w * 2.0, p / 2.0));
        assert_abs_diff_eq!(w2.cross(&p2), w.cross(&p), epsilon = 1e-15);
        assert!(t4_structure_action(&w, &p, 0.0, 0.0).is_err());
        assert!(t4_structure_action(&Vector3::zeros(), &p, 1.0, 0.0).is_err());
    }
}
