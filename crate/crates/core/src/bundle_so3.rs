//! The non-relativistic spin fiber bundle T³ ≅ SO(3) over the spin sphere.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::lorentz::FourVector;

/// Surface-membership tolerance for the normalized surface.
pub const SURFACE_TOL: f64 = 1e-9;

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-8;

/// `S = ω × π`.
pub fn spin_map(omega: &Vector3<f64>, pi: &Vector3<f64>) -> Vector3<f64> {
    omega.cross(pi)
}

/// Residuals of the normalized surface `(ω² − 1, π² − 1, ωπ)`.
pub fn normalized_residuals(omega: &Vector3<f64>, pi: &Vector3<f64>) -> [f64; 3] {
    [
        omega.norm_squared() - 1.0,
        pi.norm_squared() - 1.0,
        omega.dot(pi),
    ]
}

/// Gram–Schmidt onto the normalized surface. Fails if `ω = 0` or `π ∥ ω`.
pub fn normalize_to_surface(
    omega: &Vector3<f64>,
    pi: &Vector3<f64>,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let w = omega
        .try_normalize(f64::MIN_POSITIVE)
        .ok_or_else(|| Error::InvalidArgument("ω must be nonzero".into()))?;
    let p = (pi - w * w.dot(pi))
        .try_normalize(1e-12 * pi.norm().max(f64::MIN_POSITIVE))
        .ok_or_else(|| Error::InvalidArgument("π must not be parallel to ω".into()))?;
    Ok((w, p))
}

/// Which projection map to differentiate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionMap {
    /// `(ω, π) ↦ ω × π` on `ℝ⁶`.
    So3 {
        omega: Vector3<f64>,
        pi: Vector3<f64>,
    },
    /// `(ω^μ, π^ν) ↦ J^{μν}` on `ℝ⁸`, six independent components.
    So13 { omega: FourVector, pi: FourVector },
}

impl ProjectionMap {
    /// Jacobian of the map, rows are image components, columns `(ω, π)`.
    pub fn jacobian(&self) -> DMatrix<f64> {
        match self {
            Self::So3 { omega, pi } => {
                let mut jac = DMatrix::zeros(3, 6);
                for i in 0..3 {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    jac[(i, j)] = pi[k];
                    jac[(i, k)] = -pi[j];
                    jac[(i, 3 + k)] = omega[j];
                    jac[(i, 3 + j)] = -omega[k];
                }
                jac
            }
            Self::So13 { omega, pi } => {
                let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
                let mut jac = DMatrix::zeros(6, 8);
                for (row, &(m, n)) in pairs.iter().enumerate() {
                    jac[(row, m)] += 2.0 * pi.0[n];
                    jac[(row, n)] -= 2.0 * pi.0[m];
                    jac[(row, 4 + n)] += 2.0 * omega.0[m];
                    jac[(row, 4 + m)] -= 2.0 * omega.0[n];
                }
                jac
            }
        }
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.jacobian().singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }
}

/// Numerical rank with threshold `1e-8 × σ_max`.
pub fn jacobian_rank(map: &ProjectionMap) -> usize {
    let sv = map.singular_values();
    match sv.first() {
        Some(&max) if max > 0.0 => sv.iter().filter(|&&s| s > RANK_TOL * max).count(),
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub Matrix3<f64>);

impl RotationMatrix {
    /// `max |R Rᵀ − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0 * self.0.transpose() - Matrix3::identity()).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// Recovers `(ω, π)` from the first two rows.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        (self.0.row(0).transpose(), self.0.row(1).transpose())
    }
}

/// `R` with rows `(ω, π, ω × π)` for a point of the normalized surface.
pub fn rotation_matrix(omega: &Vector3<f64>, pi: &Vector3<f64>) -> Result<RotationMatrix> {
    let residuals = normalized_residuals(omega, pi);
    if residuals.iter().any(|r| !(r.abs() <= SURFACE_TOL)) {
        return Err(Error::OffSurface {
            residuals: residuals.to_vec(),
        });
    }
    let s = spin_map(omega, pi);
    Ok(RotationMatrix(Matrix3::from_rows(&[
        omega.transpose(),
        pi.transpose(),
        s.transpose(),
    ])))
}

/// Structure-group rotation by `β` in the `(ω, π)` plane.
pub fn so2_action(
    omega: &Vector3<f64>,
    pi: &Vector3<f64>,
    beta: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let (s, c) = beta.sin_cos();
    (omega * c + pi * s, -omega * s + pi * c)
}

/// `K(β) = (cos β, sin β; −sin β, cos β)`.
pub fn structure_rotation(beta: f64) -> Matrix2<f64> {
    let (s, c) = beta.sin_cos();
    Matrix2::new(c, s, -s, c)
}

/// The symmetric matrix of auxiliary variables
/// `g = (1/φ, λ₃/2; λ₃/2, λ₁/2)` together with `λ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeMatrix {
    pub g: Matrix2<f64>,
    pub lambda2: f64,
}

impl GaugeMatrix {
    pub fn from_multipliers(phi: f64, lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        Self {
            g: Matrix2::new(1.0 / phi, 0.5 * lambda3, 0.5 * lambda3, 0.5 * lambda1),
            lambda2,
        }
    }

    /// Symmetrizes `g`.
    pub fn from_matrix(g: Matrix2<f64>, lambda2: f64) -> Self {
        Self {
            g: (g + g.transpose()) * 0.5,
            lambda2,
        }
    }

    pub fn phi(&self) -> f64 {
        1.0 / self.g[(0, 0)]
    }

    pub fn lambda1(&self) -> f64 {
        2.0 * self.g[(1, 1)]
    }

    pub fn lambda3(&self) -> f64 {
        2.0 * self.g[(0, 1)]
    }
}

/// `g′ = K g Kᵀ + ½ β̇ I`. `λ₂` is carried through unchanged; its transform
/// needs the time derivative of `φ′`.
pub fn gauge_matrix_transform(g: &GaugeMatrix, beta: f64, beta_dot: f64) -> GaugeMatrix {
    let k = structure_rotation(beta);
    GaugeMatrix {
        g: k * g.g * k.transpose() + Matrix2::identity() * (0.5 * beta_dot),
        lambda2: g.lambda2,
    }
}

/// Chart `(S₁, S₂, ω₃)`: base coordinates plus the fiber coordinate.
/// Requires the normalized surface and `ω₃ ≠ 0`.
pub fn local_coords(omega: &Vector3<f64>, pi: &Vector3<f64>) -> Result<(f64, f64, f64)> {
    let residuals = normalized_residuals(omega, pi);
    if residuals.iter().any(|r| !(r.abs() <= SURFACE_TOL)) {
        return Err(Error::OffSurface {
            residuals: residuals.to_vec(),
        });
    }
    if omega.z == 0.0 {
        return Err(Error::ChartDomain("chart requires ω₃ ≠ 0".into()));
    }
    let s = spin_map(omega, pi);
    Ok((s.x, s.y, omega.z))
}
