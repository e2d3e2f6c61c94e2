//! Random points on the constraint surfaces and random boosts.
//!
//! Surface points are exact by construction: `ω` is uniform on the sphere of
//! radius `a`, `π` is uniform on the circle of radius `b` orthogonal to `ω`.

use nalgebra::{Vector3, Vector4};
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::lorentz::FourVector;
use crate::phasespace::PhasePoint;

pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::from(UnitSphere.sample(rng))
}

/// Unit vector orthogonal to `n` (which must be a unit vector).
pub fn orthogonal_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: &Vector3<f64>) -> Vector3<f64> {
    loop {
        let v = unit_vector(rng);
        let t = v - n * n.dot(&v);
        if let Some(u) = t.try_normalize(1e-6) {
            return u;
        }
    }
}

/// `(ω, π)` with `ω² = a²`, `π² = b²`, `ωπ = 0`.
pub fn so3_surface_point<R: Rng + ?Sized>(
    rng: &mut R,
    a: f64,
    b: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let w = unit_vector(rng);
    let p = orthogonal_unit_vector(rng, &w);
    (w * a, p * b)
}

/// `(ω, π)` with `ωπ = 0`, `π² ω² = a`, and `|ω|` drawn from `[0.5, 2]`.
pub fn t4_surface_point<R: Rng + ?Sized>(rng: &mut R, a: f64) -> (Vector3<f64>, Vector3<f64>) {
    let r: f64 = rng.random_range(0.5..2.0);
    so3_surface_point(rng, r, a.sqrt() / r)
}

/// Generic `(ω, π)` with components uniform in `[−1, 1]`.
pub fn generic_pair<R: Rng + ?Sized>(rng: &mut R) -> (Vector3<f64>, Vector3<f64>) {
    let mut v = || Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    (v(), v())
}

pub fn generic_four_vector<R: Rng + ?Sized>(rng: &mut R) -> FourVector {
    FourVector(Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0)))
}

/// Particle phase point on the spin surface; `x`, `p` uniform in `[−1, 1]`,
/// `φ` uniform in `[0.5, 2]`, `π_φ = 0`.
pub fn phase_point<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> PhasePoint {
    let (omega, pi) = so3_surface_point(rng, a, b);
    let mut v = || Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let (x, p) = (v(), v());
    PhasePoint::new(x, p, omega, pi, rng.random_range(0.5..2.0), 0.0)
}

/// Velocity with uniform direction and `|β|` uniform in `[0, max_beta]`.
pub fn beta_vector<R: Rng + ?Sized>(rng: &mut R, max_beta: f64) -> Vector3<f64> {
    unit_vector(rng) * rng.random_range(0.0..=max_beta)
}

/// Rest-frame covariant point: `ω = (0, ω)`, `π = (0, π)` on the spatial surface.
pub fn rest_frame_point<R: Rng + ?Sized>(
    rng: &mut R,
    omega_len: f64,
    pi_len: f64,
) -> (FourVector, FourVector) {
    let (w, p) = so3_surface_point(rng, omega_len, pi_len);
    (
        FourVector::from_parts(0.0, w),
        FourVector::from_parts(0.0, p),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn surface_points_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (w, p) = so3_surface_point(&mut rng, 1.3, 0.4);
            assert!((w.norm_squared() - 1.69).abs() < 1e-14);
            assert!((p.norm_squared() - 0.16).abs() < 1e-14);
            assert!(w.dot(&p).abs() < 1e-14);
            let (w, p) = t4_surface_point(&mut rng, 0.75);
            assert!((w.norm_squared() * p.norm_squared() - 0.75).abs() < 1e-13);
        }
    }
}
