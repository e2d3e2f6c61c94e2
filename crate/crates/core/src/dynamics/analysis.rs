//! Frequency extraction from sampled trajectories.

use nalgebra::{DMatrix, DVector, Vector3};

use super::{velocity, FieldConfig, ModelParams};
use crate::error::{Error, Result};
use crate::phasespace::PhasePoint;

/// `y(t) ≈ amplitude · cos(omega·t + phase) + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineFit {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub offset: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

impl CosineFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t + self.phase).cos() + self.offset
    }
}

/// Slope of the unwrapped angle `atan2(y, x)` by linear least squares.
pub fn phase_rate(times: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
    if times.len() < 3 || x.len() != times.len() || y.len() != times.len() {
        return Err(Error::InvalidArgument(
            "phase_rate needs at least 3 samples of equal length".into(),
        ));
    }
    let mut angles = Vec::with_capacity(times.len());
    let mut prev = f64::NAN;
    let mut turns = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let a = yi.atan2(xi);
        if prev.is_finite() {
            let d = a - prev;
            if d > std::f64::consts::PI {
                turns -= 1.0;
            } else if d < -std::f64::consts::PI {
                turns += 1.0;
            }
        }
        prev = a;
        angles.push(a + turns * std::f64::consts::TAU);
    }
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let am = angles.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, a) in times.iter().zip(&angles) {
        num += (t - tm) * (a - am);
        den += (t - tm) * (t - tm);
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("degenerate sample times".into()));
    }
    Ok(num / den)
}

/// Gauss–Newton fit of a shifted cosine, started from `omega_guess`.
pub fn fit_cosine(times: &[f64], values: &[f64], omega_guess: f64) -> Result<CosineFit> {
    let n = times.len();
    if n < 5 || values.len() != n {
        return Err(Error::InvalidArgument(
            "cosine fit needs at least 5 samples of equal length".into(),
        ));
    }
    // linear solve for (α, β, d) in α cos ωt + β sin ωt + d at the guess
    let linear = |omega: f64| -> Option<(f64, f64, f64)> {
        let m = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => (omega * times[i]).cos(),
            1 => (omega * times[i]).sin(),
            _ => 1.0,
        });
        let v = DVector::from_column_slice(values);
        let sol = m.svd(true, true).solve(&v, 1e-14).ok()?;
        Some((sol[0], sol[1], sol[2]))
    };
    let (al, be, d) =
        linear(omega_guess).ok_or_else(|| Error::Singular("cosine fit initialisation".into()))?;
    // α cos + β sin = C cos(ωt + δ) with C cos δ = α, C sin δ = −β
    let mut p = DVector::from_vec(vec![al.hypot(be), omega_guess, (-be).atan2(al), d]);
    let residual = |p: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(n, |i, _| {
            p[0] * (p[1] * times[i] + p[2]).cos() + p[3] - values[i]
        })
    };
    let mut r = residual(&p);
    let mut cost = r.norm_squared();
    let mut iterations = 0;
    for it in 1..=100 {
        iterations = it;
        let jac = DMatrix::from_fn(n, 4, |i, j| {
            let arg = p[1] * times[i] + p[2];
            match j {
                0 => arg.cos(),
                1 => -p[0] * times[i] * arg.sin(),
                2 => -p[0] * arg.sin(),
                _ => 1.0,
            }
        });
        let step = jac
            .svd(true, true)
            .solve(&r, 1e-15)
            .map_err(|e| Error::Singular(format!("cosine fit: {e}")))?;
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-6 {
            let trial = &p - &step * lambda;
            let rt = residual(&trial);
            let ct = rt.norm_squared();
            if ct <= cost {
                p = trial;
                r = rt;
                let rel = (cost - ct) / cost.max(f64::MIN_POSITIVE);
                cost = ct;
                improved = rel > 1e-14 && step.amax() * lambda > 1e-15 * p.amax();
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let (mut amplitude, mut phase) = (p[0], p[2]);
    if amplitude < 0.0 {
        amplitude = -amplitude;
        phase += std::f64::consts::PI;
    }
    let phase = phase.rem_euclid(std::f64::consts::TAU);
    Ok(CosineFit {
        amplitude,
        omega: p[1],
        phase,
        offset: p[3],
        rms_residual: (cost / n as f64).sqrt(),
        iterations,
    })
}

/// Rotation of a sampled vector about `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationFit {
    /// Signed angular velocity (right-handed about `axis`).
    pub omega: f64,
    /// Cosine fit of the first in-plane component.
    pub component: CosineFit,
}

/// Fits the rotation of `vectors` about `axis`: a phase-rate estimate for
/// the sign, refined by a cosine fit of the first in-plane component.
pub fn fit_rotation(
    times: &[f64],
    vectors: &[Vector3<f64>],
    axis: &Vector3<f64>,
) -> Result<RotationFit> {
    let n = axis
        .try_normalize(1e-300)
        .ok_or_else(|| Error::InvalidArgument("rotation axis is zero".into()))?;
    let helper = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    let u: Vec<f64> = vectors.iter().map(|v| v.dot(&e1)).collect();
    let w: Vec<f64> = vectors.iter().map(|v| v.dot(&e2)).collect();
    let rate = phase_rate(times, &u, &w)?;
    let component = fit_cosine(times, &u, rate.abs())?;
    Ok(RotationFit {
        omega: component.omega.abs().copysign(rate),
        component,
    })
}

/// `x_c = x − (mc/(eB²)) B × v`.
pub fn guiding_center(z: &PhasePoint, params: &ModelParams, field: &FieldConfig) -> Vector3<f64> {
    let b = field.b(&z.x);
    let v = velocity(z, params, field);
    z.x - b.cross(&v) * (params.m * params.c / (params.e * b.norm_squared()))
}

/// `m c |v⊥| / (|e| B)`.
pub fn cyclotron_radius(z: &PhasePoint, params: &ModelParams, field: &FieldConfig) -> f64 {
    let b = field.b(&z.x);
    let bn = b.norm();
    let v = velocity(z, params, field);
    let v_perp = v - b * (b.dot(&v) / (bn * bn));
    params.m * params.c * v_perp.norm() / (params.e.abs() * bn)
}

/// `|e| B / (m c)`.
pub fn cyclotron_frequency(params: &ModelParams, b: f64) -> f64 {
    params.e.abs() * b / (params.m * params.c)
}

/// `|μ e| B / (m c)`.
pub fn larmor_frequency(params: &ModelParams, b: f64) -> f64 {
    params.spin_coupling().abs() * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_synthetic_cosine() {
        let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| 0.7 * (1.2345 * t + 0.4).cos() + 0.1)
            .collect();
        let fit = fit_cosine(&times, &values, 1.2).unwrap();
        assert!((fit.omega - 1.2345).abs() < 1e-12);
        assert!((fit.amplitude - 0.7).abs() < 1e-12);
        assert!((fit.phase - 0.4).abs() < 1e-10);
        assert!((fit.offset - 0.1).abs() < 1e-12);
        assert!((fit.eval(3.3) - values[66]).abs() < 1e-12);
    }

    #[test]
    fn phase_rate_unwraps() {
        let times: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
        let x: Vec<f64> = times.iter().map(|t| (-3.0 * t).cos()).collect();
        let y: Vec<f64> = times.iter().map(|t| (-3.0 * t).sin()).collect();
        assert!((phase_rate(&times, &x, &y).unwrap() + 3.0).abs() < 1e-10);
    }

    #[test]
    fn rotation_sign() {
        let times: Vec<f64> = (0..300).map(|i| i as f64 * 0.03).collect();
        let v: Vec<_> = times
            .iter()
            .map(|t| Vector3::new((2.0 * t).cos(), (2.0 * t).sin(), 0.3))
            .collect();
        let fit = fit_rotation(&times, &v, &Vector3::z()).unwrap();
        assert!((fit.omega - 2.0).abs() < 1e-10);
        let fit = fit_rotation(&times, &v, &-Vector3::z()).unwrap();
        assert!((fit.omega + 2.0).abs() < 1e-10);
    }

    #[test]
    fn cyclotron_helpers() {
        let params = ModelParams {
            m: 2.0,
            e: 0.5,
            ..ModelParams::default()
        };
        let field = FieldConfig::uniform(Vector3::new(0.0, 0.0, 4.0));
        let mut z = PhasePoint::spin_only(Vector3::x(), Vector3::y());
        z.x = Vector3::new(1.0, 0.0, 0.0);
        z.p = field.a(&z.x) * params.charge_coupling() + Vector3::new(0.0, 0.6, 0.2);
        assert!((cyclotron_radius(&z, &params, &field) - 2.0 * 0.3 / 2.0).abs() < 1e-14);
        assert!((cyclotron_frequency(&params, 4.0) - 1.0).abs() < 1e-15);
        let xc = guiding_center(&z, &params, &field);
        assert!((xc - z.x).norm() > 0.0);
        assert!(((xc - z.x).xy().norm() - cyclotron_radius(&z, &params, &field)).abs() < 1e-14);
    }
}
