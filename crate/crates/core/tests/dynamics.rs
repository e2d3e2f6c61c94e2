use std::f64::consts::TAU;
use std::thread;

use nalgebra::{Matrix3, Rotation3, Vector3};

use spinfiber::dynamics::{
    cyclotron_frequency, cyclotron_radius, guiding_center, integrate, larmor_frequency, phase_rate,
    second_order_residual, FieldConfig, GaugeFunction, IntegrateOptions, ModelParams,
    PotentialSign, Trajectory,
};
use spinfiber::PhasePoint;

fn spin_state(params: &ModelParams, x: Vector3<f64>, p: Vector3<f64>) -> PhasePoint {
    let r = Rotation3::from_euler_angles(0.7, -0.4, 1.1);
    PhasePoint::new(
        x,
        p,
        r * Vector3::x() * params.a,
        r * Vector3::y() * params.b,
        1.0,
        0.0,
    )
}

fn run(
    z: &PhasePoint,
    t_end: f64,
    params: &ModelParams,
    field: &FieldConfig,
    gauge: &GaugeFunction,
) -> Trajectory {
    integrate(
        z,
        (0.0, t_end),
        params,
        field,
        gauge,
        &IntegrateOptions::default(),
    )
    .unwrap()
}

fn stern_gerlach_field() -> FieldConfig {
    FieldConfig::linear_gradient(
        Vector3::new(0.0, 0.0, 1.0),
        Matrix3::from_diagonal(&Vector3::new(-0.05, -0.05, 0.1)),
    )
    .unwrap()
}

#[test]
fn cyclotron_orbit_radius_and_frequency() {
    let params = ModelParams {
        mu: 0.0,
        m: 1.7,
        e: 0.9,
        ..ModelParams::default()
    };
    let bz = 1.3;
    let field = FieldConfig::uniform(Vector3::new(0.0, 0.0, bz));
    let z = spin_state(
        &params,
        Vector3::new(0.3, -0.2, 0.0),
        Vector3::new(0.8, 0.1, 0.25),
    );
    let omega_c = cyclotron_frequency(&params, bz);
    let traj = run(
        &z,
        10.0 * TAU / omega_c,
        &params,
        &field,
        &GaugeFunction::constant(1.0),
    );

    let radius = cyclotron_radius(&z, &params, &field);
    let center = guiding_center(&z, &params, &field);
    let mut worst = 0.0f64;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for s in &traj.states {
        let d = s.x - center;
        worst = worst.max((d.xy().norm() - radius).abs() / radius);
        xs.push(d.x);
        ys.push(d.y);
    }
    assert!(worst < 1e-6, "radius relative error {worst:e}");
    let rate = phase_rate(&traj.times, &xs, &ys).unwrap();
    // positive charge circulates clockwise about +z
    assert!(
        ((-rate - omega_c) / omega_c).abs() < 1e-6,
        "rate {rate}, expected {omega_c}"
    );
}

#[test]
fn free_particle_moves_in_a_straight_line() {
    let params = ModelParams::default();
    let field = FieldConfig::zero();
    let p = Vector3::new(0.4, -0.3, 0.2);
    let z = spin_state(&params, Vector3::new(1.0, 2.0, 3.0), p);
    let traj = run(&z, 20.0, &params, &field, &GaugeFunction::constant(1.0));
    for (t, s) in traj.times.iter().zip(&traj.states) {
        assert!((s.x - (z.x + p * (t / params.m))).norm() < 1e-10);
        assert!((s.spin() - z.spin()).norm() < 1e-10);
    }
    let res = second_order_residual(&traj, &params, &field);
    assert!(res.iter().all(|r| *r < 1e-10));
}

#[test]
fn gradient_field_deflects_spin() {
    let params = ModelParams::default();
    let field = stern_gerlach_field();
    let z = spin_state(&params, Vector3::zeros(), Vector3::new(0.5, 0.0, 0.0));
    let traj = run(&z, 20.0, &params, &field, &GaugeFunction::constant(1.0));
    let res = second_order_residual(&traj, &params, &field);
    let worst = res.iter().cloned().fold(0.0, f64::max);
    assert!(worst < 1e-7, "second-order residual {worst:e}");

    let mut neutral = params;
    neutral.mu = 0.0;
    let reference = run(&z, 20.0, &neutral, &field, &GaugeFunction::constant(1.0));
    let dx = traj.states.last().unwrap().x - reference.states.last().unwrap().x;
    assert!(dx.norm() > 1e-3, "deflection {dx}");
}

#[test]
fn energy_is_conserved_over_ten_periods() {
    let params = ModelParams::default();
    let field = FieldConfig::uniform(Vector3::new(0.3, -0.2, 1.1));
    let z = spin_state(
        &params,
        Vector3::new(0.2, -0.1, 0.0),
        Vector3::new(0.6, 0.3, 0.05),
    );
    let period = TAU / larmor_frequency(&params, field.b(&Vector3::zeros()).norm());
    let traj = run(
        &z,
        10.0 * period,
        &params,
        &field,
        &GaugeFunction::constant(1.0),
    );
    let h0 = traj.diagnostics[0].hamiltonian;
    let drift = traj
        .diagnostics
        .iter()
        .map(|d| (d.hamiltonian - h0).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-8, "energy drift {drift:e}");
}

#[test]
fn deflection_vanishes_linearly_with_hbar() {
    let field = stern_gerlach_field();
    let deflection = |hbar: f64| {
        let params = ModelParams::with_hbar(1.0, 1.0, 1.0, 1.0, 1.0, hbar);
        let mut neutral = params;
        neutral.mu = 0.0;
        let z = spin_state(&params, Vector3::zeros(), Vector3::new(0.5, 0.0, 0.0));
        let g = GaugeFunction::constant(1.0);
        let a = run(&z, 10.0, &params, &field, &g);
        let b = run(&z, 10.0, &neutral, &field, &g);
        (a.states.last().unwrap().x - b.states.last().unwrap().x).norm()
    };
    let (d2, d3) = (deflection(1e-2), deflection(1e-3));
    let ratio = d2 / d3;
    assert!(d3 < 1e-2, "deflection at small hbar {d3}");
    assert!((ratio - 10.0).abs() < 0.1, "deflection ratio {ratio}");
}

#[test]
fn pi_phi_stays_zero_and_spin_length_is_kept() {
    let params = ModelParams::default();
    let field = stern_gerlach_field();
    let z = spin_state(&params, Vector3::zeros(), Vector3::new(0.5, 0.2, 0.0));
    let traj = run(
        &z,
        40.0,
        &params,
        &field,
        &GaugeFunction::from_expr("1 + 0.5*sin(t)").unwrap(),
    );
    let s2 = params.a * params.a * params.b * params.b;
    for (s, d) in traj.states.iter().zip(&traj.diagnostics) {
        assert_eq!(s.pi_phi, 0.0);
        assert!((d.spin.norm_squared() - s2).abs() < 1e-9);
    }
    assert!(traj.max_constraint_drift() < 1e-9);
}

fn compare_observables(a: &Trajectory, b: &Trajectory, tol_spin: f64, tol_x: f64) {
    for (t, s) in a.times.iter().zip(&a.states) {
        let other = b.interpolate(*t).unwrap();
        assert!(
            (s.spin() - other.spin()).norm() < tol_spin,
            "spin differs at t = {t}"
        );
        assert!(
            (s.x - other.x).norm() < tol_x,
            "position differs at t = {t}"
        );
    }
}

#[test]
fn physical_motion_does_not_depend_on_the_gauge_function() {
    let params = ModelParams::default();
    let field = stern_gerlach_field();
    let z = spin_state(&params, Vector3::zeros(), Vector3::new(0.5, 0.2, 0.0));
    let opts = IntegrateOptions {
        max_step: Some(0.02),
        ..IntegrateOptions::default()
    };
    let go = |g: &GaugeFunction| integrate(&z, (0.0, 10.0), &params, &field, g, &opts).unwrap();
    let a = go(&GaugeFunction::constant(1.0));
    let b = go(&GaugeFunction::from_expr("2 - cos(3*t)").unwrap());
    compare_observables(&a, &b, 1e-6, 1e-6);
    let end = a.times.last().unwrap();
    let moved = (a.states.last().unwrap().omega - b.interpolate(*end).unwrap().omega).norm();
    assert!(
        moved > 1e-3,
        "fiber coordinate should depend on the gauge, moved {moved}"
    );
}

#[test]
fn potential_sign_conventions_agree_on_observables() {
    let mut params = ModelParams::default();
    let field = stern_gerlach_field();
    let z = spin_state(&params, Vector3::zeros(), Vector3::new(0.5, 0.2, 0.0));
    let opts = IntegrateOptions {
        max_step: Some(0.02),
        ..IntegrateOptions::default()
    };
    let g = GaugeFunction::constant(1.0);
    let a = integrate(&z, (0.0, 10.0), &params, &field, &g, &opts).unwrap();
    params.convention = PotentialSign::Reversed;
    let b = integrate(&z, (0.0, 10.0), &params, &field, &g, &opts).unwrap();
    compare_observables(&a, &b, 1e-6, 1e-6);
}

#[test]
fn concurrent_runs_match_the_serial_run() {
    let params = ModelParams::default();
    let field = stern_gerlach_field();
    let z = spin_state(&params, Vector3::zeros(), Vector3::new(0.5, 0.2, 0.0));
    let serial = run(&z, 10.0, &params, &field, &GaugeFunction::constant(1.0));
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let field = field.clone();
            thread::spawn(move || run(&z, 10.0, &params, &field, &GaugeFunction::constant(1.0)))
        })
        .collect();
    for h in handles {
        let t = h.join().unwrap();
        assert_eq!(t.times, serial.times);
        assert_eq!(t.states, serial.states);
    }
}
