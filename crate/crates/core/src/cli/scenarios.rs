//! Simulation scenarios.

use std::f64::consts::TAU;

use nalgebra::Vector3;

use super::config::{Scenario, ScenarioConfig};
use super::output::{Check, Summary};
use crate::dynamics::{
    cyclotron_frequency, fit_cosine, fit_rotation, guiding_center, integrate, larmor_frequency,
    second_order_residual, FieldConfig, GaugeFunction, ModelParams, Trajectory,
};
use crate::error::Result;

/// Trajectories produced by a scenario, keyed by a short label.
pub struct SimulationOutput {
    pub summary: Summary,
    pub trajectories: Vec<(String, Trajectory)>,
}

struct Setup {
    params: ModelParams,
    field: FieldConfig,
    gauge: GaugeFunction,
    t_span: (f64, f64),
}

fn setup(cfg: &ScenarioConfig) -> Result<Setup> {
    let params = cfg.model_params();
    let field = match &cfg.field {
        Some(f) => f.to_field()?,
        None => FieldConfig::zero(),
    };
    let gauge = GaugeFunction::from_expr(&cfg.gauge.phi)
        .map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
    let t_span = match cfg.t_span {
        Some([a, b]) => (a, b),
        None => {
            let b = cfg.field.as_ref().map_or(0.0, |f| f.strength());
            let omega = larmor_frequency(&params, b);
            let period = if omega > 0.0 { TAU / omega } else { TAU };
            (0.0, cfg.periods * period)
        }
    };
    Ok(Setup {
        params,
        field,
        gauge,
        t_span,
    })
}

fn run_one(
    cfg: &ScenarioConfig,
    s: &Setup,
    params: &ModelParams,
    gauge: &GaugeFunction,
) -> Result<Trajectory> {
    let z0 = cfg.initial.to_point(params, gauge.phi(s.t_span.0));
    integrate(
        &z0,
        s.t_span,
        params,
        &s.field,
        gauge,
        &cfg.solver.to_options(),
    )
}

fn drift_check(cfg: &ScenarioConfig, summary: &mut Summary, traj: &Trajectory) {
    let drift = traj.max_constraint_drift();
    let (name, tol) = if cfg.solver.project_every == 1 {
        ("constraint_drift_projected", cfg.thresholds.drift_projected)
    } else {
        ("constraint_drift", cfg.thresholds.drift_unprojected)
    };
    summary.check(Check::below(name, drift, tol));
}

fn energy_drift(traj: &Trajectory) -> f64 {
    let h0 = traj.diagnostics[0].hamiltonian;
    traj.diagnostics
        .iter()
        .fold(0.0, |m, d| m.max((d.hamiltonian - h0).abs()))
}

fn spin_norm_drift(traj: &Trajectory) -> f64 {
    let s0 = traj.diagnostics[0].spin.norm_squared();
    traj.diagnostics
        .iter()
        .fold(0.0, |m, d| m.max((d.spin.norm_squared() - s0).abs()))
}

fn common_metrics(summary: &mut Summary, traj: &Trajectory, s: &Setup) {
    summary.metric("t_start", s.t_span.0);
    summary.metric("t_end", s.t_span.1);
    summary.metric("steps_accepted", traj.stats.accepted as f64);
    summary.metric("steps_rejected", traj.stats.rejected as f64);
    summary.metric("rhs_evaluations", traj.stats.evaluations as f64);
    summary.metric("projections", traj.stats.projections as f64);
    summary.metric("max_constraint_drift", traj.max_constraint_drift());
    summary.metric("max_energy_drift", energy_drift(traj));
    summary.metric("max_spin_norm_drift", spin_norm_drift(traj));
}

fn free_spin(cfg: &ScenarioConfig, summary: &mut Summary) -> Result<Vec<(String, Trajectory)>> {
    let s = setup(cfg)?;
    let traj = run_one(cfg, &s, &s.params, &s.gauge)?;
    common_metrics(summary, &traj, &s);
    let s0 = traj.diagnostics[0].spin;
    let spin_dev = traj
        .diagnostics
        .iter()
        .fold(0.0f64, |m, d| m.max((d.spin - s0).amax()));
    summary.check(Check::below(
        "spin_deviation",
        spin_dev,
        cfg.thresholds.spin_constant,
    ));
    summary.check(Check::below(
        "energy_drift",
        energy_drift(&traj),
        cfg.thresholds.energy,
    ));
    drift_check(cfg, summary, &traj);
    Ok(vec![("main".into(), traj)])
}

fn larmor(cfg: &ScenarioConfig, summary: &mut Summary) -> Result<Vec<(String, Trajectory)>> {
    let s = setup(cfg)?;
    let traj = run_one(cfg, &s, &s.params, &s.gauge)?;
    common_metrics(summary, &traj, &s);
    let field = cfg.field.as_ref().expect("validated");
    let (b, axis) = (field.strength(), field.direction());

    let expected = larmor_frequency(&s.params, b);
    let rot = fit_rotation(&traj.times, &traj.spins(), &axis)?;
    let helper = if axis.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = (helper - axis * axis.dot(&helper)).normalize();
    let s1: Vec<f64> = traj.diagnostics.iter().map(|d| d.spin.dot(&e1)).collect();
    let fit = fit_cosine(&traj.times, &s1, rot.omega.abs())?;
    summary.metric("larmor_expected", expected);
    summary.metric("larmor_fitted", fit.omega.abs());
    summary.metric("larmor_signed", rot.omega);
    summary.check(Check::below(
        "larmor_frequency_rel_error",
        (fit.omega.abs() - expected).abs() / expected,
        cfg.thresholds.frequency_rel,
    ));

    let z0 = &traj.states[0];
    let v0 = crate::dynamics::velocity(z0, &s.params, &s.field);
    let v_perp = (v0 - axis * axis.dot(&v0)).norm();
    if s.params.e != 0.0 && v_perp > 1e-8 {
        let expected = cyclotron_frequency(&s.params, b);
        let center = guiding_center(z0, &s.params, &s.field);
        let rel: Vec<Vector3<f64>> = traj.states.iter().map(|z| z.x - center).collect();
        let crot = fit_rotation(&traj.times, &rel, &axis)?;
        let x1: Vec<f64> = rel.iter().map(|r| r.dot(&e1)).collect();
        let cfit = fit_cosine(&traj.times, &x1, crot.omega.abs())?;
        summary.metric("cyclotron_expected", expected);
        summary.metric("cyclotron_fitted", cfit.omega.abs());
        summary.metric("cyclotron_radius_fitted", cfit.amplitude);
        summary.metric(
            "cyclotron_radius_expected",
            crate::dynamics::cyclotron_radius(z0, &s.params, &s.field),
        );
        summary.check(Check::below(
            "cyclotron_frequency_rel_error",
            (cfit.omega.abs() - expected).abs() / expected,
            cfg.thresholds.frequency_rel,
        ));
    }
    summary.check(Check::below(
        "energy_drift",
        energy_drift(&traj),
        cfg.thresholds.energy,
    ));
    summary.check(Check::below(
        "spin_norm_drift",
        spin_norm_drift(&traj),
        cfg.thresholds.spin_constant,
    ));
    drift_check(cfg, summary, &traj);
    Ok(vec![("main".into(), traj)])
}

fn stern_gerlach(cfg: &ScenarioConfig, summary: &mut Summary) -> Result<Vec<(String, Trajectory)>> {
    let s = setup(cfg)?;
    let traj = run_one(cfg, &s, &s.params, &s.gauge)?;
    common_metrics(summary, &traj, &s);
    let neutral = ModelParams {
        mu: 0.0,
        ..s.params
    };
    let reference = run_one(cfg, &s, &neutral, &s.gauge)?;
    let xf = traj.states.last().expect("non-empty").x;
    let xr = reference.states.last().expect("non-empty").x;
    let deflection = (xf - xr).norm();
    let residual = second_order_residual(&traj, &s.params, &s.field)
        .into_iter()
        .fold(0.0, f64::max);
    summary.metric("final_deflection", deflection);
    for i in 0..3 {
        summary.metric(&format!("final_deflection_{}", i + 1), xf[i] - xr[i]);
    }
    summary.check(Check::below(
        "second_order_residual",
        residual,
        cfg.thresholds.second_order,
    ));
    summary.check(Check::above(
        "deflection",
        deflection,
        cfg.thresholds.deflection_min,
    ));
    summary.check(Check::below(
        "spin_norm_drift",
        spin_norm_drift(&traj),
        cfg.thresholds.spin_constant,
    ));
    drift_check(cfg, summary, &traj);
    Ok(vec![("main".into(), traj), ("neutral".into(), reference)])
}

fn gauge_compare(cfg: &ScenarioConfig, summary: &mut Summary) -> Result<Vec<(String, Trajectory)>> {
    let s = setup(cfg)?;
    let alt_src = &cfg.gauge_alt.as_ref().expect("validated").phi;
    let alt = GaugeFunction::from_expr(alt_src)
        .map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
    let a = run_one(cfg, &s, &s.params, &s.gauge)?;
    let b = run_one(cfg, &s, &s.params, &alt)?;
    common_metrics(summary, &a, &s);
    let (mut ds, mut dx, mut dw) = (0.0f64, 0.0f64, 0.0f64);
    for (t, za) in a.times.iter().zip(&a.states) {
        let zb = b.interpolate(*t)?;
        ds = ds.max((za.spin() - zb.spin()).amax());
        dx = dx.max((za.x - zb.x).amax());
        dw = dw.max((za.omega - zb.omega).amax());
    }
    summary.metric("sup_spin_difference", ds);
    summary.metric("sup_position_difference", dx);
    summary.metric("sup_omega_difference", dw);
    summary.check(Check::below(
        "spin_gauge_difference",
        ds,
        cfg.thresholds.gauge_observable,
    ));
    summary.check(Check::below(
        "position_gauge_difference",
        dx,
        cfg.thresholds.gauge_observable,
    ));
    summary.check(Check::above(
        "omega_gauge_motion",
        dw,
        cfg.thresholds.gauge_motion_min,
    ));
    drift_check(cfg, summary, &a);
    drift_check(cfg, summary, &b);
    Ok(vec![("main".into(), a), ("alt".into(), b)])
}

pub fn simulate(cfg: &ScenarioConfig) -> Result<SimulationOutput> {
    let mut summary = Summary::new(cfg.scenario.name(), cfg.seed);
    let trajectories = match cfg.scenario {
        Scenario::FreeSpin => free_spin(cfg, &mut summary)?,
        Scenario::Larmor => larmor(cfg, &mut summary)?,
        Scenario::SternGerlach => stern_gerlach(cfg, &mut summary)?,
        Scenario::GaugeCompare => gauge_compare(cfg, &mut summary)?,
        other => {
            return Err(crate::Error::InvalidArgument(format!(
                "{other} is not a simulation scenario"
            )))
        }
    };
    Ok(SimulationOutput {
        summary,
        trajectories,
    })
}
