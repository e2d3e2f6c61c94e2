//! Randomized verification suites.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Scenario, ScenarioConfig};
use super::output::{Check, Summary};
use crate::bundle_so3::{
    gauge_matrix_transform, rotation_matrix, so2_action, spin_map, GaugeMatrix, ProjectionMap,
};
use crate::constraints::{classify, ConstraintClass, ConstraintSet, DiracBracket, CLASSIFY_TOL};
use crate::error::Result;
use crate::lorentz::{
    base_ellipsoid_residual, boost_matrix, casimir, decompose_j, default_t3_targets,
    default_t4_target, frenkel_residual, j_from_spin, spin_from_j, spin_tensor, t3_constraints,
    t4_constraints, t4_structure_action, tetrad, FourVector,
};
use crate::phasespace::{poisson_bracket, CanonicalStructure, Observable, DIM};
use crate::sampling;

fn max_abs<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(v.abs()))
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

/// `c·z + ½ zᵀ Q z + sin(d·z)` with random coefficients.
fn random_observable(rng: &mut ChaCha8Rng, index: usize) -> Observable {
    let c = DVector::from_fn(DIM, |_, _| rng.random_range(-1.0..1.0));
    let d = DVector::from_fn(DIM, |_, _| rng.random_range(-1.0..1.0));
    let q = DMatrix::from_fn(DIM, DIM, |_, _| rng.random_range(-1.0..1.0));
    let q = (&q + q.transpose()) * 0.5;
    let (c2, d2, q2) = (c.clone(), d.clone(), q.clone());
    Observable::new(format!("random{index}"), move |z| {
        let z = DVector::from_column_slice(z);
        c.dot(&z) + 0.5 * z.dot(&(&q * &z)) + d.dot(&z).sin()
    })
    .with_gradient(move |z| {
        let z = DVector::from_column_slice(z);
        (&c2 + &q2 * &z + &d2 * d2.dot(&z).cos())
            .iter()
            .copied()
            .collect()
    })
}

/// Rank and `σ_r / σ_{r+1}` of a Jacobian, missing trailing values as zero.
fn rank_gap(sv: &[f64], width: usize) -> (usize, f64) {
    let max = sv.first().copied().unwrap_or(0.0);
    let mut all = sv.to_vec();
    all.resize(width.max(sv.len()), 0.0);
    let rank = all.iter().filter(|&&s| s > 1e-8 * max).count();
    if rank == 0 {
        return (0, 0.0);
    }
    let next = all
        .get(rank)
        .copied()
        .unwrap_or(0.0)
        .max(f64::EPSILON * max);
    (rank, all[rank - 1] / next)
}

fn verify_so3(cfg: &ScenarioConfig, summary: &mut Summary) -> Result<()> {
    let params = cfg.model_params();
    let th = &cfg.thresholds;
    let n = cfg.sampling.points;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let structure = CanonicalStructure::pauli();
    let second = ConstraintSet::pauli_second_class(params.a);
    let spins: Vec<_> = (0..3).map(Observable::spin).collect();
    let observables: Vec<_> = (0..20).map(|i| random_observable(&mut rng, i)).collect();
    let s2_target = match cfg.params.b {
        None => 0.75 * params.hbar * params.hbar,
        Some(_) => (params.a * params.b).powi(2),
    };

    let (mut pb, mut db, mut ann, mut wp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut rot, mut det, mut inv, mut norm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..n {
        let zp = sampling::phase_point(&mut rng, params.a, params.b);
        let z = zp.to_coords();
        let dirac = DiracBracket::new(&second, &z, &structure)?;
        let sv: Vec<f64> = spins.iter().map(|o| o.eval(&z)).collect();
        for i in 0..3 {
            for j in 0..3 {
                let expected: f64 = (0..3).map(|m| eps3(i, j, m) * sv[m]).sum();
                pb = pb
                    .max((poisson_bracket(&spins[i], &spins[j], &z, &structure)? - expected).abs());
                db = db.max((dirac.bracket(&spins[i], &spins[j])? - expected).abs());
                let delta = if i == j { 1.0 } else { 0.0 };
                let w = zp.omega;
                let expected = delta - w[i] * w[j] / w.norm_squared();
                wp = wp.max(
                    (dirac.bracket(&Observable::omega(i), &Observable::pi(j))? - expected).abs(),
                );
            }
        }
        if k < 50 {
            for c in second.constraints() {
                let phi = c.as_observable();
                for a in &observables {
                    ann = ann.max(dirac.bracket(&phi, a)?.abs());
                }
            }
        }
        norm = norm.max((zp.spin().norm_squared() - s2_target).abs());

        let (w, p) = sampling::so3_surface_point(&mut rng, 1.0, 1.0);
        let r = rotation_matrix(&w, &p)?;
        rot = rot.max(r.orthogonality_error());
        det = det.max((r.determinant() - 1.0).abs());
        let beta = rng.random_range(-PI..PI);
        let (w2, p2) = so2_action(&w, &p, beta);
        inv = inv.max((spin_map(&w2, &p2) - spin_map(&w, &p)).amax());
    }

    let mut ident = 0.0f64;
    let (mut rank_ok, mut gap) = (0usize, f64::INFINITY);
    for _ in 0..n {
        let (w, p) = sampling::generic_pair(&mut rng);
        let s2 = spin_map(&w, &p).norm_squared();
        ident = ident.max((s2 - (w.norm_squared() * p.norm_squared() - w.dot(&p).powi(2))).abs());
        let (r, g) = rank_gap(&ProjectionMap::So3 { omega: w, pi: p }.singular_values(), 6);
        rank_ok += usize::from(r == 3);
        gap = gap.min(g);
    }

    let mut law = 0.0f64;
    for _ in 0..n {
        let g = GaugeMatrix::from_matrix(
            Matrix2::from_fn(|_, _| rng.random_range(-2.0..2.0)),
            rng.random_range(-1.0..1.0),
        );
        let b: [f64; 4] = std::array::from_fn(|i| {
            if i % 2 == 0 {
                rng.random_range(-PI..PI)
            } else {
                rng.random_range(-2.0..2.0)
            }
        });
        let twice = gauge_matrix_transform(&gauge_matrix_transform(&g, b[0], b[1]), b[2], b[3]);
        let once = gauge_matrix_transform(&g, b[0] + b[2], b[1] + b[3]);
        law = law.max((twice.g - once.g).amax());
    }

    let model = ConstraintSet::pauli_model(params.a, params.b);
    let z = sampling::phase_point(&mut rng, params.a, params.b).to_coords();
    let classes = classify(&model, &z, &structure, CLASSIFY_TOL)?;
    summary.metric("points", n as f64);
    summary.metric("spin_squared_target", s2_target);
    summary.metric(
        "first_class_count",
        classes.count(ConstraintClass::FirstClass) as f64,
    );
    summary.metric(
        "second_class_count",
        classes.count(ConstraintClass::SecondClass) as f64,
    );
    summary.metric("so3_rank_min_gap", gap);

    summary.check(Check::below("poisson_spin_algebra", pb, th.bracket));
    summary.check(Check::below("dirac_spin_algebra", db, th.bracket));
    summary.check(Check::below("dirac_annihilation", ann, th.dirac));
    summary.check(Check::below("dirac_omega_pi", wp, th.dirac));
    summary.check(Check::below("rotation_orthogonality", rot, th.rotation));
    summary.check(Check::below("rotation_determinant", det, th.rotation));
    summary.check(Check::below("so2_invariance", inv, th.fiber_invariance));
    summary.check(Check::below("casimir_identity", ident, th.casimir_identity));
    summary.check(Check::below("spin_normalization", norm, th.normalization));
    summary.check(Check::below(
        "so3_rank3_failures",
        (n - rank_ok) as f64,
        0.5,
    ));
    summary.check(Check::above("so3_rank_gap", gap, th.rank_gap));
    summary.check(Check::below("gauge_group_law", law, th.group_law));
    let second_ok = classes.count(ConstraintClass::SecondClass) == 2
        && classes.class_of("pi_phi") == Some(ConstraintClass::FirstClass);
    summary.check(Check::below(
        "pauli_classification_mismatch",
        f64::from(u8::from(!second_ok)),
        0.5,
    ));
    Ok(())
}

fn boosts(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Matrix4<f64>>> {
    let mut out = Vec::with_capacity(cfg.sampling.boosts + 1);
    if let Some(beta) = cfg.sampling.beta {
        out.push(boost_matrix(&Vector3::from(beta))?);
    }
    for _ in 0..cfg.sampling.boosts {
        out.push(boost_matrix(&sampling::beta_vector(
            rng,
            cfg.sampling.max_beta,
        ))?);
    }
    Ok(out)
}

fn verify_lorentz(cfg: &ScenarioConfig, summary: &mut Summary) -> Result<()> {
    let th = &cfg.thresholds;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hbar = cfg.params.hbar;
    let (a3, a4) = default_t3_targets(hbar);
    let rest = FourVector::new(1.0, 0.0, 0.0, 0.0);
    let mut worst = [0.0f64; 8];
    for lambda in boosts(cfg, &mut rng)? {
        let p = rest.transformed(&lambda);
        let (w, q) = sampling::rest_frame_point(&mut rng, a4.sqrt(), a3.sqrt());
        let (w, q) = (w.transformed(&lambda), q.transformed(&lambda));
        worst[0] = worst[0].max(max_abs(t3_constraints(&w, &q, &p, a3, a4)?));
        let j = spin_tensor(&w, &q);
        worst[1] = worst[1].max((casimir(&j) - 8.0 * a3 * a4).abs());
        worst[2] = worst[2].max(frenkel_residual(&j, &p).0.norm());
        let (_, jv) = decompose_j(&j)?;
        worst[3] = worst[3].max(base_ellipsoid_residual(&jv, &p, hbar)?.abs());
        worst[4] = worst[4].max(tetrad(&p, &w, &q, a3, a4)?.pseudo_orthogonality_error());
        let jr = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let s = spin_from_j(&jr, &p)?;
        worst[5] = worst[5].max((j_from_spin(&s, &p)? - jr).amax());
        worst[6] = worst[6].max(s.dot(&p).abs());
    }
    let (mut rank_ok, mut gap) = (0usize, f64::INFINITY);
    let n = cfg.sampling.points;
    for _ in 0..n {
        let map = ProjectionMap::So13 {
            omega: sampling::generic_four_vector(&mut rng),
            pi: sampling::generic_four_vector(&mut rng),
        };
        let (r, g) = rank_gap(&map.singular_values(), 8);
        rank_ok += usize::from(r == 5);
        gap = gap.min(g);
    }
    summary.metric(
        "boosts",
        (cfg.sampling.boosts + usize::from(cfg.sampling.beta.is_some())) as f64,
    );
    summary.metric("max_casimir_deviation", worst[1]);
    summary.metric("casimir_target", 8.0 * a3 * a4);
    summary.metric("so13_rank_min_gap", gap);
    summary.check(Check::below("t3_residual", worst[0], th.covariant));
    summary.check(Check::below("casimir", worst[1], th.covariant));
    summary.check(Check::below("frenkel", worst[2], th.covariant));
    summary.check(Check::below("ellipsoid", worst[3], th.covariant));
    summary.check(Check::below("tetrad", worst[4], th.tetrad));
    summary.check(Check::below("bmt_round_trip", worst[5], th.bmt_round_trip));
    summary.check(Check::below(
        "bmt_orthogonality",
        worst[6],
        th.bmt_orthogonality,
    ));
    summary.check(Check::below(
        "so13_rank5_failures",
        (n - rank_ok) as f64,
        0.5,
    ));
    summary.check(Check::above("so13_rank_gap", gap, th.rank_gap));
    Ok(())
}

fn verify_t4(cfg: &ScenarioConfig, summary: &mut Summary) -> Result<()> {
    let th = &cfg.thresholds;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hbar = cfg.params.hbar;
    let a = default_t4_target(hbar);
    let rest = FourVector::new(1.0, 0.0, 0.0, 0.0);
    let (mut res, mut ell, mut cas, mut act, mut spin) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for lambda in boosts(cfg, &mut rng)? {
        let p = rest.transformed(&lambda);
        let (w, q) = sampling::t4_surface_point(&mut rng, a);
        let wb = FourVector::from_parts(0.0, w).transformed(&lambda);
        let qb = FourVector::from_parts(0.0, q).transformed(&lambda);
        res = res.max(max_abs(t4_constraints(&wb, &qb, &p, a)?));
        let j = spin_tensor(&wb, &qb);
        cas = cas.max((casimir(&j) - 8.0 * a).abs());
        let (_, jv) = decompose_j(&j)?;
        ell = ell.max(base_ellipsoid_residual(&jv, &p, hbar)?.abs());

        let k = rng.random_range(0.5..2.0);
        let beta = rng.random_range(-PI..PI);
        let (w2, q2) = t4_structure_action(&w, &q, k, beta)?;
        let rp = FourVector::new(1.0, 0.0, 0.0, 0.0);
        act = act.max(max_abs(t4_constraints(
            &FourVector::from_parts(0.0, w2),
            &FourVector::from_parts(0.0, q2),
            &rp,
            a,
        )?));
        spin = spin.max((spin_map(&w2, &q2) - spin_map(&w, &q)).amax());
    }
    summary.metric("t4_target", a);
    summary.check(Check::below("t4_residual", res, th.covariant));
    summary.check(Check::below("casimir", cas, th.covariant));
    summary.check(Check::below("ellipsoid", ell, th.covariant));
    summary.check(Check::below("structure_action_residual", act, th.covariant));
    summary.check(Check::below("structure_action_spin", spin, th.covariant));
    Ok(())
}

pub fn verify(cfg: &ScenarioConfig) -> Result<Summary> {
    let mut summary = Summary::new(cfg.scenario.name(), cfg.seed);
    match cfg.scenario {
        Scenario::VerifySo3 => verify_so3(cfg, &mut summary)?,
        Scenario::VerifyLorentz => verify_lorentz(cfg, &mut summary)?,
        Scenario::VerifyT4 => verify_t4(cfg, &mut summary)?,
        other => {
            return Err(crate::Error::InvalidArgument(format!(
                "{other} is not a verification suite"
            )))
        }
    }
    Ok(summary)
}
