use nalgebra::{DMatrix, DVector, Matrix4, Vector3};
use proptest::prelude::*;

use spinfiber::bundle_so3::{normalize_to_surface, rotation_matrix, so2_action, spin_map};
use spinfiber::constraints::{classify, ConstraintClass, ConstraintSet, DiracBracket};
use spinfiber::dynamics::{eom, FieldConfig, GaugeFunction, ModelParams, PotentialSign};
use spinfiber::lorentz::{
    base_ellipsoid_residual, bmt_vector, boost_matrix, casimir, decompose_j, frenkel_residual,
    j_from_spin, spin_from_j, spin_tensor, t3_constraints, t4_constraints, t4_structure_action,
    FourVector,
};
use spinfiber::phasespace::{
    layout, minkowski_layout, poisson_bracket, CanonicalStructure, Observable, PhasePoint, DIM,
    METRIC, MINKOWSKI_DIM,
};

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-range..range).prop_map(Vector3::from)
}

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

/// `(ω, π)` with `|ω| = a`, `|π| = b`, `ω ⊥ π`.
fn surface_pair(a: f64, b: f64) -> impl Strategy<Value = (Vector3<f64>, Vector3<f64>)> {
    (vec3(1.0), vec3(1.0)).prop_filter_map("degenerate pair", move |(w, p)| {
        if w.norm() < 0.1 || w.cross(&p).norm() < 0.1 * p.norm().max(0.1) {
            return None;
        }
        normalize_to_surface(&w, &p)
            .ok()
            .map(|(w, p)| (w * a, p * b))
    })
}

fn surface_point(a: f64, b: f64) -> impl Strategy<Value = Vec<f64>> {
    (surface_pair(a, b), vec3(1.0), vec3(1.0), 0.5..2.0f64).prop_map(|((w, p), x, mom, phi)| {
        PhasePoint::new(x, mom, w, p, phi, 0.0).to_coords().to_vec()
    })
}

/// `c·z + ½ zᵀ Q z` with analytic gradient.
fn quadratic(coeffs: &[f64], n: usize, name: &str) -> Observable {
    let c = DVector::from_column_slice(&coeffs[..n]);
    let q = DMatrix::from_column_slice(n, n, &coeffs[n..n + n * n]);
    let q = (&q + q.transpose()) * 0.5;
    let (c2, q2) = (c.clone(), q.clone());
    Observable::new(name, move |z| {
        let zv = DVector::from_column_slice(z);
        c.dot(&zv) + 0.5 * zv.dot(&(&q * &zv))
    })
    .with_gradient(move |z| {
        let zv = DVector::from_column_slice(z);
        (&c2 + &q2 * zv).as_slice().to_vec()
    })
}

fn quadratic_coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n + n * n)
}

fn pb(f: &Observable, g: &Observable, z: &[f64], s: &CanonicalStructure) -> f64 {
    poisson_bracket(f, g, z, s).unwrap()
}

/// `z ↦ {f, g}(z)` as an observable with a numerical gradient.
fn bracket_observable(f: &Observable, g: &Observable, s: &CanonicalStructure) -> Observable {
    let (f, g, s) = (f.clone(), g.clone(), s.clone());
    Observable::new("bracket", move |z| poisson_bracket(&f, &g, z, &s).unwrap())
}

fn levi(i: usize, j: usize, k: usize) -> f64 {
    ((j as f64 - i as f64) * (k as f64 - i as f64) * (k as f64 - j as f64)) / 2.0
}

fn rest_frame(w: &Vector3<f64>, p: &Vector3<f64>) -> (FourVector, FourVector) {
    (
        FourVector::from_parts(0.0, *w),
        FourVector::from_parts(0.0, *p),
    )
}

fn boost(beta: &Vector3<f64>) -> Matrix4<f64> {
    boost_matrix(beta).unwrap()
}

fn beta_strategy() -> impl Strategy<Value = Vector3<f64>> {
    (vec3(1.0), 0.0..0.95f64).prop_filter_map("zero direction", |(d, b)| {
        d.try_normalize(1e-3).map(|u| u * b)
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_antisymmetric(cf in quadratic_coeffs(DIM), cg in quadratic_coeffs(DIM), z in coords(DIM)) {
        let s = CanonicalStructure::pauli();
        let (f, g) = (quadratic(&cf, DIM, "f"), quadratic(&cg, DIM, "g"));
        prop_assert!((pb(&f, &g, &z, &s) + pb(&g, &f, &z, &s)).abs() < 1e-10);
    }

    #[test]
    fn bracket_obeys_leibniz(
        cf in quadratic_coeffs(DIM),
        cg in quadratic_coeffs(DIM),
        ch in quadratic_coeffs(DIM),
        z in coords(DIM),
    ) {
        let s = CanonicalStructure::pauli();
        let f = quadratic(&cf, DIM, "f");
        let g = quadratic(&cg, DIM, "g");
        let h = quadratic(&ch, DIM, "h");
        let gh = g.product(&h).without_gradient();
        let lhs = pb(&f, &gh, &z, &s);
        let rhs = pb(&f, &g, &z, &s) * h.eval(&z) + g.eval(&z) * pb(&f, &h, &z, &s);
        prop_assert!(rel_err(lhs, rhs) < 1e-8, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn bracket_obeys_jacobi(
        cf in quadratic_coeffs(DIM),
        cg in quadratic_coeffs(DIM),
        ch in quadratic_coeffs(DIM),
        z in coords(DIM),
    ) {
        let s = CanonicalStructure::pauli();
        let f = quadratic(&cf, DIM, "f");
        let g = quadratic(&cg, DIM, "g");
        let h = quadratic(&ch, DIM, "h");
        let total = pb(&f, &bracket_observable(&g, &h, &s), &z, &s)
            + pb(&g, &bracket_observable(&h, &f, &s), &z, &s)
            + pb(&h, &bracket_observable(&f, &g, &s), &z, &s);
        prop_assert!(total.abs() < 1e-6, "jacobi sum {total}");
    }

    #[test]
    fn spin_closes_into_so3(z in coords(DIM)) {
        let s = CanonicalStructure::pauli();
        let spins: Vec<_> = (0..3).map(Observable::spin).collect();
        let sv: Vec<f64> = spins.iter().map(|o| o.eval(&z)).collect();
        for i in 0..3 {
            for j in 0..3 {
                let expected: f64 = (0..3).map(|k| levi(i, j, k) * sv[k]).sum();
                prop_assert!((pb(&spins[i], &spins[j], &z, &s) - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn spin_tensor_closes_into_so13(z in coords(MINKOWSKI_DIM)) {
        let s = CanonicalStructure::minkowski_spin();
        let eta = |a: usize, b: usize| if a == b { METRIC[a] } else { 0.0 };
        let o = minkowski_layout::OMEGA;
        let p = minkowski_layout::PI;
        let j = |a: usize, b: usize| 2.0 * (z[o + a] * z[p + b] - z[o + b] * z[p + a]);
        for (mu, nu, al, be) in index_quadruples(4) {
            let lhs = pb(&Observable::spin_tensor(mu, nu), &Observable::spin_tensor(al, be), &z, &s);
            // {ω^μ π^ν, ω^α π^β} = η^{μβ} ω^α π^ν − η^{να} ω^μ π^β, antisymmetrized
            let rhs = 2.0
                * (eta(mu, al) * j(nu, be) + eta(nu, be) * j(mu, al)
                    - eta(mu, be) * j(nu, al)
                    - eta(nu, al) * j(mu, be));
            prop_assert!((lhs - rhs).abs() < 1e-10, "({mu}{nu},{al}{be}) {lhs} vs {rhs}");
        }
    }

    #[test]
    fn dirac_bracket_of_position_and_momentum_is_canonical(z in surface_point(1.0, 0.75f64.sqrt())) {
        let s = CanonicalStructure::pauli();
        let second = ConstraintSet::pauli_second_class(1.0);
        let d = DiracBracket::new(&second, &z, &s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((d.bracket(&Observable::x(i), &Observable::p(j)).unwrap() - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dirac_bracket_of_pi_components(z in surface_point(1.3, 0.6)) {
        let s = CanonicalStructure::pauli();
        let second = ConstraintSet::pauli_second_class(1.3);
        let d = DiracBracket::new(&second, &z, &s).unwrap();
        let w = Vector3::from_fn(|i, _| z[layout::OMEGA + i]);
        let p = Vector3::from_fn(|i, _| z[layout::PI + i]);
        for i in 0..3 {
            for j in 0..3 {
                let expected = -(w[i] * p[j] - w[j] * p[i]) / w.norm_squared();
                let got = d.bracket(&Observable::pi(i), &Observable::pi(j)).unwrap();
                prop_assert!((got - expected).abs() < 1e-10, "({i},{j}) {got} vs {expected}");
            }
        }
    }

    #[test]
    fn dirac_bracket_annihilates_constraints(cf in quadratic_coeffs(DIM), z in surface_point(1.0, 0.75f64.sqrt())) {
        let s = CanonicalStructure::pauli();
        let second = ConstraintSet::pauli_second_class(1.0);
        let d = DiracBracket::new(&second, &z, &s).unwrap();
        let f = quadratic(&cf, DIM, "f");
        for c in second.constraints() {
            prop_assert!(d.bracket(&c.as_observable(), &f).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn classification_is_the_same_at_every_surface_point(z in surface_point(1.0, 0.75f64.sqrt())) {
        let c = classify(&ConstraintSet::pauli_model(1.0, 0.75f64.sqrt()), &z, &CanonicalStructure::pauli(), 1e-8).unwrap();
        prop_assert_eq!(c.class_of("omega_sq"), Some(ConstraintClass::SecondClass));
        prop_assert_eq!(c.class_of("omega_pi"), Some(ConstraintClass::SecondClass));
        prop_assert_eq!(c.class_of("pi_phi"), Some(ConstraintClass::FirstClass));
        prop_assert_eq!(c.class_of("pi_sq_combined"), Some(ConstraintClass::FirstClass));
        prop_assert_eq!(c.second_class_rank, 2);
    }

    #[test]
    fn structure_rotation_preserves_surface_and_spin(
        (w, p) in surface_pair(1.0, 1.0),
        beta in -10.0..10.0f64,
    ) {
        let (w2, p2) = so2_action(&w, &p, beta);
        prop_assert!((w2.norm_squared() - 1.0).abs() < 1e-12);
        prop_assert!((p2.norm_squared() - 1.0).abs() < 1e-12);
        prop_assert!(w2.dot(&p2).abs() < 1e-12);
        prop_assert!((spin_map(&w2, &p2) - spin_map(&w, &p)).norm() < 1e-12);
    }

    #[test]
    fn spin_length_is_fixed_by_the_surface((w, p) in surface_pair(1.4, 0.7)) {
        prop_assert!((spin_map(&w, &p).norm_squared() - 1.96 * 0.49).abs() < 1e-12);
    }

    #[test]
    fn infinitesimal_structure_rotation((w, p) in surface_pair(1.0, 1.0)) {
        let eps = 1e-6;
        let (w2, p2) = so2_action(&w, &p, eps);
        prop_assert!(((w2 - w) / eps - p).norm() < 1e-5);
        prop_assert!(((p2 - p) / eps + w).norm() < 1e-5);
    }

    #[test]
    fn rotation_matrix_is_proper((w, p) in surface_pair(1.0, 1.0)) {
        let r = rotation_matrix(&w, &p).unwrap();
        prop_assert!(r.orthogonality_error() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        let (w2, p2) = r.basis();
        prop_assert_eq!((w2, p2), (w, p));
    }

    #[test]
    fn boosts_preserve_t3_residuals_casimir_and_frenkel(
        (w, p) in surface_pair(2.0, 1.5),
        beta in beta_strategy(),
        mass in 0.5..3.0f64,
    ) {
        let (a3, a4) = (2.25, 4.0);
        let (w4, p4) = rest_frame(&w, &p);
        let mom = FourVector::new(mass, 0.0, 0.0, 0.0);
        let l = boost(&beta);
        let (wb, pb4, mb) = (w4.transformed(&l), p4.transformed(&l), mom.transformed(&l));
        let res = t3_constraints(&wb, &pb4, &mb, a3, a4).unwrap();
        let scale = 1.0 / (1.0 - beta.norm_squared());
        prop_assert!(res.iter().all(|r| r.abs() < 1e-11 * scale * 10.0), "{res:?}");
        let j0 = spin_tensor(&w4, &p4);
        let jb = spin_tensor(&wb, &pb4);
        prop_assert!(rel_err(casimir(&jb), casimir(&j0)) < 1e-10);
        prop_assert!((casimir(&j0) - 8.0 * a3 * a4).abs() < 1e-10);
        prop_assert!((jb.0 - j0.transformed(&l).0).amax() < 1e-9 * scale);
        prop_assert!(frenkel_residual(&jb, &mb).0.amax() < 1e-9 * scale);
    }

    #[test]
    fn boosts_preserve_t4_residuals(
        (w, p) in surface_pair(1.2, 0.5),
        beta in beta_strategy(),
    ) {
        let a = (1.2f64 * 0.5).powi(2);
        let (w4, p4) = rest_frame(&w, &p);
        let mom = FourVector::new(1.0, 0.0, 0.0, 0.0);
        let l = boost(&beta);
        let res = t4_constraints(&w4.transformed(&l), &p4.transformed(&l), &mom.transformed(&l), a).unwrap();
        let scale = 1.0 / (1.0 - beta.norm_squared());
        prop_assert!(res.iter().all(|r| r.abs() < 1e-10 * scale), "{res:?}");
    }

    #[test]
    fn casimir_identity_for_any_four_vectors(w in coords(4), p in coords(4)) {
        let w = FourVector::new(w[0], w[1], w[2], w[3]);
        let p = FourVector::new(p[0], p[1], p[2], p[3]);
        let ww: f64 = (0..4).map(|m| METRIC[m] * w.0[m] * w.0[m]).sum();
        let pp: f64 = (0..4).map(|m| METRIC[m] * p.0[m] * p.0[m]).sum();
        let wp: f64 = (0..4).map(|m| METRIC[m] * w.0[m] * p.0[m]).sum();
        prop_assert!((casimir(&spin_tensor(&w, &p)) - 8.0 * (ww * pp - wp * wp)).abs() < 1e-12);
    }

    #[test]
    fn boost_part_follows_from_frenkel_condition(
        (w, p) in surface_pair(2.0, 1.5),
        beta in beta_strategy(),
    ) {
        let (a3, a4) = (2.25, 4.0);
        let (w4, p4) = rest_frame(&w, &p);
        let l = boost(&beta);
        let mom = FourVector::new(1.0, 0.0, 0.0, 0.0).transformed(&l);
        let (k, j) = decompose_j(&spin_tensor(&w4.transformed(&l), &p4.transformed(&l))).unwrap();
        let expected = j.cross(&mom.spatial()) / mom.time();
        let scale = 1.0 / (1.0 - beta.norm_squared());
        prop_assert!((k - expected).norm() < 1e-10 * scale);
        prop_assert!((j.norm_squared() - k.norm_squared() - 4.0 * a3 * a4).abs() < 1e-9 * scale);
        // with 4a₃a₄ = 3ħ², j lies on the base ellipsoid
        let hbar = (4.0 * a3 * a4 / 3.0f64).sqrt();
        prop_assert!(base_ellipsoid_residual(&j, &mom, hbar).unwrap().abs() < 1e-9 * scale);
    }

    #[test]
    fn bmt_vector_is_transverse_and_round_trips(
        (w, p) in surface_pair(1.0, 1.0),
        beta in beta_strategy(),
        jv in vec3(2.0),
    ) {
        let (w4, p4) = rest_frame(&w, &p);
        let l = boost(&beta);
        let mom = FourVector::new(1.0, 0.0, 0.0, 0.0).transformed(&l);
        let s = bmt_vector(&w4.transformed(&l), &p4.transformed(&l), &mom).unwrap();
        let scale = 1.0 / (1.0 - beta.norm_squared());
        prop_assert!(s.dot(&mom).abs() < 1e-10 * scale);
        let back = j_from_spin(&spin_from_j(&jv, &mom).unwrap(), &mom).unwrap();
        prop_assert!((back - jv).norm() < 1e-10 * scale);
    }

    #[test]
    fn t4_scaling_composes_multiplicatively(
        (w, p) in surface_pair(1.0, 0.8),
        k1 in 0.2..5.0f64,
        k2 in 0.2..5.0f64,
    ) {
        let (w1, p1) = t4_structure_action(&w, &p, k1, 0.0).unwrap();
        let (w12, p12) = t4_structure_action(&w1, &p1, k2, 0.0).unwrap();
        let (wd, pd) = t4_structure_action(&w, &p, k1 * k2, 0.0).unwrap();
        prop_assert!((w12 - wd).norm() < 1e-12 * (1.0 + wd.norm()));
        prop_assert!((p12 - pd).norm() < 1e-12 * (1.0 + pd.norm()));
        prop_assert!((p12.norm_squared() * w12.norm_squared() - 0.64).abs() < 1e-10);
    }

    #[test]
    fn t4_rotation_composes_additively(
        (w, p) in surface_pair(1.3, 0.4),
        b1 in -3.0..3.0f64,
        b2 in -3.0..3.0f64,
    ) {
        let (w1, p1) = t4_structure_action(&w, &p, 1.0, b1).unwrap();
        let (w12, p12) = t4_structure_action(&w1, &p1, 1.0, b2).unwrap();
        let (wd, pd) = t4_structure_action(&w, &p, 1.0, b1 + b2).unwrap();
        prop_assert!((w12 - wd).norm() < 1e-12);
        prop_assert!((p12 - pd).norm() < 1e-12);
        prop_assert!(w12.dot(&p12).abs() < 1e-12);
    }

    #[test]
    fn composed_spin_precesses_about_the_field(
        z in surface_point(1.0, 0.75f64.sqrt()),
        b in vec3(2.0),
        reversed in any::<bool>(),
        phi in 0.3..3.0f64,
    ) {
        let params = ModelParams {
            mu: 1.7,
            convention: if reversed { PotentialSign::Reversed } else { PotentialSign::Hamiltonian },
            ..ModelParams::default()
        };
        let field = FieldConfig::uniform(b);
        let point = PhasePoint::from_coords(&z);
        let d = eom(&point, 0.0, &params, &field, &GaugeFunction::constant(phi)).unwrap();
        let sdot = d.omega.cross(&point.pi) + point.omega.cross(&d.pi);
        let expected = point.spin().cross(&b) * params.spin_coupling();
        prop_assert!((sdot - expected).norm() < 1e-12 * (1.0 + expected.norm()), "{sdot} vs {expected}");
        prop_assert_eq!(d.pi_phi, 0.0);
    }

    #[test]
    fn analytic_gradients_match_finite_differences(
        cf in quadratic_coeffs(DIM),
        cg in quadratic_coeffs(DIM),
        z in surface_point(1.0, 0.75f64.sqrt()),
        zm in coords(MINKOWSKI_DIM),
        mu in 0..4usize,
        nu in 0..4usize,
    ) {
        let f = quadratic(&cf, DIM, "f");
        let g = quadratic(&cg, DIM, "g");
        let t4 = ConstraintSet::t4_surface(0.75);
        let mut particle: Vec<Observable> = vec![
            f.product(&g),
            f.sum(&g.scaled(-2.5)),
            Observable::spin(0),
            Observable::omega_dot_pi(),
        ];
        particle.extend(t4.constraints().iter().map(|c| c.as_observable()));
        for o in &particle {
            prop_assert!(o.has_analytic_gradient());
            let exact = o.gradient(&z).unwrap();
            let fd = o.clone().without_gradient().gradient(&z).unwrap();
            for (a, b) in exact.iter().zip(&fd) {
                prop_assert!(rel_err(*a, *b) < 1e-6, "{}: {a} vs {b}", o.name());
            }
        }
        let j = Observable::spin_tensor(mu, nu);
        let exact = j.gradient(&zm).unwrap();
        let fd = j.clone().without_gradient().gradient(&zm).unwrap();
        for (a, b) in exact.iter().zip(&fd) {
            prop_assert!(rel_err(*a, *b) < 1e-6);
        }
    }
}

/// All index quadruples `(μ, ν, α, β)` with `μ < ν`, `α < β`.
fn index_quadruples(n: usize) -> Vec<(usize, usize, usize, usize)> {
    let pairs: Vec<_> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    pairs
        .iter()
        .flat_map(|&(m, v)| pairs.iter().map(move |&(a, b)| (m, v, a, b)))
        .collect()
}
