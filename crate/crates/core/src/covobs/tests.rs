use std::sync::Arc;

use super::*;
use crate::groups::{cyclic_group, product_action_space, symmetric_group, GSpace, SectionPolicy};
use crate::linalg::{cx, diff, ket_bra, CMatrix, CVector, C64};
use crate::tol::rng_from_seed;

fn s3_square() -> (Arc<GSpace>, Arc<Representation>) {
    let g = Arc::new(symmetric_group(3).unwrap());
    let base = GSpace::natural(g).unwrap();
    let rep = Representation::permutation(&base);
    let x = product_action_space(&base, 2)
        .unwrap()
        .with_section_policy(&SectionPolicy::s3_example())
        .unwrap();
    (Arc::new(x), Arc::new(rep))
}

fn vec3(a: C64, b: C64, c: C64) -> CVector {
    CVector::from_vec(vec![a, b, c])
}

fn phi(i: usize, j: usize, sign: f64) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = CVector::zeros(3);
    v[i] = cx(s, 0.0);
    v[j] = cx(sign * s, 0.0);
    v
}

/// `a|1><1| + b|1><φ+| + b̄|φ+><1| + c|φ+><φ+| + d|φ-><φ-|` with `φ± = (|2> ± |3>)/√2`.
fn diagonal_seed(a: f64, b: C64, c: f64, d: f64) -> CMatrix {
    let e1 = linalg::basis_vector(3, 0);
    let p = phi(1, 2, 1.0);
    let m = phi(1, 2, -1.0);
    ket_bra(&e1, &e1) * cx(a, 0.0)
        + ket_bra(&e1, &p) * b
        + ket_bra(&p, &e1) * b.conj()
        + ket_bra(&p, &p) * cx(c, 0.0)
        + ket_bra(&m, &m) * cx(d, 0.0)
}

fn off_diagonal_vector(alpha: f64) -> CVector {
    let t = std::f64::consts::PI / 8.0;
    vec3(C64::from_polar(alpha, -t), C64::from_polar(alpha, t), cx(0.0, 0.0))
}

fn mat3(rows: [[C64; 3]; 3]) -> CMatrix {
    CMatrix::from_fn(3, 3, |i, j| rows[i][j])
}

#[test]
fn diagonal_orbit_effects_match_closed_forms() {
    let (x, rep) = s3_square();
    let (a, b, c, d) = (0.7, cx(0.2, 0.1), 0.4, 0.3);
    let k = diagonal_seed(a, b, c, d);
    let povm = build_from_seeds(x.clone(), rep, &[Seed::operator(0, k)], &Tolerances::default()).unwrap();
    let bp = b / std::f64::consts::SQRT_2;
    let (cp, dp) = (cx(c / 2.0, 0.0), cx(d / 2.0, 0.0));
    let a = cx(a, 0.0);
    let z = cx(0.0, 0.0);
    let one = cx(1.0, 0.0);
    let m11 = mat3([[a, bp, bp], [bp.conj(), cp, cp], [bp.conj(), cp, cp]])
        + mat3([[z, z, z], [z, one, -one], [z, -one, one]]) * dp;
    let m22 = mat3([[cp, bp.conj(), cp], [bp, a, bp], [cp, bp.conj(), cp]])
        + mat3([[one, z, -one], [z, z, z], [-one, z, one]]) * dp;
    let m33 = mat3([[cp, cp, bp.conj()], [cp, cp, bp.conj()], [bp, bp, a]])
        + mat3([[one, -one, z], [-one, one, z], [z, z, z]]) * dp;
    for (label, want) in [("(1,1)", m11), ("(2,2)", m22), ("(3,3)", m33)] {
        let got = povm.effect(x.find_label(label).unwrap());
        assert!(diff(got, &want) < 1e-12, "{label}");
    }
    assert!(povm.covariance_defect() < 1e-12);
}

#[test]
fn seed_must_commute_with_stabilizer() {
    let (x, rep) = s3_square();
    let e2 = linalg::basis_vector(3, 1);
    let err = build_from_seeds(x, rep, &[Seed::vector(0, &e2)], &Tolerances::default()).unwrap_err();
    assert!(matches!(err, CovError::SeedValidation { orbit: 0, .. }));
}

#[test]
fn negative_seed_is_rejected() {
    let (x, rep) = s3_square();
    let k = -linalg::eye(3);
    let err = build_from_seeds(x, rep, &[Seed::operator(1, k)], &Tolerances::default()).unwrap_err();
    assert!(matches!(err, CovError::SeedValidation { orbit: 1, .. }));
}

#[test]
fn empty_and_duplicate_seeds_are_rejected() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    assert!(matches!(build_from_seeds(x.clone(), rep.clone(), &[], &tol), Err(CovError::Invalid(_))));
    let k = linalg::eye(3);
    let seeds = [Seed::operator(1, k.clone()), Seed::operator(1, k)];
    assert!(matches!(build_from_seeds(x, rep, &seeds, &tol), Err(CovError::Invalid(_))));
}

#[test]
fn zero_seeds_give_zero_effects_and_cannot_be_normalized() {
    let (x, rep) = s3_square();
    let povm = build_from_seeds(x, rep, &[Seed::operator(0, linalg::zeros(3, 3))], &Tolerances::default()).unwrap();
    assert!(povm.effects().iter().all(|m| linalg::max_abs(m) == 0.0));
    assert!(matches!(normalize(&povm, &Tolerances::default()), Err(CovError::Degenerate(_))));
}

fn ic_povm(alpha: f64) -> CovariantPOVM {
    let (x, rep) = s3_square();
    let e1 = linalg::basis_vector(3, 0);
    let seeds = [Seed::vector(0, &e1), Seed::vector(1, &off_diagonal_vector(alpha))];
    let tol = Tolerances::default();
    normalize(&build_from_seeds(x, rep, &seeds, &tol).unwrap(), &tol).unwrap().povm
}

#[test]
fn rank_one_seeds_give_ic_extreme_povm() {
    let povm = ic_povm(1.0);
    let tol = Tolerances::default();
    assert!(povm.normalization_defect() < 1e-12);
    assert!(povm.covariance_defect() < 1e-12);
    let c = classify(&povm, &mut rng_from_seed(7), &tol).unwrap();
    assert!(c.is_rank1);
    assert!(!c.is_pvm);
    assert!(c.is_informationally_complete);
    assert!(c.is_extreme_covariant);
    assert!(c.is_extreme_global);
    assert_eq!(c.span_dimension, 9);
    assert_eq!(c.nonzero_effects, 9);
}

#[test]
fn diagonal_basis_measurement_is_a_pvm() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let k = diagonal_seed(1.0, cx(0.0, 0.0), 0.0, 0.0);
    let povm = build_from_seeds(x, rep, &[Seed::operator(0, k)], &tol).unwrap();
    let c = classify(&povm, &mut rng_from_seed(1), &tol).unwrap();
    assert!(c.is_pvm && c.is_rank1 && c.is_norm1);
    assert!(!c.is_informationally_complete);
    assert!(c.is_extreme_global);
    assert_eq!(c.zero_orbits, vec![1]);
    assert_eq!(c.nonzero_effects, 3);
}

#[test]
fn unnormalized_povm_is_not_classified() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let povm = build_from_seeds(x, rep, &[Seed::operator(1, linalg::eye(3))], &tol).unwrap();
    assert!(matches!(classify(&povm, &mut rng_from_seed(1), &tol), Err(CovError::Invalid(_))));
}

#[test]
fn vector_seeds_match_operator_seeds() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let povm = ic_povm(0.8);
    let vecs = seed_vectors(&povm, &mut rng_from_seed(3), &tol).unwrap();
    let seeds: Vec<Seed> = vecs
        .iter()
        .map(|ov| Seed {
            orbit: ov.orbit,
            form: SeedForm::Vectors {
                decomposition: ov.decomposition.clone(),
                groups: ov.groups.clone(),
            },
        })
        .collect();
    for ov in &vecs {
        assert!(ov.reconstruction_defect < 1e-10);
    }
    let rebuilt = build_from_seeds(x, rep, &seeds, &tol).unwrap();
    for (a, b) in rebuilt.effects().iter().zip(povm.effects()) {
        assert!(diff(a, b) < 1e-10);
    }
}

#[test]
fn normalization_preserves_covariance() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let k = diagonal_seed(0.7, cx(0.2, -0.1), 0.4, 0.3);
    let mut rng = rng_from_seed(11);
    let off = linalg::random_state(3, &mut rng) * cx(2.0, 0.0);
    let seeds = [Seed::operator(0, k), Seed::operator(1, off)];
    let n = normalize(&build_from_seeds(x, rep, &seeds, &tol).unwrap(), &tol).unwrap();
    assert!(n.commutation_defect < 1e-10);
    assert!(n.povm.normalization_defect() < 1e-10);
    assert!(n.povm.covariance_defect() < 1e-10);
}

#[test]
fn solver_dimensions_on_pairs_of_three_points() {
    let (x, rep) = s3_square();
    let sol = brute_force_covariant_solver(&x, &rep).unwrap();
    assert_eq!(sol.linear_dimension(), 14);
    assert_eq!(sol.affine_dimension(), 12);
    let povm = ic_povm(1.0);
    assert!(sol.residual(povm.effects()) < 1e-9);
    assert!(sol.residual(&sol.particular()) < 1e-12);
}

#[test]
fn solver_with_trivial_group_counts_all_hermitian_families() {
    let g = Arc::new(cyclic_group(1).unwrap());
    let x = GSpace::trivial(g.clone(), 2).unwrap();
    let rep = Representation::trivial(g, 2);
    let sol = brute_force_covariant_solver(&x, &rep).unwrap();
    assert_eq!(sol.linear_dimension(), 8);
    assert_eq!(sol.affine_dimension(), 4);
}

#[test]
fn solver_respects_size_limit() {
    let g = Arc::new(cyclic_group(1).unwrap());
    let x = GSpace::trivial(g.clone(), 65).unwrap();
    let rep = Representation::trivial(g, 8);
    assert!(matches!(brute_force_covariant_solver(&x, &rep), Err(CovError::SizeLimit(_))));
}

fn schur_case() -> CovariantPOVM {
    let g = Arc::new(symmetric_group(4).unwrap());
    let a4 = g.alternating_subgroup().unwrap();
    let x = Arc::new(GSpace::cosets(g.clone(), &a4).unwrap());
    let rep = Arc::new(Representation::standard(g).unwrap());
    let tol = Tolerances::default();
    normalize(&build_from_seeds(x, rep, &[Seed::operator(0, linalg::eye(3))], &tol).unwrap(), &tol)
        .unwrap()
        .povm
}

#[test]
fn irreducible_stabilizer_forces_unique_covariant_povm() {
    let povm = schur_case();
    let tol = Tolerances::default();
    for m in povm.effects() {
        assert!(diff(m, &(linalg::eye(3) * cx(0.5, 0.0))) < 1e-12);
    }
    let sol = brute_force_covariant_solver(povm.space(), povm.rep()).unwrap();
    assert_eq!(sol.linear_dimension(), 1);
    assert_eq!(sol.affine_dimension(), 0);
    let c = classify(&povm, &mut rng_from_seed(5), &tol).unwrap();
    assert!(c.is_extreme_covariant);
    assert!(!c.is_extreme_global);
    assert!(!perturbation_oracle(&povm, &sol, &tol).unwrap().exists());
}

#[test]
fn full_rank_covariant_povm_has_a_perturbation() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let seeds = [
        Seed::operator(0, diagonal_seed(0.7, cx(0.2, 0.1), 0.4, 0.3)),
        Seed::operator(1, linalg::eye(3)),
    ];
    let povm = normalize(&build_from_seeds(x.clone(), rep.clone(), &seeds, &tol).unwrap(), &tol)
        .unwrap()
        .povm;
    let c = classify(&povm, &mut rng_from_seed(2), &tol).unwrap();
    assert!(!c.is_extreme_covariant);
    let sol = brute_force_covariant_solver(&x, &rep).unwrap();
    let p = perturbation_oracle(&povm, &sol, &tol).unwrap();
    assert!(p.exists());
    let dir = p.direction.unwrap();
    for sign in [1.0, -1.0] {
        let moved: Vec<CMatrix> = povm
            .effects()
            .iter()
            .zip(&dir)
            .map(|(m, d)| m + d * cx(sign * p.epsilon, 0.0))
            .collect();
        assert!(sol.residual(&moved) < 1e-9);
        assert!(moved.iter().all(|m| linalg::min_eigenvalue(m) > -1e-12));
    }
}

#[test]
fn ic_extreme_povm_has_no_perturbation() {
    let povm = ic_povm(1.0);
    let sol = brute_force_covariant_solver(povm.space(), povm.rep()).unwrap();
    assert!(!perturbation_oracle(&povm, &sol, &Tolerances::default()).unwrap().exists());
}

#[test]
fn margins_sum_rows_and_columns() {
    let povm = ic_povm(0.5);
    let (a, b) = margins(&povm).unwrap();
    let x = povm.space();
    let m = |l: &str| povm.effect(x.find_label(l).unwrap()).clone();
    assert!(diff(&a[0], &(m("(1,1)") + m("(1,2)") + m("(1,3)"))) < 1e-14);
    assert!(diff(&b[2], &(m("(1,3)") + m("(2,3)") + m("(3,3)"))) < 1e-14);
    let total: CMatrix = a.iter().sum();
    assert!(diff(&total, &linalg::eye(3)) < 1e-10);
}
