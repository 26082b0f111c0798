use std::sync::Arc;

use super::*;
use crate::covobs::{build_from_seeds, normalize, Seed};
use crate::groups::{product_action_space, symmetric_group, GSpace, SectionPolicy};
use crate::linalg::{cx, diff, eye, ket_bra};
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

fn s4_cosets() -> (Arc<GSpace>, Arc<Representation>) {
    let g = Arc::new(symmetric_group(4).unwrap());
    let a4 = g.alternating_subgroup().unwrap();
    let x = Arc::new(GSpace::cosets(g.clone(), &a4).unwrap());
    (x, Arc::new(Representation::standard(g).unwrap()))
}

fn catalogs(x: &GSpace, rep: &Representation, seed: u64) -> Vec<Arc<IrrepDecomposition>> {
    intertwiner_catalogs(x, rep, rep, &mut rng_from_seed(seed), &Tolerances::default()).unwrap()
}

#[test]
fn catalog_operators_satisfy_the_stabilizer_relation() {
    let (x, rep) = s3_square();
    let cats = catalogs(&x, &rep, 1);
    let mut families = Vec::new();
    for (o, cat) in cats.iter().enumerate() {
        for (c, class) in cat.classes.iter().enumerate() {
            for k in 0..class.multiplicity {
                families.push(basis_family(cat, o, c, k, 3, 3));
            }
        }
    }
    let set = IntertwinerSet::new(x, rep.clone(), rep, cats, families).unwrap();
    assert!(set.hinv_defect() < 1e-10);
}

#[test]
fn identity_channel_is_extreme() {
    let g = Arc::new(symmetric_group(3).unwrap());
    let rep = Arc::new(Representation::permutation(&GSpace::natural(g.clone()).unwrap()));
    let x = Arc::new(channel_space(g).unwrap());
    let tol = Tolerances::default();
    let cats = catalogs(&x, &rep, 2);
    let trivial = cats[0].classes.iter().position(|c| c.is_trivial(1e-8)).unwrap();
    let fam = IntertwinerFamily {
        orbit: 0,
        class: trivial,
        ops: vec![eye(3)],
    };
    let set = IntertwinerSet::new(x, rep.clone(), rep, cats, vec![fam]).unwrap();
    let report = set.validate(&tol);
    assert!(report.passed && report.minimal);
    let instr = build_instrument(&set, &tol).unwrap();
    let rho = linalg::random_state(3, &mut rng_from_seed(3));
    assert!(diff(&instr.maps().apply(0, &rho), &rho) < 1e-12);
    assert!(extreme_global(instr.maps(), &tol).extreme);
    assert!(covariant_extremality(&set, &tol).unwrap().extreme);
}

#[test]
fn duplicated_family_reduces_to_one() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let cats = catalogs(&x, &rep, 4);
    let base = random_intertwiners(x, rep, cats, 1, &mut rng_from_seed(5), &tol).unwrap();
    let mut doubled = Vec::new();
    for f in base.families() {
        let half = IntertwinerFamily {
            orbit: f.orbit,
            class: f.class,
            ops: f.ops.iter().map(|l| l * cx(std::f64::consts::FRAC_1_SQRT_2, 0.0)).collect(),
        };
        doubled.push(half.clone());
        doubled.push(half);
    }
    let doubled = base.with_families(doubled);
    assert!(doubled.normalization_defect() < 1e-10);
    assert!(!doubled.is_minimal(&tol));
    let red = reduce_to_minimal(&doubled, &tol).unwrap();
    assert_eq!(red.dropped, base.families().len());
    assert!(red.set.is_minimal(&tol));
    let a = build_instrument(&base, &tol).unwrap();
    let b = build_instrument(&red.set, &tol).unwrap();
    assert!(a.maps().distance(b.maps()).unwrap() < 1e-10);
}

fn random_intertwiners(
    x: Arc<GSpace>,
    rep: Arc<Representation>,
    cats: Vec<Arc<IrrepDecomposition>>,
    max_m: usize,
    rng: &mut Rng,
    tol: &Tolerances,
) -> Result<IntertwinerSet> {
    super::random_intertwiners(x, rep.clone(), rep, cats, max_m, rng, tol)
}

#[test]
fn kraus_operators_do_not_depend_on_the_coset_representative() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let cats = catalogs(&x, &rep, 6);
    let set = random_intertwiners(x.clone(), rep, cats, 2, &mut rng_from_seed(7), &tol).unwrap();
    let grp = x.group();
    for p in 0..x.n_points() {
        let o = x.orbit(x.orbit_of(p));
        let gp = x.section(p);
        let reference = set.kraus_at(p, gp).unwrap();
        for &h in &o.stabilizer {
            let other = set.kraus_at(p, grp.mul(gp, h)).unwrap();
            for (a, b) in reference.iter().zip(&other) {
                assert!(diff(a, b) < 1e-12);
            }
        }
    }
}

#[test]
fn random_sets_give_covariant_instruments_with_minimal_dilations() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let cats = catalogs(&x, &rep, 8);
    let mut rng = rng_from_seed(9);
    for _ in 0..20 {
        let set = random_intertwiners(x.clone(), rep.clone(), cats.clone(), 2, &mut rng, &tol).unwrap();
        let report = set.validate(&tol);
        assert!(report.passed, "{report:?}");
        let instr = build_instrument(&set, &tol).unwrap();
        assert!(instr.maps().completeness_defect() < 1e-9);
        assert!(instr.maps().covariance_defect() < 1e-9);
        let minimal = reduce_to_minimal(&set, &tol).unwrap().set;
        let instr = build_instrument(&minimal, &tol).unwrap();
        let (_, dil) = minimal_dilation(&instr, &tol).unwrap();
        assert!(dil.passed, "{dil:?}");
        let cov = extreme_in_covariance_structure(&set, &mut rng, &tol).unwrap();
        if extreme_global(instr.maps(), &tol).extreme {
            assert!(cov.extreme);
        }
        if let Some(w) = &cov.witness {
            assert!(w.verified, "{w:?}");
        }
    }
}

#[test]
fn rebasing_keeps_the_instrument() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let set = random_intertwiners(x.clone(), rep.clone(), catalogs(&x, &rep, 10), 2, &mut rng_from_seed(11), &tol)
        .unwrap();
    let moved = set.rebase(catalogs(&x, &rep, 12), &mut rng_from_seed(13), &tol).unwrap();
    assert!(moved.hinv_defect() < 1e-9);
    let a = build_instrument(&set, &tol).unwrap();
    let b = build_instrument(&moved, &tol).unwrap();
    assert!(a.maps().distance(b.maps()).unwrap() < 1e-9);
}

#[test]
fn luders_instrument_measures_the_povm() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let seeds = [Seed::operator(0, eye(3)), Seed::operator(1, eye(3))];
    let povm = normalize(&build_from_seeds(x.clone(), rep.clone(), &seeds, &tol).unwrap(), &tol)
        .unwrap()
        .povm;
    let set = luders_intertwiners(&povm, catalogs(&x, &rep, 14), &tol).unwrap();
    let instr = build_instrument(&set, &tol).unwrap();
    for (m, n) in instr.maps().effects().iter().zip(povm.effects()) {
        assert!(diff(m, n) < 1e-10);
    }
    assert!(instr.maps().covariance_defect() < 1e-10);
}

#[test]
fn nuclear_instrument_is_covariant_and_measures_the_povm() {
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let d = linalg::basis_vector(3, 0);
    let povm = normalize(&build_from_seeds(x.clone(), rep.clone(), &[Seed::vector(0, &d)], &tol).unwrap(), &tol)
        .unwrap()
        .povm;
    let mut rng = rng_from_seed(15);
    let states: Vec<_> = (0..x.orbits().len()).map(|_| linalg::random_state(3, &mut rng)).collect();
    let (instr, sigmas) = nuclear_instrument(&povm, rep.clone(), &states, &tol).unwrap();
    assert!(instr.covariance_defect() < 1e-10);
    for (m, n) in instr.effects().iter().zip(povm.effects()) {
        assert!(diff(m, n) < 1e-10);
    }
    for (o, s) in sigmas.iter().enumerate() {
        assert!(rep.commutation_defect(s, &x.orbit(o).stabilizer) < 1e-10);
    }
}

#[test]
fn nuclear_instrument_matches_rank_one_intertwiners() {
    // With V = U, a rank-one seed |d><d| on the diagonal orbit and an output
    // state |ξ><ξ| invariant under the stabilizer, the measure-and-prepare
    // instrument is generated by the single intertwiner |ξ><d|.
    let (x, rep) = s3_square();
    let tol = Tolerances::default();
    let d = linalg::basis_vector(3, 0);
    let povm = normalize(&build_from_seeds(x.clone(), rep.clone(), &[Seed::vector(0, &d)], &tol).unwrap(), &tol)
        .unwrap()
        .povm;
    let dn = {
        let (vals, vecs) = linalg::eigh(povm.seed(0));
        let k = vals.len() - 1;
        vecs.column(k).into_owned() * cx(vals[k].sqrt(), 0.0)
    };
    let xi = linalg::basis_vector(3, 0);
    let states = vec![ket_bra(&xi, &xi), ket_bra(&xi, &xi)];
    let (nuclear, _) = nuclear_instrument(&povm, rep.clone(), &states, &tol).unwrap();
    let cats = catalogs(&x, &rep, 16);
    let trivial = cats[0].classes.iter().position(|c| c.is_trivial(1e-8)).unwrap();
    let fam = IntertwinerFamily {
        orbit: 0,
        class: trivial,
        ops: vec![ket_bra(&xi, &dn)],
    };
    let set = IntertwinerSet::new(x, rep.clone(), rep, cats, vec![fam]).unwrap();
    let built = build_instrument(&set, &tol).unwrap();
    assert!(built.maps().distance(&nuclear).unwrap() < 1e-10);
}

#[test]
fn irreducible_stabilizer_class_gives_extreme_instrument() {
    let (x, rep) = s4_cosets();
    let tol = Tolerances::default();
    let cats = catalogs(&x, &rep, 17);
    let three = cats[0].classes.iter().position(|c| c.dim == 3).unwrap();
    assert_eq!(cats[0].classes[three].multiplicity, 2);
    let fam = basis_family(&cats[0], 0, three, 0, 3, 3);
    let set = IntertwinerSet::new(x, rep.clone(), rep, cats, vec![fam]).unwrap();
    let (set, _) = set.renormalize(&tol).unwrap();
    let verdict = covariant_extremality(&set, &tol).unwrap();
    assert!(verdict.extreme);
}

#[test]
fn two_scalar_classes_give_a_verified_witness() {
    let (x, rep) = s4_cosets();
    let tol = Tolerances::default();
    let cats = catalogs(&x, &rep, 18);
    let ones: Vec<usize> = (0..cats[0].classes.len()).filter(|&c| cats[0].classes[c].dim == 1).collect();
    assert!(ones.len() >= 2);
    let families = ones[..2].iter().map(|&c| basis_family(&cats[0], 0, c, 0, 3, 3)).collect();
    let set = IntertwinerSet::new(x, rep.clone(), rep, cats, families).unwrap();
    let (set, _) = set.renormalize(&tol).unwrap();
    let verdict = covariant_extremality(&set, &tol).unwrap();
    assert!(!verdict.extreme);
    let w = verdict.witness.unwrap();
    assert!(w.verified, "{w:?}");
}

#[test]
fn projective_representations_are_rejected() {
    let rep = crate::linrep::qubit_weyl_pair().unwrap();
    let x = GSpace::regular(rep.group().clone()).unwrap();
    let err = intertwiner_catalogs(&x, &rep, &rep, &mut rng_from_seed(1), &Tolerances::default()).unwrap_err();
    assert!(matches!(err, CovError::Invalid(_)));
}
