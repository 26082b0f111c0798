//! Isotypic decomposition of a representation restricted to a subgroup.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{CovError, Result};
use crate::groups::GSpace;
use crate::linalg::{self, cx, diff, eigh, random_hermitian, random_matrix, trace, CMatrix, C64};
use crate::tol::{Rng, Tolerances};

use super::Representation;

const MAX_RETRIES: usize = 12;

/// A subgroup given by its sorted element list, with reverse lookup.
#[derive(Clone, Debug)]
pub struct Subgroup {
    elements: Vec<usize>,
    position: HashMap<usize, usize>,
}

impl Subgroup {
    pub fn new(mut elements: Vec<usize>) -> Self {
        elements.sort_unstable();
        elements.dedup();
        let position = elements.iter().enumerate().map(|(i, &h)| (h, i)).collect();
        Subgroup { elements, position }
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn position(&self, h: usize) -> Option<usize> {
        self.position.get(&h).copied()
    }

    pub fn contains(&self, h: usize) -> bool {
        self.position.contains_key(&h)
    }
}

/// One class of irreducible subrepresentations, with a fixed representative.
#[derive(Clone, Debug)]
pub struct IrrepClass {
    pub dim: usize,
    pub multiplicity: usize,
    /// Matrix of the representative at each subgroup element, in subgroup order.
    pub matrices: Vec<CMatrix>,
    pub character: Vec<C64>,
    /// One `ambient x dim` isometry per copy; all copies carry identical
    /// matrix elements.
    pub embeddings: Vec<CMatrix>,
}

impl IrrepClass {
    pub fn is_trivial(&self, tol: f64) -> bool {
        self.dim == 1 && self.character.iter().all(|c| (c - C64::new(1.0, 0.0)).norm() <= tol)
    }
}

#[derive(Clone, Debug)]
pub struct IrrepDecomposition {
    pub subgroup: Subgroup,
    pub ambient_dim: usize,
    pub classes: Vec<IrrepClass>,
}

impl IrrepDecomposition {
    /// Matrix of class `class` at group element `h` (which must lie in the subgroup).
    pub fn eta(&self, class: usize, h: usize) -> &CMatrix {
        let pos = self
            .subgroup
            .position(h)
            .expect("element lies in the decomposed subgroup");
        &self.classes[class].matrices[pos]
    }

    /// Class whose character matches `character` (given in subgroup order).
    pub fn find_class(&self, dim: usize, character: &[C64], tol: f64) -> Option<usize> {
        self.classes.iter().position(|c| {
            c.dim == dim
                && c.character
                    .iter()
                    .zip(character)
                    .all(|(a, b)| (a - b).norm() <= tol)
        })
    }

    /// `Σ_η Σ_m E_m η(h) E_m*` at every subgroup element versus the input.
    pub fn reconstruction_defect(&self, rep: &Representation) -> f64 {
        let mut worst = 0.0f64;
        for (pos, &h) in self.subgroup.elements().iter().enumerate() {
            let mut acc = linalg::zeros(self.ambient_dim, self.ambient_dim);
            for c in &self.classes {
                for e in &c.embeddings {
                    acc += e * &c.matrices[pos] * e.adjoint();
                }
            }
            worst = worst.max(diff(&acc, rep.matrix(h)));
        }
        worst
    }

    /// Largest deviation from the Schur orthogonality relations over all
    /// class pairs and matrix-element indices.
    pub fn schur_defect(&self) -> f64 {
        let n = self.subgroup.len() as f64;
        let mut worst = 0.0f64;
        for (a, ca) in self.classes.iter().enumerate() {
            for (b, cb) in self.classes.iter().enumerate() {
                for i in 0..ca.dim {
                    for j in 0..ca.dim {
                        for k in 0..cb.dim {
                            for l in 0..cb.dim {
                                let s: C64 = ca
                                    .matrices
                                    .iter()
                                    .zip(&cb.matrices)
                                    .map(|(x, y)| x[(i, j)] * y[(k, l)].conj())
                                    .sum::<C64>()
                                    / n;
                                let expect = if a == b && i == k && j == l {
                                    1.0 / ca.dim as f64
                                } else {
                                    0.0
                                };
                                worst = worst.max((s - cx(expect, 0.0)).norm());
                            }
                        }
                    }
                }
            }
        }
        worst
    }
}

fn restricted(mats: &[&CMatrix], basis: &CMatrix) -> Vec<CMatrix> {
    mats.iter().map(|u| basis.adjoint() * *u * basis).collect()
}

fn commutant_dimension(mats: &[CMatrix]) -> f64 {
    let s: f64 = mats.iter().map(|m| trace(m).norm_sqr()).sum();
    s / mats.len() as f64
}

fn averaged(mats: &[CMatrix], x: &CMatrix) -> CMatrix {
    let mut acc = linalg::zeros(x.nrows(), x.ncols());
    for u in mats {
        acc += u * x * u.adjoint();
    }
    acc / cx(mats.len() as f64, 0.0)
}

/// Split the invariant subspace spanned by `basis` into irreducible blocks.
fn split(
    ambient: &[&CMatrix],
    basis: CMatrix,
    rng: &mut Rng,
    out: &mut Vec<CMatrix>,
) -> Result<()> {
    let mats = restricted(ambient, &basis);
    let cdim = commutant_dimension(&mats);
    if (cdim - 1.0).abs() < 1e-6 {
        out.push(basis);
        return Ok(());
    }
    let k = basis.ncols();
    for _ in 0..MAX_RETRIES {
        let c = averaged(&mats, &random_hermitian(k, rng));
        let (vals, vecs) = eigh(&c);
        let scale = vals.iter().map(|v| v.abs()).fold(1.0, f64::max);
        let gap = 1e-7 * scale;
        let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
        for i in 1..k {
            if vals[i] - vals[i - 1] > gap {
                clusters.push(Vec::new());
            }
            clusters.last_mut().expect("non-empty").push(i);
        }
        if clusters.len() < 2 {
            continue;
        }
        for cl in clusters {
            let mut sub = linalg::zeros(k, cl.len());
            for (col, &i) in cl.iter().enumerate() {
                sub.set_column(col, &vecs.column(i));
            }
            split(ambient, &basis * sub, rng, out)?;
        }
        return Ok(());
    }
    Err(CovError::DecompositionFailure(format!(
        "could not split a {k}-dimensional block with commutant dimension {cdim:.3}"
    )))
}

/// Unitary `T` with `T* a(h) T = b(h)` for equivalent irreducible `a`, `b`.
pub(crate) fn align(a: &[CMatrix], b: &[CMatrix], rng: &mut Rng) -> Result<CMatrix> {
    let d = a[0].nrows();
    for _ in 0..MAX_RETRIES {
        let y = random_matrix(d, d, rng);
        let mut t = linalg::zeros(d, d);
        for (x, z) in a.iter().zip(b) {
            t += x * &y * z.adjoint();
        }
        let norm2 = linalg::hs(&t, &t).re / d as f64;
        if norm2 > 1e-12 {
            return Ok(t / cx(norm2.sqrt(), 0.0));
        }
    }
    Err(CovError::DecompositionFailure(
        "no intertwiner found between blocks with equal characters".into(),
    ))
}

fn character_order(a: &IrrepClass, b: &IrrepClass) -> Ordering {
    let key = |z: f64| (z * 1e6).round() as i64;
    a.dim.cmp(&b.dim).then_with(|| {
        for (x, y) in a.character.iter().zip(&b.character) {
            let o = key(-x.re)
                .cmp(&key(-y.re))
                .then(key(-x.im).cmp(&key(-y.im)));
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    })
}

/// Isotypic decomposition of `rep` restricted to `subgroup`.
///
/// Irreducible blocks come from eigenspaces of random elements of the
/// commutant; equivalent blocks are matched by character and their bases
/// aligned so every copy carries the same matrix elements. Classes are
/// ordered by dimension, then by character, so the class list does not
/// depend on the random stream.
pub fn decompose_restriction(
    rep: &Representation,
    subgroup: &[usize],
    rng: &mut Rng,
    tol: &Tolerances,
) -> Result<IrrepDecomposition> {
    let sub = Subgroup::new(subgroup.to_vec());
    if sub.is_empty() || sub.elements().iter().any(|&h| h >= rep.group().order()) {
        return Err(CovError::Invalid("subgroup elements out of range".into()));
    }
    let ambient: Vec<&CMatrix> = sub.elements().iter().map(|&h| rep.matrix(h)).collect();
    let d = rep.dim();
    let mut blocks = Vec::new();
    split(&ambient, linalg::eye(d), rng, &mut blocks)?;

    let mut classes: Vec<IrrepClass> = Vec::new();
    for b in blocks {
        let mats = restricted(&ambient, &b);
        let character: Vec<C64> = mats.iter().map(trace).collect();
        let dim = b.ncols();
        let found = classes.iter().position(|c| {
            c.dim == dim
                && c.character
                    .iter()
                    .zip(&character)
                    .all(|(x, y)| (x - y).norm() <= tol.character)
        });
        match found {
            Some(ci) => {
                let t = align(&mats, &classes[ci].matrices, rng)?;
                classes[ci].embeddings.push(&b * t);
                classes[ci].multiplicity += 1;
            }
            None => classes.push(IrrepClass {
                dim,
                multiplicity: 1,
                matrices: mats,
                character,
                embeddings: vec![b],
            }),
        }
    }
    classes.sort_by(character_order);
    Ok(IrrepDecomposition {
        subgroup: sub,
        ambient_dim: d,
        classes,
    })
}

/// The subgroup element `s(x)⁻¹ g⁻¹ s(gx)` of the orbit's stabilizer.
pub fn cocycle_element(space: &GSpace, g: usize, x: usize) -> usize {
    let grp = space.group();
    let gx = space.act(g, x);
    grp.mul(grp.mul(grp.inv(space.section(x)), grp.inv(g)), space.section(gx))
}

/// `ζ^η(g, x) = η(s(x)⁻¹ g⁻¹ s(gx))` for class `class` of a decomposition
/// over the stabilizer of `x`'s orbit.
pub fn cocycle_eval(
    decomp: &IrrepDecomposition,
    class: usize,
    space: &GSpace,
    g: usize,
    x: usize,
) -> CMatrix {
    decomp.eta(class, cocycle_element(space, g, x)).clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{product_action_space, symmetric_group, GSpace};
    use crate::linalg::{ket_bra, CVector, ONE};
    use crate::tol::rng_from_seed;
    use std::sync::Arc;

    fn s3_setup() -> (Arc<GSpace>, Representation) {
        let g = Arc::new(symmetric_group(3).unwrap());
        let base = GSpace::natural(g).unwrap();
        let rep = Representation::permutation(&base);
        (Arc::new(product_action_space(&base, 2).unwrap()), rep)
    }

    #[test]
    fn stabilizer_of_diagonal_point() {
        let (space, rep) = s3_setup();
        let tol = Tolerances::default();
        let h = space.orbit(0).stabilizer.clone();
        let dec = decompose_restriction(&rep, &h, &mut rng_from_seed(1), &tol).unwrap();
        assert_eq!(dec.classes.len(), 2);
        let triv = &dec.classes[0];
        assert!(triv.is_trivial(1e-9));
        assert_eq!(triv.multiplicity, 2);
        assert_eq!(dec.classes[1].multiplicity, 1);
        // sign copy spanned by (|2> - |3>)/sqrt 2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi_minus = CVector::from_vec(vec![cx(0.0, 0.0), cx(s, 0.0), cx(-s, 0.0)]);
        let e = &dec.classes[1].embeddings[0];
        let proj = e * e.adjoint();
        assert!(diff(&proj, &ket_bra(&phi_minus, &phi_minus)) < 1e-10);
        assert!(dec.reconstruction_defect(&rep) < 1e-10);
        assert!(dec.schur_defect() < 1e-10);
    }

    #[test]
    fn trivial_subgroup() {
        let (_, rep) = s3_setup();
        let dec = decompose_restriction(&rep, &[0], &mut rng_from_seed(2), &Tolerances::default()).unwrap();
        assert_eq!(dec.classes.len(), 1);
        assert_eq!(dec.classes[0].multiplicity, 3);
        assert!((dec.classes[0].matrices[0][(0, 0)] - ONE).norm() < 1e-12);
    }

    #[test]
    fn permutation_rep_of_sd_splits_into_trivial_and_standard() {
        for d in 2..=5 {
            let g = Arc::new(symmetric_group(d).unwrap());
            let rep = Representation::permutation(&GSpace::natural(g.clone()).unwrap());
            let all: Vec<usize> = g.elements().collect();
            let dec = decompose_restriction(&rep, &all, &mut rng_from_seed(d as u64), &Tolerances::default()).unwrap();
            assert_eq!(dec.classes.len(), 2);
            assert!(dec.classes[0].is_trivial(1e-9));
            assert_eq!(dec.classes[1].dim, d - 1);
            let e = &dec.classes[0].embeddings[0];
            let psi0 = CVector::from_element(d, cx(1.0 / (d as f64).sqrt(), 0.0));
            assert!(diff(&(e * e.adjoint()), &ket_bra(&psi0, &psi0)) < 1e-10);
            assert!(dec.schur_defect() < 1e-9);
        }
    }

    #[test]
    fn copies_carry_identical_matrix_elements() {
        // two copies of the standard rep of S_3 plus one trivial
        let g = Arc::new(symmetric_group(3).unwrap());
        let std = Representation::standard(g.clone()).unwrap();
        let rep = std.direct_sum(&std).unwrap().direct_sum(&Representation::trivial(g.clone(), 1)).unwrap();
        let mut rng = rng_from_seed(4);
        let w = crate::linalg::random_unitary(5, &mut rng);
        let rep = rep.conjugated_by(&w);
        let all: Vec<usize> = g.elements().collect();
        let dec = decompose_restriction(&rep, &all, &mut rng, &Tolerances::default()).unwrap();
        let c = dec.classes.iter().find(|c| c.dim == 2).unwrap();
        assert_eq!(c.multiplicity, 2);
        for e in &c.embeddings {
            for (pos, &h) in dec.subgroup.elements().iter().enumerate() {
                let m = e.adjoint() * rep.matrix(h) * e;
                assert!(diff(&m, &c.matrices[pos]) < 1e-10);
            }
        }
        assert!(dec.reconstruction_defect(&rep) < 1e-9);
    }

    #[test]
    fn class_list_is_seed_independent() {
        let (space, rep) = s3_setup();
        let rep2 = rep.tensor(&rep).unwrap();
        let h = space.orbit(0).stabilizer.clone();
        let tol = Tolerances::default();
        let a = decompose_restriction(&rep2, &h, &mut rng_from_seed(10), &tol).unwrap();
        let b = decompose_restriction(&rep2, &h, &mut rng_from_seed(11), &tol).unwrap();
        assert_eq!(a.classes.len(), b.classes.len());
        for (x, y) in a.classes.iter().zip(&b.classes) {
            assert_eq!((x.dim, x.multiplicity), (y.dim, y.multiplicity));
            for (p, q) in x.character.iter().zip(&y.character) {
                assert!((p - q).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn cocycle_identities() {
        let (space, rep) = s3_setup();
        let tol = Tolerances::default();
        let g = space.group().clone();
        let std = Representation::standard(g.clone()).unwrap();
        for (o, orbit) in space.orbits().iter().enumerate() {
            let dec = decompose_restriction(&std, &orbit.stabilizer, &mut rng_from_seed(o as u64), &tol).unwrap();
            for c in 0..dec.classes.len() {
                for &x in &orbit.points {
                    let z = cocycle_eval(&dec, c, &space, g.identity(), x);
                    assert!(diff(&z, &linalg::eye(z.nrows())) < 1e-12);
                }
                for &h in &orbit.stabilizer {
                    let z = cocycle_eval(&dec, c, &space, g.inv(h), orbit.base);
                    assert!(diff(&z, dec.eta(c, h)) < 1e-12);
                }
                for a in g.elements() {
                    for b in g.elements() {
                        for &x in &orbit.points {
                            let lhs = cocycle_eval(&dec, c, &space, g.mul(a, b), x);
                            let rhs = cocycle_eval(&dec, c, &space, b, x)
                                * cocycle_eval(&dec, c, &space, a, space.act(b, x));
                            assert!(diff(&lhs, &rhs) < 1e-10);
                        }
                    }
                }
            }
        }
        let _ = rep;
    }
}
