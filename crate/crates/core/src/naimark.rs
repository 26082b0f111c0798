//! Dilation of rank-one covariant POVMs onto a canonical projection valued
//! measure on `Orb × G`.
//!
//! The pipeline refines `M` to outcomes `(O, g)`, dilates the refinement with
//! an explicit isometry, removes a projective multiplier by passing to a
//! central extension, and finally extends the symmetry to all permutations of
//! the group.

use std::sync::Arc;

use crate::covobs::CovariantPOVM;
use crate::error::{invalid, CovError, Result};
use crate::groups::{symmetric_group, FiniteGroup};
use crate::linalg::{self, cx, diff, eigh, ket_bra, sandwich, CMatrix, CVector, ONE};
use crate::linrep::{central_extension, validate_representation, CentralExtension, MultiplierAnalysis, Representation};
use crate::tol::Tolerances;

/// Largest group whose full symmetric group is materialized.
pub const SYM_MATERIALIZE_LIMIT: usize = 5;

/// `M'_{O,g} = U(g) |d_O><d_O| U(g)* / #H_O`, outcome id `O · #G + g`.
#[derive(Clone, Debug)]
pub struct RefinedPOVM {
    parent: CovariantPOVM,
    vectors: Vec<CVector>,
    effects: Vec<CMatrix>,
}

impl RefinedPOVM {
    pub fn parent(&self) -> &CovariantPOVM {
        &self.parent
    }

    /// Seed vector `d_O` with `M_{x_O} = |d_O><d_O|` (zero for empty orbits).
    pub fn vector(&self, orbit: usize) -> &CVector {
        &self.vectors[orbit]
    }

    pub fn n_orbits(&self) -> usize {
        self.vectors.len()
    }

    pub fn group_order(&self) -> usize {
        self.parent.space().group().order()
    }

    pub fn outcome(&self, orbit: usize, g: usize) -> usize {
        orbit * self.group_order() + g
    }

    /// `(orbit, element)` of every outcome.
    pub fn labels(&self) -> Vec<(usize, usize)> {
        let n = self.group_order();
        (0..self.effects.len()).map(|k| (k / n, k % n)).collect()
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn effect(&self, orbit: usize, g: usize) -> &CMatrix {
        &self.effects[self.outcome(orbit, g)]
    }

    /// `max_x |M_x - Σ_{h∈H_O} M'_{O, g_x h}|`.
    pub fn post_processing_defect(&self) -> f64 {
        self.post_processing_defect_with(|o, g| self.effect(o, g).clone())
    }

    fn post_processing_defect_with(&self, refined: impl Fn(usize, usize) -> CMatrix) -> f64 {
        let space = self.parent.space();
        let group = space.group();
        let d = self.parent.dim();
        let mut worst = 0.0f64;
        for x in 0..space.n_points() {
            let o = space.orbit_of(x);
            let mut acc = linalg::zeros(d, d);
            for &h in &space.orbit(o).stabilizer {
                acc += refined(o, group.mul(space.section(x), h));
            }
            worst = worst.max(diff(&acc, self.parent.effect(x)));
        }
        worst
    }

    /// `max |U(g) M'_{O,g'} U(g)* - M'_{O,gg'}|`.
    pub fn covariance_defect(&self) -> f64 {
        let group = self.parent.space().group();
        let rep = self.parent.rep();
        let mut worst = 0.0f64;
        for o in 0..self.n_orbits() {
            for g in group.elements() {
                for gp in group.elements() {
                    let moved = sandwich(rep.matrix(g), self.effect(o, gp));
                    worst = worst.max(diff(&moved, self.effect(o, group.mul(g, gp))));
                }
            }
        }
        worst
    }
}

/// Refine a rank-one covariant POVM to outcomes `Orb × G`.
pub fn refine(povm: &CovariantPOVM, tol: &Tolerances) -> Result<RefinedPOVM> {
    let space = povm.space();
    let group = space.group();
    let rep = povm.rep();
    let scale = povm
        .effects()
        .iter()
        .map(|m| eigh(m).0.last().copied().unwrap_or(0.0))
        .fold(0.0, f64::max);
    let mut vectors = Vec::new();
    for (o, orbit) in space.orbits().iter().enumerate() {
        let (vals, vecs) = eigh(povm.effect(orbit.base));
        let k = vals.len() - 1;
        if vals.len() > 1 && vals[k - 1] > tol.rank * scale.max(f64::MIN_POSITIVE) {
            return invalid(format!("orbit {o}: effect has rank above one"));
        }
        let top = vals[k].max(0.0);
        vectors.push(if top > tol.rank * scale {
            vecs.column(k).into_owned() * cx(top.sqrt(), 0.0)
        } else {
            CVector::zeros(povm.dim())
        });
    }
    let mut effects = Vec::with_capacity(vectors.len() * group.order());
    for (o, d) in vectors.iter().enumerate() {
        let h = space.orbit(o).stabilizer.len() as f64;
        for g in group.elements() {
            let v = rep.matrix(g) * d;
            effects.push(ket_bra(&v, &v) / cx(h, 0.0));
        }
    }
    Ok(RefinedPOVM {
        parent: povm.clone(),
        vectors,
        effects,
    })
}

#[derive(Clone, Debug)]
pub struct NaimarkReport {
    pub dimension: usize,
    pub isometry_defect: f64,
    /// `max |M'_{O,g} - J* Q_{O,g} J|`.
    pub effect_defect: f64,
    /// `max_g |V(g) J - J U(g)|`.
    pub intertwining_defect: f64,
    /// `max |V(gg') - m(g,g') V(g) V(g')|`.
    pub multiplier_law_defect: f64,
    /// `max |V(g) Q_{O,g'} V(g)* - Q_{O,gg'}|`.
    pub projector_defect: f64,
    /// `max_x |M_x - Σ_h J* Q_{O,g_x h} J|`.
    pub post_processing_defect: f64,
    pub minimal: bool,
    pub normalized: bool,
    pub passed: bool,
}

/// `J = Σ_O (#H_O)^{-1/2} Σ_g |O,g><d_O| U(g)*` with `Q_{O,g} = |O,g><O,g|`
/// and `V(g)|O,g'> = conj(m(g,g')) |O,gg'>`.
#[derive(Clone, Debug)]
pub struct NaimarkBundle {
    refined: RefinedPOVM,
    isometry: CMatrix,
    ancilla: Vec<CMatrix>,
    report: NaimarkReport,
}

impl NaimarkBundle {
    pub fn refined(&self) -> &RefinedPOVM {
        &self.refined
    }

    pub fn isometry(&self) -> &CMatrix {
        &self.isometry
    }

    /// `V(g)` for every group element.
    pub fn ancilla(&self) -> &[CMatrix] {
        &self.ancilla
    }

    pub fn projector(&self, orbit: usize, g: usize) -> CMatrix {
        let n = self.isometry.nrows();
        let mut q = linalg::zeros(n, n);
        let k = self.refined.outcome(orbit, g);
        q[(k, k)] = ONE;
        q
    }

    pub fn report(&self) -> &NaimarkReport {
        &self.report
    }

    pub fn labels(&self) -> Vec<(usize, usize)> {
        self.refined.labels()
    }
}

/// Canonical dilation of a refined POVM, with every bundle identity checked.
pub fn dilate(refined: &RefinedPOVM, tol: &Tolerances) -> NaimarkBundle {
    let parent = refined.parent();
    let space = parent.space();
    let group = space.group();
    let rep = parent.rep();
    let n = group.order();
    let d = parent.dim();
    let dim = refined.n_orbits() * n;

    let mut j = linalg::zeros(dim, d);
    for (o, dv) in refined.vectors.iter().enumerate() {
        let w = 1.0 / (space.orbit(o).stabilizer.len() as f64).sqrt();
        for g in 0..n {
            let row = (rep.matrix(g) * dv).adjoint() * cx(w, 0.0);
            j.row_mut(refined.outcome(o, g)).copy_from(&row);
        }
    }
    let ancilla: Vec<CMatrix> = (0..n)
        .map(|g| {
            let mut v = linalg::zeros(dim, dim);
            for o in 0..refined.n_orbits() {
                for gp in 0..n {
                    v[(refined.outcome(o, group.mul(g, gp)), refined.outcome(o, gp))] = rep.multiplier(g, gp).conj();
                }
            }
            v
        })
        .collect();

    let jj = j.adjoint() * &j;
    let isometry_defect = diff(&jj, &linalg::eye(d));
    let dilated = |o: usize, g: usize| {
        let r = j.row(refined.outcome(o, g)).into_owned();
        r.adjoint() * r
    };
    let mut effect_defect = 0.0f64;
    for o in 0..refined.n_orbits() {
        for g in 0..n {
            effect_defect = effect_defect.max(diff(&dilated(o, g), refined.effect(o, g)));
        }
    }
    let intertwining_defect = (0..n)
        .map(|g| diff(&(&ancilla[g] * &j), &(&j * rep.matrix(g))))
        .fold(0.0, f64::max);
    let mut multiplier_law_defect = 0.0f64;
    for g in 0..n {
        for h in 0..n {
            let rhs = &ancilla[g] * &ancilla[h] * rep.multiplier(g, h);
            multiplier_law_defect = multiplier_law_defect.max(diff(&ancilla[group.mul(g, h)], &rhs));
        }
    }
    // V(g) is monomial, so V(g) Q_k V(g)* is the projector on V(g)e_k.
    let mut projector_defect = 0.0f64;
    for g in 0..n {
        for o in 0..refined.n_orbits() {
            for gp in 0..n {
                let image = ancilla[g].column(refined.outcome(o, gp));
                let target = refined.outcome(o, group.mul(g, gp));
                let mut e = CVector::zeros(dim);
                e[target] = ONE;
                let mut moved = CVector::zeros(dim);
                moved.copy_from(&image);
                projector_defect = projector_defect.max(diff(&ket_bra(&moved, &moved), &ket_bra(&e, &e)));
            }
        }
    }
    let post_processing_defect = refined.post_processing_defect_with(dilated);
    let normalized = parent.is_normalized(tol);
    let minimal = refined.vectors.iter().all(|v| v.norm() > 0.0);
    let passed = effect_defect <= tol.lin
        && intertwining_defect <= tol.lin
        && multiplier_law_defect <= tol.lin
        && projector_defect <= tol.lin
        && post_processing_defect <= tol.lin
        && (!normalized || isometry_defect <= tol.lin);
    NaimarkBundle {
        refined: refined.clone(),
        isometry: j,
        ancilla,
        report: NaimarkReport {
            dimension: dim,
            isometry_defect,
            effect_defect,
            intertwining_defect,
            multiplier_law_defect,
            projector_defect,
            post_processing_defect,
            minimal,
            normalized,
            passed,
        },
    }
}

/// The pipeline rerun over the central extension `G_m`, where the lifted
/// representation is ordinary and `(g, t^k)` acts on outcomes as `g`.
#[derive(Clone, Debug)]
pub struct LiftedBundle {
    pub extension: CentralExtension,
    pub povm: CovariantPOVM,
    pub bundle: NaimarkBundle,
    /// `max |M_{(g,t^k)x} - Ũ(g,t^k) M_x Ũ(g,t^k)*|`.
    pub covariance_defect: f64,
}

pub fn trivialize_multiplier(
    bundle: &NaimarkBundle,
    analysis: &MultiplierAnalysis,
    tol: &Tolerances,
) -> Result<LiftedBundle> {
    let parent = bundle.refined().parent();
    if analysis.adjusted.group().order() != parent.space().group().order() {
        return invalid("multiplier analysis belongs to a different group");
    }
    let extension = central_extension(analysis)?;
    let space = Arc::new(extension.extend_space(parent.space())?);
    let lifted = Arc::new(extension.lifted.clone());
    let povm = CovariantPOVM::from_effects(space, lifted, parent.effects().to_vec())?;
    let covariance_defect = povm.covariance_defect();
    let bundle = dilate(&refine(&povm, tol)?, tol);
    Ok(LiftedBundle {
        extension,
        povm,
        bundle,
        covariance_defect,
    })
}

#[derive(Clone, Debug)]
pub struct SymReport {
    /// Whether all of `Sym(G)` was materialized.
    pub materialized: bool,
    /// Homomorphism and unitarity defect of the materialized representation.
    pub representation_defect: Option<f64>,
    /// `max |V̄(π) Q_{O,g} V̄(π)* - Q_{O,π(g)}|` over transpositions.
    pub generator_defect: f64,
    /// `max_g |V̄(g·) - V(g)|`.
    pub restriction_defect: f64,
    pub passed: bool,
}

/// `V̄(π)|O,g> = |O,π(g)>` for permutations `π` of the group elements.
#[derive(Clone, Debug)]
pub struct SymEmbedding {
    n_orbits: usize,
    order: usize,
    /// `Sym(G)` on the element ids, when materialized.
    sym: Option<Arc<FiniteGroup>>,
    report: SymReport,
}

impl SymEmbedding {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sym_group(&self) -> Option<&Arc<FiniteGroup>> {
        self.sym.as_ref()
    }

    pub fn report(&self) -> &SymReport {
        &self.report
    }

    /// `V̄(π)` for `π` given as the images of the element ids.
    pub fn matrix(&self, perm: &[usize]) -> Result<CMatrix> {
        let n = self.order;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return invalid(format!("not a permutation of {n} group elements"));
        }
        let dim = self.n_orbits * n;
        let mut v = linalg::zeros(dim, dim);
        for o in 0..self.n_orbits {
            for (g, &p) in perm.iter().enumerate() {
                v[(o * n + p, o * n + g)] = ONE;
            }
        }
        Ok(v)
    }

    /// The materialized representation of `Sym(G)`.
    pub fn representation(&self) -> Option<Result<Representation>> {
        self.sym.as_ref().map(|sym| {
            let matrices = sym
                .elements()
                .map(|s| self.matrix(&sym.permutation(s).expect("symmetric group element")))
                .collect::<Result<Vec<_>>>()?;
            Representation::new(sym.clone(), matrices, None)
        })
    }
}

/// Extend the ancilla representation of a bundle with trivial multiplier to
/// all permutations of the group. With `materialize`, groups above
/// [`SYM_MATERIALIZE_LIMIT`] are rejected instead of evaluated on demand.
pub fn embed_in_sym(bundle: &NaimarkBundle, materialize: bool, tol: &Tolerances) -> Result<SymEmbedding> {
    let parent = bundle.refined().parent();
    if parent.rep().is_projective(tol.unit) {
        return invalid("embedding needs a trivial multiplier; trivialize it first");
    }
    let group = parent.space().group();
    let order = group.order();
    let full = order <= SYM_MATERIALIZE_LIMIT;
    if materialize && !full {
        return Err(CovError::SizeLimit(format!(
            "Sym(G) is materialized only for #G <= {SYM_MATERIALIZE_LIMIT}"
        )));
    }
    let sym = if full { Some(Arc::new(symmetric_group(order.max(1))?)) } else { None };
    let mut emb = SymEmbedding {
        n_orbits: bundle.refined().n_orbits(),
        order,
        sym,
        report: SymReport {
            materialized: full,
            representation_defect: None,
            generator_defect: 0.0,
            restriction_defect: 0.0,
            passed: false,
        },
    };

    let mut generator_defect = 0.0f64;
    for a in 0..order {
        for b in a + 1..order {
            let mut perm: Vec<usize> = (0..order).collect();
            perm.swap(a, b);
            let v = emb.matrix(&perm)?;
            for o in 0..emb.n_orbits {
                for (g, &pg) in perm.iter().enumerate() {
                    let moved = sandwich(&v, &bundle.projector(o, g));
                    generator_defect = generator_defect.max(diff(&moved, &bundle.projector(o, pg)));
                }
            }
        }
    }
    let mut restriction_defect = 0.0f64;
    for g in group.elements() {
        let perm: Vec<usize> = group.elements().map(|h| group.mul(g, h)).collect();
        restriction_defect = restriction_defect.max(diff(&emb.matrix(&perm)?, &bundle.ancilla()[g]));
    }
    let representation_defect = match emb.representation() {
        Some(rep) => {
            let r = validate_representation(&rep?, tol);
            Some(
                r.unitarity_defect
                    .max(r.multiplier_law_defect)
                    .max(r.cocycle_defect)
                    .max(r.normalization_defect),
            )
        }
        None => None,
    };
    let passed = generator_defect <= tol.lin
        && restriction_defect <= tol.lin
        && representation_defect.is_none_or(|d| d <= tol.unit);
    emb.report = SymReport {
        materialized: full,
        representation_defect,
        generator_defect,
        restriction_defect,
        passed,
    };
    Ok(emb)
}
