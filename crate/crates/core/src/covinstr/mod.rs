//! Covariant instruments and channels built from intertwiners.
//!
//! An intertwiner family for orbit `O` and stabilizer class `η` is a list of
//! operators `L_i : C^{D_in} -> C^{D_out}` with
//! `L_i U(h) = Σ_j η_ij(h) V(h) L_j` for `h` in the stabilizer. Families are
//! expanded into pointwise Kraus operators, a minimal dilation, and the two
//! extremality tests.

mod dilation;
mod extreme;
mod kraus;

use std::sync::Arc;

use rand::Rng as _;

pub use dilation::{minimal_dilation, reduce_to_minimal, DilationBundle, DilationReport, Reduction};
pub use extreme::{
    covariant_extremality, extreme_global, extreme_in_covariance_structure, CovariantExtremality, ExtremalityWitness,
    GlobalExtremality,
};
pub use kraus::{KrausInstrument, SUPEROPERATOR_LIMIT};

use crate::covobs::CovariantPOVM;
use crate::error::{invalid, CovError, Result};
use crate::groups::GSpace;
use crate::linalg::{self, cx, diff, eigh, gram_test, sandwich, CMatrix, C64};
use crate::linrep::{align, cocycle_eval, decompose_restriction, hermitian_isqrt, IrrepDecomposition, Representation};
use crate::tol::{Rng, Tolerances};

/// Operators `L_{η,i,m}`, `i = 0..D_η`, for one multiplicity index `m`.
#[derive(Clone, Debug)]
pub struct IntertwinerFamily {
    pub orbit: usize,
    pub class: usize,
    pub ops: Vec<CMatrix>,
}

/// Per-orbit decomposition of `h -> U(h) ⊗ conj(V(h))` over the stabilizer.
/// Class `η` of this decomposition labels the intertwiner families whose
/// operators are the conjugated, reshaped embedding columns.
pub fn intertwiner_catalogs(
    space: &GSpace,
    input: &Representation,
    output: &Representation,
    rng: &mut Rng,
    tol: &Tolerances,
) -> Result<Vec<Arc<IrrepDecomposition>>> {
    check_ordinary(input, output, tol)?;
    let joint = input.tensor(&output.conj())?;
    space
        .orbits()
        .iter()
        .map(|o| decompose_restriction(&joint, &o.stabilizer, rng, tol).map(Arc::new))
        .collect()
}

fn check_ordinary(input: &Representation, output: &Representation, tol: &Tolerances) -> Result<()> {
    if input.group().order() != output.group().order() {
        return invalid("input and output representations belong to different groups");
    }
    if input.is_projective(tol.unit) || output.is_projective(tol.unit) {
        return invalid("instruments need ordinary representations; lift projective ones first");
    }
    Ok(())
}

/// The `copy`-th canonical family of `class`: `L_i = unvec(conj(e_{η,i,copy}))`.
pub fn basis_family(
    catalog: &IrrepDecomposition,
    orbit: usize,
    class: usize,
    copy: usize,
    d_in: usize,
    d_out: usize,
) -> IntertwinerFamily {
    let c = &catalog.classes[class];
    let ops = (0..c.dim)
        .map(|i| {
            let col: Vec<C64> = c.embeddings[copy].column(i).iter().map(|z| z.conj()).collect();
            CMatrix::from_column_slice(d_out, d_in, &col)
        })
        .collect();
    IntertwinerFamily { orbit, class, ops }
}

#[derive(Clone, Debug)]
pub struct IntertwinerSet {
    space: Arc<GSpace>,
    input: Arc<Representation>,
    output: Arc<Representation>,
    catalogs: Vec<Arc<IrrepDecomposition>>,
    families: Vec<IntertwinerFamily>,
}

/// Defects of an intertwiner set against its defining relations.
#[derive(Clone, Debug)]
pub struct IntertwinerReport {
    pub hinv_defect: f64,
    pub normalization_defect: f64,
    pub minimal: bool,
    /// Per orbit, the Gram spectrum of all its operators.
    pub gram_spectra: Vec<Vec<f64>>,
    pub passed: bool,
}

impl IntertwinerSet {
    pub fn new(
        space: Arc<GSpace>,
        input: Arc<Representation>,
        output: Arc<Representation>,
        catalogs: Vec<Arc<IrrepDecomposition>>,
        families: Vec<IntertwinerFamily>,
    ) -> Result<Self> {
        if catalogs.len() != space.orbits().len() {
            return invalid("one catalog per orbit is required");
        }
        if input.group().order() != space.group().order() || output.group().order() != space.group().order() {
            return invalid("representations and space belong to different groups");
        }
        let (d_in, d_out) = (input.dim(), output.dim());
        for (k, f) in families.iter().enumerate() {
            let cat = catalogs
                .get(f.orbit)
                .ok_or_else(|| CovError::Invalid(format!("intertwiner {k}: orbit {} does not exist", f.orbit)))?;
            let class = cat.classes.get(f.class).ok_or_else(|| {
                CovError::Invalid(format!("intertwiner {k}: class {} does not exist on orbit {}", f.class, f.orbit))
            })?;
            if f.ops.len() != class.dim {
                return invalid(format!(
                    "intertwiner {k}: class {} needs {} operators, got {}",
                    f.class,
                    class.dim,
                    f.ops.len()
                ));
            }
            if f.ops.iter().any(|l| l.shape() != (d_out, d_in)) {
                return invalid(format!("intertwiner {k}: operators must be {d_out} x {d_in}"));
            }
        }
        Ok(IntertwinerSet {
            space,
            input,
            output,
            catalogs,
            families,
        })
    }

    pub fn space(&self) -> &Arc<GSpace> {
        &self.space
    }

    pub fn input(&self) -> &Arc<Representation> {
        &self.input
    }

    pub fn output(&self) -> &Arc<Representation> {
        &self.output
    }

    pub fn catalogs(&self) -> &[Arc<IrrepDecomposition>] {
        &self.catalogs
    }

    pub fn catalog(&self, orbit: usize) -> &IrrepDecomposition {
        &self.catalogs[orbit]
    }

    pub fn families(&self) -> &[IntertwinerFamily] {
        &self.families
    }

    fn with_families(&self, families: Vec<IntertwinerFamily>) -> Self {
        IntertwinerSet {
            space: self.space.clone(),
            input: self.input.clone(),
            output: self.output.clone(),
            catalogs: self.catalogs.clone(),
            families,
        }
    }

    /// Indices of the families belonging to `(orbit, class)`, in order.
    pub fn block(&self, orbit: usize, class: usize) -> Vec<usize> {
        (0..self.families.len())
            .filter(|&k| self.families[k].orbit == orbit && self.families[k].class == class)
            .collect()
    }

    /// Distinct `(orbit, class)` pairs that carry at least one family.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.families.iter().map(|f| (f.orbit, f.class)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn multiplicity(&self, orbit: usize, class: usize) -> usize {
        self.block(orbit, class).len()
    }

    /// `max |L_i U(h) - Σ_j η_ij(h) V(h) L_j|`.
    pub fn hinv_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for f in &self.families {
            let cat = &self.catalogs[f.orbit];
            for &h in &self.space.orbit(f.orbit).stabilizer {
                let eta = cat.eta(f.class, h);
                let (u, v) = (self.input.matrix(h), self.output.matrix(h));
                for i in 0..f.ops.len() {
                    let lhs = &f.ops[i] * u;
                    let mut rhs = linalg::zeros(lhs.nrows(), lhs.ncols());
                    for j in 0..f.ops.len() {
                        rhs += v * &f.ops[j] * eta[(i, j)];
                    }
                    worst = worst.max(diff(&lhs, &rhs));
                }
            }
        }
        worst
    }

    /// `Σ_O Σ_g Σ (1/#H_O) U(g) L* L U(g)*`.
    pub fn normalizer(&self) -> CMatrix {
        let d = self.input.dim();
        let mut k = linalg::zeros(d, d);
        for (oi, orbit) in self.space.orbits().iter().enumerate() {
            let mut a = linalg::zeros(d, d);
            for f in self.families.iter().filter(|f| f.orbit == oi) {
                for l in &f.ops {
                    a += l.adjoint() * l;
                }
            }
            let twirled = self.input.twirl(&a, &orbit.stabilizer);
            for &x in &orbit.points {
                k += sandwich(self.input.matrix(self.space.section(x)), &twirled);
            }
        }
        k
    }

    pub fn normalization_defect(&self) -> f64 {
        diff(&self.normalizer(), &linalg::eye(self.input.dim()))
    }

    /// All operators of one orbit, flattened over families and `i`.
    fn orbit_ops(&self, orbit: usize) -> Vec<CMatrix> {
        self.families
            .iter()
            .filter(|f| f.orbit == orbit)
            .flat_map(|f| f.ops.iter().cloned())
            .collect()
    }

    pub fn is_minimal(&self, tol: &Tolerances) -> bool {
        (0..self.space.orbits().len()).all(|o| gram_test(&self.orbit_ops(o), tol.rank).independent())
    }

    pub fn validate(&self, tol: &Tolerances) -> IntertwinerReport {
        let hinv_defect = self.hinv_defect();
        let normalization_defect = self.normalization_defect();
        let tests: Vec<_> = (0..self.space.orbits().len())
            .map(|o| gram_test(&self.orbit_ops(o), tol.rank))
            .collect();
        IntertwinerReport {
            hinv_defect,
            normalization_defect,
            minimal: tests.iter().all(|t| t.independent()),
            gram_spectra: tests.into_iter().map(|t| t.spectrum).collect(),
            passed: hinv_defect <= tol.lin && normalization_defect <= tol.lin,
        }
    }

    /// `L -> L K^{-1/2}`; the normalizer of the result is the support of `K`.
    pub fn renormalize(&self, tol: &Tolerances) -> Result<(IntertwinerSet, CMatrix)> {
        let k = self.normalizer();
        if linalg::max_abs(&k) == 0.0 {
            return Err(CovError::Degenerate("all intertwiners vanish".into()));
        }
        let isq = hermitian_isqrt(&k, tol.rank, tol)?;
        let families = self
            .families
            .iter()
            .map(|f| IntertwinerFamily {
                orbit: f.orbit,
                class: f.class,
                ops: f.ops.iter().map(|l| l * &isq.inv_sqrt).collect(),
            })
            .collect();
        Ok((self.with_families(families), isq.support))
    }

    /// Re-express the families over other catalogs for the same orbits:
    /// `L'_k = Σ_i conj(T_ik) L_i` where `η(h) T = T η'(h)`.
    pub fn rebase(&self, catalogs: Vec<Arc<IrrepDecomposition>>, rng: &mut Rng, tol: &Tolerances) -> Result<Self> {
        if catalogs.len() != self.catalogs.len() {
            return invalid("one catalog per orbit is required");
        }
        let mut families = Vec::new();
        for f in &self.families {
            let old = &self.catalogs[f.orbit].classes[f.class];
            let new_cat = &catalogs[f.orbit];
            let class = new_cat.find_class(old.dim, &old.character, tol.character).ok_or_else(|| {
                CovError::Numerical(format!("class {} of orbit {} has no counterpart", f.class, f.orbit))
            })?;
            let t = align(&old.matrices, &new_cat.classes[class].matrices, rng)?;
            let ops = (0..old.dim)
                .map(|k| {
                    let mut l = linalg::zeros(f.ops[0].nrows(), f.ops[0].ncols());
                    for i in 0..old.dim {
                        l += &f.ops[i] * t[(i, k)].conj();
                    }
                    l
                })
                .collect();
            families.push(IntertwinerFamily {
                orbit: f.orbit,
                class,
                ops,
            });
        }
        IntertwinerSet::new(
            self.space.clone(),
            self.input.clone(),
            self.output.clone(),
            catalogs,
            families,
        )
    }

    /// `K_{x,η,i,m} = Σ_j ζ_ij(g⁻¹, x) V(g) L_j U(g)*` for any `g` with
    /// `g x_O = x`.
    pub fn kraus_at(&self, x: usize, g: usize) -> Result<Vec<CMatrix>> {
        let o = self.space.orbit_of(x);
        let base = self.space.orbit(o).base;
        if self.space.act(g, base) != x {
            return invalid(format!("element {g} does not carry the base point to {x}"));
        }
        let grp = self.space.group();
        let (u, v) = (self.input.matrix(g), self.output.matrix(g));
        let mut out = Vec::new();
        for f in self.families.iter().filter(|f| f.orbit == o) {
            let zeta = cocycle_eval(&self.catalogs[o], f.class, &self.space, grp.inv(g), x);
            for i in 0..f.ops.len() {
                let mut acc = linalg::zeros(f.ops[0].nrows(), f.ops[0].ncols());
                for j in 0..f.ops.len() {
                    acc += &f.ops[j] * zeta[(i, j)];
                }
                out.push(v * acc * u.adjoint());
            }
        }
        Ok(out)
    }
}

/// Random intertwiner set with at most `max_multiplicity` families per
/// class, drawn uniformly from the span of each class's canonical families
/// and renormalized. Never empty.
pub fn random_intertwiners(
    space: Arc<GSpace>,
    input: Arc<Representation>,
    output: Arc<Representation>,
    catalogs: Vec<Arc<IrrepDecomposition>>,
    max_multiplicity: usize,
    rng: &mut Rng,
    tol: &Tolerances,
) -> Result<IntertwinerSet> {
    let (d_in, d_out) = (input.dim(), output.dim());
    let mut families = Vec::new();
    while families.is_empty() {
        for (o, cat) in catalogs.iter().enumerate() {
            for (c, class) in cat.classes.iter().enumerate() {
                let cap = class.multiplicity.min(max_multiplicity);
                let count = rng.random_range(0..=cap);
                let basis: Vec<IntertwinerFamily> = (0..class.multiplicity)
                    .map(|k| basis_family(cat, o, c, k, d_in, d_out))
                    .collect();
                for _ in 0..count {
                    let coeffs = linalg::random_vector(class.multiplicity, rng);
                    let ops = (0..class.dim)
                        .map(|i| {
                            let mut l = linalg::zeros(d_out, d_in);
                            for (k, b) in basis.iter().enumerate() {
                                l += &b.ops[i] * coeffs[k];
                            }
                            l
                        })
                        .collect();
                    families.push(IntertwinerFamily { orbit: o, class: c, ops });
                }
            }
        }
    }
    let set = IntertwinerSet::new(space, input, output, catalogs, families)?;
    Ok(set.renormalize(tol)?.0)
}

/// Square roots of the base-point effects, `L_O = M_{x_O}^{1/2}`, as
/// intertwiners with `V = U` and trivial stabilizer class.
pub fn luders_intertwiners(
    povm: &CovariantPOVM,
    catalogs: Vec<Arc<IrrepDecomposition>>,
    tol: &Tolerances,
) -> Result<IntertwinerSet> {
    let space = povm.space().clone();
    let rep = povm.rep().clone();
    let mut families = Vec::new();
    for (o, cat) in catalogs.iter().enumerate() {
        let (vals, vecs) = eigh(povm.seed(o));
        let mut root = linalg::zeros(rep.dim(), rep.dim());
        for (k, &l) in vals.iter().enumerate() {
            if l > 0.0 {
                let v = vecs.column(k).into_owned();
                root += linalg::ket_bra(&v, &v) * cx(l.sqrt(), 0.0);
            }
        }
        if linalg::max_abs(&root) <= tol.lin {
            continue;
        }
        let class = cat
            .classes
            .iter()
            .position(|c| c.is_trivial(tol.character))
            .ok_or_else(|| CovError::Numerical(format!("orbit {o}: no trivial class in catalog")))?;
        families.push(IntertwinerFamily {
            orbit: o,
            class,
            ops: vec![root],
        });
    }
    IntertwinerSet::new(space, rep.clone(), rep, catalogs, families)
}

/// A covariant instrument together with the intertwiners that define it.
#[derive(Clone, Debug)]
pub struct CovariantInstrument {
    set: IntertwinerSet,
    maps: KrausInstrument,
}

impl CovariantInstrument {
    pub fn set(&self) -> &IntertwinerSet {
        &self.set
    }

    pub fn maps(&self) -> &KrausInstrument {
        &self.maps
    }
}

/// Expand a normalized intertwiner set into pointwise Kraus operators using
/// the section of the space.
pub fn build_instrument(set: &IntertwinerSet, tol: &Tolerances) -> Result<CovariantInstrument> {
    let report = set.validate(tol);
    if report.hinv_defect > tol.lin {
        return invalid(format!(
            "intertwiners violate the stabilizer relation (defect {:.3e})",
            report.hinv_defect
        ));
    }
    if report.normalization_defect > tol.lin {
        return invalid(format!(
            "intertwiners are not normalized (defect {:.3e})",
            report.normalization_defect
        ));
    }
    let space = set.space();
    let kraus = (0..space.n_points())
        .map(|x| set.kraus_at(x, space.section(x)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CovariantInstrument {
        set: set.clone(),
        maps: KrausInstrument::new(space.clone(), set.input().clone(), set.output().clone(), kraus)?,
    })
}

/// Measure-and-prepare instrument `I_x(ρ) = tr(ρ M_x) V(g_x) σ_O V(g_x)*`,
/// where `σ_O` is the stabilizer average of the given state.
pub fn nuclear_instrument(
    povm: &CovariantPOVM,
    output: Arc<Representation>,
    states: &[CMatrix],
    tol: &Tolerances,
) -> Result<(KrausInstrument, Vec<CMatrix>)> {
    let space = povm.space().clone();
    if states.len() != space.orbits().len() {
        return invalid("one output state per orbit is required");
    }
    if !povm.is_normalized(tol) {
        return invalid("nuclear instruments need a normalized POVM");
    }
    let d_out = output.dim();
    let mut sigmas = Vec::new();
    for (o, s) in states.iter().enumerate() {
        if s.shape() != (d_out, d_out) {
            return invalid(format!("state for orbit {o} must be {d_out} x {d_out}"));
        }
        let herm = diff(s, &s.adjoint());
        let tr = linalg::trace(s);
        if herm > tol.lin || (tr - linalg::ONE).norm() > tol.lin || linalg::min_eigenvalue(s) < -tol.psd {
            return invalid(format!("output for orbit {o} is not a density matrix"));
        }
        sigmas.push(output.twirl(s, &space.orbit(o).stabilizer));
    }
    let mut kraus = Vec::new();
    for x in 0..space.n_points() {
        let g = space.section(x);
        let sigma = sandwich(output.matrix(g), &sigmas[space.orbit_of(x)]);
        let (sv, svec) = eigh(&sigma);
        let (mv, mvec) = eigh(povm.effect(x));
        let mut ks = Vec::new();
        for (a, &p) in sv.iter().enumerate() {
            if p <= tol.psd {
                continue;
            }
            for (b, &q) in mv.iter().enumerate() {
                if q <= tol.psd {
                    continue;
                }
                let k = svec.column(a) * mvec.column(b).adjoint() * cx((p * q).sqrt(), 0.0);
                ks.push(k);
            }
        }
        kraus.push(ks);
    }
    Ok((
        KrausInstrument::new(space, povm.rep().clone(), output, kraus)?,
        sigmas,
    ))
}

/// One-point outcome space on which every group element acts trivially,
/// turning instruments into channels.
pub fn channel_space(space_group: Arc<crate::groups::FiniteGroup>) -> Result<GSpace> {
    GSpace::trivial(space_group, 1)
}

#[cfg(test)]
mod tests;
