use std::sync::Arc;

use super::{CovariantPOVM, SeedVectors};
use crate::error::{CovError, Result};
use crate::linalg::{self, diff, eigh, gram_test, ket_bra, sandwich, CMatrix, CVector, C64};
use crate::linrep::{decompose_restriction, IrrepDecomposition};
use crate::tol::{Rng, Tolerances};

/// Seed vectors `d_{η,i,r}` recovered from `K_O` in a basis adapted to the
/// stabilizer.
#[derive(Clone, Debug)]
pub struct OrbitVectors {
    pub orbit: usize,
    pub decomposition: Arc<IrrepDecomposition>,
    /// One entry per `(η, r)`.
    pub groups: Vec<SeedVectors>,
    /// `|Σ |d><d| - K_O|`.
    pub reconstruction_defect: f64,
}

#[derive(Clone, Debug)]
pub struct ObsClassification {
    pub is_rank1: bool,
    pub is_pvm: bool,
    pub is_norm1: bool,
    pub is_informationally_complete: bool,
    pub is_extreme_covariant: bool,
    pub is_extreme_global: bool,
    pub effect_ranks: Vec<usize>,
    /// Largest eigenvalue of each effect.
    pub effect_norms: Vec<f64>,
    pub nonzero_effects: usize,
    /// Dimension of the span of the effects.
    pub span_dimension: usize,
    /// Gram spectrum of the effects, descending.
    pub ic_spectrum: Vec<f64>,
    /// Gram spectrum of the covariant-extremality family.
    pub covariant_spectrum: Vec<f64>,
    pub covariant_family_size: usize,
    /// Gram spectrum of `{|d_xk><d_xl|}`.
    pub global_spectrum: Vec<f64>,
    pub global_family_size: usize,
    /// Orbits whose seed vanishes.
    pub zero_orbits: Vec<usize>,
}

fn effect_scale(povm: &CovariantPOVM) -> f64 {
    povm.effects()
        .iter()
        .map(|m| eigh(m).0.last().copied().unwrap_or(0.0))
        .fold(0.0, f64::max)
}

/// Recover `d_{η,i,r}` for every orbit from `k_η[m,n] = <e_{η,i,m}|K_O|e_{η,i,n}>`.
pub fn seed_vectors(povm: &CovariantPOVM, rng: &mut Rng, tol: &Tolerances) -> Result<Vec<OrbitVectors>> {
    let space = povm.space();
    let rep = povm.rep();
    let cutoff = tol.rank * effect_scale(povm).max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    for (oi, orbit) in space.orbits().iter().enumerate() {
        let k = povm.seed(oi);
        let dec = Arc::new(decompose_restriction(rep, &orbit.stabilizer, rng, tol)?);
        let mut groups = Vec::new();
        let mut rebuilt = linalg::zeros(povm.dim(), povm.dim());
        for (ci, class) in dec.classes.iter().enumerate() {
            let mult = class.multiplicity;
            let mut kc = linalg::zeros(mult, mult);
            for i in 0..class.dim {
                for m in 0..mult {
                    for n in 0..mult {
                        let em = class.embeddings[m].column(i);
                        let en = class.embeddings[n].column(i);
                        kc[(m, n)] += em.dotc(&(k * en));
                    }
                }
            }
            kc /= C64::new(class.dim as f64, 0.0);
            let (vals, vecs) = eigh(&kc);
            for (r, &lam) in vals.iter().enumerate() {
                if lam <= cutoff {
                    continue;
                }
                let w = vecs.column(r);
                let s = lam.sqrt();
                let vectors: Vec<CVector> = (0..class.dim)
                    .map(|i| {
                        let mut v = CVector::zeros(povm.dim());
                        for m in 0..mult {
                            v += class.embeddings[m].column(i) * (w[m] * s);
                        }
                        v
                    })
                    .collect();
                for v in &vectors {
                    rebuilt += ket_bra(v, v);
                }
                groups.push(SeedVectors { class: ci, vectors });
            }
        }
        out.push(OrbitVectors {
            orbit: oi,
            decomposition: dec,
            groups,
            reconstruction_defect: diff(&rebuilt, k),
        });
    }
    Ok(out)
}

fn is_pvm(effects: &[CMatrix], tol: f64) -> bool {
    for (x, a) in effects.iter().enumerate() {
        if diff(&(a * a), a) > tol {
            return false;
        }
        for b in &effects[x + 1..] {
            if linalg::max_abs(&(a * b)) > tol {
                return false;
            }
        }
    }
    true
}

/// Decide the structural properties of a normalized covariant POVM.
pub fn classify(povm: &CovariantPOVM, rng: &mut Rng, tol: &Tolerances) -> Result<ObsClassification> {
    let defect = povm.normalization_defect();
    if defect > tol.lin {
        return Err(CovError::Invalid(format!(
            "effects do not sum to the identity (defect {defect:.3e})"
        )));
    }
    let space = povm.space();
    let scale = effect_scale(povm);
    let cutoff = tol.rank * scale;

    let mut effect_ranks = Vec::new();
    let mut effect_norms = Vec::new();
    let mut global = Vec::new();
    for m in povm.effects() {
        let (vals, vecs) = eigh(m);
        effect_norms.push(vals.last().copied().unwrap_or(0.0));
        let ds: Vec<CVector> = vals
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > cutoff)
            .map(|(k, &l)| vecs.column(k) * C64::new(l.sqrt(), 0.0))
            .collect();
        effect_ranks.push(ds.len());
        for a in &ds {
            for b in &ds {
                global.push(ket_bra(a, b));
            }
        }
    }
    let nonzero_effects = effect_ranks.iter().filter(|&&r| r > 0).count();
    let is_rank1 = effect_ranks.iter().all(|&r| r <= 1);
    let is_norm1 = effect_ranks
        .iter()
        .zip(&effect_norms)
        .all(|(&r, &n)| r == 0 || (n - 1.0).abs() <= tol.lin);

    let ic = gram_test(povm.effects(), tol.rank);
    let d = povm.dim();
    let global_test = gram_test(&global, tol.rank);

    let mut family = Vec::new();
    for ov in seed_vectors(povm, rng, tol)? {
        let orbit = space.orbit(ov.orbit);
        let h = orbit.stabilizer.len() as f64;
        let mut by_class: Vec<Vec<&SeedVectors>> = vec![Vec::new(); ov.decomposition.classes.len()];
        for grp in &ov.groups {
            by_class[grp.class].push(grp);
        }
        for grps in by_class {
            for a in &grps {
                for b in &grps {
                    let mut op = linalg::zeros(d, d);
                    for (va, vb) in a.vectors.iter().zip(&b.vectors) {
                        op += ket_bra(va, vb);
                    }
                    let mut sum = linalg::zeros(d, d);
                    for &x in &orbit.points {
                        sum += sandwich(povm.rep().matrix(space.section(x)), &op);
                    }
                    family.push(sum * C64::new(h, 0.0));
                }
            }
        }
    }
    let cov_test = gram_test(&family, tol.rank);

    let zero_orbits = (0..space.orbits().len())
        .filter(|&o| effect_ranks[space.orbit(o).base] == 0)
        .collect();

    Ok(ObsClassification {
        is_rank1,
        is_pvm: is_pvm(povm.effects(), tol.lin),
        is_norm1,
        is_informationally_complete: ic.rank == d * d,
        is_extreme_covariant: cov_test.independent(),
        is_extreme_global: global_test.independent(),
        effect_ranks,
        effect_norms,
        nonzero_effects,
        span_dimension: ic.rank,
        ic_spectrum: ic.spectrum,
        covariant_spectrum: cov_test.spectrum,
        covariant_family_size: cov_test.count,
        global_spectrum: global_test.spectrum,
        global_family_size: global_test.count,
        zero_orbits,
    })
}
