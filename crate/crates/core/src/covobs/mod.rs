//! Covariant POVMs: seeds, normalization, classification and the
//! brute-force covariance solver.

mod classify;
mod solver;

use std::sync::Arc;

pub use classify::{classify, seed_vectors, ObsClassification, OrbitVectors};
pub use solver::{brute_force_covariant_solver, perturbation_oracle, CovariantSolution, Perturbation, SOLVER_LIMIT};

use crate::error::{invalid, CovError, Result};
use crate::groups::GSpace;
use crate::linalg::{self, diff, eigh, ket_bra, sandwich, CMatrix, CVector};
use crate::linrep::{hermitian_isqrt, IrrepDecomposition, Representation};
use crate::tol::Tolerances;

/// Vectors `d_{η,i,m}` for one multiplicity index `m` of class `η`.
#[derive(Clone, Debug)]
pub struct SeedVectors {
    pub class: usize,
    /// One vector per basis index `i` of the class.
    pub vectors: Vec<CVector>,
}

#[derive(Clone, Debug)]
pub enum SeedForm {
    /// Positive operator commuting with the stabilizer.
    Operator(CMatrix),
    /// Vectors transforming under the classes of `decomposition`.
    Vectors {
        decomposition: Arc<IrrepDecomposition>,
        groups: Vec<SeedVectors>,
    },
}

#[derive(Clone, Debug)]
pub struct Seed {
    pub orbit: usize,
    pub form: SeedForm,
}

impl Seed {
    pub fn operator(orbit: usize, k: CMatrix) -> Self {
        Seed {
            orbit,
            form: SeedForm::Operator(k),
        }
    }

    /// Rank-one seed `|d><d|`.
    pub fn vector(orbit: usize, d: &CVector) -> Self {
        Seed::operator(orbit, ket_bra(d, d))
    }
}

/// Outcome-indexed effects `M_x` covariant under `(space, rep)`.
#[derive(Clone, Debug)]
pub struct CovariantPOVM {
    space: Arc<GSpace>,
    rep: Arc<Representation>,
    effects: Vec<CMatrix>,
    seeds: Vec<CMatrix>,
    normalizer: CMatrix,
}

impl CovariantPOVM {
    pub fn space(&self) -> &Arc<GSpace> {
        &self.space
    }

    pub fn rep(&self) -> &Arc<Representation> {
        &self.rep
    }

    pub fn dim(&self) -> usize {
        self.rep.dim()
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn effect(&self, x: usize) -> &CMatrix {
        &self.effects[x]
    }

    /// `K_O = M_{x_O}`.
    pub fn seed(&self, orbit: usize) -> &CMatrix {
        &self.seeds[orbit]
    }

    /// `K = Σ_x M_x`.
    pub fn normalizer(&self) -> &CMatrix {
        &self.normalizer
    }

    pub fn normalization_defect(&self) -> f64 {
        diff(&self.normalizer, &linalg::eye(self.dim()))
    }

    pub fn is_normalized(&self, tol: &Tolerances) -> bool {
        self.normalization_defect() <= tol.lin
    }

    /// `max_{g,x} |U(g) M_x U(g)* - M_{gx}|`.
    pub fn covariance_defect(&self) -> f64 {
        let g = self.space.group();
        let mut worst = 0.0f64;
        for a in g.elements() {
            let u = self.rep.matrix(a);
            for x in 0..self.effects.len() {
                let y = self.space.act(a, x);
                worst = worst.max(diff(&sandwich(u, &self.effects[x]), &self.effects[y]));
            }
        }
        worst
    }

    /// Smallest eigenvalue over all effects.
    pub fn positivity(&self) -> f64 {
        self.effects
            .iter()
            .map(linalg::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Assemble from explicit effects, e.g. a point of the solver's solution
    /// space. Covariance is not checked here.
    pub fn from_effects(
        space: Arc<GSpace>,
        rep: Arc<Representation>,
        effects: Vec<CMatrix>,
    ) -> Result<Self> {
        if effects.len() != space.n_points() {
            return invalid(format!(
                "{} effects for {} outcomes",
                effects.len(),
                space.n_points()
            ));
        }
        let d = rep.dim();
        if effects.iter().any(|m| m.shape() != (d, d)) {
            return invalid("effect has the wrong shape");
        }
        let mut normalizer = linalg::zeros(d, d);
        for m in &effects {
            normalizer += m;
        }
        let seeds = space
            .orbits()
            .iter()
            .map(|o| effects[o.base].clone())
            .collect();
        Ok(CovariantPOVM {
            space,
            rep,
            effects,
            seeds,
            normalizer,
        })
    }
}

fn seed_operator(seed: &Seed, space: &GSpace, rep: &Representation, tol: &Tolerances) -> Result<CMatrix> {
    let d = rep.dim();
    let orbit = seed.orbit;
    let stab = &space.orbit(orbit).stabilizer;
    let reject = |reason: &str, defect: f64| CovError::SeedValidation {
        orbit,
        reason: reason.to_string(),
        defect,
    };
    let k = match &seed.form {
        SeedForm::Operator(k) => {
            if k.shape() != (d, d) {
                return invalid(format!("seed for orbit {orbit} must be {d} x {d}"));
            }
            let herm = diff(k, &k.adjoint());
            if herm > tol.lin {
                return Err(reject("seed is not Hermitian", herm));
            }
            k.clone()
        }
        SeedForm::Vectors {
            decomposition,
            groups,
        } => {
            let mut k = linalg::zeros(d, d);
            for grp in groups {
                let class = decomposition.classes.get(grp.class).ok_or_else(|| {
                    CovError::Invalid(format!("orbit {orbit}: class {} does not exist", grp.class))
                })?;
                if grp.vectors.len() != class.dim {
                    return invalid(format!(
                        "orbit {orbit}: class {} needs {} vectors per copy",
                        grp.class, class.dim
                    ));
                }
                if grp.vectors.iter().any(|v| v.len() != d) {
                    return invalid(format!("orbit {orbit}: seed vectors must have length {d}"));
                }
                // U(h) d_i = Σ_j η_{j,i}(h) d_j
                let mut defect = 0.0f64;
                for &h in stab {
                    let eta = decomposition.eta(grp.class, h);
                    for i in 0..class.dim {
                        let lhs = rep.matrix(h) * &grp.vectors[i];
                        let mut rhs = CVector::zeros(d);
                        for j in 0..class.dim {
                            rhs += &grp.vectors[j] * eta[(j, i)];
                        }
                        defect = defect.max((lhs - rhs).camax());
                    }
                }
                if defect > tol.lin {
                    return Err(reject("seed vectors do not transform under their class", defect));
                }
                for v in &grp.vectors {
                    k += ket_bra(v, v);
                }
            }
            let vs: Vec<CMatrix> = groups
                .iter()
                .flat_map(|g| g.vectors.iter().map(|v| CMatrix::from_column_slice(d, 1, v.as_slice())))
                .collect();
            let t = linalg::gram_test(&vs, tol.rank);
            if !t.independent() {
                return Err(reject("seed vectors are linearly dependent", t.smallest()));
            }
            k
        }
    };
    let (vals, _) = eigh(&k);
    let top = vals.last().copied().unwrap_or(0.0);
    let low = vals.first().copied().unwrap_or(0.0);
    if low < -tol.psd * top.max(1.0) {
        return Err(reject("seed is not positive semidefinite", -low));
    }
    let comm = rep.commutation_defect(&k, stab);
    if comm > tol.lin * top.max(1.0) {
        return Err(reject("seed does not commute with the stabilizer", comm));
    }
    Ok(k)
}

/// `M_x = U(g_x) K_O U(g_x)*` with `K_O` from the orbit's seed (zero for
/// orbits without one).
pub fn build_from_seeds(
    space: Arc<GSpace>,
    rep: Arc<Representation>,
    seeds: &[Seed],
    tol: &Tolerances,
) -> Result<CovariantPOVM> {
    if seeds.is_empty() {
        return invalid("no seeds given");
    }
    if rep.group().order() != space.group().order() {
        return invalid("representation and space belong to different groups");
    }
    let d = rep.dim();
    let mut ks = vec![linalg::zeros(d, d); space.orbits().len()];
    let mut seen = vec![false; ks.len()];
    for seed in seeds {
        if seed.orbit >= ks.len() {
            return invalid(format!("seed refers to orbit {} but there are {}", seed.orbit, ks.len()));
        }
        if seen[seed.orbit] {
            return invalid(format!("orbit {} has more than one seed", seed.orbit));
        }
        seen[seed.orbit] = true;
        ks[seed.orbit] = seed_operator(seed, &space, &rep, tol)?;
    }
    let effects: Vec<CMatrix> = (0..space.n_points())
        .map(|x| sandwich(rep.matrix(space.section(x)), &ks[space.orbit_of(x)]))
        .collect();
    let mut normalizer = linalg::zeros(d, d);
    for m in &effects {
        normalizer += m;
    }
    Ok(CovariantPOVM {
        space,
        rep,
        effects,
        seeds: ks,
        normalizer,
    })
}

#[derive(Clone, Debug)]
pub struct Normalized {
    pub povm: CovariantPOVM,
    pub support: CMatrix,
    pub inv_sqrt: CMatrix,
    /// `max_g |U(g) K^{-1/2} - K^{-1/2} U(g)|`.
    pub commutation_defect: f64,
}

/// `M_x -> K^{-1/2} M_x K^{-1/2}`; the result sums to the support of `K`.
pub fn normalize(povm: &CovariantPOVM, tol: &Tolerances) -> Result<Normalized> {
    if linalg::max_abs(&povm.normalizer) == 0.0 {
        return Err(CovError::Degenerate("all effects vanish".into()));
    }
    let isq = hermitian_isqrt(&povm.normalizer, tol.rank, tol)?;
    let all: Vec<usize> = povm.space.group().elements().collect();
    let commutation_defect = povm.rep.commutation_defect(&isq.inv_sqrt, &all);
    let t = &isq.inv_sqrt;
    let effects = povm.effects.iter().map(|m| t * m * t).collect();
    let seeds = povm.seeds.iter().map(|m| t * m * t).collect();
    Ok(Normalized {
        povm: CovariantPOVM {
            space: povm.space.clone(),
            rep: povm.rep.clone(),
            effects,
            seeds,
            normalizer: isq.support.clone(),
        },
        support: isq.support,
        inv_sqrt: isq.inv_sqrt,
        commutation_defect,
    })
}

/// Row and column margins `A_m = Σ_n M_(m,n)`, `B_n = Σ_m M_(m,n)` of a POVM
/// on a Cartesian square.
pub fn margins(povm: &CovariantPOVM) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    let shape = povm
        .space
        .shape()
        .filter(|s| s.power == 2)
        .ok_or_else(|| CovError::Invalid("margins need a Cartesian-square outcome space".into()))?;
    let n = shape.base_points;
    let d = povm.dim();
    let mut a = vec![linalg::zeros(d, d); n];
    let mut b = vec![linalg::zeros(d, d); n];
    for p in 0..n * n {
        a[p / n] += &povm.effects[p];
        b[p % n] += &povm.effects[p];
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests;
