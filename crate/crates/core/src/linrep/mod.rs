//! Unitary (possibly projective) representations of finite groups.

mod decompose;
mod multiplier;

use std::sync::Arc;

use rand::Rng;

pub(crate) use decompose::align;
pub use decompose::{cocycle_element, cocycle_eval, decompose_restriction, IrrepClass, IrrepDecomposition, Subgroup};
pub use multiplier::{central_extension, multiplier_order, qubit_weyl_pair, CentralExtension, MultiplierAnalysis};

use crate::error::{invalid, CovError, Result};
use crate::groups::{FiniteGroup, GSpace};
use crate::linalg::{self, cx, diff, eigh, eye, unitarity_defect, CMatrix, C64, ONE};
use crate::tol::{rng_from_seed, Tolerances};

/// `U(gh) = m(g,h) U(g) U(h)` with unitary `U(g)`.
#[derive(Clone, Debug)]
pub struct Representation {
    group: Arc<FiniteGroup>,
    dim: usize,
    matrices: Vec<CMatrix>,
    /// Row-major `order x order` table; `None` means the trivial multiplier.
    multiplier: Option<Vec<C64>>,
}

impl Representation {
    /// Checks shapes only; see [`validate_representation`] for the laws.
    pub fn new(
        group: Arc<FiniteGroup>,
        matrices: Vec<CMatrix>,
        multiplier: Option<Vec<Vec<C64>>>,
    ) -> Result<Self> {
        let n = group.order();
        if matrices.len() != n {
            return invalid(format!("{} matrices given for a group of order {n}", matrices.len()));
        }
        let dim = matrices[0].nrows();
        if dim == 0 {
            return invalid("representation dimension is zero");
        }
        for (g, m) in matrices.iter().enumerate() {
            if m.shape() != (dim, dim) {
                return invalid(format!(
                    "matrix for element {g} has shape {:?}, expected ({dim}, {dim})",
                    m.shape()
                ));
            }
        }
        let multiplier = match multiplier {
            None => None,
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return invalid(format!("multiplier table must be {n} x {n}"));
                }
                Some(rows.into_iter().flatten().collect())
            }
        };
        Ok(Representation {
            group,
            dim,
            matrices,
            multiplier,
        })
    }

    pub(crate) fn from_parts(
        group: Arc<FiniteGroup>,
        matrices: Vec<CMatrix>,
        multiplier: Option<Vec<C64>>,
    ) -> Self {
        let dim = matrices[0].nrows();
        Representation {
            group,
            dim,
            matrices,
            multiplier,
        }
    }

    /// Permutation representation `U(g)|x> = |gx>` of a G-space.
    pub fn permutation(space: &GSpace) -> Self {
        let n = space.n_points();
        let group = space.group().clone();
        let matrices = group
            .elements()
            .map(|g| {
                let mut m = linalg::zeros(n, n);
                for x in 0..n {
                    m[(space.act(g, x), x)] = ONE;
                }
                m
            })
            .collect();
        Representation::from_parts(group, matrices, None)
    }

    /// `g -> Id_dim`.
    pub fn trivial(group: Arc<FiniteGroup>, dim: usize) -> Self {
        let matrices = group.elements().map(|_| eye(dim)).collect();
        Representation::from_parts(group, matrices, None)
    }

    /// Standard representation of a symmetric group on the orthogonal
    /// complement of the all-ones vector, in the Helmert basis.
    pub fn standard(group: Arc<FiniteGroup>) -> Result<Self> {
        let degree = group
            .degree()
            .ok_or_else(|| CovError::Invalid("standard representation needs a symmetric group".into()))?;
        if degree < 2 {
            return invalid("standard representation needs degree at least 2");
        }
        let w = helmert_isometry(degree);
        let perm = Representation::permutation(&GSpace::natural(group.clone())?);
        let matrices = perm.matrices.iter().map(|u| w.adjoint() * u * &w).collect();
        Ok(Representation::from_parts(group, matrices, None))
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn matrix(&self, g: usize) -> &CMatrix {
        &self.matrices[g]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    #[inline]
    pub fn multiplier(&self, g: usize, h: usize) -> C64 {
        match &self.multiplier {
            None => ONE,
            Some(m) => m[g * self.group.order() + h],
        }
    }

    pub fn multiplier_table(&self) -> Option<&[C64]> {
        self.multiplier.as_deref()
    }

    /// True when a non-trivial multiplier table is attached.
    pub fn is_projective(&self, tol: f64) -> bool {
        self.multiplier
            .as_ref()
            .is_some_and(|m| m.iter().any(|z| (z - ONE).norm() > tol))
    }

    /// Complex conjugate representation.
    pub fn conj(&self) -> Self {
        Representation::from_parts(
            self.group.clone(),
            self.matrices.iter().map(|m| m.map(|z| z.conj())).collect(),
            self.multiplier
                .as_ref()
                .map(|t| t.iter().map(|z| z.conj()).collect()),
        )
    }

    /// Tensor product `g -> U(g) ⊗ W(g)`.
    pub fn tensor(&self, other: &Representation) -> Result<Self> {
        if !Arc::ptr_eq(&self.group, &other.group) && self.group.order() != other.group.order() {
            return invalid("tensor product of representations of different groups");
        }
        let matrices = self
            .matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| a.kronecker(b))
            .collect();
        let multiplier = match (&self.multiplier, &other.multiplier) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x * y).collect()),
        };
        Ok(Representation::from_parts(self.group.clone(), matrices, multiplier))
    }

    /// Block-diagonal sum; both summands must share the multiplier.
    pub fn direct_sum(&self, other: &Representation) -> Result<Self> {
        let (a, b) = (self.dim, other.dim);
        let matrices = self
            .matrices
            .iter()
            .zip(&other.matrices)
            .map(|(x, y)| {
                let mut m = linalg::zeros(a + b, a + b);
                m.view_mut((0, 0), (a, a)).copy_from(x);
                m.view_mut((a, a), (b, b)).copy_from(y);
                m
            })
            .collect();
        let n = self.group.order();
        for g in 0..n {
            for h in 0..n {
                if (self.multiplier(g, h) - other.multiplier(g, h)).norm() > 1e-12 {
                    return invalid("direct sum needs equal multipliers");
                }
            }
        }
        Ok(Representation::from_parts(
            self.group.clone(),
            matrices,
            self.multiplier.clone(),
        ))
    }

    /// `g -> W U(g) W*` for a unitary `W`.
    pub fn conjugated_by(&self, w: &CMatrix) -> Self {
        Representation::from_parts(
            self.group.clone(),
            self.matrices.iter().map(|u| linalg::sandwich(w, u)).collect(),
            self.multiplier.clone(),
        )
    }

    /// Group average `(1/#S) Σ_{s∈S} U(s) A U(s)*` over a subset.
    pub fn twirl(&self, a: &CMatrix, elements: &[usize]) -> CMatrix {
        let mut acc = linalg::zeros(a.nrows(), a.ncols());
        for &s in elements {
            acc += linalg::sandwich(&self.matrices[s], a);
        }
        acc / cx(elements.len() as f64, 0.0)
    }

    /// Largest `|U(h) A - A U(h)|` over a subset.
    pub fn commutation_defect(&self, a: &CMatrix, elements: &[usize]) -> f64 {
        elements
            .iter()
            .map(|&h| {
                let u = &self.matrices[h];
                diff(&(u * a), &(a * u))
            })
            .fold(0.0, f64::max)
    }
}

/// Orthonormal basis of the complement of the all-ones vector in `C^n`.
pub fn helmert_isometry(n: usize) -> CMatrix {
    let mut w = linalg::zeros(n, n - 1);
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            w[(i, k - 1)] = cx(1.0 / norm, 0.0);
        }
        w[(k, k - 1)] = cx(-(k as f64) / norm, 0.0);
    }
    w
}

#[derive(Clone, Debug)]
pub struct RepValidation {
    pub unitarity_defect: f64,
    pub multiplier_law_defect: f64,
    pub cocycle_defect: f64,
    /// `|m(e,g) - 1|`, `|m(g,e) - 1|`.
    pub normalization_defect: f64,
    pub exhaustive: bool,
    pub passed: bool,
}

const FULL_PAIR_ORDER: usize = 200;
const FULL_TRIPLE_ORDER: usize = 60;
const SAMPLES: usize = 10_000;

/// Checks unitarity, `U(gh) = m(g,h)U(g)U(h)` and the 2-cocycle identity;
/// exhaustive for small groups, sampled with a fixed seed otherwise.
pub fn validate_representation(rep: &Representation, tol: &Tolerances) -> RepValidation {
    let g = &rep.group;
    let n = g.order();
    let unitarity = rep
        .matrices
        .iter()
        .map(unitarity_defect)
        .fold(0.0, f64::max);
    let mut rng = rng_from_seed(n as u64 ^ 0x5eed);
    let pairs: Vec<(usize, usize)> = if n <= FULL_PAIR_ORDER {
        (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect()
    } else {
        (0..SAMPLES)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .collect()
    };
    let mut law = 0.0f64;
    for &(a, b) in &pairs {
        let lhs = &rep.matrices[g.mul(a, b)];
        let rhs = (&rep.matrices[a] * &rep.matrices[b]) * rep.multiplier(a, b);
        law = law.max(diff(lhs, &rhs));
    }
    let mut cocycle = 0.0f64;
    let mut normalization = 0.0f64;
    if rep.multiplier.is_some() {
        let e = g.identity();
        for a in 0..n {
            normalization = normalization
                .max((rep.multiplier(e, a) - ONE).norm())
                .max((rep.multiplier(a, e) - ONE).norm());
        }
        let mut check = |a: usize, b: usize, c: usize| {
            let lhs = rep.multiplier(a, b) * rep.multiplier(g.mul(a, b), c);
            let rhs = rep.multiplier(a, g.mul(b, c)) * rep.multiplier(b, c);
            cocycle = cocycle.max((lhs - rhs).norm());
        };
        if n <= FULL_TRIPLE_ORDER {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        check(a, b, c);
                    }
                }
            }
        } else {
            for _ in 0..SAMPLES {
                check(
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                );
            }
        }
    }
    let passed = unitarity <= tol.unit
        && law <= tol.unit
        && cocycle <= tol.unit
        && normalization <= tol.unit;
    RepValidation {
        unitarity_defect: unitarity,
        multiplier_law_defect: law,
        cocycle_defect: cocycle,
        normalization_defect: normalization,
        exhaustive: n <= FULL_TRIPLE_ORDER,
        passed,
    }
}

/// Generalized inverse square root of a positive semidefinite matrix.
#[derive(Clone, Debug)]
pub struct InverseSqrt {
    pub inv_sqrt: CMatrix,
    pub support: CMatrix,
    pub rank: usize,
    /// Eigenvalues of the input, ascending.
    pub eigenvalues: Vec<f64>,
}

/// `K^{-1/2}` on the support of `K` together with the support projection.
/// Eigenvalues at or below `cutoff` times the largest are treated as zero.
pub fn hermitian_isqrt(k: &CMatrix, cutoff: f64, tol: &Tolerances) -> Result<InverseSqrt> {
    let n = k.nrows();
    if k.ncols() != n {
        return invalid("hermitian_isqrt needs a square matrix");
    }
    let (vals, vecs) = eigh(k);
    let top = vals.iter().copied().fold(0.0, f64::max);
    let lowest = vals.first().copied().unwrap_or(0.0);
    if lowest < -tol.psd * top.max(1.0) {
        return Err(CovError::NotPsd(lowest));
    }
    let mut inv_sqrt = linalg::zeros(n, n);
    let mut support = linalg::zeros(n, n);
    let mut rank = 0;
    for (i, &v) in vals.iter().enumerate() {
        if top > 0.0 && v > cutoff * top {
            rank += 1;
            let col = vecs.column(i).into_owned();
            let proj = &col * col.adjoint();
            inv_sqrt += &proj * cx(1.0 / v.sqrt(), 0.0);
            support += proj;
        }
    }
    Ok(InverseSqrt {
        inv_sqrt,
        support,
        rank,
        eigenvalues: vals,
    })
}
