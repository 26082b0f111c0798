use super::CovariantPOVM;
use crate::error::{CovError, Result};
use crate::groups::GSpace;
use crate::linalg::{self, eigh, hermitian_basis, hermitian_coords, hermitian_from_coords, hs, CMatrix, RMatrix};
use crate::linrep::Representation;
use crate::tol::Tolerances;

/// Largest `D² · #X` the solver accepts.
pub const SOLVER_LIMIT: usize = 4096;

// The kernel is read off a normal matrix, whose eigenvalues are squared
// singular values; this is the cutoff on the square root.
const KERNEL_CUTOFF: f64 = 1e-6;

/// Solution space of the covariance equations `U(g) M_x U(g)* = M_{gx}` over
/// Hermitian families, with and without `Σ_x M_x = Id`.
#[derive(Clone, Debug)]
pub struct CovariantSolution {
    dim: usize,
    n_points: usize,
    basis: Vec<CMatrix>,
    /// Columns span the covariant Hermitian families.
    linear: RMatrix,
    /// Columns span the covariant families with `Σ_x M_x = 0`.
    affine: RMatrix,
    /// `M_x = Id/#X`.
    particular: Vec<f64>,
}

impl CovariantSolution {
    pub fn linear_dimension(&self) -> usize {
        self.linear.ncols()
    }

    pub fn affine_dimension(&self) -> usize {
        self.affine.ncols()
    }

    fn family(&self, coords: &[f64]) -> Vec<CMatrix> {
        let dd = self.dim * self.dim;
        (0..self.n_points)
            .map(|x| hermitian_from_coords(&coords[x * dd..(x + 1) * dd], &self.basis))
            .collect()
    }

    fn coords(&self, effects: &[CMatrix]) -> Vec<f64> {
        effects.iter().flat_map(|m| hermitian_coords(m, &self.basis)).collect()
    }

    pub fn linear_family(&self, j: usize) -> Vec<CMatrix> {
        self.family(self.linear.column(j).as_slice())
    }

    pub fn affine_direction(&self, j: usize) -> Vec<CMatrix> {
        self.family(self.affine.column(j).as_slice())
    }

    pub fn particular(&self) -> Vec<CMatrix> {
        self.family(&self.particular)
    }

    /// Particular solution plus `Σ_j c_j` times the affine directions.
    pub fn point(&self, c: &[f64]) -> Vec<CMatrix> {
        let mut v = self.particular.clone();
        for (j, &cj) in c.iter().enumerate().take(self.affine.ncols()) {
            for (k, vk) in v.iter_mut().enumerate() {
                *vk += cj * self.affine[(k, j)];
            }
        }
        self.family(&v)
    }

    fn distance(span: &RMatrix, v: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(v);
        let proj = span * (span.transpose() * &v);
        (v - proj).amax()
    }

    /// Distance of a family from the covariant families.
    pub fn covariance_residual(&self, effects: &[CMatrix]) -> f64 {
        Self::distance(&self.linear, &self.coords(effects))
    }

    /// Distance of a family from the normalized covariant families.
    pub fn residual(&self, effects: &[CMatrix]) -> f64 {
        let mut c = self.coords(effects);
        for (a, b) in c.iter_mut().zip(&self.particular) {
            *a -= b;
        }
        Self::distance(&self.affine, &c)
    }
}

fn kernel(normal: &RMatrix) -> RMatrix {
    let n = normal.nrows();
    let eig = normal.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cut = (KERNEL_CUTOFF * KERNEL_CUTOFF) * top;
    let cols: Vec<usize> = (0..n).filter(|&k| top == 0.0 || eig.eigenvalues[k] <= cut).collect();
    let mut out = RMatrix::zeros(n, cols.len());
    for (c, &k) in cols.iter().enumerate() {
        out.set_column(c, &eig.eigenvectors.column(k));
    }
    out
}

/// Solve the covariance equations directly in Hermitian coordinates, using
/// only a generating set of the group.
pub fn brute_force_covariant_solver(space: &GSpace, rep: &Representation) -> Result<CovariantSolution> {
    let d = rep.dim();
    let nx = space.n_points();
    let dd = d * d;
    let n = dd * nx;
    if n > SOLVER_LIMIT {
        return Err(CovError::SizeLimit(format!(
            "solver needs D^2 * #X <= {SOLVER_LIMIT}, got {n}"
        )));
    }
    let group = space.group();
    let gens = group.generators_of(&group.elements().collect::<Vec<_>>());
    let basis = hermitian_basis(d);

    // Normal matrix of the stacked constraints R_g m_x - m_{gx} = 0.
    let mut normal = RMatrix::zeros(n, n);
    for &g in &gens {
        let u = rep.matrix(g);
        let mut r = RMatrix::zeros(dd, dd);
        for (l, hl) in basis.iter().enumerate() {
            let img = linalg::sandwich(u, hl);
            for (k, hk) in basis.iter().enumerate() {
                r[(k, l)] = hs(hk, &img).re;
            }
        }
        let rtr = r.transpose() * &r;
        for x in 0..nx {
            let y = space.act(g, x);
            let (xs, ys) = (x * dd, y * dd);
            // row block: [.. R at x .., .. -I at y ..]
            let mut xx = normal.view_mut((xs, xs), (dd, dd));
            xx += &rtr;
            let mut yy = normal.view_mut((ys, ys), (dd, dd));
            for k in 0..dd {
                yy[(k, k)] += 1.0;
            }
            let rt = r.transpose();
            let mut xy = normal.view_mut((xs, ys), (dd, dd));
            xy -= &rt;
            let mut yx = normal.view_mut((ys, xs), (dd, dd));
            yx -= &r;
        }
    }
    let linear = kernel(&normal);

    // Σ_x m_x = 0 contributes an all-ones block pattern.
    let mut with_sum = normal;
    for x in 0..nx {
        for y in 0..nx {
            for k in 0..dd {
                with_sum[(x * dd + k, y * dd + k)] += 1.0;
            }
        }
    }
    let affine = kernel(&with_sum);

    let id = hermitian_coords(&(linalg::eye(d) / linalg::cx(nx as f64, 0.0)), &basis);
    let particular = (0..nx).flat_map(|_| id.iter().copied()).collect();
    Ok(CovariantSolution {
        dim: d,
        n_points: nx,
        basis,
        linear,
        affine,
        particular,
    })
}

/// A feasible direction `P` with `M_x ± εP_x ⪰ 0`, covariant and summing to
/// zero. Its existence means the POVM is not extreme among covariant ones.
#[derive(Clone, Debug)]
pub struct Perturbation {
    /// Dimension of the space of such directions.
    pub dimension: usize,
    pub direction: Option<Vec<CMatrix>>,
    pub epsilon: f64,
}

impl Perturbation {
    pub fn exists(&self) -> bool {
        self.dimension > 0
    }
}

/// Search the solver's affine directions for ones supported inside the range
/// of every effect.
pub fn perturbation_oracle(
    povm: &CovariantPOVM,
    solution: &CovariantSolution,
    tol: &Tolerances,
) -> Result<Perturbation> {
    let d = povm.dim();
    let scale = povm
        .effects()
        .iter()
        .map(|m| eigh(m).0.last().copied().unwrap_or(0.0))
        .fold(0.0, f64::max);
    let cutoff = tol.rank * scale;
    let mut outside = Vec::new();
    let mut gaps = Vec::new();
    for m in povm.effects() {
        let (vals, vecs) = eigh(m);
        let mut proj = linalg::eye(d);
        let mut gap = f64::INFINITY;
        for (k, &l) in vals.iter().enumerate() {
            if l > cutoff {
                let v = vecs.column(k).into_owned();
                proj -= linalg::ket_bra(&v, &v);
                gap = gap.min(l);
            }
        }
        outside.push(proj);
        gaps.push(gap);
    }
    let k = solution.affine_dimension();
    if k == 0 {
        return Ok(Perturbation {
            dimension: 0,
            direction: None,
            epsilon: 0.0,
        });
    }
    let dirs: Vec<Vec<CMatrix>> = (0..k).map(|j| solution.affine_direction(j)).collect();
    let masked: Vec<Vec<CMatrix>> = dirs
        .iter()
        .map(|p| p.iter().zip(&outside).map(|(px, q)| q * px).collect())
        .collect();
    let mut q = RMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v: f64 = masked[a].iter().zip(&masked[b]).map(|(x, y)| hs(x, y).re).sum();
            q[(a, b)] = v;
            q[(b, a)] = v;
        }
    }
    // Unit-norm directions make the absolute cutoff meaningful.
    let eig = q.symmetric_eigen();
    let free: Vec<usize> = (0..k).filter(|&j| eig.eigenvalues[j] <= tol.lin).collect();
    let direction = free.first().map(|&j| {
        let c = eig.eigenvectors.column(j);
        let mut p = vec![linalg::zeros(d, d); povm.effects().len()];
        for (i, dir) in dirs.iter().enumerate() {
            for (px, dx) in p.iter_mut().zip(dir) {
                *px += dx * linalg::cx(c[i], 0.0);
            }
        }
        // Project onto the supports to remove the residual leakage.
        for (px, qx) in p.iter_mut().zip(&outside) {
            let keep = linalg::eye(d) - qx;
            *px = &keep * &*px * &keep;
        }
        p
    });
    let epsilon = direction
        .as_ref()
        .map(|p| {
            p.iter()
                .zip(&gaps)
                .filter_map(|(px, &g)| {
                    let n = linalg::op_norm(px);
                    (n > 0.0).then(|| g / n)
                })
                .fold(f64::INFINITY, f64::min)
                * 0.5
        })
        .unwrap_or(0.0);
    Ok(Perturbation {
        dimension: free.len(),
        direction,
        epsilon,
    })
}
