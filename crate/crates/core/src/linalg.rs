//! Dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn cx(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// `u a u*`
pub fn sandwich(u: &CMatrix, a: &CMatrix) -> CMatrix {
    u * a * u.adjoint()
}

/// `|u><v|`
pub fn ket_bra(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

pub fn basis_vector(n: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[k] = ONE;
    v
}

/// Hilbert-Schmidt inner product `tr(a* b)`.
pub fn hs(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Largest entry modulus; used as the defect measure throughout.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn diff(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * cx(0.5, 0.0)
}

pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    if u.ncols() != n {
        return f64::INFINITY;
    }
    diff(&(u.adjoint() * u), &eye(n))
}

/// Eigen-decomposition of the Hermitian part of `a`, eigenvalues ascending.
pub fn eigh(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn op_norm(a: &CMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn rank(a: &CMatrix, rel_cutoff: f64) -> usize {
    let s = singular_values(a);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_cutoff * top).count()
}

/// Orthonormal basis (as columns) of the kernel of `a`.
///
/// Singular values at or below `rel_cutoff` times the largest one count as
/// zero. Rows are zero-padded so the SVD returns a full right factor.
pub fn null_space(a: &CMatrix, rel_cutoff: f64) -> CMatrix {
    let (r, c) = a.shape();
    if c == 0 {
        return zeros(0, 0);
    }
    let padded = if r < c {
        let mut p = zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let kernel: Vec<usize> = (0..c)
        .filter(|&k| top == 0.0 || svd.singular_values[k] <= rel_cutoff * top)
        .collect();
    let mut out = zeros(c, kernel.len());
    for (col, &k) in kernel.iter().enumerate() {
        out.set_column(col, &v_t.row(k).adjoint());
    }
    out
}

/// Real counterpart of [`null_space`].
pub fn null_space_real(a: &RMatrix, rel_cutoff: f64) -> RMatrix {
    let (r, c) = a.shape();
    if c == 0 {
        return RMatrix::zeros(0, 0);
    }
    let padded = if r < c {
        let mut p = RMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let kernel: Vec<usize> = (0..c)
        .filter(|&k| top == 0.0 || svd.singular_values[k] <= rel_cutoff * top)
        .collect();
    let mut out = RMatrix::zeros(c, kernel.len());
    for (col, &k) in kernel.iter().enumerate() {
        out.set_column(col, &v_t.row(k).transpose());
    }
    out
}

/// Linear-independence test for a family of operators through the spectrum
/// of their Hilbert-Schmidt Gram matrix.
#[derive(Clone, Debug)]
pub struct GramTest {
    /// Gram eigenvalues, descending.
    pub spectrum: Vec<f64>,
    pub rank: usize,
    pub count: usize,
    /// Unit coefficient vector `c` minimising `|sum_k c_k A_k|`, present when
    /// the family is dependent.
    pub kernel: Option<CVector>,
}

impl GramTest {
    pub fn independent(&self) -> bool {
        self.rank == self.count
    }

    pub fn smallest(&self) -> f64 {
        self.spectrum.last().copied().unwrap_or(0.0)
    }
}

pub fn gram_matrix(ops: &[CMatrix]) -> CMatrix {
    let n = ops.len();
    let mut g = zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = hs(&ops[a], &ops[b]);
            g[(a, b)] = v;
            g[(b, a)] = v.conj();
        }
    }
    g
}

pub fn gram_test(ops: &[CMatrix], rel_cutoff: f64) -> GramTest {
    let count = ops.len();
    if count == 0 {
        return GramTest {
            spectrum: Vec::new(),
            rank: 0,
            count,
            kernel: None,
        };
    }
    let (vals, vecs) = eigh(&gram_matrix(ops));
    let spectrum: Vec<f64> = vals.iter().rev().map(|v| v.max(0.0)).collect();
    let top = spectrum[0];
    let rank = if top <= 0.0 {
        0
    } else {
        spectrum.iter().filter(|&&v| v > rel_cutoff * top).count()
    };
    let kernel = (rank < count).then(|| vecs.column(0).into_owned());
    GramTest {
        spectrum,
        rank,
        count,
        kernel,
    }
}

/// Orthonormal basis of the real space of `d x d` Hermitian matrices.
pub fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        let mut m = zeros(d, d);
        m[(a, a)] = ONE;
        out.push(m);
    }
    for a in 0..d {
        for b in a + 1..d {
            let mut re = zeros(d, d);
            re[(a, b)] = cx(s, 0.0);
            re[(b, a)] = cx(s, 0.0);
            out.push(re);
            let mut im = zeros(d, d);
            im[(a, b)] = cx(0.0, -s);
            im[(b, a)] = cx(0.0, s);
            out.push(im);
        }
    }
    out
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn hermitian_coords(m: &CMatrix, basis: &[CMatrix]) -> Vec<f64> {
    basis.iter().map(|b| hs(b, m).re).collect()
}

pub fn hermitian_from_coords(coords: &[f64], basis: &[CMatrix]) -> CMatrix {
    let d = basis.first().map(|b| b.nrows()).unwrap_or(0);
    let mut m = zeros(d, d);
    for (c, b) in coords.iter().zip(basis) {
        m += b * cx(*c, 0.0);
    }
    m
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        cx(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| {
        cx(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    hermitian_part(&random_matrix(n, n, rng))
}

/// Haar-ish random unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let qr = random_matrix(n, n, rng).qr();
    let (q, r) = qr.unpack();
    let mut q = q;
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// Random density matrix of full rank.
pub fn random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let a = random_matrix(n, n, rng);
    let rho = &a * a.adjoint();
    let t = trace(&rho);
    rho / t
}

/// Positive part check: smallest eigenvalue and its allowance relative to
/// the scale of `a`.
pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    eigh(a).0.first().copied().unwrap_or(0.0)
}

/// Flattened (row-major) complex coordinates, for building linear systems.
pub fn flatten(a: &CMatrix) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len());
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            out.push(a[(r, c)]);
        }
    }
    out
}

pub fn unflatten(v: &[C64], rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |r, c| v[r * cols + c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol::rng_from_seed;

    #[test]
    fn null_space_of_wide_matrix() {
        let mut rng = rng_from_seed(3);
        let a = random_matrix(2, 5, &mut rng);
        let n = null_space(&a, 1e-10);
        assert_eq!(n.ncols(), 3);
        assert!(max_abs(&(&a * &n)) < 1e-12);
        assert!(diff(&(n.adjoint() * &n), &eye(3)) < 1e-12);
    }

    #[test]
    fn gram_detects_dependence() {
        let mut rng = rng_from_seed(5);
        let a = random_matrix(3, 3, &mut rng);
        let b = random_matrix(3, 3, &mut rng);
        let c = &a * cx(2.0, -1.0) + &b;
        let t = gram_test(&[a.clone(), b.clone(), c.clone()], 1e-8);
        assert_eq!(t.rank, 2);
        let k = t.kernel.unwrap();
        let comb = &a * k[0] + &b * k[1] + &c * k[2];
        assert!(max_abs(&comb) < 1e-10);
    }

    #[test]
    fn hermitian_basis_is_orthonormal() {
        let basis = hermitian_basis(3);
        assert_eq!(basis.len(), 9);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((hs(a, b) - cx(expect, 0.0)).norm() < 1e-14);
            }
        }
        let mut rng = rng_from_seed(1);
        let h = random_hermitian(3, &mut rng);
        let back = hermitian_from_coords(&hermitian_coords(&h, &basis), &basis);
        assert!(diff(&h, &back) < 1e-12);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = rng_from_seed(9);
        assert!(unitarity_defect(&random_unitary(4, &mut rng)) < 1e-12);
    }
}
