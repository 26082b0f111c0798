use super::{build_instrument, reduce_to_minimal, IntertwinerFamily, IntertwinerSet, KrausInstrument};
use crate::error::{invalid, CovError, Result};
use crate::linalg::{self, cx, eigh, gram_matrix, gram_test, op_norm, random_unitary, sandwich, CMatrix};
use crate::tol::{Rng, Tolerances};

/// Two covariant instruments whose midpoint is the tested one.
#[derive(Clone, Debug)]
pub struct ExtremalityWitness {
    pub plus: IntertwinerSet,
    pub minus: IntertwinerSet,
    pub epsilon: f64,
    pub normalization_defect: f64,
    pub hinv_defect: f64,
    /// Distance between the average of both instruments and the original.
    pub midpoint_defect: f64,
    /// Distance between `plus` and the original.
    pub separation: f64,
    pub verified: bool,
}

#[derive(Clone, Debug)]
pub struct CovariantExtremality {
    pub extreme: bool,
    /// Gram spectrum of the orbit-summed products, descending.
    pub spectrum: Vec<f64>,
    pub family_size: usize,
    pub witness: Option<ExtremalityWitness>,
}

/// `T_{m,n} = Σ_{x∈O} U(g_x) (Σ_i L_{i,m}* L_{i,n}) U(g_x)*` for one block.
fn block_products(set: &IntertwinerSet, orbit: usize, idx: &[usize]) -> Vec<CMatrix> {
    let space = set.space();
    let rep = set.input();
    let d = rep.dim();
    let mut out = Vec::with_capacity(idx.len() * idx.len());
    for &m in idx {
        for &n in idx {
            let mut a = linalg::zeros(d, d);
            for (lm, ln) in set.families[m].ops.iter().zip(&set.families[n].ops) {
                a += lm.adjoint() * ln;
            }
            let mut t = linalg::zeros(d, d);
            for &x in &space.orbit(orbit).points {
                t += sandwich(rep.matrix(space.section(x)), &a);
            }
            out.push(t);
        }
    }
    out
}

fn psd_sqrt(c: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(c);
    let mut out = linalg::zeros(c.nrows(), c.ncols());
    for (k, &l) in vals.iter().enumerate() {
        let v = vecs.column(k).into_owned();
        out += linalg::ket_bra(&v, &v) * cx(l.max(0.0).sqrt(), 0.0);
    }
    out
}

/// Replace each block's families by `L'_r = Σ_n S_{r,n} L_n`.
fn mix_blocks(set: &IntertwinerSet, blocks: &[(Vec<usize>, CMatrix)]) -> IntertwinerSet {
    let mut families = Vec::new();
    for (idx, s) in blocks {
        let first = &set.families[idx[0]];
        for r in 0..idx.len() {
            let ops = (0..first.ops.len())
                .map(|i| {
                    let mut l = linalg::zeros(first.ops[i].nrows(), first.ops[i].ncols());
                    for (n, &k) in idx.iter().enumerate() {
                        l += &set.families[k].ops[i] * s[(r, n)];
                    }
                    l
                })
                .collect();
            families.push(IntertwinerFamily {
                orbit: first.orbit,
                class: first.class,
                ops,
            });
        }
    }
    set.with_families(families)
}

/// Extremality among covariant instruments with the same representations,
/// for a minimal intertwiner set: the products `T_{m,n}` of every block must
/// be linearly independent. A dependency is turned into an explicit,
/// checked decomposition into two different covariant instruments.
pub fn covariant_extremality(set: &IntertwinerSet, tol: &Tolerances) -> Result<CovariantExtremality> {
    if !set.is_minimal(tol) {
        return invalid("extremality needs a minimal intertwiner set; reduce it first");
    }
    let blocks: Vec<(usize, Vec<usize>)> = set.blocks().into_iter().map(|(o, c)| (o, set.block(o, c))).collect();
    let mut products = Vec::new();
    for (o, idx) in &blocks {
        products.extend(block_products(set, *o, idx));
    }
    let test = gram_test(&products, tol.rank);
    let family_size = products.len();
    let Some(kernel) = test.kernel.clone() else {
        return Ok(CovariantExtremality {
            extreme: true,
            spectrum: test.spectrum,
            family_size,
            witness: None,
        });
    };

    // Split the coefficients into Hermitian blocks E with Σ E_mn T_mn = 0.
    let mut coeffs = Vec::new();
    let mut offset = 0;
    for (_, idx) in &blocks {
        let n = idx.len();
        let c = CMatrix::from_fn(n, n, |m, k| kernel[offset + m * n + k]);
        offset += n * n;
        coeffs.push(c);
    }
    let herm: Vec<CMatrix> = coeffs.iter().map(|c| (c + c.adjoint()) * cx(0.5, 0.0)).collect();
    let anti: Vec<CMatrix> = coeffs.iter().map(|c| (c - c.adjoint()) * cx(0.0, -0.5)).collect();
    let size = |v: &[CMatrix]| v.iter().map(linalg::max_abs).fold(0.0, f64::max);
    let e = if size(&herm) >= size(&anti) { herm } else { anti };
    let top = e.iter().map(op_norm).fold(0.0, f64::max);
    if top == 0.0 {
        return Err(CovError::Numerical("dependency without a Hermitian direction".into()));
    }
    let epsilon = 0.5 / top;
    let shifted = |sign: f64| -> Vec<(Vec<usize>, CMatrix)> {
        blocks
            .iter()
            .zip(&e)
            .map(|((_, idx), eb)| {
                let c = linalg::eye(idx.len()) + eb * cx(sign * epsilon, 0.0);
                (idx.clone(), psd_sqrt(&c))
            })
            .collect()
    };
    let plus = mix_blocks(set, &shifted(1.0));
    let minus = mix_blocks(set, &shifted(-1.0));

    let normalization_defect = plus.normalization_defect().max(minus.normalization_defect());
    let hinv_defect = plus.hinv_defect().max(minus.hinv_defect());
    let (mut midpoint_defect, mut separation, mut verified) = (f64::INFINITY, 0.0, false);
    if normalization_defect <= tol.lin && hinv_defect <= tol.lin {
        let original = build_instrument(set, tol)?;
        let a = build_instrument(&plus, tol)?;
        let b = build_instrument(&minus, tol)?;
        midpoint_defect = 0.0;
        for x in 0..original.maps().n_outcomes() {
            let avg = (a.maps().superoperator(x)? + b.maps().superoperator(x)?) * cx(0.5, 0.0);
            midpoint_defect = midpoint_defect.max(linalg::diff(&avg, &original.maps().superoperator(x)?));
        }
        separation = a.maps().distance(original.maps())?;
        verified = midpoint_defect <= tol.lin && separation > tol.lin;
    }
    Ok(CovariantExtremality {
        extreme: false,
        spectrum: test.spectrum,
        family_size,
        witness: Some(ExtremalityWitness {
            plus,
            minus,
            epsilon,
            normalization_defect,
            hinv_defect,
            midpoint_defect,
            separation,
            verified,
        }),
    })
}

/// Reduce to a minimal set and decide covariant extremality. The verdict is
/// recomputed after a random unitary remixing of every block; disagreement
/// means the rank decision is not numerically stable.
pub fn extreme_in_covariance_structure(
    set: &IntertwinerSet,
    rng: &mut Rng,
    tol: &Tolerances,
) -> Result<CovariantExtremality> {
    let reduced = reduce_to_minimal(set, tol)?.set;
    let verdict = covariant_extremality(&reduced, tol)?;

    let mixes: Vec<(Vec<usize>, CMatrix)> = set
        .blocks()
        .into_iter()
        .map(|(o, c)| {
            let idx = set.block(o, c);
            let u = random_unitary(idx.len(), rng);
            (idx, u)
        })
        .collect();
    let remixed = reduce_to_minimal(&mix_blocks(set, &mixes), tol)?.set;
    let check = covariant_extremality(&remixed, tol)?;
    if check.extreme != verdict.extreme {
        return Err(CovError::Numerical(
            "extremality verdict changed under a unitary remixing of the intertwiners".into(),
        ));
    }
    Ok(verdict)
}

#[derive(Clone, Debug)]
pub struct GlobalExtremality {
    pub extreme: bool,
    /// Gram spectrum of all products `K_{x,a}* K_{x,b}`, descending.
    pub spectrum: Vec<f64>,
    /// Number of linearly independent Kraus operators per outcome.
    pub kraus_ranks: Vec<usize>,
}

/// Linearly independent Kraus operators spanning the same instrument.
fn independent_kraus(ops: &[CMatrix], tol: &Tolerances) -> Vec<CMatrix> {
    if ops.is_empty() {
        return Vec::new();
    }
    let (vals, vecs) = eigh(&gram_matrix(ops));
    let top = vals.iter().copied().fold(0.0, f64::max);
    (0..ops.len())
        .rev()
        .filter(|&r| top > 0.0 && vals[r] > tol.rank * top)
        .map(|r| {
            let mut k = linalg::zeros(ops[0].nrows(), ops[0].ncols());
            for (b, op) in ops.iter().enumerate() {
                k += op * vecs[(b, r)];
            }
            k
        })
        .collect()
}

/// Extremality among all instruments with the same outcome set: with
/// independent Kraus operators per outcome, the products `K_{x,a}* K_{x,b}`
/// over all outcomes must be linearly independent.
pub fn extreme_global(instr: &KrausInstrument, tol: &Tolerances) -> GlobalExtremality {
    let mut products = Vec::new();
    let mut kraus_ranks = Vec::new();
    for x in 0..instr.n_outcomes() {
        let ks = independent_kraus(instr.kraus(x), tol);
        for a in &ks {
            for b in &ks {
                products.push(a.adjoint() * b);
            }
        }
        kraus_ranks.push(ks.len());
    }
    let test = gram_test(&products, tol.rank);
    GlobalExtremality {
        extreme: test.independent(),
        spectrum: test.spectrum,
        kraus_ranks,
    }
}
