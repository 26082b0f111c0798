use std::collections::HashMap;

use super::{CovariantInstrument, IntertwinerFamily, IntertwinerSet};
use crate::error::{invalid, Result};
use crate::linalg::{self, diff, eigh, hermitian_basis, hs, sandwich, unitarity_defect, CMatrix, C64};
use crate::linrep::cocycle_eval;
use crate::tol::Tolerances;

/// Result of merging linearly dependent families.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub set: IntertwinerSet,
    /// Gram spectrum (descending) of each `(orbit, class)` block before reduction.
    pub block_spectra: Vec<((usize, usize), Vec<f64>)>,
    pub dropped: usize,
}

/// Diagonalize `G_mn = Σ_i <L_{i,m}, L_{i,n}>` in every `(orbit, class)`
/// block and keep the eigen-combinations with non-negligible weight. The
/// instrument is unchanged and the result is minimal.
pub fn reduce_to_minimal(set: &IntertwinerSet, tol: &Tolerances) -> Result<Reduction> {
    let mut families = Vec::new();
    let mut block_spectra = Vec::new();
    let mut dropped = 0;
    for (o, c) in set.blocks() {
        let idx = set.block(o, c);
        let fams: Vec<&IntertwinerFamily> = idx.iter().map(|&k| &set.families[k]).collect();
        let n = fams.len();
        let mut g = linalg::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                g[(a, b)] = fams[a]
                    .ops
                    .iter()
                    .zip(&fams[b].ops)
                    .map(|(x, y)| hs(x, y))
                    .sum::<C64>();
            }
        }
        let (vals, vecs) = eigh(&g);
        let top = vals.iter().copied().fold(0.0, f64::max);
        for r in (0..n).rev() {
            if top <= 0.0 || vals[r] <= tol.rank * top {
                dropped += 1;
                continue;
            }
            let ops = (0..fams[0].ops.len())
                .map(|i| {
                    let mut l = linalg::zeros(fams[0].ops[i].nrows(), fams[0].ops[i].ncols());
                    for (m, f) in fams.iter().enumerate() {
                        l += &f.ops[i] * vecs[(m, r)];
                    }
                    l
                })
                .collect();
            families.push(IntertwinerFamily {
                orbit: o,
                class: c,
                ops,
            });
        }
        block_spectra.push(((o, c), vals.iter().rev().map(|v| v.max(0.0)).collect()));
    }
    Ok(Reduction {
        set: set.with_families(families),
        block_spectra,
        dropped,
    })
}

/// Stinespring data `I_x(ρ)* = J* (B ⊗ P_x) J` with `J U(g) = (V(g) ⊗ W(g)) J`.
#[derive(Clone, Debug)]
pub struct DilationBundle {
    /// `(D_out · m) x D_in` isometry; row `a·m + b` holds row `a` of Kraus
    /// operator `b`.
    pub isometry: CMatrix,
    /// Diagonal projections on the ancilla, one per outcome.
    pub projectors: Vec<CMatrix>,
    /// Ancilla representation `W(g)`, indexed by group element.
    pub ancilla: Vec<CMatrix>,
    /// `(point, family, index)` of each ancilla basis vector.
    pub labels: Vec<(usize, usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct DilationReport {
    pub ancilla_dim: usize,
    pub dual_defect: f64,
    pub intertwining_defect: f64,
    pub projector_defect: f64,
    pub isometry_defect: f64,
    pub ancilla_unitarity_defect: f64,
    pub minimal: bool,
    pub passed: bool,
}

/// Minimal covariant dilation of an instrument built from a minimal
/// intertwiner set.
pub fn minimal_dilation(instr: &CovariantInstrument, tol: &Tolerances) -> Result<(DilationBundle, DilationReport)> {
    let set = instr.set();
    let maps = instr.maps();
    if !set.is_minimal(tol) {
        return invalid("minimal dilation needs a minimal intertwiner set; reduce it first");
    }
    let space = set.space();
    let group = space.group();
    let (d_in, d_out) = (set.input().dim(), set.output().dim());

    let mut labels = Vec::new();
    for x in 0..space.n_points() {
        let o = space.orbit_of(x);
        for (k, f) in set.families.iter().enumerate().filter(|(_, f)| f.orbit == o) {
            for i in 0..f.ops.len() {
                labels.push((x, k, i));
            }
        }
    }
    let m = labels.len();
    let index: HashMap<(usize, usize, usize), usize> = labels.iter().enumerate().map(|(b, &l)| (l, b)).collect();

    let all_kraus: Vec<&CMatrix> = maps.kraus_all().iter().flatten().collect();
    debug_assert_eq!(all_kraus.len(), m);
    let mut j = linalg::zeros(d_out * m, d_in);
    for (b, k) in all_kraus.iter().enumerate() {
        for a in 0..d_out {
            j.row_mut(a * m + b).copy_from(&k.row(a));
        }
    }

    let projectors: Vec<CMatrix> = (0..space.n_points())
        .map(|x| {
            let mut p = linalg::zeros(m, m);
            for (b, l) in labels.iter().enumerate() {
                if l.0 == x {
                    p[(b, b)] = linalg::ONE;
                }
            }
            p
        })
        .collect();

    let ancilla: Vec<CMatrix> = group
        .elements()
        .map(|g| {
            let mut w = linalg::zeros(m, m);
            for (col, &(x, k, i)) in labels.iter().enumerate() {
                let gx = space.act(g, x);
                let f = &set.families[k];
                let zeta = cocycle_eval(&set.catalogs[f.orbit], f.class, space, group.inv(g), gx);
                for jj in 0..f.ops.len() {
                    w[(index[&(gx, k, jj)], col)] = zeta[(jj, i)];
                }
            }
            w
        })
        .collect();

    let mut dual_defect = 0.0f64;
    for (x, p) in projectors.iter().enumerate() {
        for b in hermitian_basis(d_out) {
            let lifted = j.adjoint() * b.kronecker(p) * &j;
            dual_defect = dual_defect.max(diff(&lifted, &maps.dual(x, &b)));
        }
    }
    let gens = group.generators_of(&group.elements().collect::<Vec<_>>());
    let mut intertwining_defect = 0.0f64;
    let mut projector_defect = 0.0f64;
    for &g in &gens {
        let lhs = &j * set.input().matrix(g);
        let rhs = set.output().matrix(g).kronecker(&ancilla[g]) * &j;
        intertwining_defect = intertwining_defect.max(diff(&lhs, &rhs));
        for (x, p) in projectors.iter().enumerate() {
            let moved = sandwich(&ancilla[g], p);
            projector_defect = projector_defect.max(diff(&moved, &projectors[space.act(g, x)]));
        }
    }
    let isometry_defect = diff(&(j.adjoint() * &j), &linalg::eye(d_in));
    let ancilla_unitarity_defect = ancilla.iter().map(unitarity_defect).fold(0.0, f64::max);
    let passed = dual_defect <= tol.lin
        && intertwining_defect <= tol.lin
        && projector_defect <= tol.lin
        && isometry_defect <= tol.lin
        && ancilla_unitarity_defect <= tol.lin;
    Ok((
        DilationBundle {
            isometry: j,
            projectors,
            ancilla,
            labels,
        },
        DilationReport {
            ancilla_dim: m,
            dual_defect,
            intertwining_defect,
            projector_defect,
            isometry_defect,
            ancilla_unitarity_defect,
            minimal: true,
            passed,
        },
    ))
}
