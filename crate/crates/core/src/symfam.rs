//! The `S_D`-covariant family `M^α` on pairs `(m, n)` of basis labels.
//!
//! The diagonal orbit is seeded by `|1>`, the off-diagonal orbit by
//! `α (e^{-iπ/8}|1> + e^{iπ/8}|2>)`. Closed forms for the normalizer and the
//! effects are provided so that generated families can be checked entrywise.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};
use std::sync::Arc;

use crate::covobs::{build_from_seeds, classify, margins, normalize, CovariantPOVM, ObsClassification, Seed};
use crate::error::{invalid, Result};
use crate::groups::{product_action_space, symmetric_group, GSpace};
use crate::linalg::{self, cx, diff, ket_bra, rank, CMatrix, CVector, C64};
use crate::linrep::Representation;
use crate::tol::{Rng, Tolerances};

/// Largest dimension accepted; `S_7` already has 5040 elements.
pub const MAX_DIM: usize = 7;

/// `(2 + √2)^{-1/2}`, where `K(α)^{-1/2}` takes a particularly simple form.
pub fn alpha0() -> f64 {
    (2.0 + SQRT_2).powf(-0.5)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymFamilySpec {
    pub dim: usize,
    pub alpha: f64,
}

impl SymFamilySpec {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return invalid(format!("dimension must lie in 2..={MAX_DIM}, got {dim}"));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return invalid(format!("alpha must be a non-negative number, got {alpha}"));
        }
        Ok(SymFamilySpec { dim, alpha })
    }
}

/// `ψ₀ = D^{-1/2} (|1> + ... + |D>)`.
pub fn psi0(dim: usize) -> CVector {
    CVector::from_element(dim, cx((dim as f64).powf(-0.5), 0.0))
}

fn psi0_projector(dim: usize) -> CMatrix {
    let p = psi0(dim);
    ket_bra(&p, &p)
}

/// Eigenvalues of `K(α)` on `ψ₀^⊥` and on `ψ₀`.
fn k_eigenvalues(dim: usize, alpha: f64) -> (f64, f64) {
    let d = dim as f64;
    let a2 = alpha * alpha;
    ((2.0 * d - 2.0 - SQRT_2) * a2 + 1.0, (2.0 + SQRT_2) * (d - 1.0) * a2 + 1.0)
}

/// `K(α) = [(2D-2-√2)α² + 1] Id + √2 α² D |ψ₀><ψ₀|`.
pub fn closed_form_normalizer(dim: usize, alpha: f64) -> CMatrix {
    let (perp, _) = k_eigenvalues(dim, alpha);
    linalg::eye(dim) * cx(perp, 0.0) + psi0_projector(dim) * cx(SQRT_2 * alpha * alpha * dim as f64, 0.0)
}

/// Spectral form of `K(α)^{-1/2}`.
pub fn closed_form_inv_sqrt(dim: usize, alpha: f64) -> CMatrix {
    let (perp, along) = k_eigenvalues(dim, alpha);
    let p = psi0_projector(dim);
    (linalg::eye(dim) - &p) * cx(perp.powf(-0.5), 0.0) + p * cx(along.powf(-0.5), 0.0)
}

/// Printed effects: `K^{-1/2}|m><m|K^{-1/2}` on the diagonal and
/// `α² K^{-1/2}(|m><m| + e^{-iπ/4}|m><n| + e^{iπ/4}|n><m| + |n><n|)K^{-1/2}`
/// off it. Labels are zero based.
pub fn closed_form_effect(dim: usize, alpha: f64, m: usize, n: usize) -> CMatrix {
    let t = closed_form_inv_sqrt(dim, alpha);
    let em = linalg::basis_vector(dim, m);
    let inner = if m == n {
        ket_bra(&em, &em)
    } else {
        let en = linalg::basis_vector(dim, n);
        (ket_bra(&em, &em)
            + ket_bra(&em, &en) * C64::from_polar(1.0, -FRAC_PI_4)
            + ket_bra(&en, &em) * C64::from_polar(1.0, FRAC_PI_4)
            + ket_bra(&en, &en))
            * cx(alpha * alpha, 0.0)
    };
    &t * inner * &t
}

/// `d_{m,n} = (2D)^{-1/2}(e^{-iπ/8}|m> + e^{iπ/8}|n>) - D^{-1}(√(1+1/√2) - 1) ψ₀`,
/// the vectors with `M^{α₀}_{(m,n)} = |d_{m,n}><d_{m,n}|`.
pub fn alpha0_vector(dim: usize, m: usize, n: usize) -> CVector {
    let d = dim as f64;
    let mut v = CVector::zeros(dim);
    v[m] += C64::from_polar((2.0 * d).powf(-0.5), -FRAC_PI_8);
    v[n] += C64::from_polar((2.0 * d).powf(-0.5), FRAC_PI_8);
    v - psi0(dim) * cx(((1.0 + 1.0 / SQRT_2).sqrt() - 1.0) / d, 0.0)
}

/// Unnormalized off-diagonal seed vector `α(e^{-iπ/8}|1> + e^{iπ/8}|2>)`.
pub fn off_diagonal_seed(dim: usize, alpha: f64) -> CVector {
    let mut v = CVector::zeros(dim);
    v[0] = C64::from_polar(alpha, -FRAC_PI_8);
    v[1] = C64::from_polar(alpha, FRAC_PI_8);
    v
}

#[derive(Clone, Debug)]
pub struct SymFamily {
    pub spec: SymFamilySpec,
    pub povm: CovariantPOVM,
    /// `K(α)^{-1/2}` as computed from the seeds.
    pub inv_sqrt: CMatrix,
}

impl SymFamily {
    pub fn normalizer_defect(&self) -> f64 {
        diff(&self.inv_sqrt, &closed_form_inv_sqrt(self.spec.dim, self.spec.alpha))
    }

    /// Largest deviation of an effect from its printed closed form.
    pub fn effect_defect(&self) -> f64 {
        let d = self.spec.dim;
        (0..d * d)
            .map(|p| {
                diff(
                    self.povm.effect(p),
                    &closed_form_effect(d, self.spec.alpha, p / d, p % d),
                )
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation from `|d_{m,n}><d_{m,n}|`; meaningful at `α = α₀`.
    pub fn alpha0_defect(&self) -> f64 {
        let d = self.spec.dim;
        (0..d * d)
            .map(|p| {
                let v = alpha0_vector(d, p / d, p % d);
                diff(self.povm.effect(p), &ket_bra(&v, &v))
            })
            .fold(0.0, f64::max)
    }
}

/// Outcome space `{1..D}²` with the diagonal action, and the permutation
/// representation of `S_D`.
pub fn family_space(dim: usize) -> Result<(Arc<GSpace>, Arc<Representation>)> {
    let group = Arc::new(symmetric_group(dim)?);
    let base = GSpace::natural(group)?;
    let rep = Arc::new(Representation::permutation(&base));
    Ok((Arc::new(product_action_space(&base, 2)?), rep))
}

/// Build `M^α` from its seeds and normalize it.
pub fn generate(spec: &SymFamilySpec, tol: &Tolerances) -> Result<SymFamily> {
    let spec = SymFamilySpec::new(spec.dim, spec.alpha)?;
    let (space, rep) = family_space(spec.dim)?;
    let diag = space.orbit_of(0);
    let off = space.orbit_of(1);
    let mut seeds = vec![Seed::vector(diag, &linalg::basis_vector(spec.dim, 0))];
    if spec.alpha > 0.0 {
        seeds.push(Seed::vector(off, &off_diagonal_seed(spec.dim, spec.alpha)));
    }
    let normalized = normalize(&build_from_seeds(space, rep, &seeds, tol)?, tol)?;
    Ok(SymFamily {
        spec,
        povm: normalized.povm,
        inv_sqrt: normalized.inv_sqrt,
    })
}

/// One row of a sweep over `α`.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub alpha: f64,
    pub classification: ObsClassification,
    /// `σ_{D²} / σ_1` of the effects, the smallest singular value that
    /// decides informational completeness.
    pub ic_ratio: f64,
    /// Largest diagonal effect eigenvalue.
    pub diagonal_norm: f64,
    pub normalizer_defect: f64,
    pub effect_defect: f64,
    pub covariance_defect: f64,
    /// Smallest rank among the row margins `A_m`.
    pub margin_min_rank: usize,
    /// `max |U(π) A_m U(π)* - A_{π(m)}|`.
    pub margin_covariance_defect: f64,
}

pub fn sweep_row(dim: usize, alpha: f64, rng: &mut Rng, tol: &Tolerances) -> Result<SweepRow> {
    let fam = generate(&SymFamilySpec::new(dim, alpha)?, tol)?;
    let classification = classify(&fam.povm, rng, tol)?;
    let spec = &classification.ic_spectrum;
    let ic_ratio = if spec.len() >= dim * dim && spec[0] > 0.0 {
        (spec[dim * dim - 1] / spec[0]).max(0.0).sqrt()
    } else {
        0.0
    };
    let diagonal_norm = (0..dim)
        .map(|m| classification.effect_norms[m * dim + m])
        .fold(0.0, f64::max);
    let (rows, _) = margins(&fam.povm)?;
    let margin_min_rank = rows.iter().map(|a| rank(a, tol.rank)).min().unwrap_or(0);
    let space = fam.povm.space();
    let group = space.group();
    let mut margin_covariance_defect = 0.0f64;
    for g in group.elements() {
        let perm = group.permutation(g).expect("symmetric group element");
        for (m, a) in rows.iter().enumerate() {
            let moved = linalg::sandwich(fam.povm.rep().matrix(g), a);
            margin_covariance_defect = margin_covariance_defect.max(diff(&moved, &rows[perm[m]]));
        }
    }
    Ok(SweepRow {
        alpha,
        ic_ratio,
        diagonal_norm,
        normalizer_defect: fam.normalizer_defect(),
        effect_defect: fam.effect_defect(),
        covariance_defect: fam.povm.covariance_defect(),
        margin_min_rank,
        margin_covariance_defect,
        classification,
    })
}

pub fn sweep(dim: usize, alphas: &[f64], rng: &mut Rng, tol: &Tolerances) -> Result<Vec<SweepRow>> {
    alphas.iter().map(|&a| sweep_row(dim, a, rng, tol)).collect()
}

/// `n` equally spaced points from `a0` to `a1` inclusive.
pub fn grid(a0: f64, a1: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !a0.is_finite() || !a1.is_finite() {
        return invalid("grid needs finite endpoints and at least one point");
    }
    if n == 1 {
        return Ok(vec![a0]);
    }
    Ok((0..n).map(|k| a0 + (a1 - a0) * k as f64 / (n - 1) as f64).collect())
}

#[derive(Clone, Debug)]
pub struct Continuity {
    /// Largest effect change between neighbouring grid points.
    pub max_jump: f64,
    /// `max_jump / Δα` maximized over the grid.
    pub constant: f64,
}

/// Finite-difference continuity of `α -> M^α` along a sorted grid.
pub fn continuity(dim: usize, alphas: &[f64], tol: &Tolerances) -> Result<Continuity> {
    let fams = alphas
        .iter()
        .map(|&a| generate(&SymFamilySpec::new(dim, a)?, tol))
        .collect::<Result<Vec<_>>>()?;
    let (mut max_jump, mut constant) = (0.0f64, 0.0f64);
    for w in fams.windows(2) {
        let step = (w[1].spec.alpha - w[0].spec.alpha).abs();
        let jump = w[0]
            .povm
            .effects()
            .iter()
            .zip(w[1].povm.effects())
            .map(|(a, b)| diff(a, b))
            .fold(0.0, f64::max);
        max_jump = max_jump.max(jump);
        if step > 0.0 {
            constant = constant.max(jump / step);
        }
    }
    Ok(Continuity { max_jump, constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol::rng_from_seed;

    #[test]
    fn closed_form_normalizer_matches_the_seed_sum() {
        let tol = Tolerances::default();
        for dim in 2..=4 {
            for alpha in [0.0, 0.3, alpha0(), 2.0] {
                let (space, rep) = family_space(dim).unwrap();
                let mut seeds = vec![Seed::vector(0, &linalg::basis_vector(dim, 0))];
                seeds.push(Seed::vector(space.orbit_of(1), &off_diagonal_seed(dim, alpha)));
                let povm = build_from_seeds(space, rep, &seeds, &tol).unwrap();
                assert!(diff(povm.normalizer(), &closed_form_normalizer(dim, alpha)) < 1e-12);
            }
        }
    }

    #[test]
    fn generated_family_matches_closed_forms() {
        let tol = Tolerances::default();
        for dim in 2..=4 {
            for alpha in [0.0, 0.1, alpha0(), 1.0] {
                let f = generate(&SymFamilySpec { dim, alpha }, &tol).unwrap();
                assert!(f.normalizer_defect() < 1e-10, "D={dim} a={alpha}");
                assert!(f.effect_defect() < 1e-10, "D={dim} a={alpha}");
            }
            let f = generate(&SymFamilySpec { dim, alpha: alpha0() }, &tol).unwrap();
            assert!(f.alpha0_defect() < 1e-9, "D={dim}");
        }
    }

    #[test]
    fn alpha_zero_is_the_basis_measurement() {
        let tol = Tolerances::default();
        let f = generate(&SymFamilySpec { dim: 3, alpha: 0.0 }, &tol).unwrap();
        for p in 0..9 {
            let (m, n) = (p / 3, p % 3);
            let want = if m == n {
                let e = linalg::basis_vector(3, m);
                ket_bra(&e, &e)
            } else {
                linalg::zeros(3, 3)
            };
            assert!(diff(f.povm.effect(p), &want) < 1e-12);
        }
    }

    #[test]
    fn sweep_flags() {
        let tol = Tolerances::default();
        let mut rng = rng_from_seed(1);
        let rows = sweep(3, &[0.0, 0.1, alpha0(), 1.0], &mut rng, &tol).unwrap();
        let c0 = &rows[0].classification;
        assert!(c0.is_rank1 && c0.is_pvm && !c0.is_informationally_complete);
        assert_eq!(rows[0].margin_min_rank, 1);
        for r in &rows[1..] {
            let c = &r.classification;
            assert!(c.is_rank1 && c.is_informationally_complete && c.is_extreme_global, "{}", r.alpha);
            assert!(r.margin_min_rank >= 2);
            assert!(r.margin_covariance_defect < 1e-10);
        }
    }

    #[test]
    fn diagonal_effects_fade_for_large_alpha() {
        let tol = Tolerances::default();
        let mut rng = rng_from_seed(2);
        let rows = sweep(3, &[1.0, 10.0, 1000.0], &mut rng, &tol).unwrap();
        assert!(rows[2].diagonal_norm < 1e-5);
        assert!(rows[0].ic_ratio > rows[1].ic_ratio && rows[1].ic_ratio > rows[2].ic_ratio);
    }

    #[test]
    fn family_is_continuous() {
        let tol = Tolerances::default();
        let c = continuity(3, &grid(0.0, 1.0, 11).unwrap(), &tol).unwrap();
        assert!(c.constant.is_finite() && c.constant < 10.0, "{c:?}");
    }

    #[test]
    fn out_of_range_specs_are_rejected() {
        assert!(SymFamilySpec::new(1, 0.5).is_err());
        assert!(SymFamilySpec::new(8, 0.5).is_err());
        assert!(SymFamilySpec::new(3, -0.1).is_err());
        assert!(SymFamilySpec::new(3, f64::NAN).is_err());
    }
}
