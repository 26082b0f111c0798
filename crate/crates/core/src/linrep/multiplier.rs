//! Multiplier order and the central extension that trivializes it.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, CovError, Result};
use crate::groups::{FiniteGroup, GSpace};
use crate::linalg::{self, cx, CMatrix, C64, ONE};
use crate::tol::{Rng, Tolerances};

use super::{decompose_restriction, validate_representation, Representation};

/// Largest group for which the coboundary search is attempted.
pub const MAX_MULTIPLIER_ORDER: usize = 256;

#[derive(Clone, Debug)]
pub struct MultiplierAnalysis {
    /// Order of the multiplier class.
    pub p: usize,
    /// Primitive `p`-th root of unity.
    pub t: C64,
    /// Row-major table of `q(g,h)`; the adjusted multiplier is `t^q`.
    pub exponents: Vec<usize>,
    /// Phases `φ(g)` of the adjustment.
    pub phases: Vec<f64>,
    /// The constant `m'(e,e)` divided out of the adjusted multiplier.
    pub scale: C64,
    /// `U'(g) = m'(e,e) e^{iφ(g)} U(g)`, carrying the multiplier `t^q`.
    pub adjusted: Representation,
}

impl MultiplierAnalysis {
    pub fn exponent(&self, g: usize, h: usize) -> usize {
        self.exponents[g * self.adjusted.group().order() + h]
    }

    pub fn adjusted_multiplier(&self, g: usize, h: usize) -> C64 {
        root_power(self.p, self.exponent(g, h) as i64)
    }
}

/// `exp(2πi k/p)` computed from the reduced exponent.
fn root_power(p: usize, k: i64) -> C64 {
    let r = k.rem_euclid(p as i64) as f64;
    C64::from_polar(1.0, 2.0 * PI * r / p as f64)
}

/// If `ω` is a coboundary, return `t` with `ω(g,h) = t(g)t(h)/t(gh)`.
///
/// `ω` is a coboundary exactly when the twisted regular representation
/// `L(g)δ_h = ω(g,h)δ_{gh}` has a one-dimensional subrepresentation; its
/// eigenvalues give `t`.
fn coboundary_witness(
    group: &Arc<FiniteGroup>,
    omega: &[C64],
    rng: &mut Rng,
    tol: &Tolerances,
) -> Result<Option<Vec<C64>>> {
    let n = group.order();
    let c = omega[group.identity() * n + group.identity()];
    if omega.iter().all(|w| (w - c).norm() <= tol.unit) {
        return Ok(Some(vec![c; n]));
    }
    let matrices: Vec<CMatrix> = group
        .elements()
        .map(|g| {
            let mut m = linalg::zeros(n, n);
            for h in 0..n {
                m[(group.mul(g, h), h)] = omega[g * n + h];
            }
            m
        })
        .collect();
    let regular = Representation::from_parts(group.clone(), matrices, None);
    let all: Vec<usize> = group.elements().collect();
    let dec = decompose_restriction(&regular, &all, rng, tol)?;
    let Some(line) = dec.classes.iter().find(|c| c.dim == 1) else {
        return Ok(None);
    };
    let v = line.embeddings[0].column(0).into_owned();
    let t: Vec<C64> = group
        .elements()
        .map(|g| (v.adjoint() * regular.matrix(g) * &v)[(0, 0)])
        .collect();
    Ok(Some(t))
}

/// Order of the multiplier class and the phase adjustment that makes the
/// multiplier take values in the `p`-th roots of unity with `m(e,e) = 1`.
pub fn multiplier_order(
    rep: &Representation,
    rng: &mut Rng,
    tol: &Tolerances,
) -> Result<MultiplierAnalysis> {
    let group = rep.group().clone();
    let n = group.order();
    if n > MAX_MULTIPLIER_ORDER {
        return Err(CovError::SizeLimit(format!(
            "multiplier analysis limited to groups of order {MAX_MULTIPLIER_ORDER}"
        )));
    }
    let report = validate_representation(rep, tol);
    if report.cocycle_defect > tol.unit * 10.0 {
        return invalid(format!(
            "multiplier is not a 2-cocycle (defect {:.3e})",
            report.cocycle_defect
        ));
    }
    let m: Vec<C64> = (0..n * n).map(|i| rep.multiplier(i / n, i % n)).collect();
    let mut found = None;
    let mut power = vec![ONE; n * n];
    for k in 1..=n {
        for (p, w) in power.iter_mut().zip(&m) {
            *p *= w;
        }
        if let Some(t) = coboundary_witness(&group, &power, rng, tol)? {
            found = Some((k, t));
            break;
        }
    }
    let (p, t_prime) = found.ok_or_else(|| {
        CovError::Numerical("no power of the multiplier up to the group order is a coboundary".into())
    })?;
    let phases: Vec<f64> = t_prime.iter().map(|z| z.arg() / p as f64).collect();
    let adjusted_raw = |g: usize, h: usize| -> C64 {
        let gh = group.mul(g, h);
        C64::from_polar(1.0, phases[gh] - phases[g] - phases[h]) * m[g * n + h]
    };
    let e = group.identity();
    let scale = adjusted_raw(e, e);
    let t = root_power(p, 1);
    let mut exponents = vec![0usize; n * n];
    for g in 0..n {
        for h in 0..n {
            let z = adjusted_raw(g, h) / scale;
            let k = (z.arg() * p as f64 / (2.0 * PI)).round() as i64;
            let k = k.rem_euclid(p as i64);
            if (z - root_power(p, k)).norm() > 1e-8 {
                return Err(CovError::Numerical(format!(
                    "adjusted multiplier at ({g},{h}) is not a {p}-th root of unity"
                )));
            }
            exponents[g * n + h] = k as usize;
        }
    }
    let matrices = group
        .elements()
        .map(|g| rep.matrix(g) * (scale * C64::from_polar(1.0, phases[g])))
        .collect();
    let table = exponents.iter().map(|&k| root_power(p, k as i64)).collect();
    let adjusted = Representation::from_parts(group, matrices, Some(table));
    Ok(MultiplierAnalysis {
        p,
        t,
        exponents,
        phases,
        scale,
        adjusted,
    })
}

/// `G_m = G × Z_p` with `(g,k)(g',l) = (gg', k + l - q(g,g'))`.
#[derive(Clone, Debug)]
pub struct CentralExtension {
    pub group: Arc<FiniteGroup>,
    /// Ordinary representation `Ũ(g,k) = t^k U'(g)`.
    pub lifted: Representation,
    /// Image in `G` of each extension element.
    pub projection: Vec<usize>,
    /// Power of `t` carried by each extension element.
    pub phase_power: Vec<usize>,
    pub p: usize,
    base_order: usize,
}

impl CentralExtension {
    /// Id of `(g, t^k)`.
    pub fn element(&self, g: usize, k: usize) -> usize {
        (k % self.p) * self.base_order + g
    }

    /// Lift another representation carrying the adjusted multiplier.
    pub fn lift(&self, rep: &Representation, analysis: &MultiplierAnalysis) -> Result<Representation> {
        let n = self.base_order;
        if rep.group().order() != n {
            return invalid("representation belongs to a different group");
        }
        for g in 0..n {
            for h in 0..n {
                if (rep.multiplier(g, h) - analysis.adjusted_multiplier(g, h)).norm() > 1e-9 {
                    return invalid("representation does not carry the adjusted multiplier");
                }
            }
        }
        let matrices = (0..self.group.order())
            .map(|x| rep.matrix(self.projection[x]) * root_power(self.p, self.phase_power[x] as i64))
            .collect();
        Ok(Representation::from_parts(self.group.clone(), matrices, None))
    }

    /// The action `(g,t^k)x = gx` on a space of the base group.
    pub fn extend_space(&self, space: &GSpace) -> Result<GSpace> {
        space.pullback(self.group.clone(), &self.projection)
    }
}

pub fn central_extension(analysis: &MultiplierAnalysis) -> Result<CentralExtension> {
    let base = analysis.adjusted.group();
    let n = base.order();
    let p = analysis.p;
    let total = n * p;
    let mut mult = vec![vec![0usize; total]; total];
    for a in 0..total {
        let (ka, ga) = (a / n, a % n);
        for b in 0..total {
            let (kb, gb) = (b / n, b % n);
            let k = (ka + kb + p - analysis.exponent(ga, gb)) % p;
            mult[a][b] = k * n + base.mul(ga, gb);
        }
    }
    let labels = (0..total)
        .map(|a| {
            let (k, g) = (a / n, a % n);
            if p == 1 {
                base.label(g).to_string()
            } else {
                format!("({},t^{k})", base.label(g))
            }
        })
        .collect();
    let group = Arc::new(FiniteGroup::from_table(mult, Some(labels))?);
    let projection: Vec<usize> = (0..total).map(|a| a % n).collect();
    let phase_power: Vec<usize> = (0..total).map(|a| a / n).collect();
    let matrices = (0..total)
        .map(|a| analysis.adjusted.matrix(projection[a]) * root_power(p, phase_power[a] as i64))
        .collect::<Vec<_>>();
    let lifted = Representation::from_parts(group.clone(), matrices, None);
    Ok(CentralExtension {
        group,
        lifted,
        projection,
        phase_power,
        p,
        base_order: n,
    })
}

/// The qubit Weyl pair `e, X, Z, XZ` as a projective representation of
/// `Z_2 × Z_2` (element `(a,b)` has id `2a + b` and is sent to `X^a Z^b`).
pub fn qubit_weyl_pair() -> Result<Representation> {
    let z2 = crate::groups::cyclic_group(2)?;
    let group = Arc::new(crate::groups::direct_product(&z2, &z2)?);
    let x = CMatrix::from_row_slice(2, 2, &[cx(0.0, 0.0), ONE, ONE, cx(0.0, 0.0)]);
    let z = CMatrix::from_row_slice(2, 2, &[ONE, cx(0.0, 0.0), cx(0.0, 0.0), cx(-1.0, 0.0)]);
    let op = |id: usize| -> CMatrix {
        let (a, b) = (id / 2, id % 2);
        let mut m = linalg::eye(2);
        if a == 1 {
            m = &m * &x;
        }
        if b == 1 {
            m = &m * &z;
        }
        m
    };
    let matrices: Vec<CMatrix> = (0..4).map(op).collect();
    // m(g,h) from U(gh) = m(g,h) U(g) U(h); entries are ±1.
    let multiplier = (0..4)
        .map(|g| {
            (0..4)
                .map(|h| {
                    let lhs = &matrices[group.mul(g, h)];
                    let rhs = &matrices[g] * &matrices[h];
                    let k = (0..2)
                        .flat_map(|i| (0..2).map(move |j| (i, j)))
                        .find(|&(i, j)| rhs[(i, j)].norm() > 0.5)
                        .expect("non-zero entry");
                    lhs[k] / rhs[k]
                })
                .collect()
        })
        .collect();
    Representation::new(group, matrices, Some(multiplier))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::symmetric_group;
    use crate::tol::rng_from_seed;

    #[test]
    fn trivial_multiplier_has_order_one() {
        let g = Arc::new(symmetric_group(3).unwrap());
        let rep = Representation::permutation(&GSpace::natural(g).unwrap());
        let a = multiplier_order(&rep, &mut rng_from_seed(1), &Tolerances::default()).unwrap();
        assert_eq!(a.p, 1);
        assert!(a.exponents.iter().all(|&q| q == 0));
        assert!((a.scale - ONE).norm() < 1e-12);
    }

    #[test]
    fn weyl_pair_has_order_two() {
        let rep = qubit_weyl_pair().unwrap();
        let tol = Tolerances::default();
        assert!(validate_representation(&rep, &tol).passed);
        let a = multiplier_order(&rep, &mut rng_from_seed(2), &tol).unwrap();
        assert_eq!(a.p, 2);
        assert!((a.t - cx(-1.0, 0.0)).norm() < 1e-15);
        let e = rep.group().identity();
        assert_eq!(a.exponent(e, e), 0);
        assert!(validate_representation(&a.adjusted, &tol).passed);
    }

    #[test]
    fn coboundary_multiplier_is_trivialized() {
        // rescale a genuine representation by arbitrary phases
        let g = Arc::new(symmetric_group(3).unwrap());
        let rep = Representation::permutation(&GSpace::natural(g.clone()).unwrap());
        let phases: Vec<f64> = (0..6).map(|k| 0.3 + 0.7 * k as f64).collect();
        let mats: Vec<CMatrix> = rep
            .matrices()
            .iter()
            .zip(&phases)
            .map(|(u, &f)| u * C64::from_polar(1.0, f))
            .collect();
        let mult: Vec<Vec<C64>> = (0..6)
            .map(|a| {
                (0..6)
                    .map(|b| C64::from_polar(1.0, phases[g.mul(a, b)] - phases[a] - phases[b]))
                    .collect()
            })
            .collect();
        let twisted = Representation::new(g, mats, Some(mult)).unwrap();
        let tol = Tolerances::default();
        let v = validate_representation(&twisted, &tol);
        assert!(v.multiplier_law_defect < 1e-12 && v.cocycle_defect < 1e-12);
        // m(e,e) = e^{-iφ(e)} is not normalized
        assert!(v.normalization_defect > 0.1);
        let a = multiplier_order(&twisted, &mut rng_from_seed(3), &tol).unwrap();
        assert_eq!(a.p, 1);
        assert!(validate_representation(&a.adjusted, &tol).passed);
        assert!(!a.adjusted.is_projective(1e-9));
    }

    #[test]
    fn extension_of_trivial_multiplier_is_the_group() {
        let g = Arc::new(symmetric_group(3).unwrap());
        let rep = Representation::permutation(&GSpace::natural(g).unwrap());
        let a = multiplier_order(&rep, &mut rng_from_seed(1), &Tolerances::default()).unwrap();
        let ext = central_extension(&a).unwrap();
        assert_eq!(ext.group.order(), 6);
        assert_eq!(ext.group.identity(), ext.element(0, 0));
    }

    #[test]
    fn weyl_lift_is_ordinary() {
        let rep = qubit_weyl_pair().unwrap();
        let tol = Tolerances::default();
        let a = multiplier_order(&rep, &mut rng_from_seed(5), &tol).unwrap();
        let ext = central_extension(&a).unwrap();
        assert_eq!(ext.group.order(), 8);
        let e = rep.group().identity();
        assert_eq!(ext.group.identity(), ext.element(e, 0));
        let strict = Tolerances { unit: 1e-12, ..tol };
        let v = validate_representation(&ext.lifted, &strict);
        assert!(v.passed, "{v:?}");
        assert!(!ext.lifted.is_projective(0.0));
    }
}
