use std::sync::Arc;

use crate::error::{invalid, CovError, Result};
use crate::groups::GSpace;
use crate::linalg::{self, diff, hermitian_basis, sandwich, CMatrix};
use crate::linrep::Representation;

/// Largest `D_in² · D_out²` for which superoperators are materialized.
pub const SUPEROPERATOR_LIMIT: usize = 1 << 20;

/// Instrument `x -> Σ_a K_{x,a} ρ K_{x,a}*` over the points of a space.
#[derive(Clone, Debug)]
pub struct KrausInstrument {
    space: Arc<GSpace>,
    input: Arc<Representation>,
    output: Arc<Representation>,
    kraus: Vec<Vec<CMatrix>>,
}

impl KrausInstrument {
    pub fn new(
        space: Arc<GSpace>,
        input: Arc<Representation>,
        output: Arc<Representation>,
        kraus: Vec<Vec<CMatrix>>,
    ) -> Result<Self> {
        if kraus.len() != space.n_points() {
            return invalid(format!(
                "{} Kraus families for {} outcomes",
                kraus.len(),
                space.n_points()
            ));
        }
        let shape = (output.dim(), input.dim());
        if kraus.iter().flatten().any(|k| k.shape() != shape) {
            return invalid(format!("Kraus operators must be {} x {}", shape.0, shape.1));
        }
        Ok(KrausInstrument {
            space,
            input,
            output,
            kraus,
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

    pub fn n_outcomes(&self) -> usize {
        self.kraus.len()
    }

    pub fn kraus(&self, x: usize) -> &[CMatrix] {
        &self.kraus[x]
    }

    pub fn kraus_all(&self) -> &[Vec<CMatrix>] {
        &self.kraus
    }

    pub fn apply(&self, x: usize, rho: &CMatrix) -> CMatrix {
        let d = self.output.dim();
        let mut out = linalg::zeros(d, d);
        for k in &self.kraus[x] {
            out += sandwich(k, rho);
        }
        out
    }

    /// Heisenberg picture `Σ_a K_a* B K_a`.
    pub fn dual(&self, x: usize, b: &CMatrix) -> CMatrix {
        let d = self.input.dim();
        let mut out = linalg::zeros(d, d);
        for k in &self.kraus[x] {
            out += k.adjoint() * b * k;
        }
        out
    }

    /// The measured POVM `M_x = Σ_a K_a* K_a`.
    pub fn effects(&self) -> Vec<CMatrix> {
        let id = linalg::eye(self.output.dim());
        (0..self.n_outcomes()).map(|x| self.dual(x, &id)).collect()
    }

    pub fn completeness_defect(&self) -> f64 {
        let d = self.input.dim();
        let total = self
            .effects()
            .into_iter()
            .fold(linalg::zeros(d, d), |acc, m| acc + m);
        diff(&total, &linalg::eye(d))
    }

    /// `max |V(g) I_x(ρ) V(g)* - I_{gx}(U(g) ρ U(g)*)|` over generators,
    /// outcomes and a Hermitian basis of inputs.
    pub fn covariance_defect(&self) -> f64 {
        let group = self.space.group();
        let gens = group.generators_of(&group.elements().collect::<Vec<_>>());
        let inputs = hermitian_basis(self.input.dim());
        let mut worst = 0.0f64;
        for &g in &gens {
            let (u, v) = (self.input.matrix(g), self.output.matrix(g));
            for x in 0..self.n_outcomes() {
                let gx = self.space.act(g, x);
                for rho in &inputs {
                    let lhs = sandwich(v, &self.apply(x, rho));
                    let rhs = self.apply(gx, &sandwich(u, rho));
                    worst = worst.max(diff(&lhs, &rhs));
                }
            }
        }
        worst
    }

    /// `Σ_a conj(K_a) ⊗ K_a`, acting on column-stacked density matrices.
    pub fn superoperator(&self, x: usize) -> Result<CMatrix> {
        let (di, dout) = (self.input.dim(), self.output.dim());
        let size = di * di * dout * dout;
        if size > SUPEROPERATOR_LIMIT {
            return Err(CovError::SizeLimit(format!(
                "superoperator with {size} entries exceeds {SUPEROPERATOR_LIMIT}"
            )));
        }
        let mut s = linalg::zeros(dout * dout, di * di);
        for k in &self.kraus[x] {
            s += k.map(|z| z.conj()).kronecker(k);
        }
        Ok(s)
    }

    /// Largest entrywise difference of the superoperators over all outcomes.
    pub fn distance(&self, other: &KrausInstrument) -> Result<f64> {
        if other.n_outcomes() != self.n_outcomes()
            || other.input.dim() != self.input.dim()
            || other.output.dim() != self.output.dim()
        {
            return invalid("instruments have different shapes");
        }
        let mut worst = 0.0f64;
        for x in 0..self.n_outcomes() {
            worst = worst.max(diff(&self.superoperator(x)?, &other.superoperator(x)?));
        }
        Ok(worst)
    }
}
