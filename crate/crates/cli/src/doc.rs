//! Input document schema and its translation into library objects.

use std::sync::Arc;

use covkit::covobs::Seed;
use covkit::groups::{cyclic_group, direct_product, product_action_space, symmetric_group, FiniteGroup, GSpace};
use covkit::linalg::{cx, CMatrix, CVector, C64};
use covkit::linrep::{qubit_weyl_pair, Representation};
use covkit::{CovError, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub schema: u32,
    pub group: GroupSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    pub representation: RepSpec,
    /// Output representation of instruments and channels; defaults to `representation`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<RepSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<SeedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrument: Option<InstrumentSpec>,
    #[serde(default)]
    pub options: Options,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_lin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_psd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_policy: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GroupSpec {
    Symmetric { degree: usize },
    Cyclic { order: usize },
    Product { factors: Vec<GroupSpec> },
    Table {
        table: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum SubgroupSpec {
    /// `"alternating"` or `"whole"`.
    Named(String),
    Labels(Vec<String>),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceSpec {
    Natural,
    Regular,
    Trivial { points: usize },
    Cosets { subgroup: SubgroupSpec },
    Power { base: Box<SpaceSpec>, power: usize },
    Action {
        table: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RepSpec {
    /// Permutation representation of a space (the natural action if omitted).
    Permutation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        space: Option<SpaceSpec>,
    },
    Standard,
    Trivial { dim: usize },
    /// Qubit `X^a Z^b` on `Z_2 × Z_2`, a projective representation.
    WeylPair,
    Matrices {
        matrices: Vec<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multiplier: Option<Vec<Vec<Complex>>>,
    },
}

/// A complex number written as `[re, im]` or as a plain real number.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Complex {
    Real(f64),
    Pair([f64; 2]),
}

impl Complex {
    pub fn value(self) -> C64 {
        match self {
            Complex::Real(r) => cx(r, 0.0),
            Complex::Pair([re, im]) => cx(re, im),
        }
    }
}

/// Row-major matrix of complex entries.
pub type Matrix = Vec<Vec<Complex>>;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum OrbitRef {
    Index(usize),
    /// Label of any point of the orbit.
    Point(String),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub orbit: OrbitRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<Complex>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstrumentSpec {
    Intertwiners {
        families: Vec<FamilySpec>,
        #[serde(default)]
        renormalize: bool,
    },
    /// Square roots of the effects built from `seeds`.
    Luders,
    /// Measure the seeded POVM, then prepare one state per orbit.
    Nuclear { states: Vec<Matrix> },
    Random { max_multiplicity: usize },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub orbit: OrbitRef,
    pub class: usize,
    /// Canonical family `copy` of the class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copy: Option<usize>,
    /// Explicit operators, one per basis index of the class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ops: Option<Vec<Matrix>>,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CovError::Invalid(msg.into()))
}

pub fn parse(text: &str) -> Result<Document> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: Document = serde_path_to_error::deserialize(de)
        .map_err(|e| CovError::Invalid(format!("at {}: {}", e.path(), e.inner())))?;
    if doc.schema != SCHEMA_VERSION {
        return invalid(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", doc.schema));
    }
    Ok(doc)
}

pub fn matrix(m: &Matrix, what: &str) -> Result<CMatrix> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return invalid(format!("{what}: matrix is empty"));
    }
    if let Some(r) = m.iter().position(|r| r.len() != cols) {
        return invalid(format!("{what}: row {r} has {} entries, expected {cols}", m[r].len()));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| m[i][j].value()))
}

pub fn vector(v: &[Complex]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|z| z.value()))
}

pub fn build_group(spec: &GroupSpec) -> Result<FiniteGroup> {
    match spec {
        GroupSpec::Symmetric { degree } => symmetric_group(*degree),
        GroupSpec::Cyclic { order } => cyclic_group(*order),
        GroupSpec::Product { factors } => {
            let mut it = factors.iter();
            let first = it.next().ok_or_else(|| CovError::Invalid("product needs factors".into()))?;
            it.try_fold(build_group(first)?, |acc, f| direct_product(&acc, &build_group(f)?))
        }
        GroupSpec::Table { table, labels } => FiniteGroup::from_table(table.clone(), labels.clone()),
    }
}

fn subgroup(group: &FiniteGroup, spec: &SubgroupSpec) -> Result<Vec<usize>> {
    match spec {
        SubgroupSpec::Named(n) if n == "alternating" => group
            .alternating_subgroup()
            .ok_or_else(|| CovError::Invalid("alternating subgroup needs a symmetric group".into())),
        SubgroupSpec::Named(n) if n == "whole" => Ok(group.elements().collect()),
        SubgroupSpec::Named(n) => invalid(format!("unknown subgroup '{n}' (expected alternating, whole or a label list)")),
        SubgroupSpec::Labels(ls) => ls
            .iter()
            .map(|l| {
                group
                    .find_label(l)
                    .ok_or_else(|| CovError::Invalid(format!("'{l}' is not a group element")))
            })
            .collect(),
    }
}

pub fn build_space(group: &Arc<FiniteGroup>, spec: &SpaceSpec) -> Result<GSpace> {
    match spec {
        SpaceSpec::Natural => GSpace::natural(group.clone()),
        SpaceSpec::Regular => GSpace::regular(group.clone()),
        SpaceSpec::Trivial { points } => GSpace::trivial(group.clone(), *points),
        SpaceSpec::Cosets { subgroup: s } => GSpace::cosets(group.clone(), &subgroup(group, s)?),
        SpaceSpec::Power { base, power } => product_action_space(&build_space(group, base)?, *power),
        SpaceSpec::Action { table, labels } => GSpace::from_action(group.clone(), table.clone(), labels.clone()),
    }
}

pub fn build_rep(group: &Arc<FiniteGroup>, spec: &RepSpec) -> Result<Representation> {
    match spec {
        RepSpec::Permutation { space } => {
            let space = build_space(group, space.as_ref().unwrap_or(&SpaceSpec::Natural))?;
            Ok(Representation::permutation(&space))
        }
        RepSpec::Standard => Representation::standard(group.clone()),
        RepSpec::Trivial { dim } => {
            if *dim == 0 {
                return invalid("trivial representation needs dim >= 1");
            }
            Ok(Representation::trivial(group.clone(), *dim))
        }
        RepSpec::WeylPair => {
            let weyl = qubit_weyl_pair()?;
            if group.table() != weyl.group().table() {
                return invalid("weyl-pair needs the group product of two cyclic groups of order 2");
            }
            let n = group.order();
            let table = (0..n).map(|g| (0..n).map(|h| weyl.multiplier(g, h)).collect()).collect();
            Representation::new(group.clone(), weyl.matrices().to_vec(), Some(table))
        }
        RepSpec::Matrices { matrices, multiplier } => {
            let mats = matrices
                .iter()
                .enumerate()
                .map(|(g, m)| matrix(m, &format!("representation.matrices[{g}]")))
                .collect::<Result<Vec<_>>>()?;
            let table = multiplier
                .as_ref()
                .map(|rows| rows.iter().map(|r| r.iter().map(|z| z.value()).collect()).collect());
            Representation::new(group.clone(), mats, table)
        }
    }
}

pub fn orbit_index(space: &GSpace, r: &OrbitRef) -> Result<usize> {
    match r {
        OrbitRef::Index(o) if *o < space.orbits().len() => Ok(*o),
        OrbitRef::Index(o) => invalid(format!("orbit {o} does not exist ({} orbits)", space.orbits().len())),
        OrbitRef::Point(l) => space
            .find_label(l)
            .map(|x| space.orbit_of(x))
            .ok_or_else(|| CovError::Invalid(format!("'{l}' is not a point of the outcome space"))),
    }
}

pub fn build_seeds(space: &GSpace, specs: &[SeedSpec]) -> Result<Vec<Seed>> {
    specs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let orbit = orbit_index(space, &s.orbit)?;
            match (&s.operator, &s.vector) {
                (Some(m), None) => Ok(Seed::operator(orbit, matrix(m, &format!("seeds[{k}].operator"))?)),
                (None, Some(v)) => Ok(Seed::vector(orbit, &vector(v))),
                _ => invalid(format!("seed {k}: give exactly one of operator or vector")),
            }
        })
        .collect()
}
