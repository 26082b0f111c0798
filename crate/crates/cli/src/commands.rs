use std::sync::Arc;
use std::time::Instant;

use covkit::covinstr::{
    basis_family, build_instrument, channel_space, extreme_global, extreme_in_covariance_structure,
    intertwiner_catalogs, luders_intertwiners, minimal_dilation, nuclear_instrument, random_intertwiners,
    reduce_to_minimal, IntertwinerFamily, IntertwinerSet, KrausInstrument,
};
use covkit::covobs::{
    brute_force_covariant_solver, build_from_seeds, classify, normalize, perturbation_oracle, CovariantPOVM,
    Normalized,
};
use covkit::groups::{FiniteGroup, GSpace, SectionPolicy};
use covkit::linalg::{CMatrix, CVector};
use covkit::linrep::{multiplier_order, IrrepDecomposition, Representation};
use covkit::naimark::{dilate, embed_in_sym, refine, trivialize_multiplier, NaimarkBundle, SymEmbedding};
use covkit::symfam::{self, SweepRow};
use covkit::tol::{rng_from_seed, Rng};
use covkit::{CovError, Result, Tolerances};
use serde::Serialize;
use serde_json::{json, Value};

use crate::doc::{self, Document, InstrumentSpec};

/// Settings after merging document options with command line flags.
#[derive(Clone, Debug)]
pub struct Settings {
    pub tol: Tolerances,
    pub seed: u64,
    pub section_policy: Option<String>,
}

/// A report plus whether every check it carries passed.
pub struct Outcome {
    pub report: Value,
    pub passed: bool,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome { report, passed: true }
    }
}

pub fn matrix_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

fn vector_json(v: &CVector) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

struct Setup {
    group: Arc<FiniteGroup>,
    space: Option<Arc<GSpace>>,
    rep: Arc<Representation>,
    output: Option<Arc<Representation>>,
}

impl Setup {
    fn space(&self) -> Result<&Arc<GSpace>> {
        self.space
            .as_ref()
            .ok_or_else(|| CovError::Invalid("document has no outcome space".into()))
    }

    fn output(&self) -> Arc<Representation> {
        self.output.clone().unwrap_or_else(|| self.rep.clone())
    }
}

fn setup(doc: &Document, s: &Settings) -> Result<Setup> {
    let group = Arc::new(doc::build_group(&doc.group)?);
    let space = match &doc.space {
        None => None,
        Some(spec) => {
            let mut space = doc::build_space(&group, spec)?;
            if let Some(name) = &s.section_policy {
                space = space.with_section_policy(&SectionPolicy::parse(name)?)?;
            }
            Some(Arc::new(space))
        }
    };
    let rep = Arc::new(doc::build_rep(&group, &doc.representation)?);
    let output = doc
        .output
        .as_ref()
        .map(|r| doc::build_rep(&group, r).map(Arc::new))
        .transpose()?;
    Ok(Setup {
        group,
        space,
        rep,
        output,
    })
}

fn header(command: &str, s: &Settings) -> Value {
    json!({
        "command": command,
        "seed": s.seed,
        "tolerances": {
            "lin": s.tol.lin,
            "psd": s.tol.psd,
            "rank_cutoff": s.tol.rank,
            "unit": s.tol.unit,
            "character": s.tol.character,
        },
    })
}

fn finish(mut report: Value, started: Instant) -> Value {
    report["timings"] = json!({ "total_ms": started.elapsed().as_secs_f64() * 1e3 });
    report
}

fn seeded_povm(doc: &Document, setup: &Setup, s: &Settings) -> Result<(CovariantPOVM, Normalized)> {
    let space = setup.space()?;
    let seeds = doc::build_seeds(space, &doc.seeds)?;
    let raw = build_from_seeds(space.clone(), setup.rep.clone(), &seeds, &s.tol)?;
    let normalized = normalize(&raw, &s.tol)?;
    Ok((raw, normalized))
}

fn labelled_effects(space: &GSpace, effects: &[CMatrix]) -> Value {
    Value::Array(
        effects
            .iter()
            .enumerate()
            .map(|(x, m)| json!({ "point": space.label(x), "matrix": matrix_json(m) }))
            .collect(),
    )
}

pub fn cmd_classify(doc: &Document, s: &Settings) -> Result<Outcome> {
    let started = Instant::now();
    let setup = setup(doc, s)?;
    let (_, n) = seeded_povm(doc, &setup, s)?;
    let mut rng = rng_from_seed(s.seed);
    let c = classify(&n.povm, &mut rng, &s.tol)?;
    let mut r = header("classify", s);
    r["flags"] = json!({
        "rank1": c.is_rank1,
        "pvm": c.is_pvm,
        "norm1": c.is_norm1,
        "informationally_complete": c.is_informationally_complete,
        "extreme_covariant": c.is_extreme_covariant,
        "extreme_global": c.is_extreme_global,
    });
    r["evidence"] = json!({
        "effect_ranks": c.effect_ranks,
        "effect_norms": c.effect_norms,
        "nonzero_effects": c.nonzero_effects,
        "span_dimension": c.span_dimension,
        "ic_spectrum": c.ic_spectrum,
        "covariant_spectrum": c.covariant_spectrum,
        "covariant_family_size": c.covariant_family_size,
        "global_spectrum": c.global_spectrum,
        "global_family_size": c.global_family_size,
        "zero_orbits": c.zero_orbits,
        "normalization_defect": n.povm.normalization_defect(),
        "covariance_defect": n.povm.covariance_defect(),
        "normalizer_commutation_defect": n.commutation_defect,
    });
    r["effects"] = labelled_effects(n.povm.space(), n.povm.effects());
    Ok(Outcome::ok(finish(r, started)))
}

pub fn cmd_normalize(doc: &Document, s: &Settings) -> Result<Outcome> {
    let started = Instant::now();
    let setup = setup(doc, s)?;
    let (raw, n) = seeded_povm(doc, &setup, s)?;
    let mut r = header("normalize", s);
    r["normalizer"] = matrix_json(raw.normalizer());
    r["inv_sqrt"] = matrix_json(&n.inv_sqrt);
    r["support"] = matrix_json(&n.support);
    r["checks"] = json!({
        "normalization_defect": n.povm.normalization_defect(),
        "covariance_defect": n.povm.covariance_defect(),
        "commutation_defect": n.commutation_defect,
        "full_support": n.povm.is_normalized(&s.tol),
    });
    r["effects"] = labelled_effects(n.povm.space(), n.povm.effects());
    Ok(Outcome::ok(finish(r, started)))
}

pub fn cmd_solve(doc: &Document, s: &Settings) -> Result<Outcome> {
    let started = Instant::now();
    let setup = setup(doc, s)?;
    let space = setup.space()?;
    let sol = brute_force_covariant_solver(space, &setup.rep)?;
    let mut r = header("solve", s);
    r["linear_dimension"] = json!(sol.linear_dimension());
    r["affine_dimension"] = json!(sol.affine_dimension());
    r["particular"] = labelled_effects(space, &sol.particular());
    r["affine_basis"] = Value::Array(
        (0..sol.affine_dimension())
            .map(|j| labelled_effects(space, &sol.affine_direction(j)))
            .collect(),
    );
    if !doc.seeds.is_empty() {
        let (_, n) = seeded_povm(doc, &setup, s)?;
        let p = perturbation_oracle(&n.povm, &sol, &s.tol)?;
        r["seeded"] = json!({
            "residual": sol.residual(n.povm.effects()),
            "covariance_residual": sol.covariance_residual(n.povm.effects()),
            "perturbation_dimension": p.dimension,
            "perturbation_epsilon": p.epsilon,
            "extreme_covariant": !p.exists(),
        });
    }
    Ok(Outcome::ok(finish(r, started)))
}

fn bundle_json(b: &NaimarkBundle, group: &FiniteGroup) -> Value {
    let rep = b.report();
    let gens = group.generators_of(&group.elements().collect::<Vec<_>>());
    json!({
        "dimension": rep.dimension,
        "labels": b.labels().iter().map(|&(o, g)| format!("{o}:{}", group.label(g))).collect::<Vec<_>>(),
        "isometry": matrix_json(b.isometry()),
        "ancilla_generators": gens
            .iter()
            .map(|&g| json!({ "element": group.label(g), "matrix": matrix_json(&b.ancilla()[g]) }))
            .collect::<Vec<_>>(),
        "seed_vectors": (0..b.refined().n_orbits()).map(|o| vector_json(b.refined().vector(o))).collect::<Vec<_>>(),
        "checks": {
            "isometry_defect": rep.isometry_defect,
            "effect_defect": rep.effect_defect,
            "intertwining_defect": rep.intertwining_defect,
            "multiplier_law_defect": rep.multiplier_law_defect,
            "projector_defect": rep.projector_defect,
            "post_processing_defect": rep.post_processing_defect,
            "minimal": rep.minimal,
            "normalized": rep.normalized,
            "passed": rep.passed,
        },
    })
}

fn embedding_json(e: &SymEmbedding) -> Value {
    let r = e.report();
    json!({
        "permuted_points": e.order(),
        "materialized": r.materialized,
        "representation_defect": r.representation_defect,
        "generator_defect": r.generator_defect,
        "restriction_defect": r.restriction_defect,
        "passed": r.passed,
    })
}

pub fn cmd_dilate(doc: &Document, s: &Settings) -> Result<Outcome> {
    let started = Instant::now();
    let setup = setup(doc, s)?;
    let (_, n) = seeded_povm(doc, &setup, s)?;
    let bundle = dilate(&refine(&n.povm, &s.tol)?, &s.tol);
    let mut passed = bundle.report().passed;
    let mut r = header("dilate", s);
    r["bundle"] = bundle_json(&bundle, &setup.group);
    if setup.rep.is_projective(s.tol.unit) {
        let analysis = multiplier_order(&setup.rep, &mut rng_from_seed(s.seed), &s.tol)?;
        let lifted = trivialize_multiplier(&bundle, &analysis, &s.tol)?;
        let emb = embed_in_sym(&lifted.bundle, false, &s.tol)?;
        passed &= lifted.bundle.report().passed && emb.report().passed;
        r["lifted"] = json!({
            "multiplier_order": analysis.p,
            "extension_order": lifted.extension.group.order(),
            "covariance_defect": lifted.covariance_defect,
            "bundle": bundle_json(&lifted.bundle, &lifted.extension.group),
            "sym_embedding": embedding_json(&emb),
        });
    } else {
        let emb = embed_in_sym(&bundle, false, &s.tol)?;
        passed &= emb.report().passed;
        r["sym_embedding"] = embedding_json(&emb);
    }
    r["passed"] = json!(passed);
    Ok(Outcome {
        report: finish(r, started),
        passed,
    })
}

enum Payload {
    Set(IntertwinerSet),
    Nuclear(KrausInstrument),
}

fn catalog_json(cats: &[Arc<IrrepDecomposition>]) -> Value {
    Value::Array(
        cats.iter()
            .enumerate()
            .map(|(o, c)| {
                json!({
                    "orbit": o,
                    "classes": c.classes.iter().map(|k| json!({
                        "dim": k.dim,
                        "multiplicity": k.multiplicity,
                        "character": k.character.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                    })).collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

fn payload(doc: &Document, setup: &Setup, s: &Settings, channel: bool, rng: &mut Rng) -> Result<(Payload, Value)> {
    let spec = doc
        .instrument
        .as_ref()
        .ok_or_else(|| CovError::Invalid("document has no instrument payload".into()))?;
    let space = if channel {
        if doc.space.is_some() {
            return Err(CovError::Invalid("channel documents take no outcome space".into()));
        }
        Arc::new(channel_space(setup.group.clone())?)
    } else {
        setup.space()?.clone()
    };
    let output = setup.output();
        match spec {
        InstrumentSpec::Intertwiners { families, renormalize } => {
            let cats = intertwiner_catalogs(&space, &setup.rep, &output, &mut *rng, &s.tol)?;
            let fams = families
                .iter()
                .enumerate()
                .map(|(k, f)| {
                    let orbit = doc::orbit_index(&space, &f.orbit)?;
                    let cat = &cats[orbit];
                    if f.class >= cat.classes.len() {
                        return Err(CovError::Invalid(format!(
                            "family {k}: orbit {orbit} has {} classes",
                            cat.classes.len()
                        )));
                    }
                    match (&f.copy, &f.ops) {
                        (Some(c), None) if *c < cat.classes[f.class].multiplicity => {
                            Ok(basis_family(cat, orbit, f.class, *c, setup.rep.dim(), output.dim()))
                        }
                        (Some(c), None) => Err(CovError::Invalid(format!("family {k}: copy {c} does not exist"))),
                        (None, Some(ops)) => Ok(IntertwinerFamily {
                            orbit,
                            class: f.class,
                            ops: ops
                                .iter()
                                .enumerate()
                                .map(|(i, m)| doc::matrix(m, &format!("instrument.families[{k}].ops[{i}]")))
                                .collect::<Result<_>>()?,
                        }),
                        _ => Err(CovError::Invalid(format!("family {k}: give exactly one of copy or ops"))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let mut set = IntertwinerSet::new(space, setup.rep.clone(), output, cats.clone(), fams)?;
            if *renormalize {
                set = set.renormalize(&s.tol)?.0;
            }
            Ok((Payload::Set(set), catalog_json(&cats)))
        }
        InstrumentSpec::Random { max_multiplicity } => {
            let cats = intertwiner_catalogs(&space, &setup.rep, &output, &mut *rng, &s.tol)?;
            let set = random_intertwiners(space, setup.rep.clone(), output, cats.clone(), *max_multiplicity, rng, &s.tol)?;
            Ok((Payload::Set(set), catalog_json(&cats)))
        }
        InstrumentSpec::Luders => {
            if channel || doc.output.is_some() {
                return Err(CovError::Invalid("Lüders instruments need seeds and no separate output".into()));
            }
            let (_, n) = seeded_povm(doc, setup, s)?;
            let cats = intertwiner_catalogs(&space, &setup.rep, &output, &mut *rng, &s.tol)?;
            let set = luders_intertwiners(&n.povm, cats.clone(), &s.tol)?;
            Ok((Payload::Set(set), catalog_json(&cats)))
        }
        InstrumentSpec::Nuclear { states } => {
            if channel {
                return Err(CovError::Invalid("nuclear payloads describe instruments, not channels".into()));
            }
            let (_, n) = seeded_povm(doc, setup, s)?;
            let states = states
                .iter()
                .enumerate()
                .map(|(o, m)| doc::matrix(m, &format!("instrument.states[{o}]")))
                .collect::<Result<Vec<_>>>()?;
            let (instr, _) = nuclear_instrument(&n.povm, output, &states, &s.tol)?;
            Ok((Payload::Nuclear(instr), Value::Null))
        }
    }
}

fn kraus_json(instr: &KrausInstrument) -> Value {
    let space = instr.space();
    Value::Array(
        (0..instr.n_outcomes())
            .map(|x| {
                json!({
                    "point": space.label(x),
                    "kraus": instr.kraus(x).iter().map(matrix_json).collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Validate,
    Build,
    Dilate,
    Extreme,
}

impl Action {
    fn name(self) -> &'static str {
        match self {
            Action::Validate => "validate",
            Action::Build => "build",
            Action::Dilate => "dilate",
            Action::Extreme => "extreme",
        }
    }
}

pub fn cmd_instrument(doc: &Document, s: &Settings, action: Action, channel: bool) -> Result<Outcome> {
    let started = Instant::now();
    let setup = setup(doc, s)?;
    let mut rng = rng_from_seed(s.seed);
    let (payload, catalog) = payload(doc, &setup, s, channel, &mut rng)?;
    let noun = if channel { "channel" } else { "instrument" };
    let mut r = header(&format!("{noun} {}", action.name()), s);
    if !catalog.is_null() {
        r["catalog"] = catalog;
    }
    let mut passed = true;
    match (payload, action) {
        (Payload::Set(set), Action::Validate) => {
            let v = set.validate(&s.tol);
            passed = v.passed;
            r["checks"] = json!({
                "hinv_defect": v.hinv_defect,
                "normalization_defect": v.normalization_defect,
                "minimal": v.minimal,
                "gram_spectra": v.gram_spectra,
                "passed": v.passed,
            });
        }
        (Payload::Nuclear(instr), Action::Validate) => {
            let (cov, comp) = (instr.covariance_defect(), instr.completeness_defect());
            passed = cov <= s.tol.lin && comp <= s.tol.lin;
            r["checks"] = json!({ "covariance_defect": cov, "completeness_defect": comp, "passed": passed });
        }
        (p, Action::Build) => {
            let instr = match p {
                Payload::Set(set) => build_instrument(&set, &s.tol)?.maps().clone(),
                Payload::Nuclear(instr) => instr,
            };
            let (cov, comp) = (instr.covariance_defect(), instr.completeness_defect());
            passed = cov <= s.tol.lin && comp <= s.tol.lin;
            r["checks"] = json!({ "covariance_defect": cov, "completeness_defect": comp, "passed": passed });
            r["outcomes"] = kraus_json(&instr);
        }
        (Payload::Set(set), Action::Dilate) => {
            let red = reduce_to_minimal(&set, &s.tol)?;
            let instr = build_instrument(&red.set, &s.tol)?;
            let (bundle, d) = minimal_dilation(&instr, &s.tol)?;
            passed = d.passed;
            let space = instr.set().space();
            r["reduction"] = json!({ "dropped": red.dropped });
            r["dilation"] = json!({
                "ancilla_dim": d.ancilla_dim,
                "labels": bundle.labels.iter().map(|&(x, f, i)| json!([space.label(x), f, i])).collect::<Vec<_>>(),
                "isometry": matrix_json(&bundle.isometry),
                "checks": {
                    "dual_defect": d.dual_defect,
                    "intertwining_defect": d.intertwining_defect,
                    "projector_defect": d.projector_defect,
                    "isometry_defect": d.isometry_defect,
                    "ancilla_unitarity_defect": d.ancilla_unitarity_defect,
                    "minimal": d.minimal,
                    "passed": d.passed,
                },
            });
        }
        (Payload::Nuclear(_), Action::Dilate) => {
            return Err(CovError::Invalid(
                "nuclear payloads have no intertwiner form; dilate an intertwiners payload instead".into(),
            ))
        }
        (Payload::Set(set), Action::Extreme) => {
            let cov = extreme_in_covariance_structure(&set, &mut rng, &s.tol)?;
            let reduced = reduce_to_minimal(&set, &s.tol)?.set;
            let global = extreme_global(build_instrument(&reduced, &s.tol)?.maps(), &s.tol);
            if let Some(w) = &cov.witness {
                passed = w.verified;
            }
            r["covariant"] = json!({
                "extreme": cov.extreme,
                "spectrum": cov.spectrum,
                "family_size": cov.family_size,
                "witness": cov.witness.as_ref().map(|w| json!({
                    "epsilon": w.epsilon,
                    "normalization_defect": w.normalization_defect,
                    "hinv_defect": w.hinv_defect,
                    "midpoint_defect": w.midpoint_defect,
                    "separation": w.separation,
                    "verified": w.verified,
                })),
            });
            r["global"] = json!({
                "extreme": global.extreme,
                "spectrum": global.spectrum,
                "kraus_ranks": global.kraus_ranks,
            });
        }
        (Payload::Nuclear(instr), Action::Extreme) => {
            let global = extreme_global(&instr, &s.tol);
            r["covariant"] = Value::Null;
            r["global"] = json!({
                "extreme": global.extreme,
                "spectrum": global.spectrum,
                "kraus_ranks": global.kraus_ranks,
            });
        }
    }
    r["passed"] = json!(passed);
    Ok(Outcome {
        report: finish(r, started),
        passed,
    })
}

/// Flat sweep row for tables.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord {
    pub alpha: f64,
    pub rank1: bool,
    pub pvm: bool,
    pub informationally_complete: bool,
    pub extreme_covariant: bool,
    pub extreme_global: bool,
    pub span_dimension: usize,
    pub ic_ratio: f64,
    pub diagonal_norm: f64,
    pub normalizer_defect: f64,
    pub effect_defect: f64,
    pub covariance_defect: f64,
    pub margin_min_rank: usize,
    pub margin_covariance_defect: f64,
}

impl From<&SweepRow> for SweepRecord {
    fn from(r: &SweepRow) -> Self {
        let c = &r.classification;
        SweepRecord {
            alpha: r.alpha,
            rank1: c.is_rank1,
            pvm: c.is_pvm,
            informationally_complete: c.is_informationally_complete,
            extreme_covariant: c.is_extreme_covariant,
            extreme_global: c.is_extreme_global,
            span_dimension: c.span_dimension,
            ic_ratio: r.ic_ratio,
            diagonal_norm: r.diagonal_norm,
            normalizer_defect: r.normalizer_defect,
            effect_defect: r.effect_defect,
            covariance_defect: r.covariance_defect,
            margin_min_rank: r.margin_min_rank,
            margin_covariance_defect: r.margin_covariance_defect,
        }
    }
}

pub struct SymfamilyResult {
    pub records: Vec<SweepRecord>,
    pub report: Value,
}

/// `a0:a1:n`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CovError::Invalid(format!("grid '{text}' is not of the form a0:a1:n"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a0: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let a1: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    symfam::grid(a0, a1, n)
}

pub fn cmd_symfamily(dim: usize, alphas: &[f64], s: &Settings) -> Result<SymfamilyResult> {
    let started = Instant::now();
    let mut rng = rng_from_seed(s.seed);
    let rows = symfam::sweep(dim, alphas, &mut rng, &s.tol)?;
    let records: Vec<SweepRecord> = rows.iter().map(SweepRecord::from).collect();
    let mut r = header("symfamily", s);
    r["dim"] = json!(dim);
    r["alpha0"] = json!(symfam::alpha0());
    r["rows"] = serde_json::to_value(&records).map_err(|e| CovError::Numerical(e.to_string()))?;
    if alphas.len() > 1 {
        let mut sorted = alphas.to_vec();
        sorted.sort_by(f64::total_cmp);
        let c = symfam::continuity(dim, &sorted, &s.tol)?;
        r["continuity"] = json!({ "max_jump": c.max_jump, "constant": c.constant });
    }
    Ok(SymfamilyResult {
        records,
        report: finish(r, started),
    })
}
