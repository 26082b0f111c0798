//! Finite groups and finite G-spaces.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, CovError, Result};
use crate::tol::rng_from_seed;

/// Largest degree accepted by [`symmetric_group`].
pub const MAX_SYMMETRIC_DEGREE: usize = 8;

/// Groups up to this order get an exhaustive associativity scan.
const FULL_SCAN_ORDER: usize = 60;
const RANDOM_TRIPLES: usize = 10_000;

#[derive(Clone, Debug)]
enum Law {
    Table(Vec<u32>),
    /// Permutations listed in lexicographic order of their image vectors,
    /// so an element id is the lexicographic rank of its permutation.
    Perm { degree: usize, perms: Vec<Vec<u8>> },
}

/// A finite group with elements `0..order`.
#[derive(Clone, Debug)]
pub struct FiniteGroup {
    order: usize,
    identity: usize,
    inv: Vec<usize>,
    law: Law,
    labels: Vec<String>,
}

impl FiniteGroup {
    /// Build a group from its multiplication table, `mult[g][h] = gh`.
    pub fn from_table(mult: Vec<Vec<usize>>, labels: Option<Vec<String>>) -> Result<Self> {
        let n = mult.len();
        if n == 0 {
            return invalid("multiplication table is empty");
        }
        for (g, row) in mult.iter().enumerate() {
            if row.len() != n {
                return invalid(format!("row {g} of the multiplication table has length {}, expected {n}", row.len()));
            }
            if let Some(&bad) = row.iter().find(|&&x| x >= n) {
                return invalid(format!("row {g} contains element {bad} outside 0..{n}"));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| mult[e][g] == g && mult[g][e] == g))
            .ok_or_else(|| CovError::Invalid("multiplication table has no identity".into()))?;
        let mut inv = vec![usize::MAX; n];
        for g in 0..n {
            match (0..n).find(|&h| mult[g][h] == identity && mult[h][g] == identity) {
                Some(h) => inv[g] = h,
                None => return invalid(format!("element {g} has no inverse")),
            }
        }
        let labels = match labels {
            Some(l) if l.len() == n => l,
            Some(l) => return invalid(format!("{} labels given for {n} elements", l.len())),
            None => (0..n).map(|g| g.to_string()).collect(),
        };
        let table = mult.iter().flatten().map(|&x| x as u32).collect();
        let group = FiniteGroup {
            order: n,
            identity,
            inv,
            law: Law::Table(table),
            labels,
        };
        group.check_associativity()?;
        Ok(group)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        match &self.law {
            Law::Table(t) => t[a * self.order + b] as usize,
            Law::Perm { degree, perms } => {
                let (p, q) = (&perms[a], &perms[b]);
                let mut r = [0u8; MAX_SYMMETRIC_DEGREE];
                for i in 0..*degree {
                    r[i] = p[q[i] as usize];
                }
                lex_rank(&r[..*degree])
            }
        }
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn label(&self, a: usize) -> &str {
        &self.labels[a]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn find_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Degree of the permutation realisation, if the group is a symmetric group.
    pub fn degree(&self) -> Option<usize> {
        match &self.law {
            Law::Perm { degree, .. } => Some(*degree),
            Law::Table(_) => None,
        }
    }

    /// Zero-based image vector of a permutation element.
    pub fn permutation(&self, a: usize) -> Option<Vec<usize>> {
        match &self.law {
            Law::Perm { perms, .. } => Some(perms[a].iter().map(|&x| x as usize).collect()),
            Law::Table(_) => None,
        }
    }

    /// Even permutations, for symmetric groups.
    pub fn alternating_subgroup(&self) -> Option<Vec<usize>> {
        let n = self.degree()?;
        Some(
            self.elements()
                .filter(|&a| {
                    let p = self.permutation(a).unwrap_or_default();
                    let inversions = (0..n)
                        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                        .filter(|&(i, j)| p[i] > p[j])
                        .count();
                    inversions % 2 == 0
                })
                .collect(),
        )
    }

    /// Element realising the given permutation (zero-based images).
    pub fn element_of_permutation(&self, images: &[usize]) -> Option<usize> {
        match &self.law {
            Law::Perm { degree, .. } if *degree == images.len() => {
                let mut seen = [false; MAX_SYMMETRIC_DEGREE];
                for &x in images {
                    if x >= *degree || seen[x] {
                        return None;
                    }
                    seen[x] = true;
                }
                let p: Vec<u8> = images.iter().map(|&x| x as u8).collect();
                Some(lex_rank(&p))
            }
            _ => None,
        }
    }

    /// Dense multiplication table. Only sensible for small groups.
    pub fn table(&self) -> Vec<Vec<usize>> {
        (0..self.order)
            .map(|a| (0..self.order).map(|b| self.mul(a, b)).collect())
            .collect()
    }

    /// Subgroup generated by `gens`, sorted.
    pub fn generate(&self, gens: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.order];
        let mut stack = vec![self.identity];
        seen[self.identity] = true;
        let mut out = Vec::new();
        while let Some(x) = stack.pop() {
            out.push(x);
            for &s in gens {
                let y = self.mul(s, x);
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// A small generating set of the subgroup formed by `elements`.
    pub fn generators_of(&self, elements: &[usize]) -> Vec<usize> {
        let mut gens = Vec::new();
        let mut span: BTreeSet<usize> = [self.identity].into_iter().collect();
        for &g in elements {
            if !span.contains(&g) {
                gens.push(g);
                span = self.generate(&gens).into_iter().collect();
                if span.len() == elements.len() {
                    break;
                }
            }
        }
        gens
    }

    pub fn is_subgroup(&self, elements: &[usize]) -> bool {
        let set: BTreeSet<usize> = elements.iter().copied().collect();
        set.contains(&self.identity)
            && set.iter().all(|&a| a < self.order && set.contains(&self.inv(a)))
            && set.iter().all(|&a| set.iter().all(|&b| set.contains(&self.mul(a, b))))
    }

    fn check_associativity(&self) -> Result<()> {
        let n = self.order;
        let check = |a: usize, b: usize, c: usize| -> Result<()> {
            if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                return invalid(format!("multiplication is not associative on ({a},{b},{c})"));
            }
            Ok(())
        };
        if n <= FULL_SCAN_ORDER {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        check(a, b, c)?;
                    }
                }
            }
        } else {
            let mut rng = rng_from_seed(n as u64);
            for _ in 0..RANDOM_TRIPLES {
                check(rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n))?;
            }
        }
        Ok(())
    }

    /// Full axiom check: closure, identity, inverses and associativity
    /// (exhaustive up to order 60, sampled above).
    pub fn verify_axioms(&self) -> Result<()> {
        for g in 0..self.order {
            if self.mul(self.identity, g) != g || self.mul(g, self.identity) != g {
                return invalid(format!("identity law fails at {g}"));
            }
            if self.mul(self.inv(g), g) != self.identity {
                return invalid(format!("inverse law fails at {g}"));
            }
        }
        self.check_associativity()
    }
}

fn lex_rank(p: &[u8]) -> usize {
    let n = p.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller = p[i + 1..].iter().filter(|&&x| x < p[i]).count();
        rank = rank * (n - i) + smaller;
    }
    rank
}

fn cycle_label(p: &[u8]) -> String {
    let n = p.len();
    let mut seen = vec![false; n];
    let mut out = String::new();
    for start in 0..n {
        if seen[start] || p[start] as usize == start {
            continue;
        }
        out.push('(');
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            out.push_str(&(x + 1).to_string());
            x = p[x] as usize;
        }
        out.push(')');
    }
    if out.is_empty() {
        out.push_str("(1)");
    }
    out
}

/// The symmetric group on `{1..n}`; composition `(ab)(x) = a(b(x))`.
pub fn symmetric_group(n: usize) -> Result<FiniteGroup> {
    if n == 0 || n > MAX_SYMMETRIC_DEGREE {
        return Err(CovError::SizeLimit(format!(
            "symmetric group degree {n} outside 1..={MAX_SYMMETRIC_DEGREE}"
        )));
    }
    let mut perms = Vec::new();
    let mut p: Vec<u8> = (0..n as u8).collect();
    loop {
        perms.push(p.clone());
        if !next_permutation(&mut p) {
            break;
        }
    }
    let order = perms.len();
    let labels = perms.iter().map(|p| cycle_label(p)).collect();
    let inv = perms
        .iter()
        .map(|p| {
            let mut q = vec![0u8; n];
            for (i, &x) in p.iter().enumerate() {
                q[x as usize] = i as u8;
            }
            lex_rank(&q)
        })
        .collect();
    Ok(FiniteGroup {
        order,
        identity: 0,
        inv,
        law: Law::Perm { degree: n, perms },
        labels,
    })
}

fn next_permutation(p: &mut [u8]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Cyclic group `Z_n` written additively.
pub fn cyclic_group(n: usize) -> Result<FiniteGroup> {
    if n == 0 {
        return invalid("cyclic group of order 0");
    }
    let mult = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
    FiniteGroup::from_table(mult, None)
}

/// Direct product; element `(a, b)` has id `a * |B| + b`.
pub fn direct_product(a: &FiniteGroup, b: &FiniteGroup) -> Result<FiniteGroup> {
    let (na, nb) = (a.order(), b.order());
    let mut mult = vec![vec![0; na * nb]; na * nb];
    let mut labels = Vec::with_capacity(na * nb);
    for x in 0..na * nb {
        let (xa, xb) = (x / nb, x % nb);
        labels.push(format!("({},{})", a.label(xa), b.label(xb)));
        for y in 0..na * nb {
            let (ya, yb) = (y / nb, y % nb);
            mult[x][y] = a.mul(xa, ya) * nb + b.mul(xb, yb);
        }
    }
    FiniteGroup::from_table(mult, Some(labels))
}

/// How sections of a G-space are chosen.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum SectionPolicy {
    /// Smallest element id carrying the base point to the point.
    #[default]
    LexMin,
    /// Explicit `(point label, element label)` choices; points not listed
    /// fall back to `LexMin`.
    Labelled(Vec<(String, String)>),
}

impl SectionPolicy {
    /// The hand-picked sections of the S_3 worked example on pairs of
    /// `{1,2,3}`, for reproducing its printed effects verbatim.
    pub fn s3_example() -> Self {
        let pairs = [
            ("(1,1)", "(1)"),
            ("(2,2)", "(12)"),
            ("(3,3)", "(13)"),
            ("(1,2)", "(1)"),
            ("(2,1)", "(12)"),
            ("(1,3)", "(23)"),
            ("(3,1)", "(132)"),
            ("(2,3)", "(123)"),
            ("(3,2)", "(13)"),
        ];
        SectionPolicy::Labelled(
            pairs
                .iter()
                .map(|(x, g)| (x.to_string(), g.to_string()))
                .collect(),
        )
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "lex-min" => Ok(SectionPolicy::LexMin),
            "example" => Ok(SectionPolicy::s3_example()),
            other => invalid(format!("unknown section policy '{other}' (expected lex-min or example)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Orbit {
    pub points: Vec<usize>,
    pub base: usize,
    pub stabilizer: Vec<usize>,
}

/// Shape information for Cartesian powers of a base space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProductShape {
    pub base_points: usize,
    pub power: usize,
}

/// A finite set with a left action of a finite group.
#[derive(Clone, Debug)]
pub struct GSpace {
    group: Arc<FiniteGroup>,
    n_points: usize,
    action: Vec<u32>,
    labels: Vec<String>,
    orbits: Vec<Orbit>,
    orbit_of: Vec<usize>,
    section: Vec<usize>,
    shape: Option<ProductShape>,
}

impl GSpace {
    /// `action[g][x] = g·x`.
    pub fn from_action(
        group: Arc<FiniteGroup>,
        action: Vec<Vec<usize>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if action.len() != group.order() {
            return invalid(format!(
                "action table has {} rows for a group of order {}",
                action.len(),
                group.order()
            ));
        }
        let n = action.first().map(|r| r.len()).unwrap_or(0);
        if n == 0 {
            return invalid("G-space has no points");
        }
        for (g, row) in action.iter().enumerate() {
            if row.len() != n {
                return invalid(format!("action row {g} has length {}, expected {n}", row.len()));
            }
            if let Some(&bad) = row.iter().find(|&&x| x >= n) {
                return invalid(format!("action row {g} maps to {bad} outside 0..{n}"));
            }
        }
        let labels = match labels {
            Some(l) if l.len() == n => l,
            Some(l) => return invalid(format!("{} point labels given for {n} points", l.len())),
            None => (1..=n).map(|x| x.to_string()).collect(),
        };
        let flat = action.iter().flatten().map(|&x| x as u32).collect();
        let mut space = GSpace {
            group,
            n_points: n,
            action: flat,
            labels,
            orbits: Vec::new(),
            orbit_of: vec![usize::MAX; n],
            section: vec![usize::MAX; n],
            shape: None,
        };
        space.check_axioms()?;
        space.compute_orbits();
        Ok(space)
    }

    /// Natural action of a symmetric group on `{1..n}`.
    pub fn natural(group: Arc<FiniteGroup>) -> Result<Self> {
        if group.degree().is_none() {
            return invalid("natural action needs a symmetric group");
        }
        let action = group
            .elements()
            .map(|g| group.permutation(g).expect("permutation group"))
            .collect();
        GSpace::from_action(group, action, None)
    }

    /// Left-regular action of the group on itself.
    pub fn regular(group: Arc<FiniteGroup>) -> Result<Self> {
        let action = group
            .elements()
            .map(|g| group.elements().map(|h| group.mul(g, h)).collect())
            .collect();
        let labels = group.labels().to_vec();
        GSpace::from_action(group, action, Some(labels))
    }

    /// `points` fixed points.
    pub fn trivial(group: Arc<FiniteGroup>, points: usize) -> Result<Self> {
        let action = group.elements().map(|_| (0..points).collect()).collect();
        GSpace::from_action(group, action, None)
    }

    /// Left cosets `gH` of a subgroup, ordered by their smallest element.
    pub fn cosets(group: Arc<FiniteGroup>, subgroup: &[usize]) -> Result<Self> {
        if !group.is_subgroup(subgroup) {
            return invalid("coset space needs a subgroup");
        }
        let mut coset_of = vec![usize::MAX; group.order()];
        let mut reps = Vec::new();
        for g in group.elements() {
            if coset_of[g] == usize::MAX {
                let id = reps.len();
                reps.push(g);
                for &h in subgroup {
                    coset_of[group.mul(g, h)] = id;
                }
            }
        }
        let action = group
            .elements()
            .map(|g| reps.iter().map(|&r| coset_of[group.mul(g, r)]).collect())
            .collect();
        let labels = reps.iter().map(|&r| format!("{}H", group.label(r))).collect();
        GSpace::from_action(group, action, Some(labels))
    }

    fn check_axioms(&self) -> Result<()> {
        let g = &self.group;
        let n = self.n_points;
        let e = g.identity();
        for x in 0..n {
            if self.act(e, x) != x {
                return invalid(format!("identity moves point {x}"));
            }
        }
        let check = |a: usize, b: usize, x: usize| -> Result<()> {
            if self.act(g.mul(a, b), x) != self.act(a, self.act(b, x)) {
                return invalid(format!("action law fails at (g={a}, h={b}, x={x})"));
            }
            Ok(())
        };
        if g.order() * n <= 10_000 && g.order() <= 400 {
            for a in g.elements() {
                for b in g.elements() {
                    for x in 0..n {
                        check(a, b, x)?;
                    }
                }
            }
        } else {
            let mut rng = rng_from_seed((g.order() * n) as u64);
            for _ in 0..RANDOM_TRIPLES {
                check(
                    rng.random_range(0..g.order()),
                    rng.random_range(0..g.order()),
                    rng.random_range(0..n),
                )?;
            }
        }
        Ok(())
    }

    fn compute_orbits(&mut self) {
        let g = self.group.clone();
        let n = self.n_points;
        let mut orbits = Vec::new();
        for x in 0..n {
            if self.orbit_of[x] != usize::MAX {
                continue;
            }
            let id = orbits.len();
            self.orbit_of[x] = id;
            self.section[x] = g.identity();
            let mut points = vec![x];
            for a in g.elements() {
                let y = self.act(a, x);
                if self.orbit_of[y] == usize::MAX {
                    self.orbit_of[y] = id;
                    self.section[y] = a;
                    points.push(y);
                }
            }
            points.sort_unstable();
            let stabilizer = self.stabilizer(x);
            orbits.push(Orbit {
                points,
                base: x,
                stabilizer,
            });
        }
        self.orbits = orbits;
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn act(&self, g: usize, x: usize) -> usize {
        self.action[g * self.n_points + x] as usize
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[x]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn find_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn orbits(&self) -> &[Orbit] {
        &self.orbits
    }

    pub fn orbit(&self, o: usize) -> &Orbit {
        &self.orbits[o]
    }

    pub fn orbit_of(&self, x: usize) -> usize {
        self.orbit_of[x]
    }

    /// The section element `g_x` with `g_x · x_O = x`.
    pub fn section(&self, x: usize) -> usize {
        self.section[x]
    }

    pub fn shape(&self) -> Option<ProductShape> {
        self.shape
    }

    /// Exact stabilizer of a point.
    pub fn stabilizer(&self, x: usize) -> Vec<usize> {
        self.group
            .elements()
            .filter(|&g| self.act(g, x) == x)
            .collect()
    }

    /// Section of one orbit under a policy, as `(point, element)` pairs.
    pub fn make_section(&self, orbit: usize, policy: &SectionPolicy) -> Result<Vec<(usize, usize)>> {
        let o = self
            .orbits
            .get(orbit)
            .ok_or_else(|| CovError::Invalid(format!("orbit {orbit} does not exist")))?;
        let g = &self.group;
        let chosen: HashMap<&str, &str> = match policy {
            SectionPolicy::LexMin => HashMap::new(),
            SectionPolicy::Labelled(pairs) => pairs
                .iter()
                .map(|(x, e)| (x.as_str(), e.as_str()))
                .collect(),
        };
        let mut out = Vec::with_capacity(o.points.len());
        for &x in &o.points {
            let pick = match chosen.get(self.label(x)) {
                Some(lbl) => {
                    let e = g.find_label(lbl).ok_or_else(|| {
                        CovError::Invalid(format!("section element '{lbl}' is not a group label"))
                    })?;
                    if self.act(e, o.base) != x {
                        return invalid(format!(
                            "section element {lbl} does not carry the base point to {}",
                            self.label(x)
                        ));
                    }
                    if x == o.base && e != g.identity() {
                        return invalid("section must map the base point to the identity");
                    }
                    e
                }
                None if x == o.base => g.identity(),
                None => g
                    .elements()
                    .find(|&e| self.act(e, o.base) == x)
                    .expect("point lies in the orbit"),
            };
            out.push((x, pick));
        }
        Ok(out)
    }

    /// Copy of the space with every orbit's section chosen by `policy`.
    pub fn with_section_policy(&self, policy: &SectionPolicy) -> Result<GSpace> {
        let mut space = self.clone();
        for o in 0..self.orbits.len() {
            for (x, g) in self.make_section(o, policy)? {
                space.section[x] = g;
            }
        }
        Ok(space)
    }

    /// Pull the action back along a homomorphism `hom: K -> G` given as a
    /// table of images.
    pub fn pullback(&self, group: Arc<FiniteGroup>, hom: &[usize]) -> Result<GSpace> {
        if hom.len() != group.order() {
            return invalid("homomorphism table has the wrong length");
        }
        let action = group
            .elements()
            .map(|k| (0..self.n_points).map(|x| self.act(hom[k], x)).collect())
            .collect();
        let mut space = GSpace::from_action(group, action, Some(self.labels.clone()))?;
        space.shape = self.shape;
        Ok(space)
    }
}

/// Cartesian power of a G-space with the diagonal action; point `(x, y)` has
/// id `x * N + y` where `N` is the size of the base space.
pub fn product_action_space(base: &GSpace, power: usize) -> Result<GSpace> {
    let n = base.n_points();
    match power {
        1 => {
            let mut space = base.clone();
            space.shape = Some(ProductShape {
                base_points: n,
                power: 1,
            });
            Ok(space)
        }
        2 => {
            let g = base.group();
            let action = g
                .elements()
                .map(|a| {
                    (0..n * n)
                        .map(|p| base.act(a, p / n) * n + base.act(a, p % n))
                        .collect()
                })
                .collect();
            let labels = (0..n * n)
                .map(|p| format!("({},{})", base.label(p / n), base.label(p % n)))
                .collect();
            let mut space = GSpace::from_action(g.clone(), action, Some(labels))?;
            space.shape = Some(ProductShape {
                base_points: n,
                power: 2,
            });
            Ok(space)
        }
        other => invalid(format!("product power must be 1 or 2, got {other}")),
    }
}
