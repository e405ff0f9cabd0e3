//! Sparse families, sparse operators and constructive sparse extractions.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::czo::CzOperator;
use crate::dyadic::{CubeSet, Domain, DyadicCube, GeometryError};
use crate::maximal::{bilinear_maximal, grand_maximal_cells, vector_maximal, MaximalError, MaximalKind};
use crate::signal::{
    lq_combine, oscillation_window, orlicz_norm_slice, removable_cells, GridFunction, PrefixSums, SignalError,
    VectorFunction, YoungFunction,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("family mixes cubes from lattices {0:?}")]
    MixedShifts(Vec<u8>),
    #[error("cube {cube:?} has {available} of {required} witness units available")]
    NotSparse { cube: DyadicCube, available: u64, required: u64 },
    #[error("cube {0:?} does not meet the domain")]
    OutsideDomain(DyadicCube),
    #[error("sparseness must lie in (0, 1], got {num}/{den}")]
    BadEta { num: u64, den: u64 },
    #[error("parameter {name} out of range: {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("functions live on different domains")]
    DomainMismatch,
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Maximal(#[from] MaximalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Exact sparseness parameter `num/den`, kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Eta {
    num: u64,
    den: u64,
}

impl Eta {
    pub const ONE: Eta = Eta { num: 1, den: 1 };
    pub const HALF: Eta = Eta { num: 1, den: 2 };
    pub const SIXTH: Eta = Eta { num: 1, den: 6 };

    pub fn new(num: u64, den: u64) -> Result<Self, SparseError> {
        if num == 0 || den == 0 || num > den {
            return Err(SparseError::BadEta { num, den });
        }
        let g = gcd(num, den);
        Ok(Self { num: num / g, den: den / g })
    }

    /// `1/Λ` for a Carleson constant; `1` for the empty family.
    pub fn from_carleson(c: &Carleson) -> Self {
        if c.mass == 0 {
            return Self::ONE;
        }
        Self::new(c.cells, c.mass).expect("Carleson constants are at least 1")
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `Λ = max_Q Σ_{P⊆Q, P∈S} |P| / |Q|` as the exact ratio `mass/cells` at the maximizing cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Carleson {
    pub mass: u64,
    pub cells: u64,
    pub cube: Option<DyadicCube>,
}

impl Carleson {
    pub fn value(&self) -> f64 {
        if self.mass == 0 {
            0.0
        } else {
            self.mass as f64 / self.cells as f64
        }
    }

    /// `Λ ≤ 1/η`.
    pub fn at_most_inverse(&self, eta: Eta) -> bool {
        self.mass as u128 * eta.num as u128 <= self.cells as u128 * eta.den as u128
    }
}

fn single_shift(cubes: &CubeSet) -> Result<u8, SparseError> {
    let shifts = cubes.shifts();
    if shifts.len() > 1 {
        return Err(SparseError::MixedShifts(shifts.into_iter().collect()));
    }
    Ok(shifts.into_iter().next().unwrap_or(0))
}

pub fn carleson_constant(domain: &Domain, cubes: &CubeSet) -> Result<Carleson, SparseError> {
    single_shift(cubes)?;
    let mut mass: HashMap<DyadicCube, u64> = HashMap::new();
    for q in cubes {
        if !domain.contains_cube(q) {
            return Err(SparseError::OutsideDomain(*q));
        }
        mass.insert(*q, 0);
    }
    for p in cubes {
        let n = domain.cube_cells(p).len() as u64;
        let mut cur = Some(*p);
        while let Some(c) = cur {
            if let Some(m) = mass.get_mut(&c) {
                *m += n;
            }
            cur = domain.parent(&c);
        }
    }
    let mut best = Carleson { mass: 0, cells: 1, cube: None };
    for q in cubes {
        let m = mass[q];
        let n = domain.cube_cells(q).len() as u64;
        if m as u128 * best.cells as u128 > best.mass as u128 * n as u128 {
            best = Carleson { mass: m, cells: n, cube: Some(*q) };
        }
    }
    Ok(best)
}

/// A run of cells each contributing `units/den` of a cell to a witness set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessRun {
    pub start: usize,
    pub end: usize,
    pub units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFamily {
    domain: Domain,
    shift: u8,
    cubes: Vec<DyadicCube>,
    eta: Eta,
    witnesses: Vec<Vec<WitnessRun>>,
    carleson: Carleson,
}

impl SparseFamily {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn shift(&self) -> u8 {
        self.shift
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn cube_set(&self) -> CubeSet {
        self.cubes.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn eta(&self) -> Eta {
        self.eta
    }

    pub fn carleson(&self) -> Carleson {
        self.carleson
    }

    /// Witness runs of the `i`-th cube; a cell's share is `units / eta.den`.
    pub fn witness(&self, i: usize) -> &[WitnessRun] {
        &self.witnesses[i]
    }

    /// `|E_Q|` in cells as the exact pair `(units, den)`.
    pub fn witness_units(&self, i: usize) -> u64 {
        self.witnesses[i].iter().map(|r| (r.end - r.start) as u64 * r.units).sum()
    }
}

/// Builds witnesses by exact bottom-up allocation: every cell holds `den` units and cube `Q`
/// takes `num·|Q|` units from its own cells, finest cubes first. Succeeds iff `Λ ≤ 1/η`.
pub fn verify_sparse(domain: &Domain, cubes: &CubeSet, eta: Eta) -> Result<SparseFamily, SparseError> {
    let shift = single_shift(cubes)?;
    let list = cubes.to_vec();
    let mut order: Vec<usize> = (0..list.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(list[i].level), list[i].index));
    let mut capacity = vec![eta.den; domain.cells()];
    let mut witnesses = vec![Vec::new(); list.len()];
    for i in order {
        let q = list[i];
        if !domain.contains_cube(&q) {
            return Err(SparseError::OutsideDomain(q));
        }
        let cells = domain.cube_cells(&q);
        let required = eta.num * cells.len() as u64;
        let available: u64 = capacity[cells.clone()].iter().sum();
        if available < required {
            return Err(SparseError::NotSparse { cube: q, available, required });
        }
        let mut need = required;
        let mut runs: Vec<WitnessRun> = Vec::new();
        for c in cells {
            if need == 0 {
                break;
            }
            let take = capacity[c].min(need);
            if take == 0 {
                continue;
            }
            capacity[c] -= take;
            need -= take;
            match runs.last_mut() {
                Some(r) if r.end == c && r.units == take => r.end += 1,
                _ => runs.push(WitnessRun { start: c, end: c + 1, units: take }),
            }
        }
        witnesses[i] = runs;
    }
    let carleson = carleson_constant(domain, cubes)?;
    assert!(carleson.at_most_inverse(eta), "a sparse family must be 1/eta-Carleson");
    Ok(SparseFamily { domain: *domain, shift, cubes: list, eta, witnesses, carleson })
}

/// `Σ_Q c_Q χ_Q` for constant coefficients, by a difference array.
pub fn sum_over_cubes<I: IntoIterator<Item = (DyadicCube, f64)>>(domain: &Domain, items: I) -> Vec<f64> {
    let n = domain.cells();
    let mut diff = vec![0.0; n + 1];
    for (q, c) in items {
        let r = domain.cube_cells(&q);
        diff[r.start] += c;
        diff[r.end] -= c;
    }
    let mut acc = 0.0;
    diff[..n]
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect()
}

/// `A^r_S f = (Σ_{Q∈S} ⟨|f|⟩_Q^r χ_Q)^{1/r}`.
pub fn sparse_operator(cubes: &CubeSet, f: &GridFunction, r: f64) -> Result<GridFunction, SparseError> {
    if !(r > 0.0) {
        return Err(SparseError::Parameter { name: "r", value: r });
    }
    let domain = *f.domain();
    let p = PrefixSums::new(&f.abs().into_values());
    let s = sum_over_cubes(&domain, cubes.iter().map(|q| (*q, p.mean(&domain.cube_cells(q)).powf(r))));
    Ok(GridFunction::new(domain, s.into_iter().map(|v| v.max(0.0).powf(1.0 / r)).collect())?)
}

/// `Σ_{Q∈S} ‖f‖_{Φ,Q} χ_Q`.
pub fn orlicz_sparse(cubes: &CubeSet, f: &GridFunction, phi: &YoungFunction) -> GridFunction {
    let domain = *f.domain();
    let v = f.values();
    let s = sum_over_cubes(&domain, cubes.iter().map(|q| (*q, orlicz_norm_slice(&v[domain.cube_cells(q)], phi))));
    GridFunction::new(domain, s).expect("finite")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorSparse {
    /// `Σ |b(x) − b_Q| ⟨|f|⟩_Q χ_Q(x)`.
    pub t: GridFunction,
    /// `Σ ⟨|b − b_Q||f|⟩_Q χ_Q(x)`.
    pub t_star: GridFunction,
}

pub fn commutator_sparse(cubes: &CubeSet, b: &GridFunction, f: &GridFunction) -> Result<CommutatorSparse, SparseError> {
    if b.domain() != f.domain() {
        return Err(SparseError::DomainMismatch);
    }
    let domain = *f.domain();
    let (bv, fv) = (b.values(), f.values());
    let pb = PrefixSums::new(bv);
    let pf = PrefixSums::new(&f.abs().into_values());
    let mut t = vec![0.0; domain.cells()];
    let mut star = Vec::new();
    for q in cubes {
        let r = domain.cube_cells(q);
        let bq = pb.mean(&r);
        let fq = pf.mean(&r);
        for x in r.clone() {
            t[x] += (bv[x] - bq).abs() * fq;
        }
        let m = r.clone().map(|x| (bv[x] - bq).abs() * fv[x].abs()).sum::<f64>() / r.len() as f64;
        star.push((*q, m));
    }
    Ok(CommutatorSparse {
        t: GridFunction::new(domain, t).expect("finite"),
        t_star: GridFunction::new(domain, sum_over_cubes(&domain, star)).expect("finite"),
    })
}

/// `Σ_{Q∈S} ⟨f⟩_{r,Q} ⟨g⟩_{s,Q} |Q|`.
pub fn bilinear_sparse_form(cubes: &CubeSet, f: &GridFunction, g: &GridFunction, r: f64, s: f64) -> Result<f64, SparseError> {
    if f.domain() != g.domain() {
        return Err(SparseError::DomainMismatch);
    }
    if !(r >= 1.0) {
        return Err(SparseError::Parameter { name: "r", value: r });
    }
    if !(s >= 1.0) {
        return Err(SparseError::Parameter { name: "s", value: s });
    }
    let domain = *f.domain();
    let pf = PrefixSums::new(&f.map(|v| v.abs().powf(r)).into_values());
    let pg = PrefixSums::new(&g.map(|v| v.abs().powf(s)).into_values());
    Ok(cubes
        .iter()
        .map(|q| {
            let c = domain.cube_cells(q);
            pf.mean(&c).powf(1.0 / r) * pg.mean(&c).powf(1.0 / s) * domain.measure(&c)
        })
        .sum())
}

/// `Σ_{Q∈S} χ_Q`.
pub fn overlap_function(domain: &Domain, cubes: &CubeSet) -> GridFunction {
    GridFunction::new(*domain, sum_over_cubes(domain, cubes.iter().map(|q| (*q, 1.0)))).expect("finite")
}

/// `Σ_{R∈S, R⊆Q} χ_R` on the cells of `q`.
pub fn local_overlap(domain: &Domain, cubes: &CubeSet, q: &DyadicCube) -> Vec<u32> {
    let qc = domain.cube_cells(q);
    let mut counts = vec![0u32; qc.len()];
    for r in cubes {
        let rc = domain.cube_cells(r);
        if rc.start >= qc.start && rc.end <= qc.end {
            for x in rc {
                counts[x - qc.start] += 1;
            }
        }
    }
    counts
}

/// Pointwise comparison `lhs ≤ C·rhs` with the least admissible `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domination {
    pub lhs: GridFunction,
    pub rhs: GridFunction,
    pub constant: f64,
}

impl Domination {
    pub fn new(lhs: GridFunction, rhs: GridFunction) -> Self {
        let constant = fitted_constant(lhs.values(), rhs.values());
        Self { lhs, rhs, constant }
    }

    pub fn restricted(lhs: GridFunction, rhs: GridFunction, cells: &Range<usize>) -> Self {
        let constant = fitted_constant(&lhs.values()[cells.clone()], &rhs.values()[cells.clone()]);
        Self { lhs, rhs, constant }
    }
}

/// `max lhs/rhs` over cells with `0/0 = 0` and `x/0 = ∞` for `x > 0`.
pub fn fitted_constant(lhs: &[f64], rhs: &[f64]) -> f64 {
    let mut c: f64 = 0.0;
    for (l, r) in lhs.iter().zip(rhs) {
        let l = l.abs();
        if l == 0.0 {
            continue;
        }
        c = c.max(if *r > 0.0 { l / r } else { f64::INFINITY });
    }
    c
}

enum Visit {
    Picks(Vec<DyadicCube>),
    SelectSelf,
}

/// Maximal cubes `P` strictly below `q` with `|P ∩ E| > |P|/4`, left to right.
///
/// A candidate failing `ok` is replaced by its parent, which carries at most a quarter of `E`;
/// this only happens for cubes clamped at the domain edge.
fn select_children<F: Fn(&DyadicCube, &Range<usize>) -> bool>(
    domain: &Domain,
    q: &DyadicCube,
    bad: &[bool],
    ok: F,
) -> Vec<DyadicCube> {
    let base = domain.cube_cells(q).start;
    let mut prefix = vec![0usize; bad.len() + 1];
    for (i, b) in bad.iter().enumerate() {
        prefix[i + 1] = prefix[i] + *b as usize;
    }
    if prefix[bad.len()] == 0 {
        return Vec::new();
    }
    let count = |r: &Range<usize>| prefix[r.end - base] - prefix[r.start - base];

    fn visit<F: Fn(&DyadicCube, &Range<usize>) -> bool, C: Fn(&Range<usize>) -> usize>(
        domain: &Domain,
        c: &DyadicCube,
        top: bool,
        ok: &F,
        count: &C,
    ) -> Visit {
        let Ok(children) = domain.children(c) else { return Visit::Picks(Vec::new()) };
        let mut picks = Vec::new();
        for p in children {
            let cells = domain.cube_cells(&p);
            let k = count(&cells);
            if k == 0 {
                continue;
            }
            if 4 * k > cells.len() {
                if ok(&p, &cells) || top {
                    picks.push(p);
                } else {
                    return Visit::SelectSelf;
                }
            } else {
                match visit(domain, &p, false, ok, count) {
                    Visit::Picks(v) => picks.extend(v),
                    Visit::SelectSelf => picks.push(p),
                }
            }
        }
        Visit::Picks(picks)
    }

    match visit(domain, q, true, &ok, &count) {
        Visit::Picks(v) => v,
        Visit::SelectSelf => unreachable!("the top call never defers"),
    }
}

/// Level-0 cube of one lattice with its base constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub cube: DyadicCube,
    pub base: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LnExtraction {
    pub family: SparseFamily,
    pub roots: Vec<Root>,
    /// `ω_λ(f;Q)` for each selected cube, in family order.
    pub oscillations: Vec<f64>,
}

impl LnExtraction {
    /// `Σ_{Q∈S} ω_λ(f;Q) χ_Q`.
    pub fn oscillation_sum(&self) -> Vec<f64> {
        let d = self.family.domain();
        sum_over_cubes(d, self.family.cubes().iter().copied().zip(self.oscillations.iter().copied()))
    }

    /// `max_x |f(x) − m₀(x)| − Σ_Q ω_λ(f;Q)χ_Q(x)`; non-positive when the formula holds.
    pub fn excess(&self, f: &GridFunction) -> f64 {
        let d = self.family.domain();
        let sum = self.oscillation_sum();
        let mut worst = f64::NEG_INFINITY;
        for root in &self.roots {
            for x in d.cube_cells(&root.cube) {
                worst = worst.max((f.values()[x] - root.base).abs() - sum[x]);
            }
        }
        worst
    }

    /// Family cubes together with every root whose base constant is non-zero.
    pub fn with_roots(&self) -> CubeSet {
        let mut s = self.family.cube_set();
        for r in &self.roots {
            if r.base != 0.0 {
                s.insert(r.cube);
            }
        }
        s
    }
}

pub const LN_LAMBDA: f64 = 1.0 / 8.0;

/// Stopping-time oscillation decomposition on lattice `shift`.
///
/// Every cube `Q` keeps its narrowest `λ`-window `I_Q` and a base `m_Q ∈ I_Q`; cells with
/// values outside `I_Q` are covered by maximal subcubes with more than a quarter of such
/// cells, whose base is `m_Q` clamped into their own window. Cubes with zero oscillation
/// are not recorded. The family is checked against `η = 1/6`.
pub fn extract_ln(f: &GridFunction, lambda: f64, shift: u8) -> Result<LnExtraction, SparseError> {
    if !(lambda > 0.0 && lambda <= LN_LAMBDA) {
        return Err(SparseError::Parameter { name: "lambda", value: lambda });
    }
    let domain = *f.domain();
    let v = f.values();
    let mut roots = Vec::new();
    let mut stack: Vec<(DyadicCube, f64)> = Vec::new();
    for cube in domain.cubes_at(shift, 0) {
        let (lo, hi) = oscillation_window(f, &domain.cube_cells(&cube), lambda)?;
        let base = 0.5 * (lo + hi);
        roots.push(Root { cube, base });
        stack.push((cube, base));
    }
    let mut found: Vec<(DyadicCube, f64)> = Vec::new();
    while let Some((q, m)) = stack.pop() {
        let cells = domain.cube_cells(&q);
        let (lo, hi) = oscillation_window(f, &cells, lambda)?;
        if hi > lo {
            found.push((q, hi - lo));
        }
        let bad: Vec<bool> = v[cells.clone()].iter().map(|&x| x < lo || x > hi).collect();
        let ok = |_: &DyadicCube, r: &Range<usize>| {
            let inside = v[r.clone()].iter().filter(|&&x| x >= lo && x <= hi).count();
            inside > removable_cells(r.len(), lambda)
        };
        for p in select_children(&domain, &q, &bad, ok) {
            let (plo, phi) = oscillation_window(f, &domain.cube_cells(&p), lambda)?;
            stack.push((p, m.clamp(plo, phi)));
        }
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));
    let cubes: CubeSet = found.iter().map(|(q, _)| *q).collect();
    let family = verify_sparse(&domain, &cubes, Eta::SIXTH)?;
    let oscillations = found.into_iter().map(|(_, w)| w).collect();
    Ok(LnExtraction { family, roots, oscillations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MqExtraction {
    /// One family per lattice, roots included.
    pub families: Vec<SparseFamily>,
    pub domination: Domination,
    /// `max_Q λ^q ω_λ((M^𝒟_q F)^q; Q) / ⟨|F|_q⟩_{3Q}^q` over the selected cubes.
    pub oscillation_constant: f64,
}

/// Sparse domination of the vector maximal function `M̄_q` through the three lattices.
pub fn extract_mq(f: &VectorFunction, q: f64) -> Result<MqExtraction, SparseError> {
    if !(q > 1.0) {
        return Err(SparseError::Parameter { name: "q", value: q });
    }
    let domain = *f.domain();
    let norm = f.lq_norm(q);
    let pn = PrefixSums::new(norm.values());
    let mut families = Vec::new();
    let mut rhs = vec![0.0; domain.cells()];
    let mut osc_const: f64 = 0.0;
    for shift in 0..3u8 {
        let g = vector_maximal(f, q, MaximalKind::Dyadic(shift))?.map(|x| x.powf(q));
        let ext = extract_ln(&g, LN_LAMBDA, shift)?;
        for (cube, w) in ext.family.cubes().iter().zip(&ext.oscillations) {
            let a = pn.mean(&domain.triple(cube)).powf(q);
            osc_const = osc_const.max(if a > 0.0 { LN_LAMBDA.powf(q) * w / a } else { f64::INFINITY });
        }
        let cubes = ext.with_roots();
        let part = sparse_operator(&cubes, &norm, q)?;
        rhs.iter_mut().zip(part.values()).for_each(|(a, b)| *a += b);
        families.push(verify_sparse(&domain, &cubes, Eta::SIXTH)?);
    }
    let lhs = vector_maximal(f, q, MaximalKind::Exact)?;
    let rhs = GridFunction::new(domain, rhs)?;
    Ok(MqExtraction { families, domination: Domination::new(lhs, rhs), oscillation_constant: osc_const })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CzoExtraction {
    pub family: SparseFamily,
    /// Stopping parameter `α` chosen at each cube, in family order.
    pub alphas: Vec<f64>,
    /// Left side on `Q0` against `C_T Σ_Q (coefficients) χ_Q`.
    pub domination: Domination,
}

impl CzoExtraction {
    /// Lattice families of the cubes `R_Q ⊇ 3Q`.
    pub fn lift(&self) -> Result<Vec<CubeSet>, SparseError> {
        let d = self.family.domain();
        let mut out = vec![CubeSet::new(); 3];
        for q in self.family.cubes() {
            let r = d.containing_triple(q)?;
            out[r.shift as usize].insert(r);
        }
        Ok(out)
    }
}

/// Per-cube data of a stopping-time step: the exceptional set on the cells of `Q`.
struct Step {
    bad: Vec<bool>,
    alpha: f64,
}

/// `E = ∪_i {x∈Q : pointwise_i(x) > α a_i} ∪ {x∈Q : grand_i(x) > α c a_i}` with the least
/// power of two `α ≥ 1` giving `|E| ≤ |Q|/8`.
fn stopping_set(cells: &Range<usize>, terms: &[(&[f64], &[f64], f64)], c: f64) -> Step {
    let mut alpha = 1.0;
    loop {
        let bad: Vec<bool> = cells
            .clone()
            .map(|x| terms.iter().any(|(pw, gm, a)| pw[x] > alpha * a || gm[x] > alpha * c * a))
            .collect();
        if 8 * bad.iter().filter(|&&b| b).count() <= cells.len() {
            return Step { bad, alpha };
        }
        alpha *= 2.0;
    }
}

/// `max_{|y−x|≤1} v(y)` over the grid.
fn neighbour_max(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|x| {
            let a = x.saturating_sub(1);
            let b = (x + 2).min(n);
            v[a..b].iter().fold(0.0f64, |m, y| m.max(*y))
        })
        .collect()
}

fn restrict_vector(f: &VectorFunction, cells: &Range<usize>) -> VectorFunction {
    VectorFunction::new(f.components().iter().map(|c| c.restrict(cells)).collect()).expect("same domain")
}

fn check_cz_inputs(t: &CzOperator, f: &VectorFunction, q: f64, q0: &DyadicCube) -> Result<(), SparseError> {
    if t.domain() != f.domain() {
        return Err(SparseError::DomainMismatch);
    }
    if !(q > 1.0) {
        return Err(SparseError::Parameter { name: "q", value: q });
    }
    if !f.domain().contains_cube(q0) {
        return Err(SparseError::OutsideDomain(*q0));
    }
    Ok(())
}

/// Recursive stopping time for `T̄_q(F χ_{3Q0})` on `Q0`, checked against `η = 1/2`.
pub fn extract_czo(t: &CzOperator, f: &VectorFunction, q: f64, q0: &DyadicCube) -> Result<CzoExtraction, SparseError> {
    check_cz_inputs(t, f, q, q0)?;
    let domain = *f.domain();
    let outer = domain.triple(q0);
    let fr = restrict_vector(f, &outer);
    let norm = fr.lq_norm(q);
    let pn = PrefixSums::new(norm.values());
    let nmax = neighbour_max(norm.values());
    let ct = t.c_t();
    let mut found: Vec<(DyadicCube, f64, f64)> = Vec::new();
    let mut stack = vec![*q0];
    while let Some(cube) = stack.pop() {
        let cells = domain.cube_cells(&cube);
        let tri = domain.triple_cells(&cells);
        let a = pn.mean(&tri);
        let gm = grand_maximal_cells(t, &fr, q, &tri, &cells);
        let step = stopping_set(&cells, &[(&nmax, &gm, a)], ct);
        found.push((cube, step.alpha, a));
        let ok = |_: &DyadicCube, r: &Range<usize>| step.bad[r.start - cells.start..r.end - cells.start].iter().any(|b| !b);
        stack.extend(select_children(&domain, &cube, &step.bad, ok));
    }
    found.sort_by(|x, y| x.0.cmp(&y.0));
    let family = verify_sparse(&domain, &found.iter().map(|x| x.0).collect(), Eta::HALF)?;
    let lhs = t.vector_apply(&fr, q).map_err(|_| SparseError::Parameter { name: "q", value: q })?;
    let rhs = sum_over_cubes(&domain, found.iter().map(|(c, _, a)| (*c, ct * a)));
    let domination = Domination::restricted(lhs, GridFunction::new(domain, rhs)?, &domain.cube_cells(q0));
    Ok(CzoExtraction { family, alphas: found.iter().map(|x| x.1).collect(), domination })
}

/// Stopping time for the commutator `[b, T̄_q](F χ_{3Q0})` with the constants `b_{R_Q}`.
pub fn extract_commutator(
    t: &CzOperator,
    b: &GridFunction,
    f: &VectorFunction,
    q: f64,
    q0: &DyadicCube,
) -> Result<CzoExtraction, SparseError> {
    check_cz_inputs(t, f, q, q0)?;
    if b.domain() != f.domain() {
        return Err(SparseError::DomainMismatch);
    }
    let domain = *f.domain();
    let outer = domain.triple(q0);
    let fr = restrict_vector(f, &outer);
    let norm = fr.lq_norm(q);
    let pn = PrefixSums::new(norm.values());
    let nmax = neighbour_max(norm.values());
    let pb = PrefixSums::new(b.values());
    let ct = t.c_t();
    let mut found: Vec<(DyadicCube, f64, f64, f64, f64)> = Vec::new();
    let mut stack = vec![*q0];
    while let Some(cube) = stack.pop() {
        let cells = domain.cube_cells(&cube);
        let tri = domain.triple_cells(&cells);
        let bq = pb.mean(&domain.cube_cells(&domain.containing_triple(&cube)?));
        let shifted = b.map(|x| x - bq);
        let g = fr.scale_by(&shifted);
        let gnorm = g.lq_norm(q);
        let gmax = neighbour_max(gnorm.values());
        let a1 = pn.mean(&tri);
        let a2 = PrefixSums::new(gnorm.values()).mean(&tri);
        let gm1 = grand_maximal_cells(t, &fr, q, &tri, &cells);
        let gm2 = grand_maximal_cells(t, &g, q, &tri, &cells);
        let step = stopping_set(&cells, &[(&nmax, &gm1, a1), (&gmax, &gm2, a2)], ct);
        found.push((cube, step.alpha, bq, a1, a2));
        let ok = |_: &DyadicCube, r: &Range<usize>| step.bad[r.start - cells.start..r.end - cells.start].iter().any(|b| !b);
        stack.extend(select_children(&domain, &cube, &step.bad, ok));
    }
    found.sort_by(|x, y| x.0.cmp(&y.0));
    let family = verify_sparse(&domain, &found.iter().map(|x| x.0).collect(), Eta::HALF)?;
    let lhs = t.vector_commutator(b, &fr, q).map_err(|_| SparseError::Parameter { name: "q", value: q })?;
    let bv = b.values();
    let mut rhs = vec![0.0; domain.cells()];
    for (cube, _, bq, a1, a2) in &found {
        for x in domain.cube_cells(cube) {
            rhs[x] += ct * ((bv[x] - bq).abs() * a1 + a2);
        }
    }
    let domination = Domination::restricted(lhs, GridFunction::new(domain, rhs)?, &domain.cube_cells(q0));
    Ok(CzoExtraction { family, alphas: found.iter().map(|x| x.1).collect(), domination })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearExtraction {
    pub families: Vec<SparseFamily>,
    pub domination: Domination,
}

/// Sparse domination of `Σ_j M_{r,s}(f_j, g_j)` by `Σ_Q ⟨|F|_q⟩_{r,Q} ⟨|G|_{q'}⟩_{s,Q} χ_Q`.
pub fn extract_bilinear(
    f: &VectorFunction,
    g: &VectorFunction,
    q: f64,
    r: f64,
    s: f64,
) -> Result<BilinearExtraction, SparseError> {
    if f.domain() != g.domain() || f.len() != g.len() {
        return Err(SparseError::DomainMismatch);
    }
    if !(q > 1.0) {
        return Err(SparseError::Parameter { name: "q", value: q });
    }
    let qc = q / (q - 1.0);
    if !(s >= 1.0 && s < (qc + 1.0) / 2.0) {
        return Err(SparseError::Parameter { name: "s", value: s });
    }
    if !(r >= 1.0 && r < (q + 1.0) / 2.0) {
        return Err(SparseError::Parameter { name: "r", value: r });
    }
    let domain = *f.domain();
    let combined = |kind: MaximalKind| -> Result<GridFunction, SparseError> {
        let parts: Vec<GridFunction> = f
            .components()
            .iter()
            .zip(g.components())
            .map(|(a, b)| bilinear_maximal(a, b, r, s, kind))
            .collect::<Result<_, _>>()?;
        Ok(lq_combine(parts.iter().map(|p| p.values()), 1.0, domain))
    };
    let fn_ = f.lq_norm(q).map(|x| x.powf(r));
    let gn_ = g.lq_norm(qc).map(|x| x.powf(s));
    let (pf, pg) = (PrefixSums::new(fn_.values()), PrefixSums::new(gn_.values()));
    let mut families = Vec::new();
    let mut rhs = vec![0.0; domain.cells()];
    for shift in 0..3u8 {
        let h = combined(MaximalKind::Dyadic(shift))?;
        let ext = extract_ln(&h, LN_LAMBDA, shift)?;
        let cubes = ext.with_roots();
        let part = sum_over_cubes(
            &domain,
            cubes.iter().map(|c| {
                let cells = domain.cube_cells(c);
                (*c, pf.mean(&cells).powf(1.0 / r) * pg.mean(&cells).powf(1.0 / s))
            }),
        );
        rhs.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        families.push(verify_sparse(&domain, &cubes, Eta::SIXTH)?);
    }
    let lhs = combined(MaximalKind::Exact)?;
    Ok(BilinearExtraction { families, domination: Domination::new(lhs, GridFunction::new(domain, rhs)?) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::czo::Kernel;

    fn full_tree(d: &Domain) -> CubeSet {
        d.lattice(0).into_iter().collect()
    }

    #[test]
    fn singleton_and_antichain() {
        let d = Domain::unit(4);
        let one: CubeSet = [d.top()].into_iter().collect();
        let fam = verify_sparse(&d, &one, Eta::ONE).unwrap();
        assert_eq!(fam.carleson().value(), 1.0);
        let level: CubeSet = d.cubes_at(0, 2).into_iter().collect();
        let fam = verify_sparse(&d, &level, Eta::ONE).unwrap();
        assert_eq!(fam.carleson().value(), 1.0);
    }

    #[test]
    fn full_tree_threshold() {
        for depth in 1..7 {
            let d = Domain::unit(depth);
            let tree = full_tree(&d);
            let c = carleson_constant(&d, &tree).unwrap();
            assert_eq!(c.value(), (depth + 1) as f64);
            assert!(verify_sparse(&d, &tree, Eta::new(1, depth as u64 + 1).unwrap()).is_ok());
            if depth > 0 {
                let k = depth as u64 + 1;
                let above = Eta::new(k + 1, k * (k + 1) - 1).unwrap();
                assert!(matches!(verify_sparse(&d, &tree, above), Err(SparseError::NotSparse { .. })));
            }
        }
    }

    #[test]
    fn mixed_shifts_rejected() {
        let d = Domain::unit(3);
        let s: CubeSet = [DyadicCube::new(0, 1, 0).unwrap(), DyadicCube::new(1, 1, 0).unwrap()].into_iter().collect();
        assert!(matches!(verify_sparse(&d, &s, Eta::HALF), Err(SparseError::MixedShifts(_))));
    }

    #[test]
    fn operator_examples() {
        let d = Domain::unit(3);
        let q = DyadicCube::new(0, 1, 1).unwrap();
        let s: CubeSet = [q].into_iter().collect();
        let chi = GridFunction::indicator(d, d.cube_cells(&q));
        for r in [0.5, 1.0, 3.0] {
            assert_eq!(sparse_operator(&s, &chi, r).unwrap(), chi);
        }
        assert_eq!(sparse_operator(&CubeSet::new(), &chi, 1.0).unwrap(), GridFunction::zeros(d));
        assert_eq!(bilinear_sparse_form(&s, &chi, &chi, 1.0, 1.0).unwrap(), 0.5);
        assert_eq!(overlap_function(&d, &full_tree(&d)).values(), &[4.0; 8]);
    }

    #[test]
    fn commutator_sparse_half_indicator() {
        let d = Domain::unit(3);
        let s: CubeSet = [d.top()].into_iter().collect();
        let b = GridFunction::indicator(d, 0..4);
        let out = commutator_sparse(&s, &b, &GridFunction::constant(d, 1.0)).unwrap();
        assert!(out.t.values().iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert!(out.t_star.values().iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn ln_examples() {
        let d = Domain::unit(4);
        let c = extract_ln(&GridFunction::constant(d, 2.5), LN_LAMBDA, 0).unwrap();
        assert!(c.family.is_empty());
        assert_eq!(c.roots[0].base, 2.5);
        let chi = GridFunction::indicator(d, 0..8);
        let e = extract_ln(&chi, LN_LAMBDA, 0).unwrap();
        assert_eq!(e.family.cubes(), &[d.top()]);
        assert_eq!(e.oscillations, vec![1.0]);
        assert!(e.excess(&chi) <= 0.0);
    }

    #[test]
    fn czo_zero_input() {
        let d = Domain::unit(4);
        let t = CzOperator::new(d, Kernel::Hilbert).unwrap();
        let e = extract_czo(&t, &VectorFunction::scalar(GridFunction::zeros(d)), 2.0, &d.top()).unwrap();
        assert_eq!(e.family.cubes(), &[d.top()]);
        assert_eq!(e.domination.constant, 0.0);
    }
}
