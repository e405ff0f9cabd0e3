//! Weights and their constants: `A_p`, two-weight `A_p`, `A_∞`, `A_1`, reverse Hölder and `C_p`.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Domain;
use crate::maximal::{for_each_cube, indicator_maximal, maximal, MaximalKind};
use crate::signal::{GridFunction, PrefixSums, SignalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("weight is not positive at cell {cell}: {value}")]
    NonPositive { cell: usize, value: f64 },
    #[error("parameter {name} out of range: {value}")]
    Parameter { name: &'static str, value: f64 },
    #[error("weights live on different domains")]
    DomainMismatch,
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Value used on the vanishing side of a truncated weight.
pub const POSITIVITY_FLOOR: f64 = 1e-8;

/// Reverse Hölder constant `τ`: a round value above twice the largest `tau_min` over the
/// power, bounded random and `(Mg)^γ` weights at depths 6, 8 and 10 with shifted3 scope.
/// The largest is `0.91`, for `|x − ½|^{−0.9}` at depth 10.
pub const CALIBRATED_TAU: f64 = 2.0;

fn check_positive(w: &GridFunction) -> Result<(), WeightError> {
    match w.values().iter().position(|&v| !(v > 0.0)) {
        Some(cell) => Err(WeightError::NonPositive { cell, value: w.values()[cell] }),
        None => Ok(()),
    }
}

fn check_p(p: f64) -> Result<(), WeightError> {
    if p > 1.0 {
        Ok(())
    } else {
        Err(WeightError::Parameter { name: "p", value: p })
    }
}

/// `sup_Q ⟨w⟩_Q ⟨w^{1−p'}⟩_Q^{p−1}` over the cubes of `scope`.
pub fn ap_constant(w: &GridFunction, p: f64, scope: MaximalKind) -> Result<f64, WeightError> {
    check_p(p)?;
    check_positive(w)?;
    let sigma = w.map(|v| v.powf(-1.0 / (p - 1.0)));
    two_weight_ap(w, &sigma, p, scope)
}

/// `sup_Q ⟨w⟩_Q ⟨σ⟩_Q^{p−1}`.
pub fn two_weight_ap(w: &GridFunction, sigma: &GridFunction, p: f64, scope: MaximalKind) -> Result<f64, WeightError> {
    check_p(p)?;
    if w.domain() != sigma.domain() {
        return Err(WeightError::DomainMismatch);
    }
    check_positive(w)?;
    check_positive(sigma)?;
    let pw = PrefixSums::new(w.values());
    let ps = PrefixSums::new(sigma.values());
    let mut best: f64 = 0.0;
    for_each_cube(w.domain(), scope, |r| {
        best = best.max(pw.mean(r) * ps.mean(r).powf(p - 1.0));
    });
    Ok(best)
}

/// `sup_Q w(Q)^{-1} ∫_Q M(wχ_Q)`, with `M` over the cubes of `scope`.
pub fn ainfty_constant(w: &GridFunction, scope: MaximalKind) -> Result<f64, WeightError> {
    check_positive(w)?;
    let domain = *w.domain();
    let pw = PrefixSums::new(w.values());
    let mut best: f64 = 0.0;
    for_each_cube(&domain, scope, |q| {
        let local = local_maximal(&domain, &pw, q, scope);
        best = best.max(local.iter().sum::<f64>() / pw.sum(q));
    });
    Ok(best)
}

/// `M(wχ_Q)` on the cells of `q`: the sup over admissible `R ∋ x` of `w(R∩Q)/|R|`.
fn local_maximal(domain: &Domain, pw: &PrefixSums, q: &Range<usize>, scope: MaximalKind) -> Vec<f64> {
    let shifts: &[u8] = match scope {
        MaximalKind::Dyadic(s) => &[s.min(2)][..],
        MaximalKind::Shifted3 => &[0, 1, 2],
        MaximalKind::Exact => return local_exact_maximal(pw, q),
    };
    let shifts = shifts.to_vec();
    q.clone()
        .map(|x| {
            let mut best: f64 = 0.0;
            for &s in &shifts {
                for level in 0..=domain.depth() {
                    let r = domain.cube_cells(&domain.cube_containing(s, level, x));
                    let a = r.start.max(q.start);
                    let b = r.end.min(q.end);
                    best = best.max(pw.sum(&(a..b)) / r.len() as f64);
                }
            }
            best
        })
        .collect()
}

/// Exact maximal function of `wχ_Q` on `Q`; intervals leaving `Q` never help.
fn local_exact_maximal(pw: &PrefixSums, q: &Range<usize>) -> Vec<f64> {
    let n = q.len();
    let mut out = vec![0.0f64; n];
    let mut vals = vec![0.0; n + 1];
    for a in 0..n {
        for b in a + 1..=n {
            vals[b] = pw.mean(&(q.start + a..q.start + b));
        }
        let mut best = f64::NEG_INFINITY;
        for x in (a..n).rev() {
            best = best.max(vals[x + 1]);
            out[x] = out[x].max(best);
        }
    }
    out
}

/// `max_x Mw(x)/w(x)`.
pub fn a1_constant(w: &GridFunction, scope: MaximalKind) -> Result<f64, WeightError> {
    check_positive(w)?;
    let m = maximal(w, scope);
    Ok(m.values().iter().zip(w.values()).fold(1.0f64, |acc, (a, b)| acc.max(a / b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReverseHolder {
    pub tau: f64,
    pub r_w: f64,
    pub holds: bool,
    /// Least `τ` for which the check passes; `0` when it passes for every `τ > 0`.
    pub tau_min: f64,
}

/// Checks `⟨w^{r}⟩_Q^{1/r} ≤ 2⟨w⟩_Q` with `r = 1 + 1/(τ [w]_{A_∞})` on every scoped cube.
pub fn reverse_holder_report(w: &GridFunction, scope: MaximalKind, tau: f64) -> Result<ReverseHolder, WeightError> {
    if !(tau > 0.0) {
        return Err(WeightError::Parameter { name: "tau", value: tau });
    }
    let ainf = ainfty_constant(w, scope)?;
    let r_of = |t: f64| 1.0 + 1.0 / (t * ainf);
    let passes = |t: f64| reverse_holder_holds(w, scope, r_of(t));
    let holds = passes(tau);
    let tau_min = if reverse_holder_max_ratio(w, scope, f64::INFINITY) <= 2.0 {
        0.0
    } else {
        let mut hi = 1e-3;
        while !passes(hi) {
            hi *= 2.0;
            if hi > 1e12 {
                break;
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-6 * hi {
            let mid = 0.5 * (lo + hi);
            if passes(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(ReverseHolder { tau, r_w: r_of(tau), holds, tau_min })
}

fn reverse_holder_holds(w: &GridFunction, scope: MaximalKind, r: f64) -> bool {
    reverse_holder_max_ratio(w, scope, r) <= 2.0
}

/// `max_Q ⟨w^r⟩_Q^{1/r} / ⟨w⟩_Q`; `r = ∞` uses the maximum on `Q`.
pub fn reverse_holder_max_ratio(w: &GridFunction, scope: MaximalKind, r: f64) -> f64 {
    let v = w.values();
    let pw = PrefixSums::new(v);
    let mut best: f64 = 0.0;
    if r.is_infinite() {
        for_each_cube(w.domain(), scope, |q| {
            let m = v[q.clone()].iter().fold(0.0f64, |a, b| a.max(*b));
            best = best.max(m / pw.mean(q));
        });
    } else {
        let top = w.max_abs();
        let pr = PrefixSums::new(&v.iter().map(|x| (x / top).powf(r)).collect::<Vec<_>>());
        for_each_cube(w.domain(), scope, |q| {
            best = best.max(top * pr.mean(q).powf(1.0 / r) / pw.mean(q));
        });
    }
    best
}

/// Test sets `E ⊆ Q` used by [`cp_functional`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub scope: MaximalKind,
    /// Halving subintervals of `Q` down to single cells.
    pub dyadic_subcubes: bool,
    /// Left and right tails of `2^j` cells.
    pub tails: bool,
    /// Superlevel sets of `w` in `Q` of every size; these maximize `w(E)` at fixed `|E|`.
    pub level_sets: bool,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self { scope: MaximalKind::Shifted3, dyadic_subcubes: true, tails: true, level_sets: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpEstimate {
    pub value: f64,
    pub cube: Range<usize>,
    pub set_cells: usize,
    pub samples: usize,
}

/// Sampled lower bound for the best `c` in `w(E) ≤ c (|E|/|Q|)^δ ∫ M(χ_Q)^p w`.
pub fn cp_functional(w: &GridFunction, p: f64, delta: f64, plan: &SamplingPlan) -> Result<CpEstimate, WeightError> {
    if !(p > 0.0) {
        return Err(WeightError::Parameter { name: "p", value: p });
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(WeightError::Parameter { name: "delta", value: delta });
    }
    check_positive(w)?;
    let domain = *w.domain();
    let h = domain.cell_measure();
    let v = w.values();
    let pw = PrefixSums::new(v);
    let mut best = CpEstimate { value: 0.0, cube: 0..0, set_cells: 0, samples: 0 };
    for_each_cube(&domain, plan.scope, |q| {
        let m = indicator_maximal(&domain, q);
        let denom: f64 = m.values().iter().zip(v).map(|(a, b)| a.powf(p) * b).sum::<f64>() * h;
        let n = q.len() as f64;
        let consider = |we: f64, k: usize, best: &mut CpEstimate| {
            best.samples += 1;
            let ratio = we * h / ((k as f64 / n).powf(delta) * denom);
            if ratio > best.value {
                best.value = ratio;
                best.cube = q.clone();
                best.set_cells = k;
            }
        };
        if plan.dyadic_subcubes {
            let mut stack = vec![q.clone()];
            while let Some(e) = stack.pop() {
                consider(pw.sum(&e), e.len(), &mut best);
                if e.len() > 1 {
                    let mid = e.start + e.len() / 2;
                    stack.push(e.start..mid);
                    stack.push(mid..e.end);
                }
            }
        }
        if plan.tails {
            let mut k = 1;
            while k <= q.len() {
                consider(pw.sum(&(q.start..q.start + k)), k, &mut best);
                consider(pw.sum(&(q.end - k..q.end)), k, &mut best);
                k *= 2;
            }
        }
        if plan.level_sets {
            let mut s = v[q.clone()].to_vec();
            s.sort_by(|a, b| b.total_cmp(a));
            let mut acc = 0.0;
            for (i, x) in s.iter().enumerate() {
                acc += x;
                consider(acc, i + 1, &mut best);
            }
        }
    });
    Ok(best)
}

/// Deterministic weight families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `|x − x0|^a` averaged over each cell; requires `a > −1`.
    Power { a: f64, x0: f64 },
    /// `(x − x0)_+^a` averaged over each cell, floored by [`POSITIVITY_FLOOR`].
    TruncatedPower { a: f64, x0: f64 },
    /// Independent uniform values in `[lo, hi]`.
    BoundedRandom { lo: f64, hi: f64, seed: u64 },
    /// `(Mg)^γ` for a random non-negative `g`, exact maximal function; `γ ∈ (0, 1)`.
    A1Like { gamma: f64, seed: u64 },
}

impl WeightSpec {
    pub fn generate(&self, domain: Domain) -> Result<GridFunction, WeightError> {
        let h = domain.cell_measure();
        let edges = |i: usize| (i as f64 * h, (i + 1) as f64 * h);
        let values: Vec<f64> = match *self {
            Self::Power { a, x0 } => {
                check_exponent(a)?;
                (0..domain.cells())
                    .map(|i| {
                        let (l, r) = edges(i);
                        (power_antiderivative(r - x0, a) - power_antiderivative(l - x0, a)) / h
                    })
                    .collect()
            }
            Self::TruncatedPower { a, x0 } => {
                check_exponent(a)?;
                (0..domain.cells())
                    .map(|i| {
                        let (l, r) = edges(i);
                        let (l, r) = ((l - x0).max(0.0), (r - x0).max(0.0));
                        let avg = (power_antiderivative(r, a) - power_antiderivative(l, a)) / h;
                        avg.max(POSITIVITY_FLOOR)
                    })
                    .collect()
            }
            Self::BoundedRandom { lo, hi, seed } => {
                if !(lo > 0.0 && hi >= lo) {
                    return Err(WeightError::Parameter { name: "lo", value: lo });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..domain.cells()).map(|_| if hi > lo { rng.gen_range(lo..=hi) } else { lo }).collect()
            }
            Self::A1Like { gamma, seed } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(WeightError::Parameter { name: "gamma", value: gamma });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g: Vec<f64> =
                    (0..domain.cells()).map(|_| if rng.gen_bool(0.1) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect();
                let g = GridFunction::new(domain, g)?;
                let m = maximal(&g, MaximalKind::Exact);
                let floor = m.values().iter().cloned().fold(f64::INFINITY, f64::min).max(POSITIVITY_FLOOR);
                m.values().iter().map(|x| x.max(floor).powf(gamma)).collect()
            }
        };
        Ok(GridFunction::new(domain, values)?)
    }
}

fn check_exponent(a: f64) -> Result<(), WeightError> {
    if a > -1.0 {
        Ok(())
    } else {
        Err(WeightError::Parameter { name: "a", value: a })
    }
}

/// `∫_0^t |s|^a ds` with sign.
fn power_antiderivative(t: f64, a: f64) -> f64 {
    t.signum() * t.abs().powf(a + 1.0) / (a + 1.0)
}

#[derive(Debug, Default)]
struct Cache {
    ap: HashMap<u64, f64>,
    ainfty: Option<f64>,
    a1: Option<f64>,
}

/// A positive weight with lazily cached constants for one cube scope.
#[derive(Debug)]
pub struct Weight {
    w: GridFunction,
    scope: MaximalKind,
    cache: Mutex<Cache>,
}

impl Clone for Weight {
    fn clone(&self) -> Self {
        Self { w: self.w.clone(), scope: self.scope, cache: Mutex::new(Cache::default()) }
    }
}

impl Weight {
    pub fn new(w: GridFunction, scope: MaximalKind) -> Result<Self, WeightError> {
        check_positive(&w)?;
        Ok(Self { w, scope, cache: Mutex::new(Cache::default()) })
    }

    pub fn function(&self) -> &GridFunction {
        &self.w
    }

    pub fn scope(&self) -> MaximalKind {
        self.scope
    }

    /// `w(Q)` for a cell range.
    pub fn mass(&self, cells: &Range<usize>) -> f64 {
        self.w.values()[cells.clone()].iter().sum::<f64>() * self.w.domain().cell_measure()
    }

    pub fn ap(&self, p: f64) -> Result<f64, WeightError> {
        if let Some(v) = self.cache.lock().expect("cache").ap.get(&p.to_bits()) {
            return Ok(*v);
        }
        let v = ap_constant(&self.w, p, self.scope)?;
        self.cache.lock().expect("cache").ap.insert(p.to_bits(), v);
        Ok(v)
    }

    pub fn ainfty(&self) -> f64 {
        if let Some(v) = self.cache.lock().expect("cache").ainfty {
            return v;
        }
        let v = ainfty_constant(&self.w, self.scope).expect("positive");
        self.cache.lock().expect("cache").ainfty = Some(v);
        v
    }

    pub fn a1(&self) -> f64 {
        if let Some(v) = self.cache.lock().expect("cache").a1 {
            return v;
        }
        let v = a1_constant(&self.w, self.scope).expect("positive");
        self.cache.lock().expect("cache").a1 = Some(v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ap_example() {
        let d = Domain::unit(2);
        let w = GridFunction::new(d, vec![1.0, 1.0, 4.0, 4.0]).unwrap();
        assert_relative_eq!(ap_constant(&w, 2.0, MaximalKind::Dyadic(0)).unwrap(), 1.5625, max_relative = 1e-14);
        let one = GridFunction::constant(d, 3.0);
        for p in [1.5, 2.0, 3.0] {
            assert_relative_eq!(ap_constant(&one, p, MaximalKind::Exact).unwrap(), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn constant_weight_constants() {
        let d = Domain::unit(4);
        let one = GridFunction::constant(d, 1.0);
        assert_relative_eq!(ainfty_constant(&one, MaximalKind::Dyadic(0)).unwrap(), 1.0, max_relative = 1e-14);
        assert_eq!(a1_constant(&one, MaximalKind::Exact).unwrap(), 1.0);
        let rh = reverse_holder_report(&one, MaximalKind::Exact, 1.0).unwrap();
        assert!(rh.holds);
        assert_eq!(rh.tau_min, 0.0);
    }

    #[test]
    fn ainfty_of_step_weight() {
        let d = Domain::unit(2);
        let w = GridFunction::new(d, vec![1.0, 1.0, 4.0, 4.0]).unwrap();
        // Top cube: M(wχ) on the cells is (2.5, 2.5, 4, 4), mass 10.
        assert_relative_eq!(ainfty_constant(&w, MaximalKind::Dyadic(0)).unwrap(), 13.0 / 10.0, max_relative = 1e-14);
    }

    #[test]
    fn generators() {
        let d = Domain::unit(5);
        let w = WeightSpec::Power { a: 0.0, x0: 0.5 }.generate(d).unwrap();
        assert!(w.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let t = WeightSpec::TruncatedPower { a: 0.5, x0: 0.5 }.generate(d).unwrap();
        assert_eq!(t.values()[0], POSITIVITY_FLOOR);
        assert!(t.values()[31] > 0.5);
        assert!(WeightSpec::Power { a: -1.0, x0: 0.5 }.generate(d).is_err());
    }

    #[test]
    fn rejects_non_positive() {
        let d = Domain::unit(2);
        let w = GridFunction::new(d, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(ap_constant(&w, 2.0, MaximalKind::Exact), Err(WeightError::NonPositive { cell: 1, value: 0.0 }));
    }

    #[test]
    fn cache_matches_fresh() {
        let d = Domain::unit(5);
        let w = WeightSpec::Power { a: -0.5, x0: 0.3 }.generate(d).unwrap();
        let wt = Weight::new(w.clone(), MaximalKind::Shifted3).unwrap();
        let first = (wt.ap(2.0).unwrap(), wt.ainfty(), wt.a1());
        let again = (wt.ap(2.0).unwrap(), wt.ainfty(), wt.a1());
        assert_eq!(first, again);
        assert_eq!(first.0, ap_constant(&w, 2.0, MaximalKind::Shifted3).unwrap());
    }
}
