//! Piecewise-constant functions on the cell grid, their norms, rearrangements,
//! oscillations and Orlicz averages.

use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::{Domain, GeometryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite value at cell {0}")]
    NonFinite(usize),
    #[error("components live on different domains")]
    DomainMismatch,
    #[error("a vector function needs at least one component")]
    NoComponents,
    #[error("exponent q must exceed 1, got {0}")]
    ExponentTooSmall(f64),
    #[error("exponent must be positive, got {0}")]
    NonPositiveExponent(f64),
    #[error("rearrangement parameter must be positive, got {0}")]
    NonPositiveMeasure(f64),
    #[error("oscillation parameter must lie in (0,1), got {0}")]
    BadLambda(f64),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    domain: Domain,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self, SignalError> {
        if values.len() != domain.cells() {
            return Err(SignalError::Length { expected: domain.cells(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self { domain, values })
    }

    pub fn zeros(domain: Domain) -> Self {
        Self::constant(domain, 0.0)
    }

    pub fn constant(domain: Domain, c: f64) -> Self {
        Self { domain, values: vec![c; domain.cells()] }
    }

    pub fn indicator(domain: Domain, cells: Range<usize>) -> Self {
        let mut values = vec![0.0; domain.cells()];
        for v in &mut values[cells] {
            *v = 1.0;
        }
        Self { domain, values }
    }

    /// Samples `f` at cell midpoints.
    pub fn from_fn<F: Fn(f64) -> f64>(domain: Domain, f: F) -> Result<Self, SignalError> {
        Self::new(domain, (0..domain.cells()).map(|i| f(domain.midpoint(i))).collect())
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Applies `f` cellwise. Non-finite results are a caller bug and panic.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        assert!(values.iter().all(|v| v.is_finite()), "map produced a non-finite value");
        Self { domain: self.domain, values }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Self {
        assert_eq!(self.domain, other.domain, "domain mismatch");
        let values: Vec<f64> = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        assert!(values.iter().all(|v| v.is_finite()), "zip_map produced a non-finite value");
        Self { domain: self.domain, values }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn restrict(&self, cells: &Range<usize>) -> Self {
        let mut values = vec![0.0; self.len()];
        values[cells.clone()].copy_from_slice(&self.values[cells.clone()]);
        Self { domain: self.domain, values }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.domain.cell_measure()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn average(&self, cells: &Range<usize>) -> Result<f64, SignalError> {
        self.domain.check_range(cells)?;
        Ok(self.values[cells.clone()].iter().sum::<f64>() / cells.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {},{}", self.domain.length(), self.domain.depth());
        for v in &self.values {
            let _ = writeln!(s, "{v:?}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, SignalError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| SignalError::Csv("missing header".into()))?;
        let header = header
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| SignalError::Csv("header must start with '#'".into()))?;
        let mut parts = header.split(',').map(str::trim);
        let length: f64 = parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| SignalError::Csv("bad domain length".into()))?;
        let depth: u32 =
            parts.next().and_then(|p| p.parse().ok()).ok_or_else(|| SignalError::Csv("bad depth".into()))?;
        let domain = Domain::new(length, depth)?;
        let values = lines
            .enumerate()
            .map(|(i, l)| l.trim().parse::<f64>().map_err(|e| SignalError::Csv(format!("line {}: {e}", i + 2))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(domain, values)
    }
}

/// Prefix sums for O(1) range sums.
#[derive(Debug, Clone)]
pub struct PrefixSums(Vec<f64>);

impl PrefixSums {
    pub fn new(values: &[f64]) -> Self {
        let mut p = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        p.push(0.0);
        for v in values {
            acc += v;
            p.push(acc);
        }
        Self(p)
    }

    pub fn sum(&self, r: &Range<usize>) -> f64 {
        self.0[r.end] - self.0[r.start]
    }

    pub fn mean(&self, r: &Range<usize>) -> f64 {
        self.sum(r) / r.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFunction {
    components: Vec<GridFunction>,
}

impl VectorFunction {
    pub fn new(components: Vec<GridFunction>) -> Result<Self, SignalError> {
        let first = components.first().ok_or(SignalError::NoComponents)?;
        if components.iter().any(|c| c.domain != first.domain) {
            return Err(SignalError::DomainMismatch);
        }
        Ok(Self { components })
    }

    pub fn scalar(f: GridFunction) -> Self {
        Self { components: vec![f] }
    }

    pub fn domain(&self) -> &Domain {
        &self.components[0].domain
    }

    pub fn components(&self) -> &[GridFunction] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cellwise `(Σ_j |f_j|^q)^{1/q}`.
    pub fn lq_norm(&self, q: f64) -> GridFunction {
        lq_combine(self.components.iter().map(|c| c.values()), q, *self.domain())
    }

    pub fn map_components<F: Fn(&GridFunction) -> GridFunction>(&self, f: F) -> Self {
        Self { components: self.components.iter().map(f).collect() }
    }

    pub fn scale_by(&self, g: &GridFunction) -> Self {
        self.map_components(|c| c.zip_map(g, |a, b| a * b))
    }
}

/// Cellwise ℓ^q combination of equally long slices.
pub fn lq_combine<'a, I: Iterator<Item = &'a [f64]>>(parts: I, q: f64, domain: Domain) -> GridFunction {
    let n = domain.cells();
    let mut acc = vec![0.0f64; n];
    let mut scale = vec![0.0f64; n];
    let parts: Vec<&[f64]> = parts.collect();
    for p in &parts {
        for (s, v) in scale.iter_mut().zip(p.iter()) {
            *s = s.max(v.abs());
        }
    }
    for p in &parts {
        for ((a, v), s) in acc.iter_mut().zip(p.iter()).zip(&scale) {
            if *s > 0.0 {
                *a += (v.abs() / s).powf(q);
            }
        }
    }
    let values = acc.iter().zip(&scale).map(|(a, s)| if *s > 0.0 { s * a.powf(1.0 / q) } else { 0.0 }).collect();
    GridFunction { domain, values }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub strong: f64,
    pub weak: f64,
}

/// Strong and weak `L^p(w)` norms; the weak norm is exact on attained levels.
pub fn lp_norms(f: &GridFunction, p: f64, w: Option<&GridFunction>) -> Result<Norms, SignalError> {
    if !(p > 0.0) {
        return Err(SignalError::NonPositiveExponent(p));
    }
    if let Some(w) = w {
        if w.domain != f.domain {
            return Err(SignalError::DomainMismatch);
        }
    }
    let h = f.domain.cell_measure();
    let weight = |i: usize| w.map_or(1.0, |w| w.values[i]) * h;
    let scale = f.max_abs();
    if scale == 0.0 {
        return Ok(Norms { strong: 0.0, weak: 0.0 });
    }
    let strong = scale
        * (0..f.len()).map(|i| (f.values[i].abs() / scale).powf(p) * weight(i)).sum::<f64>().powf(1.0 / p);
    let mut idx: Vec<usize> = (0..f.len()).filter(|&i| f.values[i] != 0.0).collect();
    idx.sort_by(|&a, &b| f.values[b].abs().total_cmp(&f.values[a].abs()));
    let mut weak: f64 = 0.0;
    let mut mass = 0.0;
    let mut k = 0;
    while k < idx.len() {
        let level = f.values[idx[k]].abs();
        while k < idx.len() && f.values[idx[k]].abs() == level {
            mass += weight(idx[k]);
            k += 1;
        }
        weak = weak.max(level * mass.powf(1.0 / p));
    }
    Ok(Norms { strong, weak })
}

/// `f*(t) = inf{α > 0 : |{|f| > α}| ≤ t}`.
pub fn decreasing_rearrangement(f: &GridFunction, t: f64) -> Result<f64, SignalError> {
    if !(t > 0.0) {
        return Err(SignalError::NonPositiveMeasure(t));
    }
    let mut v: Vec<f64> = f.values.iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let m = (t / f.domain.cell_measure() + 1e-9).floor() as usize;
    Ok(if m >= v.len() { 0.0 } else { v[m] })
}

fn check_lambda(lambda: f64) -> Result<(), SignalError> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(SignalError::BadLambda(lambda))
    }
}

/// Number of cells that may be discarded from a cube of `n` cells.
pub fn removable_cells(n: usize, lambda: f64) -> usize {
    ((lambda * n as f64) + 1e-9).floor() as usize
}

/// Narrowest interval `[lo, hi]` holding all but `⌊λn⌋` of the values on `cells`.
/// Ties prefer the leftmost window.
pub fn oscillation_window(f: &GridFunction, cells: &Range<usize>, lambda: f64) -> Result<(f64, f64), SignalError> {
    check_lambda(lambda)?;
    f.domain.check_range(cells)?;
    let mut v = f.values[cells.clone()].to_vec();
    v.sort_by(f64::total_cmp);
    let keep = v.len() - removable_cells(v.len(), lambda);
    let mut best = (v[0], v[keep - 1]);
    for i in 1..=v.len() - keep {
        if v[i + keep - 1] - v[i] < best.1 - best.0 {
            best = (v[i], v[i + keep - 1]);
        }
    }
    Ok(best)
}

/// Removal oscillation `ω_λ(f;Q)`: least `sup − inf` after discarding a set of measure ≤ λ|Q|.
pub fn ln_oscillation(f: &GridFunction, cells: &Range<usize>, lambda: f64) -> Result<f64, SignalError> {
    let (lo, hi) = oscillation_window(f, cells, lambda)?;
    Ok(hi - lo)
}

/// Rearrangement oscillation `ω̃_λ(f;Q) = inf_c ((f−c)χ_Q)*(λ|Q|)`.
///
/// For a fixed `c` the value is the `(⌊λn⌋+1)`-th largest `|f − c|`; minimizing over `c`
/// centres `c` in the narrowest window of the kept values, which gives half its width.
pub fn local_oscillation(f: &GridFunction, cells: &Range<usize>, lambda: f64) -> Result<f64, SignalError> {
    let (lo, hi) = oscillation_window(f, cells, lambda)?;
    Ok((hi - lo) / 2.0)
}

/// `((f − c)χ_Q)*(λ|Q|)` for one constant `c`.
pub fn shifted_rearrangement(f: &GridFunction, cells: &Range<usize>, lambda: f64, c: f64) -> Result<f64, SignalError> {
    check_lambda(lambda)?;
    f.domain.check_range(cells)?;
    let mut v: Vec<f64> = f.values[cells.clone()].iter().map(|x| (x - c).abs()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let m = removable_cells(v.len(), lambda);
    Ok(if m >= v.len() { 0.0 } else { v[m] })
}

/// Mean absolute deviation about a median, `inf_c ⟨|f − c|⟩`, for a slice.
pub fn mean_abs_deviation(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let med = v[(v.len() - 1) / 2];
    v.iter().map(|x| (x - med).abs()).sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum YoungFunction {
    /// `coef · t^r`, `r ≥ 1`.
    Power { r: f64, coef: f64 },
    /// `t · log(e + t)^δ`.
    LogL { delta: f64 },
    /// `t · (log log(e^e + t))^δ`.
    LogLogL { delta: f64 },
    /// `t · log(e + t) · (log log(e^e + t))^δ`.
    LogLLogLogL { delta: f64 },
    /// Piecewise-linear through `(t, Φ(t))` knots starting at the origin, extended linearly.
    Sampled { knots: Vec<(f64, f64)> },
    /// `sup_s (s t − Φ(s))`.
    Complementary { of: Box<YoungFunction> },
}

impl YoungFunction {
    pub fn power(r: f64) -> Self {
        Self::Power { r, coef: 1.0 }
    }

    pub fn identity() -> Self {
        Self::power(1.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let e = std::f64::consts::E;
        match self {
            Self::Power { r, coef } => coef * t.powf(*r),
            Self::LogL { delta } => t * (e + t).ln().powf(*delta),
            Self::LogLogL { delta } => t * (e.powf(e) + t).ln().ln().powf(*delta),
            Self::LogLLogLogL { delta } => t * (e + t).ln() * (e.powf(e) + t).ln().ln().powf(*delta),
            Self::Sampled { knots } => sampled_eval(knots, t),
            Self::Complementary { of } => complementary_eval(of, t),
        }
    }

    /// Inverse by bisection on the increasing branch.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.eval(hi) < y {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn complementary(&self) -> Self {
        Self::Complementary { of: Box::new(self.clone()) }
    }

    /// Checks `Φ(0) = 0`, monotonicity and convexity on a log-spaced sample grid.
    pub fn validate(&self) -> bool {
        if self.eval(0.0) != 0.0 {
            return false;
        }
        let ts: Vec<f64> = (-40..=40).map(|k| 10f64.powf(k as f64 / 8.0)).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| self.eval(t)).collect();
        if vals.iter().any(|v| !v.is_finite() && *v != f64::INFINITY) {
            return false;
        }
        for i in 1..ts.len() {
            if vals[i] + 1e-12 * vals[i].abs() < vals[i - 1] {
                return false;
            }
        }
        for i in 1..ts.len() - 1 {
            let (a, b, c) = (ts[i - 1], ts[i], ts[i + 1]);
            let chord = vals[i - 1] + (vals[i + 1] - vals[i - 1]) * (b - a) / (c - a);
            if vals[i] > chord * (1.0 + 1e-9) + 1e-300 {
                return false;
            }
        }
        true
    }
}

fn sampled_eval(knots: &[(f64, f64)], t: f64) -> f64 {
    let mut prev = (0.0, 0.0);
    for &(x, y) in knots {
        if t <= x {
            return prev.1 + (y - prev.1) * (t - prev.0) / (x - prev.0);
        }
        prev = (x, y);
    }
    let n = knots.len();
    if n < 2 {
        return prev.1 * t / prev.0.max(f64::MIN_POSITIVE);
    }
    let (a, b) = (knots[n - 2], knots[n - 1]);
    b.1 + (b.1 - a.1) / (b.0 - a.0) * (t - b.0)
}

/// Golden-section maximization of the concave map `s ↦ s t − Φ(s)`.
fn complementary_eval(phi: &YoungFunction, t: f64) -> f64 {
    let g = |s: f64| s * t - phi.eval(s);
    let mut hi = 1.0;
    while g(hi) > g(hi / 2.0) || g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e150 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut ga, mut gb) = (g(a), g(b));
    for _ in 0..200 {
        if ga < gb {
            lo = a;
            a = b;
            ga = gb;
            b = lo + r * (hi - lo);
            gb = g(b);
        } else {
            hi = b;
            b = a;
            gb = ga;
            a = hi - r * (hi - lo);
            ga = g(a);
        }
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    ga.max(gb).max(0.0)
}

/// Luxemburg average `inf{λ > 0 : (1/|Q|)∫_Q Φ(|f|/λ) ≤ 1}` by bisection (relative 1e-10).
pub fn orlicz_norm(f: &GridFunction, cells: &Range<usize>, phi: &YoungFunction) -> Result<f64, SignalError> {
    f.domain.check_range(cells)?;
    Ok(orlicz_norm_slice(&f.values[cells.clone()], phi))
}

pub fn orlicz_norm_slice(values: &[f64], phi: &YoungFunction) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    if let YoungFunction::Power { r, coef } = phi {
        let m = values.iter().map(|v| (v.abs() / scale).powf(*r)).sum::<f64>() / values.len() as f64;
        return scale * (coef * m).powf(1.0 / r);
    }
    let n = values.len() as f64;
    let avg = |lam: f64| values.iter().map(|v| phi.eval(v.abs() / lam)).sum::<f64>() / n;
    let mut hi = scale;
    while avg(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    while avg(lo) <= 1.0 {
        hi = lo;
        lo /= 2.0;
        if lo < scale * 1e-300 {
            return 0.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if avg(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d2() -> Domain {
        Domain::unit(2)
    }

    #[test]
    fn averages() {
        let f = GridFunction::new(d2(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.average(&(0..2)).unwrap(), 1.5);
        assert!(f.average(&(1..1)).is_err());
        let c = GridFunction::constant(d2(), 3.5);
        assert_eq!(c.average(&(1..4)).unwrap(), 3.5);
    }

    #[test]
    fn norms_on_small_grid() {
        let f = GridFunction::new(d2(), vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        let n = lp_norms(&f, 1.0, None).unwrap();
        assert_relative_eq!(n.strong, 2.0);
        // levels: 3 on 0.25, 2 on 0.75, 1 on 1.0
        assert_relative_eq!(n.weak, 1.5);
        let e = GridFunction::indicator(d2(), 1..3);
        for p in [0.5, 1.0, 2.5] {
            let n = lp_norms(&e, p, None).unwrap();
            assert_relative_eq!(n.strong, 0.5f64.powf(1.0 / p), epsilon = 1e-14);
            assert_relative_eq!(n.weak, 0.5f64.powf(1.0 / p), epsilon = 1e-14);
        }
        let z = lp_norms(&GridFunction::zeros(d2()), 2.0, None).unwrap();
        assert_eq!(z, Norms { strong: 0.0, weak: 0.0 });
    }

    #[test]
    fn rearrangement_examples() {
        let f = GridFunction::new(d2(), vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(decreasing_rearrangement(&f, 0.25).unwrap(), 2.0);
        assert_eq!(decreasing_rearrangement(&f, 1.0).unwrap(), 0.0);
        assert!(decreasing_rearrangement(&f, 0.0).is_err());
        let c = GridFunction::constant(d2(), 4.0);
        assert_eq!(decreasing_rearrangement(&c, 0.6).unwrap(), 4.0);
    }

    #[test]
    fn oscillation_examples() {
        let f = GridFunction::new(d2(), vec![0.0, 0.0, 0.0, 10.0]).unwrap();
        assert_eq!(local_oscillation(&f, &(0..4), 0.25).unwrap(), 0.0);
        assert_eq!(ln_oscillation(&f, &(0..4), 0.25).unwrap(), 0.0);
        let h = GridFunction::new(d2(), vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(local_oscillation(&h, &(0..4), 0.25).unwrap(), 0.5);
        assert_eq!(shifted_rearrangement(&h, &(0..4), 0.25, 0.5).unwrap(), 0.5);
        assert_eq!(shifted_rearrangement(&h, &(0..4), 0.25, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn orlicz_examples() {
        let d = Domain::unit(3);
        let c = GridFunction::constant(d, 2.5);
        assert_relative_eq!(orlicz_norm(&c, &(0..8), &YoungFunction::power(3.0)).unwrap(), 2.5, max_relative = 1e-12);
        let sampled = YoungFunction::Sampled { knots: vec![(1.0, 1.0), (2.0, 3.0), (4.0, 9.0)] };
        assert_relative_eq!(orlicz_norm(&c, &(0..8), &sampled).unwrap(), 2.5, max_relative = 1e-9);
        let half = GridFunction::indicator(d, 0..4);
        let l2 = orlicz_norm(&half, &(0..8), &YoungFunction::Sampled { knots: vec![(1.0, 1.0), (2.0, 4.0)] });
        assert!(l2.unwrap() > 0.0);
        assert_relative_eq!(
            orlicz_norm(&half, &(0..8), &YoungFunction::power(2.0)).unwrap(),
            0.5f64.sqrt(),
            max_relative = 1e-12
        );
        assert_eq!(orlicz_norm(&GridFunction::zeros(d), &(0..8), &YoungFunction::LogL { delta: 1.0 }).unwrap(), 0.0);
    }

    #[test]
    fn complementary_examples() {
        let quad = YoungFunction::Power { r: 2.0, coef: 0.5 };
        let c = quad.complementary();
        for t in [0.1, 1.0, 3.0] {
            assert_relative_eq!(c.eval(t), t * t / 2.0, max_relative = 1e-9);
        }
        let cubic = YoungFunction::Power { r: 3.0, coef: 1.0 / 3.0 };
        assert_relative_eq!(cubic.complementary().eval(1.0), 1.0 / 1.5, max_relative = 1e-9);
        for phi in [cubic, YoungFunction::LogL { delta: 1.0 }, YoungFunction::LogLogL { delta: 1.0 }] {
            let bar = phi.complementary();
            for t in [0.1, 1.0, 10.0] {
                let prod = phi.inverse(t) * bar.inverse(t);
                assert!(prod >= t * (1.0 - 1e-7) && prod <= 2.0 * t * (1.0 + 1e-7), "{phi:?} {t} {prod}");
            }
        }
    }

    #[test]
    fn young_families_are_valid() {
        for phi in [
            YoungFunction::power(1.0),
            YoungFunction::power(2.5),
            YoungFunction::LogL { delta: 1.0 },
            YoungFunction::LogL { delta: 2.0 },
            YoungFunction::LogLogL { delta: 1.5 },
            YoungFunction::LogLLogLogL { delta: 1.0 },
        ] {
            assert!(phi.validate(), "{phi:?}");
        }
        assert!(!YoungFunction::Sampled { knots: vec![(1.0, 2.0), (2.0, 2.5)] }.validate());
    }

    #[test]
    fn csv_round_trip() {
        let f = GridFunction::new(d2(), vec![0.1, -2.0, 3.25, 1e-9]).unwrap();
        let g = GridFunction::from_csv(&f.to_csv()).unwrap();
        assert_eq!(f, g);
        assert!(GridFunction::from_csv("0.5\n").is_err());
    }
}
