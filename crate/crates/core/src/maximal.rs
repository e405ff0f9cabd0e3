//! Maximal operators over dyadic lattices or over all grid intervals.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::czo::CzOperator;
use crate::dyadic::{ComplementDistance, Domain, DyadicCube};
use crate::signal::{lq_combine, mean_abs_deviation, orlicz_norm_slice, GridFunction, PrefixSums, SignalError, VectorFunction, YoungFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaximalError {
    #[error("exponent q must exceed 1, got {0}")]
    ExponentTooSmall(f64),
    #[error("parameter {name} = {value} out of range")]
    Parameter { name: &'static str, value: f64 },
    #[error("functions live on different domains")]
    DomainMismatch,
    #[error("need at least one function")]
    Empty,
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Which cubes a maximal operator ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "shift", rename_all = "snake_case")]
pub enum MaximalKind {
    Dyadic(u8),
    Shifted3,
    Exact,
}

impl MaximalKind {
    pub fn label(&self) -> String {
        match self {
            Self::Dyadic(s) => format!("dyadic-shift-{s}"),
            Self::Shifted3 => "shifted3".into(),
            Self::Exact => "exact".into(),
        }
    }
}

/// Visits every admissible cube (as a cell range) of `kind`.
pub fn for_each_cube<F: FnMut(&Range<usize>)>(domain: &Domain, kind: MaximalKind, mut visit: F) {
    let shifts: &[u8] = match kind {
        MaximalKind::Dyadic(0) => &[0],
        MaximalKind::Dyadic(1) => &[1],
        MaximalKind::Dyadic(_) => &[2],
        MaximalKind::Shifted3 => &[0, 1, 2],
        MaximalKind::Exact => {
            let n = domain.cells();
            for a in 0..n {
                for b in a + 1..=n {
                    visit(&(a..b));
                }
            }
            return;
        }
    };
    for &s in shifts {
        for level in 0..=domain.depth() {
            for q in domain.cubes_at(s, level) {
                visit(&domain.cube_cells(&q));
            }
        }
    }
}

/// `out(x) = sup over admissible cubes Q ∋ x of value(Q)`.
pub fn sup_over_cubes<F: FnMut(&Range<usize>) -> f64>(domain: &Domain, kind: MaximalKind, mut value: F) -> Vec<f64> {
    let n = domain.cells();
    let mut out = vec![f64::NEG_INFINITY; n];
    match kind {
        MaximalKind::Exact => {
            let mut vals = vec![0.0; n + 1];
            for a in 0..n {
                for b in a + 1..=n {
                    vals[b] = value(&(a..b));
                }
                let mut best = f64::NEG_INFINITY;
                for x in (a..n).rev() {
                    best = best.max(vals[x + 1]);
                    if best > out[x] {
                        out[x] = best;
                    }
                }
            }
        }
        _ => for_each_cube(domain, kind, |r| {
            let v = value(r);
            for o in &mut out[r.clone()] {
                if v > *o {
                    *o = v;
                }
            }
        }),
    }
    out
}

pub fn maximal(f: &GridFunction, kind: MaximalKind) -> GridFunction {
    let p = PrefixSums::new(&f.abs().into_values());
    let v = sup_over_cubes(f.domain(), kind, |r| p.mean(r));
    GridFunction::new(*f.domain(), v).expect("finite averages")
}

/// `M_δ f = M(|f|^δ)^{1/δ}`.
pub fn maximal_delta(f: &GridFunction, delta: f64, kind: MaximalKind) -> Result<GridFunction, MaximalError> {
    if !(delta > 0.0) {
        return Err(MaximalError::Parameter { name: "delta", value: delta });
    }
    Ok(maximal(&f.map(|v| v.abs().powf(delta)), kind).map(|v| v.powf(1.0 / delta)))
}

/// `M^♯_δ f = sup_{Q∋x} inf_c ⟨||f|^δ − c|⟩_Q^{1/δ}`; `None` means the plain sharp function of `f`.
pub fn sharp_maximal(f: &GridFunction, delta: Option<f64>, kind: MaximalKind) -> Result<GridFunction, MaximalError> {
    let g = match delta {
        None => f.clone(),
        Some(d) if d > 0.0 && d <= 1.0 => f.map(|v| v.abs().powf(d)),
        Some(d) => return Err(MaximalError::Parameter { name: "delta", value: d }),
    };
    let vals = g.values();
    let out = sup_over_cubes(f.domain(), kind, |r| mean_abs_deviation(&vals[r.clone()]));
    let e = 1.0 / delta.unwrap_or(1.0);
    Ok(GridFunction::new(*f.domain(), out.into_iter().map(|v| v.powf(e)).collect())?)
}

pub fn orlicz_maximal(f: &GridFunction, phi: &YoungFunction, kind: MaximalKind) -> GridFunction {
    let vals = f.values();
    let out = sup_over_cubes(f.domain(), kind, |r| orlicz_norm_slice(&vals[r.clone()], phi));
    GridFunction::new(*f.domain(), out).expect("finite norms")
}

pub fn iterated_maximal(f: &GridFunction, k: u32, kind: MaximalKind) -> Result<GridFunction, MaximalError> {
    if k == 0 {
        return Err(MaximalError::Parameter { name: "k", value: 0.0 });
    }
    let mut g = maximal(f, kind);
    for _ in 1..k {
        g = maximal(&g, kind);
    }
    Ok(g)
}

/// `M̄_q F = (Σ_j (M f_j)^q)^{1/q}`.
pub fn vector_maximal(f: &VectorFunction, q: f64, kind: MaximalKind) -> Result<GridFunction, MaximalError> {
    if !(q > 1.0) {
        return Err(MaximalError::ExponentTooSmall(q));
    }
    let parts: Vec<GridFunction> = f.components().iter().map(|c| maximal(c, kind)).collect();
    Ok(lq_combine(parts.iter().map(|p| p.values()), q, *f.domain()))
}

/// `M_{r,s}(f,g) = sup_{Q∋x} ⟨|f|⟩_{r,Q} ⟨|g|⟩_{s,Q}`.
pub fn bilinear_maximal(
    f: &GridFunction,
    g: &GridFunction,
    r: f64,
    s: f64,
    kind: MaximalKind,
) -> Result<GridFunction, MaximalError> {
    if f.domain() != g.domain() {
        return Err(MaximalError::DomainMismatch);
    }
    if !(r >= 1.0) {
        return Err(MaximalError::Parameter { name: "r", value: r });
    }
    if !(s >= 1.0) {
        return Err(MaximalError::Parameter { name: "s", value: s });
    }
    let pf = PrefixSums::new(&f.map(|v| v.abs().powf(r)).into_values());
    let pg = PrefixSums::new(&g.map(|v| v.abs().powf(s)).into_values());
    let out = sup_over_cubes(f.domain(), kind, |q| pf.mean(q).powf(1.0 / r) * pg.mean(q).powf(1.0 / s));
    Ok(GridFunction::new(*f.domain(), out)?)
}

/// `𝓜(f⃗) = sup_{Q∋x} Π_i ⟨|f_i|⟩_Q`.
pub fn multilinear_maximal(fs: &[GridFunction], kind: MaximalKind) -> Result<GridFunction, MaximalError> {
    let first = fs.first().ok_or(MaximalError::Empty)?;
    if fs.iter().any(|f| f.domain() != first.domain()) {
        return Err(MaximalError::DomainMismatch);
    }
    let sums: Vec<PrefixSums> = fs.iter().map(|f| PrefixSums::new(&f.abs().into_values())).collect();
    let out = sup_over_cubes(first.domain(), kind, |q| sums.iter().map(|p| p.mean(q)).product());
    Ok(GridFunction::new(*first.domain(), out)?)
}

/// Exact maximal function of `χ_I` over all grid intervals, in closed form.
pub fn indicator_maximal(domain: &Domain, cells: &Range<usize>) -> GridFunction {
    let len = cells.len() as f64;
    let values = (0..domain.cells())
        .map(|x| {
            if cells.contains(&x) {
                1.0
            } else if x >= cells.end {
                len / (x + 1 - cells.start) as f64
            } else {
                len / (cells.end - x) as f64
            }
        })
        .collect();
    GridFunction::new(*domain, values).expect("finite")
}

/// BMO surrogate `sup_Q ⟨|b − b_Q|⟩_Q` over the cubes of `kind`.
pub fn bmo_norm(b: &GridFunction, kind: MaximalKind) -> f64 {
    let v = b.values();
    let mut best: f64 = 0.0;
    for_each_cube(b.domain(), kind, |r| {
        let s = &v[r.clone()];
        let m = s.iter().sum::<f64>() / s.len() as f64;
        best = best.max(s.iter().map(|x| (x - m).abs()).sum::<f64>() / s.len() as f64);
    });
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SawyerValue {
    /// `2^{kp} Σ_j ∫ M(χ_{Q_j})^q w` over the Whitney cubes of `{f > 2^k}`.
    pub whitney: f64,
    /// `2^{kp} ∫ w(x) ∫_{Ω_k} d(y)^{q−1} / (d(y)^q + |x−y|^q) dy dx`.
    pub integral: f64,
    pub whitney_cubes: usize,
}

/// Level-set functional `∫ (M_{k,p,q} f)^p w` in its Whitney and integral forms.
pub fn sawyer_functional(f: &GridFunction, k: i32, p: f64, q: f64, w: &GridFunction) -> Result<SawyerValue, MaximalError> {
    if !(p > 1.0) {
        return Err(MaximalError::Parameter { name: "p", value: p });
    }
    if !(q > p) {
        return Err(MaximalError::Parameter { name: "q", value: q });
    }
    if f.domain() != w.domain() {
        return Err(MaximalError::DomainMismatch);
    }
    let domain = *f.domain();
    let level = 2f64.powi(k);
    let mask: Vec<bool> = f.values().iter().map(|&v| v > level).collect();
    if !mask.iter().any(|&b| b) {
        return Ok(SawyerValue { whitney: 0.0, integral: 0.0, whitney_cubes: 0 });
    }
    let h = domain.cell_measure();
    let scale = 2f64.powf(k as f64 * p);
    let wv = w.values();
    let wh = domain.whitney_decomposition(&mask);
    let mut whitney = 0.0;
    for cube in wh.cubes.iter() {
        let m = indicator_maximal(&domain, &domain.cube_cells(cube));
        whitney += m.values().iter().zip(wv).map(|(a, b)| a.powf(q) * b).sum::<f64>() * h;
    }
    let dist = ComplementDistance::new(&mask);
    let ys: Vec<(f64, f64)> = (0..domain.cells())
        .filter(|&y| mask[y])
        .map(|y| (domain.midpoint(y), dist.midpoint_distance(y) * h))
        .collect();
    let mut integral = 0.0;
    for x in 0..domain.cells() {
        let xm = domain.midpoint(x);
        let inner: f64 =
            ys.iter().map(|&(y, d)| d.powf(q - 1.0) / (d.powf(q) + (xm - y).abs().powf(q))).sum::<f64>() * h;
        integral += inner * wv[x] * h;
    }
    Ok(SawyerValue { whitney: scale * whitney, integral: scale * integral, whitney_cubes: wh.cubes.len() })
}

/// Grand maximal truncation of `T̄_q`.
///
/// Global form (`q0 = None`): `sup_{Q∋x} max_{ξ∈Q} |T̄_q(F χ_{domain∖3Q})(ξ)|` over the three
/// lattices. Local form: cubes `Q ⊆ Q0` and `F χ_{3Q0∖3Q}`; the result vanishes off `Q0`.
pub fn grand_maximal(t: &CzOperator, f: &VectorFunction, q: f64, q0: Option<&DyadicCube>) -> Result<GridFunction, MaximalError> {
    if !(q > 1.0) {
        return Err(MaximalError::ExponentTooSmall(q));
    }
    let domain = *f.domain();
    let (outer, region) = match q0 {
        None => (0..domain.cells(), 0..domain.cells()),
        Some(c) => (domain.triple(c), domain.cube_cells(c)),
    };
    Ok(GridFunction::new(domain, grand_maximal_cells(t, f, q, &outer, &region))?)
}

/// Core of [`grand_maximal`]: support truncated to `outer`, cubes confined to `region`.
pub fn grand_maximal_cells(t: &CzOperator, f: &VectorFunction, q: f64, outer: &Range<usize>, region: &Range<usize>) -> Vec<f64> {
    let domain = *f.domain();
    let n = domain.cells();
    let comps: Vec<&[f64]> = f.components().iter().map(|c| c.values()).collect();
    let full: Vec<Vec<f64>> = comps.iter().map(|c| t.apply_partial(c, outer, region)).collect();
    let mut out = vec![0.0; n];
    for shift in 0..3u8 {
        for level in 0..=domain.depth() {
            for cube in domain.cubes_at(shift, level) {
                let cells = domain.cube_cells(&cube);
                if cells.start < region.start || cells.end > region.end || cells.is_empty() {
                    continue;
                }
                let tri = domain.triple_cells(&cells);
                let mut best: f64 = 0.0;
                let mut acc = vec![0.0f64; cells.len()];
                for (c, fullc) in comps.iter().zip(&full) {
                    let near = t.apply_partial(c, &tri, &cells);
                    for (i, x) in cells.clone().enumerate() {
                        let v = (fullc[x - region.start] - near[i]).abs();
                        acc[i] = if comps.len() == 1 { v } else { acc[i] + v.powf(q) };
                    }
                }
                for a in acc {
                    let v = if comps.len() == 1 { a } else { a.powf(1.0 / q) };
                    best = best.max(v);
                }
                for o in &mut out[cells] {
                    if best > *o {
                        *o = best;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dyadic_maximal_of_quarter_indicator() {
        let d = Domain::unit(2);
        let f = GridFunction::indicator(d, 0..1);
        let m = maximal(&f, MaximalKind::Dyadic(0));
        assert_eq!(m.values(), &[1.0, 0.5, 0.25, 0.25]);
    }

    #[test]
    fn constants_are_fixed_points() {
        let d = Domain::unit(4);
        let f = GridFunction::constant(d, 2.0);
        for kind in [MaximalKind::Dyadic(0), MaximalKind::Dyadic(2), MaximalKind::Shifted3, MaximalKind::Exact] {
            for v in maximal(&f, kind).values() {
                assert_relative_eq!(*v, 2.0, max_relative = 1e-14);
            }
            for v in sharp_maximal(&f, None, kind).unwrap().values() {
                assert!(v.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sharp_of_half_indicator() {
        let d = Domain::unit(2);
        let f = GridFunction::indicator(d, 0..2);
        let m = sharp_maximal(&f, None, MaximalKind::Dyadic(0)).unwrap();
        assert_eq!(m.values(), &[0.5; 4]);
    }

    #[test]
    fn indicator_maximal_matches_exact() {
        let d = Domain::unit(5);
        for r in [0..1, 3..9, 20..32, 0..32] {
            let a = indicator_maximal(&d, &r);
            let b = maximal(&GridFunction::indicator(d, r.clone()), MaximalKind::Exact);
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_relative_eq!(x, y, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn vector_maximal_rejects_small_q() {
        let d = Domain::unit(3);
        let f = VectorFunction::scalar(GridFunction::constant(d, 1.0));
        assert!(vector_maximal(&f, 1.0, MaximalKind::Exact).is_err());
    }

    #[test]
    fn sawyer_empty_level() {
        let d = Domain::unit(4);
        let f = GridFunction::constant(d, 0.5);
        let w = GridFunction::constant(d, 1.0);
        let s = sawyer_functional(&f, 0, 1.5, 2.0, &w).unwrap();
        assert_eq!(s.whitney, 0.0);
        assert_eq!(s.integral, 0.0);
    }
}
