//! Discrete convolution-type Calderón–Zygmund operators with midpoint quadrature.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Domain;
use crate::signal::{lq_combine, GridFunction, VectorFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CzoError {
    #[error("not Dini: the modulus integral does not converge")]
    NotDini,
    #[error("exponent q must exceed 1, got {0}")]
    ExponentTooSmall(f64),
    #[error("truncation radius must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("point {y} lies in the double of the interval")]
    InsideDouble { y: f64 },
    #[error("kernel parameter out of range: {0}")]
    BadKernel(String),
    #[error("functions live on different domains")]
    DomainMismatch,
}

/// Modulus of continuity `ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modulus {
    /// `c t`.
    Lipschitz { c: f64 },
    /// `c t^δ`.
    Holder { c: f64, delta: f64 },
    /// `c / log(e/t)^power`; Dini iff `power > 1`.
    LogInverse { c: f64, power: f64 },
    /// Piecewise-linear through `(t, ω(t))` knots on `(0, 1]`, with `ω(0) = 0`.
    Sampled { knots: Vec<(f64, f64)> },
}

impl Modulus {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Lipschitz { c } => c * t,
            Self::Holder { c, delta } => c * t.powf(*delta),
            Self::LogInverse { c, power } => c / (std::f64::consts::E / t).ln().powf(*power),
            Self::Sampled { knots } => {
                let mut prev = (0.0, 0.0);
                for &(x, y) in knots {
                    if t <= x {
                        return prev.1 + (y - prev.1) * (t - prev.0) / (x - prev.0);
                    }
                    prev = (x, y);
                }
                prev.1
            }
        }
    }
}

impl Modulus {
    /// `ω(e^{−u})`, computed without underflow for large `u`.
    fn eval_log(&self, u: f64) -> f64 {
        match self {
            Self::Lipschitz { c } => c * (-u).exp(),
            Self::Holder { c, delta } => c * (-delta * u).exp(),
            Self::LogInverse { c, power } => c / (1.0 + u).powf(*power),
            Self::Sampled { .. } => self.eval((-u).exp()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiniNorms {
    pub dini: f64,
    pub log_dini: f64,
}

/// `∫_0^1 ω(t) dt/t` and `∫_0^1 ω(t) log(1/t) dt/t`, via `t = e^{−u}` and adaptive Simpson.
pub fn dini_norms(omega: &Modulus) -> Result<DiniNorms, CzoError> {
    let dini = half_line_integral(|u| omega.eval_log(u))?;
    let log_dini = half_line_integral(|u| u * omega.eval_log(u))?;
    Ok(DiniNorms { dini, log_dini })
}

fn half_line_integral<F: Fn(f64) -> f64>(g: F) -> Result<f64, CzoError> {
    // Pieces over doubling intervals; a power tail u^{-a} gives a piece ratio 2^{1-a},
    // which is summed as a geometric tail once it settles below 1.
    let mut total: f64 = 0.0;
    let mut a = 0.0;
    let mut width = 1.0;
    let mut prev_piece = f64::NAN;
    let mut prev_ratio = f64::NAN;
    while a < 1e12 {
        let piece = adaptive_simpson(&g, a, a + width, 1e-12 * (1.0 + total.abs()), 40);
        total += piece;
        a += width;
        width *= 2.0;
        if piece.abs() <= 1e-13 * total.abs() || (total == 0.0 && piece == 0.0 && a > 64.0) {
            return Ok(total);
        }
        let ratio = piece / prev_piece;
        if a > 64.0 && ratio < 0.99 && (ratio - prev_ratio).abs() < 1e-3 * ratio.max(1e-3) {
            return Ok(total + piece * ratio / (1.0 - ratio));
        }
        prev_piece = piece;
        prev_ratio = ratio;
    }
    Err(CzoError::NotDini)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (g(a), g(m), g(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(g, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (g(lm), g(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(g, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(g, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Convolution kernels `K(x, y) = k(x − y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `1/(x − y)`.
    Hilbert,
    /// `sign(u)/|u| · 1/(1 + |u|^δ)` with `u = x − y`.
    Holder { delta: f64 },
}

impl Kernel {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Hilbert => 1.0 / u,
            Self::Holder { delta } => u.signum() / (u.abs() * (1.0 + u.abs().powf(*delta))),
        }
    }

    pub fn size_constant(&self) -> f64 {
        1.0
    }

    /// A valid smoothness modulus for `|y − z| < |x − y|/2`.
    ///
    /// Hilbert: `|1/u − 1/v| ≤ 2t/|u|`. Damped family: `|k'(ξ)| ≤ (1+δ)/ξ²` and `|ξ| ≥ |u|/2`
    /// give `4(1+δ) t/|u| ≤ 4(1+δ) t^δ/|u|`.
    pub fn modulus(&self) -> Modulus {
        match self {
            Self::Hilbert => Modulus::Lipschitz { c: 2.0 },
            Self::Holder { delta } => Modulus::Holder { c: 4.0 * (1.0 + delta), delta: *delta },
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Hilbert => "hilbert".into(),
            Self::Holder { delta } => format!("holder-{delta}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzOperator {
    domain: Domain,
    kernel: Kernel,
    /// `h·k(d h)` at offset `d + N − 1`, zero on the diagonal.
    taps: Vec<f64>,
    l2_norm: f64,
    dini: DiniNorms,
}

impl CzOperator {
    pub fn new(domain: Domain, kernel: Kernel) -> Result<Self, CzoError> {
        if let Kernel::Holder { delta } = kernel {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(CzoError::BadKernel(format!("holder delta {delta}")));
            }
        }
        let n = domain.cells() as i64;
        let h = domain.cell_measure();
        let taps = (-(n - 1)..n).map(|d| if d == 0 { 0.0 } else { h * kernel.eval(d as f64 * h) }).collect();
        let dini = dini_norms(&kernel.modulus())?;
        let mut op = Self { domain, kernel, taps, l2_norm: 0.0, dini };
        op.l2_norm = op.estimate_l2_norm(20, 1e-8);
        Ok(op)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    pub fn dini(&self) -> DiniNorms {
        self.dini
    }

    /// `C_T = C_K + ‖ω‖_Dini + ‖T‖_{L²→L²}`.
    pub fn c_t(&self) -> f64 {
        self.kernel.size_constant() + self.dini.dini + self.l2_norm
    }

    #[inline]
    fn tap(&self, d: i64) -> f64 {
        self.taps[(d + self.domain.cells() as i64 - 1) as usize]
    }

    /// `Σ_{j ∈ src, j ≠ i} h k(x_i − x_j) v_j` for `i ∈ dst`.
    pub fn apply_partial(&self, v: &[f64], src: &Range<usize>, dst: &Range<usize>) -> Vec<f64> {
        let off = self.domain.cells() - 1;
        dst.clone()
            .map(|i| {
                let base = off + i;
                let mut acc = 0.0;
                for j in src.clone() {
                    acc += self.taps[base - j] * v[j];
                }
                acc
            })
            .collect()
    }

    fn apply_slice(&self, v: &[f64]) -> Vec<f64> {
        let all = 0..self.domain.cells();
        self.apply_partial(v, &all, &all)
    }

    fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let n = self.domain.cells();
        (0..n).map(|j| (0..n).map(|i| self.tap(i as i64 - j as i64) * v[i]).sum()).collect()
    }

    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        GridFunction::new(self.domain, self.apply_slice(f.values())).expect("finite")
    }

    /// `T_ε f`: only pairs with `|x_i − x_j| > ε`.
    pub fn truncated(&self, f: &GridFunction, eps: f64) -> Result<GridFunction, CzoError> {
        if !(eps > 0.0) {
            return Err(CzoError::BadEpsilon(eps));
        }
        let n = self.domain.cells();
        let h = self.domain.cell_measure();
        let v = f.values();
        let out = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| (i as f64 - j as f64).abs() * h > eps)
                    .map(|j| self.tap(i as i64 - j as i64) * v[j])
                    .sum()
            })
            .collect();
        Ok(GridFunction::new(self.domain, out).expect("finite"))
    }

    /// `T* f = max_ε |T_ε f|` over every breakpoint `ε`, i.e. every minimal gap `m ≥ 1` cells.
    pub fn maximal_truncation(&self, f: &GridFunction) -> GridFunction {
        let n = self.domain.cells();
        let v = f.values();
        let out = (0..n)
            .map(|i| {
                let mut acc: f64 = 0.0;
                let mut best: f64 = 0.0;
                for m in (1..n).rev() {
                    if i + m < n {
                        acc += self.tap(-(m as i64)) * v[i + m];
                    }
                    if i >= m {
                        acc += self.tap(m as i64) * v[i - m];
                    }
                    best = best.max(acc.abs());
                }
                best
            })
            .collect();
        GridFunction::new(self.domain, out).expect("finite")
    }

    /// `[b, T] f = b·Tf − T(bf)`.
    pub fn commutator(&self, b: &GridFunction, f: &GridFunction) -> GridFunction {
        let tf = self.apply(f);
        let tbf = self.apply(&b.zip_map(f, |x, y| x * y));
        b.zip_map(&tf, |x, y| x * y).zip_map(&tbf, |x, y| x - y)
    }

    pub fn vector_apply(&self, f: &VectorFunction, q: f64) -> Result<GridFunction, CzoError> {
        check_q(q)?;
        let parts: Vec<GridFunction> = f.components().iter().map(|c| self.apply(c)).collect();
        Ok(lq_combine(parts.iter().map(|p| p.values()), q, self.domain))
    }

    pub fn vector_maximal_truncation(&self, f: &VectorFunction, q: f64) -> Result<GridFunction, CzoError> {
        check_q(q)?;
        let parts: Vec<GridFunction> = f.components().iter().map(|c| self.maximal_truncation(c)).collect();
        Ok(lq_combine(parts.iter().map(|p| p.values()), q, self.domain))
    }

    pub fn vector_commutator(&self, b: &GridFunction, f: &VectorFunction, q: f64) -> Result<GridFunction, CzoError> {
        check_q(q)?;
        let parts: Vec<GridFunction> = f.components().iter().map(|c| self.commutator(b, c)).collect();
        Ok(lq_combine(parts.iter().map(|p| p.values()), q, self.domain))
    }

    /// `D_B K(y) = |B|^{-2} ∫_B ∫_B |K(x,y) − K(z,y)|` as a midpoint double sum.
    pub fn kernel_mean_oscillation(&self, b: &Range<usize>, y: f64) -> Result<f64, CzoError> {
        let h = self.domain.cell_measure();
        let center = 0.5 * (b.start + b.end) as f64 * h;
        let radius = 0.5 * b.len() as f64 * h;
        if (y - center).abs() <= 2.0 * radius {
            return Err(CzoError::InsideDouble { y });
        }
        let ks: Vec<f64> = b.clone().map(|i| self.kernel.eval(self.domain.midpoint(i) - y)).collect();
        let mut s = 0.0;
        for a in &ks {
            for c in &ks {
                s += (a - c).abs();
            }
        }
        Ok(s / (ks.len() * ks.len()) as f64)
    }

    /// Power iteration on `TᵀT`; a lower estimate of the operator norm on `L²`.
    pub fn estimate_l2_norm(&self, iterations: usize, tol: f64) -> f64 {
        let n = self.domain.cells();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        let mut est = 0.0;
        for _ in 0..iterations {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            let tv = self.apply_slice(&v);
            let ttv = self.apply_transpose(&tv);
            let next = tv.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = ttv;
            if (next - est).abs() <= tol * next {
                est = next;
                break;
            }
            est = next;
        }
        est
    }
}

fn check_q(q: f64) -> Result<(), CzoError> {
    if q > 1.0 {
        Ok(())
    } else {
        Err(CzoError::ExponentTooSmall(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_term_sum() {
        let d = Domain::unit(2);
        let t = CzOperator::new(d, Kernel::Hilbert).unwrap();
        let tf = t.apply(&GridFunction::indicator(d, 0..1));
        assert_relative_eq!(tf.values()[2], 0.5, max_relative = 1e-14);
        assert_eq!(tf.values()[0], 0.0);
        assert_eq!(t.apply(&GridFunction::zeros(d)).values(), &[0.0; 4]);
    }

    #[test]
    fn dini_closed_forms() {
        let n = dini_norms(&Modulus::Lipschitz { c: 1.0 }).unwrap();
        assert_relative_eq!(n.dini, 1.0, max_relative = 1e-8);
        assert_relative_eq!(n.log_dini, 1.0, max_relative = 1e-8);
        let n = dini_norms(&Modulus::Holder { c: 1.0, delta: 0.5 }).unwrap();
        assert_relative_eq!(n.dini, 2.0, max_relative = 1e-8);
        assert_relative_eq!(n.log_dini, 4.0, max_relative = 1e-8);
        let n = dini_norms(&Modulus::Lipschitz { c: 0.0 }).unwrap();
        assert_eq!(n.dini, 0.0);
        assert_eq!(dini_norms(&Modulus::LogInverse { c: 1.0, power: 1.0 }), Err(CzoError::NotDini));
        let n = dini_norms(&Modulus::LogInverse { c: 1.0, power: 3.0 }).unwrap();
        assert_relative_eq!(n.dini, 0.5, max_relative = 1e-6);
        assert_relative_eq!(n.log_dini, 0.5, max_relative = 1e-6);
        assert_eq!(dini_norms(&Modulus::LogInverse { c: 1.0, power: 2.0 }), Err(CzoError::NotDini));
    }

    #[test]
    fn kernel_mean_oscillation_example() {
        let d = Domain::unit(5);
        let t = CzOperator::new(d, Kernel::Hilbert).unwrap();
        let b = 0..8;
        let v = t.kernel_mean_oscillation(&b, 1.0).unwrap();
        let (x0, r) = (0.125, 0.125);
        assert!(v > 0.0 && v <= 2.0 * r / ((x0 - 1.0f64) * (x0 - 1.0)));
        assert!(t.kernel_mean_oscillation(&b, 0.3).is_err());
    }

    #[test]
    fn maximal_truncation_matches_breakpoints() {
        let d = Domain::unit(4);
        let t = CzOperator::new(d, Kernel::Hilbert).unwrap();
        let f = GridFunction::new(d, (0..16).map(|i| ((i * 37) % 11) as f64 - 5.0).collect()).unwrap();
        let star = t.maximal_truncation(&f);
        let h = d.cell_measure();
        for k in 1..=32 {
            let te = t.truncated(&f, k as f64 * h / 2.0).unwrap();
            for (a, b) in te.values().iter().zip(star.values()) {
                assert!(a.abs() <= b + 1e-12);
            }
        }
    }
}
