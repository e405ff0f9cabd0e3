//! Growth of `‖M‖_{L^p(w)}` against `[w]_{A_p}` along power weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sparselab_core::dyadic::Domain;
use sparselab_core::maximal::{maximal, MaximalKind};
use sparselab_core::signal::{lp_norms, GridFunction, PrefixSums};
use sparselab_core::weights::{ap_constant, WeightError, WeightSpec};

use crate::config::BuckleyConfig;
use crate::fit::least_squares;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuckleyPoint {
    pub a: f64,
    pub ap: f64,
    /// Largest `‖Mf‖_{L^p(w)}/‖f‖_{L^p(w)}` over the probes, a lower bound for the norm.
    pub norm: f64,
    /// Which probe attained it.
    pub probe: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuckleySeries {
    pub p: f64,
    pub depth: u32,
    pub points: Vec<BuckleyPoint>,
    /// Ratio for `w ≡ 1`, at least 1.
    pub unweighted: f64,
    /// Slope of `log norm` against `log [w]_{A_p}`.
    pub slope: Option<f64>,
    pub expected: f64,
}

fn ratio(f: &GridFunction, w: &GridFunction, p: f64) -> Result<f64, WeightError> {
    let mf = maximal(f, MaximalKind::Exact);
    let num = lp_norms(&mf, p, Some(w))?.strong;
    let den = lp_norms(f, p, Some(w))?.strong;
    Ok(num / den)
}

/// For each cell, the interval attaining `Mf` there (exact maximal function).
fn argmax_intervals(f: &GridFunction) -> Vec<(usize, usize)> {
    let n = f.values().len();
    let pre = PrefixSums::new(f.values());
    let mut best = vec![(f64::NEG_INFINITY, (0, 0)); n];
    let mut vals = vec![(0.0, 0); n + 1];
    for a in 0..n {
        for b in a + 1..=n {
            vals[b] = (pre.mean(&(a..b)), b);
        }
        let mut run = (f64::NEG_INFINITY, 0);
        for x in (a..n).rev() {
            if vals[x + 1].0 > run.0 {
                run = vals[x + 1];
            }
            if run.0 > best[x].0 {
                best[x] = (run.0, (a, run.1));
            }
        }
    }
    best.into_iter().map(|(_, i)| i).collect()
}

/// Nonlinear power iteration on the linearisation of `M` at the current iterate.
/// Every iterate is a valid probe, so the best ratio seen is still a lower bound.
fn refine(start: &GridFunction, w: &GridFunction, p: f64, steps: u32) -> Result<f64, WeightError> {
    let d = *start.domain();
    let n = d.cells();
    let pp = p / (p - 1.0);
    let wv = w.values();
    let mut f = start.abs();
    let mut best = ratio(&f, w, p)?;
    for _ in 0..steps {
        let intervals = argmax_intervals(&f);
        let pre = PrefixSums::new(f.values());
        let mut diff = vec![0.0; n + 1];
        for (x, &(a, b)) in intervals.iter().enumerate() {
            let af = pre.mean(&(a..b));
            let g = wv[x] * af.powf(p - 1.0) / (b - a) as f64;
            diff[a] += g;
            diff[b] -= g;
        }
        let mut acc = 0.0;
        let next: Vec<f64> = (0..n)
            .map(|y| {
                acc += diff[y];
                (acc.max(0.0) / wv[y]).powf(pp - 1.0)
            })
            .collect();
        let scale = next.iter().cloned().fold(0.0, f64::max);
        if !(scale > 0.0 && scale.is_finite()) {
            break;
        }
        f = GridFunction::new(d, next.into_iter().map(|v| v / scale).collect())?;
        best = best.max(ratio(&f, w, p)?);
    }
    Ok(best)
}

/// One series for exponent `p`: weights `|x − x0|^{a}` with `a = (p−1)·fraction`.
pub fn buckley_series(cfg: &BuckleyConfig, p: f64, run_seed: u64) -> Result<BuckleySeries, WeightError> {
    let d = Domain::unit(cfg.depth);
    let right = d.snap(cfg.x0, (cfg.x0 + 0.5).min(1.0));
    let left = d.snap((cfg.x0 - 0.5).max(0.0), cfg.x0);
    let mut points = Vec::new();
    for &frac in &cfg.fractions {
        let a = (p - 1.0) * frac;
        let w = WeightSpec::Power { a, x0: cfg.x0 }.generate(d)?;
        let sigma = w.map(|v| v.powf(-1.0 / (p - 1.0)));
        let ap = ap_constant(&w, p, MaximalKind::Exact)?;
        let mut probes: Vec<(String, GridFunction)> = Vec::new();
        if !right.is_empty() {
            probes.push(("dual-right".into(), sigma.zip_map(&GridFunction::indicator(d, right.clone()), |s, c| s * c)));
        }
        if !left.is_empty() {
            probes.push(("dual-left".into(), sigma.zip_map(&GridFunction::indicator(d, left.clone()), |s, c| s * c)));
        }
        // `|x − x0|^{−b}` on one side; `L^p(w)` integrability ends at `b = (1+a)/p`.
        let critical = (1.0 + a) / p;
        for j in 1..=cfg.power_probes {
            let b = critical * j as f64 / cfg.power_probes as f64;
            let g = GridFunction::from_fn(d, |x| if x >= cfg.x0 && x < cfg.x0 + 0.5 { (x - cfg.x0).powf(-b) } else { 0.0 })?;
            probes.push((format!("power-{b:.3}"), g));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed ^ 0x5eed);
        for k in 0..cfg.probes {
            let v = (0..d.cells()).map(|_| rng.gen_range(0.0..1.0)).collect();
            probes.push((format!("random#{k}"), GridFunction::new(d, v)?));
        }
        let mut best = BuckleyPoint { a, ap, norm: 0.0, probe: String::new() };
        for (label, f) in &probes {
            let r = ratio(f, &w, p)?;
            if r > best.norm {
                best.norm = r;
                best.probe = label.clone();
            }
        }
        if cfg.refine_steps > 0 {
            let start = probes.iter().find(|(l, _)| *l == best.probe).map(|(_, f)| f.clone()).expect("best probe");
            let refined = refine(&start, &w, p, cfg.refine_steps)?;
            if refined > best.norm {
                best.norm = refined;
                best.probe = format!("{}+refined", best.probe);
            }
        }
        points.push(best);
    }
    let one = GridFunction::constant(d, 1.0);
    let unweighted = ratio(&GridFunction::indicator(d, right.clone()), &one, p)?;
    let xs: Vec<f64> = points.iter().map(|q| q.ap.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|q| q.norm.ln()).collect();
    let slope = least_squares(&xs, &ys).map(|l| l.slope);
    Ok(BuckleySeries { p, depth: cfg.depth, points, unweighted, slope, expected: 1.0 / (p - 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unweighted_ratio_at_least_one() {
        let cfg = BuckleyConfig { depth: 6, fractions: vec![0.5, 0.9], probes: 1, ..BuckleyConfig::default() };
        let s = buckley_series(&cfg, 2.0, 0).unwrap();
        assert!(s.unweighted >= 1.0);
        assert!(s.points[1].ap > s.points[0].ap);
        assert!(s.points.iter().all(|p| p.norm >= 1.0));
    }
}
