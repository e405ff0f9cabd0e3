//! Pointwise and norm inequalities for truncations, sharp functions and vector maximal operators.

use sparselab_core::czo::CzOperator;
use sparselab_core::maximal::{bmo_norm, iterated_maximal, maximal, maximal_delta, sharp_maximal, vector_maximal, MaximalKind};
use sparselab_core::signal::{GridFunction, VectorFunction};

use super::{combine, err, finish_labels, instance, strong, times, weak, Evaluation, Instance, Measurement, Suite};
use crate::config::ExperimentConfig;
use crate::corpus::components;

const EXACT: MaximalKind = MaximalKind::Exact;

pub(super) fn suites() -> Vec<Suite> {
    vec![
        Suite {
            name: "cotlar",
            description: "T*f ≤ C(M_δ(Tf) + (‖T‖ + ‖ω‖_Dini) Mf) pointwise, and T̄*_q F ≤ C(M̄_{q,δ}(TF) + (‖T‖ + ‖ω‖_Dini) M̄_q F)",
            stable: true,
            corpus: |cfg, d| base_corpus(cfg, d, "cotlar", true, false),
            evaluate: cotlar_eval,
            finish: None,
        },
        Suite {
            name: "sharp-T",
            description: "M^♯_δ(Tf) ≤ C (1/(1−δ))^{1/δ}(‖T‖ + ‖ω‖_Dini) Mf pointwise, its vector form, and Σ_{y∉2B} |f(y)| D_B K(y) ≤ C ‖ω‖_Dini Mf(x) for x ∈ B",
            stable: true,
            corpus: |cfg, d| base_corpus(cfg, d, "sharp-T", true, false),
            evaluate: sharp_t_eval,
            finish: None,
        },
        Suite {
            name: "sharp-comm",
            description: "M^♯_ε([b,T]f) ≤ C ‖b‖_BMO (M_δ(Tf) + M²f) pointwise for 0 < ε < δ < 1, and its vector form",
            stable: true,
            corpus: |cfg, d| base_corpus(cfg, d, "sharp-comm", true, true),
            evaluate: sharp_comm_eval,
            finish: None,
        },
        Suite {
            name: "weak11-Tq",
            description: "‖T̄_q F‖_{L^{1,∞}}, ‖T̄*_q F‖_{L^{1,∞}} ≤ C(‖T‖ + ‖ω‖_Dini)‖|F|_q‖_{L¹} and ‖M̄_q F‖_{L^{1,∞}} ≤ C‖|F|_q‖_{L¹}",
            stable: true,
            corpus: |cfg, d| base_corpus(cfg, d, "weak11-Tq", true, false),
            evaluate: weak11_eval,
            finish: None,
        },
        Suite {
            name: "fs-duality",
            description: "∫ M̄_q F · g ≤ C ∫ |F|_q · Mg for g ≥ 0",
            stable: true,
            corpus: fs_corpus,
            evaluate: fs_eval,
            finish: None,
        },
        Suite {
            name: "weakpp-Mq",
            description: "‖M̄_q F‖_{L^{p,∞}} ≤ C ‖|F|_q‖_{L^{p,∞}} for 1 < p < ∞",
            stable: true,
            corpus: |cfg, d| base_corpus(cfg, d, "weakpp-Mq", false, false),
            evaluate: weakpp_eval,
            finish: None,
        },
    ]
}

fn base_corpus(cfg: &ExperimentConfig, depth: u32, suite: &str, kernels: bool, symbols: bool) -> Vec<Instance> {
    let bases = cfg.corpus.bases(cfg.seed);
    let mut out = Vec::new();
    for i in 0..bases.len() {
        let base = instance(cfg, suite, depth, components(&bases, i, cfg.params.components));
        let ks: Vec<_> = if kernels { cfg.corpus.kernels.iter().map(|k| Some(*k)).collect() } else { vec![None] };
        for k in ks {
            let mut inst = base.clone();
            inst.kernel = k;
            if symbols {
                if cfg.corpus.symbols.is_empty() {
                    continue;
                }
                inst.aux = vec![cfg.corpus.symbols[i % cfg.corpus.symbols.len()].clone()];
            }
            out.push(inst);
        }
    }
    finish_labels(out)
}

fn fs_corpus(cfg: &ExperimentConfig, depth: u32) -> Vec<Instance> {
    let bases = cfg.corpus.bases(cfg.seed);
    let mut v = base_corpus(cfg, depth, "fs-duality", false, false);
    for (i, inst) in v.iter_mut().enumerate() {
        inst.aux = vec![bases[(i + bases.len() / 2) % bases.len()].clone()];
    }
    finish_labels(v)
}

fn size(t: &CzOperator) -> f64 {
    t.l2_norm() + t.dini().dini
}

fn apply_each(t: &CzOperator, f: &VectorFunction) -> VectorFunction {
    f.map_components(|c| t.apply(c))
}

/// `(Σ_j M_δ(g_j)^q)^{1/q}` computed as `M̄_{q/δ}(|g|^δ)^{1/δ}`.
fn vector_maximal_delta(g: &VectorFunction, q: f64, delta: f64) -> Result<GridFunction, String> {
    let powered = g.map_components(|c| c.map(|v| v.abs().powf(delta)));
    Ok(vector_maximal(&powered, q / delta, EXACT).map_err(err)?.map(|v| v.powf(1.0 / delta)))
}

fn cotlar_eval(inst: &Instance) -> Result<Evaluation, String> {
    let t = inst.operator()?;
    let (q, delta) = (inst.params.q, inst.params.delta);
    let c = size(&t);
    let f0 = inst.first();
    let f = inst.vector();
    let mut out = Evaluation::default();
    let lhs = t.maximal_truncation(&f0);
    let md = maximal_delta(&t.apply(&f0), delta, EXACT).map_err(err)?;
    out.measurements.push(Measurement::pointwise("scalar", &lhs, &combine(1.0, &md, c, &maximal(&f0, EXACT))));
    let lhs = t.vector_maximal_truncation(&f, q).map_err(err)?;
    let md = vector_maximal_delta(&apply_each(&t, &f), q, delta)?;
    let mq = vector_maximal(&f, q, EXACT).map_err(err)?;
    out.measurements.push(Measurement::pointwise("vector", &lhs, &combine(1.0, &md, c, &mq)));
    Ok(out)
}

/// Centres at `(2k+1)/16` and radii of `1, 2, 4, 8` cells, for balls well inside the domain.
fn kernel_oscillation_ratio(t: &CzOperator, f: &GridFunction) -> Result<f64, String> {
    let d = *t.domain();
    let n = d.cells();
    let h = d.cell_measure();
    let mf = maximal(f, EXACT);
    let fv = f.values();
    let dini = t.dini().dini;
    let mut best: f64 = 0.0;
    for k in 0..8 {
        let x0 = n * (2 * k + 1) / 16;
        for r in [1usize, 2, 4, 8] {
            if r > x0 || x0 + r > n || 4 * r > n {
                continue;
            }
            let ball = x0 - r..x0 + r;
            let centre = x0 as f64 * h;
            let radius = r as f64 * h;
            let mut lhs = 0.0;
            for (y, v) in fv.iter().enumerate() {
                let ym = d.midpoint(y);
                if *v != 0.0 && (ym - centre).abs() > 2.0 * radius {
                    lhs += v.abs() * t.kernel_mean_oscillation(&ball, ym).map_err(err)? * h;
                }
            }
            let rhs = ball.clone().map(|x| mf.values()[x]).fold(f64::INFINITY, f64::min) * dini;
            best = best.max(crate::fit::ratio(lhs, rhs));
        }
    }
    Ok(best)
}

fn sharp_t_eval(inst: &Instance) -> Result<Evaluation, String> {
    let t = inst.operator()?;
    let (q, delta) = (inst.params.q, inst.params.delta);
    let k = 4.0 * (1.0 / (1.0 - delta)).powf(1.0 / delta) * size(&t);
    let f0 = inst.first();
    let f = inst.vector();
    let mut out = Evaluation::default();
    let lhs = sharp_maximal(&t.apply(&f0), Some(delta), MaximalKind::Shifted3).map_err(err)?;
    out.measurements.push(Measurement::pointwise("scalar", &lhs, &maximal(&f0, EXACT).scale(k)));
    let lhs = sharp_maximal(&t.vector_apply(&f, q).map_err(err)?, Some(delta), MaximalKind::Shifted3).map_err(err)?;
    out.measurements.push(Measurement::pointwise("vector", &lhs, &maximal(&f.lq_norm(q), EXACT).scale(k)));
    let r = kernel_oscillation_ratio(&t, &f0)?;
    out.measurements.push(Measurement { check: "kernel oscillation".into(), lhs: r, rhs: 1.0, ratio: r, cells: None });
    Ok(out)
}

fn sharp_comm_eval(inst: &Instance) -> Result<Evaluation, String> {
    let t = inst.operator()?;
    let (q, delta, eps) = (inst.params.q, inst.params.delta, inst.params.epsilon);
    let b = inst.aux(0)?;
    let bmo = bmo_norm(&b, MaximalKind::Shifted3);
    let f0 = inst.first();
    let f = inst.vector();
    let mut out = Evaluation::default();
    out.facts.push(("bmo".into(), bmo));
    let lhs = sharp_maximal(&t.commutator(&b, &f0), Some(eps), MaximalKind::Shifted3).map_err(err)?;
    let md = maximal_delta(&t.apply(&f0), delta, EXACT).map_err(err)?;
    let m2 = iterated_maximal(&f0, 2, EXACT).map_err(err)?;
    out.measurements.push(Measurement::pointwise("scalar", &lhs, &combine(bmo, &md, bmo, &m2)));
    let lhs = sharp_maximal(&t.vector_commutator(&b, &f, q).map_err(err)?, Some(eps), MaximalKind::Shifted3).map_err(err)?;
    let md = maximal_delta(&t.vector_apply(&f, q).map_err(err)?, delta, EXACT).map_err(err)?;
    let m2 = iterated_maximal(&f.lq_norm(q), 2, EXACT).map_err(err)?;
    out.measurements.push(Measurement::pointwise("vector", &lhs, &combine(bmo, &md, bmo, &m2)));
    Ok(out)
}

fn weak11_eval(inst: &Instance) -> Result<Evaluation, String> {
    let t = inst.operator()?;
    let q = inst.params.q;
    let f = inst.vector();
    let l1 = f.lq_norm(q).integral();
    let c = size(&t);
    let mut out = Evaluation::default();
    let tq = t.vector_apply(&f, q).map_err(err)?;
    out.measurements.push(Measurement::scalar("T_q", weak(&tq, 1.0, None)?, c * l1));
    let ts = t.vector_maximal_truncation(&f, q).map_err(err)?;
    out.measurements.push(Measurement::scalar("T*_q", weak(&ts, 1.0, None)?, c * l1));
    let mq = vector_maximal(&f, q, EXACT).map_err(err)?;
    out.measurements.push(Measurement::scalar("M_q", weak(&mq, 1.0, None)?, l1));
    Ok(out)
}

fn fs_eval(inst: &Instance) -> Result<Evaluation, String> {
    let q = inst.params.q;
    let f = inst.vector();
    let g = inst.aux(0)?.abs();
    let mq = vector_maximal(&f, q, EXACT).map_err(err)?;
    let mut out = Evaluation::default();
    out.measurements.push(Measurement::scalar(
        "duality",
        times(&mq, &g).integral(),
        times(&f.lq_norm(q), &maximal(&g, EXACT)).integral(),
    ));
    Ok(out)
}

fn weakpp_eval(inst: &Instance) -> Result<Evaluation, String> {
    let q = inst.params.q;
    let f = inst.vector();
    let mq = vector_maximal(&f, q, EXACT).map_err(err)?;
    let nf = f.lq_norm(q);
    let mut out = Evaluation::default();
    let mut ps: Vec<f64> = inst.params.lp_exponents.iter().copied().filter(|p| *p > 1.0).collect();
    if !ps.contains(&inst.params.p) {
        ps.push(inst.params.p);
    }
    for p in ps {
        out.measurements.push(Measurement::scalar(format!("weak p={p}"), weak(&mq, p, None)?, weak(&nf, p, None)?));
        out.measurements.push(Measurement::scalar(format!("strong p={p}"), strong(&mq, p, None)?, strong(&nf, p, None)?));
    }
    Ok(out)
}
