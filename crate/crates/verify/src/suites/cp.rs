//! Inequalities for weights in the `C_p` classes, on compactly supported functions.

use std::collections::BTreeMap;

use sparselab_core::dyadic::{ComplementDistance, Domain};
use sparselab_core::maximal::{
    bmo_norm, indicator_maximal, iterated_maximal, maximal, multilinear_maximal, sawyer_functional, sharp_maximal,
    MaximalKind,
};
use sparselab_core::signal::{GridFunction, VectorFunction};
use sparselab_core::sparse::{commutator_sparse, extract_ln, fitted_constant, sparse_operator, LN_LAMBDA};
use sparselab_core::weights::{a1_constant, ainfty_constant, ap_constant, cp_functional, SamplingPlan, WeightSpec};

use super::{err, finish_labels, instance, strong, times, weak, Evaluation, Finding, Instance, Measurement, Suite};
use crate::config::ExperimentConfig;
use crate::corpus::components;

const EXACT: MaximalKind = MaximalKind::Exact;

/// Threshold above which a characteristic counts as blown up for the truncated weights.
pub const BLOWUP: f64 = 1e3;

pub(super) fn suites() -> Vec<Suite> {
    vec![
        Suite {
            name: "cp-strong",
            description: "For w ∈ C_{max(1,p)+ε}: ‖A_S f‖_{L^p(w)} ≤ C‖Mf‖_{L^p(w)}, ‖T_{b,S} f‖ ≤ C‖b‖_BMO‖Mf‖, ‖T*_{b,S} f‖, ‖[b,T]f‖_{L^p(w)} ≤ C‖b‖_BMO‖M²f‖_{L^p(w)}",
            stable: false,
            corpus: |cfg, d| cp_corpus(cfg, d, "cp-strong", true),
            evaluate: strong_eval,
            finish: Some(strong_finish),
        },
        Suite {
            name: "cp-weak",
            description: "For w ∈ C_{max(1,p)+ε}: the L^{p,∞}(w) forms of the sparse and commutator bounds, and ‖Tf‖, ‖T̄_q F‖ ≤ C‖M(|F|_q)‖ in L^{p,∞}(w)",
            stable: false,
            corpus: |cfg, d| cp_corpus(cfg, d, "cp-weak", true),
            evaluate: weak_eval,
            finish: None,
        },
        Suite {
            name: "cp-key-lemma",
            description: "For w ∈ C_q, q > p > 1: sup_k ∫(M_{k,p,q} Mf)^p w ≤ C‖Mf‖^p_{L^{p,∞}(w)}, and Σ_j M(χ_{Q_j})^q ≤ C ∫_{Ω_k} d(y)^{q−1}/(d(y)^q + |x−y|^q) dy",
            stable: false,
            corpus: |cfg, d| cp_corpus(cfg, d, "cp-key-lemma", false),
            evaluate: key_lemma_eval,
            finish: None,
        },
        Suite {
            name: "yabuta",
            description: "For w ∈ C_{p+ε}, 1 < p < ∞: ‖Mf‖_{L^p(w)} ≤ C‖M^♯f‖_{L^p(w)} for compactly supported f",
            stable: false,
            corpus: |cfg, d| cp_corpus(cfg, d, "yabuta", false),
            evaluate: yabuta_eval,
            finish: None,
        },
        Suite {
            name: "d-condition",
            description: "For 0 < p < ∞ and w ∈ C_{max(1,p)+ε}: ‖Tf‖, ‖T̄_q F‖ ≤ C‖M(|F|_q)‖, ‖[b,T]f‖ ≤ C‖b‖_BMO‖M²f‖ and ‖𝓜(f⃗)‖ ≤ C‖Π_i Mf_i‖ in L^p(w)",
            stable: false,
            corpus: |cfg, d| cp_corpus(cfg, d, "d-condition", true),
            evaluate: d_condition_eval,
            finish: None,
        },
    ]
}

fn cp_corpus(cfg: &ExperimentConfig, depth: u32, suite: &str, operators: bool) -> Vec<Instance> {
    let bases = cfg.corpus.light_bases(cfg.seed);
    let mut out = Vec::new();
    let ks: Vec<_> = if operators { cfg.corpus.kernels.iter().map(|k| Some(*k)).collect() } else { vec![None] };
    for w in &cfg.corpus.cp_weights {
        for i in 0..bases.len() {
            for k in &ks {
                let mut inst = instance(cfg, suite, depth, components(&bases, i, cfg.params.components.max(2)));
                inst.weight = Some(w.clone());
                inst.kernel = *k;
                if operators {
                    if cfg.corpus.symbols.is_empty() {
                        continue;
                    }
                    inst.aux = vec![cfg.corpus.symbols[i % cfg.corpus.symbols.len()].clone()];
                }
                out.push(inst);
            }
        }
    }
    finish_labels(out)
}

/// Restriction to the middle half `[1/4, 3/4)`, so that supports stay away from the boundary.
pub fn window(f: &GridFunction) -> GridFunction {
    let n = f.len();
    f.restrict(&(n / 4..3 * n / 4))
}

fn window_vector(f: &VectorFunction) -> VectorFunction {
    f.map_components(window)
}

fn record(out: &mut Evaluation, w: &GridFunction, p: f64) -> Result<(), String> {
    out.facts.push(("a1".into(), a1_constant(w, MaximalKind::Shifted3).map_err(err)?));
    out.facts.push(("ainfty w".into(), ainfty_constant(w, MaximalKind::Shifted3).map_err(err)?));
    if p > 1.0 {
        out.facts.push(("ap".into(), ap_constant(w, p, MaximalKind::Shifted3).map_err(err)?));
    }
    Ok(())
}

type Norm = fn(&GridFunction, f64, Option<&GridFunction>) -> Result<f64, String>;

/// Sparse and commutator bounds in the norm `nm`.
fn sparse_checks(inst: &Instance, nm: Norm, out: &mut Evaluation) -> Result<(), String> {
    let p = inst.params.p;
    let w = inst.weight()?;
    let b = inst.aux(0)?;
    let bmo = bmo_norm(&b, MaximalKind::Shifted3);
    let f = window(&inst.first());
    let t = inst.operator()?;
    let family = extract_ln(&f.abs(), LN_LAMBDA, 0).map_err(err)?.with_roots();
    let mf = maximal(&f, EXACT);
    let m2 = maximal(&mf, EXACT);
    let (nm1, nm2) = (nm(&mf, p, Some(&w))?, nm(&m2, p, Some(&w))?);
    out.facts.push(("bmo".into(), bmo));
    let a = sparse_operator(&family, &f, 1.0).map_err(err)?;
    out.measurements.push(Measurement::scalar("A_S", nm(&a, p, Some(&w))?, nm1));
    let cs = commutator_sparse(&family, &b, &f).map_err(err)?;
    out.measurements.push(Measurement::scalar("T_{b,S}", nm(&cs.t, p, Some(&w))?, bmo * nm1));
    out.measurements.push(Measurement::scalar("T*_{b,S}", nm(&cs.t_star, p, Some(&w))?, bmo * nm2));
    out.measurements.push(Measurement::scalar("[b,T]", nm(&t.commutator(&b, &f), p, Some(&w))?, bmo * nm2));
    out.cubes.push(family.to_vec());
    Ok(())
}

fn strong_eval(inst: &Instance) -> Result<Evaluation, String> {
    let mut out = Evaluation::default();
    sparse_checks(inst, strong, &mut out)?;
    record(&mut out, &inst.weight()?, inst.params.p)?;
    Ok(out)
}

fn weak_eval(inst: &Instance) -> Result<Evaluation, String> {
    let p = inst.params.p;
    let q = inst.params.q;
    let w = inst.weight()?;
    let t = inst.operator()?;
    let mut out = Evaluation::default();
    sparse_checks(inst, weak, &mut out)?;
    let f = window(&inst.first());
    out.measurements.push(Measurement::scalar("T", weak(&t.apply(&f), p, Some(&w))?, weak(&maximal(&f, EXACT), p, Some(&w))?));
    let fv = window_vector(&inst.vector());
    out.measurements.push(Measurement::scalar(
        "T_q",
        weak(&t.vector_apply(&fv, q).map_err(err)?, p, Some(&w))?,
        weak(&maximal(&fv.lq_norm(q), EXACT), p, Some(&w))?,
    ));
    record(&mut out, &w, p)?;
    Ok(out)
}

/// `C_p` functional per weight and depth, and the blow-up of the classical characteristics.
fn strong_finish(cfg: &ExperimentConfig, runs: &[(Instance, Evaluation)]) -> Vec<Finding> {
    let mut seen: BTreeMap<(u32, String), (WeightSpec, f64, f64)> = BTreeMap::new();
    for (inst, e) in runs {
        if let Some(w) = &inst.weight {
            let key = (inst.depth, super::weight_label(w));
            seen.entry(key).or_insert((w.clone(), e.fact("a1").unwrap_or(0.0), e.fact("ap").unwrap_or(0.0)));
        }
    }
    let mut out = Vec::new();
    let plan = SamplingPlan::default();
    let top = seen.keys().map(|k| k.0).max();
    for ((depth, label), (spec, a1, ap)) in &seen {
        let Ok(w) = spec.generate(Domain::unit(*depth)) else {
            out.push(Finding::check(format!("{label} L{depth}: weight generated"), 0.0, false));
            continue;
        };
        for &delta in &cfg.params.cp_deltas {
            let v = cp_functional(&w, cfg.params.cp_q, delta, &plan).map(|c| c.value).unwrap_or(f64::INFINITY);
            out.push(Finding::check(format!("{label} L{depth}: C_p functional δ={delta}"), v, v.is_finite()));
        }
        if matches!(spec, WeightSpec::TruncatedPower { .. }) && Some(*depth) == top {
            let worst = a1.max(*ap);
            out.push(Finding::check(format!("{label} L{depth}: max([w]_A1, [w]_Ap) exceeds {BLOWUP}"), worst, worst > BLOWUP));
        }
    }
    out
}

/// Maximal dyadic cubes of lattice `shift` inside the open set.
fn maximal_cubes(d: &Domain, mask: &[bool], shift: u8) -> Vec<std::ops::Range<usize>> {
    let inside = |r: &std::ops::Range<usize>| !r.is_empty() && mask[r.clone()].iter().all(|&b| b);
    let mut out = Vec::new();
    for root in d.cubes_at(shift, 0) {
        let cells = d.cube_cells(&root);
        if inside(&cells) {
            out.push(cells);
        } else {
            out.extend(d.maximal_subcubes(&root, |_, r| inside(r)).iter().map(|c| d.cube_cells(c)));
        }
    }
    out
}

fn key_lemma_eval(inst: &Instance) -> Result<Evaluation, String> {
    let d = inst.domain();
    let (p, q) = (inst.params.p, inst.params.cp_q);
    let w = inst.weight()?;
    let g = maximal(&window(&inst.first()), EXACT);
    let mut out = Evaluation::default();
    record(&mut out, &w, p)?;
    let rhs = weak(&g, p, Some(&w))?.powf(p);
    let positive: Vec<f64> = g.values().iter().copied().filter(|v| *v > 0.0).collect();
    let (mut integral, mut whitney, mut covering): (f64, f64, f64) = (0.0, 0.0, 0.0);
    if !positive.is_empty() {
        let lo = positive.iter().copied().fold(f64::INFINITY, f64::min).log2().floor() as i32 - 1;
        let hi = positive.iter().copied().fold(0.0, f64::max).log2().ceil() as i32;
        let h = d.cell_measure();
        for k in lo..=hi {
            let level = 2f64.powi(k);
            let mask: Vec<bool> = g.values().iter().map(|&v| v > level).collect();
            if !mask.iter().any(|&b| b) || mask.iter().all(|&b| b) {
                continue;
            }
            let s = sawyer_functional(&g, k, p, q, &w).map_err(err)?;
            integral = integral.max(s.integral);
            whitney = whitney.max(s.whitney);
            let dist = ComplementDistance::new(&mask);
            let ys: Vec<(f64, f64)> =
                (0..d.cells()).filter(|&y| mask[y]).map(|y| (d.midpoint(y), dist.midpoint_distance(y) * h)).collect();
            let kernel: Vec<f64> = (0..d.cells())
                .map(|x| {
                    let xm = d.midpoint(x);
                    ys.iter().map(|&(y, dy)| dy.powf(q - 1.0) / (dy.powf(q) + (xm - y).abs().powf(q))).sum::<f64>() * h
                })
                .collect();
            for shift in 0..3u8 {
                let mut sum = vec![0.0; d.cells()];
                for cells in maximal_cubes(&d, &mask, shift) {
                    let m = indicator_maximal(&d, &cells);
                    sum.iter_mut().zip(m.values()).for_each(|(a, b)| *a += b.powf(q));
                }
                covering = covering.max(fitted_constant(&sum, &kernel));
            }
        }
    }
    out.measurements.push(Measurement::scalar("integral form", integral, rhs));
    out.measurements.push(Measurement::scalar("whitney form", whitney, rhs));
    out.measurements.push(Measurement { check: "covering".into(), lhs: covering, rhs: 1.0, ratio: covering, cells: None });
    Ok(out)
}

fn yabuta_eval(inst: &Instance) -> Result<Evaluation, String> {
    let w = inst.weight()?;
    let f = window(&inst.first());
    let mf = maximal(&f, EXACT);
    let sharp = sharp_maximal(&f, None, MaximalKind::Shifted3).map_err(err)?;
    let mut out = Evaluation::default();
    let mut ps = vec![inst.params.p];
    if !ps.contains(&1.5) {
        ps.push(1.5);
    }
    for p in ps {
        out.measurements.push(Measurement::scalar(format!("p={p}"), strong(&mf, p, Some(&w))?, strong(&sharp, p, Some(&w))?));
    }
    record(&mut out, &w, inst.params.p)?;
    Ok(out)
}

fn d_condition_eval(inst: &Instance) -> Result<Evaluation, String> {
    let q = inst.params.q;
    let w = inst.weight()?;
    let t = inst.operator()?;
    let b = inst.aux(0)?;
    let bmo = bmo_norm(&b, MaximalKind::Shifted3);
    let fv = window_vector(&inst.vector());
    let f0 = fv.components()[0].clone();
    let f1 = fv.components().get(1).cloned().unwrap_or_else(|| f0.clone());
    let mf = maximal(&f0, EXACT);
    let m2 = iterated_maximal(&f0, 2, EXACT).map_err(err)?;
    let tf = t.apply(&f0);
    let tq = t.vector_apply(&fv, q).map_err(err)?;
    let mq = maximal(&fv.lq_norm(q), EXACT);
    let comm = t.commutator(&b, &f0);
    let multi = multilinear_maximal(&[f0.clone(), f1.clone()], EXACT).map_err(err)?;
    let product = times(&mf, &maximal(&f1, EXACT));
    let mut out = Evaluation::default();
    for &p in &inst.params.lp_exponents {
        let n = |g: &GridFunction| strong(g, p, Some(&w));
        out.measurements.push(Measurement::scalar(format!("T p={p}"), n(&tf)?, n(&mf)?));
        out.measurements.push(Measurement::scalar(format!("T_q p={p}"), n(&tq)?, n(&mq)?));
        out.measurements.push(Measurement::scalar(format!("[b,T] p={p}"), n(&comm)?, bmo * n(&m2)?));
        out.measurements.push(Measurement::scalar(format!("multilinear p={p}"), n(&multi)?, n(&product)?));
    }
    record(&mut out, &w, inst.params.p)?;
    Ok(out)
}
