//! Pointwise sparse domination suites.

use sparselab_core::dyadic::{CubeSet, Domain};
use sparselab_core::sparse::{
    carleson_constant, extract_bilinear, extract_commutator, extract_czo, extract_mq, verify_sparse, Eta, SparseFamily,
};

use super::{err, finish_labels, instance, Condition, Evaluation, Instance, Measurement, Suite};
use crate::config::ExperimentConfig;
use crate::corpus::components;

pub(super) fn suites() -> Vec<Suite> {
    vec![
        Suite {
            name: "mq-sparse",
            description: "M̄_q F(x) ≤ C Σ_lattices Σ_{Q∈S} ⟨|F|_q⟩_{q,Q}^q χ_Q(x) with 1/6-sparse families",
            stable: true,
            corpus: mq_corpus,
            evaluate: mq_eval,
            finish: None,
        },
        Suite {
            name: "tq-sparse",
            description: "|T̄_q F(x)| ≤ C·C_T Σ_{Q∈S} ⟨|F|_q⟩_{3Q} χ_Q(x) on the top cube with a 1/2-sparse family",
            stable: true,
            corpus: tq_corpus,
            evaluate: tq_eval,
            finish: None,
        },
        Suite {
            name: "comm-sparse",
            description: "|[b,T̄_q]F(x)| ≤ C·C_T Σ_{Q∈S} (|b(x) − b_{R_Q}|⟨|F|_q⟩_{3Q} + ⟨|b − b_{R_Q}||F|_q⟩_{3Q}) χ_Q(x)",
            stable: true,
            corpus: comm_corpus,
            evaluate: comm_eval,
            finish: None,
        },
        Suite {
            name: "bilinear-sparse",
            description: "Σ_j M_{r,s}(f_j, g_j)(x) ≤ C Σ_lattices Σ_{Q∈S} ⟨|F|_q⟩_{r,Q}⟨|G|_{q'}⟩_{s,Q} χ_Q(x), C of order q·q'",
            stable: true,
            corpus: bilinear_corpus,
            evaluate: bilinear_eval,
            finish: None,
        },
    ]
}

fn base_instances(cfg: &ExperimentConfig, suite: &str, depth: u32) -> Vec<Instance> {
    let bases = cfg.corpus.bases(cfg.seed);
    (0..bases.len()).map(|i| instance(cfg, suite, depth, components(&bases, i, cfg.params.components))).collect()
}

fn with_kernels(cfg: &ExperimentConfig, v: Vec<Instance>) -> Vec<Instance> {
    let mut out = Vec::new();
    for inst in v {
        for k in &cfg.corpus.kernels {
            out.push(super::Instance { kernel: Some(*k), ..inst.clone() });
        }
    }
    out
}

fn mq_corpus(cfg: &ExperimentConfig, depth: u32) -> Vec<Instance> {
    finish_labels(base_instances(cfg, "mq-sparse", depth))
}

fn tq_corpus(cfg: &ExperimentConfig, depth: u32) -> Vec<Instance> {
    finish_labels(with_kernels(cfg, base_instances(cfg, "tq-sparse", depth)))
}

fn comm_corpus(cfg: &ExperimentConfig, depth: u32) -> Vec<Instance> {
    let mut v = with_kernels(cfg, base_instances(cfg, "comm-sparse", depth));
    let symbols = &cfg.corpus.symbols;
    if symbols.is_empty() {
        return Vec::new();
    }
    for (i, inst) in v.iter_mut().enumerate() {
        inst.aux = vec![symbols[(i / cfg.corpus.kernels.len().max(1)) % symbols.len()].clone()];
    }
    finish_labels(v)
}

fn bilinear_corpus(cfg: &ExperimentConfig, depth: u32) -> Vec<Instance> {
    let bases = cfg.corpus.bases(cfg.seed);
    let mut v = base_instances(cfg, "bilinear-sparse", depth);
    for (i, inst) in v.iter_mut().enumerate() {
        inst.aux = components(&bases, i + bases.len() / 2, cfg.params.components);
    }
    finish_labels(v)
}

/// Carleson bound of a verified family and an independent re-verification.
fn family_conditions(d: &Domain, tag: &str, family: &SparseFamily, eta: Eta, out: &mut Evaluation) {
    let set: CubeSet = family.cube_set();
    let c = carleson_constant(d, &set);
    out.conditions.push(Condition::new(
        format!("{tag}: Carleson ≤ {}", eta.den() as f64 / eta.num() as f64),
        c.as_ref().is_ok_and(|c| c.at_most_inverse(eta)),
    ));
    out.conditions.push(Condition::new(format!("{tag}: {}/{}-sparse", eta.num(), eta.den()), verify_sparse(d, &set, eta).is_ok()));
    if let Ok(c) = c {
        out.facts.push((format!("{tag} carleson"), c.value()));
    }
    out.cubes.push(family.cubes().to_vec());
}

fn mq_eval(inst: &Instance) -> Result<Evaluation, String> {
    let d = inst.domain();
    let e = extract_mq(&inst.vector(), inst.params.q).map_err(err)?;
    let mut out = Evaluation::default();
    out.measurements.push(Measurement::pointwise("pointwise", &e.domination.lhs, &e.domination.rhs));
    out.measurements.push(Measurement::scalar("oscillation", e.oscillation_constant, 1.0));
    for (k, fam) in e.families.iter().enumerate() {
        family_conditions(&d, &format!("lattice {k}"), fam, Eta::SIXTH, &mut out);
    }
    Ok(out)
}

fn czo_common(inst: &Instance, e: sparselab_core::sparse::CzoExtraction) -> Result<Evaluation, String> {
    let d = inst.domain();
    let mut out = Evaluation::default();
    let top = d.cube_cells(&d.top());
    out.measurements.push(Measurement::pointwise_on("pointwise", &e.domination.lhs, &e.domination.rhs, &top));
    family_conditions(&d, "family", &e.family, Eta::HALF, &mut out);
    out.conditions.push(Condition::new("stopping levels finite", e.alphas.iter().all(|a| a.is_finite())));
    for (k, set) in e.lift().map_err(err)?.iter().enumerate() {
        if !set.is_empty() {
            let c = carleson_constant(&d, set).map_err(err)?;
            out.facts.push((format!("lifted lattice {k} carleson"), c.value()));
        }
    }
    Ok(out)
}

fn tq_eval(inst: &Instance) -> Result<Evaluation, String> {
    let t = inst.operator()?;
    let d = inst.domain();
    let e = extract_czo(&t, &inst.vector(), inst.params.q, &d.top()).map_err(err)?;
    czo_common(inst, e)
}

fn comm_eval(inst: &Instance) -> Result<Evaluation, String> {
    let t = inst.operator()?;
    let d = inst.domain();
    let b = inst.aux(0)?;
    let e = extract_commutator(&t, &b, &inst.vector(), inst.params.q, &d.top()).map_err(err)?;
    czo_common(inst, e)
}

fn bilinear_eval(inst: &Instance) -> Result<Evaluation, String> {
    let d = inst.domain();
    let p = &inst.params;
    let g = inst.aux_vector()?;
    let e = extract_bilinear(&inst.vector(), &g, p.q, p.r, p.s).map_err(err)?;
    let mut out = Evaluation::default();
    let m = Measurement::pointwise("pointwise", &e.domination.lhs, &e.domination.rhs);
    let qq = p.q * p.q / (p.q - 1.0);
    out.measurements.push(Measurement { check: "pointwise / qq'".into(), ratio: m.ratio / qq, cells: None, ..m.clone() });
    out.measurements.push(m);
    for (k, fam) in e.families.iter().enumerate() {
        family_conditions(&d, &format!("lattice {k}"), fam, Eta::SIXTH, &mut out);
    }
    Ok(out)
}
