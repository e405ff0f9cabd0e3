//! The suite registry: each suite turns the configuration into instances and checks them.

mod appendix;
mod cp;
mod sparse;
mod weighted;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sparselab_core::czo::{CzOperator, Kernel};
use sparselab_core::dyadic::{Domain, DyadicCube};
use sparselab_core::signal::{lp_norms, GridFunction, VectorFunction};
use sparselab_core::weights::WeightSpec;

use crate::config::{ExperimentConfig, Params};
use crate::corpus::{self, FunctionSpec};
use crate::fit::ratio;

/// One test case: everything needed to recompute its measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub suite: String,
    pub depth: u32,
    pub label: String,
    pub functions: Vec<FunctionSpec>,
    /// Symbol `b`, partner `G` or dual function `g`, depending on the suite.
    #[serde(default)]
    pub aux: Vec<FunctionSpec>,
    #[serde(default)]
    pub weight: Option<WeightSpec>,
    #[serde(default)]
    pub kernel: Option<Kernel>,
    pub params: Params,
}

impl Instance {
    pub fn domain(&self) -> Domain {
        Domain::unit(self.depth)
    }

    pub fn vector(&self) -> VectorFunction {
        corpus::vector(&self.functions, self.domain())
    }

    pub fn first(&self) -> GridFunction {
        self.functions[0].generate(self.domain())
    }

    pub fn aux(&self, i: usize) -> Result<GridFunction, String> {
        self.aux.get(i).map(|s| s.generate(self.domain())).ok_or_else(|| format!("instance needs auxiliary function #{i}"))
    }

    pub fn aux_vector(&self) -> Result<VectorFunction, String> {
        if self.aux.is_empty() {
            return Err("instance needs auxiliary functions".into());
        }
        Ok(corpus::vector(&self.aux, self.domain()))
    }

    pub fn weight(&self) -> Result<GridFunction, String> {
        let spec = self.weight.as_ref().ok_or("instance needs a weight")?;
        spec.generate(self.domain()).map_err(|e| e.to_string())
    }

    pub fn operator(&self) -> Result<Arc<CzOperator>, String> {
        operator(self.depth, self.kernel.ok_or("instance needs a kernel")?)
    }
}

/// Operators are costly to build; they are shared per depth and kernel.
pub fn operator(depth: u32, kernel: Kernel) -> Result<Arc<CzOperator>, String> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, String), Arc<CzOperator>>>> = OnceLock::new();
    let key = (depth, format!("{kernel:?}"));
    let cache = CACHE.get_or_init(Default::default);
    if let Some(op) = cache.lock().expect("operator cache").get(&key) {
        return Ok(op.clone());
    }
    let op = Arc::new(CzOperator::new(Domain::unit(depth), kernel).map_err(|e| e.to_string())?);
    cache.lock().expect("operator cache").insert(key, op.clone());
    Ok(op)
}

/// `lhs ≤ C·rhs` for one check of one instance; `ratio` is the least such `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Per-cell sides of pointwise checks.
    #[serde(skip)]
    pub cells: Option<(Vec<f64>, Vec<f64>)>,
}

impl Measurement {
    pub fn scalar(check: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { check: check.into(), lhs, rhs, ratio: ratio(lhs, rhs), cells: None }
    }

    /// Pointwise comparison on all cells; `lhs`/`rhs` record the cell attaining the ratio.
    pub fn pointwise(check: impl Into<String>, lhs: &GridFunction, rhs: &GridFunction) -> Self {
        Self::pointwise_on(check, lhs, rhs, &(0..lhs.len()))
    }

    pub fn pointwise_on(
        check: impl Into<String>,
        lhs: &GridFunction,
        rhs: &GridFunction,
        cells: &std::ops::Range<usize>,
    ) -> Self {
        let (l, r) = (lhs.values(), rhs.values());
        let mut best = (0.0, 0.0, 0.0);
        for i in cells.clone() {
            let c = ratio(l[i], r[i]);
            if c > best.2 {
                best = (l[i].abs(), r[i], c);
            }
        }
        Self {
            check: check.into(),
            lhs: best.0,
            rhs: best.1,
            ratio: best.2,
            cells: Some((l[cells.clone()].to_vec(), r[cells.clone()].to_vec())),
        }
    }
}

/// A structural requirement of an instance, such as the sparseness of an extracted family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
}

impl Condition {
    pub fn new(name: impl Into<String>, holds: bool) -> Self {
        Self { name: name.into(), holds }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub measurements: Vec<Measurement>,
    pub conditions: Vec<Condition>,
    /// Informative quantities such as weight characteristics.
    pub facts: Vec<(String, f64)>,
    /// Extracted families, one list per lattice.
    #[serde(default)]
    pub cubes: Vec<Vec<DyadicCube>>,
}

impl Evaluation {
    pub fn fact(&self, name: &str) -> Option<f64> {
        self.facts.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.holds) && self.measurements.iter().all(|m| m.ratio.is_finite())
    }
}

/// A conclusion drawn across all instances of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub name: String,
    pub value: f64,
    /// `None` for purely informative values.
    pub holds: Option<bool>,
}

impl Finding {
    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value, holds: None }
    }

    pub fn check(name: impl Into<String>, value: f64, holds: bool) -> Self {
        Self { name: name.into(), value, holds: Some(holds) }
    }
}

pub type CorpusFn = fn(&ExperimentConfig, u32) -> Vec<Instance>;
pub type EvaluateFn = fn(&Instance) -> Result<Evaluation, String>;
pub type FinishFn = fn(&ExperimentConfig, &[(Instance, Evaluation)]) -> Vec<Finding>;

pub struct Suite {
    pub name: &'static str,
    /// The inequality under test, in words.
    pub description: &'static str,
    /// Fitted constants must agree across resolutions within [`STABILITY_FACTOR`].
    pub stable: bool,
    pub corpus: CorpusFn,
    pub evaluate: EvaluateFn,
    pub finish: Option<FinishFn>,
}

pub const STABILITY_FACTOR: f64 = 3.0;

pub fn registry() -> &'static [Suite] {
    static SUITES: OnceLock<Vec<Suite>> = OnceLock::new();
    SUITES.get_or_init(|| {
        let mut all = Vec::new();
        all.extend(sparse::suites());
        all.extend(weighted::suites());
        all.extend(appendix::suites());
        all.extend(cp::suites());
        all
    })
}

pub fn find(name: &str) -> Option<&'static Suite> {
    registry().iter().find(|s| s.name == name)
}

pub fn names() -> Vec<&'static str> {
    registry().iter().map(|s| s.name).collect()
}

/// Recomputes an instance with its suite's evaluator.
pub fn evaluate(instance: &Instance) -> Result<Evaluation, String> {
    let suite = find(&instance.suite).ok_or_else(|| format!("unknown suite `{}`", instance.suite))?;
    (suite.evaluate)(instance)
}

pub(crate) fn strong(f: &GridFunction, p: f64, w: Option<&GridFunction>) -> Result<f64, String> {
    lp_norms(f, p, w).map(|n| n.strong).map_err(|e| e.to_string())
}

pub(crate) fn weak(f: &GridFunction, p: f64, w: Option<&GridFunction>) -> Result<f64, String> {
    lp_norms(f, p, w).map(|n| n.weak).map_err(|e| e.to_string())
}

pub(crate) fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// `f·g` cell by cell.
pub(crate) fn times(f: &GridFunction, g: &GridFunction) -> GridFunction {
    f.zip_map(g, |a, b| a * b)
}

/// `a·f + b·g` cell by cell.
pub(crate) fn combine(a: f64, f: &GridFunction, b: f64, g: &GridFunction) -> GridFunction {
    f.zip_map(g, |x, y| a * x + b * y)
}

/// Instance template used by the corpus builders.
pub(crate) fn instance(cfg: &ExperimentConfig, suite: &str, depth: u32, functions: Vec<FunctionSpec>) -> Instance {
    Instance {
        suite: suite.into(),
        depth,
        label: String::new(),
        functions,
        aux: Vec::new(),
        weight: None,
        kernel: None,
        params: cfg.params.clone(),
    }
}

/// `L{depth} f1+f2 [kernel] [b=…] [w=…]`.
pub(crate) fn label(inst: &Instance) -> String {
    let mut s = format!("L{} {}", inst.depth, inst.functions.iter().map(|f| f.label()).collect::<Vec<_>>().join("+"));
    if let Some(k) = inst.kernel {
        s.push_str(&format!(" {}", k.label()));
    }
    if !inst.aux.is_empty() {
        s.push_str(&format!(" aux={}", inst.aux.iter().map(|f| f.label()).collect::<Vec<_>>().join("+")));
    }
    if let Some(w) = &inst.weight {
        s.push_str(&format!(" w={}", weight_label(w)));
    }
    s
}

pub fn weight_label(w: &WeightSpec) -> String {
    match w {
        WeightSpec::Power { a, x0 } => format!("|x-{x0}|^{a}"),
        WeightSpec::TruncatedPower { a, x0 } => format!("(x-{x0})_+^{a}"),
        WeightSpec::BoundedRandom { lo, hi, seed } => format!("random[{lo},{hi}]#{seed}"),
        WeightSpec::A1Like { gamma, seed } => format!("(Mg)^{gamma}#{seed}"),
    }
}

pub(crate) fn finish_labels(mut v: Vec<Instance>) -> Vec<Instance> {
    for i in &mut v {
        i.label = label(i);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut n = names();
        let len = n.len();
        n.sort();
        n.dedup();
        assert_eq!(n.len(), len);
    }

    #[test]
    fn pointwise_records_argmax() {
        let d = Domain::unit(2);
        let l = GridFunction::new(d, vec![1.0, 3.0, 0.0, 1.0]).unwrap();
        let r = GridFunction::new(d, vec![1.0, 1.0, 0.0, 2.0]).unwrap();
        let m = Measurement::pointwise("x", &l, &r);
        assert_eq!((m.lhs, m.rhs, m.ratio), (3.0, 1.0, 3.0));
    }

    #[test]
    fn every_suite_has_instances_at_depth_six() {
        let cfg = ExperimentConfig::minimal("t");
        for s in registry() {
            let v = (s.corpus)(&cfg, 6);
            assert!(!v.is_empty(), "{}", s.name);
            assert!(v.iter().all(|i| i.suite == s.name && i.depth == 6 && !i.label.is_empty()));
        }
    }
}
