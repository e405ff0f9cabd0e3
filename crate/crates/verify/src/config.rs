//! Experiment configuration and its validation.

use serde::{Deserialize, Serialize};
use sparselab_core::czo::Kernel;
use thiserror::Error;

use crate::corpus::{CorpusSpec, FunctionSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("line {line}: {key}: {message}")]
    Invalid { line: usize, key: String, message: String },
}

/// Exponents and small parameters shared by the suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub p: f64,
    pub q: f64,
    /// Inner exponent for `A^r_S` and the bilinear maximal `M_{r,s}`.
    pub r: f64,
    pub s: f64,
    /// Exponent of `M_δ` and `M^♯_δ`.
    pub delta: f64,
    /// Exponent of the outer sharp function in the commutator bound, `ε < δ`.
    pub epsilon: f64,
    /// The `C_q` class used by the `C_p` suites, `q > p`.
    pub cp_q: f64,
    /// Number of components `J` of vector-valued inputs.
    pub components: usize,
    /// Exponents of the strong bounds in `d-condition`.
    pub lp_exponents: Vec<f64>,
    /// Values of `δ` at which the `C_p` functional is sampled.
    pub cp_deltas: Vec<f64>,
    /// Exponents `r` of `M_r w` in the endpoint and two-weight bounds.
    pub maximal_r: Vec<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            p: 2.0,
            q: 2.0,
            r: 1.0,
            s: 1.2,
            delta: 0.5,
            epsilon: 0.25,
            cp_q: 2.5,
            components: 2,
            lp_exponents: vec![0.7, 1.0, 1.5, 2.0],
            cp_deltas: vec![0.1, 0.25, 0.5, 1.0],
            maximal_r: vec![1.5, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SuiteEntry {
    Name(String),
    Full(SuiteSelection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSelection {
    pub name: String,
    #[serde(default)]
    pub resolutions: Option<Vec<u32>>,
}

impl SuiteEntry {
    pub fn name(&self) -> &str {
        match self {
            Self::Name(n) => n,
            Self::Full(s) => &s.name,
        }
    }

    pub fn resolutions(&self) -> Option<&[u32]> {
        match self {
            Self::Name(_) => None,
            Self::Full(s) => s.resolutions.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuckleyConfig {
    pub depth: u32,
    pub exponents: Vec<f64>,
    /// Power exponents as fractions of `p − 1`.
    pub fractions: Vec<f64>,
    pub x0: f64,
    /// Random positive probes added to the extremal function.
    pub probes: u64,
    /// One-sided power probes `|x − x0|^{−b}` with `b` up to the integrability threshold.
    pub power_probes: u32,
    /// Power-iteration steps started from the best probe.
    pub refine_steps: u32,
}

impl Default for BuckleyConfig {
    fn default() -> Self {
        Self { depth: 12, exponents: vec![2.0, 3.0], fractions: vec![0.5, 0.7, 0.8, 0.9, 0.95], x0: 0.5, probes: 4, power_probes: 8, refine_steps: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub depth: u32,
    /// The point whose cell indicator is tested.
    pub cell: f64,
    /// Number of random positive functions.
    pub random: u64,
    /// Largest `t`; the grid is `2^{k/per_octave}` from 1.
    pub t_max: f64,
    pub per_octave: u32,
    /// Exponent of the square-function shape `e^{−c t^r}`.
    pub r: f64,
    pub symbol: FunctionSpec,
    pub kernel: Kernel,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            depth: 10,
            cell: 0.3,
            random: 8,
            t_max: 64.0,
            per_octave: 4,
            r: 2.0,
            symbol: FunctionSpec::Log { x0: 0.5 },
            kernel: Kernel::Hilbert,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<u32>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub corpus: CorpusSpec,
    #[serde(default)]
    pub suites: Vec<SuiteEntry>,
    #[serde(default)]
    pub buckley: Option<BuckleyConfig>,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
    /// Output directory; the command line may override it.
    #[serde(default)]
    pub output: Option<String>,
}

fn default_resolutions() -> Vec<u32> {
    vec![6, 8]
}

pub const MAX_DEPTH: u32 = 14;

impl ExperimentConfig {
    pub fn minimal(name: &str) -> Self {
        Self {
            name: name.into(),
            seed: 0,
            resolutions: default_resolutions(),
            params: Params::default(),
            corpus: CorpusSpec::default(),
            suites: Vec::new(),
            buckley: None,
            decay: None,
            output: None,
        }
    }

    /// Parses and validates; errors carry the line of the offending key.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let bad = |key: &str, message: String| ConfigError::Invalid { line: line_of(text, key), key: key.into(), message };
        let p = &self.params;
        if !(p.p > 1.0 && p.p.is_finite()) {
            return Err(bad("p", format!("p ≤ 1 (got {})", p.p)));
        }
        if !(p.q > 1.0 && p.q.is_finite()) {
            return Err(bad("q", format!("q ≤ 1 (got {})", p.q)));
        }
        let qc = p.q / (p.q - 1.0);
        if !(p.r >= 1.0 && p.r < (p.q + 1.0) / 2.0) {
            return Err(bad("r", format!("r must lie in [1, (q+1)/2) (got {})", p.r)));
        }
        if !(p.s >= 1.0 && p.s < (qc + 1.0) / 2.0) {
            return Err(bad("s", format!("s must lie in [1, (q'+1)/2) (got {})", p.s)));
        }
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return Err(bad("delta", format!("delta must lie in (0, 1) (got {})", p.delta)));
        }
        if !(p.epsilon > 0.0 && p.epsilon < p.delta) {
            return Err(bad("epsilon", format!("epsilon must lie in (0, delta) (got {})", p.epsilon)));
        }
        if !(p.cp_q > p.p && p.cp_q.is_finite()) {
            return Err(bad("cp_q", format!("cp_q must exceed p (got {})", p.cp_q)));
        }
        if p.components == 0 {
            return Err(bad("components", "components must be at least 1".into()));
        }
        if let Some(x) = p.lp_exponents.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(bad("lp_exponents", format!("exponents must be positive (got {x})")));
        }
        if let Some(x) = p.cp_deltas.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
            return Err(bad("cp_deltas", format!("delta must lie in (0, 1] (got {x})")));
        }
        if let Some(x) = p.maximal_r.iter().find(|x| !(**x > 1.0 && x.is_finite())) {
            return Err(bad("maximal_r", format!("r must exceed 1 (got {x})")));
        }
        let depth_ok = |l: &u32| (2..=MAX_DEPTH).contains(l);
        if let Some(l) = self.resolutions.iter().find(|l| !depth_ok(l)) {
            return Err(bad("resolutions", format!("depth must lie in 2..={MAX_DEPTH} (got {l})")));
        }
        for s in &self.suites {
            if crate::suites::find(s.name()).is_none() {
                return Err(bad(
                    s.name(),
                    format!("unknown suite `{}`; registered: {}", s.name(), crate::suites::names().join(", ")),
                ));
            }
            if let Some(l) = s.resolutions().and_then(|r| r.iter().find(|l| !depth_ok(l))) {
                return Err(bad(s.name(), format!("depth must lie in 2..={MAX_DEPTH} (got {l})")));
            }
        }
        for k in &self.corpus.kernels {
            if let Kernel::Holder { delta } = k {
                if !(*delta > 0.0 && *delta <= 1.0) {
                    return Err(bad("kernels", format!("kernel exponent must lie in (0, 1] (got {delta})")));
                }
            }
        }
        if let Some(b) = &self.buckley {
            if let Some(x) = b.exponents.iter().find(|x| !(**x > 1.0)) {
                return Err(bad("exponents", format!("p ≤ 1 (got {x})")));
            }
            if let Some(x) = b.fractions.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
                return Err(bad("fractions", format!("fractions must lie in (0, 1) (got {x})")));
            }
            if !depth_ok(&b.depth) {
                return Err(bad("depth", format!("depth must lie in 2..={MAX_DEPTH} (got {})", b.depth)));
            }
            if !(b.x0 >= 0.0 && b.x0 < 1.0) {
                return Err(bad("x0", format!("x0 must lie in [0, 1) (got {})", b.x0)));
            }
        }
        if let Some(d) = &self.decay {
            if !depth_ok(&d.depth) {
                return Err(bad("depth", format!("depth must lie in 2..={MAX_DEPTH} (got {})", d.depth)));
            }
            if !(d.t_max > 1.0) || d.per_octave == 0 {
                return Err(bad("t_max", "t grid needs t_max > 1 and per_octave ≥ 1".into()));
            }
            if !(d.r > 0.0) {
                return Err(bad("r", format!("r must be positive (got {})", d.r)));
            }
        }
        Ok(())
    }

    /// Resolutions of one suite entry.
    pub fn resolutions_for(&self, entry: &SuiteEntry) -> Vec<u32> {
        entry.resolutions().map(|r| r.to_vec()).unwrap_or_else(|| self.resolutions.clone())
    }
}

/// First line mentioning `"key"`, else 1.
fn line_of(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_parses() {
        let c = ExperimentConfig::parse(r#"{"name": "x"}"#).unwrap();
        assert!(c.suites.is_empty());
        assert_eq!(c.resolutions, vec![6, 8]);
    }

    #[test]
    fn unknown_key_is_anchored() {
        let err = ExperimentConfig::parse("{\n  \"name\": \"x\",\n  \"colour\": 1\n}").unwrap_err();
        match err {
            ConfigError::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("colour"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn small_q_is_rejected_on_its_line() {
        let text = "{\n  \"name\": \"x\",\n  \"params\": {\n    \"q\": 1.0\n  }\n}";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(err, ConfigError::Invalid { line: 4, key: "q".into(), message: "q ≤ 1 (got 1)".into() });
    }

    #[test]
    fn unknown_suite_lists_registry() {
        let err = ExperimentConfig::parse(r#"{"name": "x", "suites": ["nope"]}"#).unwrap_err();
        assert!(err.to_string().contains("tq-sparse"));
    }

    #[test]
    fn suite_entries_in_both_forms() {
        let c = ExperimentConfig::parse(r#"{"name": "x", "suites": ["cotlar", {"name": "tq-sparse", "resolutions": [5]}]}"#)
            .unwrap();
        assert_eq!(c.resolutions_for(&c.suites[0]), vec![6, 8]);
        assert_eq!(c.resolutions_for(&c.suites[1]), vec![5]);
    }
}
