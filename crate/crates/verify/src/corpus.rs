//! Test functions and the default corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sparselab_core::czo::Kernel;
use sparselab_core::dyadic::Domain;
use sparselab_core::maximal::{bmo_norm, MaximalKind};
use sparselab_core::signal::{GridFunction, VectorFunction};
use sparselab_core::weights::WeightSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Independent uniform values in `[−1, 1]`.
    Signed,
    /// Independent uniform values in `[0, 1]`.
    Positive,
    /// A few random dyadic-length plateaus with heights in `[0.5, 2]`.
    Bumps,
}

/// A deterministic grid function, resolution independent where possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Zero,
    /// Indicator of the cell containing `x`.
    Cell { x: f64 },
    /// Indicator of `[a, b)` snapped to cells.
    Interval { a: f64, b: f64 },
    /// `|x − x0|^{−β}` on `|x − x0| < width`, distance clipped at half a cell.
    Spike { x0: f64, beta: f64, width: f64 },
    Noise { noise: NoiseKind, seed: u64 },
    /// `log|x − x0|` centred and scaled to unit dyadic BMO norm.
    Log { x0: f64 },
}

impl FunctionSpec {
    pub fn generate(&self, d: Domain) -> GridFunction {
        let h = d.cell_measure();
        let n = d.cells();
        let values: Vec<f64> = match *self {
            Self::Zero => vec![0.0; n],
            Self::Cell { x } => {
                let c = d.cell_of(x);
                (0..n).map(|i| if i == c { 1.0 } else { 0.0 }).collect()
            }
            Self::Interval { a, b } => {
                let r = d.snap(a, b);
                (0..n).map(|i| if r.contains(&i) { 1.0 } else { 0.0 }).collect()
            }
            Self::Spike { x0, beta, width } => (0..n)
                .map(|i| {
                    let t = (d.midpoint(i) - x0).abs();
                    if t < width {
                        t.max(h / 2.0).powf(-beta)
                    } else {
                        0.0
                    }
                })
                .collect(),
            Self::Noise { noise, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                match noise {
                    NoiseKind::Signed => (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
                    NoiseKind::Positive => (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect(),
                    NoiseKind::Bumps => {
                        let mut v = vec![0.0; n];
                        for _ in 0..4 {
                            let len = (n >> rng.gen_range(2..6u32)).max(1);
                            let start = rng.gen_range(0..=n - len);
                            let height = rng.gen_range(0.5..=2.0);
                            v[start..start + len].iter_mut().for_each(|x| *x += height);
                        }
                        v
                    }
                }
            }
            Self::Log { x0 } => {
                let raw: Vec<f64> = (0..n).map(|i| (d.midpoint(i) - x0).abs().max(h / 2.0).ln()).collect();
                let mean = raw.iter().sum::<f64>() / n as f64;
                let g = GridFunction::new(d, raw.iter().map(|v| v - mean).collect()).expect("finite");
                let s = bmo_norm(&g, MaximalKind::Dyadic(0));
                return if s > 0.0 { g.scale(1.0 / s) } else { g };
            }
        };
        GridFunction::new(d, values).expect("finite")
    }

    pub fn label(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Cell { x } => format!("cell@{x}"),
            Self::Interval { a, b } => format!("interval[{a},{b})"),
            Self::Spike { x0, beta, width } => format!("spike@{x0}^-{beta}/{width}"),
            Self::Noise { noise, seed } => format!("{}-noise#{seed}", noise_label(*noise)),
            Self::Log { x0 } => format!("log@{x0}"),
        }
    }

    pub fn is_noise(&self) -> bool {
        matches!(self, Self::Noise { .. })
    }
}

fn noise_label(k: NoiseKind) -> &'static str {
    match k {
        NoiseKind::Signed => "signed",
        NoiseKind::Positive => "positive",
        NoiseKind::Bumps => "bumps",
    }
}

pub fn vector(specs: &[FunctionSpec], d: Domain) -> VectorFunction {
    VectorFunction::new(specs.iter().map(|s| s.generate(d)).collect()).expect("at least one component")
}

/// What the suites draw their instances from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub shapes: Vec<FunctionSpec>,
    pub noise_seeds: u64,
    pub noise: Vec<NoiseKind>,
    pub kernels: Vec<Kernel>,
    /// Commutator symbols `b`.
    pub symbols: Vec<FunctionSpec>,
    /// Weights for the `A_p` suites; the partner `σ` is `w^{1−p'}`.
    pub weights: Vec<WeightSpec>,
    /// Weights for the `C_p` suites.
    pub cp_weights: Vec<WeightSpec>,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        use FunctionSpec::*;
        let mut weights = Vec::new();
        for a in [-0.9, -0.5, -0.25, 0.25, 0.5, 0.75, 0.9] {
            weights.push(WeightSpec::Power { a, x0: 0.5 });
        }
        weights.push(WeightSpec::Power { a: -0.4, x0: 0.3 });
        weights.push(WeightSpec::Power { a: 0.6, x0: 0.8 });
        for seed in 0..2 {
            weights.push(WeightSpec::BoundedRandom { lo: 0.5, hi: 2.0, seed });
        }
        for (gamma, seed) in [(0.3, 11), (0.6, 12), (0.9, 13)] {
            weights.push(WeightSpec::A1Like { gamma, seed });
        }
        Self {
            shapes: vec![
                Cell { x: 0.3 },
                Cell { x: 0.71 },
                Interval { a: 0.2, b: 0.45 },
                Interval { a: 0.5, b: 0.9 },
                Spike { x0: 0.5, beta: 0.4, width: 0.25 },
                Spike { x0: 0.3, beta: 0.3, width: 0.1 },
                Spike { x0: 0.77, beta: 0.45, width: 0.2 },
                Interval { a: 0.0, b: 1.0 },
            ],
            noise_seeds: 8,
            noise: vec![NoiseKind::Signed, NoiseKind::Positive, NoiseKind::Bumps],
            kernels: vec![Kernel::Hilbert, Kernel::Holder { delta: 0.5 }],
            symbols: vec![Log { x0: 0.5 }, Log { x0: 0.3 }, Noise { noise: NoiseKind::Signed, seed: 900 }],
            weights,
            cp_weights: vec![
                WeightSpec::Power { a: -0.5, x0: 0.5 },
                WeightSpec::Power { a: 0.5, x0: 0.5 },
                WeightSpec::Power { a: 0.9, x0: 0.5 },
                WeightSpec::TruncatedPower { a: 0.5, x0: 0.5 },
                WeightSpec::TruncatedPower { a: 1.2, x0: 0.5 },
            ],
        }
    }
}

impl CorpusSpec {
    /// Shapes followed by the noise functions; noise seeds are offset by the run seed.
    pub fn bases(&self, run_seed: u64) -> Vec<FunctionSpec> {
        let mut out = self.shapes.clone();
        for s in 0..self.noise_seeds {
            for &noise in &self.noise {
                out.push(FunctionSpec::Noise { noise, seed: run_seed.wrapping_mul(1_000_003).wrapping_add(s) });
            }
        }
        out
    }

    /// Bases with one noise seed per kind, for the more expensive weighted suites.
    pub fn light_bases(&self, run_seed: u64) -> Vec<FunctionSpec> {
        let mut out = self.shapes.clone();
        for &noise in &self.noise {
            out.push(FunctionSpec::Noise { noise, seed: run_seed.wrapping_mul(1_000_003) });
        }
        out
    }
}

/// `j` components starting at base `i`, cycling through `bases`.
pub fn components(bases: &[FunctionSpec], i: usize, j: usize) -> Vec<FunctionSpec> {
    (0..j).map(|k| bases[(i + k) % bases.len()].clone()).collect()
}
