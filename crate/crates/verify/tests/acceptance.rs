//! Acceptance criteria, one test each. Every test prints a single `criterion N PASS|FAIL` line.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparselab_core::dyadic::{CubeSet, Domain, DyadicCube};
use sparselab_core::signal::{ln_oscillation, local_oscillation, GridFunction};
use sparselab_core::sparse::{carleson_constant, verify_sparse, Eta, SparseFamily};
use sparselab_verify::buckley::buckley_series;
use sparselab_verify::config::{ExperimentConfig, SuiteEntry};
use sparselab_verify::decay::{run_decay, Shape};
use sparselab_verify::report::{run_suite, InequalityReport};
use sparselab_verify::run::{buckley_tolerance, run_config, RunOptions};

const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.json");

const BUCKLEY_BUDGET: Duration = Duration::from_secs(120);
const SPARSE_BUDGET: Duration = Duration::from_secs(600);
const APPENDIX_BUDGET: Duration = Duration::from_secs(300);
const CP_BUDGET: Duration = Duration::from_secs(600);
const MIN_SPARSE_INSTANCES: usize = 50;
const SPREAD_LIMIT: f64 = 3.0;
const BLOWUP: f64 = 1e3;
const TRIPLES: usize = 10_000;
const RANDOM_FAMILIES: usize = 200;

fn default_config() -> ExperimentConfig {
    ExperimentConfig::parse(DEFAULT_CONFIG).expect("default config parses")
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn report(n: u32, ok: bool, detail: &str) {
    println!("criterion {n} {}: {detail}", verdict(ok));
}

fn run_named(cfg: &ExperimentConfig, names: &[&str]) -> (Vec<InequalityReport>, Duration) {
    let start = Instant::now();
    let reports = cfg
        .suites
        .iter()
        .filter(|e| names.contains(&e.name()))
        .map(|e| run_suite(cfg, e).expect("suite runs").report)
        .collect::<Vec<_>>();
    assert_eq!(reports.len(), names.len(), "default config lists every suite");
    (reports, start.elapsed())
}

fn max_spread(r: &InequalityReport) -> f64 {
    r.checks.iter().filter(|c| c.per_depth.len() > 1).map(|c| c.spread).fold(1.0, f64::max)
}

#[test]
fn criterion_1_buckley_exponent() {
    let cfg = default_config();
    let b = cfg.buckley.clone().expect("default config has a Buckley block");
    let start = Instant::now();
    let mut ok = b.depth == 12;
    let mut parts = Vec::new();
    for &p in &b.exponents {
        let s = buckley_series(&b, p, cfg.seed).unwrap();
        let tol = buckley_tolerance(p);
        let slope = s.slope.unwrap_or(f64::NAN);
        let hit = (slope - s.expected).abs() <= tol;
        ok &= hit;
        parts.push(format!("p={p} slope={slope:.4} target {:.2}±{tol:.2}", s.expected));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < BUCKLEY_BUDGET;
    report(1, ok, &format!("{} in {:.1}s", parts.join(", "), elapsed.as_secs_f64()));
    assert!(ok);
}

#[test]
fn criterion_2_sparse_domination() {
    let cfg = default_config();
    let names = ["mq-sparse", "tq-sparse", "comm-sparse", "bilinear-sparse"];
    let (reports, elapsed) = run_named(&cfg, &names);
    let mut ok = elapsed < SPARSE_BUDGET;
    let mut parts = Vec::new();
    for r in &reports {
        let good = r.passed
            && r.instances >= MIN_SPARSE_INSTANCES
            && r.failed_conditions == 0
            && r.conditions > 0
            && r.depths == vec![6, 8]
            && r.checks.iter().all(|c| c.finite)
            && max_spread(r) <= SPREAD_LIMIT;
        ok &= good;
        parts.push(format!("{} n={} spread={:.2}", r.suite, r.instances, max_spread(r)));
    }
    report(2, ok, &format!("{} in {:.1}s", parts.join("; "), elapsed.as_secs_f64()));
    assert!(ok);
}

/// Number of subfamilies of a complete binary tree of height `h`, up to swapping siblings.
fn orbit_count(h: u32) -> u64 {
    (0..h).fold(2, |m, _| m * (m + 1))
}

/// The canonical family with index `i` below `node`, whose subtree has height `h`.
fn decode(d: &Domain, node: DyadicCube, h: u32, i: u64, out: &mut Vec<DyadicCube>) {
    if i % 2 == 1 {
        out.push(node);
    }
    if h == 0 {
        return;
    }
    let r = i / 2;
    let mut b = (((8 * r + 1) as f64).sqrt() as u64).saturating_sub(1) / 2;
    while (b + 1) * (b + 2) / 2 <= r {
        b += 1;
    }
    while b * (b + 1) / 2 > r {
        b -= 1;
    }
    let a = r - b * (b + 1) / 2;
    let kids = d.children(&node).unwrap();
    decode(d, kids[0], h - 1, a, out);
    decode(d, kids[1], h - 1, b, out);
}

/// `(mass, cells)` of the worst cube of the lattice, scanning every cube and not only members.
fn carleson_oracle(d: &Domain, family: &[DyadicCube]) -> (u64, u64) {
    let members: BTreeSet<DyadicCube> = family.iter().copied().collect();
    let mut best = (0u64, 1u64);
    for r in d.lattice(0) {
        let rc = d.cube_cells(&r);
        let mass: u64 = members
            .iter()
            .map(|q| d.cube_cells(q))
            .filter(|qc| qc.start >= rc.start && qc.end <= rc.end)
            .map(|qc| qc.len() as u64)
            .sum();
        let cells = rc.len() as u64;
        if mass as u128 * best.1 as u128 > best.0 as u128 * cells as u128 {
            best = (mass, cells);
        }
    }
    best
}

/// Witness sets lie in their cubes, have measure `η|Q|` and never overlap beyond one cell per cell.
fn witnesses_valid(d: &Domain, s: &SparseFamily) -> bool {
    let den = s.eta().den();
    let mut used = vec![0u64; d.cells()];
    for (i, q) in s.cubes().iter().enumerate() {
        let qc = d.cube_cells(q);
        let mut total = 0;
        for run in s.witness(i) {
            if run.start < qc.start || run.end > qc.end || run.start >= run.end {
                return false;
            }
            for c in run.start..run.end {
                used[c] += run.units;
            }
            total += (run.end - run.start) as u64 * run.units;
        }
        if total != s.eta().num() * qc.len() as u64 {
            return false;
        }
    }
    used.iter().all(|&u| u <= den)
}

/// Both directions at the tight parameter: `Λ`-Carleson gives a `1/Λ` witness, and no
/// witness exists for any larger `η`.
fn carleson_sparse_agree(d: &Domain, family: &[DyadicCube]) -> bool {
    let set: CubeSet = family.iter().copied().collect();
    let (mass, cells) = carleson_oracle(d, family);
    let c = carleson_constant(d, &set).unwrap();
    if mass * c.cells != c.mass * cells {
        return false;
    }
    let eta = Eta::from_carleson(&c);
    let tight = match verify_sparse(d, &set, eta) {
        Ok(s) => witnesses_valid(d, &s),
        Err(_) => false,
    };
    let above = if eta.num() == eta.den() {
        true
    } else {
        let larger = Eta::new(2 * eta.num() + 1, 2 * eta.den()).unwrap();
        verify_sparse(d, &set, larger).is_err()
    };
    tight && above
}

#[test]
fn criterion_3_carleson_sparse_lemma() {
    let start = Instant::now();
    let d4 = Domain::unit(4);
    let orbits = orbit_count(4);
    let mut bad = 0u64;
    let mut family = Vec::new();
    for i in 0..orbits {
        family.clear();
        decode(&d4, d4.top(), 4, i, &mut family);
        if !carleson_sparse_agree(&d4, &family) {
            bad += 1;
        }
    }
    let d8 = Domain::unit(8);
    let lattice = d8.lattice(0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad_random = 0;
    for k in 0..RANDOM_FAMILIES {
        let density = [0.02, 0.1, 0.3, 0.6, 0.9][k % 5];
        let family: Vec<DyadicCube> = lattice.iter().copied().filter(|_| rng.gen_bool(density)).collect();
        if !carleson_sparse_agree(&d8, &family) {
            bad_random += 1;
        }
    }
    let ok = orbits == 3_263_442 && bad == 0 && bad_random == 0;
    report(
        3,
        ok,
        &format!(
            "{orbits} sibling-swap orbits at L=4 ({bad} disagreements), {RANDOM_FAMILIES} random families at L=8 ({bad_random}) in {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_local_decay() {
    let cfg = default_config();
    let dc = cfg.decay.clone().expect("default config has a decay block");
    let r = run_decay(&dc, cfg.params.q, cfg.seed).unwrap();
    let grid_ok = r.t_grid.first() == Some(&1.0) && r.t_grid.last() == Some(&64.0);
    let shape_ok = r.curves.iter().all(|c| match c.operator.as_str() {
        "sparse" => c.designated == Shape::Exponential,
        "square" => c.designated == Shape::Power { r: 2.0 },
        "commutator" => c.designated == Shape::Root,
        _ => false,
    });
    let envelopes = r.curves.iter().chain(&r.pooled).filter(|c| {
        let f = c.designated_fit();
        f.valid && (f.degenerate || f.c2.is_some_and(|v| v > 0.0))
    });
    let valid = envelopes.count();
    let total = r.curves.len() + r.pooled.len();
    let ok = r.depth == 10 && grid_ok && shape_ok && valid == total && r.root_beats_linear && r.passed;
    report(
        4,
        ok,
        &format!("{valid}/{total} envelopes valid with c2 > 0, sqrt-t beats t on the commutator: {}", r.root_beats_linear),
    );
    assert!(ok);
}

fn random_dyadic(rng: &mut ChaCha8Rng, d: Domain) -> GridFunction {
    GridFunction::new(d, (0..d.cells()).map(|_| rng.gen_range(-64i32..=64) as f64 / 16.0).collect()).unwrap()
}

/// `inf_c` of the `(⌊λn⌋+1)`-th largest `|v − c|`, over every value and every midpoint of two values.
fn rearrangement_oracle(v: &[f64], lambda: f64) -> f64 {
    let m = (lambda * v.len() as f64 + 1e-9).floor() as usize;
    let mut candidates = Vec::new();
    for &a in v {
        for &b in v {
            candidates.push((a + b) / 2.0);
        }
    }
    candidates
        .into_iter()
        .map(|c| {
            let mut dev: Vec<f64> = v.iter().map(|x| (x - c).abs()).collect();
            dev.sort_by(|a, b| b.total_cmp(a));
            if m >= dev.len() {
                0.0
            } else {
                dev[m]
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Least `max − min` over all subsets of at most `⌊λn⌋` removed cells.
fn removal_oracle(v: &[f64], lambda: f64) -> f64 {
    let n = v.len();
    let m = (lambda * n as f64 + 1e-9).floor() as usize;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize > m {
            continue;
        }
        let kept = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| v[i]);
        let (lo, hi) = kept.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if hi >= lo {
            best = best.min(hi - lo);
        }
    }
    best
}

#[test]
fn criterion_5_oscillation_comparison() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d6 = Domain::unit(6);
    let cubes: Vec<DyadicCube> = (0..3).flat_map(|s| d6.lattice(s)).collect();
    let mut violations = 0;
    let mut oracle_misses = 0;
    for _ in 0..TRIPLES {
        let f = random_dyadic(&mut rng, d6);
        let q = cubes[rng.gen_range(0..cubes.len())];
        let cells = d6.cube_cells(&q);
        let lambda = rng.gen_range(1..32) as f64 / 32.0;
        let omega = ln_oscillation(&f, &cells, lambda).unwrap();
        let tilde = local_oscillation(&f, &cells, lambda).unwrap();
        if omega > 2.0 * tilde {
            violations += 1;
        }
        if tilde != rearrangement_oracle(&f.values()[cells.clone()], lambda) {
            oracle_misses += 1;
        }
    }
    let mut small = 0;
    let mut subset_misses = 0;
    for depth in [2, 3, 4] {
        let d = Domain::unit(depth);
        for s in 0..3 {
            for q in d.lattice(s) {
                let cells = d.cube_cells(&q);
                if cells.len() > 12 {
                    continue;
                }
                for _ in 0..8 {
                    let f = random_dyadic(&mut rng, d);
                    let lambda = rng.gen_range(1..32) as f64 / 32.0;
                    small += 1;
                    if ln_oscillation(&f, &cells, lambda).unwrap() != removal_oracle(&f.values()[cells.clone()], lambda) {
                        subset_misses += 1;
                    }
                }
            }
        }
    }
    let ok = violations == 0 && oracle_misses == 0 && subset_misses == 0;
    report(
        5,
        ok,
        &format!(
            "{TRIPLES} triples: {violations} violations of ω ≤ 2ω̃, {oracle_misses} ω̃ oracle misses; {small} small cubes: {subset_misses} subset-oracle misses"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_appendix_suites() {
    let cfg = default_config();
    let names = ["cotlar", "sharp-T", "sharp-comm", "weak11-Tq", "fs-duality", "weakpp-Mq"];
    let (reports, elapsed) = run_named(&cfg, &names);
    let mut ok = elapsed < APPENDIX_BUDGET;
    let mut parts = Vec::new();
    for r in &reports {
        let good = r.passed
            && r.depths == vec![6, 8, 10]
            && r.checks.iter().all(|c| c.finite)
            && max_spread(r) <= SPREAD_LIMIT;
        ok &= good;
        parts.push(format!("{} spread={:.2}", r.suite, max_spread(r)));
    }
    report(6, ok, &format!("{} in {:.1}s", parts.join("; "), elapsed.as_secs_f64()));
    assert!(ok);
}

#[test]
fn criterion_7_cp_suites() {
    let cfg = default_config();
    let names = ["cp-strong", "cp-weak", "cp-key-lemma", "yabuta", "d-condition"];
    let (reports, elapsed) = run_named(&cfg, &names);
    let mut ok = elapsed < CP_BUDGET && cfg.params.p == 2.0 && cfg.params.cp_q == 2.5;
    ok &= cfg.params.lp_exponents.contains(&0.7);
    for r in &reports {
        ok &= r.passed && r.checks.iter().all(|c| c.finite);
    }
    let strong = &reports[0];
    let truncated: Vec<_> = strong.findings.iter().filter(|f| f.name.contains(")_+^")).collect();
    let curves: Vec<_> = truncated.iter().filter(|f| f.name.contains("C_p functional")).collect();
    let blowups: Vec<_> = truncated.iter().filter(|f| f.name.contains("exceeds")).collect();
    ok &= !curves.is_empty() && curves.iter().all(|f| f.value.is_finite());
    ok &= !blowups.is_empty() && blowups.iter().all(|f| f.value > BLOWUP);
    let worst_curve = curves.iter().map(|f| f.value).fold(0.0, f64::max);
    let least_blowup = blowups.iter().map(|f| f.value).fold(f64::INFINITY, f64::min);
    report(
        7,
        ok,
        &format!(
            "truncated power weights: C_p functional ≤ {worst_curve:.3} on {} samples, A1/Ap ≥ {least_blowup:.3e}; in {:.1}s",
            curves.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_mixed_ap_ainfty() {
    let cfg = default_config();
    let entry = cfg.suites.iter().find(|e| e.name() == "mq-weighted").cloned().unwrap_or(SuiteEntry::Name("mq-weighted".into()));
    let r = run_suite(&cfg, &entry).unwrap().report;
    let spreads: Vec<_> = r.findings.iter().filter(|f| f.name.ends_with("spread across A_p buckets")).collect();
    let halves: Vec<_> = r.findings.iter().filter(|f| f.name.ends_with("upper/lower A_∞ half within buckets")).collect();
    let buckets = r.findings.iter().filter(|f| f.name.contains("bucket 2^")).count() / spreads.len().max(1);
    let ok = r.checks.iter().all(|c| c.finite)
        && !spreads.is_empty()
        && spreads.iter().chain(&halves).all(|f| f.value <= SPREAD_LIMIT && f.holds == Some(true))
        && buckets >= 2;
    let worst = spreads.iter().chain(&halves).map(|f| f.value).fold(0.0, f64::max);
    report(8, ok, &format!("{buckets} A_p buckets, worst bucket spread {worst:.2} (limit {SPREAD_LIMIT})"));
    assert!(ok);
}

#[test]
fn criterion_9_determinism() {
    let cfg = default_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &std::path::Path, jobs| {
        let opts = RunOptions { out: Some(dir.to_path_buf()), seed: None, jobs: Some(jobs) };
        run_config(&cfg, DEFAULT_CONFIG, &opts).unwrap().manifest
    };
    let first = run(a.path(), 1);
    let second = run(b.path(), 2);
    let ok = first.files == second.files && first.config_sha256 == second.config_sha256 && !first.files.is_empty();
    report(9, ok, &format!("{} artifact hashes compared across 1 and 2 workers", first.files.len()));
    assert!(ok);
}
