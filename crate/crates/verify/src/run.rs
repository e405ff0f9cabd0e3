//! Running a whole configuration and writing its artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::buckley::{buckley_series, BuckleySeries};
use crate::config::{ConfigError, ExperimentConfig};
use crate::decay::{run_decay, DecayReport};
use crate::report::{constants_svg, line_svg, run_suite, table_csv, InequalityReport};
use crate::suites::{self, Evaluation, Instance};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Eval(String),
    #[error("dump {path}: {message}")]
    Dump { path: String, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

/// `|slope − 1/(p−1)| ≤ 0.3/p`: `[0.85, 1.15]` at `p = 2` and `[0.4, 0.6]` at `p = 3`.
pub fn buckley_tolerance(p: f64) -> f64 {
    0.3 / p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuckleyResult {
    pub series: BuckleySeries,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub suites: Vec<InequalityReport>,
    pub buckley: Vec<BuckleyResult>,
    pub decay: Option<DecayReport>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Relative path to sha256 of every artifact.
    pub files: BTreeMap<String, String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub struct RunOutcome {
    pub out: PathBuf,
    pub report: RunReport,
    pub manifest: Manifest,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Writer {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl Writer {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io(dir))?;
        }
        fs::write(&path, bytes).map_err(io(&path))?;
        self.files.insert(rel.into(), sha256_hex(bytes));
        Ok(())
    }
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>, RunError> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| RunError::Eval(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

/// Runs every selected suite plus the optional exponent and decay studies.
pub fn run_config(cfg: &ExperimentConfig, config_text: &str, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let started = now();
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| RunError::Eval(e.to_string()))?;
    fs::create_dir_all(&out).map_err(io(&out))?;
    let mut w = Writer { root: out.clone(), files: BTreeMap::new() };
    let (report, failures) = pool.install(|| compute(&cfg))?;
    write_artifacts(&mut w, &report, &failures)?;
    let manifest = Manifest {
        name: cfg.name.clone(),
        seed: cfg.seed,
        config_sha256: sha256_hex(config_text.as_bytes()),
        files: w.files.clone(),
        started_unix: started,
        finished_unix: now(),
    };
    let path = out.join("manifest.json");
    fs::write(&path, json(&manifest)?).map_err(io(&path))?;
    Ok(RunOutcome { out, report, manifest })
}

type Failure = (String, Instance, Option<Evaluation>);

fn compute(cfg: &ExperimentConfig) -> Result<(RunReport, Vec<Failure>), RunError> {
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for entry in &cfg.suites {
        let run = run_suite(cfg, entry).map_err(RunError::Eval)?;
        if let Some((inst, eval)) = run.failure {
            failures.push((run.report.suite.clone(), inst, eval));
        }
        reports.push(run.report);
    }
    let mut buckley = Vec::new();
    if let Some(b) = &cfg.buckley {
        for &p in &b.exponents {
            let series = buckley_series(b, p, cfg.seed).map_err(|e| RunError::Eval(e.to_string()))?;
            let tolerance = buckley_tolerance(p);
            let passed = series.slope.is_some_and(|s| (s - series.expected).abs() <= tolerance);
            buckley.push(BuckleyResult { series, tolerance, passed });
        }
    }
    let decay = match &cfg.decay {
        Some(d) => Some(run_decay(d, cfg.params.q, cfg.seed).map_err(|e| RunError::Eval(e.to_string()))?),
        None => None,
    };
    let passed = reports.iter().all(|r| r.passed)
        && buckley.iter().all(|b| b.passed)
        && decay.as_ref().map_or(true, |d| d.passed);
    Ok((RunReport { name: cfg.name.clone(), seed: cfg.seed, suites: reports, buckley, decay, passed }, failures))
}

fn write_artifacts(w: &mut Writer, report: &RunReport, failures: &[Failure]) -> Result<(), RunError> {
    w.write("report.json", &json(report)?)?;
    for r in &report.suites {
        w.write(&format!("tables/{}.csv", r.suite), table_csv(r).map_err(RunError::Eval)?.as_bytes())?;
        w.write(&format!("plots/{}.svg", r.suite), constants_svg(r).as_bytes())?;
    }
    if !report.buckley.is_empty() {
        let mut t = String::from("p,a,ap,norm,probe\n");
        let mut series = Vec::new();
        for b in &report.buckley {
            for pt in &b.series.points {
                t.push_str(&format!("{},{},{:.9e},{:.9e},{}\n", b.series.p, pt.a, pt.ap, pt.norm, pt.probe));
            }
            series.push((
                format!("p={}", b.series.p),
                b.series.points.iter().map(|pt| (pt.ap.ln(), pt.norm.ln())).collect(),
            ));
        }
        w.write("tables/buckley.csv", t.as_bytes())?;
        w.write("plots/buckley.svg", line_svg("maximal operator norm against A_p", "log [w]_Ap", "log norm", &series).as_bytes())?;
    }
    if let Some(d) = &report.decay {
        let mut t = String::from("operator,function,t,phi\n");
        for c in d.curves.iter().chain(&d.pooled) {
            for (tv, phi) in d.t_grid.iter().zip(&c.phi) {
                t.push_str(&format!("{},{},{},{:.9e}\n", c.operator, c.function, tv, phi));
            }
        }
        w.write("tables/decay.csv", t.as_bytes())?;
        let series: Vec<(String, Vec<(f64, f64)>)> = d
            .pooled
            .iter()
            .map(|c| {
                let pts = d.t_grid.iter().zip(&c.phi).filter(|(_, p)| **p > 0.0).map(|(t, p)| (*t, p.log10())).collect();
                (c.operator.clone(), pts)
            })
            .collect();
        w.write("plots/decay.svg", line_svg("pooled relative measure", "t", "log10 phi(t)", &series).as_bytes())?;
    }
    for (suite, inst, eval) in failures {
        dump(w, &format!("dumps/{suite}"), inst, eval.as_ref())?;
    }
    Ok(())
}

/// Everything needed to replay one failing instance.
fn dump(w: &mut Writer, dir: &str, inst: &Instance, eval: Option<&Evaluation>) -> Result<(), RunError> {
    w.write(&format!("{dir}/instance.json"), &json(inst)?)?;
    let d = inst.domain();
    for (i, f) in inst.functions.iter().enumerate() {
        w.write(&format!("{dir}/f{i}.csv"), f.generate(d).to_csv().as_bytes())?;
    }
    for (i, f) in inst.aux.iter().enumerate() {
        w.write(&format!("{dir}/aux{i}.csv"), f.generate(d).to_csv().as_bytes())?;
    }
    if let Ok(wt) = inst.weight() {
        w.write(&format!("{dir}/weight.csv"), wt.to_csv().as_bytes())?;
    }
    if let Some(e) = eval {
        w.write(&format!("{dir}/cubes.json"), &json(&e.cubes)?)?;
        for (k, m) in e.measurements.iter().enumerate() {
            if let Some((l, r)) = &m.cells {
                let mut t = String::from("cell,lhs,rhs\n");
                for (i, (a, b)) in l.iter().zip(r).enumerate() {
                    t.push_str(&format!("{i},{a:.12e},{b:.12e}\n"));
                }
                w.write(&format!("{dir}/check{k}.csv"), t.as_bytes())?;
            }
        }
    }
    Ok(())
}

pub struct Replay {
    pub instance: Instance,
    pub evaluation: Evaluation,
}

/// Re-evaluates a dumped instance; accepts the dump directory or its `instance.json`.
pub fn replay(path: &Path) -> Result<Replay, RunError> {
    let file = if path.is_dir() { path.join("instance.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).map_err(io(&file))?;
    let instance: Instance = serde_json::from_str(&text)
        .map_err(|e| RunError::Dump { path: file.display().to_string(), message: e.to_string() })?;
    if suites::find(&instance.suite).is_none() {
        return Err(RunError::Dump { path: file.display().to_string(), message: format!("unknown suite `{}`", instance.suite) });
    }
    if !(2..=crate::config::MAX_DEPTH).contains(&instance.depth) || instance.functions.is_empty() {
        return Err(RunError::Dump { path: file.display().to_string(), message: "invalid depth or no functions".into() });
    }
    let evaluation = suites::evaluate(&instance).map_err(RunError::Eval)?;
    Ok(Replay { instance, evaluation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SuiteEntry;

    #[test]
    fn empty_suite_list_writes_manifest_and_empty_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::minimal("empty");
        let out = run_config(&cfg, "{}", &RunOptions { out: Some(dir.path().into()), ..Default::default() }).unwrap();
        assert!(out.report.passed && out.report.suites.is_empty());
        assert!(dir.path().join("manifest.json").exists());
        assert_eq!(out.manifest.files.keys().collect::<Vec<_>>(), vec!["report.json"]);
    }

    #[test]
    fn lone_suite_gives_one_table() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::minimal("one");
        cfg.resolutions = vec![4];
        cfg.suites = vec![SuiteEntry::Name("weakpp-Mq".into())];
        let out = run_config(&cfg, "{}", &RunOptions { out: Some(dir.path().into()), jobs: Some(1), ..Default::default() }).unwrap();
        let tables: Vec<_> = out.manifest.files.keys().filter(|k| k.starts_with("tables/")).collect();
        assert_eq!(tables, vec!["tables/weakpp-Mq.csv"]);
        assert!(out.report.passed);
    }

    #[test]
    fn corrupted_dump_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("instance.json"), "{\"suite\": 3").unwrap();
        assert!(matches!(replay(dir.path()), Err(RunError::Dump { .. })));
    }
}
