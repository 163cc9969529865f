//! Sweep orchestration: runs a (T x seed) grid, writes per-run artifacts and
//! a digest manifest, skips runs that are already complete, and replays runs
//! for verification.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use proxpep::driver::{run_with_options, schedule_params, RunOptions, ScheduleCoeffs, Trajectory};
use proxpep::error::{Error, Result};
use proxpep::io::{
    render_metrics, render_summary, render_thresholds, render_trajectory, sha256_hex, write_atomic,
};
use proxpep::metrics::{thresholds, trajectory_metrics, MetricsOptions, MetricsSeries};
use proxpep::model::derived_constants;
use proxpep::problem::StochasticProgram;
use proxpep::AlgoParams;

use crate::generate::{generate_from_config, write_problem_config, ProblemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricsMode {
    /// Moreau replay at every iterate.
    Full,
    /// Full replay up to T = 1024, subsampled beyond.
    Auto,
    /// No Moreau inner solves.
    Cheap,
}

impl FromStr for MetricsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(MetricsMode::Full),
            "auto" => Ok(MetricsMode::Auto),
            "cheap" => Ok(MetricsMode::Cheap),
            other => Err(Error::invalid_argument(format!("unknown metrics mode '{other}'"))),
        }
    }
}

fn default_metrics_mode() -> MetricsMode {
    MetricsMode::Auto
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CoeffConfig {
    pub c_g: Option<f64>,
    pub c_h: Option<f64>,
    pub tau0: Option<f64>,
    pub c0: Option<f64>,
    pub alpha0: Option<f64>,
}

impl CoeffConfig {
    pub fn to_schedule(self) -> ScheduleCoeffs {
        let d = ScheduleCoeffs::default();
        ScheduleCoeffs {
            c_g: self.c_g.unwrap_or(d.c_g),
            c_h: self.c_h.unwrap_or(d.c_h),
            tau0: self.tau0.unwrap_or(d.tau0),
            c0: self.c0.unwrap_or(d.c0),
            alpha0: self.alpha0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub t_values: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub coeffs: CoeffConfig,
    pub output_dir: String,
    #[serde(default = "default_metrics_mode")]
    pub metrics: MetricsMode,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub tol_sub: Option<f64>,
    #[serde(default)]
    pub debug_checks: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_values.is_empty() {
            return Err(Error::invalid_argument("t_values must be nonempty"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() || self.seeds.is_empty() {
            return Err(Error::invalid_argument("seeds must be nonempty and distinct"));
        }
        Ok(())
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::invalid_argument(format!("bad experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical digest of the parsed config (field order is fixed by the
    /// struct, so re-serialization is canonical).
    pub fn digest(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        sha256_hex(text.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RunId {
    pub t: usize,
    pub seed: u64,
}

impl RunId {
    pub fn dir_name(&self) -> String {
        format!("T{}_seed{}", self.t, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub id: RunId,
    pub status: String,
    pub digests: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub config_digest: String,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut out = format!("config_digest = {}\n", self.config_digest);
        for e in &self.entries {
            let mut line = format!("run T={} seed={} status={}", e.id.t, e.id.seed, e.status);
            for (k, v) in &e.digests {
                line.push_str(&format!(" {k}={v}"));
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut manifest = Manifest::default();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("config_digest =") {
                manifest.config_digest = rest.trim().to_string();
            } else if let Some(rest) = line.strip_prefix("run ") {
                let mut id = RunId { t: 0, seed: 0 };
                let mut status = String::new();
                let mut digests = BTreeMap::new();
                for tokenized in rest.split_whitespace() {
                    let (k, v) = tokenized
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidState(format!("bad manifest token {tokenized}")))?;
                    match k {
                        "T" => id.t = v.parse().map_err(|e| Error::InvalidState(format!("{e}")))?,
                        "seed" => {
                            id.seed = v.parse().map_err(|e| Error::InvalidState(format!("{e}")))?
                        }
                        "status" => status = v.to_string(),
                        _ => {
                            digests.insert(k.to_string(), v.to_string());
                        }
                    }
                }
                manifest.entries.push(ManifestEntry { id, status, digests });
            }
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn entry(&self, id: RunId) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub manifest_path: PathBuf,
    pub completed: Vec<RunId>,
    pub skipped: Vec<RunId>,
    pub failed: Vec<(RunId, String)>,
}

pub struct RunOutput {
    pub params: AlgoParams,
    pub trajectory: Trajectory,
    pub metrics: MetricsSeries,
}

/// Scheduling, solving, and metric replay for one grid point.
pub fn execute_run(
    program: &StochasticProgram,
    cfg: &ExperimentConfig,
    id: RunId,
) -> Result<RunOutput> {
    let mut params = schedule_params(
        id.t,
        &cfg.coeffs.to_schedule(),
        program,
        program.constants.d0,
    )?;
    if let Some(tol) = cfg.tol_sub {
        params.tol_sub = tol;
    }
    let opts = RunOptions {
        start: None,
        debug_checks: cfg.debug_checks,
    };
    let trajectory = run_with_options(program, &params, id.seed, &opts)?;
    let metric_opts = match cfg.metrics {
        MetricsMode::Full => MetricsOptions::default(),
        MetricsMode::Auto => MetricsOptions::auto(id.t),
        MetricsMode::Cheap => MetricsOptions {
            with_moreau: false,
            ..MetricsOptions::auto(id.t)
        },
    };
    let metrics = trajectory_metrics(program, &trajectory, &params, &metric_opts)?;
    Ok(RunOutput {
        params,
        trajectory,
        metrics,
    })
}

/// Renders the four per-run artifact files.
fn render_run_files(
    program: &StochasticProgram,
    out: &RunOutput,
) -> Result<BTreeMap<&'static str, String>> {
    let consts = derived_constants(
        program,
        out.params.sigma_g,
        out.params.sigma_h,
        program.constants.d0,
    )?;
    let threshold_report = thresholds(&out.params, &consts, program, None);
    let mut files = BTreeMap::new();
    files.insert("trajectory", render_trajectory(&out.trajectory));
    files.insert("metrics", render_metrics(&out.metrics));
    files.insert(
        "summary",
        render_summary(&out.trajectory, &out.params, Some(&out.metrics)),
    );
    files.insert("thresholds", render_thresholds(&threshold_report));
    Ok(files)
}

fn run_dir(out_dir: &Path, id: RunId) -> PathBuf {
    out_dir.join("runs").join(id.dir_name())
}

/// Whether a manifest entry's files are all present with matching digests.
fn run_is_complete(out_dir: &Path, entry: &ManifestEntry) -> bool {
    if entry.status != "ok" {
        return false;
    }
    let dir = run_dir(out_dir, entry.id);
    for (name, digest) in &entry.digests {
        let path = dir.join(format!("{name}.txt"));
        match fs::read(&path) {
            Ok(bytes) => {
                if sha256_hex(&bytes) != *digest {
                    return false;
                }
            }
            Err(_) => return false,
        }
    }
    !entry.digests.is_empty()
}

/// Runs the full (T x seed) grid, resuming past completed runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(out_dir.join("runs"))?;
    let program = generate_from_config(&cfg.problem)?;
    write_problem_config(&out_dir.join("problem.toml"), &cfg.problem, &program)?;

    let manifest_path = out_dir.join("manifest.txt");
    let config_digest = cfg.digest();
    let previous = if manifest_path.exists() {
        let loaded = Manifest::load(&manifest_path)?;
        if loaded.config_digest == config_digest {
            Some(loaded)
        } else {
            None
        }
    } else {
        None
    };

    let mut grid: Vec<RunId> = Vec::new();
    for &t in &cfg.t_values {
        for &seed in &cfg.seeds {
            grid.push(RunId { t, seed });
        }
    }
    grid.sort();

    let mut skipped = Vec::new();
    let mut todo = Vec::new();
    for id in grid {
        let done = previous
            .as_ref()
            .and_then(|m| m.entry(id))
            .map(|e| run_is_complete(&out_dir, e))
            .unwrap_or(false);
        if done {
            skipped.push(id);
        } else {
            todo.push(id);
        }
    }

    let workers = cfg.workers.unwrap_or_else(|| rayon::current_num_threads().max(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidState(format!("thread pool: {e}")))?;

    let results: Vec<(RunId, Result<BTreeMap<&'static str, String>>)> = pool.install(|| {
        todo.par_iter()
            .map(|&id| {
                let rendered = execute_run(&program, cfg, id)
                    .and_then(|out| render_run_files(&program, &out));
                (id, rendered)
            })
            .collect()
    });

    let mut completed = Vec::new();
    let mut failed = Vec::new();
    let mut entries: Vec<ManifestEntry> = Vec::new();
    if let Some(prev) = &previous {
        for id in &skipped {
            if let Some(e) = prev.entry(*id) {
                entries.push(e.clone());
            }
        }
    }
    for (id, rendered) in results {
        match rendered {
            Ok(files) => {
                let dir = run_dir(&out_dir, id);
                fs::create_dir_all(&dir)?;
                let mut digests = BTreeMap::new();
                for (name, contents) in &files {
                    write_atomic(&dir.join(format!("{name}.txt")), contents)?;
                    digests.insert(name.to_string(), sha256_hex(contents.as_bytes()));
                }
                entries.push(ManifestEntry {
                    id,
                    status: "ok".into(),
                    digests,
                });
                completed.push(id);
            }
            Err(err) => {
                let msg = err.to_string().replace(' ', "_");
                entries.push(ManifestEntry {
                    id,
                    status: format!("failed:{msg}"),
                    digests: BTreeMap::new(),
                });
                failed.push((id, err.to_string()));
            }
        }
    }
    entries.sort_by_key(|e| e.id);
    let manifest = Manifest {
        config_digest,
        entries,
    };
    write_atomic(&manifest_path, &manifest.render())?;

    Ok(RunArtifacts {
        out_dir,
        manifest_path,
        completed,
        skipped,
        failed,
    })
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: RunId,
    pub digests_match: bool,
    pub hard_violations: usize,
    pub detail: String,
}

/// Replays every ok-run of the manifest from its config and seed and checks
/// (a) the rendered artifacts reproduce the stored digests and (b) the
/// invariant suite reports zero hard violations.
pub fn check_experiment(cfg: &ExperimentConfig) -> Result<Vec<CheckOutcome>> {
    let out_dir = PathBuf::from(&cfg.output_dir);
    let manifest = Manifest::load(&out_dir.join("manifest.txt"))?;
    if manifest.config_digest != cfg.digest() {
        return Err(Error::InvalidState(
            "manifest config digest does not match the supplied config".into(),
        ));
    }
    let program = generate_from_config(&cfg.problem)?;
    let ok_entries: Vec<&ManifestEntry> =
        manifest.entries.iter().filter(|e| e.status == "ok").collect();
    let outcomes: Vec<CheckOutcome> = ok_entries
        .par_iter()
        .map(|entry| {
            let id = entry.id;
            match execute_run(&program, cfg, id).and_then(|out| {
                let files = render_run_files(&program, &out)?;
                Ok((out, files))
            }) {
                Ok((out, files)) => {
                    let mut digests_match = true;
                    let mut detail = String::new();
                    for (name, contents) in &files {
                        let fresh = sha256_hex(contents.as_bytes());
                        match entry.digests.get(*name) {
                            Some(stored) if *stored == fresh => {}
                            Some(stored) => {
                                digests_match = false;
                                detail.push_str(&format!("{name}: {stored} != {fresh}; "));
                            }
                            None => {
                                digests_match = false;
                                detail.push_str(&format!("{name}: missing from manifest; "));
                            }
                        }
                    }
                    CheckOutcome {
                        id,
                        digests_match,
                        hard_violations: out.trajectory.checks.hard_violations(),
                        detail,
                    }
                }
                Err(err) => CheckOutcome {
                    id,
                    digests_match: false,
                    hard_violations: usize::MAX,
                    detail: err.to_string(),
                },
            }
        })
        .collect();
    Ok(outcomes)
}
