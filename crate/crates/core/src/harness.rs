//! Batch runs over instance directories with MaxSAT-Evaluation style scoring.
//!
//! Each (instance, configuration) pair is solved once. A benchmark is the set of
//! instances sharing a parent directory. Per benchmark and solver the report lists
//! `#win` (instances where the solver matched the best cost found by any solver),
//! the mean time to best over instances with a feasible result, and `#score`, the
//! mean of `(bkc + 1) / (cost + 1)` with 0 for runs without a feasible solution.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{parse_wcnf_file, Cost};
use crate::search::{solve, Improvement, SolverConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {reason}")]
    BadLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// MSE score of one run: 0 without a feasible solution, else `(bkc+1)/(cost+1)`
/// clipped to 1.
pub fn mse_score(bkc: u64, found: Cost) -> f64 {
    match found {
        Cost::Infinite => 0.0,
        Cost::Finite(cost) => {
            if cost < bkc {
                log::warn!("cost {cost} beats the best known cost {bkc}; score clipped to 1");
                return 1.0;
            }
            (bkc as f64 + 1.0) / (cost as f64 + 1.0)
        }
    }
}

/// Wins per solver. `costs[i][s]` is the cost of solver `s` on instance `i`;
/// every solver reaching the minimum finite cost of an instance wins it.
pub fn compute_wins(costs: &[Vec<Cost>]) -> Vec<usize> {
    let n_solvers = costs.first().map_or(0, Vec::len);
    let mut wins = vec![0; n_solvers];
    for row in costs {
        assert_eq!(row.len(), n_solvers, "every solver must run every instance");
        let Some(best) = row.iter().copied().filter(|c| c.is_finite()).min() else {
            continue;
        };
        for (s, &c) in row.iter().enumerate() {
            if c == best {
                wins[s] += 1;
            }
        }
    }
    wins
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Skipped { reason: String },
    Crashed { reason: String },
}

/// Outcome of one solver configuration on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Path relative to the benchmark root.
    pub instance: String,
    pub benchmark: String,
    pub solver: String,
    pub config: SolverConfig,
    pub status: RunStatus,
    pub best_cost: Option<u64>,
    pub time_to_best: Option<f64>,
    pub flips: u64,
    pub trace: Vec<Improvement>,
}

impl RunRecord {
    pub fn cost(&self) -> Cost {
        Cost::from(self.best_cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledConfig {
    pub label: String,
    pub config: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver: String,
    pub wins: usize,
    /// Mean time to best over instances with a feasible result.
    pub mean_time: Option<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub benchmark: String,
    pub instances: usize,
    /// Instances that could not be read; they are not scored.
    pub skipped: usize,
    pub solvers: Vec<SolverSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub solvers: Vec<String>,
    pub rows: Vec<BenchmarkRow>,
}

/// Instance -> best known cost.
pub type BkcMap = HashMap<String, u64>;

/// Reads `<instance> <cost>` lines; `#` starts a comment.
pub fn load_bkc(path: &Path) -> Result<BkcMap, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut map = BkcMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let bad = |reason: &str| HarnessError::BadLine {
            path: path.to_path_buf(),
            line: i + 1,
            reason: reason.to_string(),
        };
        let mut parts = content.split_whitespace();
        let (Some(name), Some(cost), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected `<instance> <cost>`"));
        };
        let cost = cost.parse().map_err(|_| bad("cost is not an integer"))?;
        map.insert(name.to_string(), cost);
    }
    Ok(map)
}

fn lookup_bkc(bkc: &BkcMap, instance: &str) -> Option<u64> {
    bkc.get(instance).copied().or_else(|| {
        let name = Path::new(instance).file_name()?.to_str()?;
        bkc.get(name).copied()
    })
}

/// Aggregates run records into per-benchmark rows. Solvers are reported in order
/// of first appearance; a supplied BKC overrides the best cost among the runs.
pub fn aggregate(records: &[RunRecord], bkc: &BkcMap) -> BenchmarkReport {
    let mut solvers: Vec<String> = Vec::new();
    for r in records {
        if !solvers.contains(&r.solver) {
            solvers.push(r.solver.clone());
        }
    }
    let solver_idx = |name: &str| {
        solvers
            .iter()
            .position(|s| s == name)
            .expect("known solver")
    };

    // benchmark -> instance -> per-solver record
    let mut grouped: BTreeMap<&str, BTreeMap<&str, Vec<Option<&RunRecord>>>> = BTreeMap::new();
    for r in records {
        let slots = grouped
            .entry(&r.benchmark)
            .or_default()
            .entry(&r.instance)
            .or_insert_with(|| vec![None; solvers.len()]);
        slots[solver_idx(&r.solver)] = Some(r);
    }

    let rows = grouped
        .into_iter()
        .map(|(benchmark, instances)| {
            let mut skipped = 0;
            let mut costs: Vec<Vec<Cost>> = Vec::new();
            let mut times: Vec<Vec<Option<f64>>> = Vec::new();
            let mut names: Vec<&str> = Vec::new();
            for (name, slots) in instances {
                let is_skipped = slots
                    .iter()
                    .flatten()
                    .any(|r| matches!(r.status, RunStatus::Skipped { .. }));
                if is_skipped {
                    skipped += 1;
                    continue;
                }
                names.push(name);
                costs.push(
                    slots
                        .iter()
                        .map(|r| r.map_or(Cost::Infinite, RunRecord::cost))
                        .collect(),
                );
                times.push(
                    slots
                        .iter()
                        .map(|r| {
                            r.filter(|r| r.best_cost.is_some())
                                .and_then(|r| r.time_to_best)
                        })
                        .collect(),
                );
            }

            let wins = compute_wins(&costs);
            let summaries = (0..solvers.len())
                .map(|s| {
                    let scores: Vec<f64> = costs
                        .iter()
                        .zip(&names)
                        .map(|(row, name)| {
                            let reference = lookup_bkc(bkc, name)
                                .or_else(|| row.iter().filter_map(|c| c.finite()).min());
                            reference.map_or(0.0, |b| mse_score(b, row[s]))
                        })
                        .collect();
                    let solved: Vec<f64> = times.iter().filter_map(|t| t[s]).collect();
                    SolverSummary {
                        solver: solvers[s].clone(),
                        wins: wins.get(s).copied().unwrap_or(0),
                        mean_time: mean(&solved),
                        score: mean(&scores).unwrap_or(0.0),
                    }
                })
                .collect();
            BenchmarkRow {
                benchmark: benchmark.to_string(),
                instances: names.len(),
                skipped,
                solvers: summaries,
            }
        })
        .collect();

    BenchmarkReport {
        solvers: solvers.clone(),
        rows,
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

impl BenchmarkReport {
    /// Aligned text table: one line per benchmark, `#win time #score` per solver.
    pub fn render_table(&self) -> String {
        let mut header = vec!["benchmark".to_string(), "#inst".to_string()];
        for s in &self.solvers {
            header.push(format!("{s}:#win"));
            header.push(format!("{s}:time"));
            header.push(format!("{s}:#score"));
        }
        let mut lines = vec![header];
        for row in &self.rows {
            let mut cells = vec![row.benchmark.clone(), row.instances.to_string()];
            for s in &row.solvers {
                cells.push(s.wins.to_string());
                cells.push(s.mean_time.map_or("-".into(), |t| format!("{t:.2}")));
                cells.push(format!("{:.4}", s.score));
            }
            lines.push(cells);
        }
        let cols = lines[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &lines {
            let mut first = true;
            for (cell, w) in line.iter().zip(&widths) {
                if !first {
                    out.push_str("  ");
                }
                if first {
                    let _ = write!(out, "{cell:<w$}");
                } else {
                    let _ = write!(out, "{cell:>w$}");
                }
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// All `*.wcnf` files below `dir`, sorted.
pub fn discover_instances(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).follow_links(true) {
        let entry = entry.map_err(|e| HarnessError::Io {
            path: dir.to_path_buf(),
            source: e.into(),
        })?;
        if entry.file_type().is_file()
            && entry.path().extension().and_then(|e| e.to_str()) == Some("wcnf")
        {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    /// Wall-clock limit per run; flip-limited configurations ignore it.
    pub time_limit: f64,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub report: BenchmarkReport,
    pub records: Vec<RunRecord>,
}

fn relative_name(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

fn benchmark_name(instance: &str) -> String {
    match Path::new(instance).parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_string_lossy().into_owned(),
        _ => ".".to_string(),
    }
}

fn run_instance(
    root: &Path,
    path: &Path,
    configs: &[LabeledConfig],
    time_limit: f64,
) -> Vec<RunRecord> {
    let instance = relative_name(root, path);
    let benchmark = benchmark_name(&instance);
    let record =
        |label: &LabeledConfig, status, result: Option<&crate::search::SolveResult>| RunRecord {
            instance: instance.clone(),
            benchmark: benchmark.clone(),
            solver: label.label.clone(),
            config: label.config.clone(),
            status,
            best_cost: result.and_then(|r| r.best_cost.finite()),
            time_to_best: result.and_then(|r| r.time_to_best()),
            flips: result.map_or(0, |r| r.flips),
            trace: result.map(|r| r.trace.clone()).unwrap_or_default(),
        };

    let formula = match parse_wcnf_file(path) {
        Ok(f) => f,
        Err(e) => {
            log::warn!("skipping {}: {e}", path.display());
            return configs
                .iter()
                .map(|c| {
                    record(
                        c,
                        RunStatus::Skipped {
                            reason: e.to_string(),
                        },
                        None,
                    )
                })
                .collect();
        }
    };

    configs
        .par_iter()
        .map(|labeled| {
            let mut cfg = labeled.config.clone();
            cfg.cutoff_seconds = Some(time_limit);
            let outcome = panic::catch_unwind(AssertUnwindSafe(|| solve(&formula, &cfg)));
            match outcome {
                Ok(Ok(result)) => record(labeled, RunStatus::Completed, Some(&result)),
                Ok(Err(e)) => record(
                    labeled,
                    RunStatus::Crashed {
                        reason: e.to_string(),
                    },
                    None,
                ),
                Err(panic) => {
                    let reason = panic
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "solver panicked".into());
                    record(labeled, RunStatus::Crashed { reason }, None)
                }
            }
        })
        .collect()
}

/// Solves every instance under `dir` with every configuration.
pub fn run_benchmark(
    dir: &Path,
    configs: &[LabeledConfig],
    options: &BenchOptions,
    bkc: &BkcMap,
) -> Result<BenchmarkOutcome, HarnessError> {
    let instances = discover_instances(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let records: Vec<RunRecord> = pool.install(|| {
        instances
            .par_iter()
            .flat_map_iter(|path| run_instance(dir, path, configs, options.time_limit))
            .collect()
    });
    let report = aggregate(&records, bkc);
    Ok(BenchmarkOutcome { report, records })
}

pub const RUNS_FILE: &str = "runs.jsonl";
pub const REPORT_FILE: &str = "report.json";

/// Writes `runs.jsonl` and `report.json` into `out_dir`.
pub fn write_outputs(out_dir: &Path, outcome: &BenchmarkOutcome) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let runs_path = out_dir.join(RUNS_FILE);
    let mut runs = BufWriter::new(File::create(&runs_path).map_err(io_err(&runs_path))?);
    for r in &outcome.records {
        serde_json::to_writer(&mut runs, r)
            .map_err(io::Error::from)
            .map_err(io_err(&runs_path))?;
        writeln!(runs).map_err(io_err(&runs_path))?;
    }
    runs.flush().map_err(io_err(&runs_path))?;

    let report_path = out_dir.join(REPORT_FILE);
    let report = File::create(&report_path).map_err(io_err(&report_path))?;
    serde_json::to_writer_pretty(BufWriter::new(report), &outcome.report)
        .map_err(io::Error::from)
        .map_err(io_err(&report_path))?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|e| HarnessError::BadLine {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(records)
}
