//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

mod common;

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use common::{
    build, max_var, new_format, old_format, random_instance, random_raw, InstanceShape,
    ORACLE_SHAPE,
};
use spb_maxsat::analysis::weight_dynamics;
use spb_maxsat::formula::{parse_wcnf_str, Assignment, Cost, Formula, ParseError, Var};
use spb_maxsat::harness::{
    aggregate, compute_wins, mse_score, read_records, run_benchmark, write_outputs, BenchOptions,
    BkcMap, LabeledConfig, RUNS_FILE,
};
use spb_maxsat::init::InitMode;
use spb_maxsat::oracle::brute_force_opt;
use spb_maxsat::protocol::{solve_to_protocol, Transcript};
use spb_maxsat::search::{
    solve, solve_with_observer, Improvement, Preset, SearchObserver, SolverConfig,
};
use spb_maxsat::state::{SearchState, SCORE_EPSILON};
use spb_maxsat::weighting::{
    force_decay, spb_weighting, WeightingConfig, WeightingMode, WeightingOutcome,
};

const SUITE_SIZE: u64 = 200;
const SUITE_FLIPS: u64 = 100_000;
const OPTIMAL_RATE: f64 = 0.95;
const SCORE_TOLERANCE: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Suite {
    weighted: bool,
    instances: Vec<(Formula, Cost)>,
}

fn oracle_suite(weighted: bool) -> Suite {
    let offset = if weighted { 0 } else { 10_000 };
    let instances = (0..SUITE_SIZE)
        .into_par_iter()
        .map(|i| {
            let f = random_instance(offset + i, ORACLE_SHAPE, weighted);
            let opt = brute_force_opt(&f).expect("small instance").cost;
            (f, opt)
        })
        .collect();
    Suite {
        weighted,
        instances,
    }
}

fn suite_config(suite: &Suite, mode: WeightingMode) -> SolverConfig {
    SolverConfig {
        preset: if suite.weighted {
            Preset::Wpms
        } else {
            Preset::Pms
        },
        mode,
        ..SolverConfig::with_max_flips(SUITE_FLIPS, 1)
    }
}

/// (optimal, feasible) counts for `mode` over the suite.
fn run_suite(suite: &Suite, mode: WeightingMode) -> (usize, usize) {
    let cfg = suite_config(suite, mode);
    let results: Vec<(bool, bool)> = suite
        .instances
        .par_iter()
        .map(|(f, opt)| {
            let r = solve(f, &cfg).expect("valid config");
            if let Some(a) = &r.best_assignment {
                assert_eq!(
                    f.cost(&a.values),
                    r.best_cost,
                    "reported cost must re-evaluate"
                );
            }
            (r.best_cost == *opt, r.best_cost.is_finite())
        })
        .collect();
    (
        results.iter().filter(|r| r.0).count(),
        results.iter().filter(|r| r.1).count(),
    )
}

fn criterion_oracle(suites: &[Suite]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for suite in suites {
        let infeasible = suite
            .instances
            .iter()
            .filter(|(_, c)| !c.is_finite())
            .count();
        let (optimal, feasible) = run_suite(suite, WeightingMode::Spb);
        let n = suite.instances.len();
        let rate = optimal as f64 / n as f64;
        pass &= infeasible == 0 && rate >= OPTIMAL_RATE && feasible == n;
        parts.push(format!(
            "{}: optimal {optimal}/{n} ({:.1}%), feasible {feasible}/{n}",
            if suite.weighted { "WPMS" } else { "PMS" },
            100.0 * rate
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_incremental() -> Outcome {
    let shape = InstanceShape {
        vars: (20, 40),
        clauses: (40, 160),
        hard_fraction: (0.3, 0.7),
        max_weight: 10,
        max_len: 5,
    };
    let failures: Vec<String> = (0..100u64)
        .into_par_iter()
        .filter_map(|i| {
            let f = random_instance(50_000 + i, shape, true);
            let mut rng = SmallRng::seed_from_u64(i);
            let init = (0..f.num_vars()).map(|_| rng.random_bool(0.5)).collect();
            let mut state = SearchState::new(&f, Assignment::new(init));
            let cfg = WeightingConfig::new(28.0, 1.3, WeightingMode::Spb);
            let adaptive = WeightingConfig::new(3.0, 1.3, WeightingMode::AllAdaptive);
            let mut best = Cost::Infinite;
            for step in 1..=1000u32 {
                let v = Var::new(rng.random_range(0..f.num_vars()));
                state.flip(v);
                if state.cost() < best {
                    best = state.cost();
                    state.update_spb_bound(best.finite().unwrap());
                }
                if step % 20 == 0 {
                    let c = if step % 40 == 0 { &adaptive } else { &cfg };
                    spb_weighting(&mut state, c);
                }
                if step == 400 || step == 800 {
                    force_decay(&mut state, 0.5);
                }
                if let Err(e) = state.check_consistency(SCORE_TOLERANCE) {
                    return Some(format!("instance {i}, flip {step}: {e}"));
                }
            }
            None
        })
        .collect();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "100 instances x 1000 flips, 50 weightings, 2 decays: all fields match".to_string()
        } else {
            failures[0].clone()
        },
    )
}

fn criterion_weighting_law() -> Outcome {
    let mut problems = Vec::new();

    let delta = 1.001;
    let rows = weight_dynamics(delta, 10_000);
    let last = rows.last().unwrap().r_inc;
    if (last - 0.001).abs() > 1e-4 {
        problems.push(format!("final R_inc {last}"));
    }
    if let Some(r) = rows.iter().find(|r| r.r_inc <= delta - 1.0) {
        problems.push(format!("R_inc {} <= delta-1 at step {}", r.r_inc, r.step));
    }
    let constant = weight_dynamics(1.0, 10_000);
    if let Some(r) = constant.iter().find(|r| r.r_inc != 1.0 / r.step as f64) {
        problems.push(format!("constant R_inc {} at step {}", r.r_inc, r.step));
    }

    // The same law through the solver's weighting routine on a live state.
    let f = parse_wcnf_str("1 1 0\n").unwrap();
    for (d, mode) in [
        (1.001, WeightingMode::Spb),
        (1.001, WeightingMode::Constant),
    ] {
        let mut state = SearchState::new(&f, Assignment::new(vec![false]));
        state.update_spb_bound(1);
        let mut cfg = WeightingConfig::new(1.0, d, mode);
        cfg.decay_threshold = f64::INFINITY;
        let mut r_inc = 0.0;
        for n in 1..=10_000u32 {
            let w = state.spb().weight();
            spb_weighting(&mut state, &cfg);
            let next = state.spb().weight();
            r_inc = (next - w) / w;
            match mode {
                WeightingMode::Constant if r_inc != 1.0 / n as f64 => {
                    problems.push(format!("live constant R_inc {r_inc} at {n}"));
                    break;
                }
                WeightingMode::Spb if r_inc <= d - 1.0 => {
                    problems.push(format!("live R_inc {r_inc} at {n}"));
                    break;
                }
                _ => {}
            }
        }
        if mode == WeightingMode::Spb && (r_inc - 0.001).abs() > 1e-4 {
            problems.push(format!("live final R_inc {r_inc}"));
        }
    }

    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("delta=1.001 final R_inc {last:.7}; delta=1 gives 1/n exactly")
        } else {
            problems.join("; ")
        },
    )
}

#[derive(Default)]
struct LifecycleCheck {
    found_feasible: bool,
    violations: Vec<String>,
    weightings_before_feasible: usize,
}

impl SearchObserver for LifecycleCheck {
    fn on_improvement(&mut self, imp: &Improvement, state: &SearchState<'_>) {
        self.found_feasible = true;
        if state.spb().bound() != Cost::Finite(imp.cost) {
            self.violations.push(format!(
                "bound {} != best {}",
                state.spb().bound(),
                imp.cost
            ));
        }
    }

    fn on_weighting(&mut self, _o: &WeightingOutcome, state: &SearchState<'_>) {
        if !self.found_feasible {
            self.weightings_before_feasible += 1;
            if state.spb().weight() != 1.0 {
                self.violations.push(format!(
                    "w(SPB) = {} before any feasible solution",
                    state.spb().weight()
                ));
            }
        }
    }

    fn on_flip(&mut self, var: Var, score: f64, greedy: bool, _state: &SearchState<'_>) {
        if greedy && score <= SCORE_EPSILON {
            self.violations
                .push(format!("greedy flip of {var} with score {score}"));
        }
    }
}

fn criterion_lifecycle(suites: &[Suite]) -> Outcome {
    let mut problems = Vec::new();
    let mut prefixes = 0;
    for suite in suites {
        for (i, (f, _)) in suite.instances.iter().enumerate().take(100) {
            let cfg = SolverConfig {
                init: if i % 2 == 0 {
                    InitMode::Random
                } else {
                    InitMode::Decimation
                },
                ..suite_config(suite, WeightingMode::Spb)
            };
            let mut check = LifecycleCheck::default();
            solve_with_observer(f, &cfg, &mut check).unwrap();
            prefixes += check.weightings_before_feasible;
            problems.extend(check.violations);

            let mut out = Vec::new();
            solve_to_protocol(f, &cfg, &mut out).unwrap();
            let t = Transcript::parse(std::str::from_utf8(&out).unwrap()).unwrap();
            if !t.costs.windows(2).all(|w| w[1] < w[0]) {
                problems.push(format!("o lines not decreasing on instance {i}"));
            }
            match (&t.values, t.costs.last()) {
                (Some(values), Some(&last)) => {
                    if f.cost(values) != Cost::Finite(last) {
                        problems.push(format!("v line does not re-evaluate on instance {i}"));
                    }
                }
                (None, None) if t.status.as_deref() == Some("UNKNOWN") => {}
                _ => problems.push(format!("inconsistent transcript on instance {i}")),
            }
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("200 runs clean; {prefixes} weightings before a first feasible solution kept w(SPB)=1")
        } else {
            problems[0].clone()
        },
    )
}

fn criterion_determinism(suites: &[Suite]) -> Outcome {
    let modes = [
        WeightingMode::Spb,
        WeightingMode::Constant,
        WeightingMode::AllAdaptive,
    ];
    let mut mismatches = 0;
    let mut runs = 0;
    for suite in suites {
        for (i, (f, _)) in suite.instances.iter().enumerate().take(20) {
            let cfg = SolverConfig {
                mode: modes[i % 3],
                seed: i as u64,
                ..suite_config(suite, WeightingMode::Spb)
            };
            let mut a = Vec::new();
            let mut b = Vec::new();
            solve_to_protocol(f, &cfg, &mut a).unwrap();
            solve_to_protocol(f, &cfg, &mut b).unwrap();
            runs += 1;
            if a != b {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{runs} repeated runs, {mismatches} byte-level differences"),
    )
}

fn criterion_metrics() -> Outcome {
    let mut problems = Vec::new();
    if mse_score(2, Cost::Finite(2)) != 1.0 {
        problems.push("score(2,2)".to_string());
    }
    if mse_score(0, Cost::Finite(4)) != 0.2 {
        problems.push("score(0,4)".to_string());
    }
    if mse_score(3, Cost::Infinite) != 0.0 {
        problems.push("score(3,none)".to_string());
    }
    use Cost::{Finite, Infinite};
    if compute_wins(&[vec![Finite(3), Finite(5)]]) != vec![1, 0]
        || compute_wins(&[vec![Finite(3), Finite(3)]]) != vec![1, 1]
        || compute_wins(&[vec![Infinite, Infinite]]) != vec![0, 0]
    {
        problems.push("compute_wins".to_string());
    }

    // A real benchmark run: the reported #score must be the per-instance mean,
    // and re-aggregating the persisted runs must reproduce the report.
    let dir = tempfile::tempdir().unwrap();
    let inst_dir = dir.path().join("instances");
    for i in 0..6u64 {
        let (n, clauses) = random_raw(70_000 + i, ORACLE_SHAPE, true);
        let sub = inst_dir.join(if i < 3 { "fam_a" } else { "fam_b" });
        std::fs::create_dir_all(&sub).unwrap();
        std::fs::write(sub.join(format!("r{i}.wcnf")), old_format(n, &clauses)).unwrap();
    }
    let configs = vec![
        LabeledConfig {
            label: "spb".into(),
            config: SolverConfig::with_max_flips(2_000, 3),
        },
        LabeledConfig {
            label: "weak".into(),
            config: SolverConfig {
                k: Some(1),
                init: InitMode::Random,
                ..SolverConfig::with_max_flips(5, 3)
            },
        },
    ];
    let options = BenchOptions {
        time_limit: 10.0,
        jobs: 2,
    };
    let outcome_run = run_benchmark(&inst_dir, &configs, &options, &BkcMap::new()).unwrap();
    for row in &outcome_run.report.rows {
        for (s, summary) in row.solvers.iter().enumerate() {
            let per_instance: Vec<f64> = outcome_run
                .records
                .iter()
                .filter(|r| r.benchmark == row.benchmark && r.solver == configs[s].label)
                .map(|r| {
                    let best = outcome_run
                        .records
                        .iter()
                        .filter(|o| o.instance == r.instance)
                        .filter_map(|o| o.best_cost)
                        .min();
                    best.map_or(0.0, |b| mse_score(b, r.cost()))
                })
                .collect();
            let mean = per_instance.iter().sum::<f64>() / per_instance.len() as f64;
            if (mean - summary.score).abs() > 1e-12 {
                problems.push(format!(
                    "{} {}: mean {mean} vs {}",
                    row.benchmark, summary.solver, summary.score
                ));
            }
        }
    }
    let out_dir = dir.path().join("out");
    write_outputs(&out_dir, &outcome_run).unwrap();
    let reread = read_records(&out_dir.join(RUNS_FILE)).unwrap();
    if reread != outcome_run.records || aggregate(&reread, &BkcMap::new()) != outcome_run.report {
        problems.push("persisted records do not reproduce the report".to_string());
    }

    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "score/win examples, per-instance means within 1e-12, JSONL round trip".to_string()
        } else {
            problems.join("; ")
        },
    )
}

fn criterion_parser() -> Outcome {
    let mut problems = Vec::new();
    for i in 0..50u64 {
        let (_, clauses) = random_raw(90_000 + i, ORACLE_SHAPE, i % 2 == 0);
        let n = max_var(&clauses);
        let old = parse_wcnf_str(&old_format(n, &clauses)).unwrap();
        let new = parse_wcnf_str(&new_format(&clauses)).unwrap();
        if old != new || old != build(n, &clauses) {
            problems.push(format!("instance {i} differs between formats"));
        }
    }

    type Check = fn(&ParseError) -> bool;
    let malformed: Vec<(&str, &str, Check)> = vec![
        ("malformed header", "p wcnf 2 x 3\n1 1 0\n", |e| {
            matches!(e, ParseError::MalformedHeader { .. })
        }),
        ("missing terminator", "p wcnf 2 1 3\n1 1 2\n", |e| {
            matches!(e, ParseError::MissingTerminator { .. })
        }),
        ("variable out of range", "p wcnf 2 1 3\n1 1 -3 0\n", |e| {
            matches!(e, ParseError::VarOutOfRange { .. })
        }),
        ("zero soft weight", "p wcnf 1 1 5\n0 1 0\n", |e| {
            matches!(e, ParseError::ZeroWeight { .. })
        }),
        (
            "total weight overflow",
            "5000000000000000000 1 0\n5000000000000000000 -1 0\n",
            |e| matches!(e, ParseError::WeightOverflow { .. }),
        ),
    ];
    for (name, text, check) in &malformed {
        match parse_wcnf_str(text) {
            Err(e) if check(&e) => {}
            other => problems.push(format!("{name}: got {other:?}")),
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "50 old/new pairs identical; 5 malformed cases raise their errors".to_string()
        } else {
            problems.join("; ")
        },
    )
}

fn criterion_ablation(suites: &[Suite]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for suite in suites {
        let n = suite.instances.len();
        for mode in [WeightingMode::Constant, WeightingMode::AllAdaptive] {
            let (optimal, feasible) = run_suite(suite, mode);
            pass &= feasible == n;
            parts.push(format!(
                "{} {mode}: feasible {feasible}/{n}, optimal {optimal}/{n}",
                if suite.weighted { "WPMS" } else { "PMS" },
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let suites = [oracle_suite(true), oracle_suite(false)];

    type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Criterion<'_>)> = vec![
        (
            "1 oracle equivalence",
            Box::new(|| criterion_oracle(&suites)),
        ),
        ("2 incremental consistency", Box::new(criterion_incremental)),
        ("3 weighting law", Box::new(criterion_weighting_law)),
        ("4 SPB lifecycle", Box::new(|| criterion_lifecycle(&suites))),
        ("5 determinism", Box::new(|| criterion_determinism(&suites))),
        ("6 metrics", Box::new(criterion_metrics)),
        ("7 parser", Box::new(criterion_parser)),
        (
            "8 ablation plumbing",
            Box::new(|| criterion_ablation(&suites)),
        ),
    ];

    let mut failed = HashSet::new();
    for (name, run) in &criteria {
        let t = Instant::now();
        let result = run();
        println!(
            "[{}] criterion {name}: {} ({:.1}s)",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            t.elapsed().as_secs_f64()
        );
        if !result.pass {
            failed.insert(*name);
        }
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        criteria.len() - failed.len(),
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
