//! The main local search loop.
//!
//! While some variable has a positive score, BMS picks one of them. Otherwise
//! the search sits in a local optimum: dynamic weights are updated and the
//! best-scoring variable of a random falsified clause (hard clauses first) is
//! flipped. Every strictly better feasible assignment becomes the incumbent
//! and tightens the SPB bound.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Assignment, Cost, Formula, Var};
use crate::init::{initial_assignment, InitMode};
use crate::state::SearchState;
use crate::weighting::{
    spb_weighting, WeightingConfig, WeightingMode, WeightingOutcome, DEFAULT_DECAY_FACTOR,
    DEFAULT_DECAY_THRESHOLD,
};

/// Flips between two wall-clock checks.
const TIME_CHECK_INTERVAL: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown {what} `{value}`")]
    UnknownValue { what: &'static str, value: String },
    #[error("either a time limit or a flip limit is required")]
    NoCutoff,
}

/// Tuned parameter sets for unweighted and weighted instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// PMS when every soft weight is 1, WPMS otherwise.
    #[default]
    Auto,
    Pms,
    Wpms,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Auto => "auto",
            Preset::Pms => "pms",
            Preset::Wpms => "wpms",
        })
    }
}

impl FromStr for Preset {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Preset::Auto),
            "pms" => Ok(Preset::Pms),
            "wpms" => Ok(Preset::Wpms),
            other => Err(ConfigError::UnknownValue {
                what: "preset",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetParams {
    pub k: usize,
    pub h_inc: f64,
    pub delta: f64,
}

pub const PMS_PARAMS: PresetParams = PresetParams {
    k: 53,
    h_inc: 1.0,
    delta: 1.00072,
};

pub const WPMS_PARAMS: PresetParams = PresetParams {
    k: 97,
    h_inc: 28.0,
    delta: 1.001,
};

impl Preset {
    /// Resolves `Auto` against the instance.
    pub fn concrete(self, formula: &Formula) -> Preset {
        match self {
            Preset::Auto if formula.is_unweighted() => Preset::Pms,
            Preset::Auto => Preset::Wpms,
            p => p,
        }
    }

    pub fn params(self, formula: &Formula) -> PresetParams {
        match self.concrete(formula) {
            Preset::Pms => PMS_PARAMS,
            _ => WPMS_PARAMS,
        }
    }
}

/// User-facing solver configuration. `None` parameters fall back to the preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub preset: Preset,
    pub k: Option<usize>,
    pub h_inc: Option<f64>,
    pub delta: Option<f64>,
    pub mode: WeightingMode,
    pub decay_threshold: f64,
    pub decay_factor: f64,
    pub init: InitMode,
    /// Wall-clock limit. Ignored when `max_flips` is set.
    pub cutoff_seconds: Option<f64>,
    pub max_flips: Option<u64>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            preset: Preset::Auto,
            k: None,
            h_inc: None,
            delta: None,
            mode: WeightingMode::Spb,
            decay_threshold: DEFAULT_DECAY_THRESHOLD,
            decay_factor: DEFAULT_DECAY_FACTOR,
            init: InitMode::Decimation,
            cutoff_seconds: Some(60.0),
            max_flips: None,
            seed: 1,
        }
    }
}

impl SolverConfig {
    pub fn with_max_flips(max_flips: u64, seed: u64) -> Self {
        SolverConfig {
            cutoff_seconds: None,
            max_flips: Some(max_flips),
            seed,
            ..Default::default()
        }
    }

    pub fn resolve(&self, formula: &Formula) -> Result<ResolvedConfig, ConfigError> {
        let preset = self.preset.concrete(formula);
        let base = preset.params(formula);
        let k = self.k.unwrap_or(base.k);
        if k == 0 {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        let cutoff = match (self.max_flips, self.cutoff_seconds) {
            (Some(flips), _) => Cutoff::Flips(flips),
            (None, Some(secs)) if secs.is_finite() && secs >= 0.0 => Cutoff::Seconds(secs),
            (None, Some(_)) => {
                return Err(ConfigError::Invalid(
                    "time limit must be a non-negative number".into(),
                ))
            }
            (None, None) => return Err(ConfigError::NoCutoff),
        };
        let weighting = WeightingConfig {
            h_inc: self.h_inc.unwrap_or(base.h_inc),
            delta: self.delta.unwrap_or(base.delta),
            mode: self.mode,
            decay_threshold: self.decay_threshold,
            decay_factor: self.decay_factor,
        };
        weighting.validate()?;
        Ok(ResolvedConfig {
            preset,
            k,
            weighting,
            init: self.init,
            cutoff,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cutoff {
    Seconds(f64),
    Flips(u64),
}

/// Fully determined parameters for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub preset: Preset,
    pub k: usize,
    pub weighting: WeightingConfig,
    pub init: InitMode,
    pub cutoff: Cutoff,
    pub seed: u64,
}

/// A new incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub step: u64,
    /// Seconds since the solver started.
    pub elapsed: f64,
    pub cost: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    TimeLimit,
    FlipLimit,
    /// No falsified clause left that a flip could satisfy.
    Optimal,
    /// The hard part contains an empty clause.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub best_assignment: Option<Assignment>,
    pub best_cost: Cost,
    pub trace: Vec<Improvement>,
    pub flips: u64,
    pub termination: Termination,
    pub elapsed: f64,
    pub config: ResolvedConfig,
}

impl SolveResult {
    /// Seconds until the last improvement.
    pub fn time_to_best(&self) -> Option<f64> {
        self.trace.last().map(|imp| imp.elapsed)
    }
}

/// Hooks into the search loop. All methods default to no-ops.
pub trait SearchObserver {
    fn on_improvement(&mut self, _improvement: &Improvement, _state: &SearchState<'_>) {}

    /// Called right after the weights were updated at a local optimum.
    fn on_weighting(&mut self, _outcome: &WeightingOutcome, _state: &SearchState<'_>) {}

    /// Called before `var` is flipped; `greedy` marks the BMS branch.
    fn on_flip(&mut self, _var: Var, _score: f64, _greedy: bool, _state: &SearchState<'_>) {}
}

impl SearchObserver for () {}

#[inline]
fn better(state: &SearchState<'_>, a: Var, b: Var) -> bool {
    let (sa, sb) = (state.score(a), state.score(b));
    if sa != sb {
        return sa > sb;
    }
    let (ta, tb) = (state.flip_stamp(a), state.flip_stamp(b));
    if ta != tb {
        return ta < tb;
    }
    a < b
}

/// Best of `k` samples (with replacement) from the positive-score variables.
/// `None` when no variable has a positive score.
pub fn bms_pick<R: Rng>(state: &SearchState<'_>, k: usize, rng: &mut R) -> Option<Var> {
    let candidates = state.positive_vars();
    if candidates.is_empty() {
        return None;
    }
    let draw = |rng: &mut R| Var::new(candidates[rng.random_range(0..candidates.len())] as usize);
    let mut best = draw(rng);
    for _ in 1..k {
        let v = draw(rng);
        if better(state, v, best) {
            best = v;
        }
    }
    Some(best)
}

/// Uniform sample from `ids`, skipping clauses without literals.
fn sample_clause<R: Rng>(formula: &Formula, ids: &[u32], rng: &mut R) -> Option<usize> {
    if ids.is_empty() {
        return None;
    }
    let c = ids[rng.random_range(0..ids.len())] as usize;
    if !formula.clause(c).is_empty() {
        return Some(c);
    }
    let non_empty: Vec<u32> = ids
        .iter()
        .copied()
        .filter(|&c| !formula.clause(c as usize).is_empty())
        .collect();
    if non_empty.is_empty() {
        None
    } else {
        Some(non_empty[rng.random_range(0..non_empty.len())] as usize)
    }
}

/// Best-scoring variable of a random falsified clause, preferring hard clauses.
/// `None` when nothing falsified can be repaired by a flip.
pub fn pick_from_falsified<R: Rng>(state: &SearchState<'_>, rng: &mut R) -> Option<Var> {
    let formula = state.formula();
    let clause = sample_clause(formula, state.falsified_hard(), rng)
        .or_else(|| sample_clause(formula, state.falsified_soft(), rng))?;
    formula
        .clause(clause)
        .lits()
        .iter()
        .map(|l| l.var())
        .reduce(|best, v| if better(state, v, best) { v } else { best })
}

/// True when the assignment is feasible and no falsified soft clause has a literal.
fn is_optimal(state: &SearchState<'_>) -> bool {
    let formula = state.formula();
    state.is_feasible()
        && state
            .falsified_soft()
            .iter()
            .all(|&c| formula.clause(c as usize).is_empty())
}

pub fn solve(formula: &Formula, cfg: &SolverConfig) -> Result<SolveResult, ConfigError> {
    solve_with_observer(formula, cfg, &mut ())
}

pub fn solve_with_observer<O: SearchObserver>(
    formula: &Formula,
    cfg: &SolverConfig,
    observer: &mut O,
) -> Result<SolveResult, ConfigError> {
    let config = cfg.resolve(formula)?;
    let start = Instant::now();
    let mut rng = SmallRng::seed_from_u64(config.seed);

    if formula.has_empty_hard_clause() {
        return Ok(SolveResult {
            best_assignment: None,
            best_cost: Cost::Infinite,
            trace: Vec::new(),
            flips: 0,
            termination: Termination::Infeasible,
            elapsed: start.elapsed().as_secs_f64(),
            config,
        });
    }

    let initial = initial_assignment(formula, config.init, &mut rng);
    let mut state = SearchState::new(formula, initial);
    let mut best_cost = Cost::Infinite;
    let mut best_assignment = None;
    let mut trace = Vec::new();

    let mut record = |state: &mut SearchState<'_>, observer: &mut O| {
        let cost = state.cost();
        if cost < best_cost {
            let value = cost.finite().expect("feasible");
            best_cost = cost;
            best_assignment = Some(state.assignment());
            state.update_spb_bound(value);
            let imp = Improvement {
                step: state.step(),
                elapsed: start.elapsed().as_secs_f64(),
                cost: value,
            };
            trace.push(imp);
            observer.on_improvement(&imp, state);
        }
    };
    record(&mut state, observer);

    let termination = loop {
        match config.cutoff {
            Cutoff::Flips(max) if state.step() >= max => break Termination::FlipLimit,
            Cutoff::Seconds(limit)
                if state.step().is_multiple_of(TIME_CHECK_INTERVAL)
                    && start.elapsed().as_secs_f64() >= limit =>
            {
                break Termination::TimeLimit
            }
            _ => {}
        }

        let (var, greedy) = match bms_pick(&state, config.k, &mut rng) {
            Some(v) => (v, true),
            None => {
                if is_optimal(&state) {
                    break Termination::Optimal;
                }
                let outcome = spb_weighting(&mut state, &config.weighting);
                observer.on_weighting(&outcome, &state);
                let v = pick_from_falsified(&state, &mut rng)
                    .expect("a non-optimal local optimum has a repairable falsified clause");
                (v, false)
            }
        };
        observer.on_flip(var, state.score(var), greedy, &state);
        state.flip(var);
        record(&mut state, observer);
    };

    Ok(SolveResult {
        best_assignment,
        best_cost,
        trace,
        flips: state.step(),
        termination,
        elapsed: start.elapsed().as_secs_f64(),
        config,
    })
}
