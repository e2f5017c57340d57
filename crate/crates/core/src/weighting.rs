//! The soft-conflict PB constraint and the clause weighting performed at local optima.
//!
//! All soft clauses are folded into one pseudo-Boolean constraint
//! `obj(A) < cost(A*)` carrying a single dynamic weight `w(SPB)`. At a local
//! optimum the weights of falsified hard clauses grow by `h_inc`, and when the
//! constraint is violated `w(SPB)` grows adaptively to `delta * (w(SPB) + 1)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::formula::Cost;
use crate::search::ConfigError;
use crate::state::SearchState;

pub const DEFAULT_DECAY_THRESHOLD: f64 = 1e7;
pub const DEFAULT_DECAY_FACTOR: f64 = 0.5;

/// The constraint `obj(A) < bound` with its dynamic weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpbConstraint {
    bound: Cost,
    weight: f64,
}

impl Default for SpbConstraint {
    fn default() -> Self {
        Self::new()
    }
}

impl SpbConstraint {
    /// Unbounded constraint with weight 1.
    pub fn new() -> Self {
        SpbConstraint {
            bound: Cost::Infinite,
            weight: 1.0,
        }
    }

    pub fn with_bound(bound: Cost, weight: f64) -> Self {
        SpbConstraint { bound, weight }
    }

    /// Cost of the incumbent; infinite before the first feasible solution.
    pub fn bound(&self) -> Cost {
        self.bound
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub(crate) fn set_weight(&mut self, weight: f64) {
        self.weight = weight;
    }

    pub fn is_falsified(&self, current_obj: u64) -> bool {
        spb_is_falsified(self, current_obj)
    }

    /// Tightens the bound to a strictly better incumbent cost.
    pub fn update_bound(&mut self, new_cost: u64) {
        assert!(
            Cost::Finite(new_cost) < self.bound,
            "SPB bound must strictly improve: {} -> {}",
            self.bound,
            new_cost
        );
        self.bound = Cost::Finite(new_cost);
    }
}

/// True iff `current_obj >= bound`. An infinite bound is never violated.
pub fn spb_is_falsified(spb: &SpbConstraint, current_obj: u64) -> bool {
    match spb.bound {
        Cost::Finite(bound) => current_obj >= bound,
        Cost::Infinite => false,
    }
}

/// `delta * (weight + 1)`.
#[inline]
pub fn adaptive_increase(weight: f64, delta: f64) -> f64 {
    delta * (weight + 1.0)
}

/// Which dynamic weights use the adaptive rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingMode {
    /// Hard weights additive, `w(SPB)` adaptive.
    #[default]
    Spb,
    /// Everything additive (`delta` forced to 1).
    Constant,
    /// Hard weights also follow `delta * (w + h_inc)`.
    AllAdaptive,
}

impl fmt::Display for WeightingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightingMode::Spb => "spb",
            WeightingMode::Constant => "constant",
            WeightingMode::AllAdaptive => "all-adaptive",
        })
    }
}

impl FromStr for WeightingMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spb" => Ok(WeightingMode::Spb),
            "constant" => Ok(WeightingMode::Constant),
            "all-adaptive" | "all_adaptive" | "all" => Ok(WeightingMode::AllAdaptive),
            other => Err(ConfigError::UnknownValue {
                what: "weighting mode",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingConfig {
    pub h_inc: f64,
    pub delta: f64,
    pub mode: WeightingMode,
    pub decay_threshold: f64,
    pub decay_factor: f64,
}

impl WeightingConfig {
    pub fn new(h_inc: f64, delta: f64, mode: WeightingMode) -> Self {
        WeightingConfig {
            h_inc,
            delta,
            mode,
            decay_threshold: DEFAULT_DECAY_THRESHOLD,
            decay_factor: DEFAULT_DECAY_FACTOR,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.h_inc > 0.0 && self.h_inc.is_finite()) {
            return Err(ConfigError::Invalid("h_inc must be positive".into()));
        }
        if !(self.delta >= 1.0 && self.delta.is_finite()) {
            return Err(ConfigError::Invalid("delta must be at least 1".into()));
        }
        if self.decay_threshold.is_nan() || self.decay_threshold <= 1.0 {
            return Err(ConfigError::Invalid("decay threshold must exceed 1".into()));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return Err(ConfigError::Invalid(
                "decay factor must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Multiplier applied to `w(SPB)` updates under the configured mode.
    pub fn spb_delta(&self) -> f64 {
        match self.mode {
            WeightingMode::Constant => 1.0,
            _ => self.delta,
        }
    }
}

/// What one weighting event changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WeightingOutcome {
    pub hard_clauses_bumped: usize,
    pub spb_increased: bool,
    pub decayed: bool,
}

/// Raises the weights of falsified elements at a local optimum, then decays
/// all weights if one of them crossed the threshold.
pub fn spb_weighting(state: &mut SearchState<'_>, cfg: &WeightingConfig) -> WeightingOutcome {
    let bumped = state.falsified_hard().len();
    for i in 0..bumped {
        let c = state.falsified_hard()[i] as usize;
        let w = state.hard_weight(c);
        let updated = match cfg.mode {
            WeightingMode::AllAdaptive => cfg.delta * (w + cfg.h_inc),
            WeightingMode::Spb | WeightingMode::Constant => w + cfg.h_inc,
        };
        state.set_hard_weight(c, updated);
    }

    let spb_increased = state.spb().is_falsified(state.obj());
    if spb_increased {
        let updated = adaptive_increase(state.spb().weight(), cfg.spb_delta());
        state.set_spb_weight(updated);
    }

    let decayed = decay_weights(state, cfg);
    WeightingOutcome {
        hard_clauses_bumped: bumped,
        spb_increased,
        decayed,
    }
}

/// Scales every dynamic weight by the decay factor (clamped below at 1) when
/// `w(SPB)` or some hard weight exceeds the threshold. Returns whether it fired.
pub fn decay_weights(state: &mut SearchState<'_>, cfg: &WeightingConfig) -> bool {
    let triggered =
        state.spb().weight() > cfg.decay_threshold || state.max_hard_weight() > cfg.decay_threshold;
    if triggered {
        force_decay(state, cfg.decay_factor);
    }
    triggered
}

/// Unconditional decay by `factor`.
pub fn force_decay(state: &mut SearchState<'_>, factor: f64) {
    state.scale_weights(factor);
}
