//! Initial assignments.
//!
//! Decimation assigns variables one at a time with the priority: unit hard
//! clause, then a uniformly chosen unit soft clause, then a random value for a
//! random unassigned variable. Unit detection uses per-clause counters of
//! unassigned literals, so the whole pass is linear in the formula size.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::formula::{Assignment, Formula, Lit, Var};
use crate::search::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    #[default]
    Decimation,
    Random,
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Decimation => "decimation",
            InitMode::Random => "random",
        })
    }
}

impl FromStr for InitMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "decimation" => Ok(InitMode::Decimation),
            "random" => Ok(InitMode::Random),
            other => Err(ConfigError::UnknownValue {
                what: "init mode",
                value: other.to_string(),
            }),
        }
    }
}

pub fn initial_assignment<R: Rng>(formula: &Formula, mode: InitMode, rng: &mut R) -> Assignment {
    match mode {
        InitMode::Decimation => decimation_init(formula, rng),
        InitMode::Random => random_init(formula, rng),
    }
}

pub fn random_init<R: Rng>(formula: &Formula, rng: &mut R) -> Assignment {
    Assignment::new(
        (0..formula.num_vars())
            .map(|_| rng.random_bool(0.5))
            .collect(),
    )
}

struct Decimator<'f> {
    formula: &'f Formula,
    values: Vec<bool>,
    assigned: Vec<bool>,
    /// Unassigned variables, with positions for O(1) removal.
    free: Vec<u32>,
    free_pos: Vec<u32>,
    satisfied: Vec<bool>,
    unassigned_lits: Vec<u32>,
    hard_units: VecDeque<u32>,
    soft_units: Vec<u32>,
}

impl<'f> Decimator<'f> {
    fn new(formula: &'f Formula) -> Self {
        let n = formula.num_vars();
        let mut d = Decimator {
            formula,
            values: vec![false; n],
            assigned: vec![false; n],
            free: (0..n as u32).collect(),
            free_pos: (0..n as u32).collect(),
            satisfied: vec![false; formula.num_clauses()],
            unassigned_lits: formula.clauses().iter().map(|c| c.len() as u32).collect(),
            hard_units: VecDeque::new(),
            soft_units: Vec::new(),
        };
        for (id, clause) in formula.clauses().iter().enumerate() {
            if clause.len() == 1 {
                d.enqueue_unit(id);
            }
        }
        d
    }

    fn enqueue_unit(&mut self, c: usize) {
        if self.formula.is_hard(c) {
            self.hard_units.push_back(c as u32);
        } else {
            self.soft_units.push(c as u32);
        }
    }

    /// The single unassigned literal of `c`, if `c` is still an open unit.
    fn open_unit_lit(&self, c: usize) -> Option<Lit> {
        if self.satisfied[c] || self.unassigned_lits[c] != 1 {
            return None;
        }
        self.formula
            .clause(c)
            .lits()
            .iter()
            .copied()
            .find(|l| !self.assigned[l.var().index()])
    }

    fn assign(&mut self, lit: Lit) {
        let v = lit.var().index();
        debug_assert!(!self.assigned[v]);
        self.assigned[v] = true;
        self.values[v] = lit.is_positive();

        let p = self.free_pos[v] as usize;
        let last = self.free.pop().expect("variable was free");
        if last as usize != v {
            self.free[p] = last;
            self.free_pos[last as usize] = p as u32;
        }

        for &c in self.formula.occurrences(lit) {
            self.satisfied[c as usize] = true;
        }
        for &c in self.formula.occurrences(!lit) {
            let c = c as usize;
            self.unassigned_lits[c] -= 1;
            if !self.satisfied[c] && self.unassigned_lits[c] == 1 {
                self.enqueue_unit(c);
            }
        }
    }

    fn run<R: Rng>(mut self, rng: &mut R) -> Assignment {
        while !self.free.is_empty() {
            if let Some(c) = self.hard_units.pop_front() {
                if let Some(lit) = self.open_unit_lit(c as usize) {
                    self.assign(lit);
                }
                continue;
            }
            if !self.soft_units.is_empty() {
                let i = rng.random_range(0..self.soft_units.len());
                let c = self.soft_units.swap_remove(i);
                if let Some(lit) = self.open_unit_lit(c as usize) {
                    self.assign(lit);
                }
                continue;
            }
            let var = self.free[rng.random_range(0..self.free.len())];
            let value = rng.random_bool(0.5);
            self.assign(Lit::new(Var::new(var as usize), value));
        }
        Assignment::new(self.values)
    }
}

/// Unit-propagation-driven decimation.
pub fn decimation_init<R: Rng>(formula: &Formula, rng: &mut R) -> Assignment {
    Decimator::new(formula).run(rng)
}
