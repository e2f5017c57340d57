//! Incrementally maintained local search state.
//!
//! Scores follow the make/break scheme: a falsified clause adds its weight to
//! every variable it contains, a clause with exactly one true literal subtracts
//! its weight from that literal's variable. Hard clauses contribute their dynamic
//! weight to `hscore`; soft clauses contribute their original weight to the
//! integer `softdelta`, which is scaled by `w(SPB)` only when a score is read.
//!
//! For clauses with a single true literal the critical variable is recovered in
//! O(1) from the XOR of the indices of all true literals.

use crate::formula::{Assignment, ClauseId, Cost, Formula, Lit, Var};
use crate::weighting::SpbConstraint;

/// Scores at or below this value count as non-positive.
pub const SCORE_EPSILON: f64 = 1e-9;

/// A set of small integers with O(1) insert, remove and uniform sampling.
#[derive(Debug, Clone)]
pub struct IndexedSet {
    items: Vec<u32>,
    pos: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl IndexedSet {
    pub fn with_universe(n: usize) -> Self {
        IndexedSet {
            items: Vec::new(),
            pos: vec![ABSENT; n],
        }
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        self.pos[x] != ABSENT
    }

    #[inline]
    pub fn insert(&mut self, x: usize) {
        if self.pos[x] == ABSENT {
            self.pos[x] = self.items.len() as u32;
            self.items.push(x as u32);
        }
    }

    #[inline]
    pub fn remove(&mut self, x: usize) {
        let p = self.pos[x];
        if p != ABSENT {
            let last = self.items.pop().expect("non-empty");
            if last as usize != x {
                self.items[p as usize] = last;
                self.pos[last as usize] = p;
            }
            self.pos[x] = ABSENT;
        }
    }

    pub fn clear(&mut self) {
        for &x in &self.items {
            self.pos[x as usize] = ABSENT;
        }
        self.items.clear();
    }

    #[inline]
    pub fn as_slice(&self) -> &[u32] {
        &self.items
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.items.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn sorted(&self) -> Vec<u32> {
        let mut v = self.items.clone();
        v.sort_unstable();
        v
    }
}

/// Mutable solver state over a shared formula.
#[derive(Debug, Clone)]
pub struct SearchState<'f> {
    formula: &'f Formula,
    values: Vec<bool>,
    flip_stamp: Vec<u64>,
    step: u64,
    hard_weight: Vec<f64>,
    max_hard_weight: f64,
    spb: SpbConstraint,
    current_obj: u64,
    sat_count: Vec<u32>,
    sat_xor: Vec<u32>,
    falsified_hard: IndexedSet,
    falsified_soft: IndexedSet,
    hscore: Vec<f64>,
    softdelta: Vec<i64>,
    positive: IndexedSet,
}

impl<'f> SearchState<'f> {
    /// Builds the state for `assignment` with every hard weight and `w(SPB)` at 1.
    pub fn new(formula: &'f Formula, assignment: Assignment) -> Self {
        let hard_weight = vec![1.0; formula.num_hard()];
        Self::with_weights(formula, assignment, hard_weight, SpbConstraint::new())
    }

    pub fn with_weights(
        formula: &'f Formula,
        assignment: Assignment,
        hard_weight: Vec<f64>,
        spb: SpbConstraint,
    ) -> Self {
        assert_eq!(assignment.len(), formula.num_vars());
        assert_eq!(hard_weight.len(), formula.num_hard());
        let n = formula.num_vars();
        let m = formula.num_clauses();
        let step = assignment.flip_stamp.iter().copied().max().unwrap_or(0);
        let mut state = SearchState {
            formula,
            values: assignment.values,
            flip_stamp: assignment.flip_stamp,
            step,
            max_hard_weight: hard_weight.iter().copied().fold(0.0, f64::max),
            hard_weight,
            spb,
            current_obj: 0,
            sat_count: vec![0; m],
            sat_xor: vec![0; m],
            falsified_hard: IndexedSet::with_universe(m),
            falsified_soft: IndexedSet::with_universe(m),
            hscore: vec![0.0; n],
            softdelta: vec![0; n],
            positive: IndexedSet::with_universe(n),
        };
        for (c, clause) in formula.clauses().iter().enumerate() {
            for &lit in clause.lits() {
                if lit.is_true(&state.values) {
                    state.sat_count[c] += 1;
                    state.sat_xor[c] ^= lit.var().index() as u32;
                }
            }
            if state.sat_count[c] == 0 {
                if formula.is_hard(c) {
                    state.falsified_hard.insert(c);
                } else {
                    state.falsified_soft.insert(c);
                    state.current_obj += soft_weight(formula, c) as u64;
                }
            }
        }
        state.rebuild_scores();
        state
    }

    /// Recomputes every score and the positive-score set from the clause counters.
    pub(crate) fn rebuild_scores(&mut self) {
        self.hscore.iter_mut().for_each(|h| *h = 0.0);
        self.softdelta.iter_mut().for_each(|s| *s = 0);
        for (c, clause) in self.formula.clauses().iter().enumerate() {
            match self.sat_count[c] {
                0 => {
                    for lit in clause.lits() {
                        self.bump_score(c, lit.var().index(), 1);
                    }
                }
                1 => {
                    let crit = self.sat_xor[c] as usize;
                    self.bump_score(c, crit, -1);
                }
                _ => {}
            }
        }
        self.positive.clear();
        for v in 0..self.values.len() {
            self.refresh(v);
        }
    }

    /// Builds a state purely from the definitions, without make/break
    /// bookkeeping. Used as a test oracle.
    pub fn recompute_from_scratch(
        formula: &'f Formula,
        assignment: &Assignment,
        hard_weight: &[f64],
        spb: SpbConstraint,
    ) -> Self {
        let values = assignment.values.clone();
        let n = formula.num_vars();
        let m = formula.num_clauses();
        let mut sat_count = vec![0u32; m];
        let mut sat_xor = vec![0u32; m];
        let mut falsified_hard = IndexedSet::with_universe(m);
        let mut falsified_soft = IndexedSet::with_universe(m);
        for (c, clause) in formula.clauses().iter().enumerate() {
            let true_vars: Vec<u32> = clause
                .lits()
                .iter()
                .filter(|l| l.is_true(&values))
                .map(|l| l.var().index() as u32)
                .collect();
            sat_count[c] = true_vars.len() as u32;
            sat_xor[c] = true_vars.iter().fold(0, |a, &b| a ^ b);
            if true_vars.is_empty() {
                if formula.is_hard(c) {
                    falsified_hard.insert(c);
                } else {
                    falsified_soft.insert(c);
                }
            }
        }
        let current_obj = formula.obj(&values);

        let falsified_hard_weight = |vals: &[bool]| -> f64 {
            formula
                .hard()
                .iter()
                .zip(hard_weight)
                .filter(|(c, _)| !c.is_satisfied_by(vals))
                .map(|(_, w)| *w)
                .sum()
        };
        let base_hard = falsified_hard_weight(&values);
        let mut hscore = vec![0.0; n];
        let mut softdelta = vec![0i64; n];
        let mut flipped = values.clone();
        for v in 0..n {
            flipped[v] = !flipped[v];
            hscore[v] = base_hard - falsified_hard_weight(&flipped);
            softdelta[v] = current_obj as i64 - formula.obj(&flipped) as i64;
            flipped[v] = !flipped[v];
        }

        let mut positive = IndexedSet::with_universe(n);
        for v in 0..n {
            if hscore[v] + spb.weight() * softdelta[v] as f64 > SCORE_EPSILON {
                positive.insert(v);
            }
        }

        SearchState {
            formula,
            values,
            flip_stamp: assignment.flip_stamp.clone(),
            step: assignment.flip_stamp.iter().copied().max().unwrap_or(0),
            hard_weight: hard_weight.to_vec(),
            max_hard_weight: hard_weight.iter().copied().fold(0.0, f64::max),
            spb,
            current_obj,
            sat_count,
            sat_xor,
            falsified_hard,
            falsified_soft,
            hscore,
            softdelta,
            positive,
        }
    }

    /// Compares every derived field against a state rebuilt from scratch.
    /// Counters must match exactly, float scores within `tolerance`.
    pub fn check_consistency(&self, tolerance: f64) -> Result<(), String> {
        let mut snapshot = self.assignment();
        snapshot.flip_stamp = self.flip_stamp.clone();
        let scratch =
            Self::recompute_from_scratch(self.formula, &snapshot, &self.hard_weight, self.spb);
        if self.sat_count != scratch.sat_count {
            return Err("sat_count mismatch".into());
        }
        for c in 0..self.sat_count.len() {
            if self.sat_count[c] == 1 && self.sat_xor[c] != scratch.sat_xor[c] {
                return Err(format!("critical variable mismatch in clause {c}"));
            }
        }
        if self.falsified_hard.sorted() != scratch.falsified_hard.sorted() {
            return Err("falsified hard set mismatch".into());
        }
        if self.falsified_soft.sorted() != scratch.falsified_soft.sorted() {
            return Err("falsified soft set mismatch".into());
        }
        if self.current_obj != scratch.current_obj {
            return Err(format!(
                "obj {} != scratch {}",
                self.current_obj, scratch.current_obj
            ));
        }
        for v in 0..self.values.len() {
            if self.softdelta[v] != scratch.softdelta[v] {
                return Err(format!(
                    "softdelta[{v}] {} != scratch {}",
                    self.softdelta[v], scratch.softdelta[v]
                ));
            }
            if (self.hscore[v] - scratch.hscore[v]).abs() > tolerance {
                return Err(format!(
                    "hscore[{v}] {} != scratch {}",
                    self.hscore[v], scratch.hscore[v]
                ));
            }
        }
        // Membership is decided on the cached scores, so compare against a
        // fresh scan of this state's own scores.
        let expected: Vec<u32> = (0..self.values.len())
            .filter(|&v| self.score(Var::new(v)) > SCORE_EPSILON)
            .map(|v| v as u32)
            .collect();
        if self.positive.sorted() != expected {
            return Err("positive-score set mismatch".into());
        }
        if self.max_hard_weight < self.hard_weight.iter().copied().fold(0.0, f64::max) {
            return Err("stale maximum hard weight".into());
        }
        Ok(())
    }

    #[inline]
    fn bump_score(&mut self, c: ClauseId, v: usize, sign: i64) {
        if self.formula.is_hard(c) {
            self.hscore[v] += sign as f64 * self.hard_weight[c];
        } else {
            self.softdelta[v] += sign * soft_weight(self.formula, c);
        }
    }

    #[inline]
    fn refresh(&mut self, v: usize) {
        if self.score_at(v) > SCORE_EPSILON {
            self.positive.insert(v);
        } else {
            self.positive.remove(v);
        }
    }

    #[inline]
    fn adjust(&mut self, c: ClauseId, v: usize, sign: i64) {
        self.bump_score(c, v, sign);
        self.refresh(v);
    }

    fn adjust_all(&mut self, c: ClauseId, sign: i64) {
        let formula = self.formula;
        for lit in formula.clause(c).lits() {
            self.adjust(c, lit.var().index(), sign);
        }
    }

    /// Flips `var`, updating all derived data in time proportional to its occurrences.
    pub fn flip(&mut self, var: Var) {
        let formula = self.formula;
        let v = var.index();
        self.step += 1;
        self.flip_stamp[v] = self.step;
        let new_value = !self.values[v];
        self.values[v] = new_value;
        let made_true = Lit::new(var, new_value);

        for &c in formula.occurrences(made_true) {
            let c = c as usize;
            let before = self.sat_count[c];
            let old_xor = self.sat_xor[c];
            self.sat_count[c] = before + 1;
            self.sat_xor[c] = old_xor ^ v as u32;
            match before {
                0 => {
                    self.mark_satisfied(c);
                    self.adjust_all(c, -1);
                    self.adjust(c, v, -1);
                }
                1 => self.adjust(c, old_xor as usize, 1),
                _ => {}
            }
        }

        for &c in formula.occurrences(!made_true) {
            let c = c as usize;
            let before = self.sat_count[c];
            self.sat_count[c] = before - 1;
            self.sat_xor[c] ^= v as u32;
            match before {
                1 => {
                    self.mark_falsified(c);
                    self.adjust(c, v, 1);
                    self.adjust_all(c, 1);
                }
                2 => {
                    let crit = self.sat_xor[c] as usize;
                    self.adjust(c, crit, -1);
                }
                _ => {}
            }
        }
    }

    fn mark_satisfied(&mut self, c: ClauseId) {
        if self.formula.is_hard(c) {
            self.falsified_hard.remove(c);
        } else {
            self.falsified_soft.remove(c);
            self.current_obj -= soft_weight(self.formula, c) as u64;
        }
    }

    fn mark_falsified(&mut self, c: ClauseId) {
        if self.formula.is_hard(c) {
            self.falsified_hard.insert(c);
        } else {
            self.falsified_soft.insert(c);
            self.current_obj += soft_weight(self.formula, c) as u64;
        }
    }

    /// Sets the dynamic weight of hard clause `c`, updating affected scores.
    pub(crate) fn set_hard_weight(&mut self, c: ClauseId, weight: f64) {
        debug_assert!(self.formula.is_hard(c));
        let diff = weight - self.hard_weight[c];
        self.hard_weight[c] = weight;
        self.max_hard_weight = self.max_hard_weight.max(weight);
        match self.sat_count[c] {
            0 => {
                let formula = self.formula;
                for lit in formula.clause(c).lits() {
                    let u = lit.var().index();
                    self.hscore[u] += diff;
                    self.refresh(u);
                }
            }
            1 => {
                let u = self.sat_xor[c] as usize;
                self.hscore[u] -= diff;
                self.refresh(u);
            }
            _ => {}
        }
    }

    /// Sets `w(SPB)`. Increases only re-examine variables that can hold a
    /// positive `softdelta` (those in falsified soft clauses) plus current
    /// members of the positive set; decreases rebuild the set.
    pub(crate) fn set_spb_weight(&mut self, weight: f64) {
        let old = self.spb.weight();
        self.spb.set_weight(weight);
        if weight >= old {
            let formula = self.formula;
            for i in 0..self.falsified_soft.len() {
                let c = self.falsified_soft.as_slice()[i] as usize;
                for lit in formula.clause(c).lits() {
                    self.refresh(lit.var().index());
                }
            }
            let members: Vec<u32> = self.positive.as_slice().to_vec();
            for v in members {
                self.refresh(v as usize);
            }
        } else {
            self.positive.clear();
            for v in 0..self.values.len() {
                self.refresh(v);
            }
        }
    }

    /// Multiplies every dynamic weight by `factor`, clamping below at 1, and
    /// rebuilds all scores.
    pub(crate) fn scale_weights(&mut self, factor: f64) {
        for w in &mut self.hard_weight {
            *w = (*w * factor).max(1.0);
        }
        self.max_hard_weight = self.hard_weight.iter().copied().fold(0.0, f64::max);
        let spb_weight = (self.spb.weight() * factor).max(1.0);
        self.spb.set_weight(spb_weight);
        self.rebuild_scores();
    }

    /// Records a new incumbent cost in the SPB constraint.
    pub fn update_spb_bound(&mut self, new_cost: u64) {
        self.spb.update_bound(new_cost);
    }

    pub fn formula(&self) -> &'f Formula {
        self.formula
    }

    #[inline]
    fn score_at(&self, v: usize) -> f64 {
        self.hscore[v] + self.spb.weight() * self.softdelta[v] as f64
    }

    /// Decrease of the total dynamic weight of falsified hard clauses when flipping `var`.
    #[inline]
    pub fn hscore(&self, var: Var) -> f64 {
        self.hscore[var.index()]
    }

    /// `obj(A) - obj(A')` for the assignment `A'` with `var` flipped.
    #[inline]
    pub fn softdelta(&self, var: Var) -> i64 {
        self.softdelta[var.index()]
    }

    #[inline]
    pub fn spbscore(&self, var: Var) -> f64 {
        self.spb.weight() * self.softdelta[var.index()] as f64
    }

    #[inline]
    pub fn score(&self, var: Var) -> f64 {
        self.score_at(var.index())
    }

    #[inline]
    pub fn value(&self, var: Var) -> bool {
        self.values[var.index()]
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    #[inline]
    pub fn flip_stamp(&self, var: Var) -> u64 {
        self.flip_stamp[var.index()]
    }

    /// Number of flips performed so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Copy of the current assignment including flip stamps.
    pub fn assignment(&self) -> Assignment {
        Assignment {
            values: self.values.clone(),
            flip_stamp: self.flip_stamp.clone(),
        }
    }

    pub fn obj(&self) -> u64 {
        self.current_obj
    }

    pub fn is_feasible(&self) -> bool {
        self.falsified_hard.is_empty()
    }

    pub fn cost(&self) -> Cost {
        if self.is_feasible() {
            Cost::Finite(self.current_obj)
        } else {
            Cost::Infinite
        }
    }

    /// Ids of falsified hard clauses.
    pub fn falsified_hard(&self) -> &[u32] {
        self.falsified_hard.as_slice()
    }

    /// Clause ids (in the formula's numbering) of falsified soft clauses.
    pub fn falsified_soft(&self) -> &[u32] {
        self.falsified_soft.as_slice()
    }

    /// Variables whose score exceeds [`SCORE_EPSILON`].
    pub fn positive_vars(&self) -> &[u32] {
        self.positive.as_slice()
    }

    pub fn sat_count(&self, c: ClauseId) -> u32 {
        self.sat_count[c]
    }

    pub fn hard_weights(&self) -> &[f64] {
        &self.hard_weight
    }

    pub fn hard_weight(&self, c: ClauseId) -> f64 {
        self.hard_weight[c]
    }

    pub fn max_hard_weight(&self) -> f64 {
        self.max_hard_weight
    }

    pub fn spb(&self) -> &SpbConstraint {
        &self.spb
    }
}

#[inline]
fn soft_weight(formula: &Formula, c: ClauseId) -> i64 {
    formula.clause(c).soft_weight().unwrap_or(0) as i64
}
