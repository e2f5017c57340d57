#![allow(dead_code)]

use rand::rngs::SmallRng;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use spb_maxsat::formula::{Formula, FormulaBuilder, Lit, Var};

/// Parameters of the random instance families used across the test suites.
#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub vars: (usize, usize),
    pub clauses: (usize, usize),
    pub hard_fraction: (f64, f64),
    pub max_weight: u64,
    pub max_len: usize,
}

pub const ORACLE_SHAPE: InstanceShape = InstanceShape {
    vars: (8, 18),
    clauses: (10, 60),
    hard_fraction: (0.3, 0.7),
    max_weight: 10,
    max_len: 3,
};

/// Raw clause list: `(None, lits)` for hard clauses, `(Some(w), lits)` for soft.
pub type RawClauses = Vec<(Option<u64>, Vec<i64>)>;

/// Random instance whose hard clauses are all satisfied by a hidden assignment.
pub fn random_raw(seed: u64, shape: InstanceShape, weighted: bool) -> (usize, RawClauses) {
    let mut rng = SmallRng::seed_from_u64(seed);
    let n = rng.random_range(shape.vars.0..=shape.vars.1);
    let m = rng.random_range(shape.clauses.0..=shape.clauses.1);
    let hard_fraction = rng.random_range(shape.hard_fraction.0..=shape.hard_fraction.1);
    let planted: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let mut clauses = Vec::with_capacity(m);
    for _ in 0..m {
        let len = rng.random_range(1..=shape.max_len.min(n));
        let vars = sample(&mut rng, n, len);
        let mut lits: Vec<i64> = vars
            .iter()
            .map(|v| {
                let d = v as i64 + 1;
                if rng.random_bool(0.5) {
                    d
                } else {
                    -d
                }
            })
            .collect();
        if rng.random_bool(hard_fraction) {
            let satisfied = lits
                .iter()
                .any(|&l| planted[(l.unsigned_abs() - 1) as usize] == (l > 0));
            if !satisfied {
                let i = rng.random_range(0..lits.len());
                lits[i] = -lits[i];
            }
            clauses.push((None, lits));
        } else {
            let w = if weighted {
                rng.random_range(1..=shape.max_weight)
            } else {
                1
            };
            clauses.push((Some(w), lits));
        }
    }
    (n, clauses)
}

pub fn build(n: usize, clauses: &RawClauses) -> Formula {
    let mut b = FormulaBuilder::new(Some(n));
    for (w, lits) in clauses {
        let lits = lits.iter().map(|&l| Lit::from_dimacs(l).unwrap());
        match w {
            None => b.add_hard(lits).unwrap(),
            Some(w) => b.add_soft(*w, lits).unwrap(),
        }
    }
    b.build()
}

pub fn random_instance(seed: u64, shape: InstanceShape, weighted: bool) -> Formula {
    let (n, clauses) = random_raw(seed, shape, weighted);
    build(n, &clauses)
}

/// Old-format text with header `p wcnf n m top`.
pub fn old_format(n: usize, clauses: &RawClauses) -> String {
    let top: u64 = clauses.iter().filter_map(|c| c.0).sum::<u64>() + 1;
    let mut s = format!(
        "c random instance\np wcnf {} {} {}\n",
        n,
        clauses.len(),
        top
    );
    for (w, lits) in clauses {
        s.push_str(&w.unwrap_or(top).to_string());
        for l in lits {
            s.push_str(&format!(" {l}"));
        }
        s.push_str(" 0\n");
    }
    s
}

/// New-format text. The highest variable is mentioned in a comment-free way
/// only through clauses, so callers must make sure it occurs.
pub fn new_format(clauses: &RawClauses) -> String {
    let mut s = String::from("c random instance\n");
    for (w, lits) in clauses {
        match w {
            None => s.push('h'),
            Some(w) => s.push_str(&w.to_string()),
        }
        for l in lits {
            s.push_str(&format!(" {l}"));
        }
        s.push_str(" 0\n");
    }
    s
}

pub fn max_var(clauses: &RawClauses) -> usize {
    clauses
        .iter()
        .flat_map(|c| c.1.iter())
        .map(|l| l.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
}

pub fn var(i: u32) -> Var {
    Var::from_dimacs(i)
}
