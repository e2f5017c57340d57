//! Exhaustive enumeration for small instances.

use rayon::prelude::*;
use thiserror::Error;

use crate::formula::{Assignment, Cost, Formula};

pub const MAX_ORACLE_VARS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{num_vars} variables exceed the enumeration cap of {MAX_ORACLE_VARS}")]
    TooManyVariables { num_vars: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Optimum {
    pub cost: Cost,
    /// The minimizing assignment with the smallest bit pattern (x1 is bit 0).
    pub witness: Option<Assignment>,
}

/// Bitmask form of a clause: satisfied by `mask` iff `mask & pos != 0` or `!mask & neg != 0`.
struct MaskClause {
    pos: u32,
    neg: u32,
    weight: u64,
}

impl MaskClause {
    #[inline]
    fn satisfied(&self, mask: u32) -> bool {
        (mask & self.pos) != 0 || (!mask & self.neg) != 0
    }
}

fn to_masks(formula: &Formula, hard: bool) -> Vec<MaskClause> {
    let clauses = if hard { formula.hard() } else { formula.soft() };
    clauses
        .iter()
        .map(|c| {
            let mut mc = MaskClause {
                pos: 0,
                neg: 0,
                weight: c.soft_weight().unwrap_or(0),
            };
            for l in c.lits() {
                let bit = 1u32 << l.var().index();
                if l.is_positive() {
                    mc.pos |= bit;
                } else {
                    mc.neg |= bit;
                }
            }
            mc
        })
        .collect()
}

/// Minimum cost over all `2^n` assignments.
pub fn brute_force_opt(formula: &Formula) -> Result<Optimum, OracleError> {
    let n = formula.num_vars();
    if n > MAX_ORACLE_VARS {
        return Err(OracleError::TooManyVariables { num_vars: n });
    }
    let hard = to_masks(formula, true);
    let soft = to_masks(formula, false);

    let best = (0..1u32 << n)
        .into_par_iter()
        .filter(|&mask| hard.iter().all(|c| c.satisfied(mask)))
        .map(|mask| {
            let obj: u64 = soft
                .iter()
                .filter(|c| !c.satisfied(mask))
                .map(|c| c.weight)
                .sum();
            (obj, mask)
        })
        .min();

    Ok(match best {
        Some((cost, mask)) => Optimum {
            cost: Cost::Finite(cost),
            witness: Some(Assignment::new(
                (0..n).map(|i| mask >> i & 1 == 1).collect(),
            )),
        },
        None => Optimum {
            cost: Cost::Infinite,
            witness: None,
        },
    })
}
