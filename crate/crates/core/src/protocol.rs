//! MaxSAT Evaluation output lines: `o <cost>` per improvement, then an `s`
//! status line and, for feasible runs, a `v` line with one 0/1 per variable.

use std::io::{self, Write};

use thiserror::Error;

use crate::formula::{Cost, Formula};
use crate::oracle::Optimum;
use crate::search::{
    solve_with_observer, ConfigError, Improvement, SearchObserver, SolveResult, SolverConfig,
};
use crate::state::SearchState;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output error: {0}")]
    Io(#[from] io::Error),
}

/// Streams `o` lines as the search improves.
struct OLineWriter<'w, W: Write> {
    out: &'w mut W,
    error: Option<io::Error>,
}

impl<W: Write> SearchObserver for OLineWriter<'_, W> {
    fn on_improvement(&mut self, improvement: &Improvement, _state: &SearchState<'_>) {
        if self.error.is_none() {
            let res = writeln!(self.out, "o {}", improvement.cost).and_then(|_| self.out.flush());
            if let Err(e) = res {
                self.error = Some(e);
            }
        }
    }
}

/// Writes the closing status (and solution) lines for a finished run.
pub fn write_solution<W: Write>(out: &mut W, result: &SolveResult) -> io::Result<()> {
    match &result.best_assignment {
        Some(a) => {
            writeln!(out, "s SATISFIABLE")?;
            writeln!(out, "v {}", a.to_bitstring())?;
        }
        None => writeln!(out, "s UNKNOWN")?,
    }
    out.flush()
}

/// Runs the solver, writing the full protocol transcript to `out`.
pub fn solve_to_protocol<W: Write>(
    formula: &Formula,
    cfg: &SolverConfig,
    out: &mut W,
) -> Result<SolveResult, SolveError> {
    let mut writer = OLineWriter { out, error: None };
    let result = solve_with_observer(formula, cfg, &mut writer)?;
    if let Some(e) = writer.error {
        return Err(e.into());
    }
    write_solution(out, &result)?;
    Ok(result)
}

pub fn write_oracle<W: Write>(out: &mut W, optimum: &Optimum) -> io::Result<()> {
    match optimum.cost {
        Cost::Finite(c) => writeln!(out, "o {c}")?,
        Cost::Infinite => writeln!(out, "s UNSATISFIABLE")?,
    }
    out.flush()
}

/// A parsed solver transcript.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    pub costs: Vec<u64>,
    pub status: Option<String>,
    pub values: Option<Vec<bool>>,
}

impl Transcript {
    pub fn parse(text: &str) -> Result<Transcript, String> {
        let mut t = Transcript::default();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("o ") {
                t.costs
                    .push(rest.parse().map_err(|_| format!("bad o line `{line}`"))?);
            } else if let Some(rest) = line.strip_prefix("s ") {
                t.status = Some(rest.to_string());
            } else if let Some(rest) = line.strip_prefix("v ") {
                let values = rest
                    .chars()
                    .map(|ch| match ch {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        _ => Err(format!("bad v line `{line}`")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                t.values = Some(values);
            } else if !line.starts_with('c') {
                return Err(format!("unexpected line `{line}`"));
            }
        }
        Ok(t)
    }
}
