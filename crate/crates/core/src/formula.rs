//! Immutable (weighted) partial MaxSAT instances.
//!
//! A [`Formula`] stores hard clauses followed by soft clauses in a single clause
//! array, so a clause id below [`Formula::num_hard`] always refers to a hard clause.
//! Literals are normalized on construction: duplicates are removed and tautologies
//! are dropped (a dropped soft clause does not count towards the total soft weight).

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound for the sum of all soft weights (and for any single weight).
pub const MAX_TOTAL_SOFT_WEIGHT: u64 = i64::MAX as u64;

/// Largest variable index accepted when the file carries no header.
const MAX_VAR_INDEX: u64 = (u32::MAX >> 1) as u64;

/// Identifier of a clause inside a [`Formula`].
pub type ClauseId = usize;

/// A propositional variable, 0-based internally and 1-based in DIMACS text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    pub fn new(index: usize) -> Self {
        Var(index as u32)
    }

    pub fn from_dimacs(idx: u32) -> Self {
        assert!(idx > 0, "DIMACS variables start at 1");
        Var(idx - 1)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn to_dimacs(self) -> u32 {
        self.0 + 1
    }

    pub fn pos(self) -> Lit {
        Lit::new(self, true)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Lit {
        Lit::new(self, false)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.to_dimacs())
    }
}

/// A literal, encoded as `2 * var + negated`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    #[inline]
    pub fn new(var: Var, positive: bool) -> Self {
        Lit((var.0 << 1) | (!positive as u32))
    }

    /// Converts a non-zero DIMACS integer into a literal.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 || value.unsigned_abs() > MAX_VAR_INDEX {
            return None;
        }
        let var = Var::from_dimacs(value.unsigned_abs() as u32);
        Some(Lit::new(var, value > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var().to_dimacs() as i64;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    #[inline]
    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// Dense index usable for per-literal tables.
    #[inline]
    pub fn code(self) -> usize {
        self.0 as usize
    }

    /// Whether the literal is true under `values`.
    #[inline]
    pub fn is_true(self, values: &[bool]) -> bool {
        values[self.var().index()] == self.is_positive()
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A normalized clause. `weight` is `None` for hard clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    lits: Vec<Lit>,
    weight: Option<u64>,
}

impl Clause {
    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn is_hard(&self) -> bool {
        self.weight.is_none()
    }

    /// Original weight of a soft clause.
    pub fn soft_weight(&self) -> Option<u64> {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn is_satisfied_by(&self, values: &[bool]) -> bool {
        self.lits.iter().any(|l| l.is_true(values))
    }
}

/// Cost of an assignment: the falsified soft weight if every hard clause is
/// satisfied, infinite otherwise. `Finite(_) < Infinite`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "Option<u64>", from = "Option<u64>")]
pub enum Cost {
    Finite(u64),
    Infinite,
}

impl Cost {
    pub fn finite(self) -> Option<u64> {
        match self {
            Cost::Finite(c) => Some(c),
            Cost::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Cost::Finite(_))
    }
}

impl From<Cost> for Option<u64> {
    fn from(c: Cost) -> Self {
        c.finite()
    }
}

impl From<Option<u64>> for Cost {
    fn from(c: Option<u64>) -> Self {
        c.map_or(Cost::Infinite, Cost::Finite)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Finite(c) => write!(f, "{c}"),
            Cost::Infinite => f.write_str("inf"),
        }
    }
}

/// A complete assignment together with per-variable flip stamps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub values: Vec<bool>,
    /// Step at which each variable was last flipped (0 = never).
    pub flip_stamp: Vec<u64>,
}

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        let n = values.len();
        Assignment {
            values,
            flip_stamp: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, var: Var) -> bool {
        self.values[var.index()]
    }

    /// MSE-style solution line payload: one `0`/`1` per variable.
    pub fn to_bitstring(&self) -> String {
        self.values
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

/// Errors raised while assembling a formula from clauses.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("variable {var} out of range 1..={num_vars}")]
    VarOutOfRange { var: u64, num_vars: usize },
    #[error("soft clause weight must be positive")]
    ZeroWeight,
    #[error("total soft weight exceeds {MAX_TOTAL_SOFT_WEIGHT}")]
    WeightOverflow,
}

/// Incremental constructor that normalizes clauses as they are added.
#[derive(Debug, Clone)]
pub struct FormulaBuilder {
    declared_vars: Option<usize>,
    max_var: usize,
    hard: Vec<Vec<Lit>>,
    soft: Vec<(u64, Vec<Lit>)>,
    total_soft_weight: u64,
}

impl FormulaBuilder {
    /// `num_vars = None` lets the variable count grow with the largest index seen.
    pub fn new(num_vars: Option<usize>) -> Self {
        FormulaBuilder {
            declared_vars: num_vars,
            max_var: 0,
            hard: Vec::new(),
            soft: Vec::new(),
            total_soft_weight: 0,
        }
    }

    fn check_vars(&mut self, lits: &[Lit]) -> Result<(), BuildError> {
        for lit in lits {
            let var = lit.var().to_dimacs() as usize;
            if let Some(n) = self.declared_vars {
                if var > n {
                    return Err(BuildError::VarOutOfRange {
                        var: var as u64,
                        num_vars: n,
                    });
                }
            }
            self.max_var = self.max_var.max(var);
        }
        Ok(())
    }

    pub fn add_hard(&mut self, lits: impl IntoIterator<Item = Lit>) -> Result<(), BuildError> {
        let lits: Vec<Lit> = lits.into_iter().collect();
        self.check_vars(&lits)?;
        if let Some(lits) = normalize(lits) {
            self.hard.push(lits);
        }
        Ok(())
    }

    pub fn add_soft(
        &mut self,
        weight: u64,
        lits: impl IntoIterator<Item = Lit>,
    ) -> Result<(), BuildError> {
        if weight == 0 {
            return Err(BuildError::ZeroWeight);
        }
        let lits: Vec<Lit> = lits.into_iter().collect();
        self.check_vars(&lits)?;
        if let Some(lits) = normalize(lits) {
            let total = self
                .total_soft_weight
                .checked_add(weight)
                .filter(|&t| t <= MAX_TOTAL_SOFT_WEIGHT)
                .ok_or(BuildError::WeightOverflow)?;
            self.total_soft_weight = total;
            self.soft.push((weight, lits));
        }
        Ok(())
    }

    pub fn build(self) -> Formula {
        let num_vars = self.declared_vars.unwrap_or(self.max_var);
        let num_hard = self.hard.len();
        let clauses: Vec<Clause> = self
            .hard
            .into_iter()
            .map(|lits| Clause { lits, weight: None })
            .chain(self.soft.into_iter().map(|(w, lits)| Clause {
                lits,
                weight: Some(w),
            }))
            .collect();
        let mut occurrences = vec![Vec::new(); 2 * num_vars];
        for (id, clause) in clauses.iter().enumerate() {
            for lit in &clause.lits {
                occurrences[lit.code()].push(id as u32);
            }
        }
        Formula {
            num_vars,
            num_hard,
            clauses,
            occurrences,
            total_soft_weight: self.total_soft_weight,
        }
    }
}

/// Removes duplicate literals (keeping first occurrences) and returns `None`
/// for tautologies.
fn normalize(mut lits: Vec<Lit>) -> Option<Vec<Lit>> {
    let mut sorted = lits.clone();
    sorted.sort_unstable();
    let mut has_dup = false;
    for pair in sorted.windows(2) {
        if pair[0].var() == pair[1].var() {
            if pair[0] != pair[1] {
                return None;
            }
            has_dup = true;
        }
    }
    if has_dup {
        let mut seen = std::collections::HashSet::with_capacity(lits.len());
        lits.retain(|l| seen.insert(*l));
    }
    Some(lits)
}

/// A weighted partial MaxSAT instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    num_vars: usize,
    num_hard: usize,
    clauses: Vec<Clause>,
    /// Clause ids per literal code.
    occurrences: Vec<Vec<u32>>,
    total_soft_weight: u64,
}

impl Formula {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_hard(&self) -> usize {
        self.num_hard
    }

    pub fn num_soft(&self) -> usize {
        self.clauses.len() - self.num_hard
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    #[inline]
    pub fn clause(&self, id: ClauseId) -> &Clause {
        &self.clauses[id]
    }

    pub fn hard(&self) -> &[Clause] {
        &self.clauses[..self.num_hard]
    }

    pub fn soft(&self) -> &[Clause] {
        &self.clauses[self.num_hard..]
    }

    #[inline]
    pub fn is_hard(&self, id: ClauseId) -> bool {
        id < self.num_hard
    }

    /// Ids of clauses containing `lit`.
    #[inline]
    pub fn occurrences(&self, lit: Lit) -> &[u32] {
        &self.occurrences[lit.code()]
    }

    pub fn total_soft_weight(&self) -> u64 {
        self.total_soft_weight
    }

    /// True when every soft clause has weight 1 (a PMS instance).
    pub fn is_unweighted(&self) -> bool {
        self.soft().iter().all(|c| c.weight == Some(1))
    }

    pub fn has_empty_hard_clause(&self) -> bool {
        self.hard().iter().any(Clause::is_empty)
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.num_vars).map(Var::new)
    }

    /// Total weight of soft clauses falsified by `values`.
    pub fn obj(&self, values: &[bool]) -> u64 {
        assert_eq!(values.len(), self.num_vars, "assignment must be complete");
        self.soft()
            .iter()
            .filter(|c| !c.is_satisfied_by(values))
            .map(|c| c.weight.unwrap_or(0))
            .sum()
    }

    pub fn is_feasible(&self, values: &[bool]) -> bool {
        assert_eq!(values.len(), self.num_vars, "assignment must be complete");
        self.hard().iter().all(|c| c.is_satisfied_by(values))
    }

    pub fn cost(&self, values: &[bool]) -> Cost {
        if self.is_feasible(values) {
            Cost::Finite(self.obj(values))
        } else {
            Cost::Infinite
        }
    }

    /// Serializes the formula as WCNF text.
    pub fn write_wcnf<W: Write>(&self, format: WcnfFormat, mut out: W) -> io::Result<()> {
        let write_lits = |out: &mut W, c: &Clause| -> io::Result<()> {
            for l in &c.lits {
                write!(out, " {l}")?;
            }
            writeln!(out, " 0")
        };
        match format {
            WcnfFormat::Old => {
                let top = self.total_soft_weight + 1;
                writeln!(
                    out,
                    "p wcnf {} {} {}",
                    self.num_vars,
                    self.clauses.len(),
                    top
                )?;
                for c in &self.clauses {
                    write!(out, "{}", c.weight.unwrap_or(top))?;
                    write_lits(&mut out, c)?;
                }
            }
            WcnfFormat::New => {
                for c in &self.clauses {
                    match c.weight {
                        Some(w) => write!(out, "{w}")?,
                        None => write!(out, "h")?,
                    }
                    write_lits(&mut out, c)?;
                }
            }
        }
        Ok(())
    }
}

/// The two WCNF dialects used by the MaxSAT Evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcnfFormat {
    /// `p wcnf <vars> <clauses> <top>` header; weight >= top marks hard clauses.
    Old,
    /// Headerless; hard clauses start with `h`.
    New,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: clause is missing its 0 terminator")]
    MissingTerminator { line: usize },
    #[error("line {line}: variable {var} out of range 1..={num_vars}")]
    VarOutOfRange {
        line: usize,
        var: u64,
        num_vars: usize,
    },
    #[error("line {line}: soft clause weight must be positive")]
    ZeroWeight { line: usize },
    #[error("line {line}: total soft weight exceeds {MAX_TOTAL_SOFT_WEIGHT}")]
    WeightOverflow { line: usize },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ParseError {
    fn from_build(err: BuildError, line: usize) -> Self {
        match err {
            BuildError::VarOutOfRange { var, num_vars } => ParseError::VarOutOfRange {
                line,
                var,
                num_vars,
            },
            BuildError::ZeroWeight => ParseError::ZeroWeight { line },
            BuildError::WeightOverflow => ParseError::WeightOverflow { line },
        }
    }
}

struct Header {
    num_vars: usize,
    num_clauses: usize,
    /// `None` for the legacy header without a top weight (all clauses soft).
    top: Option<u64>,
}

fn parse_header(line_no: usize, line: &str) -> Result<Header, ParseError> {
    let bad = |reason: &str| ParseError::MalformedHeader {
        line: line_no,
        reason: reason.to_string(),
    };
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("p") {
        return Err(bad("expected `p`"));
    }
    if tokens.next() != Some("wcnf") {
        return Err(bad("only `p wcnf` is supported"));
    }
    let num_vars = tokens
        .next()
        .and_then(|t| t.parse::<u64>().ok())
        .filter(|&n| n <= MAX_VAR_INDEX)
        .ok_or_else(|| bad("bad variable count"))?;
    let num_clauses = tokens
        .next()
        .and_then(|t| t.parse::<usize>().ok())
        .ok_or_else(|| bad("bad clause count"))?;
    let top = match tokens.next() {
        None => None,
        Some(t) => Some(
            t.parse::<u64>()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| bad("bad top weight"))?,
        ),
    };
    if tokens.next().is_some() {
        return Err(bad("trailing tokens"));
    }
    Ok(Header {
        num_vars: num_vars as usize,
        num_clauses,
        top,
    })
}

/// Parses the literal list of a clause line (everything after the weight).
fn parse_lits<'a>(
    line_no: usize,
    mut tokens: impl Iterator<Item = &'a str>,
) -> Result<Vec<Lit>, ParseError> {
    let mut lits = Vec::new();
    loop {
        let Some(tok) = tokens.next() else {
            return Err(ParseError::MissingTerminator { line: line_no });
        };
        let value: i64 = tok.parse().map_err(|_| ParseError::InvalidToken {
            line: line_no,
            token: tok.to_string(),
        })?;
        if value == 0 {
            break;
        }
        let lit = Lit::from_dimacs(value).ok_or(ParseError::VarOutOfRange {
            line: line_no,
            var: value.unsigned_abs(),
            num_vars: MAX_VAR_INDEX as usize,
        })?;
        lits.push(lit);
    }
    if let Some(tok) = tokens.next() {
        return Err(ParseError::InvalidToken {
            line: line_no,
            token: tok.to_string(),
        });
    }
    Ok(lits)
}

/// Parses a WCNF instance, auto-detecting the old (`p wcnf` header) and new
/// (`h`-prefixed hard clauses) formats.
pub fn parse_wcnf<R: BufRead>(reader: R) -> Result<Formula, ParseError> {
    let mut builder: Option<FormulaBuilder> = None;
    let mut header: Option<Header> = None;
    let mut seen_clauses = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            if builder.is_some() {
                return Err(ParseError::MalformedHeader {
                    line: line_no,
                    reason: "header must precede all clauses".into(),
                });
            }
            let h = parse_header(line_no, trimmed)?;
            builder = Some(FormulaBuilder::new(Some(h.num_vars)));
            header = Some(h);
            continue;
        }

        let b = builder.get_or_insert_with(|| FormulaBuilder::new(None));
        let mut tokens = trimmed.split_whitespace();
        let first = tokens.next().expect("non-empty line");
        seen_clauses += 1;

        let result = match &header {
            None if first == "h" => {
                let lits = parse_lits(line_no, tokens)?;
                b.add_hard(lits)
            }
            _ => {
                let weight: u64 = first.parse().map_err(|_| ParseError::InvalidToken {
                    line: line_no,
                    token: first.to_string(),
                })?;
                let lits = parse_lits(line_no, tokens)?;
                match header.as_ref().and_then(|h| h.top) {
                    Some(top) if weight >= top => b.add_hard(lits),
                    _ => b.add_soft(weight, lits),
                }
            }
        };
        result.map_err(|e| ParseError::from_build(e, line_no))?;
    }

    if let Some(h) = &header {
        if h.num_clauses != seen_clauses {
            log::warn!(
                "header declares {} clauses but {} were read",
                h.num_clauses,
                seen_clauses
            );
        }
    }
    Ok(builder.unwrap_or_else(|| FormulaBuilder::new(None)).build())
}

pub fn parse_wcnf_str(text: &str) -> Result<Formula, ParseError> {
    parse_wcnf(text.as_bytes())
}

pub fn parse_wcnf_file(path: impl AsRef<std::path::Path>) -> Result<Formula, ParseError> {
    let file = std::fs::File::open(path)?;
    parse_wcnf(io::BufReader::new(file))
}
