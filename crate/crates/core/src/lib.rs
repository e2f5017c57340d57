//! Stochastic local search for (weighted) partial MaxSAT driven by a dynamically
//! weighted soft-conflict pseudo-Boolean constraint.
//!
//! The soft clauses are scored as one constraint `obj(A) < cost(A*)` whose weight
//! grows multiplicatively each time a local optimum violates it, while hard
//! clauses keep additive dynamic weights.
//!
//! ```
//! use spb_maxsat::{parse_wcnf_str, solve, Cost, SolverConfig};
//!
//! let f = parse_wcnf_str("h 1 2 0\n2 -1 0\n5 -2 0\n").unwrap();
//! let result = solve(&f, &SolverConfig::with_max_flips(10_000, 1)).unwrap();
//! assert_eq!(result.best_cost, Cost::Finite(2));
//! ```

pub mod analysis;
pub mod formula;
pub mod harness;
pub mod init;
pub mod oracle;
pub mod protocol;
pub mod search;
pub mod state;
pub mod weighting;

pub use formula::{
    parse_wcnf, parse_wcnf_file, parse_wcnf_str, Assignment, Clause, Cost, Formula, Lit,
    ParseError, Var, WcnfFormat,
};
pub use oracle::{brute_force_opt, Optimum};
pub use search::{solve, solve_with_observer, Preset, SearchObserver, SolveResult, SolverConfig};
pub use state::SearchState;
pub use weighting::{SpbConstraint, WeightingConfig, WeightingMode};
