//! Growth of the relative SPB weight increment under the adaptive rule.
//!
//! Model: `w(SPB)` starts at 1 and is raised by `w' = delta * (w + 1)`; the
//! average hard clause weight starts at 1 and grows by 1 per raise. For each
//! raise we report
//!
//! * `r_inc = (w' - w) / w`, the increase rate, and
//! * `i_inc = (w' - w) / (w + w_h)`, the increase relative to the combined weight,
//!
//! both evaluated with the weights held before the raise. Under `delta > 1`
//! both tend to `delta - 1`; under `delta = 1` both vanish like `1/n`.

use std::io::{self, Write};

use serde::Serialize;

use crate::weighting::adaptive_increase;

pub const CSV_HEADER: &str = "step,w_spb,r_inc,i_inc";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicsRow {
    /// 1-based index of the raise.
    pub step: u64,
    /// `w(SPB)` before this raise.
    pub w_spb: f64,
    pub r_inc: f64,
    pub i_inc: f64,
}

pub fn weight_dynamics(delta: f64, steps: u64) -> Vec<DynamicsRow> {
    assert!(delta >= 1.0, "delta must be at least 1");
    let mut w = 1.0f64;
    let mut w_hard = 1.0f64;
    (1..=steps)
        .map(|step| {
            let next = adaptive_increase(w, delta);
            let gain = next - w;
            let row = DynamicsRow {
                step,
                w_spb: w,
                r_inc: gain / w,
                i_inc: gain / (w + w_hard),
            };
            w = next;
            w_hard += 1.0;
            row
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[DynamicsRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.step, r.w_spb, r.r_inc, r.i_inc)?;
    }
    Ok(())
}
