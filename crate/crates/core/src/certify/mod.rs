//! Numerical certification of the dual map, the `J`/`I` equivalence, the
//! coercivity exponents and energy negativity.
//!
//! Margins are signed so that a nonnegative value means the property holds.

mod coercivity;
mod dual;
mod equivalence;
mod probe;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use coercivity::{coercivity_report, exponent_sweep, Exponents};
pub use dual::{certify_dual, MIN_SAMPLES};
pub use equivalence::{check_equivalence, equivalence_errors, EquivalenceSample};
pub use probe::{default_widths, lambda_threshold_scan, negativity_probe, probe_curve, trial_field, ThresholdScan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub samples_tested: usize,
    pub worst_margin: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, samples_tested: usize, worst_margin: f64) -> Self {
        Self {
            name: name.into(),
            samples_tested,
            worst_margin,
            // NaN margins fail
            pass: worst_margin >= 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub checks: Vec<Check>,
    pub constants: BTreeMap<String, f64>,
    /// Warnings and classifications that are not pass/fail.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CertReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for CertReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  {:>9}  {:>14}  result", "check", "samples", "worst margin")?;
        for c in &self.checks {
            let verdict = if c.pass { "pass" } else { "FAIL" };
            writeln!(f, "{:<width$}  {:>9}  {:>14.6e}  {verdict}", c.name, c.samples_tested, c.worst_margin)?;
        }
        for (name, value) in &self.constants {
            writeln!(f, "{name} = {value:.12e}")?;
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}

/// Evaluates `op` on every item across the available cores, keeping order.
pub(crate) fn parallel_map<T: Sync, R: Send>(items: &[T], op: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if threads <= 1 {
        return items.iter().map(op).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let op = &op;
                scope.spawn(move || part.iter().map(op).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
