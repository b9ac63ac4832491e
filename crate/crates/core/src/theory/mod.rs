//! Numerical checks of the training dynamics: singular-value flow of the
//! regularized factorization, convergence of the learned Laplacian on a fixed
//! matrix, conservation of factor balance, and finite-difference gradient
//! checks.

mod balance;
mod gradcheck;
mod laplacian_flow;
mod sigma;

pub use balance::{verify_balance, BalanceParams};
pub use gradcheck::{central_difference, gradcheck_suite, relative_error};
pub use laplacian_flow::{verify_theorem2, LaplacianFlow, LaplacianFlowParams};
pub use sigma::{
    verify_theorem1, GammaVariant, SigmaDynamics, SigmaDynamicsRecord, SigmaParams, SigmaTarget,
};

use std::fmt::Write as _;

/// A named pass/fail outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Per-checkpoint table plus the checks derived from it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowReport {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub checks: Vec<Check>,
}

impl FlowReport {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn verdict_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )
            })
            .collect()
    }

    /// Table as CSV followed by `#`-prefixed verdict lines.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        for line in self.verdict_lines() {
            writeln!(out, "# {line}").expect("writing to a String");
        }
        let n_pass = self.checks.iter().filter(|c| c.passed).count();
        writeln!(
            out,
            "# verdict: {} ({n_pass}/{} checks passed)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.checks.len()
        )
        .expect("writing to a String");
        out
    }
}
