//! Exact maximization of the reduced binary programs.

mod bnb;
mod exhaustive;
mod external;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::copula_ip::{BinaryProgram, LinearizedProgram};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use bnb::{solve_branch_and_bound, BranchAndBound};
pub use exhaustive::{solve_exhaustive, solve_exhaustive_linearized, DEFAULT_EXHAUSTIVE_CAP};
pub use external::{import_solution, roundtrip_external, solution_for};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    CapacityExceeded,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::CapacityExceeded => "capacity_exceeded",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult<S> {
    pub status: SolveStatus,
    /// Best objective found (proven optimal when `status` is `Optimal`).
    pub optimal_value: Option<S>,
    /// Values of the base program's free variables.
    pub assignment: Option<Vec<bool>>,
    pub nodes_explored: u64,
    pub wall_time: Duration,
    pub message: Option<String>,
}

impl<S: Scalar> SolveResult<S> {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value_f64(&self) -> Option<f64> {
        self.optimal_value.as_ref().map(Scalar::as_f64)
    }

    /// Variable name to value.
    pub fn assignment_map(&self, program: &BinaryProgram<S>) -> BTreeMap<String, bool> {
        self.assignment
            .iter()
            .flat_map(|x| program.variables.iter().zip(x).map(|(v, &b)| (v.name.clone(), b)))
            .collect()
    }

    /// Optimal assignment, or the matching error.
    pub fn require_optimal(&self) -> Result<(&[bool], &S)> {
        match (self.status, &self.assignment, &self.optimal_value) {
            (SolveStatus::Optimal, Some(x), Some(v)) => Ok((x, v)),
            (SolveStatus::Infeasible, _, _) => Err(Error::Infeasible(
                self.message.clone().unwrap_or_else(|| "no assignment satisfies the constraints".into()),
            )),
            _ => Err(Error::SolverCapacity(self.message.clone().unwrap_or_else(|| "search limit reached".into()))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exhaustive,
    #[default]
    Bnb,
    External,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(SolverKind::Exhaustive),
            "bnb" => Ok(SolverKind::Bnb),
            "external" => Ok(SolverKind::External),
            other => Err(Error::Parameter(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
    /// Largest free-variable count accepted by the exhaustive solver.
    pub exhaustive_cap: usize,
    /// Starting incumbent for branch-and-bound, used when feasible.
    pub warm_start: Option<Vec<bool>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { time_limit: None, node_limit: None, exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP, warm_start: None }
    }
}

/// Dispatches to the internal solvers. `External` has no in-process solve.
pub fn solve<S: Scalar>(kind: SolverKind, program: &LinearizedProgram<S>, options: &SolverOptions) -> Result<SolveResult<S>> {
    match kind {
        SolverKind::Exhaustive => Ok(solve_exhaustive(&program.base, options.exhaustive_cap)),
        SolverKind::Bnb => Ok(solve_branch_and_bound(program, options)),
        SolverKind::External => {
            Err(Error::Parameter("the external solver runs out of process; use export-lp and import-solution".into()))
        }
    }
}
