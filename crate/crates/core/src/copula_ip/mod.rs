//! The variance-maximizing binary program over imputed potential outcomes.
//!
//! Variables are indicators `X[a][i][k] = 1{Y_i(a) = y_k}`. The full program
//! ([`ImputationProgram`]) holds all `2NK` of them together with pinning,
//! support, one-hot and marginal rows. [`presolve`] substitutes everything
//! determined by the data and yields a [`BinaryProgram`] over the free
//! counterfactual indicators, which [`linearize`] turns into a purely linear
//! 0/1 program.

mod constraints;
mod linearize;
mod lp_format;
mod objective;
mod presolve;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Arm, PotentialOutcomeTable, Slot};
use crate::error::{Error, Result};
use crate::estimators::EstimatorName;
use crate::scalar::{le_tol, Scalar};

pub use constraints::{build_constraints, default_epsilon, discrete_levels, CovariateLevels};
pub use linearize::{linearize, LinearizedProgram, Product};
pub use lp_format::{parse_solution, write_lp, write_lp_file, SolutionFile, CONST_VAR};
pub use objective::{
    build_objective_linear, build_objective_quadratic, linear_variance_matrix, quadratic_variance_matrix,
    ObjectiveForm, SlotQuadratic,
};
pub use presolve::presolve;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
        })
    }
}

/// Origin of a constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// Observed outcome of a unit in its realized arm.
    Pin { unit: usize },
    /// Support value excluded for an arm.
    Support { arm: Arm, unit: usize, k: usize },
    /// Exactly one support value per potential outcome.
    OneHot { arm: Arm, unit: usize },
    /// Imputed marginal close to the observed marginal; `sign` is 0 for `+`, 1 for `-`.
    Marginal { arm: Arm, k: usize, sign: u8, level: Option<usize> },
    /// One-hot row of a hand-built group.
    Group { group: usize },
    /// Product linearization link.
    Link { product: usize, which: u8 },
    /// Anything else (hand-built programs).
    Other,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint<S> {
    pub name: String,
    pub kind: RowKind,
    pub terms: Vec<(usize, S)>,
    pub relation: Relation,
    pub rhs: S,
}

impl<S: Scalar> LinearConstraint<S> {
    /// Rows that only say "one variable of this group is 1".
    pub fn is_group_row(&self) -> bool {
        matches!(self.kind, RowKind::OneHot { .. } | RowKind::Group { .. })
    }

    pub fn activity(&self, x: &[bool]) -> S {
        self.terms.iter().filter(|(v, _)| x[*v]).fold(S::zero(), |acc, (_, c)| acc + c.clone())
    }

    pub fn is_satisfied(&self, x: &[bool]) -> bool {
        let act = self.activity(x);
        match self.relation {
            Relation::Le => le_tol(&act, &self.rhs),
            Relation::Eq => le_tol(&act, &self.rhs) && le_tol(&self.rhs, &act),
        }
    }
}

/// Which family of marginal rows to emit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFlavor {
    /// Weights `Z/N1 - (1-Z)/N0`; requires equal treatment probabilities.
    EqualProbability,
    /// Weights `Z/P - (1-Z)/(1-P)` against `epsilon * N`.
    Generalized,
    /// Generalized weights within each level of a discrete covariate.
    Conditional { covariate: String },
}

impl ConstraintFlavor {
    pub fn tag(&self) -> &'static str {
        match self {
            ConstraintFlavor::EqualProbability => "equal_probability",
            ConstraintFlavor::Generalized => "generalized",
            ConstraintFlavor::Conditional { .. } => "conditional",
        }
    }
}

/// Index arithmetic for the full variable array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub k: usize,
    pub treated: Vec<bool>,
    /// Support index of each unit's observed outcome.
    pub observed_k: Vec<usize>,
}

impl Layout {
    pub fn var(&self, arm: Arm, unit: usize, k: usize) -> usize {
        Slot::new(unit, arm).index(self.n) * self.k + k
    }

    pub fn var_slot(&self, var: usize) -> (Slot, usize) {
        (Slot::from_index(var / self.k, self.n), var % self.k)
    }

    pub fn num_vars(&self) -> usize {
        2 * self.n * self.k
    }

    /// Entries pinned by the observed data: the realized arm of every unit.
    pub fn is_fixed(&self, arm: Arm, unit: usize) -> bool {
        arm == Arm::from_treated(self.treated[unit])
    }

    pub fn var_name(&self, var: usize) -> String {
        let (slot, k) = self.var_slot(var);
        format!("x_a{}_i{}_k{}", slot.arm.index(), slot.unit, k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramMetadata {
    pub epsilon: f64,
    pub flavor: ConstraintFlavor,
    pub estimator: EstimatorName,
}

/// The unreduced program over all `2NK` indicators.
#[derive(Clone, Debug, PartialEq)]
pub struct ImputationProgram<S> {
    pub layout: Layout,
    pub objective: ObjectiveForm<S>,
    pub constraints: Vec<LinearConstraint<S>>,
    pub metadata: ProgramMetadata,
}

impl<S: Scalar> ImputationProgram<S> {
    pub fn evaluate(&self, x: &[bool]) -> S {
        self.objective.evaluate(x)
    }

    pub fn violated_row(&self, x: &[bool]) -> Option<&LinearConstraint<S>> {
        self.constraints.iter().find(|c| !c.is_satisfied(x))
    }

    /// Indicator vector of a complete table, if all its values lie on the grid.
    pub fn encode(&self, table: &PotentialOutcomeTable) -> Option<Vec<bool>> {
        let grid: Vec<f64> = self.objective.grid.iter().map(Scalar::as_f64).collect();
        let mut x = vec![false; self.layout.num_vars()];
        for i in 0..self.layout.n {
            for arm in Arm::BOTH {
                let y = table.value(Slot::new(i, arm));
                let k = grid.iter().position(|&g| g == y)?;
                x[self.layout.var(arm, i, k)] = true;
            }
        }
        Some(x)
    }
}

/// One free variable of a reduced program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    /// Slot and grid index when the program came from an imputation problem.
    pub origin: Option<(Slot, usize)>,
}

/// Variables of which exactly one is 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub vars: Vec<usize>,
    pub slot: Option<Slot>,
}

/// `constant + sum_u linear[u] x_u + sum_{u<v} q_uv x_u x_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObjective<S> {
    pub constant: S,
    pub linear: Vec<S>,
    /// Sorted by `(u, v)` with `u < v`, no zero coefficients.
    pub quadratic: Vec<(usize, usize, S)>,
}

impl<S: Scalar> QuadraticObjective<S> {
    pub fn evaluate(&self, x: &[bool]) -> S {
        let mut total = self.constant.clone();
        for (u, c) in self.linear.iter().enumerate() {
            if x[u] {
                total = total + c.clone();
            }
        }
        for (u, v, c) in &self.quadratic {
            if x[*u] && x[*v] {
                total = total + c.clone();
            }
        }
        total
    }
}

/// Information linking a reduced program back to potential outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotStructure {
    pub n: usize,
    pub grid: Vec<f64>,
    /// Grid index of every slot determined by presolve.
    pub fixed: Vec<Option<usize>>,
    /// Variance matrix over slots, for bounding.
    pub matrix: Vec<Vec<f64>>,
}

/// Reduced program over free binaries with one-hot groups.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryProgram<S> {
    pub variables: Vec<Variable>,
    pub groups: Vec<Group>,
    pub constraints: Vec<LinearConstraint<S>>,
    pub objective: QuadraticObjective<S>,
    pub structure: Option<SlotStructure>,
    pub metadata: Option<ProgramMetadata>,
}

impl<S: Scalar> BinaryProgram<S> {
    /// Hand-built program. Groups must partition the variables; a one-hot
    /// row is added for each group.
    pub fn new(
        names: Vec<String>,
        groups: Vec<Vec<usize>>,
        mut constraints: Vec<LinearConstraint<S>>,
        objective: QuadraticObjective<S>,
    ) -> Result<Self> {
        let nv = names.len();
        if objective.linear.len() != nv {
            return Err(Error::Shape { expected: nv, got: objective.linear.len() });
        }
        let mut seen = vec![false; nv];
        for g in &groups {
            for &v in g {
                if v >= nv || seen[v] {
                    return Err(Error::Validation(format!("groups do not partition the variables (variable {v})")));
                }
                seen[v] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Validation("every variable must belong to a group".into()));
        }
        for (gi, g) in groups.iter().enumerate() {
            constraints.push(LinearConstraint {
                name: format!("onehot_g{gi}"),
                kind: RowKind::Group { group: gi },
                terms: g.iter().map(|&v| (v, S::one())).collect(),
                relation: Relation::Eq,
                rhs: S::one(),
            });
        }
        let mut quadratic = objective.quadratic;
        for t in &mut quadratic {
            if t.0 > t.1 {
                std::mem::swap(&mut t.0, &mut t.1);
            }
        }
        quadratic.sort_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, S)> = Vec::with_capacity(quadratic.len());
        let mut linear = objective.linear;
        for (u, v, c) in quadratic {
            if u == v {
                linear[u] = linear[u].clone() + c;
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 = last.2.clone() + c,
                _ => merged.push((u, v, c)),
            }
        }
        merged.retain(|t| !t.2.is_zero());
        Ok(Self {
            variables: names.into_iter().map(|name| Variable { name, origin: None }).collect(),
            groups: groups.into_iter().map(|vars| Group { vars, slot: None }).collect(),
            constraints,
            objective: QuadraticObjective { constant: objective.constant, linear, quadratic: merged },
            structure: None,
            metadata: None,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn evaluate(&self, x: &[bool]) -> S {
        self.objective.evaluate(x)
    }

    pub fn violated_row(&self, x: &[bool]) -> Option<&LinearConstraint<S>> {
        self.constraints.iter().find(|c| !c.is_satisfied(x))
    }

    pub fn is_feasible(&self, x: &[bool]) -> bool {
        self.violated_row(x).is_none()
    }

    /// Choice vector (one variable per group) to indicator vector.
    pub fn from_choices(&self, choices: &[usize]) -> Vec<bool> {
        let mut x = vec![false; self.num_vars()];
        for (g, &c) in self.groups.iter().zip(choices) {
            x[g.vars[c]] = true;
        }
        x
    }

    /// Complete potential-outcome table implied by a feasible point.
    pub fn decode(&self, x: &[bool]) -> Result<PotentialOutcomeTable> {
        let st = self
            .structure
            .as_ref()
            .ok_or_else(|| Error::Validation("program has no potential-outcome structure".into()))?;
        let mut chosen = st.fixed.clone();
        for (v, var) in self.variables.iter().enumerate() {
            if x[v] {
                if let Some((slot, k)) = var.origin {
                    chosen[slot.index(st.n)] = Some(k);
                }
            }
        }
        let mut outcomes = vec![[0.0; 2]; st.n];
        for (s, c) in chosen.iter().enumerate() {
            let k = c.ok_or_else(|| Error::Validation(format!("slot {s} has no value")))?;
            let slot = Slot::from_index(s, st.n);
            outcomes[slot.unit][slot.arm.index()] = st.grid[k];
        }
        PotentialOutcomeTable::from_columns(
            &outcomes.iter().map(|o| o[0]).collect::<Vec<_>>(),
            &outcomes.iter().map(|o| o[1]).collect::<Vec<_>>(),
        )
    }

    /// Indicator vector reproducing a table, when it agrees with the fixed slots.
    pub fn encode(&self, table: &PotentialOutcomeTable) -> Option<Vec<bool>> {
        let st = self.structure.as_ref()?;
        if table.len() != st.n {
            return None;
        }
        for (s, f) in st.fixed.iter().enumerate() {
            if let Some(k) = f {
                if table.value(Slot::from_index(s, st.n)) != st.grid[*k] {
                    return None;
                }
            }
        }
        let mut x = vec![false; self.num_vars()];
        for g in &self.groups {
            let slot = g.slot?;
            let y = table.value(slot);
            let v = g.vars.iter().find(|&&v| self.variables[v].origin.is_some_and(|(_, k)| st.grid[k] == y))?;
            x[*v] = true;
        }
        Some(x)
    }
}

/// Builds and presolves the program for one dataset.
pub struct ProgramInputs<'a, S> {
    pub records: &'a [crate::data::UnitRecord],
    pub support: &'a crate::data::OutcomeSupport,
    pub mechanism: &'a crate::designs::AssignmentMechanism,
    pub objective: ObjectiveForm<S>,
    pub flavor: ConstraintFlavor,
    pub epsilon: S,
    pub estimator: EstimatorName,
}

pub fn build_program<S: Scalar>(inputs: ProgramInputs<'_, S>) -> Result<ImputationProgram<S>> {
    let layout = layout_for(inputs.records, inputs.support)?;
    let constraints = build_constraints(
        inputs.records,
        inputs.support,
        inputs.mechanism,
        &inputs.flavor,
        inputs.epsilon.clone(),
    )?;
    if inputs.objective.n() != layout.n || inputs.objective.k() != layout.k {
        return Err(Error::Shape { expected: layout.n, got: inputs.objective.n() });
    }
    Ok(ImputationProgram {
        layout,
        objective: inputs.objective,
        constraints,
        metadata: ProgramMetadata {
            epsilon: inputs.epsilon.as_f64(),
            flavor: inputs.flavor,
            estimator: inputs.estimator,
        },
    })
}

pub fn layout_for(records: &[crate::data::UnitRecord], support: &crate::data::OutcomeSupport) -> Result<Layout> {
    let observed_k = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            support.index_of(r.observed_outcome).ok_or_else(|| {
                Error::Inconsistent(format!("unit {i}: observed outcome {} is not in the support", r.observed_outcome))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Layout { n: records.len(), k: support.len(), treated: records.iter().map(|r| r.treated).collect(), observed_k })
}
