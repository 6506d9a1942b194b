//! From observed data to the worst-case imputed table and its variance.

use serde::{Deserialize, Serialize};

use crate::copula_ip::{
    build_objective_linear, build_objective_quadratic, build_program, default_epsilon, linearize, presolve,
    BinaryProgram, ConstraintFlavor, LinearizedProgram, ObjectiveForm, ProgramInputs,
};
use crate::data::{arm_sizes, build_support, PotentialOutcomeTable, SupportMode, UnitRecord};
use crate::designs::{fourth_moments, second_moments, AssignmentMechanism, DesignKind, MomentMethod};
use crate::error::{Error, Result};
use crate::estimators::{
    diff_in_means_for, horvitz_thompson_coeffs, regression_with_covariate_coeffs, EstimatorCoefficients,
    EstimatorName, Estimator,
};
use crate::inference::{isotone_impute, VStar};
use crate::scalar::Scalar;
use crate::solver::{roundtrip_external, solve, SolveResult, SolverKind, SolverOptions};

/// Everything needed to build the program besides the data and design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramSpec {
    pub estimator: EstimatorName,
    /// Covariate column for `ols_covariate`.
    #[serde(default)]
    pub covariate: Option<String>,
    pub flavor: ConstraintFlavor,
    /// `None` selects the smallest value with a feasibility guarantee.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub support: SupportMode,
    #[serde(default = "default_moment_method")]
    pub moments: MomentMethod,
}

fn default_moment_method() -> MomentMethod {
    MomentMethod::Default
}

impl ProgramSpec {
    pub fn new(estimator: EstimatorName) -> Self {
        Self {
            estimator,
            covariate: None,
            flavor: ConstraintFlavor::EqualProbability,
            epsilon: None,
            support: SupportMode::ObservedUnion,
            moments: MomentMethod::Default,
        }
    }

    pub fn with_flavor(mut self, flavor: ConstraintFlavor) -> Self {
        self.flavor = flavor;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_covariate(mut self, name: impl Into<String>) -> Self {
        self.covariate = Some(name.into());
        self
    }

    pub fn with_support(mut self, support: SupportMode) -> Self {
        self.support = support;
        self
    }
}

/// Coefficient form plus the direct estimator it represents.
pub fn estimator_for<S: Scalar>(
    spec: &ProgramSpec,
    records: &[UnitRecord],
    mech: &AssignmentMechanism,
) -> Result<(EstimatorCoefficients<S>, Estimator)> {
    if records.len() != mech.n {
        return Err(Error::Shape { expected: mech.n, got: records.len() });
    }
    match spec.estimator {
        EstimatorName::Dim => Ok((EstimatorCoefficients::Linear(diff_in_means_for(mech)?), Estimator::DiffInMeans)),
        EstimatorName::Ht | EstimatorName::DrGrowth => {
            let p = mech.treatment_probabilities_exact::<S>()?;
            let mut coeffs = horvitz_thompson_coeffs(&p)?;
            coeffs.name = spec.estimator;
            Ok((EstimatorCoefficients::Linear(coeffs), Estimator::HorvitzThompson { p: mech.treatment_probabilities()? }))
        }
        EstimatorName::OlsCovariate => {
            let name = spec
                .covariate
                .as_deref()
                .ok_or_else(|| Error::Parameter("ols_covariate needs a covariate column".into()))?;
            let (_, n1) = mech.fixed_arm_sizes().ok_or_else(|| {
                Error::EstimatorDesignMismatch(format!(
                    "the covariate-adjusted estimator needs fixed arm sizes; {} has random arm sizes",
                    mech.name()
                ))
            })?;
            let x: Vec<f64> = records.iter().map(|r| r.covariate(name)).collect::<Result<_>>()?;
            let xs: Vec<S> = x.iter().map(|&v| S::from_f64_exact(v)).collect();
            Ok((
                EstimatorCoefficients::Quadratic(regression_with_covariate_coeffs(&xs, n1)?),
                Estimator::CovariateAdjusted { x },
            ))
        }
    }
}

/// Presolved program for one dataset in scalar `S`.
pub fn build_reduced<S: Scalar>(
    records: &[UnitRecord],
    mech: &AssignmentMechanism,
    spec: &ProgramSpec,
) -> Result<BinaryProgram<S>> {
    let support = build_support(records, spec.support)?;
    let (coeffs, _) = estimator_for::<S>(spec, records, mech)?;
    let objective: ObjectiveForm<S> = match &coeffs {
        EstimatorCoefficients::Linear(c) => {
            build_objective_linear(c, &second_moments::<S>(mech, spec.moments)?, &support)?
        }
        EstimatorCoefficients::Quadratic(c) => {
            let method = match spec.moments {
                MomentMethod::Analytic => MomentMethod::Default,
                other => other,
            };
            build_objective_quadratic(c, &fourth_moments::<S>(mech, method)?, &support)?
        }
    };
    let epsilon = match spec.epsilon {
        Some(e) if e >= 0.0 && e.is_finite() => S::from_f64_exact(e),
        Some(e) => return Err(Error::Parameter(format!("epsilon must be finite and nonnegative, got {e}"))),
        None => default_epsilon::<S>(&spec.flavor, records, mech)?,
    };
    let full = build_program(ProgramInputs {
        records,
        support: &support,
        mechanism: mech,
        objective,
        flavor: spec.flavor.clone(),
        epsilon,
        estimator: coeffs.name(),
    })?;
    presolve(&full)
}

pub fn build_linearized<S: Scalar>(
    records: &[UnitRecord],
    mech: &AssignmentMechanism,
    spec: &ProgramSpec,
) -> Result<LinearizedProgram<S>> {
    Ok(linearize(&build_reduced::<S>(records, mech, spec)?))
}

/// Solved program with its decoded worst-case table.
#[derive(Clone, Debug)]
pub struct Imputation {
    pub program: LinearizedProgram<f64>,
    pub solve: SolveResult<f64>,
    pub v_star: VStar,
    pub table: PotentialOutcomeTable,
    pub epsilon: f64,
    pub estimator: Estimator,
}

/// Isotone table as a starting point, where it is known to be optimal.
pub fn warm_start(program: &BinaryProgram<f64>, records: &[UnitRecord], mech: &AssignmentMechanism) -> Option<Vec<bool>> {
    let is_crd_dim = matches!(mech.kind, DesignKind::CompleteRandomization { .. })
        && program.metadata.as_ref().is_some_and(|m| m.estimator == EstimatorName::Dim);
    if !is_crd_dim {
        return None;
    }
    let (n0, n1) = arm_sizes(records);
    if n0 == 0 || n1 == 0 {
        return None;
    }
    program.encode(&isotone_impute(records).ok()?)
}

/// Builds, solves and decodes the variance-maximizing program.
pub fn impute_worst_case(
    records: &[UnitRecord],
    mech: &AssignmentMechanism,
    spec: &ProgramSpec,
    solver: SolverKind,
    options: &SolverOptions,
) -> Result<Imputation> {
    let (_, estimator) = estimator_for::<f64>(spec, records, mech)?;
    let program = build_linearized::<f64>(records, mech, spec)?;
    let mut options = options.clone();
    if options.warm_start.is_none() {
        options.warm_start = warm_start(&program.base, records, mech);
    }
    let result = solve(solver, &program, &options)?;
    finish(program, result, estimator)
}

/// Imputation from a solution file written by an out-of-process solver for
/// the LP export at `lp_path`.
pub fn impute_external(
    records: &[UnitRecord],
    mech: &AssignmentMechanism,
    spec: &ProgramSpec,
    lp_path: &std::path::Path,
    solution_path: &std::path::Path,
) -> Result<Imputation> {
    let (_, estimator) = estimator_for::<f64>(spec, records, mech)?;
    let program = build_linearized::<f64>(records, mech, spec)?;
    let result = roundtrip_external(&program, lp_path, solution_path)?;
    finish(program, result, estimator)
}

fn finish(program: LinearizedProgram<f64>, result: SolveResult<f64>, estimator: Estimator) -> Result<Imputation> {
    let epsilon = program.base.metadata.as_ref().map_or(0.0, |m| m.epsilon);
    let (x, value) = result.require_optimal().map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible(format!(
            "no imputation satisfies the marginal constraints at epsilon = {epsilon}; \
             1/min(N0, N1) always admits a solution"
        )),
        other => other,
    })?;
    let table = program.base.decode(x)?;
    let v_star = VStar::estimator(value.max(0.0));
    Ok(Imputation { v_star, table, epsilon, estimator, solve: result, program })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::enumerated_variance;

    fn records(treated: &[f64], control: &[f64]) -> Vec<UnitRecord> {
        let mut out = Vec::new();
        for (i, &y) in treated.iter().enumerate() {
            out.push(UnitRecord::new(format!("t{i}"), y, true));
        }
        for (i, &y) in control.iter().enumerate() {
            out.push(UnitRecord::new(format!("c{i}"), y, false));
        }
        out
    }

    #[test]
    fn crd_dim_matches_isotone() {
        let recs = records(&[3.0, 1.0, 4.0], &[1.0, 5.0, 9.0]);
        let mech = AssignmentMechanism::complete(6, 3).unwrap();
        let iso = enumerated_variance(&isotone_impute(&recs).unwrap(), &mech, &Estimator::DiffInMeans).unwrap();
        let exact = ProgramSpec::new(EstimatorName::Dim).with_epsilon(0.0);
        let imp = impute_worst_case(&recs, &mech, &exact, SolverKind::Bnb, &SolverOptions::default()).unwrap();
        assert!((imp.v_star.value - iso).abs() < 1e-9 * iso.max(1.0), "{} vs {iso}", imp.v_star.value);
        let direct = enumerated_variance(&imp.table, &mech, &Estimator::DiffInMeans).unwrap();
        assert!((direct - imp.v_star.value).abs() < 1e-9);
        // Slack in the marginal rows can only raise the optimum.
        let slack = ProgramSpec::new(EstimatorName::Dim);
        let loose = impute_worst_case(&recs, &mech, &slack, SolverKind::Bnb, &SolverOptions::default()).unwrap();
        assert!(loose.v_star.value >= iso - 1e-9);
    }

    #[test]
    fn bernoulli_dim_is_rejected() {
        let recs = records(&[1.0], &[0.0]);
        let mech = AssignmentMechanism::bernoulli(2, 0.5).unwrap();
        let spec = ProgramSpec::new(EstimatorName::Dim);
        assert!(matches!(build_reduced::<f64>(&recs, &mech, &spec), Err(Error::EstimatorDesignMismatch(_))));
    }
}
