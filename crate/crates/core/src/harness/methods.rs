//! One realized experiment through every requested inference method.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::UnitRecord;
use crate::designs::{AssignmentMechanism, DesignKind};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, EstimatorName};
use crate::inference::{
    causal_bootstrap_draws, isotone_impute, matched_pairs_bound, neyman_bound, normal_ci_scaled, percentile_ci,
    sampling_bootstrap, ConfidenceInterval, VStar,
};
use crate::pipeline::{impute_external, impute_worst_case, Imputation, ProgramSpec};
use crate::solver::SolverKind;

use super::config::{Method, SolverConfig};

/// Interval from one method, or why it is missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub ci: Option<ConfidenceInterval>,
    #[serde(default)]
    pub note: Option<String>,
}

impl MethodResult {
    fn from_result(method: Method, result: std::result::Result<ConfidenceInterval, String>) -> Self {
        match result {
            Ok(ci) => Self { method, ci: Some(ci), note: None },
            Err(e) => Self { method, ci: None, note: Some(e) },
        }
    }

    pub fn missing(method: Method, note: impl Into<String>) -> Self {
        Self { method, ci: None, note: Some(note.into()) }
    }
}

/// Inputs shared by all methods for one realized experiment.
pub struct MethodContext<'a> {
    pub records: &'a [UnitRecord],
    pub mech: &'a AssignmentMechanism,
    pub spec: &'a ProgramSpec,
    pub estimator: &'a Estimator,
    pub point: f64,
    pub alpha: f64,
    pub bootstrap_reps: usize,
    /// Base seed; each method derives its own stream from it.
    pub seed: u64,
    pub solver: &'a SolverConfig,
}

pub struct MethodRun {
    pub results: Vec<MethodResult>,
    /// Bootstrap draws per resampling method.
    pub draws: BTreeMap<Method, Vec<f64>>,
    pub imputation: Option<std::result::Result<Imputation, String>>,
}

/// SplitMix64 output for `seed`; used to derive independent stream seeds.
pub fn mix_seed(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn method_seed(seed: u64, method: Method) -> u64 {
    mix_seed(seed ^ mix_seed(method.index() + 1))
}

fn relabel(mut ci: ConfidenceInterval, method: Method) -> ConfidenceInterval {
    ci.method = method.as_str().to_string();
    ci
}

/// Analytical variance bound for the estimator under the design.
pub fn conservative_variance(records: &[UnitRecord], mech: &AssignmentMechanism, estimator: EstimatorName) -> Result<f64> {
    if estimator == EstimatorName::OlsCovariate {
        return Err(Error::EstimatorDesignMismatch("no analytical bound for the regression estimator".into()));
    }
    match mech.kind {
        DesignKind::CompleteRandomization { .. } => neyman_bound(records),
        DesignKind::MatchedPairs { .. } => matched_pairs_bound(records),
        _ => Err(Error::EstimatorDesignMismatch(format!("no analytical bound for the {} design", mech.name()))),
    }
}

fn impute(ctx: &MethodContext<'_>) -> Result<Imputation> {
    match ctx.solver.kind {
        SolverKind::External => {
            let (Some(lp), Some(sol)) = (&ctx.solver.lp_path, &ctx.solver.solution_path) else {
                return Err(Error::Parameter("the external solver needs `solver.lp_path` and `solver.solution_path`".into()));
            };
            impute_external(ctx.records, ctx.mech, ctx.spec, lp, sol)
        }
        kind => impute_worst_case(ctx.records, ctx.mech, ctx.spec, kind, &ctx.solver.options()?),
    }
}

/// Runs `methods` in order. Failures become missing results; the program is
/// solved at most once.
pub fn run_methods(ctx: &MethodContext<'_>, methods: &[Method]) -> MethodRun {
    let n = ctx.records.len();
    let mut run = MethodRun { results: Vec::with_capacity(methods.len()), draws: BTreeMap::new(), imputation: None };
    for &method in methods {
        let seed = method_seed(ctx.seed, method);
        let result = match method {
            Method::OptCausalBoot => {
                let imputation = run.imputation.get_or_insert_with(|| impute(ctx).map_err(|e| e.to_string()));
                match imputation {
                    Ok(imp) => causal_bootstrap_draws(&imp.table, ctx.mech, ctx.estimator, ctx.bootstrap_reps, seed)
                        .and_then(|d| {
                            let ci = percentile_ci(&d, ctx.alpha, method.as_str(), ctx.point);
                            run.draws.insert(method, d);
                            ci
                        })
                        .map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                }
            }
            Method::NormalVstar => {
                let imputation = run.imputation.get_or_insert_with(|| impute(ctx).map_err(|e| e.to_string()));
                match imputation {
                    Ok(imp) => normal_ci_scaled(ctx.point, imp.v_star, n, ctx.alpha)
                        .map(|ci| relabel(ci, method))
                        .map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                }
            }
            Method::IsotoneBoot => isotone_impute(ctx.records)
                .and_then(|table| causal_bootstrap_draws(&table, ctx.mech, ctx.estimator, ctx.bootstrap_reps, seed))
                .and_then(|d| {
                    let ci = percentile_ci(&d, ctx.alpha, method.as_str(), ctx.point);
                    run.draws.insert(method, d);
                    ci
                })
                .map_err(|e| e.to_string()),
            Method::SamplingBoot => {
                sampling_bootstrap(ctx.records, ctx.estimator, ctx.bootstrap_reps, ctx.alpha, seed).map(|s| {
                    run.draws.insert(method, s.draws);
                    s.ci
                })
                .map_err(|e| e.to_string())
            }
            Method::ConservativeVar => conservative_variance(ctx.records, ctx.mech, ctx.spec.estimator)
                .and_then(|v| normal_ci_scaled(ctx.point, VStar::estimator(v), n, ctx.alpha))
                .map(|ci| relabel(ci, method))
                .map_err(|e| e.to_string()),
        };
        run.results.push(MethodResult::from_result(method, result));
    }
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::z_quantile;

    fn records() -> Vec<UnitRecord> {
        [(3.0, true), (1.0, true), (4.0, false), (1.5, false), (9.0, true), (2.0, false)]
            .iter()
            .enumerate()
            .map(|(i, &(y, t))| UnitRecord::new(i.to_string(), y, t))
            .collect()
    }

    #[test]
    fn every_method_produces_an_interval_under_crd() {
        let recs = records();
        let mech = AssignmentMechanism::complete(6, 3).unwrap();
        let spec = ProgramSpec::new(EstimatorName::Dim);
        let solver = SolverConfig::default();
        let ctx = MethodContext {
            records: &recs,
            mech: &mech,
            spec: &spec,
            estimator: &Estimator::DiffInMeans,
            point: 5.0 / 3.0 - 2.5,
            alpha: 0.05,
            bootstrap_reps: 200,
            seed: 7,
            solver: &solver,
        };
        let run = run_methods(&ctx, &Method::ALL);
        for r in &run.results {
            let ci = r.ci.as_ref().unwrap_or_else(|| panic!("{} missing: {:?}", r.method, r.note));
            assert_eq!(ci.method, r.method.as_str());
        }
        assert_eq!(run.draws.len(), 3);
        let cons = run.results.iter().find(|r| r.method == Method::ConservativeVar).unwrap().ci.clone().unwrap();
        let v = neyman_bound(&recs).unwrap();
        assert!((cons.width() - 2.0 * z_quantile(0.975) * v.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_has_no_analytical_bound() {
        let recs = records();
        let mech = AssignmentMechanism::bernoulli(6, 0.5).unwrap();
        assert!(conservative_variance(&recs, &mech, EstimatorName::Ht).is_err());
    }

    #[test]
    fn derived_seeds_differ_per_method() {
        let seeds: std::collections::BTreeSet<u64> = Method::ALL.iter().map(|&m| method_seed(1, m)).collect();
        assert_eq!(seeds.len(), Method::ALL.len());
    }
}
