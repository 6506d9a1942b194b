//! Single realized experiment: intervals from every requested method.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::copula_ip::{write_lp_file, LinearizedProgram};
use crate::data::{arm_sizes, load_csv, treatment_vector, UnitRecord};
use crate::designs::AssignmentMechanism;
use crate::error::{Error, Result};
use crate::estimators::{residualize, Estimator, ResidualTransform};
use crate::pipeline::{build_linearized, estimator_for, ProgramSpec};
use crate::solver::{roundtrip_external, SolveResult};

use super::config::{Method, ResidualConfig, SimulationConfig};
use super::methods::{run_methods, MethodContext, MethodResult};
use super::simulate::write_quantile_file;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    pub design: String,
    pub estimator: String,
    pub point_estimate: f64,
    pub alpha: f64,
    /// Marginal slack used by the program, when it was solved.
    pub epsilon: Option<f64>,
    /// Program optimum on the estimator-variance scale.
    pub v_star: Option<f64>,
    pub solver_status: Option<String>,
    pub intervals: Vec<MethodResult>,
    /// Bootstrap draws per resampling method, for the quantile dump.
    #[serde(skip)]
    pub draws: BTreeMap<Method, Vec<f64>>,
}

impl AnalysisReport {
    pub fn interval(&self, method: Method) -> Option<&MethodResult> {
        self.intervals.iter().find(|r| r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "point_estimate", "lower", "upper", "width", "level", "note"])?;
        for r in &self.intervals {
            let ci = r.ci.as_ref();
            let f = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
            w.write_record([
                r.method.to_string(),
                format!("{:?}", self.point_estimate),
                f(ci.map(|c| c.lower)),
                f(ci.map(|c| c.upper)),
                f(ci.map(|c| c.width())),
                f(ci.map(|c| c.level)),
                r.note.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_outputs(&self, config: &SimulationConfig) -> Result<()> {
        if let Some(p) = &config.output.json {
            std::fs::write(p, self.to_json()? + "\n")?;
        }
        if let Some(p) = &config.output.csv {
            self.write_csv(std::fs::File::create(p)?)?;
        }
        if let Some(p) = &config.output.quantiles {
            write_quantile_file(p, &self.draws)?;
        }
        Ok(())
    }
}

/// Realized data, mechanism and estimator for analysis mode.
pub struct Experiment {
    pub records: Vec<UnitRecord>,
    pub mech: AssignmentMechanism,
    pub spec: ProgramSpec,
    pub estimator: Estimator,
    pub point: f64,
}

fn growth_transform(records: &[UnitRecord], pre0: &str, pre1: &str) -> Result<ResidualTransform> {
    let a = records.iter().map(|r| r.covariate(pre0)).collect::<Result<Vec<f64>>>()?;
    let b = records.iter().map(|r| r.covariate(pre1)).collect::<Result<Vec<f64>>>()?;
    ResidualTransform::growth_adjusted(&a, &b)
}

/// Loads the realized experiment named by the config's first design.
pub fn load_experiment(config: &SimulationConfig) -> Result<Experiment> {
    config.validate()?;
    let mut schema = config.data.schema();
    if schema.treatment.is_none() {
        return Err(Error::Schema("analysis needs `data.treatment`, the realized assignment column".into()));
    }
    let mut extra: Vec<String> = Vec::new();
    if let ResidualConfig::Growth { pre0, pre1 } = &config.estimator.residual {
        extra.extend([pre0.clone(), pre1.clone()]);
    }
    extra.extend(config.estimator.covariate.clone());
    if let Some(super::config::DesignConfig::MatchedPairs { pair_by: Some(c) }) = config.designs.first() {
        extra.push(c.clone());
    }
    for c in extra {
        if !schema.covariates.contains(&c) {
            schema.covariates.push(c);
        }
    }
    let mut records = load_csv(&config.data.path, &schema)?;
    if let Some(k) = config.data.first {
        records.truncate(k);
    }
    let mech = config.designs[0].mechanism_for_records(&records)?;
    if let ResidualConfig::Growth { pre0, pre1 } = &config.estimator.residual {
        records = residualize(&records, &growth_transform(&records, pre0, pre1)?)?;
    }
    let spec = config.program_spec();
    let (_, estimator) = estimator_for::<f64>(&spec, &records, &mech)?;
    let y: Vec<f64> = records.iter().map(|r| r.observed_outcome).collect();
    let point = estimator
        .evaluate(&treatment_vector(&records), &y)
        .ok_or_else(|| Error::InsufficientData("estimator undefined on the realized assignment".into()))?;
    Ok(Experiment { records, mech, spec, estimator, point })
}

/// Program for the realized experiment, as exported to an external solver.
pub fn experiment_program(config: &SimulationConfig) -> Result<LinearizedProgram<f64>> {
    let exp = load_experiment(config)?;
    build_linearized::<f64>(&exp.records, &exp.mech, &exp.spec)
}

/// Writes the LP file for the realized experiment.
pub fn export_lp(config: &SimulationConfig, path: &std::path::Path) -> Result<LinearizedProgram<f64>> {
    let program = experiment_program(config)?;
    write_lp_file(&program, path)?;
    Ok(program)
}

/// Validates an external solution against the LP export of the experiment.
pub fn import_external(
    config: &SimulationConfig,
    lp_path: &std::path::Path,
    solution_path: &std::path::Path,
) -> Result<SolveResult<f64>> {
    roundtrip_external(&experiment_program(config)?, lp_path, solution_path)
}

/// Runs every configured method on the realized experiment.
pub fn analyze_dataset(config: &SimulationConfig) -> Result<AnalysisReport> {
    let exp = load_experiment(config)?;
    let ctx = MethodContext {
        records: &exp.records,
        mech: &exp.mech,
        spec: &exp.spec,
        estimator: &exp.estimator,
        point: exp.point,
        alpha: config.alpha,
        bootstrap_reps: config.bootstrap_reps,
        seed: config.seed,
        solver: &config.solver,
    };
    let run = run_methods(&ctx, &config.methods);
    if let Some(Err(message)) = &run.imputation {
        if message.contains("no imputation satisfies") {
            return Err(Error::Infeasible(message.clone()));
        }
    }
    let imputation = run.imputation.as_ref().and_then(|r| r.as_ref().ok());
    let (n0, n1) = arm_sizes(&exp.records);
    Ok(AnalysisReport {
        n: exp.records.len(),
        n0,
        n1,
        design: config.designs[0].label(),
        estimator: config.estimator.label(),
        point_estimate: exp.point,
        alpha: config.alpha,
        epsilon: imputation.map(|i| i.epsilon),
        v_star: imputation.map(|i| i.v_star.value),
        solver_status: imputation.map(|i| i.solve.status.to_string()),
        intervals: run.results,
        draws: run.draws,
    })
}

/// Runs the analysis and writes the configured outputs.
pub fn run_analysis(config: &SimulationConfig) -> Result<AnalysisReport> {
    let report = analyze_dataset(config)?;
    report.write_outputs(config)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::DesignConfig;

    fn write(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
        let p = dir.path().join("d.csv");
        std::fs::write(&p, text).unwrap();
        p
    }

    fn config(path: std::path::PathBuf) -> SimulationConfig {
        let mut c = SimulationConfig::desk(path);
        c.data.unit_id = Some("id".into());
        c.data.outcome = "y".into();
        c.data.treatment = Some("z".into());
        c.data.covariates.clear();
        c.designs = vec![DesignConfig::CompleteRandomization { n1: None }];
        c.bootstrap_reps = 200;
        c
    }

    #[test]
    fn missing_treatment_column_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "id,y\na,1\nb,2\n");
        assert!(matches!(analyze_dataset(&config(p)), Err(Error::Schema(_))));
    }

    #[test]
    fn small_experiment_reports_every_method() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "id,y,z\na,3,1\nb,1,1\nc,4,0\nd,1.5,0\ne,9,1\nf,2,0\n");
        let mut c = config(p);
        c.methods = Method::ALL.to_vec();
        let report = analyze_dataset(&c).unwrap();
        assert_eq!(report.intervals.len(), 5);
        assert!(report.intervals.iter().all(|r| r.ci.is_some()), "{:?}", report.intervals);
        assert!(report.v_star.unwrap() > 0.0);
        let mut dump = Vec::new();
        crate::harness::write_quantile_dump(&mut dump, &report.draws, 4).unwrap();
        let text = String::from_utf8(dump).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("# p opt_causal_boot isotone_boot sampling_boot"));
    }

    #[test]
    fn infeasible_slack_suggests_the_floor() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "id,y,z\na,1,0\nb,2,1\nc,3,1\n");
        let mut c = config(p);
        c.designs = vec![DesignConfig::CompleteRandomization { n1: Some(2) }];
        c.epsilon = Some(0.0);
        c.methods = vec![Method::OptCausalBoot];
        match analyze_dataset(&c) {
            Err(Error::Infeasible(m)) => assert!(m.contains("1/min(N0, N1)"), "{m}"),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }
}
