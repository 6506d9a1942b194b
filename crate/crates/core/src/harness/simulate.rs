//! Repeated re-randomization over a fixed ground-truth population.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_population, treatment_vector, Population, PotentialOutcomeTable, UnitRecord};
use crate::designs::{AssignmentMechanism, DesignKind};
use crate::error::{Error, Result};
use crate::estimators::{residualize, Estimator, ResidualTransform};
use crate::inference::quantile_type7;
use crate::pipeline::{estimator_for, ProgramSpec};

use super::config::{DesignConfig, Effect, Method, ResidualConfig, SimulationConfig};
use super::methods::{mix_seed, run_methods, MethodContext, MethodResult};

/// Ground truth with `Y(1)` replaced by the effect applied to `Y(0)`.
pub fn inject_effect(table: &PotentialOutcomeTable, effect: Effect) -> PotentialOutcomeTable {
    PotentialOutcomeTable {
        unit_ids: table.unit_ids.clone(),
        outcomes: table.outcomes.iter().map(|o| [o[0], effect.apply(o[0])]).collect(),
    }
}

/// `Y(0)` from the population outcome with the effect injected.
pub fn ground_truth(population: &Population, effect: Effect) -> PotentialOutcomeTable {
    PotentialOutcomeTable {
        unit_ids: population.unit_ids.clone(),
        outcomes: population.outcome.iter().map(|&y| [y, effect.apply(y)]).collect(),
    }
}

/// Seed of replication `r`; shared across designs and effects so that every
/// cell of the grid sees the same random stream.
pub fn replication_seed(seed: u64, r: usize) -> u64 {
    mix_seed(seed.wrapping_add(r as u64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub design: String,
    pub estimator: String,
    pub effect: String,
    pub replication: usize,
    pub seed: u64,
    /// True effect on the analysis scale.
    pub tau: f64,
    /// `None` when the estimator is undefined on the realized assignment.
    pub point: Option<f64>,
    pub results: Vec<MethodResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub design: String,
    pub estimator: String,
    pub effect: String,
    pub method: Method,
    /// Width of the central `1 - alpha` range of the point estimates.
    pub true_ci_width: Option<f64>,
    pub coverage: Option<f64>,
    pub median_ci_width: Option<f64>,
    /// `100 * median_ci_width / median_ci_width(sampling_boot)`.
    pub median_ci_pct: Option<f64>,
    pub power: Option<f64>,
    pub covered: usize,
    pub rejected: usize,
    pub completed: usize,
    pub missing: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n: usize,
    pub alpha: f64,
    pub replications: usize,
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub rows: Vec<SummaryRow>,
    pub runs: Vec<ReplicationRow>,
}

impl SimulationReport {
    pub fn row(&self, design: &str, effect: &str, method: Method) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.design == design && r.effect == effect && r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Summary table, one line per (design, estimator, effect, method).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-replication intervals, one line per method.
    pub fn write_replications_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "design", "estimator", "effect", "replication", "seed", "tau", "point", "method", "lower", "upper", "note",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for run in &self.runs {
            for res in &run.results {
                w.write_record([
                    run.design.clone(),
                    run.estimator.clone(),
                    run.effect.clone(),
                    run.replication.to_string(),
                    run.seed.to_string(),
                    format!("{:?}", run.tau),
                    opt(run.point),
                    res.method.to_string(),
                    opt(res.ci.as_ref().map(|c| c.lower)),
                    opt(res.ci.as_ref().map(|c| c.upper)),
                    res.note.clone().unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes whichever outputs are configured.
    pub fn write_outputs(&self, config: &SimulationConfig) -> Result<()> {
        if let Some(p) = &config.output.json {
            std::fs::write(p, self.to_json()? + "\n")?;
        }
        if let Some(p) = &config.output.csv {
            self.write_csv(std::fs::File::create(p)?)?;
        }
        if let Some(p) = &config.output.replications {
            self.write_replications_csv(std::fs::File::create(p)?)?;
        }
        Ok(())
    }
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(quantile_type7(&values, 0.5))
}

/// Aggregates replication rows. Every statistic is a function of the
/// multiset of rows within a cell, so row order does not matter.
pub fn summarize(runs: &[ReplicationRow], methods: &[Method], alpha: f64) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(String, String, String), Vec<&ReplicationRow>> = BTreeMap::new();
    let mut order: Vec<(String, String, String)> = Vec::new();
    for run in runs {
        let key = (run.design.clone(), run.estimator.clone(), run.effect.clone());
        if !cells.contains_key(&key) {
            order.push(key.clone());
        }
        cells.entry(key).or_default().push(run);
    }
    let mut rows = Vec::new();
    for key in order {
        let cell = &cells[&key];
        let mut points: Vec<f64> = cell.iter().filter_map(|r| r.point).collect();
        points.sort_by(f64::total_cmp);
        let true_ci_width = (!points.is_empty())
            .then(|| quantile_type7(&points, 1.0 - alpha / 2.0) - quantile_type7(&points, alpha / 2.0));
        let mut cell_rows: Vec<SummaryRow> = methods
            .iter()
            .map(|&method| {
                let intervals: Vec<(f64, &crate::inference::ConfidenceInterval)> = cell
                    .iter()
                    .filter_map(|r| {
                        r.results.iter().find(|m| m.method == method).and_then(|m| m.ci.as_ref()).map(|c| (r.tau, c))
                    })
                    .collect();
                let completed = intervals.len();
                let covered = intervals.iter().filter(|(tau, c)| c.contains(*tau)).count();
                let rejected = intervals.iter().filter(|(_, c)| c.rejects_zero()).count();
                let fraction = |count: usize| (completed > 0).then(|| count as f64 / completed as f64);
                SummaryRow {
                    design: key.0.clone(),
                    estimator: key.1.clone(),
                    effect: key.2.clone(),
                    method,
                    true_ci_width,
                    coverage: fraction(covered),
                    median_ci_width: median(intervals.iter().map(|(_, c)| c.width()).collect()),
                    median_ci_pct: None,
                    power: fraction(rejected),
                    covered,
                    rejected,
                    completed,
                    missing: cell.len() - completed,
                }
            })
            .collect();
        let reference = cell_rows.iter().find(|r| r.method == Method::SamplingBoot).and_then(|r| r.median_ci_width);
        for row in &mut cell_rows {
            row.median_ci_pct = match (row.median_ci_width, reference) {
                (Some(m), Some(s)) if s > 0.0 => Some(100.0 * (m / s)),
                _ => None,
            };
        }
        rows.extend(cell_rows);
    }
    rows
}

/// Loads the configured population, keeping the first rows if requested.
pub fn load_simulation_population(config: &SimulationConfig) -> Result<Population> {
    let mut schema = config.data.schema();
    schema.treatment = None;
    let mut needed = schema.covariates.clone();
    if let ResidualConfig::Growth { pre0, pre1 } = &config.estimator.residual {
        needed.extend([pre0.clone(), pre1.clone()]);
    }
    needed.extend(config.estimator.covariate.clone());
    for d in &config.designs {
        if let DesignConfig::MatchedPairs { pair_by: Some(c) } = d {
            needed.push(c.clone());
        }
    }
    needed.sort();
    needed.dedup();
    schema.covariates = needed;
    let population = load_population(&config.data.path, &schema)?;
    Ok(match config.data.first {
        Some(k) if k < population.len() => population.select(&(0..k).collect::<Vec<_>>()),
        _ => population,
    })
}

fn residual_transform(config: &SimulationConfig, population: &Population) -> Result<Option<ResidualTransform>> {
    match &config.estimator.residual {
        ResidualConfig::None => Ok(None),
        ResidualConfig::Growth { pre0, pre1 } => {
            Ok(Some(ResidualTransform::growth_adjusted(population.covariate(pre0)?, population.covariate(pre1)?)?))
        }
    }
}

/// Analysis-mode records for a realized assignment, with pair labels under
/// matched pairs and residualized outcomes when a model is configured.
pub fn realize(
    population: &Population,
    table: &PotentialOutcomeTable,
    mech: &AssignmentMechanism,
    treated: &[bool],
    transform: Option<&ResidualTransform>,
) -> Result<Vec<UnitRecord>> {
    let mut records = population.to_records(&table.observed(treated), treated);
    if let DesignKind::MatchedPairs { pairs } = &mech.kind {
        for (j, &(a, b)) in pairs.iter().enumerate() {
            records[a].pair_id = Some(format!("pair{j}"));
            records[b].pair_id = Some(format!("pair{j}"));
        }
    }
    match transform {
        Some(t) => residualize(&records, t),
        None => Ok(records),
    }
}

struct Cell<'a> {
    design: String,
    effect: String,
    mech: &'a AssignmentMechanism,
    table: PotentialOutcomeTable,
    tau: f64,
}

fn run_replication(
    config: &SimulationConfig,
    spec: &ProgramSpec,
    population: &Population,
    transform: Option<&ResidualTransform>,
    cell: &Cell<'_>,
    r: usize,
) -> Result<ReplicationRow> {
    let seed = replication_seed(config.seed, r);
    let z = cell.mech.sample(seed);
    let records = realize(population, &cell.table, cell.mech, z.as_slice(), transform)?;
    let mut row = ReplicationRow {
        design: cell.design.clone(),
        estimator: config.estimator.label(),
        effect: cell.effect.clone(),
        replication: r,
        seed,
        tau: cell.tau,
        point: None,
        results: Vec::new(),
    };
    let estimator: Estimator = match estimator_for::<f64>(spec, &records, cell.mech) {
        Ok((_, e)) => e,
        Err(e) => {
            let note = e.to_string();
            row.results = config.methods.iter().map(|&m| MethodResult::missing(m, note.clone())).collect();
            return Ok(row);
        }
    };
    let y: Vec<f64> = records.iter().map(|r| r.observed_outcome).collect();
    let Some(point) = estimator.evaluate(&treatment_vector(&records), &y) else {
        row.results =
            config.methods.iter().map(|&m| MethodResult::missing(m, "estimator undefined on this assignment")).collect();
        return Ok(row);
    };
    row.point = Some(point);
    let ctx = MethodContext {
        records: &records,
        mech: cell.mech,
        spec,
        estimator: &estimator,
        point,
        alpha: config.alpha,
        bootstrap_reps: config.bootstrap_reps,
        seed,
        solver: &config.solver,
    };
    row.results = run_methods(&ctx, &config.methods).results;
    Ok(row)
}

/// Runs the design x effect grid on an already loaded population.
pub fn simulate_population(config: &SimulationConfig, population: &Population) -> Result<SimulationReport> {
    config.validate()?;
    if population.len() < 2 {
        return Err(Error::InsufficientData(format!("simulation needs at least two units, got {}", population.len())));
    }
    let spec = config.program_spec();
    let transform = residual_transform(config, population)?;
    let mechanisms = config
        .designs
        .iter()
        .map(|d| d.mechanism(population.len(), &population.outcome, |name| population.covariate(name)))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    for (design, mech) in config.designs.iter().zip(&mechanisms) {
        for effect in config.effects.effects() {
            let table = ground_truth(population, effect);
            let tau = match &transform {
                Some(t) => t.apply_to_table(&table)?.ate(),
                None => table.ate(),
            };
            let cell = Cell { design: design.label(), effect: effect.label(), mech, table, tau };
            let rows: Vec<ReplicationRow> = (0..config.replications)
                .into_par_iter()
                .map(|r| run_replication(config, &spec, population, transform.as_ref(), &cell, r))
                .collect::<Result<_>>()?;
            log::info!("{} / {}: {} replications", cell.design, cell.effect, rows.len());
            runs.extend(rows);
        }
    }
    Ok(SimulationReport {
        n: population.len(),
        alpha: config.alpha,
        replications: config.replications,
        bootstrap_reps: config.bootstrap_reps,
        seed: config.seed,
        rows: summarize(&runs, &config.methods, config.alpha),
        runs,
    })
}

/// Loads the data, runs the grid and writes the configured outputs.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let population = load_simulation_population(config)?;
    let report = simulate_population(config, &population)?;
    report.write_outputs(config)?;
    Ok(report)
}

/// Whitespace-separated quantiles of each method's draws on the grid
/// `0, 1/steps, ..., 1`, with `nan` for absent methods.
pub fn write_quantile_dump<W: Write>(mut out: W, draws: &BTreeMap<Method, Vec<f64>>, steps: usize) -> Result<()> {
    let methods: Vec<Method> = draws.keys().copied().collect();
    let sorted: Vec<Vec<f64>> = methods
        .iter()
        .map(|m| {
            let mut v = draws[m].clone();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    write!(out, "# p")?;
    for m in &methods {
        write!(out, " {m}")?;
    }
    writeln!(out)?;
    for i in 0..=steps {
        let p = i as f64 / steps as f64;
        write!(out, "{p:.4}")?;
        for v in &sorted {
            if v.is_empty() {
                write!(out, " nan")?;
            } else {
                write!(out, " {:?}", quantile_type7(v, p))?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_quantile_file(path: &Path, draws: &BTreeMap<Method, Vec<f64>>) -> Result<()> {
    write_quantile_dump(std::io::BufWriter::new(std::fs::File::create(path)?), draws, 100)
}
