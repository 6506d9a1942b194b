//! Declarative run configuration, read from JSON.
//!
//! Relative paths inside a config file are resolved against the directory
//! containing that file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::copula_ip::ConstraintFlavor;
use crate::data::{CsvSchema, SupportMode, UnitRecord};
use crate::designs::{AssignmentMechanism, DesignKind, MomentMethod};
use crate::error::{Error, Result};
use crate::estimators::EstimatorName;
use crate::pipeline::ProgramSpec;
use crate::solver::{SolverKind, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub outcome: String,
    #[serde(default)]
    pub unit_id: Option<String>,
    /// Realized assignment column; required by `analyze` only.
    #[serde(default)]
    pub treatment: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Pair label column for matched-pairs analysis.
    #[serde(default)]
    pub pair: Option<String>,
    /// Keep only the first rows of the file.
    #[serde(default)]
    pub first: Option<usize>,
}

impl DataConfig {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            unit_id: self.unit_id.clone(),
            outcome: self.outcome.clone(),
            treatment: self.treatment.clone(),
            covariates: self.covariates.clone(),
            pair: self.pair.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignConfig {
    Bernoulli {
        p: f64,
    },
    /// `n1` defaults to `N / 2` in simulation and to the realized treated
    /// count in analysis.
    CompleteRandomization {
        #[serde(default)]
        n1: Option<usize>,
    },
    /// Adjacent units after sorting `pair_by` in descending order; the
    /// outcome column is used when `pair_by` is absent.
    MatchedPairs {
        #[serde(default)]
        pair_by: Option<String>,
    },
    /// JSON list of `{assignment, probability}`.
    Enumerated {
        path: PathBuf,
    },
}

impl DesignConfig {
    pub fn label(&self) -> String {
        match self {
            DesignConfig::Bernoulli { p } => format!("bernoulli({p})"),
            DesignConfig::CompleteRandomization { n1: Some(k) } => format!("complete_randomization({k})"),
            DesignConfig::CompleteRandomization { n1: None } => "complete_randomization".into(),
            DesignConfig::MatchedPairs { .. } => "matched_pairs".into(),
            DesignConfig::Enumerated { .. } => "enumerated".into(),
        }
    }

    /// Mechanism over `n` units. `key` supplies the pairing covariate by name
    /// and `outcome` the fallback pairing key.
    pub fn mechanism<'a>(
        &self,
        n: usize,
        outcome: &'a [f64],
        key: impl Fn(&str) -> Result<&'a [f64]>,
    ) -> Result<AssignmentMechanism> {
        let mech = match self {
            DesignConfig::Bernoulli { p } => AssignmentMechanism::bernoulli(n, *p)?,
            DesignConfig::CompleteRandomization { n1 } => AssignmentMechanism::complete(n, n1.unwrap_or(n / 2))?,
            DesignConfig::MatchedPairs { pair_by } => {
                let values = match pair_by {
                    Some(name) => key(name)?,
                    None => outcome,
                };
                AssignmentMechanism::matched_pairs(n, AssignmentMechanism::pairs_by_descending(values)?)?
            }
            DesignConfig::Enumerated { path } => AssignmentMechanism::load_enumerated(path)?,
        };
        if mech.n != n {
            return Err(Error::Shape { expected: n, got: mech.n });
        }
        Ok(mech)
    }

    /// Mechanism for analysis-mode records. Complete randomization without
    /// `n1` uses the realized treated count; matched pairs come from the pair
    /// labels when present. The realized assignment must have positive
    /// probability under the result.
    pub fn mechanism_for_records(&self, records: &[UnitRecord]) -> Result<AssignmentMechanism> {
        let n = records.len();
        let mech = match self {
            DesignConfig::CompleteRandomization { n1: None } => {
                AssignmentMechanism::complete(n, records.iter().filter(|r| r.treated).count())?
            }
            DesignConfig::MatchedPairs { pair_by: None } if records.iter().all(|r| r.pair_id.is_some()) => {
                AssignmentMechanism::matched_pairs(n, pairs_from_labels(records)?)?
            }
            DesignConfig::MatchedPairs { pair_by: Some(name) } => {
                let key = records.iter().map(|r| r.covariate(name)).collect::<Result<Vec<f64>>>()?;
                AssignmentMechanism::matched_pairs(n, AssignmentMechanism::pairs_by_descending(&key)?)?
            }
            _ => {
                let outcome: Vec<f64> = records.iter().map(|r| r.observed_outcome).collect();
                self.mechanism(n, &outcome, |name| Err(Error::Schema(format!("no covariate `{name}`"))))?
            }
        };
        check_realized(&mech, records)?;
        Ok(mech)
    }
}

fn check_realized(mech: &AssignmentMechanism, records: &[UnitRecord]) -> Result<()> {
    let z: Vec<bool> = records.iter().map(|r| r.treated).collect();
    let possible = match &mech.kind {
        DesignKind::Bernoulli { p } => z.iter().zip(p).all(|(&t, &q)| if t { q > 0.0 } else { q < 1.0 }),
        DesignKind::CompleteRandomization { n1 } => z.iter().filter(|&&t| t).count() == *n1,
        DesignKind::MatchedPairs { pairs } => pairs.iter().all(|&(a, b)| z[a] != z[b]),
        DesignKind::Enumerated { law } => law.iter().any(|w| w.probability > 0.0 && w.assignment.0 == z),
    };
    if possible {
        Ok(())
    } else {
        Err(Error::Validation(format!("the realized assignment has probability zero under the {} design", mech.name())))
    }
}

/// Unit index pairs from `pair_id` labels, in order of first appearance.
pub fn pairs_from_labels(records: &[UnitRecord]) -> Result<Vec<(usize, usize)>> {
    let mut open: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let label = r.pair_id.as_deref().ok_or_else(|| Error::Pairing(format!("unit {} has no pair label", r.unit_id)))?;
        match open.iter_mut().find(|(l, _)| *l == label) {
            Some((_, members)) => members.push(i),
            None => open.push((label, vec![i])),
        }
    }
    open.into_iter()
        .map(|(label, m)| match m.as_slice() {
            &[a, b] => Ok((a, b)),
            _ => Err(Error::Pairing(format!("pair `{label}` has {} units", m.len()))),
        })
        .collect()
}

/// Treatment effect injected into the ground-truth table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Effect {
    None,
    /// `Y(1) = Y(0) + delta`.
    Additive { delta: f64 },
    /// `Y(1) = (1 + gamma) Y(0)`.
    Multiplicative { gamma: f64 },
}

impl Effect {
    pub fn label(&self) -> String {
        match self {
            Effect::None => "none".into(),
            Effect::Additive { delta } => format!("additive({delta})"),
            Effect::Multiplicative { gamma } => format!("multiplicative({gamma})"),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Effect::None | Effect::Additive { delta: 0.0 } | Effect::Multiplicative { gamma: 0.0 })
    }

    pub fn apply(&self, y0: f64) -> f64 {
        match *self {
            Effect::None => y0,
            Effect::Additive { delta } => y0 + delta,
            Effect::Multiplicative { gamma } => (1.0 + gamma) * y0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectPreset {
    /// A/A only.
    Aa,
    /// 0, 82 and 164 added to every unit.
    PaperAdditive,
    /// 0%, 2.5%, 5%, 7.5% and 10% lifts.
    PaperMultiplicative,
}

impl EffectPreset {
    pub fn effects(self) -> Vec<Effect> {
        match self {
            EffectPreset::Aa => vec![Effect::None],
            EffectPreset::PaperAdditive => {
                [0.0, 82.0, 164.0].into_iter().map(|delta| Effect::Additive { delta }).collect()
            }
            EffectPreset::PaperMultiplicative => [0.0, 0.025, 0.05, 0.075, 0.10]
                .into_iter()
                .map(|gamma| Effect::Multiplicative { gamma })
                .collect(),
        }
    }
}

/// Either a preset name or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EffectGrid {
    Preset(EffectPreset),
    List(Vec<Effect>),
}

impl Default for EffectGrid {
    fn default() -> Self {
        EffectGrid::Preset(EffectPreset::Aa)
    }
}

impl EffectGrid {
    pub fn effects(&self) -> Vec<Effect> {
        match self {
            EffectGrid::Preset(p) => p.effects(),
            EffectGrid::List(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Causal bootstrap over the variance-maximizing imputed table.
    OptCausalBoot,
    /// Causal bootstrap over the rank-matched table.
    IsotoneBoot,
    /// Unit resampling with replacement.
    SamplingBoot,
    /// Normal interval from the analytical bound of the design.
    ConservativeVar,
    /// Normal interval from the program optimum.
    NormalVstar,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::SamplingBoot, Method::ConservativeVar, Method::IsotoneBoot, Method::OptCausalBoot, Method::NormalVstar];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::OptCausalBoot => "opt_causal_boot",
            Method::IsotoneBoot => "isotone_boot",
            Method::SamplingBoot => "sampling_boot",
            Method::ConservativeVar => "conservative_var",
            Method::NormalVstar => "normal_vstar",
        }
    }

    pub fn index(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).expect("listed") as u64
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown inference method `{s}`")))
    }
}

/// Out-of-sample model subtracted from the outcomes before analysis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResidualConfig {
    #[default]
    None,
    /// Growth from `pre0` to `pre1` projected one period ahead.
    Growth { pre0: String, pre1: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub name: EstimatorName,
    #[serde(default)]
    pub covariate: Option<String>,
    #[serde(default)]
    pub residual: ResidualConfig,
}

impl EstimatorConfig {
    pub fn label(&self) -> String {
        match &self.residual {
            ResidualConfig::None => self.name.to_string(),
            ResidualConfig::Growth { .. } => format!("{}+growth", self.name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub kind: SolverKind,
    /// Per-replication budget for the internal solvers.
    #[serde(default = "default_time_limit")]
    pub time_limit_secs: Option<f64>,
    #[serde(default)]
    pub node_limit: Option<u64>,
    /// LP export and solution file used by the external solver.
    #[serde(default)]
    pub lp_path: Option<PathBuf>,
    #[serde(default)]
    pub solution_path: Option<PathBuf>,
}

fn default_time_limit() -> Option<f64> {
    Some(60.0)
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { kind: SolverKind::Bnb, time_limit_secs: default_time_limit(), node_limit: None, lp_path: None, solution_path: None }
    }
}

impl SolverConfig {
    pub fn options(&self) -> Result<SolverOptions> {
        let time_limit = match self.time_limit_secs {
            Some(t) if t > 0.0 && t.is_finite() => Some(Duration::from_secs_f64(t)),
            Some(t) => return Err(Error::Parameter(format!("time limit must be positive, got {t}"))),
            None => None,
        };
        Ok(SolverOptions { time_limit, node_limit: self.node_limit, ..SolverOptions::default() })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
    /// Bootstrap quantile dump in whitespace-separated columns.
    #[serde(default)]
    pub quantiles: Option<PathBuf>,
    /// Per-replication intervals as CSV.
    #[serde(default)]
    pub replications: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub data: DataConfig,
    pub designs: Vec<DesignConfig>,
    pub estimator: EstimatorConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub effects: EffectGrid,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_bootstrap_reps")]
    pub bootstrap_reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Marginal slack; the feasibility floor of each flavor when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_flavor")]
    pub flavor: ConstraintFlavor,
    #[serde(default)]
    pub support: SupportMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_methods() -> Vec<Method> {
    vec![Method::SamplingBoot, Method::ConservativeVar, Method::IsotoneBoot, Method::OptCausalBoot]
}

fn default_replications() -> usize {
    500
}

fn default_bootstrap_reps() -> usize {
    1000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_flavor() -> ConstraintFlavor {
    ConstraintFlavor::EqualProbability
}

impl SimulationConfig {
    /// A/A at N = 10: complete randomization of 5, difference in means,
    /// 50 replications and 500 bootstrap draws.
    pub fn desk(data: impl Into<PathBuf>) -> Self {
        Self {
            data: DataConfig {
                path: data.into(),
                outcome: "gdp2019".into(),
                unit_id: Some("country".into()),
                treatment: None,
                covariates: vec!["gdp2017".into(), "gdp2018".into()],
                pair: None,
                first: Some(10),
            },
            designs: vec![DesignConfig::CompleteRandomization { n1: Some(5) }],
            estimator: EstimatorConfig { name: EstimatorName::Dim, covariate: None, residual: ResidualConfig::None },
            methods: default_methods(),
            effects: EffectGrid::Preset(EffectPreset::Aa),
            replications: 50,
            bootstrap_reps: 500,
            alpha: default_alpha(),
            epsilon: None,
            flavor: default_flavor(),
            support: SupportMode::ObservedUnion,
            seed: 20190501,
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        }
    }

    /// Full-scale grid on the 50-unit panel: both designs, 500 replications
    /// and 1000 bootstrap draws.
    pub fn paper_scale(data: impl Into<PathBuf>, effects: EffectPreset) -> Self {
        let mut config = Self::desk(data);
        config.data.first = None;
        config.designs = vec![
            DesignConfig::CompleteRandomization { n1: None },
            DesignConfig::MatchedPairs { pair_by: Some("gdp2018".into()) },
        ];
        config.effects = EffectGrid::Preset(effects);
        config.replications = default_replications();
        config.bootstrap_reps = default_bootstrap_reps();
        config
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file, resolving its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = Self::from_json(&std::fs::read_to_string(path)?)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.path);
        for d in &mut self.designs {
            if let DesignConfig::Enumerated { path } = d {
                fix(path);
            }
        }
        for p in [
            &mut self.output.csv,
            &mut self.output.json,
            &mut self.output.quantiles,
            &mut self.output.replications,
            &mut self.solver.lp_path,
            &mut self.solver.solution_path,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Parameter("replications must be at least 1".into()));
        }
        if self.bootstrap_reps < 2 {
            return Err(Error::Parameter("bootstrap_reps must be at least 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.designs.is_empty() {
            return Err(Error::Parameter("at least one design is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Parameter("at least one inference method is required".into()));
        }
        if self.effects.effects().is_empty() {
            return Err(Error::Parameter("the effect grid is empty".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::Parameter(format!("epsilon must be finite and nonnegative, got {e}")));
            }
        }
        if self.estimator.name == EstimatorName::OlsCovariate && self.estimator.covariate.is_none() {
            return Err(Error::Parameter("ols_covariate needs `estimator.covariate`".into()));
        }
        self.solver.options()?;
        Ok(())
    }

    pub fn program_spec(&self) -> ProgramSpec {
        ProgramSpec {
            estimator: self.estimator.name,
            covariate: self.estimator.covariate.clone(),
            flavor: self.flavor.clone(),
            epsilon: self.epsilon,
            support: self.support,
            moments: MomentMethod::Default,
        }
    }
}
