//! Units, outcomes, covariates and the discrete outcome support.
//!
//! Unit index is row order everywhere: vectors and matrices in the other
//! modules are indexed by the position of the record in the loaded file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment arm of a potential outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treated];

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn from_treated(treated: bool) -> Self {
        if treated {
            Arm::Treated
        } else {
            Arm::Control
        }
    }

    pub fn other(self) -> Self {
        match self {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// One potential outcome `Y_unit(arm)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub unit: usize,
    pub arm: Arm,
}

impl Slot {
    pub fn new(unit: usize, arm: Arm) -> Self {
        Self { unit, arm }
    }

    /// Dense index in `0..2N`, control slots first.
    pub fn index(self, n: usize) -> usize {
        self.arm.index() * n + self.unit
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        if index < n {
            Slot::new(index, Arm::Control)
        } else {
            Slot::new(index - n, Arm::Treated)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub unit_id: String,
    pub observed_outcome: f64,
    pub treated: bool,
    #[serde(default)]
    pub covariates: BTreeMap<String, f64>,
    #[serde(default)]
    pub pair_id: Option<String>,
}

impl UnitRecord {
    pub fn new(unit_id: impl Into<String>, observed_outcome: f64, treated: bool) -> Self {
        Self {
            unit_id: unit_id.into(),
            observed_outcome,
            treated,
            covariates: BTreeMap::new(),
            pair_id: None,
        }
    }

    pub fn arm(&self) -> Arm {
        Arm::from_treated(self.treated)
    }

    pub fn covariate(&self, name: &str) -> Result<f64> {
        self.covariates
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("unit {} has no covariate `{name}`", self.unit_id)))
    }
}

/// Column names used when reading or writing unit records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Unit identifier column. Row numbers (1-based) are used when absent.
    #[serde(default)]
    pub unit_id: Option<String>,
    pub outcome: String,
    /// Required by [`load_csv`]; ignored by [`load_population`].
    #[serde(default)]
    pub treatment: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub pair: Option<String>,
}

impl CsvSchema {
    pub fn new(outcome: impl Into<String>, treatment: impl Into<String>) -> Self {
        Self {
            unit_id: None,
            outcome: outcome.into(),
            treatment: Some(treatment.into()),
            covariates: Vec::new(),
            pair: None,
        }
    }

    pub fn with_unit_id(mut self, column: impl Into<String>) -> Self {
        self.unit_id = Some(column.into());
        self
    }

    pub fn with_covariates<I, T>(mut self, columns: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        self.covariates = columns.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_pair(mut self, column: impl Into<String>) -> Self {
        self.pair = Some(column.into());
        self
    }
}

struct ColumnIndex {
    lookup: HashMap<String, usize>,
}

impl ColumnIndex {
    fn new(headers: &csv::StringRecord) -> Self {
        let lookup = headers.iter().enumerate().map(|(i, h)| (h.trim().to_string(), i)).collect();
        Self { lookup }
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.lookup
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    }
}

fn parse_real(raw: &str, row: usize, column: &str) -> Result<f64> {
    let value: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("column `{column}` holds non-numeric value `{raw}`"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse { row, message: format!("column `{column}` holds non-finite value `{raw}`") });
    }
    Ok(value)
}

fn parse_treatment(raw: &str, row: usize) -> Result<bool> {
    match raw.trim() {
        "1" | "1.0" => Ok(true),
        "0" | "0.0" => Ok(false),
        other => Err(Error::Validation(format!("row {row}: treatment must be 0 or 1, found `{other}`"))),
    }
}

/// Reads unit records from a CSV file with a header row.
///
/// Rows are returned in file order. Row numbers in errors are 1-based data
/// rows (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<UnitRecord>> {
    let reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    read_records(reader, schema)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(input: R, schema: &CsvSchema) -> Result<Vec<UnitRecord>> {
    let reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    read_records(reader, schema)
}

fn read_records<R: std::io::Read>(mut reader: csv::Reader<R>, schema: &CsvSchema) -> Result<Vec<UnitRecord>> {
    let columns = ColumnIndex::new(reader.headers()?);
    let treatment_name =
        schema.treatment.as_deref().ok_or_else(|| Error::Schema("schema names no treatment column".into()))?;
    let outcome_col = columns.require(&schema.outcome)?;
    let treatment_col = columns.require(treatment_name)?;
    let id_col = schema.unit_id.as_deref().map(|c| columns.require(c)).transpose()?;
    let pair_col = schema.pair.as_deref().map(|c| columns.require(c)).transpose()?;
    let covariate_cols = schema
        .covariates
        .iter()
        .map(|c| columns.require(c).map(|i| (c.clone(), i)))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (offset, row) in reader.records().enumerate() {
        let row_number = offset + 1;
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let unit_id = match id_col {
            Some(i) => field(i).to_string(),
            None => row_number.to_string(),
        };
        if !seen.insert(unit_id.clone()) {
            return Err(Error::Validation(format!("row {row_number}: duplicate unit_id `{unit_id}`")));
        }
        let observed_outcome = parse_real(field(outcome_col), row_number, &schema.outcome)?;
        let treated = parse_treatment(field(treatment_col), row_number)?;
        let mut covariates = BTreeMap::new();
        for (name, i) in &covariate_cols {
            let raw = field(*i);
            if raw.is_empty() {
                return Err(Error::Validation(format!("row {row_number}: missing covariate `{name}`")));
            }
            covariates.insert(name.clone(), parse_real(raw, row_number, name)?);
        }
        let pair_id = pair_col.map(|i| field(i).to_string()).filter(|p| !p.is_empty());
        records.push(UnitRecord { unit_id, observed_outcome, treated, covariates, pair_id });
    }
    validate_pairs(&records)?;
    Ok(records)
}

/// Every pair id present must be shared by exactly two units.
pub fn validate_pairs(records: &[UnitRecord]) -> Result<()> {
    let mut members: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        if let Some(p) = &r.pair_id {
            *members.entry(p.as_str()).or_default() += 1;
        }
    }
    for (pair, count) in members {
        if count != 2 {
            return Err(Error::Validation(format!("pair `{pair}` has {count} members, expected 2")));
        }
    }
    Ok(())
}

/// Writes records with the given schema. Columns named by the schema but
/// absent from the schema's optional parts are omitted.
pub fn write_csv<W: std::io::Write>(output: W, records: &[UnitRecord], schema: &CsvSchema) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    let treatment =
        schema.treatment.as_deref().ok_or_else(|| Error::Schema("schema names no treatment column".into()))?;
    let mut header: Vec<&str> = Vec::new();
    if let Some(id) = &schema.unit_id {
        header.push(id);
    }
    header.push(&schema.outcome);
    header.push(treatment);
    header.extend(schema.covariates.iter().map(String::as_str));
    if let Some(pair) = &schema.pair {
        header.push(pair);
    }
    writer.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if schema.unit_id.is_some() {
            row.push(r.unit_id.clone());
        }
        row.push(format_real(r.observed_outcome));
        row.push(if r.treated { "1" } else { "0" }.to_string());
        for c in &schema.covariates {
            row.push(format_real(r.covariate(c)?));
        }
        if schema.pair.is_some() {
            row.push(r.pair_id.clone().unwrap_or_default());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_csv_file(path: impl AsRef<Path>, records: &[UnitRecord], schema: &CsvSchema) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(file, records, schema)
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x:?}")
}

/// Outcome and covariate columns without a treatment column, used as the
/// ground-truth population in simulation mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    pub unit_ids: Vec<String>,
    pub outcome: Vec<f64>,
    pub covariates: BTreeMap<String, Vec<f64>>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn covariate(&self, name: &str) -> Result<&[f64]> {
        self.covariates
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Schema(format!("population has no covariate `{name}`")))
    }

    /// Keeps the units at the given positions, in that order.
    pub fn select(&self, indices: &[usize]) -> Population {
        Population {
            unit_ids: indices.iter().map(|&i| self.unit_ids[i].clone()).collect(),
            outcome: indices.iter().map(|&i| self.outcome[i]).collect(),
            covariates: self
                .covariates
                .iter()
                .map(|(k, v)| (k.clone(), indices.iter().map(|&i| v[i]).collect()))
                .collect(),
        }
    }

    /// Attaches a realized assignment, producing analysis-mode records with
    /// the given observed outcomes.
    pub fn to_records(&self, observed: &[f64], treated: &[bool]) -> Vec<UnitRecord> {
        (0..self.len())
            .map(|i| UnitRecord {
                unit_id: self.unit_ids[i].clone(),
                observed_outcome: observed[i],
                treated: treated[i],
                covariates: self.covariates.iter().map(|(k, v)| (k.clone(), v[i])).collect(),
                pair_id: None,
            })
            .collect()
    }
}

pub fn load_population(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Population> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let columns = ColumnIndex::new(reader.headers()?);
    let outcome_col = columns.require(&schema.outcome)?;
    let id_col = schema.unit_id.as_deref().map(|c| columns.require(c)).transpose()?;
    let covariate_cols = schema
        .covariates
        .iter()
        .map(|c| columns.require(c).map(|i| (c.clone(), i)))
        .collect::<Result<Vec<_>>>()?;
    let mut population = Population {
        unit_ids: Vec::new(),
        outcome: Vec::new(),
        covariates: schema.covariates.iter().map(|c| (c.clone(), Vec::new())).collect(),
    };
    let mut seen = BTreeSet::new();
    for (offset, row) in reader.records().enumerate() {
        let row_number = offset + 1;
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let id = id_col.map(|i| field(i).to_string()).unwrap_or_else(|| row_number.to_string());
        if !seen.insert(id.clone()) {
            return Err(Error::Validation(format!("row {row_number}: duplicate unit_id `{id}`")));
        }
        population.unit_ids.push(id);
        population.outcome.push(parse_real(field(outcome_col), row_number, &schema.outcome)?);
        for (name, i) in &covariate_cols {
            let raw = field(*i);
            if raw.is_empty() {
                return Err(Error::Validation(format!("row {row_number}: missing covariate `{name}`")));
            }
            let v = parse_real(raw, row_number, name)?;
            population.covariates.get_mut(name).expect("initialized").push(v);
        }
    }
    Ok(population)
}

/// Complete `N x 2` table of potential outcomes (simulation ground truth or
/// an imputed table).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialOutcomeTable {
    pub unit_ids: Vec<String>,
    /// `outcomes[i][a]` is `Y_i(a)`.
    pub outcomes: Vec<[f64; 2]>,
}

impl PotentialOutcomeTable {
    pub fn new(unit_ids: Vec<String>, outcomes: Vec<[f64; 2]>) -> Result<Self> {
        if unit_ids.len() != outcomes.len() {
            return Err(Error::Shape { expected: unit_ids.len(), got: outcomes.len() });
        }
        if outcomes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("potential outcomes must be finite".into()));
        }
        Ok(Self { unit_ids, outcomes })
    }

    /// Table from control and treated columns with row-number ids.
    pub fn from_columns(y0: &[f64], y1: &[f64]) -> Result<Self> {
        if y0.len() != y1.len() {
            return Err(Error::Shape { expected: y0.len(), got: y1.len() });
        }
        let ids = (1..=y0.len()).map(|i| i.to_string()).collect();
        Self::new(ids, y0.iter().zip(y1).map(|(&a, &b)| [a, b]).collect())
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn value(&self, slot: Slot) -> f64 {
        self.outcomes[slot.unit][slot.arm.index()]
    }

    pub fn column(&self, arm: Arm) -> Vec<f64> {
        self.outcomes.iter().map(|o| o[arm.index()]).collect()
    }

    /// Average treatment effect `mean(Y(1) - Y(0))`.
    pub fn ate(&self) -> f64 {
        let n = self.len() as f64;
        self.outcomes.iter().map(|o| o[1] - o[0]).sum::<f64>() / n
    }

    /// Outcomes revealed by an assignment.
    pub fn observed(&self, treated: &[bool]) -> Vec<f64> {
        self.outcomes.iter().zip(treated).map(|(o, &z)| o[usize::from(z)]).collect()
    }

    /// Analysis-mode records for a realized assignment.
    pub fn reveal(&self, treated: &[bool]) -> Vec<UnitRecord> {
        self.unit_ids
            .iter()
            .zip(self.observed(treated))
            .zip(treated)
            .map(|((id, y), &z)| UnitRecord::new(id.clone(), y, z))
            .collect()
    }
}

/// How the discrete outcome grid is built from observed data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    /// Sorted distinct observed outcomes pooled across arms.
    #[default]
    ObservedUnion,
    /// Same grid, but each arm may only take values observed in that arm.
    ObservedPerArm,
}

/// Discrete outcome grid `y_1 < ... < y_K`, optionally restricted per arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSupport {
    pub values: Vec<f64>,
    /// Allowed support indices for control and treated potential outcomes.
    pub per_arm: Option<[Vec<usize>; 2]>,
}

impl OutcomeSupport {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("support values must be finite".into()));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        if values.is_empty() {
            return Err(Error::DegenerateSupport("no outcome values".into()));
        }
        Ok(Self { values, per_arm: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exact-equality lookup.
    pub fn index_of(&self, y: f64) -> Option<usize> {
        self.values.binary_search_by(|v| v.total_cmp(&y)).ok()
    }

    pub fn allowed(&self, arm: Arm) -> Vec<usize> {
        match &self.per_arm {
            Some(sets) => sets[arm.index()].clone(),
            None => (0..self.values.len()).collect(),
        }
    }

    pub fn is_allowed(&self, arm: Arm, k: usize) -> bool {
        match &self.per_arm {
            Some(sets) => sets[arm.index()].binary_search(&k).is_ok(),
            None => k < self.values.len(),
        }
    }

    pub fn allowed_values(&self, arm: Arm) -> Vec<f64> {
        self.allowed(arm).into_iter().map(|k| self.values[k]).collect()
    }
}

pub fn build_support(records: &[UnitRecord], mode: SupportMode) -> Result<OutcomeSupport> {
    if records.len() < 2 {
        return Err(Error::InsufficientData(format!("support needs at least 2 units, got {}", records.len())));
    }
    let mut support = OutcomeSupport::new(records.iter().map(|r| r.observed_outcome).collect())?;
    if mode == SupportMode::ObservedPerArm {
        let mut sets: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for r in records {
            let k = support.index_of(r.observed_outcome).expect("observed outcome is in its own support");
            sets[r.arm().index()].push(k);
        }
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
        }
        support.per_arm = Some(sets);
    }
    Ok(support)
}

/// Counts of (control, treated) units.
pub fn arm_sizes(records: &[UnitRecord]) -> (usize, usize) {
    let n1 = records.iter().filter(|r| r.treated).count();
    (records.len() - n1, n1)
}

pub fn treatment_vector(records: &[UnitRecord]) -> Vec<bool> {
    records.iter().map(|r| r.treated).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> CsvSchema {
        CsvSchema::new("y", "z")
    }

    #[test]
    fn minimal_file() {
        let records = read_csv("y,z\n3.5,1\n1.0,0\n".as_bytes(), &schema()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(arm_sizes(&records), (1, 1));
        assert_eq!(records[0].unit_id, "1");
    }

    #[test]
    fn treatment_out_of_domain_names_row() {
        let err = read_csv("y,z\n1,1\n2,2\n".as_bytes(), &schema()).unwrap_err();
        match err {
            Error::Validation(msg) => assert!(msg.contains("row 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_outcome() {
        let err = read_csv("y,z\n1,1\nabc,0\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }));
    }

    #[test]
    fn missing_column() {
        let err = read_csv("y,t\n1,1\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn duplicate_ids() {
        let s = schema().with_unit_id("id");
        let err = read_csv("id,y,z\na,1,1\na,2,0\n".as_bytes(), &s).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn missing_covariate_cell_is_an_error() {
        let s = schema().with_covariates(["w"]);
        let err = read_csv("y,z,w\n1,1,\n2,0,3\n".as_bytes(), &s).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn unpaired_pair_id() {
        let s = schema().with_pair("p");
        let err = read_csv("y,z,p\n1,1,a\n2,0,a\n3,1,b\n".as_bytes(), &s).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    fn records(treated: &[f64], control: &[f64]) -> Vec<UnitRecord> {
        let mut out = Vec::new();
        for &y in treated {
            out.push(UnitRecord::new(format!("t{}", out.len()), y, true));
        }
        for &y in control {
            out.push(UnitRecord::new(format!("c{}", out.len()), y, false));
        }
        out
    }

    #[test]
    fn union_support() {
        let s = build_support(&records(&[3.0, 1.0], &[2.0, 0.0]), SupportMode::ObservedUnion).unwrap();
        assert_eq!(s.values, vec![0.0, 1.0, 2.0, 3.0]);
        assert!(s.per_arm.is_none());
    }

    #[test]
    fn per_arm_support() {
        let s = build_support(&records(&[3.0, 1.0], &[2.0, 0.0]), SupportMode::ObservedPerArm).unwrap();
        assert_eq!(s.allowed_values(Arm::Treated), vec![1.0, 3.0]);
        assert_eq!(s.allowed_values(Arm::Control), vec![0.0, 2.0]);
    }

    #[test]
    fn identical_outcomes_give_single_point() {
        let s = build_support(&records(&[5.0, 5.0], &[5.0]), SupportMode::ObservedUnion).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn table_basics() {
        let t = PotentialOutcomeTable::from_columns(&[100.0, 200.0], &[110.0, 220.0]).unwrap();
        assert_eq!(t.ate(), 15.0);
        assert_eq!(t.observed(&[true, false]), vec![110.0, 200.0]);
        assert_eq!(t.value(Slot::new(1, Arm::Treated)), 220.0);
    }

    #[test]
    fn slot_index_roundtrip() {
        for i in 0..8 {
            assert_eq!(Slot::from_index(i, 4).index(4), i);
        }
    }
}
