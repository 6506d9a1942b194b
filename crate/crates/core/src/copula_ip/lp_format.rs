//! CPLEX-LP export and the plain `name value` solution format.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{LinearizedProgram, Relation};

/// Auxiliary variable fixed to 1 that carries the objective constant.
pub const CONST_VAR: &str = "const_one";

const TERMS_PER_LINE: usize = 8;

fn push_terms(out: &mut String, terms: &[(String, f64)]) {
    if terms.is_empty() {
        out.push_str(&format!(" 0 {CONST_VAR}"));
        return;
    }
    for (idx, (name, c)) in terms.iter().enumerate() {
        if idx > 0 && idx % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if *c < 0.0 { '-' } else { '+' };
        if idx == 0 && sign == '+' {
            let _ = write!(out, " {:?} {name}", c.abs());
        } else {
            let _ = write!(out, " {sign} {:?} {name}", c.abs());
        }
    }
}

/// Renders the linearized program as CPLEX-LP text.
///
/// Coefficients are written as `f64`; exact rational programs are rounded
/// to the nearest double at this boundary.
pub fn write_lp<S: Scalar, W: Write>(program: &LinearizedProgram<S>, mut out: W) -> Result<()> {
    let mut text = String::new();
    text.push_str("\\ variance-maximizing imputation program\n");
    if let Some(meta) = &program.base.metadata {
        let _ = writeln!(
            text,
            "\\ epsilon = {:?}, flavor = {}, estimator = {}",
            meta.epsilon,
            meta.flavor.tag(),
            meta.estimator
        );
    }
    text.push_str("Maximize\n obj:");
    let mut terms: Vec<(String, f64)> = program
        .linear
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| (program.var_name(i), c.as_f64()))
        .collect();
    if !program.constant.is_zero() {
        terms.push((CONST_VAR.to_string(), program.constant.as_f64()));
    }
    push_terms(&mut text, &terms);
    text.push_str("\nSubject To\n");
    for row in program.rows() {
        let _ = write!(text, " {}:", row.name);
        let terms: Vec<(String, f64)> =
            row.terms.iter().map(|(v, c)| (program.var_name(*v), c.as_f64())).collect();
        push_terms(&mut text, &terms);
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
        };
        let _ = writeln!(text, " {rel} {:?}", row.rhs.as_f64());
    }
    let _ = writeln!(text, "Bounds\n {CONST_VAR} = 1");
    text.push_str("Binary\n");
    for i in 0..program.num_vars() {
        let _ = writeln!(text, " {}", program.var_name(i));
    }
    text.push_str("End\n");
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn write_lp_file<S: Scalar>(program: &LinearizedProgram<S>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_lp(program, std::io::BufWriter::new(file))
}

/// Parsed solution: variable values plus the optional reported objective.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolutionFile {
    pub values: Vec<(String, f64)>,
    pub objective: Option<f64>,
}

impl SolutionFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(obj) = self.objective {
            let _ = writeln!(out, "objective {obj:?}");
        }
        for (name, v) in &self.values {
            let _ = writeln!(out, "{name} {v:?}");
        }
        out
    }
}

/// Reads whitespace-separated `name value` lines. Blank lines and lines
/// starting with `#` or `\` are ignored; `objective <value>` is reserved.
pub fn parse_solution(text: &str) -> Result<SolutionFile> {
    let mut sol = SolutionFile::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('\\') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(raw), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::MalformedSolution(format!("line {}: expected `name value`, got `{line}`", lineno + 1)));
        };
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::MalformedSolution(format!("line {}: `{raw}` is not a number", lineno + 1)))?;
        if !value.is_finite() {
            return Err(Error::MalformedSolution(format!("line {}: non-finite value", lineno + 1)));
        }
        if name == "objective" {
            if sol.objective.replace(value).is_some() {
                return Err(Error::MalformedSolution(format!("line {}: objective given twice", lineno + 1)));
            }
        } else {
            sol.values.push((name.to_string(), value));
        }
    }
    Ok(sol)
}
