//! Round trip through an out-of-process solver via LP and solution files.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use crate::copula_ip::{parse_solution, write_lp, LinearizedProgram, SolutionFile, CONST_VAR};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{SolveResult, SolveStatus};

const VALUE_TOL: f64 = 1e-6;

/// Solution file for a base assignment, products and objective included.
pub fn solution_for<S: Scalar>(program: &LinearizedProgram<S>, x: &[bool]) -> SolutionFile {
    let ext = program.extend(x);
    SolutionFile {
        values: ext
            .iter()
            .enumerate()
            .map(|(i, &b)| (program.var_name(i), if b { 1.0 } else { 0.0 }))
            .collect(),
        objective: Some(program.evaluate(&ext).as_f64()),
    }
}

/// Validates an external solution against the program and re-evaluates it.
///
/// Every variable must appear with a 0/1 value, every row must hold and a
/// reported objective must agree with the recomputed one.
pub fn import_solution<S: Scalar>(program: &LinearizedProgram<S>, solution: &SolutionFile) -> Result<SolveResult<S>> {
    let index: HashMap<String, usize> = (0..program.num_vars()).map(|i| (program.var_name(i), i)).collect();
    let mut seen: Vec<Option<bool>> = vec![None; program.num_vars()];
    for (name, value) in &solution.values {
        if name == CONST_VAR {
            if (value - 1.0).abs() > VALUE_TOL {
                return Err(Error::MalformedSolution(format!("`{CONST_VAR}` must be 1, got {value}")));
            }
            continue;
        }
        let &i = index.get(name).ok_or_else(|| Error::MalformedSolution(format!("unknown variable `{name}`")))?;
        let bit = if value.abs() <= VALUE_TOL {
            false
        } else if (value - 1.0).abs() <= VALUE_TOL {
            true
        } else {
            return Err(Error::MalformedSolution(format!("`{name}` = {value} is not binary")));
        };
        if seen[i].replace(bit).is_some() {
            return Err(Error::MalformedSolution(format!("`{name}` given twice")));
        }
    }
    let x_ext = seen
        .iter()
        .enumerate()
        .map(|(i, b)| b.ok_or_else(|| Error::MalformedSolution(format!("missing variable `{}`", program.var_name(i)))))
        .collect::<Result<Vec<bool>>>()?;
    if let Some(row) = program.violated_row(&x_ext) {
        return Err(Error::SolutionValidation(format!("constraint `{}` is violated", row.name)));
    }
    let value = program.evaluate(&x_ext);
    if let Some(reported) = solution.objective {
        let v = value.as_f64();
        if (reported - v).abs() > 1e-6 * v.abs().max(1.0) {
            return Err(Error::SolutionValidation(format!("reported objective {reported} differs from recomputed {v}")));
        }
    }
    Ok(SolveResult {
        status: SolveStatus::Optimal,
        optimal_value: Some(value),
        assignment: Some(x_ext[..program.base.num_vars()].to_vec()),
        nodes_explored: 0,
        wall_time: Duration::ZERO,
        message: Some("imported from an external solver; optimality is not certified".into()),
    })
}

/// Checks that `lp_path` is the export of `program`, then imports the
/// solution at `solution_path`.
pub fn roundtrip_external<S: Scalar>(
    program: &LinearizedProgram<S>,
    lp_path: impl AsRef<Path>,
    solution_path: impl AsRef<Path>,
) -> Result<SolveResult<S>> {
    let on_disk = std::fs::read(lp_path.as_ref())?;
    let mut current = Vec::new();
    write_lp(program, &mut current)?;
    if on_disk != current {
        return Err(Error::SolutionValidation(format!(
            "{} does not match the current program; re-export it",
            lp_path.as_ref().display()
        )));
    }
    let text = std::fs::read_to_string(solution_path)?;
    import_solution(program, &parse_solution(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula_ip::{linearize, BinaryProgram, QuadraticObjective};

    fn program() -> LinearizedProgram<f64> {
        linearize(
            &BinaryProgram::new(
                vec!["a".into(), "b".into(), "c".into(), "d".into()],
                vec![vec![0, 1], vec![2, 3]],
                vec![],
                QuadraticObjective { constant: 1.0, linear: vec![1.0, 0.0, 0.0, 2.0], quadratic: vec![(0, 2, 5.0)] },
            )
            .unwrap(),
        )
    }

    #[test]
    fn own_solution_imports() {
        let lp = program();
        let sol = solution_for(&lp, &[true, false, true, false]);
        let res = import_solution(&lp, &sol).unwrap();
        assert_eq!(res.optimal_value, Some(7.0));
    }

    #[test]
    fn inconsistent_product_rejected() {
        let lp = program();
        let mut sol = solution_for(&lp, &[true, false, true, false]);
        sol.values.last_mut().unwrap().1 = 0.0;
        sol.objective = None;
        assert!(matches!(import_solution(&lp, &sol), Err(Error::SolutionValidation(m)) if m.contains("link_p0_uv")));
    }

    #[test]
    fn unknown_and_missing_names() {
        let lp = program();
        let mut sol = solution_for(&lp, &[true, false, true, false]);
        sol.values.push(("zz".into(), 0.0));
        assert!(matches!(import_solution(&lp, &sol), Err(Error::MalformedSolution(_))));
        sol.values.pop();
        sol.values.remove(0);
        assert!(matches!(import_solution(&lp, &sol), Err(Error::MalformedSolution(_))));
    }

    #[test]
    fn objective_mismatch_rejected() {
        let lp = program();
        let mut sol = solution_for(&lp, &[true, false, true, false]);
        sol.objective = Some(8.0);
        assert!(matches!(import_solution(&lp, &sol), Err(Error::SolutionValidation(_))));
    }
}
