use std::time::Instant;

use crate::copula_ip::{BinaryProgram, LinearizedProgram};
use crate::scalar::Scalar;

use super::{SolveResult, SolveStatus};

pub const DEFAULT_EXHAUSTIVE_CAP: usize = 24;

/// Odometer over one choice per group, calling `visit` with each point.
fn for_each_point<F: FnMut(&[bool])>(program: &BinaryProgram<impl Scalar>, mut visit: F) -> u64 {
    let sizes: Vec<usize> = program.groups.iter().map(|g| g.vars.len()).collect();
    if sizes.contains(&0) {
        return 0;
    }
    let mut choices = vec![0usize; sizes.len()];
    let mut count = 0u64;
    loop {
        visit(&program.from_choices(&choices));
        count += 1;
        let mut g = 0;
        loop {
            if g == sizes.len() {
                return count;
            }
            choices[g] += 1;
            if choices[g] < sizes[g] {
                break;
            }
            choices[g] = 0;
            g += 1;
        }
    }
}

fn capacity<S: Scalar>(free: usize, cap: usize, started: Instant) -> SolveResult<S> {
    SolveResult {
        status: SolveStatus::CapacityExceeded,
        optimal_value: None,
        assignment: None,
        nodes_explored: 0,
        wall_time: started.elapsed(),
        message: Some(format!("{free} free variables exceed the exhaustive cap of {cap}")),
    }
}

fn finish<S: Scalar>(best: Option<(S, Vec<bool>)>, nodes: u64, started: Instant) -> SolveResult<S> {
    let (status, value, assignment) = match best {
        Some((v, x)) => (SolveStatus::Optimal, Some(v), Some(x)),
        None => (SolveStatus::Infeasible, None, None),
    };
    SolveResult { status, optimal_value: value, assignment, nodes_explored: nodes, wall_time: started.elapsed(), message: None }
}

/// Global maximum by enumerating every one-hot-respecting point.
pub fn solve_exhaustive<S: Scalar>(program: &BinaryProgram<S>, cap: usize) -> SolveResult<S> {
    let started = Instant::now();
    if program.num_vars() > cap {
        return capacity(program.num_vars(), cap, started);
    }
    let mut best: Option<(S, Vec<bool>)> = None;
    let nodes = for_each_point(program, |x| {
        if !program.is_feasible(x) {
            return;
        }
        let v = program.evaluate(x);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, x.to_vec()));
        }
    });
    finish(best, nodes, started)
}

/// Same enumeration on the linearized form: products are set from their
/// factors and every row, links included, is checked.
pub fn solve_exhaustive_linearized<S: Scalar>(program: &LinearizedProgram<S>, cap: usize) -> SolveResult<S> {
    let started = Instant::now();
    if program.base.num_vars() > cap {
        return capacity(program.base.num_vars(), cap, started);
    }
    let mut best: Option<(S, Vec<bool>)> = None;
    let nodes = for_each_point(&program.base, |x| {
        let ext = program.extend(x);
        if !program.is_feasible(&ext) {
            return;
        }
        let v = program.evaluate(&ext);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, x.to_vec()));
        }
    });
    finish(best, nodes, started)
}
