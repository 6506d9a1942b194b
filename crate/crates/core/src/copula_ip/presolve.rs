use std::collections::HashMap;

use crate::data::Slot;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{
    BinaryProgram, Group, ImputationProgram, LinearConstraint, QuadraticObjective, RowKind, SlotStructure, Variable,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Free,
    One,
    Zero,
}

/// Substitutes pinned and excluded indicators, fixes forced slots and
/// rewrites the objective over the remaining free indicators.
pub fn presolve<S: Scalar>(program: &ImputationProgram<S>) -> Result<BinaryProgram<S>> {
    let layout = &program.layout;
    let (n, k) = (layout.n, layout.k);
    let slots = 2 * n;
    let mut state = vec![State::Free; layout.num_vars()];

    for row in &program.constraints {
        match row.kind {
            RowKind::Pin { unit } => {
                let (v, _) = single_term(row)?;
                if state[v] == State::Zero {
                    return Err(Error::Inconsistent(format!("unit {unit}: observed value is excluded by the support")));
                }
                state[v] = State::One;
            }
            RowKind::Support { .. } => {
                let (v, _) = single_term(row)?;
                if state[v] == State::One {
                    return Err(Error::Inconsistent(format!(
                        "`{}` excludes an observed value ({})",
                        row.name,
                        layout.var_name(v)
                    )));
                }
                state[v] = State::Zero;
            }
            _ => {}
        }
    }

    let mut fixed: Vec<Option<usize>> = vec![None; slots];
    let mut free_groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (s, slot_fixed) in fixed.iter_mut().enumerate() {
        let vars: Vec<usize> = (0..k).map(|kk| s * k + kk).collect();
        let ones: Vec<usize> = vars.iter().copied().filter(|&v| state[v] == State::One).collect();
        let open: Vec<usize> = vars.iter().copied().filter(|&v| state[v] == State::Free).collect();
        let slot = Slot::from_index(s, n);
        match (ones.len(), open.len()) {
            (1, _) => {
                for &v in &open {
                    state[v] = State::Zero;
                }
                *slot_fixed = Some(ones[0] % k);
            }
            (0, 0) => {
                return Err(Error::Inconsistent(format!(
                    "unit {} arm {} has no admissible support value",
                    slot.unit,
                    slot.arm.index()
                )))
            }
            (0, 1) => {
                state[open[0]] = State::One;
                *slot_fixed = Some(open[0] % k);
            }
            (0, _) => free_groups.push((s, open)),
            _ => {
                return Err(Error::Inconsistent(format!(
                    "unit {} arm {} is pinned to several values",
                    slot.unit,
                    slot.arm.index()
                )))
            }
        }
    }

    let mut index_of: HashMap<usize, usize> = HashMap::new();
    let mut variables = Vec::new();
    let mut groups = Vec::new();
    for (s, vars) in &free_groups {
        let mut members = Vec::with_capacity(vars.len());
        for &v in vars {
            index_of.insert(v, variables.len());
            members.push(variables.len());
            variables.push(Variable { name: layout.var_name(v), origin: Some((Slot::from_index(*s, n), v % k)) });
        }
        groups.push(Group { vars: members, slot: Some(Slot::from_index(*s, n)) });
    }

    let mut constraints = Vec::new();
    for row in &program.constraints {
        if matches!(row.kind, RowKind::Pin { .. } | RowKind::Support { .. }) {
            continue;
        }
        let mut rhs = row.rhs.clone();
        let mut terms = Vec::new();
        for (v, c) in &row.terms {
            match state[*v] {
                State::One => rhs = rhs - c.clone(),
                State::Zero => {}
                State::Free => terms.push((index_of[v], c.clone())),
            }
        }
        if let RowKind::OneHot { .. } = row.kind {
            if terms.is_empty() {
                if !rhs.is_zero() {
                    return Err(Error::Inconsistent(format!("`{}` cannot be satisfied", row.name)));
                }
                continue;
            }
        }
        constraints.push(LinearConstraint { name: row.name.clone(), kind: row.kind, terms, relation: row.relation, rhs });
    }

    let objective = reduce_objective(program, &fixed, &free_groups, &index_of, variables.len());
    let grid_f64: Vec<f64> = program.objective.grid.iter().map(Scalar::as_f64).collect();
    Ok(BinaryProgram {
        variables,
        groups,
        constraints,
        objective,
        structure: Some(SlotStructure { n, grid: grid_f64, fixed, matrix: program.objective.slots.to_f64() }),
        metadata: Some(program.metadata.clone()),
    })
}

fn single_term<S: Scalar>(row: &LinearConstraint<S>) -> Result<(usize, S)> {
    match row.terms.as_slice() {
        [(v, c)] if c.is_one() => Ok((*v, c.clone())),
        _ => Err(Error::Inconsistent(format!("`{}` is not a single-indicator row", row.name))),
    }
}

fn reduce_objective<S: Scalar>(
    program: &ImputationProgram<S>,
    fixed: &[Option<usize>],
    free_groups: &[(usize, Vec<usize>)],
    index_of: &HashMap<usize, usize>,
    num_free: usize,
) -> QuadraticObjective<S> {
    let m = &program.objective.slots.m;
    let grid = &program.objective.grid;
    let k = grid.len();
    let fixed_value: Vec<Option<S>> = fixed.iter().map(|f| f.map(|kk| grid[kk].clone())).collect();

    let mut constant = S::zero();
    for (s, ys) in fixed_value.iter().enumerate() {
        let Some(ys) = ys else { continue };
        for (t, yt) in fixed_value.iter().enumerate() {
            if let Some(yt) = yt {
                constant = constant + m[s][t].clone() * ys.clone() * yt.clone();
            }
        }
    }

    let mut linear = vec![S::zero(); num_free];
    for (s, vars) in free_groups {
        // sum_t (M_st + M_ts) Y_t over fixed slots.
        let cross = fixed_value
            .iter()
            .enumerate()
            .filter_map(|(t, yt)| yt.as_ref().map(|yt| (m[*s][t].clone() + m[t][*s].clone()) * yt.clone()))
            .fold(S::zero(), |acc, v| acc + v);
        for &v in vars {
            let y = grid[v % k].clone();
            linear[index_of[&v]] = m[*s][*s].clone() * y.clone() * y.clone() + y * cross.clone();
        }
    }

    let mut quadratic = Vec::new();
    for (gi, (s, vars_s)) in free_groups.iter().enumerate() {
        for (t, vars_t) in &free_groups[gi + 1..] {
            let base = m[*s][*t].clone() + m[*t][*s].clone();
            if base.is_zero() {
                continue;
            }
            for &u in vars_s {
                for &v in vars_t {
                    let c = base.clone() * grid[u % k].clone() * grid[v % k].clone();
                    if !c.is_zero() {
                        let (a, b) = (index_of[&u], index_of[&v]);
                        quadratic.push(if a < b { (a, b, c) } else { (b, a, c) });
                    }
                }
            }
        }
    }
    quadratic.sort_by_key(|a| (a.0, a.1));
    QuadraticObjective { constant, linear, quadratic }
}
