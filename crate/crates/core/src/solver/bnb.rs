//! Depth-first branch-and-bound over one-hot groups.
//!
//! Bounds are computed in `f64` with a safety margin; leaves are checked
//! and evaluated in the program's own scalar, so exact programs stay exact.
//!
//! Two upper bounds are combined at every node, both separable per group
//! and both relaxed over the non-group rows with a shared multiplier
//! vector tuned by subgradient steps:
//!
//! * a pairwise bound that charges each unassigned group its best linear
//!   term, its interactions with assigned variables and the best
//!   interaction with every later group;
//! * when the program carries slot structure, a diagonal-dominance bound
//!   `Y_U' M_UU Y_U <= sum_u D_u y_u^2` with `D - M_UU` positive semidefinite.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::copula_ip::{BinaryProgram, LinearizedProgram, Relation};
use crate::scalar::Scalar;

use super::{SolveResult, SolveStatus, SolverOptions};

const ROOT_ITERATIONS: usize = 200;
const NODE_ITERATIONS: usize = 12;
const ROW_TOL: f64 = 1e-9;
const MAX_EIGEN_GROUPS: usize = 120;

struct Row {
    rhs: f64,
    eq: bool,
}

struct SlotBound {
    /// Symmetrized slot matrix.
    m: Vec<Vec<f64>>,
    /// Shifted grid value of each variable.
    y: Vec<f64>,
    /// Slot index of each group.
    slot_of_group: Vec<usize>,
    /// `diag[d][p]`: diagonal majorant for the group at position `p >= d`.
    diag: Vec<Vec<f64>>,
    exact0: f64,
    g0: Vec<f64>,
    margin: f64,
}

#[derive(Clone)]
struct Node {
    depth: usize,
    x: Vec<bool>,
    act: Vec<f64>,
    acc: Vec<f64>,
    cur: f64,
    g: Vec<f64>,
    exact: f64,
    lambda: Vec<f64>,
}

/// Reusable solver state for one program.
pub struct BranchAndBound<'a, S> {
    program: &'a BinaryProgram<S>,
    order: Vec<usize>,
    lin: Vec<f64>,
    constant: f64,
    nbrs: Vec<Vec<(usize, f64)>>,
    fut: Vec<f64>,
    rows: Vec<Row>,
    var_rows: Vec<Vec<(usize, f64)>>,
    /// `min_rest[r][d]`: smallest contribution of positions `>= d` to row `r`.
    min_rest: Vec<Vec<f64>>,
    max_rest: Vec<Vec<f64>>,
    slot: Option<SlotBound>,
}

struct Search<S> {
    incumbent: Option<(S, Vec<bool>)>,
    inc_f64: f64,
    nodes: u64,
    started: Instant,
    time_limit: Option<std::time::Duration>,
    node_limit: Option<u64>,
    stopped: bool,
}

impl<'a, S: Scalar> BranchAndBound<'a, S> {
    pub fn new(program: &'a BinaryProgram<S>) -> Self {
        let nv = program.num_vars();
        let lin: Vec<f64> = program.objective.linear.iter().map(Scalar::as_f64).collect();
        let mut nbrs = vec![Vec::new(); nv];
        for (u, v, c) in &program.objective.quadratic {
            let c = c.as_f64();
            nbrs[*u].push((*v, c));
            nbrs[*v].push((*u, c));
        }
        let mut group_of = vec![0; nv];
        for (h, g) in program.groups.iter().enumerate() {
            for &v in &g.vars {
                group_of[v] = h;
            }
        }

        // Most influential groups first.
        let weight = |h: usize| -> f64 {
            program.groups[h]
                .vars
                .iter()
                .map(|&w| lin[w].abs() + nbrs[w].iter().map(|(_, c)| c.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let mut order: Vec<usize> = (0..program.groups.len()).collect();
        let weights: Vec<f64> = order.iter().map(|&h| weight(h)).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        let mut pos = vec![0; order.len()];
        for (p, &h) in order.iter().enumerate() {
            pos[h] = p;
        }

        let mut fut = vec![0.0; nv];
        for (w, f) in fut.iter_mut().enumerate() {
            let pw = pos[group_of[w]];
            let mut best_by_group: Vec<f64> = vec![0.0; order.len()];
            let mut touched = vec![false; order.len()];
            for &(v, c) in &nbrs[w] {
                let p = pos[group_of[v]];
                if p > pw {
                    if !touched[p] {
                        touched[p] = true;
                        best_by_group[p] = f64::NEG_INFINITY;
                    }
                    best_by_group[p] = best_by_group[p].max(c);
                }
            }
            // Group members without an interaction contribute 0.
            for p in 0..order.len() {
                if touched[p] {
                    let members = program.groups[order[p]].vars.len();
                    let listed = nbrs[w].iter().filter(|(v, _)| pos[group_of[*v]] == p).count();
                    let best = if listed < members { best_by_group[p].max(0.0) } else { best_by_group[p] };
                    *f += best;
                }
            }
        }

        let mut rows = Vec::new();
        let mut var_rows = vec![Vec::new(); nv];
        let mut min_rest = Vec::new();
        let mut max_rest = Vec::new();
        for row in program.constraints.iter().filter(|r| !r.is_group_row()) {
            let r = rows.len();
            let mut lo = vec![0.0; order.len()];
            let mut hi = vec![0.0; order.len()];
            let mut per_var = vec![0.0; nv];
            for (v, c) in &row.terms {
                per_var[*v] += c.as_f64();
            }
            for (v, &c) in per_var.iter().enumerate() {
                if c != 0.0 {
                    var_rows[v].push((r, c));
                }
            }
            for (p, &h) in order.iter().enumerate() {
                let vals = program.groups[h].vars.iter().map(|&v| per_var[v]);
                lo[p] = vals.clone().fold(f64::INFINITY, f64::min);
                hi[p] = vals.fold(f64::NEG_INFINITY, f64::max);
            }
            min_rest.push(suffix_sums(&lo));
            max_rest.push(suffix_sums(&hi));
            rows.push(Row { rhs: row.rhs.as_f64(), eq: row.relation == Relation::Eq });
        }

        let slot = slot_bound(program, &order);
        Self {
            program,
            order,
            lin,
            constant: program.objective.constant.as_f64(),
            nbrs,
            fut,
            rows,
            var_rows,
            min_rest,
            max_rest,
            slot,
        }
    }

    /// Group indices in the order they are branched on.
    pub fn branch_order(&self) -> &[usize] {
        &self.order
    }

    /// Upper bound on the objective over completions of `prefix`, which
    /// gives one chosen variable per group in branch order. `None` when the
    /// prefix is detected infeasible.
    pub fn bound_at(&self, prefix: &[usize]) -> Option<f64> {
        let mut node = self.root();
        for &w in prefix {
            if !self.child_ok(&node, w) {
                return None;
            }
            node = self.assign(&node, w);
        }
        if !self.node_ok(&node) {
            return None;
        }
        Some(self.bound(&mut node, ROOT_ITERATIONS, f64::NEG_INFINITY).0)
    }

    fn root(&self) -> Node {
        let nv = self.program.num_vars();
        let (g, exact) = match &self.slot {
            Some(sb) => (sb.g0.clone(), sb.exact0),
            None => (Vec::new(), 0.0),
        };
        Node {
            depth: 0,
            x: vec![false; nv],
            act: vec![0.0; self.rows.len()],
            acc: vec![0.0; nv],
            cur: self.constant,
            g,
            exact,
            lambda: vec![0.0; self.rows.len()],
        }
    }

    fn assign(&self, node: &Node, w: usize) -> Node {
        let mut child = node.clone();
        child.depth += 1;
        child.x[w] = true;
        child.cur += self.lin[w] + node.acc[w];
        for &(v, c) in &self.nbrs[w] {
            child.acc[v] += c;
        }
        for &(r, a) in &self.var_rows[w] {
            child.act[r] += a;
        }
        if let Some(sb) = &self.slot {
            let u = sb.slot_of_group[self.order[node.depth]];
            let y = sb.y[w];
            child.exact += 2.0 * y * node.g[u] + sb.m[u][u] * y * y;
            for (gt, row) in child.g.iter_mut().zip(&sb.m) {
                *gt += row[u] * y;
            }
        }
        child
    }

    fn row_slack_ok(&self, r: usize, act: f64, depth: usize) -> bool {
        let row = &self.rows[r];
        let tol = ROW_TOL * (1.0 + row.rhs.abs());
        if act + self.min_rest[r][depth] > row.rhs + tol {
            return false;
        }
        !(row.eq && act + self.max_rest[r][depth] < row.rhs - tol)
    }

    fn node_ok(&self, node: &Node) -> bool {
        (0..self.rows.len()).all(|r| self.row_slack_ok(r, node.act[r], node.depth))
    }

    /// Whether choosing `w` at this node can still lead to a feasible leaf.
    fn child_ok(&self, node: &Node, w: usize) -> bool {
        let d = node.depth + 1;
        let mut touched = self.var_rows[w].iter().map(|&(r, a)| (r, node.act[r] + a)).collect::<Vec<_>>();
        touched.sort_by_key(|t| t.0);
        let mut it = touched.iter().peekable();
        for r in 0..self.rows.len() {
            let act = match it.peek() {
                Some(&&(rr, a)) if rr == r => {
                    it.next();
                    a
                }
                _ => node.act[r],
            };
            if !self.row_slack_ok(r, act, d) {
                return false;
            }
        }
        true
    }

    fn pair_score(&self, node: &Node, w: usize) -> f64 {
        self.lin[w] + node.acc[w] + self.fut[w]
    }

    fn slot_score(&self, sb: &SlotBound, node: &Node, p: usize, w: usize) -> f64 {
        let u = sb.slot_of_group[self.order[p]];
        let y = sb.y[w];
        2.0 * y * node.g[u] + sb.diag[node.depth][p] * y * y
    }

    fn price(&self, lambda: &[f64], w: usize) -> f64 {
        self.var_rows[w].iter().map(|&(r, a)| lambda[r] * a).sum()
    }

    /// Lagrangian bound; updates the node's multipliers to the best found.
    /// Returns the bound and whether the slot form was the tighter one.
    fn bound(&self, node: &mut Node, iterations: usize, target: f64) -> (f64, bool) {
        let nrows = self.rows.len();
        let mut lambda = node.lambda.clone();
        let mut best = (f64::INFINITY, false);
        let mut best_lambda = lambda.clone();
        let mut theta = 1.0;
        let mut stall = 0;
        let mut pick_pair = vec![0usize; self.order.len()];
        let mut pick_slot = vec![0usize; self.order.len()];
        for _ in 0..iterations.max(1) {
            let dual: f64 = (0..nrows).map(|r| lambda[r] * (self.rows[r].rhs - node.act[r])).sum();
            let mut pair = self.constant_part(node, false) + dual;
            let mut slot = self.slot.as_ref().map(|_| self.constant_part(node, true) + dual);
            for p in node.depth..self.order.len() {
                let mut bp = (f64::NEG_INFINITY, 0);
                let mut bs = (f64::NEG_INFINITY, 0);
                for &w in &self.program.groups[self.order[p]].vars {
                    let price = self.price(&lambda, w);
                    let sp = self.pair_score(node, w) - price;
                    if sp > bp.0 {
                        bp = (sp, w);
                    }
                    if let Some(sb) = &self.slot {
                        let ss = self.slot_score(sb, node, p, w) - price;
                        if ss > bs.0 {
                            bs = (ss, w);
                        }
                    }
                }
                pair += bp.0;
                pick_pair[p] = bp.1;
                if let Some(s) = slot.as_mut() {
                    *s += bs.0;
                    pick_slot[p] = bs.1;
                }
            }
            let (value, use_slot) = match slot {
                Some(s) if s < pair => (s, true),
                _ => (pair, false),
            };
            if value < best.0 - 1e-12 * value.abs().max(1.0) {
                best = (value, use_slot);
                best_lambda.clone_from(&lambda);
                stall = 0;
            } else {
                stall += 1;
                if stall >= 3 {
                    theta /= 2.0;
                    stall = 0;
                }
            }
            if value <= target || nrows == 0 {
                break;
            }
            let picks = if use_slot { &pick_slot } else { &pick_pair };
            let mut sub: Vec<f64> = (0..nrows).map(|r| self.rows[r].rhs - node.act[r]).collect();
            for &w in &picks[node.depth..] {
                for &(r, a) in &self.var_rows[w] {
                    sub[r] -= a;
                }
            }
            for (r, s) in sub.iter_mut().enumerate() {
                // Projected direction: a nonnegative multiplier at zero cannot decrease.
                if !self.rows[r].eq && lambda[r] <= 0.0 && *s > 0.0 {
                    *s = 0.0;
                }
            }
            let norm2: f64 = sub.iter().map(|s| s * s).sum();
            if norm2 <= 1e-18 {
                break;
            }
            let goal = if target.is_finite() { target } else { value - 0.05 * value.abs().max(1.0) };
            let step = theta * (value - goal) / norm2;
            for r in 0..nrows {
                lambda[r] -= step * sub[r];
                if !self.rows[r].eq {
                    lambda[r] = lambda[r].max(0.0);
                }
            }
            if theta < 1e-6 {
                break;
            }
        }
        node.lambda = best_lambda;
        let margin = if best.1 { self.slot.as_ref().map_or(0.0, |s| s.margin) } else { 0.0 };
        let value = best.0;
        (value + margin + 1e-12 * value.abs().max(1.0), best.1)
    }

    fn constant_part(&self, node: &Node, slot: bool) -> f64 {
        if slot {
            node.exact
        } else {
            node.cur
        }
    }

    fn child_order(&self, node: &Node, use_slot: bool) -> Vec<(f64, usize)> {
        let p = node.depth;
        let mut scored: Vec<(f64, usize)> = self.program.groups[self.order[p]]
            .vars
            .iter()
            .map(|&w| {
                let base = match (&self.slot, use_slot) {
                    (Some(sb), true) => self.slot_score(sb, node, p, w),
                    _ => self.pair_score(node, w),
                };
                (base - self.price(&node.lambda, w), w)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored
    }

    fn prunable(&self, bound: f64, search: &Search<S>) -> bool {
        if search.incumbent.is_none() {
            return false;
        }
        let inc = search.inc_f64;
        let tol = 1e-9 * inc.abs().max(1.0);
        if S::is_exact() {
            bound + tol < inc
        } else {
            bound <= inc + tol
        }
    }

    fn offer(&self, x: &[bool], search: &mut Search<S>) {
        if !self.program.is_feasible(x) {
            return;
        }
        let v = self.program.evaluate(x);
        if search.incumbent.as_ref().is_none_or(|(b, _)| v > *b) {
            search.inc_f64 = v.as_f64();
            search.incumbent = Some((v, x.to_vec()));
        }
    }

    fn dfs(&self, mut node: Node, search: &mut Search<S>) {
        search.nodes += 1;
        if search.stopped || self.limit_hit(search) {
            search.stopped = true;
            return;
        }
        if node.depth == self.order.len() {
            self.offer(&node.x, search);
            return;
        }
        let iterations = if node.depth == 0 { ROOT_ITERATIONS } else { NODE_ITERATIONS };
        let target = if search.incumbent.is_some() { search.inc_f64 } else { f64::NEG_INFINITY };
        let (bound, use_slot) = self.bound(&mut node, iterations, target);
        if self.prunable(bound, search) {
            return;
        }
        for (_, w) in self.child_order(&node, use_slot) {
            if !self.child_ok(&node, w) {
                continue;
            }
            let child = self.assign(&node, w);
            self.dfs(child, search);
            if search.stopped || self.prunable(bound, search) {
                return;
            }
        }
    }

    fn limit_hit(&self, search: &Search<S>) -> bool {
        if search.node_limit.is_some_and(|l| search.nodes > l) {
            return true;
        }
        search.nodes.is_multiple_of(256) && search.time_limit.is_some_and(|t| search.started.elapsed() > t)
    }

    /// Greedy choice per group, then violation repair and 1-opt moves.
    fn heuristic(&self) -> Option<Vec<bool>> {
        let groups = &self.program.groups;
        if groups.iter().any(|g| g.vars.is_empty()) {
            return None;
        }
        let mut choice: Vec<usize> = groups
            .iter()
            .map(|g| {
                (0..g.vars.len()).max_by(|&a, &b| self.lin[g.vars[a]].total_cmp(&self.lin[g.vars[b]])).unwrap_or(0)
            })
            .collect();
        let violation = |choice: &[usize]| -> f64 {
            let mut act = vec![0.0; self.rows.len()];
            for (g, &c) in groups.iter().zip(choice) {
                for &(r, a) in &self.var_rows[g.vars[c]] {
                    act[r] += a;
                }
            }
            act.iter()
                .zip(&self.rows)
                .map(|(a, row)| {
                    let over = (a - row.rhs).max(0.0);
                    if row.eq {
                        over + (row.rhs - a).max(0.0)
                    } else {
                        over
                    }
                })
                .sum()
        };
        let mut viol = violation(&choice);
        let mut rounds = 0;
        while viol > ROW_TOL && rounds < 10 * groups.len().max(1) {
            rounds += 1;
            let mut best: Option<(f64, usize, usize)> = None;
            for h in 0..groups.len() {
                let keep = choice[h];
                for c in 0..groups[h].vars.len() {
                    if c == keep {
                        continue;
                    }
                    choice[h] = c;
                    let v = violation(&choice);
                    if v < viol - 1e-12 && best.is_none_or(|b| v < b.0) {
                        best = Some((v, h, c));
                    }
                }
                choice[h] = keep;
            }
            match best {
                Some((v, h, c)) => {
                    choice[h] = c;
                    viol = v;
                }
                None => break,
            }
        }
        let mut x = self.program.from_choices(&choice);
        if !self.program.is_feasible(&x) {
            return None;
        }
        let mut value = self.program.evaluate(&x);
        let mut improved = true;
        let mut passes = 0;
        while improved && passes < 20 {
            improved = false;
            passes += 1;
            for h in 0..groups.len() {
                for c in 0..groups[h].vars.len() {
                    if c == choice[h] {
                        continue;
                    }
                    x[groups[h].vars[choice[h]]] = false;
                    x[groups[h].vars[c]] = true;
                    if self.program.is_feasible(&x) {
                        let v = self.program.evaluate(&x);
                        if v > value {
                            value = v;
                            choice[h] = c;
                            improved = true;
                            continue;
                        }
                    }
                    x[groups[h].vars[c]] = false;
                    x[groups[h].vars[choice[h]]] = true;
                }
            }
        }
        Some(x)
    }

    pub fn solve(&self, options: &SolverOptions) -> SolveResult<S> {
        let mut search = Search {
            incumbent: None,
            inc_f64: f64::NEG_INFINITY,
            nodes: 0,
            started: Instant::now(),
            time_limit: options.time_limit,
            node_limit: options.node_limit,
            stopped: false,
        };
        if let Some(ws) = &options.warm_start {
            if ws.len() == self.program.num_vars() {
                self.offer(ws, &mut search);
            }
        }
        if let Some(x) = self.heuristic() {
            self.offer(&x, &mut search);
        }
        let root = self.root();
        if self.node_ok(&root) {
            self.dfs(root, &mut search);
        }
        let (status, message) = if search.stopped {
            (SolveStatus::CapacityExceeded, Some(format!("search stopped after {} nodes", search.nodes)))
        } else if search.incumbent.is_some() {
            (SolveStatus::Optimal, None)
        } else {
            (SolveStatus::Infeasible, Some("no assignment satisfies the constraints".into()))
        };
        let (value, assignment) = match search.incumbent {
            Some((v, x)) => (Some(v), Some(x)),
            None => (None, None),
        };
        SolveResult {
            status,
            optimal_value: value,
            assignment,
            nodes_explored: search.nodes,
            wall_time: search.started.elapsed(),
            message,
        }
    }
}

fn suffix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len() + 1];
    for p in (0..values.len()).rev() {
        out[p] = out[p + 1] + values[p];
    }
    out
}

fn lambda_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

fn slot_bound<S: Scalar>(program: &BinaryProgram<S>, order: &[usize]) -> Option<SlotBound> {
    let st = program.structure.as_ref()?;
    let slots = 2 * st.n;
    if st.matrix.len() != slots || program.variables.iter().any(|v| v.origin.is_none()) {
        return None;
    }
    let slot_of_group: Vec<usize> =
        program.groups.iter().map(|g| g.slot.map(|s| s.index(st.n))).collect::<Option<_>>()?;
    let m: Vec<Vec<f64>> =
        (0..slots).map(|s| (0..slots).map(|t| 0.5 * (st.matrix[s][t] + st.matrix[t][s])).collect()).collect();
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let residual: Vec<f64> = m.iter().map(|row| row.iter().sum()).collect();
    let resid_l1: f64 = residual.iter().map(|r| r.abs()).sum();
    let (gmin, gmax) = st.grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let shift = if st.grid.is_empty() || resid_l1 > 1e-9 * scale.max(1e-300) * slots as f64 {
        0.0
    } else {
        0.5 * (gmin + gmax)
    };
    let y: Vec<f64> = program.variables.iter().map(|v| st.grid[v.origin.expect("checked").1] - shift).collect();
    let ymax = st.grid.iter().map(|g| (g - shift).abs()).fold(0.0, f64::max);

    let fixed_y: Vec<f64> = st.fixed.iter().map(|f| f.map_or(0.0, |k| st.grid[k] - shift)).collect();
    let g0: Vec<f64> = m.iter().map(|row| row.iter().zip(&fixed_y).map(|(a, b)| a * b).sum()).collect();
    let exact0: f64 = fixed_y.iter().zip(&g0).map(|(a, b)| a * b).sum();

    let weight: Vec<f64> = program
        .groups
        .iter()
        .map(|g| g.vars.iter().map(|&v| y[v] * y[v]).fold(0.0, f64::max))
        .collect();
    let gsize = order.len();
    let mut diag = vec![vec![0.0; gsize]; gsize + 1];
    for (d, dd) in diag.iter_mut().enumerate().take(gsize) {
        let us: Vec<usize> = order[d..].iter().map(|&h| slot_of_group[h]).collect();
        let ws: Vec<f64> = order[d..].iter().map(|&h| weight[h]).collect();
        let nu = us.len();
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        candidates.push(
            us.iter()
                .map(|&u| m[u][u] + us.iter().filter(|&&v| v != u).map(|&v| m[u][v].abs()).sum::<f64>())
                .collect(),
        );
        if nu <= MAX_EIGEN_GROUPS {
            let full = DMatrix::from_fn(nu, nu, |a, b| m[us[a]][us[b]]);
            let lmax = lambda_max(&full);
            candidates.push(vec![lmax; nu]);
            let off = DMatrix::from_fn(nu, nu, |a, b| if a == b { 0.0 } else { m[us[a]][us[b]] });
            let loff = lambda_max(&off);
            candidates.push(us.iter().map(|&u| m[u][u] + loff).collect());
        }
        let frob = us.iter().flat_map(|&u| us.iter().map(move |&v| (u, v))).map(|(u, v)| m[u][v].powi(2)).sum::<f64>();
        let pad = 1e-12 * frob.sqrt() * nu as f64;
        let best = candidates
            .into_iter()
            .min_by(|a, b| {
                let wa: f64 = a.iter().zip(&ws).map(|(x, w)| x * w).sum();
                let wb: f64 = b.iter().zip(&ws).map(|(x, w)| x * w).sum();
                wa.total_cmp(&wb)
            })
            .expect("at least one candidate");
        for (i, p) in (d..gsize).enumerate() {
            dd[p] = best[i] + pad;
        }
    }
    let abs_sum: f64 = m.iter().flatten().map(|v| v.abs()).sum();
    let margin = resid_l1 * (2.0 * shift.abs() * ymax + shift * shift) + 1e-11 * abs_sum * ymax.max(1.0).powi(2);
    Some(SlotBound { m, y, slot_of_group, diag, exact0, g0, margin })
}

pub fn solve_branch_and_bound<S: Scalar>(program: &LinearizedProgram<S>, options: &SolverOptions) -> SolveResult<S> {
    BranchAndBound::new(&program.base).solve(options)
}
