use crate::scalar::Scalar;

use super::{BinaryProgram, LinearConstraint, Relation, RowKind};

/// Product variable standing for `x_u * x_v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Product {
    pub u: usize,
    pub v: usize,
}

/// A [`BinaryProgram`] with every quadratic term replaced by a product
/// variable. Extended indices are the base variables followed by products.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedProgram<S> {
    pub base: BinaryProgram<S>,
    pub products: Vec<Product>,
    pub link_constraints: Vec<LinearConstraint<S>>,
    pub constant: S,
    /// Objective coefficient of every extended variable.
    pub linear: Vec<S>,
}

impl<S: Scalar> LinearizedProgram<S> {
    pub fn num_vars(&self) -> usize {
        self.base.num_vars() + self.products.len()
    }

    pub fn var_name(&self, index: usize) -> String {
        let nb = self.base.num_vars();
        if index < nb {
            self.base.variables[index].name.clone()
        } else {
            let p = self.products[index - nb];
            format!("p_{}_{}", p.u, p.v)
        }
    }

    /// Extends a base point with consistent product values.
    pub fn extend(&self, x: &[bool]) -> Vec<bool> {
        let mut out = x.to_vec();
        out.extend(self.products.iter().map(|p| x[p.u] && x[p.v]));
        out
    }

    pub fn evaluate(&self, x_ext: &[bool]) -> S {
        self.linear
            .iter()
            .zip(x_ext)
            .filter(|(_, &on)| on)
            .fold(self.constant.clone(), |acc, (c, _)| acc + c.clone())
    }

    pub fn rows(&self) -> impl Iterator<Item = &LinearConstraint<S>> {
        self.base.constraints.iter().chain(&self.link_constraints)
    }

    pub fn violated_row(&self, x_ext: &[bool]) -> Option<&LinearConstraint<S>> {
        self.rows().find(|c| !c.is_satisfied(x_ext))
    }

    pub fn is_feasible(&self, x_ext: &[bool]) -> bool {
        self.violated_row(x_ext).is_none()
    }
}

impl<S: Scalar> From<BinaryProgram<S>> for LinearizedProgram<S> {
    fn from(base: BinaryProgram<S>) -> Self {
        linearize(&base)
    }
}

/// One product variable and three link rows per nonzero quadratic term.
pub fn linearize<S: Scalar>(program: &BinaryProgram<S>) -> LinearizedProgram<S> {
    let nb = program.num_vars();
    let mut products = Vec::with_capacity(program.objective.quadratic.len());
    let mut linear = program.objective.linear.clone();
    let mut links = Vec::with_capacity(3 * program.objective.quadratic.len());
    for (u, v, c) in &program.objective.quadratic {
        let p = products.len();
        let pv = nb + p;
        products.push(Product { u: *u, v: *v });
        linear.push(c.clone());
        links.push(LinearConstraint {
            name: format!("link_p{p}_u"),
            kind: RowKind::Link { product: p, which: 0 },
            terms: vec![(pv, S::one()), (*u, -S::one())],
            relation: Relation::Le,
            rhs: S::zero(),
        });
        links.push(LinearConstraint {
            name: format!("link_p{p}_v"),
            kind: RowKind::Link { product: p, which: 1 },
            terms: vec![(pv, S::one()), (*v, -S::one())],
            relation: Relation::Le,
            rhs: S::zero(),
        });
        links.push(LinearConstraint {
            name: format!("link_p{p}_uv"),
            kind: RowKind::Link { product: p, which: 2 },
            terms: vec![(*u, S::one()), (*v, S::one()), (pv, -S::one())],
            relation: Relation::Le,
            rhs: S::one(),
        });
    }
    LinearizedProgram {
        base: program.clone(),
        products,
        link_constraints: links,
        constant: program.objective.constant.clone(),
        linear,
    }
}
