use crate::data::{Arm, OutcomeSupport, UnitRecord};
use crate::designs::AssignmentMechanism;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{layout_for, ConstraintFlavor, LinearConstraint, Relation, RowKind};

/// Levels of a discrete covariate.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariateLevels {
    pub values: Vec<f64>,
    /// Level index of each unit.
    pub level_of: Vec<usize>,
}

impl CovariateLevels {
    pub fn members(&self, level: usize) -> Vec<usize> {
        (0..self.level_of.len()).filter(|&i| self.level_of[i] == level).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.values.len()];
        for &l in &self.level_of {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Accepts a covariate as discrete when every value is an integer and there
/// are fewer distinct values than units.
pub fn discrete_levels(name: &str, values: &[f64]) -> Result<CovariateLevels> {
    if values.iter().any(|v| v.fract() != 0.0) {
        return Err(Error::UnsupportedCovariate(format!("`{name}` has non-integer values; only discrete covariates are supported")));
    }
    let mut levels: Vec<f64> = values.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.len() >= values.len() {
        return Err(Error::UnsupportedCovariate(format!(
            "`{name}` takes {} distinct values over {} units; it looks continuous",
            levels.len(),
            values.len()
        )));
    }
    let level_of = values.iter().map(|v| levels.iter().position(|l| l == v).expect("present")).collect();
    Ok(CovariateLevels { values: levels, level_of })
}

fn arm_counts(records: &[UnitRecord]) -> Result<(usize, usize)> {
    let n1 = records.iter().filter(|r| r.treated).count();
    let n0 = records.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::InsufficientData(format!("both arms need units, got N1={n1}, N0={n0}")));
    }
    Ok((n0, n1))
}

fn check_equal_probabilities<S: Scalar>(p: &[S]) -> Result<()> {
    let first = &p[0];
    let tol = S::from_f64_exact(1e-12);
    if p.iter().any(|q| (q.clone() - first.clone()).abs() > tol) {
        return Err(Error::FlavorMismatch(
            "equal-probability marginal rows need identical treatment probabilities; use the generalized flavor".into(),
        ));
    }
    Ok(())
}

fn covariate_column(records: &[UnitRecord], name: &str) -> Result<Vec<f64>> {
    records.iter().map(|r| r.covariate(name)).collect()
}

fn check_sizes(records: &[UnitRecord], mech: &AssignmentMechanism) -> Result<()> {
    if records.len() != mech.n {
        return Err(Error::Shape { expected: records.len(), got: mech.n });
    }
    Ok(())
}

/// Smallest slack with a feasibility guarantee for fixed arm sizes, and its
/// analogue for the other flavors.
pub fn default_epsilon<S: Scalar>(
    flavor: &ConstraintFlavor,
    records: &[UnitRecord],
    mech: &AssignmentMechanism,
) -> Result<S> {
    check_sizes(records, mech)?;
    match flavor {
        ConstraintFlavor::EqualProbability => {
            let (n0, n1) = arm_counts(records)?;
            Ok(S::ratio(1, n0.min(n1) as i64))
        }
        ConstraintFlavor::Generalized => {
            let p = mech.treatment_probabilities_exact::<S>()?;
            let n = S::from_usize_exact(records.len());
            Ok(S::one() / (n * min_tilde(&p)))
        }
        ConstraintFlavor::Conditional { covariate } => {
            let p = mech.treatment_probabilities_exact::<S>()?;
            let levels = discrete_levels(covariate, &covariate_column(records, covariate)?)?;
            let smallest = *levels.sizes().iter().min().expect("at least one level");
            Ok(S::one() / (S::from_usize_exact(smallest) * min_tilde(&p)))
        }
    }
}

fn min_tilde<S: Scalar>(p: &[S]) -> S {
    p.iter()
        .map(|q| S::min_of(q.clone(), S::one() - q.clone()))
        .reduce(S::min_of)
        .expect("non-empty")
}

/// Pinning, optional support, one-hot and marginal rows over the full variable array.
pub fn build_constraints<S: Scalar>(
    records: &[UnitRecord],
    support: &OutcomeSupport,
    mech: &AssignmentMechanism,
    flavor: &ConstraintFlavor,
    epsilon: S,
) -> Result<Vec<LinearConstraint<S>>> {
    check_sizes(records, mech)?;
    if epsilon < S::zero() {
        return Err(Error::Parameter("epsilon must be non-negative".into()));
    }
    let layout = layout_for(records, support)?;
    let (n, k) = (layout.n, layout.k);
    let mut rows = Vec::new();

    for i in 0..n {
        let arm = Arm::from_treated(layout.treated[i]);
        rows.push(LinearConstraint {
            name: format!("pin_i{i}"),
            kind: RowKind::Pin { unit: i },
            terms: vec![(layout.var(arm, i, layout.observed_k[i]), S::one())],
            relation: Relation::Eq,
            rhs: S::one(),
        });
    }

    if support.per_arm.is_some() {
        for arm in Arm::BOTH {
            for i in 0..n {
                for kk in (0..k).filter(|&kk| !support.is_allowed(arm, kk)) {
                    rows.push(LinearConstraint {
                        name: format!("supp_a{}_i{i}_k{kk}", arm.index()),
                        kind: RowKind::Support { arm, unit: i, k: kk },
                        terms: vec![(layout.var(arm, i, kk), S::one())],
                        relation: Relation::Eq,
                        rhs: S::zero(),
                    });
                }
            }
        }
    }

    for arm in Arm::BOTH {
        for i in 0..n {
            rows.push(LinearConstraint {
                name: format!("onehot_a{}_i{i}", arm.index()),
                kind: RowKind::OneHot { arm, unit: i },
                terms: (0..k).map(|kk| (layout.var(arm, i, kk), S::one())).collect(),
                relation: Relation::Eq,
                rhs: S::one(),
            });
        }
    }

    // Per-unit weights and right-hand sides, one family per covariate level.
    let families: Vec<(Option<usize>, Vec<S>, S)> = match flavor {
        ConstraintFlavor::EqualProbability => {
            let p = mech.treatment_probabilities_exact::<S>()?;
            check_equal_probabilities(&p)?;
            let (n0, n1) = arm_counts(records)?;
            let w1 = S::ratio(1, n1 as i64);
            let w0 = S::ratio(1, n0 as i64);
            let weights = layout.treated.iter().map(|&z| if z { w1.clone() } else { -w0.clone() }).collect();
            vec![(None, weights, epsilon)]
        }
        ConstraintFlavor::Generalized => {
            let p = mech.treatment_probabilities_exact::<S>()?;
            let weights = ipw_weights(&layout.treated, &p);
            vec![(None, weights, epsilon * S::from_usize_exact(n))]
        }
        ConstraintFlavor::Conditional { covariate } => {
            let p = mech.treatment_probabilities_exact::<S>()?;
            let levels = discrete_levels(covariate, &covariate_column(records, covariate)?)?;
            let base = ipw_weights(&layout.treated, &p);
            let sizes = levels.sizes();
            for (l, &size) in sizes.iter().enumerate() {
                if size < 2 {
                    log::warn!(
                        "covariate `{covariate}` level {} has a single unit; its marginal rows are nearly vacuous",
                        levels.values[l]
                    );
                }
            }
            (0..levels.values.len())
                .map(|l| {
                    let inv = S::ratio(1, sizes[l] as i64);
                    let weights = (0..n)
                        .map(|i| if levels.level_of[i] == l { base[i].clone() * inv.clone() } else { S::zero() })
                        .collect();
                    (Some(l), weights, epsilon.clone())
                })
                .collect()
        }
    };

    for (level, weights, rhs) in families {
        for arm in Arm::BOTH {
            for kk in 0..k {
                for sign in 0..2u8 {
                    let terms = (0..n)
                        .filter(|&i| !weights[i].is_zero())
                        .map(|i| {
                            let w = if sign == 0 { weights[i].clone() } else { -weights[i].clone() };
                            (layout.var(arm, i, kk), w)
                        })
                        .collect();
                    let name = match level {
                        Some(l) => format!("marg_w{l}_a{}_k{kk}_b{sign}", arm.index()),
                        None => format!("marg_a{}_k{kk}_b{sign}", arm.index()),
                    };
                    rows.push(LinearConstraint {
                        name,
                        kind: RowKind::Marginal { arm, k: kk, sign, level },
                        terms,
                        relation: Relation::Le,
                        rhs: rhs.clone(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn ipw_weights<S: Scalar>(treated: &[bool], p: &[S]) -> Vec<S> {
    treated
        .iter()
        .zip(p)
        .map(|(&z, pi)| if z { S::one() / pi.clone() } else { -(S::one() / (S::one() - pi.clone())) })
        .collect()
}
