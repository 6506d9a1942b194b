//! Variance of an estimator as a quadratic form in the potential outcomes.
//!
//! Every supported estimator has `Var_Z[tau_hat] = Y' M Y` for a symmetric
//! matrix `M` over the `2N` potential-outcome slots. Substituting
//! `Y_s = sum_k y_k X_sk` turns it into a quadratic form in the indicators.

use crate::data::{OutcomeSupport, Slot};
use crate::designs::TreatmentMoments;
use crate::error::{Error, Result};
use crate::estimators::{LinearCoefficients, LinearFunctional, QuadraticCoefficients};
use crate::scalar::Scalar;

/// Symmetric `2N x 2N` matrix over slots, indexed by [`Slot::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct SlotQuadratic<S> {
    pub n: usize,
    pub m: Vec<Vec<S>>,
}

impl<S: Scalar> SlotQuadratic<S> {
    pub fn zeros(n: usize) -> Self {
        Self { n, m: vec![vec![S::zero(); 2 * n]; 2 * n] }
    }

    pub fn entry(&self, s: Slot, t: Slot) -> &S {
        &self.m[s.index(self.n)][t.index(self.n)]
    }

    /// Adds `weight * f g'` (and keeps the matrix symmetric when called with both orders).
    fn add_outer(&mut self, f: &LinearFunctional<S>, g: &LinearFunctional<S>, weight: &S) {
        if weight.is_zero() {
            return;
        }
        for (s, ws) in &f.terms {
            let si = s.index(self.n);
            let scaled = weight.clone() * ws.clone();
            for (t, wt) in &g.terms {
                let ti = t.index(self.n);
                self.m[si][ti] = self.m[si][ti].clone() + scaled.clone() * wt.clone();
            }
        }
    }

    /// `Y' M Y` with `y` indexed by slot index.
    pub fn value(&self, y: &[S]) -> S {
        let mut total = S::zero();
        for (s, row) in self.m.iter().enumerate() {
            if y[s].is_zero() {
                continue;
            }
            let inner = row.iter().zip(y).fold(S::zero(), |acc, (m, yt)| acc + m.clone() * yt.clone());
            total = total + y[s].clone() * inner;
        }
        total
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.m.iter().map(|row| row.iter().map(Scalar::as_f64).collect()).collect()
    }
}

/// Variance objective together with the outcome grid it is expanded over.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveForm<S> {
    pub slots: SlotQuadratic<S>,
    pub grid: Vec<S>,
}

impl<S: Scalar> ObjectiveForm<S> {
    pub fn n(&self) -> usize {
        self.slots.n
    }

    pub fn k(&self) -> usize {
        self.grid.len()
    }

    /// Coefficient of `X_u X_v` in the symmetric expansion, with `u = slot * K + k`.
    pub fn coefficient(&self, u: usize, v: usize) -> S {
        let k = self.k();
        let (su, ku) = (u / k, u % k);
        let (sv, kv) = (v / k, v % k);
        self.slots.m[su][sv].clone() * self.grid[ku].clone() * self.grid[kv].clone()
    }

    /// Value at a full indicator vector over all `2NK` variables.
    pub fn evaluate(&self, x: &[bool]) -> S {
        let k = self.k();
        let y: Vec<S> = (0..2 * self.n())
            .map(|s| {
                (0..k).filter(|&j| x[s * k + j]).fold(S::zero(), |acc, j| acc + self.grid[j].clone())
            })
            .collect();
        self.slots.value(&y)
    }
}

fn grid<S: Scalar>(support: &OutcomeSupport) -> Vec<S> {
    support.values.iter().map(|&v| S::from_f64_exact(v)).collect()
}

fn check_moments<S: Scalar>(moments: &TreatmentMoments<S>, n: usize) -> Result<()> {
    if moments.n() != n || moments.second.len() != n {
        return Err(Error::Dependency(format!(
            "second moments cover {} units, estimator has {n}",
            moments.second.len()
        )));
    }
    Ok(())
}

/// `sum_ij a_i a_j Cov[Z_i, Z_j]` as a slot matrix.
pub fn linear_variance_matrix<S: Scalar>(
    coeffs: &LinearCoefficients<S>,
    moments: &TreatmentMoments<S>,
) -> Result<SlotQuadratic<S>> {
    let n = coeffs.n();
    check_moments(moments, n)?;
    let mut q = SlotQuadratic::zeros(n);
    for i in 0..n {
        for j in 0..n {
            q.add_outer(&coeffs.a[i], &coeffs.a[j], &moments.second[i][j]);
        }
    }
    Ok(q)
}

/// `sum_ijkl a_ij a_kl Cov[Z_i Z_j, Z_k Z_l]` as a slot matrix.
pub fn quadratic_variance_matrix<S: Scalar>(
    coeffs: &QuadraticCoefficients<S>,
    moments: &TreatmentMoments<S>,
) -> Result<SlotQuadratic<S>> {
    let n = coeffs.n();
    check_moments(moments, n)?;
    let fourth = moments
        .fourth
        .as_ref()
        .ok_or_else(|| Error::Dependency("fourth moments are required for a quadratic-in-treatment estimator".into()))?;
    let pairs = coeffs.symmetrized();
    let mut q = SlotQuadratic::zeros(n);
    for ((i, j), f) in &pairs {
        for ((k, l), g) in &pairs {
            let cov = fourth
                .get(*i, *j, *k, *l)
                .ok_or_else(|| Error::Dependency(format!("missing fourth moment Cov[Z{i} Z{j}, Z{k} Z{l}]")))?;
            q.add_outer(f, g, &cov);
        }
    }
    Ok(q)
}

pub fn build_objective_linear<S: Scalar>(
    coeffs: &LinearCoefficients<S>,
    moments: &TreatmentMoments<S>,
    support: &OutcomeSupport,
) -> Result<ObjectiveForm<S>> {
    Ok(ObjectiveForm { slots: linear_variance_matrix(coeffs, moments)?, grid: grid(support) })
}

pub fn build_objective_quadratic<S: Scalar>(
    coeffs: &QuadraticCoefficients<S>,
    moments: &TreatmentMoments<S>,
    support: &OutcomeSupport,
) -> Result<ObjectiveForm<S>> {
    Ok(ObjectiveForm { slots: quadratic_variance_matrix(coeffs, moments)?, grid: grid(support) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PotentialOutcomeTable;
    use crate::designs::{fourth_moments, second_moments, AssignmentMechanism, MomentMethod};
    use crate::estimators::{diff_in_means_coeffs, horvitz_thompson_coeffs, regression_with_covariate_coeffs};
    use crate::Rational;

    fn slot_vector(t: &PotentialOutcomeTable) -> Vec<f64> {
        let n = t.len();
        (0..2 * n).map(|s| t.value(Slot::from_index(s, n))).collect()
    }

    #[test]
    fn bernoulli_diagonal_form() {
        let mech = AssignmentMechanism::bernoulli(3, 0.3).unwrap();
        let m = second_moments::<f64>(&mech, MomentMethod::Analytic).unwrap();
        let c = diff_in_means_coeffs::<f64>(1, 2).unwrap();
        let q = linear_variance_matrix(&c, &m).unwrap();
        let t = PotentialOutcomeTable::from_columns(&[1.0, 2.0, 3.0], &[4.0, 0.0, 1.0]).unwrap();
        let expected: f64 = c.a.iter().map(|a| a.evaluate(&t).powi(2) * 0.21).sum();
        assert!((q.value(&slot_vector(&t)) - expected).abs() < 1e-12);
    }

    #[test]
    fn ht_two_unit_variance() {
        let mech = AssignmentMechanism::complete(2, 1).unwrap();
        let m = second_moments::<Rational>(&mech, MomentMethod::Analytic).unwrap();
        let c = horvitz_thompson_coeffs(&[Rational::ratio(1, 2), Rational::ratio(1, 2)]).unwrap();
        let q = linear_variance_matrix(&c, &m).unwrap();
        let t = PotentialOutcomeTable::from_columns(&[1.0, 3.0], &[6.0, 2.0]).unwrap();
        let y: Vec<Rational> = slot_vector(&t).into_iter().map(Rational::from_f64_exact).collect();
        // tau_hat is Y1(1) - Y2(0) = 3 or Y2(1) - Y1(0) = 1, each with probability 1/2.
        assert_eq!(q.value(&y), Rational::ratio(1, 1));
    }

    #[test]
    fn zero_outcomes_give_zero() {
        let mech = AssignmentMechanism::complete(4, 2).unwrap();
        let m = second_moments::<f64>(&mech, MomentMethod::Analytic).unwrap();
        let q = linear_variance_matrix(&diff_in_means_coeffs::<f64>(2, 2).unwrap(), &m).unwrap();
        assert_eq!(q.value(&[0.0; 8]), 0.0);
    }

    #[test]
    fn quadratic_form_needs_fourth_moments() {
        let mech = AssignmentMechanism::complete(4, 2).unwrap();
        let m = second_moments::<f64>(&mech, MomentMethod::Analytic).unwrap();
        let c = regression_with_covariate_coeffs(&[1.0, 2.0, 3.0, 5.0], 2).unwrap();
        assert!(matches!(quadratic_variance_matrix(&c, &m), Err(Error::Dependency(_))));
    }

    #[test]
    fn diagonal_quadratic_reduces_to_linear() {
        let mech = AssignmentMechanism::complete(4, 2).unwrap();
        let m = fourth_moments::<Rational>(&mech, MomentMethod::Enumerated).unwrap();
        let lin = diff_in_means_coeffs::<Rational>(2, 2).unwrap();
        let quad = QuadraticCoefficients {
            a: (0..4)
                .map(|i| (0..4).map(|j| if i == j { lin.a[i].clone() } else { LinearFunctional::zero() }).collect())
                .collect(),
            b: lin.b.clone(),
            name: lin.name,
        };
        assert_eq!(linear_variance_matrix(&lin, &m).unwrap(), quadratic_variance_matrix(&quad, &m).unwrap());
    }

    #[test]
    fn constant_outcomes_have_zero_regression_variance() {
        let mech = AssignmentMechanism::complete(4, 2).unwrap();
        let m = fourth_moments::<f64>(&mech, MomentMethod::Enumerated).unwrap();
        let c = regression_with_covariate_coeffs(&[1.0, -2.0, 0.5, 3.0], 2).unwrap();
        let q = quadratic_variance_matrix(&c, &m).unwrap();
        assert!(q.value(&[7.0; 8]).abs() < 1e-9);
    }

    #[test]
    fn expanded_coefficient_matches_slots() {
        let mut q = SlotQuadratic::<f64>::zeros(1);
        q.m = vec![vec![2.0, -1.0], vec![-1.0, 3.0]];
        let form = ObjectiveForm { slots: q, grid: vec![1.0, 10.0] };
        // u = control slot, k = 1; v = treated slot, k = 0.
        assert_eq!(form.coefficient(1, 2), -10.0);
        let x = [false, true, true, false];
        let y = [10.0, 1.0];
        assert_eq!(form.evaluate(&x), form.slots.value(&y));
    }
}
