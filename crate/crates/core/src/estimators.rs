//! Estimators in coefficient form.
//!
//! A linear-in-treatment estimator is `sum_i Z_i a_i + b_i` and a
//! quadratic-in-treatment one is `sum_i b_i + sum_ij Z_i Z_j a_ij`, where every
//! coefficient is a linear functional of the potential outcomes. Functionals
//! are sparse maps from [`Slot`] to weight so the program builder can expand
//! them over the outcome grid directly.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Arm, PotentialOutcomeTable, Slot, UnitRecord};
use crate::designs::AssignmentMechanism;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse linear functional `Y -> sum_s w_s Y_s` over potential-outcome slots.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFunctional<S> {
    pub terms: BTreeMap<Slot, S>,
}

impl<S: Scalar> Default for LinearFunctional<S> {
    fn default() -> Self {
        Self { terms: BTreeMap::new() }
    }
}

impl<S: Scalar> LinearFunctional<S> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(slot: Slot, weight: S) -> Self {
        let mut f = Self::zero();
        f.add(slot, weight);
        f
    }

    /// Adds `weight * Y_slot`, dropping terms that cancel to zero.
    pub fn add(&mut self, slot: Slot, weight: S) {
        if weight.is_zero() {
            return;
        }
        let entry = self.terms.entry(slot).or_insert_with(S::zero);
        *entry = entry.clone() + weight;
        if entry.is_zero() {
            self.terms.remove(&slot);
        }
    }

    pub fn add_scaled(&mut self, other: &Self, scale: &S) {
        for (slot, w) in &other.terms {
            self.add(*slot, w.clone() * scale.clone());
        }
    }

    pub fn scaled(&self, scale: &S) -> Self {
        let mut out = Self::zero();
        out.add_scaled(self, scale);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate_with<F: Fn(Slot) -> S>(&self, y: F) -> S {
        self.terms.iter().fold(S::zero(), |acc, (slot, w)| acc + w.clone() * y(*slot))
    }

    pub fn evaluate(&self, table: &PotentialOutcomeTable) -> f64 {
        self.terms.iter().map(|(slot, w)| w.as_f64() * table.value(*slot)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    Dim,
    Ht,
    DrGrowth,
    OlsCovariate,
}

impl EstimatorName {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorName::Dim => "dim",
            EstimatorName::Ht => "ht",
            EstimatorName::DrGrowth => "dr_growth",
            EstimatorName::OlsCovariate => "ols_covariate",
        }
    }
}

impl fmt::Display for EstimatorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EstimatorName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dim" => Ok(EstimatorName::Dim),
            "ht" => Ok(EstimatorName::Ht),
            "dr_growth" => Ok(EstimatorName::DrGrowth),
            "ols_covariate" => Ok(EstimatorName::OlsCovariate),
            other => Err(Error::Parameter(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearCoefficients<S> {
    pub a: Vec<LinearFunctional<S>>,
    pub b: Vec<LinearFunctional<S>>,
    pub name: EstimatorName,
}

impl<S: Scalar> LinearCoefficients<S> {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn evaluate_with<F: Fn(Slot) -> S + Copy>(&self, z: &[bool], y: F) -> S {
        let mut total = S::zero();
        for i in 0..self.n() {
            if z[i] {
                total = total + self.a[i].evaluate_with(y);
            }
            total = total + self.b[i].evaluate_with(y);
        }
        total
    }

    pub fn evaluate(&self, z: &[bool], table: &PotentialOutcomeTable) -> f64 {
        (0..self.n()).map(|i| if z[i] { self.a[i].evaluate(table) } else { 0.0 } + self.b[i].evaluate(table)).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCoefficients<S> {
    pub a: Vec<Vec<LinearFunctional<S>>>,
    pub b: Vec<LinearFunctional<S>>,
    pub name: EstimatorName,
}

impl<S: Scalar> QuadraticCoefficients<S> {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn evaluate_with<F: Fn(Slot) -> S + Copy>(&self, z: &[bool], y: F) -> S {
        let n = self.n();
        let mut total = self.b.iter().fold(S::zero(), |acc, f| acc + f.evaluate_with(y));
        for i in (0..n).filter(|&i| z[i]) {
            for j in (0..n).filter(|&j| z[j]) {
                total = total + self.a[i][j].evaluate_with(y);
            }
        }
        total
    }

    pub fn evaluate(&self, z: &[bool], table: &PotentialOutcomeTable) -> f64 {
        let n = self.n();
        let mut total: f64 = self.b.iter().map(|f| f.evaluate(table)).sum();
        for i in (0..n).filter(|&i| z[i]) {
            for j in (0..n).filter(|&j| z[j]) {
                total += self.a[i][j].evaluate(table);
            }
        }
        total
    }

    /// Coefficients of `Z_i Z_j` over unordered pairs `i <= j`, folding `a_ij + a_ji`.
    pub fn symmetrized(&self) -> Vec<((usize, usize), LinearFunctional<S>)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                let mut f = self.a[i][j].clone();
                if i != j {
                    f.add_scaled(&self.a[j][i], &S::one());
                }
                if !f.is_zero() {
                    out.push(((i, j), f));
                }
            }
        }
        out
    }
}

/// Either coefficient representation.
#[derive(Clone, Debug, PartialEq)]
pub enum EstimatorCoefficients<S> {
    Linear(LinearCoefficients<S>),
    Quadratic(QuadraticCoefficients<S>),
}

impl<S: Scalar> EstimatorCoefficients<S> {
    pub fn name(&self) -> EstimatorName {
        match self {
            EstimatorCoefficients::Linear(c) => c.name,
            EstimatorCoefficients::Quadratic(c) => c.name,
        }
    }

    pub fn evaluate(&self, z: &[bool], table: &PotentialOutcomeTable) -> f64 {
        match self {
            EstimatorCoefficients::Linear(c) => c.evaluate(z, table),
            EstimatorCoefficients::Quadratic(c) => c.evaluate(z, table),
        }
    }
}

fn y0(i: usize) -> Slot {
    Slot::new(i, Arm::Control)
}

fn y1(i: usize) -> Slot {
    Slot::new(i, Arm::Treated)
}

/// Difference in means for a design with `n1` treated and `n0` control units.
pub fn diff_in_means_coeffs<S: Scalar>(n1: usize, n0: usize) -> Result<LinearCoefficients<S>> {
    if n1 == 0 || n0 == 0 {
        return Err(Error::Parameter(format!("difference in means needs both arms, got N1={n1}, N0={n0}")));
    }
    let inv1 = S::ratio(1, n1 as i64);
    let inv0 = S::ratio(1, n0 as i64);
    let n = n1 + n0;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        let mut ai = LinearFunctional::single(y1(i), inv1.clone());
        ai.add(y0(i), inv0.clone());
        a.push(ai);
        b.push(LinearFunctional::single(y0(i), -inv0.clone()));
    }
    Ok(LinearCoefficients { a, b, name: EstimatorName::Dim })
}

/// Difference in means checked against the design's arm sizes.
pub fn diff_in_means_for<S: Scalar>(mech: &AssignmentMechanism) -> Result<LinearCoefficients<S>> {
    let (n0, n1) = mech.fixed_arm_sizes().ok_or_else(|| {
        Error::EstimatorDesignMismatch(format!(
            "difference in means is not linear in treatment under a {} design; use \"ht\"",
            mech.name()
        ))
    })?;
    diff_in_means_coeffs(n1, n0)
}

pub fn horvitz_thompson_coeffs<S: Scalar>(p: &[S]) -> Result<LinearCoefficients<S>> {
    if let Some(unit) = p.iter().position(|pi| *pi <= S::zero() || *pi >= S::one()) {
        return Err(Error::NonProbabilistic { unit, probability: p[unit].as_f64() });
    }
    let n = S::from_usize_exact(p.len());
    let mut a = Vec::with_capacity(p.len());
    let mut b = Vec::with_capacity(p.len());
    for (i, pi) in p.iter().enumerate() {
        let w1 = S::one() / (n.clone() * pi.clone());
        let w0 = S::one() / (n.clone() * (S::one() - pi.clone()));
        let mut ai = LinearFunctional::single(y1(i), w1);
        ai.add(y0(i), w0.clone());
        a.push(ai);
        b.push(LinearFunctional::single(y0(i), -w0));
    }
    Ok(LinearCoefficients { a, b, name: EstimatorName::Ht })
}

/// Subtracts the mean. Errors when the result is identically zero.
pub fn center_covariate<S: Scalar>(x: &[S]) -> Result<Vec<S>> {
    if x.is_empty() {
        return Err(Error::SingularCovariate("empty covariate".into()));
    }
    let mean = x.iter().fold(S::zero(), |acc, v| acc + v.clone()) / S::from_usize_exact(x.len());
    let centered: Vec<S> = x.iter().map(|v| v.clone() - mean.clone()).collect();
    if centered.iter().all(|v| v.is_zero()) {
        return Err(Error::SingularCovariate("covariate is constant".into()));
    }
    Ok(centered)
}

/// Covariate-adjusted treatment estimator in quadratic-in-treatment form.
///
/// The represented estimator is
/// `N/(N1 N0) * sum_i D_i (Y_i - X_i * sum_j X_j Y_j / X'X)` with
/// `D_i = Z_i - N1/N` and `X` centered internally. It agrees with the OLS
/// coefficient on `D` in the regression on `(1, D, X)` exactly when
/// `sum_i X_i D_i = 0`; otherwise the two differ.
pub fn regression_with_covariate_coeffs<S: Scalar>(x: &[S], n1: usize) -> Result<QuadraticCoefficients<S>> {
    let n = x.len();
    if n1 == 0 || n1 >= n {
        return Err(Error::Parameter(format!("covariate adjustment needs both arms, got N={n}, N1={n1}")));
    }
    let n0 = n - n1;
    let x = center_covariate(x)?;
    let xtx = x.iter().fold(S::zero(), |acc, v| acc + v.clone() * v.clone());
    let inv1 = S::ratio(1, n1 as i64);
    let inv0 = S::ratio(1, n0 as i64);
    // N / (N1 N0 X'X)
    let kappa = S::ratio(n as i64, (n1 * n0) as i64) / xtx;

    let mut a = vec![vec![LinearFunctional::zero(); n]; n];
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        b.push(LinearFunctional::single(y0(i), -inv0.clone()));
        for j in 0..n {
            let w = -(kappa.clone() * x[i].clone() * x[j].clone());
            let f = &mut a[i][j];
            if i == j {
                f.add(y1(i), inv1.clone());
                f.add(y0(i), inv0.clone());
            }
            // Z_i Z_j X_i X_j (Y_j(1) - Y_j(0)) term.
            f.add(y1(j), w.clone());
            f.add(y0(j), -w.clone());
            // Z_i X_i X_j Y_j(0) term, placed on the diagonal since Z_i^2 = Z_i.
            a[i][i].add(y0(j), w);
        }
    }
    Ok(QuadraticCoefficients { a, b, name: EstimatorName::OlsCovariate })
}

/// Estimator evaluated directly from observed data.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    DiffInMeans,
    HorvitzThompson { p: Vec<f64> },
    CovariateAdjusted { x: Vec<f64> },
}

impl Estimator {
    /// `None` when the estimator is undefined on this sample (empty arm, constant covariate).
    pub fn evaluate(&self, z: &[bool], y: &[f64]) -> Option<f64> {
        match self {
            Estimator::DiffInMeans => diff_in_means(z, y),
            Estimator::HorvitzThompson { p } => Some(horvitz_thompson(z, y, p)),
            Estimator::CovariateAdjusted { x } => covariate_adjusted(z, y, x),
        }
    }

    /// Same estimator restricted to a resample of units.
    pub fn resample(&self, units: &[usize]) -> Estimator {
        match self {
            Estimator::DiffInMeans => Estimator::DiffInMeans,
            Estimator::HorvitzThompson { p } => Estimator::HorvitzThompson { p: units.iter().map(|&i| p[i]).collect() },
            Estimator::CovariateAdjusted { x } => Estimator::CovariateAdjusted { x: units.iter().map(|&i| x[i]).collect() },
        }
    }

    pub fn evaluate_table(&self, z: &[bool], table: &PotentialOutcomeTable) -> Option<f64> {
        self.evaluate(z, &table.observed(z))
    }
}

pub fn diff_in_means(z: &[bool], y: &[f64]) -> Option<f64> {
    let (mut s1, mut s0, mut n1, mut n0) = (0.0, 0.0, 0usize, 0usize);
    for (&zi, &yi) in z.iter().zip(y) {
        if zi {
            s1 += yi;
            n1 += 1;
        } else {
            s0 += yi;
            n0 += 1;
        }
    }
    (n1 > 0 && n0 > 0).then(|| s1 / n1 as f64 - s0 / n0 as f64)
}

pub fn horvitz_thompson(z: &[bool], y: &[f64], p: &[f64]) -> f64 {
    let n = y.len() as f64;
    z.iter()
        .zip(y)
        .zip(p)
        .map(|((&zi, &yi), &pi)| if zi { yi / (n * pi) } else { -yi / (n * (1.0 - pi)) })
        .sum()
}

/// Direct form of the estimator represented by [`regression_with_covariate_coeffs`].
pub fn covariate_adjusted(z: &[bool], y: &[f64], x: &[f64]) -> Option<f64> {
    let n = y.len();
    let n1 = z.iter().filter(|&&v| v).count();
    let n0 = n - n1;
    if n1 == 0 || n0 == 0 {
        return None;
    }
    let x = center_covariate(x).ok()?;
    let xtx: f64 = x.iter().map(|v| v * v).sum();
    let gamma = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / xtx;
    let share = n1 as f64 / n as f64;
    let total: f64 = (0..n).map(|i| (f64::from(u8::from(z[i])) - share) * (y[i] - x[i] * gamma)).sum();
    Some(n as f64 / (n1 * n0) as f64 * total)
}

/// Out-of-sample predictions subtracted from the outcomes before analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualTransform {
    pub f0_predictions: Vec<f64>,
    pub f1_predictions: Vec<f64>,
}

impl ResidualTransform {
    pub fn new(f0_predictions: Vec<f64>, f1_predictions: Vec<f64>) -> Result<Self> {
        if f0_predictions.len() != f1_predictions.len() {
            return Err(Error::Shape { expected: f0_predictions.len(), got: f1_predictions.len() });
        }
        if f0_predictions.iter().chain(&f1_predictions).any(|v| !v.is_finite()) {
            return Err(Error::Validation("predictions must be finite".into()));
        }
        Ok(Self { f0_predictions, f1_predictions })
    }

    pub fn zero(n: usize) -> Self {
        Self { f0_predictions: vec![0.0; n], f1_predictions: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.f0_predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_predictions.is_empty()
    }

    /// Growth model fit on pre-period data only.
    ///
    /// `beta` is the through-origin least-squares coefficient of `pre1` on
    /// `pre0`; both arms are predicted as `beta * pre1`.
    pub fn growth_adjusted(pre0: &[f64], pre1: &[f64]) -> Result<Self> {
        let beta = growth_coefficient(pre0, pre1)?;
        let pred: Vec<f64> = pre1.iter().map(|v| beta * v).collect();
        Self::new(pred.clone(), pred)
    }

    pub fn prediction(&self, unit: usize, arm: Arm) -> f64 {
        match arm {
            Arm::Control => self.f0_predictions[unit],
            Arm::Treated => self.f1_predictions[unit],
        }
    }

    /// Residualizes a complete table slot by slot.
    pub fn apply_to_table(&self, table: &PotentialOutcomeTable) -> Result<PotentialOutcomeTable> {
        if table.len() != self.len() {
            return Err(Error::Shape { expected: table.len(), got: self.len() });
        }
        let outcomes =
            table.outcomes.iter().enumerate().map(|(i, o)| [o[0] - self.f0_predictions[i], o[1] - self.f1_predictions[i]]);
        PotentialOutcomeTable::new(table.unit_ids.clone(), outcomes.collect())
    }
}

/// Through-origin regression coefficient of `y` on `x`.
pub fn growth_coefficient(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape { expected: x.len(), got: y.len() });
    }
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(Error::SingularCovariate("pre-period covariate is identically zero".into()));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx)
}

/// `Y'_i = Y_i - Z_i f1_i - (1 - Z_i) f0_i` on observed outcomes.
pub fn residualize(records: &[UnitRecord], transform: &ResidualTransform) -> Result<Vec<UnitRecord>> {
    if records.len() != transform.len() {
        return Err(Error::Shape { expected: records.len(), got: transform.len() });
    }
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, r)| UnitRecord {
            observed_outcome: r.observed_outcome - transform.prediction(i, r.arm()),
            ..r.clone()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::combinations;
    use crate::Rational;
    use proptest::prelude::*;

    fn all_crd(n: usize, n1: usize) -> Vec<Vec<bool>> {
        combinations(n, n1)
            .into_iter()
            .map(|set| (0..n).map(|i| set.contains(&i)).collect())
            .collect()
    }

    fn table(y0: &[f64], y1: &[f64]) -> PotentialOutcomeTable {
        PotentialOutcomeTable::from_columns(y0, y1).unwrap()
    }

    #[test]
    fn dim_two_units() {
        let c = diff_in_means_coeffs::<f64>(1, 1).unwrap();
        let t = table(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(c.evaluate(&[true, false], &t), 1.0);
        assert_eq!(c.evaluate(&[false, true], &t), 0.0);
    }

    #[test]
    fn dim_rejects_bernoulli() {
        let mech = AssignmentMechanism::bernoulli(4, 0.5).unwrap();
        assert!(matches!(diff_in_means_for::<f64>(&mech), Err(Error::EstimatorDesignMismatch(_))));
    }

    #[test]
    fn ht_hand_value() {
        let c = horvitz_thompson_coeffs(&[0.5, 0.5]).unwrap();
        // Only observed entries matter: Y_1(1) = 4, Y_2(0) = 2.
        let t = table(&[7.0, 2.0], &[4.0, 9.0]);
        assert_eq!(c.evaluate(&[true, false], &t), 2.0);
        assert_eq!(horvitz_thompson(&[true, false], &[4.0, 2.0], &[0.5, 0.5]), 2.0);
    }

    #[test]
    fn ht_rejects_deterministic_unit() {
        assert!(matches!(horvitz_thompson_coeffs(&[0.5, 1.0]), Err(Error::NonProbabilistic { unit: 1, .. })));
    }

    #[test]
    fn ht_unbiased_over_bernoulli_law() {
        let mech = AssignmentMechanism::bernoulli(3, 0.3).unwrap();
        let p = mech.treatment_probabilities().unwrap();
        let t = table(&[1.0, -2.0, 5.5], &[3.0, 0.5, 4.0]);
        let mean: f64 = mech
            .enumerate_law::<f64>()
            .unwrap()
            .iter()
            .map(|(z, prob)| prob * horvitz_thompson(z.as_slice(), &t.observed(z.as_slice()), &p))
            .sum();
        assert!((mean - t.ate()).abs() < 1e-12);
    }

    #[test]
    fn constant_covariate_is_singular() {
        let err = regression_with_covariate_coeffs(&[2.0, 2.0, 2.0, 2.0], 2).unwrap_err();
        assert!(matches!(err, Error::SingularCovariate(_)));
    }

    #[test]
    fn regression_coefficients_match_direct_form() {
        let x = [Rational::ratio(3, 1), Rational::ratio(-1, 2), Rational::ratio(5, 1), Rational::ratio(0, 1)];
        let c = regression_with_covariate_coeffs(&x, 2).unwrap();
        let y0 = [1.0, 4.0, -2.0, 3.5];
        let y1 = [2.0, 4.5, 0.0, 1.0];
        let t = table(&y0, &y1);
        let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        for z in all_crd(4, 2) {
            let exact = c.evaluate_with(&z, |s| Rational::from_f64_exact(t.value(s)));
            let direct = covariate_adjusted(&z, &t.observed(&z), &xf).unwrap();
            assert!((exact.as_f64() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetrized_pairs_reproduce_estimator() {
        let c = regression_with_covariate_coeffs(&[1.0, 2.0, 4.0, 8.0], 2).unwrap();
        let t = table(&[1.0, 2.0, 3.0, 4.0], &[2.0, 2.0, 5.0, 1.0]);
        let pairs = c.symmetrized();
        for z in all_crd(4, 2) {
            let b: f64 = c.b.iter().map(|f| f.evaluate(&t)).sum();
            let via_pairs: f64 =
                pairs.iter().filter(|((i, j), _)| z[*i] && z[*j]).map(|(_, f)| f.evaluate(&t)).sum::<f64>() + b;
            assert!((via_pairs - c.evaluate(&z, &t)).abs() < 1e-12);
        }
    }

    #[test]
    fn residualize_identity_and_perfect_fit() {
        let records = vec![UnitRecord::new("a", 3.0, true), UnitRecord::new("b", 5.0, false)];
        let same = residualize(&records, &ResidualTransform::zero(2)).unwrap();
        assert_eq!(same, records);
        let perfect = ResidualTransform::new(vec![9.0, 5.0], vec![3.0, 9.0]).unwrap();
        let out = residualize(&records, &perfect).unwrap();
        assert!(out.iter().all(|r| r.observed_outcome == 0.0));
        assert!(matches!(residualize(&records, &ResidualTransform::zero(3)), Err(Error::Shape { .. })));
    }

    #[test]
    fn growth_coefficient_through_origin() {
        let beta = growth_coefficient(&[1.0, 2.0], &[1.1, 2.2]).unwrap();
        assert!((beta - 1.1).abs() < 1e-12);
        let t = ResidualTransform::growth_adjusted(&[1.0, 2.0], &[1.1, 2.2]).unwrap();
        assert!((t.f1_predictions[1] - 2.42).abs() < 1e-12);
        assert_eq!(t.f0_predictions, t.f1_predictions);
    }

    fn outcome_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, n)
    }

    proptest! {
        #[test]
        fn dim_and_ht_coefficients_match_direct_formulas(
            n_half in 1usize..4,
            seed_y in prop::collection::vec(-50.0f64..50.0, 12),
        ) {
            let n = 2 * n_half;
            let y0 = &seed_y[..n];
            let y1 = &seed_y[6..6 + n];
            let t = table(y0, y1);
            let dim = diff_in_means_coeffs::<f64>(n_half, n_half).unwrap();
            let p = vec![0.5; n];
            let ht = horvitz_thompson_coeffs(&p).unwrap();
            for z in all_crd(n, n_half) {
                let obs = t.observed(&z);
                prop_assert!((dim.evaluate(&z, &t) - diff_in_means(&z, &obs).unwrap()).abs() < 1e-9);
                prop_assert!((ht.evaluate(&z, &t) - horvitz_thompson(&z, &obs, &p)).abs() < 1e-9);
            }
        }

        #[test]
        fn coefficients_are_linear_in_outcomes(
            ya in outcome_vec(8), yb in outcome_vec(8), alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
            x in prop::collection::vec(-5.0f64..5.0, 4),
        ) {
            prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-3));
            let ta = table(&ya[..4], &ya[4..]);
            let tb = table(&yb[..4], &yb[4..]);
            let comb: Vec<f64> = ya.iter().zip(&yb).map(|(a, b)| alpha * a + beta * b).collect();
            let tc = table(&comb[..4], &comb[4..]);
            let q = regression_with_covariate_coeffs(&x, 2).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let f = &q.a[i][j];
                    let lhs = f.evaluate(&tc);
                    let rhs = alpha * f.evaluate(&ta) + beta * f.evaluate(&tb);
                    prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
                }
            }
        }

        #[test]
        fn residualize_reads_assignment_only_to_pick_prediction(
            y in outcome_vec(6), f0 in outcome_vec(6), f1 in outcome_vec(6), flips in prop::collection::vec(any::<bool>(), 6),
        ) {
            let transform = ResidualTransform::new(f0.clone(), f1.clone()).unwrap();
            let records: Vec<UnitRecord> =
                y.iter().zip(&flips).enumerate().map(|(i, (&v, &z))| UnitRecord::new(i.to_string(), v, z)).collect();
            let out = residualize(&records, &transform).unwrap();
            for (i, r) in out.iter().enumerate() {
                let pred = if flips[i] { f1[i] } else { f0[i] };
                prop_assert_eq!(r.observed_outcome, y[i] - pred);
            }
        }
    }
}
