//! Confidence intervals and variance bounds.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{arm_sizes, treatment_vector, PotentialOutcomeTable, UnitRecord};
use crate::designs::{second_moments, AssignmentMechanism, MomentMethod};
use crate::error::{Error, Result};
use crate::estimators::Estimator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage `1 - alpha`.
    pub level: f64,
    pub method: String,
    pub point_estimate: f64,
}

impl ConfidenceInterval {
    pub fn new(lower: f64, upper: f64, alpha: f64, method: impl Into<String>, point_estimate: f64) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::Domain(format!("interval bounds out of order: [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper, level: 1.0 - alpha, method: method.into(), point_estimate })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    /// Whether zero lies outside the interval.
    pub fn rejects_zero(&self) -> bool {
        !self.contains(0.0)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

/// Quantile with linear interpolation at position `1 + (R - 1) p` of the
/// sorted values (1-based).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed percentile interval of `draws`.
pub fn percentile_ci(draws: &[f64], alpha: f64, method: &str, point: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if draws.is_empty() {
        return Err(Error::InsufficientData("no draws to take quantiles of".into()));
    }
    quantile_ci(draws.to_vec(), alpha, method, point)
}

fn quantile_ci(mut draws: Vec<f64>, alpha: f64, method: &str, point: f64) -> Result<ConfidenceInterval> {
    draws.sort_by(f64::total_cmp);
    let lower = quantile_type7(&draws, alpha / 2.0);
    let upper = quantile_type7(&draws, 1.0 - alpha / 2.0);
    ConfidenceInterval::new(lower, upper.max(lower), alpha, method, point)
}

/// Which quantity a variance bound measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceScale {
    /// `Var_Z[tau_hat]` itself; this is what the imputation program maximizes.
    Estimator,
    /// `N * Var_Z[tau_hat]`, the quantity divided by `N` in the normal interval.
    PerUnit,
}

impl fmt::Display for VarianceScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceScale::Estimator => "estimator",
            VarianceScale::PerUnit => "per_unit",
        })
    }
}

/// A variance value tagged with its scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VStar {
    pub value: f64,
    pub scale: VarianceScale,
}

impl VStar {
    pub fn estimator(value: f64) -> Self {
        Self { value, scale: VarianceScale::Estimator }
    }

    pub fn per_unit(&self, n: usize) -> f64 {
        match self.scale {
            VarianceScale::Estimator => self.value * n as f64,
            VarianceScale::PerUnit => self.value,
        }
    }

    pub fn estimator_variance(&self, n: usize) -> f64 {
        match self.scale {
            VarianceScale::Estimator => self.value,
            VarianceScale::PerUnit => self.value / n as f64,
        }
    }
}

/// Standard normal quantile.
pub fn z_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `point ± sqrt(v_star / N) z_{1-alpha/2}` with `v_star` on the per-unit scale.
pub fn normal_ci(point: f64, v_star: f64, n: usize, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if !(v_star >= 0.0) {
        return Err(Error::Domain(format!("variance bound must be nonnegative, got {v_star}")));
    }
    if n == 0 {
        return Err(Error::Parameter("normal interval needs N >= 1".into()));
    }
    let half = (v_star / n as f64).sqrt() * z_quantile(1.0 - alpha / 2.0);
    ConfidenceInterval::new(point - half, point + half, alpha, "normal_vstar", point)
}

/// [`normal_ci`] for a scale-tagged bound.
pub fn normal_ci_scaled(point: f64, v_star: VStar, n: usize, alpha: f64) -> Result<ConfidenceInterval> {
    if !(v_star.value >= -1e-12 * v_star.value.abs().max(1.0)) {
        return Err(Error::Domain(format!("variance bound must be nonnegative, got {}", v_star.value)));
    }
    normal_ci(point, v_star.per_unit(n).max(0.0), n, alpha)
}

/// Estimator values over `reps` assignments drawn on a complete table.
pub fn causal_bootstrap_draws(
    imputed: &PotentialOutcomeTable,
    mech: &AssignmentMechanism,
    estimator: &Estimator,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if reps < 2 {
        return Err(Error::Parameter(format!("bootstrap needs at least 2 replications, got {reps}")));
    }
    if imputed.len() != mech.n {
        return Err(Error::Shape { expected: mech.n, got: imputed.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(reps);
    let mut undefined = 0usize;
    while draws.len() < reps {
        let z = mech.sample_with(&mut rng);
        match estimator.evaluate_table(z.as_slice(), imputed) {
            Some(v) => draws.push(v),
            None => {
                undefined += 1;
                if undefined > reps {
                    return Err(Error::Instability(format!(
                        "estimator undefined on {undefined} of {} assignments",
                        undefined + draws.len()
                    )));
                }
            }
        }
    }
    Ok(draws)
}

/// Quantile interval of the estimator under re-randomization of the
/// assignment over an imputed table.
pub fn causal_bootstrap_ci(
    imputed: &PotentialOutcomeTable,
    mech: &AssignmentMechanism,
    estimator: &Estimator,
    reps: usize,
    alpha: f64,
    seed: u64,
    point: f64,
    method: &str,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    quantile_ci(causal_bootstrap_draws(imputed, mech, estimator, reps, seed)?, alpha, method, point)
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn arm_values(records: &[UnitRecord], treated: bool) -> Vec<f64> {
    records.iter().filter(|r| r.treated == treated).map(|r| r.observed_outcome).collect()
}

/// `s0^2 / N0 + s1^2 / N1`.
pub fn neyman_bound(records: &[UnitRecord]) -> Result<f64> {
    let (n0, n1) = arm_sizes(records);
    if n0 < 2 || n1 < 2 {
        return Err(Error::InsufficientData(format!("each arm needs two units, got N0={n0}, N1={n1}")));
    }
    let v1 = sample_variance(&arm_values(records, true));
    let v0 = sample_variance(&arm_values(records, false));
    Ok(v0 / n0 as f64 + v1 / n1 as f64)
}

/// Within-pair treated-minus-control differences, ordered by first appearance.
pub fn pair_differences(records: &[UnitRecord]) -> Result<Vec<f64>> {
    let mut pairs: BTreeMap<&str, (usize, Vec<&UnitRecord>)> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let id = r
            .pair_id
            .as_deref()
            .ok_or_else(|| Error::Pairing(format!("unit `{}` belongs to no pair", r.unit_id)))?;
        pairs.entry(id).or_insert_with(|| (i, Vec::new())).1.push(r);
    }
    let mut ordered: Vec<(usize, &str, Vec<&UnitRecord>)> =
        pairs.into_iter().map(|(id, (first, members))| (first, id, members)).collect();
    ordered.sort_by_key(|p| p.0);
    ordered
        .into_iter()
        .map(|(_, id, members)| match members.as_slice() {
            [a, b] if a.treated != b.treated => {
                let (t, c) = if a.treated { (a, b) } else { (b, a) };
                Ok(t.observed_outcome - c.observed_outcome)
            }
            [_, _] => Err(Error::Pairing(format!("pair `{id}` does not have one treated and one control unit"))),
            _ => Err(Error::Pairing(format!("pair `{id}` has {} members", members.len()))),
        })
        .collect()
}

/// `4 / (N (N - 2)) * sum_j (tau_j - mean tau)^2` over pair differences.
pub fn matched_pairs_bound(records: &[UnitRecord]) -> Result<f64> {
    let n = records.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("matched-pairs bound needs N >= 4, got {n}")));
    }
    let diffs = pair_differences(records)?;
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let ss: f64 = diffs.iter().map(|d| (d - mean).powi(2)).sum();
    Ok(4.0 / (n as f64 * (n as f64 - 2.0)) * ss)
}

/// Result of the unit-resampling bootstrap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingBootstrap {
    pub ci: ConfidenceInterval,
    pub draws: Vec<f64>,
    /// Resamples redrawn because an arm was empty.
    pub redrawn: usize,
}

/// Resamples units with replacement, keeping their observed labels.
pub fn sampling_bootstrap(
    records: &[UnitRecord],
    estimator: &Estimator,
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<SamplingBootstrap> {
    check_alpha(alpha)?;
    if reps < 2 {
        return Err(Error::Parameter(format!("bootstrap needs at least 2 replications, got {reps}")));
    }
    let n = records.len();
    if n == 0 {
        return Err(Error::InsufficientData("no units to resample".into()));
    }
    let z = treatment_vector(records);
    let y: Vec<f64> = records.iter().map(|r| r.observed_outcome).collect();
    let point = estimator
        .evaluate(&z, &y)
        .ok_or_else(|| Error::InsufficientData("estimator undefined on the observed data".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(reps);
    let mut redrawn = 0usize;
    let mut undefined = 0usize;
    while draws.len() < reps {
        let units: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let zs: Vec<bool> = units.iter().map(|&i| z[i]).collect();
        if zs.iter().all(|&t| t) || zs.iter().all(|&t| !t) {
            redrawn += 1;
        } else {
            let ys: Vec<f64> = units.iter().map(|&i| y[i]).collect();
            match estimator.resample(&units).evaluate(&zs, &ys) {
                Some(v) => {
                    draws.push(v);
                    continue;
                }
                None => undefined += 1,
            }
        }
        if redrawn + undefined > reps {
            return Err(Error::Instability(format!(
                "estimator undefined on {} of {} resamples",
                redrawn + undefined,
                redrawn + undefined + draws.len()
            )));
        }
    }
    let ci = quantile_ci(draws.clone(), alpha, "sampling_boot", point)?;
    Ok(SamplingBootstrap { ci, draws, redrawn })
}

pub fn sampling_bootstrap_ci(
    records: &[UnitRecord],
    estimator: &Estimator,
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<ConfidenceInterval> {
    Ok(sampling_bootstrap(records, estimator, reps, alpha, seed)?.ci)
}

fn sorted_arm(records: &[UnitRecord], treated: bool) -> Vec<(usize, f64)> {
    let mut arm: Vec<(usize, f64)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.treated == treated)
        .map(|(i, r)| (i, r.observed_outcome))
        .collect();
    arm.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    arm
}

/// `inf { y : F(y) >= u }` for the empirical CDF of sorted values.
fn empirical_inverse(sorted: &[f64], u: f64) -> f64 {
    let m = sorted.len();
    // Smallest r with r / m >= u, guarding against rounding in the ratio.
    let r = ((u * m as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[r.min(m) - 1]
}

fn empirical_cdf(sorted: &[f64], y: f64) -> f64 {
    sorted.partition_point(|&v| v <= y) as f64 / sorted.len() as f64
}

/// Complete table that couples the two observed marginals by rank.
pub fn isotone_impute(records: &[UnitRecord]) -> Result<PotentialOutcomeTable> {
    let treated = sorted_arm(records, true);
    let control = sorted_arm(records, false);
    if treated.is_empty() || control.is_empty() {
        return Err(Error::InsufficientData("isotone imputation needs both arms".into()));
    }
    let mut outcomes: Vec<[f64; 2]> = records
        .iter()
        .map(|r| if r.treated { [f64::NAN, r.observed_outcome] } else { [r.observed_outcome, f64::NAN] })
        .collect();
    if treated.len() == control.len() {
        for (&(ti, ty), &(ci, cy)) in treated.iter().zip(&control) {
            outcomes[ti][0] = cy;
            outcomes[ci][1] = ty;
        }
    } else {
        let tv: Vec<f64> = treated.iter().map(|p| p.1).collect();
        let cv: Vec<f64> = control.iter().map(|p| p.1).collect();
        for &(ti, ty) in &treated {
            outcomes[ti][0] = empirical_inverse(&cv, empirical_cdf(&tv, ty));
        }
        for &(ci, cy) in &control {
            outcomes[ci][1] = empirical_inverse(&tv, empirical_cdf(&cv, cy));
        }
    }
    PotentialOutcomeTable::new(records.iter().map(|r| r.unit_id.clone()).collect(), outcomes)
}

/// Exact `Var_Z[tau_hat]` on a complete table by enumerating the design.
pub fn enumerated_variance(
    table: &PotentialOutcomeTable,
    mech: &AssignmentMechanism,
    estimator: &Estimator,
) -> Result<f64> {
    let law = mech.enumerate_law::<f64>()?;
    let mut mean = 0.0;
    let mut second = 0.0;
    for (z, p) in &law {
        let v = estimator
            .evaluate_table(z.as_slice(), table)
            .ok_or_else(|| Error::Domain(format!("estimator undefined at assignment {z}")))?;
        mean += p * v;
        second += p * v * v;
    }
    Ok((second - mean * mean).max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityBound {
    pub beta: f64,
    pub epsilon: f64,
    pub n: usize,
    pub p_bar: f64,
    pub p_tilde: f64,
    pub cov_sum: f64,
    /// Whether the second term uses the Hoeffding form for independent assignments.
    pub hoeffding: bool,
}

/// Probability bound on `V* < Var_Z[tau_hat]`. Independent designs use
/// `8 exp(-N P~^2 / 2)` in place of the covariance term.
pub fn theorem1_beta(epsilon: f64, mech: &AssignmentMechanism) -> Result<ValidityBound> {
    let p = mech.treatment_probabilities()?;
    let moments = second_moments::<f64>(mech, MomentMethod::Default)?;
    validity_bound(epsilon, &p, moments.covariance_sum(), mech.is_independent())
}

/// The same bound from its ingredients.
pub fn validity_bound(epsilon: f64, p: &[f64], cov_sum: f64, independent: bool) -> Result<ValidityBound> {
    let n = p.len();
    if n == 0 {
        return Err(Error::Parameter("validity bound needs N >= 1".into()));
    }
    let p_bar = p.iter().sum::<f64>() / n as f64;
    let p_tilde = p_bar.min(1.0 - p_bar);
    if !(p_tilde > 0.0) {
        return Err(Error::NonProbabilistic { unit: 0, probability: p_bar });
    }
    let nf = n as f64;
    let first = 8.0 * (-(epsilon * epsilon / 4.0) * nf * p_tilde).exp();
    let second = if independent {
        8.0 * (-0.5 * nf * p_tilde * p_tilde).exp()
    } else {
        32.0 / (nf * nf * p_tilde * p_tilde) * cov_sum
    };
    Ok(ValidityBound { beta: first + second, epsilon, n, p_bar, p_tilde, cov_sum, hoeffding: independent })
}
