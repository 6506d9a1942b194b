//! Known assignment mechanisms and the moments of the treatment vector.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest unit count for which structured designs are expanded into their full law.
pub const MAX_ENUMERATION_UNITS: usize = 20;

/// Largest unit count for which the default moment method enumerates a design.
pub const DEFAULT_ENUMERATION_UNITS: usize = 16;

/// Draw count used by the default Monte-Carlo fallback.
pub const DEFAULT_MONTE_CARLO_DRAWS: usize = 100_000;

/// Binary treatment vector. Serialized as a string of `0`/`1` characters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(pub Vec<bool>);

impl Assignment {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn treated_count(&self) -> usize {
        self.0.iter().filter(|&&z| z).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn z(&self, i: usize) -> bool {
        self.0[i]
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &z in &self.0 {
            f.write_str(if z { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidDesign(format!("assignment string holds `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Assignment)
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedAssignment {
    pub assignment: Assignment,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignKind {
    /// Independent coin flips with per-unit probabilities.
    Bernoulli { p: Vec<f64> },
    /// Exactly `n1` treated units, uniform over such assignments.
    CompleteRandomization { n1: usize },
    /// One treated unit per pair, independent fair coins across pairs.
    MatchedPairs { pairs: Vec<(usize, usize)> },
    /// Explicit law over assignment vectors.
    Enumerated { law: Vec<WeightedAssignment> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMechanism {
    pub kind: DesignKind,
    pub n: usize,
}

impl AssignmentMechanism {
    pub fn bernoulli(n: usize, p: f64) -> Result<Self> {
        Self::bernoulli_heterogeneous(vec![p; n])
    }

    pub fn bernoulli_heterogeneous(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
            return Err(Error::InvalidDesign("bernoulli probabilities must lie in [0, 1]".into()));
        }
        if p.is_empty() {
            return Err(Error::InvalidDesign("design needs at least one unit".into()));
        }
        let n = p.len();
        Ok(Self { kind: DesignKind::Bernoulli { p }, n })
    }

    pub fn complete(n: usize, n1: usize) -> Result<Self> {
        if n == 0 || n1 > n {
            return Err(Error::InvalidDesign(format!("complete randomization needs 0 <= N1 <= N, got N={n}, N1={n1}")));
        }
        Ok(Self { kind: DesignKind::CompleteRandomization { n1 }, n })
    }

    pub fn matched_pairs(n: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &(a, b) in &pairs {
            for u in [a, b] {
                if u >= n || seen[u] {
                    return Err(Error::InvalidDesign(format!("pairs do not partition the {n} units (unit {u})")));
                }
                seen[u] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidDesign("pairs do not cover every unit".into()));
        }
        Ok(Self { kind: DesignKind::MatchedPairs { pairs }, n })
    }

    /// Pairs adjacent units after sorting by `key` in descending order.
    pub fn pairs_by_descending(key: &[f64]) -> Result<Vec<(usize, usize)>> {
        if !key.len().is_multiple_of(2) {
            return Err(Error::Pairing(format!("cannot pair an odd number of units ({})", key.len())));
        }
        let mut order: Vec<usize> = (0..key.len()).collect();
        order.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
        Ok(order.chunks(2).map(|c| (c[0], c[1])).collect())
    }

    pub fn enumerated(law: Vec<WeightedAssignment>) -> Result<Self> {
        let n = law.first().map(|w| w.assignment.len()).ok_or_else(|| Error::InvalidDesign("empty law".into()))?;
        if n == 0 {
            return Err(Error::InvalidDesign("design needs at least one unit".into()));
        }
        if let Some(w) = law.iter().find(|w| w.assignment.len() != n) {
            return Err(Error::InvalidDesign(format!("assignment {} has length {}, expected {n}", w.assignment, w.assignment.len())));
        }
        if law.iter().any(|w| !(w.probability >= 0.0 && w.probability.is_finite())) {
            return Err(Error::InvalidDesign("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = law.iter().map(|w| w.probability).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDesign(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Self { kind: DesignKind::Enumerated { law }, n })
    }

    /// Reads an explicit law from a JSON list of `{assignment, probability}`.
    pub fn load_enumerated(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let law: Vec<WeightedAssignment> = serde_json::from_str(&text)?;
        Self::enumerated(law)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            DesignKind::Bernoulli { .. } => "bernoulli",
            DesignKind::CompleteRandomization { .. } => "complete_randomization",
            DesignKind::MatchedPairs { .. } => "matched_pairs",
            DesignKind::Enumerated { .. } => "enumerated",
        }
    }

    /// `(N0, N1)` when every assignment in the support treats the same number of units.
    pub fn fixed_arm_sizes(&self) -> Option<(usize, usize)> {
        match &self.kind {
            DesignKind::Bernoulli { p } => {
                let ones = p.iter().filter(|&&q| q == 1.0).count();
                let zeros = p.iter().filter(|&&q| q == 0.0).count();
                (ones + zeros == self.n).then_some((zeros, ones))
            }
            DesignKind::CompleteRandomization { n1 } => Some((self.n - n1, *n1)),
            DesignKind::MatchedPairs { pairs } => Some((pairs.len(), pairs.len())),
            DesignKind::Enumerated { law } => {
                let mut counts = law.iter().filter(|w| w.probability > 0.0).map(|w| w.assignment.treated_count());
                let first = counts.next()?;
                counts.all(|c| c == first).then_some((self.n - first, first))
            }
        }
    }

    /// Whether unit assignments are mutually independent.
    pub fn is_independent(&self) -> bool {
        matches!(self.kind, DesignKind::Bernoulli { .. })
    }

    pub fn sample(&self, seed: u64) -> Assignment {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        let mut z = vec![false; self.n];
        match &self.kind {
            DesignKind::Bernoulli { p } => {
                for (zi, &pi) in z.iter_mut().zip(p) {
                    *zi = rng.random::<f64>() < pi;
                }
            }
            DesignKind::CompleteRandomization { n1 } => {
                for i in rand::seq::index::sample(rng, self.n, *n1) {
                    z[i] = true;
                }
            }
            DesignKind::MatchedPairs { pairs } => {
                for &(a, b) in pairs {
                    if rng.random::<bool>() {
                        z[a] = true;
                    } else {
                        z[b] = true;
                    }
                }
            }
            DesignKind::Enumerated { law } => {
                let index = WeightedIndex::new(law.iter().map(|w| w.probability)).expect("validated law");
                z.clone_from(&law[index.sample(rng)].assignment.0);
            }
        }
        Assignment(z)
    }

    /// Marginal treatment probabilities `P_i`, rejecting deterministic units.
    pub fn treatment_probabilities(&self) -> Result<Vec<f64>> {
        let p = self.raw_probabilities::<f64>();
        check_probabilistic(&p)?;
        Ok(p)
    }

    /// Same as [`Self::treatment_probabilities`] in the requested scalar.
    pub fn treatment_probabilities_exact<S: Scalar>(&self) -> Result<Vec<S>> {
        let p = self.raw_probabilities::<S>();
        check_probabilistic(&p.iter().map(Scalar::as_f64).collect::<Vec<_>>())?;
        Ok(p)
    }

    fn raw_probabilities<S: Scalar>(&self) -> Vec<S> {
        match &self.kind {
            DesignKind::Bernoulli { p } => p.iter().map(|&q| S::from_f64_exact(q)).collect(),
            DesignKind::CompleteRandomization { n1 } => vec![S::ratio(*n1 as i64, self.n as i64); self.n],
            DesignKind::MatchedPairs { .. } => vec![S::ratio(1, 2); self.n],
            DesignKind::Enumerated { law } => {
                let mut p = vec![S::zero(); self.n];
                for w in law {
                    let prob = S::from_f64_exact(w.probability);
                    for (pi, &z) in p.iter_mut().zip(w.assignment.as_slice()) {
                        if z {
                            *pi = pi.clone() + prob.clone();
                        }
                    }
                }
                p
            }
        }
    }

    /// Full law of the design. Structured designs are expanded when `N <= 20`.
    pub fn enumerate_law<S: Scalar>(&self) -> Result<Vec<(Assignment, S)>> {
        if let DesignKind::Enumerated { law } = &self.kind {
            return Ok(law.iter().map(|w| (w.assignment.clone(), S::from_f64_exact(w.probability))).collect());
        }
        if self.n > MAX_ENUMERATION_UNITS {
            return Err(Error::Capacity(format!(
                "cannot enumerate a {} design over {} units (limit {MAX_ENUMERATION_UNITS})",
                self.name(),
                self.n
            )));
        }
        let mut out = Vec::new();
        match &self.kind {
            DesignKind::Bernoulli { p } => {
                let p: Vec<S> = p.iter().map(|&q| S::from_f64_exact(q)).collect();
                for mask in 0u32..(1u32 << self.n) {
                    let z: Vec<bool> = (0..self.n).map(|i| mask >> i & 1 == 1).collect();
                    let prob = z.iter().zip(&p).fold(S::one(), |acc, (&zi, pi)| {
                        acc * if zi { pi.clone() } else { S::one() - pi.clone() }
                    });
                    if !prob.is_zero() {
                        out.push((Assignment(z), prob));
                    }
                }
            }
            DesignKind::CompleteRandomization { n1 } => {
                let combos = combinations(self.n, *n1);
                let prob = S::ratio(1, combos.len() as i64);
                for set in combos {
                    let mut z = vec![false; self.n];
                    for i in set {
                        z[i] = true;
                    }
                    out.push((Assignment(z), prob.clone()));
                }
            }
            DesignKind::MatchedPairs { pairs } => {
                let prob = S::ratio(1, 1i64 << pairs.len());
                for mask in 0u32..(1u32 << pairs.len()) {
                    let mut z = vec![false; self.n];
                    for (j, &(a, b)) in pairs.iter().enumerate() {
                        if mask >> j & 1 == 1 {
                            z[a] = true;
                        } else {
                            z[b] = true;
                        }
                    }
                    out.push((Assignment(z), prob.clone()));
                }
            }
            DesignKind::Enumerated { .. } => unreachable!(),
        }
        Ok(out)
    }
}

fn check_probabilistic(p: &[f64]) -> Result<()> {
    match p.iter().position(|&q| q <= 0.0 || q >= 1.0) {
        Some(unit) => Err(Error::NonProbabilistic { unit, probability: p[unit] }),
        None => Ok(()),
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MomentMethod {
    Analytic,
    Enumerated,
    MonteCarlo { draws: usize, seed: u64 },
    /// Analytic when available, else enumerated for small designs, else Monte-Carlo.
    Default,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Enumerated,
    MonteCarlo { draws: usize, seed: u64 },
}

/// Key of a fourth-moment entry `Cov[Z_i Z_j, Z_k Z_l]` up to its symmetries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuadKey(pub [u32; 4]);

impl QuadKey {
    pub fn new(i: usize, j: usize, k: usize, l: usize) -> Self {
        let p = if i <= j { (i, j) } else { (j, i) };
        let q = if k <= l { (k, l) } else { (l, k) };
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        QuadKey([p.0 as u32, p.1 as u32, q.0 as u32, q.1 as u32])
    }

    pub fn indices(self) -> [usize; 4] {
        self.0.map(|x| x as usize)
    }
}

impl fmt::Display for QuadKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [i, j, k, l] = self.0;
        write!(f, "({i},{j},{k},{l})")
    }
}

/// Sparse table of `Cov[Z_i Z_j, Z_k Z_l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourthMoments<S> {
    pub entries: HashMap<QuadKey, S>,
    /// Units are independent, so entries over disjoint index pairs are zero and not stored.
    pub independent: bool,
}

impl<S: Scalar> FourthMoments<S> {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> Option<S> {
        let key = QuadKey::new(i, j, k, l);
        if let Some(v) = self.entries.get(&key) {
            return Some(v.clone());
        }
        let disjoint = i != k && i != l && j != k && j != l;
        (self.independent && disjoint).then(S::zero)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreatmentMoments<S> {
    pub first: Vec<S>,
    /// `second[i][j] = Cov[Z_i, Z_j]`.
    pub second: Vec<Vec<S>>,
    pub fourth: Option<FourthMoments<S>>,
    pub provenance: Provenance,
}

impl<S: Scalar> TreatmentMoments<S> {
    pub fn n(&self) -> usize {
        self.first.len()
    }

    /// `sum_ij Cov[Z_i, Z_j]`.
    pub fn covariance_sum(&self) -> S {
        self.second.iter().flatten().fold(S::zero(), |acc, v| acc + v.clone())
    }

    pub fn to_f64(&self) -> TreatmentMoments<f64> {
        TreatmentMoments {
            first: self.first.iter().map(Scalar::as_f64).collect(),
            second: self.second.iter().map(|row| row.iter().map(Scalar::as_f64).collect()).collect(),
            fourth: self.fourth.as_ref().map(|f| FourthMoments {
                entries: f.entries.iter().map(|(k, v)| (*k, v.as_f64())).collect(),
                independent: f.independent,
            }),
            provenance: self.provenance,
        }
    }

    pub fn to_json(&self) -> MomentsJson {
        let f = self.to_f64();
        let mut fourth: Option<Vec<FourthEntry>> = f.fourth.map(|t| {
            t.entries
                .into_iter()
                .map(|(key, value)| {
                    let [i, j, k, l] = key.indices();
                    FourthEntry { i, j, k, l, value }
                })
                .collect()
        });
        if let Some(entries) = fourth.as_mut() {
            entries.sort_by_key(|e| (e.i, e.j, e.k, e.l));
        }
        MomentsJson { provenance: f.provenance, first: f.first, second: f.second, fourth }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourthEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub value: f64,
}

/// Inspection format for exported moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentsJson {
    pub provenance: Provenance,
    pub first: Vec<f64>,
    pub second: Vec<Vec<f64>>,
    pub fourth: Option<Vec<FourthEntry>>,
}

fn resolve_method(mech: &AssignmentMechanism, method: MomentMethod) -> MomentMethod {
    match method {
        MomentMethod::Default => match mech.kind {
            DesignKind::Enumerated { .. } => MomentMethod::Enumerated,
            _ => MomentMethod::Analytic,
        },
        other => other,
    }
}

fn default_fourth_method(mech: &AssignmentMechanism) -> MomentMethod {
    if matches!(mech.kind, DesignKind::Enumerated { .. }) || mech.n <= DEFAULT_ENUMERATION_UNITS {
        MomentMethod::Enumerated
    } else {
        MomentMethod::MonteCarlo { draws: DEFAULT_MONTE_CARLO_DRAWS, seed: 0 }
    }
}

pub fn second_moments<S: Scalar>(mech: &AssignmentMechanism, method: MomentMethod) -> Result<TreatmentMoments<S>> {
    let n = mech.n;
    match resolve_method(mech, method) {
        MomentMethod::Analytic => {
            let mut second = vec![vec![S::zero(); n]; n];
            let first: Vec<S>;
            match &mech.kind {
                DesignKind::Bernoulli { p } => {
                    first = p.iter().map(|&q| S::from_f64_exact(q)).collect();
                    for i in 0..n {
                        second[i][i] = first[i].clone() * (S::one() - first[i].clone());
                    }
                }
                DesignKind::CompleteRandomization { n1 } => {
                    let p = S::ratio(*n1 as i64, n as i64);
                    first = vec![p.clone(); n];
                    let var = p.clone() * (S::one() - p.clone());
                    let cov = if n > 1 {
                        p.clone() * S::ratio(*n1 as i64 - 1, n as i64 - 1) - p.clone() * p.clone()
                    } else {
                        S::zero()
                    };
                    for (i, row) in second.iter_mut().enumerate() {
                        for (j, v) in row.iter_mut().enumerate() {
                            *v = if i == j { var.clone() } else { cov.clone() };
                        }
                    }
                }
                DesignKind::MatchedPairs { pairs } => {
                    first = vec![S::ratio(1, 2); n];
                    for i in 0..n {
                        second[i][i] = S::ratio(1, 4);
                    }
                    for &(a, b) in pairs {
                        second[a][b] = S::ratio(-1, 4);
                        second[b][a] = S::ratio(-1, 4);
                    }
                }
                DesignKind::Enumerated { .. } => {
                    return Err(Error::Parameter("analytic moments are unavailable for enumerated designs".into()))
                }
            }
            Ok(TreatmentMoments { first, second, fourth: None, provenance: Provenance::Analytic })
        }
        MomentMethod::Enumerated => {
            let law = mech.enumerate_law::<S>()?;
            let mut first = vec![S::zero(); n];
            let mut joint = vec![vec![S::zero(); n]; n];
            for (z, prob) in &law {
                let treated: Vec<usize> = (0..n).filter(|&i| z.z(i)).collect();
                for &i in &treated {
                    first[i] = first[i].clone() + prob.clone();
                    for &j in &treated {
                        joint[i][j] = joint[i][j].clone() + prob.clone();
                    }
                }
            }
            let second = (0..n)
                .map(|i| (0..n).map(|j| joint[i][j].clone() - first[i].clone() * first[j].clone()).collect())
                .collect();
            Ok(TreatmentMoments { first, second, fourth: None, provenance: Provenance::Enumerated })
        }
        MomentMethod::MonteCarlo { draws, seed } => {
            if draws < 2 {
                return Err(Error::Parameter(format!("Monte-Carlo moments need at least 2 draws, got {draws}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sum = vec![0.0f64; n];
            let mut cross = vec![vec![0.0f64; n]; n];
            for _ in 0..draws {
                let z = mech.sample_with(&mut rng);
                let treated: Vec<usize> = (0..n).filter(|&i| z.z(i)).collect();
                for &i in &treated {
                    sum[i] += 1.0;
                    for &j in &treated {
                        cross[i][j] += 1.0;
                    }
                }
            }
            let r = draws as f64;
            let mean: Vec<f64> = sum.iter().map(|s| s / r).collect();
            let second = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| S::from_f64_exact((cross[i][j] - r * mean[i] * mean[j]) / (r - 1.0)))
                        .collect()
                })
                .collect();
            Ok(TreatmentMoments {
                first: mean.into_iter().map(S::from_f64_exact).collect(),
                second,
                fourth: None,
                provenance: Provenance::MonteCarlo { draws, seed },
            })
        }
        MomentMethod::Default => unreachable!("resolved above"),
    }
}

/// All unordered index pairs `(i, j)` with `i <= j`.
fn unordered_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

/// Second moments plus the fourth-moment table.
///
/// Only `Enumerated` and `MonteCarlo` are accepted (`Default` picks one).
pub fn fourth_moments<S: Scalar>(mech: &AssignmentMechanism, method: MomentMethod) -> Result<TreatmentMoments<S>> {
    let method = match method {
        MomentMethod::Default => default_fourth_method(mech),
        MomentMethod::Analytic => {
            return Err(Error::Parameter("fourth moments are computed by enumeration or Monte-Carlo".into()))
        }
        other => other,
    };
    let n = mech.n;
    let independent = mech.is_independent();
    let pairs = unordered_pairs(n);
    // Quadruples stored: every pair of pairs (p <= q), minus disjoint ones for independent designs.
    let quads: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|a| (a..pairs.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| {
            let ((i, j), (k, l)) = (pairs[a], pairs[b]);
            !independent || i == k || i == l || j == k || j == l
        })
        .collect();

    let mut base = match method {
        MomentMethod::Enumerated => second_moments::<S>(mech, MomentMethod::Enumerated)?,
        MomentMethod::MonteCarlo { .. } => second_moments::<S>(mech, method)?,
        _ => unreachable!(),
    };

    let accumulate = |treated_pairs: &[bool], weight: S, pair_mean: &mut [S], quad_mean: &mut [S]| {
        for (idx, &on) in treated_pairs.iter().enumerate() {
            if on {
                pair_mean[idx] = pair_mean[idx].clone() + weight.clone();
            }
        }
        for (slot, &(a, b)) in quad_mean.iter_mut().zip(&quads) {
            if treated_pairs[a] && treated_pairs[b] {
                *slot = slot.clone() + weight.clone();
            }
        }
    };

    let mut pair_mean = vec![S::zero(); pairs.len()];
    let mut quad_mean = vec![S::zero(); quads.len()];
    let mut flags = vec![false; pairs.len()];
    let fill_flags = |z: &Assignment, flags: &mut Vec<bool>| {
        for (f, &(i, j)) in flags.iter_mut().zip(&pairs) {
            *f = z.z(i) && z.z(j);
        }
    };

    let finite_correction = match method {
        MomentMethod::Enumerated => {
            for (z, prob) in mech.enumerate_law::<S>()? {
                fill_flags(&z, &mut flags);
                accumulate(&flags, prob, &mut pair_mean, &mut quad_mean);
            }
            None
        }
        MomentMethod::MonteCarlo { draws, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9));
            let w = S::from_f64_exact(1.0 / draws as f64);
            for _ in 0..draws {
                let z = mech.sample_with(&mut rng);
                fill_flags(&z, &mut flags);
                accumulate(&flags, w.clone(), &mut pair_mean, &mut quad_mean);
            }
            Some(draws as f64 / (draws as f64 - 1.0))
        }
        _ => unreachable!(),
    };

    let mut entries = HashMap::with_capacity(quads.len());
    for (&(a, b), m) in quads.iter().zip(quad_mean) {
        let mut cov = m - pair_mean[a].clone() * pair_mean[b].clone();
        if let Some(c) = finite_correction {
            cov = cov * S::from_f64_exact(c);
        }
        let ((i, j), (k, l)) = (pairs[a], pairs[b]);
        entries.insert(QuadKey::new(i, j, k, l), cov);
    }
    base.fourth = Some(FourthMoments { entries, independent });
    Ok(base)
}
