//! Risk measures. The central one is the Choquet integral of a law against
//! a distortion `h`:
//!
//! ```text
//! ρ_h(X) = ∫₀^∞ h(P(X>x)) dx + ∫_(−∞)^0 (h(P(X>x)) − 1) dx
//! ```
//!
//! evaluated in closed form on finite supports. ES is the `es_clip` special
//! case and also gets a direct tail-average implementation plus an
//! exhaustive subset-maximum oracle, so the three routes can check each
//! other. Beyond distortions, the union covers the entropic measure,
//! finite-scenario suprema, a Choquet integral against a capacity on a
//! fixed finite partition, and finite Kusuoka suprema; the last three exist
//! to host the counterexample gallery.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::DiscreteDistribution;
use crate::distortion::{DistortionFunction, DistortionSpec};
use crate::error::{Error, Result};
use crate::xreal::XReal;

/// Argument of a risk measure: either a law, or a vector of values on the
/// fixed finite space a scenario/capacity measure lives on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Law(DiscreteDistribution),
    Cells(Vec<f64>),
}

impl Position {
    pub fn fold(&self) -> Position {
        match self {
            Position::Law(x) => Position::Law(x.fold()),
            Position::Cells(v) => Position::Cells(v.iter().map(|a| a.abs()).collect()),
        }
    }

    pub fn negate(&self) -> Position {
        match self {
            Position::Law(x) => Position::Law(x.negate()),
            Position::Cells(v) => Position::Cells(v.iter().map(|a| -a).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RiskMeasure {
    Distortion(DistortionFunction),
    /// `(1/β) log E[exp(βX)]`.
    Entropic { beta: f64 },
    /// `max_Q E^Q[X]` over finitely many scenarios on a shared finite space.
    ScenarioSup { scenarios: Vec<Vec<f64>> },
    /// Choquet integral against a monotone submodular set function on the
    /// subsets of a fixed partition into `cells` cells; `nu[mask]` is the
    /// value on the union encoded by `mask`.
    Capacity { cells: usize, nu: Vec<f64> },
    /// `max_h ρ_h(X)` over a finite list of concave distortions.
    KusuokaSup { hs: Vec<DistortionFunction> },
}

const CAPACITY_MAX_CELLS: usize = 12;

impl RiskMeasure {
    pub fn distortion(h: DistortionFunction) -> RiskMeasure {
        RiskMeasure::Distortion(h)
    }

    pub fn entropic(beta: f64) -> Result<RiskMeasure> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::BadParameter(format!("entropic beta {beta}")));
        }
        Ok(RiskMeasure::Entropic { beta })
    }

    pub fn scenario_sup(scenarios: Vec<Vec<f64>>) -> Result<RiskMeasure> {
        let Some(first) = scenarios.first() else {
            return Err(Error::BadParameter("scenario_sup needs at least one scenario".into()));
        };
        let m = first.len();
        if m == 0 {
            return Err(Error::BadParameter("empty scenario".into()));
        }
        for q in &scenarios {
            if q.len() != m {
                return Err(Error::LengthMismatch(m, q.len()));
            }
            if q.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                return Err(Error::BadParameter("scenario with negative mass".into()));
            }
            let s: f64 = q.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::WeightSum(s));
            }
        }
        Ok(RiskMeasure::ScenarioSup { scenarios })
    }

    /// `nu` indexed by cell-subset bitmask, length `2^cells`. Validated
    /// exhaustively: grounded, normalized, monotone, submodular.
    pub fn capacity(nu: Vec<f64>) -> Result<RiskMeasure> {
        let full = nu.len().checked_sub(1).ok_or_else(|| {
            Error::BadParameter("capacity table is empty".into())
        })?;
        if !nu.len().is_power_of_two() {
            return Err(Error::BadParameter(format!(
                "capacity table length {} is not a power of two",
                nu.len()
            )));
        }
        let cells = nu.len().trailing_zeros() as usize;
        if cells == 0 || cells > CAPACITY_MAX_CELLS {
            return Err(Error::BadParameter(format!(
                "capacity cell count {cells} outside 1..={CAPACITY_MAX_CELLS}"
            )));
        }
        if nu[0] != 0.0 || nu[full] != 1.0 {
            return Err(Error::BadParameter("capacity needs nu(empty)=0 and nu(full)=1".into()));
        }
        for (mask, &v) in nu.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::BadParameter(format!("capacity value {v}")));
            }
            for i in 0..cells {
                if mask & (1 << i) == 0 && nu[mask | (1 << i)] < v - 1e-12 {
                    return Err(Error::BadParameter("capacity is not monotone".into()));
                }
            }
        }
        // local characterization of submodularity: adding j helps less once
        // i is already present
        for mask in 0..nu.len() {
            for i in 0..cells {
                if mask & (1 << i) != 0 {
                    continue;
                }
                for j in (i + 1)..cells {
                    if mask & (1 << j) != 0 {
                        continue;
                    }
                    let a = nu[mask | (1 << i)];
                    let b = nu[mask | (1 << j)];
                    let ab = nu[mask | (1 << i) | (1 << j)];
                    if ab + nu[mask] > a + b + 1e-12 {
                        return Err(Error::BadParameter("capacity is not submodular".into()));
                    }
                }
            }
        }
        Ok(RiskMeasure::Capacity { cells, nu })
    }

    pub fn kusuoka_sup(hs: Vec<DistortionFunction>) -> Result<RiskMeasure> {
        if hs.is_empty() {
            return Err(Error::BadParameter("kusuoka_sup needs at least one distortion".into()));
        }
        if let Some(h) = hs.iter().find(|h| !h.is_concave()) {
            return Err(Error::BadParameter(format!(
                "kusuoka_sup member not concave: {:?}",
                h.spec()
            )));
        }
        Ok(RiskMeasure::KusuokaSup { hs })
    }

    pub fn evaluate(&self, x: &Position) -> Result<f64> {
        match (self, x) {
            (RiskMeasure::Distortion(h), Position::Law(x)) => Ok(choquet(h, x)),
            (RiskMeasure::Entropic { beta }, Position::Law(x)) => Ok(entropic(*beta, x)),
            (RiskMeasure::KusuokaSup { hs }, Position::Law(x)) => Ok(hs
                .iter()
                .map(|h| choquet(h, x))
                .fold(f64::NEG_INFINITY, f64::max)),
            (RiskMeasure::ScenarioSup { scenarios }, Position::Cells(v)) => {
                let m = scenarios[0].len();
                if v.len() != m {
                    return Err(Error::DimensionMismatch { expected: m, got: v.len() });
                }
                Ok(scenarios
                    .iter()
                    .map(|q| q.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max))
            }
            (RiskMeasure::Capacity { cells, nu }, Position::Cells(v)) => {
                if v.len() != *cells {
                    return Err(Error::DimensionMismatch { expected: *cells, got: v.len() });
                }
                Ok(choquet_capacity(nu, v))
            }
            _ => Err(Error::DomainMismatch),
        }
    }
}

/// Survival-form Choquet integral: exact step integration of `h∘P(X>x)`
/// over the gaps of the support, with the all-mass head below the smallest
/// atom and the zero-mass tail above the largest contributing `a_1` and
/// `a_m` when those atoms sit on the wrong side of 0.
pub fn choquet(h: &DistortionFunction, x: &DiscreteDistribution) -> f64 {
    let atoms = x.atoms();
    let surv = x.survivals();
    let m = atoms.len();
    let mut rho = 0.0;
    if atoms[0] > 0.0 {
        // (0, a_1) has survival 1, integrand h(1) = 1
        rho += atoms[0];
    }
    if atoms[m - 1] < 0.0 {
        // (a_m, 0) has survival 0, integrand h(0) - 1 = -1
        rho += atoms[m - 1];
    }
    for i in 1..m {
        let lo = atoms[i - 1];
        let hi = atoms[i];
        let hv = h.eval(surv[i]);
        let pos_len = hi.max(0.0) - lo.max(0.0);
        let neg_len = hi.min(0.0) - lo.min(0.0);
        rho += hv * pos_len + (hv - 1.0) * neg_len;
    }
    rho
}

/// Quantile-form Choquet integral `∫₀¹ VaR_(1−q)(X) dh(q)`, as the sum of
/// atom values against increments of `h` along the survival sequence.
/// Agrees with [`choquet`] for the (continuous) shipped kinds; kept as an
/// independent route for cross-checks.
pub fn choquet_quantile_form(h: &DistortionFunction, x: &DiscreteDistribution) -> f64 {
    let surv = x.survivals();
    x.atoms()
        .iter()
        .enumerate()
        .map(|(i, &a)| a * (h.eval(surv[i]) - h.eval(surv[i + 1])))
        .sum()
}

/// Expected Shortfall `ES_p(X) = (1/(1−p)) ∫_p^1 VaR_q(X) dq` by exact step
/// integration of the quantile function, carried out in the survival
/// variable so far-tail atoms survive the subtraction from 1.
pub fn es(x: &DiscreteDistribution, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::LevelOutOfRange(p));
    }
    let mass = 1.0 - p;
    Ok(x.upper_tail_integral(mass) / mass)
}

/// `ES_p(|X|)`.
pub fn es_folded(x: &DiscreteDistribution, p: f64) -> Result<f64> {
    es(&x.fold(), p)
}

/// ES as the maximal conditional mean over events of probability `1−p`,
/// enumerated exhaustively on a uniform `n`-point space. Oracle for [`es`];
/// needs `(1−p)·n` to be a whole number of points.
pub fn es_sup_bruteforce(values: &[f64], p: f64) -> Result<f64> {
    let n = values.len();
    if n == 0 || n > 16 {
        return Err(Error::BadParameter(format!(
            "bruteforce needs 1..=16 values, got {n}"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::LevelOutOfRange(p));
    }
    let size = (1.0 - p) * n as f64;
    let k = size.round();
    if (size - k).abs() > 1e-9 || k < 1.0 {
        return Err(Error::SubsetSize(size));
    }
    let k = k as u32;
    let mut best = f64::NEG_INFINITY;
    for mask in 0..(1u32 << n) {
        if mask.count_ones() != k {
            continue;
        }
        let mut s = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if mask & (1 << i) != 0 {
                s += v;
            }
        }
        best = best.max(s / k as f64);
    }
    Ok(best)
}

/// Integrated Expected Shortfall `∫₀¹ ES_p(X) dp = ∫₀¹ −log(1−q)·VaR_q dq`,
/// integrated exactly per quantile step. Substituting z = 1−q turns the
/// antiderivative `(1−q)log(1−q) + q` into `B(z) = z(1−log z)`, evaluated
/// on suffix survivals so that ~1e−300 tail masses keep full precision.
pub fn ies_direct(x: &DiscreteDistribution) -> f64 {
    fn b(z: f64) -> f64 {
        if z == 0.0 {
            0.0
        } else {
            z * (1.0 - z.ln())
        }
    }
    let surv = x.survivals();
    x.atoms()
        .iter()
        .enumerate()
        .map(|(i, &a)| a * (b(surv[i]) - b(surv[i + 1])))
        .sum()
}

/// Smallest `c` with `ρ_h ≤ c·E` on nonnegative integrable positions; the
/// chord-slope limit of `h` at the origin. `+∞` means no such constant.
pub fn expectation_domination_constant(h: &DistortionFunction) -> Result<XReal> {
    h.slope_limit()
}

fn entropic(beta: f64, x: &DiscreteDistribution) -> f64 {
    // log-sum-exp, stabilized by the largest exponent
    let m = x
        .atoms()
        .iter()
        .map(|&a| beta * a)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = x
        .atoms()
        .iter()
        .zip(x.weights())
        .map(|(&a, &w)| w * (beta * a - m).exp())
        .sum();
    (m + s.ln()) / beta
}

fn choquet_capacity(nu: &[f64], v: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    // descending by value; stable, so ties resolve by cell index
    idx.sort_by(|&i, &j| v[j].total_cmp(&v[i]));
    let mut mask = 0usize;
    let mut prev = 0.0;
    let mut rho = 0.0;
    for &i in &idx {
        mask |= 1 << i;
        rho += v[i] * (nu[mask] - prev);
        prev = nu[mask];
    }
    rho
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum OtherSpec {
    Entropic { beta: f64 },
    ScenarioSup { scenarios: Vec<Vec<f64>> },
    Capacity { nu: Vec<f64> },
    KusuokaSup { hs: Vec<DistortionSpec> },
}

impl Serialize for RiskMeasure {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RiskMeasure::Distortion(h) => h.spec().serialize(ser),
            RiskMeasure::Entropic { beta } => {
                OtherSpec::Entropic { beta: *beta }.serialize(ser)
            }
            RiskMeasure::ScenarioSup { scenarios } => OtherSpec::ScenarioSup {
                scenarios: scenarios.clone(),
            }
            .serialize(ser),
            RiskMeasure::Capacity { nu, .. } => {
                OtherSpec::Capacity { nu: nu.clone() }.serialize(ser)
            }
            RiskMeasure::KusuokaSup { hs } => OtherSpec::KusuokaSup {
                hs: hs.iter().map(|h| h.spec().clone()).collect(),
            }
            .serialize(ser),
        }
    }
}

impl<'de> Deserialize<'de> for RiskMeasure {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(de)?;
        let kind = v
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| D::Error::custom("measure spec needs a \"kind\" field"))?;
        let built = match kind {
            "entropic" | "scenario_sup" | "capacity" | "kusuoka_sup" => {
                let other: OtherSpec =
                    serde_json::from_value(v).map_err(D::Error::custom)?;
                match other {
                    OtherSpec::Entropic { beta } => RiskMeasure::entropic(beta),
                    OtherSpec::ScenarioSup { scenarios } => RiskMeasure::scenario_sup(scenarios),
                    OtherSpec::Capacity { nu } => RiskMeasure::capacity(nu),
                    OtherSpec::KusuokaSup { hs } => hs
                        .into_iter()
                        .map(DistortionFunction::new)
                        .collect::<Result<Vec<_>>>()
                        .and_then(RiskMeasure::kusuoka_sup),
                }
            }
            _ => {
                let spec: DistortionSpec =
                    serde_json::from_value(v).map_err(D::Error::custom)?;
                DistortionFunction::new(spec).map(RiskMeasure::Distortion)
            }
        };
        built.map_err(D::Error::custom)
    }
}
