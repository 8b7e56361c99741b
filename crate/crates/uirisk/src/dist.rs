//! Finite discrete distributions and their elementary transforms.
//!
//! A law is a sorted atom vector with strictly positive weights summing to
//! one. Quantiles follow the left-continuous convention
//! `VaR_p = inf { x : P(X <= x) >= p }`, so every quantile-side integral here
//! is an exact step-function sum, never a quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atom values within this distance are identified at construction; keeps
/// folded and mixed supports canonical under floating-point noise.
pub const MERGE_TOL: f64 = 1e-12;

/// Tolerated deviation of the input weight sum from 1 before renormalizing.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist")]
pub struct DiscreteDistribution {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDist {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawDist> for DiscreteDistribution {
    type Error = Error;
    fn try_from(raw: RawDist) -> Result<Self> {
        DiscreteDistribution::new(raw.atoms, raw.weights)
    }
}

impl DiscreteDistribution {
    /// Builds a validated law: sorts, merges atoms within [`MERGE_TOL`]
    /// (keeping the first value of each merge group, so exact duplicates
    /// merge exactly), checks weights, renormalizes.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch(atoms.len(), weights.len()));
        }
        if atoms.is_empty() {
            return Err(Error::EmptySample);
        }
        for &a in &atoms {
            if !a.is_finite() {
                return Err(Error::NonFiniteSample);
            }
        }
        for &w in &weights {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositiveWeight);
            }
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut out_a: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match out_a.last() {
                // compare against the group representative so merge drift
                // stays below MERGE_TOL in total
                Some(&rep) if a - rep <= MERGE_TOL => {
                    *out_w.last_mut().unwrap() += w;
                }
                _ => {
                    out_a.push(a);
                    out_w.push(w);
                }
            }
        }

        let sum: f64 = out_w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSum(sum));
        }
        if sum != 1.0 {
            for w in &mut out_w {
                *w /= sum;
            }
        }
        Ok(DiscreteDistribution {
            atoms: out_a,
            weights: out_w,
        })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let (atoms, weights) = pairs.iter().copied().unzip();
        Self::new(atoms, weights)
    }

    /// Empirical law: distinct sorted sample values with relative
    /// frequencies.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        let w = 1.0 / samples.len() as f64;
        Self::new(samples.to_vec(), vec![w; samples.len()])
    }

    pub fn singleton(c: f64) -> Result<Self> {
        Self::new(vec![c], vec![1.0])
    }

    /// Law of Bernoulli(theta) on {0,1}; degenerate at the endpoints.
    pub fn bernoulli(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::BadParameter(format!("bernoulli parameter {theta}")));
        }
        if theta == 0.0 {
            Self::singleton(0.0)
        } else if theta == 1.0 {
            Self::singleton(1.0)
        } else {
            Self::new(vec![0.0, 1.0], vec![1.0 - theta, theta])
        }
    }

    /// Uniform law on the given values (duplicates merge).
    pub fn uniform(values: &[f64]) -> Result<Self> {
        Self::from_samples(values)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() // never true for a constructed law
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    pub fn max_abs_atom(&self) -> f64 {
        self.min_atom().abs().max(self.max_atom().abs())
    }

    /// Cumulative probabilities F_i = P(X <= a_i); the last entry is pinned
    /// to exactly 1 (the weights sum to 1 by invariant, so any deviation is
    /// accumulation noise).
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for &w in &self.weights {
            acc += w;
            out.push(acc);
        }
        *out.last_mut().unwrap() = 1.0;
        out
    }

    /// Inclusive survivals S_i = P(X >= a_i) as suffix sums, with S_1 pinned
    /// to exactly 1 and a trailing 0 entry. Suffix summation matters: tail
    /// weights can be ~1e-300 and `1 - cdf` would cancel them to zero.
    pub fn survivals(&self) -> Vec<f64> {
        let m = self.len();
        let mut out = vec![0.0; m + 1];
        for i in (0..m).rev() {
            out[i] = out[i + 1] + self.weights[i];
        }
        out[0] = 1.0;
        out
    }

    /// Left-continuous generalized inverse of the CDF at `p` in (0,1).
    pub fn var(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::LevelOutOfRange(p));
        }
        let cdf = self.cdf();
        let idx = cdf.partition_point(|&f| f < p);
        Ok(self.atoms[idx.min(self.len() - 1)])
    }

    /// The quantile step function of this law.
    pub fn quantile_function(&self) -> QuantileFunction {
        QuantileFunction {
            breakpoints: self.cdf(),
            values: self.atoms.clone(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| a * w)
            .sum()
    }

    /// Exact step integral of the quantile function over `[lo, hi]`,
    /// `0 <= lo <= hi <= 1`. `quantile_integral(0, 1)` equals the mean.
    pub fn quantile_integral(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&lo) && lo <= hi && hi <= 1.0);
        let cdf = self.cdf();
        let mut total = 0.0;
        let mut prev = 0.0f64;
        for (i, &f) in cdf.iter().enumerate() {
            let overlap = (f.min(hi) - prev.max(lo)).max(0.0);
            total += self.atoms[i] * overlap;
            prev = f;
        }
        total
    }

    /// Integral of the quantile function over the top `mass` of
    /// probability, `∫_{1−mass}^1 F⁻¹(u) du`, accumulated in the survival
    /// variable. The prefix-CDF route would round survivals below one ulp
    /// of 1 away entirely; suffix sums keep them.
    pub fn upper_tail_integral(&self, mass: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&mass));
        let s = self.survivals();
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, &a)| a * (s[i].min(mass) - s[i + 1].min(mass)))
            .sum()
    }

    /// Law of |X|.
    pub fn fold(&self) -> DiscreteDistribution {
        let atoms = self.atoms.iter().map(|a| a.abs()).collect();
        DiscreteDistribution::new(atoms, self.weights.clone())
            .expect("folding a valid law preserves validity")
    }

    /// Law of -X. Zero atoms stay +0.0 so reports never print "-0".
    pub fn negate(&self) -> DiscreteDistribution {
        let atoms = self.atoms.iter().map(|a| 0.0 - a).collect();
        DiscreteDistribution::new(atoms, self.weights.clone())
            .expect("negating a valid law preserves validity")
    }

    /// Law of min(X, M).
    pub fn truncate(&self, m: f64) -> Result<DiscreteDistribution> {
        if !m.is_finite() {
            return Err(Error::BadParameter(format!("truncation level {m}")));
        }
        let atoms = self.atoms.iter().map(|a| a.min(m)).collect();
        DiscreteDistribution::new(atoms, self.weights.clone())
    }

    /// Law of X + c.
    pub fn shift(&self, c: f64) -> Result<DiscreteDistribution> {
        let atoms = self.atoms.iter().map(|a| a + c).collect();
        DiscreteDistribution::new(atoms, self.weights.clone())
    }

    /// Law of lambda * X.
    pub fn scale(&self, lambda: f64) -> Result<DiscreteDistribution> {
        let atoms = self.atoms.iter().map(|a| lambda * a).collect();
        DiscreteDistribution::new(atoms, self.weights.clone())
    }

    /// Mixture sum ws[k] * laws[k]. `ws` must be a probability vector of the
    /// same length as `laws`; zero entries drop their component.
    pub fn mix(laws: &[&DiscreteDistribution], ws: &[f64]) -> Result<DiscreteDistribution> {
        if laws.len() != ws.len() {
            return Err(Error::LengthMismatch(laws.len(), ws.len()));
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for (law, &w) in laws.iter().zip(ws) {
            if w < 0.0 || !w.is_finite() {
                return Err(Error::NonPositiveWeight);
            }
            if w == 0.0 {
                continue;
            }
            for (&a, &wi) in law.atoms.iter().zip(&law.weights) {
                atoms.push(a);
                weights.push(w * wi);
            }
        }
        DiscreteDistribution::new(atoms, weights)
    }

    /// One inverse-CDF draw from the uniform variate `u` in (0,1).
    pub fn sample_inverse(&self, u: f64) -> f64 {
        let cdf = self.cdf();
        let idx = cdf.partition_point(|&f| f < u);
        self.atoms[idx.min(self.len() - 1)]
    }

    /// Deepest quadrature level accepted by
    /// [`heavy_integrable_quadrature`](Self::heavy_integrable_quadrature):
    /// beyond it, conditional cell means exceed the double-precision range.
    pub const HEAVY_QUADRATURE_MAX_CELLS: usize = 1030;

    /// Mean-preserving dyadic quadrature of the heavy-tailed integrable law
    /// `X = 1/(U log^2 U)` with `U ~ Unif(0, 1/2]`.
    ///
    /// Cell `j` covers `U in (2^-(j-1)/2, 2^-j/2... ]`, i.e. the dyadic
    /// u-interval `(2^-(j+1), 2^-j]`, and is represented by its conditional
    /// mean `2^(j+1) / (log 2 * j * (j+1))` with mass `2^-j`; a final
    /// remainder cell carries the rest of the tail, also at its conditional
    /// mean. Every cell mean is an exact integral of the density (the
    /// antiderivative of the integrand is `-1/log u`), so the law's mean is
    /// exactly `2/log 2` at every depth.
    ///
    /// The mean is finite but the integrated tail average diverges: the
    /// `ies_direct` value of the depth-`M` quadrature grows like
    /// `2 log M + 0.48`. Depth saturates at
    /// [`HEAVY_QUADRATURE_MAX_CELLS`](Self::HEAVY_QUADRATURE_MAX_CELLS)
    /// because deeper conditional means overflow f64; requests beyond the cap
    /// are clamped.
    pub fn heavy_integrable_quadrature(cells: usize) -> Result<DiscreteDistribution> {
        if cells == 0 {
            return Err(Error::BadParameter("quadrature needs at least one cell".into()));
        }
        let k = cells.min(Self::HEAVY_QUADRATURE_MAX_CELLS);
        let ln2 = std::f64::consts::LN_2;
        let mut atoms = Vec::with_capacity(k + 1);
        let mut weights = Vec::with_capacity(k + 1);
        // 2^(j+1) = 2^(j-63) * 2^64 keeps the intermediate in range up to the
        // depth cap; the power-of-two factors are exact.
        let scale = (64.0f64).exp2();
        for j in 1..=k {
            let jf = j as f64;
            let v = ((jf - 63.0).exp2() / (ln2 * jf * (jf + 1.0))) * scale;
            atoms.push(v);
            weights.push((-jf).exp2());
        }
        // remainder cell: mass 2^-k, conditional mean 2^(k+1)/((k+1) log 2)
        let kf = k as f64;
        let v_rem = ((kf - 63.0).exp2() / (ln2 * (kf + 1.0))) * scale;
        atoms.push(v_rem);
        weights.push((-kf).exp2());
        DiscreteDistribution::new(atoms, weights)
    }

    /// Reads a law from CSV text: either one sample per line, or two columns
    /// `atom,weight`. A non-numeric first line is skipped as a header.
    pub fn from_csv(text: &str) -> Result<DiscreteDistribution> {
        let mut samples: Vec<f64> = Vec::new();
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let first: std::result::Result<f64, _> = fields[0].parse();
            if first.is_err() {
                if lineno == 0 {
                    continue; // header
                }
                return Err(Error::Parse(format!("line {}: {line:?}", lineno + 1)));
            }
            match fields.len() {
                1 => samples.push(first.unwrap()),
                2 => {
                    let w: f64 = fields[1]
                        .parse()
                        .map_err(|_| Error::Parse(format!("line {}: bad weight", lineno + 1)))?;
                    pairs.push((first.unwrap(), w));
                }
                n => {
                    return Err(Error::Parse(format!(
                        "line {}: expected 1 or 2 columns, got {n}",
                        lineno + 1
                    )))
                }
            }
        }
        match (samples.is_empty(), pairs.is_empty()) {
            (false, true) => Self::from_samples(&samples),
            (true, false) => Self::from_pairs(&pairs),
            (true, true) => Err(Error::EmptySample),
            (false, false) => Err(Error::Parse(
                "mixed one-column and two-column rows".into(),
            )),
        }
    }
}

/// Left-continuous quantile step function: `eval(t)` equals `VaR_t` of the
/// source law for `t` in (0,1].
#[derive(Debug, Clone, Serialize)]
pub struct QuantileFunction {
    /// Cumulative probability levels, increasing, last entry 1.
    pub breakpoints: Vec<f64>,
    /// Step values, non-decreasing.
    pub values: Vec<f64>,
}

impl QuantileFunction {
    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t > 0.0 && t <= 1.0);
        let idx = self.breakpoints.partition_point(|&b| b < t);
        self.values[idx.min(self.values.len() - 1)]
    }
}
