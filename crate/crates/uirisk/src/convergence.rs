//! 1-Wasserstein machinery and three limit experiments: a weak law of
//! large numbers under risk-envelope boundedness, stability of ES along a
//! converging sequence of laws, and greedy extraction of a w¹-convergent
//! subsequence from a tight family.
//!
//! On the line, `W¹(F,G) = ∫₀¹ |F⁻¹(t) − G⁻¹(t)| dt`, a finite sum over
//! the merged CDF breakpoints for step quantile functions. The experiments
//! are Monte Carlo with a fixed seed schedule, so identical configurations
//! reproduce identical reports.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDistribution;
use crate::distortion::DistortionFunction;
use crate::error::{Error, Result};
use crate::family::DistributionFamily;
use crate::risk::choquet;
use crate::seeding;

/// Exact 1-Wasserstein distance between two finite laws: the two quantile
/// step functions are integrated against each other over the merged level
/// partition.
pub fn w1(f: &DiscreteDistribution, g: &DiscreteDistribution) -> f64 {
    let (fa, ga) = (f.atoms(), g.atoms());
    let (fc, gc) = (f.cdf(), g.cdf());
    let mut i = 0;
    let mut j = 0;
    let mut prev = 0.0;
    let mut total = 0.0;
    while i < fa.len() && j < ga.len() {
        let level = fc[i].min(gc[j]);
        total += (fa[i] - ga[j]).abs() * (level - prev);
        prev = level;
        if fc[i] == level {
            i += 1;
        }
        if gc[j] == level {
            j += 1;
        }
    }
    total
}

/// Quantile vector of `f` on the uniform grid midpoints `(i−1/2)/m`: a
/// sample of `f` comonotone with any other law sampled on the same grid.
/// Averaging `|comonotone_version(f,m)[i] − comonotone_version(g,m)[i]|`
/// approximates `w1(f,g)` with error vanishing in m.
pub fn comonotone_version(f: &DiscreteDistribution, m: usize) -> Vec<f64> {
    assert!(m >= 1, "grid size must be positive");
    (1..=m)
        .map(|i| {
            f.var((i as f64 - 0.5) / m as f64)
                .expect("midpoint levels lie in (0,1)")
        })
        .collect()
}

/// Mean-zero iid sample sources for the limit experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SampleGenerator {
    /// ±1 with equal probability.
    Coin,
    /// `S·U^{−1/α}` with S = ±1 equiprobable: symmetric heavy tail,
    /// integrable for α > 1, infinite variance for α ≤ 2.
    SymmetricPareto { alpha: f64 },
    Constant { value: f64 },
}

impl SampleGenerator {
    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            SampleGenerator::Coin => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SampleGenerator::SymmetricPareto { alpha } => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
                sign * u.powf(-1.0 / alpha)
            }
            SampleGenerator::Constant { value } => *value,
        }
    }
}

impl std::str::FromStr for SampleGenerator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "coin" {
            return Ok(SampleGenerator::Coin);
        }
        if let Some(a) = s.strip_prefix("pareto:") {
            let alpha: f64 = a
                .parse()
                .map_err(|_| Error::Parse(format!("pareto exponent {a:?}")))?;
            if !(alpha > 1.0) {
                return Err(Error::BadParameter(format!(
                    "pareto exponent {alpha} must exceed 1 for integrability"
                )));
            }
            return Ok(SampleGenerator::SymmetricPareto { alpha });
        }
        if let Some(v) = s.strip_prefix("const:") {
            let value: f64 = v
                .parse()
                .map_err(|_| Error::Parse(format!("constant value {v:?}")))?;
            return Ok(SampleGenerator::Constant { value });
        }
        Err(Error::Parse(format!(
            "unknown generator {s:?}, expected coin | pareto:<alpha> | const:<value>"
        )))
    }
}

/// Sample sizes 1, 2, 4, ... capped by and always ending at `n_max`.
pub fn dyadic_schedule(n_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = 1usize;
    while n < n_max {
        out.push(n);
        n *= 2;
    }
    out.push(n_max);
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnRow {
    pub n: usize,
    /// Empirical `P(|Y_n| > 0.1)` over the replications.
    pub exceed_01: f64,
    /// Empirical `P(|Y_n| > 0.05)`.
    pub exceed_005: f64,
    /// Running sup of `ρ(X̂_n)` over the schedule so far.
    pub rho_env: f64,
    /// Running sup of `ρ′(−X̂_n)`.
    pub rho_prime_env: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnReport {
    pub rows: Vec<LlnRow>,
    /// True when a risk envelope blows past 1e6: the boundedness hypothesis
    /// the weak law rests on has no empirical support.
    pub hypothesis_violated: bool,
}

const ENVELOPE_CAP: f64 = 1e6;

/// Weak-law experiment: `Y_n` is the mean of n iid draws; each schedule
/// row reports exceedance frequencies over `reps` replications plus the
/// risk envelopes of the empirical law certifying the boundedness
/// hypothesis. Both test distortions must have unbounded chord slope.
pub fn lln_experiment(
    generator: &SampleGenerator,
    n_max: usize,
    reps: usize,
    seed: u64,
    rho: &DistortionFunction,
    rho_prime: &DistortionFunction,
) -> Result<LlnReport> {
    if !rho.is_dc() || !rho_prime.is_dc() {
        return Err(Error::ExpectationDominated);
    }
    if n_max == 0 || reps == 0 {
        return Err(Error::BadParameter("lln needs n_max >= 1 and reps >= 1".into()));
    }
    let mut rows = Vec::new();
    let mut env = f64::NEG_INFINITY;
    let mut env_prime = f64::NEG_INFINITY;
    for &n in &dyadic_schedule(n_max) {
        let (hits_01, hits_005) = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng =
                    seeding::stream_indexed(seed, "conv.lln", ((n as u64) << 24) | rep as u64);
                let sum: f64 = (0..n).map(|_| generator.draw(&mut rng)).sum();
                let y = (sum / n as f64).abs();
                ((y > 0.1) as u32, (y > 0.05) as u32)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

        let mut rng = seeding::stream_indexed(seed, "conv.lln.emp", n as u64);
        let draws: Vec<f64> = (0..n).map(|_| generator.draw(&mut rng)).collect();
        let hat = DiscreteDistribution::from_samples(&draws)?;
        env = env.max(choquet(rho, &hat));
        env_prime = env_prime.max(choquet(rho_prime, &hat.negate()));

        rows.push(LlnRow {
            n,
            exceed_01: hits_01 as f64 / reps as f64,
            exceed_005: hits_005 as f64 / reps as f64,
            rho_env: env,
            rho_prime_env: env_prime,
        });
    }
    let hypothesis_violated = env > ENVELOPE_CAP || env_prime > ENVELOPE_CAP;
    Ok(LlnReport {
        rows,
        hypothesis_violated,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EsConvReport {
    pub ps: Vec<f64>,
    /// Per sequence index (1-based), `|ES_p(F_n) − ES_p(F)|` for each p.
    pub rows: Vec<(usize, Vec<f64>)>,
    /// Per level, the fraction of consecutive steps where the error did
    /// not increase.
    pub nonincreasing_share: Vec<f64>,
    pub hypothesis_violated: bool,
}

/// ES stability along a sequence of laws: per index and level, the
/// distance of `ES_p(F_n)` from `ES_p(F)`.
pub fn es_convergence_experiment(
    seq: &[DiscreteDistribution],
    target: &DiscreteDistribution,
    ps: &[f64],
) -> Result<EsConvReport> {
    if seq.is_empty() {
        return Err(Error::EmptyFamily);
    }
    for &p in ps {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::LevelOutOfRange(p));
        }
    }
    let ies = DistortionFunction::ies();
    let target_es: Vec<f64> = ps
        .iter()
        .map(|&p| crate::risk::es(target, p).expect("validated level"))
        .collect();
    let mut rows = Vec::with_capacity(seq.len());
    let mut env = f64::NEG_INFINITY;
    for (i, f) in seq.iter().enumerate() {
        env = env.max(choquet(&ies, &f.fold()));
        let errors: Vec<f64> = ps
            .iter()
            .zip(&target_es)
            .map(|(&p, &te)| (crate::risk::es(f, p).expect("validated level") - te).abs())
            .collect();
        rows.push((i + 1, errors));
    }
    let nonincreasing_share = (0..ps.len())
        .map(|j| {
            if rows.len() < 2 {
                return 1.0;
            }
            let steps = rows.windows(2).filter(|w| w[1].1[j] <= w[0].1[j] + 1e-15).count();
            steps as f64 / (rows.len() - 1) as f64
        })
        .collect();
    Ok(EsConvReport {
        ps: ps.to_vec(),
        rows,
        nonincreasing_share,
        hypothesis_violated: env > ENVELOPE_CAP,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsequenceReport {
    /// Extracted indices n_1 < n_2 < ...; the k-th link has
    /// `w1(member(n_k), member(n_{k+1})) < 2^{−k}`.
    pub indices: Vec<usize>,
    /// Last extracted member: every later link stays within the remaining
    /// geometric budget of it.
    pub limit: DiscreteDistribution,
    pub gaps: Vec<f64>,
}

/// Greedy w¹ subsequence extraction: anchor at the first member, then
/// repeatedly take the next member within 2^{−k} of the current anchor,
/// halving the allowance each time. Needs at least three extracted indices
/// to call the chain evidence of convergence.
pub fn subsequence_extract(family: &DistributionFamily) -> Result<SubsequenceReport> {
    let mut indices = vec![1usize];
    let mut anchor = family.member(1);
    let mut gaps = Vec::new();
    let mut k = 1i32;
    let mut n = 2usize;
    while n <= family.horizon() {
        let candidate = family.member(n);
        let d = w1(&candidate, &anchor);
        if d < (-k as f64).exp2() {
            indices.push(n);
            gaps.push(d);
            anchor = candidate;
            k += 1;
        }
        n += 1;
    }
    if indices.len() < 3 {
        return Err(Error::InconclusiveAtHorizon);
    }
    Ok(SubsequenceReport {
        indices,
        limit: anchor,
        gaps,
    })
}
