//! Uniform-integrability diagnostics for families of laws.
//!
//! Three independent routes to a verdict, which agree whenever conclusive:
//!
//! * the tail functional `(1−p)·ES_p(|X|)`: its sup over the family tends
//!   to 0 as p ↑ 1 exactly on UI families;
//! * boundedness of `ρ_h(|X|)` over the family for a test distortion with
//!   unbounded chord slope at the origin (a finite-slope test distortion is
//!   useless: its measure is dominated by a multiple of the mean, hence
//!   bounded on any family with bounded means);
//! * the classical criterion `sup E[φ(|X|)] < ∞` for a user-supplied
//!   superlinear convex φ.
//!
//! A UI verdict from the first route is certified constructively: a
//! normalized sum of ES distortions built from the family's own tail decay
//! whose risk envelope is provably at most `1/g(1)`.
//!
//! Finite horizons cannot decide a limit, so the verdict rules are
//! explicitly thresholded extrapolations; everything else is reported as
//! inconclusive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDistribution;
use crate::distortion::DistortionFunction;
use crate::error::{Error, Result};
use crate::family::DistributionFamily;
use crate::risk::{choquet, es};
use crate::xreal::XReal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "UI")]
    Ui,
    #[serde(rename = "not-UI")]
    NotUi,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct UIReport {
    pub label: String,
    pub p_grid: Vec<f64>,
    /// Per level, `sup_X (1−p)·ES_p(|X|)`.
    pub env_abs: Vec<f64>,
    pub env_plus: Vec<f64>,
    pub env_minus: Vec<f64>,
    pub verdict: Verdict,
    /// Constructed certificate distortion, present exactly on UI verdicts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionFunction>,
    /// Certified value of `sup_X ρ_h(|X|)` for the constructed distortion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

/// Levels `1 − 2^{−k}` for k = 1..=k_max.
pub fn dyadic_grid(k_max: u32) -> Vec<f64> {
    (1..=k_max).map(|k| 1.0 - (-(k as f64)).exp2()).collect()
}

pub const DEFAULT_GRID_DEPTH: u32 = 20;

/// Tail envelopes of a family on a level grid, with the verdict rule:
/// UI when the last three envelope values are non-increasing and the finest
/// is below `1e−3·(coarsest + 1)` and the certificate construction
/// succeeds; not-UI when the envelope never drops below that threshold;
/// inconclusive otherwise.
pub fn tail_envelope(family: &DistributionFamily, p_grid: &[f64]) -> Result<UIReport> {
    validate_grid(p_grid)?;
    let zeros = vec![0.0f64; p_grid.len()];
    let (env_abs, env_plus, env_minus) = (1..=family.horizon())
        .into_par_iter()
        .map(|n| {
            let x = family.member(n);
            let folded = x.fold();
            let negated = x.negate();
            let mut abs = Vec::with_capacity(p_grid.len());
            let mut plus = Vec::with_capacity(p_grid.len());
            let mut minus = Vec::with_capacity(p_grid.len());
            for &p in p_grid {
                let w = 1.0 - p;
                abs.push(w * es(&folded, p).expect("validated level"));
                plus.push(w * es(&x, p).expect("validated level"));
                minus.push(w * es(&negated, p).expect("validated level"));
            }
            (abs, plus, minus)
        })
        .reduce(
            || (zeros.clone(), zeros.clone(), zeros.clone()),
            |mut a, b| {
                for i in 0..a.0.len() {
                    a.0[i] = a.0[i].max(b.0[i]);
                    a.1[i] = a.1[i].max(b.1[i]);
                    a.2[i] = a.2[i].max(b.2[i]);
                }
                a
            },
        );

    // consistency across the signed and folded envelopes: one-sided tails
    // are dominated by the folded tail, and the folded tail by three times
    // the larger one-sided tail (score bound of ES at levels >= 1/2)
    for (i, &p) in p_grid.iter().enumerate() {
        if p < 0.5 {
            continue;
        }
        let pm = env_plus[i].max(env_minus[i]);
        assert!(
            pm <= env_abs[i] + 1e-9 && env_abs[i] <= 3.0 * pm + 1e-9,
            "envelope consistency failed at p={p}: abs={}, one-sided={pm}",
            env_abs[i]
        );
    }

    let mut verdict = grid_verdict(&env_abs);
    let mut distortion = None;
    let mut bound = None;
    if verdict == Verdict::Ui {
        match dvp_distortion(family, &DvpRule::default()) {
            Ok(dvp) => {
                bound = Some(dvp.bound);
                distortion = Some(dvp.distortion);
            }
            Err(Error::FamilyFailsUiPremise) => verdict = Verdict::Inconclusive,
            Err(e) => return Err(e),
        }
    }
    Ok(UIReport {
        label: family.label().to_string(),
        p_grid: p_grid.to_vec(),
        env_abs,
        env_plus,
        env_minus,
        verdict,
        distortion,
        bound,
    })
}

fn validate_grid(p_grid: &[f64]) -> Result<()> {
    if p_grid.is_empty() {
        return Err(Error::BadParameter("empty level grid".into()));
    }
    for &p in p_grid {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::LevelOutOfRange(p));
        }
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadParameter("level grid must increase strictly".into()));
    }
    Ok(())
}

fn grid_verdict(env: &[f64]) -> Verdict {
    let k = env.len();
    let threshold = 1e-3 * (env[0] + 1.0);
    if k >= 3 && env[k - 3] >= env[k - 2] && env[k - 2] >= env[k - 1] && env[k - 1] < threshold {
        return Verdict::Ui;
    }
    let min = env.iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= threshold {
        return Verdict::NotUi;
    }
    Verdict::Inconclusive
}

#[derive(Debug, Clone, Copy)]
pub struct DvpRule {
    /// Number of explicit terms in the constructed sum.
    pub n_terms: usize,
    /// Deepest dyadic exponent probed when hunting qualifying levels.
    pub k_max: u32,
}

impl Default for DvpRule {
    fn default() -> Self {
        DvpRule {
            n_terms: 20,
            k_max: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DvpResult {
    pub distortion: DistortionFunction,
    /// Chosen levels p_n with `sup_X (1−p_n)·ES_{p_n}(|X|) < 2^{−n}`.
    pub levels: Vec<f64>,
    /// Normalizer g(1) of the unnormalized sum.
    pub g1: f64,
    /// Certified bound `1/g(1) ≥ sup_X ρ_h(|X|)`.
    pub bound: f64,
    /// The actual envelope over the family horizon, for comparison.
    pub family_sup: f64,
}

/// Builds a certificate distortion from the family's own tail decay: levels
/// `p_n = 1 − 2^{−k(n)}` with envelope below `2^{−n}`, summed as
/// `g(t) = Σ 2^{−k(n)}·h_{p_n}(t)`, plus a geometric continuation chosen so
/// the whole tail contributes less than `2^{−n_terms}` to any `ρ_g(|X|)`
/// on the horizon. Then `h = g/g(1)` is concave, has unbounded chord slope
/// at the origin, and satisfies `sup_X ρ_h(|X|) < 1/g(1)`.
pub fn dvp_distortion(family: &DistributionFamily, rule: &DvpRule) -> Result<DvpResult> {
    if rule.n_terms == 0 {
        return Err(Error::BadParameter("dvp needs at least one term".into()));
    }
    let envelope_at = |k: u32| -> f64 {
        let w = (-(k as f64)).exp2();
        (1..=family.horizon())
            .into_par_iter()
            .map(|n| family.member(n).fold().upper_tail_integral(w))
            .reduce(|| 0.0, f64::max)
    };

    // 1 − 2^{−k} stops being a distinct double past k = 53, so deeper
    // levels cannot be written down even when the budget allows them
    let k_cap = rule.k_max.min(53);
    let mut ks: Vec<u32> = Vec::with_capacity(rule.n_terms);
    for n in 1..=rule.n_terms {
        let start = ks.last().map_or(n as u32 + 1, |&k| (n as u32 + 1).max(k + 1));
        let found = (start..=k_cap).find(|&k| envelope_at(k) < (-(n as f64)).exp2());
        match found {
            Some(k) => ks.push(k),
            None => return Err(Error::FamilyFailsUiPremise),
        }
    }

    // geometric continuation small enough that its entire contribution to
    // any horizon member stays below the last explicit term's budget
    let max_abs = (1..=family.horizon())
        .into_par_iter()
        .map(|n| family.member(n).max_abs_atom())
        .reduce(|| 0.0, f64::max);
    let last_k = *ks.last().unwrap();
    let mut tail_k = last_k;
    while (-(tail_k as f64)).exp2() * max_abs >= (-(rule.n_terms as f64)).exp2() {
        tail_k += 1;
        if tail_k > 1060 {
            return Err(Error::FamilyFailsUiPremise);
        }
    }
    let tail_c = (-(tail_k as f64)).exp2();

    let levels: Vec<f64> = ks.iter().map(|&k| 1.0 - (-(k as f64)).exp2()).collect();
    let coeffs: Vec<f64> = ks.iter().map(|&k| (-(k as f64)).exp2()).collect();
    let g1 = coeffs.iter().sum::<f64>() + tail_c;
    let distortion = DistortionFunction::normalized_sum(levels.clone(), coeffs, Some(tail_c))?;
    debug_assert!(distortion.is_dc());

    let family_sup = (1..=family.horizon())
        .into_par_iter()
        .map(|n| choquet(&distortion, &family.member(n).fold()))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(DvpResult {
        bound: 1.0 / g1,
        distortion,
        levels,
        g1,
        family_sup,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionEnvelopeReport {
    pub label: String,
    pub checkpoints: Vec<usize>,
    /// Running sup of `ρ_h(|X_n|)` at each checkpoint.
    pub sups: Vec<f64>,
    pub verdict: Verdict,
}

/// UI test through a single distortion with unbounded chord slope: monitors
/// the running envelope `sup_{n≤N} ρ_h(|X_n|)` at dyadic checkpoints.
/// Divergence (past 1e6, or strict growth at every checkpoint) means
/// not-UI; an envelope flat over the final doubling means UI.
pub fn ui_from_distortion(
    family: &DistributionFamily,
    h: &DistortionFunction,
) -> Result<DistortionEnvelopeReport> {
    if !h.is_dc() {
        return Err(Error::ExpectationDominated);
    }
    let (checkpoints, sups) =
        checkpoint_sups(family.horizon(), |n| choquet(h, &family.member(n).fold()));
    let verdict = envelope_verdict(&sups);
    Ok(DistortionEnvelopeReport {
        label: family.label().to_string(),
        checkpoints,
        sups,
        verdict,
    })
}

/// Classical criterion: is `sup_X E[φ(|X|)]` bounded over the horizon?
/// φ must be convex increasing with `φ(x)/x → ∞`; that is the caller's
/// responsibility. Returns false exactly when the running sup diverges in
/// the checkpoint sense.
pub fn dvp_phi_check(family: &DistributionFamily, phi: impl Fn(f64) -> f64 + Sync) -> bool {
    let (_, sups) = checkpoint_sups(family.horizon(), |n| {
        let x = family.member(n);
        x.atoms()
            .iter()
            .zip(x.weights())
            .map(|(&a, &w)| w * phi(a.abs()))
            .sum()
    });
    !diverging(&sups)
}

fn checkpoint_sups(horizon: usize, value: impl Fn(usize) -> f64) -> (Vec<usize>, Vec<f64>) {
    let mut checkpoints = Vec::new();
    let mut n = 1usize;
    while n < horizon {
        checkpoints.push(n);
        n *= 2;
    }
    checkpoints.push(horizon);
    let mut sups = Vec::with_capacity(checkpoints.len());
    let mut sup = f64::NEG_INFINITY;
    let mut next = 0usize;
    for n in 1..=horizon {
        sup = sup.max(value(n));
        if n == checkpoints[next] {
            sups.push(sup);
            next += 1;
        }
    }
    (checkpoints, sups)
}

const DIVERGENCE_CAP: f64 = 1e6;

fn diverging(sups: &[f64]) -> bool {
    if sups.last().is_some_and(|&s| s > DIVERGENCE_CAP) {
        return true;
    }
    sups.len() >= 3 && sups.windows(2).all(|w| w[1] > w[0] + 1e-12)
}

fn envelope_verdict(sups: &[f64]) -> Verdict {
    if diverging(sups) {
        return Verdict::NotUi;
    }
    let k = sups.len();
    if k < 2 || (sups[k - 1] - sups[k - 2]).abs() <= 1e-12 {
        return Verdict::Ui;
    }
    Verdict::Inconclusive
}

#[derive(Debug, Clone, PartialEq)]
pub enum FinitenessClass {
    /// `ρ_h ≤ c·E` on nonnegative positions; the measure is finite
    /// everywhere integrability holds.
    ExpectationDominated { c: f64 },
    /// No such constant; an explicit witness law can push `ρ_h` past any
    /// requested threshold at mean ≤ 1.
    NotFiniteOnL1,
}

pub fn classify_finiteness(h: &DistortionFunction) -> Result<FinitenessClass> {
    match h.slope_limit()? {
        XReal::Finite(c) => Ok(FinitenessClass::ExpectationDominated { c }),
        XReal::PosInf => Ok(FinitenessClass::NotFiniteOnL1),
        XReal::NegInf => unreachable!("chord slopes of increasing h are nonnegative"),
    }
}

/// Law with `ρ_h > threshold` and mean ≤ 1, for `h` with unbounded chord
/// slope. A scale t carries the two-point law `{0, c_t}` with
/// `c_t = (t·h(t))^{−1/2}` at mass t, whose ρ-value is `(h(t)/t)^{1/2}`;
/// scales with value ≥ 2^n are stacked comonotonically with weights 2^{−n}
/// so each term contributes at least 1. When double precision runs out of
/// deep scales before the stack reaches the threshold, the single deepest
/// representable scale is tried; past that the witness is unreachable.
pub fn unbounded_witness(h: &DistortionFunction, threshold: f64) -> Result<DiscreteDistribution> {
    if !h.is_dc() {
        return Err(Error::ExpectationDominated);
    }
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::BadParameter(format!("witness threshold {threshold}")));
    }

    const MAX_EXP: u32 = 1070;
    const LOG_ATOM_CAP: f64 = 709.0;
    let scale = |j: u32| -> Option<(f64, f64, f64)> {
        let t = (-(j as f64)).exp2();
        let ht = h.eval(t);
        if !(t > 0.0) || !(ht > 0.0) {
            return None;
        }
        let log_c = -0.5 * (t.ln() + ht.ln());
        if log_c > LOG_ATOM_CAP {
            return None;
        }
        let rho = (0.5 * (ht.ln() - t.ln())).exp();
        Some((t, log_c.exp(), rho))
    };

    // comonotone stack
    let mut terms: Vec<(f64, f64)> = Vec::new(); // (t_n, c_n)
    let mut rho_total = 0.0;
    let mut j = 1u32;
    'stack: for n in 1..=60u32 {
        let target = (n as f64).exp2();
        loop {
            if j > MAX_EXP {
                break 'stack;
            }
            match scale(j) {
                Some((t, c, rho)) if rho >= target => {
                    terms.push((t, c));
                    rho_total += (-(n as f64)).exp2() * rho;
                    j += 1;
                    break;
                }
                Some(_) => j += 1,
                // deeper scales only shrink further or overflow harder
                None => break 'stack,
            }
        }
        if rho_total > threshold {
            return Ok(comonotone_stack_law(&terms));
        }
    }

    // deepest single representable scale
    let mut best: Option<(f64, f64, f64)> = None;
    for j in 1..=MAX_EXP {
        if let Some((t, c, rho)) = scale(j) {
            if best.as_ref().is_none_or(|b| rho > b.2) {
                best = Some((t, c, rho));
            }
        }
    }
    match best {
        Some((t, c, rho)) if rho > threshold => {
            DiscreteDistribution::from_pairs(&[(0.0, 1.0 - t), (c, t)])
        }
        _ => Err(Error::WitnessUnreachable),
    }
}

/// Law of `Σ 2^{−n}·c_n·1{U < t_n}` for strictly decreasing scales t_n:
/// the indicators are nested, so on `[t_{j+1}, t_j)` the sum is the j-th
/// partial sum of the weighted atoms.
fn comonotone_stack_law(terms: &[(f64, f64)]) -> DiscreteDistribution {
    let mut atoms = vec![0.0];
    let mut weights = vec![1.0 - terms[0].0];
    let mut value = 0.0;
    for (n, &(t, c)) in terms.iter().enumerate() {
        value += (-(n as f64) - 1.0).exp2() * c;
        let t_next = terms.get(n + 1).map_or(0.0, |&(t2, _)| t2);
        atoms.push(value);
        weights.push(t - t_next);
    }
    DiscreteDistribution::new(atoms, weights).expect("stacked witness law is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::ies_direct;

    #[test]
    fn n_bernoulli_envelope_is_one() {
        let fam = DistributionFamily::n_bernoulli(100).unwrap();
        let grid = dyadic_grid(6); // 2^k <= horizon keeps the sup saturated
        let report = tail_envelope(&fam, &grid).unwrap();
        for (i, &e) in report.env_abs.iter().enumerate() {
            assert!((e - 1.0).abs() < 1e-12, "level {}: {e}", grid[i]);
        }
        assert_eq!(report.verdict, Verdict::NotUi);
        assert!(report.distortion.is_none());
    }

    #[test]
    fn single_law_is_ui_with_certificate() {
        let fam = DistributionFamily::single(
            "fair bit",
            DiscreteDistribution::bernoulli(0.5).unwrap(),
        );
        let report = tail_envelope(&fam, &dyadic_grid(DEFAULT_GRID_DEPTH)).unwrap();
        assert_eq!(report.verdict, Verdict::Ui);
        let h = report.distortion.expect("certificate attached");
        assert!(h.is_concave() && h.is_dc());
        // frozen construction: k(n) = n+1, tail at 2^-21, g(1) = 1/2
        assert_eq!(report.bound, Some(2.0));
        assert!((h.h_half() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bounded_family_is_ui() {
        let members: Vec<DiscreteDistribution> = (1..=50)
            .map(|n| {
                let x = 3.0 * (n as f64 / 50.0);
                DiscreteDistribution::uniform(&[-x, 0.0, x]).unwrap()
            })
            .collect();
        let fam = DistributionFamily::explicit("bounded by 3", members).unwrap();
        let report = tail_envelope(&fam, &dyadic_grid(DEFAULT_GRID_DEPTH)).unwrap();
        assert_eq!(report.verdict, Verdict::Ui);
        let dvp = dvp_distortion(&fam, &DvpRule::default()).unwrap();
        assert!(dvp.family_sup <= dvp.bound);
    }

    #[test]
    fn dvp_succeeds_on_truncated_stress_family() {
        // every finite-horizon family is uniformly integrable, so the
        // construction must still find levels here, just deep ones
        let fam = DistributionFamily::n_bernoulli(200).unwrap();
        let dvp = dvp_distortion(&fam, &DvpRule::default()).unwrap();
        assert!(dvp.family_sup <= dvp.bound + 1e-12);
        assert!(dvp.distortion.is_dc());
    }

    #[test]
    fn dvp_gives_up_when_envelope_decays_too_slowly() {
        // one atom so tall that the abs tail stays above 1 past every
        // level the rule can inspect: 2^60 carrying mass 2^-40 leaves
        // tail integral 2^(60-k) >= 2^7 through k = 53
        let fam = DistributionFamily::single(
            "tall spike",
            DiscreteDistribution::from_pairs(&[
                (0.0, 1.0 - (-40.0f64).exp2()),
                ((2.0f64).powi(60), (-40.0f64).exp2()),
            ])
            .unwrap(),
        );
        assert!(matches!(
            dvp_distortion(&fam, &DvpRule::default()),
            Err(Error::FamilyFailsUiPremise)
        ));
    }

    #[test]
    fn ies_envelope_grows_like_log() {
        let fam = DistributionFamily::n_bernoulli(1000).unwrap();
        for n in [10usize, 100, 1000] {
            let v = choquet(&DistortionFunction::ies(), &fam.member(n).fold());
            assert!(
                (v - (1.0 + (n as f64).ln())).abs() < 1e-9,
                "n={n}: {v}"
            );
        }
        let report = ui_from_distortion(&fam, &DistortionFunction::ies()).unwrap();
        assert_eq!(report.verdict, Verdict::NotUi);
    }

    #[test]
    fn ui_from_distortion_on_single_law() {
        let fam = DistributionFamily::single(
            "fair bit",
            DiscreteDistribution::bernoulli(0.5).unwrap(),
        );
        let report = ui_from_distortion(&fam, &DistortionFunction::ies()).unwrap();
        assert_eq!(report.verdict, Verdict::Ui);

        let finite_slope = DistortionFunction::es_clip(0.9).unwrap();
        assert!(matches!(
            ui_from_distortion(&fam, &finite_slope),
            Err(Error::ExpectationDominated)
        ));
    }

    #[test]
    fn phi_check_examples() {
        let bounded = DistributionFamily::explicit(
            "bounded",
            (1..=64)
                .map(|n| DiscreteDistribution::uniform(&[0.0, 1.0 + 1.0 / n as f64]).unwrap())
                .collect(),
        )
        .unwrap();
        assert!(dvp_phi_check(&bounded, |x| x * x));

        let nbern = DistributionFamily::n_bernoulli(500).unwrap();
        assert!(!dvp_phi_check(&nbern, |x| x * x));

        let single = DistributionFamily::single(
            "fair bit",
            DiscreteDistribution::bernoulli(0.5).unwrap(),
        );
        assert!(dvp_phi_check(&single, |x| x * (1.0 + x).ln()));
    }

    #[test]
    fn classify_by_slope() {
        match classify_finiteness(&DistortionFunction::es_clip(0.9).unwrap()).unwrap() {
            FinitenessClass::ExpectationDominated { c } => assert!((c - 10.0).abs() < 1e-12),
            other => panic!("expected domination, got {other:?}"),
        }
        assert_eq!(
            classify_finiteness(&DistortionFunction::power(0.5).unwrap()).unwrap(),
            FinitenessClass::NotFiniteOnL1
        );
    }

    #[test]
    fn witness_for_power_half() {
        let h = DistortionFunction::power(0.5).unwrap();
        let w = unbounded_witness(&h, 10.0).unwrap();
        assert!(choquet(&h, &w) > 10.0);
        assert!(w.mean() <= 1.0 + 1e-12);
    }

    #[test]
    fn witness_for_ies_goes_deep() {
        let h = DistortionFunction::ies();
        let w = unbounded_witness(&h, 20.0).unwrap();
        let v = ies_direct(&w);
        assert!(v > 20.0, "got {v}");
        assert!(w.mean() <= 1.0 + 1e-12);
        // far beyond the deepest representable scale
        assert!(matches!(
            unbounded_witness(&h, 100.0),
            Err(Error::WitnessUnreachable)
        ));
    }

    #[test]
    fn witness_refuses_dominated_distortion() {
        let h = DistortionFunction::es_clip(0.75).unwrap();
        assert!(matches!(
            unbounded_witness(&h, 5.0),
            Err(Error::ExpectationDominated)
        ));
    }
}
