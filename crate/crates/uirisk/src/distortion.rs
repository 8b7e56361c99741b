//! Distortion functions: increasing `h` on `[0,1]` with `h(0)=0` and
//! `h(1)=1`. Concave members induce coherent risk measures via the Choquet
//! integral; the subclass with `h(t)/t → ∞` as `t ↓ 0` (unbounded chord
//! slope at the origin) is exactly the class whose measures are not finite
//! on all of L¹, and it is the class the uniform-integrability machinery
//! needs.
//!
//! Shipped kinds: `identity`, `es_clip(p)` (`h_p(t) = (t/(1−p)) ∧ 1`, the ES
//! distortion), `power(α)` (`t^α`, α in (0,1]), `ies` (`t(1−log t)`, the
//! integrated-ES distortion), explicit piecewise-linear knots, normalized
//! sums of ES distortions with an optional closed-form geometric tail, and
//! pointwise minima.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xreal::XReal;

/// Serializable description of a distortion function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistortionSpec {
    Identity,
    EsClip {
        p: f64,
    },
    Power {
        alpha: f64,
    },
    Ies,
    PiecewiseLinear {
        knots: Vec<[f64; 2]>,
    },
    /// `h(t) = g(t)/g(1)` with `g(t) = Σ_k coefficients[k] · h_{levels[k]}(t)`
    /// plus, when `geometric_tail = Some(c)`, the closed-form series
    /// `Σ_{m≥1} t ∧ (c·2^(−m))`. The tail keeps the chord slope at the
    /// origin unbounded without storing infinitely many terms.
    NormalizedSum {
        levels: Vec<f64>,
        coefficients: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        geometric_tail: Option<f64>,
    },
    PointwiseMin {
        left: Box<DistortionSpec>,
        right: Box<DistortionSpec>,
    },
}

/// A validated distortion function with cached analysis results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistortionSpec", into = "DistortionSpec")]
pub struct DistortionFunction {
    spec: DistortionSpec,
    concave: bool,
    h_half: f64,
    /// `lim_{t↓0} h(t)/t`, closed form per kind; `None` when `h` is not
    /// concave (the limit is then not well-defined as a monotone limit).
    slope_limit: Option<XReal>,
}

impl TryFrom<DistortionSpec> for DistortionFunction {
    type Error = Error;
    fn try_from(spec: DistortionSpec) -> Result<Self> {
        DistortionFunction::new(spec)
    }
}

impl From<DistortionFunction> for DistortionSpec {
    fn from(d: DistortionFunction) -> DistortionSpec {
        d.spec
    }
}

/// Concavity is certified by a three-point chord test on this many grid
/// intervals plus every stored knot, tolerance 1e-10. Exact for
/// piecewise-linear kinds, and all shipped smooth kinds are analytically
/// concave.
const CHECK_GRID: usize = 2048;
const CONCAVITY_TOL: f64 = 1e-10;
const MONOTONE_TOL: f64 = 1e-12;

impl DistortionFunction {
    pub fn new(spec: DistortionSpec) -> Result<Self> {
        validate_params(&spec)?;
        let grid = check_grid(&spec);
        // endpoint and monotonicity check on the refined grid
        let h0 = eval_spec(&spec, 0.0);
        let h1 = eval_spec(&spec, 1.0);
        if h0.abs() > 1e-14 || (h1 - 1.0).abs() > 1e-12 {
            return Err(Error::BadDistortion(format!("h(0)={h0}, h(1)={h1}")));
        }
        let mut prev = 0.0;
        for &t in &grid {
            let v = eval_spec(&spec, t);
            if !v.is_finite() || v < prev - MONOTONE_TOL {
                return Err(Error::BadDistortion(format!("h({t})={v} below h at previous grid point")));
            }
            prev = prev.max(v);
        }
        let concave = chord_concave(&spec, &grid);
        let h_half = eval_spec(&spec, 0.5);
        let slope_limit = if concave { slope_limit_closed_form(&spec) } else { None };
        Ok(DistortionFunction {
            spec,
            concave,
            h_half,
            slope_limit,
        })
    }

    pub fn identity() -> Self {
        Self::new(DistortionSpec::Identity).unwrap()
    }

    /// The ES distortion at level `p`: `h_p(t) = (t/(1−p)) ∧ 1`.
    pub fn es_clip(p: f64) -> Result<Self> {
        Self::new(DistortionSpec::EsClip { p })
    }

    pub fn power(alpha: f64) -> Result<Self> {
        Self::new(DistortionSpec::Power { alpha })
    }

    /// The integrated-ES distortion `t(1 − log t)`.
    pub fn ies() -> Self {
        Self::new(DistortionSpec::Ies).unwrap()
    }

    pub fn piecewise_linear(knots: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(DistortionSpec::PiecewiseLinear { knots })
    }

    pub fn normalized_sum(
        levels: Vec<f64>,
        coefficients: Vec<f64>,
        geometric_tail: Option<f64>,
    ) -> Result<Self> {
        Self::new(DistortionSpec::NormalizedSum {
            levels,
            coefficients,
            geometric_tail,
        })
    }

    pub fn pointwise_min(left: DistortionFunction, right: DistortionFunction) -> Result<Self> {
        Self::new(DistortionSpec::PointwiseMin {
            left: Box::new(left.spec),
            right: Box::new(right.spec),
        })
    }

    pub fn spec(&self) -> &DistortionSpec {
        &self.spec
    }

    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&t), "distortion argument {t}");
        eval_spec(&self.spec, t)
    }

    pub fn is_concave(&self) -> bool {
        self.concave
    }

    pub fn h_half(&self) -> f64 {
        self.h_half
    }

    /// `lim_{t↓0} h(t)/t`, the chord slope at the origin. For concave `h`
    /// the chord slope is monotone in `t` so the limit exists (possibly +∞).
    pub fn slope_limit(&self) -> Result<XReal> {
        self.slope_limit.ok_or(Error::NonConcave)
    }

    /// Concave with unbounded chord slope at the origin: the class whose
    /// risk measures are not expectation-dominated.
    pub fn is_dc(&self) -> bool {
        matches!(self.slope_limit, Some(XReal::PosInf))
    }
}

fn validate_params(spec: &DistortionSpec) -> Result<()> {
    match spec {
        DistortionSpec::Identity | DistortionSpec::Ies => Ok(()),
        DistortionSpec::EsClip { p } => {
            if !(0.0..1.0).contains(p) {
                return Err(Error::BadParameter(format!("es_clip level {p}")));
            }
            Ok(())
        }
        DistortionSpec::Power { alpha } => {
            if !(*alpha > 0.0 && *alpha <= 1.0) {
                return Err(Error::BadParameter(format!("power exponent {alpha}")));
            }
            Ok(())
        }
        DistortionSpec::PiecewiseLinear { knots } => {
            if knots.len() < 2 {
                return Err(Error::BadParameter("piecewise_linear needs >= 2 knots".into()));
            }
            if knots[0] != [0.0, 0.0] || *knots.last().unwrap() != [1.0, 1.0] {
                return Err(Error::BadParameter(
                    "piecewise_linear knots must run from [0,0] to [1,1]".into(),
                ));
            }
            for w in knots.windows(2) {
                if !(w[1][0] > w[0][0]) || w[1][1] < w[0][1] {
                    return Err(Error::BadParameter(
                        "piecewise_linear knots must increase in t and not decrease in value".into(),
                    ));
                }
            }
            Ok(())
        }
        DistortionSpec::NormalizedSum {
            levels,
            coefficients,
            geometric_tail,
        } => {
            if levels.len() != coefficients.len() {
                return Err(Error::LengthMismatch(levels.len(), coefficients.len()));
            }
            if levels.is_empty() && geometric_tail.is_none() {
                return Err(Error::BadParameter("normalized_sum needs at least one term".into()));
            }
            for &p in levels {
                if !(0.0..1.0).contains(&p) {
                    return Err(Error::BadParameter(format!("normalized_sum level {p}")));
                }
            }
            for &c in coefficients {
                if !(c > 0.0) || !c.is_finite() {
                    return Err(Error::BadParameter(format!("normalized_sum coefficient {c}")));
                }
            }
            if let Some(c) = geometric_tail {
                if !(*c > 0.0 && *c <= 1.0) {
                    return Err(Error::BadParameter(format!("geometric tail start {c}")));
                }
            }
            Ok(())
        }
        DistortionSpec::PointwiseMin { left, right } => {
            validate_params(left)?;
            validate_params(right)
        }
    }
}

fn eval_spec(spec: &DistortionSpec, t: f64) -> f64 {
    match spec {
        DistortionSpec::Identity => t,
        DistortionSpec::EsClip { p } => (t / (1.0 - p)).min(1.0),
        DistortionSpec::Power { alpha } => t.powf(*alpha),
        DistortionSpec::Ies => {
            if t == 0.0 {
                0.0
            } else {
                t * (1.0 - t.ln())
            }
        }
        DistortionSpec::PiecewiseLinear { knots } => {
            let i = knots.partition_point(|k| k[0] < t);
            if i == 0 {
                return knots[0][1];
            }
            if i >= knots.len() {
                return knots.last().unwrap()[1];
            }
            let [t0, v0] = knots[i - 1];
            let [t1, v1] = knots[i];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
        DistortionSpec::NormalizedSum { .. } => {
            let g1 = raw_sum(spec, 1.0);
            if t == 1.0 {
                1.0
            } else {
                raw_sum(spec, t) / g1
            }
        }
        DistortionSpec::PointwiseMin { left, right } => {
            eval_spec(left, t).min(eval_spec(right, t))
        }
    }
}

/// Unnormalized `g(t)` of a `NormalizedSum` spec.
fn raw_sum(spec: &DistortionSpec, t: f64) -> f64 {
    let DistortionSpec::NormalizedSum {
        levels,
        coefficients,
        geometric_tail,
    } = spec
    else {
        unreachable!("raw_sum on non-sum spec")
    };
    let mut g = 0.0;
    for (&p, &c) in levels.iter().zip(coefficients) {
        g += c * (t / (1.0 - p)).min(1.0);
    }
    if let Some(c) = geometric_tail {
        // Σ_{m>=1} t ∧ (c 2^-m): the first j = ⌊log2(c/t)⌋ terms contribute
        // t each, the rest sum to c·2^-j exactly. The log2 difference stays
        // finite even when t is subnormal and c/t would overflow.
        if t > 0.0 {
            let j = (c.log2() - t.log2()).floor().max(0.0);
            g += j * t + c * (-j).exp2();
        }
    }
    g
}

fn check_grid(spec: &DistortionSpec) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=CHECK_GRID).map(|i| i as f64 / CHECK_GRID as f64).collect();
    collect_knots(spec, &mut grid);
    grid.retain(|t| (0.0..=1.0).contains(t));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn collect_knots(spec: &DistortionSpec, out: &mut Vec<f64>) {
    match spec {
        DistortionSpec::EsClip { p } => out.push(1.0 - p),
        DistortionSpec::PiecewiseLinear { knots } => out.extend(knots.iter().map(|k| k[0])),
        DistortionSpec::NormalizedSum {
            levels,
            geometric_tail,
            ..
        } => {
            out.extend(levels.iter().map(|p| 1.0 - p));
            if let Some(c) = geometric_tail {
                // kinks at c·2^-m; below grid resolution they stop mattering
                let mut lvl = *c;
                for _ in 0..24 {
                    lvl *= 0.5;
                    out.push(lvl);
                }
            }
        }
        DistortionSpec::PointwiseMin { left, right } => {
            collect_knots(left, out);
            collect_knots(right, out);
        }
        _ => {}
    }
}

fn chord_concave(spec: &DistortionSpec, grid: &[f64]) -> bool {
    // three-point test: the middle value must not dip below the chord of
    // its neighbours. Interval midpoints alone would miss convex kinks
    // sitting exactly on grid points, where both flanking intervals are
    // internally linear.
    grid.windows(3).all(|w| {
        let (a, m, b) = (w[0], w[1], w[2]);
        let chord = eval_spec(spec, a)
            + (eval_spec(spec, b) - eval_spec(spec, a)) * (m - a) / (b - a);
        eval_spec(spec, m) >= chord - CONCAVITY_TOL
    })
}

fn slope_limit_closed_form(spec: &DistortionSpec) -> Option<XReal> {
    match spec {
        DistortionSpec::Identity => Some(XReal::Finite(1.0)),
        DistortionSpec::EsClip { p } => Some(XReal::Finite(1.0 / (1.0 - p))),
        DistortionSpec::Power { alpha } => {
            if *alpha < 1.0 {
                Some(XReal::PosInf)
            } else {
                Some(XReal::Finite(1.0))
            }
        }
        DistortionSpec::Ies => Some(XReal::PosInf),
        DistortionSpec::PiecewiseLinear { knots } => {
            let [t1, v1] = knots[1];
            Some(XReal::Finite(v1 / t1))
        }
        DistortionSpec::NormalizedSum {
            levels,
            coefficients,
            geometric_tail,
        } => {
            if geometric_tail.is_some() {
                // near 0 the tail alone contributes ⌊log2(c/t)⌋·t, so g(t)/t
                // grows without bound
                Some(XReal::PosInf)
            } else {
                let g1 = raw_sum(spec, 1.0);
                let s: f64 = levels
                    .iter()
                    .zip(coefficients)
                    .map(|(&p, &c)| c / (1.0 - p))
                    .sum();
                Some(XReal::Finite(s / g1))
            }
        }
        DistortionSpec::PointwiseMin { left, right } => {
            let l = slope_limit_closed_form(left)?;
            let r = slope_limit_closed_form(right)?;
            Some(if l.total_cmp(&r).is_le() { l } else { r })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_evaluate() {
        let id = DistortionFunction::identity();
        assert_eq!(id.eval(0.3), 0.3);

        let es = DistortionFunction::es_clip(0.75).unwrap();
        assert_eq!(es.eval(0.125), 0.5);
        assert_eq!(es.eval(0.25), 1.0);
        assert_eq!(es.eval(0.9), 1.0);

        let pw = DistortionFunction::power(0.5).unwrap();
        assert_eq!(pw.eval(0.25), 0.5);

        let ies = DistortionFunction::ies();
        assert_eq!(ies.eval(0.0), 0.0);
        assert_eq!(ies.eval(1.0), 1.0);
        let t: f64 = 0.5;
        assert!((ies.eval(0.5) - t * (1.0 - t.ln())).abs() < 1e-15);
    }

    #[test]
    fn cached_flags() {
        for h in [
            DistortionFunction::identity(),
            DistortionFunction::es_clip(0.6).unwrap(),
            DistortionFunction::power(0.5).unwrap(),
            DistortionFunction::ies(),
        ] {
            assert!(h.is_concave(), "{:?}", h.spec());
        }
    }

    #[test]
    fn slope_limits() {
        let lim = |h: &DistortionFunction| h.slope_limit().unwrap();
        assert_eq!(lim(&DistortionFunction::identity()), XReal::Finite(1.0));
        assert_eq!(
            lim(&DistortionFunction::es_clip(0.75).unwrap()),
            XReal::Finite(4.0)
        );
        assert_eq!(
            lim(&DistortionFunction::es_clip(0.9).unwrap()),
            XReal::Finite(1.0 / (1.0 - 0.9))
        );
        assert_eq!(lim(&DistortionFunction::power(0.5).unwrap()), XReal::PosInf);
        assert_eq!(lim(&DistortionFunction::ies()), XReal::PosInf);

        let min = DistortionFunction::pointwise_min(
            DistortionFunction::ies(),
            DistortionFunction::power(0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(lim(&min), XReal::PosInf);
        assert!(min.is_dc());
        assert!(!DistortionFunction::es_clip(0.75).unwrap().is_dc());
    }

    #[test]
    fn piecewise_linear_concavity_detection() {
        let concave = DistortionFunction::piecewise_linear(vec![
            [0.0, 0.0],
            [0.25, 0.5],
            [1.0, 1.0],
        ])
        .unwrap();
        assert!(concave.is_concave());
        assert_eq!(concave.slope_limit().unwrap(), XReal::Finite(2.0));

        let convex = DistortionFunction::piecewise_linear(vec![
            [0.0, 0.0],
            [0.75, 0.25],
            [1.0, 1.0],
        ])
        .unwrap();
        assert!(!convex.is_concave());
        assert!(matches!(convex.slope_limit(), Err(Error::NonConcave)));
    }

    #[test]
    fn normalized_sum_with_tail() {
        // levels 1 - 2^-(n+1) for n = 1..20, coefficients 2^-(n+1), plus the
        // continuation tail starting at 2^-21: g(1) = 1/2 exactly
        let levels: Vec<f64> = (1..=20).map(|n| 1.0 - (-(n as f64) - 1.0).exp2()).collect();
        let coeffs: Vec<f64> = (1..=20).map(|n| (-(n as f64) - 1.0).exp2()).collect();
        let h =
            DistortionFunction::normalized_sum(levels, coeffs, Some((-21.0f64).exp2())).unwrap();
        assert!(h.is_concave());
        assert!(h.is_dc());
        assert!((h.h_half() - 1.0).abs() < 1e-14);
        assert_eq!(h.eval(1.0), 1.0);
        // raw g(1) = 1/2 exactly, so h(t) = 2 g(t)
        assert!((h.eval(0.25) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn json_specs_round_trip() {
        let h: DistortionFunction = serde_json::from_str("{\"kind\":\"es_clip\",\"p\":0.75}").unwrap();
        assert_eq!(h.eval(0.125), 0.5);

        let nested: DistortionFunction = serde_json::from_str(
            "{\"kind\":\"pointwise_min\",\"left\":{\"kind\":\"ies\"},\"right\":{\"kind\":\"power\",\"alpha\":0.5}}",
        )
        .unwrap();
        assert!(nested.is_dc());

        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, "{\"kind\":\"es_clip\",\"p\":0.75}");

        assert!(serde_json::from_str::<DistortionFunction>("{\"kind\":\"es_clip\",\"p\":1.5}").is_err());
    }

    #[test]
    fn rejects_malformed() {
        assert!(DistortionFunction::power(1.5).is_err());
        assert!(DistortionFunction::es_clip(1.0).is_err());
        assert!(DistortionFunction::piecewise_linear(vec![[0.0, 0.0], [0.5, 0.9]]).is_err());
    }
}
