//! Closed-form error exponents for all schemes, the optimal-parameter
//! formulas, and the crossover search between the two feedback schemes.
//!
//! Exponents are reported in nats per channel use, normalized as
//! -(1/n) ln P_e.

use crate::numerics::{bracket_and_bisect, ROOT_TOL};
use crate::{fmt_g17, Error, Result};

/// Largest feedback noise variance covered by the two-stage parametric
/// family (the s = 1 endpoint).
pub const TWO_STAGE_ALPHA_MAX: f64 = 0.25;

/// Which curve an exponent value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeCurve {
    NoFeedback,
    NoiselessFeedback,
    TwoStage,
    Linear,
    LinearWeakBound,
}

impl SchemeCurve {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeCurve::NoFeedback => "no_feedback",
            SchemeCurve::NoiselessFeedback => "noiseless_feedback",
            SchemeCurve::TwoStage => "two_stage",
            SchemeCurve::Linear => "linear",
            SchemeCurve::LinearWeakBound => "linear_weak_bound",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "no_feedback" => SchemeCurve::NoFeedback,
            "noiseless_feedback" => SchemeCurve::NoiselessFeedback,
            "two_stage" => SchemeCurve::TwoStage,
            "linear" => SchemeCurve::Linear,
            "linear_weak_bound" => SchemeCurve::LinearWeakBound,
            _ => return None,
        })
    }
}

/// One evaluated exponent, with the scheme parameters that achieve it.
#[derive(Debug, Clone, Copy)]
pub struct ExponentPoint {
    pub scheme: SchemeCurve,
    pub alpha: f64,
    pub exponent: f64,
    pub s: Option<f64>,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
}

/// Nonfeedback simplex exponent, M P / (4 (M - 1)).
pub fn exponent_no_feedback(m: usize, p: f64) -> f64 {
    assert!(m >= 2);
    m as f64 * p / (4.0 * (m as f64 - 1.0))
}

/// Noise-free feedback exponent, P / 2 for every M.
pub fn exponent_noiseless_feedback(_m: usize, p: f64) -> f64 {
    p / 2.0
}

/// Operating point of the two-stage scheme at margin parameter `s`.
#[derive(Debug, Clone, Copy)]
pub struct TwoStageOperating {
    /// Feedback noise variance matched to this margin.
    pub alpha: f64,
    /// Optimal stage-1 energy fraction.
    pub lambda: f64,
    /// Achieved exponent phi(s).
    pub exponent: f64,
}

/// Two-stage exponent family parametrized by s in [0, 1]:
/// alpha*(s), lambda*(s), and phi(s).
pub fn two_stage_parametric(m: usize, p: f64, s: f64) -> Result<TwoStageOperating> {
    if m < 3 {
        return Err(Error::invalid("M", format!("{m} < 3")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid("s", format!("{s} outside [0, 1]")));
    }
    let mf = m as f64;
    let quad = s * s - 2.0 * s + 4.0;
    let alpha = 3.0 * s * s / (4.0 * quad);
    let lambda = 1.0 / (mf / (6.0 * (mf - 1.0)) * quad + (mf - 2.0) / (2.0 * (mf - 1.0)));
    let exponent = 0.5 * p * (1.0 - 3.0 * (mf - 2.0) / (mf * quad + 3.0 * (mf - 2.0)));
    Ok(TwoStageOperating {
        alpha,
        lambda,
        exponent,
    })
}

/// The three exponent terms whose minimum bounds the two-stage scheme:
/// stage-1 decision, feedback miscoordination, and stage-2 decision.
pub fn two_stage_min_terms(m: usize, p: f64, s: f64, lambda: f64, alpha: f64) -> [f64; 3] {
    let mf = m as f64;
    let quad = s * s - 2.0 * s + 4.0;
    [
        lambda * mf * p / (12.0 * (mf - 1.0)) * quad,
        s * s * lambda * mf * p / (16.0 * (mf - 1.0) * alpha),
        0.5 * p * (1.0 - (mf - 2.0) * lambda / (2.0 * (mf - 1.0))),
    ]
}

/// Two-stage exponent at a given feedback noise variance, obtained by
/// inverting the monotone map alpha*(s) with bisection.
pub fn two_stage_exponent_at_alpha(m: usize, p: f64, alpha: f64) -> Result<ExponentPoint> {
    if !(0.0..=TWO_STAGE_ALPHA_MAX).contains(&alpha) {
        return Err(Error::invalid(
            "alpha",
            format!("{alpha} outside [0, 1/4], the parametric family's range"),
        ));
    }
    let s = if alpha == 0.0 {
        0.0
    } else if alpha == TWO_STAGE_ALPHA_MAX {
        1.0
    } else {
        let f = |s: f64| 3.0 * s * s / (4.0 * (s * s - 2.0 * s + 4.0)) - alpha;
        bracket_and_bisect(f, 0.0, 1.0, ROOT_TOL)?.root
    };
    let op = two_stage_parametric(m, p, s)?;
    Ok(ExponentPoint {
        scheme: SchemeCurve::TwoStage,
        alpha,
        exponent: op.exponent,
        s: Some(s),
        lambda: Some(op.lambda),
        delta: None,
    })
}

/// Linear-scheme exponent (the stronger expression):
/// (P/2) / (1 + alpha + 4 L^2 alpha + 4 L sqrt(alpha (1 + alpha))).
pub fn linear_exponent(m: usize, p: f64, alpha: f64) -> ExponentPoint {
    assert!(m >= 2 && alpha >= 0.0);
    let l = (m / 2) as f64;
    let denom = 1.0 + alpha + 4.0 * l * l * alpha + 4.0 * l * (alpha * (1.0 + alpha)).sqrt();
    let (s_lambda, s_delta) = if alpha > 0.0 {
        let (delta, lambda) = optimal_linear_params(m, alpha).expect("alpha > 0");
        (Some(lambda), Some(delta))
    } else {
        (None, None)
    };
    ExponentPoint {
        scheme: SchemeCurve::Linear,
        alpha,
        exponent: 0.5 * p / denom,
        s: None,
        lambda: s_lambda,
        delta: s_delta,
    }
}

/// Weaker linear-scheme bound, (P/2) / (sqrt(alpha) M + sqrt(1 + alpha))^2.
/// Coincides with [`linear_exponent`] exactly when M is even.
pub fn linear_weak_bound(m: usize, p: f64, alpha: f64) -> f64 {
    assert!(m >= 2 && alpha >= 0.0);
    let root = alpha.sqrt() * m as f64 + (1.0 + alpha).sqrt();
    0.5 * p / (root * root)
}

/// Optimal amplification and energy split for the linear scheme:
/// delta(alpha) = (1 + sqrt(4 L^2 alpha / (1 + alpha)))^(1/2) - 1 and
/// lambda(alpha) = (1 + sqrt((1 + alpha) / (4 L^2 alpha)))^(-1).
pub fn optimal_linear_params(m: usize, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(
            "alpha",
            "must be positive; use the noise-free schedule for alpha = 0",
        ));
    }
    let l = (m / 2) as f64;
    let ratio = 4.0 * l * l * alpha / (1.0 + alpha);
    let delta = (1.0 + ratio.sqrt()).sqrt() - 1.0;
    let lambda = 1.0 / (1.0 + ratio.sqrt().recip());
    Ok((delta, lambda))
}

/// The two exponent terms whose minimum bounds the linear scheme:
/// estimation noise and budget exhaustion.
pub fn linear_min_terms(m: usize, p: f64, lambda: f64, delta: f64, alpha: f64) -> [f64; 2] {
    let l = (m / 2) as f64;
    let g = (1.0 + delta) * (1.0 + delta);
    [
        lambda * p / (8.0 * l * l * alpha) * (g - 1.0) / g,
        (1.0 - lambda) * p / (2.0 * g * (1.0 + alpha)),
    ]
}

/// Crossover search result.
#[derive(Debug, Clone, Copy)]
pub struct Crossover {
    pub alpha: f64,
    /// Common exponent value where the curves meet.
    pub exponent: f64,
}

/// Finds the feedback noise variance where the linear and two-stage curves
/// cross (linear better below, two-stage better above). `use_weak_bound`
/// selects the weaker of the two linear expressions.
pub fn crossover_alpha(m: usize, p: f64, use_weak_bound: bool) -> Result<Crossover> {
    if m < 3 {
        return Err(Error::invalid("M", format!("{m} < 3")));
    }
    let lin = |alpha: f64| {
        if use_weak_bound {
            linear_weak_bound(m, p, alpha)
        } else {
            linear_exponent(m, p, alpha).exponent
        }
    };
    let gap = |alpha: f64| {
        lin(alpha)
            - two_stage_exponent_at_alpha(m, p, alpha)
                .expect("alpha within range")
                .exponent
    };
    let lo = 1e-12;
    let hi = TWO_STAGE_ALPHA_MAX;
    if gap(lo) <= 0.0 || gap(hi) >= 0.0 {
        return Err(Error::NoCrossover);
    }
    let root = bracket_and_bisect(gap, lo, hi, ROOT_TOL)?;
    Ok(Crossover {
        alpha: root.root,
        exponent: lin(root.root),
    })
}

/// One row of a comparison table.
#[derive(Debug, Clone, Copy)]
pub struct CurveRow {
    pub scheme: SchemeCurve,
    pub alpha: f64,
    pub exponent: f64,
    pub s: Option<f64>,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
}

/// Exponent-vs-alpha table for all five curves.
#[derive(Debug, Clone)]
pub struct CurveTable {
    pub m: usize,
    pub p: f64,
    pub rows: Vec<CurveRow>,
}

pub const CURVE_CSV_HEADER: &str = "scheme,M,P,alpha,exponent,s,lambda,delta";

/// Evaluates all schemes over a strictly increasing alpha grid. Grid points
/// outside a scheme's domain are omitted rather than reported as errors.
pub fn emit_curves(m: usize, p: f64, alpha_grid: &[f64]) -> Result<CurveTable> {
    if alpha_grid.is_empty() {
        return Err(Error::invalid("alpha_grid", "empty grid"));
    }
    for pair in alpha_grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::invalid(
                "alpha_grid",
                "grid must be strictly increasing",
            ));
        }
    }
    if alpha_grid[0] < 0.0 {
        return Err(Error::invalid("alpha_grid", "alpha must be >= 0"));
    }
    let mut rows = Vec::new();
    for &alpha in alpha_grid {
        rows.push(CurveRow {
            scheme: SchemeCurve::NoFeedback,
            alpha,
            exponent: exponent_no_feedback(m, p),
            s: None,
            lambda: None,
            delta: None,
        });
        rows.push(CurveRow {
            scheme: SchemeCurve::NoiselessFeedback,
            alpha,
            exponent: exponent_noiseless_feedback(m, p),
            s: None,
            lambda: None,
            delta: None,
        });
        if m >= 3 && alpha <= TWO_STAGE_ALPHA_MAX {
            let pt = two_stage_exponent_at_alpha(m, p, alpha)?;
            rows.push(CurveRow {
                scheme: SchemeCurve::TwoStage,
                alpha,
                exponent: pt.exponent,
                s: pt.s,
                lambda: pt.lambda,
                delta: None,
            });
        }
        let lin = linear_exponent(m, p, alpha);
        rows.push(CurveRow {
            scheme: SchemeCurve::Linear,
            alpha,
            exponent: lin.exponent,
            s: None,
            lambda: lin.lambda,
            delta: lin.delta,
        });
        rows.push(CurveRow {
            scheme: SchemeCurve::LinearWeakBound,
            alpha,
            exponent: linear_weak_bound(m, p, alpha),
            s: None,
            lambda: None,
            delta: None,
        });
    }
    Ok(CurveTable { m, p, rows })
}

impl CurveTable {
    /// Serializes to CSV with 17 significant digits; absent params empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(fmt_g17).unwrap_or_default();
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.scheme.as_str(),
                self.m,
                fmt_g17(self.p),
                fmt_g17(row.alpha),
                fmt_g17(row.exponent),
                opt(row.s),
                opt(row.lambda),
                opt(row.delta),
            ));
        }
        out
    }

    /// Parses a table back from its CSV serialization.
    pub fn from_csv(text: &str) -> Result<CurveTable> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CURVE_CSV_HEADER => {}
            other => return Err(Error::Csv(format!("bad header: {other:?}"))),
        }
        let mut m = 0usize;
        let mut p = 0.0f64;
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(Error::Csv(format!("expected 8 fields: {line}")));
            }
            let scheme = SchemeCurve::from_name(fields[0])
                .ok_or_else(|| Error::Csv(format!("unknown scheme {}", fields[0])))?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Csv(format!("bad float {s}: {e}")))
            };
            let parse_opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    parse(s).map(Some)
                }
            };
            m = fields[1]
                .parse()
                .map_err(|e| Error::Csv(format!("bad M: {e}")))?;
            p = parse(fields[2])?;
            rows.push(CurveRow {
                scheme,
                alpha: parse(fields[3])?,
                exponent: parse(fields[4])?,
                s: parse_opt(fields[5])?,
                lambda: parse_opt(fields[6])?,
                delta: parse_opt(fields[7])?,
            });
        }
        Ok(CurveTable { m, p, rows })
    }
}
