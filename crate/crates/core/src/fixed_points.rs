//! Trivial, predator-free and positive fixed points, with Jury-test
//! classification and the closed-form stability criteria.

use nalgebra::Matrix2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{jacobian_unchecked, Coefficients, ModelParams};
use crate::roots::{bisect, sign_changes};

/// Jury quantities closer to zero than this are treated as non-hyperbolic.
pub const BOUNDARY_EPS: f64 = 1e-10;

/// Grid resolution for the closed-form window scans.
const WINDOW_GRID: usize = 1024;

/// `(1-s)/(c b0 - (1-s) γ)`, the infimum of `r` admitting a positive fixed
/// point. Absent when `c b0 <= (1-s) γ`.
///
/// The same number is the zero `x̂` of the predator nullcline `V`.
pub fn existence_threshold(k: &Coefficients) -> Option<f64> {
    let denom = k.c() * k.b0() - (1.0 - k.s()) * k.gamma();
    (denom > 0.0).then(|| (1.0 - k.s()) / denom)
}

/// `ζ⁻¹(x) = ln(c b0 x / ((1-s)(1+γx))) + x`.
pub fn zeta_inverse(k: &Coefficients, x: f64) -> f64 {
    (k.c() * k.b0() * x / ((1.0 - k.s()) * (1.0 + k.gamma() * x))).ln() + x
}

/// `ψ` written in terms of the prey coordinate: `b0 x/((1-s)(1+γx)) - 1/c`.
pub fn predator_from_prey(k: &Coefficients, x: f64) -> f64 {
    k.b0() * x / ((1.0 - k.s()) * (1.0 + k.gamma() * x)) - 1.0 / k.c()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositiveFixedPoint {
    pub x_star: f64,
    pub y_star: f64,
    /// Largest residual of the two fixed-point equations.
    pub residual: f64,
    pub bracket: (f64, f64),
}

fn check_existence(p: &ModelParams) -> Result<f64> {
    let k = p.coefficients();
    let r_min = existence_threshold(&k).ok_or(Error::NoPositiveFixedPoint {
        violated: "c*b0 > (1-s)*gamma",
    })?;
    if p.r() <= r_min {
        return Err(Error::NoPositiveFixedPoint {
            violated: "r > (1-s)/(c*b0 - (1-s)*gamma)",
        });
    }
    Ok(r_min)
}

/// Solve `ζ⁻¹(x) = r` on `(x̂, r)` by bisection, then recover `y*`.
pub fn solve_positive(p: &ModelParams, tol: f64) -> Result<PositiveFixedPoint> {
    let x_hat = check_existence(p)?;
    let k = p.coefficients();
    let r = p.r();
    let f = |x: f64| zeta_inverse(&k, x) - r;
    let mut x = bisect(f, x_hat, r, tol.min(1e-12), 200, "zeta^-1(x) - r")?;

    // One Newton polish, kept only if it stays in the bracket and helps.
    let d = 1.0 / x - k.gamma() / (1.0 + k.gamma() * x) + 1.0;
    let cand = x - f(x) / d;
    if cand > x_hat && cand < r && f(cand).abs() < f(x).abs() {
        x = cand;
    }

    let y = predator_from_prey(&k, x);
    Ok(PositiveFixedPoint {
        x_star: x,
        y_star: y,
        residual: fixed_point_residual(p, x, y),
        bracket: (x_hat, r),
    })
}

fn fixed_point_residual(p: &ModelParams, x: f64, y: f64) -> f64 {
    let cy = 1.0 + p.c() * y;
    let prey = (p.r() - x).exp() / cy - 1.0;
    let pred = p.s() + p.c() * p.b0() * x / ((1.0 + p.gamma() * x) * cy) - 1.0;
    prey.abs().max(pred.abs())
}

/// `x* = ζ(r)` for the coefficient set `k`.
pub fn zeta(k: &Coefficients, r: f64) -> Result<f64> {
    Ok(solve_positive(&k.at(r)?, 1e-14)?.x_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Stable,
    Unstable,
    FlipBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub trace: f64,
    pub det: f64,
    /// `1 + det + tr`
    pub jury_a: f64,
    /// `1 + det - tr`
    pub jury_b: f64,
    /// `1 - det`
    pub jury_c: f64,
    pub classification: Classification,
    /// Some Jury quantity lies within [`BOUNDARY_EPS`] of zero.
    pub non_hyperbolic: bool,
    /// A closed-form global attraction result applies.
    pub globally_stable: bool,
}

impl StabilityReport {
    pub fn from_jacobian(j: &Matrix2<f64>) -> Self {
        let trace = j.trace();
        let det = j.determinant();
        let jury_a = 1.0 + det + trace;
        let jury_b = 1.0 + det - trace;
        let jury_c = 1.0 - det;
        let near = |v: f64| v.abs() <= BOUNDARY_EPS;
        let non_hyperbolic = near(jury_a) || near(jury_b) || near(jury_c);
        let classification = if near(jury_a) {
            Classification::FlipBoundary
        } else if jury_a > 0.0 && jury_b > BOUNDARY_EPS && jury_c > BOUNDARY_EPS {
            Classification::Stable
        } else {
            Classification::Unstable
        };
        Self {
            trace,
            det,
            jury_a,
            jury_b,
            jury_c,
            classification,
            non_hyperbolic,
            globally_stable: false,
        }
    }
}

/// The origin: eigenvalues `e^r` and `s`; globally attracting for `r <= 0`.
pub fn classify_trivial(p: &ModelParams) -> StabilityReport {
    let mut rep = StabilityReport::from_jacobian(&jacobian_unchecked(p, 0.0, 0.0));
    rep.globally_stable = p.r() <= 0.0;
    rep
}

/// `s + c b0 r/(1+γr)`, the predator eigenvalue at `(r, 0)`.
pub fn predator_invasion_eigenvalue(p: &ModelParams) -> f64 {
    p.s() + p.c() * p.b0() * p.r() / (1.0 + p.gamma() * p.r())
}

/// The predator-free point `(r, 0)`.
pub fn classify_predator_free(p: &ModelParams) -> Result<StabilityReport> {
    if p.r() <= 0.0 {
        return Err(Error::Precondition(
            "predator-free fixed point requires r > 0",
        ));
    }
    let mut rep = StabilityReport::from_jacobian(&jacobian_unchecked(p, p.r(), 0.0));
    rep.globally_stable = p.r() <= 1.0 && predator_invasion_eigenvalue(p) < 1.0;
    Ok(rep)
}

/// Jacobian at the positive fixed point, simplified with the fixed-point
/// relations.
pub fn positive_jacobian(p: &ModelParams, fp: &PositiveFixedPoint) -> Matrix2<f64> {
    let (x, y) = (fp.x_star, fp.y_star);
    let (c, s, g) = (p.c(), p.s(), p.gamma());
    Matrix2::new(
        1.0 - x,
        -c * x / (1.0 + c * y),
        (1.0 - s) * y / (x * (1.0 + g * x)),
        s + (1.0 - s) / (1.0 + c * y),
    )
}

pub fn classify_positive(p: &ModelParams, fp: &PositiveFixedPoint) -> StabilityReport {
    let mut rep = StabilityReport::from_jacobian(&positive_jacobian(p, fp));
    rep.globally_stable = global_stability_criterion(p).unwrap_or(false);
    rep
}

/// `2 + ln(2 c b0 / ((1-s)(1+2γ)))`.
pub fn sufficient_local_threshold(k: &Coefficients) -> f64 {
    2.0 + (2.0 * k.c() * k.b0() / ((1.0 - k.s()) * (1.0 + 2.0 * k.gamma()))).ln()
}

/// Closed-form sufficient condition for local stability of `p*`.
pub fn sufficient_local_criterion(p: &ModelParams) -> Result<bool> {
    check_existence(p)?;
    Ok(p.r() <= sufficient_local_threshold(&p.coefficients()))
}

/// `γζ² + 2ζ - (1 - s + c b0 r)/(c b0 - (1-s)γ)`; positive where the
/// nullcline inequality holds.
pub fn global_inequality_margin(p: &ModelParams) -> Result<f64> {
    check_existence(p)?;
    let x = solve_positive(p, 1e-14)?.x_star;
    Ok(global_margin_at(p, x))
}

fn global_margin_at(p: &ModelParams, x: f64) -> f64 {
    let q = p.c() * p.b0() - (1.0 - p.s()) * p.gamma();
    p.gamma() * x * x + 2.0 * x - (1.0 - p.s() + p.c() * p.b0() * p.r()) / q
}

/// `r <= 1` together with the nullcline inequality.
pub fn global_stability_criterion(p: &ModelParams) -> Result<bool> {
    let margin = global_inequality_margin(p)?;
    Ok(p.r() <= 1.0 && margin > 0.0)
}

/// A half-open parameter interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn contains(&self, r: f64) -> bool {
        r > self.lo && r <= self.hi
    }
}

/// Scan `(r_min, 1]` for the topmost interval where `pred_margin(r) > 0`,
/// refining each sign change by bisection.
fn top_window<F>(k: &Coefficients, margin: F) -> Option<Window>
where
    F: Fn(f64) -> f64,
{
    let r_min = existence_threshold(k)?;
    if r_min >= 1.0 {
        return None;
    }
    let lo = r_min + 1e-9 * (1.0 + r_min);
    if margin(1.0) <= 0.0 {
        return None;
    }
    let changes = sign_changes(&margin, lo, 1.0, WINDOW_GRID);
    let start = match changes.last() {
        None => r_min,
        Some(&(a, b)) => bisect(&margin, a, b, 1e-14, 200, "window boundary").ok()?,
    };
    Some(Window { lo: start, hi: 1.0 })
}

/// Where on `(r_min, 1]` the global-stability inequality holds.
pub fn global_stability_window(k: &Coefficients) -> Option<Window> {
    top_window(k, |r| {
        k.at(r)
            .ok()
            .and_then(|p| global_inequality_margin(&p).ok())
            .unwrap_or(f64::NAN)
    })
}

/// Left-hand side of the corollary's explicit bound on `r`.
pub fn corollary_bound(k: &Coefficients, r: f64) -> f64 {
    let (b0, g, c, s) = (k.b0(), k.gamma(), k.c(), k.s());
    let q = c * b0 - (1.0 - s) * g;
    let log_term = ((1.0 - (q / (c * b0 * (1.0 + g * r))).sqrt()) * c * b0 / (g * (1.0 - s))).ln();
    let root_term = ((g * (1.0 - s + c * b0 * r) / q + 1.0).sqrt() - 1.0) / g;
    log_term + root_term
}

/// The sub-interval of `(r_min, 1]` where the corollary's explicit
/// sufficient condition `bound(r) < r` holds.
pub fn corollary_sufficient_window(k: &Coefficients) -> Option<Window> {
    existence_threshold(k)?;
    top_window(k, |r| r - corollary_bound(k, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(r: f64) -> ModelParams {
        Coefficients::example().at(r).unwrap()
    }

    #[test]
    fn existence_threshold_cases() {
        assert_eq!(existence_threshold(&Coefficients::example()), Some(0.9 / 2.25));
        assert!((existence_threshold(&Coefficients::example()).unwrap() - 0.4).abs() < 1e-15);
        // c b0 = 0.5 = (1-s) γ
        let k = Coefficients::new(1.0, 1.0, 0.5, 0.5).unwrap();
        assert_eq!(existence_threshold(&k), None);
    }

    #[test]
    fn solve_positive_example() {
        let fp = solve_positive(&ex(1.0), 1e-12).unwrap();
        assert!((fp.x_star - 0.6930).abs() < 1e-3);
        assert!((fp.y_star - 0.3991).abs() < 1e-3);
        assert!(fp.residual <= 1e-12);
        let k = Coefficients::example();
        assert!((zeta_inverse(&k, fp.x_star) - 1.0).abs() <= 1e-12);
        let st = crate::model::step(&ex(1.0), crate::model::State::new(fp.x_star, fp.y_star).unwrap()).unwrap();
        assert!((st.x - fp.x_star).abs() < 1e-10 && (st.y - fp.y_star).abs() < 1e-10);
    }

    #[test]
    fn solve_positive_errors() {
        let at_threshold = ex(0.4);
        assert!(matches!(
            solve_positive(&at_threshold, 1e-12),
            Err(Error::NoPositiveFixedPoint { .. })
        ));
        let p = ModelParams::new(1.0, 1.0, 1.0, 0.5, 0.5).unwrap();
        match solve_positive(&p, 1e-12) {
            Err(Error::NoPositiveFixedPoint { violated }) => assert!(violated.contains("gamma")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trivial_classification() {
        let p = ex(-0.5);
        let rep = classify_trivial(&p);
        assert_eq!(rep.classification, Classification::Stable);
        assert!(rep.globally_stable);
        assert_eq!(classify_trivial(&ex(0.5)).classification, Classification::Unstable);
        let rep0 = classify_trivial(&ex(0.0));
        assert!(rep0.non_hyperbolic);
        assert_ne!(rep0.classification, Classification::Stable);
    }

    #[test]
    fn predator_free_classification() {
        let rep = classify_predator_free(&ex(0.3)).unwrap();
        assert!((predator_invasion_eigenvalue(&ex(0.3)) - (0.1 + 1.08 / 1.45)).abs() < 1e-15);
        assert_eq!(rep.classification, Classification::Stable);
        assert!(rep.globally_stable);

        let tiny = ModelParams::new(2.5, 0.01, 1.0, 0.1, 0.1).unwrap();
        assert_eq!(
            classify_predator_free(&tiny).unwrap().classification,
            Classification::Unstable
        );
        let rep = classify_predator_free(&ex(1.0)).unwrap();
        assert!((predator_invasion_eigenvalue(&ex(1.0)) - 1.54).abs() < 1e-14);
        assert_eq!(rep.classification, Classification::Unstable);
        assert!(!rep.globally_stable);
        assert!(classify_predator_free(&ex(0.0)).is_err());
    }

    #[test]
    fn positive_classification() {
        let p1 = ex(1.0);
        let fp = solve_positive(&p1, 1e-12).unwrap();
        let rep = classify_positive(&p1, &fp);
        assert_eq!(rep.classification, Classification::Stable);
        assert!(rep.globally_stable);

        let p3 = ex(3.0);
        let fp = solve_positive(&p3, 1e-12).unwrap();
        let rep = classify_positive(&p3, &fp);
        assert_eq!(rep.classification, Classification::Unstable);
        assert!(rep.jury_a < 0.0 && rep.jury_b > 0.0 && rep.jury_c > 0.0);
    }

    #[test]
    fn jury_closed_forms() {
        let p = ex(2.0);
        let fp = solve_positive(&p, 1e-12).unwrap();
        let rep = classify_positive(&p, &fp);
        let (x, y, c, s, g) = (fp.x_star, fp.y_star, 0.9, 0.1, 1.5);
        let b = (1.0 - s) * c * y / (1.0 + c * y) * (x + 1.0 / (1.0 + g * x));
        // 1 - det carries a factor 1/(1+cy) on the (1-s) term
        let cc = s * x + (1.0 - s) / (1.0 + c * y) * (x + c * g * x * y / (1.0 + g * x));
        let a = (2.0 - x) * (1.0 + s + (1.0 - s) / (1.0 + c * y))
            + (1.0 - s) * c * y / ((1.0 + g * x) * (1.0 + c * y));
        assert!((rep.jury_b - b).abs() < 1e-12);
        assert!((rep.jury_c - cc).abs() < 1e-12);
        assert!((rep.jury_a - a).abs() < 1e-12);
    }

    #[test]
    fn positive_jacobian_matches_generic_jacobian() {
        let p = ex(2.3);
        let fp = solve_positive(&p, 1e-12).unwrap();
        let a = positive_jacobian(&p, &fp);
        let b = jacobian_unchecked(&p, fp.x_star, fp.y_star);
        assert!((a - b).abs().max() < 1e-12);
    }

    #[test]
    fn sufficient_local_threshold_example() {
        let th = sufficient_local_threshold(&Coefficients::example());
        assert!((th - (2.0 + 2f64.ln())).abs() < 1e-14);
        assert!((th - 2.6931).abs() < 1e-4);
        assert!(sufficient_local_criterion(&ex(2.5)).unwrap());
        assert!(!sufficient_local_criterion(&ex(2.7)).unwrap());
        assert!(sufficient_local_criterion(&ex(2.0)).unwrap());
    }

    #[test]
    fn global_criterion_cases() {
        assert!(global_stability_criterion(&ex(1.0)).unwrap());
        assert!(global_stability_criterion(&ex(0.9)).unwrap());
        assert!(!global_stability_criterion(&ex(1.2)).unwrap());
        assert!(!global_stability_criterion(&ex(0.5)).unwrap());
        assert!(global_stability_criterion(&ex(0.3)).is_err());
    }

    #[test]
    fn global_window_lower_end() {
        let w = global_stability_window(&Coefficients::example()).unwrap();
        assert!((w.lo - 0.8184).abs() < 1e-3, "{w:?}");
        assert_eq!(w.hi, 1.0);
    }

    #[test]
    fn explicit_window_inside_inequality_window() {
        let k = Coefficients::example();
        let cw = corollary_sufficient_window(&k).unwrap();
        assert!(cw.lo >= 0.8184 - 1e-3, "{cw:?}");
        for i in 0..100 {
            let r = 0.4 + 0.6 * (i as f64 + 1.0) / 100.0;
            if cw.contains(r) && r > cw.lo + 1e-9 {
                assert!(global_stability_criterion(&k.at(r).unwrap()).unwrap(), "r = {r}");
            }
        }
        // r_min >= 1: b0 small enough that (1-s)/(c b0 - (1-s)γ) > 1
        let k = Coefficients::new(1.2, 1.0, 0.9, 0.1).unwrap();
        assert!(existence_threshold(&k).unwrap() >= 1.0);
        assert_eq!(corollary_sufficient_window(&k), None);
    }
}
