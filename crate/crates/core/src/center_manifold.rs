//! Flip bifurcation of the positive fixed point.
//!
//! With `x̃ = x - ζ(r)`, `ỹ = y - ψ(r)` and `μ = r - r*` the map becomes
//! `G̃(x̃, μ, ỹ)`. The change of variables `(x̃, μ, ỹ) = T (u, μ, v)` with
//!
//! ```text
//!     | η1 0 η2 |            | -η3 0   η4  |
//! T = | 0  1 0  |    T⁻¹ =   |  0  1   0   |
//!     | 1  0 1  |            |  η3 0  1-η4 |
//! ```
//!
//! diagonalises the linear part to `diag(-1, 1, -det J)`. On the center
//! manifold `v = a1 u² + a2 uμ + …` the `u` equation reduces to
//! `u ↦ -u + d1 uμ + d2 u² + d3 u³ + …`, whose normal form is governed by
//! `σ1 = 2 d1` and `σ2 = 2 d2² + 2 d3`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix2, Matrix3};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fixed_points::{existence_threshold, positive_jacobian, solve_positive};
use crate::model::{Coefficients, ModelParams, State};
use crate::orbit::{detect_period, DEFAULT_PERIOD_CAP, DEFAULT_RECURRENCE_TOL, DEFAULT_START};
use crate::roots::{bisect, sign_changes};

/// Required `|1 + tr J + det J|` at the returned `r*`.
pub const FLIP_FTOL: f64 = 1e-10;

/// Exponent triple `(l, m, n)` for `x̃^l μ^m ỹ^n` (or `u^l μ^m v^n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Index3(pub u8, pub u8, pub u8);

impl fmt::Display for Index3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.0, self.1, self.2)
    }
}

impl Serialize for Index3 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn flip_precondition(k: &Coefficients) -> Result<f64> {
    let r_min = existence_threshold(k).ok_or(Error::NoPositiveFixedPoint {
        violated: "c*b0 > (1-s)*gamma",
    })?;
    if k.c() * k.b0() <= (1.0 - k.s()) * (k.gamma() + 0.5) {
        return Err(Error::Precondition("flip requires c*b0 > (1-s)*(gamma + 1/2)"));
    }
    Ok(r_min)
}

/// `1 + tr J + det J` at the positive fixed point; zero at a flip.
pub fn flip_function(k: &Coefficients, r: f64) -> Result<f64> {
    let p = k.at(r)?;
    let fp = solve_positive(&p, 1e-14)?;
    let j = positive_jacobian(&p, &fp);
    Ok(1.0 + j.trace() + j.determinant())
}

fn flip_function_or_nan(k: &Coefficients, r: f64) -> f64 {
    flip_function(k, r).unwrap_or(f64::NAN)
}

fn det_at(k: &Coefficients, r: f64) -> Result<f64> {
    let p = k.at(r)?;
    Ok(positive_jacobian(&p, &solve_positive(&p, 1e-14)?).determinant())
}

/// Default search interval `[r_min + 1e-6, r_min + 50]`.
pub fn default_flip_bracket(k: &Coefficients) -> Result<(f64, f64)> {
    let r_min = flip_precondition(k)?;
    Ok((r_min + 1e-6, r_min + 50.0))
}

/// `(r*, det J(r*))` for the flip of the positive fixed point in `bracket`.
pub fn find_flip_r(k: &Coefficients, bracket: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let (lo, hi) = match bracket {
        Some(b) => {
            flip_precondition(k)?;
            b
        }
        None => default_flip_bracket(k)?,
    };
    let r = bisect(|r| flip_function_or_nan(k, r), lo, hi, 0.0, 400, "1 + tr J + det J")?;
    if flip_function(k, r)?.abs() > FLIP_FTOL {
        return Err(Error::Bracket {
            what: "1 + tr J + det J (tolerance not reached)",
            lo,
            hi,
        });
    }
    Ok((r, det_at(k, r)?))
}

/// Every flip parameter in `[lo, hi]`, located on an `n`-cell grid.
pub fn flip_roots_in(k: &Coefficients, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    flip_precondition(k)?;
    sign_changes(|r| flip_function_or_nan(k, r), lo, hi, n)
        .into_iter()
        .map(|(a, b)| find_flip_r(k, Some((a, b))).map(|(r, _)| r))
        .collect()
}

/// `(ζ'(r), ψ'(r))` at the positive fixed point `(x, y)` by implicit
/// differentiation.
pub fn zeta_psi_derivatives(k: &Coefficients, x: f64) -> (f64, f64) {
    let gx = 1.0 + k.gamma() * x;
    let dz = 1.0 / (1.0 / x - k.gamma() / gx + 1.0);
    let dpsi = k.b0() * dz / ((1.0 - k.s()) * gx * gx);
    (dz, dpsi)
}

/// Taylor coefficients `i_lmn` of `G̃1` and `j_lmn` of `G̃2` at the flip,
/// including the `1/(l! m! n!)` factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialsTable {
    pub i: BTreeMap<Index3, f64>,
    pub j: BTreeMap<Index3, f64>,
}

impl PartialsTable {
    pub fn i(&self, l: u8, m: u8, n: u8) -> Option<f64> {
        self.i.get(&Index3(l, m, n)).copied()
    }
    pub fn j(&self, l: u8, m: u8, n: u8) -> Option<f64> {
        self.j.get(&Index3(l, m, n)).copied()
    }
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

fn pow_i(x: f64, n: u8) -> f64 {
    x.powi(n as i32)
}

fn sign(n: u8) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Raw partial derivatives `∂^l_x ∂^n_y G1` and `∂^l_x ∂^n_y G2` at `(x, y)`.
///
/// `G1 = f(x) g(y)` with `f = x e^{r-x}`, `g = 1/(1+cy)`; `G2 = s y + B(x) h(y)`
/// with `B = b0 x/(1+γx)`, `h = cy/(1+cy)`.
fn raw_partials(p: &ModelParams, x: f64, y: f64, l: u8, n: u8) -> (f64, f64) {
    let (c, g, b0, s) = (p.c(), p.gamma(), p.b0(), p.s());
    let cy = 1.0 + c * y;
    let gx = 1.0 + g * x;
    let e = (p.r() - x).exp();

    let f_l = sign(l) * (x - l as f64) * e;
    let g_n = pow_i(-c, n) * factorial(n) / pow_i(cy, n + 1);
    let b_l = if l == 0 {
        b0 * x / gx
    } else {
        b0 * sign(l + 1) * factorial(l) * pow_i(g, l - 1) / pow_i(gx, l + 1)
    };
    let h_n = if n == 0 {
        c * y / cy
    } else {
        -pow_i(-c, n) * factorial(n) / pow_i(cy, n + 1)
    };
    let lin = match (l, n) {
        (0, 0) => s * y,
        (0, 1) => s,
        _ => 0.0,
    };
    (f_l * g_n, b_l * h_n + lin)
}

/// Analytic Taylor table of `G̃` at the flip `r_star`: all `(l, 0, n)` with
/// `l + n <= 3` and `(l, 1, n)` with `l + n <= 1`.
pub fn gtilde_partials(k: &Coefficients, r_star: f64) -> Result<PartialsTable> {
    let p = k.at(r_star)?;
    let fp = solve_positive(&p, 1e-14)?;
    let (x, y) = (fp.x_star, fp.y_star);
    let (dz, dpsi) = zeta_psi_derivatives(k, x);
    let d = |l: u8, n: u8| raw_partials(&p, x, y, l, n);

    let mut i = BTreeMap::new();
    let mut j = BTreeMap::new();
    for total in 0..=3u8 {
        for l in (0..=total).rev() {
            let n = total - l;
            let (d1, d2) = d(l, n);
            let scale = factorial(l) * factorial(n);
            let (v1, v2) = if total == 0 { (d1 - x, d2 - y) } else { (d1 / scale, d2 / scale) };
            i.insert(Index3(l, 0, n), v1);
            j.insert(Index3(l, 0, n), v2);
        }
    }
    // μ enters through the explicit r in e^{r-x} and through the moving
    // fixed point: ∂_μ G̃(x̃,μ,ỹ) = ∂_r G + ∂_x G ζ' + ∂_y G ψ' - (ζ', ψ').
    let (gx, hx) = d(1, 0);
    let (gy, hy) = d(0, 1);
    let (gxx, hxx) = d(2, 0);
    let (gxy, hxy) = d(1, 1);
    let (gyy, hyy) = d(0, 2);
    let g1 = x; // G1 = x at the fixed point, and ∂_r G1 = G1
    i.insert(Index3(0, 1, 0), g1 + gx * dz + gy * dpsi - dz);
    j.insert(Index3(0, 1, 0), hx * dz + hy * dpsi - dpsi);
    i.insert(Index3(1, 1, 0), gx + gxx * dz + gxy * dpsi);
    i.insert(Index3(0, 1, 1), gy + gxy * dz + gyy * dpsi);
    j.insert(Index3(1, 1, 0), hxx * dz + hxy * dpsi);
    j.insert(Index3(0, 1, 1), hxy * dz + hyy * dpsi);
    Ok(PartialsTable { i, j })
}

/// `(η1, η2, η3, η4)` at the fixed point `(x, y)` of the flip.
pub fn eta_at(k: &Coefficients, x: f64, y: f64) -> Result<[f64; 4]> {
    let e1 = k.c() * x / ((2.0 - x) * (1.0 + k.c() * y));
    let e2 = x * (1.0 + k.gamma() * x) * (2.0 - x) / ((1.0 - k.s()) * y);
    let diff = e2 - e1;
    if !(e1.is_finite() && e2.is_finite()) || diff == 0.0 || !diff.is_finite() {
        return Err(Error::DegenerateTransform);
    }
    Ok([e1, e2, 1.0 / diff, e2 / diff])
}

pub fn transform_matrices(eta: &[f64; 4]) -> (Matrix3<f64>, Matrix3<f64>) {
    let [e1, e2, e3, e4] = *eta;
    let t = Matrix3::new(e1, 0.0, e2, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0);
    let t_inv = Matrix3::new(-e3, 0.0, e4, 0.0, 1.0, 0.0, e3, 0.0, 1.0 - e4);
    (t, t_inv)
}

/// Linear part of `G̃` in `(x̃, μ, ỹ)` built from the table.
pub fn extended_linear_part(tab: &PartialsTable) -> Matrix3<f64> {
    let v = |o: Option<f64>| o.unwrap_or(0.0);
    Matrix3::new(
        v(tab.i(1, 0, 0)),
        v(tab.i(0, 1, 0)),
        v(tab.i(0, 0, 1)),
        0.0,
        1.0,
        0.0,
        v(tab.j(1, 0, 0)),
        v(tab.j(0, 1, 0)),
        v(tab.j(0, 0, 1)),
    )
}

fn binom(n: u8, k: u8) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Coefficient of `u^p v^q` in `(η1 u + η2 v)^l (u + v)^n`.
fn substitution_weight(e1: f64, e2: f64, l: u8, n: u8, p: u8) -> f64 {
    (0..=l.min(p))
        .filter(|&a| p - a <= n)
        .map(|a| binom(l, a) * pow_i(e1, a) * pow_i(e2, l - a) * binom(n, p - a))
        .sum()
}

/// Coefficients of `u^p μ^m v^q` in `G̃1` and `G̃2` after substituting
/// `x̃ = η1 u + η2 v`, `ỹ = u + v`. `None` when the table lacks a needed entry.
fn substituted(tab: &PartialsTable, eta: &[f64; 4], idx: Index3) -> Option<(f64, f64)> {
    let Index3(p, m, q) = idx;
    let total = p + q;
    let (mut c1, mut c2) = (0.0, 0.0);
    for l in 0..=total {
        let n = total - l;
        let w = substitution_weight(eta[0], eta[1], l, n, p);
        c1 += w * tab.i(l, m, n)?;
        c2 += w * tab.j(l, m, n)?;
    }
    Some((c1, c2))
}

/// `(α_pmq, β_pmq)`: the `u^p μ^m v^q` coefficients of the `u` and `v`
/// equations in the diagonalised coordinates.
pub fn transformed_coefficient(tab: &PartialsTable, eta: &[f64; 4], idx: Index3) -> Option<(f64, f64)> {
    let (c1, c2) = substituted(tab, eta, idx)?;
    let [_, _, e3, e4] = *eta;
    Some((-e3 * c1 + e4 * c2, e3 * c1 + (1.0 - e4) * c2))
}

/// Indices reported in [`FlipReport`].
pub const REPORTED_INDICES: [Index3; 9] = [
    Index3(2, 0, 0),
    Index3(1, 1, 0),
    Index3(1, 0, 1),
    Index3(0, 1, 1),
    Index3(0, 0, 2),
    Index3(3, 0, 0),
    Index3(2, 0, 1),
    Index3(1, 0, 2),
    Index3(0, 0, 3),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipClass {
    /// Stable 2-cycle for `r > r*`.
    SupercriticalRight,
    /// Stable 2-cycle for `r < r*`.
    SupercriticalLeft,
    /// Unstable 2-cycle for `r > r*`.
    SubcriticalRight,
    /// Unstable 2-cycle for `r < r*`.
    SubcriticalLeft,
}

impl FlipClass {
    pub fn from_signs(sigma1: f64, sigma2: f64) -> Result<Self> {
        if sigma1 == 0.0 || sigma2 == 0.0 || !sigma1.is_finite() || !sigma2.is_finite() {
            return Err(Error::Precondition("degenerate flip: sigma1 or sigma2 vanishes"));
        }
        Ok(match (sigma1 < 0.0, sigma2 > 0.0) {
            (true, true) => Self::SupercriticalRight,
            (false, true) => Self::SupercriticalLeft,
            (false, false) => Self::SubcriticalRight,
            (true, false) => Self::SubcriticalLeft,
        })
    }

    pub fn supercritical(self) -> bool {
        matches!(self, Self::SupercriticalRight | Self::SupercriticalLeft)
    }

    pub fn cycle_to_the_right(self) -> bool {
        matches!(self, Self::SupercriticalRight | Self::SubcriticalRight)
    }
}

/// Alternative `σ2` expressions kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sigma2Variants {
    /// `H_uu²/2 + H_uuu/3 = 2 d2² + 2 d3`; the adopted value.
    pub normal_form: f64,
    /// `d2²/2 + d3/3`, Taylor coefficients used as if they were derivatives.
    pub taylor_form: f64,
    /// `d2²/2 + (α300 - α101 β200/(1+det J))/3`.
    pub minus_a1_grouping: f64,
    /// `d2²/2 + ((α300 - α101 β200)/(1+det J))/3`.
    pub shared_denominator_grouping: f64,
    /// `α200²/2 + α300/3`, ignoring the curvature of the center manifold.
    pub flat_manifold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipReport {
    pub r_star: f64,
    pub det_j: f64,
    pub x_star: f64,
    pub y_star: f64,
    pub eta: [f64; 4],
    pub alphas: BTreeMap<Index3, f64>,
    pub betas: BTreeMap<Index3, f64>,
    pub d: [f64; 3],
    pub a1: f64,
    pub a2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma2_variants: Sigma2Variants,
    pub classification: FlipClass,
}

impl FlipReport {
    pub fn alpha(&self, p: u8, m: u8, q: u8) -> f64 {
        self.alphas[&Index3(p, m, q)]
    }
    pub fn beta(&self, p: u8, m: u8, q: u8) -> f64 {
        self.betas[&Index3(p, m, q)]
    }
}

/// Full normal-form analysis at a flip parameter `r_star`.
pub fn flip_coefficients(k: &Coefficients, r_star: f64) -> Result<FlipReport> {
    let p = k.at(r_star)?;
    let fp = solve_positive(&p, 1e-14)?;
    let det_j = positive_jacobian(&p, &fp).determinant();
    let eta = eta_at(k, fp.x_star, fp.y_star)?;
    let tab = gtilde_partials(k, r_star)?;

    let mut alphas = BTreeMap::new();
    let mut betas = BTreeMap::new();
    for idx in REPORTED_INDICES {
        let (a, b) = transformed_coefficient(&tab, &eta, idx).expect("reported indices are covered by the table");
        alphas.insert(idx, a);
        betas.insert(idx, b);
    }
    let al = |p, m, q| alphas[&Index3(p, m, q)];
    let be = |p, m, q| betas[&Index3(p, m, q)];

    // The stable eigenvalue is -det J, so v = a1 u² + a2 uμ solves
    // a1 = -det·a1 + β200 and -a2 = -det·a2 + β110.
    let a1 = be(2, 0, 0) / (1.0 + det_j);
    let a2 = -be(1, 1, 0) / (1.0 - det_j);
    let d1 = al(1, 1, 0);
    let d2 = al(2, 0, 0);
    let d3 = al(3, 0, 0) + al(1, 0, 1) * a1;
    let sigma1 = 2.0 * d1;
    let sigma2 = 2.0 * d2 * d2 + 2.0 * d3;

    let variants = Sigma2Variants {
        normal_form: sigma2,
        taylor_form: 0.5 * d2 * d2 + d3 / 3.0,
        minus_a1_grouping: 0.5 * d2 * d2 + (al(3, 0, 0) - al(1, 0, 1) * be(2, 0, 0) / (1.0 + det_j)) / 3.0,
        shared_denominator_grouping: 0.5 * d2 * d2 + (al(3, 0, 0) - al(1, 0, 1) * be(2, 0, 0)) / (1.0 + det_j) / 3.0,
        flat_manifold: 0.5 * d2 * d2 + al(3, 0, 0) / 3.0,
    };

    Ok(FlipReport {
        r_star,
        det_j,
        x_star: fp.x_star,
        y_star: fp.y_star,
        eta,
        alphas,
        betas,
        d: [d1, d2, d3],
        a1,
        a2,
        sigma1,
        sigma2,
        sigma2_variants: variants,
        classification: FlipClass::from_signs(sigma1, sigma2)?,
    })
}

/// Locate the flip in the default bracket and analyse it.
pub fn analyse_flip(k: &Coefficients) -> Result<FlipReport> {
    let (r_star, _) = find_flip_r(k, None)?;
    flip_coefficients(k, r_star)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipCheck {
    pub passed: bool,
    pub delta: f64,
    pub period_before: Option<usize>,
    pub period_after: Option<usize>,
    /// Half the distance between the two cycle points at `δ` and `δ/4`.
    pub amplitude: Option<(f64, f64)>,
    /// Predicted `sqrt(-σ1 μ/σ2)` in `u` for `μ = ±δ`.
    pub predicted_u: Option<f64>,
    pub notes: Vec<String>,
}

/// Half the sup-distance between the points of a 2-cycle.
pub fn two_cycle_amplitude(p: &ModelParams, start: State) -> Result<Option<f64>> {
    let res = detect_period(p, start, DEFAULT_PERIOD_CAP, DEFAULT_RECURRENCE_TOL)?;
    if res.period != Some(2) {
        return Ok(None);
    }
    let q = res.representative;
    let q2 = crate::model::step(p, q)?;
    Ok(Some(0.5 * q.dist_inf(&q2)))
}

/// Simulate at `r* ± δ`: the fixed point should attract on one side and a
/// 2-cycle with amplitude `∝ sqrt(δ)` on the other.
pub fn verify_flip_by_simulation(k: &Coefficients, report: &FlipReport, delta: f64) -> Result<FlipCheck> {
    if !(delta > 0.0) {
        return Err(Error::Precondition("delta must be > 0"));
    }
    let r_star = report.r_star;
    let per = |r: f64| -> Result<Option<usize>> {
        Ok(detect_period(&k.at(r)?, DEFAULT_START, DEFAULT_PERIOD_CAP, DEFAULT_RECURRENCE_TOL)?.period)
    };
    let period_before = per(r_star - delta)?;
    let period_after = per(r_star + delta)?;
    let mut check = FlipCheck {
        passed: false,
        delta,
        period_before,
        period_after,
        amplitude: None,
        predicted_u: Some((-report.sigma1 * delta / report.sigma2).abs().sqrt()),
        notes: Vec::new(),
    };

    if !report.classification.supercritical() {
        check
            .notes
            .push("subcritical: the bifurcating 2-cycle is unstable and not reached by forward iteration".into());
        return Ok(check);
    }
    let sign = if report.classification.cycle_to_the_right() { 1.0 } else { -1.0 };
    let (fp_side, cycle_side) = if sign > 0.0 {
        (period_before, period_after)
    } else {
        (period_after, period_before)
    };
    if fp_side != Some(1) {
        check.notes.push(format!("expected period 1 on the fixed-point side, got {fp_side:?}"));
    }
    if cycle_side != Some(2) {
        check.notes.push(format!("expected period 2 on the cycle side, got {cycle_side:?}"));
    }
    let near = two_cycle_amplitude(&k.at(r_star + sign * delta / 4.0)?, DEFAULT_START)?;
    let far = two_cycle_amplitude(&k.at(r_star + sign * delta)?, DEFAULT_START)?;
    if let (Some(far), Some(near)) = (far, near) {
        check.amplitude = Some((far, near));
        let ratio = far / near;
        // sqrt scaling predicts 2
        if !(1.0..=4.0).contains(&ratio) {
            check.notes.push(format!("amplitude ratio {ratio} is not within a factor 2 of 2"));
        }
    } else {
        check.notes.push("no 2-cycle found for the amplitude test".into());
    }
    check.passed = check.notes.is_empty();
    Ok(check)
}

/// Linear part of the `u, v` equations, for checking that `T` diagonalises.
pub fn uv_linear_block(tab: &PartialsTable, eta: &[f64; 4]) -> Matrix2<f64> {
    let co = |idx| transformed_coefficient(tab, eta, idx).unwrap_or((f64::NAN, f64::NAN));
    let (a_u, b_u) = co(Index3(1, 0, 0));
    let (a_v, b_v) = co(Index3(0, 0, 1));
    Matrix2::new(a_u, a_v, b_u, b_v)
}
