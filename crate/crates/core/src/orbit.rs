//! Long-run orbit diagnostics: minimal periods, the largest Lyapunov
//! exponent, period-doubling thresholds and parameter sweeps.

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{jacobian_unchecked, step, step_unchecked, Coefficients, ModelParams, State};

/// `(1, 1)`, the default initial condition.
pub const DEFAULT_START: State = State { x: 1.0, y: 1.0 };
pub const DEFAULT_TRANSIENT: usize = 10_000;
pub const DEFAULT_LYAPUNOV_N: usize = 1_000_000;
pub const DEFAULT_PERIOD_CAP: usize = 64;
pub const DEFAULT_RECURRENCE_TOL: f64 = 1e-6;
pub const NEWTON_TOL: f64 = 1e-11;
/// λ₁ above this (with no period found) counts as chaos.
pub const CHAOS_LAMBDA: f64 = 0.01;
/// Shortest averaging run accepted by [`lyapunov1`].
pub const MIN_LYAPUNOV_N: usize = 10_000;

/// Cumulative transients tried before giving up on a period. Orbits near
/// window edges can take ~10⁵ iterates to settle.
const TRANSIENT_SCHEDULE: [usize; 3] = [10_000, 100_000, 1_000_000];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodResult {
    pub period: Option<usize>,
    pub representative: State,
    /// `‖G^p(q) - q‖∞` at the representative.
    pub residual: f64,
    /// Newton refinement converged below [`NEWTON_TOL`].
    pub refined: bool,
    /// Iterates discarded before the recurrence test succeeded (or the
    /// largest transient tried).
    pub transient: usize,
}

/// `G^p(q)` and the Jacobian product along the way.
pub fn iterate_with_jacobian(p: &ModelParams, q: State, n: usize) -> (State, Matrix2<f64>) {
    let mut st = q;
    let mut m = Matrix2::identity();
    for _ in 0..n {
        m = jacobian_unchecked(p, st.x, st.y) * m;
        st = step_unchecked(p, st.x, st.y);
    }
    (st, m)
}

pub fn spectral_radius(m: &Matrix2<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Damped Newton on `G^p(q) = q`. Returns the point and whether it converged.
pub fn refine_cycle(p: &ModelParams, q0: State, period: usize, tol: f64) -> (State, bool) {
    let resid = |q: State| {
        let (g, _) = iterate_with_jacobian(p, q, period);
        Vector2::new(g.x - q.x, g.y - q.y)
    };
    let mut q = q0;
    let mut f = resid(q);
    for _ in 0..60 {
        if f.amax() < tol {
            return (q, true);
        }
        let (g, m) = iterate_with_jacobian(p, q, period);
        let f_here = Vector2::new(g.x - q.x, g.y - q.y);
        let Some(dq) = (m - Matrix2::identity()).lu().solve(&(-f_here)) else {
            return (q, false);
        };
        let mut lambda = 1.0;
        loop {
            let cand = State {
                x: q.x + lambda * dq.x,
                y: q.y + lambda * dq.y,
            };
            if cand.x >= 0.0 && cand.y >= 0.0 && cand.x.is_finite() && cand.y.is_finite() {
                let fc = resid(cand);
                if fc.amax() < f.amax() {
                    q = cand;
                    f = fc;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return (q, f.amax() < tol);
            }
        }
    }
    (q, f.amax() < tol)
}

fn cycle_residual(p: &ModelParams, q: State, period: usize) -> f64 {
    let (g, _) = iterate_with_jacobian(p, q, period);
    g.dist_inf(&q)
}

fn divisors_below(n: usize) -> impl Iterator<Item = usize> {
    (1..n).filter(move |d| n % d == 0)
}

/// Smallest `p <= cap` whose recurrence `‖s_{k+p} - s_k‖∞ < tol` holds over
/// `4p` consecutive checks after the transient, refined by Newton and
/// reduced to the minimal period.
pub fn detect_period(p: &ModelParams, start: State, cap: usize, tol: f64) -> Result<PeriodResult> {
    if cap == 0 || !(tol > 0.0) {
        return Err(Error::Precondition("detect_period needs cap >= 1 and tol > 0"));
    }
    let mut st = start;
    let mut done = 0usize;
    let mut window = Vec::with_capacity(5 * cap + 1);
    for &target in &TRANSIENT_SCHEDULE {
        while done < target {
            st = step(p, st).map_err(|_| Error::Overflow { index: done })?;
            done += 1;
        }
        window.clear();
        window.push(st);
        let mut w = st;
        for k in 0..5 * cap {
            w = step(p, w).map_err(|_| Error::Overflow { index: done + k })?;
            window.push(w);
        }
        if let Some(period) = (1..=cap).find(|&per| (0..4 * per).all(|k| window[k + per].dist_inf(&window[k]) < tol)) {
            return Ok(minimal_cycle(p, *window.last().unwrap(), period, tol, done));
        }
    }
    Ok(PeriodResult {
        period: None,
        representative: st,
        residual: f64::NAN,
        refined: false,
        transient: done,
    })
}

fn minimal_cycle(p: &ModelParams, q0: State, period: usize, tol: f64, transient: usize) -> PeriodResult {
    let (q, refined) = refine_cycle(p, q0, period, NEWTON_TOL);
    let (q, period) = if refined {
        // A decaying oscillation can pass the recurrence test for a multiple
        // of the true period; the refined point settles the question.
        match divisors_below(period).find(|&d| cycle_residual(p, q, d) < tol) {
            Some(d) => {
                let (q2, _) = refine_cycle(p, q, d, NEWTON_TOL);
                (q2, d)
            }
            None => (q, period),
        }
    } else {
        (q0, period)
    };
    let residual = cycle_residual(p, q, period);
    PeriodResult {
        period: Some(period),
        representative: q,
        residual,
        refined: refined && residual < NEWTON_TOL,
        transient,
    }
}

/// Points of the cycle through `q`.
pub fn cycle_points(p: &ModelParams, q: State, period: usize) -> Vec<State> {
    let mut pts = Vec::with_capacity(period);
    let mut st = q;
    for _ in 0..period {
        pts.push(st);
        st = step_unchecked(p, st.x, st.y);
    }
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub lambda1: f64,
    pub n: usize,
    pub transient: usize,
    /// The orbit reached the origin (or the tangent vector vanished).
    pub degenerate: bool,
}

/// Largest Lyapunov exponent from a unit tangent vector renormalised every
/// step.
pub fn lyapunov1(p: &ModelParams, start: State, n: usize, transient: usize) -> Result<LyapunovEstimate> {
    if n < MIN_LYAPUNOV_N {
        return Err(Error::Precondition("lyapunov1 needs n >= 10^4"));
    }
    let mut st = start;
    for index in 0..transient {
        st = step(p, st).map_err(|_| Error::Overflow { index })?;
    }
    let mut v = Vector2::new(1.0, 1.0).normalize();
    let mut sum = 0.0;
    let mut degenerate = false;
    for k in 0..n {
        let w = jacobian_unchecked(p, st.x, st.y) * v;
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            degenerate = true;
            sum = f64::NEG_INFINITY;
            break;
        }
        sum += norm.ln();
        v = w / norm;
        st = step_unchecked(p, st.x, st.y);
        if !(st.x.is_finite() && st.y.is_finite()) {
            return Err(Error::Overflow { index: transient + k });
        }
        if st.x == 0.0 && st.y == 0.0 {
            degenerate = true;
        }
    }
    Ok(LyapunovEstimate {
        lambda1: sum / n as f64,
        n,
        transient,
        degenerate,
    })
}

fn period_at(k: &Coefficients, r: f64) -> Result<Option<usize>> {
    Ok(detect_period(&k.at(r)?, DEFAULT_START, DEFAULT_PERIOD_CAP, DEFAULT_RECURRENCE_TOL)?.period)
}

/// Number of coarse probes used to reject brackets containing windows.
const MONOTONE_PROBES: usize = 16;
const THRESHOLD_XTOL: f64 = 1e-5;

fn threshold_by<P>(r_lo: f64, r_hi: f64, mut above: P) -> Result<f64>
where
    P: FnMut(f64) -> Result<(bool, Option<usize>)>,
{
    let mut samples = Vec::with_capacity(MONOTONE_PROBES + 1);
    let mut flags = Vec::with_capacity(MONOTONE_PROBES + 1);
    for i in 0..=MONOTONE_PROBES {
        let r = r_lo + (r_hi - r_lo) * i as f64 / MONOTONE_PROBES as f64;
        let (flag, per) = above(r)?;
        samples.push((r, per));
        flags.push(flag);
    }
    let first_true = flags.iter().position(|&f| f);
    let monotone = match first_true {
        Some(i) => i > 0 && flags[i..].iter().all(|&f| f),
        None => false,
    };
    if !monotone {
        return Err(Error::NonMonotone { samples });
    }
    let i = first_true.unwrap();
    let (mut lo, mut hi) = (samples[i - 1].0, samples[i].0);
    while hi - lo > THRESHOLD_XTOL {
        let mid = 0.5 * (lo + hi);
        if above(mid)?.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Parameter where the attractor's period first exceeds `from_period`.
pub fn find_doubling_threshold(k: &Coefficients, r_lo: f64, r_hi: f64, from_period: usize) -> Result<f64> {
    if period_at(k, r_lo)? != Some(from_period) || period_at(k, r_hi)? != Some(2 * from_period) {
        return Err(Error::Precondition(
            "bracket must show from_period at r_lo and 2*from_period at r_hi",
        ));
    }
    threshold_by(r_lo, r_hi, |r| {
        let per = period_at(k, r)?;
        Ok((per.is_none_or(|q| q > from_period), per))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub from_period: usize,
    pub to_period: usize,
    pub r: f64,
}

/// Consecutive undecided probes tolerated while scanning for a doubling.
const SCAN_PATIENCE: usize = 3;

/// Walk up from `r_lo` in steps of `scan_step`, bracketing and refining
/// each period doubling until `max_doublings` are found, the period stops
/// doubling, or `r_hi` is reached.
pub fn doubling_cascade(
    k: &Coefficients,
    r_lo: f64,
    r_hi: f64,
    max_doublings: usize,
    scan_step: f64,
) -> Result<Vec<Threshold>> {
    if !(scan_step > 0.0) || !(r_hi > r_lo) {
        return Err(Error::Precondition("cascade needs r_hi > r_lo and scan_step > 0"));
    }
    let Some(mut per) = period_at(k, r_lo)? else {
        return Err(Error::Precondition("no periodic attractor at the start of the cascade scan"));
    };
    let mut out = Vec::new();
    let mut r = r_lo;
    let mut last_regular = r_lo;
    let mut undecided = 0;
    while out.len() < max_doublings {
        r += scan_step;
        if r > r_hi {
            break;
        }
        match period_at(k, r)? {
            Some(q) if q == per => {
                last_regular = r;
                undecided = 0;
            }
            Some(q) if q == 2 * per => {
                let t = find_doubling_threshold(k, last_regular, r, per)?;
                out.push(Threshold {
                    from_period: per,
                    to_period: q,
                    r: t,
                });
                per = q;
                last_regular = r;
                undecided = 0;
            }
            None if undecided < SCAN_PATIENCE => undecided += 1,
            _ => break,
        }
    }
    Ok(out)
}

/// Chaotic means no period up to the cap and `λ₁ > CHAOS_LAMBDA`.
pub fn is_chaotic(p: &ModelParams, lyapunov_n: usize) -> Result<(bool, Option<usize>)> {
    let per = detect_period(p, DEFAULT_START, DEFAULT_PERIOD_CAP, DEFAULT_RECURRENCE_TOL)?.period;
    if per.is_some() {
        return Ok((false, per));
    }
    let lam = lyapunov1(p, DEFAULT_START, lyapunov_n, DEFAULT_TRANSIENT)?;
    Ok((lam.lambda1 > CHAOS_LAMBDA, None))
}

/// Probes used to locate the first chaotic parameter.
const ONSET_PROBES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosOnset {
    pub r: f64,
    /// Share of probes above `r` that are chaotic. Narrow periodic windows
    /// past the onset keep this below 1.
    pub chaotic_fraction_above: f64,
}

/// First parameter in `[r_lo, r_hi]` with a chaotic attractor.
///
/// Chaos is interleaved with narrow windows, so the predicate is not
/// monotone. The bracket is probed on a uniform grid and the step from the
/// last regular probe to the first chaotic one is bisected.
pub fn find_chaos_onset(k: &Coefficients, r_lo: f64, r_hi: f64, lyapunov_n: usize) -> Result<ChaosOnset> {
    let mut samples = Vec::with_capacity(ONSET_PROBES + 1);
    let mut flags = Vec::with_capacity(ONSET_PROBES + 1);
    for i in 0..=ONSET_PROBES {
        let r = r_lo + (r_hi - r_lo) * i as f64 / ONSET_PROBES as f64;
        let (flag, per) = is_chaotic(&k.at(r)?, lyapunov_n)?;
        samples.push((r, per));
        flags.push(flag);
    }
    if flags[0] {
        return Err(Error::Precondition("r_lo must not be chaotic"));
    }
    let Some(first) = flags.iter().position(|&f| f) else {
        return Err(Error::NonMonotone { samples });
    };
    let (mut lo, mut hi) = (samples[first - 1].0, samples[first].0);
    while hi - lo > THRESHOLD_XTOL {
        let mid = 0.5 * (lo + hi);
        if is_chaotic(&k.at(mid)?, lyapunov_n)?.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let above = &flags[first..];
    Ok(ChaosOnset {
        r: 0.5 * (lo + hi),
        chaotic_fraction_above: above.iter().filter(|&&f| f).count() as f64 / above.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub attractor_samples: Vec<State>,
    pub period: Option<usize>,
    pub lambda1: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub transient: usize,
    pub start: State,
    pub with_period: bool,
    pub with_lyapunov: bool,
    pub lyapunov_n: usize,
    /// Use scoped worker threads (ignored on wasm32).
    pub parallel: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            transient: DEFAULT_TRANSIENT,
            start: DEFAULT_START,
            with_period: true,
            with_lyapunov: false,
            lyapunov_n: 100_000,
            parallel: true,
        }
    }
}

fn sweep_row(k: &Coefficients, r: f64, m: usize, opts: &SweepOptions) -> SweepRow {
    let mut row = SweepRow {
        r,
        attractor_samples: Vec::new(),
        period: None,
        lambda1: None,
        error: None,
    };
    let run = |row: &mut SweepRow| -> Result<()> {
        let p = k.at(r)?;
        let mut transient = opts.transient;
        if opts.with_period {
            let res = detect_period(&p, opts.start, DEFAULT_PERIOD_CAP, DEFAULT_RECURRENCE_TOL)?;
            row.period = res.period;
            // a slowly settling cycle needs the longer burn-in to show up in the samples
            if res.period.is_some() {
                transient = transient.max(res.transient);
            }
        }
        row.attractor_samples = crate::model::iterate(&p, opts.start, m, transient)?.samples;
        if opts.with_lyapunov {
            row.lambda1 = Some(lyapunov1(&p, opts.start, opts.lyapunov_n, opts.transient)?.lambda1);
        }
        Ok(())
    };
    if let Err(e) = run(&mut row) {
        row.error = Some(e.to_string());
    }
    row
}

/// Uniform grid of `steps` parameter values from `r_from` to `r_to`, each
/// row keeping the last `m` iterates. Rows are ordered by `r`; failures are
/// recorded in the row.
pub fn sweep(k: &Coefficients, r_from: f64, r_to: f64, steps: usize, m: usize, opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    if steps < 2 {
        return Err(Error::Precondition("sweep needs steps >= 2"));
    }
    let rs: Vec<f64> = (0..steps)
        .map(|i| {
            if i + 1 == steps {
                r_to
            } else {
                r_from + (r_to - r_from) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();

    #[cfg(not(target_arch = "wasm32"))]
    if opts.parallel {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(steps);
        let chunk = steps.div_ceil(workers);
        let rows = std::thread::scope(|scope| {
            let handles: Vec<_> = rs
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|&r| sweep_row(k, r, m, opts)).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
        });
        return Ok(rows);
    }

    Ok(rs.iter().map(|&r| sweep_row(k, r, m, opts)).collect())
}
