use rickerpp::center_manifold::{default_flip_bracket, find_flip_r, flip_coefficients, flip_roots_in, verify_flip_by_simulation};
use rickerpp::fixed_points::{
    classify_positive, classify_predator_free, classify_trivial, corollary_sufficient_window, existence_threshold,
    global_inequality_margin, global_stability_criterion, global_stability_window, solve_positive,
    sufficient_local_threshold, StabilityReport,
};
use rickerpp::nullclines::{Branch, NullclineSet};
use rickerpp::orbit::{
    detect_period, doubling_cascade, find_chaos_onset, find_doubling_threshold, lyapunov1, sweep, SweepOptions,
    DEFAULT_LYAPUNOV_N, DEFAULT_PERIOD_CAP, DEFAULT_RECURRENCE_TOL, DEFAULT_START, DEFAULT_TRANSIENT, MIN_LYAPUNOV_N,
};
use rickerpp::{iterate, Coefficients, ModelParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::emit::{Cell, Output};
use crate::CliError;

const SIMULATE_N: usize = 1000;
const SWEEP_R_FROM: f64 = 2.5;
const SWEEP_R_TO: f64 = 3.5;
const SWEEP_STEPS: usize = 200;
const SWEEP_M: usize = 100;
const SWEEP_LYAPUNOV_N: usize = 100_000;
const MAX_LEVELS: usize = 10_000;
const RECT_TOL: f64 = 1e-10;
const CASCADE_STEP: f64 = 1e-3;
const CASCADE_DOUBLINGS: usize = 5;
/// Width of the bracket searched for chaos after the last doubling.
const CHAOS_SPAN: f64 = 0.01;
/// Grid for the `R(U, y) > y` check.
const R_CHECK_POINTS: usize = 64;
const FLIP_SCAN_GRID: usize = 4096;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result types serialize")
}

fn analysis(e: rickerpp::Error) -> CliError {
    CliError::analysis(e.to_string())
}

fn require(ok: bool, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::usage(msg))
    }
}

pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    let k = cfg.params.coefficients()?;
    let model = if cfg.command.needs_r() {
        Some(cfg.params.model()?)
    } else {
        None
    };
    match cfg.command {
        Command::Simulate => simulate(cfg, &model.unwrap()),
        Command::FixedPoints => fixed_points(&model.unwrap()),
        Command::Stability => stability(&model.unwrap()),
        Command::GlobalCheck => global_check(cfg, &k),
        Command::NullclineVerify => nullcline_verify(cfg, &model.unwrap()),
        Command::Flip => flip(cfg, &k),
        Command::Sweep => sweep_cmd(cfg, &k),
        Command::Lyapunov => lyapunov(cfg, &model.unwrap()),
        Command::DetectPeriod => detect(cfg, &model.unwrap()),
        Command::Thresholds => thresholds(cfg, &k),
    }
}

fn simulate(cfg: &RunConfig, p: &ModelParams) -> Result<Output, CliError> {
    let o = &cfg.opts;
    let n = o.n.unwrap_or(SIMULATE_N);
    let transient = o.transient.unwrap_or(0);
    let orbit = iterate(p, o.start.unwrap_or(DEFAULT_START), n, transient).map_err(analysis)?;
    let rows = orbit
        .samples
        .iter()
        .enumerate()
        .map(|(i, q)| vec![(transient + i + 1).into(), q.x.into(), q.y.into()])
        .collect();
    Ok(Output {
        json: to_value(&orbit),
        header: &["k", "x", "y"],
        rows,
    })
}

fn stability_cells(rep: &StabilityReport) -> Vec<Cell> {
    vec![
        rep.trace.into(),
        rep.det.into(),
        rep.jury_a.into(),
        rep.jury_b.into(),
        rep.jury_c.into(),
        Cell::Text(enum_name(&rep.classification)),
    ]
}

fn enum_name<T: Serialize>(v: &T) -> String {
    to_value(v).as_str().unwrap_or_default().to_string()
}

fn fixed_points(p: &ModelParams) -> Result<Output, CliError> {
    let mut rows = Vec::new();
    let trivial = classify_trivial(p);
    let mut row = vec![Cell::from("trivial"), 0.0.into(), 0.0.into()];
    row.extend(stability_cells(&trivial));
    row.push(trivial.globally_stable.into());
    rows.push(row);

    let predator_free = classify_predator_free(p).ok();
    if let Some(rep) = &predator_free {
        let mut row = vec![Cell::from("predator_free"), p.r().into(), 0.0.into()];
        row.extend(stability_cells(rep));
        row.push(rep.globally_stable.into());
        rows.push(row);
    }

    let positive = match solve_positive(p, 1e-14) {
        Ok(fp) => {
            let rep = classify_positive(p, &fp);
            let mut row = vec![Cell::from("positive"), fp.x_star.into(), fp.y_star.into()];
            row.extend(stability_cells(&rep));
            row.push(rep.globally_stable.into());
            rows.push(row);
            json!({ "point": fp, "stability": rep })
        }
        Err(e) => json!({ "absent": e.to_string() }),
    };

    Ok(Output {
        json: json!({
            "trivial": { "x": 0.0, "y": 0.0, "stability": trivial },
            "predator_free": predator_free.map(|rep| json!({ "x": p.r(), "y": 0.0, "stability": rep })),
            "positive": positive,
        }),
        header: &[
            "kind",
            "x",
            "y",
            "trace",
            "det",
            "jury_a",
            "jury_b",
            "jury_c",
            "classification",
            "globally_stable",
        ],
        rows,
    })
}

fn stability(p: &ModelParams) -> Result<Output, CliError> {
    let fp = solve_positive(p, 1e-14).map_err(analysis)?;
    let rep = classify_positive(p, &fp);
    let threshold = sufficient_local_threshold(&p.coefficients());
    let sufficient_local = p.r() <= threshold;
    let mut row = vec![Cell::from(p.r()), fp.x_star.into(), fp.y_star.into()];
    row.extend(stability_cells(&rep));
    row.extend([rep.non_hyperbolic.into(), sufficient_local.into(), rep.globally_stable.into()]);
    Ok(Output {
        json: json!({
            "r": p.r(),
            "x_star": fp.x_star,
            "y_star": fp.y_star,
            "residual": fp.residual,
            "stability": rep,
            "sufficient_local_threshold": threshold,
            "sufficient_local": sufficient_local,
        }),
        header: &[
            "r",
            "x_star",
            "y_star",
            "trace",
            "det",
            "jury_a",
            "jury_b",
            "jury_c",
            "classification",
            "non_hyperbolic",
            "sufficient_local",
            "globally_stable",
        ],
        rows: vec![row],
    })
}

fn global_check(cfg: &RunConfig, k: &Coefficients) -> Result<Output, CliError> {
    let r_min = existence_threshold(k);
    let window = global_stability_window(k);
    let corollary = corollary_sufficient_window(k);
    let at_r = match cfg.params.r {
        Some(r) => {
            let p = cfg.params.model()?;
            let margin = global_inequality_margin(&p).map_err(analysis)?;
            let holds = global_stability_criterion(&p).map_err(analysis)?;
            Some((r, margin, holds))
        }
        None => None,
    };
    let row = vec![
        Cell::from(r_min),
        Cell::from(at_r.map(|t| t.0)),
        Cell::from(at_r.map(|t| t.1)),
        Cell::from(at_r.map(|t| t.2)),
        Cell::from(window.map(|w| w.lo)),
        Cell::from(window.map(|w| w.hi)),
        Cell::from(corollary.map(|w| w.lo)),
        Cell::from(corollary.map(|w| w.hi)),
    ];
    Ok(Output {
        json: json!({
            "r_min": r_min,
            "window": window,
            "corollary_window": corollary,
            "at_r": at_r.map(|(r, margin, holds)| json!({ "r": r, "margin": margin, "criterion": holds })),
        }),
        header: &[
            "r_min",
            "r",
            "margin",
            "criterion",
            "window_lo",
            "window_hi",
            "corollary_lo",
            "corollary_hi",
        ],
        rows: vec![row],
    })
}

fn nullcline_verify(cfg: &RunConfig, p: &ModelParams) -> Result<Output, CliError> {
    let o = &cfg.opts;
    let tol = o.tol.unwrap_or(RECT_TOL);
    require(tol > 0.0, "--tol must be > 0")?;
    let set = NullclineSet::new(*p).map_err(analysis)?;
    let seq = set.rectangle_iteration(o.max_levels.unwrap_or(MAX_LEVELS), tol).map_err(analysis)?;

    let y_lo = set.y_lower().map_err(analysis)?;
    let mut min_excess = f64::INFINITY;
    let mut evaluated = 0;
    for i in 0..R_CHECK_POINTS {
        let y = y_lo + (set.y_star - y_lo) * i as f64 / R_CHECK_POINTS as f64;
        if let Ok(v) = set.r_operator(Branch::U, y) {
            min_excess = min_excess.min(v - y);
            evaluated += 1;
        }
    }
    let rows = seq
        .levels
        .iter()
        .enumerate()
        .map(|(i, q)| vec![i.into(), q.a_min.into(), q.a_max.into(), q.b_min.into(), q.b_max.into(), q.gap().into()])
        .collect();
    Ok(Output {
        json: json!({
            "x_hat": set.x_hat,
            "x_star": set.x_star,
            "y_star": set.y_star,
            "y_lower": y_lo,
            "rectangles": seq,
            "r_operator_check": {
                "points": R_CHECK_POINTS,
                "evaluated": evaluated,
                "min_excess": (evaluated > 0).then_some(min_excess),
                "holds": evaluated == R_CHECK_POINTS && min_excess > 0.0,
            },
        }),
        header: &["level", "a_min", "a_max", "b_min", "b_max", "gap"],
        rows,
    })
}

fn flip(cfg: &RunConfig, k: &Coefficients) -> Result<Output, CliError> {
    let o = &cfg.opts;
    let bracket = match (o.r_lo, o.r_hi) {
        (None, None) => None,
        (lo, hi) => {
            let def = default_flip_bracket(k).map_err(analysis)?;
            Some((lo.unwrap_or(def.0), hi.unwrap_or(def.1)))
        }
    };
    if let Some((lo, hi)) = bracket {
        require(lo < hi, "--r-lo must be below --r-hi")?;
    }
    if let Some(d) = o.verify_delta {
        require(d > 0.0, "--verify-delta must be > 0")?;
    }
    let (r_star, _) = find_flip_r(k, bracket).map_err(analysis)?;
    let rep = flip_coefficients(k, r_star).map_err(analysis)?;

    let mut doc = to_value(&rep);
    if o.scan == Some(true) {
        let (lo, hi) = match bracket {
            Some(b) => b,
            None => default_flip_bracket(k).map_err(analysis)?,
        };
        doc["roots"] = to_value(&flip_roots_in(k, lo, hi, FLIP_SCAN_GRID).map_err(analysis)?);
    }
    let mut verified = Cell::Empty;
    if let Some(d) = o.verify_delta {
        let check = verify_flip_by_simulation(k, &rep, d).map_err(analysis)?;
        verified = check.passed.into();
        doc["verification"] = to_value(&check);
    }

    let mut row: Vec<Cell> = vec![rep.r_star.into(), rep.det_j.into(), rep.x_star.into(), rep.y_star.into()];
    row.extend(rep.eta.iter().map(|&v| Cell::from(v)));
    row.extend(rep.d.iter().map(|&v| Cell::from(v)));
    row.extend([rep.a1.into(), rep.a2.into(), rep.sigma1.into(), rep.sigma2.into()]);
    row.push(Cell::Text(enum_name(&rep.classification)));
    row.push(verified);
    Ok(Output {
        json: doc,
        header: &[
            "r_star",
            "det_j",
            "x_star",
            "y_star",
            "eta1",
            "eta2",
            "eta3",
            "eta4",
            "d1",
            "d2",
            "d3",
            "a1",
            "a2",
            "sigma1",
            "sigma2",
            "classification",
            "verified",
        ],
        rows: vec![row],
    })
}

fn sweep_cmd(cfg: &RunConfig, k: &Coefficients) -> Result<Output, CliError> {
    let o = &cfg.opts;
    let steps = o.steps.unwrap_or(SWEEP_STEPS);
    require(steps >= 2, "--steps must be at least 2")?;
    let m = o.m.unwrap_or(SWEEP_M);
    require(m >= 1, "--m must be at least 1")?;
    let with_lyapunov = o.lyapunov == Some(true);
    let lyapunov_n = o.lyapunov_n.unwrap_or(SWEEP_LYAPUNOV_N);
    if with_lyapunov {
        require(lyapunov_n >= MIN_LYAPUNOV_N, "--lyapunov-n must be at least 10000")?;
    }
    let opts = SweepOptions {
        transient: o.transient.unwrap_or(DEFAULT_TRANSIENT),
        start: o.start.unwrap_or(DEFAULT_START),
        with_period: true,
        with_lyapunov,
        lyapunov_n,
        parallel: true,
    };
    let rows = sweep(
        k,
        o.r_from.unwrap_or(SWEEP_R_FROM),
        o.r_to.unwrap_or(SWEEP_R_TO),
        steps,
        m,
        &opts,
    )
    .map_err(analysis)?;
    let mut csv = Vec::new();
    for row in &rows {
        if row.attractor_samples.is_empty() {
            csv.push(vec![row.r.into(), Cell::Empty, Cell::Empty, row.period.into(), row.lambda1.into()]);
        }
        for q in &row.attractor_samples {
            csv.push(vec![row.r.into(), q.x.into(), q.y.into(), row.period.into(), row.lambda1.into()]);
        }
    }
    Ok(Output {
        json: json!({ "rows": rows }),
        header: &["r", "x", "y", "period", "lambda1"],
        rows: csv,
    })
}

fn lyapunov(cfg: &RunConfig, p: &ModelParams) -> Result<Output, CliError> {
    let o = &cfg.opts;
    let n = o.n.unwrap_or(DEFAULT_LYAPUNOV_N);
    require(n >= MIN_LYAPUNOV_N, "--n must be at least 10000")?;
    let est = lyapunov1(p, o.start.unwrap_or(DEFAULT_START), n, o.transient.unwrap_or(DEFAULT_TRANSIENT))
        .map_err(analysis)?;
    let mut doc = to_value(&est);
    doc["r"] = json!(p.r());
    Ok(Output {
        json: doc,
        header: &["r", "lambda1", "n", "transient", "degenerate"],
        rows: vec![vec![
            p.r().into(),
            est.lambda1.into(),
            est.n.into(),
            est.transient.into(),
            est.degenerate.into(),
        ]],
    })
}

fn detect(cfg: &RunConfig, p: &ModelParams) -> Result<Output, CliError> {
    let o = &cfg.opts;
    let cap = o.cap.unwrap_or(DEFAULT_PERIOD_CAP);
    require(cap >= 1, "--cap must be at least 1")?;
    let tol = o.tol.unwrap_or(DEFAULT_RECURRENCE_TOL);
    require(tol > 0.0, "--tol must be > 0")?;
    let res = detect_period(p, o.start.unwrap_or(DEFAULT_START), cap, tol).map_err(analysis)?;
    let mut doc = to_value(&res);
    doc["r"] = json!(p.r());
    Ok(Output {
        json: doc,
        header: &["r", "period", "x", "y", "residual", "refined", "transient"],
        rows: vec![vec![
            p.r().into(),
            res.period.into(),
            res.representative.x.into(),
            res.representative.y.into(),
            res.residual.into(),
            res.refined.into(),
            res.transient.into(),
        ]],
    })
}

fn thresholds(cfg: &RunConfig, k: &Coefficients) -> Result<Output, CliError> {
    let o = &cfg.opts;
    let header: &[&str] = &["kind", "from_period", "to_period", "r"];

    if let Some(from) = o.from_period {
        require(from >= 1, "--from-period must be at least 1")?;
        let (Some(lo), Some(hi)) = (o.r_lo, o.r_hi) else {
            return Err(CliError::usage("--from-period needs both --r-lo and --r-hi"));
        };
        require(lo < hi, "--r-lo must be below --r-hi")?;
        let r = find_doubling_threshold(k, lo, hi, from).map_err(analysis)?;
        return Ok(Output {
            json: json!({ "thresholds": [{ "from_period": from, "to_period": 2 * from, "r": r }], "chaos_onset": null }),
            header,
            rows: vec![vec!["doubling".into(), from.into(), (2 * from).into(), r.into()]],
        });
    }

    let r_lo = match o.r_lo {
        Some(r) => r,
        None => existence_threshold(k).ok_or_else(|| CliError::analysis("no positive fixed point for any r"))? + 1e-3,
    };
    let r_hi = o.r_hi.unwrap_or(r_lo + 10.0);
    require(r_lo < r_hi, "--r-lo must be below --r-hi")?;
    let step = o.scan_step.unwrap_or(CASCADE_STEP);
    require(step > 0.0, "--scan-step must be > 0")?;
    let cascade = doubling_cascade(k, r_lo, r_hi, o.max_doublings.unwrap_or(CASCADE_DOUBLINGS), step)
        .map_err(analysis)?;

    let mut rows: Vec<Vec<Cell>> = cascade
        .iter()
        .map(|t| vec!["doubling".into(), t.from_period.into(), t.to_period.into(), t.r.into()])
        .collect();
    let mut onset = None;
    if o.chaos == Some(true) {
        let last = cascade
            .last()
            .ok_or_else(|| CliError::analysis("no period doubling found; cannot search for chaos"))?;
        let n = o.lyapunov_n.unwrap_or(DEFAULT_LYAPUNOV_N);
        require(n >= MIN_LYAPUNOV_N, "--lyapunov-n must be at least 10000")?;
        let c = find_chaos_onset(k, last.r, last.r + CHAOS_SPAN, n).map_err(analysis)?;
        rows.push(vec!["chaos_onset".into(), last.to_period.into(), Cell::Empty, c.r.into()]);
        onset = Some(c);
    }
    Ok(Output {
        json: json!({ "thresholds": cascade, "chaos_onset": onset }),
        header,
        rows,
    })
}
