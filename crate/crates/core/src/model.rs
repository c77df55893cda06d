//! The predator-prey map with Ricker prey growth.
//!
//! ```text
//! x' = x e^{r-x} / (1 + c y)
//! y' = s y + (b0 x / (1 + γ x)) · (c y / (1 + c y))
//! ```

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The r-independent part of the model: conversion `b0`, saturation `gamma`,
/// consumption scale `c` and predator survival `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    b0: f64,
    gamma: f64,
    c: f64,
    s: f64,
}

impl Coefficients {
    pub fn new(b0: f64, gamma: f64, c: f64, s: f64) -> Result<Self> {
        check(b0.is_finite() && b0 > 0.0, "b0", b0, "must be finite and > 0")?;
        check(
            gamma.is_finite() && gamma > 0.0,
            "gamma",
            gamma,
            "must be finite and > 0",
        )?;
        check(c > 0.0 && c < 1.0, "c", c, "must lie in (0, 1)")?;
        check(s > 0.0 && s < 1.0, "s", s, "must lie in (0, 1)")?;
        Ok(Self { b0, gamma, c, s })
    }

    /// b0 = 4, γ = 3/2, c = 9/10, s = 1/10.
    pub fn example() -> Self {
        Self {
            b0: 4.0,
            gamma: 1.5,
            c: 0.9,
            s: 0.1,
        }
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn at(self, r: f64) -> Result<ModelParams> {
        check(r.is_finite(), "r", r, "must be finite")?;
        Ok(ModelParams { r, coeffs: self })
    }
}

fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    r: f64,
    coeffs: Coefficients,
}

impl ModelParams {
    pub fn new(r: f64, b0: f64, gamma: f64, c: f64, s: f64) -> Result<Self> {
        Coefficients::new(b0, gamma, c, s)?.at(r)
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn b0(&self) -> f64 {
        self.coeffs.b0
    }
    pub fn gamma(&self) -> f64 {
        self.coeffs.gamma
    }
    pub fn c(&self) -> f64 {
        self.coeffs.c
    }
    pub fn s(&self) -> f64 {
        self.coeffs.s
    }
    pub fn coefficients(&self) -> Coefficients {
        self.coeffs
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        self.coeffs.at(r)
    }
}

/// A nonnegative prey/predator pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite { context: "state" });
        }
        check(x >= 0.0, "x", x, "prey density must be >= 0")?;
        check(y >= 0.0, "y", y, "predator density must be >= 0")?;
        Ok(Self { x, y })
    }

    pub fn dist_inf(&self, other: &State) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }
}

/// Apply the map once.
pub fn step(p: &ModelParams, st: State) -> Result<State> {
    if !(st.x.is_finite() && st.y.is_finite()) {
        return Err(Error::NonFinite { context: "step input" });
    }
    let next = step_unchecked(p, st.x, st.y);
    if next.x.is_finite() && next.y.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFinite {
            context: "step output",
        })
    }
}

/// Raw map evaluation without finiteness checks.
#[inline]
pub(crate) fn step_unchecked(p: &ModelParams, x: f64, y: f64) -> State {
    let cy = p.c() * y;
    // 1 - cy/(1+cy) written as 1/(1+cy)
    let inv = 1.0 / (1.0 + cy);
    State {
        x: x * (p.r - x).exp() * inv,
        y: p.s() * y + p.b0() * x / (1.0 + p.gamma() * x) * cy * inv,
    }
}

/// Analytic Jacobian of the map at `st`.
pub fn jacobian(p: &ModelParams, st: State) -> Result<Matrix2<f64>> {
    if !(st.x.is_finite() && st.y.is_finite()) {
        return Err(Error::NonFinite {
            context: "jacobian input",
        });
    }
    Ok(jacobian_unchecked(p, st.x, st.y))
}

#[inline]
pub(crate) fn jacobian_unchecked(p: &ModelParams, x: f64, y: f64) -> Matrix2<f64> {
    let (c, g, b0) = (p.c(), p.gamma(), p.b0());
    let e = (p.r - x).exp();
    let inv = 1.0 / (1.0 + c * y);
    let gx = 1.0 + g * x;
    Matrix2::new(
        (1.0 - x) * e * inv,
        -x * e * c * inv * inv,
        b0 / (gx * gx) * c * y * inv,
        p.s() + b0 * x / gx * c * inv * inv,
    )
}

/// The box `[0, K1] × [0, K2]` every orbit eventually enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingBox {
    pub k1: f64,
    pub k2: f64,
}

impl AbsorbingBox {
    pub fn contains(&self, st: &State) -> bool {
        (0.0..=self.k1).contains(&st.x) && (0.0..=self.k2).contains(&st.y)
    }
}

pub fn absorbing_box(p: &ModelParams) -> AbsorbingBox {
    AbsorbingBox {
        k1: (p.r - 1.0).exp(),
        k2: p.b0() / (p.gamma() * (1.0 - p.s())) + 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orbit {
    pub samples: Vec<State>,
    pub transient_discarded: usize,
    pub params: ModelParams,
}

/// Apply `step` `transient + n` times from `start`, keeping the last `n` states.
pub fn iterate(p: &ModelParams, start: State, n: usize, transient: usize) -> Result<Orbit> {
    let mut st = start;
    for index in 0..transient {
        st = step(p, st).map_err(|_| Error::Overflow { index })?;
    }
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        st = step(p, st).map_err(|_| Error::Overflow {
            index: transient + k,
        })?;
        samples.push(st);
    }
    Ok(Orbit {
        samples,
        transient_discarded: transient,
        params: *p,
    })
}
