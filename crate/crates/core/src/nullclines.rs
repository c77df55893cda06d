//! Nullcline geometry behind the global-stability argument.
//!
//! `S` is the prey nullcline solved for `y`, `V` the predator nullcline, and
//! `U` replaces `S` on `[0, r]` by its chord through `(x*, y*)` and `(r, 0)`.
//! The nested rectangles `D_k` are built from the maps `S⁻¹∘V` and `V∘S⁻¹`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_points::{existence_threshold, solve_positive};
use crate::model::{ModelParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullclineSet {
    pub params: ModelParams,
    pub x_hat: f64,
    pub x_star: f64,
    pub y_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    S,
    U,
}

impl NullclineSet {
    pub fn new(params: ModelParams) -> Result<Self> {
        let fp = solve_positive(&params, 1e-14)?;
        let x_hat = existence_threshold(&params.coefficients()).ok_or(Error::NoPositiveFixedPoint {
            violated: "c*b0 > (1-s)*gamma",
        })?;
        Ok(Self {
            params,
            x_hat,
            x_star: fp.x_star,
            y_star: fp.y_star,
        })
    }

    fn r(&self) -> f64 {
        self.params.r()
    }

    fn c(&self) -> f64 {
        self.params.c()
    }

    pub fn s_of(&self, x: f64) -> f64 {
        ((self.r() - x).exp() - 1.0) / self.c()
    }

    pub fn s_inv(&self, y: f64) -> Result<f64> {
        let arg = 1.0 + self.c() * y;
        if !(arg > 0.0) {
            return Err(Error::Domain { stage: "S^-1", value: y });
        }
        Ok(self.r() - arg.ln())
    }

    pub fn v_of(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain { stage: "V", value: x });
        }
        let p = &self.params;
        Ok((p.c() * p.b0() / (1.0 - p.s()) * x / (1.0 + p.gamma() * x) - 1.0) / p.c())
    }

    /// Fails beyond the horizontal asymptote of `V`.
    pub fn v_inv(&self, y: f64) -> Result<f64> {
        let p = &self.params;
        let cy = 1.0 + p.c() * y;
        let denom = p.c() * p.b0() - p.gamma() * (1.0 - p.s()) * cy;
        if !(denom > 0.0) || !(cy >= 0.0) {
            return Err(Error::Domain { stage: "V^-1", value: y });
        }
        Ok((1.0 - p.s()) * cy / denom)
    }

    fn chord_slope(&self) -> f64 {
        -self.y_star / (self.r() - self.x_star)
    }

    pub fn u_of(&self, x: f64) -> f64 {
        if x <= self.r() {
            self.chord_slope() * (x - self.r())
        } else {
            self.s_of(x)
        }
    }

    pub fn u_inv(&self, y: f64) -> Result<f64> {
        if y >= 0.0 {
            let x = self.r() + y / self.chord_slope();
            if x < 0.0 {
                return Err(Error::Domain { stage: "U^-1", value: y });
            }
            Ok(x)
        } else {
            self.s_inv(y)
        }
    }

    fn inverse(&self, which: Branch, y: f64) -> Result<f64> {
        match which {
            Branch::S => self.s_inv(y),
            Branch::U => self.u_inv(y),
        }
    }

    /// `V ∘ B⁻¹ ∘ V ∘ B⁻¹ (y)` for `B = S` or `U`.
    pub fn r_operator(&self, which: Branch, y: f64) -> Result<f64> {
        let stage = |e: Error, name: &'static str| match e {
            Error::Domain { value, .. } => Error::Domain { stage: name, value },
            other => other,
        };
        let a = self.inverse(which, y).map_err(|e| stage(e, "inner inverse"))?;
        let b = self.v_of(a).map_err(|e| stage(e, "inner V"))?;
        let c = self.inverse(which, b).map_err(|e| stage(e, "outer inverse"))?;
        self.v_of(c).map_err(|e| stage(e, "outer V"))
    }

    /// Lower end `y_*` of the interval on which `𝓡` is studied, clamped at 0.
    pub fn y_lower(&self) -> Result<f64> {
        let u_hat = self.u_of(self.x_hat);
        if self.v_of(self.r())? < u_hat {
            return Ok(0.0);
        }
        let y = self.u_of(self.v_inv(u_hat)?);
        Ok(y.max(0.0))
    }

    /// Build the nested rectangles `D_k` until their sides shrink below `tol`.
    pub fn rectangle_iteration(&self, max_levels: usize, tol: f64) -> Result<RectangleSequence> {
        let wrap = |level: usize| move |e: Error| Error::RectangleLevel {
            level,
            source: Box::new(e),
        };
        let sv = |x: f64| -> Result<f64> { self.s_inv(self.v_of(x)?) };

        let am0 = sv(self.s_inv(0.0).map_err(wrap(0))?).map_err(wrap(0))?;
        let a_max0 = self.r();
        let mut levels = vec![Rectangle {
            a_min: am0,
            a_max: a_max0,
            b_min: self.v_of(am0).map_err(wrap(0))?,
            b_max: self.v_of(a_max0).map_err(wrap(0))?,
        }];
        let mut converged = levels[0].gap() < tol;
        let mut k = 1;
        while !converged && k <= max_levels {
            let prev = levels[k - 1];
            let a_min = sv(prev.a_max).map_err(wrap(k))?;
            let a_max = sv(prev.a_min).map_err(wrap(k))?;
            let rect = Rectangle {
                a_min,
                a_max,
                b_min: self.v_of(a_min).map_err(wrap(k))?,
                b_max: self.v_of(a_max).map_err(wrap(k))?,
            };
            converged = rect.gap() < tol;
            levels.push(rect);
            k += 1;
        }
        let final_gap = levels.last().map_or(f64::INFINITY, Rectangle::gap);
        Ok(RectangleSequence {
            levels,
            converged,
            certified: converged && self.r() <= 1.0,
            final_gap,
        })
    }
}

/// `[a_min, a_max] × [b_min, b_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rectangle {
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

impl Rectangle {
    pub fn gap(&self) -> f64 {
        (self.a_max - self.a_min).max(self.b_max - self.b_min)
    }

    pub fn contains(&self, st: &State, slack: f64) -> bool {
        st.x >= self.a_min - slack
            && st.x <= self.a_max + slack
            && st.y >= self.b_min - slack
            && st.y <= self.b_max + slack
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RectangleSequence {
    pub levels: Vec<Rectangle>,
    pub converged: bool,
    /// Converged and `r <= 1`, where the map is monotone on the absorbing box
    /// and the shrinking rectangles prove global attraction.
    pub certified: bool,
    pub final_gap: f64,
}
