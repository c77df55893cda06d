//! Independent oracles and seeded samplers shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rickerpp::{Coefficients, ModelParams};

pub const B0: f64 = 4.0;
pub const GAMMA: f64 = 1.5;
pub const C: f64 = 0.9;
pub const S: f64 = 0.1;

pub fn g(r: f64, x: f64, y: f64) -> (f64, f64) {
    let x1 = x * (r - x).exp() / (1.0 + C * y);
    let y1 = S * y + B0 * x / (1.0 + GAMMA * x) * (C * y / (1.0 + C * y));
    (x1, y1)
}

/// Positive fixed point by Newton on `ln(c b0 x/((1-s)(1+γx))) + x = r`.
pub fn fixed_point(r: f64) -> (f64, f64) {
    let mut x = 2.0;
    for _ in 0..100 {
        let f = (C * B0 * x / ((1.0 - S) * (1.0 + GAMMA * x))).ln() + x - r;
        let df = 1.0 / x - GAMMA / (1.0 + GAMMA * x) + 1.0;
        x -= f / df;
    }
    (x, B0 * x / ((1.0 - S) * (1.0 + GAMMA * x)) - 1.0 / C)
}

pub fn jac(r: f64, x: f64, y: f64) -> [[f64; 2]; 2] {
    let h = 1e-6;
    let d = |dx: f64, dy: f64| {
        let (a, b) = g(r, x + dx, y + dy);
        let (c, e) = g(r, x - dx, y - dy);
        ((a - c) / (2.0 * h), (b - e) / (2.0 * h))
    };
    let (a, c) = d(h, 0.0);
    let (b, e) = d(0.0, h);
    [[a, b], [c, e]]
}

/// `G̃(x̃, μ, ỹ)` around the moving fixed point.
pub fn gtilde(r_star: f64, v: [f64; 3]) -> [f64; 2] {
    let r = r_star + v[1];
    let (xs, ys) = fixed_point(r);
    let (a, b) = g(r, xs + v[0], ys + v[2]);
    [a - xs, b - ys]
}

pub struct Frame {
    pub r_star: f64,
    pub det: f64,
    pub eta: [f64; 4],
}

pub fn frame() -> Frame {
    // bisection on 1 + tr + det with the local Jacobian
    let f = |r: f64| {
        let (x, y) = fixed_point(r);
        let j = jac(r, x, y);
        1.0 + j[0][0] + j[1][1] + j[0][0] * j[1][1] - j[0][1] * j[1][0]
    };
    let (mut lo, mut hi) = (2.0, 3.5);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    let r_star = 0.5 * (lo + hi);
    let (x, y) = fixed_point(r_star);
    let j = jac(r_star, x, y);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    // eigenvectors of J for -1 and -det, scaled to have y-component 1
    let e1 = j[0][1] / (-1.0 - j[0][0]);
    let e2 = j[0][1] / (-det - j[0][0]);
    Frame {
        r_star,
        det,
        eta: [e1, e2, 1.0 / (e2 - e1), e2 / (e2 - e1)],
    }
}

/// Transformed map `T⁻¹ G̃(T w)` in `(u, μ, v)`.
pub fn transformed(fr: &Frame, w: [f64; 3]) -> [f64; 2] {
    let [e1, e2, e3, e4] = fr.eta;
    let xt = [e1 * w[0] + e2 * w[2], w[1], w[0] + w[2]];
    let [g1, g2] = gtilde(fr.r_star, xt);
    [-e3 * g1 + e4 * g2, e3 * g1 + (1.0 - e4) * g2]
}

/// Central-difference estimate of `∂^a f / a!` (multi-index) with step `h`.
pub fn central<F: Fn([f64; 3]) -> [f64; 2]>(f: &F, a: [u8; 3], h: f64) -> [f64; 2] {
    fn binom(n: u8, k: u8) -> f64 {
        let mut v = 1.0;
        for i in 0..k {
            v = v * (n - i) as f64 / (i + 1) as f64;
        }
        v
    }
    let mut acc = [0.0; 2];
    for i in 0..=a[0] {
        for j in 0..=a[1] {
            for k in 0..=a[2] {
                let w = binom(a[0], i) * binom(a[1], j) * binom(a[2], k);
                let sign = if (i + j + k) % 2 == 0 { 1.0 } else { -1.0 };
                let pt = [
                    (a[0] as f64 / 2.0 - i as f64) * h,
                    (a[1] as f64 / 2.0 - j as f64) * h,
                    (a[2] as f64 / 2.0 - k as f64) * h,
                ];
                let v = f(pt);
                acc[0] += sign * w * v[0];
                acc[1] += sign * w * v[1];
            }
        }
    }
    let order = (a[0] + a[1] + a[2]) as i32;
    let fact: f64 = a.iter().map(|&n| (1..=n as u32).map(f64::from).product::<f64>()).product();
    let scale = h.powi(order) * fact;
    [acc[0] / scale, acc[1] / scale]
}

pub fn richardson<F: Fn([f64; 3]) -> [f64; 2]>(f: &F, a: [u8; 3], h: f64) -> [f64; 2] {
    let c1 = central(f, a, h);
    let c2 = central(f, a, h / 2.0);
    [(4.0 * c2[0] - c1[0]) / 3.0, (4.0 * c2[1] - c1[1]) / 3.0]
}

pub fn step_for(a: [u8; 3]) -> f64 {
    match a[0] + a[1] + a[2] {
        1 => 1e-3,
        2 => 4e-3,
        _ => 1e-2,
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub const SEED: u64 = 0x5eed_2024;

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED)
}

/// Random coefficients admitting a positive fixed point.
pub fn random_coefficients(rng: &mut ChaCha8Rng) -> Coefficients {
    loop {
        let b0 = rng.random_range(0.5..10.0);
        let gamma = rng.random_range(0.1..5.0);
        let c = rng.random_range(0.05..0.95);
        let s = rng.random_range(0.05..0.95);
        if c * b0 > (1.0 - s) * gamma * 1.01 {
            return Coefficients::new(b0, gamma, c, s).unwrap();
        }
    }
}

pub fn r_min(k: &Coefficients) -> f64 {
    (1.0 - k.s()) / (k.c() * k.b0() - (1.0 - k.s()) * k.gamma())
}

/// Random parameter set with `r` strictly above the existence threshold.
pub fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let k = random_coefficients(rng);
    let lo = r_min(&k);
    let r = lo + rng.random_range(1e-3..6.0);
    k.at(r).unwrap()
}

pub fn halton(i: usize, base: usize) -> f64 {
    let (mut f, mut r, mut n) = (1.0, 0.0, i);
    while n > 0 {
        f /= base as f64;
        r += f * (n % base) as f64;
        n /= base;
    }
    r
}

