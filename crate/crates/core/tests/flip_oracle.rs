//! Finite-difference checks of the flip analysis. The map, the fixed-point
//! branch and the coordinate change are rebuilt here from scratch; only the
//! quantities under test come from the crate.

use rickerpp::center_manifold::{analyse_flip, gtilde_partials, Index3};
use rickerpp::orbit::{cycle_points, detect_period, DEFAULT_START};
use rickerpp::Coefficients;

mod common;
use common::*;

#[test]
fn partials_match_richardson_oracle() {
    let k = Coefficients::example();
    let fr = frame();
    let tab = gtilde_partials(&k, fr.r_star).unwrap();
    let f = |v: [f64; 3]| gtilde(fr.r_star, v);
    for (idx, &analytic_i) in &tab.i {
        let Index3(l, m, n) = *idx;
        let analytic_j = tab.j(l, m, n).unwrap();
        if l + m + n == 0 {
            assert!(analytic_i.abs() < 1e-12 && analytic_j.abs() < 1e-12);
            continue;
        }
        let a = [l, m, n];
        let fd = richardson(&f, a, step_for(a));
        for (name, an, fd) in [("i", analytic_i, fd[0]), ("j", analytic_j, fd[1])] {
            if an.abs() < 1e-9 {
                assert!(fd.abs() < 1e-7, "{name}{idx}: fd {fd} should vanish");
            } else {
                assert!(rel(fd, an) <= 1e-5, "{name}{idx}: analytic {an} fd {fd}");
            }
        }
    }
}

#[test]
fn first_order_entries_equal_jacobian() {
    let k = Coefficients::example();
    let rep = analyse_flip(&k).unwrap();
    let tab = gtilde_partials(&k, rep.r_star).unwrap();
    let p = k.at(rep.r_star).unwrap();
    let j = rickerpp::jacobian(&p, rickerpp::State::new(rep.x_star, rep.y_star).unwrap()).unwrap();
    assert!((tab.i(1, 0, 0).unwrap() - j[(0, 0)]).abs() < 1e-10);
    assert!((tab.i(0, 0, 1).unwrap() - j[(0, 1)]).abs() < 1e-10);
    assert!((tab.j(1, 0, 0).unwrap() - j[(1, 0)]).abs() < 1e-10);
    assert!((tab.j(0, 0, 1).unwrap() - j[(1, 1)]).abs() < 1e-10);
    let ev = j.complex_eigenvalues();
    let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    assert!((re[0] + 1.0).abs() < 1e-8);
    assert!((re[1] + rep.det_j).abs() < 1e-8);
}

/// σ1, σ2 from finite differences of the transformed map at step scale `h`.
fn sigmas_by_fd(fr: &Frame, scale: f64) -> (f64, f64) {
    let f = |w: [f64; 3]| transformed(fr, w);
    // x̃ moves by |η1| ≈ 13 per unit of u, so the u-steps are shrunk
    let co = |a: [u8; 3]| richardson(&f, a, step_for(a) * scale * 0.1);
    let a200 = co([2, 0, 0])[0];
    let a110 = co([1, 1, 0])[0];
    let a101 = co([1, 0, 1])[0];
    let a300 = co([3, 0, 0])[0];
    let b200 = co([2, 0, 0])[1];
    let d3 = a300 + a101 * b200 / (1.0 + fr.det);
    (2.0 * a110, 2.0 * a200 * a200 + 2.0 * d3)
}

#[test]
fn coefficients_match_transformed_map() {
    let rep = analyse_flip(&Coefficients::example()).unwrap();
    let fr = frame();
    assert!((fr.r_star - rep.r_star).abs() < 1e-9);
    for (i, (a, b)) in fr.eta.iter().zip(rep.eta).enumerate() {
        assert!(rel(*a, b) < 1e-7, "eta{}: {a} vs {b}", i + 1);
    }
    let f = |w: [f64; 3]| transformed(&fr, w);
    for (idx, want) in [
        ([2, 0, 0], rep.alpha(2, 0, 0)),
        ([1, 1, 0], rep.alpha(1, 1, 0)),
        ([1, 0, 1], rep.alpha(1, 0, 1)),
        ([3, 0, 0], rep.alpha(3, 0, 0)),
    ] {
        let got = richardson(&f, idx, step_for(idx))[0];
        assert!(rel(got, want) < 1e-5, "alpha{idx:?}: {got} vs {want}");
    }
    for (idx, want) in [([2, 0, 0], rep.beta(2, 0, 0)), ([1, 1, 0], rep.beta(1, 1, 0))] {
        let got = richardson(&f, idx, step_for(idx))[1];
        assert!(rel(got, want) < 1e-5, "beta{idx:?}: {got} vs {want}");
    }
}

#[test]
fn transformed_map_has_no_constant_or_linear_part_beyond_the_diagonal() {
    let fr = frame();
    let f = |w: [f64; 3]| transformed(&fr, w);
    let zero = f([0.0; 3]);
    assert!(zero[0].abs() < 1e-8 && zero[1].abs() < 1e-8);
    let du = richardson(&f, [1, 0, 0], 1e-3);
    let dm = richardson(&f, [0, 1, 0], 1e-3);
    let dv = richardson(&f, [0, 0, 1], 1e-3);
    // L1 = -u + h.o.t., L3 = -det·v + h.o.t.
    assert!((du[0] + 1.0).abs() < 1e-8 && du[1].abs() < 1e-8);
    assert!(dm[0].abs() < 1e-8 && dm[1].abs() < 1e-8);
    assert!(dv[0].abs() < 1e-8 && (dv[1] + fr.det).abs() < 1e-8);
}

#[test]
fn sigmas_stable_under_step_halving() {
    let fr = frame();
    let (s1a, s2a) = sigmas_by_fd(&fr, 1.0);
    let (s1b, s2b) = sigmas_by_fd(&fr, 0.5);
    assert!(rel(s1a, s1b) < 1e-6, "{s1a} {s1b}");
    assert!(rel(s2a, s2b) < 1e-6, "{s2a} {s2b}");
    let rep = analyse_flip(&Coefficients::example()).unwrap();
    assert!(rel(s1b, rep.sigma1) < 1e-5);
    assert!(rel(s2b, rep.sigma2) < 1e-5);
}

#[test]
fn center_manifold_is_invariant_to_second_order() {
    let rep = analyse_flip(&Coefficients::example()).unwrap();
    let fr = frame();
    let h = |u: f64, mu: f64| rep.a1 * u * u + rep.a2 * u * mu;
    let residual = |u: f64, mu: f64| {
        let [u1, v1] = transformed(&fr, [u, mu, h(u, mu)]);
        v1 - h(u1, mu)
    };
    let eps = 1e-3;
    let mut worst: f64 = 0.0;
    for (su, sm) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, 0.0)] {
        worst = worst.max(residual(su * eps, sm * eps).abs());
    }
    // the quadratic terms cancel, leaving O(eps³)
    assert!(worst < 100.0 * eps.powi(3), "{worst}");
    let no_manifold = transformed(&fr, [eps, 0.0, 0.0])[1].abs();
    assert!(no_manifold > 10.0 * worst, "{no_manifold} {worst}");
}

#[test]
fn two_cycle_amplitude_follows_normal_form() {
    let k = Coefficients::example();
    let rep = analyse_flip(&k).unwrap();
    let fr = frame();
    let mu = 2e-3;
    let p = k.at(rep.r_star + mu).unwrap();
    let res = detect_period(&p, DEFAULT_START, 64, 1e-6).unwrap();
    assert_eq!(res.period, Some(2));
    let (xs, ys) = fixed_point(rep.r_star + mu);
    let [_, _, e3, e4] = fr.eta;
    let us: Vec<f64> = cycle_points(&p, res.representative, 2)
        .iter()
        .map(|q| -e3 * (q.x - xs) + e4 * (q.y - ys))
        .collect();
    let u2 = (us[0] * us[0] + us[1] * us[1]) / 2.0;
    let predicted = -rep.sigma1 / rep.sigma2;
    assert!(rel(u2 / mu, predicted) < 0.05, "{} vs {predicted}", u2 / mu);
    let v = rep.sigma2_variants;
    for alt in [v.taylor_form, v.minus_a1_grouping, v.shared_denominator_grouping, v.flat_manifold] {
        assert!(rel(u2 / mu, -rep.sigma1 / alt) > 0.4);
    }
}
