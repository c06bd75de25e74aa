#![allow(dead_code)]
//! Oracles shared by the integration and acceptance tests.

use std::f64::consts::PI;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use sddhopf::model::Equilibrium;

/// Feedback jets with `f' < 0 < g'` and a Hopf point.
pub fn generic_point() -> impl Strategy<Value = (f64, f64, Equilibrium, f64)> {
    (0.01f64..1.0, 0.01f64..1.0, -3.0f64..-0.05, 0.05f64..3.0, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, 0.0f64..0.5)
        .prop_filter("needs a Hopf point", |(mm, mp, f1, g1, ..)| mm * mp < -f1 * g1 * 0.99)
        .prop_map(|(mu_m, mu_p, f1, g1, f2, f3, g2, g3, c)| (mu_m, mu_p, Equilibrium { r_star: 1.0, xi_star: 1.0, f1, f2, f3, g1, g2, g3 }, c))
}

pub fn runner() -> TestRunner {
    TestRunner::new_with_rng(Config { cases: 100, failure_persistence: None, ..Config::default() }, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

/// Classical RK4 for the constant-delay system with its own Hill map. The
/// delay is a whole number of steps; half-step delayed values come from cubic
/// Hermite interpolation of stored nodes, or from the initial data.
pub fn rk4_constant_delay(eps: f64, base: [f64; 2], bump: [f64; 2], steps_per_delay: usize, t_end: f64) -> (f64, Vec<[f64; 2]>) {
    let f = |y: f64| 35.0 / (1.0 + (y / 1200.0).powi(5));
    let g = |x: f64| 10.0 * x;
    let rhs = |s: [f64; 2], d: [f64; 2]| [-0.03 * s[0] + f(d[1]), -0.04 * s[1] + g(d[0])];
    let initial = |t: f64| -> ([f64; 2], [f64; 2]) {
        if t < -eps || t > 0.0 {
            return (base, [0.0; 2]);
        }
        let ph = PI * t / eps;
        let (sq, sl) = (ph.sin().powi(2), PI / eps * (2.0 * ph).sin());
        ([base[0] + bump[0] * sq, base[1] + bump[1] * sq], [bump[0] * sl, bump[1] * sl])
    };
    let h = eps / steps_per_delay as f64;
    let n = (t_end / h).round() as usize;
    let mut ys: Vec<[f64; 2]> = vec![initial(0.0).0];
    let mut ds: Vec<[f64; 2]> = Vec::new();
    let lagged = |ys: &Vec<[f64; 2]>, ds: &Vec<[f64; 2]>, i: usize, frac: f64| -> [f64; 2] {
        // value at (i + frac) h - eps
        let j = i as i64 - steps_per_delay as i64;
        if j < 0 {
            return initial((j as f64 + frac) * h).0;
        }
        let j = j as usize;
        if frac == 0.0 {
            return ys[j];
        }
        let (y0, y1, d0, d1) = (ys[j], ys[j + 1], ds[j], ds[j + 1]);
        let th = frac;
        let h00 = 2.0 * th.powi(3) - 3.0 * th * th + 1.0;
        let h10 = th.powi(3) - 2.0 * th * th + th;
        let h01 = -2.0 * th.powi(3) + 3.0 * th * th;
        let h11 = th.powi(3) - th * th;
        std::array::from_fn(|k| h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k])
    };
    for i in 0..n {
        let y = ys[i];
        let k1 = rhs(y, lagged(&ys, &ds, i, 0.0));
        ds.push(k1);
        let mid = lagged(&ys, &ds, i, 0.5);
        let k2 = rhs(std::array::from_fn(|k| y[k] + 0.5 * h * k1[k]), mid);
        let k3 = rhs(std::array::from_fn(|k| y[k] + 0.5 * h * k2[k]), mid);
        let end = lagged(&ys, &ds, i + 1, 0.0);
        let y4 = std::array::from_fn(|k| y[k] + h * k3[k]);
        let k4 = rhs(y4, end);
        ys.push(std::array::from_fn(|k| y[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])));
    }
    (h, ys)
}
