//! Model parameters, feedback nonlinearities, equilibria and the right-hand
//! sides of the original, transformed and constant-delay systems.
//!
//! The original system is
//!
//! ```text
//! x'(t) = -mu_m x(t) + f(y(t - tau))
//! y'(t) = -mu_p y(t) + g(x(t - tau))
//! tau(t) = eps + c (x(t) - x(t - tau(t)))
//! ```
//!
//! and the time change `eta = int_0^t (1 - c x'(s)) / eps ds` turns it into a
//! system with unit delay in `eta`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Value of a scalar map together with its first three derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet {
    pub fn get(&self, order: usize) -> f64 {
        match order {
            0 => self.value,
            1 => self.d1,
            2 => self.d2,
            3 => self.d3,
            _ => panic!("jet order {order} out of range"),
        }
    }

    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite() && self.d3.is_finite()
    }
}

/// A scalar feedback map with derivatives through third order.
pub trait ScalarMap: fmt::Debug + Send + Sync {
    fn jet(&self, s: f64) -> Jet;

    fn value(&self, s: f64) -> f64 {
        self.jet(s).value
    }

    /// Supremum of the map over the positive half-line, when known.
    fn upper_bound(&self) -> Option<f64> {
        None
    }
}

/// Transcriptional repression `alpha_m / (1 + (y / y_bar)^h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillRepressor {
    pub alpha_m: f64,
    pub y_bar: f64,
    pub hill: f64,
}

impl HillRepressor {
    pub fn new(alpha_m: f64, y_bar: f64, hill: f64) -> Result<Self> {
        if !(alpha_m.is_finite() && alpha_m > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha_m must be positive, got {alpha_m}")));
        }
        if !(y_bar.is_finite() && y_bar > 0.0) {
            return Err(Error::InvalidParameter(format!("y_bar must be positive, got {y_bar}")));
        }
        if !(hill.is_finite() && hill > 0.0) {
            return Err(Error::InvalidParameter(format!("Hill exponent must be positive, got {hill}")));
        }
        Ok(Self { alpha_m, y_bar, hill })
    }

    // Integer exponents go through powi so negative concentrations stay defined.
    fn pow(&self, q: f64, e: f64) -> f64 {
        if self.hill.fract() == 0.0 && self.hill.abs() < 1.0e6 {
            q.powi(e as i32)
        } else {
            q.powf(e)
        }
    }
}

impl ScalarMap for HillRepressor {
    fn jet(&self, y: f64) -> Jet {
        let (a, yb, h) = (self.alpha_m, self.y_bar, self.hill);
        let q = y / yb;
        // w = 1 + q^h and its derivatives in y
        let w = 1.0 + self.pow(q, h);
        let w1 = h / yb * self.pow(q, h - 1.0);
        let w2 = h * (h - 1.0) / (yb * yb) * self.pow(q, h - 2.0);
        let w3 = h * (h - 1.0) * (h - 2.0) / (yb * yb * yb) * self.pow(q, h - 3.0);
        let (w_2, w_3, w_4) = (w * w, w * w * w, w * w * w * w);
        Jet {
            value: a / w,
            d1: -a * w1 / w_2,
            d2: a * (2.0 * w1 * w1 / w_3 - w2 / w_2),
            d3: a * (-6.0 * w1 * w1 * w1 / w_4 + 6.0 * w1 * w2 / w_3 - w3 / w_2),
        }
    }

    fn upper_bound(&self) -> Option<f64> {
        Some(self.alpha_m)
    }
}

/// Polynomial map with coefficients in ascending powers. An empty coefficient
/// list is the zero map.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn linear(slope: f64) -> Self {
        Self { coeffs: vec![0.0, slope] }
    }
}

impl ScalarMap for Polynomial {
    fn jet(&self, s: f64) -> Jet {
        // Horner on the value and the first three derivatives at once.
        let mut j = [0.0_f64; 4];
        for &a in self.coeffs.iter().rev() {
            j[3] = j[3] * s + 3.0 * j[2];
            j[2] = j[2] * s + 2.0 * j[1];
            j[1] = j[1] * s + j[0];
            j[0] = j[0] * s + a;
        }
        Jet { value: j[0], d1: j[1], d2: j[2], d3: j[3] }
    }
}

/// User-supplied map with explicit derivative callback.
#[derive(Clone)]
pub struct FnMap {
    name: String,
    jet: Arc<dyn Fn(f64) -> Jet + Send + Sync>,
}

impl FnMap {
    pub fn new(name: impl Into<String>, jet: impl Fn(f64) -> Jet + Send + Sync + 'static) -> Self {
        Self { name: name.into(), jet: Arc::new(jet) }
    }
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnMap").field("name", &self.name).finish()
    }
}

impl ScalarMap for FnMap {
    fn jet(&self, s: f64) -> Jet {
        (self.jet)(s)
    }
}

/// The pair of feedback maps: `f` acts on the x-equation through the delayed
/// y, `g` on the y-equation through the delayed x.
#[derive(Debug, Clone)]
pub struct NonlinearitySpec {
    pub f: Arc<dyn ScalarMap>,
    pub g: Arc<dyn ScalarMap>,
}

/// One finite-difference comparison made by [`NonlinearitySpec::check_derivatives`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSample {
    pub map: char,
    pub order: usize,
    pub at: f64,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    pub pass: bool,
}

impl NonlinearitySpec {
    pub fn new(f: impl ScalarMap + 'static, g: impl ScalarMap + 'static) -> Self {
        Self { f: Arc::new(f), g: Arc::new(g) }
    }

    /// Hill repression on x, linear translation `alpha_p x` on y.
    pub fn hes1(alpha_m: f64, alpha_p: f64, y_bar: f64, hill: f64) -> Result<Self> {
        if !(alpha_p.is_finite() && alpha_p > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha_p must be positive, got {alpha_p}")));
        }
        Ok(Self::new(HillRepressor::new(alpha_m, y_bar, hill)?, Polynomial::linear(alpha_p)))
    }

    pub fn zero() -> Self {
        Self::new(Polynomial::new(vec![]), Polynomial::new(vec![]))
    }

    /// Compares every derivative callback against Richardson-extrapolated
    /// central differences of the value map. `f_points` are sampled for `f`,
    /// `g_points` for `g`.
    pub fn check_derivatives(&self, f_points: &[f64], g_points: &[f64], rtol: f64) -> Vec<DerivativeSample> {
        let mut out = Vec::new();
        for (name, map, points) in [('f', &self.f, f_points), ('g', &self.g, g_points)] {
            for &s in points {
                let jet = map.jet(s);
                for order in 1..=3 {
                    let (numeric, err) = central_derivative(|z| map.value(z), s, order);
                    let analytic = jet.get(order);
                    let diff = (numeric - analytic).abs();
                    let rel_error = if analytic != 0.0 { diff / analytic.abs() } else { diff };
                    let pass = jet.is_finite() && diff <= rtol * analytic.abs() + 10.0 * err;
                    out.push(DerivativeSample { map: name, order, at: s, analytic, numeric, rel_error, pass });
                }
            }
        }
        out
    }
}

/// Ridders-style extrapolation of the order-`order` central difference.
/// Returns the estimate and its error estimate.
pub(crate) fn central_derivative(f: impl Fn(f64) -> f64, s: f64, order: usize) -> (f64, f64) {
    const LEVELS: usize = 14;
    let stencil = |h: f64| match order {
        1 => (f(s + h) - f(s - h)) / (2.0 * h),
        2 => (f(s + h) - 2.0 * f(s) + f(s - h)) / (h * h),
        3 => (f(s + 2.0 * h) - 2.0 * f(s + h) + 2.0 * f(s - h) - f(s - 2.0 * h)) / (2.0 * h * h * h),
        _ => panic!("unsupported difference order {order}"),
    };
    let mut h = 0.1 * s.abs().max(1.0);
    let mut table = vec![vec![0.0; LEVELS]; LEVELS];
    let mut best = (stencil(h), f64::INFINITY);
    table[0][0] = best.0;
    for i in 1..LEVELS {
        h *= 0.5;
        table[i][0] = stencil(h);
        let mut fac = 1.0;
        for j in 1..=i {
            fac *= 4.0;
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (fac - 1.0);
            let err = (table[i][j] - table[i][j - 1]).abs().max((table[i][j] - table[i - 1][j - 1]).abs());
            if err <= best.1 {
                best = (table[i][j], err);
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * best.1 {
            break;
        }
    }
    best
}

/// Rates, delay constants and feedback maps.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub mu_m: f64,
    pub mu_p: f64,
    /// State-dependence coefficient; `0` gives the constant-delay system.
    pub c: f64,
    /// Basal delay.
    pub eps: f64,
    pub nonlinearity: NonlinearitySpec,
}

impl ModelParams {
    pub fn new(mu_m: f64, mu_p: f64, c: f64, eps: f64, nonlinearity: NonlinearitySpec) -> Result<Self> {
        let p = Self { mu_m, mu_p, c, eps, nonlinearity };
        p.validate()?;
        Ok(p)
    }

    /// Hes1 rates and nonlinearities used throughout the reproduction runs:
    /// `mu_m = 0.03, mu_p = 0.04, alpha_m = 35, alpha_p = 10, y_bar = 1200, h = 5`.
    pub fn hes1_reference(c: f64, eps: f64) -> Result<Self> {
        Self::new(0.03, 0.04, c, eps, NonlinearitySpec::hes1(35.0, 10.0, 1200.0, 5.0)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("mu_m", self.mu_m)?;
        positive("mu_p", self.mu_p)?;
        positive("eps", self.eps)?;
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::InvalidParameter(format!("c must be non-negative, got {}", self.c)));
        }
        Ok(())
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.mu_m, self.mu_p, self.c, eps, self.nonlinearity.clone())
    }

    pub fn with_c(&self, c: f64) -> Result<Self> {
        Self::new(self.mu_m, self.mu_p, c, self.eps, self.nonlinearity.clone())
    }

    pub fn f(&self, y: f64) -> f64 {
        self.nonlinearity.f.value(y)
    }

    pub fn g(&self, x: f64) -> f64 {
        self.nonlinearity.g.value(x)
    }

    /// Bound on `x'` along solutions: `1/c` from the delay condition and the
    /// supremum of `f` when it is known.
    pub fn slope_bound(&self) -> f64 {
        let b2 = if self.c > 0.0 { 1.0 / self.c } else { f64::INFINITY };
        match self.nonlinearity.f.upper_bound() {
            Some(fmax) => b2.min(fmax),
            None => b2,
        }
    }
}

/// Steady state `(r*, xi*)` with cached derivatives of `f` at `xi*` and `g` at `r*`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Equilibrium {
    pub r_star: f64,
    pub xi_star: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

impl Equilibrium {
    pub fn at(params: &ModelParams, r_star: f64, xi_star: f64) -> Self {
        let fj = params.nonlinearity.f.jet(xi_star);
        let gj = params.nonlinearity.g.jet(r_star);
        Self { r_star, xi_star, f1: fj.d1, f2: fj.d2, f3: fj.d3, g1: gj.d1, g2: gj.d2, g3: gj.d3 }
    }

    /// `f'(xi*) g'(r*)`.
    pub fn coupling(&self) -> f64 {
        self.f1 * self.g1
    }

    /// Absolute residuals of the two steady-state equations.
    pub fn residuals(&self, params: &ModelParams) -> [f64; 2] {
        [
            (-params.mu_m * self.r_star + params.f(self.xi_star)).abs(),
            (-params.mu_p * self.xi_star + params.g(self.r_star)).abs(),
        ]
    }

    pub fn satisfies_tolerance(&self, params: &ModelParams) -> bool {
        let [rx, ry] = self.residuals(params);
        rx <= 1e-10 * (params.mu_m * self.r_star).abs().max(1.0) && ry <= 1e-10 * (params.mu_p * self.xi_star).abs().max(1.0)
    }
}

// Scalar reduction: xi = g(r)/mu_p substituted into the x-equation.
fn reduced(params: &ModelParams, r: f64) -> (f64, f64) {
    let gj = params.nonlinearity.g.jet(r);
    let xi = gj.value / params.mu_p;
    let fj = params.nonlinearity.f.jet(xi);
    (-params.mu_m * r + fj.value, -params.mu_m + fj.d1 * gj.d1 / params.mu_p)
}

const EQ_MAX_ITER: usize = 500;

fn refine_in_bracket(params: &ModelParams, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (mut h_lo, _) = reduced(params, lo);
    let (h_hi, _) = reduced(params, hi);
    if h_lo == 0.0 {
        return Ok(lo);
    }
    if h_hi == 0.0 {
        return Ok(hi);
    }
    if h_lo.signum() == h_hi.signum() {
        return Err(Error::NoBracket(format!("reduced equilibrium map has equal signs at {lo} and {hi}")));
    }
    let mut r = 0.5 * (lo + hi);
    let mut last = f64::INFINITY;
    for _ in 0..EQ_MAX_ITER {
        let (h, dh) = reduced(params, r);
        last = h.abs();
        let scale = (params.mu_m * r).abs().max(1.0);
        if h == 0.0 || (h.abs() <= 1e-14 * scale) {
            return Ok(r);
        }
        if h.signum() == h_lo.signum() {
            lo = r;
            h_lo = h;
        } else {
            hi = r;
        }
        if (hi - lo).abs() <= 4.0 * f64::EPSILON * r.abs().max(f64::MIN_POSITIVE) {
            return Ok(r);
        }
        // Newton step when it stays inside the bracket, bisection otherwise.
        let newton = r - h / dh;
        let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
        r = if dh != 0.0 && newton.is_finite() && newton > a && newton < b { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::NoConvergence { residual: last, iterations: EQ_MAX_ITER })
}

/// Finds a steady state by scalar reduction and bracketed Newton/bisection.
///
/// With `positive` set the bracket starts at `r = 0` and grows to the right,
/// and a root that is not strictly positive is rejected. Otherwise the search
/// expands symmetrically around the seed (default origin).
pub fn find_equilibrium(params: &ModelParams, seed: Option<[f64; 2]>, positive: bool) -> Result<Equilibrium> {
    params.validate()?;
    if let Some(s) = seed {
        if !(s[0].is_finite() && s[1].is_finite()) {
            return Err(Error::InvalidParameter("equilibrium seed must be finite".into()));
        }
    }
    let root = if positive {
        let (h0, _) = reduced(params, 0.0);
        if h0 == 0.0 {
            0.0
        } else {
            let mut hi = seed.map(|s| s[0]).filter(|r| *r > 0.0).unwrap_or(1.0);
            let mut found = false;
            for _ in 0..200 {
                let (h, _) = reduced(params, hi);
                if h.is_finite() && h.signum() != h0.signum() {
                    found = true;
                    break;
                }
                hi *= 2.0;
            }
            if !found {
                return Err(Error::NoBracket("no sign change of the reduced map on the positive half-line".into()));
            }
            refine_in_bracket(params, 0.0, hi)?
        }
    } else {
        let r0 = seed.map(|s| s[0]).unwrap_or(0.0);
        let (h0, _) = reduced(params, r0);
        if h0 == 0.0 {
            r0
        } else {
            let mut w = 1e-3 * r0.abs().max(1.0);
            let mut bracket = None;
            for _ in 0..200 {
                for other in [r0 - w, r0 + w] {
                    let (h, _) = reduced(params, other);
                    if h.is_finite() && h.signum() != h0.signum() {
                        bracket = Some(other);
                        break;
                    }
                }
                if bracket.is_some() {
                    break;
                }
                w *= 2.0;
            }
            let other = bracket.ok_or_else(|| Error::NoBracket(format!("no sign change of the reduced map around r = {r0}")))?;
            refine_in_bracket(params, r0.min(other), r0.max(other))?
        }
    };
    let xi = params.g(root) / params.mu_p;
    let eq = Equilibrium::at(params, root, xi);
    if positive && !(eq.r_star > 0.0 && eq.xi_star > 0.0) {
        return Err(Error::NonPositive { r: eq.r_star, xi: eq.xi_star });
    }
    if !eq.satisfies_tolerance(params) {
        let [a, b] = eq.residuals(params);
        return Err(Error::NoConvergence { residual: a.max(b), iterations: EQ_MAX_ITER });
    }
    Ok(eq)
}

/// All steady states whose `r` component is bracketed by consecutive points
/// of `grid` (sorted ascending).
pub fn scan_equilibria(params: &ModelParams, grid: &[f64]) -> Result<Vec<Equilibrium>> {
    params.validate()?;
    let mut out = Vec::new();
    let values: Vec<f64> = grid.iter().map(|&r| reduced(params, r).0).collect();
    for i in 0..grid.len() {
        if values[i] == 0.0 {
            out.push(grid[i]);
        } else if i + 1 < grid.len() && values[i + 1] != 0.0 && values[i].is_finite() && values[i + 1].is_finite() && values[i].signum() != values[i + 1].signum() {
            out.push(refine_in_bracket(params, grid[i], grid[i + 1])?);
        }
    }
    Ok(out.into_iter().map(|r| Equilibrium::at(params, r, params.g(r) / params.mu_p)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginalRhs {
    pub dx: f64,
    pub dy: f64,
    /// `tau - eps - c (x - x_tau)`.
    pub threshold_residual: f64,
}

/// Right-hand side of the state-dependent system at current state `now`,
/// delayed state `delayed = (x(t - tau), y(t - tau))` and delay `tau`.
pub fn rhs_original(now: [f64; 2], delayed: [f64; 2], tau: f64, params: &ModelParams) -> OriginalRhs {
    let [dx, dy] = rhs_constant_delay(now, delayed, params);
    OriginalRhs { dx, dy, threshold_residual: tau - params.eps - params.c * (now[0] - delayed[0]) }
}

/// Right-hand side of the constant-delay system (`c = 0`) in original time.
pub fn rhs_constant_delay(now: [f64; 2], delayed: [f64; 2], params: &ModelParams) -> [f64; 2] {
    [-params.mu_m * now[0] + params.f(delayed[1]), -params.mu_p * now[1] + params.g(delayed[0])]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedRhs {
    pub dr: f64,
    pub dxi: f64,
    /// Delay in original time, `eps + c (r(eta) - r(eta - 1))`.
    pub k: f64,
}

/// Right-hand side of the unit-delay system in `eta`; `delayed` is
/// `(r(eta - 1), xi(eta - 1))`.
pub fn rhs_transformed(now: [f64; 2], delayed: [f64; 2], params: &ModelParams) -> Result<TransformedRhs> {
    let [nx, ny] = rhs_constant_delay(now, delayed, params);
    let denominator = 1.0 - params.c * nx;
    if !(denominator > 0.0) {
        return Err(Error::DenominatorBreach { denominator });
    }
    Ok(TransformedRhs {
        dr: params.eps * nx / denominator,
        dxi: params.eps * ny / denominator,
        k: params.eps + params.c * (now[0] - delayed[0]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hes1(c: f64) -> ModelParams {
        ModelParams::hes1_reference(c, 6.86216245).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn hes1_equilibrium_matches_reference() {
        let p = hes1(0.01);
        let eq = find_equilibrium(&p, None, true).unwrap();
        assert!(rel(eq.r_star, 11.97050076) < 1e-8, "{}", eq.r_star);
        assert!(rel(eq.xi_star, 2992.625189) < 1e-8, "{}", eq.xi_star);
        assert!(rel(eq.f1, -0.00059384374) < 1e-8, "{}", eq.f1);
        assert_eq!(eq.g1, 10.0);
        assert_eq!(eq.g2, 0.0);
        assert!(eq.satisfies_tolerance(&p));
    }

    #[test]
    fn zero_feedback_has_origin_equilibrium() {
        let p = ModelParams::new(0.7, 1.3, 0.0, 1.0, NonlinearitySpec::zero()).unwrap();
        let eq = find_equilibrium(&p, None, false).unwrap();
        assert_eq!((eq.r_star, eq.xi_star), (0.0, 0.0));
        assert!(matches!(find_equilibrium(&p, None, true), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn hill_is_decreasing_and_bounded() {
        let hill = HillRepressor::new(35.0, 1200.0, 5.0).unwrap();
        let mut prev = hill.value(0.0);
        assert_eq!(prev, 35.0);
        for i in 1..200 {
            let v = hill.value(i as f64 * 50.0);
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn hill_and_polynomial_derivatives_pass_self_check() {
        let spec = NonlinearitySpec::hes1(35.0, 10.0, 1200.0, 5.0).unwrap();
        let f_points: Vec<f64> = (1..=12).map(|i| 300.0 * i as f64).collect();
        let g_points = [0.5, 5.0, 11.97, 40.0];
        for s in spec.check_derivatives(&f_points, &g_points, 1e-6) {
            assert!(s.pass, "{s:?}");
        }
        let poly = NonlinearitySpec::new(Polynomial::new(vec![1.0, -2.0, 0.5, 0.25]), Polynomial::new(vec![0.0, 0.0, 3.0]));
        for s in poly.check_derivatives(&[-2.0, 0.3, 4.0], &[-1.0, 2.0], 1e-6) {
            assert!(s.pass, "{s:?}");
        }
    }

    #[test]
    fn wrong_derivative_is_caught() {
        let bad = FnMap::new("sin-with-bad-d3", |s: f64| Jet { value: s.sin(), d1: s.cos(), d2: -s.sin(), d3: s.cos() });
        let spec = NonlinearitySpec::new(bad, Polynomial::linear(1.0));
        let report = spec.check_derivatives(&[0.4], &[], 1e-6);
        assert!(report[0].pass && report[1].pass);
        assert!(!report[2].pass);
    }

    #[test]
    fn rhs_original_at_zero_state() {
        let p = hes1(0.01);
        let out = rhs_original([0.0, 0.0], [0.0, 0.0], p.eps, &p);
        assert_eq!(out.dx, 35.0);
        assert_eq!(out.dy, 0.0);
        assert_eq!(out.threshold_residual, 0.0);
    }

    #[test]
    fn rhs_vanish_at_equilibrium() {
        let p = hes1(0.02);
        let eq = find_equilibrium(&p, None, true).unwrap();
        let s = [eq.r_star, eq.xi_star];
        let o = rhs_original(s, s, p.eps, &p);
        assert!(o.dx.abs() < 1e-12 && o.dy.abs() < 1e-9 && o.threshold_residual == 0.0);
        let t = rhs_transformed(s, s, &p).unwrap();
        assert!(t.dr.abs() < 1e-11 && t.dxi.abs() < 1e-8);
        assert_eq!(t.k, p.eps);
    }

    #[test]
    fn constant_delay_residual_ignores_state() {
        let p = hes1(0.0);
        let o = rhs_original([3.0, 100.0], [7.0, 50.0], 2.5, &p);
        assert_eq!(o.threshold_residual, 2.5 - p.eps);
    }

    #[test]
    fn transformed_with_zero_c_is_scaled_constant_delay() {
        let p = hes1(0.0);
        let now = [10.0, 2500.0];
        let del = [13.0, 3100.0];
        let t = rhs_transformed(now, del, &p).unwrap();
        let [a, b] = rhs_constant_delay(now, del, &p);
        assert!((t.dr - p.eps * a).abs() <= 1e-15 * (p.eps * a).abs());
        assert!((t.dxi - p.eps * b).abs() <= 1e-15 * (p.eps * b).abs());
        assert_eq!(t.k, p.eps);
    }

    #[test]
    fn transformed_reports_denominator_breach() {
        let p = hes1(0.1);
        // -mu_m r + f(xi_1) = 35 at r = 0, xi_1 = 0 so 1 - 0.1 * 35 < 0
        assert!(matches!(rhs_transformed([0.0, 0.0], [0.0, 0.0], &p), Err(Error::DenominatorBreach { .. })));
    }

    #[test]
    fn scan_finds_all_cubic_equilibria() {
        // f(y) = y^3 - y with g(x) = x and unit rates: r solves r^3 - 2r = 0
        let p = ModelParams::new(1.0, 1.0, 0.0, 1.0, NonlinearitySpec::new(Polynomial::new(vec![0.0, -1.0, 0.0, 1.0]), Polynomial::linear(1.0))).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| -2.05 + 0.1 * i as f64).collect();
        let eqs = scan_equilibria(&p, &grid).unwrap();
        let roots: Vec<f64> = eqs.iter().map(|e| e.r_star).collect();
        assert_eq!(roots.len(), 3);
        for (r, want) in roots.iter().zip([-(2f64.sqrt()), 0.0, 2f64.sqrt()]) {
            assert!((r - want).abs() < 1e-12);
        }
    }
}
