//! Linear stability of the steady state through the characteristic function
//!
//! ```text
//! Delta(lambda) = (lambda + eps mu_m)(lambda + eps mu_p) - eps^2 p e^{-2 lambda},   p = f'(xi*) g'(r*)
//! ```
//!
//! of the unit-delay system. Crossing frequencies live in `(0, pi/2)`; the
//! first critical delay `eps0` has a trigonometry-free closed form which is
//! cross-checked against a direct root solve.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Equilibrium;

/// Parameters of the characteristic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharParams {
    pub mu_m: f64,
    pub mu_p: f64,
    /// `f'(xi*) g'(r*)`.
    pub coupling: f64,
    pub eps: f64,
}

impl CharParams {
    pub fn new(mu_m: f64, mu_p: f64, coupling: f64, eps: f64) -> Result<Self> {
        if !(mu_m > 0.0 && mu_p > 0.0 && eps > 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "characteristic parameters need mu_m, mu_p, eps > 0 (got {mu_m}, {mu_p}, {eps})"
            )));
        }
        Ok(Self { mu_m, mu_p, coupling, eps })
    }
}

pub fn char_eval(lambda: Complex64, cp: &CharParams) -> Complex64 {
    let e = cp.eps;
    (lambda + e * cp.mu_m) * (lambda + e * cp.mu_p) - e * e * cp.coupling * (-2.0 * lambda).exp()
}

pub fn char_derivative(lambda: Complex64, cp: &CharParams) -> Complex64 {
    let e = cp.eps;
    2.0 * lambda + e * (cp.mu_m + cp.mu_p) + 2.0 * e * e * cp.coupling * (-2.0 * lambda).exp()
}

/// `beta^2 sin 2beta - eps^2 mu_m mu_p sin 2beta - eps (mu_m + mu_p) beta cos 2beta`,
/// the frequency equation multiplied through by `sin 2beta > 0`.
pub fn frequency_residual(beta: f64, cp: &CharParams) -> f64 {
    let (s, c) = (2.0 * beta).sin_cos();
    let e = cp.eps;
    beta * beta * s - e * e * cp.mu_m * cp.mu_p * s - e * (cp.mu_m + cp.mu_p) * beta * c
}

fn frequency_residual_slope(beta: f64, cp: &CharParams) -> f64 {
    let (s, c) = (2.0 * beta).sin_cos();
    let e = cp.eps;
    let k = e * e * cp.mu_m * cp.mu_p;
    let m = e * (cp.mu_m + cp.mu_p);
    2.0 * beta * s + 2.0 * beta * beta * c - 2.0 * k * c - m * c + 2.0 * m * beta * s
}

/// The unique `beta in (0, pi/2)` with
/// `beta^2 - eps^2 mu_m mu_p = eps (mu_m + mu_p) beta cot 2beta`.
pub fn solve_beta(cp: &CharParams) -> Result<f64> {
    let delta = 1e-9;
    let (mut lo, mut hi) = (delta, FRAC_PI_2 - delta);
    let (f_lo, f_hi) = (frequency_residual(lo, cp), frequency_residual(hi, cp));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoRoot(format!("residual {f_lo:e} at {lo}, {f_hi:e} at {hi}")));
    }
    while hi - lo > 4.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if frequency_residual(mid, cp) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut beta = 0.5 * (lo + hi);
    // Newton polish; kept only while it lowers the residual.
    for _ in 0..3 {
        let r = frequency_residual(beta, cp);
        let next = beta - r / frequency_residual_slope(beta, cp);
        if next.is_finite() && next > 0.0 && next < FRAC_PI_2 && frequency_residual(next, cp).abs() < r.abs() {
            beta = next;
        } else {
            break;
        }
    }
    Ok(beta)
}

/// First Hopf point of the characteristic function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub eps0: f64,
    /// Crossing frequency `beta(eps0)` in `eta` time.
    pub omega: f64,
    pub l: f64,
    pub dalpha_deps: f64,
    pub mu_m: f64,
    pub mu_p: f64,
    pub coupling: f64,
}

impl HopfPoint {
    /// `eps_k = eps0 (omega + k pi) / omega`; the corresponding crossing is at `i (omega + k pi)`.
    pub fn eps_k(&self, k: u32) -> f64 {
        self.eps0 * (self.omega + k as f64 * PI) / self.omega
    }

    pub fn eps_sequence(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        (0..).map(move |k| (k, self.eps_k(k)))
    }

    pub fn char_params(&self) -> CharParams {
        CharParams { mu_m: self.mu_m, mu_p: self.mu_p, coupling: self.coupling, eps: self.eps0 }
    }

    /// Residuals of the two defining equations
    /// `beta^2 - eps0^2 mu_m mu_p - eps0 (mu_m + mu_p) beta cot 2beta` and
    /// `(mu_m + mu_p) beta + eps0 p sin 2beta`.
    pub fn defining_residuals(&self) -> [f64; 2] {
        let (b, e) = (self.omega, self.eps0);
        let m = self.mu_m + self.mu_p;
        let (s, c) = (2.0 * b).sin_cos();
        [b * b - e * e * self.mu_m * self.mu_p - e * m * b * c / s, m * b + e * self.coupling * s]
    }
}

/// Closed-form Hopf point for coupling `p` with `mu_m mu_p < -p`.
pub fn solve_hopf(mu_m: f64, mu_p: f64, coupling: f64) -> Result<HopfPoint> {
    CharParams::new(mu_m, mu_p, coupling, 1.0)?;
    let mm = mu_m * mu_p;
    if mm >= -coupling {
        return Err(Error::HypothesisViolated { mu_product: mm, neg_coupling: -coupling });
    }
    let p2 = coupling * coupling;
    let disc = ((mu_m * mu_m - mu_p * mu_p).powi(2) + 4.0 * p2).sqrt();
    let l = (mu_m * mu_m + mu_p * mu_p + disc) / (2.0 * (p2 - mm * mm));
    let sl = l.sqrt();
    // The numerator is positive, so atan2 picks 2beta in (0, pi), the branch
    // with sin 2beta > 0 demanded by the second defining equation for p < 0.
    let beta = 0.5 * (sl * (mu_m + mu_p)).atan2(1.0 - l * mm);
    let eps0 = sl * beta;
    let mut hp = HopfPoint { eps0, omega: beta, l, dalpha_deps: 0.0, mu_m, mu_p, coupling };
    hp.dalpha_deps = transversality(eps0, beta, mu_m, mu_p);
    let [r1, r2] = hp.defining_residuals();
    let scale = beta * beta + eps0 * eps0 * mm;
    if r1.abs() > 1e-9 * scale || r2.abs() > 1e-9 * (mu_m + mu_p) * beta {
        return Err(Error::NoRoot(format!("closed-form Hopf point fails its defining equations ({r1:e}, {r2:e})")));
    }
    Ok(hp)
}

/// Finds `eps0` without the closed form: bisection in `eps` on the second
/// defining equation, with `beta(eps)` from [`solve_beta`]. Returns `(eps0, beta)`.
pub fn solve_hopf_direct(mu_m: f64, mu_p: f64, coupling: f64) -> Result<(f64, f64)> {
    CharParams::new(mu_m, mu_p, coupling, 1.0)?;
    if mu_m * mu_p >= -coupling {
        return Err(Error::HypothesisViolated { mu_product: mu_m * mu_p, neg_coupling: -coupling });
    }
    let g = |eps: f64| -> Result<(f64, f64)> {
        let beta = solve_beta(&CharParams { mu_m, mu_p, coupling, eps })?;
        Ok(((mu_m + mu_p) * beta + eps * coupling * (2.0 * beta).sin(), beta))
    };
    let mut lo = 1e-6 / (mu_m + mu_p).max(coupling.abs().sqrt());
    if g(lo)?.0 <= 0.0 {
        return Err(Error::NoRoot("second defining equation is not positive for small eps".into()));
    }
    let mut hi = 2.0 * lo;
    while g(hi)?.0 > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoRoot("no sign change of the second defining equation".into()));
        }
    }
    while hi - lo > 2.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)?.0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps0 = 0.5 * (lo + hi);
    Ok((eps0, g(eps0)?.1))
}

/// Speed `d alpha / d eps` of the crossing root's real part at `(eps*, beta)`.
pub fn transversality(eps: f64, beta: f64, mu_m: f64, mu_p: f64) -> f64 {
    let m = mu_m + mu_p;
    let num = 2.0 * beta * beta / eps * (eps * eps * (mu_m * mu_m + mu_p * mu_p) + 2.0 * beta * beta);
    let d1 = eps * m + 2.0 * eps * eps * mu_m * mu_p - 2.0 * beta * beta;
    let d2 = 2.0 * beta + 2.0 * beta * eps * m;
    num / (d1 * d1 + d2 * d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum StabilityClass {
    StableForAllEps,
    StableBelowEps0 { eps0: f64 },
    Unstable { eps0: f64 },
}

/// Classifies the steady state for delay scale `eps`.
pub fn classify_stability(eq: &Equilibrium, mu_m: f64, mu_p: f64, eps: f64) -> Result<StabilityClass> {
    CharParams::new(mu_m, mu_p, eq.coupling(), eps)?;
    let p = eq.coupling();
    if p > 0.0 {
        return Err(Error::UnhandledRegime { coupling: p });
    }
    if mu_m * mu_p >= -p {
        return Ok(StabilityClass::StableForAllEps);
    }
    let hp = solve_hopf(mu_m, mu_p, p)?;
    Ok(if eps < hp.eps0 { StabilityClass::StableBelowEps0 { eps0: hp.eps0 } } else { StabilityClass::Unstable { eps0: hp.eps0 } })
}

/// Newton iteration for a characteristic root starting at `guess`.
pub fn track_root(cp: &CharParams, guess: Complex64) -> Result<Complex64> {
    let mut z = guess;
    for _ in 0..100 {
        let step = char_eval(z, cp) / char_derivative(z, cp);
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() {
            break;
        }
        if step.norm() <= 1e-15 * z.norm().max(1.0) {
            return Ok(z);
        }
    }
    Err(Error::NoRoot(format!("Newton on the characteristic function diverged from {guess}")))
}

/// Number of characteristic roots inside the rectangle
/// `re_range.0 < Re < re_range.1`, `|Im| < im_half`, from the winding of
/// `char_eval` along its boundary. The boundary is sampled with 4096 points
/// and refined by doubling until two successive counts agree.
pub fn count_roots_in_rectangle(cp: &CharParams, re_range: (f64, f64), im_half: f64) -> Result<i64> {
    let corners = [
        Complex64::new(re_range.0, -im_half),
        Complex64::new(re_range.1, -im_half),
        Complex64::new(re_range.1, im_half),
        Complex64::new(re_range.0, im_half),
    ];
    let winding = |n: usize| -> Option<i64> {
        let per_side = n / 4;
        let mut total = 0.0;
        let mut prev = char_eval(corners[0], cp);
        for side in 0..4 {
            let (a, b) = (corners[side], corners[(side + 1) % 4]);
            for k in 1..=per_side {
                let z = a + (b - a) * (k as f64 / per_side as f64);
                let v = char_eval(z, cp);
                if v.norm() == 0.0 {
                    return None;
                }
                let step = (v / prev).arg();
                if step.abs() > FRAC_PI_2 {
                    return None;
                }
                total += step;
                prev = v;
            }
        }
        Some((total / (2.0 * PI)).round() as i64)
    };
    let mut n = 4096;
    let mut last: Option<i64> = None;
    while n <= 1 << 22 {
        let count = winding(n);
        if let (Some(a), Some(b)) = (last, count) {
            if a == b {
                return Ok(a);
            }
        }
        last = count;
        n *= 2;
    }
    Err(Error::NoRoot("argument principle count did not stabilise (root on contour?)".into()))
}
