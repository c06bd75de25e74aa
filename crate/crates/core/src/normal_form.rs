//! Hopf normal form `A' = kappa1 delta A + kappa3 A^2 conj(A)` of the
//! unit-delay system at `eps = eps0`, from a multiple-time-scales expansion.
//!
//! The first-order solution is `A theta e^{i w T0} + cc`, the second-order
//! particular solution `a A^2 e^{2iwT0} + b A conj(A) + cc`, and the amplitude
//! equation is the solvability condition of the third-order problem against
//! the adjoint vector `d`.
//!
//! Sign convention: the linearisation is `x' = eps M x + eps N x(eta - 1)` with
//! `M = diag(-mu_m, -mu_p)` and `N = [[0, f'], [g', 0]]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Equilibrium;
use crate::stability::{char_eval, CharParams, HopfPoint};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

fn dot_conj(d: &[Complex64; 2], v: &[Complex64; 2]) -> Complex64 {
    d[0].conj() * v[0] + d[1].conj() * v[1]
}

fn ensure_same_point(eq: &Equilibrium, hp: &HopfPoint) -> Result<()> {
    let p = eq.coupling();
    if (p - hp.coupling).abs() > 1e-9 * p.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter(format!("Hopf point coupling {} does not match equilibrium coupling {p}", hp.coupling)));
    }
    Ok(())
}

/// Critical eigenvector `theta` (with `theta_1 = 1`) and adjoint `d`
/// normalised by `conj(d)^T theta = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalFrame {
    pub omega: f64,
    pub eps0: f64,
    pub theta: [Complex64; 2],
    pub d: [Complex64; 2],
}

impl CriticalFrame {
    /// `|(i w I - eps0 M - eps0 N e^{-iw}) theta|`.
    pub fn eigen_residual(&self, eq: &Equilibrium, hp: &HopfPoint) -> f64 {
        let (w, e) = (self.omega, self.eps0);
        let em = cis(-w);
        let t = self.theta;
        let r0 = (I * w + e * hp.mu_m) * t[0] - e * eq.f1 * em * t[1];
        let r1 = -e * eq.g1 * em * t[0] + (I * w + e * hp.mu_p) * t[1];
        (r0.norm_sqr() + r1.norm_sqr()).sqrt()
    }

    /// `|(-i w I - eps0 M^T - eps0 N^T e^{iw}) d|`.
    pub fn adjoint_residual(&self, eq: &Equilibrium, hp: &HopfPoint) -> f64 {
        let (w, e) = (self.omega, self.eps0);
        let ep = cis(w);
        let d = self.d;
        let r0 = (-I * w + e * hp.mu_m) * d[0] - e * eq.g1 * ep * d[1];
        let r1 = -e * eq.f1 * ep * d[0] + (-I * w + e * hp.mu_p) * d[1];
        (r0.norm_sqr() + r1.norm_sqr()).sqrt()
    }

    pub fn normalization_error(&self) -> f64 {
        (dot_conj(&self.d, &self.theta) - 1.0).norm()
    }
}

pub fn critical_frame(eq: &Equilibrium, hp: &HopfPoint) -> Result<CriticalFrame> {
    ensure_same_point(eq, hp)?;
    if eq.f1 == 0.0 {
        return Err(Error::SingularFrame);
    }
    let (w, e) = (hp.omega, hp.eps0);
    let theta2 = cis(w) * (I * w + e * hp.mu_m) / (e * eq.f1);
    let scale = 1.0 / (-2.0 * I * w + e * (hp.mu_m + hp.mu_p));
    let d = [(-I * w + e * hp.mu_p) * scale, e * cis(w) * eq.f1 * scale];
    let frame = CriticalFrame { omega: w, eps0: e, theta: [Complex64::new(1.0, 0.0), theta2], d };
    let tol = 1e-9 * (1.0 + theta2.norm());
    if frame.eigen_residual(eq, hp) > tol || frame.adjoint_residual(eq, hp) > tol * (1.0 + e * eq.g1.abs()) {
        return Err(Error::SingularFrame);
    }
    Ok(frame)
}

/// Scalars shared by the second- and third-order computations.
#[derive(Debug, Clone, Copy)]
struct Ctx {
    mu_m: f64,
    mu_p: f64,
    e: f64,
    w: f64,
    c: f64,
    f1: f64,
    f2: f64,
    f3: f64,
    g1: f64,
    g2: f64,
    g3: f64,
    t: Complex64,
    tb: Complex64,
}

impl Ctx {
    fn new(eq: &Equilibrium, hp: &HopfPoint, frame: &CriticalFrame, c: f64) -> Self {
        let t = frame.theta[1];
        Ctx {
            mu_m: hp.mu_m,
            mu_p: hp.mu_p,
            e: hp.eps0,
            w: hp.omega,
            c,
            f1: eq.f1,
            f2: eq.f2,
            f3: eq.f3,
            g1: eq.g1,
            g2: eq.g2,
            g3: eq.g3,
            t,
            tb: t.conj(),
        }
    }

    /// `A^2 e^{2iwT0}` forcing of the two rows, without the `eps0` factor.
    fn second_harmonic_forcing(&self) -> [Complex64; 2] {
        let Ctx { mu_m, mu_p, c, f1, f2, g1, g2, t, w, .. } = *self;
        let (em, e2m) = (cis(-w), cis(-2.0 * w));
        let p = c * mu_m * mu_m - 2.0 * c * mu_m * f1 * t * em + 0.5 * (f2 + 2.0 * c * f1 * f1) * t * t * e2m;
        let q = -c * mu_p * f1 * t * t * em + c * mu_m * mu_p * t + 0.5 * g2 * e2m + c * f1 * g1 * t * e2m - c * mu_m * g1 * em;
        [p, q]
    }

    /// Right-hand side of the `A conj(A)` equations, including the `eps0` factor.
    fn mean_forcing(&self) -> [Complex64; 2] {
        let Ctx { mu_m, mu_p, e, c, f1, f2, g1, g2, t, tb, w, .. } = *self;
        let (ep, em) = (cis(w), cis(-w));
        let r1 = 2.0 * e * c * mu_m * mu_m - 2.0 * e * c * mu_m * f1 * (tb * ep + t * em) + e * (f2 + 2.0 * c * f1 * f1) * t * tb;
        let r2 = -e * c * mu_p * f1 * t * tb * (ep + em) + e * c * mu_m * mu_p * (t + tb) + e * g2 + e * c * f1 * g1 * (t + tb)
            - e * c * mu_m * g1 * (ep + em);
        [r1, r2]
    }
}

/// Second-order coefficients. `a`, `b` come from the 2x2 linear solves; the
/// closed-form values are kept alongside for the cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoeffs {
    pub c: f64,
    pub a: [Complex64; 2],
    pub b: [Complex64; 2],
    pub a_closed: [Complex64; 2],
    pub b_closed: [Complex64; 2],
    /// Relative residual of the `a` linear system.
    pub a_residual: f64,
    /// Relative residual of the `b` linear system.
    pub b_residual: f64,
    /// `Delta(2 i w)` at `eps0`; bounded away from zero by the nonresonance check.
    pub resonance_value: Complex64,
}

fn solve2(m: [[Complex64; 2]; 2], rhs: [Complex64; 2]) -> Option<[Complex64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.norm() == 0.0 {
        return None;
    }
    Some([(rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det, (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det])
}

fn residual2(m: [[Complex64; 2]; 2], x: [Complex64; 2], rhs: [Complex64; 2]) -> f64 {
    let r0 = m[0][0] * x[0] + m[0][1] * x[1] - rhs[0];
    let r1 = m[1][0] * x[0] + m[1][1] * x[1] - rhs[1];
    let scale = (rhs[0].norm_sqr() + rhs[1].norm_sqr()).sqrt();
    let abs = (r0.norm_sqr() + r1.norm_sqr()).sqrt();
    if scale > 0.0 {
        abs / scale
    } else {
        abs
    }
}

fn relative_gap(x: [Complex64; 2], y: [Complex64; 2]) -> f64 {
    let diff = ((x[0] - y[0]).norm_sqr() + (x[1] - y[1]).norm_sqr()).sqrt();
    let scale = (y[0].norm_sqr() + y[1].norm_sqr()).sqrt();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub const RESONANCE_THRESHOLD: f64 = 1e-6;
const COEFF_AGREEMENT: f64 = 1e-8;

pub fn quadratic_coeffs(eq: &Equilibrium, hp: &HopfPoint, frame: &CriticalFrame, c: f64) -> Result<QuadraticCoeffs> {
    ensure_same_point(eq, hp)?;
    let cp = CharParams { mu_m: hp.mu_m, mu_p: hp.mu_p, coupling: eq.coupling(), eps: hp.eps0 };
    let resonance_value = char_eval(Complex64::new(0.0, 2.0 * hp.omega), &cp);
    if resonance_value.norm() <= RESONANCE_THRESHOLD {
        return Err(Error::ResonanceViolation { value: resonance_value });
    }
    let x = Ctx::new(eq, hp, frame, c);
    let Ctx { mu_m, mu_p, e, w, f1, f2, g1, g2, .. } = x;
    let e2m = cis(-2.0 * w);

    let [p, q] = x.second_harmonic_forcing();
    let m_a = [[2.0 * I * w + e * mu_m, -e * f1 * e2m], [-e * g1 * e2m, 2.0 * I * w + e * mu_p]];
    let rhs_a = [e * p, e * q];
    let a = solve2(m_a, rhs_a).ok_or(Error::ResonanceViolation { value: resonance_value })?;
    let den = (2.0 * I * w + e * mu_m) * (2.0 * I * w + e * mu_p) - e * e * f1 * g1 * cis(-4.0 * w);
    let a_closed = [
        e / den * (p * (2.0 * I * w + e * mu_p) + q * (e * f1 * e2m)),
        e / den * (p * (e * g1 * e2m) + q * (2.0 * I * w + e * mu_m)),
    ];

    let rhs_b = x.mean_forcing();
    let real = |v: f64| Complex64::new(v, 0.0);
    let m_b = [[real(e * mu_m), real(-e * f1)], [real(-e * g1), real(e * mu_p)]];
    let b = solve2(m_b, rhs_b).ok_or_else(|| Error::InvalidParameter("mean-term system is singular: mu_m mu_p = f'g'".into()))?;
    let db = e * e * f1 * f1 * (mu_m * mu_p - f1 * g1);
    let (sw, cw) = w.sin_cos();
    let c_ = c;
    let b1 = (mu_p * f2 * w * w + mu_p * f2 * e * e * mu_m * mu_m + 2.0 * f1 * f1 * c_ * mu_p * w * w - 2.0 * f1 * f1 * c_ * mu_p * w * w * cw
        - 2.0 * c_ * (f1 * f1 * f1 * g1 + mu_m * mu_p * f1 * f1) * e * w * sw
        + f1 * f1 * f1 * g2 * e * e)
        / db;
    let b2 = (mu_m * f1 * f1 * g2 * e * e + f2 * g1 * w * w + f2 * g1 * mu_m * mu_m * e * e + 2.0 * c_ * f1 * f1 * g1 * w * w
        - 2.0 * c_ * mu_m * mu_p * f1 * w * w * cw
        - 2.0 * c_ * (mu_m * f1 * f1 * g1 + mu_m * mu_m * mu_p * f1) * e * w * sw)
        / db;
    let b_closed = [real(b1), real(b2)];

    let gap_a = relative_gap(a_closed, a);
    if gap_a > COEFF_AGREEMENT {
        return Err(Error::InconsistentCoefficients { what: "second-harmonic coefficients a", discrepancy: gap_a });
    }
    let gap_b = relative_gap(b_closed, b);
    if gap_b > COEFF_AGREEMENT {
        return Err(Error::InconsistentCoefficients { what: "mean coefficients b", discrepancy: gap_b });
    }
    Ok(QuadraticCoeffs {
        c,
        a,
        b,
        a_closed,
        b_closed,
        a_residual: residual2(m_a, a, rhs_a),
        b_residual: residual2(m_b, b, rhs_b),
        resonance_value,
    })
}

/// Which coefficient the `conj(theta_2) theta_2^2 (2 + e^{-2iw})` summand of
/// the cubic forcing carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubicTable {
    /// `-c mu_p (f'' + 2c f')`, as tabulated with the reference Hes1
    /// coefficients (`2.114544332 c^2 + ...`, `c0 = 0.02394886242`).
    #[default]
    Tabulated,
    /// `-c mu_p (f'' + 2c f'^2)`, the coefficient produced by the cubic Taylor
    /// expansion of the right-hand side.
    Expanded,
}

/// Which bracket of the cubic forcing a summand belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bracket {
    /// Multiplied by `eps0 / 2`: pure first-order cubes.
    Cubic,
    /// Multiplied by `eps0`: first-order times second-order products.
    Cross,
}

/// One displayed summand of the `A^2 conj(A) e^{iwT0}` forcing vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingTerm {
    pub bracket: Bracket,
    pub row: usize,
    pub label: &'static str,
    pub value: Complex64,
}

/// The cubic forcing, term by term. Summing `eps0/2 * Cubic + eps0 * Cross`
/// per row gives the `A^2 conj(A)` part of the solvability vector.
pub fn cubic_forcing_terms(eq: &Equilibrium, hp: &HopfPoint, frame: &CriticalFrame, qc: &QuadraticCoeffs, table: CubicTable) -> Vec<ForcingTerm> {
    let x = Ctx::new(eq, hp, frame, qc.c);
    let Ctx { mu_m, mu_p, c, f1, f2, f3, g1, g2, g3, t, tb, w, .. } = x;
    let (ep, em, e2m) = (cis(w), cis(-w), cis(-2.0 * w));
    let [a1, a2] = qc.a;
    let [b1, b2] = qc.b;
    let c2 = c * c;
    let table_coeff = match table {
        CubicTable::Tabulated => f2 + 2.0 * c * f1,
        CubicTable::Expanded => f2 + 2.0 * c * f1 * f1,
    };
    use Bracket::{Cross, Cubic};
    let term = |bracket, row, label, value| ForcingTerm { bracket, row, label, value };
    vec![
        term(Cubic, 0, "-6c^2 mu_m^3", Complex64::new(-6.0 * c2 * mu_m.powi(3), 0.0)),
        term(Cubic, 0, "6c^2 mu_m^2 f' (2 th2 e^{-iw} + conj(th2) e^{iw})", 6.0 * c2 * mu_m * mu_m * f1 * (2.0 * t * em + tb * ep)),
        term(Cubic, 0, "-2c mu_m (f'' + 3c f'^2) th2 (th2 e^{-2iw} + 2 conj(th2))", -2.0 * c * mu_m * (f2 + 3.0 * c * f1 * f1) * t * (t * e2m + 2.0 * tb)),
        term(Cubic, 0, "(f''' + 6c f'' f' + 6c^2 f'^3) th2^2 conj(th2) e^{-iw}", (f3 + 6.0 * c * f2 * f1 + 6.0 * c2 * f1.powi(3)) * t * t * tb * em),
        term(Cubic, 1, "g''' e^{-iw}", g3 * em),
        term(Cubic, 1, "-2c^2 mu_m^2 mu_p (conj(th2) + 2 th2)", -2.0 * c2 * mu_m * mu_m * mu_p * (tb + 2.0 * t)),
        term(Cubic, 1, "2c^2 mu_m^2 g' (2 e^{-iw} + e^{iw})", 2.0 * c2 * mu_m * mu_m * g1 * (2.0 * em + ep)),
        term(Cubic, 1, "-c mu_m g'' (2 + e^{-2iw})", -c * mu_m * g2 * (2.0 + e2m)),
        term(Cubic, 1, "c g'' f' (2 th2 e^{-iw} + conj(th2) e^{-iw})", c * g2 * f1 * (2.0 * t * em + tb * em)),
        term(Cubic, 1, "-c mu_p (f'' + 2c f'[^2]) th2^2 conj(th2) (2 + e^{-2iw})", -c * mu_p * table_coeff * t * t * tb * (2.0 + e2m)),
        term(Cubic, 1, "c g' (f'' + 2c f'^2) (2 conj(th2) + th2) th2 e^{-iw}", c * g1 * (f2 + 2.0 * c * f1 * f1) * (2.0 * tb + t) * t * em),
        term(Cubic, 1, "4c^2 mu_m mu_p f' th2 (conj(th2) e^{iw} + conj(th2) e^{-iw} + th2 e^{-iw})", 4.0 * c2 * mu_m * mu_p * f1 * t * (tb * ep + tb * em + t * em)),
        term(Cubic, 1, "-4c^2 mu_m f' g' (conj(th2) + th2 + th2 e^{-2iw})", -4.0 * c2 * mu_m * f1 * g1 * (tb + t + t * e2m)),
        term(Cross, 0, "2c mu_m^2 (a1 + b1)", 2.0 * c * mu_m * mu_m * (a1 + b1)),
        term(Cross, 0, "-2c mu_m f' (a1 conj(th2) e^{iw} + b1 th2 e^{-iw} + b2 + a2 e^{-2iw})", -2.0 * c * mu_m * f1 * (a1 * tb * ep + b1 * t * em + b2 + a2 * e2m)),
        term(Cross, 0, "(f'' + 2c f'^2) (a2 conj(th2) + b2 th2) e^{-iw}", (f2 + 2.0 * c * f1 * f1) * (a2 * tb + b2 * t) * em),
        term(Cross, 1, "-c mu_p f' (b2 th2 + a2 conj(th2) e^{-2iw} + b2 th2 e^{-iw} + a2 conj(th2) e^{iw})", -c * mu_p * f1 * (b2 * t + a2 * tb * e2m + b2 * t * em + a2 * tb * ep)),
        term(Cross, 1, "c mu_m mu_p (b1 th2 + a1 conj(th2) + a2 + b2)", c * mu_m * mu_p * (b1 * t + a1 * tb + a2 + b2)),
        term(Cross, 1, "g'' e^{-iw} (a1 + b1)", g2 * em * (a1 + b1)),
        term(Cross, 1, "c f' g' (b2 e^{-iw} + a2 e^{-iw} + b1 th2 e^{-iw} + a1 conj(th2) e^{-iw})", c * f1 * g1 * (b2 * em + a2 * em + b1 * t * em + a1 * tb * em)),
        term(Cross, 1, "-c mu_m g' (b1 e^{-iw} + a1 e^{iw} + b1 + a1 e^{-2iw})", -c * mu_m * g1 * (b1 * em + a1 * ep + b1 + a1 * e2m)),
    ]
}

/// Sums a term list into the cubic forcing vector.
pub fn assemble_cubic_forcing(eps0: f64, terms: &[ForcingTerm]) -> [Complex64; 2] {
    let mut chi = [Complex64::new(0.0, 0.0); 2];
    for term in terms {
        let weight = match term.bracket {
            Bracket::Cubic => 0.5 * eps0,
            Bracket::Cross => eps0,
        };
        chi[term.row] += weight * term.value;
    }
    chi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `Re kappa3 < 0`: a stable cycle branches off for `eps > eps0`.
    Supercritical,
    /// `Re kappa3 > 0`: an unstable cycle coexists with the stable equilibrium for `eps < eps0`.
    Subcritical,
    Degenerate,
}

impl Direction {
    pub fn of(kappa3: Complex64) -> Self {
        if kappa3.re.abs() <= 1e-12 * kappa3.norm() {
            Direction::Degenerate
        } else if kappa3.re < 0.0 {
            Direction::Supercritical
        } else {
            Direction::Subcritical
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalForm {
    pub c: f64,
    pub kappa1: Complex64,
    pub kappa3: Complex64,
    pub direction: Direction,
    /// `1 + eps0 e^{-iw} conj(d)^T N theta`.
    pub projection: Complex64,
    pub table: CubicTable,
}

impl NormalForm {
    /// Radius `|A|` of the bifurcating cycle at detuning `delta`, when it exists.
    pub fn cycle_radius(&self, delta: f64) -> Option<f64> {
        let r2 = -delta * self.kappa1.re / self.kappa3.re;
        (r2 > 0.0).then(|| r2.sqrt())
    }
}

fn projection(eq: &Equilibrium, hp: &HopfPoint, frame: &CriticalFrame) -> Complex64 {
    let n_theta = [eq.f1 * frame.theta[1], eq.g1 * frame.theta[0]];
    1.0 + hp.eps0 * cis(-hp.omega) * dot_conj(&frame.d, &n_theta)
}

pub fn normal_form(eq: &Equilibrium, hp: &HopfPoint, frame: &CriticalFrame, qc: &QuadraticCoeffs, table: CubicTable) -> Result<NormalForm> {
    ensure_same_point(eq, hp)?;
    let proj = projection(eq, hp, frame);
    if proj.norm() < 1e-10 {
        return Err(Error::DegenerateProjection { value: proj });
    }
    // delta-terms of the solvability vector: delta (M theta + N theta e^{-iw}) A
    let em = cis(-hp.omega);
    let t = frame.theta;
    let detuning = [-hp.mu_m * t[0] + eq.f1 * t[1] * em, -hp.mu_p * t[1] + eq.g1 * t[0] * em];
    let kappa1 = dot_conj(&frame.d, &detuning) / proj;
    let chi = assemble_cubic_forcing(hp.eps0, &cubic_forcing_terms(eq, hp, frame, qc, table));
    let kappa3 = dot_conj(&frame.d, &chi) / proj;
    Ok(NormalForm { c: qc.c, kappa1, kappa3, direction: Direction::of(kappa3), projection: proj, table })
}

/// Frame, second-order coefficients and normal form at one value of `c`.
pub fn analyze(eq: &Equilibrium, hp: &HopfPoint, c: f64, table: CubicTable) -> Result<NormalForm> {
    let frame = critical_frame(eq, hp)?;
    let qc = quadratic_coeffs(eq, hp, &frame, c)?;
    normal_form(eq, hp, &frame, &qc, table)
}

/// Normal form of the constant-delay system (`c = 0`) by its own closed
/// formula; returns `(kappa1, kappa3)`.
pub fn constant_delay_normal_form(eq: &Equilibrium, hp: &HopfPoint, frame: &CriticalFrame, qc: &QuadraticCoeffs) -> Result<(Complex64, Complex64)> {
    if qc.c != 0.0 {
        return Err(Error::InvalidParameter("constant-delay normal form needs coefficients computed at c = 0".into()));
    }
    let (w, e) = (hp.omega, hp.eps0);
    let t = frame.theta[1];
    let n_theta = [eq.f1 * t, Complex64::new(eq.g1, 0.0)];
    let den = cis(w) + e * dot_conj(&frame.d, &n_theta);
    let kappa1 = I * w * cis(w) / (e * den);
    let [a1, a2] = qc.a;
    let [b1, b2] = qc.b;
    let forcing = [eq.f2 * (a2 * t.conj() + b2 * t) + 0.5 * eq.f3 * t * t * t.conj(), eq.g2 * (a1 + b1) + 0.5 * eq.g3];
    Ok((kappa1, e / den * dot_conj(&frame.d, &forcing)))
}

/// `kappa3(c)` is quadratic in `c`; coefficients are ordered `[c^2, c, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kappa3Polynomial {
    pub re: [f64; 3],
    pub im: [f64; 3],
}

impl Kappa3Polynomial {
    pub fn eval(&self, c: f64) -> Complex64 {
        let p = |k: [f64; 3]| (k[0] * c + k[1]) * c + k[2];
        Complex64::new(p(self.re), p(self.im))
    }
}

/// Sample points of the quadratic fit.
pub const FIT_POINTS: [f64; 3] = [0.0, 0.01, 0.05];

/// Fits `kappa3(c)` through its values at [`FIT_POINTS`].
pub fn kappa3_polynomial(eq: &Equilibrium, hp: &HopfPoint, table: CubicTable) -> Result<Kappa3Polynomial> {
    let frame = critical_frame(eq, hp)?;
    let mut values = [Complex64::new(0.0, 0.0); 3];
    for (v, &c) in values.iter_mut().zip(FIT_POINTS.iter()) {
        let qc = quadratic_coeffs(eq, hp, &frame, c)?;
        *v = normal_form(eq, hp, &frame, &qc, table)?.kappa3;
    }
    // Newton divided differences; exact for a quadratic.
    let [x0, x1, x2] = FIT_POINTS;
    let fit = |y: [f64; 3]| {
        let d01 = (y[1] - y[0]) / (x1 - x0);
        let d12 = (y[2] - y[1]) / (x2 - x1);
        let d012 = (d12 - d01) / (x2 - x0);
        [d012, d01 - d012 * (x0 + x1), y[0] - d01 * x0 + d012 * x0 * x1]
    };
    Ok(Kappa3Polynomial { re: fit(values.map(|v| v.re)), im: fit(values.map(|v| v.im)) })
}

/// Smallest positive `c <= c_max` at which `Re kappa3(c)` changes sign.
pub fn critical_c(poly: &Kappa3Polynomial, c_max: f64) -> Result<f64> {
    let [a, b, c] = poly.re;
    let mut roots = Vec::new();
    if a == 0.0 {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc > 0.0 {
            // cancellation-free pair
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            roots.push(q / a);
            if q != 0.0 {
                roots.push(c / q);
            }
        }
    }
    roots
        .into_iter()
        .filter(|r| *r > 0.0 && *r <= c_max)
        .min_by(|x, y| x.total_cmp(y))
        .ok_or(Error::NoSignChange { c_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{find_equilibrium, ModelParams};
    use crate::stability::solve_hopf;

    fn hes1() -> (Equilibrium, HopfPoint) {
        let p = ModelParams::hes1_reference(0.01, 6.86216245).unwrap();
        let eq = find_equilibrium(&p, None, true).unwrap();
        let hp = solve_hopf(p.mu_m, p.mu_p, eq.coupling()).unwrap();
        (eq, hp)
    }

    #[test]
    fn frame_residuals_and_identity() {
        let (eq, hp) = hes1();
        let fr = critical_frame(&eq, &hp).unwrap();
        assert!(fr.eigen_residual(&eq, &hp) < 1e-9);
        assert!(fr.adjoint_residual(&eq, &hp) < 1e-9);
        assert!(fr.normalization_error() < 1e-12);
        let t = fr.theta[1];
        let lhs = t * cis(-hp.omega) + t.conj() * cis(hp.omega);
        assert!((lhs - 2.0 * hp.mu_m / eq.f1).norm() < 1e-12 * (2.0 * hp.mu_m / eq.f1).abs());
    }

    #[test]
    fn singular_frame_when_f_prime_vanishes() {
        let (eq, hp) = hes1();
        let flat = Equilibrium { f1: 0.0, ..eq };
        let hp = HopfPoint { coupling: 0.0, ..hp };
        assert_eq!(critical_frame(&flat, &hp), Err(Error::SingularFrame));
    }

    #[test]
    fn quadratic_coefficients_vanish_without_quadratic_forcing() {
        let (eq, hp) = hes1();
        let lin = Equilibrium { f2: 0.0, f3: 0.0, g2: 0.0, g3: 0.0, ..eq };
        let fr = critical_frame(&lin, &hp).unwrap();
        let qc = quadratic_coeffs(&lin, &hp, &fr, 0.0).unwrap();
        for z in qc.a.iter().chain(qc.b.iter()) {
            assert_eq!(z.norm(), 0.0);
        }
    }

    #[test]
    fn linear_solves_have_small_residuals() {
        let (eq, hp) = hes1();
        let fr = critical_frame(&eq, &hp).unwrap();
        let qc = quadratic_coeffs(&eq, &hp, &fr, 0.01).unwrap();
        assert!(qc.a_residual < 1e-10 && qc.b_residual < 1e-10);
        assert!(qc.b.iter().all(|z| z.im.abs() <= 1e-12 * z.norm()));
    }

    #[test]
    fn hes1_kappa1() {
        let (eq, hp) = hes1();
        let nf = analyze(&eq, &hp, 0.01, CubicTable::Tabulated).unwrap();
        let want = Complex64::new(0.01841158248, 0.04829902976);
        assert!((nf.kappa1 - want).norm() / want.norm() < 1e-5, "{}", nf.kappa1);
        // delta projection simplifies to i w / eps0
        let simplified = I * hp.omega / hp.eps0 / nf.projection;
        assert!((nf.kappa1 - simplified).norm() < 1e-14);
        assert!((nf.kappa1.re - hp.dalpha_deps).abs() < 1e-10 * hp.dalpha_deps);
    }

    #[test]
    fn direction_flips_across_c0() {
        let (eq, hp) = hes1();
        let poly = kappa3_polynomial(&eq, &hp, CubicTable::Tabulated).unwrap();
        let c0 = critical_c(&poly, 1.0).unwrap();
        assert!((c0 - 0.02394886242).abs() < 1e-6, "{c0}");
        assert_eq!(analyze(&eq, &hp, 0.01, CubicTable::Tabulated).unwrap().direction, Direction::Supercritical);
        assert_eq!(analyze(&eq, &hp, c0 + 0.001, CubicTable::Tabulated).unwrap().direction, Direction::Subcritical);
    }

    #[test]
    fn tables_agree_at_zero_c() {
        let (eq, hp) = hes1();
        let a = analyze(&eq, &hp, 0.0, CubicTable::Tabulated).unwrap();
        let b = analyze(&eq, &hp, 0.0, CubicTable::Expanded).unwrap();
        assert_eq!(a.kappa3, b.kappa3);
    }

    #[test]
    fn no_sign_change_is_reported() {
        let poly = Kappa3Polynomial { re: [1.0, 1.0, 1.0], im: [0.0; 3] };
        assert_eq!(critical_c(&poly, 1.0), Err(Error::NoSignChange { c_max: 1.0 }));
    }
}
