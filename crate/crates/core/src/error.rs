use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("equilibrium solver did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("equilibrium ({r}, {xi}) is not in the positive orthant")]
    NonPositive { r: f64, xi: f64 },

    #[error("no sign change found: {0}")]
    NoBracket(String),

    #[error("denominator 1 - c(-mu_m r + f(xi_1)) = {denominator:e} is not positive (requires 1/c > dx/dt)")]
    DenominatorBreach { denominator: f64 },

    #[error("no root of the frequency equation on (0, pi/2): {0}")]
    NoRoot(String),

    #[error("no Hopf point: mu_m*mu_p = {mu_product:e} >= -f'g' = {neg_coupling:e}, equilibrium is stable for all eps")]
    HypothesisViolated { mu_product: f64, neg_coupling: f64 },

    #[error("coupling f'g' = {coupling:e} > 0 is outside the classified regimes")]
    UnhandledRegime { coupling: f64 },

    #[error("critical frame is singular: f'(xi*) = 0")]
    SingularFrame,

    #[error("nonresonance fails: characteristic value at 2i*omega is {value}")]
    ResonanceViolation { value: Complex64 },

    #[error("{what}: closed form and linear solve disagree (relative {discrepancy:e})")]
    InconsistentCoefficients { what: &'static str, discrepancy: f64 },

    #[error("projection denominator 1 + eps0 e^(-i omega) conj(d)^T N theta = {value} is degenerate")]
    DegenerateProjection { value: Complex64 },

    #[error("Re kappa3(c) has no sign change on (0, {c_max}]")]
    NoSignChange { c_max: f64 },

    #[error("initial delay {tau0} exceeds history span {span}")]
    HistoryTooShort { tau0: f64, span: f64 },

    #[error("delay root lies inside the current step (lag beyond dense-output frontier)")]
    LagInsideStep,

    #[error("initial data fails compatibility: residuals {residuals:?}")]
    Incompatible { residuals: [f64; 3] },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("too few extrema ({extrema}) to measure an oscillation")]
    InsufficientCycles { extrema: usize },

    #[error("config error: {0}")]
    Config(String),
}
