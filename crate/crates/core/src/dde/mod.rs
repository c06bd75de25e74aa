//! Time-domain simulation of the state-dependent system (method of steps
//! with an implicit delay solve at every stage) and of the unit-delay
//! transformed system.

mod dopri;
mod history;
mod oscillation;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use dopri::{Status, StepControl};
pub use history::{BumpData, ConstantData, FnData, History, InitialData, InitialHistory};
pub use oscillation::{measure_oscillation, Oscillation};

use dopri::{run, AcceptedPoint, Eval, Fault, Problem, RunSettings};

use crate::error::{Error, Result};
use crate::model::{rhs_original, rhs_transformed, Equilibrium, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySolution {
    pub tau: f64,
    /// `|tau - eps - c (x(t) - x(t - tau))| / max(eps, tau)`.
    pub residual: f64,
    pub iterations: usize,
    /// `c sup |x'| < 1` on the bracketing window, which makes the root unique.
    pub slope_ok: bool,
}

const DELAY_TOL: f64 = 1e-13;
const FIXED_POINT_ITERATIONS: usize = 100;

/// Solves `tau = eps + c (x_now - x(t - tau))` against the stored history.
/// `seed` is typically the delay at the previous accepted point.
pub fn solve_delay(t: f64, x_now: f64, history: &History, params: &ModelParams, seed: Option<f64>) -> Result<DelaySolution> {
    let (eps, c) = (params.eps, params.c);
    if c == 0.0 {
        return Ok(DelaySolution { tau: eps, residual: 0.0, iterations: 0, slope_ok: true });
    }
    let frontier = history.frontier();
    let tau_min = (t - frontier).max(0.0);
    let (lo, hi) = history.x_range();
    let range = hi.max(x_now) - lo.min(x_now);
    let tau_max = (10.0 * (eps + c * range)).min(t - history.start());
    let x_at = |tau: f64| history.value(t - tau).map(|v| v[0]);
    let scale = |tau: f64| eps.max(tau);
    let slope_ok = c * history.slope_sup(t - tau_max, t) < 1.0;

    let finish = |tau: f64, iterations: usize| -> Option<DelaySolution> {
        let xd = x_at(tau)?;
        let residual = (tau - eps - c * (x_now - xd)).abs() / scale(tau);
        (tau > 0.0 && residual <= DELAY_TOL * 10.0).then_some(DelaySolution { tau, residual, iterations, slope_ok })
    };

    let mut tau = seed.unwrap_or(eps).clamp(tau_min.max(f64::MIN_POSITIVE), tau_max.max(f64::MIN_POSITIVE));
    let mut last_step = f64::INFINITY;
    for it in 1..=FIXED_POINT_ITERATIONS {
        let Some(xd) = x_at(tau) else { break };
        let next = eps + c * (x_now - xd);
        let step = (next - tau).abs();
        if step <= DELAY_TOL * scale(next) {
            if let Some(sol) = finish(next, it) {
                return Ok(sol);
            }
            break;
        }
        if step >= last_step || !(next > tau_min && next <= tau_max) {
            break;
        }
        last_step = step;
        tau = next;
    }

    // bracketed fallback on g(tau) = tau - eps - c (x_now - x(t - tau))
    let g = |tau: f64| x_at(tau).map(|xd| tau - eps - c * (x_now - xd));
    let mut a = tau_min.max(1e-14 * eps);
    let mut b = tau_max;
    let (Some(mut ga), Some(mut gb)) = (g(a), g(b)) else {
        return Err(Error::NoBracket(format!("delay window ({a}, {b}] leaves the stored history at t = {t}")));
    };
    if ga > 0.0 {
        if tau_min > 0.0 {
            return Err(Error::LagInsideStep);
        }
        return Err(Error::NoBracket(format!("g > 0 at the smallest admissible delay, t = {t}")));
    }
    if gb < 0.0 {
        return Err(Error::NoBracket(format!("g < 0 at tau_max = {b}, t = {t}")));
    }
    let mut side = 0i8;
    for it in 1..=400 {
        // Illinois regula falsi, bisecting when the secant leaves the interval
        let mut m = (a * gb - b * ga) / (gb - ga);
        if !(m > a && m < b) {
            m = 0.5 * (a + b);
        }
        let gm = g(m).ok_or(Error::LagInsideStep)?;
        if gm.abs() <= DELAY_TOL * scale(m) || (b - a) <= 4.0 * f64::EPSILON * b {
            return finish(m, FIXED_POINT_ITERATIONS + it)
                .ok_or_else(|| Error::NoBracket(format!("delay residual stalled at {:e}, t = {t}", gm.abs() / scale(m))));
        }
        if gm < 0.0 {
            a = m;
            ga = gm;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = m;
            gb = gm;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NoBracket(format!("delay iteration did not converge at t = {t}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    /// `x'(0) - rhs_x`, `y'(0) - rhs_y`, `tau0 - eps - c (x(0) - x(-tau0))`.
    pub residuals: [f64; 3],
    /// Magnitudes the residuals are measured against.
    pub scales: [f64; 3],
    pub tolerance: f64,
    pub pass: bool,
}

pub const DEFAULT_COMPAT_TOL: f64 = 1e-8;

pub fn check_compatibility(init: &InitialHistory, tau0: f64, params: &ModelParams, tolerance: f64) -> Result<CompatibilityReport> {
    if tau0 > init.span {
        return Err(Error::HistoryTooShort { tau0, span: init.span });
    }
    if !(tau0 > 0.0) {
        return Err(Error::InvalidParameter(format!("initial delay must be positive, got {tau0}")));
    }
    let (now, slope) = init.eval(0.0);
    let (delayed, _) = init.eval(-tau0);
    let fx = params.f(delayed[1]);
    let gy = params.g(delayed[0]);
    let residuals = [
        slope[0] - (-params.mu_m * now[0] + fx),
        slope[1] - (-params.mu_p * now[1] + gy),
        tau0 - params.eps - params.c * (now[0] - delayed[0]),
    ];
    let scales = [
        slope[0].abs().max(params.mu_m * now[0].abs()).max(fx.abs()).max(1.0),
        slope[1].abs().max(params.mu_p * now[1].abs()).max(gy.abs()).max(1.0),
        params.eps.max(tau0),
    ];
    let pass = residuals.iter().zip(scales.iter()).all(|(r, s)| r.abs() <= tolerance * s);
    Ok(CompatibilityReport { residuals, scales, tolerance, pass })
}

/// Default initial data for reproduction runs: the equilibrium plus a
/// `sin^2` bump of the given size over one basal delay. Compatible with
/// `tau0 = width` whenever the base is an equilibrium.
pub fn equilibrium_bump(eq: &Equilibrium, perturbation: [f64; 2], width: f64) -> Result<InitialHistory> {
    InitialHistory::bump([eq.r_star, eq.xi_star], perturbation, width)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Original,
    Transformed,
}

impl SystemKind {
    pub fn csv_header(self) -> &'static str {
        match self {
            SystemKind::Original => "t,x,y,tau",
            SystemKind::Transformed => "eta,r,xi,k",
        }
    }
}

/// State at one accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub state: [f64; 2],
    pub derivative: [f64; 2],
    pub delay: f64,
    pub delay_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A state component became non-positive.
    PositivityLost,
    DelayNonPositive,
    /// `x'` reached the supremum of the feedback map.
    SlopeMonitor,
    /// `c sup |x'| >= 1` on a delay bracket: the delay root may not be unique.
    UniquenessBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    pub control: StepControl,
    /// Output spacing; `None` reports every accepted step.
    pub sample_dt: Option<f64>,
    /// Run even when the initial data fail the compatibility check.
    pub force: bool,
    pub compat_tol: f64,
    pub max_steps: usize,
    /// Stop with `Status::Escaped` once some component deviates from its
    /// initial value by more than `factor * max(|initial|, 1)`.
    pub escape_factor: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { control: StepControl::default(), sample_dt: None, force: false, compat_tol: DEFAULT_COMPAT_TOL, max_steps: 2_000_000, escape_factor: None }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub system: SystemKind,
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    /// `tau(t)` or `k(eta)` at each sample.
    pub delays: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub events: Vec<Event>,
    pub rejected_steps: usize,
    pub lag_rejections: usize,
    /// Propagated derivative discontinuities `(location, generation)`.
    pub breakpoints: Vec<(f64, u8)>,
    pub status: Status,
    history: History,
}

impl Trajectory {
    /// Dense-output value at any covered time.
    pub fn value_at(&self, t: f64) -> Option<[f64; 2]> {
        self.history.value(t)
    }

    pub fn end_time(&self) -> f64 {
        self.history.frontier()
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[i]).collect()
    }

    /// `eta(t) = (t - c (x(t) - x(0))) / eps` at the sample times; the identity
    /// for transformed runs.
    pub fn eta(&self, params: &ModelParams) -> Vec<f64> {
        match self.system {
            SystemKind::Transformed => self.times.clone(),
            SystemKind::Original => {
                let x0 = self.history.value(0.0).map_or(0.0, |v| v[0]);
                self.times.iter().zip(&self.states).map(|(t, s)| (t - params.c * (s[0] - x0)) / params.eps).collect()
            }
        }
    }

    pub fn measure(&self, component: usize, from: f64) -> Result<Oscillation> {
        measure_oscillation(&self.times, &self.component(component), from)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.times.len() * 96);
        s.push_str(self.system.csv_header());
        s.push('\n');
        for ((t, st), d) in self.times.iter().zip(&self.states).zip(&self.delays) {
            let _ = writeln!(s, "{t:.16e},{:.16e},{:.16e},{d:.16e}", st[0], st[1]);
        }
        s
    }
}

fn fault(e: Error) -> Fault {
    match e {
        Error::LagInsideStep => Fault::LagInsideStep,
        e => Fault::Fatal(e),
    }
}

struct OriginalProblem<'a> {
    params: &'a ModelParams,
    tau_seed: f64,
}

impl Problem for OriginalProblem<'_> {
    fn eval(&mut self, t: f64, y: [f64; 2], hist: &History) -> Result<Eval, Fault> {
        let sol = solve_delay(t, y[0], hist, self.params, Some(self.tau_seed)).map_err(fault)?;
        let delayed = hist.value(t - sol.tau).ok_or(Fault::LagInsideStep)?;
        let r = rhs_original(y, delayed, sol.tau, self.params);
        Ok(Eval { dy: [r.dx, r.dy], delay: sol.tau, residual: sol.residual, slope_warning: !sol.slope_ok })
    }

    fn lag(&self, t: f64, eval: &Eval) -> f64 {
        t - eval.delay
    }

    fn max_step(&self, eval: &Eval) -> f64 {
        0.95 * eval.delay
    }

    fn accept(&mut self, eval: &Eval) {
        self.tau_seed = eval.delay;
    }
}

struct TransformedProblem<'a> {
    params: &'a ModelParams,
}

impl Problem for TransformedProblem<'_> {
    fn eval(&mut self, eta: f64, y: [f64; 2], hist: &History) -> Result<Eval, Fault> {
        let delayed = hist.value(eta - 1.0).ok_or(Fault::LagInsideStep)?;
        match rhs_transformed(y, delayed, self.params) {
            Ok(r) => Ok(Eval { dy: [r.dr, r.dxi], delay: r.k, residual: 0.0, slope_warning: false }),
            Err(Error::DenominatorBreach { .. }) => Err(Fault::Breach),
            Err(e) => Err(Fault::Fatal(e)),
        }
    }

    fn lag(&self, eta: f64, _eval: &Eval) -> f64 {
        eta - 1.0
    }

    fn max_step(&self, _eval: &Eval) -> f64 {
        1.0
    }
}

/// Records events on transitions into a breached state.
struct Monitor {
    events: Vec<Event>,
    active: std::collections::HashSet<EventKind>,
    steps: Vec<StepRecord>,
}

const EVENT_CAP: usize = 10_000;

impl Monitor {
    fn new() -> Self {
        Monitor { events: Vec::new(), active: Default::default(), steps: Vec::new() }
    }

    fn flag(&mut self, t: f64, kind: EventKind, on: bool, value: f64) {
        if on {
            if self.active.insert(kind) && self.events.len() < EVENT_CAP {
                self.events.push(Event { t, kind, value });
            }
        } else {
            self.active.remove(&kind);
        }
    }

    fn record(&mut self, p: &AcceptedPoint) {
        self.steps.push(StepRecord { t: p.t, state: p.y, derivative: p.eval.dy, delay: p.eval.delay, delay_residual: p.eval.residual });
        self.flag(p.t, EventKind::PositivityLost, !(p.y[0] > 0.0 && p.y[1] > 0.0), p.y[0].min(p.y[1]));
        self.flag(p.t, EventKind::DelayNonPositive, !(p.eval.delay > 0.0), p.eval.delay);
        self.flag(p.t, EventKind::UniquenessBound, p.eval.slope_warning, 0.0);
    }
}

fn escaped(y: &[f64; 2], y0: &[f64; 2], factor: Option<f64>) -> bool {
    factor.is_some_and(|f| (0..2).any(|i| (y[i] - y0[i]).abs() > f * y0[i].abs().max(1.0)))
}

fn sample_times(end: f64, dt: Option<f64>, steps: &[StepRecord]) -> Vec<f64> {
    match dt {
        Some(dt) => {
            let n = (end / dt * (1.0 + 1e-12)).floor() as usize;
            let mut v: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
            if let Some(&last) = v.last() {
                if end - last > 1e-9 * dt {
                    v.push(end);
                }
            }
            v
        }
        None => steps.iter().map(|s| s.t).collect(),
    }
}

fn validate_options(opts: &SimOptions, t_end: f64) -> Result<()> {
    opts.control.validate()?;
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("end time must be positive, got {t_end}")));
    }
    if let Some(dt) = opts.sample_dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("sample spacing must be positive, got {dt}")));
        }
    }
    Ok(())
}

/// Integrates the state-dependent system from the given initial data and
/// initial delay `tau0`.
pub fn integrate_sdd(init: &InitialHistory, tau0: f64, params: &ModelParams, t_end: f64, opts: &SimOptions) -> Result<Trajectory> {
    params.validate()?;
    validate_options(opts, t_end)?;
    let report = check_compatibility(init, tau0, params, opts.compat_tol)?;
    if !report.pass && !opts.force {
        return Err(Error::Incompatible { residuals: report.residuals });
    }
    let y0 = init.eval(0.0).0;
    let mut problem = OriginalProblem { params, tau_seed: tau0 };
    let mut monitor = Monitor::new();
    let b2 = if params.c > 0.0 { 1.0 / params.c } else { f64::INFINITY };
    let sup_f = params.nonlinearity.f.upper_bound().unwrap_or(f64::INFINITY);
    let settings = RunSettings { control: opts.control, max_steps: opts.max_steps };
    let out = run(&mut problem, History::new(init.clone()), y0, t_end, &settings, |p| {
        monitor.record(p);
        monitor.flag(p.t, EventKind::SlopeMonitor, p.eval.dy[0] >= sup_f, p.eval.dy[0]);
        if p.eval.dy[0] >= b2 {
            Some(Status::B2Violation { t: p.t })
        } else {
            escaped(&p.y, &y0, opts.escape_factor).then_some(Status::Escaped { t: p.t })
        }
    })?;

    let history = out.history;
    let end = history.frontier();
    let times = sample_times(end, opts.sample_dt, &monitor.steps);
    let mut states = Vec::with_capacity(times.len());
    let mut delays = Vec::with_capacity(times.len());
    let mut seed = tau0;
    for &t in &times {
        let s = history.value(t).unwrap_or([f64::NAN; 2]);
        let tau = solve_delay(t, s[0], &history, params, Some(seed)).map_or(f64::NAN, |d| d.tau);
        if tau.is_finite() {
            seed = tau;
        }
        states.push(s);
        delays.push(tau);
    }
    Ok(Trajectory {
        system: SystemKind::Original,
        times,
        states,
        delays,
        steps: monitor.steps,
        events: monitor.events,
        rejected_steps: out.rejected,
        lag_rejections: out.lag_rejections,
        breakpoints: out.breakpoints,
        status: out.status,
        history,
    })
}

/// Integrates the unit-delay system in `eta` from initial data on `[-1, 0]`.
/// With `c = 0` this is the constant-delay system rescaled by `eps`.
pub fn integrate_transformed(init: &InitialHistory, params: &ModelParams, eta_end: f64, opts: &SimOptions) -> Result<Trajectory> {
    params.validate()?;
    validate_options(opts, eta_end)?;
    if init.span < 1.0 {
        return Err(Error::HistoryTooShort { tau0: 1.0, span: init.span });
    }
    let y0 = init.eval(0.0).0;
    let mut problem = TransformedProblem { params };
    let mut monitor = Monitor::new();
    let settings = RunSettings { control: opts.control, max_steps: opts.max_steps };
    let out = run(&mut problem, History::new(init.clone()), y0, eta_end, &settings, |p| {
        monitor.record(p);
        escaped(&p.y, &y0, opts.escape_factor).then_some(Status::Escaped { t: p.t })
    })?;

    let history = out.history;
    let end = history.frontier();
    let times = sample_times(end, opts.sample_dt, &monitor.steps);
    let mut states = Vec::with_capacity(times.len());
    let mut delays = Vec::with_capacity(times.len());
    for &eta in &times {
        let s = history.value(eta).unwrap_or([f64::NAN; 2]);
        let k = history.value(eta - 1.0).map_or(f64::NAN, |d| params.eps + params.c * (s[0] - d[0]));
        states.push(s);
        delays.push(k);
    }
    Ok(Trajectory {
        system: SystemKind::Transformed,
        times,
        states,
        delays,
        steps: monitor.steps,
        events: monitor.events,
        rejected_steps: out.rejected,
        lag_rejections: out.lag_rejections,
        breakpoints: out.breakpoints,
        status: out.status,
        history,
    })
}
