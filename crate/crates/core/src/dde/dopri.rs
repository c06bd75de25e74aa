//! Dormand-Prince 5(4) with FSAL and the 4th-order continuous extension,
//! driven over a solution [`History`] so delayed arguments are always read
//! from dense output.

use serde::{Deserialize, Serialize};

use super::history::{History, Segment};
use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepControl {
    Adaptive {
        rtol: f64,
        atol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_max: Option<f64>,
    },
    /// Constant step, no error control. Used for convergence-order checks.
    Fixed { h: f64 },
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl::Adaptive { rtol: 1e-9, atol: 1e-9, h_max: None }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepControl::Adaptive { rtol, atol, h_max } => rtol > 0.0 && atol > 0.0 && h_max.map_or(true, |h| h > 0.0),
            StepControl::Fixed { h } => h > 0.0 && h.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid step control {self:?}")))
        }
    }
}

/// Right-hand side evaluation at one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Eval {
    pub dy: [f64; 2],
    /// `tau` for the original system, `k` for the transformed one.
    pub delay: f64,
    /// Relative residual of the delay equation (0 where the delay is explicit).
    pub residual: f64,
    pub slope_warning: bool,
}

pub(crate) enum Fault {
    /// The delayed argument falls inside the step being taken.
    LagInsideStep,
    /// `1 - c x'` is not positive.
    Breach,
    Fatal(Error),
}

pub(crate) trait Problem {
    fn eval(&mut self, t: f64, y: [f64; 2], hist: &History) -> Result<Eval, Fault>;
    /// Position `t - delay` of the delayed argument at an accepted point.
    fn lag(&self, t: f64, eval: &Eval) -> f64;
    fn max_step(&self, eval: &Eval) -> f64;
    fn accept(&mut self, _eval: &Eval) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AcceptedPoint {
    pub t: f64,
    pub y: [f64; 2],
    pub eval: Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case", deny_unknown_fields)]
pub enum Status {
    Completed,
    /// `x' >= 1/c` (original) or `1 - c x' <= 0` (transformed) was reached.
    B2Violation { t: f64 },
    NonFinite { t: f64 },
    /// The state left the box set by `SimOptions::escape_factor`.
    Escaped { t: f64 },
    StepUnderflow { t: f64 },
    Aborted { t: f64, reason: String },
}

impl Status {
    pub fn is_completed(&self) -> bool {
        matches!(self, Status::Completed)
    }
}

#[derive(Debug, Clone, Copy)]
struct Breakpoint {
    at: f64,
    generation: u8,
    propagated: bool,
    targeted: bool,
}

pub(crate) const BREAKPOINT_GENERATIONS: u8 = 3;

pub(crate) struct RunOutput {
    pub history: History,
    pub status: Status,
    pub rejected: usize,
    pub lag_rejections: usize,
    pub breakpoints: Vec<(f64, u8)>,
}

pub(crate) struct RunSettings {
    pub control: StepControl,
    pub max_steps: usize,
}

fn finite(y: &[f64; 2]) -> bool {
    y[0].is_finite() && y[1].is_finite()
}

/// Integrates from `t = 0` to `t_end`. `inspect` sees every accepted point
/// (including the start) and may stop the run with a terminal status.
pub(crate) fn run<P: Problem>(
    problem: &mut P,
    mut history: History,
    y0: [f64; 2],
    t_end: f64,
    settings: &RunSettings,
    mut inspect: impl FnMut(&AcceptedPoint) -> Option<Status>,
) -> Result<RunOutput> {
    settings.control.validate()?;
    let first = match problem.eval(0.0, y0, &history) {
        Ok(e) => e,
        Err(Fault::Fatal(e)) => return Err(e),
        Err(Fault::Breach) => return Err(Error::Integration { t: 0.0, reason: "denominator 1 - c x' is not positive at the initial point".into() }),
        Err(Fault::LagInsideStep) => return Err(Error::LagInsideStep),
    };
    let mut breakpoints: Vec<Breakpoint> =
        history.initial.kinks.iter().map(|&at| Breakpoint { at, generation: 0, propagated: false, targeted: false }).collect();
    let mut out = RunOutput { history: History::new(history.initial.clone()), status: Status::Completed, rejected: 0, lag_rejections: 0, breakpoints: Vec::new() };

    let mut cur = AcceptedPoint { t: 0.0, y: y0, eval: first };
    if let Some(st) = inspect(&cur) {
        out.status = st;
        out.history = history;
        return Ok(out);
    }
    problem.accept(&first);
    let mut lag_now = problem.lag(0.0, &first);
    let mut lag_rate = 1.0;

    let (adaptive, mut h) = match settings.control {
        StepControl::Fixed { h } => (None, h),
        StepControl::Adaptive { rtol, atol, h_max } => {
            let sc = |i: usize| atol + rtol * y0[i].abs();
            let d0 = ((y0[0] / sc(0)).powi(2) + (y0[1] / sc(1)).powi(2)).sqrt();
            let d1 = ((first.dy[0] / sc(0)).powi(2) + (first.dy[1] / sc(1)).powi(2)).sqrt();
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-4 } else { 0.01 * d0 / d1 };
            (Some((rtol, atol, h_max.unwrap_or(f64::INFINITY))), h0)
        }
    };
    let mut last_rejected = false;
    let mut steps = 0usize;
    let mut k = [[0.0; 2]; 7];
    let mut evals = [first; 7];

    while cur.t < t_end {
        if steps >= settings.max_steps {
            out.status = Status::Aborted { t: cur.t, reason: format!("step limit {} reached", settings.max_steps) };
            break;
        }
        let h_floor = 1e-12 * cur.t.abs().max(1.0);
        let mut step = h.min(problem.max_step(&cur.eval));
        if let Some((_, _, h_max)) = adaptive {
            step = step.min(h_max);
        }
        let proposal = step;
        step = step.min(t_end - cur.t);
        let mut target = None;
        if adaptive.is_some() {
            for (i, bp) in breakpoints.iter().enumerate() {
                if bp.propagated || bp.targeted || bp.generation >= BREAKPOINT_GENERATIONS || bp.at <= lag_now {
                    continue;
                }
                let t_star = cur.t + (bp.at - lag_now) / lag_rate;
                if t_star > cur.t + h_floor && t_star < cur.t + step {
                    step = t_star - cur.t;
                    target = Some(i);
                }
            }
        }
        if step < h_floor && t_end - cur.t > h_floor {
            out.status = Status::StepUnderflow { t: cur.t };
            break;
        }

        k[0] = cur.eval.dy;
        evals[0] = cur.eval;
        let mut ys = [cur.y; 7];
        let mut fault = None;
        for s in 1..7 {
            let mut yi = cur.y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    yi[0] += step * a * kj[0];
                    yi[1] += step * a * kj[1];
                }
            }
            ys[s] = yi;
            if !finite(&yi) {
                fault = Some(None);
                break;
            }
            match problem.eval(cur.t + C[s] * step, yi, &history) {
                Ok(e) if finite(&e.dy) => {
                    k[s] = e.dy;
                    evals[s] = e;
                }
                Ok(_) => {
                    fault = Some(None);
                    break;
                }
                Err(f) => {
                    fault = Some(Some(f));
                    break;
                }
            }
        }
        if let Some(f) = fault {
            let shrink = |out: &mut RunOutput, status: Status| -> Option<Status> {
                if step <= h_floor * 16.0 {
                    Some(status)
                } else {
                    out.rejected += 1;
                    None
                }
            };
            let terminal = match f {
                Some(Fault::Fatal(e)) => return Err(e),
                Some(Fault::LagInsideStep) => {
                    out.lag_rejections += 1;
                    if step <= h_floor * 16.0 {
                        return Err(Error::LagInsideStep);
                    }
                    None
                }
                Some(Fault::Breach) => shrink(&mut out, Status::B2Violation { t: cur.t }),
                None => shrink(&mut out, Status::NonFinite { t: cur.t }),
            };
            if let Some(st) = terminal {
                out.status = st;
                break;
            }
            h = step * 0.25;
            last_rejected = true;
            continue;
        }
        let y1 = ys[6];

        let mut factor = 1.0;
        if let Some((rtol, atol, _)) = adaptive {
            let mut acc = 0.0;
            for i in 0..2 {
                let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * step;
                let sc = atol + rtol * cur.y[i].abs().max(y1[i].abs());
                acc += (e / sc).powi(2);
            }
            let err = (acc / 2.0).sqrt();
            if !(err <= 1.0) {
                out.rejected += 1;
                let f = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
                h = step * f;
                last_rejected = true;
                continue;
            }
            factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if last_rejected {
                factor = factor.min(1.0);
            }
        }

        let mut rcont = [[0.0; 2]; 5];
        let mut slope_max = 0.0_f64;
        for kk in &k {
            slope_max = slope_max.max(kk[0].abs());
        }
        for i in 0..2 {
            let ydiff = y1[i] - cur.y[i];
            let bspl = step * k[0][i] - ydiff;
            rcont[0][i] = cur.y[i];
            rcont[1][i] = ydiff;
            rcont[2][i] = bspl;
            rcont[3][i] = ydiff - step * k[6][i] - bspl;
            rcont[4][i] = step * (0..7).map(|s| D[s] * k[s][i]).sum::<f64>();
        }
        history.push(Segment { t0: cur.t, h: step, rcont, slope_max }, y1[0]);
        steps += 1;
        last_rejected = false;

        let t_new = if t_end - (cur.t + step) <= h_floor { t_end } else { cur.t + step };
        let next = AcceptedPoint { t: t_new, y: y1, eval: evals[6] };
        let lag_new = problem.lag(t_new, &next.eval);
        for bp in breakpoints.iter_mut() {
            if !bp.propagated && lag_now < bp.at && bp.at <= lag_new {
                bp.propagated = true;
                if bp.generation < BREAKPOINT_GENERATIONS {
                    let at = cur.t + (bp.at - lag_now) / (lag_new - lag_now) * step;
                    out.breakpoints.push((at, bp.generation + 1));
                }
            }
        }
        if let Some(i) = target {
            breakpoints[i].targeted = true;
        }
        breakpoints.extend(
            out.breakpoints
                .iter()
                .filter(|(at, _)| breakpoints.iter().all(|b| b.at != *at))
                .map(|&(at, generation)| Breakpoint { at, generation, propagated: false, targeted: false })
                .collect::<Vec<_>>(),
        );
        lag_rate = ((lag_new - lag_now) / step).clamp(0.05, 20.0);
        lag_now = lag_new;
        problem.accept(&next.eval);
        cur = next;
        if let Some(st) = inspect(&cur) {
            out.status = st;
            break;
        }
        if adaptive.is_some() {
            // a step shortened to hit a breakpoint or the end says little about the next one
            h = if step < proposal { proposal.max(step * factor) } else { step * factor };
        }
    }
    out.history = history;
    Ok(out)
}
