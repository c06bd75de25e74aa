use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::commands::{resolve, simulate_resolved, SimulateReport};
use crate::config::{ParamSpec, RunConfig};
use crate::dde::Status;
use crate::error::{Error, Result};
use crate::normal_form::{analyze, critical_c, kappa3_polynomial, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimClass {
    /// Converges to the steady state (decay rate above the tolerance, or no oscillation left).
    Stable,
    Oscillating,
    /// Left the admissible region: B2 breach, escape box or non-finite state.
    Escaped,
    /// The integrator gave up, or the cell could not be set up.
    Failed,
}

impl SimClass {
    fn name(self) -> &'static str {
        match self {
            SimClass::Stable => "stable",
            SimClass::Oscillating => "oscillating",
            SimClass::Escaped => "escaped",
            SimClass::Failed => "failed",
        }
    }
}

pub fn classify_run(report: &SimulateReport, decay_tol: f64) -> SimClass {
    match report.status {
        Status::Completed => match &report.oscillation {
            Some(o) if o.decay_rate <= decay_tol => SimClass::Oscillating,
            _ => SimClass::Stable,
        },
        Status::B2Violation { .. } | Status::Escaped { .. } | Status::NonFinite { .. } => SimClass::Escaped,
        Status::StepUnderflow { .. } | Status::Aborted { .. } => SimClass::Failed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCell {
    pub i: usize,
    pub j: usize,
    /// Axis values as given (offsets for axes relative to a critical value).
    pub values: [f64; 2],
    pub eps: Option<f64>,
    pub c: Option<f64>,
    pub sim: SimClass,
    /// `below`/`above` `eps0` (or `stable_all`), joined with the normal-form direction at `c`.
    pub analytic: String,
    /// `sim/analytic`.
    pub label: String,
    pub status: Option<Status>,
    pub decay_rate: Option<f64>,
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepReport {
    pub params: [String; 2],
    pub values: [Vec<f64>; 2],
    /// Critical values of the base config.
    pub eps0: Option<f64>,
    pub c0: Option<f64>,
    pub decay_tol: f64,
    /// Row-major: axis 0 varies slowest.
    pub cells: Vec<SweepCell>,
}

/// Worker count from `SDDHOPF_THREADS`; `None` leaves the choice to rayon.
pub fn sweep_threads() -> Result<Option<usize>> {
    match std::env::var("SDDHOPF_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("SDDHOPF_THREADS must be a positive integer, got `{s}`"))),
        },
    }
}

fn cell_config(base: &RunConfig, params: &[&str; 2], relative: [bool; 2], values: [f64; 2]) -> Result<RunConfig> {
    let mut cfg = base.clone();
    for k in 0..2 {
        if relative[k] {
            let spec = ParamSpec::Critical { critical_offset: values[k] };
            match params[k] {
                "eps" => cfg.model.eps = spec,
                _ => cfg.model.c = spec,
            }
        } else {
            cfg.model.set(params[k], values[k])?;
        }
    }
    Ok(cfg)
}

fn analytic_label(cfg: &RunConfig, r: &super::commands::Resolved) -> String {
    let Some(hp) = r.hopf else { return "stable_all".into() };
    let side = if r.params.eps < hp.eps0 { "below" } else { "above" };
    let dir = match analyze(&r.eq, &hp, r.params.c, cfg.analysis.normal_form.table) {
        Ok(nf) => match nf.direction {
            Direction::Supercritical => "supercritical",
            Direction::Subcritical => "subcritical",
            Direction::Degenerate => "degenerate",
        },
        Err(_) => "n/a",
    };
    format!("{side}-{dir}")
}

fn run_cell(cfg: &RunConfig, decay_tol: f64, i: usize, j: usize, values: [f64; 2], params: &[&str; 2], relative: [bool; 2]) -> SweepCell {
    let mut cell = SweepCell {
        i,
        j,
        values,
        eps: None,
        c: None,
        sim: SimClass::Failed,
        analytic: "n/a".into(),
        label: String::new(),
        status: None,
        decay_rate: None,
        amplitude: None,
        period: None,
        error: None,
    };
    let outcome = cell_config(cfg, params, relative, values).and_then(|cc| {
        let r = resolve(&cc)?;
        cell.eps = Some(r.params.eps);
        cell.c = Some(r.params.c);
        cell.analytic = analytic_label(&cc, &r);
        simulate_resolved(&cc, &r)
    });
    match outcome {
        Ok((report, _)) => {
            cell.sim = classify_run(&report, decay_tol);
            if let Some(o) = report.oscillation {
                cell.decay_rate = Some(o.decay_rate);
                cell.amplitude = Some(o.amplitude);
                cell.period = Some(o.period);
            }
            cell.status = Some(report.status);
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell.label = format!("{}/{}", cell.sim.name(), cell.analytic);
    cell
}

/// Runs the sweep grid in `cfg.analysis.sweep`. Cell failures are recorded in
/// the cell; only an invalid grid or thread setting fails the whole sweep.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    let sw = cfg.analysis.sweep.as_ref().ok_or_else(|| Error::Config("sweep needs an `analysis.sweep` block".into()))?;
    let values = [sw.axes[0].points()?, sw.axes[1].points()?];
    let params = [sw.axes[0].param.as_str(), sw.axes[1].param.as_str()];
    let relative = [sw.axes[0].relative_to_critical, sw.axes[1].relative_to_critical];
    // reject unknown parameter names before any work
    cell_config(cfg, &params, relative, [values[0][0], values[1][0]])?;

    let (eps0, c0) = match resolve(cfg) {
        Ok(r) => {
            let c0 = r.hopf.and_then(|hp| {
                let poly = kappa3_polynomial(&r.eq, &hp, cfg.analysis.normal_form.table).ok()?;
                critical_c(&poly, cfg.analysis.normal_form.c_max).ok()
            });
            (r.hopf.map(|h| h.eps0), c0)
        }
        Err(_) => (None, None),
    };

    let grid: Vec<(usize, usize)> = (0..values[0].len()).flat_map(|i| (0..values[1].len()).map(move |j| (i, j))).collect();
    let work = || -> Vec<SweepCell> {
        grid.par_iter().map(|&(i, j)| run_cell(cfg, sw.decay_tol, i, j, [values[0][i], values[1][j]], &params, relative)).collect()
    };
    let cells = match sweep_threads()? {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::Config(e.to_string()))?.install(work),
        None => work(),
    };
    Ok(SweepReport { params: params.map(String::from), values, eps0, c0, decay_tol: sw.decay_tol, cells })
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.16e}"))
}

impl SweepReport {
    /// One row per cell, fixed columns.
    pub fn to_csv(&self) -> String {
        let mut s = format!("i,j,{},{},eps,c,sim,analytic,label,decay_rate,amplitude,period,error\n", self.params[0], self.params[1]);
        for c in &self.cells {
            let err = c.error.as_deref().unwrap_or("").replace(['"', ','], ";");
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{},{},{},{},{},{},{},{},{}",
                c.i,
                c.j,
                c.values[0],
                c.values[1],
                opt(c.eps),
                opt(c.c),
                c.sim.name(),
                c.analytic,
                c.label,
                opt(c.decay_rate),
                opt(c.amplitude),
                opt(c.period),
                err
            );
        }
        s
    }

    /// Label matrix: rows follow axis 0, columns axis 1.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(e) = self.eps0 {
            let _ = writeln!(s, "eps0 = {e:.10e}");
        }
        if let Some(c) = self.c0 {
            let _ = writeln!(s, "c0 = {c:.10e}");
        }
        let _ = write!(s, "{:>14}", format!("{}\\{}", self.params[0], self.params[1]));
        for v in &self.values[1] {
            let _ = write!(s, " {v:>30.6e}");
        }
        s.push('\n');
        for (i, v) in self.values[0].iter().enumerate() {
            let _ = write!(s, "{v:>14.6e}");
            for c in self.cells.iter().filter(|c| c.i == i) {
                let _ = write!(s, " {:>30}", c.label);
            }
            s.push('\n');
        }
        s
    }
}
