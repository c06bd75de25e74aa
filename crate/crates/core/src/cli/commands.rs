use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{InitialConfig, ParamSpec, RunConfig};
use crate::dde::{
    equilibrium_bump, integrate_sdd, integrate_transformed, measure_oscillation, Event, InitialHistory, Oscillation, Status, SystemKind,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::model::{find_equilibrium, Equilibrium, ModelParams};
use crate::normal_form::{critical_c, critical_frame, kappa3_polynomial, normal_form, quadratic_coeffs, CubicTable, Direction, Kappa3Polynomial};
use crate::stability::{char_eval, classify_stability, solve_hopf, solve_hopf_direct, CharParams, HopfPoint, StabilityClass};

/// A config with `c` and `eps` turned into numbers.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: ModelParams,
    pub eq: Equilibrium,
    /// `None` when the steady state is stable for every delay.
    pub hopf: Option<HopfPoint>,
}

/// Equilibrium and Hopf point do not depend on `c` or `eps`, so they are
/// computed first and the critical offsets resolved against them.
pub fn resolve(cfg: &RunConfig) -> Result<Resolved> {
    let m = &cfg.model;
    let probe = m.params(0.0, 1.0)?;
    let eqc = &cfg.analysis.equilibrium;
    let eq = find_equilibrium(&probe, eqc.seed, eqc.positive)?;
    let hopf = match solve_hopf(m.mu_m, m.mu_p, eq.coupling()) {
        Ok(h) => Some(h),
        Err(Error::HypothesisViolated { .. }) => None,
        Err(e) => return Err(e),
    };
    let need_hopf = || hopf.ok_or_else(|| Error::Config("a critical offset was requested but the steady state has no Hopf point".into()));
    let eps = match m.eps {
        ParamSpec::Value(v) => v,
        ParamSpec::Critical { critical_offset } => need_hopf()?.eps0 + critical_offset,
    };
    let c = match m.c {
        ParamSpec::Value(v) => v,
        ParamSpec::Critical { critical_offset } => {
            let nf = &cfg.analysis.normal_form;
            let poly = kappa3_polynomial(&eq, &need_hopf()?, nf.table)?;
            critical_c(&poly, nf.c_max)? + critical_offset
        }
    };
    Ok(Resolved { params: m.params(c, eps)?, eq, hopf })
}

fn line(s: &mut String, key: &str, v: impl std::fmt::Display) {
    let _ = writeln!(s, "{key:<18} {v}");
}

fn cx(z: Complex64) -> String {
    format!("{:.10e} {} {:.10e}i", z.re, if z.im < 0.0 { '-' } else { '+' }, z.im.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumReport {
    pub r_star: f64,
    pub xi_star: f64,
    /// `f'`, `f''`, `f'''` at `xi*`.
    pub f_derivatives: [f64; 3],
    /// `g'`, `g''`, `g'''` at `r*`.
    pub g_derivatives: [f64; 3],
    pub coupling: f64,
    pub residuals: [f64; 2],
}

pub fn equilibrium_report(cfg: &RunConfig) -> Result<EquilibriumReport> {
    let m = &cfg.model;
    let params = m.params(0.0, 1.0)?;
    let eq = find_equilibrium(&params, cfg.analysis.equilibrium.seed, cfg.analysis.equilibrium.positive)?;
    Ok(EquilibriumReport {
        r_star: eq.r_star,
        xi_star: eq.xi_star,
        f_derivatives: [eq.f1, eq.f2, eq.f3],
        g_derivatives: [eq.g1, eq.g2, eq.g3],
        coupling: eq.coupling(),
        residuals: eq.residuals(&params),
    })
}

impl EquilibriumReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        line(&mut s, "r*", format!("{:.16e}", self.r_star));
        line(&mut s, "xi*", format!("{:.16e}", self.xi_star));
        let [f1, f2, f3] = self.f_derivatives;
        let [g1, g2, g3] = self.g_derivatives;
        line(&mut s, "f', f'', f'''", format!("{f1:.16e} {f2:.16e} {f3:.16e}"));
        line(&mut s, "g', g'', g'''", format!("{g1:.16e} {g2:.16e} {g3:.16e}"));
        line(&mut s, "f'g'", format!("{:.16e}", self.coupling));
        line(&mut s, "residuals", format!("{:.3e} {:.3e}", self.residuals[0], self.residuals[1]));
        s
    }

    pub fn to_csv(&self) -> String {
        let [f1, f2, f3] = self.f_derivatives;
        let [g1, g2, g3] = self.g_derivatives;
        format!(
            "r_star,xi_star,f1,f2,f3,g1,g2,g3,coupling,residual_r,residual_xi\n{:.16e},{:.16e},{f1:.16e},{f2:.16e},{f3:.16e},{g1:.16e},{g2:.16e},{g3:.16e},{:.16e},{:.16e},{:.16e}\n",
            self.r_star, self.xi_star, self.coupling, self.residuals[0], self.residuals[1]
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalEps {
    pub eps0: f64,
    pub omega: f64,
    pub l: f64,
    pub dalpha_deps: f64,
    /// `eps0` and `omega` from the two defining equations without the closed form.
    pub direct: [f64; 2],
    pub defining_residuals: [f64; 2],
}

/// Further crossing: `char(i beta, eps) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsK {
    pub k: u32,
    pub eps: f64,
    pub beta: f64,
    pub char_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityReport {
    pub eps: f64,
    pub coupling: f64,
    pub classification: StabilityClass,
    pub hopf: Option<CriticalEps>,
    pub eps_k: Vec<EpsK>,
}

pub fn stability_report(cfg: &RunConfig) -> Result<StabilityReport> {
    let r = resolve(cfg)?;
    let p = &r.params;
    let classification = classify_stability(&r.eq, p.mu_m, p.mu_p, p.eps)?;
    let mut eps_k = Vec::new();
    let hopf = match r.hopf {
        None => None,
        Some(hp) => {
            let (e, w) = solve_hopf_direct(p.mu_m, p.mu_p, hp.coupling)?;
            for k in 1..=cfg.analysis.stability.eps_k {
                let eps = hp.eps_k(k);
                let beta = hp.omega + k as f64 * std::f64::consts::PI;
                let cp = CharParams::new(p.mu_m, p.mu_p, hp.coupling, eps)?;
                let z = char_eval(Complex64::new(0.0, beta), &cp);
                eps_k.push(EpsK { k, eps, beta, char_residual: z.norm() / (beta * beta) });
            }
            Some(CriticalEps {
                eps0: hp.eps0,
                omega: hp.omega,
                l: hp.l,
                dalpha_deps: hp.dalpha_deps,
                direct: [e, w],
                defining_residuals: hp.defining_residuals(),
            })
        }
    };
    Ok(StabilityReport { eps: p.eps, coupling: r.eq.coupling(), classification, hopf, eps_k })
}

impl StabilityReport {
    fn class_name(&self) -> &'static str {
        match self.classification {
            StabilityClass::StableForAllEps => "StableForAllEps",
            StabilityClass::StableBelowEps0 { .. } => "StableBelowEps0",
            StabilityClass::Unstable { .. } => "Unstable",
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        line(&mut s, "eps", self.eps);
        line(&mut s, "f'g'", format!("{:.16e}", self.coupling));
        match &self.hopf {
            None => line(&mut s, "hopf", "none (stable for all eps)"),
            Some(h) => {
                line(&mut s, "eps0", format!("{:.16e}", h.eps0));
                line(&mut s, "omega", format!("{:.16e}", h.omega));
                line(&mut s, "l", format!("{:.16e}", h.l));
                line(&mut s, "dalpha/deps", format!("{:.16e}", h.dalpha_deps));
                line(&mut s, "direct eps0,omega", format!("{:.16e} {:.16e}", h.direct[0], h.direct[1]));
            }
        }
        for e in &self.eps_k {
            line(&mut s, &format!("eps_{}", e.k), format!("{:.16e} (beta {:.10e}, residual {:.2e})", e.eps, e.beta, e.char_residual));
        }
        line(&mut s, "classification", self.class_name());
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,eps,beta,char_residual\n");
        if let Some(h) = &self.hopf {
            let _ = writeln!(s, "0,{:.16e},{:.16e},{:.16e}", h.eps0, h.omega, 0.0);
        }
        for e in &self.eps_k {
            let _ = writeln!(s, "{},{:.16e},{:.16e},{:.16e}", e.k, e.eps, e.beta, e.char_residual);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalFormReport {
    pub c: f64,
    pub eps: f64,
    pub eps0: f64,
    pub omega: f64,
    pub table: CubicTable,
    pub kappa1: Complex64,
    pub kappa3: Complex64,
    pub direction: Direction,
    pub kappa3_polynomial: Kappa3Polynomial,
    /// Smallest `c` in `(0, c_max]` where `Re kappa3` changes sign.
    pub c0: Option<f64>,
    /// Characteristic value at `2 i omega`.
    pub resonance_value: Complex64,
    /// Cycle radius `|A|` at the configured detuning `eps - eps0`, if a cycle exists there.
    pub cycle_radius: Option<f64>,
}

pub fn normal_form_report(cfg: &RunConfig) -> Result<NormalFormReport> {
    let r = resolve(cfg)?;
    let p = &r.params;
    let hp = r.hopf.ok_or(Error::HypothesisViolated { mu_product: p.mu_m * p.mu_p, neg_coupling: -r.eq.coupling() })?;
    let table = cfg.analysis.normal_form.table;
    let frame = critical_frame(&r.eq, &hp)?;
    let qc = quadratic_coeffs(&r.eq, &hp, &frame, p.c)?;
    let nf = normal_form(&r.eq, &hp, &frame, &qc, table)?;
    let poly = kappa3_polynomial(&r.eq, &hp, table)?;
    let c0 = match critical_c(&poly, cfg.analysis.normal_form.c_max) {
        Ok(c0) => Some(c0),
        Err(Error::NoSignChange { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(NormalFormReport {
        c: p.c,
        eps: p.eps,
        eps0: hp.eps0,
        omega: hp.omega,
        table,
        kappa1: nf.kappa1,
        kappa3: nf.kappa3,
        direction: nf.direction,
        kappa3_polynomial: poly,
        c0,
        resonance_value: qc.resonance_value,
        cycle_radius: nf.cycle_radius(p.eps - hp.eps0),
    })
}

impl NormalFormReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        line(&mut s, "c", self.c);
        line(&mut s, "eps0", format!("{:.16e}", self.eps0));
        line(&mut s, "omega", format!("{:.16e}", self.omega));
        line(&mut s, "table", format!("{:?}", self.table).to_lowercase());
        line(&mut s, "kappa1", cx(self.kappa1));
        line(&mut s, "kappa3", cx(self.kappa3));
        let [a, b, c] = self.kappa3_polynomial.re;
        line(&mut s, "Re kappa3(c)", format!("{a:.10e} c^2 + {b:.10e} c + {c:.10e}"));
        let [a, b, c] = self.kappa3_polynomial.im;
        line(&mut s, "Im kappa3(c)", format!("{a:.10e} c^2 + {b:.10e} c + {c:.10e}"));
        line(&mut s, "direction", format!("{:?}", self.direction));
        line(&mut s, "c0", self.c0.map_or("none".into(), |c| format!("{c:.10e}")));
        line(&mut s, "char(2i omega)", cx(self.resonance_value));
        line(&mut s, "cycle radius", self.cycle_radius.map_or("none".into(), |r| format!("{r:.6e}")));
        s
    }

    pub fn to_csv(&self) -> String {
        let k = &self.kappa3_polynomial;
        format!(
            "c,kappa1_re,kappa1_im,kappa3_re,kappa3_im,re_c2,re_c1,re_c0,im_c2,im_c1,im_c0,c0,direction\n{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            self.c,
            self.kappa1.re,
            self.kappa1.im,
            self.kappa3.re,
            self.kappa3.im,
            k.re[0],
            k.re[1],
            k.re[2],
            k.im[0],
            k.im[1],
            k.im[2],
            self.c0.map_or(String::new(), |c| format!("{c:.16e}")),
            format!("{:?}", self.direction).to_lowercase()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateReport {
    pub system: SystemKind,
    pub eps: f64,
    pub c: f64,
    pub t_end: f64,
    pub status: Status,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub events: Vec<Event>,
    /// Largest threshold-condition residual over accepted steps.
    pub max_delay_residual: f64,
    /// Summary of the chosen component on the `eta` axis after the transient.
    pub oscillation: Option<Oscillation>,
    /// Why `oscillation` is missing.
    pub measurement: Option<String>,
}

impl SimulateReport {
    pub fn event_log(&self) -> String {
        let mut s = format!("status: {:?}\n", self.status);
        for e in &self.events {
            let _ = writeln!(s, "event {:?} at t = {:.10e} (value {:.6e})", e.kind, e.t, e.value);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        line(&mut s, "system", format!("{:?}", self.system).to_lowercase());
        line(&mut s, "eps", self.eps);
        line(&mut s, "c", self.c);
        line(&mut s, "status", format!("{:?}", self.status));
        line(&mut s, "steps", format!("{} accepted, {} rejected", self.accepted_steps, self.rejected_steps));
        line(&mut s, "delay residual", format!("{:.3e}", self.max_delay_residual));
        match (&self.oscillation, &self.measurement) {
            (Some(o), _) => {
                line(&mut s, "amplitude", format!("{:.6e}", o.amplitude));
                line(&mut s, "period (eta)", format!("{:.6e}", o.period));
                line(&mut s, "decay rate", format!("{:.6e}", o.decay_rate));
                line(&mut s, "mean", format!("{:.6e}", o.mean));
            }
            (None, Some(m)) => line(&mut s, "oscillation", m),
            (None, None) => {}
        }
        s
    }
}

fn initial_history(cfg: &RunConfig, r: &Resolved) -> Result<InitialHistory> {
    let sim = &cfg.analysis.simulate;
    let basal = match sim.system {
        SystemKind::Original => r.params.eps,
        SystemKind::Transformed => 1.0,
    };
    match &sim.initial {
        InitialConfig::Bump { perturbation, width } => equilibrium_bump(&r.eq, *perturbation, width.unwrap_or(basal)),
        InitialConfig::Constant { state } => {
            let s = state.unwrap_or([r.eq.r_star, r.eq.xi_star]);
            // room for delays longer than the basal one
            InitialHistory::constant(s, 10.0 * basal)
        }
    }
}

/// Runs the configured simulation and measures it on the `eta` axis.
pub fn simulate(cfg: &RunConfig) -> Result<(SimulateReport, Trajectory)> {
    let r = resolve(cfg)?;
    simulate_resolved(cfg, &r)
}

pub(crate) fn simulate_resolved(cfg: &RunConfig, r: &Resolved) -> Result<(SimulateReport, Trajectory)> {
    let sim = &cfg.analysis.simulate;
    if sim.component > 1 {
        return Err(Error::Config(format!("component must be 0 or 1, got {}", sim.component)));
    }
    let init = initial_history(cfg, r)?;
    let p = &r.params;
    let traj = match sim.system {
        SystemKind::Original => integrate_sdd(&init, sim.tau0.unwrap_or(p.eps), p, sim.t_end, &sim.solver)?,
        SystemKind::Transformed => integrate_transformed(&init, p, sim.t_end, &sim.solver)?,
    };
    let eta = traj.eta(p);
    let (oscillation, measurement) = match measure_oscillation(&eta, &traj.component(sim.component), sim.transient) {
        Ok(o) => (Some(o), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = SimulateReport {
        system: sim.system,
        eps: p.eps,
        c: p.c,
        t_end: sim.t_end,
        status: traj.status.clone(),
        accepted_steps: traj.steps.len(),
        rejected_steps: traj.rejected_steps,
        events: traj.events.clone(),
        max_delay_residual: traj.steps.iter().map(|s| s.delay_residual).fold(0.0, f64::max),
        oscillation,
        measurement,
    };
    Ok((report, traj))
}
