//! Run configuration: one JSON document per run, unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dde::{SimOptions, SystemKind};
use crate::error::{Error, Result};
use crate::model::{ModelParams, NonlinearitySpec, Polynomial};
use crate::normal_form::CubicTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A number, or an offset from the parameter's critical value
/// (`eps0` for `eps`, `c0` for `c`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Value(f64),
    Critical { critical_offset: f64 },
}

impl From<f64> for ParamSpec {
    fn from(v: f64) -> Self {
        ParamSpec::Value(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mu_m: f64,
    pub mu_p: f64,
    pub c: ParamSpec,
    pub eps: ParamSpec,
    pub nonlinearity: NonlinearityConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    /// `f(y) = alpha_m / (1 + (y / y_bar)^hill)`, `g(x) = alpha_p x`.
    Hes1 { alpha_m: f64, alpha_p: f64, y_bar: f64, hill: f64 },
    /// Polynomial coefficients in ascending powers.
    Polynomial { f: Vec<f64>, g: Vec<f64> },
}

impl NonlinearityConfig {
    pub fn build(&self) -> Result<NonlinearitySpec> {
        match self {
            NonlinearityConfig::Hes1 { alpha_m, alpha_p, y_bar, hill } => NonlinearitySpec::hes1(*alpha_m, *alpha_p, *y_bar, *hill),
            NonlinearityConfig::Polynomial { f, g } => Ok(NonlinearitySpec::new(Polynomial::new(f.clone()), Polynomial::new(g.clone()))),
        }
    }

    /// Sets a named nonlinearity parameter; used by sweeps.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match (self, name) {
            (NonlinearityConfig::Hes1 { alpha_m, .. }, "alpha_m") => *alpha_m = value,
            (NonlinearityConfig::Hes1 { alpha_p, .. }, "alpha_p") => *alpha_p = value,
            (NonlinearityConfig::Hes1 { y_bar, .. }, "y_bar") => *y_bar = value,
            (NonlinearityConfig::Hes1 { hill, .. }, "hill") => *hill = value,
            _ => return Err(Error::Config(format!("unknown sweep parameter `{name}` for this nonlinearity"))),
        }
        Ok(())
    }
}

impl ModelConfig {
    /// Parameters with `c` and `eps` taken as given; critical offsets must be
    /// resolved first.
    pub fn params(&self, c: f64, eps: f64) -> Result<ModelParams> {
        ModelParams::new(self.mu_m, self.mu_p, c, eps, self.nonlinearity.build()?)
    }

    pub fn hes1_reference() -> Self {
        ModelConfig {
            mu_m: 0.03,
            mu_p: 0.04,
            c: ParamSpec::Value(0.01),
            eps: ParamSpec::Critical { critical_offset: 0.0 },
            nonlinearity: NonlinearityConfig::Hes1 { alpha_m: 35.0, alpha_p: 10.0, y_bar: 1200.0, hill: 5.0 },
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "mu_m" => self.mu_m = value,
            "mu_p" => self.mu_p = value,
            "c" => self.c = ParamSpec::Value(value),
            "eps" => self.eps = ParamSpec::Value(value),
            other => self.nonlinearity.set(other, value)?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub equilibrium: EquilibriumConfig,
    pub stability: StabilityConfig,
    pub normal_form: NormalFormConfig,
    pub simulate: SimulateConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<[f64; 2]>,
    pub positive: bool,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig { seed: None, positive: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    /// Number of critical values beyond `eps0` to list.
    pub eps_k: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalFormConfig {
    pub table: CubicTable,
    /// Upper end of the search interval for `c0`.
    pub c_max: f64,
}

impl Default for NormalFormConfig {
    fn default() -> Self {
        NormalFormConfig { table: CubicTable::Tabulated, c_max: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Equilibrium plus a `sin^2` bump; `width` defaults to one basal delay
    /// (`eps` for the original system, `1` for the transformed one).
    Bump {
        perturbation: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<f64>,
    },
    /// Constant history, the equilibrium when `state` is omitted.
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub system: SystemKind,
    /// End of the run in the system's own time (`t` or `eta`).
    pub t_end: f64,
    pub initial: InitialConfig,
    /// Initial delay for the original system; defaults to `eps`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau0: Option<f64>,
    pub solver: SimOptions,
    /// Oscillation measurement starts at this `eta`.
    pub transient: f64,
    /// 0 for `x`/`r`, 1 for `y`/`xi`.
    pub component: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            system: SystemKind::Transformed,
            t_end: 1500.0,
            initial: InitialConfig::Bump { perturbation: [1.0, 0.0], width: None },
            tau0: None,
            solver: SimOptions { sample_dt: Some(0.05), ..SimOptions::default() },
            transient: 50.0,
            component: 0,
        }
    }
}

/// Either an explicit `values` list or an evenly spaced `start`/`stop`/`count` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// `eps`, `c`, `mu_m`, `mu_p`, or a nonlinearity parameter.
    pub param: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Values are offsets from `eps0` (for `eps`) or `c0` (for `c`).
    #[serde(default)]
    pub relative_to_critical: bool,
}

impl Axis {
    pub fn list(param: &str, values: Vec<f64>, relative_to_critical: bool) -> Self {
        Axis { param: param.into(), values: Some(values), start: None, stop: None, count: None, relative_to_critical }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        let bad = |msg: &str| Error::Config(format!("sweep axis `{}`: {msg}", self.param));
        let v = match (&self.values, self.start, self.stop, self.count) {
            (Some(values), None, None, None) => values.clone(),
            (None, Some(start), Some(stop), Some(count)) => match count {
                0 => Vec::new(),
                1 => vec![start],
                n => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
            },
            _ => return Err(bad("give either `values` or all of `start`, `stop`, `count`")),
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(bad("needs at least one finite value"));
        }
        if self.relative_to_critical && !matches!(self.param.as_str(), "eps" | "c") {
            return Err(bad("`relative_to_critical` applies to eps and c only"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: [Axis; 2],
    /// Decay rates (per unit `eta`) above this count as convergence.
    #[serde(default = "default_decay_tol")]
    pub decay_tol: f64,
}

fn default_decay_tol() -> f64 {
    2e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hes1_reference() -> Self {
        RunConfig { model: ModelConfig::hes1_reference(), analysis: AnalysisConfig::default(), output: OutputConfig::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips() {
        let cfg = RunConfig::hes1_reference();
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::hes1_reference().to_json()).unwrap();
        v["model"]["mu_x"] = serde_json::json!(1.0);
        assert!(matches!(RunConfig::from_json(&v.to_string()), Err(Error::Config(_))));
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::hes1_reference().to_json()).unwrap();
        v["analysis"]["simulate"]["solver"]["rtoll"] = serde_json::json!(1.0);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn param_spec_forms() {
        let v: ParamSpec = serde_json::from_str("0.5").unwrap();
        assert_eq!(v, ParamSpec::Value(0.5));
        let v: ParamSpec = serde_json::from_str(r#"{"critical_offset": -0.1}"#).unwrap();
        assert_eq!(v, ParamSpec::Critical { critical_offset: -0.1 });
        assert!(serde_json::from_str::<ParamSpec>(r#"{"critical": 1}"#).is_err());
    }

    #[test]
    fn axis_points() {
        let a: Axis = serde_json::from_str(r#"{"param": "eps", "start": 1, "stop": 2, "count": 3}"#).unwrap();
        assert_eq!(a.points().unwrap(), vec![1.0, 1.5, 2.0]);
        let a: Axis = serde_json::from_str(r#"{"param": "c", "values": [0.1], "relative_to_critical": true}"#).unwrap();
        assert_eq!(a.points().unwrap(), vec![0.1]);
        let a: Axis = serde_json::from_str(r#"{"param": "mu_m", "values": [0.1], "relative_to_critical": true}"#).unwrap();
        assert!(a.points().is_err());
        let a: Axis = serde_json::from_str(r#"{"param": "c", "values": [0.1], "start": 0}"#).unwrap();
        assert!(a.points().is_err());
        assert!(serde_json::from_str::<Axis>(r#"{"param": "c", "value": [0.1]}"#).is_err());
    }
}
