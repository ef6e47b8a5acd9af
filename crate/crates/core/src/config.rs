//! Run configuration: a schema-versioned JSON document, its validation
//! against every module's preconditions, and the builders that turn it into
//! solver inputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::coeffs::{check_weight, rate_set, CoefficientSet, Perturbation, RateSet};
use crate::dynamics::{DataFamily, InitialData, Problem, StepControl};
use crate::energy::EnergyParams;
use crate::fields::{Grid, MAX_DIM};
use crate::nonlinearity::{Monomial, Nonlinearity, PowerTerm};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("sweep: {0}")]
    Sweep(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffConfig {
    pub beta: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "two")]
    pub nu: f64,
    /// Drift amplitudes, one per axis; omitted means no drift.
    #[serde(default)]
    pub c_amp: Vec<f64>,
    #[serde(default)]
    pub d_amp: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    /// Monomials `c |u|^{p1} |u_x|^{p2} |u_t|^{p3}` (one dimension).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<Monomial>>,
    /// Single power `c |u|^{p-1} u` (two or more dimensions).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerTerm>,
    /// Downgrade the supercriticality rule to a warning, for contrast runs.
    #[serde(default)]
    pub allow_subcritical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_family")]
    pub family: DataFamily,
    #[serde(default)]
    pub seed: u64,
    pub epsilon: f64,
    /// Weight exponent; defaults to 1 for `n = 1` and `n/2 + 2` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default)]
    pub u1_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub s_end: f64,
    #[serde(default = "default_ds_out")]
    pub ds_out: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_ds_max")]
    pub ds_max: f64,
    #[serde(default = "default_ceiling")]
    pub blowup_ceiling: f64,
    /// Physical-time cap; snapshots beyond it are skipped.
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "half")]
    pub delta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "half")]
    pub eta_tilde: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_e2: Option<f64>,
    #[serde(rename = "C0", default = "default_c0")]
    pub c0: f64,
    #[serde(rename = "C1", default = "default_c1")]
    pub c1: f64,
    /// Decay-fit window in `B+1`; defaults to `[20, 500]` (n = 1) or
    /// `[10, 100]` (n >= 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default = "default_slope_tol")]
    pub slope_tol: f64,
    #[serde(default = "default_pad")]
    pub spectral_pad: usize,
    /// Start of the window for the envelope statistics.
    #[serde(default = "two")]
    pub envelope_from: f64,
    /// Start of the tail for the limit-mass fit; defaults to the second half.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_from: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub id: String,
    pub dimension: usize,
    pub grid: GridConfig,
    /// Grid of the similarity frame; defaults to `L = 20` with `N = 2048`
    /// (n = 1), `L = 16` with `N = 512` (n = 2) or `L = 16` with `N = 128`. Its physical spacing grows
    /// like `e^{s/2}`, so weakly damped runs need the fine 1D default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaled_grid: Option<GridConfig>,
    pub coeffs: CoeffConfig,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    pub data: DataConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Dotted-path variations expanded by `sweep` into a cartesian product.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<BTreeMap<String, Vec<Value>>>,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}
fn default_family() -> DataFamily {
    DataFamily::GaussianBump
}
fn default_ds_out() -> f64 {
    0.1
}
fn default_dt_max() -> f64 {
    StepControl::default().dt_max
}
fn default_cfl() -> f64 {
    StepControl::default().cfl
}
fn default_ds_max() -> f64 {
    StepControl::default().ds_max
}
fn default_ceiling() -> f64 {
    StepControl::default().blowup_ceiling
}
fn default_t_max() -> f64 {
    1e12
}
fn default_max_steps() -> u64 {
    StepControl::default().max_steps
}
fn default_eta() -> f64 {
    0.01
}
fn default_c0() -> f64 {
    64.0
}
fn default_c1() -> f64 {
    16.0
}
fn default_slope_tol() -> f64 {
    crate::analysis::SLOPE_TOL
}
fn default_pad() -> usize {
    4
}

/// One validation finding, addressed by its dotted field path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ConfigReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: &str, message: impl Into<String>) {
        self.warnings.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl RunConfig {
    /// Parses a JSON document, reporting schema errors with their field path.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        serde_path_to_error::deserialize(value).map_err(|e| ConfigError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn weight_m(&self) -> f64 {
        self.data
            .m
            .unwrap_or(if self.dimension == 1 { 1.0 } else { 0.5 * self.dimension as f64 + 2.0 })
    }

    pub fn fit_window(&self) -> [f64; 2] {
        self.analysis
            .fit_window
            .unwrap_or(if self.dimension == 1 { [20.0, 500.0] } else { [10.0, 100.0] })
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.dimension, self.grid.half_width, self.grid.points)
            .map_err(|e| ConfigError::Invalid(format!("grid: {e}")))
    }

    pub fn scaled_grid(&self) -> Result<Grid, ConfigError> {
        let g = self.scaled_grid.clone().unwrap_or(if self.dimension == 1 {
            GridConfig { half_width: 20.0, points: 2048 }
        } else if self.dimension == 2 {
            GridConfig { half_width: 16.0, points: 512 }
        } else {
            GridConfig { half_width: 16.0, points: 128 }
        });
        Grid::new(self.dimension, g.half_width, g.points)
            .map_err(|e| ConfigError::Invalid(format!("scaled_grid: {e}")))
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        match (&self.nonlinearity.terms, &self.nonlinearity.power) {
            (_, Some(p)) => Nonlinearity::Power(*p),
            (Some(t), None) => Nonlinearity::Monomials(t.clone()),
            (None, None) => Nonlinearity::default(),
        }
    }

    pub fn coefficients(&self) -> Result<CoefficientSet, ConfigError> {
        let c = &self.coeffs;
        let c_amp = if c.c_amp.is_empty() { vec![0.0; self.dimension] } else { c.c_amp.clone() };
        let pert = Perturbation {
            gamma: c.gamma,
            nu: c.nu,
            c_amp,
            d_amp: c.d_amp,
        };
        CoefficientSet::new(self.dimension, c.beta, c.mu, pert)
            .map_err(|e| ConfigError::Invalid(format!("coeffs: {e}")))
    }

    pub fn problem(&self) -> Result<Problem, ConfigError> {
        Ok(Problem {
            coeffs: self.coefficients()?,
            nonlinearity: self.nonlinearity(),
        })
    }

    pub fn initial_data(&self) -> InitialData {
        let d = &self.data;
        InitialData {
            family: d.family,
            epsilon: d.epsilon,
            width: d.width,
            center: if d.center.is_empty() { vec![0.0; self.dimension] } else { d.center.clone() },
            u1_scale: d.u1_scale,
            seed: d.seed,
        }
    }

    pub fn step_control(&self) -> StepControl {
        let t = &self.time;
        StepControl {
            cfl: t.cfl,
            dt_max: t.dt_max,
            ds_max: t.ds_max,
            blowup_ceiling: t.blowup_ceiling,
            max_steps: t.max_steps,
        }
    }

    /// Snapshot times `s_k = k·ds_out`, `k = 0..=round(s_end/ds_out)`.
    pub fn s_values(&self) -> Vec<f64> {
        let k_end = (self.time.s_end / self.time.ds_out).round() as usize;
        (0..=k_end).map(|k| k as f64 * self.time.ds_out).collect()
    }

    pub fn rates(&self) -> Result<RateSet, ConfigError> {
        let coeffs = self.coefficients()?;
        let l1 = self.nonlinearity().lambda1(self.dimension, self.coeffs.beta);
        rate_set(self.dimension, self.weight_m(), self.analysis.eta, &coeffs, l1)
            .map_err(|e| ConfigError::Invalid(format!("rates: {e}")))
    }

    pub fn energy_params(&self) -> Result<EnergyParams, ConfigError> {
        let a = &self.analysis;
        Ok(EnergyParams {
            delta: a.delta,
            eta_e2: a.eta_e2,
            eta_tilde: a.eta_tilde,
            c0: a.c0,
            c1: a.c1,
            lambda: self.rates()?.lambda,
            m: self.weight_m(),
            pad: a.spectral_pad,
        })
    }

    /// Checks every precondition before any compute. Hard violations land in
    /// `errors`, advisory ones in `warnings`.
    pub fn validate(&self) -> ConfigReport {
        let mut rep = ConfigReport::default();
        let n = self.dimension;
        if self.schema_version != SCHEMA_VERSION {
            rep.error(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            );
        }
        if self.id.is_empty() || self.id.contains(['/', '\\']) || self.id.starts_with('.') {
            rep.error("id", "must be a non-empty plain directory name");
        }
        if !(1..=MAX_DIM).contains(&n) {
            rep.error("dimension", format!("must lie in 1..={MAX_DIM}, got {n}"));
            return rep;
        }
        if let Err(e) = self.grid() {
            rep.error("grid", e.to_string());
        }
        if let Err(e) = self.scaled_grid() {
            rep.error("scaled_grid", e.to_string());
        }

        let c = &self.coeffs;
        if !(-1.0..1.0).contains(&c.beta) {
            rep.error("coeffs.beta", format!("beta ∈ [−1,1) required, got {}", c.beta));
        }
        if !(c.mu > 0.0) || !c.mu.is_finite() {
            rep.error("coeffs.mu", format!("must be positive, got {}", c.mu));
        }
        if !c.c_amp.is_empty() && c.c_amp.len() != n {
            rep.error("coeffs.c_amp", format!("expected {n} components, got {}", c.c_amp.len()));
        }
        if rep.errors.iter().all(|e| !e.path.starts_with("coeffs")) {
            if let Err(e) = self.coefficients() {
                rep.error("coeffs", e.to_string());
            }
        }

        let nl = &self.nonlinearity;
        if nl.terms.is_some() && nl.power.is_some() {
            rep.error("nonlinearity", "give either `terms` or `power`, not both");
        } else {
            let check = self.nonlinearity().validate(n, c.beta, nl.allow_subcritical);
            for f in check.failures() {
                rep.error(&format!("nonlinearity.{}", f.rule), f.detail.clone());
            }
            for w in check.warnings() {
                rep.warn(&format!("nonlinearity.{}", w.rule), w.detail.clone());
            }
        }

        let d = &self.data;
        if !(d.epsilon > 0.0) || !d.epsilon.is_finite() {
            rep.error("data.epsilon", format!("must be positive, got {}", d.epsilon));
        }
        if let Err(e) = check_weight(n, self.weight_m()) {
            let msg = if n == 1 { format!("m=1 (n=1) required: {e}") } else { e.to_string() };
            rep.error("data.m", msg);
        }
        if !(d.width > 0.0) || !d.width.is_finite() {
            rep.error("data.width", format!("must be positive, got {}", d.width));
        }
        if !d.center.is_empty() && d.center.len() != n {
            rep.error("data.center", format!("expected {n} components, got {}", d.center.len()));
        }
        if !d.u1_scale.is_finite() {
            rep.error("data.u1_scale", "must be finite");
        }

        let t = &self.time;
        for (path, v) in [
            ("time.s_end", t.s_end),
            ("time.ds_out", t.ds_out),
            ("time.dt_max", t.dt_max),
            ("time.cfl", t.cfl),
            ("time.ds_max", t.ds_max),
            ("time.blowup_ceiling", t.blowup_ceiling),
            ("time.t_max", t.t_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                rep.error(path, format!("must be positive and finite, got {v}"));
            }
        }
        if t.ds_out > 0.0 && t.s_end > 0.0 {
            let k = t.s_end / t.ds_out;
            if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
                rep.error("time.s_end", "must be a whole multiple of ds_out");
            } else if k.round() < 2.0 {
                rep.error("time.s_end", "needs at least three snapshots");
            }
        }
        if t.max_steps == 0 {
            rep.error("time.max_steps", "must be positive");
        }

        let a = &self.analysis;
        if n >= 2 && !(a.delta > 0.0 && a.delta < 1.0) {
            rep.error("analysis.delta", format!("must lie in (0, 1), got {}", a.delta));
        }
        if !(a.eta > 0.0) || !a.eta.is_finite() {
            rep.error("analysis.eta", format!("must be positive, got {}", a.eta));
        }
        if !(a.eta_tilde > 0.0) || !a.eta_tilde.is_finite() {
            rep.error("analysis.eta_tilde", format!("must be positive, got {}", a.eta_tilde));
        }
        if let Some(e2) = a.eta_e2 {
            let dt = self.weight_m() - 0.5 * n as f64;
            if !(e2 > 0.0 && e2 < dt) {
                rep.error("analysis.eta_e2", format!("must lie in (0, m - n/2) = (0, {dt}), got {e2}"));
            }
        }
        if !(a.c1 > 8.0) {
            rep.error("analysis.C1", format!("must exceed 8, got {}", a.c1));
        }
        if !(a.c0 > 2.0 * a.c1) {
            rep.error("analysis.C0", format!("must exceed 2·C1 = {}, got {}", 2.0 * a.c1, a.c0));
        }
        if a.spectral_pad == 0 || !a.spectral_pad.is_power_of_two() {
            rep.error("analysis.spectral_pad", "must be a power of two");
        }
        if !(a.slope_tol >= 0.0) {
            rep.error("analysis.slope_tol", "must be non-negative");
        }
        let w = self.fit_window();
        if !(w[0] >= 1.0 && w[1] > w[0]) {
            rep.error("analysis.fit_window", format!("need 1 <= lo < hi, got {w:?}"));
        } else if t.s_end.is_finite() && w[1] > t.s_end.exp() * (1.0 + 1e-9) {
            rep.warn(
                "analysis.fit_window",
                format!("upper end {} lies beyond B+1 = e^s_end = {:.4}", w[1], t.s_end.exp()),
            );
        }

        // the spreading Gaussian must stay away from the periodic boundary
        if rep.ok() {
            if let Ok(coeffs) = self.coefficients() {
                let t_end = coeffs.t_of_s(t.s_end).min(t.t_max);
                let need = 8.0 * (coeffs.big_b(t_end) + 1.0).sqrt();
                if self.grid.half_width < need {
                    rep.warn(
                        "grid.L",
                        format!("L = {} is below 8·sqrt(B(t_end)+1) = {need:.2}", self.grid.half_width),
                    );
                }
            }
        }
        rep
    }

    /// Expands the `sweep` block into concrete configurations, one per point
    /// of the cartesian product, with ids `<id>-<k>`.
    pub fn expand_sweep(&self) -> Result<Vec<RunConfig>, ConfigError> {
        let Some(axes) = &self.sweep else {
            return Ok(vec![self.clone()]);
        };
        let mut base = serde_json::to_value(self).expect("config serializes");
        base.as_object_mut().expect("object").remove("sweep");
        let axes: Vec<(&String, &Vec<Value>)> = axes.iter().collect();
        if axes.iter().any(|(_, v)| v.is_empty()) {
            return Err(ConfigError::Sweep("every axis needs at least one value".into()));
        }
        let total: usize = axes.iter().map(|(_, v)| v.len()).product();
        let mut out = Vec::with_capacity(total);
        for k in 0..total {
            let mut doc = base.clone();
            let mut rem = k;
            for (path, values) in axes.iter().rev() {
                let v = &values[rem % values.len()];
                rem /= values.len();
                set_path(&mut doc, path, v.clone())?;
            }
            doc["id"] = Value::String(format!("{}-{k}", self.id));
            out.push(RunConfig::from_value(doc)?);
        }
        Ok(out)
    }
}

/// Sets `doc[a][b]...` for the dotted path `a.b...`, creating objects as
/// needed.
fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| ConfigError::Sweep(format!("`{path}` does not address an object field")))?;
        if i + 1 == parts.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry((*key).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(ConfigError::Sweep("empty path".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> String {
        r#"{
            "schema_version": 1,
            "id": "demo",
            "dimension": 1,
            "grid": {"L": 200.0, "N": 2048},
            "coeffs": {"beta": 0.0},
            "data": {"epsilon": 0.1},
            "time": {"s_end": 6.3}
        }"#
        .into()
    }

    fn with(path: &str, value: Value) -> RunConfig {
        let mut doc: Value = serde_json::from_str(&base()).unwrap();
        set_path(&mut doc, path, value).unwrap();
        RunConfig::from_value(doc).unwrap()
    }

    #[test]
    fn minimal_config_is_valid() {
        let cfg = RunConfig::from_json_str(&base()).unwrap();
        let rep = cfg.validate();
        assert!(rep.ok(), "{rep:?}");
        assert_eq!(cfg.weight_m(), 1.0);
        assert_eq!(cfg.fit_window(), [20.0, 500.0]);
        assert_eq!(cfg.s_values().len(), 64);
        assert!((cfg.rates().unwrap().exponent - 0.49).abs() < 1e-12);
    }

    #[test]
    fn beta_out_of_range_rejected() {
        let rep = with("coeffs.beta", 1.2.into()).validate();
        assert!(rep.errors.iter().any(|e| e.path == "coeffs.beta" && e.message.contains("beta ∈ [−1,1)")));
    }

    #[test]
    fn one_dimensional_weight_fixed() {
        let rep = with("data.m", 2.0.into()).validate();
        assert!(rep.errors.iter().any(|e| e.path == "data.m" && e.message.contains("m=1 (n=1)")));
    }

    #[test]
    fn two_dimensional_cubic_passes() {
        let mut doc: Value = serde_json::from_str(&base()).unwrap();
        doc["dimension"] = 2.into();
        doc["grid"] = serde_json::json!({"L": 80.0, "N": 256});
        doc["data"]["m"] = 3.0.into();
        doc["nonlinearity"] = serde_json::json!({"power": {"coeff": -1.0, "p": 3.0}});
        doc["time"]["s_end"] = 4.6.into();
        let cfg = RunConfig::from_value(doc).unwrap();
        let rep = cfg.validate();
        assert!(rep.ok(), "{rep:?}");
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let bad = base().replace("\"epsilon\": 0.1", "\"epsilon\": \"big\"");
        match RunConfig::from_json_str(&bad) {
            Err(ConfigError::Schema { path, .. }) => assert_eq!(path, "data.epsilon"),
            other => panic!("unexpected {other:?}"),
        }
        let typo = base().replace("\"beta\"", "\"betta\"");
        assert!(matches!(RunConfig::from_json_str(&typo), Err(ConfigError::Schema { .. })));
    }

    #[test]
    fn small_domain_is_only_a_warning() {
        let rep = with("grid.L", 50.0.into()).validate();
        assert!(rep.ok());
        assert!(rep.warnings.iter().any(|w| w.path == "grid.L"));
    }

    #[test]
    fn subcritical_power_needs_the_flag() {
        let cfg = with("nonlinearity", serde_json::json!({"terms": [{"coeff": 1.0, "p1": 2.0}]}));
        assert!(!cfg.validate().ok());
        let cfg = with(
            "nonlinearity",
            serde_json::json!({"terms": [{"coeff": 1.0, "p1": 2.0}], "allow_subcritical": true}),
        );
        let rep = cfg.validate();
        assert!(rep.ok(), "{rep:?}");
        assert!(!rep.warnings.is_empty());
    }

    #[test]
    fn constants_must_be_ordered() {
        let rep = with("analysis.C0", 20.0.into()).validate();
        assert!(rep.errors.iter().any(|e| e.path == "analysis.C0"));
    }

    #[test]
    fn sweep_expands_cartesian_product() {
        let mut cfg = RunConfig::from_json_str(&base()).unwrap();
        let mut axes = BTreeMap::new();
        axes.insert("coeffs.beta".to_string(), vec![(-0.5).into(), 0.0.into(), 0.5.into()]);
        axes.insert("data.epsilon".to_string(), vec![0.1.into(), 0.05.into()]);
        cfg.sweep = Some(axes);
        let runs = cfg.expand_sweep().unwrap();
        assert_eq!(runs.len(), 6);
        assert_eq!(runs[0].id, "demo-0");
        assert_eq!(runs[0].coeffs.beta, -0.5);
        assert_eq!(runs[1].data.epsilon, 0.05);
        assert_eq!(runs[5].coeffs.beta, 0.5);
        assert!(runs.iter().all(|r| r.sweep.is_none()));
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig::from_json_str(&base()).unwrap();
        let again = RunConfig::from_json_str(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }
}
