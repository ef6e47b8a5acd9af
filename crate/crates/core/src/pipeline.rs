//! Run orchestration and persistence. Every stage reads its inputs back from
//! the run directory, so post-processing can be repeated without simulating
//! again and produces the same bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::analysis::{
    alpha_star, apriori_monitor, fit_decay, profile_error, summarize_envelopes, thresholds,
    AlphaFit, AnalysisError, AprioriReport, DecayFit, EnvelopeModel, EnvelopePoint,
    EnvelopeSummary, Thresholds,
};
use crate::coeffs::{RateSet, ScaledWeights};
use crate::config::{ConfigError, ConfigReport, RunConfig};
use crate::decompose::{split, DecomposeError, Decomposition};
use crate::dynamics::{run_schedule, to_scaled, DynamicsError, PhysicalState, Simulator};
use crate::energy::{
    evaluate, identity_residuals, EnergyError, EnergyReport, IdentityTerms, NormSet,
    IDENTITY_NAMES,
};
use crate::fields::gaussian_modes;
use crate::store::{self, write_atomic, Sidecar};

pub const OUT_ENV: &str = "DWLAB_OUT";
pub const DEFAULT_ROOT: &str = "runs";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("configuration rejected: {}", summarize_report(.0))]
    Validation(ConfigReport),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Missing(String),
}

fn summarize_report(r: &ConfigReport) -> String {
    r.errors
        .iter()
        .map(|e| format!("{}: {}", e.path, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    Blowup,
    UnderflowCapped,
}

/// Output root: the explicit flag wins, then `DWLAB_OUT`, then `runs`.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_ROOT),
    }
}

/// Artifact locations inside one run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.json")
    }
    pub fn timeseries(&self) -> PathBuf {
        self.root.join("timeseries.csv")
    }
    pub fn snapshots(&self) -> PathBuf {
        self.root.join("snapshots")
    }
    pub fn decomp(&self) -> PathBuf {
        self.root.join("decomp")
    }
    pub fn decomp_csv(&self) -> PathBuf {
        self.root.join("decomp.csv")
    }
    pub fn energy_csv(&self) -> PathBuf {
        self.root.join("energy.csv")
    }
    pub fn energy_summary(&self) -> PathBuf {
        self.root.join("energy_summary.json")
    }
    pub fn profile_csv(&self) -> PathBuf {
        self.root.join("profile.csv")
    }
    pub fn envelopes_csv(&self) -> PathBuf {
        self.root.join("envelopes.csv")
    }
    pub fn ratefit(&self) -> PathBuf {
        self.root.join("ratefit.json")
    }

    pub fn read_config(&self) -> Result<RunConfig, PipelineError> {
        let text = fs::read_to_string(self.config())
            .map_err(|e| PipelineError::Missing(format!("{}: {e}", self.config().display())))?;
        Ok(RunConfig::from_json_str(&text)?)
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for r in rows {
        wtr.serialize(r)?;
    }
    let bytes = wtr.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| PipelineError::Missing(format!("{}: {e}", path.display())))?;
    Ok(rdr.deserialize().collect::<Result<Vec<T>, _>>()?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

fn fresh_dir(path: &Path) -> io::Result<()> {
    if path.exists() {
        fs::remove_dir_all(path)?;
    }
    fs::create_dir_all(path)
}

/// One row of `timeseries.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub k: usize,
    pub s: f64,
    pub t: f64,
    #[serde(rename = "B")]
    pub big_b: f64,
    pub l2_u: f64,
    pub linf_u: f64,
    pub l2_p: f64,
    pub mass: f64,
    pub mass_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupInfo {
    pub t: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub outcome: Outcome,
    pub snapshots: usize,
    pub steps: u64,
    pub t_end: f64,
    pub s_end: f64,
    pub blowup: Option<BlowupInfo>,
}

/// Simulates the configured problem and persists snapshots at `s_k` plus the
/// scalar time series. A blow-up is an outcome, not an error.
pub fn simulate(cfg: &RunConfig, paths: &RunPaths) -> Result<SimulationReport, PipelineError> {
    let report = cfg.validate();
    if !report.ok() {
        return Err(PipelineError::Validation(report));
    }
    fs::create_dir_all(&paths.root)?;
    if paths.summary().exists() {
        fs::remove_file(paths.summary())?;
    }
    fresh_dir(&paths.snapshots())?;
    write_atomic(&paths.config(), format!("{}\n", cfg.to_json()).as_bytes())?;

    let grid = cfg.grid()?;
    let problem = cfg.problem()?;
    let coeffs = problem.coeffs.clone();
    let state = cfg.initial_data().generate(&grid)?;
    let mut sim = Simulator::new(problem, &state)?;
    let s_values = cfg.s_values();
    let mut rows = Vec::with_capacity(s_values.len());
    let snap_dir = paths.snapshots();
    let sink = |k: usize, s: f64, st: &PhysicalState| -> Result<(), io::Error> {
        let meta = Sidecar {
            n: grid.dim,
            half_width: grid.half_width,
            points: grid.points,
            k,
            t: st.t,
            s,
            kind: "physical".into(),
            components: vec!["u".into(), "p".into()],
            extra: Value::Null,
        };
        store::write_fields(&snap_dir, &meta, &[&st.u, &st.p])?;
        rows.push(TimeseriesRow {
            k,
            s,
            t: st.t,
            big_b: coeffs.big_b(st.t),
            l2_u: st.u.l2_norm(),
            linf_u: st.u.max_abs(),
            l2_p: st.p.l2_norm(),
            mass: st.u.integral(),
            mass_rate: st.p.integral(),
        });
        Ok(())
    };
    let result = run_schedule(&mut sim, &s_values, &cfg.step_control(), cfg.time.t_max, sink);
    let (outcome, blowup, capped) = match result {
        Ok(Ok(stats)) => (Outcome::Completed, None, stats.capped),
        Ok(Err(io)) => return Err(io.into()),
        Err(DynamicsError::BlowUp { t, sup }) => (Outcome::Blowup, Some(BlowupInfo { t, sup }), false),
        Err(e) => return Err(e.into()),
    };
    write_csv(&paths.timeseries(), &rows)?;
    let underflow = rows.iter().any(|r| coeffs.scaled_weights(r.s).underflow);
    let outcome = match outcome {
        Outcome::Completed if capped || underflow => Outcome::UnderflowCapped,
        o => o,
    };
    let last = rows.last();
    Ok(SimulationReport {
        outcome,
        snapshots: rows.len(),
        steps: sim.steps(),
        t_end: last.map_or(0.0, |r| r.t),
        s_end: last.map_or(0.0, |r| r.s),
        blowup,
    })
}

/// Scalars of one decomposition, stored in the sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct DecompMeta {
    alpha: f64,
    dalpha: f64,
    weights: ScaledWeights,
    r_mass: f64,
    mean_shift: [f64; 3],
    unresolved_fraction: f64,
    outside_fraction: f64,
}

/// One row of `decomp.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompRow {
    pub k: usize,
    pub s: f64,
    pub alpha: f64,
    pub dalpha: f64,
    pub eps: f64,
    pub drag: f64,
    pub r_mass: f64,
    pub shift_f: f64,
    pub shift_g: f64,
    pub shift_h: f64,
    pub norm_f: f64,
    pub norm_g: f64,
    pub norm_h: f64,
    pub unresolved_fraction: f64,
    pub outside_fraction: f64,
}

const DECOMP_COMPONENTS: [&str; 6] = ["v", "w", "f", "g", "r", "h"];

/// Maps every snapshot to the similarity frame and splits off the Gaussian
/// mode, writing `decomp/<k>.bin` and `decomp.csv`.
pub fn decompose_stage(paths: &RunPaths) -> Result<Vec<DecompRow>, PipelineError> {
    let cfg = paths.read_config()?;
    let problem = cfg.problem()?;
    let target = cfg.scaled_grid()?;
    let modes = gaussian_modes(&target);
    let out_dir = paths.decomp();
    fresh_dir(&out_dir)?;
    let mut rows = Vec::new();
    for k in store::list_indices(&paths.snapshots())? {
        let (meta, fields) = store::read_fields(&paths.snapshots(), k)?;
        let state = PhysicalState {
            t: meta.t,
            u: fields[0].clone(),
            p: fields[1].clone(),
        };
        let (mut sc, info) = to_scaled(&problem.coeffs, &state, &target)?;
        sc.s = meta.s;
        let dec = split(&problem, &sc, &modes)?;
        let dm = DecompMeta {
            alpha: dec.alpha,
            dalpha: dec.dalpha,
            weights: dec.weights,
            r_mass: dec.r_mass,
            mean_shift: dec.mean_shift,
            unresolved_fraction: info.unresolved_fraction,
            outside_fraction: info.outside_fraction,
        };
        let side = Sidecar {
            n: target.dim,
            half_width: target.half_width,
            points: target.points,
            k,
            t: meta.t,
            s: meta.s,
            kind: "scaled".into(),
            components: DECOMP_COMPONENTS.iter().map(|c| c.to_string()).collect(),
            extra: serde_json::to_value(dm)?,
        };
        store::write_fields(&out_dir, &side, &[&dec.v, &dec.w, &dec.f, &dec.g, &dec.r, &dec.h])?;
        let row = dec.row();
        rows.push(DecompRow {
            k,
            s: row.s,
            alpha: row.alpha,
            dalpha: row.dalpha,
            eps: row.eps,
            drag: row.drag,
            r_mass: row.r_mass,
            shift_f: row.shift_f,
            shift_g: row.shift_g,
            shift_h: row.shift_h,
            norm_f: row.norm_f,
            norm_g: row.norm_g,
            norm_h: row.norm_h,
            unresolved_fraction: info.unresolved_fraction,
            outside_fraction: info.outside_fraction,
        });
    }
    if rows.is_empty() {
        return Err(PipelineError::Missing("no snapshots to decompose".into()));
    }
    write_csv(&paths.decomp_csv(), &rows)?;
    Ok(rows)
}

fn read_decomposition(dir: &Path, k: usize) -> Result<Decomposition, PipelineError> {
    let (meta, mut f) = store::read_fields(dir, k)?;
    if f.len() != DECOMP_COMPONENTS.len() {
        return Err(PipelineError::Missing(format!("decomp/{k}.bin has {} components", f.len())));
    }
    let dm: DecompMeta = serde_json::from_value(meta.extra)?;
    let h = f.pop().expect("six components");
    let r = f.pop().expect("six components");
    let g = f.pop().expect("six components");
    let ff = f.pop().expect("six components");
    let w = f.pop().expect("six components");
    let v = f.pop().expect("six components");
    Ok(Decomposition {
        s: meta.s,
        alpha: dm.alpha,
        dalpha: dm.dalpha,
        weights: dm.weights,
        v,
        w,
        f: ff,
        g,
        r,
        h,
        r_mass: dm.r_mass,
        mean_shift: dm.mean_shift,
    })
}

/// Flat form of an [`EnergyReport`] for `energy.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub k: usize,
    pub s: f64,
    pub eps: f64,
    pub drag: f64,
    pub alpha: f64,
    pub dalpha: f64,
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub e5: f64,
    pub decay0: f64,
    pub decay1: f64,
    pub decay2: f64,
    pub decay3: f64,
    pub decay4: f64,
    pub decay5: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r5_extra: f64,
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub positive_definite: bool,
    pub dissipation_form: f64,
    pub f_h1m: f64,
    pub g_h0m: f64,
    pub r_h0m: f64,
    pub h_h0m: f64,
    pub big_h_h0m: f64,
}

impl EnergyRow {
    pub fn from_report(k: usize, r: &EnergyReport) -> Self {
        let id = &r.identities;
        Self {
            k,
            s: r.s,
            eps: r.eps,
            drag: r.drag,
            alpha: r.alpha,
            dalpha: r.dalpha,
            e0: id[0].energy,
            e1: id[1].energy,
            e2: id[2].energy,
            e3: id[3].energy,
            e4: id[4].energy,
            e5: id[5].energy,
            decay0: id[0].decay,
            decay1: id[1].decay,
            decay2: id[2].decay,
            decay3: id[3].decay,
            decay4: id[4].decay,
            decay5: id[5].decay,
            l0: id[0].dissipation,
            l1: id[1].dissipation,
            l2: id[2].dissipation,
            l3: id[3].dissipation,
            l4: id[4].dissipation,
            l5: id[5].dissipation,
            r0: id[0].remainder,
            r1: id[1].remainder,
            r2: id[2].remainder,
            r3: id[3].remainder,
            r4: id[4].remainder,
            r5: id[5].remainder,
            r5_extra: r.r5_extra,
            q0: r.comparison[0],
            q1: r.comparison[1],
            q2: r.comparison[2],
            positive_definite: r.positive_definite,
            dissipation_form: r.dissipation_form,
            f_h1m: r.norms.f_h1m,
            g_h0m: r.norms.g_h0m,
            r_h0m: r.norms.r_h0m,
            h_h0m: r.norms.h_h0m,
            big_h_h0m: r.norms.big_h_h0m,
        }
    }

    pub fn to_report(&self) -> EnergyReport {
        let t = |e, d, l, r| IdentityTerms {
            energy: e,
            decay: d,
            dissipation: l,
            remainder: r,
        };
        EnergyReport {
            s: self.s,
            eps: self.eps,
            drag: self.drag,
            alpha: self.alpha,
            dalpha: self.dalpha,
            identities: [
                t(self.e0, self.decay0, self.l0, self.r0),
                t(self.e1, self.decay1, self.l1, self.r1),
                t(self.e2, self.decay2, self.l2, self.r2),
                t(self.e3, self.decay3, self.l3, self.r3),
                t(self.e4, self.decay4, self.l4, self.r4),
                t(self.e5, self.decay5, self.l5, self.r5),
            ],
            r5_extra: self.r5_extra,
            comparison: [self.q0, self.q1, self.q2],
            positive_definite: self.positive_definite,
            dissipation_form: self.dissipation_form,
            norms: NormSet {
                f_h1m: self.f_h1m,
                g_h0m: self.g_h0m,
                r_h0m: self.r_h0m,
                h_h0m: self.h_h0m,
                big_h_h0m: self.big_h_h0m,
            },
        }
    }
}

/// Convergence of one balance law under halving of the difference step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityConvergence {
    pub name: String,
    /// Max |residual| with steps `4Δs, 2Δs, Δs`, over the shared samples.
    pub max_residual: [f64; 3],
    pub orders: [f64; 2],
}

/// Residual orders of every balance law from one series, using central
/// differences over 4, 2 and 1 samples and comparing at samples where all
/// three stencils fit.
pub fn identity_convergence(reports: &[EnergyReport]) -> Result<Vec<IdentityConvergence>, EnergyError> {
    let k_end = reports.len().saturating_sub(1);
    let mut maxres = [[0.0f64; 6]; 3];
    for (si, stride) in [4usize, 2, 1].into_iter().enumerate() {
        let res = identity_residuals(reports, stride)?;
        for (idx, (_, r)) in res.iter().enumerate() {
            let k = idx + stride;
            if k % 4 != 0 || k < 4 || k + 4 > k_end {
                continue;
            }
            for j in 0..6 {
                maxres[si][j] = maxres[si][j].max(r[j].abs());
            }
        }
    }
    Ok((0..6)
        .map(|j| IdentityConvergence {
            name: IDENTITY_NAMES[j].to_string(),
            max_residual: [maxres[0][j], maxres[1][j], maxres[2][j]],
            orders: [
                (maxres[0][j] / maxres[1][j]).log2(),
                (maxres[1][j] / maxres[2][j]).log2(),
            ],
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    /// `None` when the series is too short for the three stencils.
    pub convergence: Option<Vec<IdentityConvergence>>,
    pub thresholds: Thresholds,
    pub apriori: AprioriReport,
}

/// Evaluates the energy ladder at every decomposition, writing `energy.csv`
/// and `energy_summary.json`.
pub fn energy_stage(paths: &RunPaths) -> Result<(Vec<EnergyReport>, EnergySummary), PipelineError> {
    let cfg = paths.read_config()?;
    let params = cfg.energy_params()?;
    let dir = paths.decomp();
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for k in store::list_indices(&dir)? {
        let dec = read_decomposition(&dir, k)?;
        let rep = evaluate(&dec, &params)?;
        rows.push(EnergyRow::from_report(k, &rep));
        reports.push(rep);
    }
    if reports.is_empty() {
        return Err(PipelineError::Missing("no decompositions; run the decompose stage first".into()));
    }
    write_csv(&paths.energy_csv(), &rows)?;
    let convergence = if reports.len() >= 9 {
        Some(identity_convergence(&reports)?)
    } else {
        None
    };
    let summary = EnergySummary {
        convergence,
        thresholds: thresholds(&reports),
        apriori: apriori_monitor(&reports),
    };
    write_json(&paths.energy_summary(), &summary)?;
    Ok((reports, summary))
}

/// Reads `energy.csv` back into reports.
pub fn read_energy(paths: &RunPaths) -> Result<Vec<EnergyReport>, PipelineError> {
    let rows: Vec<EnergyRow> = read_csv(&paths.energy_csv())?;
    Ok(rows.iter().map(EnergyRow::to_report).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub k: usize,
    pub s: f64,
    pub b_plus_1: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitReport {
    pub id: String,
    pub rates: RateSet,
    pub alpha: AlphaFit,
    /// `tail_rate >= λ - 0.05`; a flat tail counts as converged.
    pub tail_rate_ok: bool,
    pub decay: Option<DecayFit>,
    /// Why `decay` is absent, if it is.
    pub decay_error: Option<String>,
    pub apriori: AprioriReport,
    pub envelopes: EnvelopeSummary,
}

/// Limit mass, profile errors, decay fit, a priori monitor and remainder
/// envelopes; writes `profile.csv`, `envelopes.csv` and `ratefit.json`.
pub fn rates_stage(paths: &RunPaths) -> Result<RateFitReport, PipelineError> {
    let cfg = paths.read_config()?;
    let rates = cfg.rates()?;
    let problem = cfg.problem()?;
    let series: Vec<TimeseriesRow> = read_csv(&paths.timeseries())?;
    let decomp: Vec<DecompRow> = read_csv(&paths.decomp_csv())?;
    let reports = read_energy(paths)?;

    let s: Vec<f64> = decomp.iter().map(|r| r.s).collect();
    let alpha: Vec<f64> = decomp.iter().map(|r| r.alpha).collect();
    let afit = alpha_star(&s, &alpha, cfg.analysis.tail_from)?;
    let tail_rate_ok = afit.tail_rate.is_none_or(|rho| rho >= rates.lambda - 0.05);

    let mut profile = Vec::with_capacity(series.len());
    for row in &series {
        let (_, fields) = store::read_fields(&paths.snapshots(), row.k)?;
        profile.push(ProfileRow {
            k: row.k,
            s: row.s,
            b_plus_1: row.big_b + 1.0,
            error: profile_error(&fields[0], afit.alpha_star, row.big_b),
        });
    }
    write_csv(&paths.profile_csv(), &profile)?;
    let bp: Vec<f64> = profile.iter().map(|p| p.b_plus_1).collect();
    let err: Vec<f64> = profile.iter().map(|p| p.error).collect();
    let (decay, decay_error) =
        match fit_decay(&bp, &err, cfg.fit_window(), rates.exponent, cfg.analysis.slope_tol) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(e.to_string())),
        };

    let model = EnvelopeModel::new(&problem, cfg.analysis.eta_tilde);
    let points: Vec<EnvelopePoint> = model.series(&reports);
    write_csv(&paths.envelopes_csv(), &points)?;
    let report = RateFitReport {
        id: cfg.id.clone(),
        rates,
        alpha: afit,
        tail_rate_ok,
        decay,
        decay_error,
        apriori: apriori_monitor(&reports),
        envelopes: summarize_envelopes(&points, cfg.analysis.envelope_from),
    };
    write_json(&paths.ratefit(), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub config: RunConfig,
    pub outcome: Outcome,
    pub blowup: Option<BlowupInfo>,
    pub snapshots: usize,
    pub steps: u64,
    pub t_end: f64,
    pub s_end: f64,
    pub alpha_star: Option<f64>,
    pub slope: Option<f64>,
    pub predicted_exponent: f64,
    pub decay_pass: Option<bool>,
    pub sup_e5: Option<f64>,
    /// Largest identity residual at the finest difference step.
    pub max_identity_residual: Option<f64>,
    /// Largest spectral fraction lost when resampling into the similarity
    /// frame; values above ~1e-6 mean the scaled grid is too coarse.
    pub max_unresolved_fraction: Option<f64>,
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
}

/// Full pipeline for one configuration inside `root/<id>`. The summary is
/// written last, atomically.
pub fn run(cfg: &RunConfig, root: &Path) -> Result<RunSummary, PipelineError> {
    let start = Instant::now();
    let paths = RunPaths::new(root.join(&cfg.id));
    let sim = simulate(cfg, &paths)?;
    let predicted_exponent = cfg.rates()?.exponent;
    let mut summary = RunSummary {
        id: cfg.id.clone(),
        config: cfg.clone(),
        outcome: sim.outcome,
        blowup: sim.blowup,
        snapshots: sim.snapshots,
        steps: sim.steps,
        t_end: sim.t_end,
        s_end: sim.s_end,
        alpha_star: None,
        slope: None,
        predicted_exponent,
        decay_pass: None,
        sup_e5: None,
        max_identity_residual: None,
        max_unresolved_fraction: None,
        artifacts: vec!["config.json".into(), "timeseries.csv".into(), "snapshots/".into()],
        wall_time_s: 0.0,
    };
    if sim.outcome != Outcome::Blowup {
        let decomp = decompose_stage(&paths)?;
        summary.max_unresolved_fraction =
            Some(decomp.iter().map(|r| r.unresolved_fraction).fold(0.0, f64::max));
        let (_, energy) = energy_stage(&paths)?;
        let fit = rates_stage(&paths)?;
        summary.alpha_star = Some(fit.alpha.alpha_star);
        summary.slope = fit.decay.map(|d| d.slope);
        summary.decay_pass = fit.decay.map(|d| d.pass);
        summary.sup_e5 = Some(energy.apriori.sup_e5);
        summary.max_identity_residual = energy
            .convergence
            .as_ref()
            .map(|c| c.iter().map(|x| x.max_residual[2]).fold(0.0, f64::max));
        summary.artifacts.extend(
            [
                "decomp/",
                "decomp.csv",
                "energy.csv",
                "energy_summary.json",
                "profile.csv",
                "envelopes.csv",
                "ratefit.json",
            ]
            .map(String::from),
        );
    }
    summary.artifacts.push("summary.json".into());
    summary.wall_time_s = start.elapsed().as_secs_f64();
    write_json(&paths.summary(), &summary)?;
    Ok(summary)
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub id: String,
    pub beta: f64,
    /// Largest power of the nonlinearity; empty for linear runs.
    pub p: Option<f64>,
    pub predicted_exponent: f64,
    pub slope: Option<f64>,
    pub pass: bool,
    pub outcome: Option<Outcome>,
    pub error: Option<String>,
}

/// Runs every point of the configuration's sweep on at most `jobs` threads
/// and writes `root/<id>/sweep.csv`.
pub fn sweep(cfg: &RunConfig, root: &Path, jobs: usize) -> Result<Vec<SweepRow>, PipelineError> {
    use rayon::prelude::*;
    let variants = cfg.expand_sweep()?;
    for v in &variants {
        let rep = v.validate();
        if !rep.ok() {
            return Err(PipelineError::Validation(rep));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| io::Error::other(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        variants
            .par_iter()
            .map(|v| {
                let p = match v.nonlinearity() {
                    crate::nonlinearity::Nonlinearity::Power(t) => Some(t.p),
                    crate::nonlinearity::Nonlinearity::Monomials(t) if !t.is_empty() => {
                        Some(t.iter().map(|m| m.p1 + m.p2 + m.p3).fold(f64::MIN, f64::max))
                    }
                    _ => None,
                };
                let predicted = v.rates().map(|r| r.exponent).unwrap_or(f64::NAN);
                match run(v, root) {
                    Ok(s) => SweepRow {
                        id: v.id.clone(),
                        beta: v.coeffs.beta,
                        p,
                        predicted_exponent: predicted,
                        slope: s.slope,
                        pass: s.decay_pass.unwrap_or(false),
                        outcome: Some(s.outcome),
                        error: None,
                    },
                    Err(e) => SweepRow {
                        id: v.id.clone(),
                        beta: v.coeffs.beta,
                        p,
                        predicted_exponent: predicted,
                        slope: None,
                        pass: false,
                        outcome: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    let dir = root.join(&cfg.id);
    fs::create_dir_all(&dir)?;
    write_csv(&dir.join("sweep.csv"), &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(id: &str) -> RunConfig {
        RunConfig::from_json_str(&format!(
            r#"{{
                "schema_version": 1,
                "id": "{id}",
                "dimension": 1,
                "grid": {{"L": 40.0, "N": 256}},
                "scaled_grid": {{"L": 16.0, "N": 128}},
                "coeffs": {{"beta": 0.0}},
                "data": {{"epsilon": 0.1, "u1_scale": 0.3}},
                "time": {{"s_end": 5.0, "ds_out": 0.1}},
                "analysis": {{"fit_window": [5.0, 20.0]}}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn output_root_precedence() {
        assert_eq!(output_root(Some(Path::new("/x"))), PathBuf::from("/x"));
    }

    #[test]
    fn staged_reruns_are_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small_config("stage");
        let summary = run(&cfg, tmp.path()).unwrap();
        assert_eq!(summary.outcome, Outcome::Completed);
        let paths = RunPaths::new(tmp.path().join("stage"));
        let before: Vec<Vec<u8>> = [paths.decomp_csv(), paths.energy_csv(), paths.ratefit()]
            .iter()
            .map(|p| fs::read(p).unwrap())
            .collect();
        decompose_stage(&paths).unwrap();
        energy_stage(&paths).unwrap();
        rates_stage(&paths).unwrap();
        let after: Vec<Vec<u8>> = [paths.decomp_csv(), paths.energy_csv(), paths.ratefit()]
            .iter()
            .map(|p| fs::read(p).unwrap())
            .collect();
        assert_eq!(before, after);
        let reports = read_energy(&paths).unwrap();
        assert_eq!(reports.len(), 51);
    }

    #[test]
    fn invalid_config_writes_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = small_config("bad");
        cfg.coeffs.beta = 1.5;
        assert!(matches!(run(&cfg, tmp.path()), Err(PipelineError::Validation(_))));
        assert!(!tmp.path().join("bad").exists());
    }
}
