//! Time stepping in the physical frame and in the similarity frame, the maps
//! between the two frames, and the initial-data families.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::CoefficientSet;
use crate::fields::{
    self, gradient, laplacian, resample, transform_in_place, Field, FieldError, Grid,
    ResampleInfo, SpectralField,
};
use crate::nonlinearity::{Nonlinearity, NonlinearityError};

/// Stiffness weight below which the similarity-frame solver switches to the
/// degenerate (parabolic) limit.
pub const STIFFNESS_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("blow-up at t = {t}: sup|u| = {sup:e}")]
    BlowUp { t: f64, sup: f64 },
    #[error("step budget exhausted at t = {t}")]
    StepBudget { t: f64 },
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
}

/// Equation data: linear coefficients and nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub coeffs: CoefficientSet,
    pub nonlinearity: Nonlinearity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalState {
    pub t: f64,
    pub u: Field,
    pub p: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledState {
    pub s: f64,
    pub v: Field,
    pub w: Field,
}

/// Step-size rule `dt = min{dt_max, ds_max·b(t)(B(t)+1), cfl·h}`, the last
/// bound applying only to nonlinear problems. The linear part is integrated
/// exactly per mode, so damping strength does not limit the step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub cfl: f64,
    pub dt_max: f64,
    /// Largest similarity-time increment per step.
    pub ds_max: f64,
    pub blowup_ceiling: f64,
    pub max_steps: u64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            dt_max: 1.0,
            ds_max: 0.005,
            blowup_ceiling: 1e6,
            max_steps: 200_000_000,
        }
    }
}

impl StepControl {
    pub fn dt(&self, problem: &Problem, grid: &Grid, t: f64) -> f64 {
        let coeffs = &problem.coeffs;
        let clock = self.ds_max * coeffs.b(t) * (coeffs.big_b(t) + 1.0);
        let mut dt = self.dt_max.min(clock);
        if !problem.nonlinearity.is_linear() {
            dt = dt.min(self.cfl * grid.spacing());
        }
        dt
    }
}

/// `exp(A·dt)` for `A = [[0, 1], [a, -b]]`, row-major.
pub fn mode_propagator(a: Complex64, b: f64, dt: f64) -> [Complex64; 4] {
    let q2 = 0.25 * b * b + a;
    if q2.norm() * dt * dt < 1e-2 {
        // cosh(q dt) and sinh(q dt)/q by their even series
        let z = q2 * dt * dt;
        let (mut c, mut sh) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        let (mut tc, mut ts) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        for k in 1..12 {
            let k = k as f64;
            tc = tc * z / ((2.0 * k - 1.0) * 2.0 * k);
            ts = ts * z / (2.0 * k * (2.0 * k + 1.0));
            c += tc;
            sh += ts;
        }
        let sh = sh * dt;
        let e = (-0.5 * b * dt).exp();
        return [
            e * (c + sh * (0.5 * b)),
            e * sh,
            e * sh * a,
            e * (c - sh * (0.5 * b)),
        ];
    }
    let q = q2.sqrt();
    let lm = -0.5 * b - q;
    let lp = -a / lm;
    let (ep, em) = ((lp * dt).exp(), (lm * dt).exp());
    let d = lp - lm;
    [
        (em * lp - ep * lm) / d,
        (ep - em) / d,
        a * (ep - em) / d,
        (ep * lp - em * lm) / d,
    ]
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Spectral-space integrator for the physical-frame system
/// `u_t = p`, `p_t = Δu + c·∇u + d u - b p + N`.
///
/// The linear part is diagonal in Fourier space. Each step freezes it at the
/// midpoint, integrates it exactly, and treats the coefficient drift across
/// the step together with the nonlinearity by integrating-factor RK4. The
/// nonlinearity is evaluated pointwise from 2/3-dealiased fields.
pub struct Simulator {
    problem: Problem,
    grid: Grid,
    t: f64,
    u: Vec<Complex64>,
    p: Vec<Complex64>,
    xi_sq: Vec<f64>,
    xi: Vec<Vec<f64>>,
    drift: Vec<f64>,
    keep: Vec<bool>,
    steps: u64,
    last_sup: f64,
    ceiling: f64,
    frozen: Option<Frozen>,
    // scratch
    su: Vec<Complex64>,
    sp: Vec<Complex64>,
    ku: Vec<Complex64>,
    kp: Vec<Complex64>,
    au: Vec<Complex64>,
    ap: Vec<Complex64>,
    work: Vec<Complex64>,
    phys_u: Vec<f64>,
    phys_p: Vec<f64>,
    phys_g: Vec<Vec<f64>>,
}

impl Simulator {
    pub fn new(problem: Problem, state: &PhysicalState) -> Result<Self, DynamicsError> {
        let grid = state.u.grid;
        if state.p.grid != grid {
            return Err(FieldError::GridMismatch.into());
        }
        if problem.coeffs.perturbation.c_amp.len() != grid.dim {
            return Err(DynamicsError::InvalidStep(
                "drift dimension does not match grid".into(),
            ));
        }
        state.u.check_finite()?;
        state.p.check_finite()?;
        let xi: Vec<Vec<f64>> = (0..grid.dim).map(|a| grid.xi_component(a)).collect();
        let drift = (0..grid.len())
            .map(|i| {
                problem
                    .coeffs
                    .perturbation
                    .c_amp
                    .iter()
                    .zip(&xi)
                    .map(|(c, k)| c * k[i])
                    .sum()
            })
            .collect();
        let n = grid.points as i64;
        let keep = (0..grid.len())
            .map(|i| {
                let mi = grid.multi_index(i);
                (0..grid.dim).all(|a| {
                    let k = mi[a] as i64;
                    let ks = if k < n / 2 { k } else { k - n };
                    3 * ks.abs() < n
                })
            })
            .collect();
        let len = grid.len();
        let u = fields::fft(&state.u).coeffs;
        let p = fields::fft(&state.p).coeffs;
        Ok(Self {
            grid,
            t: state.t,
            u,
            p,
            xi_sq: grid.xi_sq(),
            xi,
            drift,
            keep,
            steps: 0,
            last_sup: state.u.max_abs(),
            ceiling: StepControl::default().blowup_ceiling,
            frozen: None,
            su: vec![zero(); len],
            sp: vec![zero(); len],
            ku: vec![zero(); len],
            kp: vec![zero(); len],
            au: vec![zero(); len],
            ap: vec![zero(); len],
            work: vec![zero(); len],
            phys_u: vec![0.0; len],
            phys_p: vec![0.0; len],
            phys_g: vec![vec![0.0; len]; if problem.nonlinearity.needs_gradient() { grid.dim } else { 0 }],
            problem,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Sup-norm of the dealiased displacement seen at the last nonlinear
    /// evaluation (or at construction for linear problems).
    pub fn last_sup(&self) -> f64 {
        self.last_sup
    }

    /// Physical-frame derivative `(u_t, p_t)` of the current state.
    pub fn derivative(&mut self) -> Result<(Field, Field), DynamicsError> {
        self.su.copy_from_slice(&self.u);
        self.sp.copy_from_slice(&self.p);
        self.eval(self.t)?;
        let du = fields::ifft(&SpectralField {
            grid: self.grid,
            coeffs: self.ku.clone(),
        });
        let dp = fields::ifft(&SpectralField {
            grid: self.grid,
            coeffs: self.kp.clone(),
        });
        Ok((du, dp))
    }

    pub fn state(&self) -> PhysicalState {
        let u = fields::ifft(&SpectralField {
            grid: self.grid,
            coeffs: self.u.clone(),
        });
        let p = fields::ifft(&SpectralField {
            grid: self.grid,
            coeffs: self.p.clone(),
        });
        PhysicalState { t: self.t, u, p }
    }

    /// Linear coefficients `(b, d, drift weight)` at time `t`.
    fn linear_coeffs(&self, t: f64) -> [f64; 3] {
        let pert = &self.problem.coeffs.perturbation;
        let cw = if pert.has_drift() {
            (1.0 + t).powf(-pert.gamma)
        } else {
            0.0
        };
        [self.problem.coeffs.b(t), pert.d(t), cw]
    }

    /// Derivative of the spectral state `(su, sp)` at time `t`, into `(ku, kp)`.
    fn eval(&mut self, t: f64) -> Result<(), DynamicsError> {
        let [b, d, cw] = self.linear_coeffs(t);
        for i in 0..self.u.len() {
            let u = self.su[i];
            let p = self.sp[i];
            self.ku[i] = p;
            let lin = Complex64::new(d - self.xi_sq[i], cw * self.drift[i]);
            self.kp[i] = lin * u - b * p;
        }
        if !self.problem.nonlinearity.is_linear() {
            self.add_nonlinear(t)?;
        }
        Ok(())
    }

    /// Like [`Self::eval`] but with the frozen linear part `base` removed.
    fn eval_remainder(&mut self, t: f64, base: [f64; 3]) -> Result<(), DynamicsError> {
        let [b, d, cw] = self.linear_coeffs(t);
        let (db, dd, dcw) = (b - base[0], d - base[1], cw - base[2]);
        for i in 0..self.u.len() {
            self.ku[i] = zero();
            self.kp[i] = Complex64::new(dd, dcw * self.drift[i]) * self.su[i] - db * self.sp[i];
        }
        if !self.problem.nonlinearity.is_linear() {
            self.add_nonlinear(t)?;
        }
        Ok(())
    }

    /// Per-mode propagators over `dt` and `dt/2` for the linear part frozen
    /// at `t_mid`, reused while the coefficients and step are unchanged.
    fn freeze(&mut self, t_mid: f64, dt: f64) -> [f64; 3] {
        let base = self.linear_coeffs(t_mid);
        if let Some(f) = &self.frozen {
            if f.base == base && f.dt == dt {
                return base;
            }
        }
        let [b, d, cw] = base;
        let len = self.u.len();
        let mut full = Vec::with_capacity(len);
        let mut half = Vec::with_capacity(len);
        for i in 0..len {
            let a = Complex64::new(d - self.xi_sq[i], cw * self.drift[i]);
            full.push(mode_propagator(a, b, dt));
            half.push(mode_propagator(a, b, 0.5 * dt));
        }
        self.frozen = Some(Frozen { base, dt, full, half });
        base
    }

    fn load_physical(&mut self, which: Source, axis: usize) {
        let src = match which {
            Source::U | Source::Grad => &self.su,
            Source::P => &self.sp,
        };
        for i in 0..src.len() {
            self.work[i] = if self.keep[i] {
                match which {
                    Source::Grad => src[i] * Complex64::new(0.0, self.xi[axis][i]),
                    _ => src[i],
                }
            } else {
                zero()
            };
        }
        transform_in_place(&self.grid, &mut self.work, true);
        let dst = match which {
            Source::U => &mut self.phys_u,
            Source::P => &mut self.phys_p,
            Source::Grad => &mut self.phys_g[axis],
        };
        for (d, w) in dst.iter_mut().zip(&self.work) {
            *d = w.re;
        }
    }

    fn add_nonlinear(&mut self, t: f64) -> Result<(), DynamicsError> {
        self.load_physical(Source::U, 0);
        let sup = self.phys_u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !sup.is_finite() || sup > self.ceiling {
            self.last_sup = sup;
            return Err(DynamicsError::BlowUp {
                t,
                sup: if sup.is_finite() { sup } else { f64::INFINITY },
            });
        }
        self.last_sup = sup;
        let needs_p = self.problem.nonlinearity.needs_velocity();
        if needs_p {
            self.load_physical(Source::P, 0);
        }
        for a in 0..self.phys_g.len() {
            self.load_physical(Source::Grad, a);
        }
        let ut: &[f64] = if needs_p { &self.phys_p } else { &[] };
        let nl = self
            .problem
            .nonlinearity
            .eval_physical(&self.phys_u, &self.phys_g, ut)?;
        for (w, v) in self.work.iter_mut().zip(&nl) {
            *w = Complex64::new(*v, 0.0);
        }
        transform_in_place(&self.grid, &mut self.work, false);
        let norm = 1.0 / self.grid.len() as f64;
        for i in 0..self.kp.len() {
            if self.keep[i] {
                self.kp[i] += self.work[i] * norm;
            }
        }
        Ok(())
    }

    /// One integrating-factor Runge-Kutta step of size `dt`.
    pub fn step(&mut self, dt: f64) -> Result<(), DynamicsError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(DynamicsError::InvalidStep(format!("dt must be positive, got {dt}")));
        }
        let t = self.t;
        let h2 = 0.5 * dt;
        let base = self.freeze(t + h2, dt);
        let frozen = self.frozen.take().expect("propagators frozen");
        let result = self.stages(t, dt, base, &frozen);
        self.frozen = Some(frozen);
        result?;
        std::mem::swap(&mut self.u, &mut self.au);
        std::mem::swap(&mut self.p, &mut self.ap);
        self.t = t + dt;
        self.steps += 1;
        Ok(())
    }

    /// The four stages of the step, accumulating the new state in `(au, ap)`.
    fn stages(&mut self, t: f64, dt: f64, base: [f64; 3], frozen: &Frozen) -> Result<(), DynamicsError> {
        let h2 = 0.5 * dt;
        let apply = |m: &[Complex64; 4], u: Complex64, p: Complex64| (m[0] * u + m[1] * p, m[2] * u + m[3] * p);
        // stage 1
        self.su.copy_from_slice(&self.u);
        self.sp.copy_from_slice(&self.p);
        self.eval_remainder(t, base)?;
        for i in 0..self.u.len() {
            let (fu, fp) = apply(&frozen.full[i], self.u[i], self.p[i] + dt / 6.0 * self.kp[i]);
            self.au[i] = fu;
            self.ap[i] = fp;
            let (hu, hp) = apply(&frozen.half[i], self.u[i], self.p[i] + h2 * self.kp[i]);
            self.su[i] = hu;
            self.sp[i] = hp;
        }
        // stage 2
        self.eval_remainder(t + h2, base)?;
        for i in 0..self.u.len() {
            let (hu, hp) = apply(&frozen.half[i], self.u[i], self.p[i]);
            let k2 = self.kp[i];
            let (cu, cp) = apply(&frozen.half[i], zero(), dt / 3.0 * k2);
            self.au[i] += cu;
            self.ap[i] += cp;
            self.su[i] = hu;
            self.sp[i] = hp + h2 * k2;
        }
        // stage 3
        self.eval_remainder(t + h2, base)?;
        for i in 0..self.u.len() {
            let k3 = self.kp[i];
            let (cu, cp) = apply(&frozen.half[i], zero(), dt / 3.0 * k3);
            self.au[i] += cu;
            self.ap[i] += cp;
            let (fu, fp) = apply(&frozen.full[i], self.u[i], self.p[i]);
            let (gu, gp) = apply(&frozen.half[i], zero(), dt * k3);
            self.su[i] = fu + gu;
            self.sp[i] = fp + gp;
        }
        // stage 4
        self.eval_remainder(t + dt, base)?;
        for i in 0..self.u.len() {
            self.ap[i] += dt / 6.0 * self.kp[i];
        }
        Ok(())
    }

    /// Steps until exactly `t_target`, shortening the final step.
    pub fn advance_to(&mut self, t_target: f64, control: &StepControl) -> Result<(), DynamicsError> {
        self.ceiling = control.blowup_ceiling;
        while self.t < t_target {
            if self.steps >= control.max_steps {
                return Err(DynamicsError::StepBudget { t: self.t });
            }
            let mut dt = control.dt(&self.problem, &self.grid, self.t);
            let remaining = t_target - self.t;
            if dt >= remaining * (1.0 - 1e-12) {
                dt = remaining;
            }
            self.step(dt)?;
            if dt == remaining {
                self.t = t_target;
            }
        }
        if self.problem.nonlinearity.is_linear() {
            let st = self.state();
            let sup = st.u.max_abs();
            self.last_sup = sup;
            if !sup.is_finite() || sup > control.blowup_ceiling {
                return Err(DynamicsError::BlowUp { t: self.t, sup });
            }
        }
        Ok(())
    }
}

struct Frozen {
    base: [f64; 3],
    dt: f64,
    full: Vec<[Complex64; 4]>,
    half: Vec<[Complex64; 4]>,
}

#[derive(Clone, Copy)]
enum Source {
    U,
    P,
    Grad,
}

/// Physical-frame right-hand side `(u_t, p_t)`.
pub fn rhs_physical(problem: &Problem, state: &PhysicalState) -> Result<(Field, Field), DynamicsError> {
    Simulator::new(problem.clone(), state)?.derivative()
}

/// One Runge-Kutta step of the physical-frame system.
pub fn step(problem: &Problem, state: &PhysicalState, dt: f64) -> Result<PhysicalState, DynamicsError> {
    let mut sim = Simulator::new(problem.clone(), state)?;
    sim.step(dt)?;
    Ok(sim.state())
}

/// Bookkeeping of a scheduled run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub snapshots: usize,
    pub steps: u64,
    pub t_end: f64,
    pub s_end: f64,
    /// The schedule was cut short because `t(s)` exceeded the time cap.
    pub capped: bool,
}

/// Advances through the similarity times `s_values`, landing exactly on
/// `t(s_k)` and handing every state to `sink`. Snapshots with `t(s_k)`
/// beyond `t_max` are skipped and the run is reported as capped.
pub fn run_schedule<E>(
    sim: &mut Simulator,
    s_values: &[f64],
    control: &StepControl,
    t_max: f64,
    mut sink: impl FnMut(usize, f64, &PhysicalState) -> Result<(), E>,
) -> Result<Result<RunStats, E>, DynamicsError> {
    let coeffs = sim.problem().coeffs.clone();
    let mut stats = RunStats {
        snapshots: 0,
        steps: 0,
        t_end: sim.time(),
        s_end: 0.0,
        capped: false,
    };
    for (k, &s) in s_values.iter().enumerate() {
        let t = if s == 0.0 { 0.0 } else { coeffs.t_of_s(s) };
        if !t.is_finite() || t > t_max {
            stats.capped = true;
            break;
        }
        if t < sim.time() {
            return Err(DynamicsError::InvalidStep(format!(
                "schedule time {t} precedes the current time {}",
                sim.time()
            )));
        }
        sim.advance_to(t, control)?;
        let state = sim.state();
        if let Err(e) = sink(k, s, &state) {
            return Ok(Err(e));
        }
        stats.snapshots += 1;
        stats.t_end = t;
        stats.s_end = s;
        stats.steps = sim.steps();
    }
    Ok(Ok(stats))
}

/// Maps a physical state to the similarity frame on `target`:
/// `v = e^{ns/2} u(t, e^{s/2} y)`, `w = b e^{(n+2)s/2} u_t(t, e^{s/2} y)`.
pub fn to_scaled(
    coeffs: &CoefficientSet,
    state: &PhysicalState,
    target: &Grid,
) -> Result<(ScaledState, ResampleInfo), DynamicsError> {
    let n = state.u.grid.dim as f64;
    let s = coeffs.s_of_t(state.t);
    let b = coeffs.b(state.t);
    let factor = (0.5 * s).exp();
    let (v, info_u) = resample(&state.u, target, factor, (0.5 * n * s).exp())?;
    let (w, info_p) = resample(&state.p, target, factor, b * (0.5 * (n + 2.0) * s).exp())?;
    let info = ResampleInfo {
        unresolved_fraction: info_u.unresolved_fraction.max(info_p.unresolved_fraction),
        outside_fraction: info_u.outside_fraction.max(info_p.outside_fraction),
    };
    Ok((ScaledState { s, v, w }, info))
}

/// Inverse of [`to_scaled`], resampling onto the physical grid `target`.
pub fn from_scaled(
    coeffs: &CoefficientSet,
    state: &ScaledState,
    target: &Grid,
) -> Result<(PhysicalState, ResampleInfo), DynamicsError> {
    let n = state.v.grid.dim as f64;
    let s = state.s;
    let t = if s == 0.0 { 0.0 } else { coeffs.t_of_s(s) };
    let b = coeffs.b(t);
    let factor = (-0.5 * s).exp();
    let (u, iu) = resample(&state.v, target, factor, (-0.5 * n * s).exp())?;
    let (p, ip) = resample(&state.w, target, factor, (-0.5 * (n + 2.0) * s).exp() / b)?;
    let info = ResampleInfo {
        unresolved_fraction: iu.unresolved_fraction.max(ip.unresolved_fraction),
        outside_fraction: iu.outside_fraction.max(ip.outside_fraction),
    };
    Ok((PhysicalState { t, u, p }, info))
}

/// Similarity-frame remainder
/// `r = drag·w + e^{s/2} c·∇v + e^s d v + e^{(n+2)s/2} N(...)`.
pub fn scaled_remainder(problem: &Problem, state: &ScaledState) -> Result<Field, DynamicsError> {
    let grid = state.v.grid;
    let n = grid.dim;
    let coeffs = &problem.coeffs;
    let s = state.s;
    let t = if s == 0.0 { 0.0 } else { coeffs.t_of_s(s) };
    let weights = coeffs.scaled_weights(s);
    let mut r = state.w.scale(weights.drag);
    let needs_grad = coeffs.perturbation.has_drift() || problem.nonlinearity.needs_gradient();
    let grad = if needs_grad { gradient(&state.v) } else { Vec::new() };
    if coeffs.perturbation.has_drift() {
        let c = coeffs.perturbation.c(t);
        let es = (0.5 * s).exp();
        for (a, g) in grad.iter().enumerate() {
            r = r.axpy(es * c[a], g);
        }
    }
    if coeffs.perturbation.has_potential() {
        r = r.axpy(s.exp() * coeffs.perturbation.d(t), &state.v);
    }
    if !problem.nonlinearity.is_linear() {
        let ln_b = coeffs.damping.mu.ln() - coeffs.damping.beta * coeffs.damping.ln_one_plus_t_of_s(s);
        let inv_b = (-ln_b).exp();
        let g: Vec<Vec<f64>> = if problem.nonlinearity.needs_gradient() {
            grad.iter().map(|f| f.data.clone()).collect()
        } else {
            Vec::new()
        };
        let w: &[f64] = if problem.nonlinearity.needs_velocity() { &state.w.data } else { &[] };
        let nl = problem
            .nonlinearity
            .eval_scaled(n, s, inv_b, &state.v.data, &g, w)?;
        for (x, y) in r.data.iter_mut().zip(nl) {
            *x += y;
        }
    }
    Ok(r)
}

/// Similarity-frame right-hand side `(v_s, w_s)` of
/// `v_s = (y/2)·∇v + (n/2) v + w`,
/// `eps (w_s - (y/2)·∇w - (n/2+1) w) + w = Δv + r`.
///
/// When `eps` is below [`STIFFNESS_FLOOR`] the second equation is replaced by
/// its limit `w = Δv + r` and the returned `w_s` is zero.
pub fn rhs_scaled(problem: &Problem, state: &ScaledState) -> Result<(Field, Field), DynamicsError> {
    let grid = state.v.grid;
    let n = grid.dim as f64;
    let eps = problem.coeffs.scaled_weights(state.s).eps;
    let ys: Vec<Vec<f64>> = (0..grid.dim).map(|a| grid.x_component(a)).collect();
    let advect = |f: &Field| -> Field {
        let g = gradient(f);
        let mut out = Field::zeros(grid);
        for (a, ga) in g.iter().enumerate() {
            for i in 0..grid.len() {
                out.data[i] += 0.5 * ys[a][i] * ga.data[i];
            }
        }
        out
    };
    let lap = laplacian(&state.v);
    if eps < STIFFNESS_FLOOR {
        let mut w = state.w.clone();
        for _ in 0..3 {
            let trial = ScaledState { s: state.s, v: state.v.clone(), w: w.clone() };
            let r = scaled_remainder(problem, &trial)?;
            w = lap.axpy(1.0, &r);
        }
        let dv = advect(&state.v).axpy(0.5 * n, &state.v).axpy(1.0, &w);
        return Ok((dv, Field::zeros(grid)));
    }
    let r = scaled_remainder(problem, state)?;
    let dv = advect(&state.v).axpy(0.5 * n, &state.v).axpy(1.0, &state.w);
    let forcing = lap.axpy(1.0, &r).axpy(-1.0, &state.w);
    let dw = advect(&state.w)
        .axpy(0.5 * n + 1.0, &state.w)
        .axpy(1.0 / eps, &forcing);
    Ok((dv, dw))
}

/// One Runge-Kutta step of the similarity-frame system.
pub fn step_scaled(problem: &Problem, state: &ScaledState, ds: f64) -> Result<ScaledState, DynamicsError> {
    if !(ds > 0.0) {
        return Err(DynamicsError::InvalidStep(format!("ds must be positive, got {ds}")));
    }
    let s0 = state.s;
    let stage = |st: &ScaledState, k: &(Field, Field), h: f64, s: f64| ScaledState {
        s,
        v: st.v.axpy(h, &k.0),
        w: st.w.axpy(h, &k.1),
    };
    let k1 = rhs_scaled(problem, state)?;
    let k2 = rhs_scaled(problem, &stage(state, &k1, 0.5 * ds, s0 + 0.5 * ds))?;
    let k3 = rhs_scaled(problem, &stage(state, &k2, 0.5 * ds, s0 + 0.5 * ds))?;
    let k4 = rhs_scaled(problem, &stage(state, &k3, ds, s0 + ds))?;
    let combine = |x: &Field, a: &Field, b: &Field, c: &Field, d: &Field| {
        let mut out = x.clone();
        for i in 0..out.data.len() {
            out.data[i] += ds / 6.0 * (a.data[i] + 2.0 * b.data[i] + 2.0 * c.data[i] + d.data[i]);
        }
        out
    };
    let v = combine(&state.v, &k1.0, &k2.0, &k3.0, &k4.0);
    let mut w = combine(&state.w, &k1.1, &k2.1, &k3.1, &k4.1);
    let s = s0 + ds;
    if problem.coeffs.scaled_weights(s).eps < STIFFNESS_FLOOR {
        let trial = ScaledState { s, v: v.clone(), w };
        let r = scaled_remainder(problem, &trial)?;
        w = laplacian(&v).axpy(1.0, &r);
    }
    Ok(ScaledState { s, v, w })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFamily {
    GaussianBump,
    OffCenterBump,
    RandomBandLimited,
    Dipole,
}

/// Initial data `(u0, u1)` of amplitude `epsilon` built on a Gaussian
/// envelope `exp(-|x - center|²/(2 width²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub family: DataFamily,
    pub epsilon: f64,
    pub width: f64,
    pub center: Vec<f64>,
    /// `u1 = u1_scale ×` (shape of `u0`), with independent draws for the
    /// random family.
    pub u1_scale: f64,
    pub seed: u64,
}

impl InitialData {
    pub fn gaussian(n: usize, epsilon: f64) -> Self {
        Self {
            family: DataFamily::GaussianBump,
            epsilon,
            width: 1.0,
            center: vec![0.0; n],
            u1_scale: 0.0,
            seed: 0,
        }
    }

    pub fn generate(&self, grid: &Grid) -> Result<PhysicalState, DynamicsError> {
        if self.center.len() != grid.dim {
            return Err(DynamicsError::InvalidStep(format!(
                "data center has {} components for a {}-dimensional grid",
                self.center.len(),
                grid.dim
            )));
        }
        let sigma = self.width;
        let c = self.center.clone();
        let envelope = move |x: &[f64]| {
            let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            (-r2 / (2.0 * sigma * sigma)).exp()
        };
        let (u, p) = match self.family {
            DataFamily::GaussianBump | DataFamily::OffCenterBump => {
                let u = Field::from_fn(*grid, &envelope);
                let p = u.scale(self.u1_scale);
                (u, p)
            }
            DataFamily::Dipole => {
                let c0 = self.center[0];
                let u = Field::from_fn(*grid, |x| (x[0] - c0) / sigma * envelope(x));
                let p = u.scale(self.u1_scale);
                (u, p)
            }
            DataFamily::RandomBandLimited => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let u = random_band_limited(grid, sigma, &envelope, &mut rng);
                let p = random_band_limited(grid, sigma, &envelope, &mut rng).scale(self.u1_scale);
                (u, p)
            }
        };
        Ok(PhysicalState {
            t: 0.0,
            u: u.scale(self.epsilon),
            p: p.scale(self.epsilon),
        })
    }
}

const RANDOM_MODES: i64 = 3;

fn random_band_limited(
    grid: &Grid,
    sigma: f64,
    envelope: &impl Fn(&[f64]) -> f64,
    rng: &mut ChaCha8Rng,
) -> Field {
    let dim = grid.dim;
    let side = (2 * RANDOM_MODES + 1) as usize;
    let count = side.pow(dim as u32);
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..count)
        .map(|idx| {
            let mut rem = idx;
            let k: Vec<f64> = (0..dim)
                .map(|_| {
                    let v = (rem % side) as i64 - RANDOM_MODES;
                    rem /= side;
                    v as f64 / sigma
                })
                .collect();
            let amp = rng.gen_range(-1.0..1.0) / (count as f64).sqrt();
            let phase = rng.gen_range(0.0..2.0 * PI);
            (k, amp, phase)
        })
        .collect();
    Field::from_fn(*grid, |x| {
        let series: f64 = modes
            .iter()
            .map(|(k, a, ph)| {
                let arg: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum();
                a * (arg + ph).cos()
            })
            .sum();
        envelope(x) * (1.0 + series)
    })
}
