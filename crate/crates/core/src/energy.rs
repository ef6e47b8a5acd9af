//! Energy ladder of the remainder `(f, g)`: the functionals `E_j`, their
//! dissipations `L_j` and remainders `R_j`, with the balance laws
//! `dE_j/ds + (decay) + L_j = R_j`, plus the Hardy-type inequalities the
//! ladder relies on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::Decomposition;
use crate::fields::{
    fractional_primitive, gradient, ifft, padded_spectrum, primitive, weighted_norm, Field,
    FieldError, SpectralField,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid energy parameter: {0}")]
    InvalidParameter(String),
    #[error("series too short for the requested stencil")]
    SeriesTooShort,
}

pub const IDENTITY_NAMES: [&str; 6] = ["E0", "E1", "E2", "E3", "E4", "E5"];

/// Parameters of the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Fractional order of the primitive level (`n >= 2`).
    pub delta: f64,
    /// Slack of the weighted level (`n >= 2`); defaults to half of `m - n/2`.
    pub eta_e2: Option<f64>,
    /// Absorption slack used when bounding the combined remainder.
    pub eta_tilde: f64,
    pub c0: f64,
    pub c1: f64,
    /// Decay rate of the mass level.
    pub lambda: f64,
    /// Spatial weight exponent.
    pub m: f64,
    /// Zero-padding factor for the Fourier-side integrals (`n >= 2`).
    pub pad: usize,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            delta: 0.5,
            eta_e2: None,
            eta_tilde: 0.5,
            c0: 64.0,
            c1: 16.0,
            lambda: 0.24,
            m: 1.0,
            pad: 4,
        }
    }
}

impl EnergyParams {
    pub fn delta_tilde(&self, n: usize) -> f64 {
        self.m - 0.5 * n as f64
    }

    pub fn eta_e2(&self, n: usize) -> f64 {
        self.eta_e2.unwrap_or(0.5 * self.delta_tilde(n))
    }
}

/// One balance law `dE/ds + decay + dissipation = remainder`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityTerms {
    pub energy: f64,
    pub decay: f64,
    pub dissipation: f64,
    pub remainder: f64,
}

impl IdentityTerms {
    /// `decay + dissipation - remainder`; the balance law says this equals
    /// `-dE/ds`.
    pub fn balance(&self) -> f64 {
        self.decay + self.dissipation - self.remainder
    }
}

/// Norms used by the equivalence, lower-bound and envelope diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NormSet {
    pub f_h1m: f64,
    pub g_h0m: f64,
    pub r_h0m: f64,
    pub h_h0m: f64,
    pub big_h_h0m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub s: f64,
    pub eps: f64,
    pub drag: f64,
    pub alpha: f64,
    pub dalpha: f64,
    /// Balance laws for `E0 .. E5`.
    pub identities: [IdentityTerms; 6],
    /// Mass-level remainder `eps α'² - 2 drag α α' + α ∫r` added in the last law.
    pub r5_extra: f64,
    /// Coercive comparison forms for `E0, E1, E2`.
    pub comparison: [f64; 3],
    /// Pointwise quadratic forms of `E0, E1, E2` are positive definite.
    pub positive_definite: bool,
    /// `‖f‖²_{H^{1,m}} + ‖g‖²_{H^{0,m}} + α'²`, the lower-bound form for `L4`.
    pub dissipation_form: f64,
    pub norms: NormSet,
}

impl EnergyReport {
    pub fn e(&self, j: usize) -> f64 {
        self.identities[j].energy
    }
}

struct Level {
    e: f64,
    l: f64,
    r: f64,
    q: f64,
}

/// Evaluates the ladder at one decomposition.
pub fn evaluate(dec: &Decomposition, params: &EnergyParams) -> Result<EnergyReport, EnergyError> {
    let grid = dec.f.grid;
    let n = grid.dim;
    if !(params.delta > 0.0 && params.delta < 1.0) && n >= 2 {
        return Err(EnergyError::InvalidParameter(format!(
            "delta must lie in (0, 1), got {}",
            params.delta
        )));
    }
    let eps = dec.weights.eps;
    let drag = dec.weights.drag;
    let (levels, pos_thresh, big_h_norm) = if n == 1 {
        one_dimensional(dec, params)?
    } else {
        multi_dimensional(dec, params)?
    };
    let lambda = params.lambda;
    let s = dec.s;
    let a = dec.alpha;
    let da = dec.dalpha;
    let decay_mass = (-2.0 * lambda * s).exp();
    let e3 = 0.5 * eps * da * da + decay_mass * a * a;
    let r3 = 0.5 * (2.0 * lambda + 1.0) * eps * da * da - drag * da * da
        + da * dec.r_mass
        + 2.0 * decay_mass * a * da;
    let cs = [params.c0, params.c1, 1.0];
    let e4 = cs.iter().zip(&levels).map(|(c, lv)| c * lv.e).sum::<f64>() + e3;
    let (decays, l4_energy): ([f64; 3], f64) = if n == 1 {
        let d = [0.5; 3];
        let l4e = (0.5 - 2.0 * lambda) * cs.iter().zip(&levels).map(|(c, lv)| c * lv.e).sum::<f64>();
        (d, l4e)
    } else {
        let dt = params.delta_tilde(n) - params.eta_e2(n);
        let d = [params.delta, params.delta, dt];
        let l4e = cs
            .iter()
            .zip(&levels)
            .zip(&d)
            .map(|((c, lv), dj)| c * (dj - 2.0 * lambda) * lv.e)
            .sum::<f64>();
        (d, l4e)
    };
    let l4 = l4_energy + cs.iter().zip(&levels).map(|(c, lv)| c * lv.l).sum::<f64>() + da * da;
    let r4 = cs.iter().zip(&levels).map(|(c, lv)| c * lv.r).sum::<f64>() + r3;
    let e5 = e4 + 0.5 * a * a + eps * a * da;
    let r5_extra = eps * da * da - 2.0 * drag * a * da + a * dec.r_mass;

    let mut identities = [IdentityTerms::default(); 6];
    for j in 0..3 {
        identities[j] = IdentityTerms {
            energy: levels[j].e,
            decay: decays[j] * levels[j].e,
            dissipation: levels[j].l,
            remainder: levels[j].r,
        };
    }
    identities[3] = IdentityTerms {
        energy: e3,
        decay: 2.0 * lambda * e3,
        dissipation: da * da,
        remainder: r3,
    };
    identities[4] = IdentityTerms {
        energy: e4,
        decay: 2.0 * lambda * e4,
        dissipation: l4,
        remainder: r4,
    };
    identities[5] = IdentityTerms {
        energy: e5,
        decay: 2.0 * lambda * e4,
        dissipation: l4,
        remainder: r4 + r5_extra,
    };

    let m = params.m;
    let f_h1m = weighted_norm(&dec.f, 1, m)?;
    let g_h0m = weighted_norm(&dec.g, 0, m)?;
    let norms = NormSet {
        f_h1m,
        g_h0m,
        r_h0m: weighted_norm(&dec.r, 0, m)?,
        h_h0m: weighted_norm(&dec.h, 0, m)?,
        big_h_h0m: big_h_norm,
    };
    Ok(EnergyReport {
        s,
        eps,
        drag,
        alpha: a,
        dalpha: da,
        identities,
        r5_extra,
        comparison: [levels[0].q, levels[1].q, levels[2].q],
        positive_definite: eps < pos_thresh,
        dissipation_form: f_h1m * f_h1m + g_h0m * g_h0m + da * da,
        norms,
    })
}

fn one_dimensional(
    dec: &Decomposition,
    params: &EnergyParams,
) -> Result<([Level; 3], f64, f64), EnergyError> {
    let (f, g, h) = (&dec.f, &dec.g, &dec.h);
    let eps = dec.weights.eps;
    let drag = dec.weights.drag;
    let fy = gradient(f).remove(0);
    let big_f = primitive(f)?;
    let big_g = primitive(g)?;
    let big_h = primitive(h)?;
    let y = f.grid.x_component(0);
    let y2: Vec<f64> = y.iter().map(|v| v * v).collect();

    let ff = f.dot(f);
    let ffy = fy.dot(&fy);
    let gg = big_g.dot(&big_g);
    let fg_big = big_f.dot(&big_g);
    let e0 = 0.5 * (ff + eps * gg) + 0.5 * big_f.dot(&big_f) + eps * fg_big;
    let l0 = 0.5 * ff + gg;
    let r0 = 1.5 * eps * gg - drag * (gg + 2.0 * fg_big) + big_f.dot(&big_h) + big_g.dot(&big_h);
    let q0 = ff + eps * gg + big_f.dot(&big_f);

    let g2 = g.dot(g);
    let fg = f.dot(g);
    let e1 = 0.5 * (ffy + eps * g2) + ff + 2.0 * eps * fg;
    let l1 = ffy + g2 - ff;
    let r1 = 3.0 * eps * g2 + 2.0 * eps * fg - drag * (g2 + 4.0 * fg) + 2.0 * f.dot(h) + g.dot(h);
    let q1 = ffy + eps * g2 + ff;

    let wfy = fy.weighted_dot(&fy, &y2);
    let wg = g.weighted_dot(g, &y2);
    let wf = f.weighted_dot(f, &y2);
    let wfg = f.weighted_dot(g, &y2);
    let e2 = 0.5 * (wfy + eps * wg) + 0.5 * wf + eps * wfg;
    let cross = fy.weighted_dot(f, &y) + fy.weighted_dot(g, &y);
    let l2 = 0.5 * wfy + wg + 2.0 * cross;
    let r2 = 1.5 * eps * wg - drag * (2.0 * wfg + wg) + f.weighted_dot(h, &y2) + g.weighted_dot(h, &y2);
    let q2 = wfy + eps * wg + wf;

    let big_h_norm = weighted_norm(&big_h, 0, params.m)?;
    Ok((
        [
            Level { e: e0, l: l0, r: r0, q: q0 },
            Level { e: e1, l: l1, r: r1, q: q1 },
            Level { e: e2, l: l2, r: r2, q: q2 },
        ],
        0.5,
        big_h_norm,
    ))
}

fn multi_dimensional(
    dec: &Decomposition,
    params: &EnergyParams,
) -> Result<([Level; 3], f64, f64), EnergyError> {
    let (f, g, h) = (&dec.f, &dec.g, &dec.h);
    let grid = f.grid;
    let n = grid.dim;
    let nf = n as f64;
    let eps = dec.weights.eps;
    let drag = dec.weights.drag;
    let delta = params.delta;

    // Fourier-side level on a refined lattice
    let fh = padded_spectrum(f, params.pad)?;
    let gh = padded_spectrum(g, params.pad)?;
    let hh = padded_spectrum(h, params.pad)?;
    let k2 = fh.grid.xi_sq();
    let vol = fh.grid.box_volume();
    let p = -0.5 * nf - delta;
    let (mut s_ff, mut s_xff, mut s_gg, mut s_fg, mut s_fh, mut s_gh) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..k2.len() {
        if k2[i] == 0.0 {
            continue;
        }
        let w = k2[i].powf(p);
        let (a, b, c) = (fh.coeffs[i], gh.coeffs[i], hh.coeffs[i]);
        s_ff += w * a.norm_sqr();
        s_xff += k2[i] * w * a.norm_sqr();
        s_gg += w * b.norm_sqr();
        s_fg += w * (a * b.conj()).re;
        s_fh += w * (a * c.conj()).re;
        s_gh += w * (b * c.conj()).re;
    }
    let [s_ff, s_xff, s_gg, s_fg, s_fh, s_gh] = [s_ff, s_xff, s_gg, s_fg, s_fh, s_gh].map(|x| x * vol);
    let e0 = 0.5 * (s_xff + eps * s_gg) + 0.5 * s_ff + eps * s_fg;
    let l0 = 0.5 * s_xff + s_gg;
    let r0 = 1.5 * eps * s_gg - drag * (2.0 * s_fg + s_gg) + s_fh + s_gh;
    let q0 = s_xff + eps * s_gg + s_ff;

    // unweighted level
    let grad = gradient(f);
    let gf2: f64 = grad.iter().map(|d| d.dot(d)).sum();
    let ff = f.dot(f);
    let g2 = g.dot(g);
    let fg = f.dot(g);
    let kappa = 0.25 * nf + 1.0;
    let e1 = 0.5 * (gf2 + eps * g2) + kappa * (0.5 * ff + eps * fg);
    let l1 = 0.5 * (1.0 - delta) * gf2 + g2 - (0.25 * nf + 0.5 * delta) * kappa * ff;
    let r1 = (0.5 * nf + delta) * kappa * eps * fg + 0.5 * (nf + 3.0 + delta) * eps * g2
        - drag * (2.0 * kappa * fg + g2)
        + kappa * f.dot(h)
        + g.dot(h);
    let q1 = gf2 + eps * g2 + ff;

    // weighted level
    let m = params.m;
    let eta = params.eta_e2(n);
    let r2v = grid.radius_sq();
    let wm: Vec<f64> = r2v.iter().map(|r| r.powf(m)).collect();
    let wm1: Vec<f64> = r2v.iter().map(|r| r.powf(m - 1.0)).collect();
    let wgf2: f64 = grad.iter().map(|d| d.weighted_dot(d, &wm)).sum();
    let wg = g.weighted_dot(g, &wm);
    let wf = f.weighted_dot(f, &wm);
    let wfg = f.weighted_dot(g, &wm);
    let mut ydf = Field::zeros(grid);
    for (a, d) in grad.iter().enumerate() {
        let ya = grid.x_component(a);
        for i in 0..grid.len() {
            ydf.data[i] += ya[i] * d.data[i];
        }
    }
    let cross = ydf.weighted_dot(f, &wm1) + ydf.weighted_dot(g, &wm1);
    let e2 = 0.5 * (wgf2 + eps * wg) + 0.5 * wf + eps * wfg;
    let l2 = 0.5 * eta * wf + 0.5 * (eta + 1.0) * wgf2 + wg + 2.0 * m * cross;
    let r2 = -eta * eps * wfg - 0.5 * (eta - 3.0) * eps * wg - drag * (2.0 * wfg + wg)
        + f.weighted_dot(h, &wm)
        + g.weighted_dot(h, &wm);
    let q2 = wgf2 + eps * wg + wf;

    let big_h = ifft(&fractional_primitive(h, delta));
    let big_h_norm = weighted_norm(&big_h, 0, m)?;
    Ok((
        [
            Level { e: e0, l: l0, r: r0, q: q0 },
            Level { e: e1, l: l1, r: r1, q: q1 },
            Level { e: e2, l: l2, r: r2, q: q2 },
        ],
        (1.0 / kappa).min(1.0),
        big_h_norm,
    ))
}

/// Balance-law residuals `dE/ds + decay + L - R` at interior samples, with
/// `dE/ds` from central differences over `stride` samples on each side.
/// Returns `(s, residuals)` pairs.
pub fn identity_residuals(
    reports: &[EnergyReport],
    stride: usize,
) -> Result<Vec<(f64, [f64; 6])>, EnergyError> {
    if stride == 0 || reports.len() < 2 * stride + 1 {
        return Err(EnergyError::SeriesTooShort);
    }
    let mut out = Vec::new();
    for k in stride..reports.len() - stride {
        let lo = &reports[k - stride];
        let hi = &reports[k + stride];
        let ds = hi.s - lo.s;
        let mut res = [0.0; 6];
        for j in 0..6 {
            let de = (hi.identities[j].energy - lo.identities[j].energy) / ds;
            res[j] = de + reports[k].identities[j].balance();
        }
        out.push((reports[k].s, res));
    }
    Ok(out)
}

/// `∫F²` against `4∫y²f²` for a zero-mean one-dimensional field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

pub fn hardy_1d(f: &Field) -> Result<HardyCheck, EnergyError> {
    let big_f = primitive(f)?;
    let y2: Vec<f64> = f.grid.x_component(0).iter().map(|y| y * y).collect();
    let lhs = big_f.dot(&big_f);
    let rhs = 4.0 * f.weighted_dot(f, &y2);
    Ok(HardyCheck {
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

/// `‖|ξ|^{-n/2-δ} f̂‖_{L²} / ‖f‖_{H^{0,m}}` for a zero-mean field.
pub fn fractional_hardy_ratio(f: &Field, delta: f64, m: f64, pad: usize) -> Result<f64, EnergyError> {
    let fhat = padded_spectrum(f, pad)?;
    let k2 = fhat.grid.xi_sq();
    let p = -0.5 * f.grid.dim as f64 - delta;
    let lhs: f64 = fhat
        .coeffs
        .iter()
        .zip(&k2)
        .filter(|(_, &k)| k > 0.0)
        .map(|(c, &k)| k.powf(p) * c.norm_sqr())
        .sum::<f64>()
        * fhat.grid.box_volume();
    Ok(lhs.sqrt() / weighted_norm(f, 0, m)?)
}

/// Low-mode interpolation
/// `∫|f̂|² ≤ η∫|ξ|²|f̂|² + η^{(2-n-2δ)/2} ∫|ξ|²|F̂|²`, returned as `(lhs, rhs)`.
pub fn low_mode_interpolation(f: &Field, delta: f64, eta: f64) -> (f64, f64) {
    let fhat: SpectralField = crate::fields::fft(f);
    let big: SpectralField = fractional_primitive(f, delta);
    let k2 = f.grid.xi_sq();
    let n = f.grid.dim as f64;
    let lhs = fhat.energy();
    let grad = fhat.weighted_energy(&k2);
    let prim = big.weighted_energy(&k2);
    (lhs, eta * grad + eta.powf(0.5 * (2.0 - n - 2.0 * delta)) * prim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{CoefficientSet, Perturbation};
    use crate::decompose::split;
    use crate::dynamics::{Problem, ScaledState};
    use crate::fields::{gaussian_modes, heat_gaussian, Grid};
    use crate::nonlinearity::Nonlinearity;
    use proptest::prelude::*;

    #[test]
    fn hardy_analytic_case() {
        // f = y e^{-y²/2}: ∫F² = √π and 4∫y²f² = 3√π
        let g = Grid::new(1, 20.0, 1024).unwrap();
        let f = Field::from_fn(g, |x| x[0] * (-x[0] * x[0] / 2.0).exp());
        let c = hardy_1d(&f).unwrap();
        assert!((c.ratio - 1.0 / 3.0).abs() < 1e-6);
        assert!((c.lhs - std::f64::consts::PI.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn low_mode_interpolation_holds() {
        let g = Grid::new(2, 12.0, 64).unwrap();
        let f = Field::from_fn(g, |x| (x[0] - 0.3 * x[1]) * (-(x[0] * x[0] + x[1] * x[1]) / 3.0).exp());
        for eta in [0.01, 0.3, 2.0] {
            let (lhs, rhs) = low_mode_interpolation(&f, 0.5, eta);
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    fn sample_decomposition(n: usize, s: f64) -> Decomposition {
        let grid = Grid::new(n, 16.0, if n == 1 { 256 } else { 64 }).unwrap();
        let modes = gaussian_modes(&grid);
        let v = heat_gaussian(&grid, 1.4).axpy(0.2, &Field::from_fn(grid, |x| x[0] * (-x.iter().map(|y| y * y).sum::<f64>() / 2.0).exp()));
        let w = heat_gaussian(&grid, 0.8).scale(0.3);
        let pb = Problem {
            coeffs: CoefficientSet::new(n, 0.3, 1.0, Perturbation::none(n)).unwrap(),
            nonlinearity: Nonlinearity::default(),
        };
        split(&pb, &ScaledState { s, v, w }, &modes).unwrap()
    }

    #[test]
    fn mass_level_bookkeeping() {
        for n in [1, 2] {
            let dec = sample_decomposition(n, 1.2);
            let params = EnergyParams { m: if n == 1 { 1.0 } else { 3.0 }, ..Default::default() };
            let rep = evaluate(&dec, &params).unwrap();
            let (e4, e5) = (rep.identities[4], rep.identities[5]);
            let extra = 0.5 * rep.alpha * rep.alpha + rep.eps * rep.alpha * rep.dalpha;
            assert!((e5.energy - e4.energy - extra).abs() < 1e-12 * e5.energy.abs());
            assert!((e4.balance() - e5.balance() - rep.r5_extra).abs() < 1e-12 * e4.balance().abs().max(1.0));
            let sum = params.c0 * rep.e(0) + params.c1 * rep.e(1) + rep.e(2) + rep.e(3);
            assert!((sum - rep.e(4)).abs() < 1e-12 * sum);
        }
    }

    #[test]
    fn comparison_forms_dominate_when_definite() {
        for n in [1, 2] {
            let dec = sample_decomposition(n, 2.5);
            let params = EnergyParams { m: if n == 1 { 1.0 } else { 3.0 }, ..Default::default() };
            let rep = evaluate(&dec, &params).unwrap();
            assert!(rep.positive_definite);
            for j in 0..3 {
                assert!(rep.e(j) > 0.0 && rep.e(j) <= rep.comparison[j]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn hardy_random_fields(coeffs in proptest::collection::vec(-1.0f64..1.0, 6), shift in -1.0f64..1.0) {
            let g = Grid::new(1, 20.0, 512).unwrap();
            let f = Field::from_fn(g, |x| {
                let y = x[0] - shift;
                let env = (-y * y / 2.0).exp();
                coeffs.iter().enumerate().map(|(k, c)| c * y.powi(k as i32)).sum::<f64>() * env
            });
            let mass = f.integral();
            let phi = heat_gaussian(&g, 1.0);
            let f = f.axpy(-mass, &phi);
            prop_assume!(f.l2_norm() > 1e-6);
            let c = hardy_1d(&f).unwrap();
            prop_assert!(c.lhs <= c.rhs * 1.01);
        }
    }
}
