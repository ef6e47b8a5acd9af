//! Post-processing of run series: the limit mass `α*`, profile errors against
//! the spreading Gaussian, decay-exponent fits, the a priori monitor and the
//! remainder envelopes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::rate_lambda0;
use crate::dynamics::Problem;
use crate::energy::EnergyReport;
use crate::fields::{heat_gaussian, Field};
use crate::nonlinearity::Nonlinearity;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Minimum number of tail samples for the limit-mass fit.
pub const MIN_TAIL_POINTS: usize = 20;
/// Minimum number of samples inside a decay-fit window.
pub const MIN_FIT_POINTS: usize = 10;
/// Default one-sided slack on fitted decay slopes.
pub const SLOPE_TOL: f64 = 0.08;

const RHO_MIN: f64 = 1e-3;
const RHO_MAX: f64 = 50.0;
/// Masses of resampled fields carry about 1e-10 relative quadrature noise;
/// a tail flatter than this has no readable rate.
const FLAT_REL: f64 = 1e-8;

/// Fit of `α(s) ≈ α* + A e^{-ρ s}` on the tail of the mass series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha_star: f64,
    /// `None` when the tail is flat to rounding and no rate can be read off.
    pub tail_rate: Option<f64>,
    pub amplitude: f64,
    /// Root-mean-square misfit on the tail.
    pub residual: f64,
    /// `max α - min α` on the tail.
    pub tail_variation: f64,
    pub n_points: usize,
    pub warning: Option<String>,
}

/// Least-squares `(α*, A)` for a fixed rate, with the sum of squared misfits.
fn exp_fit(s: &[f64], a: &[f64], rho: f64) -> (f64, f64, f64) {
    let s0 = s[0];
    let x: Vec<f64> = s.iter().map(|v| (-rho * (v - s0)).exp()).collect();
    let n = s.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), a.iter().sum::<f64>());
    let sxx = x.iter().map(|v| v * v).sum::<f64>();
    let sxy = x.iter().zip(a).map(|(u, v)| u * v).sum::<f64>();
    let det = n * sxx - sx * sx;
    let (c, k) = if det.abs() > 1e-300 {
        ((sxx * sy - sx * sxy) / det, (n * sxy - sx * sy) / det)
    } else {
        (sy / n, 0.0)
    };
    let sse = x.iter().zip(a).map(|(u, v)| (c + k * u - v).powi(2)).sum::<f64>();
    (c, k * (rho * s0).exp(), sse)
}

/// Limit mass from the samples with `s >= tail_from` (default: the second
/// half of the series).
pub fn alpha_star(s: &[f64], alpha: &[f64], tail_from: Option<f64>) -> Result<AlphaFit, AnalysisError> {
    if s.len() != alpha.len() {
        return Err(AnalysisError::LengthMismatch(s.len(), alpha.len()));
    }
    let start = match tail_from {
        Some(from) => s.iter().position(|&v| v >= from).unwrap_or(s.len()),
        None => s.len() / 2,
    };
    let (ts, ta) = (&s[start..], &alpha[start..]);
    if ts.len() < MIN_TAIL_POINTS {
        return Err(AnalysisError::TooFewPoints {
            needed: MIN_TAIL_POINTS,
            got: ts.len(),
        });
    }
    let hi = ta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ta.iter().cloned().fold(f64::INFINITY, f64::min);
    let variation = hi - lo;
    let scale = hi.abs().max(lo.abs());
    let last = *ta.last().expect("non-empty tail");
    if variation <= FLAT_REL * scale || variation == 0.0 {
        return Ok(AlphaFit {
            alpha_star: last,
            tail_rate: None,
            amplitude: 0.0,
            residual: 0.0,
            tail_variation: variation,
            n_points: ts.len(),
            warning: None,
        });
    }
    // log-spaced scan, then golden-section refinement around the best node
    let nodes = 200;
    let ratio = (RHO_MAX / RHO_MIN).ln() / (nodes - 1) as f64;
    let rho_at = |i: usize| RHO_MIN * (ratio * i as f64).exp();
    let best = (0..nodes)
        .min_by(|&i, &j| exp_fit(ts, ta, rho_at(i)).2.total_cmp(&exp_fit(ts, ta, rho_at(j)).2))
        .expect("scan nodes");
    let (mut a, mut b) = (rho_at(best.saturating_sub(1)), rho_at((best + 1).min(nodes - 1)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let sse = |r: f64| exp_fit(ts, ta, r).2;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    for _ in 0..80 {
        if sse(c) < sse(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let rho = 0.5 * (a + b);
    let (alpha_star, amplitude, err) = exp_fit(ts, ta, rho);
    let residual = (err / ts.len() as f64).sqrt();
    let warning = (residual > 0.1 * variation).then(|| {
        format!(
            "tail does not follow a single exponential: residual {residual:.3e} vs variation {variation:.3e}"
        )
    });
    Ok(AlphaFit {
        alpha_star,
        tail_rate: Some(rho),
        amplitude,
        residual,
        tail_variation: variation,
        n_points: ts.len(),
        warning,
    })
}

/// `‖u - α* 𝒢(B+1, ·)‖_{L²}` on the grid of `u`.
pub fn profile_error(u: &Field, alpha_star: f64, big_b: f64) -> f64 {
    let g = heat_gaussian(&u.grid, big_b + 1.0);
    u.axpy(-alpha_star, &g).l2_norm()
}

/// Least-squares line through `(ln x, ln y)` restricted to `x ∈ window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub n_points: usize,
}

pub fn fit_loglog(x: &[f64], y: &[f64], window: [f64; 2]) -> Result<LogLogFit, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&a, &b)| a >= window[0] * (1.0 - 1e-12) && a <= window[1] * (1.0 + 1e-12) && b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::TooFewPoints {
            needed: MIN_FIT_POINTS,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if sxx <= 1e-24 * n * (1.0 + mx * mx) {
        return Err(AnalysisError::Degenerate("no spread in the abscissa".into()));
    }
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = pts.iter().map(|p| (intercept + slope * p.0 - p.1).powi(2)).sum::<f64>();
    Ok(LogLogFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        n_points: pts.len(),
    })
}

/// One-sided decay check: the measured slope must not exceed
/// `-(predicted) + tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub n_points: usize,
    pub window: [f64; 2],
    pub predicted_exponent: f64,
    /// `slope + predicted`; negative means faster than predicted.
    pub margin: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Fits `log err` against `log(B+1)` over `window` (in `B+1`).
pub fn fit_decay(
    b_plus_1: &[f64],
    err: &[f64],
    window: [f64; 2],
    predicted_exponent: f64,
    tol: f64,
) -> Result<DecayFit, AnalysisError> {
    let line = fit_loglog(b_plus_1, err, window)?;
    let threshold = -predicted_exponent + tol;
    Ok(DecayFit {
        slope: line.slope,
        intercept: line.intercept,
        residual: line.residual,
        n_points: line.n_points,
        window,
        predicted_exponent,
        margin: line.slope + predicted_exponent,
        threshold,
        pass: line.slope <= threshold,
    })
}

/// Smallest sample time from which `flags` hold for the rest of the series.
pub fn persistent_from(s: &[f64], flags: &[bool]) -> Option<f64> {
    let k = flags.iter().rposition(|f| !f).map_or(0, |i| i + 1);
    s.get(k).copied()
}

/// Times from which the ladder is usable: `s1` (pointwise positivity of the
/// quadratic forms), `s2` (`E5 >= E4/2 + α²/4`) and `s0 = max(s1, s2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub s0: Option<f64>,
}

pub fn thresholds(reports: &[EnergyReport]) -> Thresholds {
    let s: Vec<f64> = reports.iter().map(|r| r.s).collect();
    let pd: Vec<bool> = reports.iter().map(|r| r.positive_definite).collect();
    let lower: Vec<bool> = reports
        .iter()
        .map(|r| r.e(5) >= 0.5 * r.e(4) + 0.25 * r.alpha * r.alpha)
        .collect();
    let s1 = persistent_from(&s, &pd);
    let s2 = persistent_from(&s, &lower);
    let s0 = match (s1, s2) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    Thresholds { s1, s2, s0 }
}

/// Running supremum of `E5` against its value at the start time `s0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub s0: Option<f64>,
    pub e5_at_s0: f64,
    /// `sup E5` over `s >= s0`.
    pub sup_after_s0: f64,
    /// `sup E5` over the whole run.
    pub sup_e5: f64,
    pub bounded: bool,
}

pub fn apriori_monitor(reports: &[EnergyReport]) -> AprioriReport {
    let th = thresholds(reports);
    let sup_e5 = reports.iter().map(|r| r.e(5)).fold(f64::NEG_INFINITY, f64::max);
    let Some(s0) = th.s0 else {
        return AprioriReport {
            s0: None,
            e5_at_s0: f64::NAN,
            sup_after_s0: f64::NAN,
            sup_e5,
            bounded: false,
        };
    };
    let after: Vec<&EnergyReport> = reports.iter().filter(|r| r.s >= s0).collect();
    let e5_at_s0 = after[0].e(5);
    let sup_after_s0 = after.iter().map(|r| r.e(5)).fold(f64::NEG_INFINITY, f64::max);
    AprioriReport {
        s0: Some(s0),
        e5_at_s0,
        sup_after_s0,
        sup_e5,
        bounded: sup_after_s0.is_finite() && sup_after_s0 <= 4.0 * e5_at_s0,
    }
}

/// Quadratic amplitude scaling: `sup E5(ε) / sup E5(ε/2)` should be near 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub ratio: f64,
    pub pass: bool,
}

pub fn scaling_check(sup_full: f64, sup_half: f64) -> ScalingCheck {
    let ratio = sup_full / sup_half;
    ScalingCheck {
        ratio,
        pass: (3.0..=5.0).contains(&ratio),
    }
}

/// Shape of the nonlinear part of the remainder bounds.
#[derive(Debug, Clone, PartialEq)]
enum NlShape {
    Linear,
    /// `(p1 + p2, p3)` per monomial.
    Monomials(Vec<(f64, f64)>),
    Power(f64),
}

/// Right-hand sides of the remainder bounds with all constants set to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeModel {
    pub lambda0: f64,
    pub lambda1: f64,
    pub eta_tilde: f64,
    shape: NlShape,
}

/// Measured-to-bound ratios at one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub s: f64,
    pub r: f64,
    pub h: f64,
    pub big_h: f64,
    /// `(|R4| - η̃ L4)_+` against the remaining terms of its bound.
    pub r4: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

impl EnvelopeModel {
    pub fn new(problem: &Problem, eta_tilde: f64) -> Self {
        let n = problem.coeffs.perturbation.c_amp.len();
        let beta = problem.coeffs.damping.beta;
        let shape = match &problem.nonlinearity {
            nl if nl.is_linear() => NlShape::Linear,
            Nonlinearity::Monomials(terms) => NlShape::Monomials(
                terms
                    .iter()
                    .filter(|m| m.coeff != 0.0)
                    .map(|m| (m.p1 + m.p2, m.p3))
                    .collect(),
            ),
            Nonlinearity::Power(p) => NlShape::Power(p.p),
        };
        Self {
            lambda0: rate_lambda0(&problem.coeffs),
            lambda1: problem.nonlinearity.lambda1(n, beta),
            eta_tilde,
            shape,
        }
    }

    /// Nonlinear factor of the `r`, `h`, `H` bounds.
    fn nl_fields(&self, rep: &EnergyReport) -> f64 {
        let fa = rep.norms.f_h1m + rep.alpha.abs();
        let ga = rep.norms.g_h0m + rep.alpha.abs() + rep.dalpha.abs();
        match &self.shape {
            NlShape::Linear => 0.0,
            NlShape::Monomials(t) => t
                .iter()
                .map(|(p12, p3)| fa.powf(2.0 * p12) * ga.powf(2.0 * p3))
                .sum(),
            NlShape::Power(p) => fa.powf(2.0 * p),
        }
    }

    /// Nonlinear factor of the `R4` bound in terms of `E5` and `L4`.
    fn nl_energy(&self, e5: f64, l4: f64) -> f64 {
        let e5 = e5.max(0.0);
        let l4 = l4.max(0.0);
        match &self.shape {
            NlShape::Linear => 0.0,
            NlShape::Monomials(t) => t
                .iter()
                .map(|(p12, p3)| e5.powf(*p12) * (e5.powf(*p3) + l4.powf(*p3)))
                .sum(),
            NlShape::Power(p) => e5.powf(*p),
        }
    }

    pub fn point(&self, rep: &EnergyReport) -> EnvelopePoint {
        let s = rep.s;
        let lin = rep.norms.f_h1m.powi(2)
            + rep.norms.g_h0m.powi(2)
            + rep.alpha * rep.alpha
            + rep.dalpha * rep.dalpha;
        let w0 = (-2.0 * self.lambda0 * s).exp();
        let w1 = (-2.0 * self.lambda1 * s).exp();
        let bound = w0 * lin + w1 * self.nl_fields(rep);
        let ident = &rep.identities[4];
        let excess = (ident.remainder.abs() - self.eta_tilde * ident.dissipation).max(0.0);
        let r4_bound = w0 * rep.e(5) + w1 * self.nl_energy(rep.e(5), ident.dissipation);
        EnvelopePoint {
            s,
            r: ratio(rep.norms.r_h0m.powi(2), bound),
            h: ratio(rep.norms.h_h0m.powi(2), bound),
            big_h: ratio(rep.norms.big_h_h0m.powi(2), bound),
            r4: ratio(excess, r4_bound),
        }
    }

    pub fn series(&self, reports: &[EnergyReport]) -> Vec<EnvelopePoint> {
        reports.iter().map(|r| self.point(r)).collect()
    }
}

/// Summary of one ratio series over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeStats {
    pub median: f64,
    pub max: f64,
    /// Supremum over the last third of the window, the empirical constant.
    pub tail_sup: f64,
    pub finite: bool,
    /// `max <= 10 · median`.
    pub stable: bool,
}

fn stats(values: &[f64]) -> EnvelopeStats {
    if values.is_empty() {
        return EnvelopeStats {
            median: f64::NAN,
            max: f64::NAN,
            tail_sup: f64::NAN,
            finite: false,
            stable: false,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    };
    let max = sorted[k - 1];
    let tail = &values[values.len() - values.len().div_ceil(3)..];
    let tail_sup = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let finite = values.iter().all(|v| v.is_finite());
    EnvelopeStats {
        median,
        max,
        tail_sup,
        finite,
        stable: finite && max <= 10.0 * median,
    }
}

/// Per-bound statistics over samples with `s >= s_from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub s_from: f64,
    pub r: EnvelopeStats,
    pub h: EnvelopeStats,
    pub big_h: EnvelopeStats,
    pub r4: EnvelopeStats,
}

pub fn summarize_envelopes(points: &[EnvelopePoint], s_from: f64) -> EnvelopeSummary {
    let sel: Vec<&EnvelopePoint> = points.iter().filter(|p| p.s >= s_from).collect();
    let pick = |f: fn(&EnvelopePoint) -> f64| stats(&sel.iter().map(|p| f(p)).collect::<Vec<_>>());
    EnvelopeSummary {
        s_from,
        r: pick(|p| p.r),
        h: pick(|p| p.h),
        big_h: pick(|p| p.big_h),
        r4: pick(|p| p.r4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use proptest::prelude::*;

    #[test]
    fn planted_power_law_recovered() {
        let x: Vec<f64> = (0..40).map(|k| 10f64.powf(1.0 + 2.0 * k as f64 / 39.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-0.75)).collect();
        let fit = fit_decay(&x, &y, [10.0, 1000.0], 0.75, SLOPE_TOL).unwrap();
        assert!((fit.slope + 0.75).abs() < 1e-10);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit.pass);
        assert!(fit.margin.abs() < 1e-10);
    }

    #[test]
    fn decay_fit_is_one_sided() {
        let x: Vec<f64> = (0..30).map(|k| 20.0 + 10.0 * k as f64).collect();
        let fast: Vec<f64> = x.iter().map(|v| v.powf(-2.0)).collect();
        let slow: Vec<f64> = x.iter().map(|v| v.powf(-0.2)).collect();
        assert!(fit_decay(&x, &fast, [20.0, 500.0], 0.5, SLOPE_TOL).unwrap().pass);
        assert!(!fit_decay(&x, &slow, [20.0, 500.0], 0.5, SLOPE_TOL).unwrap().pass);
    }

    #[test]
    fn decay_fit_needs_enough_points() {
        let x = [20.0, 30.0, 40.0];
        let y = [1.0, 0.5, 0.3];
        assert!(matches!(
            fit_decay(&x, &y, [1.0, 100.0], 0.5, SLOPE_TOL),
            Err(AnalysisError::TooFewPoints { .. })
        ));
        let flat_x = [5.0; 12];
        let flat_y = [1.0; 12];
        assert!(matches!(
            fit_loglog(&flat_x, &flat_y, [1.0, 10.0]),
            Err(AnalysisError::Degenerate(_))
        ));
    }

    #[test]
    fn constant_mass_has_undefined_rate() {
        let s: Vec<f64> = (0..60).map(|k| 0.1 * k as f64).collect();
        let a = vec![0.37; 60];
        let fit = alpha_star(&s, &a, None).unwrap();
        assert_eq!(fit.alpha_star, 0.37);
        assert!(fit.tail_rate.is_none());
        assert!(fit.warning.is_none());
    }

    #[test]
    fn exponential_tail_recovered() {
        let s: Vec<f64> = (0..80).map(|k| 0.1 * k as f64).collect();
        let a: Vec<f64> = s.iter().map(|v| 1.25 - 0.4 * (-0.6 * v).exp()).collect();
        let fit = alpha_star(&s, &a, None).unwrap();
        assert!((fit.alpha_star - 1.25).abs() < 1e-9);
        assert!((fit.tail_rate.unwrap() - 0.6).abs() < 1e-6);
        assert!((fit.amplitude + 0.4).abs() < 1e-6);
        assert!(fit.warning.is_none());
    }

    #[test]
    fn short_tail_rejected() {
        let s: Vec<f64> = (0..30).map(|k| k as f64).collect();
        assert!(matches!(
            alpha_star(&s, &s, None),
            Err(AnalysisError::TooFewPoints { needed: 20, got: 15 })
        ));
    }

    #[test]
    fn oscillating_tail_warns() {
        let s: Vec<f64> = (0..80).map(|k| 0.1 * k as f64).collect();
        let a: Vec<f64> = s.iter().map(|v| (3.0 * v).sin()).collect();
        let fit = alpha_star(&s, &a, None).unwrap();
        assert!(fit.warning.is_some());
    }

    #[test]
    fn profile_error_vanishes_on_the_profile() {
        let g = Grid::new(1, 60.0, 1024).unwrap();
        let u = heat_gaussian(&g, 7.5).scale(0.3);
        assert!(profile_error(&u, 0.3, 6.5) < 1e-15);
    }

    #[test]
    fn profile_error_matches_closed_form() {
        // two Gaussians of equal mass and variances 2τ1, 2τ2:
        // ‖G1 - G2‖² = 1/√(8πτ1) + 1/√(8πτ2) - 2/√(4π(τ1+τ2))
        let g = Grid::new(1, 40.0, 2048).unwrap();
        let u = heat_gaussian(&g, 0.5);
        let (t1, t2) = (0.5f64, 1.0f64);
        let pi = std::f64::consts::PI;
        let want = (1.0 / (8.0 * pi * t1).sqrt() + 1.0 / (8.0 * pi * t2).sqrt()
            - 2.0 / (4.0 * pi * (t1 + t2)).sqrt())
        .sqrt();
        assert!((profile_error(&u, 1.0, 0.0) - want).abs() < 1e-12);
    }

    #[test]
    fn persistence_detection() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(persistent_from(&s, &[true, false, true, true, true]), Some(2.0));
        assert_eq!(persistent_from(&s, &[true; 5]), Some(0.0));
        assert_eq!(persistent_from(&s, &[true, true, true, true, false]), None);
    }

    #[test]
    fn scaling_window() {
        assert!(scaling_check(4.0, 1.0).pass);
        assert!(!scaling_check(5.5, 1.0).pass);
        assert!(!scaling_check(2.5, 1.0).pass);
    }

    #[test]
    fn envelope_statistics() {
        let pts: Vec<EnvelopePoint> = (0..30)
            .map(|k| EnvelopePoint {
                s: 0.1 * k as f64,
                r: 0.0,
                h: 1.0 + 0.01 * k as f64,
                big_h: if k == 29 { 100.0 } else { 1.0 },
                r4: f64::INFINITY,
            })
            .collect();
        let sum = summarize_envelopes(&pts, 1.0);
        assert!(sum.r.stable && sum.r.finite);
        assert!(sum.h.stable);
        assert!((sum.h.tail_sup - 1.29).abs() < 1e-12);
        assert!(!sum.big_h.stable);
        assert!(!sum.r4.finite);
    }

    proptest! {
        #[test]
        fn loglog_recovers_any_slope(k in -3.0f64..1.0, c in 0.1f64..10.0) {
            let x: Vec<f64> = (0..25).map(|i| 2.0 + 3.0 * i as f64).collect();
            let y: Vec<f64> = x.iter().map(|v| c * v.powf(k)).collect();
            let fit = fit_loglog(&x, &y, [1.0, 100.0]).unwrap();
            prop_assert!((fit.slope - k).abs() < 1e-10);
            prop_assert!(fit.residual < 1e-10);
        }

        #[test]
        fn alpha_fit_limit_within_tail_hull(a0 in -2.0f64..2.0, amp in -1.0f64..1.0, rho in 0.2f64..3.0) {
            let s: Vec<f64> = (0..60).map(|i| 0.1 * i as f64).collect();
            let a: Vec<f64> = s.iter().map(|v| a0 + amp * (-rho * v).exp()).collect();
            let fit = alpha_star(&s, &a, None).unwrap();
            prop_assert!((fit.alpha_star - a0).abs() < 1e-6 * (1.0 + amp.abs()));
        }
    }
}
