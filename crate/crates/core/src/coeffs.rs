//! Time-dependent coefficients, the damping primitive `B(t)`, the
//! time/similarity-variable maps and the predicted decay rates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stand-in for "+infinity" when a rate constraint is absent.
pub const RATE_CAP: f64 = 1.0e6;

/// Below this the scaled stiffness weight is reported as underflowed and zeroed.
pub const EPS_UNDERFLOW: f64 = 1.0e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("invalid coefficient parameter {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> CoeffError {
    CoeffError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// A positive damping coefficient `b(t)` together with its primitive.
///
/// The default methods evaluate `B` by adaptive Simpson quadrature and invert
/// it by bisection, so a custom damping only has to provide `b` and `db_dt`.
pub trait Damping {
    fn b(&self, t: f64) -> f64;
    fn db_dt(&self, t: f64) -> f64;

    /// `B(t) = ∫_0^t 1/b`.
    fn big_b(&self, t: f64) -> f64 {
        adaptive_simpson(&|x| 1.0 / self.b(x), 0.0, t, 1e-10)
    }

    /// Inverse of `s = ln(B(t) + 1)`.
    fn t_of_s(&self, s: f64) -> f64 {
        let target = s.exp_m1();
        let mut hi = 1.0;
        while self.big_b(hi) < target {
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.big_b(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn s_of_t(&self, t: f64) -> f64 {
        self.big_b(t).ln_1p()
    }
}

/// Adaptive Simpson quadrature with relative tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    simpson_step(f, a, b, fa, fm, fb, whole, tol * scale, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `b(t) = μ (1+t)^{-β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawDamping {
    pub beta: f64,
    pub mu: f64,
}

impl PowerLawDamping {
    pub fn new(beta: f64, mu: f64) -> Result<Self, CoeffError> {
        if !beta.is_finite() || !(-1.0..1.0).contains(&beta) {
            return Err(invalid("beta", format!("must lie in [-1, 1), got {beta}")));
        }
        if !mu.is_finite() || mu <= 0.0 {
            return Err(invalid("mu", format!("must be positive, got {mu}")));
        }
        Ok(Self { beta, mu })
    }

    fn is_log(&self) -> bool {
        self.beta == -1.0
    }

    /// `ln(1 + t(s))`, computed without forming `t(s)` so that it survives
    /// the double-exponential growth of `t` when `β = -1`.
    pub fn ln_one_plus_t_of_s(&self, s: f64) -> f64 {
        let sigma = s.exp_m1();
        if self.is_log() {
            self.mu * sigma
        } else {
            let q = 1.0 + self.beta;
            (self.mu * q * sigma).ln_1p() / q
        }
    }
}

impl Damping for PowerLawDamping {
    fn b(&self, t: f64) -> f64 {
        self.mu * (1.0 + t).powf(-self.beta)
    }

    fn db_dt(&self, t: f64) -> f64 {
        -self.beta * self.mu * (1.0 + t).powf(-self.beta - 1.0)
    }

    fn big_b(&self, t: f64) -> f64 {
        if self.is_log() {
            t.ln_1p() / self.mu
        } else {
            let q = 1.0 + self.beta;
            ((1.0 + t).powf(q) - 1.0) / (self.mu * q)
        }
    }

    fn t_of_s(&self, s: f64) -> f64 {
        let sigma = s.exp_m1();
        if self.is_log() {
            (self.mu * sigma).exp_m1()
        } else {
            let q = 1.0 + self.beta;
            (1.0 + self.mu * q * sigma).powf(1.0 / q) - 1.0
        }
    }
}

/// `c(t) = c_amp (1+t)^{-γ}` and `d(t) = d_amp (1+t)^{-ν}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub gamma: f64,
    pub nu: f64,
    pub c_amp: Vec<f64>,
    pub d_amp: f64,
}

impl Perturbation {
    pub fn none(n: usize) -> Self {
        Self {
            gamma: 1.0,
            nu: 2.0,
            c_amp: vec![0.0; n],
            d_amp: 0.0,
        }
    }

    pub fn has_drift(&self) -> bool {
        self.c_amp.iter().any(|&c| c != 0.0)
    }

    pub fn has_potential(&self) -> bool {
        self.d_amp != 0.0
    }

    pub fn c(&self, t: f64) -> Vec<f64> {
        let w = (1.0 + t).powf(-self.gamma);
        self.c_amp.iter().map(|&a| a * w).collect()
    }

    pub fn d(&self, t: f64) -> f64 {
        self.d_amp * (1.0 + t).powf(-self.nu)
    }
}

/// All linear coefficients of the equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub damping: PowerLawDamping,
    pub perturbation: Perturbation,
}

impl CoefficientSet {
    pub fn new(
        n: usize,
        beta: f64,
        mu: f64,
        perturbation: Perturbation,
    ) -> Result<Self, CoeffError> {
        let damping = PowerLawDamping::new(beta, mu)?;
        if perturbation.c_amp.len() != n {
            return Err(invalid(
                "c_amp",
                format!("expected {n} components, got {}", perturbation.c_amp.len()),
            ));
        }
        let q = 1.0 + beta;
        if perturbation.has_drift() && !(perturbation.gamma > 0.5 * q) {
            return Err(invalid(
                "gamma",
                format!("must exceed (1+beta)/2 = {}, got {}", 0.5 * q, perturbation.gamma),
            ));
        }
        if perturbation.has_potential() && !(perturbation.nu > q) {
            return Err(invalid(
                "nu",
                format!("must exceed 1+beta = {q}, got {}", perturbation.nu),
            ));
        }
        Ok(Self {
            damping,
            perturbation,
        })
    }

    pub fn b(&self, t: f64) -> f64 {
        self.damping.b(t)
    }

    pub fn big_b(&self, t: f64) -> f64 {
        self.damping.big_b(t)
    }

    pub fn t_of_s(&self, s: f64) -> f64 {
        self.damping.t_of_s(s)
    }

    pub fn s_of_t(&self, t: f64) -> f64 {
        self.damping.s_of_t(t)
    }

    /// Weights of the similarity-frame system at `s`.
    pub fn scaled_weights(&self, s: f64) -> ScaledWeights {
        let d = &self.damping;
        let ln_one_plus_t = d.ln_one_plus_t_of_s(s);
        let ln_b = d.mu.ln() - d.beta * ln_one_plus_t;
        let eps = (-s - 2.0 * ln_b).exp();
        // b_t / b^2 = -β / (b (1+t))
        let drag = -d.beta * (-ln_b - ln_one_plus_t).exp();
        // for β = -1 the weights decay like exp(-2 e^s); below the floor they
        // are indistinguishable from rounding noise and are reported as zero
        if d.is_log() && eps < EPS_UNDERFLOW {
            ScaledWeights {
                eps: 0.0,
                drag: if drag.abs() < EPS_UNDERFLOW { 0.0 } else { drag },
                underflow: true,
            }
        } else {
            ScaledWeights {
                eps,
                drag,
                underflow: false,
            }
        }
    }
}

/// `eps_s = e^{-s}/b(t(s))^2` and `drag_s = b_t/b^2` at `t = t(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledWeights {
    pub eps: f64,
    pub drag: f64,
    pub underflow: bool,
}

/// Predicted rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda: f64,
    pub eta: f64,
    pub exponent: f64,
}

/// Linear-coefficient rate: `min{(1-β)/(1+β), γ/(1+β) - 1/2, ν/(1+β) - 1}`,
/// dropping the terms whose amplitudes vanish.
pub fn rate_lambda0(coeffs: &CoefficientSet) -> f64 {
    let beta = coeffs.damping.beta;
    if beta == -1.0 {
        return RATE_CAP;
    }
    let q = 1.0 + beta;
    let mut lam = (1.0 - beta) / q;
    if coeffs.perturbation.has_drift() {
        lam = lam.min(coeffs.perturbation.gamma / q - 0.5);
    }
    if coeffs.perturbation.has_potential() {
        lam = lam.min(coeffs.perturbation.nu / q - 1.0);
    }
    lam.min(RATE_CAP)
}

/// Combined rate `min{1/2, m/2 - n/4, λ0, λ1} - η`.
pub fn rate_lambda(
    n: usize,
    m: f64,
    eta: f64,
    lambda0: f64,
    lambda1: f64,
) -> Result<f64, CoeffError> {
    check_weight(n, m)?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(invalid("eta", format!("must be positive, got {eta}")));
    }
    let nf = n as f64;
    Ok(0.5_f64.min(0.5 * m - 0.25 * nf).min(lambda0).min(lambda1) - eta)
}

/// Weight exponent rule: `m = 1` in one dimension, `m > n/2 + 1` otherwise.
pub fn check_weight(n: usize, m: f64) -> Result<(), CoeffError> {
    match n {
        1 if m == 1.0 => Ok(()),
        1 => Err(invalid("m", format!("must equal 1 when n = 1, got {m}"))),
        _ if m > 0.5 * n as f64 + 1.0 => Ok(()),
        _ => Err(invalid(
            "m",
            format!("must exceed n/2 + 1 = {}, got {m}", 0.5 * n as f64 + 1.0),
        )),
    }
}

/// Full rate set, with the predicted L² decay exponent `n/4 + λ`.
pub fn rate_set(
    n: usize,
    m: f64,
    eta: f64,
    coeffs: &CoefficientSet,
    lambda1: f64,
) -> Result<RateSet, CoeffError> {
    let lambda0 = rate_lambda0(coeffs);
    let lambda = rate_lambda(n, m, eta, lambda0, lambda1)?;
    Ok(RateSet {
        lambda0,
        lambda1,
        lambda,
        eta,
        exponent: 0.25 * n as f64 + lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_damping_primitive() {
        let d = PowerLawDamping::new(0.0, 1.0).unwrap();
        assert!((d.big_b(10.0) - 10.0).abs() < 1e-12);
        assert!((d.t_of_s(11f64.ln()) - 10.0).abs() < 1e-10);
    }

    #[test]
    fn half_power_primitive() {
        // B(t) = 2((1+t)^{1/2} - 1) for β = -1/2, μ = 1
        let d = PowerLawDamping::new(-0.5, 1.0).unwrap();
        assert!((d.big_b(3.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn log_primitive() {
        let d = PowerLawDamping::new(-1.0, 2.0).unwrap();
        let t = 7.5;
        assert!((d.big_b(t) - (1.0 + t).ln() / 2.0).abs() < 1e-14);
        let s = 1.3;
        assert!((d.big_b(d.t_of_s(s)) - s.exp_m1()).abs() < 1e-12 * s.exp());
    }

    #[test]
    fn log_damping_weight_underflows() {
        let c = CoefficientSet::new(1, -1.0, 1.0, Perturbation::none(1)).unwrap();
        let w = c.scaled_weights(3.0);
        assert!(w.eps < 1e-15);
        assert!(w.underflow);
        assert!(!c.scaled_weights(0.5).underflow);
    }

    #[test]
    fn weights_match_direct_evaluation() {
        for &beta in &[-0.9, -0.5, 0.0, 0.3, 0.8] {
            let c = CoefficientSet::new(1, beta, 1.7, Perturbation::none(1)).unwrap();
            for &s in &[0.0, 0.4, 2.0, 4.5] {
                let t = c.t_of_s(s);
                let b = c.b(t);
                let w = c.scaled_weights(s);
                let eps = (-s).exp() / (b * b);
                let drag = c.damping.db_dt(t) / (b * b);
                assert!((w.eps - eps).abs() <= 1e-12 * eps, "beta {beta} s {s}: {} vs {eps}", w.eps);
                assert!((w.drag - drag).abs() <= 1e-12 * drag.abs().max(1e-300), "beta {beta} s {s}: {} vs {drag}", w.drag);
            }
        }
    }

    #[test]
    fn quadrature_route_matches_closed_form() {
        struct Generic(PowerLawDamping);
        impl Damping for Generic {
            fn b(&self, t: f64) -> f64 {
                self.0.b(t)
            }
            fn db_dt(&self, t: f64) -> f64 {
                self.0.db_dt(t)
            }
        }
        for &beta in &[-0.7, 0.0, 0.6] {
            let d = PowerLawDamping::new(beta, 1.3).unwrap();
            let g = Generic(d);
            for &t in &[0.5, 3.0, 40.0] {
                let exact = d.big_b(t);
                assert!((g.big_b(t) - exact).abs() <= 1e-9 * exact);
            }
            let s = 1.7;
            let t = d.t_of_s(s);
            assert!((g.t_of_s(s) - t).abs() <= 1e-8 * t);
        }
    }

    #[test]
    fn rejects_out_of_range_beta() {
        assert!(PowerLawDamping::new(1.2, 1.0).is_err());
        assert!(PowerLawDamping::new(1.0, 1.0).is_err());
        assert!(PowerLawDamping::new(0.0, 0.0).is_err());
    }

    #[test]
    fn perturbation_decay_conditions() {
        let p = Perturbation {
            gamma: 0.4,
            nu: 2.0,
            c_amp: vec![1.0],
            d_amp: 0.0,
        };
        assert!(CoefficientSet::new(1, 0.0, 1.0, p).is_err());
        let p = Perturbation {
            gamma: 1.0,
            nu: 0.9,
            c_amp: vec![0.0],
            d_amp: 1.0,
        };
        assert!(CoefficientSet::new(1, 0.0, 1.0, p).is_err());
    }

    #[test]
    fn lambda0_values() {
        let c = CoefficientSet::new(1, 0.0, 1.0, Perturbation::none(1)).unwrap();
        assert_eq!(rate_lambda0(&c), 1.0);
        let c = CoefficientSet::new(2, 0.5, 1.0, Perturbation::none(2)).unwrap();
        assert!((rate_lambda0(&c) - 1.0 / 3.0).abs() < 1e-15);
        let c = CoefficientSet::new(1, -1.0, 1.0, Perturbation::none(1)).unwrap();
        assert_eq!(rate_lambda0(&c), RATE_CAP);
        let p = Perturbation {
            gamma: 1.0,
            nu: 1.5,
            c_amp: vec![0.3],
            d_amp: 0.2,
        };
        let c = CoefficientSet::new(1, 0.0, 1.0, p).unwrap();
        assert!((rate_lambda0(&c) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn combined_rate_example() {
        let lam = rate_lambda(2, 3.0, 0.02, 1.0 / 3.0, 1.0).unwrap();
        assert!((lam - 0.313_333_333_333_333_3).abs() < 1e-12);
    }

    #[test]
    fn weight_rules() {
        assert!(rate_lambda(1, 2.0, 0.01, 1.0, 1.0).is_err());
        assert!(rate_lambda(2, 2.0, 0.01, 1.0, 1.0).is_err());
        assert!(rate_lambda(2, 2.5, 0.01, 1.0, 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn time_maps_are_inverse(beta in -1.0f64..0.95, mu in 0.2f64..5.0, s in 0.0f64..4.0) {
            let c = CoefficientSet::new(1, beta, mu, Perturbation::none(1)).unwrap();
            let t = c.t_of_s(s);
            prop_assume!(t.is_finite() && t < 1e12);
            let back = c.s_of_t(t);
            prop_assert!((back - s).abs() <= 1e-10 * s.max(1.0));
        }

        #[test]
        fn primitive_is_increasing(beta in -1.0f64..0.95, mu in 0.2f64..5.0, t in 0.0f64..1e3, dt in 1e-3f64..10.0) {
            let d = PowerLawDamping::new(beta, mu).unwrap();
            prop_assert!(d.big_b(t + dt) > d.big_b(t));
            prop_assert!(d.b(t) > 0.0);
        }

        #[test]
        fn linear_rate_nonincreasing_in_beta(b1 in -0.99f64..0.95, b2 in -0.99f64..0.95) {
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let rate = |beta: f64| {
                let c = CoefficientSet::new(1, beta, 1.0, Perturbation::none(1)).unwrap();
                rate_lambda(1, 1.0, 0.01, rate_lambda0(&c), RATE_CAP).unwrap()
            };
            prop_assert!(rate(hi) <= rate(lo) + 1e-15);
        }
    }
}
