//! Nonlinear terms `N(u, ∇u, u_t)`, their admissibility rules and the rate
//! `λ1` they contribute.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::RATE_CAP;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("invalid nonlinearity: {0}")]
    Invalid(String),
    #[error("gradient required by the nonlinearity is missing")]
    MissingGradient,
}

/// How a factor `z^p` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorForm {
    /// `|z|^{p-1} z`
    Odd,
    /// `|z|^p`
    Abs,
}

impl FactorForm {
    fn apply(self, z: f64, p: f64) -> f64 {
        if p == 0.0 {
            return 1.0;
        }
        match self {
            FactorForm::Odd => z.abs().powf(p - 1.0) * z,
            FactorForm::Abs => z.abs().powf(p),
        }
    }
}

fn odd() -> FactorForm {
    FactorForm::Odd
}

fn abs() -> FactorForm {
    FactorForm::Abs
}

/// `coeff · u^{p1} · |∇u|^{p2} · |u_t|^{p3}` (one-dimensional problems).
///
/// The `u` factor is odd (`|u|^{p1-1}u`) and the derivative factors are
/// magnitudes unless the corresponding form says otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub p1: f64,
    #[serde(default)]
    pub p2: f64,
    #[serde(default)]
    pub p3: f64,
    #[serde(default = "odd")]
    pub u_form: FactorForm,
    #[serde(default = "abs")]
    pub grad_form: FactorForm,
    #[serde(default = "abs")]
    pub ut_form: FactorForm,
}

impl Monomial {
    pub fn new(coeff: f64, p1: f64, p2: f64, p3: f64) -> Self {
        Self {
            coeff,
            p1,
            p2,
            p3,
            u_form: FactorForm::Odd,
            grad_form: FactorForm::Abs,
            ut_form: FactorForm::Abs,
        }
    }

    pub fn eval(&self, u: f64, ux: f64, ut: f64) -> f64 {
        self.coeff
            * self.u_form.apply(u, self.p1)
            * self.grad_form.apply(ux, self.p2)
            * self.ut_form.apply(ut, self.p3)
    }

    /// `p1 + 2 p2 + (3 - 2β/(1+β)) p3`.
    pub fn weighted_degree(&self, beta: f64) -> f64 {
        let mut d = self.p1 + 2.0 * self.p2;
        if self.p3 != 0.0 {
            d += (3.0 - 2.0 * beta / (1.0 + beta)) * self.p3;
        }
        d
    }
}

/// `coeff · |u|^{p-1} u` (odd) or `coeff · |u|^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coeff: f64,
    pub p: f64,
    #[serde(default = "default_true")]
    pub odd: bool,
}

fn default_true() -> bool {
    true
}

impl PowerTerm {
    pub fn eval(&self, u: f64) -> f64 {
        let form = if self.odd { FactorForm::Odd } else { FactorForm::Abs };
        self.coeff * form.apply(u, self.p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    /// Sum of monomials; an empty list is the linear problem.
    Monomials(Vec<Monomial>),
    Power(PowerTerm),
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Nonlinearity::Monomials(Vec::new())
    }
}

/// Outcome of one admissibility rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleCheck {
    pub rule: String,
    pub passed: bool,
    /// A failed soft rule is reported as a warning and does not block a run.
    pub soft: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<RuleCheck>,
}

impl ValidationReport {
    fn push(&mut self, rule: &str, passed: bool, soft: bool, detail: String) {
        self.checks.push(RuleCheck {
            rule: rule.into(),
            passed,
            soft,
            detail,
        });
    }

    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.soft)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RuleCheck> {
        self.checks.iter().filter(|c| !c.passed && !c.soft)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &RuleCheck> {
        self.checks.iter().filter(|c| !c.passed && c.soft)
    }
}

impl Nonlinearity {
    pub fn is_linear(&self) -> bool {
        match self {
            Nonlinearity::Monomials(v) => v.iter().all(|m| m.coeff == 0.0),
            Nonlinearity::Power(p) => p.coeff == 0.0,
        }
    }

    pub fn needs_gradient(&self) -> bool {
        matches!(self, Nonlinearity::Monomials(v) if v.iter().any(|m| m.p2 != 0.0))
    }

    pub fn needs_velocity(&self) -> bool {
        matches!(self, Nonlinearity::Monomials(v) if v.iter().any(|m| m.p3 != 0.0))
    }

    /// Pointwise value given `u`, `|∇u|` (signed `u_x` in one dimension) and `u_t`.
    pub fn eval_point(&self, u: f64, ux: f64, ut: f64) -> f64 {
        match self {
            Nonlinearity::Monomials(v) => v.iter().map(|m| m.eval(u, ux, ut)).sum(),
            Nonlinearity::Power(p) => p.eval(u),
        }
    }

    /// Pointwise evaluation on whole fields. `grad` holds one slice per axis
    /// and may be empty when the nonlinearity ignores the gradient.
    pub fn eval_physical(
        &self,
        u: &[f64],
        grad: &[Vec<f64>],
        ut: &[f64],
    ) -> Result<Vec<f64>, NonlinearityError> {
        if self.needs_gradient() && grad.is_empty() {
            return Err(NonlinearityError::MissingGradient);
        }
        let one_d = grad.len() == 1;
        Ok((0..u.len())
            .map(|i| {
                let gx = if grad.is_empty() {
                    0.0
                } else if one_d {
                    grad[0][i]
                } else {
                    grad.iter().map(|g| g[i] * g[i]).sum::<f64>().sqrt()
                };
                let vt = if ut.is_empty() { 0.0 } else { ut[i] };
                self.eval_point(u[i], gx, vt)
            })
            .collect())
    }

    /// Similarity-frame nonlinearity
    /// `e^{(n+2)s/2} N(e^{-ns/2} v, e^{-(n+1)s/2} ∇v, b^{-1} e^{-(n+2)s/2} w)`.
    pub fn eval_scaled(
        &self,
        n: usize,
        s: f64,
        inv_b: f64,
        v: &[f64],
        grad_v: &[Vec<f64>],
        w: &[f64],
    ) -> Result<Vec<f64>, NonlinearityError> {
        let nf = n as f64;
        let cu = (-0.5 * nf * s).exp();
        let cg = (-0.5 * (nf + 1.0) * s).exp();
        let ct = inv_b * (-0.5 * (nf + 2.0) * s).exp();
        let out_scale = (0.5 * (nf + 2.0) * s).exp();
        let u: Vec<f64> = v.iter().map(|x| cu * x).collect();
        let g: Vec<Vec<f64>> = grad_v
            .iter()
            .map(|ga| ga.iter().map(|x| cg * x).collect())
            .collect();
        let ut: Vec<f64> = w.iter().map(|x| ct * x).collect();
        let mut out = self.eval_physical(&u, &g, &ut)?;
        out.iter_mut().for_each(|x| *x *= out_scale);
        Ok(out)
    }

    /// Checks the admissibility rules for dimension `n` and damping exponent
    /// `β`. With `allow_subcritical` the supercriticality rule is downgraded to
    /// a warning (used for blow-up contrast runs).
    pub fn validate(&self, n: usize, beta: f64, allow_subcritical: bool) -> ValidationReport {
        let mut r = ValidationReport::default();
        match self {
            Nonlinearity::Monomials(terms) => {
                if n != 1 && !terms.is_empty() {
                    r.push(
                        "form",
                        false,
                        false,
                        format!("monomial nonlinearities are one-dimensional, got n = {n}"),
                    );
                    return r;
                }
                for (i, m) in terms.iter().enumerate() {
                    let tag = format!("term[{i}]");
                    let exps_ok = [m.p2, m.p3]
                        .iter()
                        .all(|&p| p == 0.0 || p >= 1.0)
                        && m.p1 >= 0.0;
                    r.push(
                        "exponent_range",
                        exps_ok && m.p1 > 1.0,
                        false,
                        format!("{tag}: need p1 > 1 and p2, p3 in {{0}} ∪ [1, ∞); got ({}, {}, {})", m.p1, m.p2, m.p3),
                    );
                    r.push(
                        "derivative_order",
                        m.p2 + m.p3 <= 1.0,
                        false,
                        format!("{tag}: need p2 + p3 <= 1, got {}", m.p2 + m.p3),
                    );
                    if beta == -1.0 && m.p3 != 0.0 {
                        r.push(
                            "velocity_factor",
                            false,
                            false,
                            format!("{tag}: u_t factors are not admissible when beta = -1"),
                        );
                        continue;
                    }
                    let d = m.weighted_degree(beta);
                    r.push(
                        "supercritical",
                        d > 3.0,
                        allow_subcritical,
                        format!("{tag}: need p1 + 2 p2 + (3 - 2 beta/(1+beta)) p3 > 3, got {d}"),
                    );
                }
                for m in terms {
                    if !m.coeff.is_finite() {
                        r.push("coefficient", false, false, "coefficient must be finite".into());
                    }
                }
            }
            Nonlinearity::Power(p) => {
                if n < 2 {
                    r.push(
                        "form",
                        false,
                        false,
                        "power nonlinearities are for n >= 2; use monomials when n = 1".into(),
                    );
                    return r;
                }
                let nf = n as f64;
                let lower = 1.0 + 2.0 / nf;
                r.push(
                    "supercritical",
                    p.p > lower,
                    allow_subcritical,
                    format!("need p > 1 + 2/n = {lower}, got {}", p.p),
                );
                if n > 2 {
                    let upper = nf / (nf - 2.0);
                    r.push(
                        "energy_subcritical",
                        p.p <= upper,
                        false,
                        format!("need p <= n/(n-2) = {upper}, got {}", p.p),
                    );
                }
                r.push(
                    "exponent_range",
                    p.p > 1.0,
                    false,
                    format!("need p > 1, got {}", p.p),
                );
                r.push(
                    "coefficient",
                    p.coeff.is_finite(),
                    false,
                    "coefficient must be finite".into(),
                );
            }
        }
        r
    }

    /// Rate `λ1` contributed by the nonlinearity (`RATE_CAP` when linear).
    pub fn lambda1(&self, n: usize, beta: f64) -> f64 {
        if self.is_linear() {
            return RATE_CAP;
        }
        match self {
            Nonlinearity::Monomials(terms) => terms
                .iter()
                .filter(|m| m.coeff != 0.0)
                .map(|m| {
                    if beta == -1.0 && m.p3 != 0.0 {
                        RATE_CAP
                    } else {
                        0.5 * (m.weighted_degree(beta) - 3.0)
                    }
                })
                .fold(RATE_CAP, f64::min),
            Nonlinearity::Power(p) => {
                let nf = n as f64;
                (0.5 * nf * (p.p - 1.0 - 2.0 / nf)).min(RATE_CAP)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn quartic_absorption() {
        let n = Nonlinearity::Monomials(vec![Monomial::new(-1.0, 4.0, 0.0, 0.0)]);
        assert_eq!(n.eval_point(2.0, 0.0, 0.0), -16.0);
        assert_eq!(n.eval_point(-2.0, 0.0, 0.0), 16.0);
        assert!(n.validate(1, 0.0, false).ok());
        assert!((n.lambda1(1, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixed_gradient_term_default_forms() {
        let n = Nonlinearity::Monomials(vec![Monomial::new(1.0, 2.0, 1.0, 0.0)]);
        let mut peak: f64 = 0.0;
        for i in 0..20_000 {
            let y = 2.0 * PI * i as f64 / 20_000.0;
            let v = n.eval_point(y.sin(), y.cos(), 0.0);
            assert!((v - y.sin().abs() * y.sin() * y.cos().abs()).abs() < 1e-15);
            peak = peak.max(v.abs());
        }
        assert!((peak - 2.0 / (3.0 * 3f64.sqrt())).abs() < 1e-6);
    }

    #[test]
    fn mixed_gradient_term_signed_forms() {
        let mut m = Monomial::new(1.0, 2.0, 1.0, 0.0);
        m.u_form = FactorForm::Abs;
        m.grad_form = FactorForm::Odd;
        let n = Nonlinearity::Monomials(vec![m]);
        for i in 0..100 {
            let y = 0.0631 * i as f64;
            let v = n.eval_point(y.sin(), y.cos(), 0.0);
            assert!((v - y.sin().powi(2) * y.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn subcritical_exponent_rejected_unless_allowed() {
        let n = Nonlinearity::Monomials(vec![Monomial::new(1.0, 2.0, 0.0, 0.0)]);
        let r = n.validate(1, 0.0, false);
        assert!(!r.ok());
        assert!(r.failures().any(|c| c.detail.contains("got 2")));
        let r = n.validate(1, 0.0, true);
        assert!(r.ok());
        assert_eq!(r.warnings().count(), 1);
    }

    #[test]
    fn velocity_term_rules() {
        // p3 = 1 with β = 0 has weighted degree p1 + 3
        let n = Nonlinearity::Monomials(vec![Monomial::new(1.0, 1.5, 0.0, 1.0)]);
        assert!(n.validate(1, 0.0, false).ok());
        assert!((n.lambda1(1, 0.0) - 0.75).abs() < 1e-15);
        assert!(!n.validate(1, -1.0, false).ok());
        let n = Nonlinearity::Monomials(vec![Monomial::new(1.0, 2.0, 1.0, 1.0)]);
        assert!(!n.validate(1, 0.0, false).ok());
    }

    #[test]
    fn power_rules() {
        let n = Nonlinearity::Power(PowerTerm { coeff: -1.0, p: 3.0, odd: true });
        assert!(n.validate(2, 0.5, false).ok());
        assert!((n.lambda1(2, 0.5) - 1.0).abs() < 1e-15);
        let sub = Nonlinearity::Power(PowerTerm { coeff: 1.0, p: 1.8, odd: true });
        assert!(!sub.validate(2, 0.0, false).ok());
        let n3 = Nonlinearity::Power(PowerTerm { coeff: 1.0, p: 3.5, odd: true });
        assert!(!n3.validate(3, 0.0, false).ok());
        assert!(!n.validate(1, 0.0, false).ok());
    }

    #[test]
    fn linear_rate_is_capped() {
        assert_eq!(Nonlinearity::default().lambda1(1, 0.0), RATE_CAP);
    }

    #[test]
    fn scaled_evaluation_matches_physical() {
        let n = Nonlinearity::Monomials(vec![
            Monomial::new(-1.0, 4.0, 0.0, 0.0),
            Monomial::new(0.3, 2.0, 1.0, 0.0),
            Monomial::new(0.2, 3.0, 0.0, 1.0),
        ]);
        let s: f64 = 1.3;
        let b: f64 = 1.7;
        let v = [0.4, -1.2, 2.0];
        let gv = vec![vec![0.1, 0.5, -0.7]];
        let w = [0.3, -0.2, 1.1];
        let out = n.eval_scaled(1, s, 1.0 / b, &v, &gv, &w).unwrap();
        for i in 0..3 {
            let u = (-0.5 * s).exp() * v[i];
            let ux = (-s).exp() * gv[0][i];
            let ut = (-1.5 * s).exp() * w[i] / b;
            let expect = (1.5 * s).exp() * n.eval_point(u, ux, ut);
            assert!((out[i] - expect).abs() < 1e-14 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn serde_defaults() {
        let m: Monomial = serde_json::from_str(r#"{"coeff": -1, "p1": 4}"#).unwrap();
        assert_eq!(m.p2, 0.0);
        assert_eq!(m.u_form, FactorForm::Odd);
        assert_eq!(m.grad_form, FactorForm::Abs);
    }

    proptest! {
        #[test]
        fn odd_monomial_is_odd_in_u(u in -5.0f64..5.0, p1 in 1.1f64..6.0) {
            let m = Monomial::new(1.0, p1, 0.0, 0.0);
            prop_assert!((m.eval(u, 0.0, 0.0) + m.eval(-u, 0.0, 0.0)).abs() <= 1e-12 * m.eval(u, 0.0, 0.0).abs().max(1.0));
        }

        #[test]
        fn homogeneity(u in -3.0f64..3.0, lam in 0.1f64..3.0, p in 1.5f64..5.0) {
            let t = PowerTerm { coeff: 1.0, p, odd: true };
            let lhs = t.eval(lam * u);
            let rhs = lam.powf(p) * t.eval(u);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300));
        }
    }
}
