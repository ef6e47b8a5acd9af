//! Splitting of a similarity-frame state into the Gaussian mode and a
//! zero-mass remainder: `v = α φ0 + f`, `w = α' φ0 + α ψ0 + g`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::ScaledWeights;
use crate::dynamics::{scaled_remainder, DynamicsError, Problem, ScaledState};
use crate::fields::{Field, GaussianModes};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("decomposition grid does not match the Gaussian modes")]
    GridMismatch,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Result of [`split`]. `f`, `g` and `h` have exactly zero mean; the shifts
/// removed to achieve this are kept as quadrature diagnostics.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub s: f64,
    pub alpha: f64,
    pub dalpha: f64,
    pub weights: ScaledWeights,
    pub v: Field,
    pub w: Field,
    pub f: Field,
    pub g: Field,
    pub r: Field,
    pub h: Field,
    /// `∫ r`, the forcing of the mass equation.
    pub r_mass: f64,
    pub mean_shift: [f64; 3],
}

/// Coefficient-level diagnostics written alongside the fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
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
}

impl Decomposition {
    pub fn row(&self) -> DecompositionRow {
        DecompositionRow {
            s: self.s,
            alpha: self.alpha,
            dalpha: self.dalpha,
            eps: self.weights.eps,
            drag: self.weights.drag,
            r_mass: self.r_mass,
            shift_f: self.mean_shift[0],
            shift_g: self.mean_shift[1],
            shift_h: self.mean_shift[2],
            norm_f: self.f.l2_norm(),
            norm_g: self.g.l2_norm(),
            norm_h: self.h.l2_norm(),
        }
    }
}

fn remove_mean(f: &mut Field) -> f64 {
    let shift = f.integral() / f.grid.box_volume();
    f.data.iter_mut().for_each(|v| *v -= shift);
    shift
}

pub fn split(
    problem: &Problem,
    state: &ScaledState,
    modes: &GaussianModes,
) -> Result<Decomposition, DecomposeError> {
    let grid = state.v.grid;
    if modes.phi0.grid != grid || state.w.grid != grid {
        return Err(DecomposeError::GridMismatch);
    }
    let n = grid.dim as f64;
    let weights = problem.coeffs.scaled_weights(state.s);
    let eps = weights.eps;
    let alpha = state.v.integral();
    let dalpha = state.w.integral();

    let mut f = state.v.axpy(-alpha, &modes.phi0);
    let mut g = state.w.axpy(-dalpha, &modes.phi0).axpy(-alpha, &modes.psi0);
    let r = scaled_remainder(problem, state)?;
    let r_mass = r.integral();
    let mut h = r.axpy(-r_mass, &modes.phi0);
    for i in 0..grid.len() {
        let psi = modes.psi0.data[i];
        let transport = 0.5 * modes.y_grad_psi0.data[i] + (0.5 * n + 1.0) * psi;
        h.data[i] += eps * (-2.0 * dalpha * psi + alpha * transport);
    }
    let shift_f = remove_mean(&mut f);
    let shift_g = remove_mean(&mut g);
    let shift_h = remove_mean(&mut h);
    Ok(Decomposition {
        s: state.s,
        alpha,
        dalpha,
        weights,
        v: state.v.clone(),
        w: state.w.clone(),
        f,
        g,
        r,
        h,
        r_mass,
        mean_shift: [shift_f, shift_g, shift_h],
    })
}
