//! Periodic grids, real fields, spectral transforms and the basic functionals
//! (integrals, weighted norms, primitives, Gaussian modes, resampling).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("field is not zero-mean (integral {0:e})")]
    NotZeroMean(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Uniform periodic grid on `[-L, L)^n` with `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self, FieldError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(FieldError::InvalidGrid(format!(
                "dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(FieldError::InvalidGrid(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(FieldError::InvalidGrid(format!(
                "points per axis must be a power of two >= 16, got {points}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            points,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinates along one axis: `x_j = -L + j h`.
    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points)
            .map(|j| -self.half_width + j as f64 * h)
            .collect()
    }

    /// Angular wavenumbers along one axis in FFT order, `ξ = π k / L`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as i64;
        (0..n)
            .map(|k| {
                let ks = if k < n / 2 { k } else { k - n };
                PI * ks as f64 / self.half_width
            })
            .collect()
    }

    /// Largest resolved wavenumber.
    pub fn nyquist(&self) -> f64 {
        PI * (self.points / 2) as f64 / self.half_width
    }

    /// Multi-index of a flat row-major index.
    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for a in (0..self.dim).rev() {
            out[a] = idx % self.points;
            idx /= self.points;
        }
        out
    }

    /// Stride of axis `a` in the flat layout.
    pub fn stride(&self, a: usize) -> usize {
        self.points.pow((self.dim - 1 - a) as u32)
    }

    /// `|x|^2` at every grid point.
    pub fn radius_sq(&self) -> Vec<f64> {
        let ax = self.axis();
        (0..self.len())
            .map(|i| {
                let mi = self.multi_index(i);
                (0..self.dim).map(|a| ax[mi[a]] * ax[mi[a]]).sum()
            })
            .collect()
    }

    /// `|ξ|^2` at every spectral index.
    pub fn xi_sq(&self) -> Vec<f64> {
        let k = self.wavenumbers();
        (0..self.len())
            .map(|i| {
                let mi = self.multi_index(i);
                (0..self.dim).map(|a| k[mi[a]] * k[mi[a]]).sum()
            })
            .collect()
    }

    /// Component `a` of the wavenumber at every spectral index, with the
    /// Nyquist entry zeroed (used for odd derivatives).
    pub fn xi_component(&self, a: usize) -> Vec<f64> {
        let mut k = self.wavenumbers();
        k[self.points / 2] = 0.0;
        (0..self.len())
            .map(|i| k[self.multi_index(i)[a]])
            .collect()
    }

    /// Component `a` of the coordinate at every grid point.
    pub fn x_component(&self, a: usize) -> Vec<f64> {
        let ax = self.axis();
        (0..self.len()).map(|i| ax[self.multi_index(i)[a]]).collect()
    }

    /// Volume of the periodic box, `(2L)^n`.
    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }
}

/// Real field sampled on a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub data: Vec<f64>,
}

/// Normalized discrete Fourier coefficients: `coeffs = DFT(data) / N^n`, so
/// that `‖f‖²_{L²} = (2L)^n Σ |coeff|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self, FieldError> {
        if data.len() != grid.len() {
            return Err(FieldError::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let ax = grid.axis();
        let mut x = [0.0; MAX_DIM];
        let data = (0..grid.len())
            .map(|i| {
                let mi = grid.multi_index(i);
                for a in 0..grid.dim {
                    x[a] = ax[mi[a]];
                }
                f(&x[..grid.dim])
            })
            .collect();
        Self { grid, data }
    }

    pub fn check_finite(&self) -> Result<(), FieldError> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(FieldError::NonFinite)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `∫ f`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.data.iter().sum::<f64>()
    }

    /// `∫ f g`.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.cell_volume()
            * self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// `∫ w f g` for a pointwise weight.
    pub fn weighted_dot(&self, other: &Field, w: &[f64]) -> f64 {
        self.grid.cell_volume()
            * self
                .data
                .iter()
                .zip(&other.data)
                .zip(w)
                .map(|((a, b), c)| a * b * c)
                .sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖f‖_{L^q}`.
    pub fn lq_norm(&self, q: f64) -> f64 {
        (self.grid.cell_volume() * self.data.iter().map(|v| v.abs().powf(q)).sum::<f64>())
            .powf(1.0 / q)
    }
}

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plan_cache() -> &'static Mutex<HashMap<usize, PlanPair>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Forward and inverse 1D plans of length `n`, shared across threads.
pub fn plans(n: usize) -> PlanPair {
    let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Unnormalized in-place n-D transform of a row-major buffer.
pub fn transform_in_place(grid: &Grid, buf: &mut [Complex64], inverse: bool) {
    let n = grid.points;
    let (fwd, inv) = plans(n);
    let plan = if inverse { inv } else { fwd };
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for a in 0..grid.dim {
        let stride = grid.stride(a);
        if stride == 1 {
            plan.process_with_scratch(buf, &mut scratch);
            continue;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let block = stride * n;
        for start in (0..buf.len()).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for (j, l) in line.iter_mut().enumerate() {
                    *l = buf[base + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (j, l) in line.iter().enumerate() {
                    buf[base + j * stride] = *l;
                }
            }
        }
    }
}

pub fn fft(field: &Field) -> SpectralField {
    let mut buf: Vec<Complex64> = field.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_in_place(&field.grid, &mut buf, false);
    let norm = 1.0 / field.grid.len() as f64;
    buf.iter_mut().for_each(|c| *c *= norm);
    SpectralField {
        grid: field.grid,
        coeffs: buf,
    }
}

pub fn ifft(fhat: &SpectralField) -> Field {
    let mut buf = fhat.coeffs.clone();
    transform_in_place(&fhat.grid, &mut buf, true);
    Field {
        grid: fhat.grid,
        data: buf.iter().map(|c| c.re).collect(),
    }
}

impl SpectralField {
    /// `(2L)^n Σ w_k |c_k|²`, the spectral form of `∫ |f|²` with a multiplier.
    pub fn weighted_energy(&self, w: &[f64]) -> f64 {
        self.grid.box_volume()
            * self
                .coeffs
                .iter()
                .zip(w)
                .map(|(c, w)| w * c.norm_sqr())
                .sum::<f64>()
    }

    pub fn energy(&self) -> f64 {
        self.grid.box_volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

/// Spectral gradient, one field per axis.
pub fn gradient(field: &Field) -> Vec<Field> {
    let fhat = fft(field);
    (0..field.grid.dim)
        .map(|a| {
            let k = field.grid.xi_component(a);
            let coeffs = fhat
                .coeffs
                .iter()
                .zip(&k)
                .map(|(c, &k)| c * Complex64::new(0.0, k))
                .collect();
            ifft(&SpectralField {
                grid: field.grid,
                coeffs,
            })
        })
        .collect()
}

pub fn laplacian(field: &Field) -> Field {
    let fhat = fft(field);
    let k2 = field.grid.xi_sq();
    let coeffs = fhat.coeffs.iter().zip(&k2).map(|(c, &k)| -k * c).collect();
    ifft(&SpectralField {
        grid: field.grid,
        coeffs,
    })
}

pub fn integrate(field: &Field) -> f64 {
    field.integral()
}

/// `‖f‖_{H^{k,m}} = Σ_{|a|≤k} ‖(1+|x|)^m ∂^a f‖_{L²}` for `k ∈ {0, 1}`.
pub fn weighted_norm(field: &Field, k: usize, m: f64) -> Result<f64, FieldError> {
    if k > 1 {
        return Err(FieldError::InvalidArgument(format!(
            "derivative order {k} not supported"
        )));
    }
    let w = weight_sq(&field.grid, m);
    let mut total = field.weighted_dot(field, &w).sqrt();
    if k == 1 {
        for g in gradient(field) {
            total += g.weighted_dot(&g, &w).sqrt();
        }
    }
    Ok(total)
}

/// `(1+|x|)^{2m}` at every grid point.
pub fn weight_sq(grid: &Grid, m: f64) -> Vec<f64> {
    grid.radius_sq()
        .into_iter()
        .map(|r2| (1.0 + r2.sqrt()).powf(2.0 * m))
        .collect()
}

/// Primitive `F(y) = ∫_{-L}^{y} f` of a zero-mean 1D field, computed
/// spectrally and shifted so that `F(-L) = 0`.
pub fn primitive(field: &Field) -> Result<Field, FieldError> {
    if field.grid.dim != 1 {
        return Err(FieldError::InvalidArgument(
            "primitive is defined for one-dimensional fields".into(),
        ));
    }
    let mass = field.integral();
    let scale = field.grid.cell_volume() * field.data.iter().map(|v| v.abs()).sum::<f64>();
    if mass.abs() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(FieldError::NotZeroMean(mass));
    }
    let fhat = fft(field);
    let k = field.grid.xi_component(0);
    let coeffs = fhat
        .coeffs
        .iter()
        .zip(&k)
        .map(|(c, &k)| {
            if k == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                c / Complex64::new(0.0, k)
            }
        })
        .collect();
    let mut out = ifft(&SpectralField {
        grid: field.grid,
        coeffs,
    });
    let f0 = out.data[0];
    out.data.iter_mut().for_each(|v| *v -= f0);
    Ok(out)
}

/// Fractional primitive `|ξ|^{-n/2-δ} f̂` with the zero mode removed.
pub fn fractional_primitive(field: &Field, delta: f64) -> SpectralField {
    let fhat = fft(field);
    let k2 = field.grid.xi_sq();
    let p = -0.25 * field.grid.dim as f64 - 0.5 * delta;
    let coeffs = fhat
        .coeffs
        .iter()
        .zip(&k2)
        .map(|(c, &k2)| if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { c * k2.powf(p) })
        .collect();
    SpectralField {
        grid: field.grid,
        coeffs,
    }
}

/// Fourier coefficients of the field zero-padded onto a box `pad` times wider.
/// The coefficients sample the continuous transform on a lattice `pad` times
/// finer than the native one.
pub fn padded_spectrum(field: &Field, pad: usize) -> Result<SpectralField, FieldError> {
    if pad == 0 || !pad.is_power_of_two() {
        return Err(FieldError::InvalidArgument(format!(
            "padding factor must be a power of two, got {pad}"
        )));
    }
    let g = field.grid;
    let big = Grid::new(g.dim, g.half_width * pad as f64, g.points * pad)?;
    let off = (pad - 1) * g.points / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); big.len()];
    for (i, &v) in field.data.iter().enumerate() {
        let mi = g.multi_index(i);
        let mut j = 0;
        for a in 0..g.dim {
            j = j * big.points + mi[a] + off;
        }
        buf[j] = Complex64::new(v, 0.0);
    }
    transform_in_place(&big, &mut buf, false);
    let norm = 1.0 / big.len() as f64;
    buf.iter_mut().for_each(|c| *c *= norm);
    Ok(SpectralField {
        grid: big,
        coeffs: buf,
    })
}

/// Heat kernel `(4πτ)^{-n/2} exp(-|x|²/(4τ))`.
pub fn heat_gaussian(grid: &Grid, tau: f64) -> Field {
    let n = grid.dim as f64;
    let c = (4.0 * PI * tau).powf(-0.5 * n);
    let r2 = grid.radius_sq();
    Field {
        grid: *grid,
        data: r2.iter().map(|&r| c * (-r / (4.0 * tau)).exp()).collect(),
    }
}

/// The Gaussian eigenmode `φ0 = (4π)^{-n/2} e^{-|y|²/4}`, its Laplacian
/// `ψ0 = ((|y|² - 2n)/4) φ0` and `y·∇ψ0`, all evaluated analytically.
#[derive(Debug, Clone)]
pub struct GaussianModes {
    pub phi0: Field,
    pub psi0: Field,
    pub y_grad_psi0: Field,
}

pub fn gaussian_modes(grid: &Grid) -> GaussianModes {
    let n = grid.dim as f64;
    let phi0 = heat_gaussian(grid, 1.0);
    let r2 = grid.radius_sq();
    let psi0 = Field {
        grid: *grid,
        data: phi0
            .data
            .iter()
            .zip(&r2)
            .map(|(&p, &r)| 0.25 * (r - 2.0 * n) * p)
            .collect(),
    };
    let y_grad_psi0 = Field {
        grid: *grid,
        data: phi0
            .data
            .iter()
            .zip(&r2)
            .map(|(&p, &r)| {
                let q = 0.25 * (r - 2.0 * n);
                0.5 * r * (1.0 - q) * p
            })
            .collect(),
    };
    GaussianModes {
        phi0,
        psi0,
        y_grad_psi0,
    }
}

/// `‖f‖_{L^{2p}}` against `‖∇f‖^σ ‖f‖^{1-σ}`, `σ = n(p-1)/(2p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub sigma: f64,
}

pub fn gn_check(field: &Field, p: f64) -> Result<GnCheck, FieldError> {
    let n = field.grid.dim as f64;
    if !(p >= 1.0) || (n > 2.0 && p > n / (n - 2.0)) {
        return Err(FieldError::InvalidArgument(format!(
            "exponent {p} outside the admissible range"
        )));
    }
    let sigma = n * (p - 1.0) / (2.0 * p);
    let lhs = field.lq_norm(2.0 * p);
    let grad: f64 = gradient(field).iter().map(|g| g.dot(g)).sum::<f64>().sqrt();
    let rhs = grad.powf(sigma) * field.l2_norm().powf(1.0 - sigma);
    Ok(GnCheck {
        lhs,
        rhs,
        ratio: lhs / rhs,
        sigma,
    })
}

/// Diagnostics of a resampling: spectral content that the target grid
/// cannot represent, and mass that falls outside the covered window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResampleInfo {
    pub unresolved_fraction: f64,
    pub outside_fraction: f64,
}

/// Evaluates `amplitude * u(factor * y)` on `target`, where `u` is the
/// trigonometric interpolant of `source`. Points mapped outside the source
/// box are set to zero.
pub fn resample(
    source: &Field,
    target: &Grid,
    factor: f64,
    amplitude: f64,
) -> Result<(Field, ResampleInfo), FieldError> {
    let sg = source.grid;
    if sg.dim != target.dim {
        return Err(FieldError::GridMismatch);
    }
    let mut data = source.data.clone();
    let mut shape = vec![sg.points; sg.dim];
    let targets: Vec<f64> = target.axis().iter().map(|&y| factor * y).collect();
    for a in 0..sg.dim {
        data = interp_axis(&data, &shape, a, &sg, &targets);
        shape[a] = target.points;
    }
    data.iter_mut().for_each(|v| *v *= amplitude);
    let out = Field {
        grid: *target,
        data,
    };

    // unresolved: physical content above the target Nyquist mapped back
    let fhat = fft(source);
    let cutoff = target.nyquist() / factor;
    let k = sg.wavenumbers();
    let total = fhat.energy();
    let mut high = 0.0;
    for (i, c) in fhat.coeffs.iter().enumerate() {
        let mi = sg.multi_index(i);
        if (0..sg.dim).any(|a| k[mi[a]].abs() > cutoff) {
            high += c.norm_sqr();
        }
    }
    high *= sg.box_volume();
    let window = factor * target.half_width;
    let ax = sg.axis();
    let mut outside = 0.0;
    for (i, &v) in source.data.iter().enumerate() {
        let mi = sg.multi_index(i);
        if (0..sg.dim).any(|a| ax[mi[a]].abs() > window) {
            outside += v * v;
        }
    }
    outside *= sg.cell_volume();
    let info = ResampleInfo {
        unresolved_fraction: if total > 0.0 { high / total } else { 0.0 },
        outside_fraction: if total > 0.0 { outside / total } else { 0.0 },
    };
    Ok((out, info))
}

fn interp_axis(data: &[f64], shape: &[usize], axis: usize, src: &Grid, targets: &[f64]) -> Vec<f64> {
    let n = src.points;
    let half = n / 2;
    let l = src.half_width;
    let x0 = -l;
    // basis[t][k] = (cos, sin) of ξ_k (x_t - x0) for k = 0..=N/2
    let basis: Vec<Option<Vec<(f64, f64)>>> = targets
        .iter()
        .map(|&x| {
            if x < -l - 1e-12 * l || x > l + 1e-12 * l {
                return None;
            }
            let theta = PI * (x - x0) / l;
            let step = Complex64::new(theta.cos(), theta.sin());
            let mut z = Complex64::new(1.0, 0.0);
            let mut row = Vec::with_capacity(half + 1);
            for k in 0..=half {
                if k % 64 == 0 {
                    let ang = theta * k as f64;
                    z = Complex64::new(ang.cos(), ang.sin());
                }
                row.push((z.re, z.im));
                z *= step;
            }
            Some(row)
        })
        .collect();

    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let m = targets.len();
    let mut out = vec![0.0; outer * m * stride];
    let (fwd, _) = plans(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len()];
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let inv_n = 1.0 / n as f64;
    for o in 0..outer {
        for s in 0..stride {
            let base_in = o * n * stride + s;
            for (j, l) in line.iter_mut().enumerate() {
                *l = Complex64::new(data[base_in + j * stride], 0.0);
            }
            fwd.process_with_scratch(&mut line, &mut scratch);
            let base_out = o * m * stride + s;
            for (t, row) in basis.iter().enumerate() {
                let Some(row) = row else { continue };
                let mut acc = line[0].re;
                for k in 1..half {
                    let c = line[k];
                    acc += 2.0 * (c.re * row[k].0 - c.im * row[k].1);
                }
                acc += line[half].re * row[half].0;
                out[base_out + t * stride] = acc * inv_n;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g1(l: f64, n: usize) -> Grid {
        Grid::new(1, l, n).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1, 10.0, 100).is_err());
        assert!(Grid::new(1, -1.0, 64).is_err());
        assert!(Grid::new(4, 1.0, 64).is_err());
        assert!(Grid::new(1, 1.0, 8).is_err());
    }

    #[test]
    fn fft_roundtrip_and_parseval() {
        let g = Grid::new(2, 6.0, 32).unwrap();
        let f = Field::from_fn(g, |x| (-(x[0] - 0.3).powi(2) - 2.0 * x[1] * x[1]).exp() * (1.0 + x[0]));
        let s = fft(&f);
        let back = ifft(&s);
        let err = back.data.iter().zip(&f.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-13);
        let l2 = f.dot(&f);
        assert!((s.energy() - l2).abs() < 1e-12 * l2);
    }

    #[test]
    fn derivative_of_sine() {
        let g = g1(PI, 64);
        let f = Field::from_fn(g, |x| (3.0 * x[0]).sin());
        let d = &gradient(&f)[0];
        let err = d
            .data
            .iter()
            .zip(g.axis())
            .fold(0.0f64, |m, (v, x)| m.max((v - 3.0 * (3.0 * x).cos()).abs()));
        assert!(err < 1e-12);
        let lap = laplacian(&f);
        let err = lap.data.iter().zip(&f.data).fold(0.0f64, |m, (a, b)| m.max((a + 9.0 * b).abs()));
        assert!(err < 1e-11);
    }

    #[test]
    fn phi0_has_unit_mass_and_eigen_identity() {
        for &dim in &[1usize, 2] {
            let g = Grid::new(dim, 20.0, if dim == 1 { 512 } else { 128 }).unwrap();
            let modes = gaussian_modes(&g);
            assert!((modes.phi0.integral() - 1.0).abs() < 1e-10);
            // Δφ0 + (y/2)·∇φ0 + (n/2)φ0 = 0
            let lap = laplacian(&modes.phi0);
            let grad = gradient(&modes.phi0);
            let mut res: f64 = 0.0;
            for i in 0..g.len() {
                let mut adv = 0.0;
                for (a, ga) in grad.iter().enumerate() {
                    adv += 0.5 * g.x_component(a)[i] * ga.data[i];
                }
                let r = lap.data[i] + adv + 0.5 * dim as f64 * modes.phi0.data[i];
                res = res.max(r.abs());
            }
            assert!(res < 1e-8, "dim {dim}: residual {res}");
            // analytic ψ0 agrees with the spectral Laplacian
            let err = lap.data.iter().zip(&modes.psi0.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-10);
            assert!(modes.psi0.integral().abs() < 1e-10);
        }
    }

    #[test]
    fn y_grad_psi0_matches_spectral() {
        let g = g1(20.0, 512);
        let modes = gaussian_modes(&g);
        let d = &gradient(&modes.psi0)[0];
        let ax = g.axis();
        let err = (0..g.len())
            .map(|i| (ax[i] * d.data[i] - modes.y_grad_psi0.data[i]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn primitive_differentiates_back() {
        let g = g1(20.0, 512);
        let f = Field::from_fn(g, |x| x[0] * (-x[0] * x[0] / 2.0).exp());
        let big_f = primitive(&f).unwrap();
        assert_eq!(big_f.data[0], 0.0);
        let d = &gradient(&big_f)[0];
        let err = d.data.iter().zip(&f.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-6);
        // exact primitive is -exp(-y²/2)
        let err = big_f
            .data
            .iter()
            .zip(g.axis())
            .fold(0.0f64, |m, (v, x)| m.max((v + (-x * x / 2.0).exp()).abs()));
        assert!(err < 1e-10);
    }

    #[test]
    fn primitive_requires_zero_mean() {
        let g = g1(10.0, 64);
        let f = heat_gaussian(&g, 1.0);
        assert!(matches!(primitive(&f), Err(FieldError::NotZeroMean(_))));
    }

    #[test]
    fn weighted_norm_of_gaussian() {
        // ‖(1+|x|) e^{-x²/2}‖² = ∫ (1+|x|)² e^{-x²} = 3√π/2 + 2
        // (the weight has a kink at the origin, so the quadrature is second order)
        let g = g1(15.0, 4096);
        let f = Field::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp());
        let n0 = weighted_norm(&f, 0, 1.0).unwrap();
        let exact = (1.5 * PI.sqrt() + 2.0).sqrt();
        assert!((n0 - exact).abs() < 1e-5, "{n0} vs {exact}");
    }

    #[test]
    fn padded_spectrum_samples_continuous_transform() {
        let g = g1(12.0, 128);
        let f = heat_gaussian(&g, 0.5);
        let p = padded_spectrum(&f, 4).unwrap();
        assert_eq!(p.grid.points, 512);
        assert!((p.energy() - f.dot(&f)).abs() < 1e-12);
        // coefficient magnitude * 2L' equals |∫ f e^{-iξx}| = e^{-τ ξ²}
        for k in [1usize, 3, 7] {
            let xi = PI * k as f64 / p.grid.half_width;
            let mag = p.coeffs[k].norm() * 2.0 * p.grid.half_width;
            assert!((mag - (-0.5 * xi * xi).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_identity_and_dilation() {
        let g = g1(20.0, 256);
        let f = Field::from_fn(g, |x| (-(x[0] - 1.0).powi(2) / 3.0).exp());
        let (same, _) = resample(&f, &g, 1.0, 1.0).unwrap();
        let err = same.data.iter().zip(&f.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12);
        let (dil, info) = resample(&f, &g, 1.7, 2.0).unwrap();
        let exact = Field::from_fn(g, |x| {
            let z = 1.7 * x[0];
            if z.abs() > 20.0 { 0.0 } else { 2.0 * (-(z - 1.0).powi(2) / 3.0).exp() }
        });
        let err = dil.data.iter().zip(&exact.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10, "{err}");
        assert!(info.unresolved_fraction < 1e-20);
    }

    #[test]
    fn resample_two_dimensional() {
        let g = Grid::new(2, 10.0, 64).unwrap();
        let f = Field::from_fn(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 4.0).exp());
        let (r, _) = resample(&f, &g, 0.6, 1.0).unwrap();
        let exact = Field::from_fn(g, |x| (-(0.36 * x[0] * x[0] + 0.72 * x[1] * x[1]) / 4.0).exp());
        let err = r.data.iter().zip(&exact.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn gn_ratio_finite() {
        let g = Grid::new(2, 10.0, 64).unwrap();
        let f = heat_gaussian(&g, 1.0);
        let c = gn_check(&f, 3.0).unwrap();
        assert!(c.ratio.is_finite() && c.ratio > 0.0);
        assert!((c.sigma - 2.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn parseval_random(coeffs in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let g = g1(3.0, 64);
            let f = Field::from_vec(g, coeffs).unwrap();
            let s = fft(&f);
            let l2 = f.dot(&f);
            prop_assert!((s.energy() - l2).abs() <= 1e-12 * l2.max(1e-300));
        }

        #[test]
        fn heat_gaussian_mass(tau in 0.3f64..3.0) {
            let g = g1(30.0, 256);
            prop_assert!((heat_gaussian(&g, tau).integral() - 1.0).abs() < 1e-10);
        }
    }
}
