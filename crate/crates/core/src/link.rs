//! Amplifier-chain noise and first-order eigenvalue shifts.
//!
//! Each amplifier adds white noise `f(t)` of strength `sigma^2`. On a grid of
//! step `dx` the samples are `f_k = s (g1 + i g2)` with standard normals
//! `g1, g2`; the per-quadrature variance `s^2` depends on the
//! [`NoiseConvention`].

use faer::{Mat, Side};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{numerical, validation, Result};
use crate::operator::{OperatorKind, ZsSpectrum};
use crate::signal::Grid;
use crate::{ensemble, rng, Complex64};

/// Below this `|sum psi1 psi2 dx|` the bilinear norm is treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    /// Total span, km.
    pub span_km: f64,
    /// Amplifier spacing, km.
    pub spacing_km: f64,
    pub amplifiers: u32,
    /// Power gain per amplifier, `10^(loss * spacing / 10)`.
    pub gain: f64,
    /// Fiber loss, dB/km.
    pub loss_db_per_km: f64,
    /// Carrier frequency, Hz.
    pub carrier_hz: f64,
    /// Spontaneous-emission factor.
    pub eta_sp: f64,
    /// Planck constant, J s.
    pub planck: f64,
    /// Normalization power, W.
    pub power_w: f64,
    /// Normalization time, s.
    pub time_s: f64,
    /// Bandwidth, Hz.
    pub bandwidth_hz: f64,
}

impl LinkParams {
    /// Builds a parameter set with the gain derived from loss and spacing.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        span_km: f64,
        spacing_km: f64,
        amplifiers: u32,
        loss_db_per_km: f64,
        carrier_hz: f64,
        eta_sp: f64,
        planck: f64,
        power_w: f64,
        time_s: f64,
        bandwidth_hz: f64,
    ) -> Result<Self> {
        let p = LinkParams {
            span_km,
            spacing_km,
            amplifiers,
            gain: gain_from_loss(loss_db_per_km, spacing_km),
            loss_db_per_km,
            carrier_hz,
            eta_sp,
            planck,
            power_w,
            time_s,
            bandwidth_hz,
        };
        p.validate()?;
        Ok(p)
    }

    /// 1000 km of fiber at 0.2 dB/km with ten amplifiers 100 km apart
    /// (G = 100), a 200 THz carrier, eta_sp = 2, P_c = 50 mW, t_c = 30 ps and
    /// 50 THz of bandwidth.
    pub fn reference() -> Self {
        LinkParams::new(1000.0, 100.0, 10, 0.2, 2e14, 2.0, 6.6e-34, 0.05, 3e-11, 50e12)
            .expect("reference link parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("span_km", self.span_km),
            ("spacing_km", self.spacing_km),
            ("gain", self.gain),
            ("loss_db_per_km", self.loss_db_per_km),
            ("carrier_hz", self.carrier_hz),
            ("eta_sp", self.eta_sp),
            ("planck", self.planck),
            ("power_w", self.power_w),
            ("time_s", self.time_s),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return validation(format!("link parameter {name} must be positive and finite, got {v}"));
            }
        }
        if self.amplifiers == 0 {
            return validation("link needs at least one amplifier");
        }
        if self.gain <= 1.0 {
            return validation(format!("amplifier gain must exceed 1, got {}", self.gain));
        }
        let expected = gain_from_loss(self.loss_db_per_km, self.spacing_km);
        if ((self.gain - expected) / expected).abs() > 1e-6 {
            return validation(format!(
                "gain {} inconsistent with {} dB/km over {} km (expected {expected})",
                self.gain, self.loss_db_per_km, self.spacing_km
            ));
        }
        if self.amplifiers as f64 * self.spacing_km > self.span_km + self.spacing_km {
            return validation(format!(
                "{} amplifiers every {} km do not fit in a {} km span",
                self.amplifiers, self.spacing_km, self.span_km
            ));
        }
        Ok(())
    }

    /// `2 pi B t_c`, the xi range in normalized units.
    pub fn lambda_normalized(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.bandwidth_hz * self.time_s
    }
}

pub fn gain_from_loss(loss_db_per_km: f64, spacing_km: f64) -> f64 {
    10f64.powf(loss_db_per_km * spacing_km / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseStrength {
    /// Per amplifier, J.
    pub si: f64,
    /// Per amplifier, in units of `P_c t_c`.
    pub normalized: f64,
    /// Whole chain (`N_a` amplifiers), normalized.
    pub chain_normalized: f64,
}

/// `sigma^2 = h nu0 eta_sp (G - 1)^2 / (G ln G)`.
pub fn amplifier_sigma2(p: &LinkParams) -> Result<NoiseStrength> {
    if !(p.gain > 1.0) {
        return validation(format!("amplifier gain must exceed 1, got {}", p.gain));
    }
    let g = p.gain;
    let si = p.planck * p.carrier_hz * p.eta_sp * (g - 1.0).powi(2) / (g * g.ln());
    let normalized = si / (p.power_w * p.time_s);
    Ok(NoiseStrength { si, normalized, chain_normalized: normalized * p.amplifiers as f64 })
}

/// How `sigma^2` maps onto the complex noise samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    /// `<Re f Re f> = <Im f Im f> = sigma^2 delta`, so `<|f|^2> = 2 sigma^2 delta`.
    #[default]
    PerQuadrature,
    /// `<f f*> = sigma^2 delta`.
    ComplexVariance,
}

impl NoiseConvention {
    /// Per-quadrature sample variance `s^2` on a grid of step `dx`.
    pub fn quadrature_variance(self, sigma2: f64, dx: f64) -> f64 {
        match self {
            NoiseConvention::PerQuadrature => sigma2 / dx,
            NoiseConvention::ComplexVariance => sigma2 / (2.0 * dx),
        }
    }
}

impl std::str::FromStr for NoiseConvention {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "per_quadrature" => Ok(NoiseConvention::PerQuadrature),
            "complex_variance" => Ok(NoiseConvention::ComplexVariance),
            other => validation(format!("unknown noise convention '{other}' (per_quadrature, complex_variance)")),
        }
    }
}

/// Coefficients `(a_k, b_k)` with `dz = sum (a_k f_k + b_k f_k*) dx`.
fn shift_coefficients(psi1: &[Complex64], psi2: &[Complex64], dx: f64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let norm: Complex64 = psi1.iter().zip(psi2).map(|(a, b)| a * b).sum::<Complex64>() * dx;
    if norm.norm() < DEGENERATE_NORM {
        return numerical(format!("bilinear norm |sum psi1 psi2 dx| = {:e} is degenerate", norm.norm()));
    }
    let c = Complex64::new(0.0, -0.5) / norm;
    Ok((psi1.iter().map(|p| c * p * p).collect(), psi2.iter().map(|p| c * p * p).collect()))
}

/// First-order shift `dz = (1/2i) sum (f psi1^2 + f* psi2^2) / sum psi1 psi2`
/// of a bright eigenvalue. This is the response to `u -> u + i f`.
pub fn adiabatic_shift(eigvec: &[Complex64], grid: Grid, noise: &[Complex64]) -> Result<Complex64> {
    let n = grid.n;
    if eigvec.len() != 2 * n || noise.len() != n {
        return validation(format!(
            "adiabatic shift needs a 2n vector and n noise samples (n = {n}), got {} and {}",
            eigvec.len(),
            noise.len()
        ));
    }
    let (a, b) = shift_coefficients(&eigvec[..n], &eigvec[n..], grid.dx)?;
    Ok((0..n).map(|k| a[k] * noise[k] + b[k] * noise[k].conj()).sum::<Complex64>() * grid.dx)
}

/// Complex white noise of strength `sigma2` on the grid.
pub fn white_noise(grid: Grid, sigma2: f64, convention: NoiseConvention, seed: u64) -> Vec<Complex64> {
    let mut r = rng::stream(seed, 0);
    let s = convention.quadrature_variance(sigma2, grid.dx).sqrt();
    (0..grid.n)
        .map(|_| {
            let g1: f64 = StandardNormal.sample(&mut r);
            let g2: f64 = StandardNormal.sample(&mut r);
            Complex64::new(s * g1, s * g2)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceMethod {
    /// `C = s^2 dx^2 J J^T` from the linear response.
    Exact,
    /// Sample covariance over noise realizations.
    MonteCarlo,
}

/// Covariance of the stacked shifts `(dxi_1, deta_1, dxi_2, deta_2, ...)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftCovariance {
    /// Mean signal power of the realization the modes came from.
    pub d: f64,
    pub eigenvalues: Vec<Complex64>,
    /// Row-major `2N x 2N`.
    pub matrix: Vec<f64>,
    /// Eigenvalues of `matrix`, ascending.
    pub spectrum: Vec<f64>,
    /// Geometric mean of `spectrum`.
    pub lambda_bar: f64,
    pub sigma2: f64,
    pub convention: NoiseConvention,
    pub method: CovarianceMethod,
    /// Noise realizations (0 for the exact method).
    pub runs: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl ShiftCovariance {
    pub fn dim(&self) -> usize {
        2 * self.eigenvalues.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim() + j]
    }

    pub fn ln_lambda_bar(&self) -> f64 {
        self.lambda_bar.ln()
    }

    /// Histogram of `ln` of the covariance eigenvalues as `(center, density)`.
    pub fn log_eigen_histogram(&self, bins: usize) -> Vec<(f64, f64)> {
        let logs: Vec<f64> = self.spectrum.iter().map(|l| l.ln()).collect();
        let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if bins == 0 || logs.is_empty() {
            return Vec::new();
        }
        let w = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut c = vec![0usize; bins];
        for l in &logs {
            c[(((l - lo) / w) as usize).min(bins - 1)] += 1;
        }
        let total = logs.len() as f64;
        (0..bins).map(|k| (lo + (k as f64 + 0.5) * w, c[k] as f64 / (total * w))).collect()
    }

    pub fn matrix_csv(&self) -> String {
        let d = self.dim();
        let mut s = String::new();
        for i in 0..d {
            let row: Vec<String> = (0..d).map(|j| format!("{:e}", self.at(i, j))).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Covariance of the first-order shifts of every mode in `spectrum` (already
/// restricted to independent modes) under one noise injection of strength
/// `sigma2`. `runs` is ignored by the exact method.
pub fn shift_covariance(
    spectrum: &ZsSpectrum,
    sigma2: f64,
    convention: NoiseConvention,
    method: CovarianceMethod,
    runs: usize,
    seed: u64,
) -> Result<ShiftCovariance> {
    if spectrum.kind != OperatorKind::NonHermitianBright {
        return validation("shift covariance is defined for bright spectra");
    }
    if !spectrum.has_vectors() {
        return validation("shift covariance needs eigenvectors");
    }
    if spectrum.is_empty() {
        return validation("shift covariance needs at least one mode");
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return validation(format!("noise strength must be positive, got {sigma2}"));
    }
    let grid = spectrum.grid;
    let (n, dx) = (grid.n, grid.dx);
    let modes = spectrum.len();
    let dim = 2 * modes;
    let mut coef = Vec::with_capacity(modes);
    for i in 0..modes {
        coef.push(
            shift_coefficients(spectrum.psi1(i), spectrum.psi2(i), dx)
                .map_err(|e| crate::Error::Numerical(format!("mode z = {}: {e}", spectrum.eigenvalues[i])))?,
        );
    }
    let mut warnings = Vec::new();
    let matrix = match method {
        CovarianceMethod::Exact => {
            // Row 2i is dxi_i, row 2i+1 is deta_i; columns are (g1_k, g2_k).
            let mut j = Mat::<f64>::zeros(dim, 2 * n);
            for (i, (a, b)) in coef.iter().enumerate() {
                for k in 0..n {
                    let p = a[k] + b[k];
                    let q = Complex64::i() * (a[k] - b[k]);
                    j[(2 * i, 2 * k)] = p.re;
                    j[(2 * i, 2 * k + 1)] = q.re;
                    j[(2 * i + 1, 2 * k)] = p.im;
                    j[(2 * i + 1, 2 * k + 1)] = q.im;
                }
            }
            let c = &j * j.transpose();
            let scale = convention.quadrature_variance(sigma2, dx) * dx * dx;
            let mut m = vec![0.0; dim * dim];
            for r in 0..dim {
                for s in 0..dim {
                    m[r * dim + s] = scale * 0.5 * (c[(r, s)] + c[(s, r)]);
                }
            }
            m
        }
        CovarianceMethod::MonteCarlo => {
            if runs < 2 {
                return validation("Monte Carlo covariance needs at least two runs");
            }
            if runs < 10 * dim {
                warnings.push(format!("{runs} runs for a {dim}x{dim} covariance (fewer than 10 per dimension)"));
            }
            let samples: Vec<Vec<f64>> = ensemble::map(runs, seed, |_, s| {
                let f = white_noise(grid, sigma2, convention, s);
                let mut v = Vec::with_capacity(dim);
                for (a, b) in &coef {
                    let dz: Complex64 = (0..n).map(|k| a[k] * f[k] + b[k] * f[k].conj()).sum::<Complex64>() * dx;
                    v.push(dz.re);
                    v.push(dz.im);
                }
                v
            });
            let mut mean = vec![0.0; dim];
            for v in &samples {
                for r in 0..dim {
                    mean[r] += v[r];
                }
            }
            mean.iter_mut().for_each(|m| *m /= runs as f64);
            let mut m = vec![0.0; dim * dim];
            for v in &samples {
                for r in 0..dim {
                    let dr = v[r] - mean[r];
                    for s in r..dim {
                        m[r * dim + s] += dr * (v[s] - mean[s]);
                    }
                }
            }
            for r in 0..dim {
                for s in r..dim {
                    m[r * dim + s] /= (runs - 1) as f64;
                    m[s * dim + r] = m[r * dim + s];
                }
            }
            m
        }
    };
    let cm = Mat::<f64>::from_fn(dim, dim, |r, s| matrix[r * dim + s]);
    let ev = cm
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| crate::Error::Numerical(format!("covariance eigensolver failed: {e:?}")))?;
    let mut spec: Vec<f64> = ev.into_iter().collect();
    spec.sort_by(f64::total_cmp);
    let top = spec.last().copied().unwrap_or(0.0);
    if spec[0] < -1e-10 * top.abs().max(f64::MIN_POSITIVE) {
        return numerical(format!("covariance not positive semidefinite: smallest eigenvalue {:e}", spec[0]));
    }
    if !(spec[0] > 0.0) {
        return numerical(format!(
            "covariance is singular (smallest eigenvalue {:e}); the geometric mean is undefined",
            spec[0]
        ));
    }
    let lambda_bar = (spec.iter().map(|l| l.ln()).sum::<f64>() / dim as f64).exp();
    Ok(ShiftCovariance {
        d: spectrum.power,
        eigenvalues: spectrum.eigenvalues.clone(),
        matrix,
        spectrum: spec,
        lambda_bar,
        sigma2,
        convention,
        method,
        runs: if method == CovarianceMethod::Exact { 0 } else { runs },
        seed,
        warnings,
    })
}

/// First-order shift of a dark (real) eigenvalue, `2 Re sum f psi1 psi2* dx`,
/// the response to `u -> u + f`.
pub fn dark_shift(eigvec: &[Complex64], grid: Grid, noise: &[Complex64]) -> Result<f64> {
    let n = grid.n;
    if eigvec.len() != 2 * n || noise.len() != n {
        return validation("dark shift needs a 2n vector and n noise samples");
    }
    Ok(2.0 * (0..n).map(|k| (noise[k] * eigvec[k] * eigvec[n + k].conj()).re).sum::<f64>() * grid.dx)
}

/// Variance of the first-order dark shift, `4 s^2 dx^2 sum |psi1|^2 |psi2|^2`.
pub fn dark_shift_variance(eigvec: &[Complex64], grid: Grid, sigma2: f64, convention: NoiseConvention) -> Result<f64> {
    let n = grid.n;
    if eigvec.len() != 2 * n {
        return validation("dark shift variance needs a 2n vector");
    }
    let s2 = convention.quadrature_variance(sigma2, grid.dx);
    Ok(4.0 * s2 * grid.dx * grid.dx * (0..n).map(|k| eigvec[k].norm_sqr() * eigvec[n + k].norm_sqr()).sum::<f64>())
}

/// Ratio `<dlambda^2> / (sigma^2 IPR)` estimated by Monte Carlo on one
/// normalized Hermitian eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkCalibration {
    pub constant: f64,
    pub stderr: f64,
    pub ipr: f64,
    pub runs: usize,
}

pub fn calibrate_dark_constant(
    eigvec: &[Complex64],
    grid: Grid,
    sigma2: f64,
    convention: NoiseConvention,
    runs: usize,
    seed: u64,
) -> Result<DarkCalibration> {
    if runs < 2 || !(sigma2 > 0.0) {
        return validation("calibration needs at least two runs and positive noise");
    }
    let ipr = crate::stats::ipr(eigvec, grid)?;
    let sq: Vec<f64> = ensemble::try_map(runs, seed, |_, s| {
        dark_shift(eigvec, grid, &white_noise(grid, sigma2, convention, s)).map(|d| d * d)
    })?;
    let m = crate::stats::htest::mean(&sq);
    let se = crate::stats::htest::stderr_of_mean(&sq);
    Ok(DarkCalibration { constant: m / (sigma2 * ipr), stderr: se / (sigma2 * ipr), ipr, runs })
}

/// `constant * sigma^2 * IPR(eigvec)`.
pub fn dark_eigen_variance(eigvec: &[Complex64], grid: Grid, sigma2: f64, constant: f64) -> Result<f64> {
    Ok(constant * sigma2 * crate::stats::ipr(eigvec, grid)?)
}

/// Integrates `d ln|b|/dx = 8 xi eta`, `d phi/dx = 4 (eta^2 - xi^2)` along a
/// sampled eigenvalue path (trapezoid rule). Returns `ln|b| + i phi` at every
/// sample with `phi` wrapped to `[0, 2 pi)`.
pub fn jitter_drift(z_path: &[Complex64], dx: f64, lnb0: Complex64) -> Vec<Complex64> {
    let rate = |z: Complex64| (8.0 * z.re * z.im, 4.0 * (z.im * z.im - z.re * z.re));
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(z_path.len());
    let (mut amp, mut phase) = (lnb0.re, lnb0.im);
    for (k, &z) in z_path.iter().enumerate() {
        if k > 0 {
            let (a0, p0) = rate(z_path[k - 1]);
            let (a1, p1) = rate(z);
            amp += 0.5 * dx * (a0 + a1);
            phase += 0.5 * dx * (p0 + p1);
        }
        out.push(Complex64::new(amp, phase.rem_euclid(two_pi)));
    }
    out
}
