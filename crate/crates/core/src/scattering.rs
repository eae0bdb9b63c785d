//! Statistics of the scattering coefficient `b_z` for random pulses.
//!
//! The pulse occupies the grid `[-T/2, T/2)`. The solution `Psi` fixed to
//! `(0, 1) e^{izx}` at the right edge is carried inward to `x = 0`. The
//! solution `Phi` fixed to `(1, 0) e^{-izx}` at the left edge is carried the
//! same way. Both move as renormalized 2-vectors with a log-scale
//! accumulator, so the Riccati ratios `f = Psi_1/Psi_2` and
//! `f~ = Phi_2/Phi_1` never have to pass through their poles.
//!
//! In these variables the source integral `∫_0^x i(u f + u~* f~)` is
//! `[ln Psi_2(x) - ln Phi_1(-x)] - [ln Psi_2(0) - ln Phi_1(0)]`. The boundary
//! term is `(ln f~(0) - ln f(0)) / 2`, which makes `ln b` odd under the
//! reflection `u(x) -> -u*(-x)`. At a bound state `f(0) f~(0) = 1` and the
//! boundary term reduces to `-ln f(0)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ensemble;
use crate::error::{validation, Result};
use crate::network::{node_transfer, Mat2};
use crate::operator::OperatorKind;
use crate::signal::{make_grid, sample_signal, Polarization, SignalRealization};
use crate::stats::htest::{excess_kurtosis, iqr, ks_uniform, mean, median, normality_test, variance};
use crate::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LnBTrace {
    pub z: Complex64,
    /// Pulse duration, the full grid length.
    pub t: f64,
    pub dx: f64,
    /// Inverse bandwidth, identified with the grid step.
    pub tau: f64,
    pub d: f64,
    pub polarization: Polarization,
    pub seed: u64,
    /// `x_j = j dx` for `j = 0..=n/2`.
    pub x: Vec<f64>,
    /// Cumulative source integral from 0 to `x_j`.
    pub source: Vec<Complex64>,
    /// `ln b(x_j)` with the imaginary part unwrapped along `x`.
    pub trajectory: Vec<Complex64>,
    pub ln_b: Complex64,
    pub f0: Complex64,
    pub f_tilde0: Complex64,
    /// Same boundary term plus a trapezoid sum of `i(u f + u~* f~) dx` on the
    /// grid, which samples the Riccati poles instead of integrating through
    /// them.
    pub ln_b_riemann: Complex64,
}

/// Normalized 2-vector with the log of the dropped scale.
#[derive(Clone, Copy)]
struct Projective {
    v: [Complex64; 2],
    log_scale: f64,
}

impl Projective {
    fn new(v: [Complex64; 2]) -> Self {
        Projective { v, log_scale: 0.0 }
    }

    fn apply(&mut self, m: &Mat2) {
        let a = m[0][0] * self.v[0] + m[0][1] * self.v[1];
        let b = m[1][0] * self.v[0] + m[1][1] * self.v[1];
        let nr = (a.norm_sqr() + b.norm_sqr()).sqrt();
        self.v = [a / nr, b / nr];
        self.log_scale += nr.ln();
    }

    fn ln_component(&self, k: usize) -> Complex64 {
        Complex64::new(self.log_scale, 0.0) + self.v[k].ln()
    }
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Symmetric cell transfer `F(h/2) M F(h/2)`.
fn cell(u: Complex64, z: Complex64, h: f64) -> Mat2 {
    let m = node_transfer(u, h, OperatorKind::NonHermitianBright);
    let p = (-I * z * (0.5 * h)).exp();
    let f: Mat2 = [[p, Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), 1.0 / p]];
    mat_mul(&mat_mul(&f, &m), &f)
}

fn inverse(m: &Mat2) -> Mat2 {
    [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]
}

/// Integrates `ln b` for one pulse at spectral parameter `z` (`Im z >= 0`).
/// The grid must have an even number of points so that `x = 0` is a node.
pub fn evolve_lnb(signal: &SignalRealization, z: Complex64) -> Result<LnBTrace> {
    if !(z.im >= 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return validation(format!("need Im z >= 0, got {z}"));
    }
    let g = signal.grid;
    if !g.n.is_multiple_of(2) {
        return validation(format!("pulse grid needs an even point count, got {}", g.n));
    }
    let h = g.dx;
    let c = g.n / 2;
    let m = c;
    let u = &signal.samples;

    // ln Psi_2(x_j) and ln Phi_1(-x_j), j = 0..=m.
    let mut ln_psi2 = vec![Complex64::new(0.0, 0.0); m + 1];
    let mut ln_phi1 = vec![Complex64::new(0.0, 0.0); m + 1];
    let mut psi = Projective::new([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
    let mut phi = Projective::new([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    ln_psi2[m] = psi.ln_component(1);
    ln_phi1[m] = phi.ln_component(0);
    let (mut f_prev, mut ft_prev) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let mut riemann = Complex64::new(0.0, 0.0);
    for j in (0..m).rev() {
        // Cell [x_j, x_{j+1}] carries the sample nearest the origin.
        psi.apply(&inverse(&cell(u[c + j], z, h)));
        phi.apply(&cell(u[c - j], z, h));
        ln_psi2[j] = psi.ln_component(1);
        ln_phi1[j] = phi.ln_component(0);
        let (f, ft) = (psi.v[0] / psi.v[1], phi.v[1] / phi.v[0]);
        riemann += I * (u[c + j] * (f + f_prev) + u[c - j].conj() * (ft + ft_prev)) * (0.5 * h);
        (f_prev, ft_prev) = (f, ft);
    }

    let f0 = psi.v[0] / psi.v[1];
    let f_tilde0 = phi.v[1] / phi.v[0];
    let boundary = 0.5 * ((phi.v[1] / phi.v[0]).ln() + (psi.v[1] / psi.v[0]).ln());

    let base = ln_psi2[0] - ln_phi1[0];
    let mut source = Vec::with_capacity(m + 1);
    let mut prev = 0.0;
    for j in 0..=m {
        let mut s = ln_psi2[j] - ln_phi1[j] - base;
        // Unwrap the phase along x.
        let k = ((prev - s.im) / (2.0 * PI)).round();
        s.im += 2.0 * PI * k;
        prev = s.im;
        source.push(s);
    }
    let trajectory: Vec<Complex64> = source.iter().map(|s| boundary + s).collect();
    Ok(LnBTrace {
        z,
        t: g.length,
        dx: h,
        tau: h,
        d: signal.power,
        polarization: signal.polarization,
        seed: signal.seed,
        x: (0..=m).map(|j| j as f64 * h).collect(),
        ln_b: *trajectory.last().expect("m >= 1"),
        source,
        trajectory,
        f0,
        f_tilde0,
        ln_b_riemann: boundary + riemann,
    })
}

/// Prefactor of the unpolarized variance law
/// `sigma^2 = 4 sqrt(pi) eta e^{2 eta/D} / sinh(2 eta/D) * T ln(T / 2 tau)`.
pub fn variance_prefactor(eta: f64, d: f64) -> f64 {
    let y = 2.0 * eta / d;
    // e^y / sinh y = 2 / (1 - e^{-2y})
    4.0 * PI.sqrt() * eta * 2.0 / (1.0 - (-2.0 * y).exp())
}

/// `T ln(T / 2 tau)`, the duration dependence of the unpolarized variance.
pub fn variance_time_factor(t: f64, tau: f64) -> f64 {
    t * (t / (2.0 * tau)).ln()
}

/// Cauchy scale of polarized `Re ln b` at `xi = 0`:
/// `e^{eta/D} / I_0(eta/D) * T / tau`, up to an unstated constant.
pub fn cauchy_scale_polarized(eta: f64, d: f64, t: f64, tau: f64) -> Result<f64> {
    if !(d > 0.0 && t > 0.0 && tau > 0.0 && eta >= 0.0) {
        return validation("cauchy_scale_polarized needs eta >= 0 and positive D, T, tau");
    }
    let x = eta / d;
    Ok(x.exp() / puruspe::bessel::In(0, x) * t / tau)
}

/// Location (median) and scale (half the interquartile range) of a Cauchy fit.
pub fn cauchy_fit(samples: &[f64]) -> (f64, f64) {
    (median(samples), 0.5 * iqr(samples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BzConfig {
    pub d: f64,
    pub z: Complex64,
    pub dx: f64,
    pub durations: Vec<f64>,
    pub runs: usize,
    pub polarization: Polarization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BzPoint {
    pub t: f64,
    pub re_mean: f64,
    pub re_mean_stderr: f64,
    pub re_variance: f64,
    pub re_variance_stderr: f64,
    pub re_median: f64,
    pub re_iqr: f64,
    pub re_excess_kurtosis: f64,
    pub normality_p: f64,
    /// KS p-value of `Im ln b mod 2 pi` against the uniform law.
    pub phase_uniformity_p: f64,
    /// Mean resultant length of the phases.
    pub phase_resultant: f64,
    /// `re_variance / (T ln(T / 2 tau))`.
    pub scaled_variance: f64,
    pub cauchy_location: f64,
    pub cauchy_scale: f64,
    /// Median, IQR and excess kurtosis of the grid-sampled Riccati sum.
    pub riemann_median: f64,
    pub riemann_iqr: f64,
    pub riemann_excess_kurtosis: f64,
    #[serde(skip)]
    pub re_samples: Vec<f64>,
    #[serde(skip)]
    pub phase_samples: Vec<f64>,
    #[serde(skip)]
    pub riemann_samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BzStats {
    pub d: f64,
    pub z: Complex64,
    pub tau: f64,
    pub polarization: Polarization,
    pub runs: usize,
    pub points: Vec<BzPoint>,
    /// Inverse-variance weighted mean of `scaled_variance` over durations.
    pub scaling_constant: f64,
    pub scaling_constant_stderr: f64,
    pub analytic_prefactor: f64,
    pub flags: Vec<String>,
}

impl BzStats {
    /// `t,re_ln_b,im_ln_b_mod_2pi` rows for every sample.
    pub fn samples_csv(&self) -> String {
        let mut s = format!("# D={} z={} tau={} pol={}\nt,re_ln_b,phase\n", self.d, self.z, self.tau, self.polarization.label());
        for p in &self.points {
            for (r, ph) in p.re_samples.iter().zip(&p.phase_samples) {
                s.push_str(&format!("{:e},{r:e},{ph:e}\n", p.t));
            }
        }
        s
    }
}

/// Relative error of a variance estimate above which a point is flagged.
pub const MAX_VARIANCE_REL_ERROR: f64 = 0.25;

fn variance_stderr(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = mean(x);
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Ensemble statistics of `ln b` at each pulse duration.
pub fn variance_growth(cfg: &BzConfig, seed: u64) -> Result<BzStats> {
    if cfg.runs < 10 {
        return validation("variance_growth needs at least 10 runs");
    }
    let (tmin, tmax) = cfg.durations.iter().fold((f64::MAX, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
    if cfg.durations.is_empty() || tmax < 4.0 * tmin {
        return validation("durations must span at least a factor of 4");
    }
    if cfg.z.im < 0.0 {
        return validation("need Im z >= 0");
    }
    let mut points = Vec::new();
    let mut flags = Vec::new();
    for (k, &t) in cfg.durations.iter().enumerate() {
        let grid = make_grid(t, cfg.dx)?;
        let traces = ensemble::try_map(cfg.runs, crate::rng::derive_seed(seed, k as u64), |_, s| {
            let sig = sample_signal(grid, cfg.d, cfg.polarization, s)?;
            evolve_lnb(&sig, cfg.z).map(|tr| (tr.ln_b, tr.ln_b_riemann.re))
        })?;
        let re: Vec<f64> = traces.iter().map(|l| l.0.re).collect();
        let ph: Vec<f64> = traces.iter().map(|l| l.0.im.rem_euclid(2.0 * PI)).collect();
        let riemann: Vec<f64> = traces.iter().map(|l| l.1).collect();
        let var = variance(&re);
        let var_se = variance_stderr(&re);
        if var_se > MAX_VARIANCE_REL_ERROR * var {
            flags.push(format!("T={t}: variance relative error {:.2} exceeds {MAX_VARIANCE_REL_ERROR}", var_se / var));
        }
        let (c, s) = ph.iter().fold((0.0, 0.0), |(c, s), a| (c + a.cos(), s + a.sin()));
        let (loc, scale) = cauchy_fit(&re);
        let tf = variance_time_factor(t, cfg.dx);
        points.push(BzPoint {
            t,
            re_mean: mean(&re),
            re_mean_stderr: (var / re.len() as f64).sqrt(),
            re_variance: var,
            re_variance_stderr: var_se,
            re_median: median(&re),
            re_iqr: iqr(&re),
            re_excess_kurtosis: excess_kurtosis(&re),
            normality_p: normality_test(&re).p_value,
            phase_uniformity_p: ks_uniform(&ph, 0.0, 2.0 * PI).p_value,
            phase_resultant: (c * c + s * s).sqrt() / ph.len() as f64,
            scaled_variance: var / tf,
            cauchy_location: loc,
            cauchy_scale: scale,
            riemann_median: median(&riemann),
            riemann_iqr: iqr(&riemann),
            riemann_excess_kurtosis: excess_kurtosis(&riemann),
            re_samples: re,
            phase_samples: ph,
            riemann_samples: riemann,
        });
    }
    let w: Vec<f64> = points
        .iter()
        .map(|p| {
            let se = p.re_variance_stderr / variance_time_factor(p.t, cfg.dx);
            1.0 / (se * se).max(1e-300)
        })
        .collect();
    let sw: f64 = w.iter().sum();
    let scaling_constant = points.iter().zip(&w).map(|(p, w)| p.scaled_variance * w).sum::<f64>() / sw;
    Ok(BzStats {
        d: cfg.d,
        z: cfg.z,
        tau: cfg.dx,
        polarization: cfg.polarization,
        runs: cfg.runs,
        points,
        scaling_constant,
        scaling_constant_stderr: sw.powf(-0.5),
        analytic_prefactor: variance_prefactor(cfg.z.im, cfg.d),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::optimal_potential;

    fn reflect(s: &SignalRealization) -> SignalRealization {
        // u'(x_k) = -u*(-x_k); the grid is symmetric about index n/2.
        let n = s.grid.n;
        let mut out = s.clone();
        for k in 1..n {
            out.samples[k] = -s.samples[n - k].conj();
        }
        out.samples[0] = -s.samples[0].conj();
        out
    }

    #[test]
    fn free_pulse_has_no_source() {
        let g = make_grid(20.0, 0.1).unwrap();
        let s = sample_signal(g, 0.0, Polarization::Unpolarized, 0).unwrap();
        let tr = evolve_lnb(&s, Complex64::new(0.3, 0.5)).unwrap();
        assert!(tr.source.iter().all(|v| v.norm() < 1e-12));
        assert_eq!(tr.f0.norm(), 0.0);
        assert_eq!(tr.f_tilde0.norm(), 0.0);
        assert_eq!(tr.trajectory.len(), g.n / 2 + 1);
    }

    #[test]
    fn reflection_negates_ln_b() {
        let g = make_grid(40.0, 0.1).unwrap();
        for seed in 0..5 {
            let s = sample_signal(g, 1.0, Polarization::Unpolarized, seed).unwrap();
            let z = Complex64::new(0.2, 0.5);
            let a = evolve_lnb(&s, z).unwrap().ln_b;
            let b = evolve_lnb(&reflect(&s), z).unwrap().ln_b;
            assert!((a.re + b.re).abs() < 1e-9 * a.re.abs().max(1.0), "{a} {b}");
            let dphi = (a.im + b.im).rem_euclid(2.0 * PI);
            assert!(dphi.min(2.0 * PI - dphi) < 1e-9);
        }
    }

    #[test]
    fn global_phase_leaves_re_ln_b_unchanged() {
        let g = make_grid(40.0, 0.1).unwrap();
        let s = sample_signal(g, 1.0, Polarization::Unpolarized, 3).unwrap();
        let z = Complex64::new(-0.4, 0.5);
        let a = evolve_lnb(&s, z).unwrap().ln_b;
        let b = evolve_lnb(&s.scaled(Complex64::from_polar(1.0, 1.1)), z).unwrap().ln_b;
        assert!((a.re - b.re).abs() < 1e-9);
    }

    #[test]
    fn bound_state_boundary_matches_riccati_form() {
        // At the soliton eigenvalue f(0) f~(0) = 1.
        let defect = |dx: f64| {
            let g = make_grid(40.0, dx).unwrap();
            let s = optimal_potential(0.0, 1.0, g).unwrap();
            let tr = evolve_lnb(&s, Complex64::new(0.0, 1.0)).unwrap();
            (tr.f0 * tr.f_tilde0 - 1.0).norm()
        };
        let (a, b) = (defect(0.02), defect(0.01));
        assert!(b < 0.6 * a);
    }

    #[test]
    fn unpolarized_mean_is_zero() {
        let cfg = BzConfig {
            d: 1.0,
            z: Complex64::new(0.0, 0.5),
            dx: 0.1,
            durations: vec![25.0, 100.0],
            runs: 200,
            polarization: Polarization::Unpolarized,
        };
        let st = variance_growth(&cfg, 4).unwrap();
        for p in &st.points {
            assert!(p.re_mean.abs() < 3.0 * p.re_mean_stderr, "{p:?}");
            assert!(p.phase_uniformity_p > 0.01);
        }
    }

    #[test]
    fn cauchy_scale_formula() {
        assert!((cauchy_scale_polarized(0.0, 1.0, 50.0, 0.1).unwrap() - 500.0).abs() < 1e-9);
        // Ratio identity at eta and 2 eta, evaluated with an independent series for I_0.
        let i0 = |x: f64| (0..60).map(|k| (x * x / 4.0).powi(k) / (1..=k).map(f64::from).product::<f64>().powi(2)).sum::<f64>();
        let (eta, d) = (0.7, 1.3);
        let r = cauchy_scale_polarized(2.0 * eta, d, 1.0, 1.0).unwrap() / cauchy_scale_polarized(eta, d, 1.0, 1.0).unwrap();
        let want = ((2.0 * eta / d).exp() * i0(eta / d)) / ((eta / d).exp() * i0(2.0 * eta / d));
        assert!((r / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variance_law_helpers() {
        // T-ratio of the variance law for T = 50, tau = 0.1.
        let r = variance_time_factor(100.0, 0.1) / variance_time_factor(50.0, 0.1);
        assert!((r - 2.0 * (500.0f64).ln() / (250.0f64).ln()).abs() < 1e-12);
        let p = variance_prefactor(0.5, 1.0);
        assert!((p - 4.0 * PI.sqrt() * 0.5 * 1.0f64.exp() / 1.0f64.sinh()).abs() < 1e-12);
    }

    #[test]
    fn durations_must_span_factor_four() {
        let cfg = BzConfig {
            d: 1.0,
            z: Complex64::new(0.0, 0.5),
            dx: 0.1,
            durations: vec![50.0, 100.0],
            runs: 20,
            polarization: Polarization::Unpolarized,
        };
        assert!(variance_growth(&cfg, 0).is_err());
    }
}
