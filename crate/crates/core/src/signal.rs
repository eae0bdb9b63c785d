//! Random Gaussian envelopes and deterministic test potentials.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::rng;

/// Uniform grid `x_k = -L/2 + k*dx`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub length: f64,
    pub dx: f64,
    pub n: usize,
}

impl Grid {
    pub fn x(&self, k: usize) -> f64 {
        -0.5 * self.length + k as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }
}

/// Builds a grid with `n = round(length/step)`; the stored step is adjusted so
/// that `n*dx == length`.
pub fn make_grid(length: f64, step: f64) -> Result<Grid> {
    if !(length.is_finite() && step.is_finite()) || length <= 0.0 || step <= 0.0 {
        return validation(format!("grid needs positive finite length and step, got L={length}, dx={step}"));
    }
    if length < 2.0 * step * (1.0 - 1e-12) {
        return validation(format!("grid length {length} shorter than two steps of {step}"));
    }
    let n = (length / step).round() as usize;
    Ok(Grid { length, dx: length / n as f64, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    Unpolarized,
    Polarized,
}

impl Polarization {
    pub fn label(self) -> &'static str {
        match self {
            Polarization::Unpolarized => "unpolarized",
            Polarization::Polarized => "polarized",
        }
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unpolarized" | "u" => Ok(Polarization::Unpolarized),
            "polarized" | "p" => Ok(Polarization::Polarized),
            other => validation(format!("unknown polarization '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRealization {
    pub grid: Grid,
    pub samples: Vec<Complex64>,
    /// Mean power D. For deterministic pulses this is the pulse energy.
    pub power: f64,
    pub polarization: Polarization,
    pub seed: u64,
}

impl SignalRealization {
    /// Sample mean of |u|^2 times dx, which estimates D for white noise.
    pub fn measured_power(&self) -> f64 {
        self.samples.iter().map(|u| u.norm_sqr()).sum::<f64>() / self.grid.n as f64 * self.grid.dx
    }

    pub fn scaled(&self, c: Complex64) -> SignalRealization {
        SignalRealization {
            samples: self.samples.iter().map(|u| u * c).collect(),
            power: self.power * c.norm_sqr(),
            ..self.clone()
        }
    }

    /// Writes the columnar text format: one header line, then `x re im` rows.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# L={:e} dx={:e} D={:e} pol={} seed={}",
            self.grid.length,
            self.grid.dx,
            self.power,
            self.polarization.label(),
            self.seed
        )?;
        let mut line = String::new();
        for (k, u) in self.samples.iter().enumerate() {
            line.clear();
            let _ = write!(line, "{:e} {:e} {:e}", self.grid.x(k), u.re, u.im);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<SignalRealization> {
        let mut lines = r.lines();
        let header = match lines.next() {
            Some(h) => h?,
            None => return validation("empty signal file"),
        };
        let mut fields = std::collections::HashMap::new();
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Validation(format!("signal header lacks '{k}'")))
        };
        let parse_f = |k: &str| -> Result<f64> {
            get(k)?.parse::<f64>().map_err(|e| Error::Validation(format!("bad {k}: {e}")))
        };
        let length = parse_f("L")?;
        let dx = parse_f("dx")?;
        let power = parse_f("D")?;
        let polarization: Polarization = get("pol")?.parse()?;
        let seed = get("seed")?
            .parse::<u64>()
            .map_err(|e| Error::Validation(format!("bad seed: {e}")))?;
        let mut samples = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Validation(format!("bad signal row '{line}': {e}")))?;
            if cols.len() != 3 {
                return validation(format!("signal row needs 3 columns: '{line}'"));
            }
            samples.push(Complex64::new(cols[1], cols[2]));
        }
        let n = samples.len();
        if n < 2 || ((n as f64) * dx - length).abs() > 1e-9 * length {
            return validation(format!("signal has {n} rows, inconsistent with L={length}, dx={dx}"));
        }
        Ok(SignalRealization { grid: Grid { length, dx, n }, samples, power, polarization, seed })
    }
}

/// One white-noise sample with `E|u|^2 = sd^2`.
pub(crate) fn white_sample(rng: &mut rng::Rng, sd: f64, polarization: Polarization) -> Complex64 {
    match polarization {
        Polarization::Unpolarized => {
            let g1: f64 = StandardNormal.sample(rng);
            let g2: f64 = StandardNormal.sample(rng);
            Complex64::new(g1, g2) * (sd * std::f64::consts::FRAC_1_SQRT_2)
        }
        Polarization::Polarized => {
            let g: f64 = StandardNormal.sample(rng);
            Complex64::new(g * sd, 0.0)
        }
    }
}

/// White Gaussian envelope with per-sample variance D/dx.
pub fn sample_signal(grid: Grid, d: f64, polarization: Polarization, seed: u64) -> Result<SignalRealization> {
    if !(d.is_finite() && d >= 0.0) {
        return validation(format!("power D must be finite and non-negative, got {d}"));
    }
    let mut rng = rng::stream(seed, 0);
    let sd = (d / grid.dx).sqrt();
    let samples = (0..grid.n).map(|_| white_sample(&mut rng, sd, polarization)).collect();
    Ok(SignalRealization { grid, samples, power: d, polarization, seed })
}

/// Least-action potential carrying a bound state at `xi + i*eta`:
/// `u(x) = 2i*eta*sech(2*eta*x)*exp(2i*xi*x)`.
///
/// The D field holds the pulse energy (1/2)∫|u|^2 dx = 2*eta.
pub fn optimal_potential(xi: f64, eta: f64, grid: Grid) -> Result<SignalRealization> {
    if !(eta.is_finite() && eta > 0.0) || !xi.is_finite() {
        return validation(format!("optimal potential needs eta > 0, got eta={eta}"));
    }
    if (-eta * grid.length).exp() >= 1e-6 {
        return validation(format!(
            "grid length {} too short for eta={eta}: tail exp(-eta*L) must be below 1e-6",
            grid.length
        ));
    }
    let samples = grid
        .xs()
        .into_iter()
        .map(|x| {
            let y = (2.0 * eta * x).abs();
            let e = (-y).exp();
            let sech = 2.0 * e / (1.0 + e * e);
            Complex64::new(0.0, 2.0 * eta * sech) * Complex64::from_polar(1.0, 2.0 * xi * x)
        })
        .collect();
    Ok(SignalRealization { grid, samples, power: 2.0 * eta, polarization: Polarization::Unpolarized, seed: 0 })
}
