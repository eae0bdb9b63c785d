//! Density-of-states estimators over spectral ensembles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::operator::{build_operator, eigenvalues, OperatorKind, Scheme, ZsSpectrum};
use crate::signal::{Grid, Polarization};

/// Fraction of the band dropped at each edge of Hermitian spectra.
pub const DEFAULT_EDGE_FRACTION: f64 = 0.15;
pub const DEFAULT_BINS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DosAxis {
    Lambda1D,
    EtaProfile,
    XiEta2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosMeta {
    pub d: f64,
    pub length: f64,
    pub dx: f64,
    pub scheme: Option<Scheme>,
    /// Continuum xi-width the counts were divided by (eta profiles only).
    pub xi_width: Option<f64>,
}

/// Binned density. For `XiEta2D` the cells are stored row-major with eta as
/// the slow index: `density[i_eta * nxi + i_xi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosEstimate {
    pub axis: DosAxis,
    pub bin_edges: Vec<f64>,
    pub xi_edges: Vec<f64>,
    pub counts: Vec<f64>,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_realizations: usize,
    pub meta: DosMeta,
    pub flags: Vec<String>,
}

impl DosEstimate {
    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `∫ density` over the bins (1D axes).
    pub fn integral(&self) -> f64 {
        self.density.iter().zip(self.widths()).map(|(d, w)| d * w).sum()
    }

    /// Writes `bin_center,density,stderr` rows (with `xi` first for 2D).
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# axis={:?} D={} L={} dx={} realizations={}\n",
            self.axis, self.meta.d, self.meta.length, self.meta.dx, self.n_realizations
        );
        if self.axis == DosAxis::XiEta2D {
            s.push_str("xi,eta,density,stderr\n");
            let xc: Vec<f64> = self.xi_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            for (ie, e) in self.centers().iter().enumerate() {
                for (ix, x) in xc.iter().enumerate() {
                    let k = ie * xc.len() + ix;
                    s.push_str(&format!("{x:e},{e:e},{:e},{:e}\n", self.density[k], self.stderr[k]));
                }
            }
        } else {
            s.push_str("bin_center,density,stderr\n");
            for ((c, d), e) in self.centers().iter().zip(&self.density).zip(&self.stderr) {
                s.push_str(&format!("{c:e},{d:e},{e:e}\n"));
            }
        }
        s
    }
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if !(x >= edges[0] && x < edges[n]) {
        return None;
    }
    let k = ((x - edges[0]) / (edges[n] - edges[0]) * n as f64) as usize;
    // Guard against rounding at the bin boundaries.
    let mut k = k.min(n - 1);
    while k > 0 && x < edges[k] {
        k -= 1;
    }
    while k + 1 < n && x >= edges[k + 1] {
        k += 1;
    }
    Some(k)
}

/// Per-realization counts -> density with stderr from the realization spread.
fn reduce(per_real: &[Vec<f64>], norm: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let r = per_real.len() as f64;
    let nb = norm.len();
    let mut counts = vec![0.0; nb];
    let mut sq = vec![0.0; nb];
    for c in per_real {
        for b in 0..nb {
            counts[b] += c[b];
            sq[b] += c[b] * c[b];
        }
    }
    let density = (0..nb).map(|b| counts[b] / (r * norm[b])).collect();
    let stderr = (0..nb)
        .map(|b| {
            if r < 2.0 {
                return f64::NAN;
            }
            let m = counts[b] / r;
            let var = ((sq[b] / r - m * m) * r / (r - 1.0)).max(0.0);
            (var / r).sqrt() / norm[b]
        })
        .collect();
    (counts, density, stderr)
}

fn check_ensemble(spectra: &[ZsSpectrum]) -> Result<()> {
    if spectra.is_empty() {
        return validation("empty spectral ensemble");
    }
    let g = spectra[0].grid;
    if spectra.iter().any(|s| s.grid != g || s.scheme != spectra[0].scheme || s.kind != spectra[0].kind) {
        return validation("ensemble mixes grids, schemes or operator kinds");
    }
    Ok(())
}

/// Histogram density of real eigenvalues per unit lambda per unit length.
/// With `edges = None`, `DEFAULT_BINS` bins span the interior band left after
/// dropping `edge_fraction` at each end.
pub fn dos_1d(spectra: &[ZsSpectrum], edges: Option<Vec<f64>>, edge_fraction: f64) -> Result<DosEstimate> {
    check_ensemble(spectra)?;
    let s0 = &spectra[0];
    let b = s0.scheme.band_half_width(s0.grid.dx) * (1.0 - 2.0 * edge_fraction);
    let edges = edges.unwrap_or_else(|| uniform_edges(-b, b, DEFAULT_BINS));
    let per: Vec<Vec<f64>> = spectra
        .iter()
        .map(|s| {
            let mut c = vec![0.0; edges.len() - 1];
            for x in s.interior_real(edge_fraction) {
                if let Some(k) = bin_of(&edges, x) {
                    c[k] += 1.0;
                }
            }
            c
        })
        .collect();
    let norm: Vec<f64> = edges.windows(2).map(|w| (w[1] - w[0]) * s0.grid.length).collect();
    let (counts, density, stderr) = reduce(&per, &norm);
    Ok(DosEstimate {
        axis: DosAxis::Lambda1D,
        bin_edges: edges,
        xi_edges: Vec::new(),
        counts,
        density,
        stderr,
        n_realizations: spectra.len(),
        meta: DosMeta { d: s0.power, length: s0.grid.length, dx: s0.grid.dx, scheme: Some(s0.scheme), xi_width: None },
        flags: Vec::new(),
    })
}

/// Continuum xi-width represented by the free-operator levels inside
/// `|xi| <= half_window`: `pi * N_free / L`. For the network scheme this is
/// exactly `2 * half_window`.
pub fn effective_xi_width(grid: Grid, scheme: Scheme, half_window: f64) -> Result<f64> {
    let free = crate::signal::sample_signal(grid, 0.0, Polarization::Unpolarized, 0)?;
    let sp = eigenvalues(&build_operator(&free, OperatorKind::HermitianDark, scheme)?)?;
    let n = sp.eigenvalues.iter().filter(|z| z.re.abs() <= half_window).count();
    Ok(PI * n as f64 / grid.length)
}

/// Default xi half-window for eta profiles: the whole band for the network
/// scheme, the interior 70% for central differences.
pub fn default_xi_window(scheme: Scheme, dx: f64) -> f64 {
    match scheme {
        Scheme::ModifiedAblowitzLadik => scheme.band_half_width(dx),
        Scheme::CentralDifference => scheme.band_half_width(dx) * (1.0 - 2.0 * DEFAULT_EDGE_FRACTION),
    }
}

/// Marginal density of `eta` per unit eta, per unit length and per unit
/// continuum xi, counting eigenvalues with `|xi| <= xi_window` whose `eta`
/// falls in the given bins. Default bins cover `[sqrt(D/L), 3D]`.
pub fn eta_profile(spectra: &[ZsSpectrum], edges: Option<Vec<f64>>, xi_window: Option<f64>) -> Result<DosEstimate> {
    check_ensemble(spectra)?;
    let s0 = &spectra[0];
    if s0.kind != OperatorKind::NonHermitianBright {
        return validation("eta profile needs bright spectra");
    }
    let d = s0.power;
    let eta_min = (d / s0.grid.length).sqrt();
    let edges = edges.unwrap_or_else(|| uniform_edges(eta_min, 3.0 * d, DEFAULT_BINS));
    let win = xi_window.unwrap_or_else(|| default_xi_window(s0.scheme, s0.grid.dx));
    let xi_width = effective_xi_width(s0.grid, s0.scheme, win)?;
    let per: Vec<Vec<f64>> = spectra
        .iter()
        .map(|s| {
            let mut c = vec![0.0; edges.len() - 1];
            for z in &s.eigenvalues {
                if z.re.abs() <= win && z.im.abs() >= eta_min {
                    if let Some(k) = bin_of(&edges, z.im) {
                        c[k] += 1.0;
                    }
                }
            }
            c
        })
        .collect();
    let total: f64 = per.iter().flatten().sum();
    if total == 0.0 {
        return validation("no eigenvalues left in the eta window");
    }
    let norm: Vec<f64> = edges.windows(2).map(|w| (w[1] - w[0]) * s0.grid.length * xi_width).collect();
    let (counts, density, stderr) = reduce(&per, &norm);
    Ok(DosEstimate {
        axis: DosAxis::EtaProfile,
        bin_edges: edges,
        xi_edges: Vec::new(),
        counts,
        density,
        stderr,
        n_realizations: spectra.len(),
        meta: DosMeta { d, length: s0.grid.length, dx: s0.grid.dx, scheme: Some(s0.scheme), xi_width: Some(xi_width) },
        flags: Vec::new(),
    })
}

/// Relative RMS deviation of a 1D estimate from a reference curve, over
/// bins whose centers fall in `[lo, hi]`.
pub fn relative_rms(est: &DosEstimate, reference: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let mut acc = 0.0;
    let mut m = 0.0;
    for (c, d) in est.centers().iter().zip(&est.density) {
        if *c >= lo && *c <= hi {
            let r = reference(*c);
            acc += ((d - r) / r).powi(2);
            m += 1.0;
        }
    }
    (acc / m).sqrt()
}
