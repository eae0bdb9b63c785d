//! Inverse participation ratio of eigenvectors.

use serde::{Deserialize, Serialize};

use super::htest::mean;
use crate::error::{validation, Result};
use crate::operator::ZsSpectrum;
use crate::signal::Grid;
use crate::Complex64;

/// `sum (|psi1|^2 + |psi2|^2)^2 dx` for a vector laid out as
/// `[psi1.., psi2..]` with `sum |psi|^2 dx = 1`.
pub fn ipr(eigvec: &[Complex64], grid: Grid) -> Result<f64> {
    let n = grid.n;
    if eigvec.len() != 2 * n {
        return validation(format!("eigenvector length {} does not match 2n = {}", eigvec.len(), 2 * n));
    }
    let norm: f64 = eigvec.iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.dx;
    if (norm - 1.0).abs() > 1e-6 {
        return validation(format!("eigenvector not normalized: sum |psi|^2 dx = {norm}"));
    }
    Ok((0..n).map(|k| (eigvec[k].norm_sqr() + eigvec[n + k].norm_sqr()).powi(2)).sum::<f64>() * grid.dx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IprCurve {
    pub centers: Vec<f64>,
    pub mean_ipr: Vec<f64>,
    pub stderr: Vec<f64>,
    pub counts: Vec<usize>,
    /// Window center lies in the excluded edge region.
    pub edge: Vec<bool>,
    pub window: f64,
}

impl IprCurve {
    /// Average over the non-edge windows.
    pub fn mid_band_mean(&self) -> f64 {
        let v: Vec<f64> = self
            .mean_ipr
            .iter()
            .zip(&self.edge)
            .filter(|(m, e)| !**e && m.is_finite())
            .map(|(m, _)| *m)
            .collect();
        mean(&v)
    }

    /// Largest relative deviation from the mid-band mean over non-edge windows.
    pub fn mid_band_variation(&self) -> f64 {
        let m = self.mid_band_mean();
        self.mean_ipr
            .iter()
            .zip(&self.edge)
            .filter(|(v, e)| !**e && v.is_finite())
            .map(|(v, _)| ((v - m) / m).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# window={:e}\nlambda,ipr,stderr,count,edge\n", self.window);
        for k in 0..self.centers.len() {
            s.push_str(&format!(
                "{:e},{:e},{:e},{},{}\n",
                self.centers[k], self.mean_ipr[k], self.stderr[k], self.counts[k], self.edge[k] as u8
            ));
        }
        s
    }
}

/// Flat-kernel local average of IPR against lambda. `window_fraction` is the
/// window width as a fraction of the band width; `points` window centers span
/// the band and those within `edge_fraction` of either end are flagged.
pub fn ipr_vs_lambda(
    spectra: &[ZsSpectrum],
    window_fraction: f64,
    edge_fraction: f64,
    points: usize,
) -> Result<IprCurve> {
    if spectra.is_empty() || spectra.iter().any(|s| !s.has_vectors()) {
        return validation("IPR curve needs spectra with eigenvectors");
    }
    let grid = spectra[0].grid;
    let b = spectra[0].scheme.band_half_width(grid.dx);
    let window = 2.0 * b * window_fraction;
    if !(window > 0.0) || window > 2.0 * b {
        return validation(format!("IPR window {window} wider than the spectrum"));
    }
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for s in spectra {
        for i in 0..s.len() {
            pts.push((s.eigenvalues[i].re, ipr(&s.eigenvectors[i], grid)?));
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lim = b * (1.0 - 2.0 * edge_fraction);
    let mut curve = IprCurve {
        centers: Vec::new(),
        mean_ipr: Vec::new(),
        stderr: Vec::new(),
        counts: Vec::new(),
        edge: Vec::new(),
        window,
    };
    for k in 0..points {
        let c = -b + 2.0 * b * (k as f64 + 0.5) / points as f64;
        let lo = pts.partition_point(|p| p.0 < c - 0.5 * window);
        let hi = pts.partition_point(|p| p.0 < c + 0.5 * window);
        let v: Vec<f64> = pts[lo..hi].iter().map(|p| p.1).collect();
        let (m, se) = match v.len() {
            0 => (f64::NAN, f64::NAN),
            1 => (v[0], f64::NAN),
            _ => (mean(&v), super::htest::stderr_of_mean(&v)),
        };
        curve.centers.push(c);
        curve.mean_ipr.push(m);
        curve.stderr.push(se);
        curve.counts.push(v.len());
        curve.edge.push(c.abs() > lim);
    }
    Ok(curve)
}

/// Mean IPR of eigenvectors with real eigenvalue inside the interior band,
/// with the standard error from the per-realization means.
pub fn mid_band_ipr(spectra: &[ZsSpectrum], edge_fraction: f64) -> Result<(f64, f64)> {
    let mut per = Vec::new();
    for s in spectra {
        if !s.has_vectors() {
            return validation("IPR needs eigenvectors");
        }
        let lim = s.scheme.band_half_width(s.grid.dx) * (1.0 - 2.0 * edge_fraction);
        let mut v = Vec::new();
        for i in 0..s.len() {
            if s.eigenvalues[i].re.abs() <= lim {
                v.push(ipr(&s.eigenvectors[i], s.grid)?);
            }
        }
        if !v.is_empty() {
            per.push(mean(&v));
        }
    }
    if per.is_empty() {
        return validation("no interior eigenvectors");
    }
    let se = if per.len() > 1 { super::htest::stderr_of_mean(&per) } else { f64::NAN };
    Ok((mean(&per), se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_operator, eigensolve, OperatorKind, Scheme};
    use crate::signal::{make_grid, optimal_potential};
    use quadrature::double_exponential;
    use std::f64::consts::PI;

    #[test]
    fn trivial_vectors() {
        let g = make_grid(10.0, 0.1).unwrap();
        let n = g.n;
        // Spread evenly over both components.
        let a = (1.0 / (2.0 * g.length)).sqrt();
        let v = vec![Complex64::new(a, 0.0); 2 * n];
        assert!((ipr(&v, g).unwrap() - 1.0 / g.length).abs() < 1e-12);
        let mut w = vec![Complex64::new(0.0, 0.0); 2 * n];
        w[17] = Complex64::new(0.0, (1.0 / g.dx).sqrt());
        assert!((ipr(&w, g).unwrap() - 1.0 / g.dx).abs() < 1e-9);
        assert!(ipr(&vec![Complex64::new(1.0, 0.0); 2 * n], g).is_err());
    }

    #[test]
    fn bound_state_ipr_matches_quadrature() {
        // Bound state of 2i sech(2x): psi ∝ (e^{-x}, e^{x}) sech(2x) / 2, so the
        // normalized density is (2/pi) sech(2x).
        let dens = |x: f64| 2.0 / PI / (2.0 * x).cosh();
        let norm = 2.0 * double_exponential::integrate(dens, 0.0, 30.0, 1e-12).integral;
        assert!((norm - 1.0).abs() < 1e-10);
        let exact = 2.0 * double_exponential::integrate(|x| dens(x).powi(2), 0.0, 30.0, 1e-12).integral;
        assert!((exact - 4.0 / (PI * PI)).abs() < 1e-10);
        let g = make_grid(30.0, 0.05).unwrap();
        let s = optimal_potential(0.0, 1.0, g).unwrap();
        // Central differences double the bound state (zone-edge partner), and the
        // solver returns an arbitrary mixture of the pair, so only MAL is checked.
        {
            let scheme = Scheme::ModifiedAblowitzLadik;
            let sp = eigensolve(&build_operator(&s, OperatorKind::NonHermitianBright, scheme).unwrap()).unwrap();
            let k = (0..sp.len())
                .min_by(|&a, &b| {
                    (sp.eigenvalues[a] - Complex64::new(0.0, 1.0))
                        .norm()
                        .total_cmp(&(sp.eigenvalues[b] - Complex64::new(0.0, 1.0)).norm())
                })
                .unwrap();
            let v = ipr(&sp.eigenvectors[k], g).unwrap();
            assert!((v / exact - 1.0).abs() < 0.01, "{scheme:?}: {v}");
        }
        let cd = eigensolve(&build_operator(&s, OperatorKind::NonHermitianBright, Scheme::CentralDifference).unwrap()).unwrap();
        let near = cd.eigenvalues.iter().filter(|z| (**z - Complex64::new(0.0, 1.0)).norm() < 0.01).count();
        assert_eq!(near, 2);
    }
}
