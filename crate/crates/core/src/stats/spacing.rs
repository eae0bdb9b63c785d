//! Nearest-neighbour level spacings and the Poisson (exponential) test.

use serde::{Deserialize, Serialize};

use super::htest::{ks_exponential, linear_fit, mean};
use crate::error::{validation, Result};
use crate::operator::ZsSpectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingHistogram {
    /// Bin edges in units of the mean spacing.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<f64>,
    /// Normalized histogram density (integrates to the captured fraction).
    pub density: Vec<f64>,
    pub n_spacings: usize,
    pub mean_spacing: f64,
    /// Maximum-likelihood exponential rate for unit-mean spacings (1 by
    /// construction up to the normalization) and its raw-unit value.
    pub rate: f64,
    pub rate_raw: f64,
    pub ks_statistic: f64,
    pub p_value: f64,
    /// R^2 of a straight line through ln(counts) over bins with at least
    /// `MIN_COUNT` entries.
    pub log_linear_r2: f64,
    pub log_slope: f64,
}

const MIN_COUNT: f64 = 10.0;

impl SpacingHistogram {
    /// `spacing,ln_density` rows for log-scale plotting.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# n_spacings={} mean_spacing={:e} rate={:e} ks={:e} p={:e} r2={:e}\nspacing,density,ln_density\n",
            self.n_spacings, self.mean_spacing, self.rate_raw, self.ks_statistic, self.p_value, self.log_linear_r2
        );
        for (w, d) in self.bin_edges.windows(2).zip(&self.density) {
            let c = 0.5 * (w[0] + w[1]);
            let ln = if *d > 0.0 { d.ln() } else { f64::NAN };
            s.push_str(&format!("{c:e},{d:e},{ln:e}\n"));
        }
        s
    }
}

/// Spacings of each sorted level sequence, pooled.
pub fn spacing_stats_from_levels(levels: &[Vec<f64>], bins: usize, s_max: f64) -> Result<SpacingHistogram> {
    let mut raw = Vec::new();
    for lv in levels {
        let mut v = lv.clone();
        v.sort_by(f64::total_cmp);
        raw.extend(v.windows(2).map(|w| w[1] - w[0]));
    }
    if raw.len() < 100 {
        return validation(format!("need at least 100 spacings, got {}", raw.len()));
    }
    let m = mean(&raw);
    if !(m > 0.0) {
        return validation("degenerate level sequence");
    }
    // Exact coincidences carry no spacing information.
    let s: Vec<f64> = raw.iter().map(|x| x / m).filter(|x| *x > 1e-12).collect();
    let rate = 1.0 / mean(&s);
    let ks = ks_exponential(&s, rate);

    let width = s_max / bins as f64;
    let mut counts = vec![0.0; bins];
    for x in &s {
        let k = (x / width) as usize;
        if k < bins {
            counts[k] += 1.0;
        }
    }
    let total = s.len() as f64;
    let density: Vec<f64> = counts.iter().map(|c| c / (total * width)).collect();
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    for (k, c) in counts.iter().enumerate() {
        if *c >= MIN_COUNT {
            xs.push((k as f64 + 0.5) * width);
            ys.push(c.ln());
            ws.push(*c);
        }
    }
    let (r2, slope) = if xs.len() >= 3 {
        // Poisson counts: var(ln c) ~ 1/c.
        let f = linear_fit(&xs, &ys, Some(&ws));
        (f.r_squared, f.slope)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(SpacingHistogram {
        bin_edges: (0..=bins).map(|k| k as f64 * width).collect(),
        counts,
        density,
        n_spacings: s.len(),
        mean_spacing: m,
        rate,
        rate_raw: rate / m,
        ks_statistic: ks.statistic,
        p_value: ks.p_value,
        log_linear_r2: r2,
        log_slope: slope,
    })
}

/// Spacing statistics over the interior of Hermitian spectra.
pub fn spacing_stats(spectra: &[ZsSpectrum], edge_fraction: f64) -> Result<SpacingHistogram> {
    let levels: Vec<Vec<f64>> = spectra.iter().map(|s| s.interior_real(edge_fraction)).collect();
    spacing_stats_from_levels(&levels, 30, 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn equally_spaced_levels_rejected() {
        let lv: Vec<Vec<f64>> = (0..5).map(|_| (0..200).map(|k| k as f64 * 0.3).collect()).collect();
        let h = spacing_stats_from_levels(&lv, 30, 6.0).unwrap();
        assert!(h.p_value < 1e-6);
    }

    #[test]
    fn uniform_levels_accepted() {
        // Poisson-process oracle: i.i.d. uniform levels have exponential gaps.
        let mut rng = crate::rng::stream(3, 0);
        let lv: Vec<Vec<f64>> = (0..20).map(|_| (0..500).map(|_| rng.random::<f64>()).collect()).collect();
        let h = spacing_stats_from_levels(&lv, 30, 6.0).unwrap();
        assert!(h.p_value > 0.01, "p={}", h.p_value);
        assert!(h.log_linear_r2 > 0.98);
        assert!((h.log_slope + 1.0).abs() < 0.1);
        assert!(h.rate > 0.0);
    }

    #[test]
    fn too_few_spacings_rejected() {
        let lv = vec![(0..50).map(|k| k as f64).collect::<Vec<f64>>()];
        assert!(spacing_stats_from_levels(&lv, 10, 5.0).is_err());
    }
}
