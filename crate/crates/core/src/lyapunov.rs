//! Growth rates of the bright transfer problem over the complex z-plane,
//! their Laplacian as a density of states, and phase counting for the dark
//! problem.
//!
//! The integrator uses the same split-step cell transfer `F(z) exp(h N_j)` as
//! the unitary-network operator, so the white-noise limit is the
//! Stratonovich one, matching the continuum operator.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{numerical, validation, Result};
use crate::network::{node_transfer, step, Mat2};
use crate::operator::{OperatorKind, Scheme};
use crate::rng;
use crate::signal::{white_sample, Polarization, SignalRealization};
use crate::stats::dos::{DosAxis, DosEstimate, DosMeta};
use crate::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    pub d: f64,
    pub dx: f64,
    /// Path length per estimate, excluding burn-in.
    pub x_max: f64,
    /// Steps between renormalizations of the 2-vector.
    pub renorm_every: usize,
    pub batches: usize,
    pub polarization: Polarization,
}

impl LyapunovConfig {
    pub fn new(d: f64, dx: f64, x_max: f64) -> Self {
        LyapunovConfig { d, dx, x_max, renorm_every: 10, batches: 20, polarization: Polarization::Unpolarized }
    }

    fn check(&self) -> Result<()> {
        if !(self.d.is_finite() && self.d >= 0.0) {
            return validation(format!("D must be non-negative, got {}", self.d));
        }
        if !(self.dx > 0.0 && self.dx.is_finite() && self.x_max.is_finite()) {
            return validation("dx and x_max must be positive and finite");
        }
        if self.batches < 2 || self.renorm_every == 0 {
            return validation("need at least 2 batches and a positive renormalization interval");
        }
        if self.x_max < self.batches as f64 * self.dx {
            return validation(format!("x_max = {} too short for {} batches", self.x_max, self.batches));
        }
        Ok(())
    }

    fn steps_per_batch(&self) -> usize {
        ((self.x_max / self.dx) / self.batches as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub z: Complex64,
    pub d: f64,
    pub lambda_hat: f64,
    pub stderr: f64,
    pub x_total: f64,
    pub renorm_interval: f64,
    /// `stderr <= 0.1 lambda_hat` and `x_total >= 100 / lambda_hat`.
    pub converged: bool,
}

/// Batch growth rates for every `z`, all driven by one noise path.
fn batch_rates(zs: &[Complex64], cfg: &LyapunovConfig, seed: u64) -> Vec<Vec<f64>> {
    let per_batch = cfg.steps_per_batch();
    let burn_in = per_batch;
    let total = burn_in + per_batch * cfg.batches;
    let h = cfg.dx;
    let sd = (cfg.d / h).sqrt();
    let mut noise = rng::stream(seed, 0);

    let phases: Vec<Complex64> = zs.iter().map(|z| (-I * z * h).exp()).collect();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = vec![[Complex64::new(s, 0.0), Complex64::new(s, 0.0)]; zs.len()];
    let mut rates = vec![vec![0.0; cfg.batches]; zs.len()];
    let mut nodes: Vec<Mat2> = Vec::with_capacity(CHUNK);

    let mut done = 0;
    while done < total {
        let m = CHUNK.min(total - done);
        nodes.clear();
        nodes.extend(
            (0..m).map(|_| node_transfer(white_sample(&mut noise, sd, cfg.polarization), h, OperatorKind::NonHermitianBright)),
        );
        for (k, (p, ph)) in psi.iter_mut().zip(&phases).enumerate() {
            for (off, node) in nodes.iter().enumerate() {
                step(p, node, *ph);
                let t = done + off + 1;
                let batch_end = t > burn_in && (t - burn_in).is_multiple_of(per_batch);
                if t % cfg.renorm_every == 0 || batch_end || t == burn_in {
                    let nr = (p[0].norm_sqr() + p[1].norm_sqr()).sqrt();
                    p[0] /= nr;
                    p[1] /= nr;
                    if t > burn_in {
                        let b = (t - burn_in - 1) / per_batch;
                        rates[k][b] += nr.ln();
                    }
                }
            }
        }
        done += m;
    }
    let xb = per_batch as f64 * h;
    for r in rates.iter_mut() {
        for v in r.iter_mut() {
            *v /= xb;
        }
    }
    rates
}

fn summarize(z: Complex64, cfg: &LyapunovConfig, rates: &[f64]) -> LyapunovEstimate {
    let b = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / b;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (b - 1.0);
    let x_total = cfg.steps_per_batch() as f64 * cfg.dx * b;
    let stderr = (var / b).sqrt();
    LyapunovEstimate {
        z,
        d: cfg.d,
        lambda_hat: mean,
        stderr,
        x_total,
        renorm_interval: cfg.renorm_every as f64 * cfg.dx,
        converged: stderr <= 0.1 * mean.abs() && x_total * mean >= 100.0,
    }
}

/// Lyapunov exponent at `z` from one long white-noise path.
pub fn lyapunov_exponent(z: Complex64, cfg: &LyapunovConfig, seed: u64) -> Result<LyapunovEstimate> {
    cfg.check()?;
    let rates = batch_rates(&[z], cfg, seed);
    Ok(summarize(z, cfg, &rates[0]))
}

/// Exponents at many points driven by the same noise path (common random
/// numbers), so differences between nearby points are far less noisy than
/// the points themselves.
pub fn lyapunov_exponents(zs: &[Complex64], cfg: &LyapunovConfig, seed: u64) -> Result<Vec<LyapunovEstimate>> {
    cfg.check()?;
    Ok(crn_rates(zs, cfg, seed).iter().zip(zs).map(|(r, z)| summarize(*z, cfg, r)).collect())
}

/// Splits the points across the rayon pool. Every task replays the same noise
/// path, so the result does not depend on the thread count.
fn crn_rates(zs: &[Complex64], cfg: &LyapunovConfig, seed: u64) -> Vec<Vec<f64>> {
    let threads = rayon::current_num_threads().max(1);
    let chunk = zs.len().div_ceil(threads).max(1);
    zs.par_chunks(chunk).flat_map_iter(|c| batch_rates(c, cfg, seed)).collect()
}

/// `lambda(xi, eta)` on a rectangular grid, stored with eta as the slow index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovGrid {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub d: f64,
    pub dx: f64,
    pub lambda: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Per-batch growth rates; batches are aligned across cells.
    pub batch_rates: Vec<Vec<f64>>,
}

impl LyapunovGrid {
    pub fn at(&self, i_xi: usize, i_eta: usize) -> f64 {
        self.lambda[i_eta * self.xi.len() + i_xi]
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# D={} dx={}\nxi,eta,lambda,stderr\n", self.d, self.dx);
        for (ie, e) in self.eta.iter().enumerate() {
            for (ix, x) in self.xi.iter().enumerate() {
                let k = ie * self.xi.len() + ix;
                s.push_str(&format!("{x:e},{e:e},{:e},{:e}\n", self.lambda[k], self.stderr[k]));
            }
        }
        s
    }
}

fn check_axis(v: &[f64], name: &str) -> Result<f64> {
    if v.len() < 3 {
        return validation(format!("{name} axis needs at least 3 points"));
    }
    let h = v[1] - v[0];
    if !(h > 0.0) || v.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return validation(format!("{name} axis must be increasing and uniformly spaced"));
    }
    Ok(h)
}

pub fn lyapunov_grid(xi: &[f64], eta: &[f64], cfg: &LyapunovConfig, seed: u64) -> Result<LyapunovGrid> {
    cfg.check()?;
    check_axis(xi, "xi")?;
    check_axis(eta, "eta")?;
    let zs: Vec<Complex64> = eta.iter().flat_map(|&e| xi.iter().map(move |&x| Complex64::new(x, e))).collect();
    let rates = crn_rates(&zs, cfg, seed);
    let est: Vec<LyapunovEstimate> = rates.iter().zip(&zs).map(|(r, z)| summarize(*z, cfg, r)).collect();
    Ok(LyapunovGrid {
        xi: xi.to_vec(),
        eta: eta.to_vec(),
        d: cfg.d,
        dx: cfg.dx,
        lambda: est.iter().map(|e| e.lambda_hat).collect(),
        stderr: est.iter().map(|e| e.stderr).collect(),
        batch_rates: rates,
    })
}

/// Largest tolerated ratio of Laplacian noise to Laplacian signal (RMS).
pub const MAX_NOISE_TO_CURVATURE: f64 = 0.5;

fn midpoint_edges(c: &[f64], h: f64) -> Vec<f64> {
    let mut e: Vec<f64> = c.iter().map(|v| v - 0.5 * h).collect();
    e.push(c[c.len() - 1] + 0.5 * h);
    e
}

/// Density `(1/2 pi) ∇² lambda` on the interior cells of the grid, by the
/// five-point stencil. Standard errors come from the spread of the per-batch
/// Laplacians. Negative estimates are clipped to zero and flagged.
pub fn thouless_dos(grid: &LyapunovGrid) -> Result<DosEstimate> {
    let hx = check_axis(&grid.xi, "xi")?;
    let he = check_axis(&grid.eta, "eta")?;
    let (nx, ne) = (grid.xi.len(), grid.eta.len());
    let nb = grid.batch_rates.first().map_or(0, |r| r.len());
    let lap = |f: &dyn Fn(usize) -> f64, ix: usize, ie: usize| {
        let k = ie * nx + ix;
        (f(k + 1) + f(k - 1) - 2.0 * f(k)) / (hx * hx) + (f(k + nx) + f(k - nx) - 2.0 * f(k)) / (he * he)
    };

    let mut density = Vec::new();
    let mut stderr = Vec::new();
    let mut negatives = 0;
    for ie in 1..ne - 1 {
        for ix in 1..nx - 1 {
            let rho = lap(&|k| grid.lambda[k], ix, ie) / (2.0 * PI);
            let per: Vec<f64> = (0..nb).map(|b| lap(&|k| grid.batch_rates[k][b], ix, ie) / (2.0 * PI)).collect();
            let m = per.iter().sum::<f64>() / nb as f64;
            let var = per.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nb as f64 - 1.0);
            stderr.push((var / nb as f64).sqrt());
            if rho < 0.0 {
                negatives += 1;
            }
            density.push(rho);
        }
    }

    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let (noise, signal) = (rms(&stderr), rms(&density));
    if noise > 1e-9 && noise > MAX_NOISE_TO_CURVATURE * signal {
        return numerical(format!(
            "Lyapunov grid too noisy for differencing: noise-to-curvature ratio {:.3} exceeds {MAX_NOISE_TO_CURVATURE}; \
             lengthen x_max or coarsen the grid",
            noise / signal
        ));
    }
    let mut flags = Vec::new();
    if negatives > 0 {
        flags.push(format!("{negatives} negative cells clipped to zero"));
    }
    for v in density.iter_mut() {
        *v = v.max(0.0);
    }
    Ok(DosEstimate {
        axis: DosAxis::XiEta2D,
        bin_edges: midpoint_edges(&grid.eta[1..ne - 1], he),
        xi_edges: midpoint_edges(&grid.xi[1..nx - 1], hx),
        counts: Vec::new(),
        density,
        stderr,
        n_realizations: 1,
        meta: DosMeta { d: grid.d, length: f64::NAN, dx: grid.dx, scheme: None, xi_width: None },
        flags,
    })
}

/// Average of a 2D density over its xi columns, giving an eta profile.
pub fn xi_average(dos: &DosEstimate) -> Result<DosEstimate> {
    if dos.axis != DosAxis::XiEta2D {
        return validation("xi_average needs a 2D density");
    }
    let nx = dos.xi_edges.len() - 1;
    let ne = dos.bin_edges.len() - 1;
    let mut density = Vec::with_capacity(ne);
    let mut stderr = Vec::with_capacity(ne);
    for ie in 0..ne {
        let row = &dos.density[ie * nx..(ie + 1) * nx];
        let se = &dos.stderr[ie * nx..(ie + 1) * nx];
        density.push(row.iter().sum::<f64>() / nx as f64);
        // Columns share the noise path, so errors are not averaged down.
        stderr.push(se.iter().sum::<f64>() / nx as f64);
    }
    Ok(DosEstimate {
        axis: DosAxis::EtaProfile,
        bin_edges: dos.bin_edges.clone(),
        xi_edges: vec![dos.xi_edges[0], dos.xi_edges[nx]],
        counts: Vec::new(),
        density,
        stderr,
        n_realizations: dos.n_realizations,
        meta: dos.meta.clone(),
        flags: dos.flags.clone(),
    })
}

/// Integrated density of states `N(lambda)` of the dark problem on one
/// realization, by following the phase `theta = arg(psi1/psi2)` across the
/// grid: `N = -(theta(L) - theta(0)) / 2 pi`. Free propagation gives
/// `N = lambda L / pi`.
pub fn phase_dos_hermitian(signal: &SignalRealization, lambdas: &[f64]) -> Result<Vec<f64>> {
    let h = signal.grid.dx;
    lambdas
        .iter()
        .map(|&lam| {
            let rot = -2.0 * lam * h;
            let mut f = Complex64::new(1.0, 0.0);
            let mut theta = 0.0;
            for (j, u) in signal.samples.iter().enumerate() {
                theta += node_phase(&mut f, *u, h, 0).ok_or_else(|| {
                    crate::Error::Numerical(format!(
                        "phase step unresolved at node {j} (x = {:.4}) even after subdivision; refine dx",
                        signal.grid.x(j)
                    ))
                })?;
                theta += rot;
                f *= Complex64::from_polar(1.0, rot);
            }
            Ok(-theta / (2.0 * PI))
        })
        .collect()
}

const MAX_SPLIT_DEPTH: u32 = 20;

/// Lifted phase change of `f` across one dark node. A node that would turn
/// `f` by more than pi/2 is applied as two half-width nodes, which compose
/// exactly. `None` when the subdivision depth runs out.
fn node_phase(f: &mut Complex64, u: Complex64, h: f64, depth: u32) -> Option<f64> {
    let m = node_transfer(u, h, OperatorKind::HermitianDark);
    let g = (m[0][0] * *f + m[0][1]) / (m[1][0] * *f + m[1][1]);
    let dth = (g / *f).arg();
    if dth.abs() <= PI / 2.0 {
        *f = g / g.norm();
        return Some(dth);
    }
    if depth >= MAX_SPLIT_DEPTH {
        return None;
    }
    let a = node_phase(f, u, 0.5 * h, depth + 1)?;
    let b = node_phase(f, u, 0.5 * h, depth + 1)?;
    Some(a + b)
}

/// Differences `N(lambda)` into a density per unit lambda per unit length at
/// the interval midpoints.
pub fn phase_density(lambdas: &[f64], counts: &[f64], length: f64) -> Vec<(f64, f64)> {
    lambdas
        .windows(2)
        .zip(counts.windows(2))
        .map(|(l, n)| (0.5 * (l[0] + l[1]), (n[1] - n[0]) / ((l[1] - l[0]) * length)))
        .collect()
}

/// Scheme whose free spectrum the phase count reproduces.
pub const PHASE_COUNT_SCHEME: Scheme = Scheme::ModifiedAblowitzLadik;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_operator, eigenvalues};
    use crate::signal::{make_grid, sample_signal};

    /// Independent closed form for the unpolarized exponent, obtained by
    /// integrating the exact density twice in eta.
    fn oracle(eta: f64, d: f64) -> f64 {
        let y = 2.0 * eta.abs() / d;
        if y < 1e-6 {
            return 0.0;
        }
        eta.abs() / y.tanh() - d / 2.0
    }

    #[test]
    fn free_growth_is_abs_eta() {
        let cfg = LyapunovConfig::new(0.0, 0.05, 500.0);
        for z in [Complex64::new(0.3, 0.8), Complex64::new(-1.0, -0.4), Complex64::new(2.0, 2.5)] {
            let e = lyapunov_exponent(z, &cfg, 1).unwrap();
            assert!((e.lambda_hat - z.im.abs()).abs() < 1e-10, "{z}: {}", e.lambda_hat);
        }
    }

    #[test]
    fn matches_closed_form() {
        let cfg = LyapunovConfig::new(1.0, 0.05, 20000.0);
        let zs: Vec<Complex64> = [0.3, 0.5, 1.0, 2.0].iter().map(|&e| Complex64::new(0.2, e)).collect();
        for e in lyapunov_exponents(&zs, &cfg, 3).unwrap() {
            let want = oracle(e.z.im, 1.0);
            assert!((e.lambda_hat / want - 1.0).abs() < 0.05, "{}: {} vs {want}", e.z, e.lambda_hat);
            assert!(e.stderr < 0.05 * want);
        }
    }

    #[test]
    fn small_eta_localization_law() {
        // 1/lambda grows as 3D/(2 eta^2).
        let cfg = LyapunovConfig::new(1.0, 0.05, 200000.0);
        let e = lyapunov_exponent(Complex64::new(0.3, 0.1), &cfg, 11).unwrap();
        let law = 2.0 * 0.1f64.powi(2) / 3.0;
        assert!((e.lambda_hat / law - 1.0).abs() < 0.15, "{} ± {}", e.lambda_hat, e.stderr);
    }

    #[test]
    fn conjugation_and_xi_invariance() {
        let cfg = LyapunovConfig::new(1.0, 0.05, 20000.0);
        let a = lyapunov_exponent(Complex64::new(0.5, 0.7), &cfg, 21).unwrap();
        let b = lyapunov_exponent(Complex64::new(0.5, -0.7), &cfg, 22).unwrap();
        let c = lyapunov_exponent(Complex64::new(-1.5, 0.7), &cfg, 23).unwrap();
        let tol = |p: &LyapunovEstimate, q: &LyapunovEstimate| 3.0 * (p.stderr.powi(2) + q.stderr.powi(2)).sqrt();
        assert!((a.lambda_hat - b.lambda_hat).abs() < tol(&a, &b));
        assert!((a.lambda_hat - c.lambda_hat).abs() < tol(&a, &c));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let cfg = LyapunovConfig::new(1.0, 0.1, 500.0);
        let zs: Vec<Complex64> = (0..7).map(|k| Complex64::new(0.1 * k as f64, 0.5)).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| lyapunov_exponents(&zs, &cfg, 5).unwrap());
        let b = three.install(|| lyapunov_exponents(&zs, &cfg, 5).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn free_thouless_density_vanishes_off_axis() {
        let cfg = LyapunovConfig::new(0.0, 0.05, 400.0);
        let xi: Vec<f64> = (0..5).map(|k| -1.0 + 0.5 * k as f64).collect();
        let eta: Vec<f64> = (0..6).map(|k| 0.2 + 0.2 * k as f64).collect();
        let g = lyapunov_grid(&xi, &eta, &cfg, 0).unwrap();
        let dos = thouless_dos(&g).unwrap();
        assert!(dos.density.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn thouless_profile_tracks_exact_density() {
        let cfg = LyapunovConfig::new(1.0, 0.05, 40000.0);
        let xi = [-0.15, 0.0, 0.15];
        let eta: Vec<f64> = (0..8).map(|k| 0.3 + 0.15 * k as f64).collect();
        let g = lyapunov_grid(&xi, &eta, &cfg, 9).unwrap();
        let prof = xi_average(&thouless_dos(&g).unwrap()).unwrap();
        for (c, v) in prof.centers().iter().zip(&prof.density) {
            let want = crate::stats::analytic::analytic_dos_bright(*c, 1.0);
            assert!((v / want - 1.0).abs() < 0.35, "eta {c}: {v} vs {want}");
        }
    }

    #[test]
    fn noisy_grid_is_rejected() {
        let cfg = LyapunovConfig::new(1.0, 0.1, 20.0);
        let xi = [-0.02, 0.0, 0.02];
        let eta = [1.0, 1.02, 1.04];
        let g = lyapunov_grid(&xi, &eta, &cfg, 1).unwrap();
        assert!(matches!(thouless_dos(&g), Err(crate::Error::Numerical(_))));
    }

    #[test]
    fn free_phase_count_matches_operator() {
        let grid = make_grid(20.0, 0.1).unwrap();
        let s = sample_signal(grid, 0.0, Polarization::Unpolarized, 0).unwrap();
        let lams = [0.0, 1.0, 2.0, 3.0];
        let n = phase_dos_hermitian(&s, &lams).unwrap();
        let op = build_operator(&s, OperatorKind::HermitianDark, PHASE_COUNT_SCHEME).unwrap();
        let ev = eigenvalues(&op).unwrap();
        let count = |a: f64, b: f64| ev.eigenvalues.iter().filter(|z| z.re > a && z.re <= b).count() as f64;
        let slope = (n[3] - n[0]) / 3.0;
        assert!((slope - 20.0 / PI).abs() < 1e-9);
        // The ring has two levels per 2 pi / L, i.e. L/pi per unit lambda.
        assert!((count(-3.0, 3.0) / 6.0 - slope).abs() < 0.5);
    }

    #[test]
    fn phase_count_is_monotone_and_flat() {
        let grid = make_grid(100.0, 0.1).unwrap();
        let lams: Vec<f64> = (0..=8).map(|k| -4.0 + k as f64).collect();
        let mut dens = vec![0.0; lams.len() - 1];
        let runs = 40;
        for seed in 0..runs {
            let s = sample_signal(grid, 1.0, Polarization::Unpolarized, seed).unwrap();
            let n = phase_dos_hermitian(&s, &lams).unwrap();
            assert!(n.windows(2).all(|w| w[1] >= w[0]));
            for (acc, (_, v)) in dens.iter_mut().zip(phase_density(&lams, &n, 100.0)) {
                *acc += v / runs as f64;
            }
        }
        let (lo, hi) = dens.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 1.1, "{dens:?}");
    }
}
