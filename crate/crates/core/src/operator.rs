//! Discretized Zakharov-Shabat operators and their eigensystems.
//!
//! Two schemes are available.
//!
//! `CentralDifference` assembles the dense `2n x 2n` matrix
//! `[[i Dc, u*], [u, -i Dc]]` (dark) or `[[i Dc, u*], [-u, -i Dc]]` (bright)
//! with `(Dc psi)_j = (psi_{j+1} - psi_{j-1}) / 2h` and the grid edges cut off,
//! i.e. zero boundary values. It carries the usual fermion doublers and a
//! non-uniform free density of states near the band edges.
//!
//! `ModifiedAblowitzLadik` is a unitary split-step network: every sample is a
//! scattering node (see [`crate::network`]), right movers hop one node to the
//! right and left movers one node to the left per time step. The one-step
//! propagator `W` is bipartite on a ring with an even number of nodes, so the
//! spectrum is read off `W^2` restricted to the even nodes, an `n x n` matrix
//! whose eigenvalues are `exp(2 i z h)`. The free spectrum is exactly uniform
//! and there are no doublers; `xi` lives in `(-pi/2h, pi/2h]`.

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{numerical, validation, Error, Result};
use crate::network::{node_scattering, node_transfer, Mat2};
use crate::signal::{Grid, SignalRealization};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    HermitianDark,
    NonHermitianBright,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    CentralDifference,
    ModifiedAblowitzLadik,
}

impl Scheme {
    /// Half-width of the real-axis band covered by the free spectrum.
    pub fn band_half_width(self, dx: f64) -> f64 {
        match self {
            Scheme::CentralDifference => 1.0 / dx,
            Scheme::ModifiedAblowitzLadik => std::f64::consts::FRAC_PI_2 / dx,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "cd" | "centraldifference" => Ok(Scheme::CentralDifference),
            "mal" | "al" | "modifiedablowitzladik" => Ok(Scheme::ModifiedAblowitzLadik),
            other => validation(format!("unknown scheme '{other}'")),
        }
    }
}

/// Assembled operator. For the network scheme `matrix` is the even-node
/// two-step propagator, not a differential operator.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub scheme: Scheme,
    pub matrix: Mat<Complex64>,
    pub grid: Grid,
    pub source_signal_seed: u64,
    pub power: f64,
    nodes: Vec<Mat2>,
}

pub fn build_operator(signal: &SignalRealization, kind: OperatorKind, scheme: Scheme) -> Result<OperatorMatrix> {
    let n = signal.grid.n;
    if n < 4 {
        return validation(format!("operator needs at least 4 grid points, got {n}"));
    }
    if signal.samples.iter().any(|u| !(u.re.is_finite() && u.im.is_finite())) {
        return validation("signal contains non-finite samples");
    }
    let h = signal.grid.dx;
    let (matrix, nodes) = match scheme {
        Scheme::CentralDifference => (central_difference(&signal.samples, h, kind), Vec::new()),
        Scheme::ModifiedAblowitzLadik => {
            if !n.is_multiple_of(2) {
                return Err(Error::Config(format!(
                    "the network scheme needs an even number of grid points, got {n}"
                )));
            }
            let mut nodes = Vec::with_capacity(n);
            for (j, &u) in signal.samples.iter().enumerate() {
                let s = node_scattering(&node_transfer(u, h, kind))
                    .ok_or_else(|| Error::Numerical(format!("singular network node at sample {j} (u={u})")))?;
                nodes.push(s);
            }
            (two_step_propagator(&nodes), nodes)
        }
    };
    Ok(OperatorMatrix {
        kind,
        scheme,
        matrix,
        grid: signal.grid,
        source_signal_seed: signal.seed,
        power: signal.power,
        nodes,
    })
}

fn central_difference(u: &[Complex64], h: f64, kind: OperatorKind) -> Mat<Complex64> {
    let n = u.len();
    let c = 1.0 / (2.0 * h);
    let sign = match kind {
        OperatorKind::HermitianDark => 1.0,
        OperatorKind::NonHermitianBright => -1.0,
    };
    let mut m = Mat::<Complex64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        if j + 1 < n {
            m[(j, j + 1)] = I * c;
            m[(n + j, n + j + 1)] = -I * c;
        }
        if j > 0 {
            m[(j, j - 1)] = -I * c;
            m[(n + j, n + j - 1)] = I * c;
        }
        m[(j, n + j)] = u[j].conj();
        m[(n + j, j)] = u[j] * sign;
    }
    m
}

// Even node j = 2p carries (a_j, b_j) at indices (2p, 2p+1).
fn two_step_propagator(s: &[Mat2]) -> Mat<Complex64> {
    let n = s.len();
    let mut p = Mat::<Complex64>::zeros(n, n);
    let idx = |node: usize, ch: usize| 2 * (node / 2) + ch;
    for j in (0..n).step_by(2) {
        let next = (j + 1) % n;
        let prev = (j + n - 1) % n;
        let next2 = (j + 2) % n;
        let prev2 = (j + n - 2) % n;
        for (col_ch, col) in [(0usize, 0usize), (1, 1)] {
            let src = idx(j, col_ch);
            // a_{j+1} and b_{j-1} after one step.
            let alpha = s[j][0][col];
            let beta = s[j][1][col];
            p[(idx(next2, 0), src)] += s[next][0][0] * alpha;
            p[(idx(j, 1), src)] += s[next][1][0] * alpha;
            p[(idx(j, 0), src)] += s[prev][0][1] * beta;
            p[(idx(prev2, 1), src)] += s[prev][1][1] * beta;
        }
    }
    p
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Hermitian check. For the difference scheme this is
    /// `|U - U^H|_F / |U|_F`; for the network it is the unitarity defect
    /// `|P^H P - 1|_F / sqrt(n)`, which vanishes exactly when the generator
    /// `-i ln(P) / 2h` is Hermitian.
    pub fn hermiticity_residual(&self) -> f64 {
        let m = &self.matrix;
        let d = m.nrows();
        match self.scheme {
            Scheme::CentralDifference => {
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        num += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
                        den += m[(i, j)].norm_sqr();
                    }
                }
                (num / den.max(1e-300)).sqrt()
            }
            Scheme::ModifiedAblowitzLadik => {
                let g = m.adjoint() * m;
                let mut num = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let e = if i == j { g[(i, j)] - 1.0 } else { g[(i, j)] };
                        num += e.norm_sqr();
                    }
                }
                (num / d as f64).sqrt()
            }
        }
    }

    /// `|U U^H - U^H U|_F`.
    pub fn non_normality(&self) -> f64 {
        let m = &self.matrix;
        let a = m * m.adjoint();
        let b = m.adjoint() * m;
        let d = m.nrows();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += (a[(i, j)] - b[(i, j)]).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// Maps raw matrix eigenvalues to spectral parameters z.
    fn to_z(&self, mu: Complex64) -> Complex64 {
        match self.scheme {
            Scheme::CentralDifference => mu,
            Scheme::ModifiedAblowitzLadik => Complex64::new(mu.arg(), -mu.norm().ln()) / (2.0 * self.grid.dx),
        }
    }

    /// Sum of raw matrix eigenvalues recovered from spectral parameters, for
    /// comparison with [`OperatorMatrix::trace`].
    pub fn raw_eigenvalue_sum(&self, spectrum: &ZsSpectrum) -> Complex64 {
        match self.scheme {
            Scheme::CentralDifference => spectrum.eigenvalues.iter().sum(),
            Scheme::ModifiedAblowitzLadik => spectrum
                .eigenvalues
                .iter()
                .map(|z| (I * z * (2.0 * self.grid.dx)).exp())
                .sum(),
        }
    }
}

/// Eigenvalues (and optionally eigenvectors) of one operator realization.
///
/// Eigenvectors are stored as `[psi1_0..psi1_{n-1}, psi2_0..psi2_{n-1}]`,
/// normalized to `sum |psi|^2 dx = 1`. `norms` holds the L2 norm of the raw
/// solver vector in the same measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZsSpectrum {
    pub kind: OperatorKind,
    pub scheme: Scheme,
    pub grid: Grid,
    pub power: f64,
    pub seed: u64,
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub norms: Vec<f64>,
    /// Largest relative residual `|U psi - mu psi| / |psi|` when vectors were
    /// computed.
    pub max_residual: Option<f64>,
}

impl ZsSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn has_vectors(&self) -> bool {
        !self.eigenvectors.is_empty()
    }

    pub fn psi1(&self, i: usize) -> &[Complex64] {
        &self.eigenvectors[i][..self.grid.n]
    }

    pub fn psi2(&self, i: usize) -> &[Complex64] {
        &self.eigenvectors[i][self.grid.n..]
    }

    /// Bilinear norm `sum psi1 psi2 dx` of the stored vector.
    pub fn bilinear(&self, i: usize) -> Complex64 {
        self.psi1(i).iter().zip(self.psi2(i)).map(|(a, b)| a * b).sum::<Complex64>() * self.grid.dx
    }

    /// Real eigenvalues inside the central part of the band, dropping a
    /// fraction `edge` of the band width at each end.
    pub fn interior_real(&self, edge: f64) -> Vec<f64> {
        let b = self.scheme.band_half_width(self.grid.dx);
        let lim = b * (1.0 - 2.0 * edge);
        let mut v: Vec<f64> = self.eigenvalues.iter().map(|z| z.re).filter(|x| x.abs() <= lim).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

fn sort_key(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn use_sequential_kernels() {
    // Dense kernels run single-threaded so results never depend on the thread
    // count; parallelism lives at the ensemble level.
    faer::set_global_parallelism(faer::Par::Seq);
}

/// Eigenvalues only.
pub fn eigenvalues(op: &OperatorMatrix) -> Result<ZsSpectrum> {
    use_sequential_kernels();
    let raw: Vec<Complex64> = match (op.scheme, op.kind) {
        (Scheme::CentralDifference, OperatorKind::HermitianDark) => op
            .matrix
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed ({e:?}) for {}", describe(op))))?
            .into_iter()
            .map(|x| Complex64::new(x, 0.0))
            .collect(),
        _ => op
            .matrix
            .eigenvalues()
            .map_err(|e| Error::Numerical(format!("eigensolver failed ({e:?}) for {}", describe(op))))?,
    };
    let mut z: Vec<Complex64> = raw.into_iter().map(|m| op.to_z(m)).collect();
    z.sort_by(sort_key);
    Ok(ZsSpectrum {
        kind: op.kind,
        scheme: op.scheme,
        grid: op.grid,
        power: op.power,
        seed: op.source_signal_seed,
        eigenvalues: z,
        eigenvectors: Vec::new(),
        norms: Vec::new(),
        max_residual: None,
    })
}

/// Full eigensystem with residual check (`< 1e-8` relative per pair).
pub fn eigensolve(op: &OperatorMatrix) -> Result<ZsSpectrum> {
    use_sequential_kernels();
    let d = op.dim();
    let (mu, vecs): (Vec<Complex64>, Mat<Complex64>) = match (op.scheme, op.kind) {
        (Scheme::CentralDifference, OperatorKind::HermitianDark) => {
            let evd = op
                .matrix
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed ({e:?}) for {}", describe(op))))?;
            let s = evd.S().column_vector();
            ((0..d).map(|i| Complex64::new(s[i].re, 0.0)).collect(), evd.U().to_owned())
        }
        _ => {
            let evd = op
                .matrix
                .eigen()
                .map_err(|e| Error::Numerical(format!("eigensolver failed ({e:?}) for {}", describe(op))))?;
            let s = evd.S().column_vector();
            ((0..d).map(|i| s[i]).collect(), evd.U().to_owned())
        }
    };

    let mut max_res = 0.0f64;
    let prod = &op.matrix * &vecs;
    for k in 0..d {
        let mut r = 0.0;
        let mut nv = 0.0;
        for i in 0..d {
            r += (prod[(i, k)] - mu[k] * vecs[(i, k)]).norm_sqr();
            nv += vecs[(i, k)].norm_sqr();
        }
        max_res = max_res.max((r / nv).sqrt());
    }
    if !(max_res < 1e-8) {
        return numerical(format!("eigenpair residual {max_res:e} exceeds 1e-8 for {}", describe(op)));
    }

    let n = op.grid.n;
    let dx = op.grid.dx;
    let mut pairs: Vec<(Complex64, Vec<Complex64>, f64)> = (0..d)
        .map(|k| {
            let z = op.to_z(mu[k]);
            let mut v: Vec<Complex64> = match op.scheme {
                Scheme::CentralDifference => (0..d).map(|i| vecs[(i, k)]).collect(),
                Scheme::ModifiedAblowitzLadik => {
                    let e: Vec<Complex64> = (0..d).map(|i| vecs[(i, k)]).collect();
                    network_field(&op.nodes, &e, mu[k], n)
                }
            };
            let norm = (v.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx).sqrt();
            for c in v.iter_mut() {
                *c /= norm;
            }
            (z, v, norm)
        })
        .collect();
    pairs.sort_by(|a, b| sort_key(&a.0, &b.0));
    let mut eigenvalues = Vec::with_capacity(d);
    let mut eigenvectors = Vec::with_capacity(d);
    let mut norms = Vec::with_capacity(d);
    for (z, v, nrm) in pairs {
        eigenvalues.push(z);
        eigenvectors.push(v);
        norms.push(nrm);
    }
    Ok(ZsSpectrum {
        kind: op.kind,
        scheme: op.scheme,
        grid: op.grid,
        power: op.power,
        seed: op.source_signal_seed,
        eigenvalues,
        eigenvectors,
        norms,
        max_residual: Some(max_res),
    })
}

/// Reconstructs `(psi1, psi2)` on every node from an even-node eigenvector
/// of the two-step propagator. The field just left of node j is
/// `(a_j, S21 a_j + S22 b_j)`; the stored value is that field carried to the
/// middle of the node.
fn network_field(s: &[Mat2], even: &[Complex64], mu: Complex64, n: usize) -> Vec<Complex64> {
    let w = mu.sqrt();
    let mut a = vec![ZERO; n];
    let mut b = vec![ZERO; n];
    for j in (0..n).step_by(2) {
        a[j] = even[2 * (j / 2)];
        b[j] = even[2 * (j / 2) + 1];
    }
    for j in (0..n).step_by(2) {
        let next = (j + 1) % n;
        let prev = (j + n - 1) % n;
        a[next] = (s[j][0][0] * a[j] + s[j][0][1] * b[j]) / w;
        b[prev] = (s[j][1][0] * a[j] + s[j][1][1] * b[j]) / w;
    }
    let mut v = vec![ZERO; 2 * n];
    for j in 0..n {
        let left = [a[j], s[j][1][0] * a[j] + s[j][1][1] * b[j]];
        let mid = half_node(&s[j]);
        v[j] = mid[0][0] * left[0] + mid[0][1] * left[1];
        v[n + j] = mid[1][0] * left[0] + mid[1][1] * left[1];
    }
    v
}

/// `sqrt(M)` of the node transfer recovered from its scattering matrix, via
/// `sqrt(M) = (M + 1) / sqrt(tr M + 2)` for unit determinant.
fn half_node(s: &Mat2) -> Mat2 {
    let r = 1.0 / s[1][1];
    let m12 = s[0][1] * r;
    let m21 = -s[1][0] * r;
    let m11 = s[0][0] - s[0][1] * s[1][0] * r;
    let c = 1.0 / (m11 + r + 2.0).sqrt();
    [[(m11 + 1.0) * c, m12 * c], [m21 * c, (r + 1.0) * c]]
}

fn describe(op: &OperatorMatrix) -> String {
    format!(
        "{:?}/{:?} operator, dim {}, L={}, dx={}, D={}, seed={}",
        op.kind,
        op.scheme,
        op.dim(),
        op.grid.length,
        op.grid.dx,
        op.power,
        op.source_signal_seed
    )
}

/// Keeps eigenpairs with `Im z > eta_min`, i.e. one member of every conjugate
/// pair of discrete modes.
pub fn discrete_mode_filter(spectrum: &ZsSpectrum, eta_min: f64) -> ZsSpectrum {
    let keep: Vec<usize> = (0..spectrum.len()).filter(|&i| spectrum.eigenvalues[i].im > eta_min).collect();
    ZsSpectrum {
        eigenvalues: keep.iter().map(|&i| spectrum.eigenvalues[i]).collect(),
        eigenvectors: if spectrum.has_vectors() {
            keep.iter().map(|&i| spectrum.eigenvectors[i].clone()).collect()
        } else {
            Vec::new()
        },
        norms: if spectrum.norms.is_empty() { Vec::new() } else { keep.iter().map(|&i| spectrum.norms[i]).collect() },
        ..spectrum.clone()
    }
}

/// Largest distance from an eigenvalue with `Im z > tol` to the nearest
/// conjugate of another eigenvalue.
pub fn conjugation_defect(spectrum: &ZsSpectrum, tol: f64) -> f64 {
    let z = &spectrum.eigenvalues;
    let mut worst = 0.0f64;
    for a in z.iter().filter(|a| a.im > tol) {
        let best = z.iter().map(|b| (b.conj() - a).norm()).fold(f64::INFINITY, f64::min);
        worst = worst.max(best);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{make_grid, optimal_potential, sample_signal, Polarization};

    fn gaussian(l: f64, dx: f64, d: f64, seed: u64) -> SignalRealization {
        sample_signal(make_grid(l, dx).unwrap(), d, Polarization::Unpolarized, seed).unwrap()
    }

    #[test]
    fn free_difference_operator_spectrum_is_symmetric() {
        let s = gaussian(10.0, 0.1, 0.0, 1);
        let op = build_operator(&s, OperatorKind::HermitianDark, Scheme::CentralDifference).unwrap();
        let sp = eigenvalues(&op).unwrap();
        let v: Vec<f64> = sp.eigenvalues.iter().map(|z| z.re).collect();
        for (a, b) in v.iter().zip(v.iter().rev()) {
            assert!((a + b).abs() < 1e-10);
        }
    }

    #[test]
    fn free_network_spectrum_is_uniform() {
        // Ring of n nodes: exp(2 i z h) runs over the n-th roots of unity.
        let s = gaussian(10.0, 0.1, 0.0, 1);
        let op = build_operator(&s, OperatorKind::HermitianDark, Scheme::ModifiedAblowitzLadik).unwrap();
        let sp = eigenvalues(&op).unwrap();
        let step = std::f64::consts::PI / 10.0;
        for z in &sp.eigenvalues {
            assert!(z.im.abs() < 1e-10);
            let m = z.re / step;
            assert!((m - m.round()).abs() < 1e-9, "{z}");
        }
        assert_eq!(sp.len(), 100);
    }

    #[test]
    fn hermitian_checks_pass() {
        let s = gaussian(20.0, 0.1, 1.0, 3);
        for scheme in [Scheme::CentralDifference, Scheme::ModifiedAblowitzLadik] {
            let op = build_operator(&s, OperatorKind::HermitianDark, scheme).unwrap();
            assert!(op.hermiticity_residual() < 1e-12, "{scheme:?}");
            let sp = eigensolve(&op).unwrap();
            let radius = sp.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(sp.eigenvalues.iter().all(|z| z.im.abs() < 1e-8 * radius));
            assert_eq!(sp.eigenvectors.len(), op.dim());
        }
    }

    #[test]
    fn bright_difference_operator_is_non_normal() {
        let s = gaussian(10.0, 0.1, 1.0, 4);
        let op = build_operator(&s, OperatorKind::NonHermitianBright, Scheme::CentralDifference).unwrap();
        assert!(op.non_normality() > 1e-3);
    }

    #[test]
    fn free_bright_spectrum_is_real() {
        let s = gaussian(10.0, 0.1, 0.0, 4);
        for scheme in [Scheme::CentralDifference, Scheme::ModifiedAblowitzLadik] {
            let op = build_operator(&s, OperatorKind::NonHermitianBright, scheme).unwrap();
            let sp = eigenvalues(&op).unwrap();
            assert!(sp.eigenvalues.iter().all(|z| z.im.abs() < 1e-8), "{scheme:?}");
            assert!(discrete_mode_filter(&sp, 0.01).is_empty());
        }
    }

    #[test]
    fn optimal_potential_bound_state() {
        let g = make_grid(40.0, 0.05).unwrap();
        for scheme in [Scheme::ModifiedAblowitzLadik, Scheme::CentralDifference] {
            let s = optimal_potential(0.5, 1.0, g).unwrap();
            let op = build_operator(&s, OperatorKind::NonHermitianBright, scheme).unwrap();
            let sp = eigenvalues(&op).unwrap();
            let target = Complex64::new(0.5, 1.0);
            let best = sp.eigenvalues.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 5.0 * g.dx, "{scheme:?}: {best}");
        }
    }

    #[test]
    fn conjugation_symmetry_and_trace() {
        let s = gaussian(20.0, 0.1, 1.0, 8);
        for scheme in [Scheme::CentralDifference, Scheme::ModifiedAblowitzLadik] {
            let op = build_operator(&s, OperatorKind::NonHermitianBright, scheme).unwrap();
            let sp = eigensolve(&op).unwrap();
            assert!(conjugation_defect(&sp, 1e-8) < 1e-8, "{scheme:?}: {}", conjugation_defect(&sp, 1e-8));
            let tr = op.trace();
            let sum = op.raw_eigenvalue_sum(&sp);
            assert!((tr - sum).norm() <= 1e-8 * tr.norm().max(op.dim() as f64), "{scheme:?}");
        }
    }

    #[test]
    fn discrete_filter_keeps_upper_member() {
        let g = make_grid(4.0, 0.5).unwrap();
        let sp = ZsSpectrum {
            kind: OperatorKind::NonHermitianBright,
            scheme: Scheme::CentralDifference,
            grid: g,
            power: 1.0,
            seed: 0,
            eigenvalues: vec![Complex64::new(1.0, -0.5), Complex64::new(1.0, 0.5)],
            eigenvectors: Vec::new(),
            norms: Vec::new(),
            max_residual: None,
        };
        assert_eq!(discrete_mode_filter(&sp, 0.1).eigenvalues, vec![Complex64::new(1.0, 0.5)]);
    }

    #[test]
    fn odd_grid_rejected_by_network() {
        let s = gaussian(2.1, 0.1, 1.0, 0);
        assert!(matches!(
            build_operator(&s, OperatorKind::HermitianDark, Scheme::ModifiedAblowitzLadik),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn network_eigenvector_solves_transfer_recursion() {
        // Oracle: the field at node middles must satisfy
        // psi_{j+1} = H_{j+1} F(z) H_j psi_j around the whole ring, with the
        // half-node transfer H = exp(h N / 2).
        let s = gaussian(6.0, 0.1, 1.0, 21);
        let op = build_operator(&s, OperatorKind::NonHermitianBright, Scheme::ModifiedAblowitzLadik).unwrap();
        let sp = eigensolve(&op).unwrap();
        let n = s.grid.n;
        let h = s.grid.dx;
        for k in [0, 7, 31] {
            let z = sp.eigenvalues[k];
            let phase = (-I * z * h).exp();
            for j in 0..n {
                let jn = (j + 1) % n;
                let m = node_transfer(s.samples[j], 0.5 * h, OperatorKind::NonHermitianBright);
                let next = node_transfer(s.samples[jn], 0.5 * h, OperatorKind::NonHermitianBright);
                let mut p = [sp.psi1(k)[j], sp.psi2(k)[j]];
                crate::network::step(&mut p, &m, phase);
                p = [next[0][0] * p[0] + next[0][1] * p[1], next[1][0] * p[0] + next[1][1] * p[1]];
                assert!((p[0] - sp.psi1(k)[jn]).norm() < 1e-8);
                assert!((p[1] - sp.psi2(k)[jn]).norm() < 1e-8);
            }
        }
    }
}
