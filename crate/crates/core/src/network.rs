//! Split-step building blocks shared by the unitary-network operator, the
//! Lyapunov integrator and the scattering integrator.
//!
//! A sample `u_j` acts over one cell of width `h` through the exact node
//! transfer `M_j = exp(h N_j)` with
//!
//! * bright: `N = [[0, i u*], [ i u, 0]]`
//! * dark:   `N = [[0, i u*], [-i u, 0]]`
//!
//! followed by free propagation `F(z) = diag(exp(-i z h), exp(i z h))`.

use num_complex::Complex64;

use crate::operator::OperatorKind;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub type Mat2 = [[Complex64; 2]; 2];

/// `exp(h N)` for one sample.
pub fn node_transfer(u: Complex64, h: f64, kind: OperatorKind) -> Mat2 {
    let a = u.norm();
    let s = h * a;
    match kind {
        OperatorKind::NonHermitianBright => {
            let k = if s < 1e-8 { h * (1.0 - s * s / 6.0) } else { s.sin() / a };
            let c = Complex64::new(s.cos(), 0.0);
            [[c, I * u.conj() * k], [I * u * k, c]]
        }
        OperatorKind::HermitianDark => {
            let k = if s < 1e-8 { h * (1.0 + s * s / 6.0) } else { s.sinh() / a };
            let c = Complex64::new(s.cosh(), 0.0);
            [[c, I * u.conj() * k], [-I * u * k, c]]
        }
    }
}

/// Node scattering matrix: maps incoming amplitudes (from the left on
/// channel 1, from the right on channel 2) to outgoing ones. `None` when the
/// node transfer has a vanishing (2,2) entry.
pub fn node_scattering(m: &Mat2) -> Option<Mat2> {
    let m22 = m[1][1];
    if m22.norm() < 1e-300 {
        return None;
    }
    let r = 1.0 / m22;
    Some([[m[0][0] - m[0][1] * m[1][0] * r, m[0][1] * r], [-m[1][0] * r, r]])
}

/// Applies `F(z) M` to a 2-vector in place.
#[inline]
pub fn step(psi: &mut [Complex64; 2], m: &Mat2, phase: Complex64) {
    let p1 = m[0][0] * psi[0] + m[0][1] * psi[1];
    let p2 = m[1][0] * psi[0] + m[1][1] * psi[1];
    // phase = exp(-i z h); exp(+i z h) is its reciprocal.
    psi[0] = p1 * phase;
    psi[1] = p2 / phase;
}

/// Inverse of `F(z) M`; `M` has unit determinant.
#[inline]
pub fn step_back(psi: &mut [Complex64; 2], m: &Mat2, phase: Complex64) {
    let q1 = psi[0] / phase;
    let q2 = psi[1] * phase;
    psi[0] = m[1][1] * q1 - m[0][1] * q2;
    psi[1] = -m[1][0] * q1 + m[0][0] * q2;
}
