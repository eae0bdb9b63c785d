//! Closed-form reference curves for the bright density of states.

use std::f64::consts::PI;

use quadrature::double_exponential;

/// `(y coth y - 1) / sinh^2 y`, even in `y`, with `g(0) = 1/3`.
pub fn dos_kernel(y: f64) -> f64 {
    let y = y.abs();
    if y < 1e-3 {
        1.0 / 3.0 - 2.0 * y * y / 15.0
    } else if y < 20.0 {
        (y / y.tanh() - 1.0) / y.sinh().powi(2)
    } else {
        let e = (-2.0 * y).exp();
        (y * (1.0 + e) / (1.0 - e) - 1.0) * 4.0 * e / (1.0 - e).powi(2)
    }
}

/// Exact bright density per unit area of the (xi, eta) plane per unit length.
pub fn analytic_dos_bright(eta: f64, d: f64) -> f64 {
    2.0 / (PI * d) * dos_kernel(2.0 * eta / d)
}

/// Uniform-band approximation: `1/(2 pi D)` for `|eta| <= D`.
pub fn analytic_dos_scba(eta: f64, d: f64) -> f64 {
    if eta.abs() <= d {
        1.0 / (2.0 * PI * d)
    } else {
        0.0
    }
}

/// Distribution of `eta >= 0` for one discrete mode.
pub fn analytic_p_eta(eta: f64, d: f64) -> f64 {
    4.0 / d * dos_kernel(2.0 * eta / d)
}

/// Local slope of `ln analytic_dos_bright` with respect to `eta`.
pub fn tail_log_slope(eta: f64, d: f64) -> f64 {
    let y = 2.0 * eta / d;
    // d/dy ln g(y), with g = (y coth y - 1)/sinh^2 y.
    let num_d = 1.0 / y.tanh() - y / y.sinh().powi(2);
    let num = y / y.tanh() - 1.0;
    (num_d / num - 2.0 / y.tanh()) * 2.0 / d
}

// Past this many multiples of D/2 the kernel is below 1e-30.
const ETA_CUTOFF: f64 = 36.0;

/// `∫_0^∞ P_eta d(eta)` by tanh-sinh quadrature.
pub fn p_eta_normalization(d: f64) -> f64 {
    double_exponential::integrate(|e| analytic_p_eta(e, d), 0.0, ETA_CUTOFF * d, 1e-13).integral
}

/// Differential entropy `-∫ P ln P` of the eta distribution.
pub fn eta_entropy(d: f64) -> f64 {
    eta_entropy_upto(d, ETA_CUTOFF * d)
}

/// `-∫_0^eta_max P ln P`.
pub fn eta_entropy_upto(d: f64, eta_max: f64) -> f64 {
    double_exponential::integrate(
        |e| {
            let p = analytic_p_eta(e, d);
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        },
        0.0,
        eta_max,
        1e-13,
    )
    .integral
}

/// The D-independent constant `-∫ P ln P - ln(D/4)`.
pub fn eta_entropy_constant(d: f64) -> f64 {
    eta_entropy(d) - (d / 4.0).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_eta_limits() {
        assert!((analytic_dos_bright(0.0, 1.0) - 2.0 / (3.0 * PI)).abs() < 1e-15);
        assert!((analytic_dos_bright(1e-9, 1.0) - 0.2122065907891938).abs() < 1e-12);
        assert!((analytic_p_eta(0.0, 2.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_branches_are_continuous() {
        for y in [1e-3, 20.0] {
            let below = dos_kernel(y * (1.0 - 1e-13));
            let above = dos_kernel(y * (1.0 + 1e-13));
            assert!((below - above).abs() < 1e-8 * below.abs().max(1e-300), "{y}");
        }
    }

    #[test]
    fn frozen_kernel_values() {
        // mpmath, 30 digits.
        assert!((dos_kernel(1.0) - 0.22665684875970903).abs() < 1e-15);
        assert!((dos_kernel(3.0) - 0.020_077_254_656_052_59).abs() < 1e-15);
        assert!((analytic_dos_bright(1.5, 1.0) - 0.012781577288902162).abs() < 1e-15);
    }

    #[test]
    fn scba_band() {
        assert!((analytic_dos_scba(0.0, 1.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(analytic_dos_scba(1.5, 1.0), 0.0);
        for d in [0.5, 1.0, 3.0] {
            let integral = double_exponential::integrate(|e| analytic_dos_scba(e, d), -d, d, 1e-12).integral;
            assert!((integral - 1.0 / PI).abs() < 1e-10);
        }
    }

    #[test]
    fn normalization_and_entropy() {
        for d in [0.5, 1.0, 2.0, 4.0] {
            assert!((p_eta_normalization(d) - 1.0).abs() < 1e-10);
            // mpmath oracle: -2 ∫_0^∞ g ln g dy = 1.6629617...
            assert!((eta_entropy_constant(d) - 1.6629617).abs() < 1e-6, "{}", eta_entropy_constant(d));
        }
    }

    #[test]
    fn tail_slope() {
        // The tail is eta * exp(-4 eta / D), so the log-slope approaches
        // -4/D only as 1/(eta - D/2).
        for d in [0.5, 1.0, 2.0] {
            for k in 0..=20 {
                let eta = d * (2.0 + 2.0 * k as f64 / 20.0);
                let expect = -4.0 / d + 1.0 / (eta - d / 2.0);
                assert!((tail_log_slope(eta, d) - expect).abs() < 1e-2 / d);
            }
            assert!((tail_log_slope(40.0 * d, d) + 4.0 / d).abs() < 0.03 / d);
        }
        // Finite-difference cross-check of the analytic log-derivative.
        let (e, d, h) = (1.3, 0.8, 1e-5);
        let fd = (analytic_dos_bright(e + h, d).ln() - analytic_dos_bright(e - h, d).ln()) / (2.0 * h);
        assert!((fd - tail_log_slope(e, d)).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn dos_is_even(eta in -5.0f64..5.0, d in 0.1f64..5.0) {
            prop_assert_eq!(analytic_dos_bright(eta, d), analytic_dos_bright(-eta, d));
        }

        #[test]
        fn dos_and_p_eta_proportional(eta in 0.0f64..5.0, d in 0.1f64..5.0) {
            let r = analytic_p_eta(eta, d) / analytic_dos_bright(eta, d);
            prop_assert!((r - 2.0 * PI).abs() < 1e-12 * 2.0 * PI);
        }

        #[test]
        fn p_eta_scaling(eta in 0.0f64..5.0, d in 0.1f64..5.0, c in 0.1f64..10.0) {
            let lhs = analytic_p_eta(eta, d);
            let rhs = analytic_p_eta(eta / c, d / c) / c;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300));
        }
    }
}
