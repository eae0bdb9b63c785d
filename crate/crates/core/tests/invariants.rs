use fiberzs_core::capacity::{d_cancellation_defect, incoming_entropy_quadrature, spectral_efficiency, EntropyConstant, LambdaBarMode};
use fiberzs_core::link::{shift_covariance, CovarianceMethod, LinkParams, NoiseConvention};
use fiberzs_core::lyapunov::{lyapunov_exponents, lyapunov_grid, thouless_dos, xi_average};
use fiberzs_core::operator::conjugation_defect;
use fiberzs_core::stats::dos::{dos_1d, eta_profile, uniform_edges, DEFAULT_EDGE_FRACTION};
use fiberzs_core::{
    build_operator, discrete_mode_filter, eigensolve, eigenvalues, ensemble, make_grid, optimal_potential, sample_signal,
    Complex64, LyapunovConfig, OperatorKind, Polarization, Scheme, ZsSpectrum,
};
use proptest::prelude::*;

fn spectra(kind: OperatorKind, l: f64, dx: f64, d: f64, runs: usize, seed: u64) -> Vec<ZsSpectrum> {
    let g = make_grid(l, dx).unwrap();
    ensemble::try_map(runs, seed, |_, s| {
        let sig = sample_signal(g, d, Polarization::Unpolarized, s)?;
        eigenvalues(&build_operator(&sig, kind, Scheme::ModifiedAblowitzLadik)?)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bright_spectrum_is_conjugation_symmetric(seed in 0u64..10_000, d in 0.2f64..3.0) {
        let g = make_grid(8.0, 0.1).unwrap();
        let sig = sample_signal(g, d, Polarization::Unpolarized, seed).unwrap();
        let op = build_operator(&sig, OperatorKind::NonHermitianBright, Scheme::ModifiedAblowitzLadik).unwrap();
        let sp = eigenvalues(&op).unwrap();
        prop_assert_eq!(sp.len(), op.dim());
        prop_assert!(conjugation_defect(&sp, 1e-8) < 1e-8);
    }

    #[test]
    fn dark_spectrum_is_real(seed in 0u64..10_000, d in 0.2f64..3.0) {
        let sp = spectra(OperatorKind::HermitianDark, 8.0, 0.1, d, 1, seed).remove(0);
        let top = sp.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(sp.eigenvalues.iter().all(|z| z.im.abs() <= 1e-12 * top));
    }

    #[test]
    fn fitted_rate_does_not_depend_on_power(d in 0.05f64..20.0, b in 1e11f64..1e14) {
        let mut link = LinkParams::reference();
        link.bandwidth_hz = b;
        let a = spectral_efficiency(&link, d, LambdaBarMode::Fitted, None, EntropyConstant::Printed).unwrap();
        let r = spectral_efficiency(&link, 1.0, LambdaBarMode::Fitted, None, EntropyConstant::Printed).unwrap();
        prop_assert!((a.r_nats - r.r_nats).abs() < 1e-12);
        prop_assert!(d_cancellation_defect(&link, EntropyConstant::Stated).unwrap() < 1e-12);
    }
}

#[test]
fn bound_state_converges_with_grid_step() {
    let target = Complex64::new(0.3, 0.8);
    let err = |dx: f64| {
        let s = optimal_potential(target.re, target.im, make_grid(30.0, dx).unwrap()).unwrap();
        let sp = eigenvalues(&build_operator(&s, OperatorKind::NonHermitianBright, Scheme::ModifiedAblowitzLadik).unwrap()).unwrap();
        sp.eigenvalues.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min)
    };
    let (e1, e2, e3) = (err(0.1), err(0.05), err(0.025));
    assert!(e1 < 0.1 && e2 < 0.6 * e1 && e3 < 0.6 * e2, "{e1:e} {e2:e} {e3:e}");
}

#[test]
fn dos_is_invariant_under_shuffling() {
    let sp = spectra(OperatorKind::HermitianDark, 10.0, 0.1, 1.0, 8, 11);
    let mut shuffled = sp.clone();
    shuffled.reverse();
    shuffled.swap(0, 3);
    let a = dos_1d(&sp, None, DEFAULT_EDGE_FRACTION).unwrap();
    let b = dos_1d(&shuffled, None, DEFAULT_EDGE_FRACTION).unwrap();
    assert_eq!(a.counts, b.counts);
    for (x, y) in a.density.iter().zip(&b.density) {
        assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
    }
}

#[test]
fn same_seed_same_ensemble() {
    let a = spectra(OperatorKind::NonHermitianBright, 6.0, 0.1, 1.0, 3, 5);
    let b = spectra(OperatorKind::NonHermitianBright, 6.0, 0.1, 1.0, 3, 5);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.eigenvalues, y.eigenvalues);
    }
}

#[test]
fn thouless_mass_matches_mode_counting() {
    let d = 1.0;
    let (lo, hi) = (0.3, 1.5);
    let cfg = LyapunovConfig::new(d, 0.05, 1e5);
    let xi = [-0.15, 0.0, 0.15];
    let eta: Vec<f64> = (0..11).map(|k| 0.15 + 0.15 * k as f64).collect();
    let prof = xi_average(&thouless_dos(&lyapunov_grid(&xi, &eta, &cfg, 21).unwrap()).unwrap()).unwrap();
    let mass = |c: &[f64], dens: &[f64], w: &[f64]| -> f64 {
        c.iter().zip(dens).zip(w).filter(|((c, _), _)| (lo - 1e-9..=hi + 1e-9).contains(*c)).map(|((_, d), w)| d * w).sum()
    };
    let thouless = mass(&prof.centers(), &prof.density, &prof.widths());

    let sp = spectra(OperatorKind::NonHermitianBright, 40.0, 0.05, d, 12, 22);
    let edges = uniform_edges(0.3 - 0.075, 1.5 + 0.075, 9);
    let count = eta_profile(&sp, Some(edges), None).unwrap();
    let counted = mass(&count.centers(), &count.density, &count.widths());
    assert!((thouless / counted - 1.0).abs() < 0.15, "thouless {thouless} counted {counted}");
}

#[test]
fn lyapunov_grows_with_eta_beyond_d() {
    let cfg = LyapunovConfig::new(1.0, 0.05, 2e4);
    let zs: Vec<Complex64> = [1.2, 1.6, 2.0, 2.4].iter().map(|&e| Complex64::new(0.1, e)).collect();
    let est = lyapunov_exponents(&zs, &cfg, 9).unwrap();
    assert!(est.iter().all(|e| e.lambda_hat >= 0.0));
    assert!(est.windows(2).all(|w| w[1].lambda_hat > w[0].lambda_hat));
}

#[test]
fn monte_carlo_lambda_bar_is_linear_in_sigma2() {
    let g = make_grid(12.0, 0.1).unwrap();
    let sig = sample_signal(g, 1.5, Polarization::Unpolarized, 4).unwrap();
    let sp = eigensolve(&build_operator(&sig, OperatorKind::NonHermitianBright, Scheme::ModifiedAblowitzLadik).unwrap()).unwrap();
    let modes = discrete_mode_filter(&sp, (1.5f64 / 12.0).sqrt());
    let runs = 20 * 2 * modes.len();
    let c1 = shift_covariance(&modes, 1.0, NoiseConvention::default(), CovarianceMethod::MonteCarlo, runs, 8).unwrap();
    let c4 = shift_covariance(&modes, 4.0, NoiseConvention::default(), CovarianceMethod::MonteCarlo, runs, 8).unwrap();
    assert!((c4.lambda_bar / c1.lambda_bar - 4.0).abs() < 1e-9);
    let exact = shift_covariance(&modes, 1.0, NoiseConvention::default(), CovarianceMethod::Exact, 0, 0).unwrap();
    assert!((c1.lambda_bar / exact.lambda_bar - 1.0).abs() < 0.3, "{} {}", c1.lambda_bar, exact.lambda_bar);
}

#[test]
fn incoming_entropy_ignores_far_tail() {
    let lambda = LinkParams::reference().lambda_normalized();
    for d in [0.5, 1.0, 4.0] {
        let a = incoming_entropy_quadrature(d, lambda, 36.0 * d).unwrap();
        let b = incoming_entropy_quadrature(d, lambda, 72.0 * d).unwrap();
        assert!((a - b).abs() < 1e-9, "D={d}: {a} {b}");
    }
}
