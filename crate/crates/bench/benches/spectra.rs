use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fiberzs_core::link::{shift_covariance, CovarianceMethod, NoiseConvention};
use fiberzs_core::scattering::evolve_lnb;
use fiberzs_core::{
    build_operator, discrete_mode_filter, eigensolve, eigenvalues, lyapunov_exponent, make_grid, sample_signal,
    Complex64, LyapunovConfig, OperatorKind, Polarization, Scheme,
};

fn dense_eigensolver(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigenvalues");
    g.sample_size(10);
    for length in [10.0, 20.0, 40.0] {
        let sig = sample_signal(make_grid(length, 0.1).unwrap(), 1.0, Polarization::Unpolarized, 1).unwrap();
        for kind in [OperatorKind::HermitianDark, OperatorKind::NonHermitianBright] {
            let op = build_operator(&sig, kind, Scheme::ModifiedAblowitzLadik).unwrap();
            g.bench_with_input(BenchmarkId::new(format!("{kind:?}"), op.dim()), &op, |b, op| {
                b.iter(|| eigenvalues(op).unwrap())
            });
        }
    }
    g.finish();

    let mut g = c.benchmark_group("eigensolve");
    g.sample_size(10);
    let sig = sample_signal(make_grid(20.0, 0.1).unwrap(), 1.0, Polarization::Unpolarized, 2).unwrap();
    let op = build_operator(&sig, OperatorKind::NonHermitianBright, Scheme::ModifiedAblowitzLadik).unwrap();
    g.bench_function("bright_L20", |b| b.iter(|| eigensolve(&op).unwrap()));
    g.finish();
}

fn transfer_walks(c: &mut Criterion) {
    let mut g = c.benchmark_group("transfer");
    g.sample_size(10);
    let cfg = LyapunovConfig::new(1.0, 0.05, 2000.0);
    g.bench_function("lyapunov_x2000", |b| b.iter(|| lyapunov_exponent(Complex64::new(0.2, 0.5), &cfg, 3).unwrap()));
    let sig = sample_signal(make_grid(200.0, 0.1).unwrap(), 1.0, Polarization::Unpolarized, 4).unwrap();
    g.bench_function("ln_b_T200", |b| b.iter(|| evolve_lnb(&sig, Complex64::new(0.0, 0.5)).unwrap()));
    g.finish();
}

fn noise_covariance(c: &mut Criterion) {
    let mut g = c.benchmark_group("shift_covariance");
    g.sample_size(10);
    let sig = sample_signal(make_grid(20.0, 0.1).unwrap(), 1.0, Polarization::Unpolarized, 5).unwrap();
    let op = build_operator(&sig, OperatorKind::NonHermitianBright, Scheme::ModifiedAblowitzLadik).unwrap();
    let modes = discrete_mode_filter(&eigensolve(&op).unwrap(), (1.0f64 / 20.0).sqrt());
    g.bench_function("exact_L20", |b| {
        b.iter(|| shift_covariance(&modes, 1.0, NoiseConvention::default(), CovarianceMethod::Exact, 0, 0).unwrap())
    });
    g.bench_function("monte_carlo_L20_200", |b| {
        b.iter(|| shift_covariance(&modes, 1.0, NoiseConvention::default(), CovarianceMethod::MonteCarlo, 200, 6).unwrap())
    });
    g.finish();
}

criterion_group!(benches, dense_eigensolver, transfer_walks, noise_covariance);
criterion_main!(benches);
