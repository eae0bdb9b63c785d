//! Spectral statistics of the Zakharov-Shabat problem for random Gaussian
//! NLSE inputs, scattering-data statistics, amplifier-noise perturbations and
//! spectral-efficiency bounds.

pub mod ensemble;
pub mod capacity;
pub mod error;
pub mod link;
pub mod lyapunov;
pub mod network;
pub mod operator;
pub mod rng;
pub mod scattering;
pub mod signal;
pub mod stats;

pub use capacity::{capacity_report, spectral_efficiency, CapacityInputs, CapacityReport, EntropyConstant, LambdaBarMode};
pub use error::{Error, Result};
pub use link::{amplifier_sigma2, shift_covariance, CovarianceMethod, LinkParams, NoiseConvention, ShiftCovariance};
pub use num_complex::Complex64;
pub use lyapunov::{lyapunov_exponent, lyapunov_grid, phase_dos_hermitian, thouless_dos, LyapunovConfig, LyapunovEstimate, LyapunovGrid};
pub use operator::{
    build_operator, discrete_mode_filter, eigensolve, eigenvalues, OperatorKind, OperatorMatrix, Scheme, ZsSpectrum,
};
pub use scattering::{evolve_lnb, variance_growth, BzConfig, BzStats};
pub use signal::{make_grid, optimal_potential, sample_signal, Grid, Polarization, SignalRealization};
