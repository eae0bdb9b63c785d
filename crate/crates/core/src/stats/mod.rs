pub mod analytic;
pub mod dos;
pub mod htest;
pub mod ipr;
pub mod spacing;

pub use analytic::{analytic_dos_bright, analytic_dos_scba, analytic_p_eta};
pub use dos::{dos_1d, eta_profile, DosAxis, DosEstimate};
pub use ipr::{ipr, ipr_vs_lambda, IprCurve};
pub use spacing::{spacing_stats, SpacingHistogram};
