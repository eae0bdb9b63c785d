//! One function per subcommand. Each writes its data files, analytic overlays
//! and a `summary.json` into the run directory.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fiberzs_core::capacity::{capacity_report, CapacityInputs, LambdaBarMode};
use fiberzs_core::link::{amplifier_sigma2, shift_covariance, ShiftCovariance};
use fiberzs_core::lyapunov::{lyapunov_grid, thouless_dos, xi_average, LyapunovConfig, LyapunovGrid};
use fiberzs_core::scattering::{variance_growth, variance_prefactor, variance_time_factor, BzConfig};
use fiberzs_core::stats::analytic::{analytic_dos_bright, analytic_dos_scba, tail_log_slope};
use fiberzs_core::stats::dos::{dos_1d, eta_profile, uniform_edges};
use fiberzs_core::stats::htest::linear_fit;
use fiberzs_core::stats::ipr::{ipr_vs_lambda, mid_band_ipr};
use fiberzs_core::stats::spacing_stats;
use fiberzs_core::{
    build_operator, discrete_mode_filter, eigensolve, eigenvalues, ensemble, make_grid, rng, sample_signal, Complex64,
    Error, OperatorKind, Result, Scheme, ZsSpectrum,
};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::run::{RunDir, RunManifest};

/// Points of every analytic overlay curve.
const OVERLAY_POINTS: usize = 200;

fn header(cfg: &ExperimentConfig, what: &str, d: f64) -> String {
    format!(
        "# {what} D={d} L={} dx={} scheme={:?} runs={} seed={} config={}\n",
        cfg.grid.length,
        cfg.grid.dx,
        cfg.grid.scheme,
        cfg.ensemble.runs,
        cfg.run.seed,
        &cfg.hash()[..16]
    )
}

fn spectra(cfg: &ExperimentConfig, kind: OperatorKind, d: f64, stream: u64, vectors: bool) -> Result<Vec<ZsSpectrum>> {
    let grid = make_grid(cfg.grid.length, cfg.grid.dx)?;
    let scheme: Scheme = cfg.grid.scheme.into();
    let pol = cfg.ensemble.polarization.into();
    let seed = rng::derive_seed(cfg.run.seed, stream);
    ensemble::try_map(cfg.ensemble.runs, seed, |_, s| {
        let sig = sample_signal(grid, d, pol, s)?;
        let op = build_operator(&sig, kind, scheme)?;
        if vectors {
            eigensolve(&op)
        } else {
            eigenvalues(&op)
        }
    })
}

fn csv_rows<'a>(head: String, columns: &str, rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut s = head;
    s.push_str(columns);
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Exact, uniform-band and tail-slope curves on `(0, 4D]`.
pub fn bright_overlay(d: f64) -> String {
    let rows: Vec<Vec<f64>> = linspace(0.01 * d, 4.0 * d, OVERLAY_POINTS)
        .into_iter()
        .map(|e| vec![e, analytic_dos_bright(e, d), analytic_dos_scba(e, d), tail_log_slope(e, d), -4.0 / d])
        .collect();
    csv_rows(
        format!("# analytic bright density D={d}\n"),
        "eta,exact,uniform_band,log_slope,asymptotic_log_slope",
        rows.iter().map(|r| r.as_slice()),
    )
}

pub fn gen(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value> {
    let grid = make_grid(cfg.grid.length, cfg.grid.dx)?;
    let pol = cfg.ensemble.polarization.into();
    let seed = rng::derive_seed(cfg.run.seed, 0);
    let d = cfg.d();
    let signals = ensemble::try_map(cfg.ensemble.runs, seed, |_, s| sample_signal(grid, d, pol, s))?;
    let mut powers = Vec::new();
    for (k, s) in signals.iter().enumerate() {
        let mut buf = Vec::new();
        s.write_text(&mut buf)?;
        out.write(&format!("signal_{k:04}.txt"), buf)?;
        powers.push(s.measured_power());
    }
    Ok(json!({ "d": d, "n": grid.n, "dx": grid.dx, "measured_power": powers }))
}

pub fn dos_dark(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value> {
    let d = cfg.d();
    let sp = spectra(cfg, OperatorKind::HermitianDark, d, 1, false)?;
    let scheme: Scheme = cfg.grid.scheme.into();
    let b = scheme.band_half_width(cfg.grid.dx) * (1.0 - 2.0 * cfg.dos.edge_fraction);
    let dos = dos_1d(&sp, Some(uniform_edges(-b, b, cfg.dos.bins)), cfg.dos.edge_fraction)?;
    out.write("dos_dark.csv", header(cfg, "dark density per unit lambda per unit length", d) + &dos.to_csv())?;
    let rows: Vec<[f64; 2]> = linspace(-b, b, OVERLAY_POINTS).into_iter().map(|l| [l, 1.0 / PI]).collect();
    out.write(
        "dos_dark_analytic.csv",
        csv_rows("# flat mid-band density 1/pi\n".into(), "lambda,density", rows.iter().map(|r| r.as_slice())),
    )?;
    let max = dos.density.iter().cloned().fold(f64::MIN, f64::max);
    let min = dos.density.iter().cloned().fold(f64::MAX, f64::min);
    Ok(json!({ "d": d, "max_over_min": max / min, "mean_density": dos.integral() / (2.0 * b), "flags": dos.flags }))
}

pub fn spacing(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value> {
    let d = cfg.d();
    let sp = spectra(cfg, OperatorKind::HermitianDark, d, 2, false)?;
    let h = spacing_stats(&sp, cfg.spacing.edge_fraction)?;
    out.write("spacing.csv", header(cfg, "nearest-neighbour spacings in units of the mean", d) + &h.to_csv())?;
    let rows: Vec<[f64; 3]> = linspace(0.0, 8.0, OVERLAY_POINTS).into_iter().map(|s| [s, (-s).exp(), -s]).collect();
    out.write(
        "spacing_analytic.csv",
        csv_rows("# Poisson spacing law\n".into(), "spacing,density,ln_density", rows.iter().map(|r| r.as_slice())),
    )?;
    Ok(json!({
        "d": d,
        "n_spacings": h.n_spacings,
        "ks_p_value": h.p_value,
        "log_linear_r2": h.log_linear_r2,
        "log_slope": h.log_slope,
    }))
}

pub fn ipr(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value> {
    let mut rows = Vec::new();
    let mut w = Vec::new();
    for (k, &d) in cfg.ensemble.d.iter().enumerate() {
        let sp = spectra(cfg, OperatorKind::HermitianDark, d, 100 + k as u64, true)?;
        let curve = ipr_vs_lambda(&sp, cfg.ipr.window_fraction, cfg.ipr.edge_fraction, cfg.ipr.points)?;
        out.write(&format!("ipr_lambda_D{d}.csv"), header(cfg, "IPR against lambda", d) + &curve.to_csv())?;
        let (m, se) = mid_band_ipr(&sp, cfg.ipr.edge_fraction)?;
        rows.push([d, m, se]);
        w.push(if se > 0.0 { 1.0 / (se * se) } else { 1.0 });
    }
    out.write(
        "ipr_vs_d.csv",
        csv_rows(header(cfg, "mid-band IPR", f64::NAN), "d,ipr,stderr", rows.iter().map(|r| r.as_slice())),
    )?;
    let fit = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let f = linear_fit(&x, &y, Some(&w));
        Some(json!({
            "slope": f.slope,
            "slope_stderr": f.slope_stderr,
            "intercept": f.intercept,
            "intercept_stderr": f.intercept_stderr,
            "r_squared": f.r_squared,
        }))
    } else {
        None
    };
    Ok(json!({ "mid_band_ipr": rows, "fit": fit }))
}

pub fn dos_bright(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value> {
    let d = cfg.d();
    let sp = spectra(cfg, OperatorKind::NonHermitianBright, d, 3, false)?;
    let lo = cfg.dos.eta_min.max((d / cfg.grid.length).sqrt());
    if !(cfg.dos.eta_max > lo) || cfg.dos.eta_bins == 0 {
        return Err(Error::Validation(format!("empty eta range [{lo}, {}]", cfg.dos.eta_max)));
    }
    let win = (cfg.dos.xi_window > 0.0).then_some(cfg.dos.xi_window);
    let prof = eta_profile(&sp, Some(uniform_edges(lo, cfg.dos.eta_max, cfg.dos.eta_bins)), win)?;
    out.write("dos_bright.csv", header(cfg, "bright eta profile", d) + &prof.to_csv())?;
    out.write("dos_bright_analytic.csv", bright_overlay(d))?;
    let rms = fiberzs_core::stats::dos::relative_rms(&prof, |e| analytic_dos_bright(e, d), lo, cfg.dos.eta_max);
    let mut points = String::new();
    for s in &sp {
        for z in &s.eigenvalues {
            let _ = writeln!(points, "{:e},{:e}", z.re, z.im);
        }
    }
    out.write("eigenvalues.csv", header(cfg, "bright eigenvalues", d) + "xi,eta\n" + &points)?;
    Ok(json!({ "d": d, "relative_rms": rms, "eta_range": [lo, cfg.dos.eta_max], "xi_width": prof.meta.xi_width }))
}

fn lyap_config(cfg: &ExperimentConfig) -> LyapunovConfig {
    let l = &cfg.lyapunov;
    let mut c = LyapunovConfig::new(cfg.d(), if l.dx > 0.0 { l.dx } else { cfg.grid.dx }, l.x_max);
    c.renorm_every = l.renorm_every;
    c.batches = l.batches;
    c.polarization = cfg.ensemble.polarization.into();
    c
}

fn lyap_grid(cfg: &ExperimentConfig) -> Result<LyapunovGrid> {
    let (xi, eta) = cfg.lyapunov.axes();
    lyapunov_grid(&xi, &eta, &lyap_config(cfg), rng::derive_seed(cfg.run.seed, 4))
}

fn lyap_header(cfg: &ExperimentConfig) -> String {
    let c = lyap_config(cfg);
    format!("# lyapunov x_max={} dx={} renorm_every={} batches={} seed={}\n", c.x_max, c.dx, c.renorm_every, c.batches, cfg.run.seed)
}

pub fn lyap(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value> {
    let d = cfg.d();
    let g = lyap_grid(cfg)?;
    out.write("lyapunov_grid.csv", lyap_header(cfg) + &g.to_csv())?;
    let (_, eta) = cfg.lyapunov.axes();
    let rows: Vec<[f64; 2]> = eta.iter().map(|&e| [e, 2.0 * e * e / (3.0 * d)]).collect();
    out.write(
        "lyapunov_analytic.csv",
        csv_rows(format!("# small-eta law 2 eta^2/(3D), D={d}\n"), "eta,lambda", rows.iter().map(|r| r.as_slice())),
    )?;
    Ok(json!({ "d": d, "xi": g.xi, "eta": g.eta, "lambda": g.lambda, "stderr": g.stderr }))
}

pub fn thouless(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value> {
    let d = cfg.d();
    let g = lyap_grid(cfg)?;
    out.write("lyapunov_grid.csv", lyap_header(cfg) + &g.to_csv())?;
    let dos = thouless_dos(&g)?;
    out.write("thouless_dos.csv", lyap_header(cfg) + &dos.to_csv())?;
    let prof = xi_average(&dos)?;
    out.write("thouless_profile.csv", lyap_header(cfg) + &prof.to_csv())?;
    out.write("thouless_analytic.csv", bright_overlay(d))?;
    let lo = prof.bin_edges.first().copied().unwrap_or(0.0);
    let hi = prof.bin_edges.last().copied().unwrap_or(0.0);
    let rms = fiberzs_core::stats::dos::relative_rms(&prof, |e| analytic_dos_bright(e, d), lo, hi);
    Ok(json!({ "d": d, "relative_rms": rms, "flags": dos.flags }))
}

pub fn bz_stats(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value> {
    let d = cfg.d();
    let bz = BzConfig {
        d,
        z: Complex64::new(cfg.bz.xi, cfg.bz.eta),
        dx: cfg.grid.dx,
        durations: cfg.bz.durations.clone(),
        runs: cfg.ensemble.runs,
        polarization: cfg.ensemble.polarization.into(),
    };
    let stats = variance_growth(&bz, rng::derive_seed(cfg.run.seed, 5))?;
    out.write("bz_samples.csv", stats.samples_csv())?;
    let pre = variance_prefactor(cfg.bz.eta, d);
    let rows: Vec<[f64; 4]> = stats
        .points
        .iter()
        .map(|p| [p.t, p.re_variance, p.re_variance_stderr, pre * variance_time_factor(p.t, stats.tau)])
        .collect();
    out.write(
        "bz_variance.csv",
        csv_rows(
            format!("# Re ln b variance D={d} z={} tau={}\n", bz.z, stats.tau),
            "t,variance,stderr,analytic",
            rows.iter().map(|r| r.as_slice()),
        ),
    )?;
    out.write_json("bz_stats.json", &stats)?;
    Ok(json!({
        "d": d,
        "scaling_constant": stats.scaling_constant,
        "scaling_constant_stderr": stats.scaling_constant_stderr,
        "analytic_prefactor": stats.analytic_prefactor,
        "flags": stats.flags,
    }))
}

/// Exact or Monte Carlo covariance for every realization of every D.
fn covariances(cfg: &ExperimentConfig) -> Result<Vec<(f64, Vec<ShiftCovariance>)>> {
    let mut all = Vec::new();
    for (k, &d) in cfg.ensemble.d.iter().enumerate() {
        let sp = spectra(cfg, OperatorKind::NonHermitianBright, d, 200 + k as u64, true)?;
        let eta_min = (d / cfg.grid.length).sqrt();
        let mut covs = Vec::new();
        for (r, s) in sp.iter().enumerate() {
            let f = discrete_mode_filter(s, eta_min);
            let seed = rng::derive_seed(cfg.run.seed, 10_000 * (k as u64 + 1) + r as u64);
            covs.push(shift_covariance(
                &f,
                cfg.noise.sigma2,
                cfg.noise.convention.into(),
                cfg.noise.method.into(),
                cfg.noise.noise_runs,
                seed,
            )?);
        }
        all.push((d, covs));
    }
    Ok(all)
}

pub fn noise_cov(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value> {
    let all = covariances(cfg)?;
    let mut per_d = Vec::new();
    let mut rows = Vec::new();
    for (d, covs) in &all {
        let slopes: Vec<f64> = covs.iter().map(|c| c.lambda_bar / (c.sigma2 * d)).collect();
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        rows.push([*d, mean]);
        let hist: Vec<[f64; 2]> = covs[0].log_eigen_histogram(cfg.noise.hist_bins).into_iter().map(|(c, v)| [c, v]).collect();
        out.write(
            &format!("cov_log_eigen_hist_D{d}.csv"),
            csv_rows(header(cfg, "covariance log-eigenvalue density, first realization", *d), "ln_eigenvalue,density", hist.iter().map(|r| r.as_slice())),
        )?;
        if cfg.noise.write_matrix {
            out.write(&format!("cov_matrix_D{d}.csv"), header(cfg, "shift covariance", *d) + &covs[0].matrix_csv())?;
        }
        let warnings: Vec<&String> = covs.iter().flat_map(|c| &c.warnings).collect();
        per_d.push(json!({
            "d": d,
            "modes": covs.iter().map(|c| c.eigenvalues.len()).collect::<Vec<_>>(),
            "lambda_bar": covs.iter().map(|c| c.lambda_bar).collect::<Vec<_>>(),
            "lambda_bar_over_sigma2_d": slopes,
            "mean_lambda_bar_over_sigma2_d": mean,
            "warnings": warnings,
        }));
    }
    out.write(
        "lambda_bar_vs_d.csv",
        csv_rows(header(cfg, "lambda_bar/(sigma^2 D)", f64::NAN), "d,lambda_bar_over_sigma2_d", rows.iter().map(|r| r.as_slice())),
    )?;
    Ok(json!({ "sigma2": cfg.noise.sigma2, "convention": format!("{:?}", cfg.noise.convention), "per_d": per_d }))
}

pub fn capacity(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<serde_json::Value> {
    let report = build_capacity(cfg, None)?;
    out.write("capacity.json", report.to_json() + "\n")?;
    Ok(json!({ "r_bits_per_s_per_hz": report.r_bits_per_s_per_hz, "coefficient_per_hz": report.coefficient_per_hz, "status": report.status }))
}

fn build_capacity(
    cfg: &ExperimentConfig,
    supplementary: Option<serde_json::Value>,
) -> Result<fiberzs_core::capacity::CapacityReport> {
    let link = cfg.link.params()?;
    let d = cfg.d();
    let covariance = if cfg.capacity.mode == LambdaBarMode::Measured {
        let mut single = cfg.clone();
        single.ensemble.d = vec![d];
        single.ensemble.runs = 1;
        covariances(&single)?.remove(0).1.into_iter().next()
    } else {
        None
    };
    capacity_report(&CapacityInputs {
        link: Some(link),
        d: Some(d),
        mode: Some(cfg.capacity.mode),
        covariance,
        constant: Some(cfg.capacity.entropy_constant),
        supplementary,
    })
}

/// Capacity report with the manifests and summaries of earlier runs attached.
pub fn report(cfg: &ExperimentConfig, runs: &[PathBuf], out: &mut RunDir) -> Result<serde_json::Value> {
    let mut attached = Vec::new();
    for dir in runs {
        attached.push(describe_run(dir)?);
    }
    let noise = amplifier_sigma2(&cfg.link.params()?)?;
    let report = build_capacity(cfg, Some(json!({ "runs": attached })))?;
    out.write("report.json", report.to_json() + "\n")?;
    Ok(json!({
        "r_bits_per_s_per_hz": report.r_bits_per_s_per_hz,
        "sigma2_si": noise.si,
        "runs": runs.len(),
    }))
}

fn describe_run(dir: &Path) -> Result<serde_json::Value> {
    let m = RunManifest::read(dir)?;
    let bad = m.verify(dir)?;
    if !bad.is_empty() {
        return Err(Error::Validation(format!("{}: checksum mismatch for {}", dir.display(), bad.join(", "))));
    }
    let summary: serde_json::Value = match std::fs::read_to_string(dir.join("summary.json")) {
        Ok(t) => serde_json::from_str(&t).map_err(|e| Error::Validation(format!("{}: {e}", dir.display())))?,
        Err(_) => serde_json::Value::Null,
    };
    Ok(json!({
        "directory": dir.display().to_string(),
        "command": m.command,
        "config_hash": m.config_hash,
        "seed": m.seed,
        "summary": summary,
    }))
}
