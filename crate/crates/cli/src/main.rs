use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fiberzs_core::{Error, Result};

mod commands;
mod config;
mod run;

use config::ExperimentConfig;
use run::RunDir;

#[derive(Parser)]
#[command(name = "fiberzs", version, about = "Zakharov-Shabat spectral statistics and capacity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Sectioned TOML config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// `section.key=value`, applied after the file and the environment.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Signal power; repeat for several.
    #[arg(long = "D", value_name = "D")]
    d: Vec<f64>,
    /// Grid length L.
    #[arg(long)]
    size: Option<f64>,
    /// Grid step dx.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// unpolarized or polarized.
    #[arg(long)]
    polarization: Option<String>,
    /// Parent directory of the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample white-noise input signals.
    Gen(Common),
    /// Dark (Hermitian) density of states.
    DosDark(Common),
    /// Level-spacing statistics of the dark spectrum.
    Spacing(Common),
    /// Inverse participation ratios against lambda and D.
    Ipr(Common),
    /// Bright eta profile against the exact density.
    DosBright(Common),
    /// Lyapunov exponents on a (xi, eta) grid.
    Lyap(Common),
    /// Density of states from the Laplacian of the Lyapunov grid.
    Thouless(Common),
    /// Statistics of ln b at one spectral point.
    BzStats(Common),
    /// Covariance of noise-induced eigenvalue shifts.
    NoiseCov(Common),
    /// Spectral-efficiency report for the configured link.
    Capacity(Common),
    /// Capacity report with earlier run directories attached.
    Report {
        #[command(flatten)]
        common: Common,
        /// Run directories to attach; their checksums are verified.
        #[arg(value_name = "RUN_DIR")]
        dirs: Vec<PathBuf>,
    },
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut o = Vec::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects section.key=value, got '{s}'")))?;
            o.push((k.trim().to_string(), v.trim().to_string()));
        }
        if !self.d.is_empty() {
            let list: Vec<String> = self.d.iter().map(|d| format!("{d:?}")).collect();
            o.push(("ensemble.d".into(), format!("[{}]", list.join(","))));
        }
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        push("grid.length", self.size.map(|v| format!("{v:?}")));
        push("grid.dx", self.step.map(|v| format!("{v:?}")));
        push("ensemble.runs", self.runs.map(|v| v.to_string()));
        push("run.seed", self.seed.map(|v| v.to_string()));
        push("ensemble.polarization", self.polarization.as_ref().map(|p| format!("{p:?}")));
        push("run.output_dir", self.out.as_ref().map(|p| format!("{:?}", p.display().to_string())));
        Ok(o)
    }

    fn load(&self) -> Result<ExperimentConfig> {
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(p)?),
            None => None,
        };
        ExperimentConfig::load(text.as_deref(), std::env::vars(), &self.overrides()?)
    }
}

fn execute(cli: Cli) -> Result<PathBuf> {
    let (name, common, extra) = match &cli.command {
        Command::Gen(c) => ("gen", c, None),
        Command::DosDark(c) => ("dos-dark", c, None),
        Command::Spacing(c) => ("spacing", c, None),
        Command::Ipr(c) => ("ipr", c, None),
        Command::DosBright(c) => ("dos-bright", c, None),
        Command::Lyap(c) => ("lyap", c, None),
        Command::Thouless(c) => ("thouless", c, None),
        Command::BzStats(c) => ("bz-stats", c, None),
        Command::NoiseCov(c) => ("noise-cov", c, None),
        Command::Capacity(c) => ("capacity", c, None),
        Command::Report { common, dirs } => ("report", common, Some(dirs)),
    };
    let cfg = common.load()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Error::Validation("--threads must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        let mut out = RunDir::create(&cfg, name)?;
        let result = match name {
            "gen" => commands::gen(&cfg, &mut out),
            "dos-dark" => commands::dos_dark(&cfg, &mut out),
            "spacing" => commands::spacing(&cfg, &mut out),
            "ipr" => commands::ipr(&cfg, &mut out),
            "dos-bright" => commands::dos_bright(&cfg, &mut out),
            "lyap" => commands::lyap(&cfg, &mut out),
            "thouless" => commands::thouless(&cfg, &mut out),
            "bz-stats" => commands::bz_stats(&cfg, &mut out),
            "noise-cov" => commands::noise_cov(&cfg, &mut out),
            "capacity" => commands::capacity(&cfg, &mut out),
            _ => commands::report(&cfg, extra.map(|v| v.as_slice()).unwrap_or(&[]), &mut out),
        };
        match result {
            Ok(summary) => {
                out.write_json("summary.json", &summary)?;
                Ok(out.finish()?.0)
            }
            Err(e) => {
                out.fail(&e)?;
                Err(e)
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fiberzs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
