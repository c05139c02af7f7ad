use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use tripod_holonomy::coupling::{composite_operator, gamma_factor, u_chi};
use tripod_holonomy::experiment::{
    constraint_report, fig1_csv, fig3_reference_configs, run_fig1_right, run_fig3,
    run_montecarlo_delta_eta, run_oracle_suite, sweep_csv, unit_grid, write_delta_eta_samples,
    write_fig1, write_sweep, ExperimentConfig,
};
use tripod_holonomy::holonomy::{holonomy_operator, rotation};
use tripod_holonomy::metrics::{exact_pair_metrics, leakage_decomp, Mode};
use tripod_holonomy::noise::DeltaEtaKernel;

/// Top-level config keys that may be given as `--key value` without `--set`.
const CONFIG_KEYS: [&str; 8] = [
    "loop",
    "omega",
    "noise",
    "coupling",
    "sweep",
    "output_path",
    "oracle_omega_t",
    "oracle_steps_per_omega_t",
];

const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "tripod",
    version,
    about = "Holonomic NOT gates on a tripod system under noise and coupling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the ideal, perturbed and coupled gate operators for the configured loop.
    Gate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Parametric error δη added to the enclosed angle.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta_eta: f64,
    },
    /// Sample δη over noise realizations on the configured loop.
    NoiseStats {
        #[command(flatten)]
        config: ConfigArgs,
        /// Write the raw samples to this CSV file.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Entanglement as a function of the leakage weight ω₀ at α = 0.
    Fig1 {
        /// Comma-separated ω₁ values in (0, 1].
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.4, 0.6, 0.8, 1.0])]
        omega1: Vec<f64>,
        /// Number of ω₀ grid points on (0, 1].
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Entanglement and fidelity of the coupled NOT gate along the sweep.
    Fig3 {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run σ ∈ {0, 0.1} × χτ ∈ {1e-3, 5e-4}, one file per curve.
        #[arg(long)]
        all_curves: bool,
    },
    /// Report the time-scale constraints of the configuration.
    Check {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Cross-check the closed-form gates against the propagator.
    Oracle,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON configuration file; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field by dotted path, e.g. `noise.sigma=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV path; a `.meta.json` is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let mut overrides = Vec::new();
        for item in &self.set {
            let Some((k, v)) = item.split_once('=') else {
                bail!("override {item:?} is not KEY=VALUE");
            };
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(seed) = self.seed {
            overrides.push(("noise.seed".into(), seed.to_string()));
        }
        if let Some(mode) = self.mode {
            overrides.push(("mode".into(), format!("\"{mode}\"")));
        }
        if let Some(trials) = self.trials {
            overrides.push(("trials".into(), trials.to_string()));
        }
        if let Some(out) = &self.out {
            overrides.push(("output_path".into(), serde_json::to_string(out)?));
        }
        Ok(base.with_overrides(&overrides)?)
    }
}

/// Rewrites `--a.b value`, `--a.b=value` and `--omega value` style config flags into
/// `--set key=value` so clap sees a fixed flag set.
fn expand_config_flags(args: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter().peekable();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            out.push(arg);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        let root = key.split('.').next().unwrap_or_default();
        if !(key.contains('.') || CONFIG_KEYS.contains(&root)) {
            out.push(arg);
            continue;
        }
        let value = match inline.or_else(|| it.next()) {
            Some(v) => v,
            None => {
                out.push(arg);
                continue;
            }
        };
        out.push("--set".into());
        out.push(format!("{key}={value}"));
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse_from(expand_config_flags(std::env::args().collect()));
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("invalid configuration: {e:#}");
            ExitCode::from(EXIT_INVALID_CONFIG)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<tripod_holonomy::Error> for Failure {
    fn from(e: tripod_holonomy::Error) -> Self {
        Failure::Run(e.into())
    }
}

fn config(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    args.resolve().map_err(Failure::Config)
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Gate {
            config: args,
            delta_eta,
        } => gate(&config(&args)?, delta_eta),
        Command::NoiseStats {
            config: args,
            samples,
        } => noise_stats(&config(&args)?, samples.as_deref()),
        Command::Fig1 {
            omega1,
            points,
            out,
        } => fig1(&omega1, points, out.as_deref()),
        Command::Fig3 {
            config: args,
            all_curves,
        } => fig3(&config(&args)?, all_curves),
        Command::Check { config: args } => {
            let report = constraint_report(&config(&args)?);
            println!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            })
        }
        Command::Oracle => {
            let checks = run_oracle_suite()?;
            for check in &checks {
                println!("{check}");
            }
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn gate(cfg: &ExperimentConfig, delta_eta: f64) -> Result<ExitCode, Failure> {
    let period = cfg.coupling.period;
    let chi = cfg.coupling.chi;
    let spec = cfg.loop_choice.resolve(period, cfg.omega)?;
    let gamma = gamma_factor(spec.theta_max, spec.phi_max);
    let eta = spec.solid_angle();
    let coupled = u_chi(eta + delta_eta, chi, period, gamma);
    let composite = composite_operator(&rotation(eta + delta_eta), &coupled.u_chi)?;
    let decomp = leakage_decomp(&composite)?;
    let m = exact_pair_metrics(FRAC_PI_2, delta_eta, chi, period, gamma)?;

    println!(
        "loop: θ_M = {:.12}, φ_M = {:.12}, T = {period}, Ω = {}",
        spec.theta_max, spec.phi_max, spec.omega
    );
    println!(
        "η = {eta:.12}, γ = {gamma:.12}, χT = {}, δη = {delta_eta}",
        chi * period
    );
    print!("\nideal holonomy U(η):\n{}", holonomy_operator(eta).matrix);
    print!("\nperturbed U(η + δη):\n{}", rotation(eta + delta_eta));
    print!("\ncoupled block U_χ on {{|01⟩, |11⟩}}:\n{}", coupled.u_chi);
    print!("\ncomposite two-qubit gate:\n{composite}");
    println!(
        "\nω₀ = {:.12}, ω₁ = {:.12}, |α| = {:.3e}\nE^r = {:.15}\n𝓕 = {:.15}",
        decomp.omega0,
        decomp.omega1,
        decomp.alpha.norm(),
        m.e_r,
        m.fidelity
    );
    Ok(ExitCode::SUCCESS)
}

fn noise_stats(cfg: &ExperimentConfig, samples: Option<&Path>) -> Result<ExitCode, Failure> {
    let spec = cfg.loop_choice.resolve(cfg.coupling.period, cfg.omega)?;
    let stats = run_montecarlo_delta_eta(&spec, &cfg.noise, cfg.trials)?;
    let kernel = DeltaEtaKernel::new(&spec, cfg.noise.tau)?;
    let n = cfg.coupling.period / cfg.noise.tau;
    println!(
        "trials = {}, T/τ = {n}, σ = {}, seed = {}",
        cfg.trials, cfg.noise.sigma, cfg.noise.seed
    );
    println!("mean δη = {:.6e}", stats.mean);
    println!(
        "Var δη = {:.6e} (kernel {:.6e})",
        stats.variance,
        kernel.variance(cfg.noise.sigma)
    );
    if cfg.noise.sigma > 0.0 {
        println!(
            "n Var/σ² = {:.4} (kernel prefactor {:.4})",
            n * stats.variance / cfg.noise.sigma.powi(2),
            kernel.cancellation_prefactor()
        );
    }
    if let Some(path) = samples {
        write_delta_eta_samples(&stats.samples, path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn fig1(omega1: &[f64], points: usize, out: Option<&Path>) -> Result<ExitCode, Failure> {
    if points == 0 {
        return Err(Failure::Config(anyhow::anyhow!(
            "--points must be at least 1"
        )));
    }
    let rows = run_fig1_right(omega1, &unit_grid(points)).map_err(|e| Failure::Config(e.into()))?;
    match out {
        Some(path) => {
            write_fig1(&rows, path)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", fig1_csv(&rows)),
    }
    Ok(ExitCode::SUCCESS)
}

fn fig3(cfg: &ExperimentConfig, all_curves: bool) -> Result<ExitCode, Failure> {
    let configs = if all_curves {
        fig3_reference_configs(cfg)
    } else {
        vec![cfg.clone()]
    };
    let mut stdout = std::io::stdout().lock();
    for (k, c) in configs.iter().enumerate() {
        let result = run_fig3(c)?;
        match &c.output_path {
            Some(path) => {
                let path = if all_curves {
                    curve_path(path, c)
                } else {
                    path.clone()
                };
                write_sweep(&result, &path)?;
                eprintln!(
                    "wrote {} ({} rows, mode {})",
                    path.display(),
                    result.rows.len(),
                    c.mode
                );
            }
            None => {
                let csv = sweep_csv(&result.rows);
                // one header for the concatenated curves
                let body = if k == 0 {
                    csv.as_str()
                } else {
                    csv.split_once('\n').map_or("", |(_, b)| b)
                };
                stdout
                    .write_all(body.as_bytes())
                    .context("writing CSV to stdout")?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// `out.csv` becomes `out_sigma0.1_chitau0.001.csv`.
fn curve_path(path: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("fig3");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    let name = format!(
        "{stem}_sigma{}_chitau{}.{ext}",
        cfg.noise.sigma,
        cfg.coupling.chi * cfg.noise.tau
    );
    path.with_file_name(name)
}
