use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use decay_spectra::decay::DecayProfile;
use decay_spectra::experiment::{
    oracle_ensemble, run_experiment, sde_check, ExperimentConfig, OracleChoice, OracleDraw,
};
use decay_spectra::io::{
    read_ensemble, summarize, write_json, write_oracle_draws, write_plot_scripts, write_simulation,
    Timings,
};
use decay_spectra::oracles::{Kernel, OracleConfig, OracleKind, OracleSample, SineBetaConfig};
use decay_spectra::points::{Origin, Window};
use decay_spectra::rng::derive_seed;
use decay_spectra::stats::{compare, Reference, Statistic, BOOTSTRAP_RESAMPLES};
use decay_spectra::torus::{lyapunov_tau, DiffusionSpec, TorusField};
use decay_spectra::{Error, Result};
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "decay-spectra",
    version,
    about = "Spectra of 1-d Schrodinger operators with decaying random potential"
)]
struct Cli {
    /// Worker threads (default: RAYON_NUM_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Lyapunov exponent tau(E) and beta = 1/tau.
    Tau {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        energy: f64,
        #[arg(long, default_value = "cos")]
        field: String,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
    },
    /// Run the experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output_dir from the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Record wall-clock times in summary.json (breaks byte-identity).
        #[arg(long)]
        timings: bool,
    },
    /// Sample a reference ensemble.
    Oracle {
        #[arg(long)]
        kind: String,
        /// beta for sine_beta, tau for exp_bm.
        #[arg(long)]
        param: Option<f64>,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value = "log_ratio")]
        kernel: String,
        /// Window lo:hi for point processes.
        #[arg(long, default_value = "-50:50", allow_hyphen_values = true)]
        window: String,
        #[arg(long, default_value_t = 512)]
        cells: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Distance between two ensemble directories, with a bootstrap CI.
    Compare {
        #[arg(long)]
        a: PathBuf,
        /// Directory, or `uniform` for the uniform law on [0, 1].
        #[arg(long)]
        b: String,
        #[arg(long)]
        statistic: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = BOOTSTRAP_RESAMPLES)]
        resamples: usize,
    },
    /// Moments of the renormalized Prufer amplitude between s and t.
    SdeCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
    },
    /// Write gnuplot scripts for an ensemble directory.
    Plot {
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn parse_window(s: &str) -> Result<Window> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("window must be lo:hi, got {s:?}")))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("bad window bound {v:?}")))
    };
    Window::new(num(lo)?, num(hi)?)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Tau {
            alpha,
            energy,
            field,
            sigma2,
        } => {
            DecayProfile::new(alpha)?;
            let field: TorusField = field.parse()?;
            let tau = lyapunov_tau(&field, DiffusionSpec::new(sigma2)?, energy)?;
            print_json(&json!({
                "alpha": alpha,
                "energy": energy,
                "field": field.to_string(),
                "tau": tau,
                "beta": 1.0 / tau,
            }))
        }
        Command::Simulate {
            config,
            output,
            timings,
        } => simulate(&config, output, timings),
        Command::Oracle {
            kind,
            param,
            samples,
            kernel,
            window,
            cells,
            seed,
            output,
        } => {
            if samples == 0 {
                return Err(Error::InvalidArgument(
                    "--samples must be at least 1".into(),
                ));
            }
            let kind = OracleKind::parse(&kind, param, kernel.parse::<Kernel>()?)?;
            let config = OracleConfig {
                kind,
                window: parse_window(&window)?,
                cells,
                sine: SineBetaConfig::default(),
            };
            let draws = (0..samples)
                .into_par_iter()
                .map(|i| {
                    Ok(match config.sample(derive_seed(seed, i as u64))? {
                        OracleSample::Points(p) => OracleDraw {
                            points: Some(p),
                            measure: None,
                        },
                        OracleSample::Measure { measure, center } => OracleDraw {
                            points: None,
                            measure: Some((measure, center)),
                        },
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_oracle_draws(&output, kind.origin(), &draws)?;
            print_json(&json!({
                "kind": kind.origin().as_str(),
                "param": param,
                "samples": samples,
                "output": output.display().to_string(),
            }))
        }
        Command::Compare {
            a,
            b,
            statistic,
            seed,
            resamples,
        } => {
            let statistic: Statistic = statistic.parse()?;
            let ea = read_ensemble(&a)?;
            let eb;
            let reference = if b == "uniform" {
                Reference::Uniform
            } else {
                eb = read_ensemble(Path::new(&b))?;
                Reference::Ensemble(&eb)
            };
            let c = compare(&ea, reference, statistic, seed, resamples)?;
            print_json(&serde_json::to_value(c)?)
        }
        Command::SdeCheck {
            config,
            s,
            t,
            lambda,
        } => {
            let config = ExperimentConfig::from_file(&config)?;
            let d = sde_check(&config, s, t, lambda)?;
            print_json(&serde_json::to_value(d)?)
        }
        Command::Plot { input } => {
            let scripts = write_plot_scripts(&input)?;
            for s in scripts {
                println!("{}", s.display());
            }
            Ok(())
        }
    }
}

fn simulate(config_path: &Path, output: Option<PathBuf>, timings: bool) -> Result<()> {
    let config = ExperimentConfig::from_file(config_path)?;
    let dir = output
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| {
            Error::Config("no output directory (set output_dir or pass --output)".into())
        })?;
    let start = Instant::now();
    let outputs = run_experiment(&config)?;
    let simulated = start.elapsed().as_secs_f64();
    let mut summary = summarize(&config, &outputs)?;
    let write_start = Instant::now();
    write_simulation(&dir, &summary, &outputs)?;
    if let Some(choice) = config.oracle {
        let draws = oracle_ensemble(&config, choice)?;
        let origin = match choice {
            OracleChoice::Fixed(kind) => kind.origin(),
            OracleChoice::Auto if config.alpha == 0.5 => Origin::ExpBm,
            OracleChoice::Auto => draws
                .iter()
                .find_map(|d| d.points.as_ref().map(|p| p.origin()))
                .unwrap_or(Origin::Clock),
        };
        write_oracle_draws(&dir.join("oracle"), origin, &draws)?;
    }
    if timings {
        summary.timings = Some(Timings {
            simulate_seconds: simulated,
            write_seconds: write_start.elapsed().as_secs_f64(),
        });
        write_json(&dir.join("summary.json"), &summary)?;
    }
    print_json(&json!({
        "output": dir.display().to_string(),
        "realizations": summary.realizations,
        "eigenvalues_total": summary.eigenvalues_total,
    }))
}
