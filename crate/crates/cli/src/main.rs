use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use corrsec::experiment::{
    run_single, run_sweep, Axis, ExperimentConfig, Scheme, DEFAULT_BRUTE_FORCE_GRID,
};
use corrsec::montecarlo::{validate_channel_model, ChannelValidation, McConfig};

/// KS distance the channel model must reach at the reference sample size.
const KS_TOLERANCE: f64 = 0.01;
/// 99% critical value of the KS statistic, scaled by `1/√n`.
const KS_CRITICAL: f64 = 1.63;

/// Exit code when results were written but some check or instance failed.
const EXIT_FLAGGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "corrsec",
    version,
    about = "Correlation-aware AN beamforming experiments"
)]
struct Cli {
    /// Master random seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Also write a JSON mirror of the results.
    #[arg(long, global = true)]
    json: bool,
    /// Report zero runtimes so that output is byte-reproducible.
    #[arg(long, global = true)]
    no_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare sampled eavesdropper powers with the analytic density.
    ValidateChannel {
        /// Validation case, 1 to 4.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        case: u8,
    },
    /// Average the secrecy rate over random channels along one axis.
    Sweep {
        #[arg(long)]
        axis: Axis,
        /// TOML file with system parameters and sweep settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replications per axis value; overrides the config file.
        #[arg(long)]
        replications: Option<usize>,
        /// Comma-separated axis values; overrides the config file.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Design every scheme for one channel draw and check it by simulation.
    Single {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_validation_csv(path: &Path, v: &ChannelValidation) -> Result<()> {
    let mut text = String::from("bin_center,empirical,analytic\n");
    for b in &v.bins {
        text.push_str(&format!(
            "{:.8e},{:.8e},{:.8e}\n",
            b.center, b.empirical, b.analytic
        ));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn validate(cli: &Cli, case: u8) -> Result<bool> {
    let cfg = McConfig::new(cli.samples.unwrap_or(1_000_000), cli.seed.unwrap_or(0));
    let v = validate_channel_model(case, &cfg)?;
    let csv_path = cli.out.join(format!("validate_case{case}.csv"));
    write_validation_csv(&csv_path, &v)?;
    if cli.json {
        write_json(&cli.out.join(format!("validate_case{case}.json")), &v)?;
    }
    let limit = KS_TOLERANCE.max(KS_CRITICAL / (cfg.samples as f64).sqrt());
    println!(
        "case {case}: samples {} KS {:.5} (limit {limit:.5}) -> {}",
        v.samples,
        v.ks,
        csv_path.display()
    );
    if v.ks >= limit {
        eprintln!("case {case}: KS distance {:.5} exceeds {limit:.5}", v.ks);
        return Ok(false);
    }
    Ok(true)
}

fn sweep(
    cli: &Cli,
    axis: Axis,
    config: Option<&Path>,
    replications: Option<usize>,
    values: Option<&[f64]>,
) -> Result<bool> {
    let cfg = load_config(config)?;
    let mut spec = cfg.sweep_spec(axis)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(r) = replications {
        spec.replications = r;
    }
    if let Some(v) = values {
        spec.values = v.to_vec();
    }
    spec.timing = !cli.no_timing;
    let result = run_sweep(&spec)?;
    let csv_path = cli.out.join(format!("sweep_{}.csv", axis.name()));
    let file =
        File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    result.write_csv(BufWriter::new(file))?;
    if cli.json {
        write_json(
            &cli.out.join(format!("sweep_{}.json", axis.name())),
            &result,
        )?;
    }
    for r in &result.rows {
        println!(
            "{} = {:<6} {:<12} Rs {:.4} ± {:.4}  {:.1} ms",
            axis.name(),
            r.axis_value,
            r.scheme.name(),
            r.rs_mean,
            r.rs_se,
            r.runtime_ms
        );
    }
    let failures = result.failure_count();
    if failures > 0 {
        eprintln!(
            "{failures} instance(s) failed; their seeds are listed in the JSON output and log"
        );
        return Ok(false);
    }
    Ok(true)
}

fn single(cli: &Cli, config: Option<&Path>) -> Result<bool> {
    let cfg = load_config(config)?;
    let params = cfg.params()?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let schemes = cfg.schemes.clone().unwrap_or_else(|| Scheme::ALL.to_vec());
    let report = run_single(
        &params,
        seed,
        &schemes,
        cfg.brute_force_grid.unwrap_or(DEFAULT_BRUTE_FORCE_GRID),
        cli.samples.unwrap_or(100_000),
        &cfg.design_options(),
        !cli.no_timing,
    )?;
    write_json(&cli.out.join("single.json"), &report)?;
    let mut ok = true;
    for d in &report.designs {
        let mc = &d.mc;
        println!(
            "{:<12} Rs {:.4} phi {:.3} outage {:.4} ± {:.4} MC rate {:.4} leakage gap {:.4} flags {:?}",
            d.run.scheme.name(),
            d.run.rs,
            d.run.phi,
            mc.outage,
            mc.outage_se,
            d.mc_rate_at_eps,
            mc.leakage_gap,
            d.run.flags
        );
        if mc.outage > params.epsilon + 3.0 * mc.outage_se {
            eprintln!(
                "{}: simulated outage {:.4} exceeds the target {}",
                d.run.scheme.name(),
                mc.outage,
                params.epsilon
            );
            ok = false;
        }
    }
    Ok(ok)
}

fn run(cli: &Cli) -> Result<bool> {
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    match &cli.command {
        Command::ValidateChannel { case } => validate(cli, *case),
        Command::Sweep {
            axis,
            config,
            replications,
            values,
        } => {
            if *replications == Some(0) {
                bail!("--replications must be positive");
            }
            sweep(
                cli,
                *axis,
                config.as_deref(),
                *replications,
                values.as_deref(),
            )
        }
        Command::Single { config } => single(cli, config.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FLAGGED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
