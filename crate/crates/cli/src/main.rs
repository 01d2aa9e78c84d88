//! Command line interface: experiment subcommands over JSON configs with
//! CSV/JSON outputs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
//! 4 fixed-point non-convergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spde_mkv::error::Error;
use spde_mkv::harness::{
    chaos_experiment, chaoticity_test, check_conditions, coupled_chaos, means_csv,
    moment_diagnostic, residuals_csv, simulate_run, solve_law, ExperimentConfig, RunReport,
    TestFunctional,
};
use spde_mkv::transport::{wasserstein_p, wasserstein_path, EmpiricalMeasure, PathCloud};

#[derive(Parser)]
#[command(name = "spde-mkv", version, about = "Interacting SPDE particle systems, Picard solves of the McKean-Vlasov law, and propagation-of-chaos experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix; derived files get suffixes like `.csv`,
    /// `.report.json`, `.provenance.json`. Without it the deterministic
    /// result body goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the assumption checkers and emit a JSON verdict document
    Check(RunArgs),
    /// Simulate one interacting particle system and write its path cloud
    Simulate {
        #[command(flatten)]
        args: RunArgs,
        /// Particle count (must be an entry of n_list; default: the largest)
        #[arg(long)]
        n: Option<usize>,
        /// Also write the per-step empirical-mean CSV
        #[arg(long)]
        means: bool,
    },
    /// Solve the McKean-Vlasov law by Picard iteration on measure flows
    Mkv(RunArgs),
    /// Propagation-of-chaos convergence ladder against the Picard reference
    Chaos(RunArgs),
    /// Synchronous-coupling distance between the system and its proxies
    CoupledChaos(RunArgs),
    /// Chaoticity covariance table for two bounded test functionals
    Chaoticity(RunArgs),
    /// Uniform-in-N moment diagnostic
    Moments(RunArgs),
    /// Exact Wasserstein distance between two cloud files
    Wasserstein {
        /// First cloud (state cloud `{"atoms": ...}` or path cloud `{"paths": ...}`)
        a: PathBuf,
        /// Second cloud of the same shape
        b: PathBuf,
        /// Wasserstein order
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run() -> Result<ExitCode, Error> {
    match Cli::parse().command {
        Command::Check(args) => {
            let cfg = load_config(&args)?;
            let verdicts = check_conditions(&cfg)?;
            let body = serde_json::to_string_pretty(&verdicts).expect("verdicts serialize");
            match &args.out {
                Some(prefix) => write_file(&suffixed(prefix, ".verdicts.json"), &body)?,
                None => println!("{body}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { args, n, means } => {
            let cfg = load_config(&args)?;
            let n = n.unwrap_or(*cfg.n_list.last().expect("validated n_list is nonempty"));
            let cloud = simulate_run(&cfg, n)?;
            let body = serde_json::to_string_pretty(&cloud).expect("cloud serializes");
            match &args.out {
                Some(prefix) => {
                    write_file(&suffixed(prefix, ".cloud.json"), &body)?;
                    if means {
                        write_file(
                            &suffixed(prefix, ".means.csv"),
                            &means_csv(&cloud, cfg.p_prime),
                        )?;
                    }
                    write_file(
                        &suffixed(prefix, ".provenance.json"),
                        &simple_provenance("simulate", &cfg),
                    )?;
                }
                None => println!("{body}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Mkv(args) => {
            let cfg = load_config(&args)?;
            let run = solve_law(&cfg)?;
            let residuals = residuals_csv(&run);
            match &args.out {
                Some(prefix) => {
                    let cloud = serde_json::to_string_pretty(&run.cloud).expect("cloud serializes");
                    write_file(&suffixed(prefix, ".cloud.json"), &cloud)?;
                    write_file(&suffixed(prefix, ".residuals.csv"), &residuals)?;
                    let provenance = serde_json::json!({
                        "subcommand": "mkv",
                        "seed": cfg.master_seed,
                        "config_hash": cfg.config_hash(),
                        "version": env!("CARGO_PKG_VERSION"),
                        "unix_millis": unix_millis(),
                        "converged": run.converged,
                        "iterations": run.iterations,
                        "iteration_ms": run.iteration_millis,
                    });
                    write_file(
                        &suffixed(prefix, ".provenance.json"),
                        &serde_json::to_string_pretty(&provenance).expect("provenance serializes"),
                    )?;
                }
                None => print!("{residuals}"),
            }
            if run.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "fixed point not reached: residual {} after {} iterations",
                    run.residuals.last().copied().unwrap_or(f64::NAN),
                    run.iterations
                );
                Ok(ExitCode::from(4))
            }
        }
        Command::Chaos(args) => emit_report(&args, chaos_experiment),
        Command::CoupledChaos(args) => emit_report(&args, coupled_chaos),
        Command::Chaoticity(args) => {
            emit_report(&args, |cfg| chaoticity_test(cfg, &TestFunctional::default_pair()))
        }
        Command::Moments(args) => emit_report(&args, moment_diagnostic),
        Command::Wasserstein { a, b, p } => {
            let distance = cloud_distance(&a, &b, p)?;
            println!("{distance}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn emit_report(
    args: &RunArgs,
    op: impl Fn(&ExperimentConfig) -> Result<RunReport, Error>,
) -> Result<ExitCode, Error> {
    let cfg = load_config(args)?;
    let report = op(&cfg)?;
    match &args.out {
        Some(prefix) => {
            write_file(&suffixed(prefix, ".csv"), &report.to_csv())?;
            write_file(&suffixed(prefix, ".report.json"), &report.to_json())?;
            write_file(&suffixed(prefix, ".provenance.json"), &report.provenance_json())?;
        }
        None => print!("{}", report.to_csv()),
    }
    Ok(ExitCode::SUCCESS)
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

/// Reads a state cloud (`atoms`) or path cloud (`paths`) and dispatches to
/// the matching distance.
fn cloud_distance(a: &Path, b: &Path, p: f64) -> Result<f64, Error> {
    let read = |path: &Path| -> Result<serde_json::Value, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    };
    let va = read(a)?;
    let vb = read(b)?;
    fn parse<T: serde::de::DeserializeOwned>(
        what: &str,
        v: serde_json::Value,
    ) -> Result<T, Error> {
        serde_json::from_value(v).map_err(|e| Error::Config(format!("{what}: {e}")))
    }
    match (va.get("atoms").is_some(), vb.get("atoms").is_some()) {
        (true, true) => {
            let ma: EmpiricalMeasure = parse("first cloud", va)?;
            let mb: EmpiricalMeasure = parse("second cloud", vb)?;
            wasserstein_p(&ma, &mb, p)
        }
        (false, false) => {
            let ca: PathCloud = parse("first cloud", va)?;
            let cb: PathCloud = parse("second cloud", vb)?;
            wasserstein_path(&ca, &cb, p)
        }
        _ => Err(Error::Config("cloud files are of different shapes".into())),
    }
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    prefix.with_file_name(name)
}

fn write_file(path: &Path, body: &str) -> Result<(), Error> {
    std::fs::write(path, body)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn simple_provenance(subcommand: &str, cfg: &ExperimentConfig) -> String {
    let value = serde_json::json!({
        "subcommand": subcommand,
        "seed": cfg.master_seed,
        "config_hash": cfg.config_hash(),
        "version": env!("CARGO_PKG_VERSION"),
        "unix_millis": unix_millis(),
    });
    serde_json::to_string_pretty(&value).expect("provenance serializes")
}

fn unix_millis() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}
