//! `fairaudit`: batch front end for the audit toolkit.
//!
//! Exit codes: 0 all groups pass (or informational subcommand), 2 any
//! group fails, 3 insufficient information only, 1 usage or input
//! errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use fairaudit_core::dataio::summarize;
use fairaudit_core::power::{power_at, required_n, PilotSummary};
use fairaudit_core::protocol::{
    config_digest, load_dataset, lock_config, run_audit, AuditReport,
};
use fairaudit_core::synthlab::{coverage_experiment, default_grid, rows_to_csv};

#[derive(Parser)]
#[command(
    name = "fairaudit",
    version,
    about = "Statistically valid fairness audits of deterministic pricing algorithms",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the audit named by the configuration's criterion.
    Audit(RunArgs),
    /// Run the proxy-discrimination shift test (criterion forced to PD).
    PdTest(RunArgs),
    /// Run the conditional-demographic-parity TOST (criterion forced to CDP).
    CdpTest(RunArgs),
    /// Compute required audit sample size from pilot quantities.
    Power(PowerArgs),
    /// Run the synthetic-lab coverage experiment grid.
    Simulate(SimulateArgs),
    /// Print summary statistics for a dataset.
    Summarize(SummarizeArgs),
    /// Re-render a stored report and reproduce its exit code.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Audit configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Dataset (CSV with a header row).
    #[arg(long)]
    data: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a configuration key (repeatable), e.g. --set alpha=0.10.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct PowerArgs {
    /// Pilot sample size.
    #[arg(long)]
    n0: u64,
    /// Pilot variance of the estimator.
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Target power 1-beta.
    #[arg(long, default_value_t = 0.80)]
    power: f64,
    /// Assumed |true effect - TOST threshold|.
    #[arg(long)]
    effect: f64,
    /// Also report achieved power at this sample size.
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Where to write the experiment CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subsample size per replicate.
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Monte Carlo replicates per cell.
    #[arg(long, default_value_t = 500)]
    reps: usize,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Also write the summary as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A report produced by `audit`/`pd-test`/`cdp-test`.
    #[arg(long)]
    input: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not usage errors.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type CliError = Box<dyn std::error::Error>;

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Audit(args) => run_audit_command(args, None),
        Command::PdTest(args) => run_audit_command(args, Some("PD")),
        Command::CdpTest(args) => run_audit_command(args, Some("CDP")),
        Command::Power(args) => run_power(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Summarize(args) => run_summarize(args),
        Command::Report(args) => run_report(args),
    }
}

/// Apply `--set key=value` (and `--seed`, and a forced criterion) onto
/// the raw configuration document, then lock the effective result.
fn effective_config_text(
    raw: &str,
    args: &RunArgs,
    forced_criterion: Option<&str>,
) -> Result<String, CliError> {
    let mut value: serde_json::Value = serde_json::from_str(raw)
        .map_err(|e| format!("configuration is not valid JSON: {e}"))?;
    let obj = value
        .as_object_mut()
        .ok_or("configuration top level must be an object")?;
    if let Some(criterion) = forced_criterion {
        obj.insert(
            "criterion".into(),
            serde_json::Value::String(criterion.into()),
        );
    }
    for kv in &args.set {
        let (key, val) = kv
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        let parsed = serde_json::from_str::<serde_json::Value>(val)
            .unwrap_or_else(|_| serde_json::Value::String(val.to_string()));
        obj.insert(key.to_string(), parsed);
    }
    if let Some(seed) = args.seed {
        obj.insert("seed".into(), serde_json::Value::from(seed));
    }
    Ok(value.to_string())
}

/// Timestamp for the manifest: honors SOURCE_DATE_EPOCH so identical
/// inputs can produce byte-identical reports.
fn manifest_timestamp() -> Option<String> {
    let secs = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v.parse::<i64>().ok()?,
        Err(_) => chrono::Utc::now().timestamp(),
    };
    Some(
        chrono::DateTime::from_timestamp(secs, 0)?
            .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    )
}

fn run_audit_command(args: RunArgs, forced_criterion: Option<&str>) -> Result<u8, CliError> {
    let raw = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let effective = effective_config_text(&raw, &args, forced_criterion)?;
    let (config, _digest) = lock_config(&effective)?;

    let bytes = std::fs::read(&args.data)
        .map_err(|e| format!("cannot read {}: {e}", args.data.display()))?;
    let dataset = load_dataset(&config, &bytes)?;

    let report = run_audit(&config, &dataset, manifest_timestamp())?;
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_json()?)?;
    }
    print!("{}", report.render_text());
    Ok(report.exit_code() as u8)
}

fn run_power(args: PowerArgs) -> Result<u8, CliError> {
    let pilot = PilotSummary::new(args.n0, args.sigma2, args.effect, 0.0, args.alpha, args.power)?;
    let n = required_n(&pilot)?;
    println!("{n}");
    if let Some(at) = args.n {
        println!("power at n={at}: {:.4}", power_at(&pilot, at));
    }
    Ok(0)
}

fn run_simulate(args: SimulateArgs) -> Result<u8, CliError> {
    let grid = default_grid(args.n, args.reps, args.seed);
    let rows = coverage_experiment(&grid)?;
    let file = std::fs::File::create(&args.out)?;
    rows_to_csv(&rows, file)?;
    for r in &rows {
        println!(
            "{:<24} rho={:.3} coverage classical={:.3} hc3={:.3}",
            r.label, r.rho, r.coverage_classical, r.coverage_hc3
        );
    }
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn run_summarize(args: SummarizeArgs) -> Result<u8, CliError> {
    let raw = std::fs::read_to_string(&args.config)?;
    let (config, _) = lock_config(&raw)?;
    let bytes = std::fs::read(&args.data)?;
    let dataset = load_dataset(&config, &bytes)?;
    let table = summarize(&dataset)?;
    print!("{table}");
    if let Some(out) = &args.out {
        let file = std::fs::File::create(out)?;
        table.to_csv(file)?;
    }
    Ok(0)
}

fn run_report(args: ReportArgs) -> Result<u8, CliError> {
    let raw = std::fs::read_to_string(&args.input)?;
    let report = AuditReport::from_json(&raw)?;
    let recomputed = config_digest(&report.config)?;
    if recomputed != report.config_sha256 {
        return Err(format!(
            "config digest mismatch: report says {}, recomputation gives {recomputed}",
            report.config_sha256
        )
        .into());
    }
    print!("{}", report.render_text());
    Ok(report.exit_code() as u8)
}
