//! Batch driver for the racetm simulator.
//!
//! Subcommands: `simulate` (one mode, report + optional VCD), `compare`
//! (same samples and seed across several modes), `sweep` (one simulate per
//! parameter value) and `print-config` (dump the effective configuration).
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
//! 3 internal invariant violation (a simulator bug, never bad data).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use racetm_core::config::{Mode, RunConfig};
use racetm_core::error::Error;
use racetm_core::model::{load_model, load_samples, TmModel};
use racetm_core::report;
use racetm_core::sim::{run_batch, RunOutput};

#[derive(Parser)]
#[command(
    name = "racetm",
    version,
    about = "Event-driven time-domain Tsetlin machine inference simulator",
    after_help = "Run `racetm print-config` for every configuration key and its default."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one batch simulation and write report.csv (and run.vcd).
    Simulate(CommonArgs),
    /// Run several modes over the same samples and seed; write comparison.csv.
    Compare(CompareArgs),
    /// Re-run one simulation per parameter value; write sweep.csv.
    Sweep(SweepArgs),
    /// Print the effective configuration (defaults + file + overrides).
    PrintConfig(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Config file: one `key = value` per line, `#` comments.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model file path (JSON).
    #[arg(long)]
    model: Option<String>,
    /// Dataset CSV path (F binary columns, optional label column).
    #[arg(long)]
    data: Option<String>,
    /// digital-oracle | hamming-td | cotm-ideal | cotm-architectural.
    #[arg(long)]
    mode: Option<String>,
    /// tba | mesh.
    #[arg(long)]
    arbiter: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default racetm-out).
    #[arg(long)]
    out: Option<String>,
    /// Write a VCD waveform of the run.
    #[arg(long)]
    vcd: bool,
    /// Average power in watts for the energy-efficiency cross-check.
    #[arg(long)]
    power: Option<f64>,
    /// Override any config key, e.g. --set time_domain.e=6 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated list of at least two modes.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// One of: e, tau, tdc_resolution, delta_meta, arbiter, K.
    #[arg(long)]
    parameter: String,
    /// Comma-separated parameter values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::Model { .. }
        | Error::Dataset { .. }
        | Error::Dimension(_)
        | Error::VariantMismatch(_) => 1,
        Error::Io(_) => 2,
        Error::TimeViolation { .. }
        | Error::TimeLoop { .. }
        | Error::Deadlock { .. }
        | Error::Invariant(_) => 3,
    }
}

fn build_config(args: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("config file {}: {e}", path.display()),
            ))
        })?;
        cfg.apply_text(&text)?;
    }
    if let Some(m) = &args.model {
        cfg.model = Some(m.clone());
    }
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(mode) = &args.mode {
        cfg.mode = Mode::parse(mode)?;
    }
    if let Some(arb) = &args.arbiter {
        cfg.set("arbiter", arb)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if args.vcd {
        cfg.vcd = true;
    }
    if let Some(p) = args.power {
        cfg.power = Some(p);
    }
    for kv in &args.sets {
        cfg.apply_override(kv)?;
    }
    Ok(cfg)
}

fn read_named(path: &str, what: &str) -> Result<Vec<u8>, Error> {
    fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{what} {path}: {e}"))))
}

fn load_inputs(cfg: &RunConfig) -> Result<(TmModel, Vec<racetm_core::model::Sample>), Error> {
    let model_path = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::Config("no model file given (--model or config key)".into()))?;
    let data_path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset given (--data or config key)".into()))?;
    let model = load_model(&read_named(model_path, "model file")?)?;
    let text = String::from_utf8(read_named(data_path, "dataset file")?)
        .map_err(|e| Error::Config(format!("dataset {data_path} is not UTF-8: {e}")))?;
    let samples = load_samples(&text, model.num_features())?;
    Ok((model, samples))
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(cfg.out.clone().unwrap_or_else(|| "racetm-out".to_string()))
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

/// Escalate monitor hits to the internal-invariant exit code.
fn check_run_health(out: &RunOutput) -> Result<(), Error> {
    if out.protocol_violations > 0 {
        return Err(Error::Invariant(format!(
            "{} handshake protocol violations",
            out.protocol_violations
        )));
    }
    if out.one_hot_violations > 0 {
        return Err(Error::Invariant(format!(
            "{} one-hot grant violations",
            out.one_hot_violations
        )));
    }
    if out.deadlocks > 0 {
        return Err(Error::Invariant(format!(
            "{} four-phase interface deadlocks",
            out.deadlocks
        )));
    }
    Ok(())
}

fn cmd_simulate(args: &CommonArgs) -> Result<(), Error> {
    let cfg = build_config(args)?;
    let (model, samples) = load_inputs(&cfg)?;
    let out = run_batch(&model, &samples, &cfg)?;
    check_run_health(&out)?;

    let dir = out_dir(&cfg);
    write_artifact(
        &dir,
        "report.csv",
        report::render_report_csv(&out).as_bytes(),
    )?;
    write_artifact(
        &dir,
        "summary.txt",
        report::render_summary_text(&out).as_bytes(),
    )?;
    write_artifact(&dir, "config.txt", cfg.dump().as_bytes())?;
    if let Some(vcd) = &out.vcd {
        write_artifact(&dir, "run.vcd", vcd)?;
    }
    print!("{}", report::render_summary_text(&out));
    println!("artifacts under {}", dir.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Error> {
    if args.modes.len() < 2 {
        return Err(Error::Config("compare needs at least two --modes".into()));
    }
    let base = build_config(&args.common)?;
    let (model, samples) = load_inputs(&base)?;
    let mut rows = Vec::new();
    for mode_name in &args.modes {
        let mut cfg = base.clone();
        cfg.mode = Mode::parse(mode_name)?;
        let out = run_batch(&model, &samples, &cfg)?;
        check_run_health(&out)?;
        rows.push((mode_name.clone(), out));
    }
    let dir = out_dir(&base);
    write_artifact(
        &dir,
        "comparison.csv",
        report::render_comparison_csv(&rows).as_bytes(),
    )?;
    write_artifact(&dir, "config.txt", base.dump().as_bytes())?;
    print!("{}", report::render_comparison_text(&rows));
    println!("artifacts under {}", dir.display());
    Ok(())
}

fn sweep_value(
    cfg: &RunConfig,
    model: &TmModel,
    parameter: &str,
    value: &str,
) -> Result<(RunConfig, TmModel), Error> {
    let mut cfg = cfg.clone();
    let mut model = model.clone();
    match parameter {
        "e" => cfg.set("time_domain.e", value)?,
        "tau" => cfg.set("time_domain.tau", value)?,
        "tdc_resolution" => cfg.set("time_domain.tdc_resolution", value)?,
        "delta_meta" => cfg.set("arbiter.delta_meta", value)?,
        "arbiter" => cfg.set("arbiter", value)?,
        "K" => {
            let k: usize = value
                .parse()
                .map_err(|_| Error::Config(format!("K value '{value}' is not a count")))?;
            model = model.truncate_classes(k)?;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown sweep parameter '{other}' (e | tau | tdc_resolution | delta_meta | arbiter | K)"
            )))
        }
    }
    Ok((cfg, model))
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    if args.values.is_empty() {
        return Err(Error::Config(
            "sweep needs a non-empty --values list".into(),
        ));
    }
    let base = build_config(&args.common)?;
    let (model, samples) = load_inputs(&base)?;
    let mut rows = Vec::new();
    for value in &args.values {
        let (cfg, model) = sweep_value(&base, &model, &args.parameter, value)?;
        let out = run_batch(&model, &samples, &cfg)?;
        check_run_health(&out)?;
        rows.push((value.clone(), out));
    }
    let dir = out_dir(&base);
    write_artifact(
        &dir,
        "sweep.csv",
        report::render_sweep_csv(&args.parameter, &rows).as_bytes(),
    )?;
    write_artifact(&dir, "config.txt", base.dump().as_bytes())?;
    print!("{}", report::render_sweep_csv(&args.parameter, &rows));
    println!("artifacts under {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap formats help/usage itself; only the exit code is remapped.
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Compare(args) => cmd_compare(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::PrintConfig(args) => build_config(args).map(|cfg| print!("{}", cfg.dump())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_for(&err))
        }
    }
}
