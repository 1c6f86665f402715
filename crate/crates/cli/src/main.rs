use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{error::ErrorKind, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use risd2d::harness::{
    run_sweep, solve_instance, summarize, write_summary_csv, Axis, ExperimentSpec, OperatingPoint, RecordWriter,
    SweepOptions,
};
use risd2d::{SchemeId, SimParams};

const EXIT_INVALID: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "risd2d", version, about = "RIS-assisted D2D mode selection, power control and phase design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one seeded instance and write the result as JSON.
    Solve(SolveArgs),
    /// Run a seeded parameter sweep and write per-run and summary CSVs.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Cellular users C.
    #[arg(long, default_value_t = 5)]
    cu: usize,
    /// D2D pairs D.
    #[arg(long, default_value_t = 10)]
    d2d: usize,
    /// RIS elements per panel side N.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Phase quantization bits e.
    #[arg(long, default_value_t = 3)]
    e: u32,
    /// One of PA, MP, RP, NonRIS, NonCG, Fmm.
    #[arg(long, default_value = "PA")]
    scheme: String,
    /// Run seed (the `seed` column of sweep output).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file overriding any subset of the model parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// cellular_users | d2d_pairs | ris_side_n | quant_bits_e (aliases: cu, d2d, n, e).
    #[arg(long)]
    axis: String,
    /// Comma-separated values or an inclusive range `lo..=hi`.
    #[arg(long)]
    values: String,
    /// Comma-separated scheme list.
    #[arg(long, default_value = "PA,MP,RP,NonRIS,NonCG,Fmm")]
    schemes: String,
    /// Repetitions per (axis value, scheme).
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    /// Fixed cellular users when not swept.
    #[arg(long, default_value_t = 5)]
    cu: usize,
    /// Fixed D2D pairs when not swept.
    #[arg(long, default_value_t = 10)]
    d2d: usize,
    /// Fixed N when not swept.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Fixed e when not swept.
    #[arg(long, default_value_t = 3)]
    e: u32,
    #[arg(long)]
    params: Option<PathBuf>,
    /// Per-run CSV.
    #[arg(long)]
    out: PathBuf,
    /// Summary CSV; defaults to `<out>` with a `.summary.csv` suffix.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Directory for per-run JSON results and traces.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

fn defaults_help() -> String {
    let value = serde_json::to_value(SimParams::default()).expect("defaults serialize");
    let mut out = String::from("Model parameter defaults (override with --params <json>):\n");
    if let Some(map) = value.as_object() {
        for (k, v) in map {
            out.push_str(&format!("  {k} = {v}\n"));
        }
    }
    out
}

fn load_params(path: Option<&Path>) -> anyhow::Result<SimParams> {
    let Some(path) = path else {
        return Ok(SimParams::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(SimParams::from_json(&text)?)
}

fn parse_values(s: &str) -> anyhow::Result<Vec<usize>> {
    if let Some((lo, hi)) = s.split_once("..=") {
        let (lo, hi): (usize, usize) = (lo.trim().parse()?, hi.trim().parse()?);
        if lo > hi {
            bail!("empty range `{s}`");
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| v.trim().parse::<usize>().with_context(|| format!("bad value `{v}`")))
        .collect()
}

fn parse_schemes(s: &str) -> anyhow::Result<Vec<SchemeId>> {
    s.split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| Ok(v.trim().parse::<SchemeId>()?))
        .collect()
}

enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

fn solve(args: SolveArgs) -> Result<u8, Failure> {
    let params = load_params(args.params.as_deref()).map_err(Failure::Invalid)?;
    let scheme: SchemeId = args.scheme.parse().map_err(|e| Failure::Invalid(anyhow::Error::from(e)))?;
    let point = OperatingPoint {
        cellular_users: args.cu,
        d2d_pairs: args.d2d,
        ris_side: args.n,
        quant_bits: args.e,
    };
    point.apply(&params).map_err(|e| Failure::Invalid(e.into()))?;
    let result = solve_instance(&params, &point, scheme, args.seed).map_err(|e| match e {
        risd2d::Error::InvalidParam { .. } | risd2d::Error::Placement(_) => Failure::Invalid(e.into()),
        other => Failure::Runtime(other.into()),
    })?;
    let json = result.to_json().map_err(|e| Failure::Runtime(e.into()))?;
    match &args.out {
        Some(path) => fs::write(path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Runtime)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            if let Err(e) = writeln!(stdout, "{json}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(Failure::Runtime(e.into()));
                }
            }
        }
    }
    if let Some(path) = &args.trace {
        let lines = result.history_jsonl().map_err(|e| Failure::Runtime(e.into()))?;
        fs::write(path, lines)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Runtime)?;
    }
    eprintln!(
        "{scheme}: sum rate {:.6e} bit/s after {} iterations ({})",
        result.sum_rate_bps,
        result.iterations,
        if result.feasible { "feasible" } else { "infeasible" }
    );
    Ok(if result.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn sweep(args: SweepArgs) -> Result<u8, Failure> {
    let invalid = |e: anyhow::Error| Failure::Invalid(e);
    let params = load_params(args.params.as_deref()).map_err(invalid)?;
    let axis: Axis = args.axis.parse().map_err(|e: risd2d::Error| invalid(e.into()))?;
    let spec = ExperimentSpec {
        axis,
        values: parse_values(&args.values).map_err(invalid)?,
        fixed: OperatingPoint {
            cellular_users: args.cu,
            d2d_pairs: args.d2d,
            ris_side: args.n,
            quant_bits: args.e,
        },
        schemes: parse_schemes(&args.schemes).map_err(invalid)?,
        seeds: args.seeds,
        master_seed: args.master_seed,
        params,
    };
    spec.validate().map_err(|e| invalid(e.into()))?;

    let file = File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(Failure::Runtime)?;
    let mut writer = RecordWriter::new(BufWriter::new(file));
    let options = SweepOptions {
        trace_dir: args.trace_dir.clone(),
    };
    let records = run_sweep(&spec, &options, |chunk| {
        eprintln!("{} = {}: {} runs done", spec.axis, chunk[0].axis, chunk.len());
        writer.write(chunk)
    })
    .map_err(|e| Failure::Runtime(e.into()))?;
    writer
        .into_inner()
        .and_then(|mut w| w.flush().map_err(Into::into))
        .map_err(|e| Failure::Runtime(e.into()))?;

    let rows = summarize(&records).map_err(|e| Failure::Runtime(e.into()))?;
    let path = args.summary.clone().unwrap_or_else(|| summary_path(&args.out));
    let file = File::create(&path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::Runtime)?;
    write_summary_csv(BufWriter::new(file), &rows).map_err(|e| Failure::Runtime(e.into()))?;

    let infeasible = records.iter().filter(|r| !r.feasible).count();
    eprintln!("{} runs, {infeasible} infeasible", records.len());
    Ok(if infeasible > 0 { EXIT_INFEASIBLE } else { 0 })
}

fn main() -> ExitCode {
    let command = Cli::command().after_help(defaults_help());
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_INVALID,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Sweep(args) => sweep(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
