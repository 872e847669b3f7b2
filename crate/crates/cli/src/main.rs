//! `psc`: inspect, execute, verify and time sparse kernels.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use psc_core::bench::{run_bench, seeded_vector, BenchConfig, BenchReport, ReportFormat, Timings};
use psc_core::matrix::{generate_pattern, parse_matrix_market, write_matrix_market, Band, PatternKind};
use psc_core::{CsrMatrix, KernelKind};

const SYNTH_PREFIX: &str = "synth:";

#[derive(Parser)]
#[command(name = "psc", version, about = "Partially strided codelet inspector-executor for SpMV and SpTRSV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect, execute, verify and time one or more matrices.
    Run(RunArgs),
    /// Write a synthetic matrix in Matrix Market format.
    Gen {
        /// Synthetic spec, e.g. `synth:banded:100:2:lower`.
        spec: String,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kernel {
    Spmv,
    Sptrsv,
}

impl From<Kernel> for KernelKind {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Spmv => KernelKind::Spmv,
            Kernel::Sptrsv => KernelKind::Sptrsv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
            Format::Text => ReportFormat::Text,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    kernel: Kernel,
    /// Matrix Market file or `synth:` spec; may be repeated.
    #[arg(long)]
    matrix: Vec<String>,
    /// File listing one matrix (path or `synth:` spec) per line; `#` starts a
    /// comment and relative paths resolve against the manifest's directory.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Rows per mining window.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    t: u64,
    /// Partition count for kernels without cross-row dependencies
    /// [default: worker count].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    groups: Option<u64>,
    /// Executor threads [default: available parallelism].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Timed runs per measurement (median is reported).
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Maximum accepted relative error against the CSR baseline.
    #[arg(long, default_value_t = 1e-12)]
    verify_tol: f64,
    /// Write the mined plan as JSON.
    #[arg(long)]
    dump_plan: Option<PathBuf>,
    /// Time only the CSR baseline.
    #[arg(long)]
    baseline_only: bool,
    /// Replace measured timings with `INSPECTOR,BASELINE,EXECUTOR` seconds.
    #[arg(long, hide = true, value_parser = parse_timings)]
    inject_timings: Option<Timings>,
}

fn parse_timings(s: &str) -> Result<Timings, String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    match v[..] {
        [inspector, baseline, executor] => Ok(Timings { inspector, baseline, executor }),
        _ => Err("expected INSPECTOR,BASELINE,EXECUTOR".into()),
    }
}

/// Seed for synthetic matrices and input vectors, from `PSC_SEED`.
fn seed_from_env() -> Result<u64> {
    match std::env::var("PSC_SEED") {
        Ok(s) => s.trim().parse().with_context(|| format!("PSC_SEED={s:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

fn parse_usize(field: &str, what: &str) -> Result<usize> {
    field.parse().with_context(|| format!("invalid {what} {field:?}"))
}

/// Parses `synth:dense:N`, `synth:banded:N:BW[:lower|upper|both]`,
/// `synth:scattered:ROWS:C0,C1,...` or `synth:random:ROWS:COLS:DENSITY`.
fn parse_synth(spec: &str, seed: u64) -> Result<PatternKind> {
    let body = spec.strip_prefix(SYNTH_PREFIX).unwrap_or(spec);
    let f: Vec<&str> = body.split(':').collect();
    let kind = match f[..] {
        ["dense", n] => PatternKind::DenseBlock { n: parse_usize(n, "size")? },
        ["banded", n, bw] | ["banded", n, bw, _] => {
            let band = match f.get(3).copied().unwrap_or("both") {
                "lower" => Band::Lower,
                "upper" => Band::Upper,
                "both" => Band::Both,
                other => bail!("unknown band {other:?} (lower, upper, both)"),
            };
            PatternKind::Banded { n: parse_usize(n, "size")?, bandwidth: parse_usize(bw, "bandwidth")?, band }
        }
        ["scattered", rows, cols] => PatternKind::ScatteredGather {
            rows: parse_usize(rows, "row count")?,
            cols: cols.split(',').map(|c| parse_usize(c, "column")).collect::<Result<_>>()?,
        },
        ["random", rows, cols, density] => PatternKind::RandomUniform {
            rows: parse_usize(rows, "row count")?,
            cols: parse_usize(cols, "column count")?,
            density: density.parse().with_context(|| format!("invalid density {density:?}"))?,
            seed,
        },
        _ => bail!("unrecognised synthetic spec {spec:?}"),
    };
    Ok(kind)
}

/// Builds a synthetic matrix with seeded values in `[0.5, 1.5)`. For SpTRSV
/// the diagonal is made dominant so the solve is well conditioned.
fn synthesize(spec: &str, kernel: KernelKind, seed: u64) -> Result<CsrMatrix> {
    let pattern = generate_pattern(&parse_synth(spec, seed)?)?;
    let a = pattern.with_values(seeded_vector(pattern.nnz(), seed.wrapping_add(1)))?;
    Ok(match kernel {
        KernelKind::Spmv => a,
        KernelKind::Sptrsv => a.with_dominant_diagonal(1.0)?,
    })
}

fn load(source: &str, kernel: KernelKind, seed: u64) -> Result<CsrMatrix> {
    if source.starts_with(SYNTH_PREFIX) {
        return synthesize(source, kernel, seed);
    }
    let text = std::fs::read_to_string(source).with_context(|| format!("cannot read {source}"))?;
    parse_matrix_market(&text).with_context(|| format!("cannot parse {source}"))
}

fn read_manifest(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            if l.starts_with(SYNTH_PREFIX) || Path::new(l).is_absolute() {
                l.to_string()
            } else {
                dir.join(l).to_string_lossy().into_owned()
            }
        })
        .collect())
}

fn display_name(source: &str) -> String {
    if source.starts_with(SYNTH_PREFIX) {
        source.to_string()
    } else {
        Path::new(source).file_stem().map_or_else(|| source.to_string(), |s| s.to_string_lossy().into_owned())
    }
}

/// Returns whether every matrix verified.
fn run(args: RunArgs) -> Result<bool> {
    let mut sources = args.matrix.clone();
    if let Some(m) = &args.manifest {
        sources.extend(read_manifest(m)?);
    }
    ensure!(!sources.is_empty(), "no matrices given (use --matrix or --manifest)");
    ensure!(args.verify_tol >= 0.0, "--verify-tol must be non-negative");

    let seed = seed_from_env()?;
    let kernel = KernelKind::from(args.kernel);
    let workers = args.workers.map_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()), |w| w as usize);
    let cfg = BenchConfig {
        kernel,
        t: args.t as usize,
        groups: args.groups.map_or(workers, |g| g as usize),
        workers,
        repeats: args.repeats as usize,
        verify_tol: args.verify_tol,
        baseline_only: args.baseline_only,
        seed,
    };

    let mut reports: Vec<BenchReport> = Vec::with_capacity(sources.len());
    let mut plans = Vec::new();
    for source in &sources {
        let a = load(source, kernel, seed)?;
        let name = display_name(source);
        let outcome = run_bench(&name, &a, &cfg).with_context(|| format!("benchmark of {name} failed"))?;
        let mut report = outcome.report;
        if let Some(t) = args.inject_timings {
            report = BenchReport::from_parts(report.matrix, report.kernel, report.n_rows, report.nnz, t, report.breakdown, report.verification);
        }
        if let Some(plan) = outcome.plan {
            plans.push((name, plan));
        }
        reports.push(report);
    }

    if let Some(path) = &args.dump_plan {
        let json = match &plans[..] {
            [(_, plan)] => plan.to_json(),
            _ => serde_json::Value::Array(
                plans.iter().map(|(name, p)| serde_json::json!({ "matrix": name, "plan": p.to_json() })).collect(),
            ),
        };
        let text = serde_json::to_string_pretty(&json)?;
        std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }

    print!("{}", psc_core::bench::emit_report(&reports, args.format.into()));
    let failed: Vec<&str> = reports.iter().filter(|r| !r.verification.passed).map(|r| r.matrix.as_str()).collect();
    if !failed.is_empty() {
        eprintln!("verification failed for: {}", failed.join(", "));
    }
    Ok(failed.is_empty())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => Ok(if run(args)? { ExitCode::SUCCESS } else { ExitCode::FAILURE }),
        Command::Gen { spec, output } => {
            let a = synthesize(&spec, KernelKind::Spmv, seed_from_env()?)?;
            std::fs::write(&output, write_matrix_market(&a)).with_context(|| format!("cannot write {}", output.display()))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
