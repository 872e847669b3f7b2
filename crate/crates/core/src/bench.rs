//! Measurement harness: inspect once, time the executor against the CSR
//! baseline, verify, and report GFLOP/s, NER and the codelet breakdown.

use std::fmt::{self, Write as _};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::executor::{spmv_csr_into, sptrsv_csr_into, ExecError, ExecutionContext, Executor};
use crate::kernel::KernelKind;
use crate::matrix::{lower_triangular, CsrMatrix, MatrixError};
use crate::miner::{inspect, CodeletPlan, InspectError, InspectOptions, KindCounts};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("matrix is not usable for {kernel}: {source}")]
    Matrix { kernel: KernelKind, source: MatrixError },
    #[error("SpTRSV needs a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error(transparent)]
    Inspect(#[from] InspectError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("repeats must be at least 1")]
    NoRepeats,
}

/// Number of executor runs needed to pay back the inspector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ner {
    Runs(f64),
    /// The executor is not faster than the baseline.
    NotAmortizable,
}

/// `inspector / (baseline - executor)`, or [`Ner::NotAmortizable`] when
/// `executor >= baseline`.
pub fn ner(inspector: f64, baseline: f64, executor: f64) -> Ner {
    if executor >= baseline {
        Ner::NotAmortizable
    } else {
        Ner::Runs(inspector / (baseline - executor))
    }
}

impl fmt::Display for Ner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ner::Runs(r) => write!(f, "{r}"),
            Ner::NotAmortizable => f.write_str("not amortizable"),
        }
    }
}

impl Serialize for Ner {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Ner::Runs(r) => s.serialize_f64(*r),
            Ner::NotAmortizable => s.serialize_str("not amortizable"),
        }
    }
}

/// Fraction of kernel operations executed by each codelet kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub blas: f64,
    pub psc_i: f64,
    pub psc_ii: f64,
}

impl Breakdown {
    /// All zero when no operation is covered by a codelet.
    pub fn from_counts(k: KindCounts) -> Self {
        let total = k.total();
        if total == 0 {
            return Self::default();
        }
        let t = total as f64;
        Self { blas: k.blas as f64 / t, psc_i: k.psc_i as f64 / t, psc_ii: k.psc_ii as f64 / t }
    }

    pub fn of_plan(plan: &CodeletPlan) -> Self {
        Self::from_counts(plan.ops_by_kind())
    }

    pub fn sum(&self) -> f64 {
        self.blas + self.psc_i + self.psc_ii
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub passed: bool,
    pub max_rel_error: f64,
}

/// Largest `|got - want| / scale` over all entries; an exact match counts
/// as zero error regardless of scale, a NaN on one side only as infinite.
pub fn max_relative_error(got: &[f64], want: &[f64], scale: &[f64]) -> f64 {
    got.iter()
        .zip(want)
        .zip(scale)
        .map(|((&g, &w), &s)| {
            if g == w || (g.is_nan() && w.is_nan()) {
                0.0
            } else if g.is_nan() || w.is_nan() {
                f64::INFINITY
            } else if s > 0.0 {
                (g - w).abs() / s
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Per-entry error scale: `max(|want_i|, Σ_j |a_ij · v_j|)`. The second term
/// keeps rows that cancel to (near) zero from reporting rounding noise as a
/// huge relative error. For SpTRSV `v` is the solution and the diagonal term
/// is included.
pub fn error_scale(a: &CsrMatrix, v: &[f64], want: &[f64]) -> Vec<f64> {
    (0..a.n_rows())
        .map(|i| {
            let mag: f64 = a.row_cols(i).iter().zip(a.row_values(i)).map(|(&j, &x)| (x * v[j]).abs()).sum();
            want[i].abs().max(mag)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub matrix: String,
    pub kernel: KernelKind,
    pub n_rows: usize,
    pub nnz: usize,
    pub inspector_seconds: f64,
    pub executor_seconds: f64,
    pub baseline_seconds: f64,
    pub gflops: f64,
    pub ner: Ner,
    pub breakdown: Breakdown,
    pub verification: Verification,
}

/// Measured wall-clock seconds of one benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timings {
    pub inspector: f64,
    pub executor: f64,
    pub baseline: f64,
}

/// Theoretical flop count: `2·nnz` for SpMV; `2·nnz − n` for SpTRSV (one
/// multiply-add per off-diagonal entry, one divide per row).
pub fn theoretical_flops(kernel: KernelKind, n_rows: usize, nnz: usize) -> f64 {
    match kernel {
        KernelKind::Spmv => 2.0 * nnz as f64,
        KernelKind::Sptrsv => (2 * nnz).saturating_sub(n_rows) as f64,
    }
}

impl BenchReport {
    /// Derives GFLOP/s and NER from the timings.
    pub fn from_parts(
        matrix: impl Into<String>,
        kernel: KernelKind,
        n_rows: usize,
        nnz: usize,
        timings: Timings,
        breakdown: Breakdown,
        verification: Verification,
    ) -> Self {
        let flops = theoretical_flops(kernel, n_rows, nnz);
        let gflops = if timings.executor > 0.0 { flops / timings.executor * 1e-9 } else { 0.0 };
        Self {
            matrix: matrix.into(),
            kernel,
            n_rows,
            nnz,
            inspector_seconds: timings.inspector,
            executor_seconds: timings.executor,
            baseline_seconds: timings.baseline,
            gflops,
            ner: ner(timings.inspector, timings.baseline, timings.executor),
            breakdown,
            verification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Text,
}

/// Column order of the CSV output.
pub const CSV_HEADER: &str = "matrix,kernel,n_rows,nnz,inspector_seconds,executor_seconds,baseline_seconds,gflops,ner,\
blas_fraction,psc_i_fraction,psc_ii_fraction,verified,max_rel_error";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Serializes a batch of reports. CSV has one header line plus one line per
/// report; JSON is an array of objects; text is a readable block per report.
pub fn emit_report(reports: &[BenchReport], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in reports {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    csv_field(&r.matrix),
                    r.kernel,
                    r.n_rows,
                    r.nnz,
                    r.inspector_seconds,
                    r.executor_seconds,
                    r.baseline_seconds,
                    r.gflops,
                    r.ner,
                    r.breakdown.blas,
                    r.breakdown.psc_i,
                    r.breakdown.psc_ii,
                    r.verification.passed,
                    r.verification.max_rel_error,
                );
            }
        }
        ReportFormat::Json => {
            out = serde_json::to_string_pretty(reports).expect("reports serialize");
            out.push('\n');
        }
        ReportFormat::Text => {
            for r in reports {
                let _ = writeln!(out, "{} ({}, {} rows, {} nnz)", r.matrix, r.kernel, r.n_rows, r.nnz);
                let _ = writeln!(out, "  inspector   {:.6e} s", r.inspector_seconds);
                let _ = writeln!(out, "  executor    {:.6e} s  ({:.3} GFLOP/s)", r.executor_seconds, r.gflops);
                let _ = writeln!(out, "  baseline    {:.6e} s", r.baseline_seconds);
                let _ = writeln!(out, "  NER         {}", r.ner);
                let _ = writeln!(
                    out,
                    "  breakdown   BLAS {:.4}  PSC_I {:.4}  PSC_II {:.4}",
                    r.breakdown.blas, r.breakdown.psc_i, r.breakdown.psc_ii
                );
                let _ = writeln!(
                    out,
                    "  verify      {} (max rel error {:e})",
                    if r.verification.passed { "pass" } else { "FAIL" },
                    r.verification.max_rel_error
                );
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub kernel: KernelKind,
    /// Mining window height.
    pub t: usize,
    pub groups: usize,
    pub workers: usize,
    /// Timed runs per measurement; one extra untimed warm-up precedes them.
    pub repeats: usize,
    pub verify_tol: f64,
    /// Skip the inspector and executor; only the baseline is timed.
    pub baseline_only: bool,
    /// Seed for the input vector.
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let workers = rayon::current_num_threads();
        Self {
            kernel: KernelKind::Spmv,
            t: 3,
            groups: workers,
            workers,
            repeats: 5,
            verify_tol: 1e-12,
            baseline_only: false,
            seed: 0,
        }
    }
}

/// Median of a non-empty sample.
pub fn median(samples: &[f64]) -> f64 {
    assert!(!samples.is_empty(), "median of an empty sample");
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Runs `f` once untimed, then `repeats` timed runs; returns the median.
fn time_median(repeats: usize, mut f: impl FnMut()) -> f64 {
    f();
    let samples: Vec<f64> = (0..repeats)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64()
        })
        .collect();
    median(&samples)
}

/// Uniform values in `[0.5, 1.5)`, reproducible from `seed`.
pub fn seeded_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(0.5..1.5)).collect()
}

/// Result of [`run_bench`]: the report plus the plan that was timed.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: BenchReport,
    pub plan: Option<CodeletPlan>,
}

/// Inspects `a` once, times executor and baseline, and verifies the
/// executor result against the baseline. SpTRSV runs on the lower triangle
/// of `a`.
pub fn run_bench(name: &str, a: &CsrMatrix, cfg: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    if cfg.repeats == 0 {
        return Err(BenchError::NoRepeats);
    }
    let matrix = match cfg.kernel {
        KernelKind::Spmv => a.clone(),
        KernelKind::Sptrsv => {
            if !a.is_square() {
                return Err(BenchError::NotSquare { rows: a.n_rows(), cols: a.n_cols() });
            }
            lower_triangular(a).map_err(|source| BenchError::Matrix { kernel: cfg.kernel, source })?.into_csr()
        }
    };
    let (n, nnz, values) = (matrix.n_rows(), matrix.nnz(), matrix.values());
    let input = seeded_vector(if cfg.kernel == KernelKind::Spmv { matrix.n_cols() } else { n }, cfg.seed);

    let mut reference = vec![0.0; n];
    let run_baseline = |out: &mut [f64]| match cfg.kernel {
        KernelKind::Spmv => spmv_csr_into(&matrix, &input, out),
        KernelKind::Sptrsv => sptrsv_csr_into(&matrix, &input, out),
    };
    let baseline = time_median(cfg.repeats, || run_baseline(&mut reference));

    if cfg.baseline_only {
        let timings = Timings { inspector: 0.0, executor: baseline, baseline };
        let verification = Verification { passed: true, max_rel_error: 0.0 };
        let report = BenchReport::from_parts(name, cfg.kernel, n, nnz, timings, Breakdown::default(), verification);
        return Ok(BenchOutcome { report, plan: None });
    }

    let start = Instant::now();
    let plan = inspect(cfg.kernel, &matrix, InspectOptions { window: cfg.t, groups: cfg.groups })?;
    let inspector = start.elapsed().as_secs_f64();

    let exec = Executor::new(cfg.workers);
    let mut result = vec![0.0; n];
    let mut failure = None;
    let executor = time_median(cfg.repeats, || {
        let ctx = match cfg.kernel {
            KernelKind::Spmv => ExecutionContext::Spmv { values, x: &input, y: &mut result },
            KernelKind::Sptrsv => ExecutionContext::Sptrsv { values, b: &input, x: &mut result },
        };
        if let Err(e) = exec.execute(&plan, ctx) {
            failure.get_or_insert(e);
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }

    let scale_source = match cfg.kernel {
        KernelKind::Spmv => &input,
        KernelKind::Sptrsv => &reference,
    };
    let scale = error_scale(&matrix, scale_source, &reference);
    let max_rel_error = max_relative_error(&result, &reference, &scale);
    let verification = Verification { passed: max_rel_error <= cfg.verify_tol, max_rel_error };
    let timings = Timings { inspector, executor, baseline };
    let report = BenchReport::from_parts(name, cfg.kernel, n, nnz, timings, Breakdown::of_plan(&plan), verification);
    Ok(BenchOutcome { report, plan: Some(plan) })
}
