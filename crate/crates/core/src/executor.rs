//! Parametric executor: three generic codelet bodies dispatched from the
//! plan, plus the naive CSR baselines used as oracles.
//!
//! Partitions run in order with a barrier between them. Regions of one
//! partition run concurrently; each region owns the output span of its rows,
//! so no two tasks write the same element.

use rayon::prelude::*;
use thiserror::Error;

use crate::codelet::{BlasCodelet, Codelet, PscICodelet, PscIICodelet};
use crate::kernel::KernelKind;
use crate::matrix::{CsrMatrix, TriangularMatrix};
use crate::miner::{CodeletPlan, RegionPlan};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("{what} has length {got}, expected {expected}")]
    Dimension { what: &'static str, got: usize, expected: usize },
    #[error("plan was built for {plan}, not {requested}")]
    KernelMismatch { plan: KernelKind, requested: KernelKind },
    #[error("plan was built for a {plan_rows}x{plan_cols} matrix with {plan_nnz} entries")]
    PatternMismatch { plan_rows: usize, plan_cols: usize, plan_nnz: usize },
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<(), ExecError> {
    if got == expected {
        Ok(())
    } else {
        Err(ExecError::Dimension { what, got, expected })
    }
}

/// One outer iteration of a codelet: its MAT values, the slice of `x` its
/// VEC indices are relative to, and those indices (`None` = contiguous).
type RowOperands<'v> = (&'v [f64], &'v [f64], Option<&'v [usize]>);

/// Sums `B` rows at once. Each row keeps its own left-to-right summation
/// order, so results are bitwise equal to one row at a time; interleaving
/// only overlaps the independent add chains.
#[inline(always)]
#[allow(clippy::needless_range_loop)] // row-interleaved on purpose
fn sum_block<const B: usize>(rows: [RowOperands<'_>; B]) -> [f64; B] {
    let mut s = [0.0; B];
    let n = rows[0].0.len();
    let idx = rows.map(|r| r.2);
    if idx.iter().all(Option::is_none) {
        for j in 0..n {
            for r in 0..B {
                s[r] += rows[r].0[j] * rows[r].1[j];
            }
        }
    } else {
        let idx = idx.map(|i| i.expect("indexed rows are not mixed with contiguous ones"));
        for j in 0..n {
            for r in 0..B {
                s[r] += rows[r].0[j] * rows[r].1[idx[r][j]];
            }
        }
    }
    s
}

#[inline(always)]
fn block<'v, const B: usize>(i: usize, row: &impl Fn(usize) -> RowOperands<'v>, emit: &mut impl FnMut(usize, f64)) {
    let s = sum_block::<B>(std::array::from_fn(|k| row(i + k)));
    for (k, v) in s.into_iter().enumerate() {
        emit(i + k, v);
    }
}

/// Runs rows `0..m` in blocks of up to four.
#[inline(always)]
fn for_rows<'v>(m: usize, row: impl Fn(usize) -> RowOperands<'v>, mut emit: impl FnMut(usize, f64)) {
    let mut i = 0;
    while m - i >= 4 {
        block::<4>(i, &row, &mut emit);
        i += 4;
    }
    match m - i {
        3 => block::<3>(i, &row, &mut emit),
        2 => block::<2>(i, &row, &mut emit),
        1 => block::<1>(i, &row, &mut emit),
        _ => {}
    }
}

/// `out[o(i) - out_base] += Σ_j values[g(i,j)] * x[h(i,j)]`, all indices strided.
pub fn exec_blas_codelet(c: &BlasCodelet, values: &[f64], x: &[f64], out: &mut [f64], out_base: usize) {
    if c.vec.inner == 1 {
        let row = |i| -> RowOperands<'_> { (&values[c.mat.row_start(i)..][..c.n], &x[c.vec.row_start(i)..][..c.n], None) };
        for_rows(c.m, row, |i, s| out[c.out.row_start(i) - out_base] += s);
    } else {
        for i in 0..c.m {
            let a = &values[c.mat.row_start(i)..][..c.n];
            let sum = a.iter().enumerate().fold(0.0, |s, (j, &av)| s + av * x[c.vec.at(i, j)]);
            out[c.out.row_start(i) - out_base] += sum;
        }
    }
}

/// Same statement with VEC resolved through the shared gather table. The
/// table is loaded once and reused for every outer iteration.
pub fn exec_psci_codelet(c: &PscICodelet, values: &[f64], x: &[f64], out: &mut [f64], out_base: usize) {
    let offsets = &c.vec.offsets[..c.n];
    let row = |i| -> RowOperands<'_> { (&values[c.mat.row_start(i)..][..c.n], &x[c.vec.row_start(i)..], Some(offsets)) };
    for_rows(c.m, row, |i, s| out[c.out.row_start(i) - out_base] += s);
}

/// Same statement with OUT and VEC resolved through per-row and per-point
/// tables.
pub fn exec_pscii_codelet(c: &PscIICodelet, values: &[f64], x: &[f64], out: &mut [f64], out_base: usize) {
    let row = |i| -> RowOperands<'_> { (&values[c.mat.row_start(i)..][..c.n], x, Some(&c.vec[i * c.n..][..c.n])) };
    for_rows(c.m, row, |i, s| out[c.out[i] - out_base] += s);
}

/// Dispatches one codelet to its generic body.
#[inline]
pub fn exec_codelet(c: &Codelet, values: &[f64], x: &[f64], out: &mut [f64], out_base: usize) {
    match c {
        Codelet::Blas(c) => exec_blas_codelet(c, values, x, out, out_base),
        Codelet::PscI(c) => exec_psci_codelet(c, values, x, out, out_base),
        Codelet::PscII(c) => exec_pscii_codelet(c, values, x, out, out_base),
    }
}

/// Kernel operands for one plan execution.
#[derive(Debug)]
pub enum ExecutionContext<'a> {
    /// `y = A·x`; `y` is zeroed before execution.
    Spmv { values: &'a [f64], x: &'a [f64], y: &'a mut [f64] },
    /// Solves `L·x = b` into `x`.
    Sptrsv { values: &'a [f64], b: &'a [f64], x: &'a mut [f64] },
}

/// Whether region spans are ascending and pairwise disjoint.
fn spans_disjoint<'r>(regions: impl IntoIterator<Item = &'r RegionPlan>) -> bool {
    let mut end = 0;
    for r in regions {
        let span = r.span();
        if span.is_empty() {
            continue;
        }
        if span.start < end {
            return false;
        }
        end = span.end;
    }
    true
}

/// Splits `buf` into one mutable slice per group of regions, covering the
/// groups' combined spans. Spans must be ascending and disjoint.
fn split_groups<'b, 'r>(buf: &'b mut [f64], groups: &[&'r [&'r RegionPlan]]) -> Vec<(&'r [&'r RegionPlan], usize, &'b mut [f64])> {
    let mut parts = Vec::with_capacity(groups.len());
    let mut rest = buf;
    let mut consumed = 0;
    for &g in groups {
        let start = g.iter().map(|r| r.span().start).min().unwrap_or(consumed).max(consumed);
        let end = g.iter().map(|r| r.span().end).max().unwrap_or(start).max(start);
        let tail = std::mem::take(&mut rest);
        let (_, tail) = tail.split_at_mut(start - consumed);
        let (mine, tail) = tail.split_at_mut(end - start);
        parts.push((g, start, mine));
        rest = tail;
        consumed = end;
    }
    parts
}

fn run_region(region: &RegionPlan, values: &[f64], x: &[f64], out: &mut [f64], base: usize) {
    for c in &region.codelets {
        exec_codelet(c, values, x, out, base);
    }
}

/// Owns the worker pool used by [`Executor::execute`].
pub struct Executor {
    workers: usize,
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    /// Uses up to `workers` threads, but never more than the hardware
    /// offers: surplus threads cannot run concurrently and only add
    /// scheduling overhead. `workers <= 1` runs on the calling thread.
    /// Results do not depend on the thread count.
    pub fn new(workers: usize) -> Self {
        let hardware = std::thread::available_parallelism().map_or(1, |n| n.get());
        let threads = workers.min(hardware);
        let pool = (threads > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("failed to start worker pool")
        });
        Self { workers: workers.max(1), pool }
    }

    /// Requested worker count.
    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Threads actually used.
    pub fn threads(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// Runs `f(region, base, out)` for every region, where `out` starts at
    /// row `base`. Regions must have ascending, disjoint spans; they are
    /// handed to the pool in a few contiguous chunks per thread because
    /// single regions are too small to be worth a task each.
    fn for_each_region<F>(&self, buf: &mut [f64], regions: &[&RegionPlan], f: F)
    where
        F: Fn(&RegionPlan, usize, &mut [f64]) + Sync,
    {
        match &self.pool {
            Some(pool) if regions.len() > 1 => {
                let chunk = regions.len().div_ceil(4 * pool.current_num_threads());
                let groups: Vec<&[&RegionPlan]> = regions.chunks(chunk).collect();
                let parts = split_groups(buf, &groups);
                pool.install(|| {
                    parts.into_par_iter().for_each(|(g, base, out)| g.iter().for_each(|r| f(r, base, out)));
                });
            }
            _ => regions.iter().for_each(|r| f(r, 0, buf)),
        }
    }

    pub fn execute(&self, plan: &CodeletPlan, ctx: ExecutionContext<'_>) -> Result<(), ExecError> {
        match ctx {
            ExecutionContext::Spmv { values, x, y } => {
                if plan.kernel != KernelKind::Spmv {
                    return Err(ExecError::KernelMismatch { plan: plan.kernel, requested: KernelKind::Spmv });
                }
                check_len("values", values.len(), plan.nnz)?;
                check_len("x", x.len(), plan.n_cols)?;
                check_len("y", y.len(), plan.n_rows)?;
                y.fill(0.0);
                // No cross-row dependencies: when region spans are disjoint
                // across the whole plan, everything runs in one pass.
                let mut all: Vec<&RegionPlan> = plan.regions().collect();
                if !spans_disjoint(all.iter().copied()) {
                    all.sort_by_key(|r| r.span().start);
                }
                if spans_disjoint(all.iter().copied()) {
                    self.for_each_region(y, &all, |r, base, out| run_region(r, values, x, out, base));
                } else {
                    for part in &plan.partitions {
                        let regions: Vec<&RegionPlan> = part.regions.iter().collect();
                        self.for_each_region(y, &regions, |r, base, out| run_region(r, values, x, out, base));
                    }
                }
            }
            ExecutionContext::Sptrsv { values, b, x } => {
                if plan.kernel != KernelKind::Sptrsv {
                    return Err(ExecError::KernelMismatch { plan: plan.kernel, requested: KernelKind::Sptrsv });
                }
                check_len("values", values.len(), plan.nnz)?;
                check_len("b", b.len(), plan.n_rows)?;
                check_len("x", x.len(), plan.n_rows)?;
                let mut acc = vec![0.0; plan.n_rows];
                for part in &plan.partitions {
                    let regions: Vec<&RegionPlan> = part.regions.iter().collect();
                    let solved: &[f64] = x;
                    self.for_each_region(&mut acc, &regions, |r, base, out| {
                        run_region(r, values, solved, out, base);
                        for f in &r.finalize {
                            let a = &mut out[f.row - base];
                            *a = (b[f.rhs] - *a) / values[f.diag];
                        }
                    });
                    for &row in &part.rows {
                        x[row] = acc[row];
                    }
                }
            }
        }
        Ok(())
    }
}

/// One-shot execution with a temporary pool of `workers` threads.
pub fn execute_plan(plan: &CodeletPlan, ctx: ExecutionContext<'_>, workers: usize) -> Result<(), ExecError> {
    Executor::new(workers).execute(plan, ctx)
}

/// Checks that `plan` was mined from a pattern with the same shape as `a`.
pub fn check_plan_matches(plan: &CodeletPlan, a: &CsrMatrix) -> Result<(), ExecError> {
    if plan.n_rows != a.n_rows() || plan.n_cols != a.n_cols() || plan.nnz != a.nnz() {
        return Err(ExecError::PatternMismatch { plan_rows: plan.n_rows, plan_cols: plan.n_cols, plan_nnz: plan.nnz });
    }
    Ok(())
}

/// Row-wise CSR `y = A·x`.
pub fn spmv_csr_baseline(a: &CsrMatrix, x: &[f64]) -> Result<Vec<f64>, ExecError> {
    check_len("x", x.len(), a.n_cols())?;
    let mut y = vec![0.0; a.n_rows()];
    spmv_csr_into(a, x, &mut y);
    Ok(y)
}

/// Allocation-free form of [`spmv_csr_baseline`]; lengths are not checked.
pub fn spmv_csr_into(a: &CsrMatrix, x: &[f64], y: &mut [f64]) {
    let (ap, ai, ax) = (a.row_offsets(), a.col_indices(), a.values());
    for (i, yi) in y.iter_mut().enumerate() {
        let mut sum = 0.0;
        for p in ap[i]..ap[i + 1] {
            sum += ax[p] * x[ai[p]];
        }
        *yi = sum;
    }
}

/// Forward substitution for `L·x = b`.
pub fn sptrsv_csr_baseline(l: &TriangularMatrix, b: &[f64]) -> Result<Vec<f64>, ExecError> {
    check_len("b", b.len(), l.n())?;
    let mut x = vec![0.0; l.n()];
    sptrsv_csr_into(l.csr(), b, &mut x);
    Ok(x)
}

/// Allocation-free forward substitution; `l` must be canonical lower
/// triangular with the diagonal last in each row.
pub fn sptrsv_csr_into(l: &CsrMatrix, b: &[f64], x: &mut [f64]) {
    let (lp, li, lx) = (l.row_offsets(), l.col_indices(), l.values());
    for i in 0..x.len() {
        let diag = lp[i + 1] - 1;
        let mut sum = 0.0;
        for p in lp[i]..diag {
            sum += lx[p] * x[li[p]];
        }
        x[i] = (b[i] - sum) / lx[diag];
    }
}
