//! The inspector: windowed regions, the three mining strategies and
//! min-cost selection into a [`CodeletPlan`].
//!
//! Strategies carve rectangles greedily: rows are scanned top-down, a run is
//! extended right along the row, then down across the following window rows
//! as long as the descriptor form still holds. Whatever a form cannot take is
//! handed to the next form; PSC_II accepts every point, so every strategy
//! covers its region completely.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codelet::{
    codelet_cost, total_cost, BlasCodelet, Codelet, CodeletError, Gather, PscICodelet, PscIICodelet, Stride,
};
use crate::kernel::{compute_access_functions, CodeletClass, FopdTable, KernelError, KernelKind, KernelModel};
use crate::matrix::CsrMatrix;
use crate::schedule::{find_dependencies, partition_iteration_space, Schedule};

#[derive(Debug, Error)]
pub enum InspectError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("mined an invalid codelet: {0}")]
    Codelet(#[from] CodeletError),
}

/// Up to `t` consecutive rows of one partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub rows: Vec<usize>,
    /// Index of `rows[0]` inside its partition.
    #[serde(skip)]
    pub offset: usize,
}

/// Splits a partition's (sorted) rows into windows of at most `t` rows.
pub fn get_consecutive_iterations(partition: &[usize], t: usize) -> Vec<Window> {
    let t = t.max(1);
    partition
        .chunks(t)
        .enumerate()
        .map(|(k, rows)| Window { rows: rows.to_vec(), offset: k * t })
        .collect()
}

/// Per-row inner FOPDs of one partition, computed once and shared by every
/// window and strategy.
#[derive(Debug, Clone)]
pub struct PartitionFopd {
    /// `vec_inner[k][j] = VEC(row_k, j+1) - VEC(row_k, j)`.
    vec_inner: Vec<Vec<i64>>,
}

impl PartitionFopd {
    pub fn compute(model: &KernelModel, partition: &[usize]) -> Self {
        let vec_inner = partition
            .iter()
            .map(|&row| {
                let grid = [model.vec().row(row).iter().map(|&c| c as i64).collect::<Vec<_>>()];
                FopdTable::from_grid(&grid).d_inner.pop().unwrap_or_default()
            })
            .collect();
        // MAT is contiguous within every row of a CSR pattern.
        assert!(partition.iter().all(|&row| model.mat().row(row).windows(2).all(|w| w[1] == w[0] + 1)));
        Self { vec_inner }
    }

    fn window<'a>(&'a self, w: &Window) -> &'a [Vec<i64>] {
        &self.vec_inner[w.offset..w.offset + w.rows.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    BlasFirst,
    PsciFirst,
    PsciiFirst,
}

impl Strategy {
    /// Tie-break order.
    pub const ALL: [Strategy; 3] = [Strategy::BlasFirst, Strategy::PsciFirst, Strategy::PsciiFirst];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Form {
    Blas,
    PscI,
    PscII,
}

/// Greedy rectangle extraction over one window.
struct Carver<'a> {
    model: &'a KernelModel,
    rows: &'a [usize],
    vec_inner: &'a [Vec<i64>],
    consumed: Vec<Vec<bool>>,
    codelets: Vec<Codelet>,
}

/// Row-to-row shifts fixed by the first extension step.
#[derive(Debug, Clone, Copy)]
struct Shift {
    out: isize,
    mat: isize,
    vec: isize,
}

impl<'a> Carver<'a> {
    fn new(model: &'a KernelModel, window: &'a Window, fopd: &'a PartitionFopd) -> Self {
        let consumed = window.rows.iter().map(|&r| vec![false; model.space().inner_extent(r)]).collect();
        Self { model, rows: &window.rows, vec_inner: fopd.window(window), consumed, codelets: Vec::new() }
    }

    fn extent(&self, k: usize) -> usize {
        self.consumed[k].len()
    }

    fn mat(&self, k: usize, q: usize) -> usize {
        self.model.mat().row(self.rows[k])[q]
    }

    fn col(&self, k: usize, q: usize) -> usize {
        self.model.vec().row(self.rows[k])[q]
    }

    fn segment_end(&self, k: usize, p: usize) -> usize {
        (p..self.extent(k)).find(|&q| self.consumed[k][q]).unwrap_or(self.extent(k))
    }

    /// Whether `q..q+n` is a whole unconsumed segment of row `k`.
    fn is_exact_segment(&self, k: usize, q: usize, n: usize) -> bool {
        (q == 0 || self.consumed[k][q - 1]) && self.segment_end(k, q) == q + n
    }

    fn run_len(&self, form: Form, k: usize, p: usize) -> usize {
        let seg = self.segment_end(k, p) - p;
        match form {
            Form::Blas => 1 + self.vec_inner[k][p..p + seg - 1].iter().take_while(|&&d| d == 1).count(),
            Form::PscI | Form::PscII => seg,
        }
    }

    fn qualifies(form: Form, n: usize) -> bool {
        match form {
            Form::Blas | Form::PscI => n >= 2,
            Form::PscII => n >= 1,
        }
    }

    /// Row `k` can host the run `q..q+n` matching the anchor run at `(k0, p)`.
    fn row_matches(&self, form: Form, k0: usize, p: usize, k: usize, q: usize, n: usize) -> bool {
        if q + n > self.extent(k) || self.consumed[k][q..q + n].iter().any(|&c| c) {
            return false;
        }
        match form {
            Form::Blas => self.vec_inner[k][q..q + n - 1].iter().all(|&d| d == 1),
            Form::PscI => {
                self.is_exact_segment(k, q, n) && self.vec_inner[k][q..q + n - 1] == self.vec_inner[k0][p..p + n - 1]
            }
            Form::PscII => self.is_exact_segment(k, q, n),
        }
    }

    fn shift_ok(form: Form, expected: Shift, got: Shift) -> bool {
        match form {
            Form::Blas | Form::PscI => expected.out == got.out && expected.mat == got.mat && expected.vec == got.vec,
            Form::PscII => expected.mat == got.mat,
        }
    }

    fn shift(&self, from: (usize, usize), to: (usize, usize)) -> Shift {
        Shift {
            out: self.rows[to.0] as isize - self.rows[from.0] as isize,
            mat: self.mat(to.0, to.1) as isize - self.mat(from.0, from.1) as isize,
            vec: self.col(to.0, to.1) as isize - self.col(from.0, from.1) as isize,
        }
    }

    /// Start positions of the rectangle anchored at `(k0, p)` whose second row
    /// starts at `first`, following the fixed shift downwards.
    fn extend(&self, form: Form, k0: usize, p: usize, n: usize, first: usize) -> (Vec<usize>, Shift) {
        let mut starts = vec![p, first];
        let shift = self.shift((k0, p), (k0 + 1, first));
        let mut k = k0 + 1;
        while k + 1 < self.rows.len() {
            let next = k + 1;
            if self.extent(next) == 0 {
                break;
            }
            let target = self.mat(k, starts[k - k0]) as isize + shift.mat;
            let q = target - self.mat(next, 0) as isize;
            if q < 0 || !self.row_matches(form, k0, p, next, q as usize, n) {
                break;
            }
            let q = q as usize;
            if !Self::shift_ok(form, shift, self.shift((k, starts[k - k0]), (next, q))) {
                break;
            }
            starts.push(q);
            k = next;
        }
        (starts, shift)
    }

    fn carve(&mut self, form: Form) {
        for k0 in 0..self.rows.len() {
            let mut p = 0;
            while p < self.extent(k0) {
                if self.consumed[k0][p] {
                    p += 1;
                    continue;
                }
                let n = self.run_len(form, k0, p);
                if !Self::qualifies(form, n) {
                    p += 1;
                    continue;
                }
                let (starts, shift) = self.best_extension(form, k0, p, n);
                self.emit(form, k0, &starts, n, shift);
                p += n;
            }
        }
    }

    /// Tries every start in the next row; keeps the tallest rectangle, then the
    /// smallest VEC shift, then the leftmost start.
    fn best_extension(&self, form: Form, k0: usize, p: usize, n: usize) -> (Vec<usize>, Shift) {
        let single = (vec![p], Shift { out: 0, mat: 0, vec: 0 });
        if k0 + 1 >= self.rows.len() || self.extent(k0 + 1) < n {
            return single;
        }
        let mut best: Option<(Vec<usize>, Shift)> = None;
        for q in 0..=self.extent(k0 + 1) - n {
            if !self.row_matches(form, k0, p, k0 + 1, q, n) {
                continue;
            }
            let cand = self.extend(form, k0, p, n, q);
            let better = match &best {
                None => true,
                Some((b, bs)) => {
                    cand.0.len() > b.len() || (cand.0.len() == b.len() && cand.1.vec.abs() < bs.vec.abs())
                }
            };
            if better {
                best = Some(cand);
            }
        }
        best.unwrap_or(single)
    }

    fn emit(&mut self, form: Form, k0: usize, starts: &[usize], n: usize, shift: Shift) {
        let m = starts.len();
        for (d, &q) in starts.iter().enumerate() {
            self.consumed[k0 + d][q..q + n].iter_mut().for_each(|c| *c = true);
        }
        let p = starts[0];
        let mat = Stride::new(self.mat(k0, p), shift.mat, 1);
        let out = Stride::new(self.rows[k0], shift.out, 0);
        let codelet = match form {
            Form::Blas => Codelet::Blas(BlasCodelet { m, n, out, mat, vec: Stride::new(self.col(k0, p), shift.vec, 1) }),
            Form::PscI => {
                let base = self.col(k0, p);
                let offsets = (p..p + n).map(|q| self.col(k0, q) - base).collect();
                Codelet::PscI(PscICodelet { m, n, out, mat, vec: Gather { base, outer: shift.vec, offsets } })
            }
            Form::PscII => {
                let out = (0..m).map(|d| self.rows[k0 + d]).collect();
                let vec = starts
                    .iter()
                    .enumerate()
                    .flat_map(|(d, &q)| (q..q + n).map(move |j| (d, j)))
                    .map(|(d, j)| self.col(k0 + d, j))
                    .collect();
                Codelet::PscII(PscIICodelet { m, n, out, mat, vec })
            }
        };
        self.codelets.push(codelet);
    }

    fn finish(self) -> (Vec<Codelet>, usize) {
        assert!(self.consumed.iter().flatten().all(|&c| c));
        let cost = total_cost(&self.codelets);
        (self.codelets, cost)
    }
}

fn run_forms(model: &KernelModel, window: &Window, fopd: &PartitionFopd, forms: &[Form]) -> (Vec<Codelet>, usize) {
    let mut carver = Carver::new(model, window, fopd);
    for &form in forms {
        carver.carve(form);
    }
    carver.finish()
}

/// BLAS rectangles first, then PSC_I, then PSC_II for the rest.
pub fn blas_first(model: &KernelModel, window: &Window, fopd: &PartitionFopd) -> (Vec<Codelet>, usize) {
    run_forms(model, window, fopd, &[Form::Blas, Form::PscI, Form::PscII])
}

/// PSC_I rectangles (shared gather tables) first, then PSC_II.
pub fn psci_first(model: &KernelModel, window: &Window, fopd: &PartitionFopd) -> (Vec<Codelet>, usize) {
    run_forms(model, window, fopd, &[Form::PscI, Form::PscII])
}

/// PSC_II only; never fails.
pub fn pscii_first(model: &KernelModel, window: &Window, fopd: &PartitionFopd) -> (Vec<Codelet>, usize) {
    run_forms(model, window, fopd, &[Form::PscII])
}

pub fn run_strategy(
    strategy: Strategy,
    model: &KernelModel,
    window: &Window,
    fopd: &PartitionFopd,
) -> (Vec<Codelet>, usize) {
    match strategy {
        Strategy::BlasFirst => blas_first(model, window, fopd),
        Strategy::PsciFirst => psci_first(model, window, fopd),
        Strategy::PsciiFirst => pscii_first(model, window, fopd),
    }
}

/// SpTRSV completion step: `x[row] = (b[rhs] - acc[row]) / values[diag]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalizeRecord {
    pub row: usize,
    pub diag: usize,
    pub rhs: usize,
}

/// One mined window: the cheapest strategy's codelets plus any finalize
/// records for its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPlan {
    pub rows: Vec<usize>,
    pub strategy: Strategy,
    pub cost: usize,
    pub codelets: Vec<Codelet>,
    pub finalize: Vec<FinalizeRecord>,
}

impl RegionPlan {
    /// `[first_row, last_row + 1)`; spans of one partition never overlap.
    pub fn span(&self) -> std::ops::Range<usize> {
        match (self.rows.first(), self.rows.last()) {
            (Some(&a), Some(&b)) => a..b + 1,
            _ => 0..0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub rows: Vec<usize>,
    pub regions: Vec<RegionPlan>,
}

/// Inspector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeletPlan {
    pub kernel: KernelKind,
    pub n_rows: usize,
    pub n_cols: usize,
    pub nnz: usize,
    pub window: usize,
    pub partitions: Vec<PartitionPlan>,
}

/// Operation counts covered by each codelet kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub blas: usize,
    pub psc_i: usize,
    pub psc_ii: usize,
}

impl KindCounts {
    pub fn total(&self) -> usize {
        self.blas + self.psc_i + self.psc_ii
    }
}

impl CodeletPlan {
    pub fn codelets(&self) -> impl Iterator<Item = &Codelet> {
        self.regions().flat_map(|r| r.codelets.iter())
    }

    pub fn regions(&self) -> impl Iterator<Item = &RegionPlan> {
        self.partitions.iter().flat_map(|p| p.regions.iter())
    }

    pub fn cost(&self) -> usize {
        self.regions().map(|r| r.cost).sum()
    }

    pub fn ops_by_kind(&self) -> KindCounts {
        let mut k = KindCounts::default();
        for c in self.codelets() {
            match c.kind() {
                CodeletClass::Blas => k.blas += c.ops(),
                CodeletClass::PscI => k.psc_i += c.ops(),
                CodeletClass::PscII => k.psc_ii += c.ops(),
                CodeletClass::None => {}
            }
        }
        k
    }

    pub fn codelets_by_kind(&self) -> KindCounts {
        let mut k = KindCounts::default();
        for c in self.codelets() {
            match c.kind() {
                CodeletClass::Blas => k.blas += 1,
                CodeletClass::PscI => k.psc_i += 1,
                CodeletClass::PscII => k.psc_ii += 1,
                CodeletClass::None => {}
            }
        }
        k
    }

    /// Every `(row, value position)` touched by a codelet, in plan order.
    pub fn covered_operations(&self) -> Vec<(usize, usize)> {
        self.codelets().flat_map(|c| c.points().map(|(o, g, _)| (o, g)).collect::<Vec<_>>()).collect()
    }

    /// JSON dump: per partition, per codelet with its cost breakdown.
    pub fn to_json(&self) -> serde_json::Value {
        let partitions: Vec<serde_json::Value> = self
            .partitions
            .iter()
            .map(|p| {
                let regions: Vec<serde_json::Value> = p
                    .regions
                    .iter()
                    .map(|r| {
                        let codelets: Vec<serde_json::Value> = r
                            .codelets
                            .iter()
                            .map(|c| {
                                let mut v = serde_json::to_value(c).expect("codelets serialize");
                                v["cost"] = serde_json::to_value(codelet_cost(c)).expect("cost serializes");
                                v
                            })
                            .collect();
                        serde_json::json!({
                            "rows": r.rows,
                            "strategy": r.strategy,
                            "cost": r.cost,
                            "codelets": codelets,
                            "finalize": r.finalize,
                        })
                    })
                    .collect();
                serde_json::json!({ "rows": p.rows, "regions": regions })
            })
            .collect();
        serde_json::json!({
            "kernel": self.kernel,
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "nnz": self.nnz,
            "window": self.window,
            "cost": self.cost(),
            "partitions": partitions,
        })
    }
}

/// Mines one window with all three strategies and keeps the cheapest.
pub fn mine_region(model: &KernelModel, window: &Window, fopd: &PartitionFopd) -> RegionPlan {
    let mut best: Option<(Strategy, Vec<Codelet>, usize)> = None;
    for strategy in Strategy::ALL {
        let (codelets, cost) = run_strategy(strategy, model, window, fopd);
        // Strict comparison keeps the earlier strategy on ties.
        if best.as_ref().is_none_or(|b| cost < b.2) {
            best = Some((strategy, codelets, cost));
        }
    }
    let (strategy, codelets, cost) = best.expect("at least one strategy");
    let finalize = match model.diagonal() {
        Some(diag) => window.rows.iter().map(|&row| FinalizeRecord { row, diag: diag[row], rhs: row }).collect(),
        None => Vec::new(),
    };
    RegionPlan { rows: window.rows.clone(), strategy, cost, codelets, finalize }
}

/// Inspector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InspectOptions {
    /// Rows per mining window.
    pub window: usize,
    /// Partition count for edgeless kernels.
    pub groups: usize,
}

impl Default for InspectOptions {
    fn default() -> Self {
        Self { window: 3, groups: rayon::current_num_threads() }
    }
}

/// Runs the full inspector: access functions, dependencies, partitioning,
/// then per-window mining with min-cost selection.
pub fn inspect(kind: KernelKind, pattern: &CsrMatrix, opts: InspectOptions) -> Result<CodeletPlan, InspectError> {
    let model = compute_access_functions(kind, pattern)?;
    let graph = find_dependencies(kind, pattern);
    let schedule = partition_iteration_space(&graph, pattern, opts.groups);
    inspect_with_schedule(&model, pattern, &schedule, opts.window)
}

/// Mining step on an existing schedule.
pub fn inspect_with_schedule(
    model: &KernelModel,
    pattern: &CsrMatrix,
    schedule: &Schedule,
    window: usize,
) -> Result<CodeletPlan, InspectError> {
    let partitions: Vec<PartitionPlan> = schedule
        .partitions()
        .iter()
        .map(|rows| {
            let fopd = PartitionFopd::compute(model, rows);
            let windows = get_consecutive_iterations(rows, window);
            let regions = windows.par_iter().map(|w| mine_region(model, w, &fopd)).collect();
            PartitionPlan { rows: rows.clone(), regions }
        })
        .collect();
    let plan = CodeletPlan {
        kernel: model.kind(),
        n_rows: pattern.n_rows(),
        n_cols: pattern.n_cols(),
        nnz: pattern.nnz(),
        window: window.max(1),
        partitions,
    };
    for c in plan.codelets() {
        c.validate(plan.n_rows, plan.nnz, plan.n_cols)?;
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{generate_pattern, PatternKind};

    fn spmv_model(a: &CsrMatrix) -> KernelModel {
        compute_access_functions(KernelKind::Spmv, a).unwrap()
    }

    fn whole(a: &CsrMatrix) -> (Window, PartitionFopd, KernelModel) {
        let model = spmv_model(a);
        let rows: Vec<usize> = (0..a.n_rows()).collect();
        let fopd = PartitionFopd::compute(&model, &rows);
        (Window { rows, offset: 0 }, fopd, model)
    }

    fn gather(rows: usize, cols: &[usize]) -> CsrMatrix {
        generate_pattern(&PatternKind::ScatteredGather { rows, cols: cols.to_vec() }).unwrap()
    }

    #[test]
    fn windows_of_t_rows() {
        let w = get_consecutive_iterations(&(0..9).collect::<Vec<_>>(), 3);
        assert_eq!(w.iter().map(|w| w.rows.clone()).collect::<Vec<_>>(), [vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]]);
        let w = get_consecutive_iterations(&(0..7).collect::<Vec<_>>(), 3);
        assert_eq!(w.last().unwrap().rows, [6]);
        assert_eq!(w.last().unwrap().offset, 6);
        assert_eq!(get_consecutive_iterations(&[5], 3).len(), 1);
    }

    #[test]
    fn blas_first_on_dense() {
        let a = generate_pattern(&PatternKind::DenseBlock { n: 3 }).unwrap();
        let (w, f, m) = whole(&a);
        let (cl, cost) = blas_first(&m, &w, &f);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].kind(), CodeletClass::Blas);
        assert_eq!(cl[0].extent(), (3, 3));
        assert_eq!(cost, 18);
    }

    #[test]
    fn gather_falls_through_to_psc_i() {
        let a = gather(3, &[0, 2, 5]);
        let (w, f, m) = whole(&a);
        let (cl, cost) = blas_first(&m, &w, &f);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].kind(), CodeletClass::PscI);
        assert_eq!(cost, 19);

        let (cl, cost) = psci_first(&m, &w, &f);
        match &cl[..] {
            [Codelet::PscI(c)] => {
                assert_eq!((c.m, c.n), (3, 3));
                assert_eq!(c.vec.offsets, [0, 2, 5]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(cost, 19);
    }

    #[test]
    fn psc_i_on_dense_is_legal_but_costlier() {
        let a = generate_pattern(&PatternKind::DenseBlock { n: 3 }).unwrap();
        let (w, f, m) = whole(&a);
        let (cl, cost) = psci_first(&m, &w, &f);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].kind(), CodeletClass::PscI);
        assert_eq!(cost, 19);
        assert!(blas_first(&m, &w, &f).1 < cost);
    }

    #[test]
    fn mixed_region_blas_plus_tail() {
        let block = |extra_row: usize| {
            let mut t: Vec<(usize, usize, f64)> = (0..3).flat_map(|r| (4..7).map(move |c| (r, c, 1.0))).collect();
            t.push((extra_row, 9, 1.0));
            CsrMatrix::from_triplets(3, 10, &t).unwrap()
        };
        // Extra entry on the last row: row starts 0, 3, 6 keep MAT strided.
        let a = block(2);
        let (w, f, m) = whole(&a);
        let (cl, cost) = blas_first(&m, &w, &f);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].kind(), CodeletClass::Blas);
        assert_eq!(cl[0].extent(), (3, 3));
        assert_eq!(cl[1].ops(), 1);
        assert_eq!(cost, 18 + 7);
        assert_eq!(mine_region(&m, &w, &f).strategy, Strategy::BlasFirst);

        // Extra entry on the first row: row starts 0, 4, 7 break the MAT
        // stride below row 1, so the block splits into 2x3 + 1x3.
        let a = block(0);
        let (w, f, m) = whole(&a);
        let (cl, cost) = blas_first(&m, &w, &f);
        let shapes: Vec<_> = cl.iter().map(|c| (c.kind(), c.extent())).collect();
        assert_eq!(
            shapes,
            [(CodeletClass::Blas, (2, 3)), (CodeletClass::Blas, (1, 3)), (CodeletClass::PscII, (1, 1))]
        );
        assert_eq!(cost, 15 + 7 + 9);
    }

    #[test]
    fn pscii_first_is_per_row_on_ragged_rows() {
        let a = CsrMatrix::from_triplets(2, 9, &[(0, 1, 1.0), (0, 4, 1.0), (1, 0, 1.0), (1, 3, 1.0), (1, 8, 1.0)]).unwrap();
        let (w, f, m) = whole(&a);
        let (cl, _) = pscii_first(&m, &w, &f);
        let shapes: Vec<_> = cl.iter().map(|c| (c.kind(), c.extent())).collect();
        assert_eq!(shapes, [(CodeletClass::PscII, (1, 2)), (CodeletClass::PscII, (1, 3))]);
    }

    #[test]
    fn pscii_first_single_row() {
        let a = gather(1, &[0, 3, 4, 9]);
        let (w, f, m) = whole(&a);
        let (cl, _) = pscii_first(&m, &w, &f);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].extent(), (1, 4));
    }

    #[test]
    fn empty_region_mines_nothing() {
        let l = CsrMatrix::identity(2);
        let model = compute_access_functions(KernelKind::Sptrsv, &l).unwrap();
        let rows = vec![0, 1];
        let fopd = PartitionFopd::compute(&model, &rows);
        let w = Window { rows, offset: 0 };
        for s in Strategy::ALL {
            assert_eq!(run_strategy(s, &model, &w, &fopd), (vec![], 0));
        }
    }

    #[test]
    fn banded_diagonal_block_found() {
        let a = generate_pattern(&PatternKind::Banded { n: 4, bandwidth: 1, band: crate::matrix::Band::Both }).unwrap();
        let model = spmv_model(&a);
        let rows = vec![0, 1, 2];
        let f = PartitionFopd::compute(&model, &rows);
        let (w, m) = (Window { rows, offset: 0 }, model);
        let (cl, cost) = blas_first(&m, &w, &f);
        assert_eq!(cl[0].kind(), CodeletClass::Blas);
        assert_eq!(cl[0].extent(), (3, 2));
        assert_eq!(cost, 15 + 10);
    }

    #[test]
    fn inspect_dense_six() {
        let a = generate_pattern(&PatternKind::DenseBlock { n: 6 }).unwrap();
        let plan = inspect(KernelKind::Spmv, &a, InspectOptions { window: 3, groups: 1 }).unwrap();
        let kinds: Vec<_> = plan.codelets().map(|c| (c.kind(), c.extent())).collect();
        assert_eq!(kinds, [(CodeletClass::Blas, (3, 6)), (CodeletClass::Blas, (3, 6))]);
    }

    #[test]
    fn inspect_gather_three() {
        let plan = inspect(KernelKind::Spmv, &gather(3, &[0, 2, 5]), InspectOptions { window: 3, groups: 1 }).unwrap();
        assert_eq!(plan.codelets().count(), 1);
        assert_eq!(plan.codelets().next().unwrap().kind(), CodeletClass::PscI);
        assert_eq!(plan.cost(), 19);
    }

    #[test]
    fn inspect_sptrsv_identity() {
        let plan = inspect(KernelKind::Sptrsv, &CsrMatrix::identity(4), InspectOptions { window: 3, groups: 2 }).unwrap();
        assert_eq!(plan.partitions.len(), 1);
        assert_eq!(plan.codelets().count(), 0);
        let fin: Vec<_> = plan.regions().flat_map(|r| r.finalize.iter().map(|f| f.row)).collect();
        assert_eq!(fin, [0, 1, 2, 3]);
    }

    #[test]
    fn plan_json_has_costs() {
        let plan = inspect(KernelKind::Spmv, &gather(3, &[0, 2, 5]), InspectOptions { window: 3, groups: 1 }).unwrap();
        let v = plan.to_json();
        assert_eq!(v["cost"], 19);
        let c = &v["partitions"][0]["regions"][0]["codelets"][0];
        assert_eq!(c["kind"], "PSC_I");
        assert_eq!(c["cost"]["cost"], 19);
        assert_eq!(c["vec"]["offsets"], serde_json::json!([0, 2, 5]));
    }
}
