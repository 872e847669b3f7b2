//! Polyhedral view of a kernel instance over a concrete sparsity pattern.
//!
//! Both kernels are doubly nested: the outer iteration `i0` walks rows and
//! the inner iteration `i1` walks the stored entries of a row. The statement
//! is `out[OUT(i0,i1)] += mat[MAT(i0,i1)] * vec[VEC(i0,i1)]`; for SpTRSV the
//! inner loop skips the diagonal, which is applied afterwards by a per-row
//! finalize step.
//!
//! Access functions are tabulated from the pattern, so a first-order partial
//! difference (FOPD) is a plain difference between neighbouring table cells.

use std::fmt::{self, Write as _};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{CsrMatrix, MatrixError, TriangularMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("SpTRSV needs a lower-triangular matrix: {0}")]
    NotTriangular(#[from] MatrixError),
    #[error("region is empty")]
    EmptyRegion,
    #[error("region point (row {row}, inner {inner}) lies outside the iteration space")]
    OutsideDomain { row: usize, inner: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Spmv,
    Sptrsv,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Spmv => "spmv",
            KernelKind::Sptrsv => "sptrsv",
        })
    }
}

impl std::str::FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "spmv" => Ok(KernelKind::Spmv),
            "sptrsv" => Ok(KernelKind::Sptrsv),
            other => Err(format!("unknown kernel '{other}' (expected spmv or sptrsv)")),
        }
    }
}

/// Data space addressed by an access function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// `y` for SpMV, the row accumulator for SpTRSV.
    Out,
    /// Matrix values.
    Mat,
    /// `x` (input for SpMV, previously solved unknowns for SpTRSV).
    Vec,
}

/// Rows `0..n_rows` with a per-row inner extent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationSpace {
    inner_extent: Vec<usize>,
}

impl IterationSpace {
    pub fn n_rows(&self) -> usize {
        self.inner_extent.len()
    }

    pub fn inner_extent(&self, row: usize) -> usize {
        self.inner_extent[row]
    }

    pub fn n_points(&self) -> usize {
        self.inner_extent.iter().sum()
    }

    pub fn contains(&self, row: usize, inner: usize) -> bool {
        row < self.inner_extent.len() && inner < self.inner_extent[row]
    }
}

/// Tabulated map from iteration points to data-space indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessFunction {
    role: Role,
    starts: Vec<usize>,
    table: Vec<usize>,
}

impl AccessFunction {
    fn tabulate(role: Role, space: &IterationSpace, mut f: impl FnMut(usize, usize) -> usize) -> Self {
        let mut starts = Vec::with_capacity(space.n_rows() + 1);
        let mut table = Vec::with_capacity(space.n_points());
        starts.push(0);
        for row in 0..space.n_rows() {
            table.extend((0..space.inner_extent(row)).map(|j| f(row, j)));
            starts.push(table.len());
        }
        Self { role, starts, table }
    }

    /// Builds a function directly from per-row index lists.
    pub fn from_rows(role: Role, rows: &[Vec<usize>]) -> Self {
        let mut starts = vec![0];
        let mut table = Vec::new();
        for r in rows {
            table.extend_from_slice(r);
            starts.push(table.len());
        }
        Self { role, starts, table }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn index_at(&self, row: usize, inner: usize) -> Option<usize> {
        let lo = *self.starts.get(row)?;
        let hi = self.starts[row + 1];
        (inner < hi - lo).then(|| self.table[lo + inner])
    }

    /// Tabulated indices of one row.
    pub fn row(&self, row: usize) -> &[usize] {
        &self.table[self.starts[row]..self.starts[row + 1]]
    }
}

/// The three access functions and iteration space of one kernel instance.
#[derive(Debug, Clone)]
pub struct KernelModel {
    kind: KernelKind,
    space: IterationSpace,
    out: AccessFunction,
    mat: AccessFunction,
    vec: AccessFunction,
    /// Value position of each row's diagonal (SpTRSV only).
    diagonal: Option<Vec<usize>>,
}

impl KernelModel {
    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn space(&self) -> &IterationSpace {
        &self.space
    }

    pub fn out(&self) -> &AccessFunction {
        &self.out
    }

    pub fn mat(&self) -> &AccessFunction {
        &self.mat
    }

    pub fn vec(&self) -> &AccessFunction {
        &self.vec
    }

    pub fn functions(&self) -> [&AccessFunction; 3] {
        [&self.out, &self.mat, &self.vec]
    }

    pub fn diagonal(&self) -> Option<&[usize]> {
        self.diagonal.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.space.n_rows()
    }
}

/// Builds the iteration space and the OUT/MAT/VEC access functions.
pub fn compute_access_functions(kind: KernelKind, pattern: &CsrMatrix) -> Result<KernelModel, KernelError> {
    let (extents, diagonal) = match kind {
        KernelKind::Spmv => ((0..pattern.n_rows()).map(|r| pattern.row_nnz(r)).collect(), None),
        KernelKind::Sptrsv => {
            let tri = TriangularMatrix::new(pattern.clone())?;
            let extents = (0..tri.n()).map(|r| pattern.row_nnz(r) - 1).collect();
            let diag = (0..tri.n()).map(|r| tri.diag_position(r)).collect();
            (extents, Some(diag))
        }
    };
    let space = IterationSpace { inner_extent: extents };
    let offsets = pattern.row_offsets();
    let cols = pattern.col_indices();
    let out = AccessFunction::tabulate(Role::Out, &space, |i0, _| i0);
    let mat = AccessFunction::tabulate(Role::Mat, &space, |i0, i1| offsets[i0] + i1);
    let vec = AccessFunction::tabulate(Role::Vec, &space, |i0, i1| cols[offsets[i0] + i1]);
    Ok(KernelModel { kind, space, out, mat, vec, diagonal })
}

/// A rectangular sub-region: an ordered list of rows and a shared inner range.
///
/// Consecutive entries of `rows` are neighbours in the outer dimension, so a
/// region over a level set (non-adjacent rows) differences row `k+1` against
/// row `k` of the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rect {
    pub rows: Vec<usize>,
    pub inner: Range<usize>,
}

impl Rect {
    pub fn new(rows: impl IntoIterator<Item = usize>, inner: Range<usize>) -> Self {
        Self { rows: rows.into_iter().collect(), inner }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() || self.inner.is_empty()
    }

    /// Tabulates `f` over the rectangle.
    pub fn grid(&self, f: &AccessFunction) -> Result<Vec<Vec<i64>>, KernelError> {
        if self.is_empty() {
            return Err(KernelError::EmptyRegion);
        }
        self.rows
            .iter()
            .map(|&row| {
                self.inner
                    .clone()
                    .map(|j| f.index_at(row, j).map(|v| v as i64).ok_or(KernelError::OutsideDomain { row, inner: j }))
                    .collect()
            })
            .collect()
    }
}

/// First-order partial differences of one access function over a region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FopdTable {
    /// `d_inner[i][j] = f(i, j+1) - f(i, j)`.
    pub d_inner: Vec<Vec<i64>>,
    /// `d_outer[i][j] = f(i+1, j) - f(i, j)`, only where both points exist.
    pub d_outer: Vec<Vec<i64>>,
    pub strided_inner: bool,
    pub strided_outer: bool,
}

fn all_equal<'a>(mut it: impl Iterator<Item = &'a i64>) -> bool {
    match it.next() {
        None => true,
        Some(first) => it.all(|v| v == first),
    }
}

impl FopdTable {
    /// Differences of a tabulated region given as rows of indices. Rows may be
    /// ragged; the outer difference only covers the overlapping prefix.
    pub fn from_grid(grid: &[Vec<i64>]) -> Self {
        let d_inner: Vec<Vec<i64>> = grid.iter().map(|r| r.windows(2).map(|w| w[1] - w[0]).collect()).collect();
        let d_outer: Vec<Vec<i64>> = grid
            .windows(2)
            .map(|pair| pair[0].iter().zip(&pair[1]).map(|(a, b)| b - a).collect())
            .collect();
        let strided_inner = all_equal(d_inner.iter().flatten());
        let strided_outer = all_equal(d_outer.iter().flatten());
        Self { d_inner, d_outer, strided_inner, strided_outer }
    }

    /// Strided in every dimension.
    pub fn is_strided(&self) -> bool {
        self.strided_inner && self.strided_outer
    }
}

/// FOPD of `f` over `region`.
pub fn compute_fopd(f: &AccessFunction, region: &Rect) -> Result<FopdTable, KernelError> {
    Ok(FopdTable::from_grid(&region.grid(f)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CodeletClass {
    #[serde(rename = "BLAS")]
    Blas,
    #[serde(rename = "PSC_I")]
    PscI,
    #[serde(rename = "PSC_II")]
    PscII,
    #[serde(rename = "NONE")]
    None,
}

impl fmt::Display for CodeletClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeletClass::Blas => "BLAS",
            CodeletClass::PscI => "PSC_I",
            CodeletClass::PscII => "PSC_II",
            CodeletClass::None => "NONE",
        })
    }
}

/// Classifies a region from the FOPD tables of its three access functions.
pub fn classify_codelet(fopds: &[FopdTable; 3]) -> CodeletClass {
    match fopds.iter().filter(|t| t.is_strided()).count() {
        3 => CodeletClass::Blas,
        2 => CodeletClass::PscI,
        1 => CodeletClass::PscII,
        _ => CodeletClass::None,
    }
}

/// Classifies `region` of a kernel instance.
pub fn classify_region(model: &KernelModel, region: &Rect) -> Result<CodeletClass, KernelError> {
    let [o, m, v] = model.functions();
    Ok(classify_codelet(&[compute_fopd(o, region)?, compute_fopd(m, region)?, compute_fopd(v, region)?]))
}

/// Text dump of a region: bounds, index tables, FOPDs and classification.
pub fn dump_region(model: &KernelModel, region: &Rect) -> Result<String, KernelError> {
    fn row_list(v: &[i64]) -> String {
        v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
    }
    let mut out = String::new();
    let rows: Vec<String> = region.rows.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "region rows=[{}] inner={}..{}", rows.join(","), region.inner.start, region.inner.end);
    let mut tables = Vec::with_capacity(3);
    for f in model.functions() {
        let grid = region.grid(f)?;
        let fopd = FopdTable::from_grid(&grid);
        let _ = writeln!(out, "  {:?}:", f.role());
        for r in &grid {
            let _ = writeln!(out, "    index   {}", row_list(r));
        }
        for r in &fopd.d_inner {
            let _ = writeln!(out, "    d_inner {}", row_list(r));
        }
        for r in &fopd.d_outer {
            let _ = writeln!(out, "    d_outer {}", row_list(r));
        }
        let _ = writeln!(out, "    strided inner={} outer={}", fopd.strided_inner, fopd.strided_outer);
        tables.push(fopd);
    }
    let tables: [FopdTable; 3] = tables.try_into().expect("three functions");
    let _ = writeln!(out, "  class {}", classify_codelet(&tables));
    Ok(out)
}
