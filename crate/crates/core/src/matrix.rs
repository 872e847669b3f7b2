//! Compressed sparse row storage, Matrix Market I/O and synthetic patterns.
//!
//! Every `CsrMatrix` is canonical: columns are strictly increasing inside a
//! row and duplicates have been summed. Indices are 0-based; the 1-based
//! Matrix Market coordinates are translated on read and write.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("row_offsets has length {len}, expected {expected}")]
    RowOffsetsLength { len: usize, expected: usize },
    #[error("row_offsets must start at 0, end at nnz and never decrease (row {row})")]
    RowOffsetsOrder { row: usize },
    #[error("{cols} column indices but {vals} values")]
    LengthMismatch { cols: usize, vals: usize },
    #[error("column {col} out of range in row {row} (n_cols = {n_cols})")]
    ColumnOutOfRange { row: usize, col: usize, n_cols: usize },
    #[error("columns of row {row} are not strictly increasing")]
    UnsortedRow { row: usize },
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("diagonal entry of row {row} is missing or zero")]
    MissingDiagonal { row: usize },
    #[error("row {row} has an entry above the diagonal (column {col})")]
    NotLowerTriangular { row: usize, col: usize },
    #[error("invalid pattern parameters: {0}")]
    InvalidPattern(String),
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

/// Canonical CSR matrix of `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, checking every canonical-form invariant.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        if row_offsets.len() != n_rows + 1 {
            return Err(MatrixError::RowOffsetsLength {
                len: row_offsets.len(),
                expected: n_rows + 1,
            });
        }
        if col_indices.len() != values.len() {
            return Err(MatrixError::LengthMismatch {
                cols: col_indices.len(),
                vals: values.len(),
            });
        }
        if row_offsets[0] != 0 {
            return Err(MatrixError::RowOffsetsOrder { row: 0 });
        }
        for row in 0..n_rows {
            let (lo, hi) = (row_offsets[row], row_offsets[row + 1]);
            if hi < lo || hi > col_indices.len() {
                return Err(MatrixError::RowOffsetsOrder { row });
            }
            let cols = &col_indices[lo..hi];
            if let Some(&col) = cols.iter().find(|&&c| c >= n_cols) {
                return Err(MatrixError::ColumnOutOfRange { row, col, n_cols });
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(MatrixError::UnsortedRow { row });
            }
        }
        if row_offsets[n_rows] != col_indices.len() {
            return Err(MatrixError::RowOffsetsOrder { row: n_rows });
        }
        Ok(Self { n_rows, n_cols, row_offsets, col_indices, values })
    }

    /// Builds a canonical matrix from unordered `(row, col, value)` triplets.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, MatrixError> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(row, col, _) in &sorted {
            if row >= n_rows || col >= n_cols {
                return Err(MatrixError::ColumnOutOfRange { row, col, n_cols });
            }
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (row, col, val) in sorted {
            if last == Some((row, col)) {
                *values.last_mut().unwrap() += val;
                continue;
            }
            last = Some((row, col));
            row_offsets[row + 1] += 1;
            col_indices.push(col);
            values.push(val);
        }
        for row in 0..n_rows {
            row_offsets[row + 1] += row_offsets[row];
        }
        Self::new(n_rows, n_cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Position range of `row` inside `col_indices` / `values`.
    pub fn row_range(&self, row: usize) -> std::ops::Range<usize> {
        self.row_offsets[row]..self.row_offsets[row + 1]
    }

    pub fn row_nnz(&self, row: usize) -> usize {
        self.row_offsets[row + 1] - self.row_offsets[row]
    }

    pub fn row_cols(&self, row: usize) -> &[usize] {
        &self.col_indices[self.row_range(row)]
    }

    pub fn row_values(&self, row: usize) -> &[f64] {
        &self.values[self.row_range(row)]
    }

    /// Same pattern with replaced values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, MatrixError> {
        if values.len() != self.nnz() {
            return Err(MatrixError::LengthMismatch { cols: self.nnz(), vals: values.len() });
        }
        Ok(Self { values, ..self.clone() })
    }

    /// Same pattern, values produced by `f(row, col, position)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(self.nnz());
        for row in 0..self.n_rows {
            for pos in self.row_range(row) {
                values.push(f(row, self.col_indices[pos], pos));
            }
        }
        Self { values, ..self.clone() }
    }

    /// Inserts any missing diagonal entries of a square matrix and sets every
    /// diagonal to `row_abs_sum + shift`, making the matrix strictly
    /// diagonally dominant.
    pub fn with_dominant_diagonal(&self, shift: f64) -> Result<Self, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::NotSquare { rows: self.n_rows, cols: self.n_cols });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + self.n_rows);
        for row in 0..self.n_rows {
            let mut off = 0.0;
            for pos in self.row_range(row) {
                let col = self.col_indices[pos];
                if col != row {
                    off += self.values[pos].abs();
                    triplets.push((row, col, self.values[pos]));
                }
            }
            triplets.push((row, row, off + shift));
        }
        Self::from_triplets(self.n_rows, self.n_cols, &triplets)
    }

    fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for row in 0..self.n_rows {
            for pos in self.row_range(row) {
                triplets.push((self.col_indices[pos], row, self.values[pos]));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, &triplets)
            .expect("transpose of a valid matrix is valid")
    }
}

/// Square lower-triangular matrix with a stored nonzero diagonal in every row.
///
/// In canonical CSR the diagonal is the last stored entry of each row, so the
/// off-diagonal entries of row `i` occupy `row_offsets[i]..row_offsets[i+1]-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularMatrix {
    csr: CsrMatrix,
}

impl TriangularMatrix {
    pub fn new(csr: CsrMatrix) -> Result<Self, MatrixError> {
        if !csr.is_square() {
            return Err(MatrixError::NotSquare { rows: csr.n_rows, cols: csr.n_cols });
        }
        for row in 0..csr.n_rows {
            let cols = csr.row_cols(row);
            if let Some(&col) = cols.iter().find(|&&c| c > row) {
                return Err(MatrixError::NotLowerTriangular { row, col });
            }
            match cols.last() {
                Some(&c) if c == row && *csr.row_values(row).last().unwrap() != 0.0 => {}
                _ => return Err(MatrixError::MissingDiagonal { row }),
            }
        }
        Ok(Self { csr })
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.csr
    }

    pub fn into_csr(self) -> CsrMatrix {
        self.csr
    }

    pub fn n(&self) -> usize {
        self.csr.n_rows
    }

    /// Value position of the diagonal entry of `row`.
    pub fn diag_position(&self, row: usize) -> usize {
        self.csr.row_offsets[row + 1] - 1
    }

    pub fn diag(&self, row: usize) -> f64 {
        self.csr.values[self.diag_position(row)]
    }
}

/// Keeps the entries on or below the diagonal.
pub fn lower_triangular(a: &CsrMatrix) -> Result<TriangularMatrix, MatrixError> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare { rows: a.n_rows, cols: a.n_cols });
    }
    let mut row_offsets = Vec::with_capacity(a.n_rows + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    for row in 0..a.n_rows {
        for pos in a.row_range(row) {
            let col = a.col_indices[pos];
            if col > row {
                break;
            }
            col_indices.push(col);
            values.push(a.values[pos]);
        }
        row_offsets.push(col_indices.len());
    }
    let csr = CsrMatrix::new(a.n_rows, a.n_cols, row_offsets, col_indices, values)?;
    TriangularMatrix::new(csr)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

/// Parses a Matrix Market coordinate body into a canonical `CsrMatrix`.
///
/// Symmetric storage is expanded, duplicates are summed, and pattern entries
/// get the value 1.0. Explicit zeros are kept as stored entries.
pub fn parse_matrix_market(text: &str) -> Result<CsrMatrix, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (line_no, header) = lines.next().ok_or_else(|| ParseError::new(1, "empty input"))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(ParseError::new(line_no, "expected '%%MatrixMarket matrix ...' header"));
    }
    if tokens[2] != "coordinate" {
        return Err(ParseError::new(line_no, format!("unsupported format '{}'", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "real" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(ParseError::new(line_no, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(ParseError::new(line_no, format!("unsupported symmetry '{other}'"))),
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (size_line, size) = data.next().ok_or_else(|| ParseError::new(line_no + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| ParseError::new(size_line, format!("bad size line: {e}")))?;
    let [n_rows, n_cols, declared] = dims[..] else {
        return Err(ParseError::new(size_line, "size line must hold 'rows cols entries'"));
    };
    if symmetry == Symmetry::Symmetric && n_rows != n_cols {
        return Err(ParseError::new(size_line, "symmetric matrix must be square"));
    }

    let mut triplets = Vec::with_capacity(declared * 2);
    let mut seen = 0usize;
    let mut last_line = size_line;
    for (line, body) in data {
        last_line = line;
        seen += 1;
        if seen > declared {
            return Err(ParseError::new(line, format!("more than {declared} entries")));
        }
        let mut it = body.split_whitespace();
        let mut coord = |name: &str, bound: usize| -> Result<usize, ParseError> {
            let tok = it.next().ok_or_else(|| ParseError::new(line, format!("missing {name} index")))?;
            let idx: usize = tok
                .parse()
                .map_err(|_| ParseError::new(line, format!("non-numeric {name} index '{tok}'")))?;
            if idx == 0 || idx > bound {
                return Err(ParseError::new(line, format!("{name} index {idx} out of range 1..={bound}")));
            }
            Ok(idx - 1)
        };
        let row = coord("row", n_rows)?;
        let col = coord("column", n_cols)?;
        let value = match field {
            Field::Pattern => 1.0,
            Field::Real | Field::Integer => {
                let tok = it.next().ok_or_else(|| ParseError::new(line, "missing value"))?;
                let v: f64 = tok
                    .parse()
                    .map_err(|_| ParseError::new(line, format!("non-numeric value '{tok}'")))?;
                if field == Field::Integer && v.fract() != 0.0 {
                    return Err(ParseError::new(line, format!("non-integer value '{tok}'")));
                }
                v
            }
        };
        if it.next().is_some() {
            return Err(ParseError::new(line, "trailing tokens"));
        }
        triplets.push((row, col, value));
        if symmetry == Symmetry::Symmetric && row != col {
            triplets.push((col, row, value));
        }
    }
    if seen != declared {
        return Err(ParseError::new(
            last_line,
            format!("header declares {declared} entries but {seen} were found"),
        ));
    }
    CsrMatrix::from_triplets(n_rows, n_cols, &triplets).map_err(|e| ParseError::new(last_line, e.to_string()))
}

/// Writes `a` as a general real coordinate Matrix Market file.
///
/// Values use Rust's shortest round-trip formatting, so parsing the output
/// reproduces the matrix exactly.
pub fn write_matrix_market(a: &CsrMatrix) -> String {
    let mut out = String::with_capacity(32 + a.nnz() * 24);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.n_rows, a.n_cols, a.nnz());
    for row in 0..a.n_rows {
        for pos in a.row_range(row) {
            let _ = writeln!(out, "{} {} {:?}", row + 1, a.col_indices[pos] + 1, a.values[pos]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    Lower,
    Upper,
    Both,
}

/// Synthetic sparsity patterns. All values are 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PatternKind {
    /// `n × n`, fully dense.
    DenseBlock { n: usize },
    /// `n × n` band of half-width `bandwidth` on the chosen side(s) of the diagonal.
    Banded { n: usize, bandwidth: usize, band: Band },
    /// Each entry present independently with probability `density`.
    RandomUniform { rows: usize, cols: usize, density: f64, seed: u64 },
    /// Every row holds the same column set.
    ScatteredGather { rows: usize, cols: Vec<usize> },
}

pub fn generate_pattern(kind: &PatternKind) -> Result<CsrMatrix, MatrixError> {
    let bad = |msg: &str| Err(MatrixError::InvalidPattern(msg.to_string()));
    match kind {
        PatternKind::DenseBlock { n } => {
            if *n == 0 {
                return bad("dense block needs n > 0");
            }
            let row_offsets = (0..=*n).map(|r| r * n).collect();
            let col_indices = (0..n * n).map(|p| p % n).collect();
            CsrMatrix::new(*n, *n, row_offsets, col_indices, vec![1.0; n * n])
        }
        PatternKind::Banded { n, bandwidth, band } => {
            if *n == 0 {
                return bad("banded matrix needs n > 0");
            }
            let mut triplets = Vec::new();
            for row in 0..*n {
                let lo = match band {
                    Band::Upper => row,
                    _ => row.saturating_sub(*bandwidth),
                };
                let hi = match band {
                    Band::Lower => row,
                    _ => (row + bandwidth).min(n - 1),
                };
                triplets.extend((lo..=hi).map(|col| (row, col, 1.0)));
            }
            CsrMatrix::from_triplets(*n, *n, &triplets)
        }
        PatternKind::RandomUniform { rows, cols, density, seed } => {
            if *rows == 0 || *cols == 0 {
                return bad("random matrix needs non-zero dimensions");
            }
            if !(*density > 0.0 && *density <= 1.0) {
                return bad("density must lie in (0, 1]");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut triplets = Vec::new();
            for row in 0..*rows {
                for col in 0..*cols {
                    if rng.gen_bool(*density) {
                        triplets.push((row, col, 1.0));
                    }
                }
            }
            CsrMatrix::from_triplets(*rows, *cols, &triplets)
        }
        PatternKind::ScatteredGather { rows, cols } => {
            if *rows == 0 || cols.is_empty() {
                return bad("scattered gather needs rows and at least one column");
            }
            let mut set = cols.clone();
            set.sort_unstable();
            set.dedup();
            let n_cols = set.last().unwrap() + 1;
            let k = set.len();
            let row_offsets = (0..=*rows).map(|r| r * k).collect();
            let col_indices = (0..*rows).flat_map(|_| set.iter().copied()).collect();
            CsrMatrix::new(*rows, n_cols, row_offsets, col_indices, vec![1.0; rows * k])
        }
    }
}

/// Symmetrises a pattern: `a + aᵀ` on the pattern, values taken from `a`
/// where present, otherwise from the transpose.
pub fn symmetrize(a: &CsrMatrix) -> Result<CsrMatrix, MatrixError> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare { rows: a.n_rows, cols: a.n_cols });
    }
    let t = a.transpose();
    let mut triplets = Vec::with_capacity(2 * a.nnz());
    for row in 0..a.n_rows {
        let own = a.row_cols(row);
        for pos in a.row_range(row) {
            triplets.push((row, a.col_indices[pos], a.values[pos]));
        }
        for pos in t.row_range(row) {
            if own.binary_search(&t.col_indices[pos]).is_err() {
                triplets.push((row, t.col_indices[pos], t.values[pos]));
            }
        }
    }
    CsrMatrix::from_triplets(a.n_rows, a.n_cols, &triplets)
}
