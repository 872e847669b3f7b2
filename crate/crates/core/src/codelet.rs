//! The three parametric codelet forms and the codelet cost model.
//!
//! Every codelet spans `m` outer iterations and `n` inner iterations and
//! performs `out[o(i)] += mat[g(i,j)] * vec[h(i,j)]`:
//!
//! | form   | OUT            | MAT     | VEC                          |
//! |--------|----------------|---------|------------------------------|
//! | BLAS   | strided        | strided | strided (unit inner stride)  |
//! | PSC_I  | strided        | strided | shared gather table, length n|
//! | PSC_II | per-row table  | strided | per-point table, length m·n  |

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::CodeletClass;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodeletError {
    #[error("codelet has an empty extent ({m}x{n})")]
    Empty { m: usize, n: usize },
    #[error("{role} table has length {len}, expected {expected}")]
    TableLength { role: &'static str, len: usize, expected: usize },
    #[error("{role} index {index} at ({i}, {j}) is outside 0..{bound}")]
    OutOfBounds { role: &'static str, i: usize, j: usize, index: i64, bound: usize },
}

/// `base + outer·i + inner·j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stride {
    pub base: usize,
    pub outer: isize,
    pub inner: isize,
}

impl Stride {
    pub fn new(base: usize, outer: isize, inner: isize) -> Self {
        Self { base, outer, inner }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> usize {
        (self.base as isize + self.outer * i as isize + self.inner * j as isize) as usize
    }

    #[inline]
    pub fn row_start(&self, i: usize) -> usize {
        (self.base as isize + self.outer * i as isize) as usize
    }
}

/// `base + outer·i + offsets[j]`, with `offsets[0] == 0`. One table serves
/// every outer iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gather {
    pub base: usize,
    pub outer: isize,
    pub offsets: Vec<usize>,
}

impl Gather {
    #[inline]
    pub fn row_start(&self, i: usize) -> usize {
        (self.base as isize + self.outer * i as isize) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlasCodelet {
    pub m: usize,
    pub n: usize,
    pub out: Stride,
    pub mat: Stride,
    pub vec: Stride,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PscICodelet {
    pub m: usize,
    pub n: usize,
    pub out: Stride,
    pub mat: Stride,
    pub vec: Gather,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PscIICodelet {
    pub m: usize,
    pub n: usize,
    /// One output index per outer iteration.
    pub out: Vec<usize>,
    pub mat: Stride,
    /// Row-major `m × n` vector indices.
    pub vec: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Codelet {
    #[serde(rename = "BLAS")]
    Blas(BlasCodelet),
    #[serde(rename = "PSC_I")]
    PscI(PscICodelet),
    #[serde(rename = "PSC_II")]
    PscII(PscIICodelet),
}

/// Breakdown of the cost `|p| + m + Σ|s_d|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModelResult {
    /// `|p|`, one operation per multiply-add.
    pub ops: usize,
    /// `m`, the number of access functions.
    pub functions: usize,
    /// `|s_d|` for OUT, MAT and VEC.
    pub loads: [usize; 3],
    pub cost: usize,
}

/// Access functions per codelet statement (OUT, MAT, VEC).
pub const ACCESS_FUNCTIONS: usize = 3;

impl Codelet {
    pub fn kind(&self) -> CodeletClass {
        match self {
            Codelet::Blas(_) => CodeletClass::Blas,
            Codelet::PscI(_) => CodeletClass::PscI,
            Codelet::PscII(_) => CodeletClass::PscII,
        }
    }

    pub fn extent(&self) -> (usize, usize) {
        match self {
            Codelet::Blas(c) => (c.m, c.n),
            Codelet::PscI(c) => (c.m, c.n),
            Codelet::PscII(c) => (c.m, c.n),
        }
    }

    pub fn ops(&self) -> usize {
        let (m, n) = self.extent();
        m * n
    }

    /// 2 when both loops iterate more than once, otherwise 1.
    pub fn dims(&self) -> usize {
        let (m, n) = self.extent();
        if m > 1 && n > 1 {
            2
        } else {
            1
        }
    }

    /// `(out, mat, vec)` indices of point `(i, j)`.
    #[inline]
    pub fn indices(&self, i: usize, j: usize) -> (usize, usize, usize) {
        match self {
            Codelet::Blas(c) => (c.out.at(i, j), c.mat.at(i, j), c.vec.at(i, j)),
            Codelet::PscI(c) => (c.out.at(i, j), c.mat.at(i, j), c.vec.row_start(i) + c.vec.offsets[j]),
            Codelet::PscII(c) => (c.out[i], c.mat.at(i, j), c.vec[i * c.n + j]),
        }
    }

    /// Every point's `(out, mat, vec)` indices in execution order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let (m, n) = self.extent();
        (0..m).flat_map(move |i| (0..n).map(move |j| self.indices(i, j)))
    }

    /// Output indices touched, one per outer iteration.
    pub fn out_rows(&self) -> Vec<usize> {
        let (m, _) = self.extent();
        (0..m).map(|i| self.indices(i, 0).0).collect()
    }

    /// Checks descriptor shapes and that every index stays within the given
    /// data-space sizes.
    pub fn validate(&self, n_out: usize, n_mat: usize, n_vec: usize) -> Result<(), CodeletError> {
        let (m, n) = self.extent();
        if m == 0 || n == 0 {
            return Err(CodeletError::Empty { m, n });
        }
        match self {
            Codelet::PscI(c) if c.vec.offsets.len() != n => {
                return Err(CodeletError::TableLength { role: "VEC", len: c.vec.offsets.len(), expected: n })
            }
            Codelet::PscII(c) if c.out.len() != m => {
                return Err(CodeletError::TableLength { role: "OUT", len: c.out.len(), expected: m })
            }
            Codelet::PscII(c) if c.vec.len() != m * n => {
                return Err(CodeletError::TableLength { role: "VEC", len: c.vec.len(), expected: m * n })
            }
            _ => {}
        }
        // Strided descriptors may leave range through negative intermediate
        // values, so evaluate them in signed arithmetic.
        let signed = |s: &Stride, i: usize, j: usize| s.base as i64 + s.outer as i64 * i as i64 + s.inner as i64 * j as i64;
        for i in 0..m {
            for j in 0..n {
                let (o, g, h): (i64, i64, i64) = match self {
                    Codelet::Blas(c) => (signed(&c.out, i, j), signed(&c.mat, i, j), signed(&c.vec, i, j)),
                    Codelet::PscI(c) => (
                        signed(&c.out, i, j),
                        signed(&c.mat, i, j),
                        c.vec.base as i64 + c.vec.outer as i64 * i as i64 + c.vec.offsets[j] as i64,
                    ),
                    Codelet::PscII(c) => (c.out[i] as i64, signed(&c.mat, i, j), c.vec[i * n + j] as i64),
                };
                for (role, index, bound) in [("OUT", o, n_out), ("MAT", g, n_mat), ("VEC", h, n_vec)] {
                    if index < 0 || index >= bound as i64 {
                        return Err(CodeletError::OutOfBounds { role, i, j, index, bound });
                    }
                }
            }
        }
        Ok(())
    }

    /// Memory accesses per descriptor: the number of stride coefficients
    /// (the codelet's dimensionality) for strided descriptors, the table
    /// length otherwise.
    pub fn loads(&self) -> [usize; 3] {
        let d = self.dims();
        match self {
            Codelet::Blas(_) => [d, d, d],
            Codelet::PscI(c) => [d, d, c.vec.offsets.len()],
            Codelet::PscII(c) => [c.out.len(), d, c.vec.len()],
        }
    }
}

/// Cost of one codelet: operations plus access functions plus loaded
/// descriptor words.
pub fn codelet_cost(c: &Codelet) -> CostModelResult {
    let ops = c.ops();
    let loads = c.loads();
    CostModelResult {
        ops,
        functions: ACCESS_FUNCTIONS,
        loads,
        cost: ops + ACCESS_FUNCTIONS + loads.iter().sum::<usize>(),
    }
}

/// Summed cost of a list of codelets.
pub fn total_cost(codelets: &[Codelet]) -> usize {
    codelets.iter().map(|c| codelet_cost(c).cost).sum()
}
