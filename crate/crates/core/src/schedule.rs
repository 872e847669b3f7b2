//! Outer-iteration dependency graph and its partitioning into ordered,
//! internally independent groups.
//!
//! Dependent kernels are partitioned by level sets (wavefronts); edgeless
//! kernels are cut into contiguous row ranges of balanced nonzero count.

use std::fmt::Write as _;

use crate::kernel::KernelKind;
use crate::matrix::CsrMatrix;

/// Flow dependencies between rows; every edge `(src, dst)` has `src < dst`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    /// The kernel carries dependencies across outer iterations in general,
    /// even if this pattern happens to produce none.
    loop_carried: bool,
}

impl DependencyGraph {
    /// Builds a graph from raw edges, dropping self loops and duplicates.
    ///
    /// # Panics
    /// If an edge points backwards or out of range.
    pub fn from_edges(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges: Vec<(usize, usize)> = edges.into_iter().filter(|(s, d)| s != d).collect();
        for &(s, d) in &edges {
            assert!(s < d && d < n_vertices, "edge ({s}, {d}) must go forward within {n_vertices} vertices");
        }
        edges.sort_unstable_by_key(|&(s, d)| (d, s));
        edges.dedup();
        let loop_carried = !edges.is_empty();
        Self { n_vertices, edges, loop_carried }
    }

    /// Marks the graph as coming from a kernel with loop-carried
    /// dependencies, so it is partitioned by level sets even when edgeless.
    pub fn with_loop_carried(mut self, carried: bool) -> Self {
        self.loop_carried = carried || !self.edges.is_empty();
        self
    }

    pub fn is_loop_carried(&self) -> bool {
        self.loop_carried
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Edges sorted by destination, then source.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_edgeless(&self) -> bool {
        self.edges.is_empty()
    }

    /// Longest-path depth of every vertex.
    pub fn levels(&self) -> Vec<usize> {
        let mut level = vec![0usize; self.n_vertices];
        // Edges are sorted by destination and always point forward, so every
        // source level is final before it is read.
        for &(s, d) in &self.edges {
            level[d] = level[d].max(level[s] + 1);
        }
        level
    }
}

/// SpMV has no cross-row dependencies; SpTRSV row `i` reads `x[j]` for every
/// stored off-diagonal `(i, j)`.
pub fn find_dependencies(kind: KernelKind, pattern: &CsrMatrix) -> DependencyGraph {
    let n = pattern.n_rows();
    match kind {
        KernelKind::Spmv => DependencyGraph::from_edges(n, []),
        KernelKind::Sptrsv => {
            let edges = (0..n).flat_map(|i| pattern.row_cols(i).iter().filter(move |&&j| j < i).map(move |&j| (j, i)));
            DependencyGraph::from_edges(n, edges).with_loop_carried(true)
        }
    }
}

/// Ordered partitions of the outer iterations. Rows inside a partition are
/// sorted and mutually independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    partitions: Vec<Vec<usize>>,
}

impl Schedule {
    pub fn new(partitions: Vec<Vec<usize>>) -> Self {
        Self { partitions }
    }

    pub fn partitions(&self) -> &[Vec<usize>] {
        &self.partitions
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    /// Partition index of every row, `None` for rows not scheduled.
    pub fn partition_of(&self, n_rows: usize) -> Vec<Option<usize>> {
        let mut owner = vec![None; n_rows];
        for (k, part) in self.partitions.iter().enumerate() {
            for &r in part {
                owner[r] = Some(k);
            }
        }
        owner
    }

    /// Every edge goes from an earlier partition to a later one, and the
    /// partitions are a disjoint cover of `0..n_vertices`.
    pub fn is_legal_for(&self, g: &DependencyGraph) -> bool {
        let mut seen = vec![false; g.n_vertices()];
        for part in &self.partitions {
            for &r in part {
                if r >= seen.len() || seen[r] {
                    return false;
                }
                seen[r] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return false;
        }
        let owner = self.partition_of(g.n_vertices());
        g.edges().iter().all(|&(s, d)| owner[s] < owner[d])
    }

    /// One line per partition listing its row ids.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, part) in self.partitions.iter().enumerate() {
            let rows: Vec<String> = part.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{k}: {}", rows.join(" "));
        }
        out
    }
}

/// Level sets when `g` is loop-carried; otherwise `target_groups` contiguous
/// row ranges with balanced nonzero counts. Empty ranges are dropped.
pub fn partition_iteration_space(g: &DependencyGraph, pattern: &CsrMatrix, target_groups: usize) -> Schedule {
    let target_groups = target_groups.max(1);
    if g.is_loop_carried() {
        let levels = g.levels();
        let depth = levels.iter().copied().max().map_or(0, |d| d + 1);
        let mut partitions = vec![Vec::new(); depth];
        for (row, &lvl) in levels.iter().enumerate() {
            partitions[lvl].push(row);
        }
        return Schedule::new(partitions);
    }

    let n = g.n_vertices();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for row in 0..n {
        prefix.push(prefix[row] + pattern.row_nnz(row));
    }
    let total = prefix[n] as f64;
    let mut cuts = vec![0usize];
    for k in 1..target_groups {
        let goal = total * k as f64 / target_groups as f64;
        let prev = *cuts.last().unwrap();
        // First boundary at or past the goal, then step back if the
        // preceding boundary is closer.
        let mut b = prefix.partition_point(|&p| (p as f64) < goal).max(prev);
        if b > prev && b <= n && goal - prefix[b - 1] as f64 <= prefix[b] as f64 - goal {
            b -= 1;
        }
        cuts.push(b.min(n));
    }
    cuts.push(n);
    let partitions = cuts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0]..w[1]).collect())
        .collect();
    Schedule::new(partitions)
}
