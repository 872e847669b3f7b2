use proptest::prelude::*;
use psc_core::codelet::Codelet;
use psc_core::executor::{spmv_csr_baseline, sptrsv_csr_baseline, ExecutionContext, Executor};
use psc_core::kernel::{classify_region, compute_access_functions, compute_fopd, CodeletClass, FopdTable, KernelKind, Rect};
use psc_core::matrix::{
    generate_pattern, lower_triangular, parse_matrix_market, write_matrix_market, Band, CsrMatrix, PatternKind,
};
use psc_core::miner::{
    get_consecutive_iterations, inspect, inspect_with_schedule, pscii_first, run_strategy, CodeletPlan, InspectOptions,
    PartitionFopd, Strategy as MiningStrategy,
};
use psc_core::schedule::{find_dependencies, partition_iteration_space, Schedule};

fn triplets(max_dim: usize) -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, f64)>)> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        let entry = (0..r, 0..c, -1e3f64..1e3);
        (Just(r), Just(c), prop::collection::vec(entry, 0..(r * c).min(60)))
    })
}

fn matrix(max_dim: usize) -> impl Strategy<Value = CsrMatrix> {
    triplets(max_dim).prop_map(|(r, c, t)| CsrMatrix::from_triplets(r, c, &t).unwrap())
}

fn square_matrix(max_dim: usize) -> impl Strategy<Value = CsrMatrix> {
    (1..=max_dim).prop_flat_map(|n| prop::collection::vec((0..n, 0..n, -1e3f64..1e3), 0..(n * n).min(60)))
        .prop_map(|t| {
            let n = t.iter().map(|&(r, c, _)| r.max(c) + 1).max().unwrap_or(1);
            CsrMatrix::from_triplets(n, n, &t).unwrap()
        })
}

/// Random pattern mix: dense, banded, scattered and uniform.
fn pattern() -> impl Strategy<Value = CsrMatrix> {
    prop_oneof![
        (1usize..12).prop_map(|n| PatternKind::DenseBlock { n }),
        (1usize..40, 0usize..4, prop_oneof![Just(Band::Lower), Just(Band::Upper), Just(Band::Both)])
            .prop_map(|(n, bandwidth, band)| PatternKind::Banded { n, bandwidth, band }),
        (1usize..40, prop::collection::vec(0usize..30, 1..8)).prop_map(|(rows, cols)| PatternKind::ScatteredGather { rows, cols }),
        (1usize..40, 1usize..40, 0.05f64..0.6, any::<u64>())
            .prop_map(|(rows, cols, density, seed)| PatternKind::RandomUniform { rows, cols, density, seed }),
    ]
    .prop_map(|k| generate_pattern(&k).unwrap())
}

/// Square pattern turned into a lower triangle with a dominant diagonal.
fn triangular() -> impl Strategy<Value = CsrMatrix> {
    (1usize..40, 0.0f64..0.5, any::<u64>()).prop_map(|(n, density, seed)| {
        let a = if density == 0.0 {
            CsrMatrix::identity(n)
        } else {
            generate_pattern(&PatternKind::RandomUniform { rows: n, cols: n, density, seed }).unwrap()
        };
        let a = a.map_values(|r, c, _| 0.5 + ((r * 7 + c * 3) % 11) as f64 / 11.0);
        lower_triangular(&a.with_dominant_diagonal(1.0).unwrap()).unwrap().into_csr()
    })
}

fn values_for(a: &CsrMatrix, seed: u64) -> CsrMatrix {
    a.map_values(|r, c, p| 0.5 + ((r as u64 * 31 + c as u64 * 17 + p as u64 + seed) % 97) as f64 / 97.0)
}

fn kernel_operands(kind: KernelKind, a: &CsrMatrix) -> Vec<(usize, usize)> {
    (0..a.n_rows())
        .flat_map(|row| a.row_range(row).filter(move |&p| kind == KernelKind::Spmv || a.col_indices()[p] != row).map(move |p| (row, p)))
        .collect()
}

fn run_plan(plan: &CodeletPlan, a: &CsrMatrix, input: &[f64], workers: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.n_rows()];
    let ctx = match plan.kernel {
        KernelKind::Spmv => ExecutionContext::Spmv { values: a.values(), x: input, y: &mut out },
        KernelKind::Sptrsv => ExecutionContext::Sptrsv { values: a.values(), b: input, x: &mut out },
    };
    Executor::new(workers).execute(plan, ctx).unwrap();
    out
}

fn baseline(kind: KernelKind, a: &CsrMatrix, input: &[f64]) -> Vec<f64> {
    match kind {
        KernelKind::Spmv => spmv_csr_baseline(a, input).unwrap(),
        KernelKind::Sptrsv => sptrsv_csr_baseline(&lower_triangular(a).unwrap(), input).unwrap(),
    }
}

fn close(got: &[f64], want: &[f64], tol: f64) -> bool {
    got.iter().zip(want).all(|(g, w)| g == w || (g - w).abs() <= tol * w.abs().max(1e-300))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matrix_market_round_trip(a in matrix(12)) {
        let text = write_matrix_market(&a);
        let b = parse_matrix_market(&text).unwrap();
        prop_assert_eq!(&b, &a);
        prop_assert_eq!(parse_matrix_market(&write_matrix_market(&b)).unwrap(), a);
    }

    #[test]
    fn lower_triangle_invariants(a in square_matrix(12), shift in 0.5f64..2.0) {
        let a = a.with_dominant_diagonal(shift).unwrap();
        let l = lower_triangular(&a).unwrap();
        let c = l.csr();
        prop_assert!(c.nnz() <= a.nnz());
        for row in 0..c.n_rows() {
            let cols = c.row_cols(row);
            prop_assert_eq!(*cols.last().unwrap(), row);
            prop_assert!(cols.iter().all(|&j| j <= row));
            let expect: Vec<(usize, f64)> = a.row_cols(row).iter().copied().zip(a.row_values(row).iter().copied()).filter(|&(j, _)| j <= row).collect();
            let got: Vec<(usize, f64)> = cols.iter().copied().zip(c.row_values(row).iter().copied()).collect();
            prop_assert_eq!(got, expect);
            prop_assert!(l.diag(row) != 0.0);
        }
    }

    #[test]
    fn generators_are_reproducible(rows in 1usize..30, cols in 1usize..30, density in 0.01f64..1.0, seed in any::<u64>()) {
        let k = PatternKind::RandomUniform { rows, cols, density, seed };
        let a = generate_pattern(&k).unwrap();
        let b = generate_pattern(&k).unwrap();
        prop_assert_eq!(a.row_offsets(), b.row_offsets());
        prop_assert_eq!(a.col_indices(), b.col_indices());
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn fopd_matches_direct_tabulation(a in pattern(), r0 in 0usize..40, h in 1usize..5, j0 in 0usize..4, w in 1usize..5) {
        let model = compute_access_functions(KernelKind::Spmv, &a).unwrap();
        let rows: Vec<usize> = (r0..r0 + h).filter(|&r| r < a.n_rows()).collect();
        prop_assume!(!rows.is_empty());
        let extent = rows.iter().map(|&r| a.row_nnz(r)).min().unwrap();
        prop_assume!(j0 + w <= extent);
        let region = Rect::new(rows.clone(), j0..j0 + w);
        for f in model.functions() {
            let t = compute_fopd(f, &region).unwrap();
            let at = |r: usize, j: usize| f.index_at(rows[r], j).unwrap() as i64;
            for r in 0..rows.len() {
                for j in 0..w - 1 {
                    prop_assert_eq!(t.d_inner[r][j], at(r, j0 + j + 1) - at(r, j0 + j));
                }
            }
            for r in 0..rows.len() - 1 {
                for j in 0..w {
                    prop_assert_eq!(t.d_outer[r][j], at(r + 1, j0 + j) - at(r, j0 + j));
                }
            }
        }
        // Single rows: MAT is contiguous. SpMV: OUT is i0 itself.
        let single = Rect::new([rows[0]], j0..j0 + w);
        prop_assert!(compute_fopd(model.mat(), &single).unwrap().strided_inner);
        let out = compute_fopd(model.out(), &region).unwrap();
        prop_assert!(out.strided_inner && (rows.len() < 2 || rows.windows(2).any(|p| p[1] != p[0] + 1) || out.is_strided()));
    }

    #[test]
    fn blas_iff_affine(a in pattern(), r0 in 0usize..40, h in 1usize..5, w in 1usize..5) {
        let model = compute_access_functions(KernelKind::Spmv, &a).unwrap();
        let rows: Vec<usize> = (r0..r0 + h).filter(|&r| r < a.n_rows()).collect();
        prop_assume!(!rows.is_empty());
        let extent = rows.iter().map(|&r| a.row_nnz(r)).min().unwrap();
        prop_assume!(w <= extent);
        let region = Rect::new(rows.clone(), 0..w);
        // Fit f = c + a·i + b·j from three points and verify everywhere.
        let affine = model.functions().iter().all(|f| {
            let at = |i: usize, j: usize| f.index_at(rows[i], j).unwrap() as i64;
            let c = at(0, 0);
            let b = if w > 1 { at(0, 1) - c } else { 0 };
            let a_ = if rows.len() > 1 { at(1, 0) - c } else { 0 };
            (0..rows.len()).all(|i| (0..w).all(|j| at(i, j) == c + a_ * i as i64 + b * j as i64))
        });
        prop_assert_eq!(classify_region(&model, &region).unwrap() == CodeletClass::Blas, affine);
    }

    #[test]
    fn spmv_schedule_is_legal_and_balanced(a in pattern(), groups in 1usize..9) {
        let g = find_dependencies(KernelKind::Spmv, &a);
        let s = partition_iteration_space(&g, &a, groups);
        prop_assert!(s.is_legal_for(&g));
        prop_assert!(s.len() <= groups);
        let max_row = (0..a.n_rows()).map(|r| a.row_nnz(r)).max().unwrap_or(0) as f64;
        let ideal = a.nnz() as f64 / groups as f64;
        for part in s.partitions() {
            prop_assert!(part.windows(2).all(|w| w[1] == w[0] + 1), "ranges are contiguous");
            let nnz: usize = part.iter().map(|&r| a.row_nnz(r)).sum();
            prop_assert!(nnz as f64 <= ideal + max_row + 1e-9, "partition nnz {} vs ideal {}", nnz, ideal);
        }
    }

    #[test]
    fn sptrsv_levels_are_legal(l in triangular()) {
        let g = find_dependencies(KernelKind::Sptrsv, &l);
        let s = partition_iteration_space(&g, &l, 4);
        prop_assert!(s.is_legal_for(&g));
        prop_assert!(s.len() <= l.n_rows());
        prop_assert_eq!(s.len() == 1, g.is_edgeless());
        let owner = s.partition_of(l.n_rows());
        for i in 0..l.n_rows() {
            for &j in l.row_cols(i).iter().filter(|&&j| j < i) {
                prop_assert!(owner[j] < owner[i]);
            }
        }
    }

    #[test]
    fn plans_cover_every_operation_once(a in pattern(), l in triangular(), t in 1usize..9, groups in 1usize..5) {
        for (kind, m) in [(KernelKind::Spmv, &a), (KernelKind::Sptrsv, &l)] {
            let plan = inspect(kind, m, InspectOptions { window: t, groups }).unwrap();
            let mut covered = plan.covered_operations();
            covered.sort_unstable();
            prop_assert_eq!(covered, kernel_operands(kind, m));
            // Every covered point is a real (row, entry, column) triple.
            for c in plan.codelets() {
                for (o, g, h) in c.points() {
                    prop_assert!(m.row_range(o).contains(&g));
                    prop_assert_eq!(m.col_indices()[g], h);
                }
            }
        }
    }

    #[test]
    fn selected_cost_is_strategy_minimum(a in pattern(), t in 1usize..9) {
        let model = compute_access_functions(KernelKind::Spmv, &a).unwrap();
        let plan = inspect(KernelKind::Spmv, &a, InspectOptions { window: t, groups: 2 }).unwrap();
        for part in &plan.partitions {
            let fopd = PartitionFopd::compute(&model, &part.rows);
            for (w, r) in get_consecutive_iterations(&part.rows, t).iter().zip(&part.regions) {
                let costs: Vec<usize> = MiningStrategy::ALL.iter().map(|&s| run_strategy(s, &model, w, &fopd).1).collect();
                prop_assert_eq!(r.cost, *costs.iter().min().unwrap());
                let (_, fallback) = pscii_first(&model, w, &fopd);
                prop_assert!(r.cost <= fallback);
                // Per-row PSC_II bound: n ops + 3 + (1 + 1 + n) loads.
                let per_row: usize = w.rows.iter().map(|&row| a.row_nnz(row)).filter(|&n| n > 0).map(|n| 2 * n + 5).sum();
                prop_assert!(fallback <= per_row);
            }
        }
    }

    #[test]
    fn duplicating_rows_scales_work(a in pattern(), k in 2usize..4) {
        let rows = a.n_rows().min(4);
        let mut dup = Vec::new();
        for r in 0..rows {
            for _ in 0..k {
                dup.push(a.row_cols(r).iter().map(|&c| (c, 1.0)).collect::<Vec<_>>());
            }
        }
        let trip: Vec<(usize, usize, f64)> = dup.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |&(c, v)| (i, c, v))).collect();
        let base: Vec<(usize, usize, f64)> = (0..rows).flat_map(|r| a.row_cols(r).iter().map(move |&c| (r, c, 1.0))).collect();
        let small = CsrMatrix::from_triplets(rows, a.n_cols(), &base).unwrap();
        let big = CsrMatrix::from_triplets(rows * k, a.n_cols(), &trip).unwrap();
        let one = inspect(KernelKind::Spmv, &small, InspectOptions { window: rows, groups: 1 }).unwrap();
        let many = inspect(KernelKind::Spmv, &big, InspectOptions { window: rows * k, groups: 1 }).unwrap();
        prop_assert_eq!(many.ops_by_kind().total(), k * one.ops_by_kind().total());
        prop_assert!(many.cost() >= one.cost());
    }

    #[test]
    fn codelets_never_over_claim(a in pattern(), l in triangular(), t in 1usize..9) {
        for (kind, m) in [(KernelKind::Spmv, &a), (KernelKind::Sptrsv, &l)] {
            let plan = inspect(kind, m, InspectOptions { window: t, groups: 2 }).unwrap();
            for c in plan.codelets() {
                let (rows, cols) = c.extent();
                let grid = |role: usize| -> FopdTable {
                    let g: Vec<Vec<i64>> = (0..rows)
                        .map(|i| (0..cols).map(|j| { let p = c.indices(i, j); [p.0, p.1, p.2][role] as i64 }).collect())
                        .collect();
                    FopdTable::from_grid(&g)
                };
                let [out, mat, vec] = [grid(0), grid(1), grid(2)];
                prop_assert!(mat.is_strided());
                match c {
                    Codelet::Blas(_) => prop_assert!(out.is_strided() && vec.is_strided()),
                    Codelet::PscI(_) => prop_assert!(out.is_strided()),
                    Codelet::PscII(_) => {}
                }
            }
        }
    }

    #[test]
    fn executor_matches_baseline(a in pattern(), l in triangular(), seed in any::<u64>(), workers in 1usize..5) {
        for t in [1, 2, 3, 8] {
            for (kind, m) in [(KernelKind::Spmv, values_for(&a, seed)), (KernelKind::Sptrsv, l.clone())] {
                let input: Vec<f64> = (0..m.n_cols()).map(|i| 0.5 + ((i as u64 ^ seed) % 13) as f64 / 13.0).collect();
                let plan = inspect(kind, &m, InspectOptions { window: t, groups: workers }).unwrap();
                let got = run_plan(&plan, &m, &input, workers);
                let want = baseline(kind, &m, &input);
                prop_assert!(close(&got, &want, 1e-12), "{} t={}: {:?} vs {:?}", kind, t, got, want);
            }
        }
    }

    #[test]
    fn small_integers_are_exact(a in pattern(), t in 1usize..9) {
        let m = a.map_values(|r, c, _| ((r + 2 * c) % 7) as f64 - 3.0);
        let x: Vec<f64> = (0..m.n_cols()).map(|i| (i % 5) as f64 - 2.0).collect();
        let plan = inspect(KernelKind::Spmv, &m, InspectOptions { window: t, groups: 3 }).unwrap();
        prop_assert_eq!(run_plan(&plan, &m, &x, 2), spmv_csr_baseline(&m, &x).unwrap());
    }

    #[test]
    fn spmv_partition_order_does_not_matter(a in pattern(), t in 1usize..9, groups in 1usize..6) {
        let m = values_for(&a, 7);
        let x: Vec<f64> = (0..m.n_cols()).map(|i| 1.0 + i as f64 / 8.0).collect();
        let model = compute_access_functions(KernelKind::Spmv, &m).unwrap();
        let g = find_dependencies(KernelKind::Spmv, &m);
        let forward = partition_iteration_space(&g, &m, groups);
        let mut parts = forward.partitions().to_vec();
        parts.reverse();
        let reversed = Schedule::new(parts);
        let p1 = inspect_with_schedule(&model, &m, &forward, t).unwrap();
        let p2 = inspect_with_schedule(&model, &m, &reversed, t).unwrap();
        prop_assert_eq!(run_plan(&p1, &m, &x, 3), run_plan(&p2, &m, &x, 3));
    }

    #[test]
    fn results_do_not_depend_on_workers(a in pattern(), l in triangular(), t in 1usize..9) {
        for (kind, m) in [(KernelKind::Spmv, values_for(&a, 3)), (KernelKind::Sptrsv, l.clone())] {
            let input: Vec<f64> = (0..m.n_cols()).map(|i| (i as f64 * 0.37).sin()).collect();
            let plan = inspect(kind, &m, InspectOptions { window: t, groups: 4 }).unwrap();
            let bits = |w| run_plan(&plan, &m, &input, w).iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            let one = bits(1);
            prop_assert_eq!(&one, &bits(2));
            prop_assert_eq!(&one, &bits(8));
        }
    }
}
