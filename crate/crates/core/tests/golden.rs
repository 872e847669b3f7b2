//! Frozen text outputs. Regenerate with `PSC_BLESS=1 cargo test --test golden`
//! after an intentional format change, then review the diff.

use std::path::PathBuf;

use psc_core::kernel::{compute_access_functions, dump_region, KernelKind, Rect};
use psc_core::matrix::{generate_pattern, Band, PatternKind};
use psc_core::miner::{inspect, InspectOptions};
use psc_core::schedule::{find_dependencies, partition_iteration_space};

fn check(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("PSC_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden file {name} differs");
}

#[test]
fn gather_region_dump() {
    let a = generate_pattern(&PatternKind::ScatteredGather { rows: 3, cols: vec![0, 2, 5] }).unwrap();
    let model = compute_access_functions(KernelKind::Spmv, &a).unwrap();
    check("gather_region.txt", &dump_region(&model, &Rect::new(0..3, 0..3)).unwrap());
}

#[test]
fn tridiagonal_lower_schedule_dump() {
    let a = generate_pattern(&PatternKind::Banded { n: 6, bandwidth: 1, band: Band::Lower }).unwrap();
    let mut t: Vec<(usize, usize, f64)> = Vec::new();
    for r in 0..a.n_rows() {
        for &c in a.row_cols(r) {
            // Drop the (3,2) entry: two independent chains of three rows.
            if (r, c) != (3, 2) {
                t.push((r, c, 1.0));
            }
        }
    }
    let a = psc_core::CsrMatrix::from_triplets(6, 6, &t).unwrap();
    let g = find_dependencies(KernelKind::Sptrsv, &a);
    check("bidiagonal_schedule.txt", &partition_iteration_space(&g, &a, 2).dump());
}

#[test]
fn small_plan_json() {
    let a = generate_pattern(&PatternKind::Banded { n: 4, bandwidth: 1, band: Band::Both }).unwrap();
    let plan = inspect(KernelKind::Spmv, &a, InspectOptions { window: 2, groups: 2 }).unwrap();
    check("banded4_plan.json", &(serde_json::to_string_pretty(&plan.to_json()).unwrap() + "\n"));
}
