//! Random grid systems with dense contacts: HSC and RGF against the dense oracle.

use std::sync::Arc;

use ndgreen::dense::relative_difference;
use ndgreen::hsc::{solve_hsc, Schedule, SolveLedger};
use ndgreen::oracle::solve_dense;
use ndgreen::partition::{nested_dissection_with, validate_partition, GroupPlacement};
use ndgreen::rgf::solve_rgf;
use ndgreen::synthetic::random_grid_system;

fn check(nx: usize, ny: usize, seed: u64, max_leaf: usize, placement: GroupPlacement) {
    let sys = random_grid_system(nx, ny, seed).unwrap();
    let tree = nested_dissection_with(&sys.graph, &sys.atomic_groups, max_leaf, placement).unwrap();
    assert!(validate_partition(&tree, &sys.graph).is_valid());
    let tree = Arc::new(tree);
    let groups: Vec<Vec<usize>> = tree.clusters().iter().map(|c| c.dofs.clone()).collect();
    let want = solve_dense(&sys.a, Some(&sys.sigma_lesser), &groups, 0.0).unwrap();
    let got = solve_hsc(&sys.a, Some(&sys.sigma_lesser), tree, 0.0, Schedule::Pruned, &mut SolveLedger::default()).unwrap();
    for (i, (g, w)) in got.retarded.iter().zip(&want.retarded).enumerate() {
        assert!(relative_difference(g, w) <= 1e-9, "{nx}x{ny} seed {seed} cluster {i}");
    }
    for (g, w) in got.lesser.as_ref().unwrap().iter().zip(want.lesser.as_ref().unwrap()) {
        assert!(relative_difference(g, w) <= 1e-9, "{nx}x{ny} seed {seed} lesser");
    }

    let by_layer = solve_dense(&sys.a, Some(&sys.sigma_lesser), &sys.layers, 0.0).unwrap();
    let rgf = solve_rgf(&sys.a, Some(&sys.sigma_lesser), &sys.layers, 0.0, &mut SolveLedger::default()).unwrap();
    for (g, w) in rgf.retarded.iter().zip(&by_layer.retarded) {
        assert!(relative_difference(g, w) <= 1e-9);
    }
    for (g, w) in rgf.lesser.as_ref().unwrap().iter().zip(by_layer.lesser.as_ref().unwrap()) {
        assert!(relative_difference(g, w) <= 1e-9);
    }
}

#[test]
fn small_grids_leaf_placement() {
    for (seed, (nx, ny)) in [(1, 1), (1, 5), (4, 1), (3, 3), (6, 9), (10, 7)].into_iter().enumerate() {
        check(nx, ny, seed as u64, 4, GroupPlacement::Leaf);
    }
}

#[test]
fn small_grids_root_placement() {
    for (seed, (nx, ny)) in [(2, 2), (5, 4), (7, 11), (12, 6)].into_iter().enumerate() {
        check(nx, ny, 50 + seed as u64, 6, GroupPlacement::Root);
    }
}

#[test]
fn medium_grid() {
    check(20, 24, 99, 32, GroupPlacement::Root);
}
