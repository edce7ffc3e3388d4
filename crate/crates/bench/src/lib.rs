//! Shared fixtures for the benchmarks.

use oms_core::gmra::{build_gmra, GmraParams};
use oms_core::harness::datasets::sample_sphere;
use oms_core::{Gmra, PointCloud};

/// The desk-scale 2-sphere in R^20 and its GMRA up to level 6.
pub fn sphere_fixture(n: usize, seed: u64) -> (PointCloud, Gmra) {
    let points = sample_sphere(2, 20, n, seed).expect("valid sphere parameters");
    let gmra = build_gmra(&points, GmraParams::new(2).with_range(0, 6)).expect("GMRA of a sphere sample");
    (points, gmra)
}
