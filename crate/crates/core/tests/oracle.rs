//! Condensed solves against dense monolithic solves of the same systems.

mod common;

use common::oracle::stage_differences;
use plate_hdg::MeshKind;

#[test]
fn condensed_matches_monolithic() {
    for kind in [MeshKind::Triangle, MeshKind::Quadrilateral] {
        for n in [2, 4] {
            for k in [1, 2] {
                for t in [1.0, 0.01] {
                    let [d1, d2, d3] = stage_differences(kind, n, k, t);
                    println!("{kind:?} n={n} k={k} t={t}: {d1:.2e} {d2:.2e} {d3:.2e}");
                    assert!(d1 <= 1e-8 && d2 <= 1e-8 && d3 <= 1e-8);
                }
            }
        }
    }
}
