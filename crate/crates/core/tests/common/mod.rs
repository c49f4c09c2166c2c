#![allow(dead_code)]

pub mod oracle;

use plate_hdg::{Mesh, MeshKind, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Structured mesh with interior vertices moved by up to `amount * (1/n)` in
/// each coordinate. Vertex ordering and connectivity match the structured
/// mesh.
pub fn jittered(kind: MeshKind, n: usize, amount: f64, seed: u64) -> Mesh {
    let base = Mesh::structured(kind, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / n as f64;
    let points: Vec<Point> = base
        .vertices
        .iter()
        .map(|v| {
            let on_boundary = v.x == 0.0 || v.x == 1.0 || v.y == 0.0 || v.y == 1.0;
            if on_boundary {
                [v.x, v.y]
            } else {
                [
                    v.x + amount * h * rng.gen_range(-1.0..1.0),
                    v.y + amount * h * rng.gen_range(-1.0..1.0),
                ]
            }
        })
        .collect();
    let loops = base.elements.iter().map(|e| e.vertices.clone()).collect();
    Mesh::from_polygons(points, loops).expect("small jitter keeps the mesh valid")
}

/// A point strictly inside element `e`, from barycentric-like weights.
pub fn interior_point(mesh: &Mesh, e: usize, weights: &[f64]) -> Point {
    let pts = mesh.element_points(e);
    let total: f64 = weights.iter().take(pts.len()).map(|w| w + 0.05).sum();
    let mut p = [0.0, 0.0];
    for (q, w) in pts.iter().zip(weights) {
        p[0] += (w + 0.05) / total * q[0];
        p[1] += (w + 0.05) / total * q[1];
    }
    p
}

/// `Σ c_ab x^a y^b` over `a + b <= degree`, in graded order.
pub fn poly_eval(coeffs: &[f64], degree: usize, p: Point) -> f64 {
    let mut s = 0.0;
    let mut i = 0;
    for d in 0..=degree {
        for b in 0..=d {
            let a = d - b;
            if i < coeffs.len() {
                s += coeffs[i] * p[0].powi(a as i32) * p[1].powi(b as i32);
            }
            i += 1;
        }
    }
    s
}

pub fn kind_of(quad: bool) -> MeshKind {
    if quad {
        MeshKind::Quadrilateral
    } else {
        MeshKind::Triangle
    }
}
