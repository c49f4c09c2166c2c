//! Quadrature rules on edges and convex polygons.
//!
//! Polygons are fanned into triangles around their centroid; each triangle
//! carries a collapsed (Duffy) tensor Gauss-Legendre rule, which is exact
//! for any requested total degree.

use alloc::vec::Vec;

use thiserror::Error;

use crate::mesh::{Mesh, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("element {0} is not convex")]
    NonConvex(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Edge rule that also records the arclength parameter `s` in `[0, 1]`,
/// measured along the global edge tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    pub rule: QuadratureRule,
    pub params: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, `n >= 1` points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss-Legendre rule mapped to `[0, 1]`.
fn unit_interval_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|&t| 0.5 * t).collect(),
    )
}

/// Rule on the triangle `(a, b, c)` exact for total degree `degree`.
pub fn triangle_rule(a: Point, b: Point, c: Point, degree: usize) -> QuadratureRule {
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        degree,
    };
    push_triangle(&mut rule, a, b, c, degree);
    rule
}

fn push_triangle(rule: &mut QuadratureRule, a: Point, b: Point, c: Point, degree: usize) {
    // (u, v) in [0,1]^2 -> (xi, eta) = (u, v (1 - u)), Jacobian (1 - u)
    let (us, wu) = unit_interval_rule((degree + 3) / 2);
    let (vs, wv) = unit_interval_rule(degree / 2 + 1);
    let jac = 2.0 * triangle_area(a, b, c);
    for (&u, &wu) in us.iter().zip(&wu) {
        for (&v, &wv) in vs.iter().zip(&wv) {
            let xi = u;
            let eta = v * (1.0 - u);
            rule.points.push([
                a[0] + xi * (b[0] - a[0]) + eta * (c[0] - a[0]),
                a[1] + xi * (b[1] - a[1]) + eta * (c[1] - a[1]),
            ]);
            rule.weights.push(wu * wv * (1.0 - u) * jac);
        }
    }
}

fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Rule on a convex polygon given by its counter-clockwise vertices.
pub fn polygon_rule(points: &[Point], centroid: Point, degree: usize) -> QuadratureRule {
    if points.len() == 3 {
        return triangle_rule(points[0], points[1], points[2], degree);
    }
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        degree,
    };
    let m = points.len();
    for i in 0..m {
        push_triangle(&mut rule, centroid, points[i], points[(i + 1) % m], degree);
    }
    rule
}

/// Element rule exact for physical-coordinate polynomials of degree `degree`.
pub fn quad_element(
    mesh: &Mesh,
    element: usize,
    degree: usize,
) -> Result<QuadratureRule, QuadratureError> {
    if !mesh.is_convex(element) {
        return Err(QuadratureError::NonConvex(element));
    }
    let el = &mesh.elements[element];
    Ok(polygon_rule(
        &mesh.element_points(element),
        el.centroid,
        degree,
    ))
}

/// Gauss rule on an edge with `ceil((degree + 1) / 2)` points.
pub fn quad_edge(mesh: &Mesh, edge: usize, degree: usize) -> EdgeRule {
    let e = &mesh.edges[edge];
    let p = mesh.vertex_point(e.vertices[0]);
    let q = mesh.vertex_point(e.vertices[1]);
    let (s, w) = unit_interval_rule(degree / 2 + 1);
    let points = s
        .iter()
        .map(|&t| [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])])
        .collect();
    EdgeRule {
        rule: QuadratureRule {
            points,
            weights: w.iter().map(|&wi| wi * e.length).collect(),
            degree,
        },
        params: s,
    }
}
