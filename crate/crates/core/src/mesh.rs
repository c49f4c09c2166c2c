//! Polygonal meshes of a planar domain.
//!
//! Edges are derived from the element vertex loops. Each edge carries a
//! global tangent pointing from its lower to its higher vertex id and a
//! normal equal to the tangent rotated by -90 degrees; elements reference
//! their edges together with the sign that turns this normal outward.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("element {element} has {count} vertices, at least 3 are required")]
    TooFewVertices { element: usize, count: usize },
    #[error(
        "element {element} references vertex {vertex}, but the mesh has {n_vertices} vertices"
    )]
    VertexOutOfRange {
        element: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("element {element} is not counter-clockwise (signed area {area:e})")]
    NotCounterClockwise { element: usize, area: f64 },
    #[error("element {element} repeats vertex {vertex}")]
    RepeatedVertex { element: usize, vertex: usize },
    #[error("edge ({a}, {b}) is shared by more than two elements")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("edge ({a}, {b}) is traversed in the same direction by two elements")]
    InconsistentOrientation { a: usize, b: usize },
    #[error("element index {0} out of range")]
    ElementOutOfRange(usize),
    #[error("local edge index {local} out of range for element {element}")]
    LocalEdgeOutOfRange { element: usize, local: usize },
    #[error("mesh has no elements")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Triangle,
    Quadrilateral,
}

impl MeshKind {
    pub fn label(self) -> &'static str {
        match self {
            MeshKind::Triangle => "tri",
            MeshKind::Quadrilateral => "quad",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl Vertex {
    pub fn point(&self) -> Point {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: usize,
    /// Endpoints, lower global vertex id first.
    pub vertices: [usize; 2],
    /// First adjacent element and, for interior edges, the second one.
    pub elements: (usize, Option<usize>),
    pub length: f64,
    /// Unit vector from `vertices[0]` to `vertices[1]`.
    pub tangent: Point,
    /// `tangent` rotated by -90 degrees.
    pub normal: Point,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.elements.1.is_none()
    }

    pub fn adjacent_elements(&self) -> impl Iterator<Item = usize> {
        core::iter::once(self.elements.0).chain(self.elements.1)
    }
}

/// An edge as seen from one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementEdge {
    pub edge: usize,
    /// `sign * edge.normal` is the outward normal of the element.
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: usize,
    /// Counter-clockwise vertex loop.
    pub vertices: Vec<usize>,
    /// `edges[i]` joins `vertices[i]` and `vertices[i + 1]`.
    pub edges: Vec<ElementEdge>,
    pub area: f64,
    pub centroid: Point,
    /// Diameter of the smallest circle containing the element, taken as the
    /// largest vertex-to-vertex distance.
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub elements: Vec<Element>,
    /// Largest element diameter.
    pub h: f64,
}

fn signed_area(points: &[Point]) -> f64 {
    let m = points.len();
    let mut a = 0.0;
    for i in 0..m {
        let p = points[i];
        let q = points[(i + 1) % m];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

fn polygon_centroid(points: &[Point], area: f64) -> Point {
    let m = points.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..m {
        let p = points[i];
        let q = points[(i + 1) % m];
        let w = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * w;
        cy += (p[1] + q[1]) * w;
    }
    [cx / (6.0 * area), cy / (6.0 * area)]
}

pub(crate) fn distance(p: Point, q: Point) -> f64 {
    libm::hypot(q[0] - p[0], q[1] - p[1])
}

impl Mesh {
    /// Builds a mesh from vertex coordinates and counter-clockwise element
    /// vertex loops, deriving edges and orientation signs.
    pub fn from_polygons(points: Vec<Point>, loops: Vec<Vec<usize>>) -> Result<Mesh, MeshError> {
        if loops.is_empty() {
            return Err(MeshError::Empty);
        }
        let n_vertices = points.len();
        let vertices: Vec<Vertex> = points
            .iter()
            .enumerate()
            .map(|(id, p)| Vertex {
                id,
                x: p[0],
                y: p[1],
            })
            .collect();

        let mut edge_index: BTreeMap<(usize, usize), (usize, f64)> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut elements = Vec::with_capacity(loops.len());

        for (id, lp) in loops.into_iter().enumerate() {
            let m = lp.len();
            if m < 3 {
                return Err(MeshError::TooFewVertices {
                    element: id,
                    count: m,
                });
            }
            for (i, &v) in lp.iter().enumerate() {
                if v >= n_vertices {
                    return Err(MeshError::VertexOutOfRange {
                        element: id,
                        vertex: v,
                        n_vertices,
                    });
                }
                if lp[..i].contains(&v) {
                    return Err(MeshError::RepeatedVertex {
                        element: id,
                        vertex: v,
                    });
                }
            }
            let pts: Vec<Point> = lp.iter().map(|&v| points[v]).collect();
            let area = signed_area(&pts);
            if !(area > 0.0) {
                return Err(MeshError::NotCounterClockwise { element: id, area });
            }
            let centroid = polygon_centroid(&pts, area);
            let mut diameter: f64 = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    diameter = diameter.max(distance(pts[i], pts[j]));
                }
            }

            let mut element_edges = Vec::with_capacity(m);
            for i in 0..m {
                let a = lp[i];
                let b = lp[(i + 1) % m];
                let key = (a.min(b), a.max(b));
                let sign = if a < b { 1.0 } else { -1.0 };
                let eid = match edge_index.get(&key) {
                    Some(&(eid, first_sign)) => {
                        let edge = &mut edges[eid];
                        if edge.elements.1.is_some() {
                            return Err(MeshError::NonManifoldEdge { a: key.0, b: key.1 });
                        }
                        if first_sign == sign {
                            return Err(MeshError::InconsistentOrientation { a: key.0, b: key.1 });
                        }
                        edge.elements.1 = Some(id);
                        eid
                    }
                    None => {
                        let eid = edges.len();
                        let p = points[key.0];
                        let q = points[key.1];
                        let length = distance(p, q);
                        let tangent = [(q[0] - p[0]) / length, (q[1] - p[1]) / length];
                        edges.push(Edge {
                            id: eid,
                            vertices: [key.0, key.1],
                            elements: (id, None),
                            length,
                            tangent,
                            normal: [tangent[1], -tangent[0]],
                        });
                        edge_index.insert(key, (eid, sign));
                        eid
                    }
                };
                element_edges.push(ElementEdge { edge: eid, sign });
            }
            elements.push(Element {
                id,
                vertices: lp,
                edges: element_edges,
                area,
                centroid,
                diameter,
            });
        }

        let h = elements.iter().map(|e| e.diameter).fold(0.0, f64::max);
        Ok(Mesh {
            vertices,
            edges,
            elements,
            h,
        })
    }

    /// Structured mesh of the unit square with `n x n` cells. Triangles split
    /// every cell along the diagonal from its lower-left to its upper-right
    /// corner.
    pub fn structured(kind: MeshKind, n: usize) -> Mesh {
        assert!(n >= 1, "structured mesh needs n >= 1");
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let nf = n as f64;
        let mut points = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                points.push([i as f64 / nf, j as f64 / nf]);
            }
        }
        let mut loops = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) =
                    (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                match kind {
                    MeshKind::Quadrilateral => loops.push(alloc::vec![v00, v10, v11, v01]),
                    MeshKind::Triangle => {
                        loops.push(alloc::vec![v00, v10, v11]);
                        loops.push(alloc::vec![v00, v11, v01]);
                    }
                }
            }
        }
        let mut mesh = Mesh::from_polygons(points, loops).expect("structured mesh is well formed");
        // Every element of both families has the cell diagonal as its
        // diameter; the closed form keeps h exactly halved under refinement.
        let d = core::f64::consts::SQRT_2 / nf;
        for el in &mut mesh.elements {
            el.diameter = d;
        }
        mesh.h = d;
        mesh
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary()).count()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.is_boundary())
    }

    pub fn vertex_point(&self, v: usize) -> Point {
        self.vertices[v].point()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].vertices;
        let (p, q) = (self.vertex_point(a), self.vertex_point(b));
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }

    pub fn element_points(&self, k: usize) -> Vec<Point> {
        self.elements[k]
            .vertices
            .iter()
            .map(|&v| self.vertex_point(v))
            .collect()
    }

    /// Outward unit normal of element `element` on its `local`-th edge.
    pub fn outward_normal(&self, element: usize, local: usize) -> Result<Point, MeshError> {
        let el = self
            .elements
            .get(element)
            .ok_or(MeshError::ElementOutOfRange(element))?;
        let ee = el
            .edges
            .get(local)
            .ok_or(MeshError::LocalEdgeOutOfRange { element, local })?;
        let n = self.edges[ee.edge].normal;
        Ok([ee.sign * n[0], ee.sign * n[1]])
    }

    /// Unit tangent of element `element` on its `local`-th edge, oriented
    /// counter-clockwise around the element (outward normal rotated by +90
    /// degrees).
    pub fn element_tangent(&self, element: usize, local: usize) -> Result<Point, MeshError> {
        let n = self.outward_normal(element, local)?;
        Ok([-n[1], n[0]])
    }

    /// `V - E + F`; equals 1 for a simply connected planar mesh.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_elements() as i64
    }

    /// Elements with an edge shorter than `c_reg * h_K`.
    pub fn shape_regularity_violations(&self, c_reg: f64) -> Vec<usize> {
        self.elements
            .iter()
            .filter(|el| {
                el.edges
                    .iter()
                    .any(|ee| self.edges[ee.edge].length < c_reg * el.diameter)
            })
            .map(|el| el.id)
            .collect()
    }

    pub fn is_convex(&self, k: usize) -> bool {
        let pts = self.element_points(k);
        let m = pts.len();
        (0..m).all(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % m];
            let c = pts[(i + 2) % m];
            (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) > 0.0
        })
    }
}
