//! Polynomial spaces on elements and edges.
//!
//! Element bases are scaled monomials `((x - x_K) / h_K)^a ((y - y_K) / h_K)^b`
//! in physical coordinates, ordered by total degree so that the first
//! `dim P_j` functions of a degree-`k` basis span `P_j`. Edge bases are
//! monomials `s^j` in the arclength parameter `s` in `[0, 1]` running along
//! the global edge tangent.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dofs::{DofMap, SpaceConfig};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{quad_edge, quad_element, QuadratureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("operator {op:?} is not defined for {rank:?} fields")]
    RankMismatch { op: DerivativeOp, rank: Rank },
    #[error("mass matrix of element {0} is not positive definite")]
    SingularMass(usize),
    #[error("mass matrix of edge {0} is not positive definite")]
    SingularEdgeMass(usize),
    #[error("requested degree {requested} exceeds basis degree {available}")]
    DegreeTooHigh { requested: usize, available: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// `dim P_j` in two variables.
pub const fn monomial_count(j: usize) -> usize {
    (j + 1) * (j + 2) / 2
}

/// Exponents `(a, b)` of the degree-`j` monomials in basis order.
pub fn monomial_exponents(j: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(monomial_count(j));
    for d in 0..=j {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    Vector2,
    /// Symmetric 2x2 tensor stored as components `(xx, yy, xy)`.
    SymTensor,
}

impl Rank {
    pub fn components(self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector2 => 2,
            Rank::SymTensor => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOp {
    Value,
    Grad,
    Div,
    Curl,
    PerpGrad,
    SymGrad,
}

/// Scaled monomials of one element, optionally orthonormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBasis {
    pub center: Point,
    pub h: f64,
    pub degree: usize,
    exponents: Vec<(usize, usize)>,
    /// Row-major lower-triangular change of basis, `phi_i = sum_j T_ij m_j`.
    transform: Option<Vec<f64>>,
}

impl LocalBasis {
    pub fn monomial(mesh: &Mesh, element: usize, degree: usize) -> LocalBasis {
        let el = &mesh.elements[element];
        LocalBasis {
            center: el.centroid,
            h: el.diameter,
            degree,
            exponents: monomial_exponents(degree),
            transform: None,
        }
    }

    /// Gram-Schmidt orthonormalized variant, in the element L2 inner product.
    pub fn orthonormal(
        mesh: &Mesh,
        element: usize,
        degree: usize,
    ) -> Result<LocalBasis, BasisError> {
        let mut b = LocalBasis::monomial(mesh, element, degree);
        let mass = b.mass_matrix(mesh, element)?;
        let chol = mass.cholesky().ok_or(BasisError::SingularMass(element))?;
        let l = chol.l();
        let n = b.dim();
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(BasisError::SingularMass(element))?;
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                t[i * n + j] = linv[(i, j)];
            }
        }
        b.transform = Some(t);
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.transform.is_some()
    }

    /// Coefficients of the constant function 1.
    pub fn constant_coefficients(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        c[0] = match &self.transform {
            Some(t) => 1.0 / t[0],
            None => 1.0,
        };
        c
    }

    fn powers(&self, p: Point) -> (Vec<f64>, Vec<f64>) {
        let u = (p[0] - self.center[0]) / self.h;
        let v = (p[1] - self.center[1]) / self.h;
        let mut pu = vec![1.0; self.degree + 1];
        let mut pv = vec![1.0; self.degree + 1];
        for i in 1..=self.degree {
            pu[i] = pu[i - 1] * u;
            pv[i] = pv[i - 1] * v;
        }
        (pu, pv)
    }

    fn apply_transform(&self, vals: &mut [f64]) {
        if let Some(t) = &self.transform {
            let n = self.dim();
            for i in (0..n).rev() {
                let mut s = 0.0;
                for j in 0..=i {
                    s += t[i * n + j] * vals[j];
                }
                vals[i] = s;
            }
        }
    }

    pub fn values(&self, p: Point, out: &mut [f64]) {
        let (pu, pv) = self.powers(p);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            *o = pu[a] * pv[b];
        }
        self.apply_transform(out);
    }

    /// Values and physical gradients of every basis function.
    pub fn values_and_gradients(&self, p: Point, v: &mut [f64], dx: &mut [f64], dy: &mut [f64]) {
        let (pu, pv) = self.powers(p);
        let inv_h = 1.0 / self.h;
        for (i, &(a, b)) in self.exponents.iter().enumerate() {
            v[i] = pu[a] * pv[b];
            dx[i] = if a > 0 {
                a as f64 * pu[a - 1] * pv[b] * inv_h
            } else {
                0.0
            };
            dy[i] = if b > 0 {
                b as f64 * pu[a] * pv[b - 1] * inv_h
            } else {
                0.0
            };
        }
        self.apply_transform(v);
        self.apply_transform(dx);
        self.apply_transform(dy);
    }

    pub fn mass_matrix(&self, mesh: &Mesh, element: usize) -> Result<DMatrix<f64>, BasisError> {
        let rule = quad_element(mesh, element, 2 * self.degree)?;
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut v = vec![0.0; n];
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            self.values(p, &mut v);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        Ok(m)
    }

    /// Evaluates the coefficient vector `c` (first `c.len()` functions).
    pub fn evaluate(&self, c: &[f64], p: Point) -> f64 {
        let mut v = vec![0.0; self.dim()];
        self.values(p, &mut v);
        c.iter().zip(&v).map(|(a, b)| a * b).sum()
    }
}

/// A vector- or tensor-valued basis built from the scalar local basis.
///
/// Function `c * n + i` carries scalar function `i` in component `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementBasis {
    pub element: usize,
    pub degree: usize,
    pub rank: Rank,
    pub scalar: LocalBasis,
}

impl ElementBasis {
    pub fn new(mesh: &Mesh, element: usize, degree: usize, rank: Rank) -> ElementBasis {
        ElementBasis {
            element,
            degree,
            rank,
            scalar: LocalBasis::monomial(mesh, element, degree),
        }
    }

    pub fn dim(&self) -> usize {
        self.scalar.dim() * self.rank.components()
    }

    /// Number of output components of `op` applied to this basis.
    pub fn output_components(&self, op: DerivativeOp) -> Result<usize, BasisError> {
        use DerivativeOp::*;
        let n = match (self.rank, op) {
            (r, Value) => r.components(),
            (Rank::Scalar, Grad | PerpGrad) => 2,
            (Rank::Vector2, Div | Curl) => 1,
            (Rank::Vector2, SymGrad) => 3,
            (Rank::SymTensor, Div) => 2,
            (rank, op) => return Err(BasisError::RankMismatch { op, rank }),
        };
        Ok(n)
    }

    /// `op` applied to every basis function at `p`, row-major
    /// `[basis function][component]`.
    pub fn eval(&self, op: DerivativeOp, p: Point) -> Result<Vec<f64>, BasisError> {
        use DerivativeOp::*;
        let nc = self.output_components(op)?;
        let n = self.scalar.dim();
        let (mut v, mut dx, mut dy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        self.scalar
            .values_and_gradients(p, &mut v, &mut dx, &mut dy);
        let nr = self.rank.components();
        let mut out = vec![0.0; n * nr * nc];
        for c in 0..nr {
            for i in 0..n {
                let row = &mut out[(c * n + i) * nc..(c * n + i + 1) * nc];
                match (self.rank, op) {
                    (_, Value) => row[c] = v[i],
                    (Rank::Scalar, Grad) => {
                        row[0] = dx[i];
                        row[1] = dy[i];
                    }
                    (Rank::Scalar, PerpGrad) => {
                        row[0] = dy[i];
                        row[1] = -dx[i];
                    }
                    (Rank::Vector2, Div) => row[0] = if c == 0 { dx[i] } else { dy[i] },
                    (Rank::Vector2, Curl) => row[0] = if c == 0 { -dy[i] } else { dx[i] },
                    (Rank::Vector2, SymGrad) => {
                        if c == 0 {
                            row[0] = dx[i];
                            row[2] = 0.5 * dy[i];
                        } else {
                            row[1] = dy[i];
                            row[2] = 0.5 * dx[i];
                        }
                    }
                    (Rank::SymTensor, Div) => match c {
                        0 => row[0] = dx[i],
                        1 => row[1] = dy[i],
                        _ => {
                            row[0] = dy[i];
                            row[1] = dx[i];
                        }
                    },
                    _ => unreachable!("checked by output_components"),
                }
            }
        }
        Ok(out)
    }
}

/// Monomials `s^j` on an edge; function `c * (degree + 1) + j` carries `s^j`
/// in component `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeBasis {
    pub edge: usize,
    pub degree: usize,
    pub rank: Rank,
}

impl EdgeBasis {
    pub fn dim(&self) -> usize {
        (self.degree + 1) * self.rank.components()
    }

    /// Scalar values `s^0 .. s^degree`.
    pub fn values(&self, s: f64, out: &mut [f64]) {
        let mut acc = 1.0;
        for o in out.iter_mut().take(self.degree + 1) {
            *o = acc;
            acc *= s;
        }
    }

    pub fn parameter(&self, mesh: &Mesh, p: Point) -> f64 {
        let e = &mesh.edges[self.edge];
        let a = mesh.vertex_point(e.vertices[0]);
        ((p[0] - a[0]) * e.tangent[0] + (p[1] - a[1]) * e.tangent[1]) / e.length
    }

    pub fn mass_matrix(&self, mesh: &Mesh) -> DMatrix<f64> {
        let rule = quad_edge(mesh, self.edge, 2 * self.degree);
        let n = self.degree + 1;
        let mut m = DMatrix::zeros(n, n);
        let mut v = vec![0.0; n];
        for (&s, &w) in rule.params.iter().zip(&rule.rule.weights) {
            self.values(s, &mut v);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        m
    }
}

/// L2 projection of `f` onto `P_j(K)`, as coefficients in the scaled
/// monomial basis. `extra_degree` is the quadrature degree budget for `f`.
pub fn project_element(
    mesh: &Mesh,
    element: usize,
    j: usize,
    f: impl Fn(Point) -> f64,
    extra_degree: usize,
) -> Result<Vec<f64>, BasisError> {
    let basis = LocalBasis::monomial(mesh, element, j);
    let mass = basis.mass_matrix(mesh, element)?;
    let rule = quad_element(mesh, element, j + extra_degree.max(j))?;
    let n = basis.dim();
    let mut load = DVector::zeros(n);
    let mut v = vec![0.0; n];
    for (&p, &w) in rule.points.iter().zip(&rule.weights) {
        basis.values(p, &mut v);
        let fp = f(p);
        for i in 0..n {
            load[i] += w * fp * v[i];
        }
    }
    let chol = mass.cholesky().ok_or(BasisError::SingularMass(element))?;
    Ok(chol.solve(&load).iter().copied().collect())
}

/// L2 projection of `f` onto `P_j(F)` in the `s^i` basis.
pub fn project_edge(
    mesh: &Mesh,
    edge: usize,
    j: usize,
    f: impl Fn(Point) -> f64,
    extra_degree: usize,
) -> Result<Vec<f64>, BasisError> {
    let basis = EdgeBasis {
        edge,
        degree: j,
        rank: Rank::Scalar,
    };
    let mass = basis.mass_matrix(mesh);
    let rule = quad_edge(mesh, edge, j + extra_degree.max(j));
    let n = j + 1;
    let mut load = DVector::zeros(n);
    let mut v = vec![0.0; n];
    for ((&s, &p), &w) in rule
        .params
        .iter()
        .zip(&rule.rule.points)
        .zip(&rule.rule.weights)
    {
        basis.values(s, &mut v);
        let fp = f(p);
        for i in 0..n {
            load[i] += w * fp * v[i];
        }
    }
    let chol = mass.cholesky().ok_or(BasisError::SingularEdgeMass(edge))?;
    Ok(chol.solve(&load).iter().copied().collect())
}

/// Everything the assembly needs to know about the discrete spaces on a mesh.
#[derive(Debug, Clone)]
pub struct Discretization<'m> {
    pub mesh: &'m Mesh,
    pub spaces: SpaceConfig,
    pub dofs: DofMap,
    /// Degree-`k` scalar basis per element; degree `k - 1` uses a prefix.
    pub bases: Vec<LocalBasis>,
    /// Element and edge quadrature degree used by the assembly.
    pub quad_degree: usize,
}

impl<'m> Discretization<'m> {
    pub fn new(mesh: &'m Mesh, spaces: SpaceConfig) -> Result<Self, BasisError> {
        Self::build(mesh, spaces, false)
    }

    /// Same spaces, with bases orthonormalized element by element.
    pub fn orthonormalized(mesh: &'m Mesh, spaces: SpaceConfig) -> Result<Self, BasisError> {
        Self::build(mesh, spaces, true)
    }

    fn build(mesh: &'m Mesh, spaces: SpaceConfig, orthonormal: bool) -> Result<Self, BasisError> {
        let k = spaces.k();
        let mut bases = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            if !mesh.is_convex(e) {
                return Err(QuadratureError::NonConvex(e).into());
            }
            bases.push(if orthonormal {
                LocalBasis::orthonormal(mesh, e, k)?
            } else {
                LocalBasis::monomial(mesh, e, k)
            });
        }
        Ok(Discretization {
            mesh,
            spaces,
            dofs: DofMap::new(mesh, spaces),
            bases,
            quad_degree: 2 * k + 2,
        })
    }

    pub fn k(&self) -> usize {
        self.spaces.k()
    }

    pub fn ell(&self) -> usize {
        self.spaces.ell()
    }
}
