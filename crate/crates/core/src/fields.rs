//! Discrete fields as coefficient arrays over the element and edge bases.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::basis::{monomial_count, Discretization, EdgeBasis, Rank};
use crate::material::{MaterialParams, Stabilization};
use crate::mesh::Point;
use crate::quadrature::quad_edge;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("field shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((Rank, usize, usize), (Rank, usize, usize)),
}

/// Piecewise polynomial field; element `e`, component `c`, function `i`
/// sits at `(e * ncomp + c) * n_basis + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub rank: Rank,
    pub degree: usize,
    pub n_basis: usize,
    pub coeffs: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(rank: Rank, degree: usize, n_elements: usize) -> DiscreteField {
        let n_basis = monomial_count(degree);
        DiscreteField {
            rank,
            degree,
            n_basis,
            coeffs: vec![0.0; n_elements * rank.components() * n_basis],
        }
    }

    pub fn ncomp(&self) -> usize {
        self.rank.components()
    }

    fn stride(&self) -> usize {
        self.ncomp() * self.n_basis
    }

    pub fn element(&self, e: usize) -> &[f64] {
        let s = self.stride();
        &self.coeffs[e * s..(e + 1) * s]
    }

    pub fn element_mut(&mut self, e: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.coeffs[e * s..(e + 1) * s]
    }

    pub fn shape(&self) -> (Rank, usize, usize) {
        (self.rank, self.degree, self.coeffs.len())
    }

    /// Component values at `p` in element `e`; unused entries are zero.
    pub fn eval(&self, disc: &Discretization, e: usize, p: Point) -> [f64; 3] {
        let basis = &disc.bases[e];
        let mut v = vec![0.0; basis.dim()];
        basis.values(p, &mut v);
        let c = self.element(e);
        let mut out = [0.0; 3];
        for (comp, o) in out.iter_mut().enumerate().take(self.ncomp()) {
            *o = (0..self.n_basis)
                .map(|i| c[comp * self.n_basis + i] * v[i])
                .sum();
        }
        out
    }

    /// Per component `(∂x, ∂y)` at `p` in element `e`.
    pub fn eval_gradient(&self, disc: &Discretization, e: usize, p: Point) -> [[f64; 2]; 3] {
        let basis = &disc.bases[e];
        let n = basis.dim();
        let (mut v, mut dx, mut dy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        basis.values_and_gradients(p, &mut v, &mut dx, &mut dy);
        let c = self.element(e);
        let mut out = [[0.0; 2]; 3];
        for (comp, o) in out.iter_mut().enumerate().take(self.ncomp()) {
            for i in 0..self.n_basis {
                let a = c[comp * self.n_basis + i];
                o[0] += a * dx[i];
                o[1] += a * dy[i];
            }
        }
        out
    }

    /// `self + s * other`, coefficient-wise.
    pub fn axpy(&self, s: f64, other: &DiscreteField) -> Result<DiscreteField, FieldError> {
        if self.shape() != other.shape() {
            return Err(FieldError::ShapeMismatch(self.shape(), other.shape()));
        }
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
        Ok(out)
    }
}

/// Piecewise polynomial field on edges in the `s^j` basis; edge `f`,
/// component `c`, coefficient `j` sits at `(f * ncomp + c) * (degree + 1) + j`.
/// Entries on edges without unknowns stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceField {
    pub ncomp: usize,
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl TraceField {
    pub fn zeros(ncomp: usize, degree: usize, n_edges: usize) -> TraceField {
        TraceField {
            ncomp,
            degree,
            coeffs: vec![0.0; n_edges * ncomp * (degree + 1)],
        }
    }

    pub fn edge(&self, f: usize) -> &[f64] {
        let s = self.ncomp * (self.degree + 1);
        &self.coeffs[f * s..(f + 1) * s]
    }

    pub fn edge_mut(&mut self, f: usize) -> &mut [f64] {
        let s = self.ncomp * (self.degree + 1);
        &mut self.coeffs[f * s..(f + 1) * s]
    }
}

/// All discrete unknowns of one plate solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFields {
    pub l: DiscreteField,
    pub r: DiscreteField,
    pub r_hat: TraceField,
    pub sigma: DiscreteField,
    pub rr: DiscreteField,
    pub theta: DiscreteField,
    pub theta_hat: TraceField,
    pub p: DiscreteField,
    pub p_hat: TraceField,
    pub g: DiscreteField,
    pub omega: DiscreteField,
    pub omega_hat: TraceField,
    pub gamma: DiscreteField,
}

/// `γ_h = L_h + λ t⁻² R_h`.
pub fn recover_gamma(
    l: &DiscreteField,
    r: &DiscreteField,
    params: &MaterialParams,
) -> Result<DiscreteField, FieldError> {
    let t = params.thickness();
    l.axpy(params.lambda() / (t * t), r)
}

/// Squared `𝔟_h` energy of a Step-Two field tuple: volume terms
/// `‖σ‖² + t⁻²‖R‖² + ‖∇θ‖² + t²‖∇⊥p‖²` and the two edge penalties.
#[allow(clippy::too_many_arguments)]
pub fn b_norm_squared(
    disc: &Discretization,
    params: &MaterialParams,
    sigma: &DiscreteField,
    rr: &DiscreteField,
    theta: &DiscreteField,
    theta_hat: &TraceField,
    p: &DiscreteField,
    p_hat: &TraceField,
) -> f64 {
    let mesh = disc.mesh;
    let t = params.thickness();
    let k = disc.k();
    let ell = disc.ell();
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        let rule = crate::quadrature::quad_element(mesh, e, 2 * k + 2).expect("convex mesh");
        for (&pt, &w) in rule.points.iter().zip(&rule.weights) {
            let s = sigma.eval(disc, e, pt);
            let rv = rr.eval(disc, e, pt);
            let gt = theta.eval_gradient(disc, e, pt);
            let gp = p.eval_gradient(disc, e, pt)[0];
            total += w
                * (s[0] * s[0]
                    + s[1] * s[1]
                    + 2.0 * s[2] * s[2]
                    + (rv[0] * rv[0] + rv[1] * rv[1]) / (t * t)
                    + gt[0][0] * gt[0][0]
                    + gt[0][1] * gt[0][1]
                    + gt[1][0] * gt[1][0]
                    + gt[1][1] * gt[1][1]
                    + t * t * (gp[0] * gp[0] + gp[1] * gp[1]));
        }
        let stab = Stabilization::new(mesh.elements[e].diameter, t);
        for le in &mesh.elements[e].edges {
            let f = le.edge;
            let jump_theta = edge_projection_jump(disc, e, f, ell, theta, theta_hat);
            let jump_p = edge_projection_jump(disc, e, f, k - 1, p, p_hat);
            total += stab.alpha2 * jump_theta + stab.alpha3 * jump_p;
        }
    }
    total
}

/// `‖Π_j u - û‖²_F` for the element-side trace of `u` on edge `f`.
fn edge_projection_jump(
    disc: &Discretization,
    e: usize,
    f: usize,
    j: usize,
    u: &DiscreteField,
    uh: &TraceField,
) -> f64 {
    let mesh = disc.mesh;
    let rule = quad_edge(mesh, f, 2 * disc.k() + 2);
    let eb = EdgeBasis {
        edge: f,
        degree: j,
        rank: Rank::Scalar,
    };
    let mut mass = nalgebra::DMatrix::<f64>::zeros(j + 1, j + 1);
    let mut sv = vec![0.0; j + 1];
    let mut total = 0.0;
    for c in 0..u.ncomp() {
        let mut load = nalgebra::DVector::<f64>::zeros(j + 1);
        mass.fill(0.0);
        for ((&s, &pt), &w) in rule
            .params
            .iter()
            .zip(&rule.rule.points)
            .zip(&rule.rule.weights)
        {
            eb.values(s, &mut sv);
            let val = u.eval(disc, e, pt)[c];
            for a in 0..=j {
                load[a] += w * val * sv[a];
                for b in 0..=j {
                    mass[(a, b)] += w * sv[a] * sv[b];
                }
            }
        }
        let chol = mass.clone().cholesky().expect("edge mass is SPD");
        let proj = chol.solve(&load);
        let hat = &uh.edge(f)[c * (uh.degree + 1)..(c + 1) * (uh.degree + 1)];
        let diff: nalgebra::DVector<f64> = nalgebra::DVector::from_iterator(
            j + 1,
            (0..=j).map(|a| proj[a] - hat.get(a).copied().unwrap_or(0.0)),
        );
        total += (diff.transpose() * &mass * &diff)[(0, 0)];
    }
    total
}
