//! Element-by-element assembly of the three block systems.
//!
//! Each element produces a dense local matrix over its interior unknowns
//! and the trace unknowns of all its edges. Rows are written in the natural
//! test-function form first and then multiplied by fixed signs per test
//! space, which makes every local matrix symmetric:
//!
//! * Steps One and Three: `(L, r, r̂) -> (+, -, -)`
//! * Step Two: `(σ, R, θ, θ̂, p, p̂) -> (+, -, -, -, +, +)`
//!
//! The global system is `[[A11, A12], [A12ᵀ, -A22]] (x1, x2) = (b1, b2)`
//! with `A11` block diagonal over elements.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::basis::{BasisError, Discretization};
use crate::fields::DiscreteField;
use crate::material::{MaterialParams, Stabilization, SymTensor};
use crate::mesh::Point;
use crate::par::map_indexed;
use crate::quadrature::{quad_edge, quad_element};
use crate::sparse::{CsrMatrix, Triplets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("input field {name} has shape {got:?}, expected {expected:?}")]
    FieldMismatch {
        name: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
}

impl From<crate::quadrature::QuadratureError> for AssemblyError {
    fn from(e: crate::quadrature::QuadratureError) -> Self {
        AssemblyError::Basis(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AssemblyOptions {
    /// Solve for `R / t` instead of `R` in Step Two.
    pub rescale_r: bool,
    /// Quadrature degree for load integrals; `None` means `2k + 10`.
    pub load_degree: Option<usize>,
}

impl AssemblyOptions {
    pub fn load_degree(&self, k: usize) -> usize {
        self.load_degree.unwrap_or(2 * k + 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    One,
    Two,
    Three,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementBlock {
    pub element: usize,
    pub a11: DMatrix<f64>,
    /// Interior rows, retained trace columns.
    pub a12: DMatrix<f64>,
    /// Trace rows, interior columns, assembled independently of `a12`.
    pub a21: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// Global trace index of every column of `a12`.
    pub trace_dofs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub stage: Stage,
    pub blocks: Vec<ElementBlock>,
    pub a22: CsrMatrix,
    pub b2: Vec<f64>,
    /// Known null vector of the condensed trace matrix.
    pub kernel_hint: Option<Vec<f64>>,
    /// Interior part matching `kernel_hint`, per element.
    pub interior_kernel: Option<Vec<Vec<f64>>>,
    /// One point per trace unknown (its edge midpoint), for orderings.
    pub trace_coords: Vec<Point>,
    /// Number of leading trace unknowns in the first saddle block
    /// (`θ̂` in Step Two); equals `n_trace` for the definite stages.
    pub n_first: usize,
    /// Multiplier applied to `R` unknowns (1 or `t`).
    pub r_scale: f64,
}

impl BlockSystem {
    pub fn n_trace(&self) -> usize {
        self.b2.len()
    }

    pub fn n_interior(&self) -> usize {
        self.blocks.iter().map(|b| b.b1.len()).sum()
    }

    /// Offsets of each element's interior block in the stacked interior vector.
    pub fn interior_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len() + 1);
        off.push(0);
        for b in &self.blocks {
            off.push(off.last().unwrap() + b.b1.len());
        }
        off
    }

    /// Dense monolithic matrix and right-hand side, interior unknowns first.
    pub fn to_dense(&self) -> (DMatrix<f64>, DVector<f64>) {
        let ni = self.n_interior();
        let nt = self.n_trace();
        let mut k = DMatrix::zeros(ni + nt, ni + nt);
        let mut b = DVector::zeros(ni + nt);
        let off = self.interior_offsets();
        for (blk, &o) in self.blocks.iter().zip(&off) {
            let n = blk.b1.len();
            k.view_mut((o, o), (n, n)).copy_from(&blk.a11);
            b.rows_mut(o, n).copy_from(&blk.b1);
            for (c, &g) in blk.trace_dofs.iter().enumerate() {
                for r in 0..n {
                    k[(o + r, ni + g)] += blk.a12[(r, c)];
                    k[(ni + g, o + r)] += blk.a21[(c, r)];
                }
            }
        }
        for i in 0..nt {
            for (j, v) in self.a22.row(i) {
                k[(ni + i, ni + j)] -= v;
            }
            b[ni + i] = self.b2[i];
        }
        (k, b)
    }

    /// `‖K x - b‖` and `‖b‖` for a stacked interior vector `x1` and traces `x2`.
    pub fn residual_norms(&self, x1: &[f64], x2: &[f64]) -> (f64, f64) {
        let off = self.interior_offsets();
        let mut r2: Vec<f64> = self.b2.iter().map(|v| -v).collect();
        let mut a22x = vec![0.0; x2.len()];
        self.a22.matvec(x2, &mut a22x);
        for (r, v) in r2.iter_mut().zip(&a22x) {
            *r -= v;
        }
        let mut res = 0.0;
        let mut bn: f64 = self.b2.iter().map(|v| v * v).sum();
        for (blk, &o) in self.blocks.iter().zip(&off) {
            let n = blk.b1.len();
            let xl = DVector::from_column_slice(&x1[o..o + n]);
            let xt =
                DVector::from_iterator(blk.trace_dofs.len(), blk.trace_dofs.iter().map(|&g| x2[g]));
            let r1 = &blk.a11 * &xl + &blk.a12 * &xt - &blk.b1;
            res += r1.norm_squared();
            bn += blk.b1.norm_squared();
            let t = &blk.a21 * &xl;
            for (c, &g) in blk.trace_dofs.iter().enumerate() {
                r2[g] += t[c];
            }
        }
        res += r2.iter().map(|v| v * v).sum::<f64>();
        (libm::sqrt(res), libm::sqrt(bn))
    }
}

struct VolumeTab {
    w: Vec<f64>,
    pts: Vec<Point>,
    v: Vec<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
    n: usize,
}

fn tabulate_volume(
    disc: &Discretization,
    e: usize,
    degree: usize,
) -> Result<VolumeTab, AssemblyError> {
    let rule = quad_element(disc.mesh, e, degree)?;
    let basis = &disc.bases[e];
    let n = basis.dim();
    let nq = rule.len();
    let mut tab = VolumeTab {
        w: rule.weights.clone(),
        pts: rule.points.clone(),
        v: vec![0.0; nq * n],
        dx: vec![0.0; nq * n],
        dy: vec![0.0; nq * n],
        n,
    };
    for (q, &p) in rule.points.iter().enumerate() {
        let r = q * n..(q + 1) * n;
        basis.values_and_gradients(
            p,
            &mut tab.v[r.clone()],
            &mut tab.dx[r.clone()],
            &mut tab.dy[r],
        );
    }
    Ok(tab)
}

struct EdgeTab {
    edge: usize,
    w: Vec<f64>,
    /// `s^j`, `j <= ds`, per point.
    sv: Vec<f64>,
    ds: usize,
    /// Interior basis values per point.
    v: Vec<f64>,
    n_fn: usize,
    normal: Point,
    tangent: Point,
}

fn tabulate_edges(disc: &Discretization, e: usize, degree: usize, ds: usize) -> Vec<EdgeTab> {
    let mesh = disc.mesh;
    let basis = &disc.bases[e];
    let n_fn = basis.dim();
    mesh.elements[e]
        .edges
        .iter()
        .map(|le| {
            let rule = quad_edge(mesh, le.edge, degree);
            let nq = rule.rule.len();
            let mut sv = vec![0.0; nq * (ds + 1)];
            let mut v = vec![0.0; nq * n_fn];
            for q in 0..nq {
                let s = rule.params[q];
                let mut acc = 1.0;
                for j in 0..=ds {
                    sv[q * (ds + 1) + j] = acc;
                    acc *= s;
                }
                basis.values(rule.rule.points[q], &mut v[q * n_fn..(q + 1) * n_fn]);
            }
            let en = mesh.edges[le.edge].normal;
            let normal = [le.sign * en[0], le.sign * en[1]];
            EdgeTab {
                edge: le.edge,
                w: rule.rule.weights,
                sv,
                ds,
                v,
                n_fn,
                normal,
                tangent: [-normal[1], normal[0]],
            }
        })
        .collect()
}

impl EdgeTab {
    fn s(&self, q: usize, j: usize) -> f64 {
        self.sv[q * (self.ds + 1) + j]
    }

    fn val(&self, q: usize, i: usize) -> f64 {
        self.v[q * self.n_fn + i]
    }

    /// Edge mass `M` of `P_j(F)`, moments `B[a][i] = ⟨s^a, φ_i⟩` for the
    /// first `nf` interior functions, and `P = Bᵀ M⁻¹ B`, the Gram matrix
    /// of their edge projections.
    fn projection(&self, j: usize, nf: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let mut m = DMatrix::zeros(j + 1, j + 1);
        let mut b = DMatrix::zeros(j + 1, nf);
        for q in 0..self.w.len() {
            let w = self.w[q];
            for a in 0..=j {
                let sa = self.s(q, a);
                for c in 0..=j {
                    m[(a, c)] += w * sa * self.s(q, c);
                }
                for i in 0..nf {
                    b[(a, i)] += w * sa * self.val(q, i);
                }
            }
        }
        let minv_b = m.clone().cholesky().expect("edge mass is SPD").solve(&b);
        let p = b.transpose() * minv_b;
        (m, b, p)
    }
}

/// Splits a signed local matrix into the element block and the trace
/// contributions; `trace_map[l]` is the global index of local trace `l`.
fn split_local(
    element: usize,
    km: DMatrix<f64>,
    f: DVector<f64>,
    ni: usize,
    trace_map: &[Option<usize>],
) -> (ElementBlock, Vec<(usize, usize, f64)>, Vec<(usize, f64)>) {
    let kept: Vec<(usize, usize)> = trace_map
        .iter()
        .enumerate()
        .filter_map(|(l, g)| g.map(|g| (ni + l, g)))
        .collect();
    let nk = kept.len();
    let a11 = km.view((0, 0), (ni, ni)).into_owned();
    let mut a12 = DMatrix::zeros(ni, nk);
    let mut a21 = DMatrix::zeros(nk, ni);
    for (c, &(l, _)) in kept.iter().enumerate() {
        for r in 0..ni {
            a12[(r, c)] = km[(r, l)];
            a21[(c, r)] = km[(l, r)];
        }
    }
    let mut a22 = Vec::with_capacity(nk * nk);
    let mut b2 = Vec::with_capacity(nk);
    for &(l, g) in &kept {
        for &(m, h) in &kept {
            a22.push((g, h, -km[(l, m)]));
        }
        b2.push((g, f[l]));
    }
    let block = ElementBlock {
        element,
        a11,
        a12,
        a21,
        b1: f.rows(0, ni).into_owned(),
        trace_dofs: kept.iter().map(|&(_, g)| g).collect(),
    };
    (block, a22, b2)
}

type LocalOut = (ElementBlock, Vec<(usize, usize, f64)>, Vec<(usize, f64)>);

fn gather(
    stage: Stage,
    locals: Vec<Result<LocalOut, AssemblyError>>,
    n_trace: usize,
    trace_coords: Vec<Point>,
    n_first: usize,
    r_scale: f64,
) -> Result<BlockSystem, AssemblyError> {
    let mut trip = Triplets::new(n_trace, n_trace);
    let mut b2 = vec![0.0; n_trace];
    let mut blocks = Vec::with_capacity(locals.len());
    for l in locals {
        let (blk, a22, rhs) = l?;
        for (i, j, v) in a22 {
            trip.push(i, j, v);
        }
        for (i, v) in rhs {
            b2[i] += v;
        }
        blocks.push(blk);
    }
    Ok(BlockSystem {
        stage,
        blocks,
        a22: trip.to_csr(),
        b2,
        kernel_hint: None,
        interior_kernel: None,
        trace_coords,
        n_first,
        r_scale,
    })
}

/// Local Poisson-type system shared by Steps One and Three: unknowns
/// `(L, r, r̂)`, right-hand side `(vol, s)` on the `r` rows and `⟨edge, ŝ⟩`
/// on the trace rows.
fn local_poisson(
    disc: &Discretization,
    e: usize,
    load_degree: usize,
    vol: &dyn Fn(Point) -> f64,
    edge_load: Option<&dyn Fn(Point, Point) -> f64>,
) -> Result<LocalOut, AssemblyError> {
    let mesh = disc.mesh;
    let sp = disc.spaces;
    let (nb, na, k) = (sp.nb(), sp.na(), sp.k());
    let ni = 2 * nb + na;
    let ne = mesh.elements[e].edges.len();
    let nt = ne * k;
    let n = ni + nt;
    let alpha = Stabilization::new(mesh.elements[e].diameter, 1.0).alpha1;
    let mut km = DMatrix::<f64>::zeros(n, n);
    let mut f = DVector::<f64>::zeros(n);
    let ro = 2 * nb;

    let vt = tabulate_volume(disc, e, disc.quad_degree)?;
    for q in 0..vt.w.len() {
        let w = vt.w[q];
        let o = q * vt.n;
        for i in 0..nb {
            let vi = vt.v[o + i];
            for j in 0..nb {
                let m = w * vi * vt.v[o + j];
                km[(i, j)] += m;
                km[(nb + i, nb + j)] += m;
            }
            for a in 0..na {
                let va = vt.v[o + a];
                // (r, ∇·M) and -(∇·L, μ)
                km[(i, ro + a)] += w * va * vt.dx[o + i];
                km[(nb + i, ro + a)] += w * va * vt.dy[o + i];
                km[(ro + a, i)] -= w * vt.dx[o + i] * va;
                km[(ro + a, nb + i)] -= w * vt.dy[o + i] * va;
            }
        }
    }

    let lt = tabulate_volume(disc, e, load_degree)?;
    for q in 0..lt.w.len() {
        let g = lt.w[q] * vol(lt.pts[q]);
        for a in 0..na {
            f[ro + a] += g * lt.v[q * lt.n + a];
        }
    }

    let edges = tabulate_edges(disc, e, disc.quad_degree, k - 1);
    for (le, et) in edges.iter().enumerate() {
        let tr = ni + le * k;
        for q in 0..et.w.len() {
            let w = et.w[q];
            for j in 0..k {
                let s = et.s(q, j);
                for i in 0..nb {
                    let val = w * s * et.val(q, i);
                    km[(i, tr + j)] -= val * et.normal[0];
                    km[(nb + i, tr + j)] -= val * et.normal[1];
                    km[(tr + j, i)] += val * et.normal[0];
                    km[(tr + j, nb + i)] += val * et.normal[1];
                }
            }
        }
        let (m, b, p) = et.projection(k - 1, na);
        for a in 0..na {
            for c in 0..na {
                km[(ro + a, ro + c)] += alpha * p[(a, c)];
            }
            for j in 0..k {
                km[(ro + a, tr + j)] -= alpha * b[(j, a)];
                km[(tr + j, ro + a)] -= alpha * b[(j, a)];
            }
        }
        for j in 0..k {
            for l in 0..k {
                km[(tr + j, tr + l)] += alpha * m[(j, l)];
            }
        }
        if let Some(el) = edge_load {
            let elr = quad_edge(mesh, et.edge, load_degree);
            for q in 0..elr.rule.len() {
                let g = elr.rule.weights[q] * el(elr.rule.points[q], et.normal);
                let mut sj = 1.0;
                for j in 0..k {
                    f[tr + j] += g * sj;
                    sj *= elr.params[q];
                }
            }
        }
    }

    for row in ro..n {
        km.row_mut(row).neg_mut();
        f[row] = -f[row];
    }

    let trace_map: Vec<Option<usize>> = mesh.elements[e]
        .edges
        .iter()
        .flat_map(|le| (0..k).map(move |j| disc.dofs.scalar_trace_dof(le.edge, j)))
        .collect();
    Ok(split_local(e, km, f, ni, &trace_map))
}

fn scalar_trace_coords(disc: &Discretization) -> Vec<Point> {
    let mesh = disc.mesh;
    let mut c = vec![[0.0; 2]; disc.dofs.step1_trace()];
    for f in 0..mesh.n_edges() {
        for j in 0..disc.k() {
            if let Some(g) = disc.dofs.scalar_trace_dof(f, j) {
                c[g] = mesh.edge_midpoint(f);
            }
        }
    }
    c
}

/// Step One: the Poisson problem for the irrotational potential `r`.
pub fn assemble_step1(
    disc: &Discretization,
    g: &(dyn Fn(Point) -> f64 + Sync),
    opts: &AssemblyOptions,
) -> Result<BlockSystem, AssemblyError> {
    let ld = opts.load_degree(disc.k());
    let locals = map_indexed(disc.mesh.n_elements(), |e| {
        local_poisson(disc, e, ld, g, None)
    });
    let n = disc.dofs.step1_trace();
    gather(Stage::One, locals, n, scalar_trace_coords(disc), n, 1.0)
}

/// Step Three: the Poisson problem for the deflection, driven by `g` and
/// the Step-Two rotation.
pub fn assemble_step3(
    disc: &Discretization,
    params: &MaterialParams,
    theta: &DiscreteField,
    g: &(dyn Fn(Point) -> f64 + Sync),
    opts: &AssemblyOptions,
) -> Result<BlockSystem, AssemblyError> {
    check_field("theta", theta, 2, disc.k(), disc.mesh.n_elements())?;
    let t = params.thickness();
    let scale = t * t / params.lambda();
    let ld = opts.load_degree(disc.k());
    let locals = map_indexed(disc.mesh.n_elements(), |e| {
        let vol = |p: Point| {
            let gr = theta.eval_gradient(disc, e, p);
            scale * g(p) - (gr[0][0] + gr[1][1])
        };
        let edge = |p: Point, n: Point| {
            let th = theta.eval(disc, e, p);
            th[0] * n[0] + th[1] * n[1]
        };
        local_poisson(disc, e, ld, &vol, Some(&edge))
    });
    let n = disc.dofs.step1_trace();
    gather(Stage::Three, locals, n, scalar_trace_coords(disc), n, 1.0)
}

fn check_field(
    name: &'static str,
    field: &DiscreteField,
    ncomp: usize,
    degree: usize,
    n_elements: usize,
) -> Result<(), AssemblyError> {
    let expected = (
        ncomp,
        crate::basis::monomial_count(degree) * ncomp * n_elements,
    );
    let got = (field.ncomp(), field.coeffs.len());
    if got != expected || field.degree != degree {
        return Err(AssemblyError::FieldMismatch {
            name,
            expected,
            got,
        });
    }
    Ok(())
}

/// Divergence of the symmetric-tensor basis function `E_c m`.
#[inline]
fn tensor_div(c: usize, dx: f64, dy: f64) -> [f64; 2] {
    match c {
        0 => [dx, 0.0],
        1 => [0.0, dy],
        _ => [dy, dx],
    }
}

/// `(E_c m) n`.
#[inline]
fn tensor_normal(c: usize, v: f64, n: Point) -> [f64; 2] {
    match c {
        0 => [v * n[0], 0.0],
        1 => [0.0, v * n[1]],
        _ => [v * n[1], v * n[0]],
    }
}

/// `∇ × (e_c m)`.
#[inline]
fn vector_curl(c: usize, dx: f64, dy: f64) -> f64 {
    if c == 0 {
        -dy
    } else {
        dx
    }
}

fn sym_basis(c: usize) -> SymTensor {
    match c {
        0 => SymTensor::new(1.0, 0.0, 0.0),
        1 => SymTensor::new(0.0, 1.0, 0.0),
        _ => SymTensor::new(0.0, 0.0, 1.0),
    }
}

/// Local layout of the Step-Two unknowns of one element.
#[derive(Debug, Clone, Copy)]
pub struct Step2Layout {
    pub nb: usize,
    pub na: usize,
    pub ne: usize,
    pub k: usize,
    pub ell: usize,
}

impl Step2Layout {
    pub fn sigma(&self, c: usize, i: usize) -> usize {
        c * self.nb + i
    }
    pub fn rr(&self, c: usize, i: usize) -> usize {
        3 * self.nb + c * self.nb + i
    }
    pub fn theta(&self, c: usize, a: usize) -> usize {
        5 * self.nb + c * self.na + a
    }
    pub fn p(&self, a: usize) -> usize {
        5 * self.nb + 2 * self.na + a
    }
    pub fn interior(&self) -> usize {
        5 * self.nb + 3 * self.na
    }
    pub fn theta_hat(&self, le: usize, c: usize, j: usize) -> usize {
        self.interior() + le * 2 * (self.ell + 1) + c * (self.ell + 1) + j
    }
    pub fn p_hat(&self, le: usize, j: usize) -> usize {
        self.interior() + self.ne * 2 * (self.ell + 1) + le * self.k + j
    }
    pub fn total(&self) -> usize {
        self.interior() + self.ne * (2 * (self.ell + 1) + self.k)
    }
}

fn local_step2(
    disc: &Discretization,
    params: &MaterialParams,
    e: usize,
    load: &dyn Fn(Point) -> [f64; 2],
    opts: &AssemblyOptions,
) -> Result<LocalOut, AssemblyError> {
    let mesh = disc.mesh;
    let sp = disc.spaces;
    let lay = Step2Layout {
        nb: sp.nb(),
        na: sp.na(),
        ne: mesh.elements[e].edges.len(),
        k: sp.k(),
        ell: sp.ell(),
    };
    let (nb, na, k, ell) = (lay.nb, lay.na, lay.k, lay.ell);
    let n = lay.total();
    let t = params.thickness();
    let stab = Stabilization::new(mesh.elements[e].diameter, t);
    let lam_t = params.lambda() / (t * t);
    let mut km = DMatrix::<f64>::zeros(n, n);
    let mut f = DVector::<f64>::zeros(n);

    let mut qc = [[0.0; 3]; 3];
    for (c, row) in qc.iter_mut().enumerate() {
        for (d, v) in row.iter_mut().enumerate() {
            *v = params
                .constitutive_inverse_apply(&sym_basis(d))
                .dot(&sym_basis(c));
        }
    }

    let vt = tabulate_volume(disc, e, disc.quad_degree)?;
    for q in 0..vt.w.len() {
        let w = vt.w[q];
        let o = q * vt.n;
        let (v, dx, dy) = (&vt.v[o..o + vt.n], &vt.dx[o..o + vt.n], &vt.dy[o..o + vt.n]);
        for i in 0..nb {
            for j in 0..nb {
                let m = w * v[i] * v[j];
                for c in 0..3 {
                    for d in 0..3 {
                        km[(lay.sigma(c, i), lay.sigma(d, j))] += qc[c][d] * m;
                    }
                }
                for c in 0..2 {
                    km[(lay.rr(c, i), lay.rr(c, j))] += lam_t * m;
                }
            }
            for a in 0..na {
                for c in 0..3 {
                    let dv = tensor_div(c, dx[i], dy[i]);
                    for d in 0..2 {
                        // (θ, ∇·τ) and -(φ, ∇·σ)
                        let val = w * v[a] * dv[d];
                        km[(lay.sigma(c, i), lay.theta(d, a))] += val;
                        km[(lay.theta(d, a), lay.sigma(c, i))] -= val;
                    }
                }
                for c in 0..2 {
                    // (p, ∇×S) and -(q, ∇×R)
                    let val = w * v[a] * vector_curl(c, dx[i], dy[i]);
                    km[(lay.rr(c, i), lay.p(a))] += val;
                    km[(lay.p(a), lay.rr(c, i))] -= val;
                }
            }
        }
        for a in 0..na {
            for b in 0..na {
                for c in 0..2 {
                    // (∇×φ, p) and -(∇×θ, q)
                    let val = w * vector_curl(c, dx[a], dy[a]) * v[b];
                    km[(lay.theta(c, a), lay.p(b))] += val;
                    km[(lay.p(b), lay.theta(c, a))] -= val;
                }
            }
        }
    }

    let lt = tabulate_volume(disc, e, opts.load_degree(k))?;
    for q in 0..lt.w.len() {
        let fv = load(lt.pts[q]);
        for a in 0..na {
            let phi = lt.w[q] * lt.v[q * lt.n + a];
            f[lay.theta(0, a)] += fv[0] * phi;
            f[lay.theta(1, a)] += fv[1] * phi;
        }
    }

    let ds = ell.max(k - 1);
    let edges = tabulate_edges(disc, e, disc.quad_degree, ds);
    for (le, et) in edges.iter().enumerate() {
        let (nv, tv) = (et.normal, et.tangent);
        for q in 0..et.w.len() {
            let w = et.w[q];
            for j in 0..=ell {
                let s = et.s(q, j);
                for i in 0..nb {
                    for c in 0..3 {
                        let tn = tensor_normal(c, et.val(q, i), nv);
                        for d in 0..2 {
                            // -⟨θ̂, τn⟩ and ⟨φ̂, σn⟩
                            let val = w * s * tn[d];
                            km[(lay.sigma(c, i), lay.theta_hat(le, d, j))] -= val;
                            km[(lay.theta_hat(le, d, j), lay.sigma(c, i))] += val;
                        }
                    }
                }
            }
            for j in 0..k {
                let s = et.s(q, j);
                for i in 0..nb {
                    for c in 0..2 {
                        // -⟨p̂, S·t⟩ and ⟨q̂, R·t⟩
                        let val = w * s * et.val(q, i) * tv[c];
                        km[(lay.rr(c, i), lay.p_hat(le, j))] -= val;
                        km[(lay.p_hat(le, j), lay.rr(c, i))] += val;
                    }
                }
                for a in 0..na {
                    for c in 0..2 {
                        // -⟨φ·t, p̂⟩ and ⟨θ·t, q̂⟩
                        let val = w * s * et.val(q, a) * tv[c];
                        km[(lay.theta(c, a), lay.p_hat(le, j))] -= val;
                        km[(lay.p_hat(le, j), lay.theta(c, a))] += val;
                    }
                }
            }
        }

        let (m, b, p) = et.projection(ell, na);
        let a2 = stab.alpha2;
        for c in 0..2 {
            for a in 0..na {
                for bb in 0..na {
                    km[(lay.theta(c, a), lay.theta(c, bb))] += a2 * p[(a, bb)];
                }
                for j in 0..=ell {
                    km[(lay.theta(c, a), lay.theta_hat(le, c, j))] -= a2 * b[(j, a)];
                    km[(lay.theta_hat(le, c, j), lay.theta(c, a))] -= a2 * b[(j, a)];
                }
            }
            for j in 0..=ell {
                for l in 0..=ell {
                    km[(lay.theta_hat(le, c, j), lay.theta_hat(le, c, l))] += a2 * m[(j, l)];
                }
            }
        }

        let (m, b, p) = et.projection(k - 1, na);
        let a3 = stab.alpha3;
        for a in 0..na {
            for bb in 0..na {
                km[(lay.p(a), lay.p(bb))] += a3 * p[(a, bb)];
            }
            for j in 0..k {
                km[(lay.p(a), lay.p_hat(le, j))] -= a3 * b[(j, a)];
                km[(lay.p_hat(le, j), lay.p(a))] -= a3 * b[(j, a)];
            }
        }
        for j in 0..k {
            for l in 0..k {
                km[(lay.p_hat(le, j), lay.p_hat(le, l))] += a3 * m[(j, l)];
            }
        }
    }

    // row signs: σ +, R -, θ -, θ̂ -, p +, p̂ +
    let neg_rows = (lay.rr(0, 0)..lay.p(0)).chain(lay.theta_hat(0, 0, 0)..lay.p_hat(0, 0));
    for row in neg_rows {
        km.row_mut(row).neg_mut();
        f[row] = -f[row];
    }

    if opts.rescale_r {
        for c in 0..2 {
            for i in 0..nb {
                let r = lay.rr(c, i);
                km.row_mut(r).scale_mut(t);
                km.column_mut(r).scale_mut(t);
                f[r] *= t;
            }
        }
    }

    let mut trace_map = vec![None; n - lay.interior()];
    for (le, l) in mesh.elements[e].edges.iter().enumerate() {
        for c in 0..2 {
            for j in 0..=ell {
                trace_map[lay.theta_hat(le, c, j) - lay.interior()] =
                    disc.dofs.theta_hat_dof(l.edge, c, j);
            }
        }
        for j in 0..k {
            trace_map[lay.p_hat(le, j) - lay.interior()] = Some(disc.dofs.p_hat_dof(l.edge, j));
        }
    }
    Ok(split_local(e, km, f, lay.interior(), &trace_map))
}

/// Step Two: the perturbed saddle-point problem for `(σ, R, θ, θ̂, p, p̂)`
/// with load `L_h + f`.
pub fn assemble_step2(
    disc: &Discretization,
    params: &MaterialParams,
    l: &DiscreteField,
    f: &(dyn Fn(Point) -> [f64; 2] + Sync),
    opts: &AssemblyOptions,
) -> Result<BlockSystem, AssemblyError> {
    let k = disc.k();
    check_field("L", l, 2, k - 1, disc.mesh.n_elements())?;
    let locals = map_indexed(disc.mesh.n_elements(), |e| {
        let load = |p: Point| {
            let lv = l.eval(disc, e, p);
            let fv = f(p);
            [lv[0] + fv[0], lv[1] + fv[1]]
        };
        local_step2(disc, params, e, &load, opts)
    });
    let mesh = disc.mesh;
    let dofs = &disc.dofs;
    let nt = dofs.step2_trace();
    let mut coords = vec![[0.0; 2]; nt];
    let mut kernel = vec![0.0; nt];
    for fi in 0..mesh.n_edges() {
        let mid = mesh.edge_midpoint(fi);
        for c in 0..2 {
            for j in 0..=disc.ell() {
                if let Some(g) = dofs.theta_hat_dof(fi, c, j) {
                    coords[g] = mid;
                }
            }
        }
        for j in 0..k {
            coords[dofs.p_hat_dof(fi, j)] = mid;
        }
        kernel[dofs.p_hat_dof(fi, 0)] = 1.0;
    }
    let r_scale = if opts.rescale_r {
        params.thickness()
    } else {
        1.0
    };
    let mut sys = gather(Stage::Two, locals, nt, coords, dofs.n_theta_hat(), r_scale)?;
    sys.kernel_hint = Some(kernel);
    let lay_of = |e: usize| Step2Layout {
        nb: disc.spaces.nb(),
        na: disc.spaces.na(),
        ne: mesh.elements[e].edges.len(),
        k,
        ell: disc.ell(),
    };
    sys.interior_kernel = Some(
        (0..mesh.n_elements())
            .map(|e| {
                let lay = lay_of(e);
                let mut v = vec![0.0; lay.interior()];
                let c = disc.bases[e].constant_coefficients();
                for (a, ca) in c.iter().enumerate() {
                    v[lay.p(a)] = *ca;
                }
                v
            })
            .collect(),
    );
    Ok(sys)
}
