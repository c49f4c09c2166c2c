//! Static condensation onto the trace unknowns and the iterative solvers
//! for the condensed systems.
//!
//! Steps One and Three condense to a symmetric positive definite matrix.
//! Step Two condenses to the symmetric saddle matrix
//! `[[B11, B12], [B12ᵀ, -B22]]` in the `(θ̂, p̂)` ordering; it is solved by
//! conjugate gradients on the `p̂` Schur complement `B22 + B12ᵀ B11⁻¹ B12`,
//! whose only null vector is the constant `p̂`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use thiserror::Error;

use crate::assembly::BlockSystem;
use crate::mesh::Point;
use crate::par::map_indexed;
use crate::sparse::{CsrMatrix, LdlFactor, SparseError, Triplets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("interior block of element {0} is singular")]
    SingularBlock(usize),
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("inner solve failed: {0}")]
    Inner(&'static str),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
    /// Exact factorization of a sparse approximation of the iteration matrix
    /// (the matrix itself for the definite stages).
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSolve {
    /// Sparse `LDLᵀ` of `B11`, computed once per solve.
    Direct,
    /// Jacobi-preconditioned CG to the given relative tolerance.
    Cg { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
    pub deflate_kernel: bool,
    pub inner: InnerSolve,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 10_000,
            preconditioner: Preconditioner::Jacobi,
            deflate_kernel: true,
            inner: InnerSolve::Direct,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0) {
            return Err(SolverError::Tolerance(self.tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    /// Whether a kernel vector was projected out.
    pub deflated: bool,
    /// Relative residual after every iteration (entry 0 is the start).
    pub residual_history: Vec<f64>,
    /// Quadratic energy `½ xᵀAx - bᵀx` after every iteration.
    pub energy_history: Vec<f64>,
    /// Seconds spent in the solve; `None` without `std`.
    pub wall_time: Option<f64>,
}

/// Trace system after element-wise elimination of the interior unknowns.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub s: CsrMatrix,
    pub rhs: Vec<f64>,
    pub kernel: Option<Vec<f64>>,
    pub n_first: usize,
    pub coords: Vec<Point>,
    factors: Vec<LU<f64, Dyn, Dyn>>,
}

/// Eliminates the interior unknowns element by element:
/// `S = A22 + A21 A11⁻¹ A12`, `rhs = A21 A11⁻¹ b1 - b2`.
pub fn condense(sys: &BlockSystem) -> Result<CondensedSystem, SolverError> {
    let locals = map_indexed(sys.blocks.len(), |e| {
        let blk = &sys.blocks[e];
        let lu = blk.a11.clone().lu();
        let x12 = lu
            .solve(&blk.a12)
            .ok_or(SolverError::SingularBlock(blk.element))?;
        let xb = lu
            .solve(&blk.b1)
            .ok_or(SolverError::SingularBlock(blk.element))?;
        if !x12.iter().chain(xb.iter()).all(|v| v.is_finite()) {
            return Err(SolverError::SingularBlock(blk.element));
        }
        let sl = &blk.a21 * x12;
        let sl = (&sl + sl.transpose()) * 0.5;
        let rl = &blk.a21 * xb;
        Ok((lu, sl, rl))
    });
    let n = sys.n_trace();
    let mut trip = Triplets::new(n, n);
    for i in 0..n {
        for (j, v) in sys.a22.row(i) {
            trip.push(i, j, v);
        }
    }
    let mut rhs: Vec<f64> = sys.b2.iter().map(|v| -v).collect();
    let mut factors = Vec::with_capacity(locals.len());
    for (l, blk) in locals.into_iter().zip(&sys.blocks) {
        let (lu, sl, rl) = l?;
        for (a, &ga) in blk.trace_dofs.iter().enumerate() {
            rhs[ga] += rl[a];
            for (b, &gb) in blk.trace_dofs.iter().enumerate() {
                trip.push(ga, gb, sl[(a, b)]);
            }
        }
        factors.push(lu);
    }
    Ok(CondensedSystem {
        s: trip.to_csr(),
        rhs,
        kernel: sys.kernel_hint.clone(),
        n_first: sys.n_first,
        coords: sys.trace_coords.clone(),
        factors,
    })
}

/// `x1 = A11⁻¹ (b1 - A12 x2)`, stacked over elements.
pub fn back_substitute(sys: &BlockSystem, cs: &CondensedSystem, x2: &[f64]) -> Vec<f64> {
    let parts = map_indexed(sys.blocks.len(), |e| {
        let blk = &sys.blocks[e];
        let xt =
            DVector::from_iterator(blk.trace_dofs.len(), blk.trace_dofs.iter().map(|&g| x2[g]));
        let r = &blk.b1 - &blk.a12 * xt;
        cs.factors[e]
            .solve(&r)
            .expect("factor checked during condensation")
    });
    parts
        .into_iter()
        .flat_map(|v| v.iter().copied().collect::<Vec<_>>())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn project_out(v: &mut [f64], z: Option<&[f64]>) {
    if let Some(z) = z {
        let c = dot(v, z);
        for (vi, zi) in v.iter_mut().zip(z) {
            *vi -= c * zi;
        }
    }
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// `kernel`, if given, must have unit length; the right-hand side, every
/// residual and every preconditioned residual are kept orthogonal to it.
pub fn pcg(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    precond: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    kernel: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, SolveReport) {
    let n = b.len();
    let mut rhs = b.to_vec();
    project_out(&mut rhs, kernel);
    let bnorm = norm(&rhs);
    let mut x = vec![0.0; n];
    let mut report = SolveReport {
        deflated: kernel.is_some(),
        residual_history: vec![if bnorm > 0.0 { 1.0 } else { 0.0 }],
        energy_history: vec![0.0],
        ..SolveReport::default()
    };
    if bnorm == 0.0 {
        report.converged = true;
        return (x, report);
    }
    let mut r = rhs.clone();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    project_out(&mut z, kernel);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        project_out(&mut ap, kernel);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            report.iterations = it - 1;
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(&r) / bnorm;
        report.iterations = it;
        report.residual_history.push(rel);
        report
            .energy_history
            .push(-0.5 * dot(&rhs, &x) - 0.5 * dot(&x, &r));
        if rel <= tol {
            report.converged = true;
            break;
        }
        precond(&r, &mut z);
        project_out(&mut z, kernel);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    report.relative_residual = rel;
    (x, report)
}

#[cfg(feature = "std")]
fn timer() -> std::time::Instant {
    std::time::Instant::now()
}

#[cfg(feature = "std")]
fn elapsed(t: std::time::Instant) -> Option<f64> {
    Some(t.elapsed().as_secs_f64())
}

#[cfg(not(feature = "std"))]
fn timer() {}

#[cfg(not(feature = "std"))]
fn elapsed(_: ()) -> Option<f64> {
    None
}

fn finish(
    x: Vec<f64>,
    mut report: SolveReport,
    start_time: Option<f64>,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    report.wall_time = start_time;
    if report.converged {
        Ok((x, report))
    } else {
        Err(SolverError::MaxIterations {
            iterations: report.iterations,
            residual: report.relative_residual,
        })
    }
}

/// Unit kernel vector if `S z ≈ 0`, otherwise `None`.
fn checked_kernel(s: &CsrMatrix, z: &[f64]) -> Option<Vec<f64>> {
    let nz = norm(z);
    if nz == 0.0 {
        return None;
    }
    let zn: Vec<f64> = z.iter().map(|v| v / nz).collect();
    let mut sz = vec![0.0; z.len()];
    s.matvec(&zn, &mut sz);
    let defect = sz.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (defect <= 1e-8 * s.max_abs()).then_some(zn)
}

/// CG on the definite condensed system of Step One or Three.
pub fn solve_spd(
    cs: &CondensedSystem,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    cfg.validate()?;
    let t0 = timer();
    let s = &cs.s;
    let kernel = if cfg.deflate_kernel {
        cs.kernel.as_deref().and_then(|z| checked_kernel(s, z))
    } else {
        None
    };
    let mut apply = |x: &[f64], y: &mut [f64]| s.matvec(x, y);
    let (x, report) = match cfg.preconditioner {
        Preconditioner::None => pcg(
            &mut apply,
            &mut |r, z| z.copy_from_slice(r),
            &cs.rhs,
            kernel.as_deref(),
            cfg.tol,
            cfg.max_iter,
        ),
        Preconditioner::Jacobi => {
            let d = s.diagonal();
            let mut pre = |r: &[f64], z: &mut [f64]| jacobi(&d, r, z);
            pcg(
                &mut apply,
                &mut pre,
                &cs.rhs,
                kernel.as_deref(),
                cfg.tol,
                cfg.max_iter,
            )
        }
        Preconditioner::Direct => {
            let f = LdlFactor::with_coords(s, &cs.coords)?;
            let mut pre = |r: &[f64], z: &mut [f64]| {
                z.copy_from_slice(r);
                f.solve_in_place(z);
            };
            pcg(
                &mut apply,
                &mut pre,
                &cs.rhs,
                kernel.as_deref(),
                cfg.tol,
                cfg.max_iter,
            )
        }
    };
    finish(x, report, elapsed(t0))
}

fn jacobi(d: &[f64], r: &[f64], z: &mut [f64]) {
    for i in 0..r.len() {
        z[i] = if d[i] != 0.0 { r[i] / d[i] } else { r[i] };
    }
}

/// The blocks of the Step-Two condensed system.
pub struct SaddleBlocks {
    pub b11: CsrMatrix,
    pub b12: CsrMatrix,
    pub b22: CsrMatrix,
}

pub fn saddle_blocks(cs: &CondensedSystem) -> SaddleBlocks {
    let n = cs.s.nrows;
    let n1 = cs.n_first;
    let mut b22 = cs.s.block(n1, n, n1, n);
    b22.values.iter_mut().for_each(|v| *v = -*v);
    SaddleBlocks {
        b11: cs.s.block(0, n1, 0, n1),
        b12: cs.s.block(0, n1, n1, n),
        b22,
    }
}

/// Diagonal of `B12ᵀ diag(B11)⁻¹ B12`.
fn coupling_diagonal(blocks: &SaddleBlocks) -> Vec<f64> {
    let d = blocks.b11.diagonal();
    let mut out = vec![0.0; blocks.b22.nrows];
    for (i, &di) in d.iter().enumerate() {
        for (j, v) in blocks.b12.row(i) {
            out[j] += v * v / di;
        }
    }
    out
}

/// `B22 + diag(B12ᵀ diag(B11)⁻¹ B12)`: keeps the full `p̂` block, which
/// dominates for thick plates, and lumps the coupling term, which behaves
/// like a mass matrix for thin ones.
pub fn approximate_schur(blocks: &SaddleBlocks) -> CsrMatrix {
    let dc = coupling_diagonal(blocks);
    let m = blocks.b22.nrows;
    let mut t = Triplets::new(m, m);
    for i in 0..m {
        for (j, v) in blocks.b22.row(i) {
            t.push(i, j, v);
        }
        t.push(i, i, dc[i]);
    }
    t.to_csr()
}

/// Solves the Step-Two condensed system; returns `(θ̂, p̂)` stacked.
/// The report counts outer Schur-complement iterations only.
pub fn solve_saddle_trace(
    cs: &CondensedSystem,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    cfg.validate()?;
    let t0 = timer();
    let n1 = cs.n_first;
    let blocks = saddle_blocks(cs);
    let m = blocks.b22.nrows;
    let c1 = &cs.rhs[..n1];
    let c2 = &cs.rhs[n1..];

    let coords1 = &cs.coords[..n1];
    let inner: InnerSolver = match cfg.inner {
        InnerSolve::Direct => InnerSolver::Direct(LdlFactor::with_coords(&blocks.b11, coords1)?),
        InnerSolve::Cg { tol } => InnerSolver::Cg {
            diag: blocks.b11.diagonal(),
            tol,
        },
    };
    let b11 = &blocks.b11;
    let solve11 = |v: &mut [f64]| -> Result<(), SolverError> { inner.solve(b11, v) };

    let kernel = if cfg.deflate_kernel {
        cs.kernel.as_deref().and_then(|z| {
            let zp = &z[n1..];
            let zero_first = z[..n1].iter().all(|&v| v == 0.0);
            if zero_first {
                checked_kernel(&cs.s, z).map(|_| {
                    let nz = norm(zp);
                    zp.iter().map(|v| v / nz).collect::<Vec<f64>>()
                })
            } else {
                None
            }
        })
    } else {
        None
    };

    // right-hand side -c2 + B12ᵀ B11⁻¹ c1
    let mut w = c1.to_vec();
    solve11(&mut w)?;
    let mut rhs = vec![0.0; m];
    blocks.b12.matvec_transpose(&w, &mut rhs);
    for (r, c) in rhs.iter_mut().zip(c2) {
        *r -= c;
    }

    let mut inner_err: Option<SolverError> = None;
    let mut tmp1 = vec![0.0; n1];
    let mut tmp2 = vec![0.0; m];
    let mut apply = |x: &[f64], y: &mut [f64]| {
        blocks.b12.matvec(x, &mut tmp1);
        if let Err(e) = solve11(&mut tmp1) {
            inner_err.get_or_insert(e);
        }
        blocks.b12.matvec_transpose(&tmp1, y);
        blocks.b22.matvec(x, &mut tmp2);
        for (yi, ti) in y.iter_mut().zip(&tmp2) {
            *yi += ti;
        }
    };
    let (p_hat, report) = match cfg.preconditioner {
        Preconditioner::None => pcg(
            &mut apply,
            &mut |r, z| z.copy_from_slice(r),
            &rhs,
            kernel.as_deref(),
            cfg.tol,
            cfg.max_iter,
        ),
        Preconditioner::Jacobi => {
            let d = approximate_schur(&blocks).diagonal();
            let mut pre = |r: &[f64], z: &mut [f64]| jacobi(&d, r, z);
            pcg(
                &mut apply,
                &mut pre,
                &rhs,
                kernel.as_deref(),
                cfg.tol,
                cfg.max_iter,
            )
        }
        Preconditioner::Direct => {
            let mut approx = approximate_schur(&blocks);
            ground(&mut approx);
            let f = LdlFactor::with_coords(&approx, &cs.coords[n1..])?;
            let mut pre = |r: &[f64], z: &mut [f64]| {
                z.copy_from_slice(r);
                f.solve_in_place(z);
            };
            pcg(
                &mut apply,
                &mut pre,
                &rhs,
                kernel.as_deref(),
                cfg.tol,
                cfg.max_iter,
            )
        }
    };
    if let Some(e) = inner_err {
        return Err(e);
    }

    // θ̂ = B11⁻¹ (c1 - B12 p̂)
    let mut th = vec![0.0; n1];
    blocks.b12.matvec(&p_hat, &mut th);
    for (t, c) in th.iter_mut().zip(c1) {
        *t = c - *t;
    }
    solve11(&mut th)?;
    th.extend_from_slice(&p_hat);
    finish(th, report, elapsed(t0))
}

/// Adds the largest diagonal entry to the first diagonal entry, removing
/// a one-dimensional null space without changing the sparsity pattern.
fn ground(a: &mut CsrMatrix) {
    let big = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for p in a.indptr[0]..a.indptr[1] {
        if a.indices[p] == 0 {
            a.values[p] += big;
        }
    }
}

enum InnerSolver {
    Direct(LdlFactor),
    Cg { diag: Vec<f64>, tol: f64 },
}

impl InnerSolver {
    fn solve(&self, a: &CsrMatrix, v: &mut [f64]) -> Result<(), SolverError> {
        match self {
            InnerSolver::Direct(f) => {
                f.solve_in_place(v);
                Ok(())
            }
            InnerSolver::Cg { diag, tol } => {
                let mut apply = |x: &[f64], y: &mut [f64]| a.matvec(x, y);
                let mut pre = |r: &[f64], z: &mut [f64]| jacobi(diag, r, z);
                let (x, rep) = pcg(&mut apply, &mut pre, v, None, *tol, 10 * v.len().max(100));
                if !rep.converged {
                    return Err(SolverError::Inner("inner CG did not converge"));
                }
                v.copy_from_slice(&x);
                Ok(())
            }
        }
    }
}

/// Dense `n x n` view of a CSR matrix, for small problems and tests.
pub fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.nrows, a.ncols, &a.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csr_from_dense(n: usize, v: &[f64]) -> CsrMatrix {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            for j in 0..n {
                if v[i * n + j] != 0.0 {
                    t.push(i, j, v[i * n + j]);
                }
            }
        }
        t.to_csr()
    }

    fn spd(s: CsrMatrix, rhs: Vec<f64>) -> CondensedSystem {
        let n = s.nrows;
        CondensedSystem {
            s,
            rhs,
            kernel: None,
            n_first: n,
            coords: vec![[0.0, 0.0]; n],
            factors: Vec::new(),
        }
    }

    #[test]
    fn cg_on_identity_and_diagonal() {
        let cfg = SolverConfig {
            preconditioner: Preconditioner::None,
            ..SolverConfig::default()
        };
        let (x, rep) = solve_spd(
            &spd(CsrMatrix::identity(5), vec![1.0, 2.0, 3.0, 4.0, 5.0]),
            &cfg,
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, vec![1.0, 2.0, 3.0, 4.0, 5.0]);

        let a = csr_from_dense(2, &[1.0, 0.0, 0.0, 2.0]);
        let (x, rep) = solve_spd(&spd(a, vec![1.0, 1.0]), &cfg).unwrap();
        assert!(rep.iterations <= 2);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn max_iterations_reported() {
        let a = csr_from_dense(3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let cfg = SolverConfig {
            max_iter: 1,
            preconditioner: Preconditioner::None,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_spd(&spd(a, vec![1.0, 0.0, 0.0]), &cfg),
            Err(SolverError::MaxIterations { iterations: 1, .. })
        ));
        let bad = SolverConfig {
            tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn saddle_decouples_when_b12_vanishes() {
        // B11 = 2I (2x2), B12 = 0, B22 = [[1, -1], [-1, 1]] (kernel (1, 1))
        let mut t = Triplets::new(4, 4);
        t.push(0, 0, 2.0);
        t.push(1, 1, 2.0);
        t.push(2, 2, -1.0);
        t.push(2, 3, 1.0);
        t.push(3, 2, 1.0);
        t.push(3, 3, -1.0);
        let s = t.to_csr();
        let cs = CondensedSystem {
            s,
            rhs: vec![2.0, 4.0, 1.0, -1.0],
            kernel: Some(vec![0.0, 0.0, 1.0, 1.0]),
            n_first: 2,
            coords: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
            factors: Vec::new(),
        };
        let cfg = SolverConfig {
            preconditioner: Preconditioner::None,
            ..SolverConfig::default()
        };
        let (x, rep) = solve_saddle_trace(&cs, &cfg).unwrap();
        assert!(rep.deflated);
        assert_eq!(rep.iterations, 1);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        // -B22 p = c2 with p ⟂ (1, 1): p = (-1/2, 1/2)
        assert!((x[2] + 0.5).abs() < 1e-14 && (x[3] - 0.5).abs() < 1e-14);
    }
}
