//! The full plate solve: Steps One to Four chained together.

use alloc::vec::Vec;

use thiserror::Error;

use crate::assembly::{
    assemble_step1, assemble_step2, assemble_step3, AssemblyError, AssemblyOptions, BlockSystem,
};
use crate::basis::{Discretization, Rank};
use crate::fields::{recover_gamma, DiscreteField, FieldError, SolutionFields, TraceField};
use crate::material::MaterialParams;
use crate::mesh::Point;
use crate::quadrature::quad_element;
use crate::solver::{
    back_substitute, condense, solve_saddle_trace, solve_spd, Preconditioner, SolveReport,
    SolverConfig, SolverError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("assembly of step {step} failed: {source}")]
    Assembly { step: u8, source: AssemblyError },
    #[error("solve of step {step} failed: {source}")]
    Solver { step: u8, source: SolverError },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageReports {
    pub step1: SolveReport,
    pub step2: SolveReport,
    pub step3: SolveReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateSolution {
    pub fields: SolutionFields,
    pub reports: StageReports,
}

/// Solver settings per stage. Step Two's `iterations` is the reported count.
///
/// The default uses Jacobi for Steps One and Three and the factored
/// approximate Schur complement for Step Two, whose iteration count then
/// stays bounded under refinement for thick and thin plates alike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub poisson: SolverConfig,
    pub saddle: SolverConfig,
    pub assembly: AssemblyOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            poisson: SolverConfig::default(),
            saddle: SolverConfig {
                preconditioner: Preconditioner::Direct,
                ..SolverConfig::default()
            },
            assembly: AssemblyOptions::default(),
        }
    }
}

/// Interior and trace solution of one stage.
pub struct StageSolution {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub report: SolveReport,
}

pub fn solve_stage(
    sys: &BlockSystem,
    cfg: &SolverConfig,
    step: u8,
) -> Result<StageSolution, PipelineError> {
    let err = |source| PipelineError::Solver { step, source };
    let cs = condense(sys).map_err(err)?;
    let (x2, report) = if step == 2 {
        solve_saddle_trace(&cs, cfg)
    } else {
        solve_spd(&cs, cfg)
    }
    .map_err(err)?;
    let x1 = back_substitute(sys, &cs, &x2);
    Ok(StageSolution { x1, x2, report })
}

fn scalar_trace(disc: &Discretization, x2: &[f64]) -> TraceField {
    let k = disc.k();
    let mut t = TraceField::zeros(1, k - 1, disc.mesh.n_edges());
    for f in 0..disc.mesh.n_edges() {
        for j in 0..k {
            if let Some(g) = disc.dofs.scalar_trace_dof(f, j) {
                t.edge_mut(f)[j] = x2[g];
            }
        }
    }
    t
}

/// Splits a stacked interior vector into per-element slices of the given
/// fields, in order.
fn unpack(x1: &[f64], fields: &mut [&mut DiscreteField]) {
    let n_el = fields[0].coeffs.len() / (fields[0].ncomp() * fields[0].n_basis);
    let mut pos = 0;
    for e in 0..n_el {
        for f in fields.iter_mut() {
            let dst = f.element_mut(e);
            dst.copy_from_slice(&x1[pos..pos + dst.len()]);
            pos += dst.len();
        }
    }
}

/// Runs the four stages for loads `g` (transverse) and `f` (body force).
pub fn solve_plate(
    disc: &Discretization,
    params: &MaterialParams,
    g: &(dyn Fn(Point) -> f64 + Sync),
    f: &(dyn Fn(Point) -> [f64; 2] + Sync),
    cfg: &PipelineConfig,
) -> Result<PlateSolution, PipelineError> {
    let k = disc.k();
    let ell = disc.ell();
    let mesh = disc.mesh;
    let ne = mesh.n_elements();

    let sys1 = assemble_step1(disc, g, &cfg.assembly)
        .map_err(|source| PipelineError::Assembly { step: 1, source })?;
    let s1 = solve_stage(&sys1, &cfg.poisson, 1)?;
    let mut l = DiscreteField::zeros(Rank::Vector2, k - 1, ne);
    let mut r = DiscreteField::zeros(Rank::Scalar, k, ne);
    unpack(&s1.x1, &mut [&mut l, &mut r]);
    let r_hat = scalar_trace(disc, &s1.x2);
    drop(sys1);

    let sys2 = assemble_step2(disc, params, &l, f, &cfg.assembly)
        .map_err(|source| PipelineError::Assembly { step: 2, source })?;
    let s2 = solve_stage(&sys2, &cfg.saddle, 2)?;
    let mut sigma = DiscreteField::zeros(Rank::SymTensor, k - 1, ne);
    let mut rr = DiscreteField::zeros(Rank::Vector2, k - 1, ne);
    let mut theta = DiscreteField::zeros(Rank::Vector2, k, ne);
    let mut p = DiscreteField::zeros(Rank::Scalar, k, ne);
    unpack(&s2.x1, &mut [&mut sigma, &mut rr, &mut theta, &mut p]);
    rr.coeffs.iter_mut().for_each(|v| *v *= sys2.r_scale);
    let mut theta_hat = TraceField::zeros(2, ell, mesh.n_edges());
    let mut p_hat = TraceField::zeros(1, k - 1, mesh.n_edges());
    for e in 0..mesh.n_edges() {
        for c in 0..2 {
            for j in 0..=ell {
                if let Some(gd) = disc.dofs.theta_hat_dof(e, c, j) {
                    theta_hat.edge_mut(e)[c * (ell + 1) + j] = s2.x2[gd];
                }
            }
        }
        for j in 0..k {
            p_hat.edge_mut(e)[j] = s2.x2[disc.dofs.p_hat_dof(e, j)];
        }
    }
    let mean = mean_value(disc, &p);
    for e in 0..ne {
        let c = disc.bases[e].constant_coefficients();
        for (a, ca) in c.iter().enumerate() {
            p.element_mut(e)[a] -= mean * ca;
        }
    }
    for e in 0..mesh.n_edges() {
        p_hat.edge_mut(e)[0] -= mean;
    }
    drop(sys2);

    let sys3 = assemble_step3(disc, params, &theta, g, &cfg.assembly)
        .map_err(|source| PipelineError::Assembly { step: 3, source })?;
    let s3 = solve_stage(&sys3, &cfg.poisson, 3)?;
    let mut gg = DiscreteField::zeros(Rank::Vector2, k - 1, ne);
    let mut omega = DiscreteField::zeros(Rank::Scalar, k, ne);
    unpack(&s3.x1, &mut [&mut gg, &mut omega]);
    let omega_hat = scalar_trace(disc, &s3.x2);

    let gamma = recover_gamma(&l, &rr, params)?;
    Ok(PlateSolution {
        fields: SolutionFields {
            l,
            r,
            r_hat,
            sigma,
            rr,
            theta,
            theta_hat,
            p,
            p_hat,
            g: gg,
            omega,
            omega_hat,
            gamma,
        },
        reports: StageReports {
            step1: s1.report,
            step2: s2.report,
            step3: s3.report,
        },
    })
}

/// Mean of a scalar field over the domain.
pub fn mean_value(disc: &Discretization, u: &DiscreteField) -> f64 {
    let mesh = disc.mesh;
    let mut int = 0.0;
    let mut area = 0.0;
    for e in 0..mesh.n_elements() {
        let rule = quad_element(mesh, e, u.degree).expect("convex mesh");
        for (&pt, &w) in rule.points.iter().zip(&rule.weights) {
            int += w * u.eval(disc, e, pt)[0];
        }
        area += mesh.elements[e].area;
    }
    int / area
}
