//! Manufactured solution on the unit square, L2 errors and convergence
//! tables.
//!
//! With `X = x(x-1)`, `Y = y(y-1)`:
//!
//! * `θ = 100 (X²Y³(2x-1), X³Y²(2y-1))`, i.e. `θ = (100/3) ∇(X³Y³)`
//! * `ω = (100/3) X³Y³ - c Φ` with `Φ = Y³X(5x²-5x+1) + X³Y(5y²-5y+1)`
//!   and `c = 40 t² / (1-ν)`
//!
//! so `∇ω - θ = -c ∇Φ` and the shear stress `γ = -λ (40/(1-ν)) ∇Φ` carries
//! no negative power of `t`. The loads `g = -∇·γ` and `f = -∇·𝒞ε(θ) - γ`
//! are derived by exact differentiation.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::basis::Discretization;
use crate::dofs::SpaceConfig;
use crate::fields::DiscreteField;
use crate::material::{MaterialParams, SymTensor};
use crate::mesh::{Mesh, MeshKind, Point};
use crate::par::map_indexed;
use crate::pipeline::{solve_plate, PipelineConfig, PipelineError, PlateSolution};
use crate::poly::Poly2;
use crate::quadrature::quad_element;

/// Default quadrature degree for errors against the manufactured solution.
pub const ERROR_QUAD_DEGREE: usize = 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerificationError {
    #[error("errors must be positive to define a rate, got {0} and {1}")]
    NonPositiveError(f64, f64),
    #[error("level n = {n}: {source}")]
    Level { n: usize, source: PipelineError },
    #[error(transparent)]
    Space(#[from] crate::dofs::SpaceError),
    #[error(transparent)]
    Basis(#[from] crate::basis::BasisError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub params: MaterialParams,
    pub theta: [Poly2; 2],
    pub omega: Poly2,
    pub gamma: [Poly2; 2],
    /// `(xx, yy, xy)`.
    pub sigma: [Poly2; 3],
    pub g: Poly2,
    pub f: [Poly2; 2],
}

impl ExactSolution {
    pub fn new(params: MaterialParams) -> ExactSolution {
        let one = Poly2::constant(1.0);
        let x = Poly2::x();
        let y = Poly2::y();
        let xx = &x * &(&x - &one);
        let yy = &y * &(&y - &one);
        let two_x = &x.scale(2.0) - &one;
        let two_y = &y.scale(2.0) - &one;
        let quint = |s: &Poly2| &(&(s * s).scale(5.0) - &s.scale(5.0)) + &one;

        let theta = [
            (&(&xx.pow(2) * &yy.pow(3)) * &two_x).scale(100.0),
            (&(&xx.pow(3) * &yy.pow(2)) * &two_y).scale(100.0),
        ];
        let phi = &(&(&yy.pow(3) * &xx) * &quint(&x)) + &(&(&xx.pow(3) * &yy) * &quint(&y));
        let nu = params.poisson();
        let t = params.thickness();
        let c = 40.0 * t * t / (1.0 - nu);
        let omega = &(&xx.pow(3) * &yy.pow(3)).scale(100.0 / 3.0) - &phi.scale(c);

        let gs = -params.lambda() * 40.0 / (1.0 - nu);
        let gamma = [phi.dx().scale(gs), phi.dy().scale(gs)];
        let g = -&(&gamma[0].dx() + &gamma[1].dy());

        let a = params.bending_scale();
        let exx = theta[0].dx();
        let eyy = theta[1].dy();
        let exy = (&theta[0].dy() + &theta[1].dx()).scale(0.5);
        let tr = (&exx + &eyy).scale(nu);
        let sigma = [
            (&exx.scale(1.0 - nu) + &tr).scale(a),
            (&eyy.scale(1.0 - nu) + &tr).scale(a),
            exy.scale(a * (1.0 - nu)),
        ];
        let div = [
            &sigma[0].dx() + &sigma[2].dy(),
            &sigma[2].dx() + &sigma[1].dy(),
        ];
        let f = [-&(&div[0] + &gamma[0]), -&(&div[1] + &gamma[1])];
        ExactSolution {
            params,
            theta,
            omega,
            gamma,
            sigma,
            g,
            f,
        }
    }

    pub fn theta_at(&self, p: Point) -> [f64; 2] {
        [self.theta[0].eval(p), self.theta[1].eval(p)]
    }

    pub fn gamma_at(&self, p: Point) -> [f64; 2] {
        [self.gamma[0].eval(p), self.gamma[1].eval(p)]
    }

    pub fn sigma_at(&self, p: Point) -> SymTensor {
        SymTensor::new(
            self.sigma[0].eval(p),
            self.sigma[1].eval(p),
            self.sigma[2].eval(p),
        )
    }

    pub fn body_force(&self, p: Point) -> [f64; 2] {
        [self.f[0].eval(p), self.f[1].eval(p)]
    }

    pub fn load(&self, p: Point) -> f64 {
        self.g.eval(p)
    }
}

/// `sqrt(Σ_K ∫_K |u - u_h|²)`, with `u` given per component and the tensor
/// off-diagonal counted twice when `tensor` is set.
pub fn l2_error(
    disc: &Discretization,
    field: &DiscreteField,
    exact: &(dyn Fn(Point) -> [f64; 3] + Sync),
    degree: usize,
) -> f64 {
    let mesh = disc.mesh;
    let nc = field.ncomp();
    let weights = if nc == 3 { [1.0, 1.0, 2.0] } else { [1.0; 3] };
    let parts = map_indexed(mesh.n_elements(), |e| {
        let rule = quad_element(mesh, e, degree).expect("convex mesh");
        let mut s = 0.0;
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let uh = field.eval(disc, e, p);
            let u = exact(p);
            for c in 0..nc {
                let d = u[c] - uh[c];
                s += w * weights[c] * d * d;
            }
        }
        s
    });
    libm::sqrt(parts.iter().sum())
}

/// `log2(e_coarse / e_fine)`.
pub fn observed_rate(e_coarse: f64, e_fine: f64) -> Result<f64, VerificationError> {
    if !(e_coarse > 0.0 && e_fine > 0.0) {
        return Err(VerificationError::NonPositiveError(e_coarse, e_fine));
    }
    Ok(libm::log2(e_coarse / e_fine))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub n: usize,
    pub iterations: usize,
    pub err_theta: f64,
    /// `t ‖γ - γ_h‖`.
    pub err_tgamma: f64,
    pub err_sigma: f64,
    pub err_omega: f64,
    /// Wall time of the whole level in seconds, when measured.
    pub wall_time: Option<f64>,
}

impl ErrorReport {
    pub fn errors(&self) -> [f64; 4] {
        [
            self.err_theta,
            self.err_tgamma,
            self.err_sigma,
            self.err_omega,
        ]
    }
}

/// Errors of a computed solution against the manufactured one.
pub fn error_report(
    disc: &Discretization,
    exact: &ExactSolution,
    sol: &PlateSolution,
    n: usize,
    degree: usize,
) -> ErrorReport {
    let f = &sol.fields;
    let t = exact.params.thickness();
    let th = |p: Point| {
        let v = exact.theta_at(p);
        [v[0], v[1], 0.0]
    };
    let ga = |p: Point| {
        let v = exact.gamma_at(p);
        [v[0], v[1], 0.0]
    };
    let si = |p: Point| {
        let s = exact.sigma_at(p);
        [s.xx, s.yy, s.xy]
    };
    let om = |p: Point| [exact.omega.eval(p), 0.0, 0.0];
    ErrorReport {
        n,
        iterations: sol.reports.step2.iterations,
        err_theta: l2_error(disc, &f.theta, &th, degree),
        err_tgamma: t * l2_error(disc, &f.gamma, &ga, degree),
        err_sigma: l2_error(disc, &f.sigma, &si, degree),
        err_omega: l2_error(disc, &f.omega, &om, degree),
        wall_time: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub k: usize,
    pub kind: MeshKind,
    pub t: f64,
    pub rows: Vec<ErrorReport>,
}

impl RateTable {
    /// Rates between consecutive rows for each of the four error columns;
    /// `None` for the first row or when an error is not positive.
    pub fn rates(&self) -> Vec<[Option<f64>; 4]> {
        let mut out = vec![[None; 4]];
        for w in self.rows.windows(2) {
            let (a, b) = (w[0].errors(), w[1].errors());
            let mut r = [None; 4];
            for i in 0..4 {
                r[i] = observed_rate(a[i], b[i]).ok();
            }
            out.push(r);
        }
        out.truncate(self.rows.len());
        out
    }

    /// Rates of the last pair of levels.
    pub fn final_rates(&self) -> [Option<f64>; 4] {
        self.rates().last().copied().unwrap_or([None; 4])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSetup {
    pub params: MaterialParams,
    pub kind: MeshKind,
    pub spaces: SpaceConfig,
    pub config: PipelineConfig,
    pub error_degree: usize,
}

/// Solves one level and measures the errors.
pub fn run_level(
    setup: &ConvergenceSetup,
    mesh: &Mesh,
    n: usize,
) -> Result<ErrorReport, VerificationError> {
    #[cfg(feature = "std")]
    let start = std::time::Instant::now();
    let exact = ExactSolution::new(setup.params);
    let disc = Discretization::new(mesh, setup.spaces)?;
    let g = |p: Point| exact.load(p);
    let f = |p: Point| exact.body_force(p);
    let sol = solve_plate(&disc, &setup.params, &g, &f, &setup.config)
        .map_err(|source| VerificationError::Level { n, source })?;
    #[allow(unused_mut)]
    let mut rep = error_report(&disc, &exact, &sol, n, setup.error_degree);
    #[cfg(feature = "std")]
    {
        rep.wall_time = Some(start.elapsed().as_secs_f64());
    }
    Ok(rep)
}

/// Runs the manufactured-solution study on structured meshes of the given
/// levels.
pub fn run_convergence(
    setup: &ConvergenceSetup,
    levels: &[usize],
) -> Result<RateTable, VerificationError> {
    let mut rows = Vec::with_capacity(levels.len());
    for &n in levels {
        let mesh = Mesh::structured(setup.kind, n);
        rows.push(run_level(setup, &mesh, n)?);
    }
    Ok(RateTable {
        k: setup.spaces.k(),
        kind: setup.kind,
        t: setup.params.thickness(),
        rows,
    })
}
