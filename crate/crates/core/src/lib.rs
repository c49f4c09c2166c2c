//! Hybridizable discontinuous Galerkin discretization of the Reissner-Mindlin
//! plate bending problem on convex polygonal meshes.
//!
//! The plate system is split through a Helmholtz decomposition of the shear
//! stress into three problems that are solved in sequence:
//!
//! 1. a Poisson problem for the irrotational part `r` of the shear stress,
//! 2. a perturbed saddle-point problem for the bending moment, rotation and
//!    the rotational potential `p`,
//! 3. a Poisson problem for the deflection `omega`,
//!
//! after which the shear stress is recovered element-wise. Every stage is
//! statically condensed onto its trace unknowns and solved with
//! (preconditioned) conjugate gradients.
//!
//! The crate is `no_std` compatible (it needs `alloc`); disable the default
//! `std` feature to build it that way.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assembly;
pub mod basis;
pub mod dofs;
pub mod fields;
pub mod material;
pub mod mesh;
pub mod par;
pub mod pipeline;
pub mod poly;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod verification;

pub use assembly::{
    assemble_step1, assemble_step2, assemble_step3, AssemblyError, AssemblyOptions, BlockSystem,
    ElementBlock,
};
pub use basis::{DerivativeOp, Discretization, EdgeBasis, ElementBasis, Rank};
pub use dofs::{DofMap, SpaceConfig};
pub use fields::{recover_gamma, DiscreteField, SolutionFields};
pub use material::{MaterialParams, Stabilization, SymTensor};
pub use mesh::{Mesh, MeshError, MeshKind, Point};
pub use pipeline::{solve_plate, PipelineConfig, PipelineError, PlateSolution, StageReports};
pub use quadrature::QuadratureRule;
pub use solver::{Preconditioner, SolveReport, SolverConfig, SolverError};
pub use verification::{ErrorReport, ExactSolution, RateTable};
