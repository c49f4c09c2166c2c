//! Degree-of-freedom numbering for the discrete spaces.
//!
//! Interior unknowns are numbered element by element. Trace unknowns live on
//! edges; the hybrid variables with homogeneous Dirichlet data (`r̂`, `θ̂`,
//! `ω̂`) exist only on interior edges, while `p̂` lives on every edge.

use alloc::vec::Vec;

use thiserror::Error;

use crate::basis::monomial_count;
use crate::mesh::Mesh;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("polynomial degree k must be at least 1, got {0}")]
    DegreeTooLow(usize),
    #[error("trace degree l = {ell} must satisfy max(1, k - 1) <= l <= k for k = {k}")]
    TraceDegree { k: usize, ell: usize },
}

/// Polynomial degrees `k` (volume) and `ell` (rotation trace).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceConfig {
    k: usize,
    ell: usize,
}

impl SpaceConfig {
    pub fn new(k: usize, ell: usize) -> Result<SpaceConfig, SpaceError> {
        if k < 1 {
            return Err(SpaceError::DegreeTooLow(k));
        }
        if ell < 1.max(k - 1) || ell > k {
            return Err(SpaceError::TraceDegree { k, ell });
        }
        Ok(SpaceConfig { k, ell })
    }

    /// `ell = k`.
    pub fn with_degree(k: usize) -> Result<SpaceConfig, SpaceError> {
        SpaceConfig::new(k, k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    /// `dim P_{k-1}(K)`.
    pub fn nb(&self) -> usize {
        monomial_count(self.k - 1)
    }

    /// `dim P_k(K)`.
    pub fn na(&self) -> usize {
        monomial_count(self.k)
    }
}

/// Offsets of the per-element interior blocks and the per-edge trace blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    pub spaces: SpaceConfig,
    /// Position of each edge among the interior edges, `None` on the boundary.
    pub interior_index: Vec<Option<usize>>,
    pub n_interior_edges: usize,
    pub n_edges: usize,
    pub n_elements: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, spaces: SpaceConfig) -> DofMap {
        let mut next = 0;
        let interior_index = mesh
            .edges
            .iter()
            .map(|e| {
                if e.is_boundary() {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        DofMap {
            spaces,
            interior_index,
            n_interior_edges: next,
            n_edges: mesh.n_edges(),
            n_elements: mesh.n_elements(),
        }
    }

    /// Interior unknowns per element in Steps One and Three: `(L, r)`.
    pub fn step1_interior(&self) -> usize {
        2 * self.spaces.nb() + self.spaces.na()
    }

    /// Interior unknowns per element in Step Two: `(σ, R, θ, p)`.
    pub fn step2_interior(&self) -> usize {
        5 * self.spaces.nb() + 3 * self.spaces.na()
    }

    /// Scalar trace unknowns per edge for `r̂`, `p̂`, `ω̂`.
    pub fn scalar_trace_per_edge(&self) -> usize {
        self.spaces.k
    }

    /// Rotation trace unknowns per edge.
    pub fn rotation_trace_per_edge(&self) -> usize {
        2 * (self.spaces.ell + 1)
    }

    pub fn step1_trace(&self) -> usize {
        self.spaces.k * self.n_interior_edges
    }

    pub fn n_theta_hat(&self) -> usize {
        self.rotation_trace_per_edge() * self.n_interior_edges
    }

    pub fn n_p_hat(&self) -> usize {
        self.spaces.k * self.n_edges
    }

    /// `θ̂` unknowns first, then `p̂`.
    pub fn step2_trace(&self) -> usize {
        self.n_theta_hat() + self.n_p_hat()
    }

    /// Global index of `r̂` / `ω̂` unknown `j` on `edge`.
    pub fn scalar_trace_dof(&self, edge: usize, j: usize) -> Option<usize> {
        self.interior_index[edge].map(|i| i * self.spaces.k + j)
    }

    /// Global index of `θ̂` component `c`, coefficient `j`, on `edge`.
    pub fn theta_hat_dof(&self, edge: usize, c: usize, j: usize) -> Option<usize> {
        let per = self.rotation_trace_per_edge();
        self.interior_index[edge].map(|i| i * per + c * (self.spaces.ell + 1) + j)
    }

    /// Global index of `p̂` coefficient `j` on `edge`.
    pub fn p_hat_dof(&self, edge: usize, j: usize) -> usize {
        self.n_theta_hat() + edge * self.spaces.k + j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshKind;

    #[test]
    fn degree_bounds() {
        assert!(SpaceConfig::new(0, 0).is_err());
        assert!(SpaceConfig::new(1, 1).is_ok());
        assert!(SpaceConfig::new(1, 0).is_err());
        assert!(SpaceConfig::new(2, 1).is_ok());
        assert!(SpaceConfig::new(3, 1).is_err());
        assert!(SpaceConfig::new(3, 4).is_err());
    }

    #[test]
    fn counts_on_two_by_two_triangles() {
        let m = Mesh::structured(MeshKind::Triangle, 2);
        let d = DofMap::new(&m, SpaceConfig::with_degree(1).unwrap());
        assert_eq!(d.step1_interior() * m.n_elements(), 40);
        assert_eq!(d.step1_trace(), 8);
        assert_eq!(d.step2_interior(), 14);
        assert_eq!(d.step2_interior() * m.n_elements(), 112);
        assert_eq!(d.step2_trace(), 48);
    }

    #[test]
    fn boundary_traces_absent() {
        let m = Mesh::structured(MeshKind::Quadrilateral, 3);
        let d = DofMap::new(&m, SpaceConfig::with_degree(2).unwrap());
        for e in &m.edges {
            assert_eq!(d.scalar_trace_dof(e.id, 0).is_none(), e.is_boundary());
            assert_eq!(d.theta_hat_dof(e.id, 1, 2).is_none(), e.is_boundary());
        }
        assert_eq!(d.p_hat_dof(m.n_edges() - 1, 1), d.step2_trace() - 1);
    }
}
