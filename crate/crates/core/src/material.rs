//! Material parameters, the plane-stress constitutive tensor and the
//! element stabilization parameters.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("Young's modulus must be positive, got {0}")]
    YoungsModulus(f64),
    #[error("Poisson ratio must lie in (0, 0.5], got {0}")]
    PoissonRatio(f64),
    #[error("shear correction factor must be positive, got {0}")]
    ShearFactor(f64),
    #[error("thickness must lie in (0, 1], got {0}")]
    Thickness(f64),
}

/// Symmetric 2x2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor {
    pub const IDENTITY: SymTensor = SymTensor {
        xx: 1.0,
        yy: 1.0,
        xy: 0.0,
    };

    pub fn new(xx: f64, yy: f64, xy: f64) -> SymTensor {
        SymTensor { xx, yy, xy }
    }

    /// Builds the tensor from a full 2x2 matrix; fails unless it is symmetric.
    pub fn from_matrix(m: [[f64; 2]; 2]) -> Option<SymTensor> {
        (m[0][1] == m[1][0]).then_some(SymTensor::new(m[0][0], m[1][1], m[0][1]))
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Frobenius inner product `A : B`.
    pub fn dot(&self, o: &SymTensor) -> f64 {
        self.xx * o.xx + self.yy * o.yy + 2.0 * self.xy * o.xy
    }

    pub fn scale(&self, s: f64) -> SymTensor {
        SymTensor::new(self.xx * s, self.yy * s, self.xy * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    e: f64,
    nu: f64,
    kappa: f64,
    t: f64,
}

impl MaterialParams {
    pub fn new(e: f64, nu: f64, kappa: f64, t: f64) -> Result<MaterialParams, MaterialError> {
        if !(e > 0.0 && e.is_finite()) {
            return Err(MaterialError::YoungsModulus(e));
        }
        if !(nu > 0.0 && nu <= 0.5) {
            return Err(MaterialError::PoissonRatio(nu));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(MaterialError::ShearFactor(kappa));
        }
        if !(t > 0.0 && t <= 1.0) {
            return Err(MaterialError::Thickness(t));
        }
        Ok(MaterialParams { e, nu, kappa, t })
    }

    /// `E = 1`, `nu = 0.3`, `kappa = 5/6` at thickness `t`.
    pub fn standard(t: f64) -> Result<MaterialParams, MaterialError> {
        MaterialParams::new(1.0, 0.3, 5.0 / 6.0, t)
    }

    pub fn young(&self) -> f64 {
        self.e
    }

    pub fn poisson(&self) -> f64 {
        self.nu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn thickness(&self) -> f64 {
        self.t
    }

    /// Shear modulus scale `kappa E / (2 (1 + nu))`.
    pub fn lambda(&self) -> f64 {
        self.kappa * self.e / (2.0 * (1.0 + self.nu))
    }

    /// Bending stiffness `E / (12 (1 - nu^2))`.
    pub fn bending_scale(&self) -> f64 {
        self.e / (12.0 * (1.0 - self.nu * self.nu))
    }

    pub fn constitutive_apply(&self, tau: &SymTensor) -> SymTensor {
        let a = self.bending_scale();
        let tr = self.nu * tau.trace();
        SymTensor::new(
            a * ((1.0 - self.nu) * tau.xx + tr),
            a * ((1.0 - self.nu) * tau.yy + tr),
            a * (1.0 - self.nu) * tau.xy,
        )
    }

    pub fn constitutive_inverse_apply(&self, tau: &SymTensor) -> SymTensor {
        let c = 1.0 / (self.bending_scale() * (1.0 - self.nu));
        let tr = self.nu / (1.0 + self.nu) * tau.trace();
        SymTensor::new(c * (tau.xx - tr), c * (tau.yy - tr), c * tau.xy)
    }

    /// Eigenvalue bracket `[12 (1 - nu) / E, 12 (1 + nu) / E]` of the
    /// inverse constitutive tensor.
    pub fn compliance_bounds(&self) -> (f64, f64) {
        (
            12.0 * (1.0 - self.nu) / self.e,
            12.0 * (1.0 + self.nu) / self.e,
        )
    }
}

/// Edge penalty weights of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stabilization {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl Stabilization {
    pub fn new(h_k: f64, t: f64) -> Stabilization {
        Stabilization {
            alpha1: 1.0 / h_k,
            alpha2: 1.0 / h_k,
            alpha3: h_k + t * t / h_k,
        }
    }
}
