//! Dense bivariate polynomials with exact differentiation.
//!
//! Coefficients are `f64`; products and derivatives of polynomials with
//! small integer coefficients stay exactly representable, which is all the
//! manufactured solution needs.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use crate::mesh::Point;

/// `sum c[a][b] x^a y^b`, stored row-major with stride `deg + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    deg: usize,
    coeffs: Vec<f64>,
}

impl Poly2 {
    pub fn zero() -> Poly2 {
        Poly2 {
            deg: 0,
            coeffs: vec![0.0],
        }
    }

    pub fn constant(c: f64) -> Poly2 {
        Poly2 {
            deg: 0,
            coeffs: vec![c],
        }
    }

    pub fn monomial(c: f64, a: usize, b: usize) -> Poly2 {
        let mut p = Poly2::with_degree(a + b);
        p.set(a, b, c);
        p
    }

    pub fn x() -> Poly2 {
        Poly2::monomial(1.0, 1, 0)
    }

    pub fn y() -> Poly2 {
        Poly2::monomial(1.0, 0, 1)
    }

    fn with_degree(deg: usize) -> Poly2 {
        Poly2 {
            deg,
            coeffs: vec![0.0; (deg + 1) * (deg + 1)],
        }
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a > self.deg || b > self.deg {
            0.0
        } else {
            self.coeffs[a * (self.deg + 1) + b]
        }
    }

    fn set(&mut self, a: usize, b: usize, c: f64) {
        let s = self.deg + 1;
        self.coeffs[a * s + b] = c;
    }

    /// Highest total degree with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        let mut d = 0;
        for a in 0..=self.deg {
            for b in 0..=self.deg {
                if self.coeff(a, b) != 0.0 {
                    d = d.max(a + b);
                }
            }
        }
        d
    }

    pub fn scale(&self, s: f64) -> Poly2 {
        Poly2 {
            deg: self.deg,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Poly2 {
        let mut out = Poly2::constant(1.0);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn dx(&self) -> Poly2 {
        let mut out = Poly2::with_degree(self.deg);
        for a in 1..=self.deg {
            for b in 0..=self.deg {
                out.set(a - 1, b, a as f64 * self.coeff(a, b));
            }
        }
        out
    }

    pub fn dy(&self) -> Poly2 {
        let mut out = Poly2::with_degree(self.deg);
        for a in 0..=self.deg {
            for b in 1..=self.deg {
                out.set(a, b - 1, b as f64 * self.coeff(a, b));
            }
        }
        out
    }

    pub fn eval(&self, p: Point) -> f64 {
        let s = self.deg + 1;
        let mut acc = 0.0;
        for a in (0..s).rev() {
            let row = &self.coeffs[a * s..(a + 1) * s];
            let mut r = 0.0;
            for &c in row.iter().rev() {
                r = r * p[1] + c;
            }
            acc = acc * p[0] + r;
        }
        acc
    }

    fn combine(&self, other: &Poly2, sign: f64) -> Poly2 {
        let deg = self.deg.max(other.deg);
        let mut out = Poly2::with_degree(deg);
        for a in 0..=deg {
            for b in 0..=deg {
                out.set(a, b, self.coeff(a, b) + sign * other.coeff(a, b));
            }
        }
        out
    }
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        self.combine(rhs, -1.0)
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self.scale(-1.0)
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        let mut out = Poly2::with_degree(self.deg + rhs.deg);
        let s = out.deg + 1;
        for a in 0..=self.deg {
            for b in 0..=self.deg {
                let c = self.coeff(a, b);
                if c == 0.0 {
                    continue;
                }
                for i in 0..=rhs.deg {
                    for j in 0..=rhs.deg {
                        out.coeffs[(a + i) * s + b + j] += c * rhs.coeff(i, j);
                    }
                }
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly2 {
            type Output = Poly2;
            fn $m(self, rhs: Poly2) -> Poly2 {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
