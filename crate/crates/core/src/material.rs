//! Plane-strain isotropic elasticity in the `(t11, t22, t12)` tensor-triple
//! convention.
//!
//! The double contraction is `s : t = s11 t11 + s22 t22 + 2 s12 t12`, so the
//! stiffness matrix carries `2μ` in its shear slot and the compliance matrix
//! `1 / (2μ)`. Energy forms use `W · D` with `W = diag(1, 1, 2)`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Symmetric 2×2 tensor stored as `(t11, t22, t12)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SymTensor2 {
    pub t11: f64,
    pub t22: f64,
    pub t12: f64,
}

impl SymTensor2 {
    pub const fn new(t11: f64, t22: f64, t12: f64) -> Self {
        Self { t11, t22, t12 }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 1.0, 0.0)
    }

    pub fn from_triple(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn triple(&self) -> Vector3<f64> {
        Vector3::new(self.t11, self.t22, self.t12)
    }

    pub fn contract(&self, other: &Self) -> f64 {
        self.t11 * other.t11 + self.t22 * other.t22 + 2.0 * self.t12 * other.t12
    }

    /// `τ n`
    pub fn apply(&self, n: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.t11 * n.x + self.t12 * n.y, self.t12 * n.x + self.t22 * n.y)
    }

    pub fn trace(&self) -> f64 {
        self.t11 + self.t22
    }

    pub fn norm(&self) -> f64 {
        self.contract(self).sqrt()
    }
}

impl Add for SymTensor2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.t11 + o.t11, self.t22 + o.t22, self.t12 + o.t12)
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for SymTensor2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.t11 - o.t11, self.t22 - o.t22, self.t12 - o.t12)
    }
}

impl Neg for SymTensor2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.t11, -self.t22, -self.t12)
    }
}

impl Mul<f64> for SymTensor2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.t11 * s, self.t22 * s, self.t12 * s)
    }
}

/// Homogeneous isotropic material given by its Lamé pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicMaterial {
    pub lambda: f64,
    pub mu: f64,
}

impl IsotropicMaterial {
    /// `C ε = 2μ ε + λ tr(ε) Id`. Requires `μ > 0` and `λ ≥ 0`.
    pub fn from_lame(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidMaterial(format!("mu must be positive, got {mu}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidMaterial(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(Self { lambda, mu })
    }

    /// Plane-strain conversion from Young's modulus and Poisson's ratio.
    pub fn from_young_poisson_plane_strain(young: f64, nu: f64) -> Result<Self> {
        if !(young > 0.0) {
            return Err(Error::InvalidMaterial(format!("Young's modulus must be positive, got {young}")));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::InvalidMaterial(format!("Poisson's ratio must lie in [0, 0.5), got {nu}")));
        }
        let lambda = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = young / (2.0 * (1.0 + nu));
        Self::from_lame(lambda, mu)
    }

    pub fn young(&self) -> f64 {
        self.mu * (3.0 * self.lambda + 2.0 * self.mu) / (self.lambda + self.mu)
    }

    pub fn poisson(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }

    /// Maps a strain triple to a stress triple.
    pub fn c_matrix(&self) -> Matrix3<f64> {
        let (l, m) = (self.lambda, self.mu);
        Matrix3::new(
            2.0 * m + l, l, 0.0,
            l, 2.0 * m + l, 0.0,
            0.0, 0.0, 2.0 * m,
        )
    }

    /// Inverse of [`c_matrix`](Self::c_matrix), in closed form.
    pub fn d_matrix(&self) -> Matrix3<f64> {
        let (l, m) = (self.lambda, self.mu);
        let det = 4.0 * m * (m + l);
        Matrix3::new(
            (2.0 * m + l) / det, -l / det, 0.0,
            -l / det, (2.0 * m + l) / det, 0.0,
            0.0, 0.0, 1.0 / (2.0 * m),
        )
    }

    /// Symmetric matrix `E` with `D σ : τ = σᵀ E τ` on triples.
    pub fn compliance_energy_matrix(&self) -> Matrix3<f64> {
        let mut e = self.d_matrix();
        e[(2, 2)] *= 2.0;
        e
    }

    pub fn stress(&self, strain: &SymTensor2) -> SymTensor2 {
        SymTensor2::from_triple(&(self.c_matrix() * strain.triple()))
    }

    pub fn strain(&self, stress: &SymTensor2) -> SymTensor2 {
        SymTensor2::from_triple(&(self.d_matrix() * stress.triple()))
    }

    /// Stabilization scale: half the trace of the 3×3 compliance matrix.
    pub fn kappa(&self) -> f64 {
        0.5 * self.d_matrix().trace()
    }

    /// Plane-strain von Mises stress, with `σ33 = ν (σ11 + σ22)`.
    pub fn von_mises(&self, s: &SymTensor2) -> f64 {
        let s33 = self.poisson() * (s.t11 + s.t22);
        let v = s.t11 * s.t11 + s.t22 * s.t22 + s33 * s33
            - s.t11 * s.t22
            - s.t22 * s33
            - s.t11 * s33
            + 3.0 * s.t12 * s.t12;
        v.max(0.0).sqrt()
    }
}
