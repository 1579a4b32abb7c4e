//! Coherence (Bloch-vector) representation of two-qubit states.
//!
//! The basis is `Λ₀ = I/2`, `Λ_i = ½σ_i⊗I`, `Λ_{3i+j} = ½σ_i⊗σ_j`,
//! `Λ_{12+j} = ½I⊗σ_j`. A state maps to `(1/2, vA, vAB, vB)` with
//! `vAB[3(i−1)+(j−1)]` the coefficient of `½σ_i⊗σ_j`.

use std::sync::OnceLock;

use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{hermitian_eigenvalues, paulis, tensor2, Mat2, Mat4, TwoQubitState, C64, EIGEN_TOL};

pub type Vector9 = SVector<f64, 9>;
pub type Vector16 = SVector<f64, 16>;

pub const C0: f64 = 0.5;
pub const VA: std::ops::Range<usize> = 1..4;
pub const VAB: std::ops::Range<usize> = 4..13;
pub const VB: std::ops::Range<usize> = 13..16;

/// Default tolerance on the Bloch-vector norm bounds.
pub const BOUND_TOL: f64 = 1e-10;
/// Default residual threshold below which a state counts as factorized.
pub const FACTORIZED_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoherenceError {
    #[error("c0 component must be exactly 1/2, got {0}")]
    Offset(f64),
    #[error("Bloch bound violated: {0}")]
    Bound(BoundViolation),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundKind {
    Full,
    ReducedA,
    ReducedB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub kind: BoundKind,
    /// Squared norm found.
    pub value: f64,
    /// Bound it exceeds (before tolerance).
    pub limit: f64,
}

impl std::fmt::Display for BoundViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} squared norm {} exceeds {}", self.kind, self.value, self.limit)
    }
}

/// Orthonormal Hermitian basis of the 4×4 matrices, `Λ₀` first.
#[derive(Debug, Clone)]
pub struct LambdaBasis {
    elements: [Mat4; 16],
}

impl LambdaBasis {
    fn build() -> Self {
        let s = paulis();
        let id = Mat2::identity();
        let half = C64::new(0.5, 0.0);
        let mut elements = [Mat4::zeros(); 16];
        elements[0] = Mat4::identity() * half;
        for i in 0..3 {
            elements[1 + i] = tensor2(&s[i], &id) * half;
            elements[13 + i] = tensor2(&id, &s[i]) * half;
            for j in 0..3 {
                elements[4 + 3 * i + j] = tensor2(&s[i], &s[j]) * half;
            }
        }
        Self { elements }
    }

    /// Shared instance.
    pub fn get() -> &'static LambdaBasis {
        static BASIS: OnceLock<LambdaBasis> = OnceLock::new();
        BASIS.get_or_init(Self::build)
    }

    pub fn elements(&self) -> &[Mat4; 16] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Mat4 {
        &self.elements[i]
    }

    /// Coordinates `Tr(M Λ_i)` of an arbitrary operator (real parts).
    pub fn coordinates(&self, m: &Mat4) -> Vector16 {
        // every Λ_i is Hermitian, so Tr(M Λ_i) = Σ_{kl} M_kl conj(Λ_i)_kl
        Vector16::from_fn(|i, _| {
            m.iter()
                .zip(self.elements[i].iter())
                .map(|(a, b)| (a * b.conj()).re)
                .sum()
        })
    }

    pub fn expand(&self, coords: &Vector16) -> Mat4 {
        self.elements
            .iter()
            .zip(coords.iter())
            .fold(Mat4::zeros(), |acc, (l, &x)| acc + l * C64::new(x, 0.0))
    }
}

/// `Φ(ρ)`: a 16-component real vector `(1/2, vA, vAB, vB)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    coords: Vector16,
}

impl BlochVector {
    /// Builds a vector and validates the norm bounds at [`BOUND_TOL`].
    pub fn new(va: Vector3<f64>, vab: Vector9, vb: Vector3<f64>) -> Result<Self, CoherenceError> {
        let v = Self::from_blocks(va, vab, vb);
        v.check_bounds(BOUND_TOL).map_err(CoherenceError::Bound)?;
        Ok(v)
    }

    /// Assembles blocks without bound checks.
    pub fn from_blocks(va: Vector3<f64>, vab: Vector9, vb: Vector3<f64>) -> Self {
        let mut coords = Vector16::zeros();
        coords[0] = C0;
        coords.fixed_rows_mut::<3>(VA.start).copy_from(&va);
        coords.fixed_rows_mut::<9>(VAB.start).copy_from(&vab);
        coords.fixed_rows_mut::<3>(VB.start).copy_from(&vb);
        Self { coords }
    }

    /// Accepts a full 16-vector; component 0 must be exactly 1/2. No bound check.
    pub fn from_coords(coords: Vector16) -> Result<Self, CoherenceError> {
        if coords[0] != C0 {
            return Err(CoherenceError::Offset(coords[0]));
        }
        Ok(Self { coords })
    }

    /// Overwrites component 0 with 1/2.
    pub(crate) fn from_coords_pinned(mut coords: Vector16) -> Self {
        coords[0] = C0;
        Self { coords }
    }

    pub fn maximally_mixed() -> Self {
        Self::from_blocks(Vector3::zeros(), Vector9::zeros(), Vector3::zeros())
    }

    pub fn coords(&self) -> &Vector16 {
        &self.coords
    }

    pub fn c0(&self) -> f64 {
        self.coords[0]
    }

    pub fn va(&self) -> Vector3<f64> {
        self.coords.fixed_rows::<3>(VA.start).into_owned()
    }

    pub fn vab(&self) -> Vector9 {
        self.coords.fixed_rows::<9>(VAB.start).into_owned()
    }

    pub fn vb(&self) -> Vector3<f64> {
        self.coords.fixed_rows::<3>(VB.start).into_owned()
    }

    /// `‖Φ(ρ)‖² = Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.coords.norm_squared()
    }

    /// `Tr ρ_A² = 1/2 + 2‖vA‖²`.
    pub fn reduced_purity_a(&self) -> f64 {
        0.5 + 2.0 * self.va().norm_squared()
    }

    /// `Tr ρ_B² = 1/2 + 2‖vB‖²`.
    pub fn reduced_purity_b(&self) -> f64 {
        0.5 + 2.0 * self.vb().norm_squared()
    }

    pub fn check_bounds(&self, tol: f64) -> Result<(), BoundViolation> {
        let checks = [
            (BoundKind::Full, self.purity(), 1.0),
            (BoundKind::ReducedA, self.va().norm_squared(), 0.25),
            (BoundKind::ReducedB, self.vb().norm_squared(), 0.25),
        ];
        for (kind, value, limit) in checks {
            if value > limit + tol {
                return Err(BoundViolation { kind, value, limit });
            }
        }
        Ok(())
    }

    /// Smallest eigenvalue of `Φ⁻¹(v)`.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&from_coherence(self))[0]
    }

    /// Norm bounds plus positive semidefiniteness of `Φ⁻¹(v)`, both at `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.check_bounds(tol).is_ok() && self.min_eigenvalue() >= -tol
    }
}

pub fn to_coherence(rho: &TwoQubitState) -> BlochVector {
    BlochVector::from_coords_pinned(LambdaBasis::get().coordinates(rho.matrix()))
}

/// `Σ v_i Λ_i`: Hermitian with unit trace, but not necessarily positive.
pub fn from_coherence(v: &BlochVector) -> Mat4 {
    LambdaBasis::get().expand(&v.coords)
}

/// `Φ⁻¹(v)` as a validated density matrix, if it is one.
pub fn to_density(v: &BlochVector) -> Option<TwoQubitState> {
    TwoQubitState::new(from_coherence(v)).ok()
}

/// Positivity predicate for a Bloch vector at the density-matrix tolerance.
pub fn is_density_vector(v: &BlochVector) -> bool {
    v.min_eigenvalue() >= -EIGEN_TOL
}

pub fn reduced_bloch_a(v: &BlochVector) -> Vector3<f64> {
    v.va()
}

pub fn reduced_bloch_b(v: &BlochVector) -> Vector3<f64> {
    v.vb()
}

/// `vA ⊗ vB` as a 9-vector, slot `3(i−1)+(j−1)`.
pub fn outer(va: &Vector3<f64>, vb: &Vector3<f64>) -> Vector9 {
    Vector9::from_fn(|k, _| va[k / 3] * vb[k % 3])
}

/// Embeds `(1/2, vA, 2 vA⊗vB, vB)`.
pub fn factorized(va: Vector3<f64>, vb: Vector3<f64>) -> BlochVector {
    BlochVector::from_blocks(va, outer(&va, &vb) * 2.0, vb)
}

/// `‖vAB − 2 vA⊗vB‖`.
pub fn factorization_residual(v: &BlochVector) -> f64 {
    (v.vab() - outer(&v.va(), &v.vb()) * 2.0).norm()
}

pub fn is_factorized(v: &BlochVector, threshold: f64) -> bool {
    factorization_residual(v) <= threshold
}
