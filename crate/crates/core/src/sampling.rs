//! Seeded random states and operators for sweeps and tests.

use nalgebra::{SMatrix, SVector, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::quantum::{DensityMatrix, Mat2, QubitState, TwoQubitState, C64};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(normal(rng), normal(rng))
}

/// Ginibre-distributed density matrix `G G† / Tr(G G†)`.
pub fn random_density<const N: usize, R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix<N> {
    let g = SMatrix::<C64, N, N>::from_fn(|_, _| complex_normal(rng));
    let m = g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::new_unchecked(m / tr)
}

/// Haar-random pure state.
pub fn random_pure<const N: usize, R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix<N> {
    let psi = SVector::<C64, N>::from_fn(|_, _| complex_normal(rng));
    DensityMatrix::from_pure(&psi)
}

pub fn random_two_qubit<R: Rng + ?Sized>(rng: &mut R) -> TwoQubitState {
    random_density::<4, R>(rng)
}

pub fn random_qubit<R: Rng + ?Sized>(rng: &mut R) -> QubitState {
    random_density::<2, R>(rng)
}

/// Random traceless 2×2 complex matrix with entries of scale `scale`.
pub fn random_traceless<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Mat2 {
    let mut m = Mat2::from_fn(|_, _| complex_normal(rng) * scale);
    let half_tr = m.trace() * 0.5;
    m[(0, 0)] -= half_tr;
    m[(1, 1)] -= half_tr;
    m
}

/// Uniform direction scaled to `radius`.
pub fn random_on_sphere<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| normal(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v * (radius / n);
        }
    }
}

/// Uniform point in the closed ball of `radius`.
pub fn random_in_ball<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Vector3<f64> {
    let u: f64 = rng.random();
    random_on_sphere(rng, radius * u.cbrt())
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    Uniform::new_inclusive(lo, hi).expect("valid range").sample(rng)
}
