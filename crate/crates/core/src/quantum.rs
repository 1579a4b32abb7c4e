//! Exact two-qubit linear algebra: Pauli matrices, Kronecker products, partial
//! traces, purity and the GKSL right-hand side in density-matrix space.
//!
//! Index convention: a 4×4 operator on `A ⊗ B` is indexed by `2a + b`, so the
//! A index varies slowest. This matches `tensor(m_a, m_b)`.

use nalgebra::{DMatrix, Matrix2, Matrix4, SMatrix};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

/// Tolerance for Hermiticity and unit trace of density matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted for a density matrix.
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("Pauli index must be 1, 2 or 3, got {0}")]
    PauliIndex(u8),
    #[error("matrix is not Hermitian (max |M - M^dagger| = {0:e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    Trace(f64),
    #[error("matrix has negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),
}

const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Index of a Pauli matrix, restricted to `{1, 2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliIndex(u8);

impl PauliIndex {
    pub const X: PauliIndex = PauliIndex(1);
    pub const Y: PauliIndex = PauliIndex(2);
    pub const Z: PauliIndex = PauliIndex(3);
    pub const ALL: [PauliIndex; 3] = [Self::X, Self::Y, Self::Z];

    pub fn new(value: u8) -> Result<Self, QuantumError> {
        match value {
            1..=3 => Ok(Self(value)),
            other => Err(QuantumError::PauliIndex(other)),
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based position, handy for array indexing.
    pub fn offset(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl TryFrom<u8> for PauliIndex {
    type Error = QuantumError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

pub fn pauli(i: PauliIndex) -> Mat2 {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    match i.0 {
        1 => Mat2::new(z, one, one, z),
        2 => Mat2::new(z, c(0.0, -1.0), c(0.0, 1.0), z),
        _ => Mat2::new(one, z, z, -one),
    }
}

/// The three Pauli matrices in order.
pub fn paulis() -> [Mat2; 3] {
    PauliIndex::ALL.map(pauli)
}

/// `σ₊ = σ₁ + iσ₂` (unnormalized, maps |1⟩ to 2|0⟩).
pub fn sigma_plus() -> Mat2 {
    pauli(PauliIndex::X) + pauli(PauliIndex::Y) * c(0.0, 1.0)
}

/// `σ₋ = σ₁ − iσ₂` (unnormalized, maps |0⟩ to 2|1⟩).
pub fn sigma_minus() -> Mat2 {
    pauli(PauliIndex::X) - pauli(PauliIndex::Y) * c(0.0, 1.0)
}

/// Kronecker product for dynamically sized operands.
pub fn tensor(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Kronecker product of two single-qubit operators.
pub fn tensor2(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = Mat4::zeros();
    for (i, j) in (0..2).flat_map(|i| (0..2).map(move |j| (i, j))) {
        let aij = a[(i, j)];
        for (k, l) in (0..2).flat_map(|k| (0..2).map(move |l| (k, l))) {
            out[(2 * i + k, 2 * j + l)] = aij * b[(k, l)];
        }
    }
    out
}

/// `Tr_A M` for any 4×4 operator.
pub fn trace_out_a(m: &Mat4) -> Mat2 {
    Mat2::from_fn(|b, bp| m[(b, bp)] + m[(2 + b, 2 + bp)])
}

/// `Tr_B M` for any 4×4 operator.
pub fn trace_out_b(m: &Mat4) -> Mat2 {
    Mat2::from_fn(|a, ap| m[(2 * a, 2 * ap)] + m[(2 * a + 1, 2 * ap + 1)])
}

pub fn commutator<const N: usize>(
    a: &SMatrix<C64, N, N>,
    b: &SMatrix<C64, N, N>,
) -> SMatrix<C64, N, N> {
    a * b - b * a
}

/// Largest entry of `|M − M†|`.
pub fn hermiticity_defect<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the Hermitian part is used.
pub fn hermitian_eigenvalues<const N: usize>(m: &SMatrix<C64, N, N>) -> Vec<f64> {
    let h = DMatrix::from_fn(N, N, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// A validated density matrix on `N` levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<const N: usize> {
    matrix: SMatrix<C64, N, N>,
}

pub type TwoQubitState = DensityMatrix<4>;
pub type QubitState = DensityMatrix<2>;

impl<const N: usize> DensityMatrix<N> {
    /// Validates Hermiticity, unit trace and positive semidefiniteness.
    pub fn new(matrix: SMatrix<C64, N, N>) -> Result<Self, QuantumError> {
        check_density(&matrix)?;
        Ok(Self { matrix })
    }

    /// Wraps a matrix without checks. Callers guarantee validity, e.g. for a
    /// partial trace of a valid state.
    pub fn new_unchecked(matrix: SMatrix<C64, N, N>) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            matrix: SMatrix::<C64, N, N>::identity() * c(1.0 / N as f64, 0.0),
        }
    }

    /// Rank-one projector onto a basis state.
    pub fn basis_projector(index: usize) -> Self {
        let mut matrix = SMatrix::<C64, N, N>::zeros();
        matrix[(index, index)] = c(1.0, 0.0);
        Self { matrix }
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn from_pure(psi: &nalgebra::SVector<C64, N>) -> Self {
        let norm2 = psi.norm_squared();
        Self {
            matrix: psi * psi.adjoint() / c(norm2, 0.0),
        }
    }

    pub fn matrix(&self) -> &SMatrix<C64, N, N> {
        &self.matrix
    }

    pub fn into_matrix(self) -> SMatrix<C64, N, N> {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }
}

impl DensityMatrix<2> {
    /// `ρ ⊗ σ` as a two-qubit state.
    pub fn tensor(&self, other: &DensityMatrix<2>) -> TwoQubitState {
        DensityMatrix::new_unchecked(tensor2(&self.matrix, &other.matrix))
    }

    /// Single-qubit state with Bloch vector `r` (|r| ≤ 1): `(I + r·σ)/2`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self, QuantumError> {
        let s = paulis();
        let m = (Mat2::identity() + s[0] * c(r[0], 0.0) + s[1] * c(r[1], 0.0) + s[2] * c(r[2], 0.0))
            * c(0.5, 0.0);
        Self::new(m)
    }
}

fn check_density<const N: usize>(m: &SMatrix<C64, N, N>) -> Result<(), QuantumError> {
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(QuantumError::NotHermitian(defect));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
        return Err(QuantumError::Trace(tr.re));
    }
    let min = hermitian_eigenvalues(m)[0];
    if min < -EIGEN_TOL {
        return Err(QuantumError::NegativeEigenvalue(min));
    }
    Ok(())
}

/// True when `m` passes every density-matrix check.
pub fn is_density_matrix<const N: usize>(m: &SMatrix<C64, N, N>) -> bool {
    check_density(m).is_ok()
}

/// Reduced state of B: `Tr_A ρ`.
pub fn partial_trace_a(rho: &TwoQubitState) -> QubitState {
    DensityMatrix::new_unchecked(trace_out_a(&rho.matrix))
}

/// Reduced state of A: `Tr_B ρ`.
pub fn partial_trace_b(rho: &TwoQubitState) -> QubitState {
    DensityMatrix::new_unchecked(trace_out_b(&rho.matrix))
}

/// `Tr ρ²`.
pub fn purity<const N: usize>(rho: &DensityMatrix<N>) -> f64 {
    // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
    rho.matrix.iter().map(|z| z.norm_sqr()).sum()
}

/// `−i[H,ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
///
/// `rho` need not be a density matrix: the map is linear and is also applied to
/// basis operators when building generators.
pub fn gksl_rhs<const N: usize>(
    rho: &SMatrix<C64, N, N>,
    hamiltonian: &SMatrix<C64, N, N>,
    jumps: &[SMatrix<C64, N, N>],
) -> Result<SMatrix<C64, N, N>, QuantumError> {
    let defect = hermiticity_defect(hamiltonian);
    if defect > HERMITIAN_TOL {
        return Err(QuantumError::NotHermitian(defect));
    }
    Ok(gksl_rhs_unchecked(rho, hamiltonian, jumps))
}

pub(crate) fn gksl_rhs_unchecked<const N: usize>(
    rho: &SMatrix<C64, N, N>,
    hamiltonian: &SMatrix<C64, N, N>,
    jumps: &[SMatrix<C64, N, N>],
) -> SMatrix<C64, N, N> {
    let mut out = commutator(hamiltonian, rho) * c(0.0, -1.0);
    for l in jumps {
        let ld = l.adjoint();
        let ldl = ld * l;
        out += l * rho * ld - (ldl * rho + rho * ldl) * c(0.5, 0.0);
    }
    out
}
