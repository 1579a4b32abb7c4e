//! The 16×16 affine generator of the coherence-vector dynamics, built two ways:
//! from closed-form blocks, and by projecting the GKSL map onto the Λ basis.
//!
//! Coordinates are ordered `(c0, vA, vAB, vB)`. Block layout:
//!
//! ```text
//!        c0     vA           vAB                          vB
//! c0  [  0      0            0                            0          ]
//! vA  [  v0     hA + d       H_It                         0          ]
//! vAB [  0      H_Il         hA⊗I + I⊗hB + d⊗I            H_Ir + v0⊗I ]
//! vB  [  0      0            H_Ib                         hB         ]
//! ```

use nalgebra::{Matrix3, SMatrix, Vector3};
use thiserror::Error;

use crate::coherence::{LambdaBasis, Vector16, VA, VAB, VB};
use crate::quantum::{self, gksl_rhs_unchecked, hermiticity_defect, paulis, tensor2, Mat2, Mat4, PauliIndex, C64};

pub type Matrix3x9 = SMatrix<f64, 3, 9>;
pub type Matrix9x3 = SMatrix<f64, 9, 3>;
pub type Matrix9 = SMatrix<f64, 9, 9>;
pub type Matrix16 = SMatrix<f64, 16, 16>;

/// Tolerance for Hermitian/traceless checks on model operators.
pub const MODEL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what} is not Hermitian (defect {defect:e})")]
    NotHermitian { what: String, defect: f64 },
    #[error("{what} is not traceless (|Tr| = {trace:e})")]
    NotTraceless { what: String, trace: f64 },
    #[error("non-finite parameter: {0}")]
    NonFinite(String),
}

/// `T_j`: the matrix of `−i[σ_j/2, ·]` on the basis `σ/√2`.
pub fn t_matrices() -> [Matrix3<f64>; 3] {
    [
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
        Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0),
        Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    ]
}

/// `Σ α_j T_j`, i.e. the cross-product matrix of `α`.
pub fn rotation_generator(alpha: &Vector3<f64>) -> Matrix3<f64> {
    alpha.cross_matrix()
}

/// Coefficients `α_j = Tr(h σ_j)` of a traceless Hermitian `h = Σ (α_j/2) σ_j`.
pub fn pauli_coefficients(h: &Mat2, what: &str) -> Result<Vector3<f64>, ModelError> {
    let defect = hermiticity_defect(h);
    if defect > MODEL_TOL {
        return Err(ModelError::NotHermitian { what: what.to_owned(), defect });
    }
    let trace = h.trace().norm();
    if trace > MODEL_TOL {
        return Err(ModelError::NotTraceless { what: what.to_owned(), trace });
    }
    let s = paulis();
    Ok(Vector3::from_fn(|j, _| (h * s[j]).trace().re))
}

/// Two-qubit model: controls and dissipation act on A only.
///
/// `H(u) = (ω_a σ₃ + Σ u_i H_{A_i}) ⊗ I + ½ Σ λ_ij σ_i⊗σ_j + I ⊗ ω_b σ₃`, with
/// jump operators `ℓ_k ⊗ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitModel {
    pub omega_a: f64,
    pub omega_b: f64,
    pub control_hams: [Mat2; 3],
    pub lambda: Matrix3<f64>,
    pub jumps: Vec<Mat2>,
}

impl TwoQubitModel {
    /// Closed model with default controls `H_{A_i} = σ_i`.
    pub fn new(omega_a: f64, omega_b: f64, lambda: Matrix3<f64>) -> Self {
        Self {
            omega_a,
            omega_b,
            control_hams: paulis(),
            lambda,
            jumps: Vec::new(),
        }
    }

    pub fn with_jumps(mut self, jumps: Vec<Mat2>) -> Self {
        self.jumps = jumps;
        self
    }

    pub fn with_controls(mut self, controls: [Mat2; 3]) -> Self {
        self.control_hams = controls;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = [self.omega_a, self.omega_b].iter().chain(self.lambda.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(ModelError::NonFinite("omega/lambda".into()));
        }
        for (i, h) in self.control_hams.iter().enumerate() {
            pauli_coefficients(h, &format!("control Hamiltonian {}", i + 1))?;
        }
        for (k, l) in self.jumps.iter().enumerate() {
            if l.iter().any(|z| !z.is_finite()) {
                return Err(ModelError::NonFinite(format!("jump {}", k + 1)));
            }
            let trace = l.trace().norm();
            if trace > MODEL_TOL {
                return Err(ModelError::NotTraceless { what: format!("jump {}", k + 1), trace });
            }
        }
        Ok(())
    }

    /// Local Hamiltonian on A for control `u`.
    pub fn hamiltonian_a(&self, u: &[f64; 3]) -> Mat2 {
        let mut h = quantum::pauli(PauliIndex::Z) * C64::new(self.omega_a, 0.0);
        for (ui, hi) in u.iter().zip(&self.control_hams) {
            h += hi * C64::new(*ui, 0.0);
        }
        h
    }

    pub fn hamiltonian_b(&self) -> Mat2 {
        quantum::pauli(PauliIndex::Z) * C64::new(self.omega_b, 0.0)
    }

    pub fn interaction(&self) -> Mat4 {
        let s = paulis();
        let mut h = Mat4::zeros();
        for i in 0..3 {
            for j in 0..3 {
                h += tensor2(&s[i], &s[j]) * C64::new(0.5 * self.lambda[(i, j)], 0.0);
            }
        }
        h
    }

    /// Full Hamiltonian `H(u)` on `A ⊗ B`.
    pub fn hamiltonian(&self, u: &[f64; 3]) -> Mat4 {
        let id = Mat2::identity();
        tensor2(&self.hamiltonian_a(u), &id) + self.interaction() + tensor2(&id, &self.hamiltonian_b())
    }

    /// `ℓ_k ⊗ I`.
    pub fn full_jumps(&self) -> Vec<Mat4> {
        self.jumps.iter().map(|l| tensor2(l, &Mat2::identity())).collect()
    }

    /// `α` vectors of the three control Hamiltonians.
    pub fn control_coefficients(&self) -> Result<[Vector3<f64>; 3], ModelError> {
        let mut out = [Vector3::zeros(); 3];
        for (i, h) in self.control_hams.iter().enumerate() {
            out[i] = pauli_coefficients(h, &format!("control Hamiltonian {}", i + 1))?;
        }
        Ok(out)
    }
}

/// Closed-form blocks of the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorBlocks {
    pub h_a: Matrix3<f64>,
    pub h_b: Matrix3<f64>,
    pub h_it: Matrix3x9,
    pub h_il: Matrix9x3,
    pub h_ir: Matrix9x3,
    pub h_ib: Matrix3x9,
    pub d_hat: Matrix3<f64>,
    pub v0: Vector3<f64>,
}

impl GeneratorBlocks {
    pub fn zeros() -> Self {
        Self {
            h_a: Matrix3::zeros(),
            h_b: Matrix3::zeros(),
            h_it: Matrix3x9::zeros(),
            h_il: Matrix9x3::zeros(),
            h_ir: Matrix9x3::zeros(),
            h_ib: Matrix3x9::zeros(),
            d_hat: Matrix3::zeros(),
            v0: Vector3::zeros(),
        }
    }
}

/// `Σ_j T_j ⊗ (λ_j1, λ_j2, λ_j3)`.
pub fn interaction_top(lambda: &Matrix3<f64>) -> Matrix3x9 {
    let t = t_matrices();
    Matrix3x9::from_fn(|a, col| {
        let (b, c) = (col / 3, col % 3);
        (0..3).map(|j| t[j][(a, b)] * lambda[(j, c)]).sum()
    })
}

/// `Σ_j (λ_1j, λ_2j, λ_3j) ⊗ T_j`.
pub fn interaction_bottom(lambda: &Matrix3<f64>) -> Matrix3x9 {
    let t = t_matrices();
    Matrix3x9::from_fn(|a, col| {
        let (k, c) = (col / 3, col % 3);
        (0..3).map(|j| lambda[(k, j)] * t[j][(a, c)]).sum()
    })
}

/// Matrix `d̂` and affine vector `v0` of the one-qubit dissipator
/// `Σ_k ℓ_k ρ ℓ_k† − ½{ℓ_k†ℓ_k, ρ}` in the basis `σ/√2`.
///
/// `d̂_ki = ½ Tr(σ_k D(σ_i))`, `v0_k = ½ Tr(σ_k D(I))`.
pub fn one_qubit_dissipator(jumps: &[Mat2]) -> (Matrix3<f64>, Vector3<f64>) {
    let s = paulis();
    let zero = Mat2::zeros();
    let project = |m: &Mat2| Vector3::from_fn(|k, _| 0.5 * (s[k] * m).trace().re);
    let mut d_hat = Matrix3::zeros();
    for (i, sigma) in s.iter().enumerate() {
        let image = gksl_rhs_unchecked(sigma, &zero, jumps);
        d_hat.set_column(i, &project(&image));
    }
    let v0 = project(&gksl_rhs_unchecked(&Mat2::identity(), &zero, jumps));
    (d_hat, v0)
}

/// Closed-form blocks for `model` at control `u`.
pub fn assemble_blocks(model: &TwoQubitModel, u: &[f64; 3]) -> Result<GeneratorBlocks, ModelError> {
    model.validate()?;
    let alpha = pauli_coefficients(&model.hamiltonian_a(u), "H_A(u)")?;
    let beta = pauli_coefficients(&model.hamiltonian_b(), "H_B")?;
    let h_it = interaction_top(&model.lambda);
    let h_ib = interaction_bottom(&model.lambda);
    let (d_hat, v0) = one_qubit_dissipator(&model.jumps);
    Ok(GeneratorBlocks {
        h_a: rotation_generator(&alpha),
        h_b: rotation_generator(&beta),
        h_it,
        h_il: -h_it.transpose(),
        h_ir: -h_ib.transpose(),
        h_ib,
        d_hat,
        v0,
    })
}

/// `A ⊗ I₃`.
fn kron_left_identity(a: &Matrix3<f64>) -> Matrix9 {
    Matrix9::from_fn(|r, c| if r % 3 == c % 3 { a[(r / 3, c / 3)] } else { 0.0 })
}

/// `I₃ ⊗ B`.
fn kron_right_identity(b: &Matrix3<f64>) -> Matrix9 {
    Matrix9::from_fn(|r, c| if r / 3 == c / 3 { b[(r % 3, c % 3)] } else { 0.0 })
}

/// The affine generator acting on `(c0, vA, vAB, vB)`. Row 0 is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator16 {
    matrix: Matrix16,
}

impl Generator16 {
    pub fn from_matrix(matrix: Matrix16) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Matrix16 {
        &self.matrix
    }

    pub fn apply(&self, v: &Vector16) -> Vector16 {
        self.matrix * v
    }

    /// Largest entry of `|self − other|`.
    pub fn max_abs_diff(&self, other: &Generator16) -> f64 {
        (self.matrix - other.matrix).amax()
    }

    pub fn block<const R: usize, const C: usize>(&self, row: usize, col: usize) -> SMatrix<f64, R, C> {
        self.matrix.fixed_view::<R, C>(row, col).into_owned()
    }
}

pub fn assemble_generator(blocks: &GeneratorBlocks) -> Generator16 {
    let mut g = Matrix16::zeros();
    g.fixed_view_mut::<3, 1>(VA.start, 0).copy_from(&blocks.v0);
    g.fixed_view_mut::<3, 3>(VA.start, VA.start).copy_from(&(blocks.h_a + blocks.d_hat));
    g.fixed_view_mut::<3, 9>(VA.start, VAB.start).copy_from(&blocks.h_it);
    g.fixed_view_mut::<9, 3>(VAB.start, VA.start).copy_from(&blocks.h_il);
    let middle = kron_left_identity(&(blocks.h_a + blocks.d_hat)) + kron_right_identity(&blocks.h_b);
    g.fixed_view_mut::<9, 9>(VAB.start, VAB.start).copy_from(&middle);
    let v0_block = Matrix9x3::from_fn(|r, c| if r % 3 == c { blocks.v0[r / 3] } else { 0.0 });
    g.fixed_view_mut::<9, 3>(VAB.start, VB.start).copy_from(&(blocks.h_ir + v0_block));
    g.fixed_view_mut::<3, 9>(VB.start, VAB.start).copy_from(&blocks.h_ib);
    g.fixed_view_mut::<3, 3>(VB.start, VB.start).copy_from(&blocks.h_b);
    Generator16 { matrix: g }
}

/// Column `j` holds the coordinates of the GKSL map applied to `Λ_j`.
pub fn numeric_generator(model: &TwoQubitModel, u: &[f64; 3]) -> Result<Generator16, ModelError> {
    model.validate()?;
    let h = model.hamiltonian(u);
    let jumps = model.full_jumps();
    let basis = LambdaBasis::get();
    let mut g = Matrix16::zeros();
    for (j, lambda) in basis.elements().iter().enumerate() {
        let image = gksl_rhs_unchecked(lambda, &h, &jumps);
        g.set_column(j, &basis.coordinates(&image));
    }
    Ok(Generator16 { matrix: g })
}

/// `assemble_generator(assemble_blocks(model, u))`.
pub fn analytic_generator(model: &TwoQubitModel, u: &[f64; 3]) -> Result<Generator16, ModelError> {
    assemble_blocks(model, u).map(|b| assemble_generator(&b))
}

/// Drift generator plus the control directions, for fast repeated evaluation
/// of `(G₀ + Σ u_j G_j) v`.
///
/// Each `G_j` only rotates A: it acts as `α⁽ʲ⁾ ×` on `vA` and on every column
/// of `vAB` viewed as a 3×3 matrix.
#[derive(Debug, Clone)]
pub struct BilinearSystem {
    drift: Generator16,
    control_alpha: [Vector3<f64>; 3],
}

impl BilinearSystem {
    pub fn new(model: &TwoQubitModel) -> Result<Self, ModelError> {
        Ok(Self {
            drift: analytic_generator(model, &[0.0; 3])?,
            control_alpha: model.control_coefficients()?,
        })
    }

    pub fn drift(&self) -> &Generator16 {
        &self.drift
    }

    /// Net local rotation vector contributed by `u`.
    pub fn control_rotation(&self, u: &[f64; 3]) -> Vector3<f64> {
        self.control_alpha
            .iter()
            .zip(u)
            .fold(Vector3::zeros(), |acc, (a, ui)| acc + a * *ui)
    }

    pub fn rate(&self, u: &[f64; 3], v: &Vector16) -> Vector16 {
        let mut dv = self.drift.apply(v);
        let alpha = self.control_rotation(u);
        if alpha.iter().any(|x| *x != 0.0) {
            let va = v.fixed_rows::<3>(VA.start);
            let dva = alpha.cross(&va);
            for k in 0..3 {
                dv[VA.start + k] += dva[k];
            }
            for j in 0..3 {
                let col = Vector3::new(v[VAB.start + j], v[VAB.start + 3 + j], v[VAB.start + 6 + j]);
                let rot = alpha.cross(&col);
                for i in 0..3 {
                    dv[VAB.start + 3 * i + j] += rot[i];
                }
            }
        }
        dv[0] = 0.0;
        dv
    }

    /// Full generator matrix at `u`.
    pub fn generator(&self, u: &[f64; 3]) -> Generator16 {
        let k = rotation_generator(&self.control_rotation(u));
        let mut g = self.drift.matrix;
        let mut va = g.fixed_view_mut::<3, 3>(VA.start, VA.start);
        va += k;
        let mut vab = g.fixed_view_mut::<9, 9>(VAB.start, VAB.start);
        vab += kron_left_identity(&k);
        Generator16 { matrix: g }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{commutator, sigma_minus};
    use crate::sampling::{random_traceless, uniform};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut ChaCha8Rng) -> TwoQubitModel {
        let lambda = Matrix3::from_fn(|_, _| uniform(rng, -2.0, 2.0));
        let jumps = (0..3).map(|_| random_traceless(rng, 0.7)).collect();
        TwoQubitModel::new(uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0), lambda).with_jumps(jumps)
    }

    #[test]
    fn t_matrix_algebra() {
        let t = t_matrices();
        assert_eq!(t[0], Matrix3::new(0., 0., 0., 0., 0., -1., 0., 1., 0.));
        for m in &t {
            assert_eq!(m.transpose(), -m);
        }
        assert_eq!(t[0] * t[1] - t[1] * t[0], t[2]);
        assert_eq!(t[1] * t[2] - t[2] * t[1], t[0]);
        assert_eq!(t[2] * t[0] - t[0] * t[2], t[1]);
    }

    #[test]
    fn t_matrices_represent_commutators() {
        // matrix of X ↦ −i[σ_j/2, X] on the orthonormal basis σ_k/√2
        let s = paulis();
        let t = t_matrices();
        for j in 0..3 {
            let half = s[j] * C64::new(0.5, 0.0);
            let m = Matrix3::from_fn(|k, i| {
                let image = commutator(&half, &s[i]) * C64::new(0.0, -1.0);
                0.5 * (s[k] * image).trace().re
            });
            assert!((m - t[j]).amax() < 1e-14);
        }
    }

    #[test]
    fn closed_system_blocks() {
        let model = TwoQubitModel::new(0.0, 0.0, Matrix3::zeros());
        let b = assemble_blocks(&model, &[0.0; 3]).unwrap();
        assert_eq!(b, GeneratorBlocks::zeros());
        assert_eq!(assemble_generator(&b).matrix(), &Matrix16::zeros());
    }

    #[test]
    fn dispersive_top_block_pattern() {
        let g = 0.8;
        let mut lambda = Matrix3::zeros();
        lambda[(2, 2)] = g;
        let b = assemble_blocks(&TwoQubitModel::new(0.3, -0.4, lambda), &[0.0; 3]).unwrap();
        let t3 = t_matrices()[2];
        let expected = Matrix3x9::from_fn(|a, col| if col % 3 == 2 { g * t3[(a, col / 3)] } else { 0.0 });
        assert_eq!(b.h_it, expected);
        assert_eq!(b.h_it.iter().filter(|x| **x != 0.0).count(), 2);
    }

    #[test]
    fn amplitude_damping_dissipator() {
        let (d, v0) = one_qubit_dissipator(&[sigma_minus()]);
        assert!((d - Matrix3::from_diagonal(&Vector3::new(-2.0, -2.0, -4.0))).amax() < 1e-14);
        assert!((v0 - Vector3::new(0.0, 0.0, -4.0)).amax() < 1e-14);
        // vA₃ = −1/2 is the fixed pole: v0₃/2 + vA₃ d₃₃ = 0
        assert!((v0[2] / 2.0 - 0.5 * d[(2, 2)]).abs() < 1e-14);
    }

    #[test]
    fn analytic_matches_numeric() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..40 {
            let model = random_model(&mut rng);
            let u = [uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0)];
            let a = analytic_generator(&model, &u).unwrap();
            let n = numeric_generator(&model, &u).unwrap();
            assert!(a.max_abs_diff(&n) < 1e-11, "{}", a.max_abs_diff(&n));
            assert!(n.matrix().row(0).amax() < 1e-13);
        }
    }

    #[test]
    fn closed_generator_is_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = random_model(&mut rng).with_jumps(vec![]);
        let g = numeric_generator(&model, &[0.3, -1.1, 0.7]).unwrap();
        let inner = g.block::<15, 15>(1, 1);
        assert!((inner + inner.transpose()).amax() < 1e-12);
    }

    #[test]
    fn sigma3_hamiltonian_only_rotates_a() {
        let model = TwoQubitModel::new(0.5, 0.0, Matrix3::zeros());
        let g = numeric_generator(&model, &[0.0; 3]).unwrap();
        let t3 = t_matrices()[2];
        let mut expected = Matrix16::zeros();
        expected.fixed_view_mut::<3, 3>(1, 1).copy_from(&t3);
        expected.fixed_view_mut::<9, 9>(4, 4).copy_from(&kron_left_identity(&t3));
        assert!((g.matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn controls_enter_linearly_and_only_touch_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = random_model(&mut rng);
        let u1 = [0.4, -0.2, 1.0];
        let u2 = [-1.3, 0.6, 0.1];
        let b1 = assemble_blocks(&model, &u1).unwrap();
        let b2 = assemble_blocks(&model, &u2).unwrap();
        assert_eq!(b1.h_b, b2.h_b);
        assert_eq!(b1.h_it, b2.h_it);
        assert_eq!(b1.h_ib, b2.h_ib);
        assert_eq!(b1.d_hat, b2.d_hat);
        assert_eq!(b1.v0, b2.v0);

        // G(u1) − G(u2) = Σ (u1 − u2)_j G_j with G_j taken from a model without drift or noise
        let bare = TwoQubitModel::new(0.0, 0.0, Matrix3::zeros());
        let diff = numeric_generator(&model, &u1).unwrap().matrix() - numeric_generator(&model, &u2).unwrap().matrix();
        let du = [u1[0] - u2[0], u1[1] - u2[1], u1[2] - u2[2]];
        let direct = numeric_generator(&bare, &du).unwrap();
        assert!((diff - direct.matrix()).amax() < 1e-12);
    }

    #[test]
    fn bilinear_system_matches_full_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = random_model(&mut rng);
        model.control_hams = [0, 1, 2].map(|_| {
            let m = random_traceless(&mut rng, 1.0);
            (m + m.adjoint()) * C64::new(0.5, 0.0)
        });
        let sys = BilinearSystem::new(&model).unwrap();
        let u = [0.7, -0.3, 1.2];
        let full = numeric_generator(&model, &u).unwrap();
        assert!(sys.generator(&u).max_abs_diff(&full) < 1e-12);
        let v = Vector16::from_fn(|i, _| if i == 0 { 0.5 } else { uniform(&mut rng, -0.2, 0.2) });
        assert!((sys.rate(&u, &v) - full.apply(&v)).amax() < 1e-12);
    }

    #[test]
    fn model_validation() {
        let mut m = TwoQubitModel::new(1.0, 1.0, Matrix3::zeros());
        m.control_hams[0] = Mat2::identity();
        assert!(matches!(m.validate(), Err(ModelError::NotTraceless { .. })));
        let mut m = TwoQubitModel::new(1.0, 1.0, Matrix3::zeros());
        m.control_hams[1] = sigma_minus();
        assert!(matches!(m.validate(), Err(ModelError::NotHermitian { .. })));
        let m = TwoQubitModel::new(1.0, 1.0, Matrix3::zeros()).with_jumps(vec![Mat2::identity()]);
        assert!(matches!(m.validate(), Err(ModelError::NotTraceless { .. })));
        let m = TwoQubitModel::new(f64::NAN, 1.0, Matrix3::zeros());
        assert!(matches!(m.validate(), Err(ModelError::NonFinite(_))));
    }
}
