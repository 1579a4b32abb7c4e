//! Conditions for keeping the reduced state of B pure.
//!
//! On states whose B-reduction is pure the coherence vector factorizes as
//! `(1/2, vA, 2 vA⊗vB, vB)` with `‖vB‖ = 1/2`. Staying on that set requires the
//! first-order obstruction
//!
//! ```text
//! w = d/dt vAB − 2 (d/dt vA ⊗ vB + vA ⊗ d/dt vB)
//! ```
//!
//! to vanish. Everything here is evaluated through the assembled generator;
//! the closed forms in [`closed_form_w`] and [`reduced_b_generator`] serve as
//! independent cross-checks.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coherence::{factorized, BlochVector, Vector9, BOUND_TOL, VA, VAB, VB};
use crate::dynamics::{ControlLaw, DynamicsError, IntegrateOptions, Simulator};
use crate::generator::{analytic_generator, one_qubit_dissipator, t_matrices, Generator16, ModelError, TwoQubitModel};
use crate::quantum::Mat2;
use crate::sampling::{random_in_ball, random_on_sphere};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("not a factorized state: {0}")]
    NotFactorized(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("model coupling is not {0}")]
    WrongCoupling(CouplingKind),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(
        "dissipation incompatible with vA3 = {target}: v0_3/2 + vA3*d33 = {residual:e} (must vanish)"
    )]
    Incompatible { target: f64, residual: f64 },
    #[error("control Hamiltonians 1 and 2 do not span the sigma1/sigma2 rotations")]
    DegenerateControls,
    #[error("unknown coupling tag {0:?} (expected dispersive, resonant or sigma3-sigma1)")]
    UnknownTag(String),
}

/// A state `(1/2, vA, 2 vA⊗vB, vB)` with pure B-reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizedState {
    va: Vector3<f64>,
    vb: Vector3<f64>,
}

impl FactorizedState {
    pub fn new(va: Vector3<f64>, vb: Vector3<f64>) -> Result<Self, AnalysisError> {
        if va.norm_squared() > 0.25 + BOUND_TOL {
            return Err(AnalysisError::NotFactorized(format!("|vA|^2 = {} > 1/4", va.norm_squared())));
        }
        if (vb.norm_squared() - 0.25).abs() > BOUND_TOL {
            return Err(AnalysisError::NotFactorized(format!("|vB|^2 = {} != 1/4", vb.norm_squared())));
        }
        Ok(Self { va, vb })
    }

    pub fn va(&self) -> Vector3<f64> {
        self.va
    }

    pub fn vb(&self) -> Vector3<f64> {
        self.vb
    }

    pub fn embed(&self) -> BlochVector {
        factorized(self.va, self.vb)
    }

    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            va: random_in_ball(rng, 0.5),
            vb: random_on_sphere(rng, 0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CouplingKind {
    #[serde(rename = "dispersive")]
    Dispersive,
    #[serde(rename = "resonant")]
    Resonant,
    #[serde(rename = "sigma3-sigma1")]
    Sigma3Sigma1,
}

impl CouplingKind {
    pub const ALL: [CouplingKind; 3] = [Self::Dispersive, Self::Resonant, Self::Sigma3Sigma1];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Dispersive => "dispersive",
            Self::Resonant => "resonant",
            Self::Sigma3Sigma1 => "sigma3-sigma1",
        }
    }
}

impl fmt::Display for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CouplingKind {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| AnalysisError::UnknownTag(s.to_owned()))
    }
}

/// One of the three named interactions, with strength `g`
/// (`H_I = ½ Σ λ_ij σ_i⊗σ_j`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingCase {
    pub kind: CouplingKind,
    pub g: f64,
}

impl CouplingCase {
    pub fn new(kind: CouplingKind, g: f64) -> Self {
        Self { kind, g }
    }

    /// dispersive: `λ₃₃ = g`; resonant: `λ₁₁ = λ₂₂ = g`; σ₃⊗σ₁: `λ₃₁ = g`.
    pub fn lambda(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        match self.kind {
            CouplingKind::Dispersive => m[(2, 2)] = self.g,
            CouplingKind::Resonant => {
                m[(0, 0)] = self.g;
                m[(1, 1)] = self.g;
            }
            CouplingKind::Sigma3Sigma1 => m[(2, 0)] = self.g,
        }
        m
    }

    pub fn model(&self, omega_a: f64, omega_b: f64, jumps: Vec<Mat2>) -> TwoQubitModel {
        TwoQubitModel::new(omega_a, omega_b, self.lambda()).with_jumps(jumps)
    }

    /// Recognizes the coupling of `model`, if it is one of the named cases.
    pub fn detect(model: &TwoQubitModel) -> Option<Self> {
        let l = &model.lambda;
        let candidates = [
            (CouplingKind::Dispersive, l[(2, 2)]),
            (CouplingKind::Resonant, l[(0, 0)]),
            (CouplingKind::Sigma3Sigma1, l[(2, 0)]),
        ];
        candidates.into_iter().find_map(|(kind, g)| {
            let case = CouplingCase::new(kind, g);
            (g != 0.0 && (case.lambda() - l).amax() == 0.0).then_some(case)
        })
    }
}

fn require_coupling(model: &TwoQubitModel, kind: CouplingKind) -> Result<CouplingCase, AnalysisError> {
    CouplingCase::detect(model)
        .filter(|c| c.kind == kind)
        .ok_or(AnalysisError::WrongCoupling(kind))
}

/// First-order obstruction `w ∈ ℝ⁹`, same slot order as `vAB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WVector(pub [f64; 9]);

impl WVector {
    pub fn from_vector(v: &Vector9) -> Self {
        let mut out = [0.0; 9];
        out.copy_from_slice(v.as_slice());
        Self(out)
    }

    pub fn as_vector(&self) -> Vector9 {
        Vector9::from_column_slice(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn max_abs_diff(&self, other: &WVector) -> f64 {
        (self.as_vector() - other.as_vector()).amax()
    }
}

/// `w` from a full generator evaluated at the embedded state.
pub fn w_from_generator(gen: &Generator16, s: &FactorizedState) -> WVector {
    let rate = gen.apply(s.embed().coords());
    let d_va = rate.fixed_rows::<3>(VA.start).into_owned();
    let d_vab = rate.fixed_rows::<9>(VAB.start).into_owned();
    let d_vb = rate.fixed_rows::<3>(VB.start).into_owned();
    let w = Vector9::from_fn(|k, _| {
        let (i, j) = (k / 3, k % 3);
        d_vab[k] - 2.0 * (d_va[i] * s.vb[j] + s.va[i] * d_vb[j])
    });
    WVector::from_vector(&w)
}

pub fn compute_w(model: &TwoQubitModel, s: &FactorizedState, u: &[f64; 3]) -> Result<WVector, AnalysisError> {
    Ok(w_from_generator(&analytic_generator(model, u)?, s))
}

/// Closed-form `w`. Slots without a closed form are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormW {
    pub components: [Option<f64>; 9],
}

impl ClosedFormW {
    /// Largest deviation from `computed` over the covered slots.
    pub fn residual(&self, computed: &WVector) -> f64 {
        self.components
            .iter()
            .zip(computed.0)
            .filter_map(|(c, w)| c.map(|c| (c - w).abs()))
            .fold(0.0, f64::max)
    }

    pub fn covered(&self) -> impl Iterator<Item = usize> + '_ {
        (0..9).filter(|k| self.components[*k].is_some())
    }
}

/// Closed forms of `w` on factorized states.
///
/// Dispersive: only slots 3 (`σ₁⊗σ₃`) and 7 (`σ₃⊗σ₁`), 1-based:
/// `w₃ = −g vA₂ (1 − 4 vB₃²)`, `w₇ = −g vB₂ (1 − 4 vA₃²)`. The other slots,
/// e.g. `w₁ = 4g (vA₁vA₃vB₂ + vA₂vB₁vB₃)`, do not vanish in general.
///
/// Resonant: all nine slots. σ₃⊗σ₁ has no closed form here.
pub fn closed_form_w(case: &CouplingCase, s: &FactorizedState) -> Result<ClosedFormW, AnalysisError> {
    let g = case.g;
    let [a1, a2, a3] = [s.va[0], s.va[1], s.va[2]];
    let [b1, b2, b3] = [s.vb[0], s.vb[1], s.vb[2]];
    let components = match case.kind {
        CouplingKind::Dispersive => {
            let mut c = [None; 9];
            c[2] = Some(-g * a2 * (1.0 - 4.0 * b3 * b3));
            c[6] = Some(-g * b2 * (1.0 - 4.0 * a3 * a3));
            c
        }
        CouplingKind::Resonant => {
            let cross = a2 * b1 - a1 * b2;
            [
                -4.0 * (a3 * b1 * b2 + a1 * a2 * b3),
                -(a3 * (-1.0 + 4.0 * b2 * b2) + b3 * (1.0 - 4.0 * a1 * a1)),
                4.0 * a1 * cross + b2 * (1.0 - 4.0 * a3 * b3),
                a3 * (-1.0 + 4.0 * b1 * b1) + b3 * (1.0 - 4.0 * a2 * a2),
                4.0 * (a3 * b1 * b2 + a1 * a2 * b3),
                4.0 * a2 * cross + b1 * (-1.0 + 4.0 * a3 * b3),
                -4.0 * b1 * cross + a2 * (1.0 - 4.0 * a3 * b3),
                -4.0 * b2 * cross + a1 * (-1.0 + 4.0 * a3 * b3),
                4.0 * cross * (a3 - b3),
            ]
            .map(|x| Some(g * x))
        }
        CouplingKind::Sigma3Sigma1 => {
            return Err(AnalysisError::Unsupported(
                "no closed form of w for sigma3-sigma1 coupling; use compute_w".into(),
            ))
        }
    };
    Ok(ClosedFormW { components })
}

/// Coordinates `z₂ = (vAB₁, vAB₂, vAB₄, vAB₅, vAB₇, vAB₈, vB₁, vB₂)` (1-based
/// block indices) as positions in the 16-vector.
pub const Z2: [usize; 8] = [4, 5, 7, 8, 10, 11, 13, 14];
/// `z₁ = (vA, vAB₃, vAB₆, vAB₉)`.
pub const Z1: [usize; 6] = [1, 2, 3, 6, 9, 12];
pub const VB3: usize = 15;

/// Largest coefficient coupling `(c0, z₁, vB₃)` into the `z₂` rows, over the
/// drift and every control direction.
pub fn dispersive_structure_defect(model: &TwoQubitModel) -> Result<f64, AnalysisError> {
    let cols: Vec<usize> = std::iter::once(0).chain(Z1).chain([VB3]).collect();
    let mut worst: f64 = 0.0;
    for u in [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let g = analytic_generator(model, &u)?;
        for &r in &Z2 {
            for &c in &cols {
                worst = worst.max(g.matrix()[(r, c)].abs());
            }
        }
        // vB₃ row is identically zero
        worst = worst.max(g.matrix().row(VB3).amax());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantViolation {
    pub initial: usize,
    pub law: String,
    pub t: f64,
    pub quantity: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub structural_defect: f64,
    pub runs: usize,
    pub max_z2_norm: f64,
    pub max_vb3_deviation: f64,
    pub tolerance: f64,
    pub worst: Option<InvariantViolation>,
    pub passed: bool,
}

/// Integrates from states `ρ_A ⊗ ½(I ± σ₃)` under every law and checks that
/// `z₂` stays zero and `vB₃` stays at `±1/2`.
pub fn dispersive_invariant_check(
    model: &TwoQubitModel,
    initial: &[FactorizedState],
    laws: &[ControlLaw],
    horizon: f64,
    step: f64,
    tolerance: f64,
) -> Result<InvariantReport, AnalysisError> {
    require_coupling(model, CouplingKind::Dispersive)?;
    for (k, s) in initial.iter().enumerate() {
        if s.vb[0].abs() > 1e-12 || s.vb[1].abs() > 1e-12 || (s.vb[2].abs() - 0.5).abs() > 1e-12 {
            return Err(AnalysisError::Precondition(format!("initial state {k} is not rho_A (x) (I +- sigma3)/2")));
        }
    }
    let structural_defect = dispersive_structure_defect(model)?;
    let sim = Simulator::new(model)?;
    let opts = IntegrateOptions::default();
    let pairs: Vec<(usize, &ControlLaw)> = (0..initial.len()).flat_map(|i| laws.iter().map(move |l| (i, l))).collect();

    let per_run = pairs
        .par_iter()
        .map(|&(i, law)| -> Result<(f64, f64, Option<InvariantViolation>), AnalysisError> {
            let s = &initial[i];
            let target = s.vb[2];
            let traj = sim.run(&s.embed(), law, horizon, step, &opts)?;
            let mut max_z2: f64 = 0.0;
            let mut max_b3: f64 = 0.0;
            let mut worst: Option<InvariantViolation> = None;
            for (t, state) in traj.times.iter().zip(&traj.states) {
                let c = state.coords();
                let z2 = Z2.iter().map(|&k| c[k] * c[k]).sum::<f64>().sqrt();
                let b3 = (c[VB3] - target).abs();
                for (quantity, magnitude) in [("z2", z2), ("vB3", b3)] {
                    if worst.as_ref().is_none_or(|w| magnitude > w.magnitude) {
                        worst = Some(InvariantViolation {
                            initial: i,
                            law: law.label().to_owned(),
                            t: *t,
                            quantity: quantity.to_owned(),
                            magnitude,
                        });
                    }
                }
                max_z2 = max_z2.max(z2);
                max_b3 = max_b3.max(b3);
            }
            Ok((max_z2, max_b3, worst))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let max_z2_norm = per_run.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_vb3_deviation = per_run.iter().map(|r| r.1).fold(0.0, f64::max);
    let worst = per_run
        .into_iter()
        .filter_map(|r| r.2)
        .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude));
    Ok(InvariantReport {
        structural_defect,
        runs: pairs.len(),
        max_z2_norm,
        max_vb3_deviation,
        tolerance,
        worst,
        passed: max_z2_norm <= tolerance && max_vb3_deviation <= tolerance && structural_defect <= 1e-14,
    })
}

/// Default threshold for [`compatibility_condition`].
pub const COMPATIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Compatibility {
    pub target_va3: f64,
    /// `|v0₃/2 + vA₃ d̂₃₃|`.
    pub residual: f64,
    pub compatible: bool,
}

/// Whether the dissipation lets `vA₃` rest at `target_va3`.
pub fn compatibility_condition(model: &TwoQubitModel, target_va3: f64) -> Compatibility {
    let (d_hat, v0) = one_qubit_dissipator(&model.jumps);
    let residual = (v0[2] / 2.0 + target_va3 * d_hat[(2, 2)]).abs();
    Compatibility {
        target_va3,
        residual,
        compatible: residual <= COMPATIBILITY_TOL,
    }
}

/// Controls `(u₁, u₂)` that hold `vA = (0, 0, ±1/2)` fixed.
///
/// The required rotation is `α₁ = (v0₂ + 2vA₃ d̂₂₃)/(2vA₃)`,
/// `α₂ = −(v0₁ + 2vA₃ d̂₁₃)/(2vA₃)`; `u` solves `Σ u_i α⁽ⁱ⁾ = α` in the σ₁/σ₂
/// plane using the model's control Hamiltonians (`u = α/2` for `H_{A_i} = σ_i`).
/// Valid whenever the interaction couples only `σ₃` on A, which covers the
/// σ₃⊗σ₁ and dispersive cases.
pub fn protecting_control_sigma31(model: &TwoQubitModel, s: &FactorizedState) -> Result<[f64; 2], AnalysisError> {
    model.validate()?;
    if model.lambda.row(0).amax() != 0.0 || model.lambda.row(1).amax() != 0.0 {
        return Err(AnalysisError::WrongCoupling(CouplingKind::Sigma3Sigma1));
    }
    let a3 = s.va[2];
    if s.va[0].abs() > 1e-12 || s.va[1].abs() > 1e-12 || (a3.abs() - 0.5).abs() > BOUND_TOL {
        return Err(AnalysisError::Precondition(format!(
            "vA must be (0, 0, +-1/2), got ({}, {}, {})",
            s.va[0], s.va[1], a3
        )));
    }
    let compat = compatibility_condition(model, a3);
    if !compat.compatible {
        return Err(AnalysisError::Incompatible { target: a3, residual: compat.residual });
    }
    let (d, v0) = one_qubit_dissipator(&model.jumps);
    let alpha1 = (v0[1] + 2.0 * a3 * d[(1, 2)]) / (2.0 * a3);
    let alpha2 = -(v0[0] + 2.0 * a3 * d[(0, 2)]) / (2.0 * a3);
    let c = model.control_coefficients()?;
    let m = nalgebra::Matrix2::new(c[0][0], c[1][0], c[0][1], c[1][1]);
    let u = m
        .try_inverse()
        .filter(|_| m.determinant().abs() > 1e-12)
        .ok_or(AnalysisError::DegenerateControls)?
        * nalgebra::Vector2::new(alpha1, alpha2);
    Ok([u[0], u[1]])
}

/// State-feedback law applying [`protecting_control_sigma31`] at the pole
/// nearest the current `vA₃`.
pub fn protecting_law(model: &TwoQubitModel) -> Result<ControlLaw, AnalysisError> {
    let mut at_pole = [None, None];
    for (slot, a3) in [-0.5, 0.5].into_iter().enumerate() {
        let pole = FactorizedState::new(Vector3::new(0.0, 0.0, a3), Vector3::new(0.0, 0.0, 0.5))?;
        at_pole[slot] = protecting_control_sigma31(model, &pole).ok();
    }
    if at_pole.iter().all(Option::is_none) {
        let residual = compatibility_condition(model, 0.5).residual.min(compatibility_condition(model, -0.5).residual);
        return Err(AnalysisError::Incompatible { target: 0.5, residual });
    }
    Ok(ControlLaw::feedback("protect-sigma31", move |_, v| {
        let slot = usize::from(v.va()[2] >= 0.0);
        match at_pole[slot] {
            Some([u1, u2]) => [u1, u2, 0.0],
            None => [0.0; 3],
        }
    }))
}

/// Generator of `vB` on the protected manifold `vAB = 2 vA⊗vB`, `vA = (0,0,vA₃)`.
///
/// Dispersive: rotation about axis 3 at rate `2ω_b + 2g vA₃`.
/// σ₃⊗σ₁: `2ω_b T₃ + 2g vA₃ T₁`.
pub fn reduced_b_generator(case: &CouplingCase, omega_b: f64, va3: f64) -> Result<Matrix3<f64>, AnalysisError> {
    let t = t_matrices();
    match case.kind {
        CouplingKind::Dispersive => Ok(t[2] * (2.0 * omega_b + 2.0 * case.g * va3)),
        CouplingKind::Sigma3Sigma1 => Ok(t[2] * (2.0 * omega_b) + t[0] * (2.0 * case.g * va3)),
        CouplingKind::Resonant => Err(AnalysisError::Unsupported(
            "resonant coupling has no protected non-trivial B dynamics".into(),
        )),
    }
}

/// First-order drift away from `ρ_A ⊗ ½(I ± σ₁)`: the minimum over
/// `controls` of `‖(d vB₂/dt, d vB₃/dt, w)‖`.
pub fn sigma31_first_branch_drift(
    model: &TwoQubitModel,
    s: &FactorizedState,
    controls: &[[f64; 3]],
) -> Result<f64, AnalysisError> {
    if s.vb[1].abs() > 1e-12 || s.vb[2].abs() > 1e-12 {
        return Err(AnalysisError::Precondition("vB must be (+-1/2, 0, 0)".into()));
    }
    let mut best = f64::INFINITY;
    for u in controls {
        let g = analytic_generator(model, u)?;
        let rate = g.apply(s.embed().coords());
        let w = w_from_generator(&g, s);
        let drift = (rate[VB.start + 1].powi(2) + rate[VB.start + 2].powi(2) + w.norm().powi(2)).sqrt();
        best = best.min(drift);
    }
    Ok(best)
}

/// Solution set of `d̂ vA = −v0/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AffineSolution {
    Point { va: [f64; 3] },
    Line { point: [f64; 3], direction: [f64; 3] },
    Plane { point: [f64; 3], normal: [f64; 3] },
    Everything,
    Empty { residual: f64 },
}

impl AffineSolution {
    /// Whether some solution has `‖vA‖ = 1/2` (within `tol`).
    pub fn reaches_norm_half(&self, tol: f64) -> bool {
        let norm = |v: &[f64; 3]| Vector3::from_column_slice(v).norm();
        match self {
            Self::Point { va } => (norm(va) - 0.5).abs() <= tol,
            Self::Line { point, .. } | Self::Plane { point, .. } => norm(point) <= 0.5 + tol,
            Self::Everything => true,
            Self::Empty { .. } => false,
        }
    }
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

pub fn solve_stationary_va(d_hat: &Matrix3<f64>, v0: &Vector3<f64>) -> AffineSolution {
    let rhs = -v0 / 2.0;
    let scale = d_hat.amax().max(v0.amax()).max(1.0);
    let tol = 1e-12 * scale;
    let svd = d_hat.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank == 0 {
        return if rhs.amax() <= tol { AffineSolution::Everything } else { AffineSolution::Empty { residual: rhs.norm() } };
    }
    // minimum-norm least-squares solution, orthogonal to the null space
    let mut x = Vector3::zeros();
    for k in 0..3 {
        let s = svd.singular_values[k];
        if s > tol {
            x += v_t.row(k).transpose() * (u.column(k).dot(&rhs) / s);
        }
    }
    let residual = (d_hat * x - rhs).norm();
    if residual > 1e-10 * scale {
        return AffineSolution::Empty { residual };
    }
    let null: Vec<Vector3<f64>> = (0..3)
        .filter(|k| svd.singular_values[*k] <= tol)
        .map(|k| v_t.row(k).transpose())
        .collect();
    match null.len() {
        0 => AffineSolution::Point { va: arr(&x) },
        1 => AffineSolution::Line { point: arr(&x), direction: arr(&null[0]) },
        _ => AffineSolution::Plane { point: arr(&x), normal: arr(&null[0].cross(&null[1])) },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObstructionConfig {
    /// Spacing of the Cartesian grid on `vA` and on the `(vB₁, vB₂)` chart of the sphere.
    pub grid_step: f64,
    pub random_samples: usize,
    pub seed: u64,
    /// `‖w‖` at or below this counts as a zero.
    pub zero_tol: f64,
    /// Zeros must have `‖vA‖ ≥ 1/2 − norm_tol`.
    pub norm_tol: f64,
}

impl Default for ObstructionConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.05,
            random_samples: 10_000,
            seed: 0,
            zero_tol: 1e-9,
            norm_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub va: [f64; 3],
    pub vb: [f64; 3],
    pub w_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BranchCounts {
    /// `vA₂ vB₁ = vA₁ vB₂` only.
    pub cross_product_branch: usize,
    /// `vA₃ = vB₃` only.
    pub equal_z_branch: usize,
    pub both: usize,
    pub neither: usize,
    /// Zeros on the `vA₃ = vB₃` branch with `(vA₁, vA₂) = (vB₂, −vB₁)`.
    pub equal_z_rotated_plus: usize,
    /// Zeros on the `vA₃ = vB₃` branch with `(vA₁, vA₂) = (−vB₂, vB₁)`.
    pub equal_z_rotated_minus: usize,
    /// Zeros on the `vA₃ = vB₃` branch matching neither sign pattern.
    pub equal_z_other_signs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstructionReport {
    pub config: ObstructionConfig,
    pub samples: usize,
    pub grid_samples: usize,
    pub zeros: usize,
    pub branches: BranchCounts,
    /// Smallest `‖vA‖` among zeros (1/2 when the claim holds).
    pub min_zero_va_norm: Option<f64>,
    pub worst_zero: Option<Sample>,
    /// Zeros with `‖vA‖ < 1/2 − norm_tol`.
    pub violations: usize,
    /// Smallest `‖w‖` among samples with `‖vA‖ < 1/2 − norm_tol`.
    pub min_interior_w: Option<Sample>,
    pub stationary_va: AffineSolution,
    /// Some `vA` with `‖vA‖ = 1/2` solves `v0/2 + d̂ vA = 0`.
    pub pure_stationary_exists: bool,
    pub passed: bool,
}

fn grid_values(step: f64) -> Vec<f64> {
    let n = (0.5 / step).round() as i64;
    (-n..=n).map(|k| k as f64 * 0.5 / n as f64).collect()
}

/// Factorized constraint set sampled on a grid: `vA` on a Cartesian grid inside
/// the ball, `vB` on the sphere through a grid on `(vB₁, vB₂)` with both signs
/// of `vB₃`.
pub fn constraint_grid(step: f64) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    let g = grid_values(step);
    let mut va = Vec::new();
    for &x in &g {
        for &y in &g {
            for &z in &g {
                if x * x + y * y + z * z <= 0.25 + 1e-12 {
                    va.push(Vector3::new(x, y, z));
                }
            }
        }
    }
    let mut vb = Vec::new();
    for &x in &g {
        for &y in &g {
            let rest = 0.25 - x * x - y * y;
            if rest >= -1e-12 {
                let z = rest.max(0.0).sqrt();
                vb.push(Vector3::new(x, y, z));
                if z > 0.0 {
                    vb.push(Vector3::new(x, y, -z));
                }
            }
        }
    }
    (va, vb)
}

#[derive(Default)]
struct SweepAcc {
    samples: usize,
    zeros: usize,
    branches: BranchCounts,
    worst_zero: Option<Sample>,
    violations: usize,
    min_interior: Option<Sample>,
}

impl SweepAcc {
    fn visit(&mut self, gen: &Generator16, va: &Vector3<f64>, vb: &Vector3<f64>, cfg: &ObstructionConfig) {
        let s = FactorizedState { va: *va, vb: *vb };
        let w = w_from_generator(gen, &s).norm();
        let sample = Sample { va: arr(va), vb: arr(vb), w_norm: w };
        let va_norm = va.norm();
        self.samples += 1;
        let interior = va_norm < 0.5 - cfg.norm_tol;
        if interior && self.min_interior.is_none_or(|m| w < m.w_norm) {
            self.min_interior = Some(sample);
        }
        if w > cfg.zero_tol {
            return;
        }
        self.zeros += 1;
        if interior {
            self.violations += 1;
        }
        if self.worst_zero.is_none_or(|z| va_norm < Vector3::from_column_slice(&z.va).norm()) {
            self.worst_zero = Some(sample);
        }
        let tol = 1e-9;
        let cross = (va[1] * vb[0] - va[0] * vb[1]).abs() <= tol;
        let equal_z = (va[2] - vb[2]).abs() <= tol;
        let b = &mut self.branches;
        match (cross, equal_z) {
            (true, true) => b.both += 1,
            (true, false) => b.cross_product_branch += 1,
            (false, true) => b.equal_z_branch += 1,
            (false, false) => b.neither += 1,
        }
        if equal_z {
            let plus = (va[0] - vb[1]).abs() <= tol && (va[1] + vb[0]).abs() <= tol;
            let minus = (va[0] + vb[1]).abs() <= tol && (va[1] - vb[0]).abs() <= tol;
            if plus {
                b.equal_z_rotated_plus += 1;
            }
            if minus {
                b.equal_z_rotated_minus += 1;
            }
            if !plus && !minus {
                b.equal_z_other_signs += 1;
            }
        }
    }

    fn merge(mut self, o: SweepAcc) -> SweepAcc {
        self.samples += o.samples;
        self.zeros += o.zeros;
        self.violations += o.violations;
        let (a, b) = (&mut self.branches, o.branches);
        a.cross_product_branch += b.cross_product_branch;
        a.equal_z_branch += b.equal_z_branch;
        a.both += b.both;
        a.neither += b.neither;
        a.equal_z_rotated_plus += b.equal_z_rotated_plus;
        a.equal_z_rotated_minus += b.equal_z_rotated_minus;
        a.equal_z_other_signs += b.equal_z_other_signs;
        let va_norm = |s: &Sample| Vector3::from_column_slice(&s.va).norm();
        self.worst_zero = match (self.worst_zero, o.worst_zero) {
            (Some(x), Some(y)) => Some(if va_norm(&y) < va_norm(&x) { y } else { x }),
            (x, y) => x.or(y),
        };
        self.min_interior = match (self.min_interior, o.min_interior) {
            (Some(x), Some(y)) => Some(if y.w_norm < x.w_norm { y } else { x }),
            (x, y) => x.or(y),
        };
        self
    }
}

/// Sweeps the factorized constraint set for zeros of `w` under resonant
/// coupling, and solves the stationarity condition `v0/2 + d̂ vA = 0`.
pub fn resonant_obstruction_check(
    model: &TwoQubitModel,
    config: &ObstructionConfig,
) -> Result<ObstructionReport, AnalysisError> {
    require_coupling(model, CouplingKind::Resonant)?;
    let gen = analytic_generator(model, &[0.0; 3])?;
    let (grid_a, grid_b) = constraint_grid(config.grid_step);
    let grid_acc = grid_a
        .par_iter()
        .fold(SweepAcc::default, |mut acc, va| {
            for vb in &grid_b {
                acc.visit(&gen, va, vb, config);
            }
            acc
        })
        .reduce(SweepAcc::default, SweepAcc::merge);
    let grid_samples = grid_acc.samples;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rand_acc = SweepAcc::default();
    for _ in 0..config.random_samples {
        let s = FactorizedState::random(&mut rng);
        rand_acc.visit(&gen, &s.va, &s.vb, config);
    }
    let acc = grid_acc.merge(rand_acc);

    let (d_hat, v0) = one_qubit_dissipator(&model.jumps);
    let stationary_va = solve_stationary_va(&d_hat, &v0);
    let pure_stationary_exists = stationary_va.reaches_norm_half(1e-9);
    Ok(ObstructionReport {
        config: *config,
        samples: acc.samples,
        grid_samples,
        zeros: acc.zeros,
        branches: acc.branches,
        min_zero_va_norm: acc.worst_zero.map(|s| Vector3::from_column_slice(&s.va).norm()),
        worst_zero: acc.worst_zero,
        violations: acc.violations,
        min_interior_w: acc.min_interior,
        stationary_va,
        pure_stationary_exists,
        passed: acc.violations == 0,
    })
}
