//! Fixed-step RK4 integration of the controlled coherence-vector dynamics,
//! trajectories, and the asymptotic-purification scan.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coherence::{BlochVector, Vector16};
use crate::generator::{assemble_blocks, BilinearSystem, ModelError, TwoQubitModel};
use crate::io::model_hash;
use crate::sampling::uniform;

pub type ControlFn = dyn Fn(f64, &BlochVector) -> [f64; 3] + Send + Sync;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("control data is empty")]
    Empty,
    #[error("breakpoints and values differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("breakpoints must start at 0 and increase strictly")]
    Breakpoints,
    #[error("control value {value} exceeds bound {bound}")]
    BoundExceeded { value: f64, bound: f64 },
    #[error("bound must be positive and finite, got {0}")]
    InvalidBound(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid step {step} for horizon {horizon}")]
    InvalidStep { step: f64, horizon: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("initial state is not physical: {0}")]
    UnphysicalInitial(String),
    #[error("state left the physical set at t = {t}: {reason}")]
    PhysicalityAbort { t: f64, reason: String },
    #[error("initial state lies on the boundary (purity {purity}); an interior start is required")]
    BoundaryStart { purity: f64 },
}

#[derive(Clone)]
pub enum ControlKind {
    /// Value `values[k]` on `[starts[k], starts[k+1])`; `starts[0] = 0`.
    PiecewiseConstant { starts: Vec<f64>, values: Vec<[f64; 3]> },
    /// Linear interpolation between samples, held constant outside.
    Sampled { times: Vec<f64>, values: Vec<[f64; 3]> },
    /// `u(t, v)`, evaluated at every integrator stage.
    Feedback(Arc<ControlFn>),
}

impl fmt::Debug for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PiecewiseConstant { starts, .. } => write!(f, "PiecewiseConstant({} pieces)", starts.len()),
            Self::Sampled { times, .. } => write!(f, "Sampled({} samples)", times.len()),
            Self::Feedback(_) => f.write_str("Feedback"),
        }
    }
}

/// A control signal `u(t) ∈ ℝ³`, optionally with an essential-sup bound.
#[derive(Clone, Debug)]
pub struct ControlLaw {
    kind: ControlKind,
    bound: Option<f64>,
    label: String,
}

fn check_increasing(times: &[f64]) -> Result<(), ControlError> {
    if times.windows(2).all(|w| w[1] > w[0]) && times.iter().all(|t| t.is_finite()) {
        Ok(())
    } else {
        Err(ControlError::Breakpoints)
    }
}

impl ControlLaw {
    pub fn constant(u: [f64; 3]) -> Self {
        Self {
            kind: ControlKind::PiecewiseConstant { starts: vec![0.0], values: vec![u] },
            bound: None,
            label: format!("const({},{},{})", u[0], u[1], u[2]),
        }
    }

    pub fn zero() -> Self {
        Self::constant([0.0; 3]).labeled("zero")
    }

    pub fn piecewise(starts: Vec<f64>, values: Vec<[f64; 3]>) -> Result<Self, ControlError> {
        if starts.is_empty() {
            return Err(ControlError::Empty);
        }
        if starts.len() != values.len() {
            return Err(ControlError::LengthMismatch(starts.len(), values.len()));
        }
        if starts[0] != 0.0 {
            return Err(ControlError::Breakpoints);
        }
        check_increasing(&starts)?;
        Ok(Self {
            kind: ControlKind::PiecewiseConstant { starts, values },
            bound: None,
            label: "piecewise".into(),
        })
    }

    pub fn sampled(times: Vec<f64>, values: Vec<[f64; 3]>) -> Result<Self, ControlError> {
        if times.is_empty() {
            return Err(ControlError::Empty);
        }
        if times.len() != values.len() {
            return Err(ControlError::LengthMismatch(times.len(), values.len()));
        }
        check_increasing(&times)?;
        Ok(Self {
            kind: ControlKind::Sampled { times, values },
            bound: None,
            label: "sampled".into(),
        })
    }

    pub fn feedback<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, &BlochVector) -> [f64; 3] + Send + Sync + 'static,
    {
        Self {
            kind: ControlKind::Feedback(Arc::new(f)),
            bound: None,
            label: label.into(),
        }
    }

    /// Piecewise-constant law with i.i.d. uniform values in `[−bound, bound]`
    /// on segments of length `segment`.
    pub fn random_piecewise<R: Rng + ?Sized>(rng: &mut R, horizon: f64, segment: f64, bound: f64) -> Self {
        let pieces = (horizon / segment).ceil().max(1.0) as usize;
        let starts = (0..pieces).map(|k| k as f64 * segment).collect();
        let values = (0..pieces)
            .map(|_| [0, 1, 2].map(|_| uniform(rng, -bound, bound)))
            .collect();
        Self::piecewise(starts, values)
            .and_then(|l| l.with_bound(bound))
            .expect("generated data is consistent")
            .labeled(format!("random-piecewise(bound={bound},segment={segment})"))
    }

    /// Sets the sup-norm bound. Tabulated data must already respect it;
    /// feedback outputs are saturated to it.
    pub fn with_bound(mut self, bound: f64) -> Result<Self, ControlError> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(ControlError::InvalidBound(bound));
        }
        let values = match &self.kind {
            ControlKind::PiecewiseConstant { values, .. } | ControlKind::Sampled { values, .. } => values.as_slice(),
            ControlKind::Feedback(_) => &[],
        };
        if let Some(value) = values.iter().flatten().copied().find(|x| x.abs() > bound) {
            return Err(ControlError::BoundExceeded { value, bound });
        }
        self.bound = Some(bound);
        Ok(self)
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn kind(&self) -> &ControlKind {
        &self.kind
    }

    /// Piecewise-constant laws are held fixed over each integrator step.
    fn held_per_step(&self) -> bool {
        matches!(self.kind, ControlKind::PiecewiseConstant { .. })
    }

    pub fn eval(&self, t: f64, v: &BlochVector) -> [f64; 3] {
        let u = match &self.kind {
            ControlKind::PiecewiseConstant { starts, values } => {
                let k = starts.partition_point(|s| *s <= t).saturating_sub(1);
                values[k]
            }
            ControlKind::Sampled { times, values } => {
                let k = times.partition_point(|s| *s <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[k - 1]
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    [0, 1, 2].map(|i| values[k - 1][i] * (1.0 - w) + values[k][i] * w)
                }
            }
            ControlKind::Feedback(f) => f(t, v),
        };
        match self.bound {
            Some(b) => u.map(|x| x.clamp(-b, b)),
            None => u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Keep every n-th state (the final state is always kept).
    pub record_every: usize,
    /// Run the eigenvalue positivity test every n-th step.
    pub physicality_every: usize,
    /// Violations larger than this are reported as warnings.
    pub warn_tol: f64,
    /// Violations larger than this abort the run.
    pub abort_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            record_every: 1,
            physicality_every: 50,
            warn_tol: 1e-8,
            abort_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalityWarning {
    pub t: f64,
    /// Size of the violation: negative eigenvalue magnitude or excess squared norm.
    pub magnitude: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub model_hash: String,
    pub step: f64,
    pub horizon: f64,
    pub control: String,
    pub warnings: Vec<PhysicalityWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochVector>,
    pub controls: Vec<[f64; 3]>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &BlochVector {
        self.states.last().expect("trajectories hold at least the initial state")
    }

    pub fn purity_b(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(BlochVector::reduced_purity_b)
    }

    /// `(t, max Tr ρ_B²)` over recorded states with `t ≤ until`.
    pub fn max_purity_b_until(&self, until: f64) -> (f64, f64) {
        self.times
            .iter()
            .zip(&self.states)
            .take_while(|(t, _)| **t <= until * (1.0 + 1e-12))
            .map(|(t, s)| (*t, s.reduced_purity_b()))
            .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
    }
}

/// `exp(t K)` for antisymmetric `K` (Rodrigues).
pub fn exp_antisymmetric(k: &Matrix3<f64>, t: f64) -> Matrix3<f64> {
    let omega = Vector3::new(k[(2, 1)], k[(0, 2)], k[(1, 0)]);
    let theta = omega.norm() * t;
    if theta.abs() < 1e-300 {
        return Matrix3::identity();
    }
    let kn = k / omega.norm();
    Matrix3::identity() + kn * theta.sin() + kn * kn * (1.0 - theta.cos())
}

/// Integrates one model under many laws and initial states.
#[derive(Debug, Clone)]
pub struct Simulator {
    system: BilinearSystem,
    model_hash: String,
}

struct Grid {
    steps: usize,
    h: f64,
}

fn grid(horizon: f64, step: f64) -> Result<Grid, DynamicsError> {
    if !(step > 0.0 && step.is_finite() && horizon.is_finite() && horizon >= step * (1.0 - 1e-12)) {
        return Err(DynamicsError::InvalidStep { step, horizon });
    }
    let steps = (horizon / step - 1e-9).ceil().max(1.0) as usize;
    Ok(Grid { steps, h: horizon / steps as f64 })
}

fn violation(v: &BlochVector, tol: f64, spectral: bool) -> Option<(f64, String)> {
    if let Err(b) = v.check_bounds(tol) {
        return Some((b.value - b.limit, b.to_string()));
    }
    if spectral {
        let min = v.min_eigenvalue();
        if min < -tol {
            return Some((-min, format!("negative eigenvalue {min:e}")));
        }
    }
    None
}

impl Simulator {
    pub fn new(model: &TwoQubitModel) -> Result<Self, DynamicsError> {
        Ok(Self {
            system: BilinearSystem::new(model)?,
            model_hash: model_hash(model),
        })
    }

    pub fn system(&self) -> &BilinearSystem {
        &self.system
    }

    pub fn run(
        &self,
        v0: &BlochVector,
        law: &ControlLaw,
        horizon: f64,
        step: f64,
        opts: &IntegrateOptions,
    ) -> Result<Trajectory, DynamicsError> {
        let Grid { steps, h } = grid(horizon, step)?;
        if let Some((_, reason)) = violation(v0, opts.warn_tol, true) {
            return Err(DynamicsError::UnphysicalInitial(reason));
        }
        let record_every = opts.record_every.max(1);
        let check_every = opts.physicality_every.max(1);
        let capacity = steps / record_every + 2;
        let mut times = Vec::with_capacity(capacity);
        let mut states = Vec::with_capacity(capacity);
        let mut controls = Vec::with_capacity(capacity);
        let mut warnings = Vec::new();

        let sys = &self.system;
        let held = law.held_per_step();
        let mut v = *v0.coords();
        for n in 0..steps {
            let t = n as f64 * h;
            let state = BlochVector::from_coords_pinned(v);
            // held laws are sampled mid-step, which snaps breakpoints to the grid
            let u0 = law.eval(if held { t + 0.5 * h } else { t }, &state);
            if n % record_every == 0 {
                times.push(t);
                states.push(state);
                controls.push(u0);
            }
            let control_at = |tau: f64, x: &Vector16| -> [f64; 3] {
                if held {
                    u0
                } else {
                    law.eval(tau, &BlochVector::from_coords_pinned(*x))
                }
            };
            let k1 = sys.rate(&u0, &v);
            let x2 = v + k1 * (0.5 * h);
            let k2 = sys.rate(&control_at(t + 0.5 * h, &x2), &x2);
            let x3 = v + k2 * (0.5 * h);
            let k3 = sys.rate(&control_at(t + 0.5 * h, &x3), &x3);
            let x4 = v + k3 * h;
            let k4 = sys.rate(&control_at(t + h, &x4), &x4);
            v += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
            v[0] = crate::coherence::C0;

            let next = BlochVector::from_coords_pinned(v);
            let t_next = (n + 1) as f64 * h;
            let spectral = (n + 1) % check_every == 0 || n + 1 == steps;
            if let Some((magnitude, reason)) = violation(&next, opts.warn_tol, spectral) {
                if violation(&next, opts.abort_tol, spectral).is_some() {
                    return Err(DynamicsError::PhysicalityAbort { t: t_next, reason });
                }
                warnings.push(PhysicalityWarning { t: t_next, magnitude, reason });
            }
        }
        let last = BlochVector::from_coords_pinned(v);
        times.push(steps as f64 * h);
        controls.push(law.eval(steps as f64 * h, &last));
        states.push(last);

        Ok(Trajectory {
            times,
            states,
            controls,
            meta: TrajectoryMeta {
                model_hash: self.model_hash.clone(),
                step: h,
                horizon,
                control: law.label().to_owned(),
                warnings,
            },
        })
    }
}

/// RK4 integration of the controlled dynamics from `v0` over `[0, horizon]`.
///
/// The step is shrunk slightly if needed so that the grid ends exactly at
/// `horizon`; the step actually used is stored in the trajectory metadata.
pub fn integrate(
    model: &TwoQubitModel,
    v0: &BlochVector,
    law: &ControlLaw,
    horizon: f64,
    step: f64,
) -> Result<Trajectory, DynamicsError> {
    Simulator::new(model)?.run(v0, law, horizon, step, &IntegrateOptions::default())
}

/// `d/dt Tr ρ_B² = 4(⟨vB, ĥ_B vB⟩ + ⟨vB, Ĥ_Ib vAB⟩)`; the first term vanishes.
pub fn purity_derivative_b(model: &TwoQubitModel, v: &BlochVector) -> Result<f64, ModelError> {
    let blocks = assemble_blocks(model, &[0.0; 3])?;
    let vb = v.vb();
    Ok(4.0 * (vb.dot(&(blocks.h_b * vb)) + vb.dot(&(blocks.h_ib * v.vab()))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanEntry {
    pub law: String,
    pub horizon: f64,
    pub max_purity_b: f64,
    pub t_at_max: f64,
    /// `1 − max_t Tr ρ_B²(t)`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurificationReport {
    /// Always "numerical evidence": a finite set of controls cannot prove unreachability.
    pub label: String,
    pub initial_purity: f64,
    pub step: f64,
    pub entries: Vec<ScanEntry>,
    pub min_margin: f64,
}

impl PurificationReport {
    /// Margins for one law, ordered like the requested horizons.
    pub fn margins_for(&self, law: &str) -> Vec<f64> {
        self.entries.iter().filter(|e| e.law == law).map(|e| e.margin).collect()
    }
}

/// Largest full-state purity accepted as an interior start.
pub const INTERIOR_PURITY_LIMIT: f64 = 1.0 - 1e-6;

/// For every law, the maximum of `Tr ρ_B²` over `[0, H]` for each horizon `H`.
/// Laws run in parallel; each runs once to the longest horizon.
pub fn purification_scan(
    model: &TwoQubitModel,
    v0: &BlochVector,
    laws: &[ControlLaw],
    horizons: &[f64],
    step: f64,
) -> Result<PurificationReport, DynamicsError> {
    let purity = v0.purity();
    if purity >= INTERIOR_PURITY_LIMIT {
        return Err(DynamicsError::BoundaryStart { purity });
    }
    let longest = horizons.iter().copied().fold(f64::NAN, f64::max);
    let sim = Simulator::new(model)?;
    let opts = IntegrateOptions::default();
    let runs = laws
        .par_iter()
        .map(|law| sim.run(v0, law, longest, step, &opts).map(|traj| (law, traj)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut entries = Vec::with_capacity(laws.len() * horizons.len());
    for (law, traj) in &runs {
        for &horizon in horizons {
            let (t_at_max, max_purity_b) = traj.max_purity_b_until(horizon);
            entries.push(ScanEntry {
                law: law.label().to_owned(),
                horizon,
                max_purity_b,
                t_at_max,
                margin: 1.0 - max_purity_b,
            });
        }
    }
    let min_margin = entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
    Ok(PurificationReport {
        label: "numerical evidence".into(),
        initial_purity: purity,
        step: runs.first().map_or(step, |(_, t)| t.meta.step),
        entries,
        min_margin,
    })
}

/// Rate of `vB` restricted to B's own coordinates, useful for comparisons.
pub fn vb_rate(model: &TwoQubitModel, v: &BlochVector) -> Result<Vector3<f64>, ModelError> {
    let blocks = assemble_blocks(model, &[0.0; 3])?;
    Ok(blocks.h_b * v.vb() + blocks.h_ib * v.vab())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::{factorized, to_coherence, Vector9};
    use crate::generator::t_matrices;
    use crate::quantum::{sigma_minus, TwoQubitState};
    use crate::sampling::{random_traceless, random_two_qubit};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coupling(entries: &[((usize, usize), f64)]) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for ((i, j), x) in entries {
            m[(*i, *j)] = *x;
        }
        m
    }

    #[test]
    fn control_law_evaluation() {
        let v = BlochVector::maximally_mixed();
        let pw = ControlLaw::piecewise(vec![0.0, 1.0], vec![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]).unwrap();
        assert_eq!(pw.eval(0.5, &v), [1.0, 0.0, 0.0]);
        assert_eq!(pw.eval(1.0, &v), [0.0, 2.0, 0.0]);
        assert_eq!(pw.eval(7.0, &v), [0.0, 2.0, 0.0]);
        let s = ControlLaw::sampled(vec![0.0, 2.0], vec![[0.0; 3], [2.0, -2.0, 4.0]]).unwrap();
        assert_eq!(s.eval(1.0, &v), [1.0, -1.0, 2.0]);
        assert_eq!(s.eval(3.0, &v), [2.0, -2.0, 4.0]);
        let fb = ControlLaw::feedback("fb", |t, _| [t, -t, 0.0]).with_bound(1.0).unwrap();
        assert_eq!(fb.eval(5.0, &v), [1.0, -1.0, 0.0]);

        assert_eq!(ControlLaw::piecewise(vec![0.0], vec![]).unwrap_err(), ControlError::LengthMismatch(1, 0));
        assert_eq!(ControlLaw::piecewise(vec![0.5], vec![[0.0; 3]]).unwrap_err(), ControlError::Breakpoints);
        assert!(matches!(
            ControlLaw::constant([3.0, 0.0, 0.0]).with_bound(1.0),
            Err(ControlError::BoundExceeded { .. })
        ));
        assert!(ControlLaw::zero().with_bound(-1.0).is_err());
    }

    #[test]
    fn invalid_steps_rejected() {
        let model = TwoQubitModel::new(1.0, 1.0, Matrix3::zeros());
        let v = BlochVector::maximally_mixed();
        assert!(matches!(integrate(&model, &v, &ControlLaw::zero(), 1.0, 0.0), Err(DynamicsError::InvalidStep { .. })));
        assert!(matches!(integrate(&model, &v, &ControlLaw::zero(), 0.01, 0.1), Err(DynamicsError::InvalidStep { .. })));
        let mut vab = Vector9::zeros();
        vab[0] = 0.8;
        let bad = BlochVector::from_blocks(Vector3::zeros(), vab, Vector3::zeros());
        assert!(matches!(integrate(&model, &bad, &ControlLaw::zero(), 1.0, 0.1), Err(DynamicsError::UnphysicalInitial(_))));
    }

    #[test]
    fn closed_system_conserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lambda = Matrix3::from_fn(|_, _| uniform(&mut rng, -1.0, 1.0));
        let model = TwoQubitModel::new(0.7, -0.4, lambda);
        let v0 = to_coherence(&random_two_qubit(&mut rng));
        let law = ControlLaw::random_piecewise(&mut rng, 10.0, 0.5, 1.0);
        let traj = integrate(&model, &v0, &law, 10.0, 1e-3).unwrap();
        let n0 = v0.coords().norm();
        for s in &traj.states {
            assert!((s.coords().norm() - n0).abs() < 1e-9);
            assert_eq!(s.c0(), 0.5);
        }
        assert!(traj.meta.warnings.is_empty());
        assert_eq!(traj.len(), 10_001);
    }

    #[test]
    fn uncoupled_b_rotates_freely() {
        let model = TwoQubitModel::new(0.3, 0.9, Matrix3::zeros()).with_jumps(vec![sigma_minus().scale(0.3)]);
        let v0 = factorized(Vector3::new(0.1, 0.2, 0.1), Vector3::new(0.3, 0.0, 0.2));
        let law = ControlLaw::sampled(vec![0.0, 5.0], vec![[1.0, -1.0, 0.5], [-1.0, 0.0, 1.0]]).unwrap();
        let traj = integrate(&model, &v0, &law, 5.0, 1e-3).unwrap();
        let hb = t_matrices()[2] * (2.0 * model.omega_b);
        for (t, s) in traj.times.iter().zip(&traj.states).step_by(500) {
            let expected = exp_antisymmetric(&hb, *t) * v0.vb();
            assert_abs_diff_eq!(s.vb(), expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn amplitude_damping_purifies_a() {
        // vA₃' = v0₃/2 + d₃₃ vA₃ = −2γ² − 4γ² vA₃ for ℓ = γσ₋, so vA₃(t) = −½(1 − e^{−4γ²t})
        let gamma: f64 = 0.5;
        let model = TwoQubitModel::new(0.0, 0.0, Matrix3::zeros()).with_jumps(vec![sigma_minus().scale(gamma)]);
        let traj = integrate(&model, &BlochVector::maximally_mixed(), &ControlLaw::zero(), 5.0, 1e-3).unwrap();
        let mut prev = 0.0;
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = -0.5 * (1.0 - (-4.0 * gamma * gamma * t).exp());
            assert!((s.va()[2] - exact).abs() < 1e-12);
            assert!(s.va()[2] <= prev + 1e-15);
            prev = s.va()[2];
        }
    }

    #[test]
    fn purity_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let lambda = Matrix3::from_fn(|_, _| uniform(&mut rng, -1.0, 1.0));
        let model = TwoQubitModel::new(0.4, 0.8, lambda).with_jumps(vec![random_traceless(&mut rng, 0.5)]);
        for _ in 0..5 {
            let v0 = to_coherence(&random_two_qubit(&mut rng));
            let h = 1e-4;
            let traj = integrate(&model, &v0, &ControlLaw::zero(), 2.0 * h, h).unwrap();
            let fd = (traj.states[2].reduced_purity_b() - traj.states[0].reduced_purity_b()) / (2.0 * h);
            let exact = purity_derivative_b(&model, &traj.states[1]).unwrap();
            assert!((fd - exact).abs() < 1e-6, "{fd} vs {exact}");
        }
        let product = factorized(Vector3::new(0.1, 0.0, 0.2), Vector3::zeros());
        assert_eq!(purity_derivative_b(&model, &BlochVector::from_blocks(product.va(), Vector9::zeros(), product.vb())).unwrap(), 0.0);
    }

    #[test]
    fn dispersive_pole_has_zero_purity_derivative() {
        let model = TwoQubitModel::new(0.4, 0.8, coupling(&[((2, 2), 1.3)]));
        let v = factorized(Vector3::new(0.2, -0.1, 0.3), Vector3::new(0.0, 0.0, 0.5));
        assert_abs_diff_eq!(purity_derivative_b(&model, &v).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scan_rejects_boundary_start() {
        let model = TwoQubitModel::new(1.0, 1.0, Matrix3::zeros());
        let pure = to_coherence(&TwoQubitState::basis_projector(0));
        let err = purification_scan(&model, &pure, &[ControlLaw::zero()], &[1.0], 0.01).unwrap_err();
        assert!(matches!(err, DynamicsError::BoundaryStart { .. }));
    }

    #[test]
    fn closed_scan_keeps_full_purity() {
        let model = TwoQubitModel::new(1.0, 0.5, coupling(&[((0, 0), 1.0), ((1, 1), 1.0)]));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v0 = to_coherence(&random_two_qubit(&mut rng));
        let traj = integrate(&model, &v0, &ControlLaw::constant([0.2, 0.0, 0.1]), 10.0, 1e-3).unwrap();
        let pb: Vec<f64> = traj.purity_b().collect();
        let spread = pb.iter().cloned().fold(f64::MIN, f64::max) - pb.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 1e-3, "reduced purity should oscillate");
        for s in &traj.states {
            assert!((s.purity() - v0.purity()).abs() < 1e-9);
        }
    }

    #[test]
    fn rodrigues_matches_series() {
        let k = Vector3::new(0.3, -1.2, 0.7).cross_matrix();
        let mut series = Matrix3::identity();
        let mut term = Matrix3::identity();
        for n in 1..40 {
            term = term * k * (1.5 / n as f64);
            series += term;
        }
        assert!((exp_antisymmetric(&k, 1.5) - series).amax() < 1e-13);
    }
}
