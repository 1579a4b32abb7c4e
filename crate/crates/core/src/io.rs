//! Model files, trajectory export and atomic file output.
//!
//! Model files are JSON:
//!
//! ```json
//! {
//!   "omega_a": 1.0,
//!   "omega_b": 0.5,
//!   "lambda": [[0,0,0],[0,0,0],[0,0,1]],
//!   "jumps": [ [[[0,0],[0,0]], [[2,0],[0,0]]] ],
//!   "controls": null
//! }
//! ```
//!
//! A complex 2×2 matrix is two rows of two `[re, im]` pairs.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::generator::{ModelError, TwoQubitModel};
use crate::quantum::{Mat2, C64};

pub type ComplexMatrix2 = [[[f64; 2]; 2]; 2];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub omega_a: f64,
    pub omega_b: f64,
    /// Row-major `λ_ij`.
    pub lambda: [[f64; 3]; 3],
    #[serde(default)]
    pub jumps: Vec<ComplexMatrix2>,
    /// Overrides the default control Hamiltonians `σ₁, σ₂, σ₃`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controls: Option<[ComplexMatrix2; 3]>,
}

fn to_mat2(m: &ComplexMatrix2) -> Mat2 {
    Mat2::from_fn(|i, j| C64::new(m[i][j][0], m[i][j][1]))
}

fn from_mat2(m: &Mat2) -> ComplexMatrix2 {
    let mut out = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = [m[(i, j)].re, m[(i, j)].im];
        }
    }
    out
}

impl From<&TwoQubitModel> for ModelFile {
    fn from(model: &TwoQubitModel) -> Self {
        let defaults = crate::quantum::paulis();
        Self {
            omega_a: model.omega_a,
            omega_b: model.omega_b,
            lambda: [0, 1, 2].map(|i| [0, 1, 2].map(|j| model.lambda[(i, j)])),
            jumps: model.jumps.iter().map(from_mat2).collect(),
            controls: (model.control_hams != defaults).then(|| model.control_hams.each_ref().map(from_mat2)),
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<TwoQubitModel, ModelError> {
        let lambda = Matrix3::from_fn(|i, j| self.lambda[i][j]);
        let mut model = TwoQubitModel::new(self.omega_a, self.omega_b, lambda)
            .with_jumps(self.jumps.iter().map(to_mat2).collect());
        if let Some(controls) = &self.controls {
            model = model.with_controls(controls.each_ref().map(to_mat2));
        }
        model.validate()?;
        Ok(model)
    }
}

pub fn parse_model(text: &str) -> Result<TwoQubitModel, IoError> {
    let file: ModelFile = serde_json::from_str(text)?;
    Ok(file.into_model()?)
}

pub fn load_model(path: &Path) -> Result<TwoQubitModel, IoError> {
    parse_model(&fs::read_to_string(path).map_err(file_err(path))?)
}

pub fn model_to_json(model: &TwoQubitModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from(model)).expect("model serializes")
}

/// First 16 hex digits of the SHA-256 of the model's compact JSON form.
pub fn model_hash(model: &TwoQubitModel) -> String {
    let json = serde_json::to_string(&ModelFile::from(model)).expect("model serializes");
    let digest = Sha256::digest(json.as_bytes());
    hex::encode(digest)[..16].to_owned()
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(file_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(file_err(dir))?;
    tmp.write_all(bytes).map_err(file_err(path))?;
    tmp.persist(path).map_err(|e| IoError::File { path: path.display().to_string(), source: e.error })?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Column names shared by the CSV and JSON trajectory formats.
pub fn trajectory_columns() -> Vec<String> {
    let mut cols: Vec<String> = ["t", "u1", "u2", "u3", "c0"].map(String::from).to_vec();
    cols.extend((1..=3).map(|i| format!("vA{i}")));
    cols.extend((1..=9).map(|i| format!("vAB{i}")));
    cols.extend((1..=3).map(|i| format!("vB{i}")));
    cols.extend(["purity_full", "purity_A", "purity_B"].map(String::from));
    cols
}

/// 17 significant digits, which round-trips every f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn trajectory_rows(traj: &Trajectory) -> impl Iterator<Item = Vec<f64>> + '_ {
    traj.times.iter().zip(&traj.states).zip(&traj.controls).map(|((t, s), u)| {
        let mut row = Vec::with_capacity(24);
        row.push(*t);
        row.extend_from_slice(u);
        row.extend(s.coords().iter().copied());
        row.push(s.purity());
        row.push(s.reduced_purity_a());
        row.push(s.reduced_purity_b());
        row
    })
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = trajectory_columns().join(",");
    out.push('\n');
    for row in trajectory_rows(traj) {
        let line: Vec<String> = row.into_iter().map(format_f64).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// JSON mirror of the CSV: metadata plus one object per row, with numbers
/// written in the same 17-digit form.
pub fn trajectory_json(traj: &Trajectory) -> String {
    let cols = trajectory_columns();
    let meta = serde_json::to_string(&traj.meta).expect("metadata serializes");
    let mut out = String::new();
    let _ = write!(out, "{{\n  \"metadata\": {meta},\n  \"records\": [");
    for (k, row) in trajectory_rows(traj).enumerate() {
        out.push_str(if k == 0 { "\n    {" } else { ",\n    {" });
        for (i, (name, x)) in cols.iter().zip(row).enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "\"{name}\": {}", format_f64(x));
        }
        out.push('}');
    }
    out.push_str("\n  ]\n}\n");
    out
}
