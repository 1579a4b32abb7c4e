//! `bicoherence` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.
//! Errors are written to stderr as a single JSON object.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bicoherence::coherence::{factorized, outer, BlochVector, VB};
use bicoherence::dynamics::{purification_scan, ControlLaw, DynamicsError, IntegrateOptions, Simulator};
use bicoherence::generator::{analytic_generator, TwoQubitModel};
use bicoherence::io::{self, IoError};
use bicoherence::purity_analysis::{
    self as analysis, closed_form_w, compute_w, AnalysisError, CouplingCase, CouplingKind, FactorizedState,
    ObstructionConfig,
};
use bicoherence::sampling::{random_on_sphere, uniform};
use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Directory used for outputs when `--out` is not given.
const OUT_DIR_VAR: &str = "BICOHERENCE_OUT_DIR";
/// Largest tolerated residual of the analysis oracles.
const ORACLE_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "bicoherence", version, about = "Simulate and analyze a controlled two-qubit open system in coherence-vector form")]
struct Cli {
    /// JSON file with default values for any flag (keys are the flag names with underscores).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the master equation and write a trajectory.
    Simulate(Params),
    /// Check the closed forms of w and run the case-specific analyses.
    AnalyzeW(Params),
    /// Maximum reduced-B purity reached under a set of bounded controls.
    PurificationScan(Params),
}

#[derive(Args, Deserialize, Default, Clone)]
#[serde(default, deny_unknown_fields)]
struct Params {
    /// Model JSON file.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Constant control `u1,u2,u3` (with `--control const`).
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    u0: Option<[f64; 3]>,
    /// `const`, `random-piecewise` or `feedback:protect-sigma31`.
    #[arg(long)]
    control: Option<String>,
    /// Initial Bloch vector of A (product initial state), `a1,a2,a3`.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    va: Option<[f64; 3]>,
    /// Initial Bloch vector of B, `b1,b2,b3`.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    vb: Option<[f64; 3]>,
    /// `dispersive`, `resonant` or `sigma3-sigma1`.
    #[arg(long)]
    case: Option<String>,
    /// Coupling strength for `--case`.
    #[arg(long, allow_hyphen_values = true)]
    g: Option<f64>,
    /// Random factorized states per check (analyze-w).
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated horizons (purification-scan).
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    /// Number of random piecewise-constant laws (purification-scan).
    #[arg(long)]
    laws: Option<usize>,
    /// Sup-norm bound of random controls.
    #[arg(long)]
    bound: Option<f64>,
    /// Segment length of random piecewise-constant controls.
    #[arg(long)]
    segment: Option<f64>,
    /// Purity of the initial state `s|00⟩⟨00| + (1−s)I/4` (purification-scan).
    #[arg(long)]
    initial_purity: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; defaults to a fixed name in $BICOHERENCE_OUT_DIR or the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
}

impl Params {
    fn or(self, base: Params) -> Params {
        Params {
            model: self.model.or(base.model),
            horizon: self.horizon.or(base.horizon),
            step: self.step.or(base.step),
            u0: self.u0.or(base.u0),
            control: self.control.or(base.control),
            va: self.va.or(base.va),
            vb: self.vb.or(base.vb),
            case: self.case.or(base.case),
            g: self.g.or(base.g),
            samples: self.samples.or(base.samples),
            horizons: self.horizons.or(base.horizons),
            laws: self.laws.or(base.laws),
            bound: self.bound.or(base.bound),
            segment: self.segment.or(base.segment),
            initial_purity: self.initial_purity.or(base.initial_purity),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
        }
    }
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("not a number: {p:?}"))?;
    }
    Ok(out)
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Numerical { message: String, detail: Option<Value> },
}

impl CliError {
    fn numerical(message: impl Into<String>) -> Self {
        Self::Numerical { message: message.into(), detail: None }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical { .. } => 3,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Self::Config(message) => json!({"error": "config", "message": message}),
            Self::Numerical { message, detail } => json!({"error": "numerical", "message": message, "detail": detail}),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::PhysicalityAbort { .. } => Self::numerical(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Dynamics(inner) => inner.into(),
            other => Self::Config(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Config(format!("missing --{flag}")))
}

fn positive(value: f64, flag: &str) -> CliResult<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CliError::Config(format!("--{flag} must be positive, got {value}")))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Csv,
    Json,
}

fn format_of(p: &Params, default: Format) -> CliResult<Format> {
    match p.format.as_deref() {
        None => Ok(default),
        Some("csv") => Ok(Format::Csv),
        Some("json") => Ok(Format::Json),
        Some(other) => Err(CliError::Config(format!("unknown format {other:?} (expected csv or json)"))),
    }
}

fn output_path(p: &Params, default_name: &str) -> PathBuf {
    if let Some(out) = &p.out {
        return out.clone();
    }
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(default_name),
        _ => PathBuf::from(default_name),
    }
}

fn load_model(p: &Params) -> CliResult<TwoQubitModel> {
    Ok(io::load_model(&require(p.model.clone(), "model")?)?)
}

fn parse_case(p: &Params) -> CliResult<CouplingCase> {
    let kind: CouplingKind = require(p.case.as_deref(), "case")?.parse().map_err(|e: AnalysisError| CliError::Config(e.to_string()))?;
    Ok(CouplingCase::new(kind, p.g.unwrap_or(1.0)))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(io::write_atomic(path, text.as_bytes())?)
}

fn control_law(p: &Params, model: &TwoQubitModel, horizon: f64) -> CliResult<ControlLaw> {
    let spec = p.control.as_deref().unwrap_or("const");
    if spec != "const" && p.u0.is_some() {
        return Err(CliError::Config("--u0 only applies to --control const".into()));
    }
    match spec {
        "const" => Ok(ControlLaw::constant(p.u0.unwrap_or([0.0; 3])).labeled(format!("const{:?}", p.u0.unwrap_or([0.0; 3])))),
        "random-piecewise" => {
            let seed = p.seed.unwrap_or(0);
            let bound = positive(p.bound.unwrap_or(1.0), "bound")?;
            let segment = positive(p.segment.unwrap_or(1.0), "segment")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(ControlLaw::random_piecewise(&mut rng, horizon, segment, bound)
                .labeled(format!("random-piecewise(bound={bound},segment={segment},seed={seed})")))
        }
        "feedback:protect-sigma31" => Ok(analysis::protecting_law(model)?),
        other => Err(CliError::Config(format!(
            "unknown control {other:?} (expected const, random-piecewise or feedback:protect-sigma31)"
        ))),
    }
}

fn cmd_simulate(p: Params) -> CliResult<Value> {
    let model = load_model(&p)?;
    let horizon = positive(require(p.horizon, "horizon")?, "horizon")?;
    let step = positive(p.step.unwrap_or(1e-3), "step")?;
    let format = format_of(&p, Format::Csv)?;
    let va = Vector3::from(p.va.unwrap_or([0.0; 3]));
    let vb = Vector3::from(p.vb.unwrap_or([0.0; 3]));
    let v0 = BlochVector::new(va, outer(&va, &vb) * 2.0, vb).map_err(|e| CliError::Config(format!("initial state: {e}")))?;
    let law = control_law(&p, &model, horizon)?;

    let traj = Simulator::new(&model)?.run(&v0, &law, horizon, step, &IntegrateOptions::default())?;
    let path = output_path(&p, if format == Format::Csv { "trajectory.csv" } else { "trajectory.json" });
    let text = match format {
        Format::Csv => io::trajectory_csv(&traj),
        Format::Json => io::trajectory_json(&traj),
    };
    write_text(&path, &text)?;

    let purity_b: Vec<f64> = traj.purity_b().collect();
    let last = traj.last();
    Ok(json!({
        "output": path,
        "model_hash": traj.meta.model_hash,
        "control": traj.meta.control,
        "records": traj.len(),
        "final": {
            "purity_full": last.purity(),
            "purity_A": last.reduced_purity_a(),
            "purity_B": last.reduced_purity_b(),
        },
        "purity_B": {
            "min": purity_b.iter().copied().fold(f64::INFINITY, f64::min),
            "max": purity_b.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
        "warnings": traj.meta.warnings,
    }))
}

#[derive(Serialize)]
struct Transcription {
    samples: usize,
    covered_slots: Vec<usize>,
    max_residual: f64,
    max_residual_per_slot: [Option<f64>; 9],
}

#[derive(Serialize)]
struct ReducedCheck {
    samples: usize,
    max_residual: f64,
}

#[derive(Serialize)]
struct WReport {
    case: CouplingCase,
    seed: u64,
    model_hash: String,
    /// Largest `|w_k|` seen per slot over the random factorized states.
    max_abs_w: [f64; 9],
    transcription: Option<Transcription>,
    reduced_b_generator: Option<ReducedCheck>,
    dispersive_structure_defect: Option<f64>,
    resonant_obstruction: Option<analysis::ObstructionReport>,
    /// Smallest first-order drift from `ρ_A ⊗ ½(I + σ₁)` over a control grid.
    sigma31_first_branch_drift: Option<f64>,
    passed: bool,
}

fn cmd_analyze_w(p: Params) -> CliResult<Value> {
    let case = parse_case(&p)?;
    if format_of(&p, Format::Json)? != Format::Json {
        return Err(CliError::Config("analyze-w writes JSON only".into()));
    }
    // local terms come from the model file when given; the coupling is always the case's
    let model = match &p.model {
        Some(_) => {
            let base = load_model(&p)?;
            TwoQubitModel { lambda: case.lambda(), ..base }
        }
        None => case.model(1.0, 1.0, vec![]),
    };
    let seed = p.seed.unwrap_or(0);
    let samples = p.samples.unwrap_or(500);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut max_abs_w = [0.0f64; 9];
    let mut per_slot = [None::<f64>; 9];
    let has_closed_form = case.kind != CouplingKind::Sigma3Sigma1;
    for _ in 0..samples {
        let s = FactorizedState::random(&mut rng);
        let u = [0, 1, 2].map(|_| uniform(&mut rng, -1.0, 1.0));
        let w = compute_w(&model, &s, &u)?;
        for (m, x) in max_abs_w.iter_mut().zip(w.0) {
            *m = m.max(x.abs());
        }
        if has_closed_form {
            let closed = closed_form_w(&case, &s)?;
            for k in closed.covered() {
                let r = (closed.components[k].unwrap_or(0.0) - w.0[k]).abs();
                per_slot[k] = Some(per_slot[k].unwrap_or(0.0).max(r));
            }
        }
    }
    let transcription = has_closed_form.then(|| Transcription {
        samples,
        covered_slots: (0..9).filter(|k| per_slot[*k].is_some()).map(|k| k + 1).collect(),
        max_residual: per_slot.iter().flatten().copied().fold(0.0, f64::max),
        max_residual_per_slot: per_slot,
    });

    let reduced_b_generator = match case.kind {
        CouplingKind::Resonant => None,
        _ => {
            let gen = analytic_generator(&model, &[0.0; 3]).map_err(|e| CliError::Config(e.to_string()))?;
            let mut worst: f64 = 0.0;
            for k in 0..samples {
                let a3 = if k % 2 == 0 { 0.5 } else { -0.5 };
                let vb = random_on_sphere(&mut rng, 0.5);
                let v = factorized(Vector3::new(0.0, 0.0, a3), vb);
                let rate = gen.apply(v.coords());
                let expected = analysis::reduced_b_generator(&case, model.omega_b, a3)? * vb;
                worst = worst.max((rate.fixed_rows::<3>(VB.start) - expected).amax());
            }
            Some(ReducedCheck { samples, max_residual: worst })
        }
    };

    let mut report = WReport {
        case,
        seed,
        model_hash: io::model_hash(&model),
        max_abs_w,
        transcription,
        reduced_b_generator,
        dispersive_structure_defect: None,
        resonant_obstruction: None,
        sigma31_first_branch_drift: None,
        passed: true,
    };
    match case.kind {
        CouplingKind::Dispersive => report.dispersive_structure_defect = Some(analysis::dispersive_structure_defect(&model)?),
        CouplingKind::Resonant => {
            let cfg = ObstructionConfig { seed, ..Default::default() };
            report.resonant_obstruction = Some(analysis::resonant_obstruction_check(&model, &cfg)?);
        }
        CouplingKind::Sigma3Sigma1 => {
            let grid: Vec<[f64; 3]> = (-4..=4)
                .flat_map(|i| (-4..=4).map(move |j| [f64::from(i) * 0.5, f64::from(j) * 0.5, 0.0]))
                .collect();
            let s = FactorizedState::new(Vector3::new(0.0, 0.0, 0.5), Vector3::new(0.5, 0.0, 0.0))?;
            report.sigma31_first_branch_drift = Some(analysis::sigma31_first_branch_drift(&model, &s, &grid)?);
        }
    }
    report.passed = report.transcription.as_ref().is_none_or(|t| t.max_residual <= ORACLE_TOL)
        && report.reduced_b_generator.as_ref().is_none_or(|r| r.max_residual <= ORACLE_TOL)
        && report.dispersive_structure_defect.is_none_or(|d| d <= ORACLE_TOL)
        && report.resonant_obstruction.as_ref().is_none_or(|r| r.passed);

    let path = output_path(&p, "w-report.json");
    io::write_json_atomic(&path, &report)?;
    let summary = json!({
        "output": path,
        "case": case,
        "passed": report.passed,
        "max_transcription_residual": report.transcription.as_ref().map(|t| t.max_residual),
        "max_reduced_b_residual": report.reduced_b_generator.as_ref().map(|r| r.max_residual),
    });
    if report.passed {
        Ok(summary)
    } else {
        Err(CliError::Numerical { message: "oracle residual above 1e-10 or obstruction violated".into(), detail: Some(summary) })
    }
}

/// `s|00⟩⟨00| + (1 − s)I/4` with the requested purity.
fn initial_with_purity(purity: f64) -> CliResult<BlochVector> {
    if !(0.25..=1.0).contains(&purity) {
        return Err(CliError::Config(format!("--initial-purity must lie in [1/4, 1], got {purity}")));
    }
    let s = ((purity - 0.25) / 0.75).sqrt();
    let half = Vector3::new(0.0, 0.0, 0.5 * s);
    let pure = factorized(Vector3::new(0.0, 0.0, 0.5), Vector3::new(0.0, 0.0, 0.5));
    BlochVector::new(half, pure.vab() * s, half).map_err(|e| CliError::Config(e.to_string()))
}

fn cmd_purification_scan(p: Params) -> CliResult<Value> {
    let model = load_model(&p)?;
    let format = format_of(&p, Format::Json)?;
    let step = positive(p.step.unwrap_or(1e-2), "step")?;
    let horizons = p.horizons.clone().unwrap_or_else(|| vec![10.0, 20.0, 40.0]);
    if horizons.is_empty() {
        return Err(CliError::Config("--horizons must not be empty".into()));
    }
    for h in &horizons {
        positive(*h, "horizons")?;
    }
    let longest = horizons.iter().copied().fold(0.0, f64::max);
    let seed = p.seed.unwrap_or(0);
    let bound = positive(p.bound.unwrap_or(1.0), "bound")?;
    let segment = positive(p.segment.unwrap_or(1.0), "segment")?;
    let n_laws = p.laws.unwrap_or(10);
    let v0 = match p.initial_purity {
        Some(purity) => initial_with_purity(purity)?,
        None => BlochVector::maximally_mixed(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut laws = vec![ControlLaw::zero().labeled("zero")];
    laws.extend((0..n_laws).map(|k| ControlLaw::random_piecewise(&mut rng, longest, segment, bound).labeled(format!("random-{k}"))));
    let report = purification_scan(&model, &v0, &laws, &horizons, step)?;

    let path = output_path(&p, if format == Format::Csv { "purification.csv" } else { "purification.json" });
    match format {
        Format::Json => io::write_json_atomic(
            &path,
            &json!({
                "seed": seed,
                "model_hash": io::model_hash(&model),
                "bound": bound,
                "segment": segment,
                "report": report,
            }),
        )?,
        Format::Csv => {
            let mut text = String::from("law,horizon,max_purity_B,t_at_max,margin\n");
            for e in &report.entries {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    e.law,
                    io::format_f64(e.horizon),
                    io::format_f64(e.max_purity_b),
                    io::format_f64(e.t_at_max),
                    io::format_f64(e.margin)
                ));
            }
            write_text(&path, &text)?;
        }
    }
    let summary = json!({
        "output": path,
        "label": report.label,
        "laws": laws.len(),
        "horizons": horizons,
        "initial_purity": report.initial_purity,
        "min_margin": report.min_margin,
    });
    if report.min_margin > 0.0 {
        Ok(summary)
    } else {
        Err(CliError::Numerical { message: "reduced-B purity reached 1".into(), detail: Some(summary) })
    }
}

fn run(cli: Cli) -> CliResult<Value> {
    let base = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<Params>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => Params::default(),
    };
    match cli.command {
        Command::Simulate(p) => cmd_simulate(p.or(base)),
        Command::AnalyzeW(p) => cmd_analyze_w(p.or(base)),
        Command::PurificationScan(p) => cmd_purification_scan(p.or(base)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::Config(e.to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}
