//! Subcommand bodies. Each returns its artifacts in memory; nothing touches
//! the output directory until the whole run has succeeded (or failed
//! numerically with a trace worth keeping).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use iswap_vqa_core::ansatz::{build_bell_ansatz, build_ghz_ansatz, run_ansatz};
use iswap_vqa_core::calib::{chevron_map, find_max_transfer};
use iswap_vqa_core::chsh::{chsh_sweep, ChshConfig as SweepConfig, ChshResult, ChshVariant};
use iswap_vqa_core::gates::{ideal_gate, iswap_like};
use iswap_vqa_core::io::{chevron_csv, chsh_csv, to_json, trace_csv, unitary_from_json, ComplexMatrixJson, DensityMatrixJson};
use iswap_vqa_core::measure::tomography_settings;
use iswap_vqa_core::qcore::{ghz_state, pure_target_fidelity, BellState};
use iswap_vqa_core::seed::derive;
use iswap_vqa_core::tomo::{
    fit_iswap_like, readout_adjusted_fidelity, reconstruct_state, unitary_to_process, GateFit, Reconstruction,
};
use iswap_vqa_core::vqa::{bell_problem, ghz_problem, train_best_of, train_ghz_staged, StopReason};
use iswap_vqa_core::{
    AnsatzCircuit, DensityMatrix, ISwapLikeParams, LossConfig, MeasurementRecord, ParamVector, ProcessMatrix,
    StateVector, TrainTrace,
};

use crate::config::{Command, EntanglerSource, GateSource, Mitigation, RunConfig, StateSource, Target, TomoInput};
use crate::CliError;

/// Seed paths below the root seed.
const TRAIN_STREAM: u64 = 1;
const RECORD_STREAM: u64 = 2;
const RECONSTRUCT_STREAM: u64 = 3;
const CHSH_STREAM: u64 = 4;
const FIT_STREAM: u64 = 5;

#[derive(Debug, Serialize)]
struct InputFile {
    path: PathBuf,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    seeds: BTreeMap<&'static str, u64>,
    inputs: Vec<InputFile>,
    artifacts: Vec<String>,
}

/// Output of a run: files to write, plus an optional numerical failure that
/// should still leave its artifacts behind.
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub failure: Option<String>,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    base_dir: &'a Path,
    seeds: BTreeMap<&'static str, u64>,
    inputs: Vec<InputFile>,
    files: Vec<(String, String)>,
}

impl<'a> Run<'a> {
    fn seed(&mut self, name: &'static str, stream: u64) -> u64 {
        let s = derive(self.cfg.seed, &[stream]);
        self.seeds.insert(name, s);
        s
    }

    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Reads an input file relative to the config's directory and records
    /// its digest in the manifest.
    fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let full = self.base_dir.join(path);
        let text = std::fs::read_to_string(&full).map_err(|e| CliError::Input(format!("cannot read {}: {e}", full.display())))?;
        let digest = Sha256::digest(text.as_bytes());
        self.inputs.push(InputFile { path: path.to_path_buf(), sha256: format!("{digest:x}") });
        Ok(text)
    }

    fn parse_input<T: for<'de> Deserialize<'de>>(&mut self, path: &Path) -> Result<T, CliError> {
        let text = self.read_input(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            CliError::Input(format!(
                "{}: at '{field}' (line {}, column {}): {inner}",
                path.display(),
                inner.line(),
                inner.column()
            ))
        })
    }

    fn finish(mut self, command: Command, failure: Option<String>) -> Outcome {
        let mut artifacts: Vec<String> = self.files.iter().map(|(n, _)| n.clone()).collect();
        artifacts.push("manifest.json".into());
        let manifest = Manifest {
            tool: "iswap-vqa",
            version: env!("CARGO_PKG_VERSION"),
            command: command.name(),
            config: self.cfg,
            seeds: self.seeds,
            inputs: self.inputs,
            artifacts,
        };
        self.files.push(("manifest.json".into(), to_json(&manifest)));
        Outcome { files: self.files, failure }
    }
}

/// `params.json`: enough to rebuild the prepared state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsArtifact {
    pub target: Target,
    pub entangler: EntanglerSource,
    pub params: ParamVector,
}

impl ParamsArtifact {
    fn circuit(&self) -> Result<AnsatzCircuit, CliError> {
        let e = self.entangler.params();
        Ok(match self.target {
            Target::Ghz => build_ghz_ansatz(e, e)?,
            _ => build_bell_ansatz(e)?,
        })
    }

    fn state(&self) -> Result<StateVector, CliError> {
        let circuit = self.circuit()?;
        Ok(run_ansatz(&circuit, &self.params, &StateVector::zero(circuit.n_qubits())?)?)
    }
}

fn target_state(target: Target) -> StateVector {
    target.bell().map_or_else(ghz_state, |b| b.state())
}

/// The state a source prepares and the ideal state it aims at.
fn resolve_state(run: &mut Run, source: &StateSource) -> Result<(StateVector, Target), CliError> {
    match source {
        StateSource::Bell(b) => {
            let t = match b {
                BellState::Beta00 => Target::Beta00,
                BellState::Beta01 => Target::Beta01,
                BellState::Beta10 => Target::Beta10,
                BellState::Beta11 => Target::Beta11,
            };
            Ok((b.state(), t))
        }
        StateSource::Ghz => Ok((ghz_state(), Target::Ghz)),
        StateSource::ParamsFile(path) => {
            let artifact: ParamsArtifact = run.parse_input(path)?;
            Ok((artifact.state()?, artifact.target))
        }
    }
}

#[derive(Serialize)]
struct ReconstructionSummary {
    fidelity: Option<f64>,
    residual: f64,
    converged: bool,
    purity: f64,
    best_restart: usize,
}

fn summarize_reconstruction(rec: &Reconstruction, reference: Option<&StateVector>) -> Result<ReconstructionSummary, CliError> {
    Ok(ReconstructionSummary {
        fidelity: reference.map(|r| pure_target_fidelity(&rec.state, r)).transpose()?,
        residual: rec.residual,
        converged: rec.converged,
        purity: rec.state.purity(),
        best_restart: rec.best_restart,
    })
}

fn density_json(rho: &DensityMatrix) -> String {
    to_json(&DensityMatrixJson::from_density(rho))
}

#[derive(Serialize)]
struct OptimizeSummary {
    target: Target,
    final_loss: f64,
    fidelity: Option<f64>,
    iterations: usize,
    stop_reason: StopReason,
    converged: bool,
    unfreeze_iteration: Option<usize>,
    init_seed: Option<u64>,
    tomography: ReconstructionSummary,
}

pub fn optimize(cfg: &RunConfig, base_dir: &Path) -> Result<Outcome, CliError> {
    let c = &cfg.optimize;
    let mut run = Run { cfg, base_dir, seeds: BTreeMap::new(), inputs: Vec::new(), files: Vec::new() };
    let n = c.target.n_qubits();
    let pipeline = c.measurement.pipeline(n)?;
    let e = c.entangler.params();
    let train_seed = run.seed("training", TRAIN_STREAM);

    let (trace, circuit, bell_stage): (TrainTrace, AnsatzCircuit, Option<TrainTrace>) = match c.target.bell() {
        Some(bell) => {
            let mut problem = bell_problem(bell, e, pipeline.clone())?;
            if c.shared_shift_seeds {
                let mut loss = problem.config().clone();
                loss.shared_shift_seeds = true;
                problem = iswap_vqa_core::vqa::VqaProblem::new(problem.circuit().clone(), loss)?;
            }
            (train_best_of(&problem, &c.train, c.restarts, train_seed)?, problem.circuit().clone(), None)
        }
        None if c.staged => {
            let mut loss = LossConfig::new(ghz_state(), pipeline.clone())?;
            loss.shared_shift_seeds = c.shared_shift_seeds;
            let result = train_ghz_staged(e, e, loss, &c.ghz_schedule, train_seed)?;
            (result.trace, build_ghz_ansatz(e, e)?, Some(result.bell_trace))
        }
        None => {
            let mut problem = ghz_problem(e, e, pipeline.clone())?;
            if c.shared_shift_seeds {
                let mut loss = problem.config().clone();
                loss.shared_shift_seeds = true;
                problem = iswap_vqa_core::vqa::VqaProblem::new(problem.circuit().clone(), loss)?;
            }
            (train_best_of(&problem, &c.train, c.restarts, train_seed)?, problem.circuit().clone(), None)
        }
    };

    let params = trace.final_params();
    let target = target_state(c.target);
    let state = run_ansatz(&circuit, &params, &StateVector::zero(n)?)?;
    let settings = tomography_settings(n)?;
    let records = pipeline.measure_all(&state, &settings, run.seed("records", RECORD_STREAM))?;
    let reconstruct_seed = run.seed("reconstruction", RECONSTRUCT_STREAM);
    let rec = reconstruct_state(&records, &settings, &c.reconstruction.options(reconstruct_seed))?;

    let summary = OptimizeSummary {
        target: c.target,
        final_loss: trace.final_loss(),
        fidelity: Some(state.overlap(&target)?),
        iterations: trace.iterations(),
        stop_reason: trace.stop_reason,
        converged: trace.converged,
        unfreeze_iteration: trace.unfreeze_iteration,
        init_seed: trace.init_seed,
        tomography: summarize_reconstruction(&rec, Some(&target))?,
    };
    run.add("trace.csv", trace_csv(&trace));
    if let Some(bell) = &bell_stage {
        run.add("bell_stage_trace.csv", trace_csv(bell));
    }
    run.add("params.json", to_json(&ParamsArtifact { target: c.target, entangler: c.entangler, params }));
    run.add("density_matrix.json", density_json(&rec.state));
    run.add("summary.json", to_json(&summary));
    let failure = (trace.stop_reason == StopReason::Diverged).then(|| "training diverged".to_string());
    Ok(run.finish(Command::Optimize, failure))
}

pub fn tomo(cfg: &RunConfig, base_dir: &Path) -> Result<Outcome, CliError> {
    let c = &cfg.tomo;
    let mut run = Run { cfg, base_dir, seeds: BTreeMap::new(), inputs: Vec::new(), files: Vec::new() };
    let (records, simulated_target, simulated) = match &c.input {
        TomoInput::State(source) => {
            let (state, target) = resolve_state(&mut run, source)?;
            let pipeline = c.measurement.pipeline(state.n_qubits())?;
            let settings = tomography_settings(state.n_qubits())?;
            let records = pipeline.measure_all(&state, &settings, run.seed("records", RECORD_STREAM))?;
            (records, Some(target), true)
        }
        TomoInput::RecordsFile(path) => {
            let records: Vec<MeasurementRecord> = run.parse_input(path)?;
            (records, None, false)
        }
    };
    let dim = records.first().map(|r| r.probabilities().len()).ok_or_else(|| CliError::Input("no measurement records".into()))?;
    let n_qubits = dim.trailing_zeros() as usize;
    if 1 << n_qubits != dim {
        return Err(CliError::Input(format!("records hold {dim} outcomes, not a power of two")));
    }
    let settings = tomography_settings(n_qubits)?;
    let reference = match &c.reference {
        Some(source) => Some(resolve_state(&mut run, source)?.1),
        None => simulated_target,
    };
    let reference = reference.map(target_state);
    if reference.as_ref().is_some_and(|r| r.n_qubits() != n_qubits) {
        return Err(CliError::Config("tomo.reference has a different qubit count than the records".into()));
    }
    let seed = run.seed("reconstruction", RECONSTRUCT_STREAM);
    let rec = reconstruct_state(&records, &settings, &c.reconstruction.options(seed))?;
    if simulated {
        run.add("records.json", to_json(&records));
    }
    run.add("density_matrix.json", density_json(&rec.state));
    run.add("summary.json", to_json(&summarize_reconstruction(&rec, reference.as_ref())?));
    Ok(run.finish(Command::Tomo, None))
}

#[derive(Serialize)]
struct SweepSummary {
    mitigated: bool,
    max_abs_s: f64,
    theta_at_max: f64,
    sigma_at_max: f64,
}

impl SweepSummary {
    fn new(r: &ChshResult, mitigated: bool) -> Self {
        Self { mitigated, max_abs_s: r.max_abs_s, theta_at_max: r.theta_at_max, sigma_at_max: r.sigma_at_max }
    }
}

#[derive(Serialize)]
struct ChshSummary {
    variant: ChshVariant,
    repetitions: usize,
    sweeps: Vec<SweepSummary>,
}

pub fn chsh(cfg: &RunConfig, base_dir: &Path) -> Result<Outcome, CliError> {
    let c = &cfg.chsh;
    let mut run = Run { cfg, base_dir, seeds: BTreeMap::new(), inputs: Vec::new(), files: Vec::new() };
    let (state, target) = resolve_state(&mut run, &c.state)?;
    if state.n_qubits() != 2 {
        return Err(CliError::Input("CHSH needs a two-qubit state".into()));
    }
    let variant = match (c.variant, target.bell()) {
        (Some(v), _) => v,
        (None, Some(b)) => ChshVariant::for_bell(b),
        (None, None) => return Err(CliError::Config("chsh.variant is required for this state".into())),
    };
    let seed = run.seed("chsh", CHSH_STREAM);
    let sweep = |mitigation: bool| -> Result<ChshResult, CliError> {
        let cfg = SweepConfig {
            variant,
            thetas: c.theta.values(),
            base_angle: c.base_angle,
            pipeline: c.measurement.pipeline_with(2, mitigation)?,
            repetitions: c.repetitions,
            seed,
        };
        Ok(chsh_sweep(&state, &cfg)?)
    };
    let primary_mitigated = c.measurement.mitigation != Mitigation::Off && c.measurement.readout.is_some();
    let primary = sweep(c.measurement.mitigation != Mitigation::Off)?;
    let mut summary = ChshSummary { variant, repetitions: primary.repetitions, sweeps: vec![SweepSummary::new(&primary, primary_mitigated)] };
    run.add("chsh.csv", chsh_csv(&primary));
    if c.measurement.mitigation == Mitigation::Compare {
        let raw = sweep(false)?;
        summary.sweeps.push(SweepSummary::new(&raw, false));
        run.add("chsh_uncorrected.csv", chsh_csv(&raw));
    }
    run.add("summary.json", to_json(&summary));
    Ok(run.finish(Command::Chsh, None))
}

#[derive(Serialize)]
struct FitSummary {
    #[serde(flatten)]
    fit: GateFit,
    infidelity: f64,
    readout_adjusted_fidelity: Option<f64>,
}

pub fn fit_gate(cfg: &RunConfig, base_dir: &Path) -> Result<Outcome, CliError> {
    let c = &cfg.fit_gate;
    let mut run = Run { cfg, base_dir, seeds: BTreeMap::new(), inputs: Vec::new(), files: Vec::new() };
    let target: ProcessMatrix = match &c.target {
        GateSource::Params(p) => unitary_to_process(&iswap_like(p)),
        GateSource::Gate(g) => {
            let u = ideal_gate(*g);
            if u.dim() != 4 {
                return Err(CliError::Config(format!("fit_gate.target: {g:?} is not a two-qubit gate")));
            }
            unitary_to_process(&u)
        }
        GateSource::UnitaryFile(path) => {
            let m: ComplexMatrixJson = run.parse_input(path)?;
            let u = unitary_from_json(&m).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            if u.dim() != 4 {
                return Err(CliError::Input(format!("{}: expected a 4x4 unitary", path.display())));
            }
            unitary_to_process(&u)
        }
        GateSource::ProcessFile(path) => {
            let m: ComplexMatrixJson = run.parse_input(path)?;
            let matrix = m.to_matrix().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            ProcessMatrix::new(matrix).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
    };
    let seed = run.seed("fit", FIT_STREAM);
    let fit = fit_iswap_like(&target, &c.options(seed))?;
    let adjusted = match (c.final_fidelity, c.identity_fidelity) {
        (Some(f), Some(id)) => Some(readout_adjusted_fidelity(f, id)?),
        _ => None,
    };
    let fitted: ISwapLikeParams = fit.params;
    run.add("target_process.json", to_json(&ComplexMatrixJson::from_matrix(target.matrix())));
    run.add("fitted_unitary.json", to_json(&ComplexMatrixJson::from_matrix(iswap_like(&fitted).matrix())));
    run.add("summary.json", to_json(&FitSummary { fit, infidelity: 1.0 - fit.fidelity, readout_adjusted_fidelity: adjusted }));
    Ok(run.finish(Command::FitGate, None))
}

#[derive(Serialize)]
struct ChevronSummary {
    coupling: f64,
    t_star: f64,
    delta_star: f64,
    p_star: f64,
    /// Resonant full-transfer time `π/(2g)`.
    resonant_full_transfer_time: f64,
}

pub fn chevron(cfg: &RunConfig, base_dir: &Path) -> Result<Outcome, CliError> {
    let c = &cfg.chevron;
    let mut run = Run { cfg, base_dir, seeds: BTreeMap::new(), inputs: Vec::new(), files: Vec::new() };
    let map = chevron_map(&c.model())?;
    let best = find_max_transfer(&map);
    run.add("chevron.csv", chevron_csv(&map));
    run.add(
        "summary.json",
        to_json(&ChevronSummary {
            coupling: c.coupling,
            t_star: best.time,
            delta_star: best.detuning,
            p_star: best.probability,
            resonant_full_transfer_time: std::f64::consts::PI / (2.0 * c.coupling),
        }),
    );
    Ok(run.finish(Command::Chevron, None))
}
