//! Run configuration: one JSON document, every field defaulted, unknown keys
//! rejected. Command-line flags are merged in before anything runs and the
//! merged result is what the manifest records.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use iswap_vqa_core::calib::{symmetric_grid, uniform_grid, ChevronModel, DEFAULT_COUPLING};
use iswap_vqa_core::chsh::{ChshVariant, DEFAULT_REPETITIONS};
use iswap_vqa_core::measure::{DEFAULT_CONDITION_CAP, DEFAULT_SHOTS};
use iswap_vqa_core::qcore::BellState;
use iswap_vqa_core::tomo::{FitOptions, TomographyOptions};
use iswap_vqa_core::vqa::{GhzSchedule, TrainOptions};
use iswap_vqa_core::{ISwapLikeParams, IdealGate, MeasurementPipeline, ReadoutModel, SamplingMode};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub optimize: OptimizeConfig,
    pub tomo: TomoConfig,
    pub chsh: ChshConfig,
    pub fit_gate: FitGateConfig,
    pub chevron: ChevronConfig,
}

/// Which state a run prepares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Beta00,
    Beta01,
    Beta10,
    Beta11,
    Ghz,
}

impl Target {
    pub fn bell(&self) -> Option<BellState> {
        match self {
            Target::Beta00 => Some(BellState::Beta00),
            Target::Beta01 => Some(BellState::Beta01),
            Target::Beta10 => Some(BellState::Beta10),
            Target::Beta11 => Some(BellState::Beta11),
            Target::Ghz => None,
        }
    }

    pub fn n_qubits(&self) -> usize {
        if *self == Target::Ghz {
            3
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EntanglerSource {
    Ideal,
    /// The gate model fitted to the calibrated device.
    Fitted,
    Explicit(ISwapLikeParams),
}

impl EntanglerSource {
    pub fn params(&self) -> ISwapLikeParams {
        match self {
            EntanglerSource::Ideal => ISwapLikeParams::ideal(),
            EntanglerSource::Fitted => ISwapLikeParams::fitted_device(),
            EntanglerSource::Explicit(p) => *p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mitigation {
    On,
    Off,
    /// Corrected and uncorrected runs side by side (CHSH only).
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReadoutConfig {
    /// Same assignment fidelity for both outcomes of every qubit.
    Symmetric(f64),
    /// `[P(read 0 | 0), P(read 1 | 1)]` per qubit, qubit 0 first.
    PerQubit(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    pub mode: Mode,
    pub shots: u64,
    pub readout: Option<ReadoutConfig>,
    pub mitigation: Mitigation,
    pub condition_cap: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self { mode: Mode::Exact, shots: DEFAULT_SHOTS, readout: None, mitigation: Mitigation::On, condition_cap: DEFAULT_CONDITION_CAP }
    }
}

impl MeasurementConfig {
    fn readout_model(&self, n_qubits: usize) -> Result<Option<ReadoutModel>, CliError> {
        let model = match &self.readout {
            None => return Ok(None),
            Some(ReadoutConfig::Symmetric(f)) => ReadoutModel::symmetric(n_qubits, *f)?,
            Some(ReadoutConfig::PerQubit(list)) => {
                if list.len() != n_qubits {
                    return Err(CliError::Config(format!(
                        "readout.per_qubit lists {} qubits, the run uses {n_qubits}",
                        list.len()
                    )));
                }
                ReadoutModel::from_assignment_fidelities(&list.iter().map(|f| (f[0], f[1])).collect::<Vec<_>>())?
            }
        };
        Ok(Some(model))
    }

    /// The pipeline with mitigation as configured (`compare` counts as on).
    pub fn pipeline(&self, n_qubits: usize) -> Result<MeasurementPipeline, CliError> {
        self.pipeline_with(n_qubits, self.mitigation != Mitigation::Off)
    }

    pub fn pipeline_with(&self, n_qubits: usize, mitigation: bool) -> Result<MeasurementPipeline, CliError> {
        let mode = match self.mode {
            Mode::Exact => SamplingMode::Exact,
            Mode::Sampled => SamplingMode::Sampled { shots: self.shots },
        };
        let pipeline = MeasurementPipeline {
            mode,
            readout: self.readout_model(n_qubits)?,
            mitigation,
            condition_cap: self.condition_cap,
        };
        pipeline.validate(n_qubits)?;
        Ok(pipeline)
    }

    fn reject_compare(&self, section: &str) -> Result<(), CliError> {
        if self.mitigation == Mitigation::Compare {
            return Err(CliError::Config(format!("{section}.measurement.mitigation: 'compare' is only available for chsh")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub grad_tol: f64,
    pub stall_tol: f64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        let d = TomographyOptions::default();
        Self { restarts: d.restarts, max_iters: d.max_iters, residual_tol: d.residual_tol, grad_tol: d.grad_tol, stall_tol: d.stall_tol }
    }
}

impl ReconstructionConfig {
    pub fn options(&self, seed: u64) -> TomographyOptions {
        TomographyOptions {
            restarts: self.restarts,
            max_iters: self.max_iters,
            residual_tol: self.residual_tol,
            grad_tol: self.grad_tol,
            stall_tol: self.stall_tol,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub target: Target,
    pub entangler: EntanglerSource,
    pub measurement: MeasurementConfig,
    /// Random restarts for Bell targets and unstaged GHZ runs.
    pub restarts: usize,
    pub train: TrainOptions,
    /// GHZ only: Bell pre-stage, then frozen first block, then all parameters.
    pub staged: bool,
    pub ghz_schedule: GhzSchedule,
    pub shared_shift_seeds: bool,
    pub reconstruction: ReconstructionConfig,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            target: Target::Beta00,
            entangler: EntanglerSource::Ideal,
            measurement: MeasurementConfig::default(),
            restarts: 10,
            train: TrainOptions::default(),
            staged: true,
            ghz_schedule: GhzSchedule::default(),
            shared_shift_seeds: false,
            reconstruction: ReconstructionConfig::default(),
        }
    }
}

/// Where a two- or three-qubit state comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSource {
    Bell(BellState),
    Ghz,
    /// A `params.json` written by `optimize`.
    ParamsFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TomoInput {
    /// Records simulated from a state through the measurement pipeline.
    State(StateSource),
    /// A `records.json` list of measurement records.
    RecordsFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomoConfig {
    pub input: TomoInput,
    /// Reference state for the reported fidelity; defaults to the simulated
    /// state when the input is one.
    pub reference: Option<StateSource>,
    pub measurement: MeasurementConfig,
    pub reconstruction: ReconstructionConfig,
}

impl Default for TomoConfig {
    fn default() -> Self {
        Self {
            input: TomoInput::State(StateSource::Bell(BellState::Beta00)),
            reference: None,
            measurement: MeasurementConfig::default(),
            reconstruction: ReconstructionConfig::default(),
        }
    }
}

/// `start + k·step` for `k < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        uniform_grid(self.start, self.step, self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChshConfig {
    pub state: StateSource,
    /// Defaults to `s1` for β00/β01 and `s2` for β10/β11.
    pub variant: Option<ChshVariant>,
    pub theta: GridConfig,
    pub base_angle: f64,
    pub repetitions: usize,
    pub measurement: MeasurementConfig,
}

impl Default for ChshConfig {
    fn default() -> Self {
        Self {
            state: StateSource::Bell(BellState::Beta00),
            variant: None,
            theta: GridConfig { start: 0.0, step: std::f64::consts::PI / 32.0, count: 65 },
            base_angle: 0.0,
            repetitions: DEFAULT_REPETITIONS,
            measurement: MeasurementConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GateSource {
    Params(ISwapLikeParams),
    Gate(IdealGate),
    /// JSON with `real` and `imag` 4×4 arrays.
    UnitaryFile(PathBuf),
    /// JSON with `real` and `imag` 16×16 arrays of a normalized Choi state.
    ProcessFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitGateConfig {
    pub target: GateSource,
    pub restarts: usize,
    pub max_iters: usize,
    pub fidelity_floor: f64,
    /// Measured process fidelity of the full operation, if known.
    pub final_fidelity: Option<f64>,
    /// Measured process fidelity of the identity operation, if known.
    pub identity_fidelity: Option<f64>,
}

impl Default for FitGateConfig {
    fn default() -> Self {
        let d = FitOptions::default();
        Self {
            target: GateSource::Params(ISwapLikeParams::fitted_device()),
            restarts: d.restarts,
            max_iters: d.max_iters,
            fidelity_floor: d.fidelity_floor,
            final_fidelity: None,
            identity_fidelity: None,
        }
    }
}

impl FitGateConfig {
    pub fn options(&self, seed: u64) -> FitOptions {
        FitOptions { restarts: self.restarts, max_iters: self.max_iters, fidelity_floor: self.fidelity_floor, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChevronConfig {
    /// rad/ns
    pub coupling: f64,
    /// ns
    pub time: GridConfig,
    /// Symmetric detuning grid, rad/ns.
    pub detuning_extent: f64,
    pub detuning_half_points: usize,
}

impl Default for ChevronConfig {
    fn default() -> Self {
        Self {
            coupling: DEFAULT_COUPLING,
            time: GridConfig { start: 0.0, step: 1.0, count: 71 },
            detuning_extent: 0.2,
            detuning_half_points: 40,
        }
    }
}

impl ChevronConfig {
    pub fn model(&self) -> ChevronModel {
        ChevronModel {
            coupling: self.coupling,
            times: self.time.values(),
            detunings: symmetric_grid(self.detuning_extent, self.detuning_half_points),
        }
    }
}

/// Overrides taken from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Optimize,
    Tomo,
    Chsh,
    FitGate,
    Chevron,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Optimize => "optimize",
            Command::Tomo => "tomo",
            Command::Chsh => "chsh",
            Command::FitGate => "fit-gate",
            Command::Chevron => "chevron",
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        let full = inner.to_string();
        let message = full.strip_suffix(&format!(" at line {line} column {column}")).unwrap_or(&full);
        CliError::Config(format!("at '{path}' (line {line}, column {column}): {message}"))
    })
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{}: {msg}", p.display())),
                other => other,
            })
        }
    }
}

impl RunConfig {
    fn measurement_mut(&mut self, command: Command) -> Option<&mut MeasurementConfig> {
        match command {
            Command::Optimize => Some(&mut self.optimize.measurement),
            Command::Tomo => Some(&mut self.tomo.measurement),
            Command::Chsh => Some(&mut self.chsh.measurement),
            Command::FitGate | Command::Chevron => None,
        }
    }

    pub fn apply(&mut self, command: Command, o: &Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if o.shots.is_some() || o.exact {
            let Some(m) = self.measurement_mut(command) else {
                return Err(CliError::Config(format!("--shots and --exact do not apply to {}", command.name())));
            };
            if let Some(shots) = o.shots {
                m.mode = Mode::Sampled;
                m.shots = shots;
            }
            if o.exact {
                m.mode = Mode::Exact;
            }
        }
        Ok(())
    }

    /// Checks the section `command` will use without running anything.
    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        match command {
            Command::Optimize => {
                let c = &self.optimize;
                c.measurement.reject_compare("optimize")?;
                c.measurement.pipeline(c.target.n_qubits())?;
                c.entangler.params().validate()?;
                if c.restarts == 0 {
                    return Err(CliError::Config("optimize.restarts must be at least 1".into()));
                }
                if c.target == Target::Ghz && c.staged && c.ghz_schedule.bell_restarts == 0 {
                    return Err(CliError::Config("optimize.ghz_schedule.bell_restarts must be at least 1".into()));
                }
            }
            Command::Tomo => {
                self.tomo.measurement.reject_compare("tomo")?;
                if self.tomo.reconstruction.restarts == 0 {
                    return Err(CliError::Config("tomo.reconstruction.restarts must be at least 1".into()));
                }
            }
            Command::Chsh => {
                let c = &self.chsh;
                c.measurement.pipeline(2)?;
                if c.theta.count == 0 {
                    return Err(CliError::Config("chsh.theta.count must be at least 1".into()));
                }
                if c.repetitions == 0 {
                    return Err(CliError::Config("chsh.repetitions must be at least 1".into()));
                }
                if matches!(c.state, StateSource::Ghz) {
                    return Err(CliError::Config("chsh.state: CHSH needs a two-qubit state".into()));
                }
            }
            Command::FitGate => {
                if let GateSource::Params(p) = &self.fit_gate.target {
                    p.validate()?;
                }
                if self.fit_gate.restarts == 0 {
                    return Err(CliError::Config("fit_gate.restarts must be at least 1".into()));
                }
                if self.fit_gate.final_fidelity.is_some() != self.fit_gate.identity_fidelity.is_some() {
                    return Err(CliError::Config("fit_gate: final_fidelity and identity_fidelity go together".into()));
                }
            }
            Command::Chevron => self.chevron.model().validate()?,
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(parse_config("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let err = parse_config(r#"{"optimize": {"train": {"learning_rat": 0.1}}}"#).unwrap_err();
        let CliError::Config(msg) = err else { panic!("wrong error kind") };
        assert!(msg.contains("optimize.train"), "{msg}");
        assert!(msg.contains("learning_rat"), "{msg}");
    }

    #[test]
    fn invalid_target_is_a_config_error() {
        let err = parse_config(r#"{"optimize": {"target": "beta22"}}"#).unwrap_err();
        let CliError::Config(msg) = err else { panic!("wrong error kind") };
        assert!(msg.contains("optimize.target"), "{msg}");
    }

    #[test]
    fn tagged_sources_parse() {
        let c = parse_config(
            r#"{"optimize": {"target": "ghz", "entangler": {"explicit": {"theta": 1.5, "phi": 0, "delta_plus": 0, "delta_minus": 0, "delta_minus_off": 0}}},
                "chsh": {"state": {"params_file": "run/params.json"}, "measurement": {"mode": "sampled", "readout": {"symmetric": 0.85}, "mitigation": "compare"}},
                "fit_gate": {"target": {"gate": "cnot"}}}"#,
        )
        .unwrap();
        assert_eq!(c.optimize.target, Target::Ghz);
        assert_eq!(c.optimize.entangler.params().theta, 1.5);
        assert_eq!(c.chsh.measurement.readout, Some(ReadoutConfig::Symmetric(0.85)));
        assert_eq!(c.fit_gate.target, GateSource::Gate(IdealGate::Cnot));
    }

    #[test]
    fn overrides_merge() {
        let mut c = RunConfig::default();
        c.apply(Command::Tomo, &Overrides { seed: Some(9), shots: Some(100), exact: false }).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!((c.tomo.measurement.mode, c.tomo.measurement.shots), (Mode::Sampled, 100));
        assert!(c.apply(Command::Chevron, &Overrides { shots: Some(10), ..Overrides::default() }).is_err());
    }

    #[test]
    fn compare_is_chsh_only() {
        let mut c = RunConfig::default();
        c.optimize.measurement.mitigation = Mitigation::Compare;
        assert!(c.validate(Command::Optimize).is_err());
        c.chsh.measurement.mitigation = Mitigation::Compare;
        assert!(c.validate(Command::Chsh).is_ok());
    }
}
