//! JSON experiment configuration.
//!
//! Loading is strict: unknown keys are rejected (with a spelling suggestion
//! when one is close), and every parameter is validated by building the
//! simulation before anything runs. The schema is documented in
//! `docs/config.schema.json`.

use std::fs;
use std::path::{Path, PathBuf};

use neurofl_core::{
    binomial_gains, default_network, duffing_plant, pendulum_plant, vanderpol_plant, ControlMode,
    ControllerState, DisturbanceSignal, DisturbanceSpec, PlantModel, ReferenceSpec, Simulation,
    Sinusoid,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantConfig {
    Pendulum {
        #[serde(default = "one")]
        m: f64,
        #[serde(default = "one")]
        l: f64,
        #[serde(default = "default_damping")]
        c: f64,
        #[serde(default = "default_gravity")]
        g: f64,
    },
    Duffing {
        #[serde(default = "default_duffing_a")]
        a: f64,
        #[serde(default = "one")]
        b1: f64,
        #[serde(default = "one")]
        b2: f64,
        #[serde(default = "one")]
        gain: f64,
    },
    Vanderpol {
        #[serde(default = "one")]
        mu: f64,
        #[serde(default = "one")]
        gain: f64,
    },
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig::Pendulum {
            m: 1.0,
            l: 1.0,
            c: default_damping(),
            g: default_gravity(),
        }
    }
}

impl PlantConfig {
    pub fn build(&self) -> neurofl_core::Result<PlantModel> {
        match *self {
            PlantConfig::Pendulum { m, l, c, g } => pendulum_plant(m, l, c, g),
            PlantConfig::Duffing { a, b1, b2, gain } => duffing_plant(a, b1, b2, gain),
            PlantConfig::Vanderpol { mu, gain } => vanderpol_plant(mu, gain),
        }
    }
}

/// `bound` defaults to the signal's own amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceConfig {
    #[default]
    None,
    Constant {
        offset: f64,
        #[serde(default)]
        bound: Option<f64>,
    },
    Sinusoid {
        amplitude: f64,
        /// Hz.
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        bound: Option<f64>,
    },
    /// Seeded from the top-level `seed`, sampled every `dt_ctrl`.
    Noise {
        amplitude: f64,
        /// Low-pass cutoff, Hz.
        cutoff: f64,
        #[serde(default)]
        bound: Option<f64>,
    },
}

impl DisturbanceConfig {
    pub fn build(&self, seed: u64, sample_period: f64) -> DisturbanceSpec {
        let (spec, bound) = match *self {
            DisturbanceConfig::None => (DisturbanceSpec::none(), None),
            DisturbanceConfig::Constant { offset, bound } => {
                (DisturbanceSpec::constant(offset), bound)
            }
            DisturbanceConfig::Sinusoid {
                amplitude,
                frequency,
                phase,
                bound,
            } => (
                DisturbanceSpec::sinusoid(amplitude, frequency, phase),
                bound,
            ),
            DisturbanceConfig::Noise {
                amplitude,
                cutoff,
                bound,
            } => (
                DisturbanceSpec::noise(amplitude, cutoff, seed, sample_period),
                bound,
            ),
        };
        match bound {
            Some(b) => spec.with_bound(b),
            None => spec,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinusoidConfig {
    pub amplitude: f64,
    /// rad/s.
    pub angular_frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

impl From<SinusoidConfig> for Sinusoid {
    fn from(c: SinusoidConfig) -> Self {
        Sinusoid {
            amplitude: c.amplitude,
            angular_frequency: c.angular_frequency,
            phase: c.phase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceConfig {
    Constant {
        level: f64,
    },
    Sinusoid {
        amplitude: f64,
        angular_frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    SumOfSinusoids {
        terms: Vec<SinusoidConfig>,
    },
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig::Sinusoid {
            amplitude: 1.0,
            angular_frequency: 1.0,
            phase: 0.0,
        }
    }
}

impl ReferenceConfig {
    pub fn build(&self) -> ReferenceSpec {
        match self {
            ReferenceConfig::Constant { level } => ReferenceSpec::Constant { level: *level },
            ReferenceConfig::Sinusoid {
                amplitude,
                angular_frequency,
                phase,
            } => ReferenceSpec::Sinusoid(Sinusoid {
                amplitude: *amplitude,
                angular_frequency: *angular_frequency,
                phase: *phase,
            }),
            ReferenceConfig::SumOfSinusoids { terms } => {
                ReferenceSpec::SumOfSinusoids(terms.iter().copied().map(Sinusoid::from).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    #[default]
    Compensated,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Compensated => "compensated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub neuron_count: usize,
    pub s_range: f64,
    pub eta: f64,
    pub kappa: f64,
    pub weight_cap: Option<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            neuron_count: 11,
            s_range: 0.5,
            eta: 20.0,
            kappa: 0.0,
            weight_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub prefix: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            prefix: "run".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    /// Plant actually integrated; the controller always uses `plant`.
    pub truth_plant: Option<PlantConfig>,
    pub disturbance: DisturbanceConfig,
    pub reference: ReferenceConfig,
    pub mode: Mode,
    pub lambda: f64,
    pub network: NetworkConfig,
    pub u_limit: Option<f64>,
    pub duration: f64,
    pub dt_ctrl: f64,
    pub substeps: usize,
    /// Starts on the reference when absent.
    pub initial_state: Option<Vec<f64>>,
    pub seed: u64,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            plant: PlantConfig::default(),
            truth_plant: None,
            disturbance: DisturbanceConfig::default(),
            reference: ReferenceConfig::default(),
            mode: Mode::default(),
            lambda: 2.0,
            network: NetworkConfig::default(),
            u_limit: None,
            duration: 10.0,
            dt_ctrl: 1e-3,
            substeps: 1,
            initial_state: None,
            seed: 0,
            output: OutputConfig::default(),
        }
    }
}

/// Everything needed to run one experiment.
#[derive(Debug)]
pub struct Experiment {
    pub simulation: Simulation,
    pub disturbance: DisturbanceSpec,
}

impl Experiment {
    pub fn disturbance_signal(&self) -> DisturbanceSignal {
        DisturbanceSignal::new(self.disturbance.clone())
            .expect("disturbance validated when the experiment was built")
    }
}

impl ExperimentConfig {
    /// Checks every parameter, naming the offending key on failure.
    pub fn validate(&self) -> Result<(), CliError> {
        self.build(self.mode).map(|_| ())
    }

    pub fn build(&self, mode: Mode) -> Result<Experiment, CliError> {
        positive("lambda", self.lambda)?;
        positive("duration", self.duration)?;
        positive("dt_ctrl", self.dt_ctrl)?;
        if self.substeps == 0 {
            return Err(invalid("substeps", "must be >= 1", self.substeps));
        }
        if let Some(limit) = self.u_limit {
            positive("u_limit", limit)?;
        }
        let net = &self.network;
        if net.neuron_count == 0 {
            return Err(invalid(
                "network.neuron_count",
                "must be >= 1",
                net.neuron_count,
            ));
        }
        positive("network.s_range", net.s_range)?;
        positive("network.eta", net.eta)?;
        if !(net.kappa >= 0.0 && net.kappa.is_finite()) {
            return Err(invalid("network.kappa", "must be >= 0", net.kappa));
        }
        if let Some(cap) = net.weight_cap {
            positive("network.weight_cap", cap)?;
        }

        let nominal = self
            .plant
            .build()
            .map_err(|e| CliError::invalid("plant", e))?;
        let truth = match &self.truth_plant {
            Some(p) => p.build().map_err(|e| CliError::invalid("truth_plant", e))?,
            None => nominal.clone(),
        };
        if let Some(x0) = &self.initial_state {
            if x0.len() != nominal.order() {
                return Err(CliError::invalid(
                    "initial_state",
                    format!(
                        "must have {} components for plant '{}', got {}",
                        nominal.order(),
                        nominal.name(),
                        x0.len()
                    ),
                ));
            }
        }

        let gains = binomial_gains(nominal.order(), self.lambda)
            .map_err(|e| CliError::invalid("lambda", e))?;
        let control_mode = match mode {
            Mode::Baseline => ControlMode::Baseline,
            Mode::Compensated => {
                let network = default_network(net.neuron_count, net.s_range, net.eta)
                    .and_then(|n| n.with_leakage(net.kappa))
                    .and_then(|n| n.with_weight_cap(net.weight_cap))
                    .map_err(|e| CliError::invalid("network", e))?;
                ControlMode::Compensated(network)
            }
        };
        let controller = ControllerState::new(gains, control_mode)
            .with_u_limit(self.u_limit)
            .map_err(|e| CliError::invalid("u_limit", e))?;

        let disturbance = self.disturbance.build(self.seed, self.dt_ctrl);
        disturbance
            .validate()
            .map_err(|e| CliError::invalid("disturbance", e))?;

        let reference = self.reference.build();
        let mut simulation = Simulation::new(truth, nominal, controller, reference);
        simulation.duration = self.duration;
        simulation.dt_ctrl = self.dt_ctrl;
        simulation.substeps = self.substeps;
        simulation.initial_state = self.initial_state.clone();
        simulation
            .validate()
            .map_err(|e| CliError::invalid("reference", e))?;

        Ok(Experiment {
            simulation,
            disturbance,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        CliError::Config(format!(
            "parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    check_keys(&value)?;
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

const TOP_KEYS: &[&str] = &[
    "plant",
    "truth_plant",
    "disturbance",
    "reference",
    "mode",
    "lambda",
    "network",
    "u_limit",
    "duration",
    "dt_ctrl",
    "substeps",
    "initial_state",
    "seed",
    "output",
];
const NETWORK_KEYS: &[&str] = &["neuron_count", "s_range", "eta", "kappa", "weight_cap"];
const OUTPUT_KEYS: &[&str] = &["dir", "prefix"];
const SINUSOID_KEYS: &[&str] = &["amplitude", "angular_frequency", "phase"];

const PLANT_KINDS: &[(&str, &[&str])] = &[
    ("pendulum", &["kind", "m", "l", "c", "g"]),
    ("duffing", &["kind", "a", "b1", "b2", "gain"]),
    ("vanderpol", &["kind", "mu", "gain"]),
];
const DISTURBANCE_KINDS: &[(&str, &[&str])] = &[
    ("none", &["kind"]),
    ("constant", &["kind", "offset", "bound"]),
    (
        "sinusoid",
        &["kind", "amplitude", "frequency", "phase", "bound"],
    ),
    ("noise", &["kind", "amplitude", "cutoff", "bound"]),
];
const REFERENCE_KINDS: &[(&str, &[&str])] = &[
    ("constant", &["kind", "level"]),
    (
        "sinusoid",
        &["kind", "amplitude", "angular_frequency", "phase"],
    ),
    ("sum_of_sinusoids", &["kind", "terms"]),
];

/// Known keys at the top level of the configuration object.
pub fn top_level_keys() -> &'static [&'static str] {
    TOP_KEYS
}

fn check_keys(value: &Value) -> Result<(), CliError> {
    let top = as_object(value, "<root>")?;
    check_object(top, "", TOP_KEYS)?;

    if let Some(v) = top.get("plant") {
        check_tagged(v, "plant", PLANT_KINDS)?;
    }
    if let Some(v) = top.get("truth_plant").filter(|v| !v.is_null()) {
        check_tagged(v, "truth_plant", PLANT_KINDS)?;
    }
    if let Some(v) = top.get("disturbance") {
        check_tagged(v, "disturbance", DISTURBANCE_KINDS)?;
    }
    if let Some(v) = top.get("reference") {
        check_tagged(v, "reference", REFERENCE_KINDS)?;
        if let Some(Value::Array(terms)) = v.get("terms") {
            for (i, term) in terms.iter().enumerate() {
                let ctx = format!("reference.terms[{i}]");
                check_object(as_object(term, &ctx)?, &ctx, SINUSOID_KEYS)?;
            }
        }
    }
    if let Some(v) = top.get("network") {
        check_object(as_object(v, "network")?, "network", NETWORK_KEYS)?;
    }
    if let Some(v) = top.get("output") {
        check_object(as_object(v, "output")?, "output", OUTPUT_KEYS)?;
    }
    Ok(())
}

fn as_object<'a>(value: &'a Value, ctx: &str) -> Result<&'a Map<String, Value>, CliError> {
    value
        .as_object()
        .ok_or_else(|| CliError::Config(format!("`{ctx}` must be a JSON object")))
}

fn check_tagged(value: &Value, ctx: &str, kinds: &[(&str, &[&str])]) -> Result<(), CliError> {
    let obj = as_object(value, ctx)?;
    let names: Vec<&str> = kinds.iter().map(|(k, _)| *k).collect();
    let kind = obj.get("kind").and_then(Value::as_str).ok_or_else(|| {
        CliError::Config(format!(
            "`{ctx}.kind` is required, one of: {}",
            names.join(", ")
        ))
    })?;
    let Some((_, keys)) = kinds.iter().find(|(k, _)| *k == kind) else {
        return Err(CliError::Config(format!(
            "unknown {ctx} kind \"{kind}\"{}; expected one of: {}",
            suggestion(kind, &names),
            names.join(", ")
        )));
    };
    check_object(obj, ctx, keys)
}

fn check_object(obj: &Map<String, Value>, ctx: &str, known: &[&str]) -> Result<(), CliError> {
    for key in obj.keys() {
        if !known.contains(&key.as_str()) {
            let path = if ctx.is_empty() {
                key.clone()
            } else {
                format!("{ctx}.{key}")
            };
            return Err(CliError::Config(format!(
                "unknown key \"{path}\"{}",
                suggestion(key, known)
            )));
        }
    }
    Ok(())
}

/// `"; did you mean \"lambda\"?"` when some known key is within edit distance 2.
fn suggestion(key: &str, known: &[&str]) -> String {
    known
        .iter()
        .map(|k| (strsim::levenshtein(key, k), *k))
        .filter(|(d, _)| *d <= 2)
        .min()
        .map(|(_, k)| format!("; did you mean \"{k}\"?"))
        .unwrap_or_default()
}

fn positive(key: &str, value: f64) -> Result<(), CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, "must be > 0", value))
    }
}

fn invalid(key: &str, constraint: &str, got: impl std::fmt::Display) -> CliError {
    CliError::invalid(key, format!("{constraint} (got {got})"))
}

fn one() -> f64 {
    1.0
}

fn default_damping() -> f64 {
    0.1
}

fn default_gravity() -> f64 {
    9.81
}

fn default_duffing_a() -> f64 {
    0.2
}
