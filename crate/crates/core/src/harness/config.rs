use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{diag, Mat, Vector};
use crate::optimizer::{CostSpec, LineSearchOptions, SolveOptions};
use crate::plants::{
    Cartpole, NoiseSpec, ObservationMode, Pendulum, PlantModel, Sensor, Simulator, SyntheticLtv,
};
use crate::sysid::{min_rollouts, PerturbationPlan};

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "PODILQR_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlantKind {
    Pendulum,
    Cartpole,
    SyntheticLtv,
}

impl FromStr for PlantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(PlantKind::Pendulum),
            "cartpole" => Ok(PlantKind::Cartpole),
            "synthetic_ltv" => Ok(PlantKind::SyntheticLtv),
            other => Err(Error::config("plant", format!("unknown plant `{other}`"))),
        }
    }
}

impl fmt::Display for PlantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlantKind::Pendulum => "pendulum",
            PlantKind::Cartpole => "cartpole",
            PlantKind::SyntheticLtv => "synthetic_ltv",
        })
    }
}

/// The experimental arms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    NominalNoiseless,
    FullyObservedNoisyUnmodified,
    FullyObservedNoisyModified,
    PartialNoisyUnmodified,
    PartialNoisyModified,
    PartialNoisyAveraged,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::NominalNoiseless,
        Scenario::FullyObservedNoisyUnmodified,
        Scenario::FullyObservedNoisyModified,
        Scenario::PartialNoisyUnmodified,
        Scenario::PartialNoisyModified,
        Scenario::PartialNoisyAveraged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::NominalNoiseless => "NominalNoiseless",
            Scenario::FullyObservedNoisyUnmodified => "FullyObservedNoisy_Unmodified",
            Scenario::FullyObservedNoisyModified => "FullyObservedNoisy_Modified",
            Scenario::PartialNoisyUnmodified => "PartialNoisy_Unmodified",
            Scenario::PartialNoisyModified => "PartialNoisy_Modified",
            Scenario::PartialNoisyAveraged => "PartialNoisy_Averaged",
        }
    }

    pub fn is_noisy(self) -> bool {
        self != Scenario::NominalNoiseless
    }

    pub fn is_partial(self) -> bool {
        matches!(
            self,
            Scenario::PartialNoisyUnmodified
                | Scenario::PartialNoisyModified
                | Scenario::PartialNoisyAveraged
        )
    }

    /// Observation mode this scenario is bound to; `None` leaves it to the config.
    pub fn bound_observation(self) -> Option<ObservationMode> {
        match self {
            Scenario::NominalNoiseless => None,
            Scenario::FullyObservedNoisyUnmodified | Scenario::FullyObservedNoisyModified => {
                Some(ObservationMode::FullState)
            }
            _ => Some(ObservationMode::PositionsOnly),
        }
    }

    /// Whether identification rollouts apply the previous iteration's gains.
    pub fn identification_feedback(self) -> bool {
        !matches!(
            self,
            Scenario::FullyObservedNoisyUnmodified | Scenario::PartialNoisyUnmodified
        )
    }

    pub fn is_averaged(self) -> bool {
        self == Scenario::PartialNoisyAveraged
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::config("scenario", format!("unknown scenario `{s}`")))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn observation_name(mode: ObservationMode) -> &'static str {
    match mode {
        ObservationMode::FullState => "full",
        ObservationMode::PositionsOnly => "positions",
    }
}

fn parse_observation(s: &str) -> Result<ObservationMode> {
    match s {
        "full" => Ok(ObservationMode::FullState),
        "positions" => Ok(ObservationMode::PositionsOnly),
        other => Err(Error::config(
            "observation",
            format!("expected `full` or `positions`, got `{other}`"),
        )),
    }
}

/// Keys accepted in a config file. Every key is optional except `plant`
/// and `scenario`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plant: Option<String>,
    scenario: Option<String>,
    observation: Option<String>,
    horizon: Option<usize>,
    q: Option<usize>,
    cost_q: Option<Vec<f64>>,
    cost_r: Option<Vec<f64>>,
    cost_q_terminal: Option<Vec<f64>>,
    target: Option<Vec<f64>>,
    initial_control: Option<f64>,
    initial_deviation_std: Option<f64>,
    noise_ratio: Option<f64>,
    process_std: Option<f64>,
    measurement_std: Option<f64>,
    perturbation_std: Option<f64>,
    rollouts: Option<usize>,
    averaging: Option<usize>,
    excitation_std: Option<f64>,
    residual_tol: Option<f64>,
    rel_cost_tol: Option<f64>,
    max_iterations: Option<usize>,
    max_stalls: Option<usize>,
    line_search_factor: Option<f64>,
    line_search_steps: Option<usize>,
    armijo_c1: Option<f64>,
    seeds: Option<Vec<u64>>,
    output_dir: Option<String>,
    record_wall_clock: Option<bool>,
    ltv_state_dim: Option<usize>,
    ltv_control_dim: Option<usize>,
    ltv_positions: Option<usize>,
    ltv_time_varying: Option<bool>,
    ltv_seed: Option<u64>,
}

/// A fully resolved and validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub plant: PlantKind,
    pub scenario: Scenario,
    pub observation: ObservationMode,
    pub horizon: usize,
    pub q: usize,
    pub cost_q: Vec<f64>,
    pub cost_r: Vec<f64>,
    pub cost_q_terminal: Vec<f64>,
    pub target: Vec<f64>,
    pub initial_control: f64,
    pub initial_deviation_std: f64,
    pub noise_ratio: f64,
    pub process_std: f64,
    pub measurement_std: f64,
    pub perturbation_std: f64,
    pub rollouts: usize,
    pub averaging: usize,
    pub excitation_std: f64,
    pub residual_tol: f64,
    pub rel_cost_tol: f64,
    pub max_iterations: usize,
    pub max_stalls: usize,
    pub line_search_factor: f64,
    pub line_search_steps: usize,
    pub armijo_c1: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub record_wall_clock: bool,
    pub ltv_state_dim: usize,
    pub ltv_control_dim: usize,
    pub ltv_positions: usize,
    pub ltv_time_varying: bool,
    pub ltv_seed: u64,
}

/// Std of the initial-state deviation in noisy scenarios.
pub fn default_initial_deviation_std(plant: PlantKind) -> f64 {
    match plant {
        PlantKind::Cartpole => 3e-4,
        PlantKind::Pendulum | PlantKind::SyntheticLtv => 1e-3,
    }
}
pub const DEFAULT_NOISE_RATIO: f64 = 0.1;
pub const DEFAULT_AVERAGING: usize = 32;

/// Rollouts per identification: fewer perturbation sequences when each one
/// is repeated `averaging` times.
pub fn default_rollouts(scenario: Scenario) -> usize {
    if scenario.is_averaged() {
        16
    } else {
        64
    }
}

struct PlantDefaults {
    horizon: usize,
    cost_q: Vec<f64>,
    cost_r: Vec<f64>,
    cost_q_terminal: Vec<f64>,
    perturbation_std: f64,
}

fn plant_defaults(
    plant: PlantKind,
    observation: ObservationMode,
    n_x: usize,
    positions: usize,
) -> PlantDefaults {
    let full = observation == ObservationMode::FullState;
    match plant {
        PlantKind::Pendulum => PlantDefaults {
            horizon: 300,
            cost_q: if full { vec![1.0, 0.1] } else { vec![1.0] },
            cost_r: vec![0.01],
            cost_q_terminal: if full { vec![100.0, 10.0] } else { vec![100.0] },
            perturbation_std: 1.0,
        },
        PlantKind::Cartpole => PlantDefaults {
            horizon: 500,
            cost_q: if full {
                vec![0.1, 1.0, 0.01, 0.01]
            } else {
                vec![0.1, 1.0]
            },
            cost_r: vec![0.01],
            cost_q_terminal: if full {
                vec![100.0, 100.0, 10.0, 10.0]
            } else {
                vec![100.0, 100.0]
            },
            perturbation_std: 1.0,
        },
        PlantKind::SyntheticLtv => {
            let n_z = if full { n_x } else { positions };
            PlantDefaults {
                horizon: 50,
                cost_q: vec![1.0; n_z],
                cost_r: vec![0.1],
                cost_q_terminal: vec![10.0; n_z],
                perturbation_std: 0.1,
            }
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses the flat key-value text and applies `PODILQR_OUTPUT_DIR`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::parse_without_env(text)?;
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                config.output_dir = PathBuf::from(dir);
            }
        }
        Ok(config)
    }

    pub fn parse_without_env(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = unknown_key(&message).unwrap_or_else(|| "<file>".to_string());
            Error::config(key, message)
        })?;
        Self::resolve(raw)
    }

    /// Defaults for `plant` and `scenario` with nothing overridden.
    pub fn defaults(plant: PlantKind, scenario: Scenario) -> Result<Self> {
        Self::resolve(RawConfig {
            plant: Some(plant.to_string()),
            scenario: Some(scenario.name().to_string()),
            ..RawConfig::default()
        })
    }

    fn resolve(raw: RawConfig) -> Result<Self> {
        let plant: PlantKind = raw
            .plant
            .as_deref()
            .ok_or_else(|| Error::config("plant", "missing"))?
            .parse()?;
        let scenario: Scenario = raw
            .scenario
            .as_deref()
            .ok_or_else(|| Error::config("scenario", "missing"))?
            .parse()?;

        let requested = raw
            .observation
            .as_deref()
            .map(parse_observation)
            .transpose()?;
        let observation = match (scenario.bound_observation(), requested) {
            (Some(bound), Some(req)) if bound != req => {
                return Err(Error::config(
                    "observation",
                    format!("scenario {scenario} requires `{}`", observation_name(bound)),
                ))
            }
            (Some(bound), _) => bound,
            (None, req) => req.unwrap_or(ObservationMode::FullState),
        };

        let ltv_state_dim = raw.ltv_state_dim.unwrap_or(4);
        let ltv_control_dim = raw.ltv_control_dim.unwrap_or(1);
        let ltv_positions = raw.ltv_positions.unwrap_or(ltv_state_dim / 2);
        let ltv_time_varying = raw.ltv_time_varying.unwrap_or(true);
        let ltv_seed = raw.ltv_seed.unwrap_or(0);
        if plant == PlantKind::SyntheticLtv {
            if ltv_state_dim == 0 || ltv_control_dim == 0 {
                return Err(Error::config(
                    "ltv_state_dim",
                    "synthetic dimensions must be positive",
                ));
            }
            if ltv_positions == 0 || ltv_positions > ltv_state_dim {
                return Err(Error::config(
                    "ltv_positions",
                    "must be in 1..=ltv_state_dim",
                ));
            }
        }

        let d = plant_defaults(plant, observation, ltv_state_dim, ltv_positions);
        let (n_x, n_u, n_pos) = match plant {
            PlantKind::Pendulum => (2, 1, 1),
            PlantKind::Cartpole => (4, 1, 2),
            PlantKind::SyntheticLtv => (ltv_state_dim, ltv_control_dim, ltv_positions),
        };
        let n_z = match observation {
            ObservationMode::FullState => n_x,
            ObservationMode::PositionsOnly => n_pos,
        };
        let q = raw.q.unwrap_or_else(|| n_x.div_ceil(n_z));
        if q == 0 {
            return Err(Error::config("q", "must be >= 1"));
        }

        let horizon = raw.horizon.unwrap_or(d.horizon);
        if horizon == 0 {
            return Err(Error::config("horizon", "must be >= 1"));
        }
        let cost_q = raw.cost_q.unwrap_or(d.cost_q);
        let cost_r = raw.cost_r.unwrap_or(if plant == PlantKind::SyntheticLtv {
            vec![d.cost_r[0]; n_u]
        } else {
            d.cost_r
        });
        let cost_q_terminal = raw.cost_q_terminal.unwrap_or(d.cost_q_terminal);
        let target = raw.target.unwrap_or_else(|| vec![0.0; n_z]);
        for (key, v, n) in [
            ("cost_q", &cost_q, n_z),
            ("cost_q_terminal", &cost_q_terminal, n_z),
            ("target", &target, n_z),
            ("cost_r", &cost_r, n_u),
        ] {
            if v.len() != n {
                return Err(Error::config(
                    key,
                    format!("expected {n} entries, got {}", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(key, "entries must be finite"));
            }
        }
        if cost_q.iter().chain(&cost_q_terminal).any(|&x| x < 0.0) {
            return Err(Error::config(
                "cost_q",
                "diagonal weights must be non-negative",
            ));
        }
        if cost_r.iter().any(|&x| x <= 0.0) {
            return Err(Error::config("cost_r", "diagonal weights must be positive"));
        }

        let noise_ratio = raw.noise_ratio.unwrap_or(DEFAULT_NOISE_RATIO);
        let initial_deviation_std;
        let process_std;
        let measurement_std;
        if scenario.is_noisy() {
            initial_deviation_std = raw
                .initial_deviation_std
                .unwrap_or(default_initial_deviation_std(plant));
            process_std = raw
                .process_std
                .unwrap_or(noise_ratio * initial_deviation_std);
            measurement_std = raw.measurement_std.unwrap_or(if scenario.is_partial() {
                noise_ratio * initial_deviation_std
            } else {
                0.0
            });
        } else {
            for (key, v) in [
                ("initial_deviation_std", raw.initial_deviation_std),
                ("process_std", raw.process_std),
                ("measurement_std", raw.measurement_std),
            ] {
                if let Some(x) = v {
                    if x != 0.0 {
                        return Err(Error::config(key, "NominalNoiseless requires zero noise"));
                    }
                }
            }
            initial_deviation_std = 0.0;
            process_std = 0.0;
            measurement_std = 0.0;
        }
        for (key, v) in [
            ("initial_deviation_std", initial_deviation_std),
            ("process_std", process_std),
            ("measurement_std", measurement_std),
            ("noise_ratio", noise_ratio),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be finite and non-negative"));
            }
        }

        let averaging = match (scenario.is_averaged(), raw.averaging) {
            (true, None) => DEFAULT_AVERAGING,
            (true, Some(n)) if n > 1 => n,
            (true, Some(_)) => {
                return Err(Error::config(
                    "averaging",
                    "PartialNoisy_Averaged requires averaging > 1",
                ))
            }
            (false, None) | (false, Some(1)) => 1,
            (false, Some(_)) => {
                return Err(Error::config(
                    "averaging",
                    format!("scenario {scenario} requires averaging = 1"),
                ))
            }
        };

        let perturbation_std = raw.perturbation_std.unwrap_or(d.perturbation_std);
        if !(perturbation_std > 0.0 && perturbation_std.is_finite()) {
            return Err(Error::config("perturbation_std", "must be positive"));
        }
        let rollouts = raw.rollouts.unwrap_or(default_rollouts(scenario));
        let required = min_rollouts(q, n_z, n_u);
        if rollouts < required {
            return Err(Error::config(
                "rollouts",
                format!("at least {required} rollouts are needed for q={q}"),
            ));
        }
        let excitation_std = raw.excitation_std.unwrap_or(1e-3);
        if !(excitation_std >= 0.0 && excitation_std.is_finite()) {
            return Err(Error::config(
                "excitation_std",
                "must be finite and non-negative",
            ));
        }

        let residual_tol = raw.residual_tol.unwrap_or(1e-4);
        let rel_cost_tol = raw.rel_cost_tol.unwrap_or(1e-5);
        for (key, v) in [
            ("residual_tol", residual_tol),
            ("rel_cost_tol", rel_cost_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be finite and non-negative"));
            }
        }
        let max_iterations = raw.max_iterations.unwrap_or(100);
        let max_stalls = raw.max_stalls.unwrap_or(5);
        if max_stalls == 0 {
            return Err(Error::config("max_stalls", "must be >= 1"));
        }
        let line_search_factor = raw.line_search_factor.unwrap_or(0.7);
        if !(line_search_factor > 0.0 && line_search_factor < 1.0) {
            return Err(Error::config("line_search_factor", "must be in (0, 1)"));
        }
        let line_search_steps = raw.line_search_steps.unwrap_or(16);
        if line_search_steps == 0 {
            return Err(Error::config("line_search_steps", "must be >= 1"));
        }
        let armijo_c1 = raw.armijo_c1.unwrap_or(1e-4);
        if !(armijo_c1 > 0.0 && armijo_c1 < 1.0) {
            return Err(Error::config("armijo_c1", "must be in (0, 1)"));
        }
        let seeds = raw.seeds.unwrap_or_else(|| (0..10).collect());
        if seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }

        Ok(ExperimentConfig {
            plant,
            scenario,
            observation,
            horizon,
            q,
            cost_q,
            cost_r,
            cost_q_terminal,
            target,
            initial_control: raw.initial_control.unwrap_or(0.0),
            initial_deviation_std,
            noise_ratio,
            process_std,
            measurement_std,
            perturbation_std,
            rollouts,
            averaging,
            excitation_std,
            residual_tol,
            rel_cost_tol,
            max_iterations,
            max_stalls,
            line_search_factor,
            line_search_steps,
            armijo_c1,
            seeds,
            output_dir: PathBuf::from(raw.output_dir.unwrap_or_else(|| "out".to_string())),
            record_wall_clock: raw.record_wall_clock.unwrap_or(false),
            ltv_state_dim,
            ltv_control_dim,
            ltv_positions,
            ltv_time_varying,
            ltv_seed,
        })
    }

    /// Same experiment with a different arm; noise and averaging are
    /// re-derived from the scenario while everything else is kept.
    pub fn with_scenario(
        &self,
        scenario: Scenario,
        observation: Option<ObservationMode>,
    ) -> Result<Self> {
        let mut c = self.clone();
        c.scenario = scenario;
        c.observation = scenario
            .bound_observation()
            .or(observation)
            .unwrap_or(self.observation);
        if c.observation != self.observation {
            let d = plant_defaults(c.plant, c.observation, c.ltv_state_dim, c.ltv_positions);
            let n_z = d.cost_q.len();
            c.cost_q = d.cost_q;
            c.cost_q_terminal = d.cost_q_terminal;
            c.target = vec![0.0; n_z];
            let n_x = self.plant_model().state_dim();
            c.q = n_x.div_ceil(n_z);
        }
        let sigma0 = if self.initial_deviation_std > 0.0 {
            self.initial_deviation_std
        } else {
            default_initial_deviation_std(self.plant)
        };
        if scenario.is_noisy() {
            c.initial_deviation_std = sigma0;
            c.process_std = c.noise_ratio * sigma0;
            c.measurement_std = if scenario.is_partial() {
                c.noise_ratio * sigma0
            } else {
                0.0
            };
        } else {
            c.initial_deviation_std = 0.0;
            c.process_std = 0.0;
            c.measurement_std = 0.0;
        }
        if self.rollouts == default_rollouts(self.scenario) {
            c.rollouts = default_rollouts(scenario);
        }
        c.averaging = if scenario.is_averaged() {
            if self.averaging > 1 {
                self.averaging
            } else {
                DEFAULT_AVERAGING
            }
        } else {
            1
        };
        Ok(c)
    }

    pub fn plant_model(&self) -> PlantModel {
        match self.plant {
            PlantKind::Pendulum => PlantModel::Pendulum(Pendulum::default()),
            PlantKind::Cartpole => PlantModel::Cartpole(Cartpole::default()),
            PlantKind::SyntheticLtv => PlantModel::SyntheticLtv(SyntheticLtv::random(
                self.ltv_state_dim,
                self.ltv_control_dim,
                self.ltv_positions,
                self.horizon,
                self.ltv_time_varying,
                self.ltv_seed,
            )),
        }
    }

    pub fn simulator(&self) -> Simulator {
        let plant = self.plant_model();
        let sensor = Sensor::new(self.observation, &plant);
        Simulator::new(plant, sensor)
    }

    pub fn cost(&self) -> CostSpec {
        CostSpec {
            q: diag(&self.cost_q),
            r: diag(&self.cost_r),
            q_terminal: diag(&self.cost_q_terminal),
            target: Vector::from_column_slice(&self.target),
        }
    }

    pub fn noise(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            process_std: self.process_std,
            measurement_std: self.measurement_std,
            initial_deviation_std: self.initial_deviation_std,
            seed,
        }
    }

    pub fn initial_controls(&self) -> Vec<Vector> {
        let n_u = self.cost_r.len();
        vec![Vector::from_element(n_u, self.initial_control); self.horizon]
    }

    pub fn solve_options(&self, seed: u64) -> SolveOptions {
        SolveOptions {
            q: self.q,
            cost: self.cost(),
            noise: self.noise(seed),
            plan: PerturbationPlan {
                perturbation_std: self.perturbation_std,
                rollouts: self.rollouts,
                averaging: self.averaging,
                excitation_std: self.excitation_std,
                seed,
            },
            identification_feedback: self.scenario.identification_feedback(),
            forward_averaging: self.averaging,
            line_search: LineSearchOptions {
                schedule: (0..self.line_search_steps as i32)
                    .map(|i| self.line_search_factor.powi(i))
                    .collect(),
                c1: self.armijo_c1,
            },
            residual_tol: self.residual_tol,
            rel_cost_tol: self.rel_cost_tol,
            max_iterations: self.max_iterations,
            max_stalls: self.max_stalls,
        }
    }

    /// SHA-256 over every field that influences results (the output
    /// directory and wall-clock flag are excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.record_wall_clock = false;
        let digest = Sha256::digest(format!("{c:?}").as_bytes());
        hex::encode(digest)
    }

    pub fn diag_matrix(values: &[f64]) -> Mat {
        diag(values)
    }
}

fn unknown_key(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}
