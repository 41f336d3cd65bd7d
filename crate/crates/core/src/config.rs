//! TOML run configuration.
//!
//! ```toml
//! [plant]
//! name = "room-temp"            # or: command = ["python3", "plant.py"], state_dim, input_dim
//!
//! [regions]
//! states = [[22.5, 26.5]]                        # X, one [lo, hi] per state
//! inputs = [[0.0, 1.0]]                          # U
//! initial = [[[24.0, 25.0]]]                     # X0, a list of boxes
//! unsafe = [[[22.5, 23.0]], [[26.0, 26.5]]]      # Xu, a list of boxes
//!
//! [property]
//! horizon = 5
//!
//! [template]
//! barrier_degree = 4
//! controller_degree = 4
//!
//! [certificate]
//! beta = 0.05
//! lipschitz = 11.63
//! samples = 140000              # or "auto"
//! validation_samples = 70000    # or "auto"
//! barrier_norm = 0.1
//! controller_norm = 0.05
//! seed = 1
//! validation_seed = 2
//! ```
//!
//! `[grid]`, `[tolerances]`, `[planner]` and `[solver]` are optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HyperRect, RegionUnion, SampleSpace};
use crate::scp::{CoefficientBounds, SolveOptions, Templates, Tolerances};

/// Lipschitz bound used when the built-in room plant is selected and the
/// configuration gives none.
pub const ROOM_LIPSCHITZ: f64 = 11.63;

pub const ROOM_PLANT: &str = "room-temp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plant: RawPlant,
    regions: RawRegions,
    property: RawProperty,
    template: RawTemplate,
    certificate: RawCertificate,
    #[serde(default)]
    grid: GridSettings,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    planner: PlannerSettings,
    #[serde(default)]
    solver: SolverSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    name: Option<String>,
    command: Option<Vec<String>>,
    state_dim: Option<usize>,
    input_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegions {
    states: Vec<[f64; 2]>,
    inputs: Vec<[f64; 2]>,
    initial: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "unsafe")]
    unsafe_set: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProperty {
    horizon: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    barrier_degree: u32,
    controller_degree: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    beta: f64,
    lipschitz: Option<f64>,
    samples: SampleCount,
    validation_samples: Option<SampleCount>,
    barrier_norm: Option<f64>,
    controller_norm: Option<f64>,
    #[serde(default = "default_eta")]
    eta: f64,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_validation_seed")]
    validation_seed: u64,
}

fn default_eta() -> f64 {
    1e-6
}

fn default_seed() -> u64 {
    1
}

fn default_validation_seed() -> u64 {
    2
}

/// A sample size, or `"auto"` to let the planner choose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleCount {
    Fixed(u64),
    Auto(AutoMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoMarker {
    Auto,
}

impl SampleCount {
    pub const AUTO: SampleCount = SampleCount::Auto(AutoMarker::Auto);

    pub fn fixed(&self) -> Option<u64> {
        match self {
            SampleCount::Fixed(n) => Some(*n),
            SampleCount::Auto(_) => None,
        }
    }
}

/// Points per axis for the grids that enforce the set conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub initial: usize,
    #[serde(rename = "unsafe")]
    pub unsafe_set: usize,
    pub states: usize,
    /// Tighten grid rows by a slope bound so they hold on the whole set.
    pub tighten: bool,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            initial: 10001,
            unsafe_set: 5001,
            states: 4001,
            tighten: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    /// Scenario samples for the pilot solve that estimates the optimum.
    pub pilot_samples: u64,
    /// First candidate size; the validation size starts at half of it.
    pub start_samples: u64,
    pub growth: f64,
    pub max_samples: u64,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            pilot_samples: 5000,
            start_samples: 10000,
            growth: 1.5,
            max_samples: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub bland: bool,
    pub row_generation_threshold: usize,
    pub row_generation_batch: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            max_iterations: d.max_iterations,
            bland: d.bland,
            row_generation_threshold: d.row_generation_threshold,
            row_generation_batch: d.row_generation_batch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantSpec {
    Builtin(String),
    Command {
        command: Vec<String>,
        state_dim: usize,
        input_dim: usize,
    },
}

/// Validated configuration of one synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub plant: PlantSpec,
    pub states: HyperRect,
    pub inputs: HyperRect,
    pub initial: RegionUnion,
    pub unsafe_set: RegionUnion,
    pub horizon: u32,
    pub barrier_degree: u32,
    pub controller_degree: u32,
    pub beta: f64,
    pub lipschitz: f64,
    pub samples: SampleCount,
    pub validation_samples: SampleCount,
    pub bounds: CoefficientBounds,
    pub eta: f64,
    pub seed: u64,
    pub validation_seed: u64,
    pub grid: GridSettings,
    pub tolerances: Tolerances,
    pub planner: PlannerSettings,
    pub solver: SolverSettings,
}

impl SynthesisConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<document>".into() } else { path }, e.into_inner().message())
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let plant = match (raw.plant.name, raw.plant.command) {
            (Some(name), None) => {
                if name != ROOM_PLANT {
                    return Err(Error::config("plant.name", format!("unknown built-in plant `{name}`")));
                }
                if raw.plant.state_dim.is_some() || raw.plant.input_dim.is_some() {
                    return Err(Error::config("plant", "dimensions are fixed for built-in plants"));
                }
                PlantSpec::Builtin(name)
            }
            (None, Some(command)) => {
                if command.is_empty() {
                    return Err(Error::config("plant.command", "empty command"));
                }
                let dim = |v: Option<usize>, key: &str| {
                    v.filter(|&d| d > 0)
                        .ok_or_else(|| Error::config(key, "required positive integer for command plants"))
                };
                PlantSpec::Command {
                    command,
                    state_dim: dim(raw.plant.state_dim, "plant.state_dim")?,
                    input_dim: dim(raw.plant.input_dim, "plant.input_dim")?,
                }
            }
            _ => return Err(Error::config("plant", "give exactly one of `name` or `command`")),
        };
        let (state_dim, input_dim) = match &plant {
            PlantSpec::Builtin(_) => (1, 1),
            PlantSpec::Command {
                state_dim, input_dim, ..
            } => (*state_dim, *input_dim),
        };

        let rect = |iv: &[[f64; 2]], key: &str| {
            HyperRect::from_intervals(iv).map_err(|e| Error::config(key, e.to_string()))
        };
        let union = |parts: &[Vec<[f64; 2]>], key: &str| -> Result<RegionUnion> {
            let boxes = parts.iter().map(|p| rect(p, key)).collect::<Result<Vec<_>>>()?;
            RegionUnion::new(boxes).map_err(|e| Error::config(key, e.to_string()))
        };
        let states = rect(&raw.regions.states, "regions.states")?;
        let inputs = rect(&raw.regions.inputs, "regions.inputs")?;
        let initial = union(&raw.regions.initial, "regions.initial")?;
        let unsafe_set = union(&raw.regions.unsafe_set, "regions.unsafe")?;
        for (key, dim, want) in [
            ("regions.states", states.dim(), state_dim),
            ("regions.inputs", inputs.dim(), input_dim),
            ("regions.initial", initial.dim(), state_dim),
            ("regions.unsafe", unsafe_set.dim(), state_dim),
        ] {
            if dim != want {
                return Err(Error::config(key, format!("expected dimension {want}, found {dim}")));
            }
        }
        if initial.intersects(&unsafe_set) {
            return Err(Error::config(
                "regions.unsafe",
                "initial and unsafe sets must be disjoint",
            ));
        }
        if !initial.is_subset_of(&states) {
            return Err(Error::config("regions.initial", "initial set must lie inside the state set"));
        }
        if !unsafe_set.is_subset_of(&states) {
            return Err(Error::config("regions.unsafe", "unsafe set must lie inside the state set"));
        }

        if raw.property.horizon == 0 {
            return Err(Error::config("property.horizon", "horizon must be at least 1"));
        }
        let cert = raw.certificate;
        if !(cert.beta > 0.0 && cert.beta < 1.0) {
            return Err(Error::config("certificate.beta", "must lie strictly between 0 and 1"));
        }
        let lipschitz = match (cert.lipschitz, &plant) {
            (Some(l), _) => l,
            (None, PlantSpec::Builtin(_)) => ROOM_LIPSCHITZ,
            (None, _) => {
                return Err(Error::config(
                    "certificate.lipschitz",
                    "required for external plants",
                ))
            }
        };
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::config("certificate.lipschitz", "must be positive"));
        }
        let validation_samples = match (cert.samples, cert.validation_samples) {
            (SampleCount::Fixed(0), _) => {
                return Err(Error::config("certificate.samples", "must be at least 1"))
            }
            (_, Some(SampleCount::Fixed(0))) => {
                return Err(Error::config("certificate.validation_samples", "must be at least 1"))
            }
            (SampleCount::Auto(_), Some(SampleCount::Fixed(_))) => {
                return Err(Error::config(
                    "certificate.validation_samples",
                    "must be \"auto\" when samples is \"auto\"",
                ))
            }
            (SampleCount::Fixed(n), None) => SampleCount::Fixed((n / 2).max(1)),
            (SampleCount::Auto(_), None) => SampleCount::AUTO,
            (_, Some(v)) => v,
        };
        for (key, v) in [("certificate.barrier_norm", cert.barrier_norm), ("certificate.controller_norm", cert.controller_norm)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::config(key, "must be positive"));
                }
            }
        }
        if !(cert.eta >= 0.0) {
            return Err(Error::config("certificate.eta", "must be non-negative"));
        }
        if cert.seed == cert.validation_seed {
            return Err(Error::config(
                "certificate.validation_seed",
                "scenario and validation seeds must differ",
            ));
        }
        let g = raw.grid;
        for (key, v) in [("grid.initial", g.initial), ("grid.unsafe", g.unsafe_set), ("grid.states", g.states)] {
            if v == 0 {
                return Err(Error::config(key, "at least one point per axis"));
            }
        }
        let t = raw.tolerances;
        for (key, v) in [
            ("tolerances.feasibility", t.feasibility),
            ("tolerances.optimality", t.optimality),
            ("tolerances.activity", t.activity),
        ] {
            if !(v > 0.0) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        let p = raw.planner;
        if !(p.growth > 1.0) {
            return Err(Error::config("planner.growth", "must exceed 1"));
        }
        if p.pilot_samples == 0 || p.start_samples < 2 {
            return Err(Error::config("planner", "pilot_samples >= 1 and start_samples >= 2 required"));
        }
        Ok(Self {
            plant,
            states,
            inputs,
            initial,
            unsafe_set,
            horizon: raw.property.horizon,
            barrier_degree: raw.template.barrier_degree,
            controller_degree: raw.template.controller_degree,
            beta: cert.beta,
            lipschitz,
            samples: cert.samples,
            validation_samples,
            bounds: CoefficientBounds {
                barrier: cert.barrier_norm,
                controller: cert.controller_norm,
            },
            eta: cert.eta,
            seed: cert.seed,
            validation_seed: cert.validation_seed,
            grid: g,
            tolerances: t,
            planner: p,
            solver: raw.solver,
        })
    }

    /// Replaces the dataset seeds, keeping them distinct.
    pub fn with_seeds(mut self, seed: Option<u64>, validation_seed: Option<u64>) -> Result<Self> {
        self.seed = seed.unwrap_or(self.seed);
        self.validation_seed = validation_seed.unwrap_or(self.validation_seed);
        if self.seed == self.validation_seed {
            return Err(Error::config(
                "certificate.validation_seed",
                "scenario and validation seeds must differ",
            ));
        }
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.states.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn templates(&self) -> Templates {
        Templates::new(self.state_dim(), self.input_dim(), self.barrier_degree, self.controller_degree)
    }

    /// The sampling space `X × U`.
    pub fn space(&self) -> SampleSpace {
        SampleSpace::from_parts(&self.states, &self.inputs).expect("validated boxes have positive volume")
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tolerances: self.tolerances,
            max_iterations: self.solver.max_iterations,
            bland: self.solver.bland,
            tie_break: true,
            row_generation_threshold: self.solver.row_generation_threshold,
            row_generation_batch: self.solver.row_generation_batch,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const ROOM: &str = r#"
[plant]
name = "room-temp"

[regions]
states = [[22.5, 26.5]]
inputs = [[0.0, 1.0]]
initial = [[[24.0, 25.0]]]
unsafe = [[[22.5, 23.0]], [[26.0, 26.5]]]

[property]
horizon = 5

[template]
barrier_degree = 4
controller_degree = 4

[certificate]
beta = 0.05
samples = 140000
validation_samples = 70000
barrier_norm = 0.1
controller_norm = 0.05
"#;

    fn err_key(text: &str) -> String {
        match SynthesisConfig::from_toml(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn room_config_loads() {
        let c = SynthesisConfig::from_toml(ROOM).unwrap();
        assert_eq!(c.plant, PlantSpec::Builtin("room-temp".into()));
        assert_eq!(c.lipschitz, 11.63);
        assert_eq!(c.samples, SampleCount::Fixed(140000));
        assert_eq!(c.validation_samples, SampleCount::Fixed(70000));
        assert_eq!(c.horizon, 5);
        assert_eq!(c.grid, GridSettings::default());
        assert_eq!(c.space().volume(), 4.0);
        assert_eq!(c.templates().layout().dim(), 14);
        assert_ne!(c.seed, c.validation_seed);
    }

    #[test]
    fn auto_sample_counts() {
        let text = ROOM
            .replace("samples = 140000", "samples = \"auto\"")
            .replace("validation_samples = 70000\n", "");
        let c = SynthesisConfig::from_toml(&text).unwrap();
        assert_eq!(c.samples, SampleCount::AUTO);
        assert_eq!(c.validation_samples, SampleCount::AUTO);
        let bad = ROOM.replace("samples = 140000", "samples = \"auto\"");
        assert_eq!(err_key(&bad), "certificate.validation_samples");
        assert_eq!(err_key(&ROOM.replace("samples = 140000", "samples = \"lots\"")), "certificate.samples");
    }

    #[test]
    fn rejects_overlapping_sets() {
        let text = ROOM.replace("initial = [[[24.0, 25.0]]]", "initial = [[[22.8, 25.0]]]");
        let err = SynthesisConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("disjoint"), "{err}");
    }

    #[test]
    fn rejects_bad_values_with_key_paths() {
        assert_eq!(err_key(&ROOM.replace("beta = 0.05", "beta = 1.5")), "certificate.beta");
        assert_eq!(err_key(&ROOM.replace("horizon = 5", "horizon = 0")), "property.horizon");
        assert_eq!(err_key(&ROOM.replace("horizon = 5", "horizon = 5\nspeed = 2")), "property.speed");
        assert_eq!(err_key(&ROOM.replace("beta = 0.05", "beta = 0.05\nlipschitz = -1.0")), "certificate.lipschitz");
        assert_eq!(
            err_key(&ROOM.replace("states = [[22.5, 26.5]]", "states = [[23.0, 26.5]]")),
            "regions.unsafe"
        );
        assert_eq!(err_key(&ROOM.replace("name = \"room-temp\"", "name = \"pendulum\"")), "plant.name");
        assert_eq!(err_key(&format!("{ROOM}\n[certificate.extra]\n")), "certificate.extra");
        assert_eq!(err_key("not toml ["), "<document>");
        assert_eq!(
            err_key(&ROOM.replace("beta = 0.05", "beta = 0.05\nseed = 4\nvalidation_seed = 4")),
            "certificate.validation_seed"
        );
    }

    #[test]
    fn command_plant_needs_lipschitz_and_dims() {
        let text = ROOM.replace("name = \"room-temp\"", "command = [\"./plant\"]");
        assert_eq!(err_key(&text), "plant.state_dim");
        let text = ROOM.replace(
            "name = \"room-temp\"",
            "command = [\"./plant\"]\nstate_dim = 1\ninput_dim = 1",
        );
        assert_eq!(err_key(&text), "certificate.lipschitz");
        let ok = text.replace("beta = 0.05", "beta = 0.05\nlipschitz = 3.0");
        let c = SynthesisConfig::from_toml(&ok).unwrap();
        assert_eq!(c.lipschitz, 3.0);
    }

    #[test]
    fn optional_sections() {
        let text = format!(
            "{ROOM}\n[grid]\ninitial = 11\ntighten = false\n\n[tolerances]\nactivity = 1e-6\n\n[solver]\nbland = true\n"
        );
        let c = SynthesisConfig::from_toml(&text).unwrap();
        assert_eq!(c.grid.initial, 11);
        assert_eq!(c.grid.states, 4001);
        assert!(!c.grid.tighten);
        assert_eq!(c.tolerances.activity, 1e-6);
        assert_eq!(c.tolerances.feasibility, 1e-8);
        assert!(c.solve_options().bland);
    }
}
