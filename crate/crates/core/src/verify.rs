//! Validation of a synthesised barrier/controller pair: violation frequency
//! on fresh samples, grid checks of the barrier conditions against a known
//! plant, closed-loop simulation and plot data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dim, HyperRect, RegionUnion};
use crate::io::write_atomic;
use crate::plant::{Dataset, DatasetRole, Sample, System};
use crate::polynomial::Polynomial;
use crate::scp::{g3_value, DecisionLayout, Templates};

/// Residuals this close to zero are treated as satisfied but reported.
pub const KNIFE_EDGE: f64 = 1e-12;

/// The synthesised barrier, controller and level constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub barrier: Polynomial,
    pub controller: Vec<Polynomial>,
    pub k: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub c: f64,
}

impl Certificate {
    /// Reads a certificate out of a decision vector laid out per `templates`.
    pub fn from_decision(templates: &Templates, d: &[f64]) -> Result<Self> {
        let layout = templates.layout();
        if d.len() < layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                found: d.len(),
            });
        }
        let controller = templates
            .controller
            .iter()
            .enumerate()
            .map(|(i, b)| Polynomial::new(b.clone(), d[layout.p(i)].to_vec()))
            .collect::<Result<_>>()?;
        Ok(Self {
            barrier: Polynomial::new(templates.barrier.clone(), d[layout.q()].to_vec())?,
            controller,
            k: d[DecisionLayout::K],
            lambda: d[DecisionLayout::LAMBDA],
            gamma: d[DecisionLayout::GAMMA],
            c: d[DecisionLayout::C],
        })
    }

    pub fn state_dim(&self) -> usize {
        self.barrier.basis().nvars()
    }

    pub fn input_dim(&self) -> usize {
        self.controller.len()
    }

    pub fn control(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.controller.iter().map(|p| p.eval(x)).collect()
    }

    /// The scenario constraint `B(x') - B(x) + Σ(u - C(x)) - c - K` at a sample.
    pub fn g3_residual(&self, sample: &Sample) -> Result<f64> {
        g3_value(&self.barrier, &self.controller, self.c, self.k, sample)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub index: usize,
    pub residual: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationSummary {
    pub r: u64,
    pub records: Vec<ViolationRecord>,
    /// Samples with `|residual| <= KNIFE_EDGE`, counted as satisfied.
    pub knife_edge: Vec<usize>,
}

/// Number of validation samples on which the scenario constraint fails.
pub fn violation_frequency(cert: &Certificate, validation: &Dataset) -> Result<ViolationSummary> {
    if validation.role != DatasetRole::Validation {
        return Err(Error::Schema(format!(
            "violation frequency needs a validation dataset, got role `{}`",
            validation.role
        )));
    }
    let records: Vec<ViolationRecord> = validation
        .samples
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            let residual = cert.g3_residual(s)?;
            Ok(ViolationRecord {
                index,
                residual,
                violated: residual > KNIFE_EDGE,
            })
        })
        .collect::<Result<_>>()?;
    let r = records.iter().filter(|v| v.violated).count() as u64;
    let knife_edge = records
        .iter()
        .filter(|v| v.residual.abs() <= KNIFE_EDGE)
        .map(|v| v.index)
        .collect();
    Ok(ViolationSummary {
        r,
        records,
        knife_edge,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    /// Largest residual; the condition asks for `<= 0` (`< 0` for the
    /// initial-set condition).
    pub worst: f64,
    pub pass: bool,
    pub points: usize,
}

impl ConditionCheck {
    fn from_residuals(values: impl ParallelIterator<Item = Result<f64>>, strict: bool) -> Result<Self> {
        let values: Vec<f64> = values.collect::<Result<_>>()?;
        let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pass = if strict { worst < 0.0 } else { worst <= 0.0 };
        Ok(Self {
            worst,
            pass,
            points: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `B(x) - γ < 0` on the initial set.
    pub initial: ConditionCheck,
    /// `λ - B(x) <= 0` on the unsafe set.
    pub unsafe_set: ConditionCheck,
    /// `B(f(x,u)) - B(x) + Σ(u - C(x)) - c <= 0` on the state-input grid.
    pub decrease: ConditionCheck,
    /// `γ + cT - λ <= 0`.
    pub level_gap: ConditionCheck,
    /// Controller output inside the input box on the state grid.
    pub input: ConditionCheck,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.initial.pass && self.unsafe_set.pass && self.decrease.pass && self.level_gap.pass && self.input.pass
    }
}

/// Grids used by the independent condition checks.
#[derive(Debug, Clone)]
pub struct CheckGrids {
    pub initial: Vec<Vec<f64>>,
    pub unsafe_set: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
    /// State-input pairs for the decrease condition.
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl CheckGrids {
    /// `per_axis` points per axis on every region; the decrease grid is the
    /// product of the state grid and an input grid of the same density.
    pub fn new(
        initial: &RegionUnion,
        unsafe_set: &RegionUnion,
        states: &HyperRect,
        inputs: &HyperRect,
        per_axis: usize,
    ) -> Result<Self> {
        let union_points = |r: &RegionUnion| -> Result<Vec<Vec<f64>>> {
            let mut out = Vec::new();
            for part in r.parts() {
                out.extend(part.grid(per_axis)?.points);
            }
            Ok(out)
        };
        let states_pts = states.grid(per_axis)?.points;
        let input_pts = inputs.grid(per_axis)?.points;
        let pairs = states_pts
            .iter()
            .flat_map(|x| input_pts.iter().map(move |u| (x.clone(), u.clone())))
            .collect();
        Ok(Self {
            initial: union_points(initial)?,
            unsafe_set: union_points(unsafe_set)?,
            states: states_pts,
            pairs,
        })
    }
}

/// Checks the barrier conditions on dense grids against a plant whose
/// dynamics are known. Testing aid only; synthesis never calls this.
pub fn check_cbf_conditions(
    cert: &Certificate,
    plant: &dyn System,
    grids: &CheckGrids,
    inputs: &HyperRect,
    horizon: f64,
) -> Result<ConditionReport> {
    check_dim(cert.input_dim(), inputs.dim())?;
    let initial = ConditionCheck::from_residuals(
        grids.initial.par_iter().map(|x| Ok(cert.barrier.eval(x)? - cert.gamma)),
        true,
    )?;
    let unsafe_set = ConditionCheck::from_residuals(
        grids.unsafe_set.par_iter().map(|x| Ok(cert.lambda - cert.barrier.eval(x)?)),
        false,
    )?;
    let decrease = ConditionCheck::from_residuals(
        grids.pairs.par_iter().map(|(x, u)| {
            let x_next = plant.step(x, u).map_err(|message| Error::Plant { index: 0, message })?;
            let s = Sample {
                x: x.clone(),
                u: u.clone(),
                x_next,
            };
            Ok(cert.g3_residual(&s)? + cert.k)
        }),
        false,
    )?;
    let gap = cert.gamma + cert.c * horizon - cert.lambda;
    let level_gap = ConditionCheck {
        worst: gap,
        pass: gap <= 0.0,
        points: 1,
    };
    let input = ConditionCheck::from_residuals(
        grids.states.par_iter().map(|x| {
            let u = cert.control(x)?;
            Ok(u.iter()
                .enumerate()
                .map(|(j, v)| (v - inputs.upper()[j]).max(inputs.lower()[j] - v))
                .fold(f64::NEG_INFINITY, f64::max))
        }),
        false,
    )?;
    Ok(ConditionReport {
        initial,
        unsafe_set,
        decrease,
        level_gap,
        input,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub safe: bool,
    /// Steps where the controller left the input box and was clamped.
    pub clamps: usize,
}

/// Runs `x(t+1) = f(x(t), C(x(t)))` for `horizon` steps.
pub fn simulate_closed_loop(
    plant: &dyn System,
    cert: &Certificate,
    x0: &[f64],
    horizon: usize,
    unsafe_set: &RegionUnion,
    inputs: &HyperRect,
) -> Result<Trajectory> {
    check_dim(cert.state_dim(), x0.len())?;
    let mut states = vec![x0.to_vec()];
    let mut clamps = 0;
    for t in 0..horizon {
        let x = &states[t];
        let mut u = cert.control(x)?;
        let mut clamped = false;
        for (j, v) in u.iter_mut().enumerate() {
            let c = v.clamp(inputs.lower()[j], inputs.upper()[j]);
            clamped |= c != *v;
            *v = c;
        }
        clamps += clamped as usize;
        let next = plant.step(x, &u).map_err(|message| Error::Plant { index: t, message })?;
        states.push(next);
    }
    let safe = states
        .iter()
        .map(|x| unsafe_set.contains(x))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .all(|inside| !inside);
    Ok(Trajectory {
        states,
        safe,
        clamps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetySummary {
    pub fraction_safe: f64,
    pub min_distance_to_unsafe: f64,
    pub failing: Vec<Vec<f64>>,
    pub clamp_events: usize,
    pub trajectories: usize,
}

/// Closed-loop simulation from every initial point.
pub fn empirical_safety(
    plant: &dyn System,
    cert: &Certificate,
    initial_points: &[Vec<f64>],
    horizon: usize,
    unsafe_set: &RegionUnion,
    inputs: &HyperRect,
) -> Result<SafetySummary> {
    let run = |x0: &Vec<f64>| simulate_closed_loop(plant, cert, x0, horizon, unsafe_set, inputs);
    let trajectories: Vec<Trajectory> = if plant.reentrant() {
        initial_points.par_iter().map(run).collect::<Result<_>>()?
    } else {
        initial_points.iter().map(run).collect::<Result<_>>()?
    };
    let failing: Vec<Vec<f64>> = trajectories
        .iter()
        .filter(|t| !t.safe)
        .map(|t| t.states[0].clone())
        .collect();
    let min_distance_to_unsafe = trajectories
        .iter()
        .flat_map(|t| t.states.iter())
        .map(|x| unsafe_set.distance(x))
        .fold(f64::INFINITY, f64::min);
    let n = trajectories.len();
    Ok(SafetySummary {
        fraction_safe: if n == 0 {
            1.0
        } else {
            (n - failing.len()) as f64 / n as f64
        },
        min_distance_to_unsafe,
        failing,
        clamp_events: trajectories.iter().map(|t| t.clamps).sum(),
        trajectories: n,
    })
}

fn coordinate_names(prefix: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }
}

/// Writes `barrier.csv` (columns `x,B,gamma,lambda`) over the state grid and
/// `g3_surface.csv` (columns `x,u,g3`) over the state-input grid. Vector
/// states and inputs get numbered columns `x1,x2,…`.
pub fn emit_plot_data(
    cert: &Certificate,
    plant: &dyn System,
    states: &HyperRect,
    inputs: &HyperRect,
    points_x: usize,
    points_u: usize,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let xs = states.grid(points_x)?.points;
    let us = inputs.grid(points_u)?.points;

    let mut barrier = coordinate_names("x", states.dim()).join(",");
    barrier.push_str(",B,gamma,lambda\n");
    for x in &xs {
        let b = cert.barrier.eval(x)?;
        for v in x {
            write!(barrier, "{v:?},").unwrap();
        }
        writeln!(barrier, "{b:?},{:?},{:?}", cert.gamma, cert.lambda).unwrap();
    }

    let mut surface = coordinate_names("x", states.dim()).join(",");
    surface.push(',');
    surface.push_str(&coordinate_names("u", inputs.dim()).join(","));
    surface.push_str(",g3\n");
    for x in &xs {
        for u in &us {
            let x_next = plant
                .step(x, u)
                .map_err(|message| Error::Plant { index: 0, message })?;
            let g = cert.g3_residual(&Sample {
                x: x.clone(),
                u: u.clone(),
                x_next,
            })?;
            for v in x.iter().chain(u) {
                write!(surface, "{v:?},").unwrap();
            }
            writeln!(surface, "{g:?}").unwrap();
        }
    }

    let barrier_path = dir.join("barrier.csv");
    let surface_path = dir.join("g3_surface.csv");
    write_atomic(&barrier_path, barrier.as_bytes())?;
    write_atomic(&surface_path, surface.as_bytes())?;
    Ok(vec![barrier_path, surface_path])
}
