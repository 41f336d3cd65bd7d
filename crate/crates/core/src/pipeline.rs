//! End-to-end synthesis: sampling, the scenario LP, the posterior bound and
//! the safety margin check, plus the prior-bound baseline and repeated runs.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, PlannerEstimates, PlannerOptions, PosteriorInputs, PriorInputs, SamplePlan};
use crate::config::{PlantSpec, SampleCount, SynthesisConfig};
use crate::error::{Error, Result};
use crate::geometry::{u_inverse, RegionUnion};
use crate::plant::{collect, Dataset, DatasetRole, ProcessPlant, RoomTemperature, Sample, System};
use crate::scp::{
    assemble_g1, assemble_g2, assemble_g3, assemble_g4, assemble_structural, count_active_g3, solve_lp,
    ConstraintRow, GriddedRegion, InputPolytope, LpProblem, LpSolution, LpStatus, RowTag, Templates,
};
use crate::verify::{violation_frequency, Certificate};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Grid and structural rows are solved with their right-hand side lowered
/// by this many feasibility tolerances, so that the solver's own residual
/// cannot turn into a violation of the unshifted row.
const BACK_OFF_FACTOR: f64 = 10.0;

const G3_CHUNK: usize = 1 << 16;

const PILOT_STREAM: u64 = 0x5049_4c4f_54;
const RETRY_STREAM: u64 = 0x5245_5452_59;

/// SplitMix64 of `base` mixed with a stream index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn build_plant(spec: &PlantSpec) -> Result<Box<dyn System>> {
    match spec {
        PlantSpec::Builtin(name) if name == crate::config::ROOM_PLANT => Ok(Box::new(RoomTemperature)),
        PlantSpec::Builtin(name) => Err(Error::config("plant.name", format!("unknown built-in plant `{name}`"))),
        PlantSpec::Command {
            command,
            state_dim,
            input_dim,
        } => Ok(Box::new(ProcessPlant::spawn(command, *state_dim, *input_dim)?)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Posterior,
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Planning,
    Collection,
    Solve,
    Validation,
    Bound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

impl Failure {
    fn new(stage: Stage, message: impl ToString) -> Self {
        Self {
            stage,
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub scenario: u64,
    pub validation: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpStats {
    pub status: LpStatus,
    pub rows: usize,
    pub g3_rows: usize,
    pub iterations: usize,
    pub rounds: usize,
    pub active_rows: usize,
    /// Amount by which grid and structural rows were tightened before solving.
    pub back_off: f64,
    /// Largest residual of a grid or structural row against its unshifted
    /// right-hand side; non-positive when the solution satisfies all of them.
    pub max_fixed_residual: f64,
    /// Increase of `K` needed to satisfy every scenario row exactly.
    pub k_raise: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub planning_s: f64,
    pub collect_s: f64,
    pub assemble_s: f64,
    pub solve_s: f64,
    pub validate_s: f64,
    pub total_s: f64,
}

/// One earlier attempt that did not certify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptSummary {
    pub attempt: u32,
    pub seeds: Seeds,
    pub verdict: Verdict,
    pub margin: Option<f64>,
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub version: String,
    pub mode: Mode,
    pub verdict: Verdict,
    pub failure: Option<Failure>,
    pub certificate: Option<Certificate>,
    /// `(K, λ, γ, c, q, p)` after the final `K` adjustment.
    pub d_star: Option<Vec<f64>>,
    /// All LP columns, `d*` followed by the coefficient magnitudes.
    pub columns: Option<Vec<f64>>,
    pub k_star: Option<f64>,
    pub n: u64,
    pub n0: Option<u64>,
    pub n_star: Option<u64>,
    pub r: Option<u64>,
    pub kappa: Option<f64>,
    /// Violation level the margin is computed at: `1 - κ*`, or the prior `ε`.
    pub eps: Option<f64>,
    pub beta: f64,
    pub lipschitz: f64,
    /// `L · U⁻¹(eps)`.
    pub slack: Option<f64>,
    /// `K* + slack`.
    pub margin: Option<f64>,
    pub seeds: Seeds,
    pub tighten: bool,
    pub lp: Option<LpStats>,
    /// Validation samples whose residual was within rounding of zero.
    pub knife_edge: usize,
    /// Largest sampled difference quotient of the scenario constraint.
    pub lipschitz_estimate: Option<f64>,
    pub plan: Option<SamplePlan>,
    pub attempt: u32,
    pub previous_attempts: Vec<AttemptSummary>,
    pub warnings: Vec<String>,
    pub timings: Timings,
    pub config: SynthesisConfig,
}

impl CertificateReport {
    fn empty(cfg: &SynthesisConfig, mode: Mode, seeds: Seeds) -> Self {
        Self {
            version: VERSION.to_string(),
            mode,
            verdict: Verdict::Inconclusive,
            failure: None,
            certificate: None,
            d_star: None,
            columns: None,
            k_star: None,
            n: 0,
            n0: None,
            n_star: None,
            r: None,
            kappa: None,
            eps: None,
            beta: cfg.beta,
            lipschitz: cfg.lipschitz,
            slack: None,
            margin: None,
            seeds,
            tighten: cfg.grid.tighten,
            lp: None,
            knife_edge: 0,
            lipschitz_estimate: None,
            plan: None,
            attempt: 0,
            previous_attempts: Vec::new(),
            warnings: Vec::new(),
            timings: Timings::default(),
            config: cfg.clone(),
        }
    }

    fn fail(&mut self, failure: Failure) {
        log::warn!("{:?} stage failed: {}", failure.stage, failure.message);
        self.failure = Some(failure);
        self.verdict = Verdict::Inconclusive;
    }

    fn summary(&self) -> AttemptSummary {
        AttemptSummary {
            attempt: self.attempt,
            seeds: self.seeds,
            verdict: self.verdict,
            margin: self.margin,
            failure: self.failure.clone(),
        }
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A solved scenario program with the certificate read off it.
#[derive(Debug, Clone)]
pub struct ScenarioSolution {
    pub problem: LpProblem,
    pub lp: LpSolution,
    pub certificate: Certificate,
    pub stats: LpStats,
    pub n_star: u64,
}

/// Templates and the sample-independent rows of the scenario program, built
/// once per configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: SynthesisConfig,
    pub templates: Templates,
    fixed: Vec<ConstraintRow>,
    back_off: f64,
}

impl Prepared {
    pub fn new(cfg: &SynthesisConfig) -> Result<Self> {
        let templates = cfg.templates();
        let layout = templates.layout();
        let tighten = cfg.grid.tighten;
        let initial = GriddedRegion::new(&cfg.initial, cfg.grid.initial)?;
        let unsafe_set = GriddedRegion::new(&cfg.unsafe_set, cfg.grid.unsafe_set)?;
        let states = GriddedRegion::new(&RegionUnion::from(cfg.states.clone()), cfg.grid.states)?;
        let polytope = InputPolytope::from_box(&cfg.inputs);
        let back_off = BACK_OFF_FACTOR * cfg.tolerances.feasibility;
        let mut fixed = assemble_g1(&layout, &templates.barrier, &initial, cfg.eta, tighten)?;
        fixed.extend(assemble_g2(&layout, &templates.barrier, &unsafe_set, tighten)?);
        fixed.extend(assemble_g4(&layout, &templates, &states, &polytope, tighten)?);
        fixed.extend(assemble_structural(&layout, &templates, cfg.horizon as f64, &cfg.bounds));
        for row in &mut fixed {
            row.rhs -= back_off;
        }
        Ok(Self {
            config: cfg.clone(),
            templates,
            fixed,
            back_off,
        })
    }

    /// Grid rows, structural rows and one scenario row per sample.
    pub fn problem(&self, samples: &[Sample]) -> Result<LpProblem> {
        let layout = self.templates.layout();
        let mut problem = LpProblem::new(layout.clone());
        problem.extend(self.fixed.iter().cloned())?;
        for (c, chunk) in samples.chunks(G3_CHUNK).enumerate() {
            let rows: Vec<ConstraintRow> = chunk
                .par_iter()
                .enumerate()
                .map(|(i, s)| assemble_g3(&layout, &self.templates, s, c * G3_CHUNK + i))
                .collect::<Result<_>>()?;
            problem.extend(rows)?;
        }
        Ok(problem)
    }

    /// Solves the scenario program on `samples`. `Err` carries the failure
    /// cause for an inconclusive report.
    pub fn solve(&self, samples: &[Sample], timings: &mut Timings) -> std::result::Result<ScenarioSolution, Failure> {
        let t = Instant::now();
        let problem = self.problem(samples).map_err(|e| Failure::new(Stage::Solve, e))?;
        timings.assemble_s += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let opts = self.config.solve_options();
        let mut lp = solve_lp(&problem, &opts).map_err(|e| Failure::new(Stage::Solve, e))?;
        timings.solve_s += t.elapsed().as_secs_f64();
        if lp.status != LpStatus::Optimal {
            return Err(Failure::new(Stage::Solve, format!("scenario program is {:?}", lp.status).to_lowercase()));
        }
        let n_star = count_active_g3(&problem, &lp, opts.tolerances.activity) as u64;

        let mut max_fixed = f64::NEG_INFINITY;
        let mut max_g3 = f64::NEG_INFINITY;
        for i in 0..problem.len() {
            let r = problem.residual(i, &lp.columns);
            if problem.tag(i) == RowTag::G3 {
                max_g3 = max_g3.max(r);
            } else {
                max_fixed = max_fixed.max(r - self.back_off);
            }
        }
        if max_fixed > 0.0 {
            return Err(Failure::new(
                Stage::Solve,
                format!("solution violates a grid or structural row by {max_fixed:e}"),
            ));
        }
        // the scenario rows carry K with coefficient -1, so this makes all of them hold
        let k_raise = max_g3.max(0.0);
        lp.columns[crate::scp::DecisionLayout::K] += k_raise;
        lp.d_star[crate::scp::DecisionLayout::K] += k_raise;
        lp.objective += k_raise;
        let certificate =
            Certificate::from_decision(&self.templates, &lp.d_star).map_err(|e| Failure::new(Stage::Solve, e))?;
        let stats = LpStats {
            status: lp.status,
            rows: problem.len(),
            g3_rows: problem.g3_count(),
            iterations: lp.iterations,
            rounds: lp.rounds,
            active_rows: lp.active_row_ids.len(),
            back_off: self.back_off,
            max_fixed_residual: max_fixed,
            k_raise,
        };
        Ok(ScenarioSolution {
            problem,
            lp,
            certificate,
            stats,
            n_star,
        })
    }

    fn collect(
        &self,
        plant: &dyn System,
        count: u64,
        seed: u64,
        role: DatasetRole,
        timings: &mut Timings,
    ) -> std::result::Result<Dataset, Failure> {
        let t = Instant::now();
        let d = collect(plant, &self.config.space(), count as usize, seed, role)
            .map_err(|e| Failure::new(Stage::Collection, e))?;
        timings.collect_s += t.elapsed().as_secs_f64();
        Ok(d)
    }

    fn record_solution(&self, report: &mut CertificateReport, sol: &ScenarioSolution) {
        report.warnings.extend(sol.lp.warnings.iter().cloned());
        report.k_star = Some(sol.lp.objective);
        report.d_star = Some(sol.lp.d_star.clone());
        report.columns = Some(sol.lp.columns.clone());
        report.certificate = Some(sol.certificate.clone());
        report.n_star = Some(sol.n_star);
        report.lp = Some(sol.stats.clone());
        if sol.stats.k_raise > 0.0 {
            log::debug!("raised K by {:e} to satisfy all scenario rows", sol.stats.k_raise);
        }
    }

    fn finish(&self, report: &mut CertificateReport, eps: f64, k_star: f64) {
        let slack = match u_inverse(eps, &self.config.space()) {
            Ok(r) => self.config.lipschitz * r,
            Err(e) => {
                report.fail(Failure::new(Stage::Bound, e));
                return;
            }
        };
        let margin = k_star + slack;
        report.eps = Some(eps);
        report.slack = Some(slack);
        report.margin = Some(margin);
        if !self.config.grid.tighten {
            report
                .warnings
                .push("grid rows were not tightened; set conditions hold only at grid points".into());
        }
        report.verdict = if margin <= 0.0 && report.failure.is_none() && self.config.grid.tighten {
            Verdict::Certified
        } else {
            Verdict::Inconclusive
        };
    }

    /// Posterior synthesis with explicit sample sizes and seeds.
    pub fn run_posterior(&self, plant: &dyn System, n: u64, n0: u64, seeds: (u64, u64)) -> CertificateReport {
        self.run_posterior_with_data(plant, n, n0, seeds).0
    }

    /// As [`Prepared::run_posterior`], also returning the datasets collected.
    pub fn run_posterior_with_data(
        &self,
        plant: &dyn System,
        n: u64,
        n0: u64,
        seeds: (u64, u64),
    ) -> (CertificateReport, RunData) {
        let mut data = RunData::default();
        let start = Instant::now();
        let mut report = CertificateReport::empty(
            &self.config,
            Mode::Posterior,
            Seeds {
                scenario: seeds.0,
                validation: Some(seeds.1),
            },
        );
        report.n = n;
        report.n0 = Some(n0);
        self.posterior_steps(plant, n, n0, seeds, &mut report, &mut data);
        report.timings.total_s = start.elapsed().as_secs_f64();
        (report, data)
    }

    fn posterior_steps(
        &self,
        plant: &dyn System,
        n: u64,
        n0: u64,
        seeds: (u64, u64),
        report: &mut CertificateReport,
        data: &mut RunData,
    ) {
        if seeds.0 == seeds.1 {
            report.fail(Failure::new(Stage::Collection, "scenario and validation seeds must differ"));
            return;
        }
        let mut timings = report.timings;
        let outcome = (|| -> std::result::Result<(), Failure> {
            let d1 = data.scenario.insert(self.collect(plant, n, seeds.0, DatasetRole::Scenario, &mut timings)?);
            let sol = self.solve(&d1.samples, &mut timings)?;
            self.record_solution(report, &sol);
            let d2 = data.validation.insert(self.collect(plant, n0, seeds.1, DatasetRole::Validation, &mut timings)?);

            let t = Instant::now();
            let summary =
                violation_frequency(&sol.certificate, &d2).map_err(|e| Failure::new(Stage::Validation, e))?;
            report.r = Some(summary.r);
            report.knife_edge = summary.knife_edge.len();
            if !summary.knife_edge.is_empty() {
                report.warnings.push(format!(
                    "{} validation samples lie within rounding of the constraint boundary",
                    summary.knife_edge.len()
                ));
            }
            self.check_lipschitz(report, &sol.certificate, &d1.samples);
            timings.validate_s += t.elapsed().as_secs_f64();

            let inputs = PosteriorInputs {
                n,
                n0,
                n_star: sol.n_star,
                r: summary.r,
                beta: self.config.beta,
            };
            let kappa = bounds::solve_kappa(&inputs).map_err(|e| Failure::new(Stage::Bound, e))?;
            report.kappa = Some(kappa);
            self.finish(report, 1.0 - kappa, sol.lp.objective);
            Ok(())
        })();
        report.timings = timings;
        if let Err(f) = outcome {
            report.fail(f);
        }
    }

    /// Prior-bound synthesis: one dataset of at least the prior sample size.
    pub fn run_prior(&self, plant: &dyn System, eps: f64, n: Option<u64>, seed: u64) -> Result<CertificateReport> {
        Ok(self.run_prior_with_data(plant, eps, n, seed)?.0)
    }

    pub fn run_prior_with_data(
        &self,
        plant: &dyn System,
        eps: f64,
        n: Option<u64>,
        seed: u64,
    ) -> Result<(CertificateReport, RunData)> {
        let mut data = RunData::default();
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("eps must lie strictly between 0 and 1, got {eps}")));
        }
        let start = Instant::now();
        let mut report = CertificateReport::empty(
            &self.config,
            Mode::Prior,
            Seeds {
                scenario: seed,
                validation: None,
            },
        );
        let prior_n = bounds::prior_sample_size(&PriorInputs {
            eps,
            beta: self.config.beta,
            dim: self.prior_dim(),
        })?;
        report.n = n.map_or(prior_n, |n| n.max(prior_n));
        let mut timings = report.timings;
        let outcome = (|| -> std::result::Result<(), Failure> {
            let d1 = data.scenario.insert(self.collect(plant, report.n, seed, DatasetRole::Scenario, &mut timings)?);
            let sol = self.solve(&d1.samples, &mut timings)?;
            self.record_solution(&mut report, &sol);
            let t = Instant::now();
            self.check_lipschitz(&mut report, &sol.certificate, &d1.samples);
            timings.validate_s += t.elapsed().as_secs_f64();
            self.finish(&mut report, eps, sol.lp.objective);
            Ok(())
        })();
        report.timings = timings;
        if let Err(f) = outcome {
            report.fail(f);
        }
        report.timings.total_s = start.elapsed().as_secs_f64();
        Ok((report, data))
    }

    /// Dimension used in the prior bound: the barrier and controller
    /// coefficients plus `λ`, `γ` and `c`.
    pub fn prior_dim(&self) -> u64 {
        let l = self.templates.layout();
        (l.q_len() + l.p_len() + 3) as u64
    }

    fn check_lipschitz(&self, report: &mut CertificateReport, cert: &Certificate, samples: &[Sample]) {
        let Some(est) = estimate_lipschitz(cert, samples) else {
            return;
        };
        report.lipschitz_estimate = Some(est);
        if est > self.config.lipschitz {
            report.warnings.push(format!(
                "sampled difference quotients reach {est:.4}, above the configured Lipschitz bound {}",
                self.config.lipschitz
            ));
        }
    }

    /// Pilot solve followed by the sample-size planner.
    pub fn plan(&self, plant: &dyn System) -> Result<PlanReport> {
        let p = &self.config.planner;
        let seed = derive_seed(self.config.seed, PILOT_STREAM);
        let mut timings = Timings::default();
        let pilot = self
            .collect(plant, p.pilot_samples, seed, DatasetRole::Scenario, &mut timings)
            .and_then(|d| self.solve(&d.samples, &mut timings))
            .map_err(|f| Error::Planner(format!("pilot run failed: {}", f.message)))?;
        let estimates = PlannerEstimates {
            k_hat: pilot.lp.objective,
            n_star_hat: pilot.n_star,
        };
        let plan = bounds::plan_sample_sizes(
            &estimates,
            self.config.lipschitz,
            &self.config.space(),
            self.config.beta,
            (p.start_samples, p.start_samples / 2),
            &PlannerOptions {
                growth: p.growth,
                max_n: p.max_samples,
            },
        )?;
        Ok(PlanReport {
            pilot_samples: p.pilot_samples,
            pilot_seed: seed,
            estimates,
            plan,
        })
    }

    /// Resolves `"auto"` sample sizes, running the planner if needed.
    fn sizes(&self, plant: &dyn System) -> Result<(u64, u64, Option<SamplePlan>)> {
        match (self.config.samples, self.config.validation_samples) {
            (SampleCount::Fixed(n), SampleCount::Fixed(n0)) => Ok((n, n0, None)),
            _ => {
                let r = self.plan(plant)?;
                Ok((r.plan.n, r.plan.n0, Some(r.plan)))
            }
        }
    }
}

/// Datasets gathered during one run; absent when collection failed.
#[derive(Debug, Clone, Default)]
pub struct RunData {
    pub scenario: Option<Dataset>,
    pub validation: Option<Dataset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub pilot_samples: u64,
    pub pilot_seed: u64,
    pub estimates: PlannerEstimates,
    pub plan: SamplePlan,
}

/// Largest difference quotient `|g(z_i) - g(z_j)| / |z_i - z_j|` of the
/// scenario constraint over neighbouring samples, with samples ordered by
/// their first coordinate. A lower bound on the true Lipschitz constant.
pub fn estimate_lipschitz(cert: &Certificate, samples: &[Sample]) -> Option<f64> {
    let mut points: Vec<(Vec<f64>, f64)> = samples
        .iter()
        .filter_map(|s| {
            let z: Vec<f64> = s.x.iter().chain(&s.u).copied().collect();
            cert.g3_residual(s).ok().map(|g| (z, g))
        })
        .collect();
    points.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
    points
        .windows(2)
        .filter_map(|w| {
            let dist = w[0].0.iter().zip(&w[1].0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (dist > 1e-12).then(|| (w[0].1 - w[1].1).abs() / dist)
        })
        .reduce(f64::max)
}

/// Posterior synthesis with the configured seeds.
pub fn synthesize(cfg: &SynthesisConfig, plant: &dyn System) -> Result<CertificateReport> {
    Ok(synthesize_with_retries(cfg, plant, 0)?.pop().expect("at least one attempt"))
}

/// Posterior synthesis, retrying up to `retries` times with fresh seeds while
/// the verdict is inconclusive. Returns every attempt in order; the last one
/// lists the earlier ones in `previous_attempts`.
pub fn synthesize_with_retries(
    cfg: &SynthesisConfig,
    plant: &dyn System,
    retries: u32,
) -> Result<Vec<CertificateReport>> {
    Ok(synthesize_keeping_data(cfg, plant, retries)?.into_iter().map(|a| a.0).collect())
}

/// As [`synthesize_with_retries`], with the datasets of each attempt.
pub fn synthesize_keeping_data(
    cfg: &SynthesisConfig,
    plant: &dyn System,
    retries: u32,
) -> Result<Vec<(CertificateReport, RunData)>> {
    check_plant(cfg, plant)?;
    let prep = Prepared::new(cfg)?;
    let start = Instant::now();
    let sizes = prep.sizes(plant);
    let planning_s = start.elapsed().as_secs_f64();
    let mut reports: Vec<(CertificateReport, RunData)> = Vec::new();
    for attempt in 0..=retries {
        let seeds = attempt_seeds(cfg, attempt);
        let (mut report, data) = match &sizes {
            Ok((n, n0, plan)) => {
                let (mut r, data) = prep.run_posterior_with_data(plant, *n, *n0, seeds);
                r.plan = plan.clone();
                (r, data)
            }
            Err(e) => {
                let mut r = CertificateReport::empty(
                    cfg,
                    Mode::Posterior,
                    Seeds {
                        scenario: seeds.0,
                        validation: Some(seeds.1),
                    },
                );
                r.fail(Failure::new(Stage::Planning, e));
                (r, RunData::default())
            }
        };
        report.timings.planning_s = planning_s;
        report.attempt = attempt;
        report.previous_attempts = reports.iter().map(|(r, _)| r.summary()).collect();
        log::info!(
            "attempt {attempt}: seeds {}/{} verdict {:?} margin {:?}",
            seeds.0,
            seeds.1,
            report.verdict,
            report.margin
        );
        let done = report.is_certified() || sizes.is_err();
        reports.push((report, data));
        if done {
            break;
        }
    }
    Ok(reports)
}

fn attempt_seeds(cfg: &SynthesisConfig, attempt: u32) -> (u64, u64) {
    if attempt == 0 {
        return (cfg.seed, cfg.validation_seed);
    }
    let a = derive_seed(cfg.seed, RETRY_STREAM.wrapping_add(2 * attempt as u64));
    let mut b = derive_seed(cfg.validation_seed, RETRY_STREAM.wrapping_add(2 * attempt as u64 + 1));
    if a == b {
        b = b.wrapping_add(1);
    }
    (a, b)
}

/// Prior-bound synthesis at violation level `eps`.
pub fn prior_synthesize(cfg: &SynthesisConfig, plant: &dyn System, eps: f64) -> Result<CertificateReport> {
    Ok(prior_synthesize_keeping_data(cfg, plant, eps)?.0)
}

pub fn prior_synthesize_keeping_data(
    cfg: &SynthesisConfig,
    plant: &dyn System,
    eps: f64,
) -> Result<(CertificateReport, RunData)> {
    check_plant(cfg, plant)?;
    let prep = Prepared::new(cfg)?;
    prep.run_prior_with_data(plant, eps, cfg.samples.fixed(), cfg.seed)
}

fn check_plant(cfg: &SynthesisConfig, plant: &dyn System) -> Result<()> {
    if plant.state_dim() != cfg.state_dim() || plant.input_dim() != cfg.input_dim() {
        return Err(Error::config(
            "plant",
            format!(
                "plant has dimensions ({}, {}), regions have ({}, {})",
                plant.state_dim(),
                plant.input_dim(),
                cfg.state_dim(),
                cfg.input_dim()
            ),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub seeds: Seeds,
    pub verdict: Verdict,
    pub r: Option<u64>,
    pub n_star: Option<u64>,
    pub k_star: Option<f64>,
    pub margin: Option<f64>,
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub n: u64,
    pub n0: u64,
    pub runs: Vec<RunRecord>,
    /// Violation count `R` to number of runs; runs without an `R` are left out.
    pub histogram: BTreeMap<u64, u64>,
    pub certified: u64,
    pub certified_fraction: f64,
    /// `(N + N0) / certified fraction`; `None` when no run certified.
    pub expected_samples: Option<f64>,
}

impl RepeatSummary {
    /// Most frequent `R`, smallest on ties.
    pub fn mode(&self) -> Option<u64> {
        let best = *self.histogram.values().max()?;
        self.histogram.iter().find(|(_, &c)| c == best).map(|(&r, _)| r)
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("r,count\n");
        for (r, c) in &self.histogram {
            out.push_str(&format!("{r},{c}\n"));
        }
        out
    }
}

/// Seeds of run `index` in a repeated experiment.
pub fn run_seeds(cfg: &SynthesisConfig, index: u64) -> (u64, u64) {
    let a = derive_seed(cfg.seed, index);
    let mut b = derive_seed(cfg.validation_seed, index);
    if a == b {
        b = b.wrapping_add(1);
    }
    (a, b)
}

/// Runs posterior synthesis `runs` times with seeds derived from the
/// configured ones and the run index. Per-run failures are recorded.
pub fn repeat_experiment(cfg: &SynthesisConfig, plant: &dyn System, runs: u64) -> Result<RepeatSummary> {
    if runs == 0 {
        return Err(Error::Domain("runs must be at least 1".into()));
    }
    check_plant(cfg, plant)?;
    let prep = Prepared::new(cfg)?;
    let (n, n0, _) = prep.sizes(plant)?;
    let run = |i: u64| {
        let seeds = run_seeds(cfg, i);
        let rep = prep.run_posterior(plant, n, n0, seeds);
        log::info!("run {i}: R {:?} N* {:?} verdict {:?}", rep.r, rep.n_star, rep.verdict);
        RunRecord {
            run: i,
            seeds: rep.seeds,
            verdict: rep.verdict,
            r: rep.r,
            n_star: rep.n_star,
            k_star: rep.k_star,
            margin: rep.margin,
            failure: rep.failure,
        }
    };
    let records: Vec<RunRecord> = if plant.reentrant() {
        (0..runs).into_par_iter().map(run).collect()
    } else {
        (0..runs).map(run).collect()
    };
    let mut histogram = BTreeMap::new();
    for r in records.iter().filter_map(|r| r.r) {
        *histogram.entry(r).or_insert(0) += 1;
    }
    let certified = records.iter().filter(|r| r.verdict == Verdict::Certified).count() as u64;
    let certified_fraction = certified as f64 / runs as f64;
    Ok(RepeatSummary {
        n,
        n0,
        runs: records,
        histogram,
        certified,
        certified_fraction,
        expected_samples: (certified > 0).then(|| (n + n0) as f64 / certified_fraction),
    })
}
