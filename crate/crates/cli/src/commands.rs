use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use scbf_core::bounds::{self, PlannerEstimates, PlannerOptions, PosteriorInputs, PriorInputs};
use scbf_core::geometry::u_inverse;
use scbf_core::pipeline::{
    self, build_plant, CertificateReport, Mode, Prepared, RunData, Verdict,
};
use scbf_core::plant::{collect, save_dataset, DatasetRole};
use scbf_core::verify::{check_cbf_conditions, emit_plot_data, empirical_safety, CheckGrids, ConditionReport, SafetySummary};
use scbf_core::{Error, SampleCount, SynthesisConfig};

use super::{BoundsCommand, CaseMode, Cli, Command, Overrides, Role, EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_RUNTIME};
use crate::output::RunDir;

const BUNDLED_ROOM: &str = include_str!("../configs/room-temp.cfg");

/// Plot grid sizes: states along the barrier curve, inputs across the
/// decrease surface.
const PLOT_POINTS_X: usize = 401;
const PLOT_POINTS_U: usize = 21;

/// A configuration problem: bad file, bad key, bad override.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn exit_code_for(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() || matches!(cause.downcast_ref::<Error>(), Some(Error::Config { .. })) {
            return EXIT_CONFIG;
        }
    }
    EXIT_RUNTIME
}

fn config_err(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow::Error::new(ConfigError(e.to_string()))
}

fn load_config(path: &Path) -> Result<SynthesisConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("reading {}: {e}", path.display())))?;
    SynthesisConfig::from_toml(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn apply(cfg: SynthesisConfig, o: &Overrides) -> Result<SynthesisConfig> {
    let mut cfg = cfg.with_seeds(o.seed, o.seed_validation).map_err(config_err)?;
    if o.no_tighten {
        cfg.grid.tighten = false;
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<u8> {
    let out = cli.out;
    match cli.command {
        Command::Bounds { which } => bounds_cmd(which),
        Command::Plan { config, seed } => {
            let cfg = load_config(&config)?.with_seeds(seed, None).map_err(config_err)?;
            plan_cmd(&cfg, &out)
        }
        Command::Collect {
            config,
            role,
            count,
            seed,
        } => collect_cmd(&load_config(&config)?, role, count, seed, &out),
        Command::Synthesize {
            config,
            overrides,
            retries,
        } => {
            let cfg = apply(load_config(&config)?, &overrides)?;
            synthesize_cmd(&cfg, retries, &out, "synthesize")
        }
        Command::PriorSynthesize { config, eps, overrides } => {
            let cfg = apply(load_config(&config)?, &overrides)?;
            prior_cmd(&cfg, eps, &out, "prior-synthesize")
        }
        Command::Verify { report, grid } => verify_cmd(&report, grid, &out),
        Command::Casestudy {
            mode,
            config,
            eps,
            overrides,
            retries,
        } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => SynthesisConfig::from_toml(BUNDLED_ROOM).map_err(config_err)?,
            };
            let cfg = apply(cfg, &overrides)?;
            match mode {
                CaseMode::Posterior => synthesize_cmd(&cfg, retries, &out, "casestudy-posterior"),
                CaseMode::Prior => prior_cmd(&cfg, eps, &out, "casestudy-prior"),
            }
        }
        Command::Repeat { config, runs, overrides } => {
            let cfg = apply(load_config(&config)?, &overrides)?;
            repeat_cmd(&cfg, runs, &out)
        }
    }
}

fn bounds_cmd(which: BoundsCommand) -> Result<u8> {
    match which {
        BoundsCommand::Prior { eps, beta, dim } => {
            let n = bounds::prior_sample_size(&PriorInputs { eps, beta, dim })?;
            println!("{n}");
        }
        BoundsCommand::Kappa { n, n0, n_star, r, beta } => {
            let kappa = bounds::solve_kappa(&PosteriorInputs {
                n,
                n0,
                n_star,
                r,
                beta,
            })?;
            println!("{kappa:.7}");
        }
        BoundsCommand::Plan {
            config,
            k_hat,
            n_star_hat,
            start,
        } => {
            let cfg = load_config(&config)?;
            let start = start.unwrap_or(cfg.planner.start_samples);
            let plan = bounds::plan_sample_sizes(
                &PlannerEstimates { k_hat, n_star_hat },
                cfg.lipschitz,
                &cfg.space(),
                cfg.beta,
                (start, start / 2),
                &PlannerOptions {
                    growth: cfg.planner.growth,
                    max_n: cfg.planner.max_samples,
                },
            )?;
            for s in &plan.steps {
                eprintln!(
                    "N={} N0={} R_hat={} kappa_threshold={:.9} {}",
                    s.n,
                    s.n0,
                    s.r_hat,
                    s.kappa_threshold,
                    if s.passes { "pass" } else { "fail" }
                );
            }
            println!("{} {}", plan.n, plan.n0);
        }
    }
    Ok(EXIT_OK)
}

fn plan_cmd(cfg: &SynthesisConfig, out: &Path) -> Result<u8> {
    let plant = build_plant(&cfg.plant)?;
    let prep = Prepared::new(cfg)?;
    let plan = prep.plan(plant.as_ref())?;
    let mut dir = RunDir::create(out, "plan", Some(cfg))?;
    dir.set_seeds(json!({ "pilot": plan.pilot_seed }));
    dir.write_json("plan.json", &plan)?;
    println!(
        "pilot K = {:.6}, N* = {}; plan N = {}, N0 = {}",
        plan.estimates.k_hat, plan.estimates.n_star_hat, plan.plan.n, plan.plan.n0
    );
    println!("output: {}", dir.finish()?.display());
    Ok(EXIT_OK)
}

fn collect_cmd(cfg: &SynthesisConfig, role: Role, count: Option<u64>, seed: Option<u64>, out: &Path) -> Result<u8> {
    let (role, configured, default_seed) = match role {
        Role::Scenario => (DatasetRole::Scenario, cfg.samples, cfg.seed),
        Role::Validation => (DatasetRole::Validation, cfg.validation_samples, cfg.validation_seed),
    };
    let count = match (count, configured) {
        (Some(c), _) => c,
        (None, SampleCount::Fixed(c)) => c,
        (None, SampleCount::Auto(_)) => {
            return Err(config_err("sample count is \"auto\" in the configuration; pass --count"))
        }
    };
    let seed = seed.unwrap_or(default_seed);
    let plant = build_plant(&cfg.plant)?;
    let data = collect(plant.as_ref(), &cfg.space(), count as usize, seed, role)?;
    let mut dir = RunDir::create(out, "collect", Some(cfg))?;
    dir.set_seeds(json!({ role.to_string(): seed }));
    let name = format!("{role}.csv");
    let path = dir.path().join(&name);
    save_dataset(&data, &path)?;
    dir.note(&path);
    println!("{} samples written to {}", data.len(), path.display());
    dir.finish()?;
    Ok(EXIT_OK)
}

fn save_data(dir: &mut RunDir, data: &RunData, suffix: &str) -> Result<()> {
    for d in [&data.scenario, &data.validation].into_iter().flatten() {
        let path = dir.path().join(format!("{}{suffix}.csv", d.role));
        save_dataset(d, &path)?;
        dir.note(&path);
    }
    Ok(())
}

fn save_plots(dir: &mut RunDir, report: &CertificateReport) -> Result<()> {
    let Some(cert) = &report.certificate else {
        return Ok(());
    };
    let cfg = &report.config;
    let plant = build_plant(&cfg.plant)?;
    let paths = emit_plot_data(
        cert,
        plant.as_ref(),
        &cfg.states,
        &cfg.inputs,
        PLOT_POINTS_X,
        PLOT_POINTS_U,
        &dir.path().join("plots"),
    )?;
    for p in paths {
        dir.note(&p);
    }
    Ok(())
}

fn print_report(r: &CertificateReport) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
    let int = |v: Option<u64>| v.map_or("-".to_string(), |v| v.to_string());
    println!("verdict: {}", match r.verdict {
        Verdict::Certified => "certified",
        Verdict::Inconclusive => "inconclusive",
    });
    if let Some(f) = &r.failure {
        println!("failure ({:?}): {}", f.stage, f.message);
    }
    println!(
        "N = {}  N0 = {}  N* = {}  R = {}  kappa = {}",
        r.n,
        int(r.n0),
        int(r.n_star),
        int(r.r),
        r.kappa.map_or("-".to_string(), |k| format!("{k:.9}"))
    );
    println!(
        "margin = K* + L*Uinv(eps) = {} + {} = {}",
        fmt(r.k_star),
        fmt(r.slack),
        fmt(r.margin)
    );
    for w in &r.warnings {
        println!("warning: {w}");
    }
}

fn verdict_code(r: &CertificateReport) -> u8 {
    match (r.verdict, r.margin, &r.certificate) {
        (Verdict::Certified, Some(m), Some(_)) if m <= 0.0 => EXIT_OK,
        _ => EXIT_INCONCLUSIVE,
    }
}

fn synthesize_cmd(cfg: &SynthesisConfig, retries: u32, out: &Path, name: &str) -> Result<u8> {
    let plant = build_plant(&cfg.plant)?;
    let attempts = pipeline::synthesize_keeping_data(cfg, plant.as_ref(), retries)?;
    drop(plant);
    let mut dir = RunDir::create(out, name, Some(cfg))?;
    let seeds: Vec<_> = attempts.iter().map(|(r, _)| r.seeds).collect();
    dir.set_seeds(serde_json::to_value(&seeds)?);
    let last = attempts.len() - 1;
    for (i, (report, data)) in attempts.iter().enumerate() {
        if i < last {
            dir.write_json(&format!("report-attempt{i}.json"), report)?;
            save_data(&mut dir, data, &format!("-attempt{i}"))?;
        }
    }
    let (report, data) = &attempts[last];
    save_data(&mut dir, data, "")?;
    save_plots(&mut dir, report)?;
    // the report goes last so a certified report on disk implies complete outputs
    dir.write("report.json", report.to_json()?.as_bytes())?;
    print_report(report);
    println!("output: {}", dir.finish()?.display());
    Ok(verdict_code(report))
}

fn prior_cmd(cfg: &SynthesisConfig, eps: f64, out: &Path, name: &str) -> Result<u8> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(config_err(format!("--eps must lie strictly between 0 and 1, got {eps}")));
    }
    let plant = build_plant(&cfg.plant)?;
    let (report, data) = pipeline::prior_synthesize_keeping_data(cfg, plant.as_ref(), eps)?;
    drop(plant);
    let mut dir = RunDir::create(out, name, Some(cfg))?;
    dir.set_seeds(serde_json::to_value(report.seeds)?);
    save_data(&mut dir, &data, "")?;
    save_plots(&mut dir, &report)?;
    dir.write("report.json", report.to_json()?.as_bytes())?;
    print_report(&report);
    println!("output: {}", dir.finish()?.display());
    Ok(verdict_code(&report))
}

fn repeat_cmd(cfg: &SynthesisConfig, runs: u64, out: &Path) -> Result<u8> {
    if runs == 0 {
        return Err(config_err("--runs must be at least 1"));
    }
    let plant = build_plant(&cfg.plant)?;
    let summary = pipeline::repeat_experiment(cfg, plant.as_ref(), runs)?;
    let mut dir = RunDir::create(out, "repeat", Some(cfg))?;
    dir.set_seeds(json!({ "base": cfg.seed, "validation_base": cfg.validation_seed, "runs": runs }));
    dir.write_json("repeat.json", &summary)?;
    dir.write("histogram.csv", summary.histogram_csv().as_bytes())?;
    println!("N = {}  N0 = {}  runs = {}", summary.n, summary.n0, runs);
    print!("{}", summary.histogram_csv());
    println!(
        "certified {}/{}; expected samples {}",
        summary.certified,
        runs,
        summary
            .expected_samples
            .map_or("undefined (no run certified)".to_string(), |e| format!("{e:.0}"))
    );
    println!("output: {}", dir.finish()?.display());
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct Arithmetic {
    slack: f64,
    margin: f64,
    margin_matches: bool,
    kappa: Option<f64>,
    kappa_matches: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Verification {
    verdict: Verdict,
    arithmetic: Arithmetic,
    conditions: ConditionReport,
    safety: SafetySummary,
    passed: bool,
}

fn verify_cmd(path: &Path, grid: usize, out: &Path) -> Result<u8> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report = CertificateReport::from_json(&text).map_err(config_err)?;
    let cert = report
        .certificate
        .as_ref()
        .ok_or_else(|| anyhow!("report has no certificate to verify"))?;
    let (k, eps, margin) = match (report.k_star, report.eps, report.margin) {
        (Some(k), Some(e), Some(m)) => (k, e, m),
        _ => bail!("report lacks K*, eps or margin"),
    };
    let cfg = &report.config;
    let slack = cfg.lipschitz * u_inverse(eps, &cfg.space())?;
    let recomputed = k + slack;
    let kappa = match (report.mode, report.n0, report.n_star, report.r) {
        (Mode::Posterior, Some(n0), Some(n_star), Some(r)) => Some(bounds::solve_kappa(&PosteriorInputs {
            n: report.n,
            n0,
            n_star,
            r,
            beta: report.beta,
        })?),
        _ => None,
    };
    let arithmetic = Arithmetic {
        slack,
        margin: recomputed,
        margin_matches: (recomputed - margin).abs() <= 1e-12 * margin.abs().max(1.0),
        kappa,
        kappa_matches: kappa.zip(report.kappa).map(|(a, b)| (a - b).abs() <= 1e-9),
    };

    let plant = build_plant(&cfg.plant)?;
    let grids = CheckGrids::new(&cfg.initial, &cfg.unsafe_set, &cfg.states, &cfg.inputs, grid)?;
    let conditions = check_cbf_conditions(cert, plant.as_ref(), &grids, &cfg.inputs, cfg.horizon as f64)?;
    let safety = empirical_safety(
        plant.as_ref(),
        cert,
        &grids.initial,
        cfg.horizon as usize,
        &cfg.unsafe_set,
        &cfg.inputs,
    )?;
    let passed = arithmetic.margin_matches
        && arithmetic.kappa_matches.unwrap_or(true)
        && conditions.all_pass()
        && safety.fraction_safe == 1.0;

    let mut dir = RunDir::create(out, "verify", Some(cfg))?;
    dir.set_seeds(serde_json::to_value(report.seeds)?);
    save_plots(&mut dir, &report)?;
    let v = Verification {
        verdict: report.verdict,
        arithmetic,
        conditions,
        safety,
        passed,
    };
    dir.write_json("verification.json", &v)?;
    println!(
        "margin recomputed {:.6} ({}), kappa {}",
        v.arithmetic.margin,
        if v.arithmetic.margin_matches { "matches" } else { "MISMATCH" },
        match v.arithmetic.kappa_matches {
            Some(true) => "matches",
            Some(false) => "MISMATCH",
            None => "n/a",
        }
    );
    let c = &v.conditions;
    for (name, chk) in [
        ("initial", &c.initial),
        ("unsafe", &c.unsafe_set),
        ("decrease", &c.decrease),
        ("level gap", &c.level_gap),
        ("input", &c.input),
    ] {
        println!("{name:>9}: worst {:+.3e} {}", chk.worst, if chk.pass { "pass" } else { "FAIL" });
    }
    println!(
        "closed loop: {}/{} safe, min distance to unsafe {:.4}, clamps {}",
        v.safety.trajectories - v.safety.failing.len(),
        v.safety.trajectories,
        v.safety.min_distance_to_unsafe,
        v.safety.clamp_events
    );
    println!("output: {}", dir.finish()?.display());
    Ok(if passed { EXIT_OK } else { EXIT_INCONCLUSIVE })
}
