use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DecisionLayout, LpProblem, RowTag};
use crate::error::{Error, Result};
use crate::lp::{self, DenseLp, LpOptions, LpStatus, PivotRule};

/// Absolute tolerances on row residuals in problem units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub feasibility: f64,
    pub optimality: f64,
    /// A row counts as active when `|coeffs·d - rhs|` is at most this.
    pub activity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-8,
            optimality: 1e-8,
            activity: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tolerances: Tolerances,
    pub max_iterations: usize,
    pub bland: bool,
    /// Break ties among optimal points lexicographically over the columns.
    pub tie_break: bool,
    /// Above this many scenario rows, solve on a growing subset and add the
    /// most violated rows until none is violated.
    pub row_generation_threshold: usize,
    pub row_generation_batch: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            max_iterations: 100_000,
            bland: false,
            tie_break: true,
            row_generation_threshold: 50_000,
            row_generation_batch: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `(K, λ, γ, c, q, p)`.
    pub d_star: Vec<f64>,
    /// All LP columns including the split variables.
    pub columns: Vec<f64>,
    pub objective: f64,
    /// Rows with `|coeffs·d - rhs| <= activity`, ascending.
    pub active_row_ids: Vec<usize>,
    pub iterations: usize,
    pub rounds: usize,
    pub warnings: Vec<String>,
}

fn lp_options(opts: &SolveOptions) -> LpOptions {
    LpOptions {
        feasibility_tol: opts.tolerances.feasibility,
        optimality_tol: opts.tolerances.optimality,
        max_iterations: opts.max_iterations,
        pivot_rule: if opts.bland {
            PivotRule::Bland
        } else {
            PivotRule::Dantzig
        },
    }
}

fn objectives(ncols: usize, tie_break: bool) -> Vec<Vec<f64>> {
    let unit = |j: usize| {
        let mut c = vec![0.0; ncols];
        c[j] = 1.0;
        c
    };
    let mut out = vec![unit(DecisionLayout::K)];
    if tie_break {
        out.extend((1..ncols).map(unit));
    }
    out
}

fn solve_subset(problem: &LpProblem, rows: &[usize], opts: &SolveOptions, tie_break: bool) -> Result<lp::LpOutcome> {
    let m = problem.matrix();
    let mut sub = DenseLp::with_capacity(m.ncols(), rows.len());
    for &i in rows {
        sub.push_row(m.row(i), m.rhs(i));
    }
    lp::solve(&sub, &objectives(m.ncols(), tie_break), &lp_options(opts))
}

/// Minimises `K` over all rows of `problem`.
pub fn solve_lp(problem: &LpProblem, opts: &SolveOptions) -> Result<LpSolution> {
    if problem.g3_count() == 0 {
        return Err(Error::Schema("scenario program has no sample rows".into()));
    }
    let n = problem.len();
    let mut warnings = Vec::new();
    let (outcome, rounds) = if problem.g3_count() <= opts.row_generation_threshold {
        let all: Vec<usize> = (0..n).collect();
        (solve_subset(problem, &all, opts, opts.tie_break)?, 1)
    } else {
        row_generation(problem, opts)?
    };
    if outcome.tie_break_moves > 0 {
        warnings.push(format!(
            "optimum is not unique: tie-breaking moved along the optimal face ({} pivots)",
            outcome.tie_break_moves
        ));
    }
    if outcome.tie_break_incomplete {
        warnings.push("a tie-break objective is unbounded on the optimal face; left partially resolved".into());
    }
    let x = outcome.x;
    let activity = opts.tolerances.activity;
    let active_row_ids = if outcome.status == LpStatus::Optimal {
        (0..n)
            .into_par_iter()
            .filter(|&i| problem.residual(i, &x).abs() <= activity)
            .collect()
    } else {
        Vec::new()
    };
    let dim = problem.layout().dim();
    Ok(LpSolution {
        status: outcome.status,
        d_star: x[..dim].to_vec(),
        objective: x[DecisionLayout::K],
        columns: x,
        active_row_ids,
        iterations: outcome.iterations,
        rounds,
        warnings,
    })
}

fn row_generation(problem: &LpProblem, opts: &SolveOptions) -> Result<(lp::LpOutcome, usize)> {
    let n = problem.len();
    let batch = opts.row_generation_batch.max(1);
    let g3: Vec<usize> = (0..n).filter(|&i| problem.tag(i) == RowTag::G3).collect();
    let mut included = vec![false; n];
    for i in 0..n {
        if problem.tag(i) != RowTag::G3 {
            included[i] = true;
        }
    }
    // an evenly spread starting subset
    let stride = g3.len().div_ceil(batch).max(1);
    let mut next_spread = 0;
    let mut seed_more = |included: &mut Vec<bool>| -> bool {
        if next_spread >= stride {
            return false;
        }
        for &i in g3.iter().skip(next_spread).step_by(stride) {
            included[i] = true;
        }
        next_spread += 1;
        true
    };
    seed_more(&mut included);
    let tol = opts.tolerances.feasibility;
    let mut iterations = 0;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let rows: Vec<usize> = (0..n).filter(|&i| included[i]).collect();
        let mut outcome = solve_subset(problem, &rows, opts, opts.tie_break)?;
        iterations += outcome.iterations;
        outcome.iterations = iterations;
        match outcome.status {
            LpStatus::Infeasible => return Ok((outcome, rounds)),
            LpStatus::Unbounded => {
                if seed_more(&mut included) {
                    continue;
                }
                return Ok((outcome, rounds));
            }
            LpStatus::Optimal => {}
        }
        let x = &outcome.x;
        let mut violated: Vec<(f64, usize)> = (0..n)
            .into_par_iter()
            .filter(|&i| !included[i])
            .filter_map(|i| {
                let r = problem.residual(i, x);
                (r > tol).then_some((r, i))
            })
            .collect();
        if violated.is_empty() {
            log::debug!("row generation converged after {rounds} rounds with {} rows", rows.len());
            return Ok((outcome, rounds));
        }
        violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in violated.iter().take(batch) {
            included[i] = true;
        }
    }
}

/// Scenario rows whose residual at the solution is within `tol` of zero.
pub fn count_active_g3(problem: &LpProblem, sol: &LpSolution, tol: f64) -> usize {
    (0..problem.len())
        .into_par_iter()
        .filter(|&i| problem.tag(i) == RowTag::G3 && problem.residual(i, &sol.columns).abs() <= tol)
        .count()
}

/// Largest residual over all rows; zero or negative means feasible.
pub fn max_violation(problem: &LpProblem, columns: &[f64]) -> f64 {
    (0..problem.len())
        .into_par_iter()
        .map(|i| problem.residual(i, columns))
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Number of scenario rows whose removal alone lowers the optimum by more
/// than the optimality tolerance. One re-solve per scenario row.
pub fn exact_support_count(problem: &LpProblem, sol: &LpSolution, opts: &SolveOptions) -> Result<usize> {
    let n = problem.len();
    let g3: Vec<usize> = (0..n).filter(|&i| problem.tag(i) == RowTag::G3).collect();
    let tol = opts.tolerances.optimality * sol.objective.abs().max(1.0);
    let mut count = 0;
    for &skip in &g3 {
        let rows: Vec<usize> = (0..n).filter(|&i| i != skip).collect();
        let out = solve_subset(problem, &rows, opts, false)?;
        let improves = match out.status {
            LpStatus::Unbounded => true,
            LpStatus::Optimal => out.x[DecisionLayout::K] < sol.objective - tol,
            LpStatus::Infeasible => false,
        };
        count += improves as usize;
    }
    Ok(count)
}
