//! Dense active-set LP solver for tall problems: a few dozen free variables
//! and up to millions of inequality rows `a_i · x <= b_i`.
//!
//! The solver walks vertices of the feasible polyhedron. A working set of
//! `n` linearly independent constraints defines the current vertex; free
//! variables start out "pinned" by artificial equality constraints that are
//! released as soon as the objective profits. Phase 1 minimises a single
//! shift variable `s` over `a_i · x - s <= b_i`, phase 2 minimises the
//! objective and then applies any tie-break objectives lexicographically on
//! the optimal face.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major constraint matrix with right-hand sides.
#[derive(Debug, Clone, Default)]
pub struct DenseLp {
    ncols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl DenseLp {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    pub fn with_capacity(ncols: usize, rows: usize) -> Self {
        Self {
            ncols,
            a: Vec::with_capacity(rows * ncols),
            b: Vec::with_capacity(rows),
        }
    }

    pub fn push_row(&mut self, coeffs: &[f64], rhs: f64) {
        assert_eq!(coeffs.len(), self.ncols, "row width");
        self.a.extend_from_slice(coeffs);
        self.b.push(rhs);
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.b[i]
    }

    /// `b_i - a_i · x`; negative means violated.
    pub fn slack(&self, i: usize, x: &[f64]) -> f64 {
        self.b[i] - dot(self.row(i), x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Largest multiplier, falling back to Bland's rule after a run of
    /// degenerate pivots.
    Dantzig,
    /// Smallest index throughout; never cycles.
    Bland,
}

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iterations: usize,
    pub pivot_rule: PivotRule,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-8,
            optimality_tol: 1e-8,
            max_iterations: 100_000,
            pivot_rule: PivotRule::Dantzig,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub degenerate_pivots: usize,
    /// Non-degenerate pivots taken while breaking ties; positive means the
    /// primary optimum was not unique.
    pub tie_break_moves: usize,
    /// Some tie-break objective was unbounded on the optimal face.
    pub tie_break_incomplete: bool,
}

/// Minimises `objectives[0] · x` subject to the rows of `lp`, then each
/// further objective in turn over the optimal face of the previous ones.
pub fn solve(lp: &DenseLp, objectives: &[Vec<f64>], opts: &LpOptions) -> Result<LpOutcome> {
    assert!(!objectives.is_empty(), "at least one objective");
    for c in objectives {
        assert_eq!(c.len(), lp.ncols, "objective width");
    }
    let mut engine = Engine::new(lp, opts);
    if let Some(outcome) = engine.trivially_infeasible() {
        return Ok(outcome);
    }
    engine.start();
    if engine.phase1 {
        let phase1_obj = {
            let mut c = vec![0.0; engine.n + 1];
            c[engine.n] = 1.0;
            c
        };
        match engine.optimize(&[phase1_obj])? {
            LevelEnd::Optimal => {}
            LevelEnd::Unbounded => unreachable!("phase 1 is bounded below by s >= 0"),
        }
        if engine.z[engine.n] > opts.feasibility_tol {
            return Ok(engine.outcome(LpStatus::Infeasible));
        }
        engine.leave_phase1();
    }
    let scaled: Vec<Vec<f64>> = objectives.iter().map(|c| engine.scale_objective(c)).collect();
    let status = match engine.optimize(&scaled)? {
        LevelEnd::Optimal => LpStatus::Optimal,
        LevelEnd::Unbounded => LpStatus::Unbounded,
    };
    if status == LpStatus::Optimal {
        engine.refine();
    }
    Ok(engine.outcome(status))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Con {
    Row(usize),
    Pin(usize),
    /// `-s <= 0` in phase 1.
    ShiftBound,
}

enum LevelEnd {
    Optimal,
    Unbounded,
}

const REFRESH_EVERY: usize = 40;
const DEGENERATE_STREAK_FOR_BLAND: usize = 50;

struct Engine<'a> {
    opts: &'a LpOptions,
    n: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    col_scale: Vec<f64>,
    phase1: bool,
    z: Vec<f64>,
    pin_value: Vec<f64>,
    ws: Vec<Con>,
    in_ws: Vec<bool>,
    slack: Vec<f64>,
    alpha: Vec<f64>,
    iterations: usize,
    degenerate: usize,
    degenerate_streak: usize,
    tie_break_moves: usize,
    tie_break_incomplete: bool,
    level: usize,
}

impl<'a> Engine<'a> {
    fn new(lp: &DenseLp, opts: &'a LpOptions) -> Self {
        let (n, m) = (lp.ncols, lp.nrows());
        let mut col_scale = vec![0.0f64; n];
        for i in 0..m {
            for (s, v) in col_scale.iter_mut().zip(lp.row(i)) {
                *s = s.max(v.abs());
            }
        }
        for s in &mut col_scale {
            *s = if *s > 0.0 { 1.0 / *s } else { 1.0 };
        }
        let mut a = Vec::with_capacity(m * n);
        let mut b = Vec::with_capacity(m);
        for i in 0..m {
            let start = a.len();
            a.extend(lp.row(i).iter().zip(&col_scale).map(|(v, s)| v * s));
            let big = a[start..].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let r = if big > 0.0 { 1.0 / big } else { 1.0 };
            for v in &mut a[start..] {
                *v *= r;
            }
            b.push(lp.b[i] * r);
        }
        Self {
            opts,
            n,
            m,
            a,
            b,
            col_scale,
            phase1: false,
            z: vec![0.0; n],
            pin_value: vec![0.0; n],
            ws: Vec::new(),
            in_ws: vec![false; m],
            slack: Vec::new(),
            alpha: vec![0.0; m],
            iterations: 0,
            degenerate: 0,
            degenerate_streak: 0,
            tie_break_moves: 0,
            tie_break_incomplete: false,
            level: 0,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    fn trivially_infeasible(&self) -> Option<LpOutcome> {
        // all-zero rows never enter a working set; they are either vacuous or infeasible
        let tol = self.opts.feasibility_tol;
        let bad = (0..self.m).any(|i| self.row(i).iter().all(|&v| v == 0.0) && self.b[i] < -tol);
        bad.then(|| LpOutcome {
            status: LpStatus::Infeasible,
            x: vec![0.0; self.n],
            iterations: 0,
            degenerate_pivots: 0,
            tie_break_moves: 0,
            tie_break_incomplete: false,
        })
    }

    /// Start at the origin with every variable pinned. When some row is
    /// violated there, add the shift variable and the most violated row.
    fn start(&mut self) {
        self.ws = (0..self.n).map(Con::Pin).collect();
        let worst = (0..self.m)
            .filter(|&i| self.row(i).iter().any(|&v| v != 0.0))
            .min_by(|&i, &j| self.b[i].total_cmp(&self.b[j]).then(i.cmp(&j)));
        match worst {
            Some(i) if self.b[i] < -self.opts.feasibility_tol => {
                self.phase1 = true;
                self.z.push(-self.b[i]);
                self.ws.push(Con::Row(i));
                self.in_ws[i] = true;
            }
            _ => {}
        }
        self.refresh_slacks();
    }

    fn nc(&self) -> usize {
        self.n + self.phase1 as usize
    }

    fn shift(&self) -> f64 {
        if self.phase1 {
            self.z[self.n]
        } else {
            0.0
        }
    }

    fn con_row(&self, con: Con) -> Vec<f64> {
        let mut v = vec![0.0; self.nc()];
        match con {
            Con::Row(i) => {
                v[..self.n].copy_from_slice(self.row(i));
                if self.phase1 {
                    v[self.n] = -1.0;
                }
            }
            Con::Pin(j) => v[j] = 1.0,
            Con::ShiftBound => v[self.n] = -1.0,
        }
        v
    }

    fn con_rhs(&self, con: Con) -> f64 {
        match con {
            Con::Row(i) => self.b[i],
            Con::Pin(j) => self.pin_value[j],
            Con::ShiftBound => 0.0,
        }
    }

    fn factor(&self) -> Result<Lu> {
        let nc = self.nc();
        let mut mat = Vec::with_capacity(nc * nc);
        for &con in &self.ws {
            mat.extend(self.con_row(con));
        }
        Lu::factor(mat, nc).ok_or_else(|| Error::Domain("LP working set became singular".into()))
    }

    fn refresh_slacks(&mut self) {
        let s = self.shift();
        self.slack = (0..self.m)
            .map(|i| self.b[i] - dot(self.row(i), &self.z[..self.n]) + s)
            .collect();
        for (i, &inside) in self.in_ws.iter().enumerate() {
            if inside {
                self.slack[i] = 0.0;
            }
        }
    }

    /// Recomputes the vertex from the working set to shed accumulated drift.
    fn resync(&mut self, lu: &Lu) {
        let mut rhs: Vec<f64> = self.ws.iter().map(|&c| self.con_rhs(c)).collect();
        lu.solve(&mut rhs);
        self.z = rhs;
        self.refresh_slacks();
    }

    fn scale_objective(&self, c: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = c.iter().zip(&self.col_scale).map(|(a, s)| a * s).collect();
        let big = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if big > 0.0 {
            for x in &mut v {
                *x /= big;
            }
        }
        v
    }

    /// Lexicographic optimisation over `objectives` (already in scaled
    /// coordinates). Returns `Unbounded` only for the first objective.
    fn optimize(&mut self, objectives: &[Vec<f64>]) -> Result<LevelEnd> {
        let tol = self.opts.optimality_tol;
        for level in 0..objectives.len() {
            self.level = level;
            loop {
                if self.iterations >= self.opts.max_iterations {
                    return Err(Error::IterationLimit(self.iterations));
                }
                let lu = self.factor()?;
                if self.iterations % REFRESH_EVERY == 0 {
                    self.resync(&lu);
                }
                let multipliers: Vec<Vec<f64>> = objectives[..=level]
                    .iter()
                    .map(|c| {
                        let mut y: Vec<f64> = c.iter().map(|v| -v).collect();
                        lu.solve_transpose(&mut y);
                        y
                    })
                    .collect();
                let Some((pos, sign)) = self.price(&multipliers, tol) else {
                    break;
                };
                let mut p = vec![0.0; self.nc()];
                p[pos] = sign;
                lu.solve(&mut p);
                match self.ratio_test(&p) {
                    Some((entering, step)) => self.pivot(pos, entering, step, &p),
                    None if level == 0 => return Ok(LevelEnd::Unbounded),
                    None => {
                        self.tie_break_incomplete = true;
                        break;
                    }
                }
            }
        }
        Ok(LevelEnd::Optimal)
    }

    /// Picks the working-set position to release and the sign of the
    /// right-hand side perturbation that moves off it.
    fn price(&self, y: &[Vec<f64>], tol: f64) -> Option<(usize, f64)> {
        let level = y.len() - 1;
        let bland = self.opts.pivot_rule == PivotRule::Bland
            || self.degenerate_streak >= DEGENERATE_STREAK_FOR_BLAND;
        let mut best: Option<(usize, f64, f64, usize)> = None; // pos, sign, score, order key
        for (pos, &con) in self.ws.iter().enumerate() {
            // releasing must leave every higher-priority objective unchanged
            if y[..level].iter().any(|yk| yk[pos].abs() > tol) {
                continue;
            }
            let v = y[level][pos];
            let (sign, score) = match con {
                Con::Pin(_) if v.abs() > tol => (v.signum(), v.abs()),
                Con::Row(_) | Con::ShiftBound if v < -tol => (-1.0, -v),
                _ => continue,
            };
            // pins are released before rows leave
            let key = match con {
                Con::Pin(j) => j,
                Con::Row(i) => self.n + i,
                Con::ShiftBound => usize::MAX,
            };
            let score = if matches!(con, Con::Pin(_)) { score + 1e6 } else { score };
            let better = match best {
                None => true,
                Some((_, _, s, k)) => {
                    if bland {
                        key < k
                    } else {
                        score > s || (score == s && key < k)
                    }
                }
            };
            if better {
                best = Some((pos, sign, score, key));
            }
        }
        best.map(|(pos, sign, _, _)| (pos, sign))
    }

    /// Longest feasible step along `p`. Returns the blocking constraint and
    /// the step length, or `None` for an unbounded ray.
    fn ratio_test(&mut self, p: &[f64]) -> Option<(Con, f64)> {
        let n = self.n;
        let ps = if self.phase1 { p[n] } else { 0.0 };
        let pnorm = p.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let piv_tol = 1e-9 * pnorm;
        let tol = self.opts.feasibility_tol;
        let bland = self.opts.pivot_rule == PivotRule::Bland
            || self.degenerate_streak >= DEGENERATE_STREAK_FOR_BLAND;

        let pz = &p[..n];
        let mut relaxed = f64::INFINITY;
        for i in 0..self.m {
            let al = dot(&self.a[i * n..(i + 1) * n], pz) - ps;
            self.alpha[i] = al;
            if !self.in_ws[i] && al > piv_tol {
                let r = (self.slack[i].max(0.0) + tol) / al;
                if r < relaxed {
                    relaxed = r;
                }
            }
        }
        let shift_alpha = -ps;
        let shift_free = self.phase1 && !self.ws.contains(&Con::ShiftBound);
        if shift_free && shift_alpha > piv_tol {
            relaxed = relaxed.min((self.z[n].max(0.0) + tol) / shift_alpha);
        }
        if relaxed == f64::INFINITY {
            return None;
        }

        if shift_free && shift_alpha > piv_tol {
            // the shift reaching zero ends phase 1; prefer it on ties
            let r = self.z[n].max(0.0) / shift_alpha;
            if r <= relaxed {
                return Some((Con::ShiftBound, r));
            }
        }
        let mut chosen: Option<(usize, f64, f64)> = None; // row, ratio, alpha
        for i in 0..self.m {
            let al = self.alpha[i];
            if self.in_ws[i] || al <= piv_tol {
                continue;
            }
            let r = self.slack[i].max(0.0) / al;
            if bland {
                if chosen.is_none_or(|(_, cr, _)| r < cr) {
                    chosen = Some((i, r, al));
                }
            } else if r <= relaxed && chosen.is_none_or(|(_, _, ca)| al > ca) {
                chosen = Some((i, r, al));
            }
        }
        chosen.map(|(i, r, _)| (Con::Row(i), r))
    }

    fn pivot(&mut self, pos: usize, entering: Con, step: f64, p: &[f64]) {
        self.iterations += 1;
        let moved = step * p.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if moved <= 1e-14 {
            self.degenerate += 1;
            self.degenerate_streak += 1;
        } else {
            self.degenerate_streak = 0;
            if self.level > 0 {
                self.tie_break_moves += 1;
            }
        }
        for (zi, pi) in self.z.iter_mut().zip(p) {
            *zi += step * pi;
        }
        for i in 0..self.m {
            self.slack[i] -= step * self.alpha[i];
        }
        let leaving = self.ws[pos];
        if let Con::Row(i) = leaving {
            self.in_ws[i] = false;
        }
        if let Con::Row(i) = entering {
            self.in_ws[i] = true;
            self.slack[i] = 0.0;
        }
        self.ws[pos] = entering;
    }

    /// Drops the shift variable once phase 1 has driven it to zero.
    fn leave_phase1(&mut self) {
        let pos = match self.ws.iter().position(|&c| c == Con::ShiftBound) {
            Some(pos) => pos,
            None => {
                // the row whose removal keeps the rest independent in x-space:
                // largest phase-1 multiplier
                let lu = self.factor().expect("phase-1 working set is nonsingular");
                let mut y = vec![0.0; self.nc()];
                y[self.n] = -1.0;
                lu.solve_transpose(&mut y);
                (0..self.ws.len())
                    .filter(|&k| matches!(self.ws[k], Con::Row(_)))
                    .max_by(|&i, &j| y[i].abs().total_cmp(&y[j].abs()))
                    .expect("phase-1 working set holds a row")
            }
        };
        if let Con::Row(i) = self.ws[pos] {
            self.in_ws[i] = false;
        }
        self.ws.remove(pos);
        self.phase1 = false;
        self.z.truncate(self.n);
        self.degenerate_streak = 0;
        self.refresh_slacks();
    }

    /// One round of iterative refinement on the final vertex.
    fn refine(&mut self) {
        let Ok(lu) = self.factor() else { return };
        let rhs: Vec<f64> = self.ws.iter().map(|&c| self.con_rhs(c)).collect();
        let mut z = rhs.clone();
        lu.solve(&mut z);
        let mut residual: Vec<f64> = self
            .ws
            .iter()
            .zip(&rhs)
            .map(|(&c, r)| r - dot(&self.con_row(c), &z))
            .collect();
        lu.solve(&mut residual);
        for (zi, d) in z.iter_mut().zip(residual) {
            *zi += d;
        }
        self.z = z;
    }

    fn outcome(&self, status: LpStatus) -> LpOutcome {
        LpOutcome {
            status,
            x: self.z[..self.n]
                .iter()
                .zip(&self.col_scale)
                .map(|(z, s)| z * s)
                .collect(),
            iterations: self.iterations,
            degenerate_pivots: self.degenerate,
            tie_break_moves: self.tie_break_moves,
            tie_break_incomplete: self.tie_break_incomplete,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// LU factorisation with partial pivoting, `P A = L U`.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs <= 1e-14 * scale {
                return None;
            }
            if pivot_row != k {
                for c in 0..n {
                    a.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            let d = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / d;
                a[r * n + k] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        a[r * n + c] -= f * a[k * n + c];
                    }
                }
            }
        }
        Some(Self { n, lu: a, perm })
    }

    /// Solves `A x = b` in place.
    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let s: f64 = (0..r).map(|c| self.lu[r * n + c] * x[c]).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| self.lu[r * n + c] * x[c]).sum();
            x[r] = (x[r] - s) / self.lu[r * n + r];
        }
        b.copy_from_slice(&x);
    }

    /// Solves `Aᵀ x = b` in place.
    fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        let mut w = b.to_vec();
        for r in 0..n {
            let s: f64 = (0..r).map(|c| self.lu[c * n + r] * w[c]).sum();
            w[r] = (w[r] - s) / self.lu[r * n + r];
        }
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| self.lu[c * n + r] * w[c]).sum();
            w[r] -= s;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = w[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp_from(rows: &[(&[f64], f64)]) -> DenseLp {
        let mut lp = DenseLp::new(rows[0].0.len());
        for (a, b) in rows {
            lp.push_row(a, *b);
        }
        lp
    }

    #[test]
    fn lu_solves_both_ways() {
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = Lu::factor(a.clone(), 3).unwrap();
        let mut x = vec![1.0, 2.0, 3.0];
        lu.solve(&mut x);
        for r in 0..3 {
            let v: f64 = (0..3).map(|c| a[r * 3 + c] * x[c]).sum();
            assert!((v - [1.0, 2.0, 3.0][r]).abs() < 1e-12);
        }
        let mut y = vec![1.0, 2.0, 3.0];
        lu.solve_transpose(&mut y);
        for c in 0..3 {
            let v: f64 = (0..3).map(|r| a[r * 3 + c] * y[r]).sum();
            assert!((v - [1.0, 2.0, 3.0][c]).abs() < 1e-12);
        }
    }

    #[test]
    fn max_of_list() {
        // min K s.t. K >= a_i
        let lp = lp_from(&[(&[-1.0], 3.0), (&[-1.0], 1.0), (&[-1.0], 2.0)]);
        let out = solve(&lp, &[vec![1.0]], &LpOptions::default()).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.x[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_vertex() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6, x,y >= 0 -> (1.6, 1.2)
        let lp = lp_from(&[
            (&[1.0, 2.0], 4.0),
            (&[3.0, 1.0], 6.0),
            (&[-1.0, 0.0], 0.0),
            (&[0.0, -1.0], 0.0),
        ]);
        let out = solve(&lp, &[vec![-1.0, -1.0]], &LpOptions::default()).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.x[0] - 1.6).abs() < 1e-12 && (out.x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn phase_one_from_infeasible_origin() {
        // x >= 2, y >= 3, x + y <= 10; min x + 2y
        let lp = lp_from(&[(&[-1.0, 0.0], -2.0), (&[0.0, -1.0], -3.0), (&[1.0, 1.0], 10.0)]);
        let out = solve(&lp, &[vec![1.0, 2.0]], &LpOptions::default()).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.x[0] - 2.0).abs() < 1e-12 && (out.x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = lp_from(&[(&[1.0], 1.0), (&[-1.0], -2.0)]);
        assert_eq!(
            solve(&lp, &[vec![1.0]], &LpOptions::default()).unwrap().status,
            LpStatus::Infeasible
        );
        let lp = lp_from(&[(&[1.0, 0.0], 1.0)]);
        assert_eq!(
            solve(&lp, &[vec![1.0, 0.0]], &LpOptions::default()).unwrap().status,
            LpStatus::Unbounded
        );
        let lp = lp_from(&[(&[0.0], -1.0)]);
        assert_eq!(
            solve(&lp, &[vec![1.0]], &LpOptions::default()).unwrap().status,
            LpStatus::Infeasible
        );
    }

    #[test]
    fn tie_break_picks_lexicographic_minimum() {
        // min x s.t. x >= 1, 0 <= y <= 5: whole edge optimal, tie-break min y -> (1, 0)
        let lp = lp_from(&[(&[-1.0, 0.0], -1.0), (&[0.0, 1.0], 5.0), (&[0.0, -1.0], 0.0)]);
        let out = solve(&lp, &[vec![1.0, 0.0], vec![0.0, 1.0]], &LpOptions::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-12);
        assert!(out.x[1].abs() < 1e-12);
        // maximise y instead
        let out = solve(&lp, &[vec![1.0, 0.0], vec![0.0, -1.0]], &LpOptions::default()).unwrap();
        assert!((out.x[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn bland_rule_agrees() {
        let lp = lp_from(&[
            (&[1.0, 2.0, 1.0], 4.0),
            (&[3.0, 1.0, -1.0], 6.0),
            (&[-1.0, 0.0, 0.0], 0.0),
            (&[0.0, -1.0, 0.0], 0.0),
            (&[0.0, 0.0, -1.0], 0.0),
            (&[0.0, 0.0, 1.0], 1.0),
        ]);
        let c = vec![-1.0, -1.0, -0.5];
        let a = solve(&lp, &[c.clone()], &LpOptions::default()).unwrap();
        let opts = LpOptions {
            pivot_rule: PivotRule::Bland,
            ..LpOptions::default()
        };
        let b = solve(&lp, &[c.clone()], &opts).unwrap();
        let obj = |x: &[f64]| dot(&c, x);
        assert!((obj(&a.x) - obj(&b.x)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_duplicate_rows() {
        let lp = lp_from(&[(&[-1.0], 1.0), (&[-1.0], 1.0), (&[-1.0], 1.0), (&[-1.0], 2.0)]);
        let out = solve(&lp, &[vec![1.0]], &LpOptions::default()).unwrap();
        assert!((out.x[0] + 1.0).abs() < 1e-12);
    }
}
