//! The scenario program as a finite LP over
//! `d = (K, λ, γ, c, q, p)`, its assembly from samples and grids, and its
//! solution.
//!
//! Columns past `d` hold nonnegative split variables `a ≥ |coefficient|`,
//! one per barrier and controller coefficient. They carry the grid
//! tightening and the coefficient norm bounds while keeping everything
//! linear.

mod assemble;
mod solve;

use std::fmt;
use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::DenseLp;
use crate::polynomial::PolyBasis;

pub use assemble::{
    assemble_g1, assemble_g2, assemble_g3, assemble_g3_all, assemble_g4, assemble_structural,
    g3_value, CoefficientBounds, GriddedRegion, InputPolytope,
};
pub use solve::{
    count_active_g3, exact_support_count, max_violation, solve_lp, LpSolution, SolveOptions,
    Tolerances,
};
pub use crate::lp::LpStatus;

/// Polynomial templates: the barrier over states and one controller
/// polynomial per input, also over states.
#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    pub barrier: PolyBasis,
    pub controller: Vec<PolyBasis>,
}

impl Templates {
    pub fn new(state_dim: usize, input_dim: usize, barrier_degree: u32, controller_degree: u32) -> Self {
        Self {
            barrier: PolyBasis::new(state_dim, barrier_degree),
            controller: (0..input_dim)
                .map(|_| PolyBasis::new(state_dim, controller_degree))
                .collect(),
        }
    }

    pub fn layout(&self) -> DecisionLayout {
        DecisionLayout::new(
            self.barrier.len(),
            self.controller.iter().map(PolyBasis::len).collect(),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.barrier.nvars()
    }

    pub fn input_dim(&self) -> usize {
        self.controller.len()
    }
}

/// Column positions of the decision vector and the split variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionLayout {
    q_len: usize,
    p_lens: Vec<usize>,
}

impl DecisionLayout {
    pub const K: usize = 0;
    pub const LAMBDA: usize = 1;
    pub const GAMMA: usize = 2;
    pub const C: usize = 3;

    pub fn new(q_len: usize, p_lens: Vec<usize>) -> Self {
        Self { q_len, p_lens }
    }

    pub fn q_len(&self) -> usize {
        self.q_len
    }

    pub fn p_len(&self) -> usize {
        self.p_lens.iter().sum()
    }

    pub fn inputs(&self) -> usize {
        self.p_lens.len()
    }

    pub fn q(&self) -> Range<usize> {
        4..4 + self.q_len
    }

    pub fn p(&self, input: usize) -> Range<usize> {
        let start = 4 + self.q_len + self.p_lens[..input].iter().sum::<usize>();
        start..start + self.p_lens[input]
    }

    pub fn p_all(&self) -> Range<usize> {
        4 + self.q_len..self.dim()
    }

    /// Length of `d`: `4 + Q + P`.
    pub fn dim(&self) -> usize {
        4 + self.q_len + self.p_len()
    }

    /// Split variable paired with a barrier or controller coefficient column.
    pub fn aux(&self, column: usize) -> usize {
        debug_assert!(column >= 4 && column < self.dim());
        column + self.q_len + self.p_len()
    }

    /// All LP columns, `d` followed by the split variables.
    pub fn columns(&self) -> usize {
        self.dim() + self.q_len + self.p_len()
    }

    pub fn column_name(&self, j: usize) -> String {
        match j {
            Self::K => "K".into(),
            Self::LAMBDA => "lambda".into(),
            Self::GAMMA => "gamma".into(),
            Self::C => "c".into(),
            _ if j < 4 + self.q_len => format!("q{}", j - 4),
            _ if j < self.dim() => {
                let mut off = j - 4 - self.q_len;
                for (i, &len) in self.p_lens.iter().enumerate() {
                    if off < len {
                        return format!("p{i}_{off}");
                    }
                    off -= len;
                }
                unreachable!()
            }
            _ => format!("|{}|", self.column_name(j - self.q_len - self.p_len())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowTag {
    G1,
    G2,
    G3,
    G4,
    Structural,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowTag::G1 => "g1",
            RowTag::G2 => "g2",
            RowTag::G3 => "g3",
            RowTag::G4 => "g4",
            RowTag::Structural => "structural",
        })
    }
}

/// Where a row came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Sample(usize),
    /// Grid point index, and the polytope facet for input rows.
    Grid { point: usize, facet: usize },
    Label(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Sample(i) => write!(f, "s{i}"),
            Origin::Grid { point, facet: 0 } => write!(f, "x{point}"),
            Origin::Grid { point, facet } => write!(f, "x{point}.{facet}"),
            Origin::Label(l) => f.write_str(l),
        }
    }
}

/// `coeffs · d <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub tag: RowTag,
    pub origin: Origin,
}

impl ConstraintRow {
    pub(crate) fn zeros(layout: &DecisionLayout, tag: RowTag, origin: Origin) -> Self {
        Self {
            coeffs: vec![0.0; layout.columns()],
            rhs: 0.0,
            tag,
            origin,
        }
    }

    /// `coeffs · d - rhs`; positive means violated.
    pub fn residual(&self, d: &[f64]) -> f64 {
        crate::polynomial::dot(&self.coeffs, d) - self.rhs
    }
}

/// Minimise `K` over the rows. Rows are stored densely in insertion order.
#[derive(Debug, Clone)]
pub struct LpProblem {
    layout: DecisionLayout,
    matrix: DenseLp,
    meta: Vec<(RowTag, Origin)>,
    g3_rows: usize,
}

impl LpProblem {
    pub fn new(layout: DecisionLayout) -> Self {
        let matrix = DenseLp::new(layout.columns());
        Self {
            layout,
            matrix,
            meta: Vec::new(),
            g3_rows: 0,
        }
    }

    pub fn layout(&self) -> &DecisionLayout {
        &self.layout
    }

    pub fn push(&mut self, row: ConstraintRow) -> Result<()> {
        if row.coeffs.len() != self.layout.columns() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.columns(),
                found: row.coeffs.len(),
            });
        }
        self.matrix.push_row(&row.coeffs, row.rhs);
        if row.tag == RowTag::G3 {
            self.g3_rows += 1;
        }
        self.meta.push((row.tag, row.origin));
        Ok(())
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ConstraintRow>) -> Result<()> {
        rows.into_iter().try_for_each(|r| self.push(r))
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn g3_count(&self) -> usize {
        self.g3_rows
    }

    pub fn coeffs(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.matrix.rhs(i)
    }

    pub fn tag(&self, i: usize) -> RowTag {
        self.meta[i].0
    }

    pub fn origin(&self, i: usize) -> &Origin {
        &self.meta[i].1
    }

    pub fn row(&self, i: usize) -> ConstraintRow {
        ConstraintRow {
            coeffs: self.coeffs(i).to_vec(),
            rhs: self.rhs(i),
            tag: self.tag(i),
            origin: self.origin(i).clone(),
        }
    }

    /// `coeffs_i · x - rhs_i`.
    pub fn residual(&self, i: usize, x: &[f64]) -> f64 {
        -self.matrix.slack(i, x)
    }

    pub(crate) fn matrix(&self) -> &DenseLp {
        &self.matrix
    }

    /// Plain-text tableau: a column header, then one row per line as
    /// `tag origin rhs col:value ...` with zero entries omitted.
    pub fn write_tableau(&self, mut w: impl Write) -> Result<()> {
        let names: Vec<String> = (0..self.layout.columns())
            .map(|j| self.layout.column_name(j))
            .collect();
        writeln!(w, "# minimise K; rows read coeffs . d <= rhs")?;
        writeln!(w, "# columns {}", names.join(" "))?;
        for i in 0..self.len() {
            write!(w, "{} {} {:?}", self.tag(i), self.origin(i), self.rhs(i))?;
            for (j, v) in self.coeffs(i).iter().enumerate() {
                if *v != 0.0 {
                    write!(w, " {j}:{v:?}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous() {
        let l = DecisionLayout::new(5, vec![3, 2]);
        assert_eq!(l.q(), 4..9);
        assert_eq!(l.p(0), 9..12);
        assert_eq!(l.p(1), 12..14);
        assert_eq!(l.p_all(), 9..14);
        assert_eq!(l.dim(), 14);
        assert_eq!(l.columns(), 24);
        assert_eq!(l.aux(4), 14);
        assert_eq!(l.aux(13), 23);
        let names: Vec<String> = (0..l.columns()).map(|j| l.column_name(j)).collect();
        assert_eq!(names[..5], ["K", "lambda", "gamma", "c", "q0"]);
        assert_eq!(names[12], "p1_0");
        assert_eq!(names[23], "|p1_1|");
    }

    #[test]
    fn tableau_lines() {
        let l = DecisionLayout::new(1, vec![1]);
        let mut p = LpProblem::new(l.clone());
        let mut row = ConstraintRow::zeros(&l, RowTag::G3, Origin::Sample(7));
        row.coeffs[0] = -1.0;
        row.coeffs[5] = 0.25;
        row.rhs = -0.5;
        p.push(row).unwrap();
        assert!(p.push(ConstraintRow {
            coeffs: vec![0.0; 3],
            rhs: 0.0,
            tag: RowTag::G1,
            origin: Origin::Label("bad".into()),
        })
        .is_err());
        let mut out = Vec::new();
        p.write_tableau(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let last = text.lines().last().unwrap();
        assert_eq!(last, "g3 s7 -0.5 0:-1.0 5:0.25");
        assert!(text.contains("# columns K lambda gamma c q0 p0_0 |q0| |p0_0|"));
    }
}
