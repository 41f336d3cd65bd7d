use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ConstraintRow, DecisionLayout, Origin, RowTag, Templates};
use crate::error::{Error, Result};
use crate::geometry::{check_dim, Grid, HyperRect, RegionUnion};
use crate::plant::Sample;
use crate::polynomial::{PolyBasis, Polynomial};

/// Grid points over every box of a region, with the data needed to tighten
/// rows enforced only at those points.
#[derive(Debug, Clone)]
pub struct GriddedRegion {
    pub parts: Vec<(HyperRect, Grid)>,
}

impl GriddedRegion {
    pub fn new(region: &RegionUnion, points_per_axis: usize) -> Result<Self> {
        let parts = region
            .parts()
            .iter()
            .map(|b| Ok((b.clone(), b.grid(points_per_axis)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { parts })
    }

    pub fn len(&self) -> usize {
        self.parts.iter().map(|(_, g)| g.points.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.parts.iter().flat_map(|(_, g)| g.points.iter().map(Vec::as_slice))
    }
}

/// `A u <= b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPolytope {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl InputPolytope {
    pub fn from_box(rect: &HyperRect) -> Self {
        let m = rect.dim();
        let mut a = Vec::with_capacity(2 * m);
        let mut b = Vec::with_capacity(2 * m);
        for j in 0..m {
            let mut row = vec![0.0; m];
            row[j] = 1.0;
            a.push(row);
            b.push(rect.upper()[j]);
        }
        for j in 0..m {
            let mut row = vec![0.0; m];
            row[j] = -1.0;
            a.push(row);
            b.push(-rect.lower()[j]);
        }
        Self { a, b }
    }

    pub fn input_dim(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        self.a
            .iter()
            .zip(&self.b)
            .all(|(row, &bi)| crate::polynomial::dot(row, u) <= bi + tol)
    }
}

/// Bounds on the max-row-sum norm of the Gram matrices of the barrier and
/// of each controller polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    pub barrier: Option<f64>,
    pub controller: Option<f64>,
}

fn empty_check(region: &GriddedRegion, what: &'static str) -> Result<()> {
    if region.is_empty() {
        Err(Error::EmptyGrid(what))
    } else {
        Ok(())
    }
}

/// Tightening coefficients for the split variables of one polynomial: the
/// slope bound of each monomial on the box times the half-cell distance.
fn tightening(basis: &PolyBasis, rect: &HyperRect, grid: &Grid, enabled: bool) -> Result<Vec<f64>> {
    if !enabled {
        return Ok(vec![0.0; basis.len()]);
    }
    let h = grid.half_cell_l1();
    Ok(basis.gradient_bounds(rect)?.into_iter().map(|g| g * h).collect())
}

/// Initial-set rows `m(x)·q - γ <= -η`, one per grid point.
pub fn assemble_g1(
    layout: &DecisionLayout,
    basis: &PolyBasis,
    region: &GriddedRegion,
    eta: f64,
    tighten: bool,
) -> Result<Vec<ConstraintRow>> {
    empty_check(region, "initial set")?;
    barrier_rows(layout, basis, region, tighten, RowTag::G1, |row, m| {
        for (j, v) in layout.q().zip(m) {
            row.coeffs[j] = *v;
        }
        row.coeffs[DecisionLayout::GAMMA] = -1.0;
        row.rhs = -eta;
    })
}

/// Unsafe-set rows `-m(x)·q + λ <= 0`, one per grid point.
pub fn assemble_g2(
    layout: &DecisionLayout,
    basis: &PolyBasis,
    region: &GriddedRegion,
    tighten: bool,
) -> Result<Vec<ConstraintRow>> {
    empty_check(region, "unsafe set")?;
    barrier_rows(layout, basis, region, tighten, RowTag::G2, |row, m| {
        for (j, v) in layout.q().zip(m) {
            row.coeffs[j] = -*v;
        }
        row.coeffs[DecisionLayout::LAMBDA] = 1.0;
    })
}

fn barrier_rows(
    layout: &DecisionLayout,
    basis: &PolyBasis,
    region: &GriddedRegion,
    tighten: bool,
    tag: RowTag,
    fill: impl Fn(&mut ConstraintRow, &[f64]) + Sync,
) -> Result<Vec<ConstraintRow>> {
    check_dim(basis.nvars(), region.parts[0].0.dim())?;
    let mut out = Vec::with_capacity(region.len());
    let mut offset = 0;
    for (rect, grid) in &region.parts {
        let shrink = tightening(basis, rect, grid, tighten)?;
        let rows: Vec<ConstraintRow> = grid
            .points
            .par_iter()
            .enumerate()
            .map(|(k, x)| {
                let mut row = ConstraintRow::zeros(layout, tag, Origin::Grid { point: offset + k, facet: 0 });
                let mut m = vec![0.0; basis.len()];
                basis.eval_into(x, &mut m);
                fill(&mut row, &m);
                for (j, s) in layout.q().zip(&shrink) {
                    row.coeffs[layout.aux(j)] = *s;
                }
                row
            })
            .collect();
        offset += grid.points.len();
        out.extend(rows);
    }
    Ok(out)
}

/// Scenario row for one transition:
/// `(m(x') - m(x))·q - Σ_ι m_ι(x)·p_ι - c - K <= -Σ_ι u_ι`.
pub fn assemble_g3(
    layout: &DecisionLayout,
    templates: &Templates,
    sample: &Sample,
    index: usize,
) -> Result<ConstraintRow> {
    check_dim(templates.state_dim(), sample.x.len())?;
    check_dim(templates.state_dim(), sample.x_next.len())?;
    check_dim(templates.input_dim(), sample.u.len())?;
    let mut row = ConstraintRow::zeros(layout, RowTag::G3, Origin::Sample(index));
    let q = layout.q();
    let mut m = vec![0.0; templates.barrier.len()];
    templates.barrier.eval_into(&sample.x_next, &mut m);
    row.coeffs[q.clone()].copy_from_slice(&m);
    templates.barrier.eval_into(&sample.x, &mut m);
    for (c, v) in row.coeffs[q].iter_mut().zip(&m) {
        *c -= v;
    }
    for (i, basis) in templates.controller.iter().enumerate() {
        let mut mi = vec![0.0; basis.len()];
        basis.eval_into(&sample.x, &mut mi);
        for (j, v) in layout.p(i).zip(mi) {
            row.coeffs[j] = -v;
        }
    }
    row.coeffs[DecisionLayout::C] = -1.0;
    row.coeffs[DecisionLayout::K] = -1.0;
    row.rhs = -sample.u.iter().sum::<f64>();
    Ok(row)
}

/// Scenario rows for all samples, in sample order.
pub fn assemble_g3_all(
    layout: &DecisionLayout,
    templates: &Templates,
    samples: &[Sample],
) -> Result<Vec<ConstraintRow>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| assemble_g3(layout, templates, s, i))
        .collect()
}

/// `B(x') - B(x) + Σ_ι (u_ι - C_ι(x)) - c - K` evaluated directly.
pub fn g3_value(
    barrier: &Polynomial,
    controller: &[Polynomial],
    c: f64,
    k: f64,
    sample: &Sample,
) -> Result<f64> {
    let mut v = barrier.eval(&sample.x_next)? - barrier.eval(&sample.x)?;
    for (ctrl, u) in controller.iter().zip(&sample.u) {
        v += u - ctrl.eval(&sample.x)?;
    }
    Ok(v - c - k)
}

/// Input-constraint rows `Σ_ι A_iι m_ι(x)·p_ι <= b_i` for every grid point
/// and facet.
pub fn assemble_g4(
    layout: &DecisionLayout,
    templates: &Templates,
    region: &GriddedRegion,
    polytope: &InputPolytope,
    tighten: bool,
) -> Result<Vec<ConstraintRow>> {
    empty_check(region, "state set")?;
    check_dim(templates.input_dim(), polytope.input_dim())?;
    check_dim(polytope.a.len(), polytope.b.len())?;
    if let Some(bad) = polytope.a.iter().find(|r| r.len() != templates.input_dim()) {
        return Err(Error::DimensionMismatch {
            expected: templates.input_dim(),
            found: bad.len(),
        });
    }
    let facets = polytope.a.len();
    let mut out = Vec::with_capacity(region.len() * facets);
    let mut offset = 0;
    for (rect, grid) in &region.parts {
        check_dim(templates.state_dim(), rect.dim())?;
        let shrink: Vec<Vec<f64>> = templates
            .controller
            .iter()
            .map(|b| tightening(b, rect, grid, tighten))
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<ConstraintRow>> = grid
            .points
            .par_iter()
            .enumerate()
            .map(|(k, x)| {
                let evals: Vec<Vec<f64>> = templates
                    .controller
                    .iter()
                    .map(|b| {
                        let mut m = vec![0.0; b.len()];
                        b.eval_into(x, &mut m);
                        m
                    })
                    .collect();
                (0..facets)
                    .map(|f| {
                        let origin = Origin::Grid { point: offset + k, facet: f };
                        let mut row = ConstraintRow::zeros(layout, RowTag::G4, origin);
                        for (i, m) in evals.iter().enumerate() {
                            let a = polytope.a[f][i];
                            for ((j, v), s) in layout.p(i).zip(m).zip(&shrink[i]) {
                                row.coeffs[j] = a * v;
                                row.coeffs[layout.aux(j)] = a.abs() * s;
                            }
                        }
                        row.rhs = polytope.b[f];
                        row
                    })
                    .collect()
            })
            .collect();
        offset += grid.points.len();
        out.extend(rows.into_iter().flatten());
    }
    Ok(out)
}

/// `λ - γ >= cT`, `c >= 0`, the split-variable definitions
/// `±coefficient <= a`, and Gram row-sum bounds when requested.
pub fn assemble_structural(
    layout: &DecisionLayout,
    templates: &Templates,
    horizon: f64,
    bounds: &CoefficientBounds,
) -> Vec<ConstraintRow> {
    let label = |s: String| Origin::Label(s);
    let mut rows = Vec::new();

    let mut r = ConstraintRow::zeros(layout, RowTag::Structural, label("level-gap".into()));
    r.coeffs[DecisionLayout::LAMBDA] = -1.0;
    r.coeffs[DecisionLayout::GAMMA] = 1.0;
    r.coeffs[DecisionLayout::C] = horizon;
    rows.push(r);

    let mut r = ConstraintRow::zeros(layout, RowTag::Structural, label("c-nonneg".into()));
    r.coeffs[DecisionLayout::C] = -1.0;
    rows.push(r);

    for j in 4..layout.dim() {
        for (sign, suffix) in [(1.0, "+"), (-1.0, "-")] {
            let name = format!("abs-{}{suffix}", layout.column_name(j));
            let mut r = ConstraintRow::zeros(layout, RowTag::Structural, label(name));
            r.coeffs[j] = sign;
            r.coeffs[layout.aux(j)] = -1.0;
            rows.push(r);
        }
    }

    let mut gram = |basis: &PolyBasis, cols: std::ops::Range<usize>, bound: f64, name: &str| {
        for (k, entries) in basis.gram_rows().into_iter().enumerate() {
            let mut r = ConstraintRow::zeros(layout, RowTag::Structural, label(format!("gram-{name}[{k}]")));
            for (idx, w) in entries {
                r.coeffs[layout.aux(cols.start + idx)] += w;
            }
            r.rhs = bound;
            rows.push(r);
        }
    };
    if let Some(bound) = bounds.barrier {
        gram(&templates.barrier, layout.q(), bound, "q");
    }
    if let Some(bound) = bounds.controller {
        for (i, basis) in templates.controller.iter().enumerate() {
            gram(basis, layout.p(i), bound, &format!("p{i}"));
        }
    }
    rows
}
