//! Axis-aligned boxes, finite unions of boxes, uniform sampling and the
//! ball-mass function `U(r)` used to turn violation levels into Lipschitz
//! slack.

use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed axis-aligned hyper-rectangle `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperRect {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl HyperRect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidBox("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidBox(format!("axis {i} has a non-finite bound")));
            }
            if lo > hi {
                return Err(Error::InvalidBox(format!(
                    "axis {i}: lower {lo} exceeds upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Builds a box from `[lower, upper]` interval pairs, one per axis.
    pub fn from_intervals(intervals: &[[f64; 2]]) -> Result<Self> {
        let (lower, upper) = intervals.iter().map(|iv| (iv[0], iv[1])).unzip();
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn intervals(&self) -> Vec<[f64; 2]> {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| [l, u]).collect()
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l)
    }

    /// Product of the side lengths. Degenerate boxes have volume 0.
    pub fn volume(&self) -> f64 {
        self.widths().product()
    }

    /// Closed-boundary membership.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn is_subset_of(&self, other: &HyperRect) -> bool {
        self.dim() == other.dim()
            && self
                .lower
                .iter()
                .zip(&other.lower)
                .all(|(a, b)| a >= b)
            && self.upper.iter().zip(&other.upper).all(|(a, b)| a <= b)
    }

    /// True when the closed boxes share at least one point.
    pub fn intersects(&self, other: &HyperRect) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|i| self.lower[i] <= other.upper[i] && other.lower[i] <= self.upper[i])
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &HyperRect) -> HyperRect {
        let mut lower = self.lower.clone();
        lower.extend_from_slice(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(&other.upper);
        HyperRect { lower, upper }
    }

    /// Euclidean distance from `x` to the box (0 inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| {
                let d = if v < lo {
                    lo - v
                } else if v > hi {
                    v - hi
                } else {
                    0.0
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Uniform tensor grid with `points_per_axis` points on every axis,
    /// endpoints included. A single point sits at the centre and its spacing
    /// is the full width, so every box point stays within half a spacing of
    /// some grid point.
    pub fn grid(&self, points_per_axis: usize) -> Result<Grid> {
        if points_per_axis == 0 {
            return Err(Error::Domain("grid needs at least one point per axis".into()));
        }
        let axes: Vec<Vec<f64>> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| linspace(lo, hi, points_per_axis))
            .collect();
        let spacing = self
            .widths()
            .map(|w| {
                if points_per_axis == 1 {
                    w
                } else {
                    w / (points_per_axis - 1) as f64
                }
            })
            .collect();
        Ok(Grid {
            points: tensor_product(&axes),
            spacing,
        })
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

fn tensor_product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Grid points over one box together with the per-axis spacing.
#[derive(Debug, Clone)]
pub struct Grid {
    pub points: Vec<Vec<f64>>,
    pub spacing: Vec<f64>,
}

impl Grid {
    /// Largest L1 distance from an arbitrary box point to its nearest grid
    /// point, i.e. `Σ_j spacing_j / 2`.
    pub fn half_cell_l1(&self) -> f64 {
        self.spacing.iter().map(|s| 0.5 * s).sum()
    }
}

/// Finite union of closed boxes of one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionUnion {
    parts: Vec<HyperRect>,
}

impl RegionUnion {
    pub fn new(parts: Vec<HyperRect>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidBox("region union needs at least one box".into()))?;
        for p in &parts[1..] {
            check_dim(first.dim(), p.dim())?;
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[HyperRect] {
        &self.parts
    }

    pub fn dim(&self) -> usize {
        self.parts[0].dim()
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(self.parts.iter().any(|p| p.contains_unchecked(x)))
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.parts
            .iter()
            .map(|p| p.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn intersects(&self, other: &RegionUnion) -> bool {
        self.parts
            .iter()
            .any(|a| other.parts.iter().any(|b| a.intersects(b)))
    }

    pub fn is_subset_of(&self, outer: &HyperRect) -> bool {
        self.parts.iter().all(|p| p.is_subset_of(outer))
    }
}

impl From<HyperRect> for RegionUnion {
    fn from(b: HyperRect) -> Self {
        Self { parts: vec![b] }
    }
}

/// Product space `X × U` from which state-input pairs are drawn uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpace {
    rect: HyperRect,
    volume: f64,
}

impl SampleSpace {
    pub fn new(rect: HyperRect) -> Result<Self> {
        let volume = rect.volume();
        if volume <= 0.0 {
            return Err(Error::InvalidBox(
                "sample space must have positive volume".into(),
            ));
        }
        Ok(Self { rect, volume })
    }

    /// `states × inputs`.
    pub fn from_parts(states: &HyperRect, inputs: &HyperRect) -> Result<Self> {
        Self::new(states.product(inputs))
    }

    pub fn rect(&self) -> &HyperRect {
        &self.rect
    }

    pub fn dim(&self) -> usize {
        self.rect.dim()
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// `π^{n/2} / (2^n Γ(n/2+1) Vol)`, so that `U(r) = coefficient · r^n`.
    fn ball_coefficient(&self) -> f64 {
        let n = self.dim() as f64;
        PI.powf(n / 2.0) / (2f64.powf(n) * gamma_half_plus_one(self.dim()) * self.volume)
    }
}

/// `Γ(n/2 + 1)` via the half-integer recurrence: `(n/2)!` for even `n`,
/// `(n/2)(n/2 - 1)…(1/2)·√π` for odd `n`.
pub fn gamma_half_plus_one(n: usize) -> f64 {
    if n % 2 == 0 {
        (1..=n / 2).map(|k| k as f64).product()
    } else {
        let half_terms: f64 = (0..=n / 2).map(|k| k as f64 + 0.5).product();
        half_terms * PI.sqrt()
    }
}

/// Probability mass uniform sampling places in a ball of radius `r`,
/// clamped to 1.
pub fn u_of_r(r: f64, space: &SampleSpace) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius must be non-negative, got {r}")));
    }
    let u = space.ball_coefficient() * r.powi(space.dim() as i32);
    Ok(u.min(1.0))
}

/// Radius `r` with `U(r) = eps`.
pub fn u_inverse(eps: f64, space: &SampleSpace) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!("probability must lie in [0, 1], got {eps}")));
    }
    let n = space.dim() as f64;
    Ok((eps / space.ball_coefficient()).powf(1.0 / n))
}

const SAMPLE_CHUNK: usize = 4096;

/// `count` i.i.d. uniform points in the space's box.
///
/// Point `i` always consumes the same slice of the ChaCha8 stream for a
/// given seed, so the output does not depend on how the work is split.
pub fn sample_uniform(space: &SampleSpace, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let rect = space.rect();
    let chunks: Vec<usize> = (0..count).step_by(SAMPLE_CHUNK).collect();
    chunks
        .into_par_iter()
        .flat_map_iter(|start| {
            let end = (start + SAMPLE_CHUNK).min(count);
            sample_range(rect, seed, start, end)
        })
        .collect()
}

fn sample_range(rect: &HyperRect, seed: u64, start: usize, end: usize) -> Vec<Vec<f64>> {
    let dim = rect.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // two 32-bit words per coordinate
    rng.set_word_pos((start * dim * 2) as u128);
    (start..end)
        .map(|_| {
            rect.lower
                .iter()
                .zip(&rect.upper)
                .map(|(&lo, &hi)| {
                    let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                    lo + (hi - lo) * unit
                })
                .collect()
        })
        .collect()
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
