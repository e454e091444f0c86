//! Dominance relations, Pareto and effective Pareto fronts, the two sub-optimality gaps, and
//! the scalarization correspondence between weight vectors and effective-front arms.
//!
//! All set-valued results are in ascending arm order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{dominance_margin, maximin_over_simplex, LpSolution, DOMINANCE_TOL};

/// Scores within this distance of the maximum count as tied in [`scalarized_argmax`].
pub const SCORE_TIE_TOL: f64 = 1e-9;

/// `K × L` matrix of mean reward vectors, one row per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    num_arms: usize,
    num_objectives: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_objectives = rows
            .first()
            .ok_or_else(|| Error::Argument("reward table needs at least one arm".into()))?
            .len();
        if num_objectives == 0 {
            return Err(Error::Argument(
                "reward table needs at least one objective".into(),
            ));
        }
        let num_arms = rows.len();
        let mut values = Vec::with_capacity(num_arms * num_objectives);
        for (a, row) in rows.into_iter().enumerate() {
            if row.len() != num_objectives {
                return Err(Error::Argument(format!(
                    "arm {a} has {} objectives, expected {num_objectives}",
                    row.len()
                )));
            }
            values.extend(row);
        }
        Self::from_flat(num_arms, num_objectives, values)
    }

    /// Build from row-major data.
    pub fn from_flat(num_arms: usize, num_objectives: usize, values: Vec<f64>) -> Result<Self> {
        if num_arms == 0 || num_objectives == 0 {
            return Err(Error::Argument("reward table must be at least 1×1".into()));
        }
        if values.len() != num_arms * num_objectives {
            return Err(Error::Argument(format!(
                "expected {} values, got {}",
                num_arms * num_objectives,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(
                "reward table has non-finite entries".into(),
            ));
        }
        Ok(Self {
            num_arms,
            num_objectives,
            values,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn num_objectives(&self) -> usize {
        self.num_objectives
    }

    pub fn row(&self, arm: usize) -> &[f64] {
        &self.values[arm * self.num_objectives..(arm + 1) * self.num_objectives]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.num_objectives)
    }

    /// Same table with `gamma` added to every entry.
    pub fn shifted(&self, gamma: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + gamma).collect(),
            ..self.clone()
        }
    }

    fn check_arm(&self, arm: usize) -> Result<()> {
        if arm >= self.num_arms {
            return Err(Error::Argument(format!(
                "arm index {arm} out of range for {} arms",
                self.num_arms
            )));
        }
        Ok(())
    }

    fn columns(&self, arms: &[usize]) -> Vec<Vec<f64>> {
        arms.iter().map(|&a| self.row(a).to_vec()).collect()
    }
}

/// Plain-text format: one arm per line, objectives separated by whitespace. Blank lines and
/// lines starting with `#` are skipped.
impl FromStr for RewardTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| {
                        Error::Argument(format!("line {}: bad number {tok:?}: {e}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        RewardTable::new(rows)
    }
}

impl fmt::Display for RewardTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrontKind {
    Pareto,
    Effective,
    /// Every arm; reported by exploration steps that ignore estimates.
    AllArms,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontSet {
    pub members: Vec<usize>,
    pub kind: FrontKind,
}

impl FrontSet {
    pub fn contains(&self, arm: usize) -> bool {
        self.members.binary_search(&arm).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `true` iff `v ≺ u`: `v ≤ u` in every coordinate and `v < u` in at least one.
pub fn dominates(u: &[f64], v: &[f64]) -> Result<bool> {
    if u.len() != v.len() {
        return Err(Error::Argument(format!(
            "cannot compare vectors of lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(u.iter().zip(v).all(|(a, b)| a >= b) && u.iter().zip(v).any(|(a, b)| a > b))
}

/// Dominance with the strict part measured against [`DOMINANCE_TOL`].
fn dominates_beyond_tol(u: &[f64], v: &[f64]) -> bool {
    u.iter().zip(v).all(|(a, b)| a >= b) && u.iter().zip(v).any(|(a, b)| a - b > DOMINANCE_TOL)
}

/// Arms whose reward vector no other single arm dominates. Identical rows never dominate
/// each other, so duplicates are all members.
pub fn pareto_front(table: &RewardTable) -> FrontSet {
    let k = table.num_arms();
    let members = (0..k)
        .filter(|&a| {
            let ra = table.row(a);
            !(0..k).any(|b| b != a && dominates_beyond_tol(table.row(b), ra))
        })
        .collect();
    FrontSet {
        members,
        kind: FrontKind::Pareto,
    }
}

/// Whether no convex combination of `support` rows strictly dominates `arm`'s row.
fn is_effective_against(table: &RewardTable, arm: usize, support: &[usize]) -> Result<bool> {
    let columns = table.columns(support);
    Ok(match dominance_margin(&columns, table.row(arm))? {
        LpSolution::Infeasible => true,
        LpSolution::Optimal { value, .. } => value <= DOMINANCE_TOL,
    })
}

/// Arms not strictly dominated by any convex combination of arms.
///
/// Only Pareto-front arms are candidates, and only Pareto-front rows are used as mixing
/// columns: a dominated row can be swapped for its dominator without weakening any mixture,
/// so neither restriction changes the result.
pub fn effective_front(table: &RewardTable) -> Result<FrontSet> {
    let pareto = pareto_front(table);
    effective_within(table, &pareto)
}

fn effective_within(table: &RewardTable, pareto: &FrontSet) -> Result<FrontSet> {
    let mut members = Vec::with_capacity(pareto.len());
    for &a in &pareto.members {
        if is_effective_against(table, a, &pareto.members)? {
            members.push(a);
        }
    }
    Ok(FrontSet {
        members,
        kind: FrontKind::Effective,
    })
}

/// `max_{a' ∈ P*} min_ℓ (μ_{a'} − μ_arm)_ℓ`, zero for Pareto-optimal arms.
pub fn pareto_gap(table: &RewardTable, arm: usize) -> Result<f64> {
    table.check_arm(arm)?;
    let pareto = pareto_front(table);
    Ok(pareto_gap_with_front(table, arm, &pareto))
}

fn pareto_gap_with_front(table: &RewardTable, arm: usize, pareto: &FrontSet) -> f64 {
    if pareto.contains(arm) {
        return 0.0;
    }
    let ra = table.row(arm);
    pareto
        .members
        .iter()
        .map(|&b| {
            table
                .row(b)
                .iter()
                .zip(ra)
                .map(|(x, y)| x - y)
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Clamped maximin `max(0, max_β min_ℓ (Σ β_b μ_b − μ_arm)_ℓ)` with β supported on `support`.
///
/// This is the raw effective-gap formula; [`effective_gap`] additionally forces exact zeros on
/// the effective front and uses the Pareto front as support.
pub fn maximin_gap(table: &RewardTable, arm: usize, support: &[usize]) -> Result<f64> {
    table.check_arm(arm)?;
    if support.is_empty() {
        return Err(Error::Argument("maximin support is empty".into()));
    }
    let ra = table.row(arm);
    let columns: Vec<Vec<f64>> = support
        .iter()
        .map(|&b| table.row(b).iter().zip(ra).map(|(x, y)| x - y).collect())
        .collect();
    let value = maximin_over_simplex(&columns)?
        .value()
        .expect("maximin over the simplex is always feasible");
    Ok(value.max(0.0))
}

/// Smallest uniform boost that stops every convex combination from dominating `arm`.
pub fn effective_gap(table: &RewardTable, arm: usize) -> Result<f64> {
    table.check_arm(arm)?;
    let pareto = pareto_front(table);
    if pareto.contains(arm) && is_effective_against(table, arm, &pareto.members)? {
        return Ok(0.0);
    }
    maximin_gap(table, arm, &pareto.members)
}

/// Both fronts and both gaps for every arm of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct GapProfile {
    pub pareto: FrontSet,
    pub effective: FrontSet,
    pub pareto_gaps: Vec<f64>,
    pub effective_gaps: Vec<f64>,
}

impl GapProfile {
    pub fn compute(table: &RewardTable) -> Result<Self> {
        let pareto = pareto_front(table);
        let effective = effective_within(table, &pareto)?;
        let k = table.num_arms();
        let pareto_gaps = (0..k)
            .map(|a| pareto_gap_with_front(table, a, &pareto))
            .collect();
        let mut effective_gaps = vec![0.0; k];
        for (a, gap) in effective_gaps.iter_mut().enumerate() {
            if !effective.contains(a) {
                *gap = maximin_gap(table, a, &pareto.members)?;
            }
        }
        Ok(Self {
            pareto,
            effective,
            pareto_gaps,
            effective_gaps,
        })
    }

    pub fn max_effective_gap(&self) -> f64 {
        self.effective_gaps.iter().copied().fold(0.0, f64::max)
    }
}

/// Every arm maximizing `wᵀμ_a` (within [`SCORE_TIE_TOL`]).
pub fn scalarized_argmax(table: &RewardTable, weights: &[f64]) -> Result<Vec<usize>> {
    if weights.len() != table.num_objectives() {
        return Err(Error::Argument(format!(
            "weight vector has length {}, expected {}",
            weights.len(),
            table.num_objectives()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
        || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Argument(format!(
            "{weights:?} is not on the probability simplex"
        )));
    }
    let scores: Vec<f64> = table
        .rows()
        .map(|r| r.iter().zip(weights).map(|(a, b)| a * b).sum())
        .collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= best - SCORE_TIE_TOL)
        .map(|(a, _)| a)
        .collect())
}

/// A simplex weight under which `arm` attains the scalarized maximum, if one exists.
///
/// Solves `max_w min_b wᵀ(μ_arm − μ_b)` over the `L`-simplex; a non-negative optimum (up to
/// [`DOMINANCE_TOL`]) certifies the weight.
pub fn weight_for_arm(table: &RewardTable, arm: usize) -> Result<Option<Vec<f64>>> {
    table.check_arm(arm)?;
    let l = table.num_objectives();
    if table.num_arms() == 1 {
        return Ok(Some(vec![1.0 / l as f64; l]));
    }
    let ra = table.row(arm);
    // One column per objective, one row per competing arm.
    let columns: Vec<Vec<f64>> = (0..l)
        .map(|obj| table.rows().map(|rb| ra[obj] - rb[obj]).collect())
        .collect();
    match maximin_over_simplex(&columns)? {
        LpSolution::Optimal { value, weights } if value >= -DOMINANCE_TOL => Ok(Some(weights)),
        _ => Ok(None),
    }
}
