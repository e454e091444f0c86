//! Dense two-phase simplex method with Bland's anti-cycling rule, and the two
//! simplex-constrained problems built on it.
//!
//! Problems here are tiny (a few hundred columns at most, a handful of rows), so a full
//! dense tableau is the simplest exact-vertex method available.

use crate::error::{Error, Result};

/// Primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for declaring optimality.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Margins at or below this value do not count as strict dominance.
pub const DOMINANCE_TOL: f64 = 1e-7;
/// Pivot cap before giving up.
pub const MAX_PIVOTS: usize = 100_000;

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self {
            coeffs,
            relation,
            rhs,
        }
    }
}

/// `maximize objective·x` subject to `constraints`, `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Result of a solve. `weights` holds the primal point (for the simplex-constrained
/// problems: the mixing vector β).
#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { value: f64, weights: Vec<f64> },
    Infeasible,
}

impl LpSolution {
    pub fn status(&self) -> LpStatus {
        match self {
            LpSolution::Optimal { .. } => LpStatus::Optimal,
            LpSolution::Infeasible => LpStatus::Infeasible,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            LpSolution::Optimal { value, .. } => Some(*value),
            LpSolution::Infeasible => None,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match self {
            LpSolution::Optimal { weights, .. } => Some(weights),
            LpSolution::Infeasible => None,
        }
    }
}

struct Tableau {
    /// `rows + 1` rows; the last row holds reduced costs `z_j − c_j` and the objective value.
    cells: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Columns allowed to enter the basis.
    enterable: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn rhs_col(&self) -> usize {
        self.cells[0].len() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cells[row].len();
        let p = self.cells[row][col];
        for v in self.cells[row].iter_mut() {
            *v /= p;
        }
        self.cells[row][col] = 1.0;
        let pivot_row = self.cells[row].clone();
        for (i, r) in self.cells.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f == 0.0 {
                continue;
            }
            for j in 0..width {
                r[j] -= f * pivot_row[j];
            }
            r[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Bland's rule: lowest-index improving column enters; among minimum-ratio rows the one
    /// whose basic variable has the lowest index leaves.
    fn optimize(&mut self) -> Result<()> {
        let obj = self.rows();
        let rhs = self.rhs_col();
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(Error::IterationLimit(MAX_PIVOTS));
            }
            let Some(col) =
                (0..rhs).find(|&j| self.enterable[j] && self.cells[obj][j] < -OPTIMALITY_TOL)
            else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..obj {
                let a = self.cells[i][col];
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.cells[i][rhs].max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - PIVOT_EPS
                            || (ratio <= br + PIVOT_EPS && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return Err(Error::Unbounded),
            }
        }
    }

    /// Replace the objective row by `maximize costs·x` expressed in the current basis.
    fn set_objective(&mut self, costs: &[f64]) {
        let obj = self.rows();
        let width = self.cells[obj].len();
        let mut row = vec![0.0; width];
        for (j, &c) in costs.iter().enumerate() {
            row[j] = -c;
        }
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for j in 0..width {
                    row[j] += cb * self.cells[i][j];
                }
            }
        }
        self.cells[obj] = row;
    }
}

/// Solve a dense LP in the form `max c·x, A x {≤,≥,=} b, x ≥ 0` with the two-phase simplex
/// method and Bland's rule.
pub fn solve_dense_lp(problem: &LinearProgram) -> Result<LpSolution> {
    let n = problem.objective.len();
    if problem.objective.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument(
            "objective contains non-finite entries".into(),
        ));
    }
    for (i, c) in problem.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(Error::Argument(format!(
                "constraint {i} has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "constraint {i} contains non-finite entries"
            )));
        }
    }

    // Normalize every row to a non-negative right-hand side; `≥ 0` rows become `≤ 0` rows so
    // their slack can start in the basis.
    let rows: Vec<(Vec<f64>, Relation, f64)> = problem
        .constraints
        .iter()
        .map(|c| {
            let flip = c.rhs < 0.0 || (c.rhs == 0.0 && c.relation == Relation::Ge);
            if flip {
                let rel = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();

    let m = rows.len();
    let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let num_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let width = n + num_slack + num_art + 1;
    let art_start = n + num_slack;

    let mut cells = vec![vec![0.0; width]; m + 1];
    let mut basis = vec![0; m];
    let (mut next_slack, mut next_art) = (n, art_start);
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        cells[i][..n].copy_from_slice(coeffs);
        cells[i][width - 1] = *rhs;
        match rel {
            Relation::Le => {
                cells[i][next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                cells[i][next_slack] = -1.0;
                next_slack += 1;
                cells[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                cells[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    let mut tab = Tableau {
        cells,
        basis,
        enterable: vec![true; width - 1],
        pivots: 0,
    };

    if num_art > 0 {
        let mut phase_one = vec![0.0; width - 1];
        for c in phase_one.iter_mut().skip(art_start) {
            *c = -1.0;
        }
        tab.set_objective(&phase_one);
        tab.optimize()?;
        let infeasibility = -tab.cells[m][width - 1];
        if infeasibility > FEASIBILITY_TOL {
            return Ok(LpSolution::Infeasible);
        }
        // Drive artificial variables out of the basis where possible; rows where that fails
        // are redundant and keep a zero-valued artificial that can never re-enter.
        for i in 0..m {
            if tab.basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| tab.cells[i][j].abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
        for e in tab.enterable.iter_mut().skip(art_start) {
            *e = false;
        }
    }

    tab.set_objective(&problem.objective);
    tab.optimize()?;

    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.cells[i][width - 1];
        }
    }
    let value = tab.cells[m][width - 1];
    Ok(LpSolution::Optimal { value, weights: x })
}

/// Which canonical simplex-constrained problem a [`SimplexLp`] poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexLpMode {
    Maximin,
    DominanceMargin,
}

/// A problem whose variable β ranges over the probability simplex. `payoff` is stored as
/// columns: `payoff[j]` is the `j`-th candidate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexLp {
    pub payoff: Vec<Vec<f64>>,
    pub target: Option<Vec<f64>>,
    pub mode: SimplexLpMode,
}

impl SimplexLp {
    pub fn solve(&self) -> Result<LpSolution> {
        match self.mode {
            SimplexLpMode::Maximin => match &self.target {
                None => maximin_over_simplex(&self.payoff),
                Some(t) => {
                    let shifted: Vec<Vec<f64>> = self
                        .payoff
                        .iter()
                        .map(|c| c.iter().zip(t).map(|(a, b)| a - b).collect())
                        .collect();
                    maximin_over_simplex(&shifted)
                }
            },
            SimplexLpMode::DominanceMargin => {
                let target = self.target.as_ref().ok_or_else(|| {
                    Error::Argument("dominance margin needs a target vector".into())
                })?;
                dominance_margin(&self.payoff, target)
            }
        }
    }
}

fn validate_columns(columns: &[Vec<f64>]) -> Result<usize> {
    let rows = columns
        .first()
        .ok_or_else(|| Error::Argument("payoff matrix has no columns".into()))?
        .len();
    if rows == 0 {
        return Err(Error::Argument("payoff matrix has no rows".into()));
    }
    for (j, c) in columns.iter().enumerate() {
        if c.len() != rows {
            return Err(Error::Argument(format!(
                "payoff column {j} has length {}, expected {rows}",
                c.len()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "payoff column {j} has non-finite entries"
            )));
        }
    }
    Ok(rows)
}

/// Clamp tiny negatives and renormalize onto the simplex.
fn clean_simplex(weights: &mut [f64]) {
    for w in weights.iter_mut() {
        if *w < 0.0 {
            *w = 0.0;
        }
    }
    let s: f64 = weights.iter().sum();
    if s > 0.0 {
        for w in weights.iter_mut() {
            *w /= s;
        }
    }
}

fn mix(columns: &[Vec<f64>], weights: &[f64], rows: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows];
    for (c, &w) in columns.iter().zip(weights) {
        if w != 0.0 {
            for (o, v) in out.iter_mut().zip(c) {
                *o += w * v;
            }
        }
    }
    out
}

fn min_entry(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `max_{β ∈ simplex} min_ℓ (Σ_j β_j payoff[j])_ℓ`.
///
/// Solved as `max t` s.t. `Pβ ≥ t·1`, `Σβ = 1`, with the payoff shifted by its smallest entry
/// so `t` is non-negative. The reported value is re-evaluated from the cleaned weights, and a
/// pure-strategy check guarantees the result is never worse than the best single column.
pub fn maximin_over_simplex(payoff: &[Vec<f64>]) -> Result<LpSolution> {
    let rows = validate_columns(payoff)?;
    let k = payoff.len();
    let offset = -payoff
        .iter()
        .flat_map(|c| c.iter().copied())
        .fold(f64::INFINITY, f64::min);

    // Variables: β_0..β_{k-1}, t.
    let mut constraints = Vec::with_capacity(rows + 1);
    for l in 0..rows {
        let mut coeffs: Vec<f64> = payoff.iter().map(|c| c[l] + offset).collect();
        coeffs.push(-1.0);
        constraints.push(Constraint::new(coeffs, Relation::Ge, 0.0));
    }
    let mut sum = vec![1.0; k];
    sum.push(0.0);
    constraints.push(Constraint::new(sum, Relation::Eq, 1.0));
    let mut objective = vec![0.0; k];
    objective.push(1.0);

    let lp = LinearProgram {
        objective,
        constraints,
    };
    let mut weights = match solve_dense_lp(&lp)? {
        LpSolution::Optimal { weights, .. } => weights,
        LpSolution::Infeasible => {
            return Err(Error::Invariant(
                "maximin over the simplex reported infeasible".into(),
            ))
        }
    };
    weights.truncate(k);
    clean_simplex(&mut weights);
    let mut value = min_entry(&mix(payoff, &weights, rows));

    let (best_col, best_pure) = payoff.iter().map(|c| min_entry(c)).enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (j, v)| if v > acc.1 { (j, v) } else { acc },
    );
    if best_pure > value {
        value = best_pure;
        weights = vec![0.0; k];
        weights[best_col] = 1.0;
    }
    Ok(LpSolution::Optimal { value, weights })
}

/// Largest total surplus `Σ_ℓ (Pβ − target)_ℓ` over β in the simplex with `Pβ ≥ target`.
///
/// A positive value certifies strict dominance of `target` by a convex combination of the
/// columns; zero means the best covering point coincides with `target`.
pub fn dominance_margin(payoff: &[Vec<f64>], target: &[f64]) -> Result<LpSolution> {
    let rows = validate_columns(payoff)?;
    if target.len() != rows {
        return Err(Error::Argument(format!(
            "target has length {}, expected {rows}",
            target.len()
        )));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("target has non-finite entries".into()));
    }
    let k = payoff.len();
    let mut constraints = Vec::with_capacity(rows + 1);
    for l in 0..rows {
        let coeffs: Vec<f64> = payoff.iter().map(|c| c[l] - target[l]).collect();
        constraints.push(Constraint::new(coeffs, Relation::Ge, 0.0));
    }
    constraints.push(Constraint::new(vec![1.0; k], Relation::Eq, 1.0));
    let objective: Vec<f64> = payoff
        .iter()
        .map(|c| c.iter().zip(target).map(|(a, b)| a - b).sum())
        .collect();

    let lp = LinearProgram {
        objective,
        constraints,
    };
    match solve_dense_lp(&lp)? {
        LpSolution::Infeasible => Ok(LpSolution::Infeasible),
        LpSolution::Optimal { value, mut weights } => {
            clean_simplex(&mut weights);
            Ok(LpSolution::Optimal { value, weights })
        }
    }
}
