//! Two-phase revised simplex over a dense basis inverse.
//!
//! Problems are stated as `min c^T x` subject to linear rows and `x >= 0`.
//! Phase one minimizes the sum of artificial variables; it is skipped when
//! every row is `<=` with a nonnegative right-hand side. Constraint columns
//! are kept sparse and `B^{-1}` is updated in product form, so a pivot costs
//! `O(rows^2)` rather than `O(rows * columns)`. Entering columns follow
//! Dantzig's rule with lowest-index ties; after a run of degenerate pivots
//! the choice falls back to Bland's rule. Leaving rows break ties by lowest
//! basic index. The pivot sequence is a deterministic function of the input.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    rel: Relation,
    rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Sensitivity of the optimal objective to each row's right-hand side.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

const RC_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rel: Relation, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.num_vars));
        self.rows.push(Row { coeffs, rel, rhs });
    }

    /// Largest violation of any row or sign constraint by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0f64, |w, &v| w.max(-v));
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.rel {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn solve(&self) -> SimplexResult {
        Revised::build(self).run(self)
    }
}

/// Basis inverse is rebuilt from scratch this often to limit drift.
const REFACTOR_EVERY: usize = 200;

struct Revised {
    rows: usize,
    /// Sparse columns of the sign-normalized system, slacks and artificials included.
    columns: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    /// Row-major `rows x rows`.
    binv: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    x_b: Vec<f64>,
    flipped: Vec<bool>,
    first_artificial: usize,
    pivots: usize,
}

impl Revised {
    fn build(lp: &LinearProgram) -> Self {
        let rows = lp.rows.len();
        let flipped: Vec<bool> = lp.rows.iter().map(|r| r.rhs < 0.0).collect();
        let rels: Vec<Relation> = lp
            .rows
            .iter()
            .zip(&flipped)
            .map(|(r, &f)| match (r.rel, f) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (rel, _) => rel,
            })
            .collect();
        let n_slack = rels.iter().filter(|r| **r != Relation::Eq).count();
        let n_art = rels.iter().filter(|r| **r != Relation::Le).count();
        let first_slack = lp.num_vars;
        let first_artificial = first_slack + n_slack;
        let cols = first_artificial + n_art;

        let mut columns = vec![Vec::new(); cols];
        let mut rhs = vec![0.0; rows];
        let mut basis = vec![0; rows];
        let (mut next_slack, mut next_art) = (first_slack, first_artificial);
        for (i, row) in lp.rows.iter().enumerate() {
            let sign = if flipped[i] { -1.0 } else { 1.0 };
            for &(j, a) in &row.coeffs {
                match columns[j].last_mut() {
                    Some((k, v)) if *k == i => *v += sign * a,
                    _ => columns[j].push((i, sign * a)),
                }
            }
            rhs[i] = sign * row.rhs;
            match rels[i] {
                Relation::Le => {
                    columns[next_slack].push((i, 1.0));
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    columns[next_slack].push((i, -1.0));
                    columns[next_art].push((i, 1.0));
                    basis[i] = next_art;
                    next_slack += 1;
                    next_art += 1;
                }
                Relation::Eq => {
                    columns[next_art].push((i, 1.0));
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        let mut binv = vec![0.0; rows * rows];
        for i in 0..rows {
            binv[i * rows + i] = 1.0;
        }
        let mut is_basic = vec![false; cols];
        basis.iter().for_each(|&b| is_basic[b] = true);
        Revised {
            rows,
            columns,
            x_b: rhs.clone(),
            rhs,
            binv,
            basis,
            is_basic,
            flipped,
            first_artificial,
            pivots: 0,
        }
    }

    /// `c_B^T B^{-1}`.
    fn prices(&self, cost: &[f64]) -> Vec<f64> {
        let r = self.rows;
        let mut y = vec![0.0; r];
        for i in 0..r {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (yk, &b) in y.iter_mut().zip(&self.binv[i * r..(i + 1) * r]) {
                    *yk += cb * b;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        cost[j] - self.columns[j].iter().map(|&(k, a)| y[k] * a).sum::<f64>()
    }

    /// `B^{-1} A_j`.
    fn direction(&self, j: usize) -> Vec<f64> {
        let r = self.rows;
        (0..r)
            .map(|i| {
                let b = &self.binv[i * r..(i + 1) * r];
                self.columns[j].iter().map(|&(k, a)| b[k] * a).sum()
            })
            .collect()
    }

    fn pivot(&mut self, row: usize, col: usize, d: &[f64]) {
        let r = self.rows;
        let (before, rest) = self.binv.split_at_mut(row * r);
        let (prow, after) = rest.split_at_mut(r);
        let inv = 1.0 / d[row];
        prow.iter_mut().for_each(|v| *v *= inv);
        let theta = self.x_b[row] * inv;
        for (i, chunk) in before.chunks_mut(r).chain(after.chunks_mut(r)).enumerate() {
            let i = if i < row { i } else { i + 1 };
            let f = d[i];
            if f != 0.0 {
                for (a, &p) in chunk.iter_mut().zip(prow.iter()) {
                    *a -= f * p;
                }
                self.x_b[i] -= f * theta;
            }
        }
        self.x_b[row] = theta;
        self.is_basic[self.basis[row]] = false;
        self.is_basic[col] = true;
        self.basis[row] = col;
        self.pivots += 1;
        if self.pivots.is_multiple_of(REFACTOR_EVERY) {
            self.refactor();
        }
    }

    /// Recomputes `B^{-1}` and `x_B` by Gauss-Jordan elimination on the
    /// current basis columns. Keeps the old inverse if the basis looks singular.
    fn refactor(&mut self) {
        let r = self.rows;
        let w = 2 * r;
        let mut m = vec![0.0; r * w];
        for (c, &j) in self.basis.iter().enumerate() {
            for &(k, a) in &self.columns[j] {
                m[k * w + c] = a;
            }
        }
        for i in 0..r {
            m[i * w + r + i] = 1.0;
        }
        for c in 0..r {
            let p = (c..r)
                .max_by(|&a, &b| m[a * w + c].abs().total_cmp(&m[b * w + c].abs()))
                .expect("nonempty");
            if m[p * w + c].abs() < 1e-12 {
                return;
            }
            if p != c {
                for k in 0..w {
                    m.swap(p * w + k, c * w + k);
                }
            }
            let inv = 1.0 / m[c * w + c];
            m[c * w..(c + 1) * w].iter_mut().for_each(|v| *v *= inv);
            let (lo, rest) = m.split_at_mut(c * w);
            let (pr, hi) = rest.split_at_mut(w);
            for chunk in lo.chunks_mut(w).chain(hi.chunks_mut(w)) {
                let f = chunk[c];
                if f != 0.0 {
                    for (a, &b) in chunk.iter_mut().zip(pr.iter()) {
                        *a -= f * b;
                    }
                }
            }
        }
        // Row c of the reduced left block is basis position c, so the right
        // block is B^{-1} with rows ordered by basis position.
        for i in 0..r {
            self.binv[i * r..(i + 1) * r].copy_from_slice(&m[i * w + r..(i + 1) * w]);
        }
        for i in 0..r {
            self.x_b[i] = (0..r).map(|k| self.binv[i * r + k] * self.rhs[k]).sum();
        }
    }

    /// Pivots over columns `< limit` until optimal (`true`) or unbounded.
    fn optimize(&mut self, cost: &[f64], limit: usize) -> bool {
        let mut degenerate = 0;
        loop {
            let y = self.prices(cost);
            let mut entering: Option<(usize, f64)> = None;
            for j in (0..limit).filter(|&j| !self.is_basic[j]) {
                let z = self.reduced_cost(cost, &y, j);
                if z < -RC_TOL && entering.is_none_or(|(_, best)| z < best) {
                    entering = Some((j, z));
                    if degenerate >= DEGENERATE_RUN {
                        break;
                    }
                }
            }
            let Some((col, _)) = entering else {
                return true;
            };
            let d = self.direction(col);
            let mut best: Option<(usize, f64)> = None;
            for (i, &a) in d.iter().enumerate() {
                if a > PIVOT_TOL {
                    let ratio = self.x_b[i].max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * br.abs().max(1.0);
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, ratio)) = best else {
                return false;
            };
            if ratio <= PIVOT_TOL {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, col, &d);
        }
    }

    fn run(mut self, lp: &LinearProgram) -> SimplexResult {
        let cols = self.columns.len();
        if self.first_artificial < cols {
            let mut phase1 = vec![0.0; cols];
            phase1[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            self.optimize(&phase1, cols);
            self.refactor();
            let infeasibility: f64 = (0..self.rows)
                .map(|i| phase1[self.basis[i]] * self.x_b[i])
                .sum();
            if infeasibility > PHASE1_TOL {
                return self.finish(lp, LpStatus::Infeasible, &[]);
            }
            // Drive zero-level artificials out of the basis where possible.
            for i in 0..self.rows {
                if self.basis[i] >= self.first_artificial {
                    let r = self.rows;
                    let found = (0..self.first_artificial).filter(|&j| !self.is_basic[j]).find(|&j| {
                        let b = &self.binv[i * r..(i + 1) * r];
                        let v: f64 = self.columns[j].iter().map(|&(k, a)| b[k] * a).sum();
                        v.abs() > PIVOT_TOL
                    });
                    if let Some(col) = found {
                        let d = self.direction(col);
                        self.pivot(i, col, &d);
                    }
                }
            }
        }
        let mut cost = vec![0.0; cols];
        cost[..lp.num_vars].copy_from_slice(&lp.objective);
        if !self.optimize(&cost, self.first_artificial) {
            return self.finish(lp, LpStatus::Unbounded, &cost);
        }
        self.refactor();
        self.finish(lp, LpStatus::Optimal, &cost)
    }

    fn finish(self, lp: &LinearProgram, status: LpStatus, cost: &[f64]) -> SimplexResult {
        let mut primal = vec![0.0; lp.num_vars];
        for i in 0..self.rows {
            if self.basis[i] < lp.num_vars {
                primal[self.basis[i]] = self.x_b[i].max(0.0);
            }
        }
        let duals = if status == LpStatus::Optimal {
            self.prices(cost)
                .into_iter()
                .zip(&self.flipped)
                .map(|(y, &f)| if f { -y } else { y })
                .collect()
        } else {
            Vec::new()
        };
        let objective = match status {
            LpStatus::Optimal => lp.objective_value(&primal),
            LpStatus::Infeasible => f64::NAN,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        SimplexResult {
            status,
            objective,
            primal,
            duals,
            pivots: self.pivots,
        }
    }
}
