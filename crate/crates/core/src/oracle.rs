//! Slow reference computations written straight from the definitions.
//!
//! Nothing here calls into `metrics`, `mechanisms` or the universe helpers:
//! distances are recomputed digit by digit and neighbors are found by
//! scanning every pair. These functions exist to be compared against the
//! fast paths.

#![allow(clippy::needless_range_loop)]

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Mechanism, Prior};

/// Largest `N` accepted by the brute-force metrics.
pub const BRUTE_CAP: usize = 4096;

/// Largest `N` accepted by [`grid_search_ei_feasibility`].
pub const GRID_CAP: usize = 16;

fn check_size(states: usize, cap: usize) -> Result<()> {
    if states > cap {
        return Err(Error::TooLarge(format!("oracle needs N <= {cap}, got {states}")));
    }
    Ok(())
}

fn rows_differing(n: usize, m: usize, a: usize, b: usize) -> usize {
    let mut count = 0;
    let (mut a, mut b) = (a, b);
    for _row in 0..n {
        if a % m != b % m {
            count += 1;
        }
        a /= m;
        b /= m;
    }
    count
}

fn same_universe(prior: &Prior, mech: &Mechanism) -> Result<(usize, usize, usize)> {
    let (a, b) = (prior.spec(), mech.spec());
    if a != b {
        return Err(Error::SpecMismatch {
            left: a.to_string(),
            right: b.to_string(),
        });
    }
    check_size(a.states(), BRUTE_CAP)?;
    Ok((a.n(), a.m(), a.states()))
}

pub fn brute_marginal(prior: &Prior, mech: &Mechanism) -> Result<Vec<f64>> {
    let (_, _, size) = same_universe(prior, mech)?;
    let mut py = vec![0.0; size];
    for y in 0..size {
        let mut acc = 0.0;
        for x in 0..size {
            acc += prior.pmf()[x] * mech.table()[x * size + y];
        }
        py[y] = acc;
    }
    Ok(py)
}

pub fn brute_mutual_information(prior: &Prior, mech: &Mechanism) -> Result<f64> {
    let py = brute_marginal(prior, mech)?;
    let size = py.len();
    let mut total = 0.0;
    for x in 0..size {
        for y in 0..size {
            let joint = prior.pmf()[x] * mech.table()[x * size + y];
            if joint > 0.0 {
                total += joint * (joint / (prior.pmf()[x] * py[y])).ln();
            }
        }
    }
    Ok(if total < 0.0 { 0.0 } else { total })
}

pub fn brute_distortion(prior: &Prior, mech: &Mechanism) -> Result<f64> {
    let (n, m, size) = same_universe(prior, mech)?;
    let mut total = 0.0;
    for x in 0..size {
        for y in 0..size {
            total += prior.pmf()[x] * mech.table()[x * size + y] * rows_differing(n, m, x, y) as f64;
        }
    }
    Ok(total)
}

fn ratio_level(level: &mut f64, a: f64, b: f64) {
    if a > 0.0 {
        let r = if b > 0.0 { (a / b).ln() } else { f64::INFINITY };
        if r > *level {
            *level = r;
        }
    }
}

/// `(identifiability level, differential privacy level)`.
pub fn brute_levels(prior: &Prior, mech: &Mechanism) -> Result<(f64, f64)> {
    let py = brute_marginal(prior, mech)?;
    let (n, m, size) = (prior.spec().n(), prior.spec().m(), py.len());
    let w = mech.table();
    let px = prior.pmf();
    let mut ident = 0.0;
    let mut dp = 0.0;
    for x in 0..size {
        for xp in 0..size {
            if rows_differing(n, m, x, xp) != 1 {
                continue;
            }
            for y in 0..size {
                ratio_level(&mut dp, w[x * size + y], w[xp * size + y]);
                if py[y] > 0.0 {
                    let post = px[x] * w[x * size + y] / py[y];
                    let post_p = px[xp] * w[xp * size + y] / py[y];
                    ratio_level(&mut ident, post, post_p);
                }
            }
        }
    }
    Ok((ident, dp))
}

pub fn brute_eps_x(prior: &Prior) -> f64 {
    let (n, m, size) = (prior.spec().n(), prior.spec().m(), prior.spec().states());
    let mut level = 0.0;
    for x in 0..size {
        for xp in 0..size {
            if rows_differing(n, m, x, xp) == 1 {
                ratio_level(&mut level, prior.pmf()[x], prior.pmf()[xp]);
            }
        }
    }
    level
}

/// Gaussian elimination with partial pivoting on a dense row-major system.
pub fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("nonempty");
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(Error::Infeasible {
                eps: f64::NAN,
                reason: "singular system".into(),
            });
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for k in r + 1..n {
            acc -= a[r * n + k] * x[k];
        }
        x[r] = acc / a[r * n + r];
    }
    Ok(x)
}

/// The output marginal of the posterior-shaped mechanism, solved densely on
/// the full `N x N` kernel.
pub fn dense_exp_id_marginal(prior: &Prior, eps: f64) -> Result<Vec<f64>> {
    let (n, m, size) = (prior.spec().n(), prior.spec().m(), prior.spec().states());
    check_size(size, BRUTE_CAP)?;
    let g = 1.0 + (m - 1) as f64 * (-eps).exp();
    let norm = g.powi(n as i32);
    let mut k = vec![0.0; size * size];
    for x in 0..size {
        for y in 0..size {
            k[x * size + y] = (-eps * rows_differing(n, m, x, y) as f64).exp() / norm;
        }
    }
    dense_solve(k, prior.pmf().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityScan {
    /// Verdict of the dense solve at the requested `eps`.
    pub feasible: bool,
    /// Smallest grid point at which the dense solve is nonnegative.
    pub first_feasible: Option<f64>,
    /// Grid points where the dense and tensor verdicts differ.
    pub disagreements: Vec<f64>,
}

/// Scans `eps` over `grid_step, 2 grid_step, ..` up to `eps` and compares the
/// sign structure of the dense solve with the tensor-solve verdict.
pub fn grid_search_ei_feasibility(prior: &Prior, eps: f64, grid_step: f64) -> Result<FeasibilityScan> {
    check_size(prior.spec().states(), GRID_CAP)?;
    if !(grid_step > 0.0) || !(eps > 0.0) {
        return Err(Error::OutOfRange("eps and grid step must be positive".into()));
    }
    let tol = crate::mechanisms::FEASIBILITY_TOL;
    let verdict = |e: f64| -> Result<(bool, bool)> {
        let dense = dense_exp_id_marginal(prior, e)?.iter().all(|&v| v >= -tol);
        let tensor = crate::mechanisms::feasible_output_marginal(prior, e).is_ok();
        Ok((dense, tensor))
    };
    let steps = (eps / grid_step).floor() as usize;
    let mut grid: Vec<f64> = (1..=steps).map(|k| k as f64 * grid_step).collect();
    if grid.last().is_none_or(|&g| (g - eps).abs() > 1e-12) {
        grid.push(eps);
    }
    let mut first_feasible = None;
    let mut disagreements = Vec::new();
    let mut feasible = false;
    for &e in &grid {
        let (dense, tensor) = verdict(e)?;
        if dense && first_feasible.is_none() {
            first_feasible = Some(e);
        }
        if dense != tensor {
            disagreements.push(e);
        }
        feasible = dense;
    }
    Ok(FeasibilityScan {
        feasible,
        first_feasible,
        disagreements,
    })
}
