//! Constructions: the exponential mechanism with score `-d`, its
//! posterior-shaped variant, and the feasibility threshold of the latter.
//!
//! Both mechanisms are built from the kernel `K(x, y) = e^{-eps d(x,y)} / g^n`
//! with `g = 1 + (m-1) e^{-eps}`. Because the Hamming distance is a sum over
//! rows, `K` is the `n`-fold Kronecker power of the `m x m` matrix
//! `[1 on the diagonal, e^{-eps} elsewhere] / g`, and so is its inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mechanism, Prior};
use crate::universe::UniverseSpec;

/// Solved output-marginal entries above `-FEASIBILITY_TOL` count as
/// nonnegative and are clamped to zero.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Default interval width for [`eps_tilde`].
pub const EPS_TILDE_TOL: f64 = 1e-9;

const BISECTION_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFamilyParams {
    spec: UniverseSpec,
    eps: f64,
    g: f64,
    normalizer: f64,
}

impl ExpFamilyParams {
    pub fn new(spec: UniverseSpec, eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::OutOfRange(format!(
                "eps must be a finite nonnegative number, got {eps}"
            )));
        }
        let g = 1.0 + (spec.m() - 1) as f64 * (-eps).exp();
        Ok(ExpFamilyParams {
            spec,
            eps,
            g,
            normalizer: g.powi(spec.n() as i32),
        })
    }

    pub fn spec(&self) -> &UniverseSpec {
        &self.spec
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `1 + (m-1) e^{-eps}`.
    pub fn g(&self) -> f64 {
        self.g
    }

    /// `g^n`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `e^{-eps d} / g^n` for `d = 0..=n`.
    pub fn kernel_by_distance(&self) -> Vec<f64> {
        (0..=self.spec.n())
            .map(|d| (-self.eps * d as f64).exp() / self.normalizer)
            .collect()
    }

    /// Inverse of the per-row factor of the kernel, times `g`.
    /// Diagonal `(1 + (m-2) a) / (1 - a)`, off-diagonal `-a / (1 - a)`, with
    /// `a = e^{-eps}`. Singular at `eps = 0`.
    fn inverse_factor(&self) -> Option<(f64, f64)> {
        let a = (-self.eps).exp();
        if a >= 1.0 {
            return None;
        }
        let m = self.spec.m() as f64;
        Some(((1.0 + (m - 2.0) * a) / (1.0 - a), -a / (1.0 - a)))
    }
}

/// Applies the Kronecker power of the `m x m` matrix with `diag` on the
/// diagonal and `off` elsewhere to `v`, one row position at a time.
pub fn apply_kron_power(spec: &UniverseSpec, diag: f64, off: f64, v: &mut [f64]) {
    let m = spec.m();
    let states = spec.states();
    assert_eq!(v.len(), states);
    let mut fiber = vec![0.0; m];
    let mut stride = 1;
    for _ in 0..spec.n() {
        let block = stride * m;
        for base in (0..states).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                let mut sum = 0.0;
                for (k, f) in fiber.iter_mut().enumerate() {
                    *f = v[start + k * stride];
                    sum += *f;
                }
                for (k, &f) in fiber.iter().enumerate() {
                    v[start + k * stride] = (diag - off) * f + off * sum;
                }
            }
        }
        stride = block;
    }
}

/// Exponential mechanism with score `-d`:
/// `p(y|x) = e^{-eps d(x,y)} / (1 + (m-1) e^{-eps})^n`.
pub fn build_exp_dp(spec: UniverseSpec, eps: f64) -> Result<Mechanism> {
    let params = ExpFamilyParams::new(spec, eps)?;
    let kernel = params.kernel_by_distance();
    let n = spec.states();
    let mut rows = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            rows[x * n + y] = kernel[spec.hamming_unchecked(x, y)];
        }
    }
    Mechanism::from_closed_form(spec, rows)
}

/// Solves `sum_y p_Y(y) K(x, y) = p_X(x)` for `p_Y` without any sign check.
pub fn solve_output_marginal(prior: &Prior, eps: f64) -> Result<Vec<f64>> {
    let params = ExpFamilyParams::new(*prior.spec(), eps)?;
    if prior.pmf().windows(2).all(|w| w[0] == w[1]) {
        return Ok(prior.pmf().to_vec());
    }
    let Some((diag, off)) = params.inverse_factor() else {
        if prior.is_uniform(1e-12) {
            return Ok(vec![1.0 / prior.spec().states() as f64; prior.spec().states()]);
        }
        return Err(Error::Infeasible {
            eps,
            reason: "kernel is singular at eps=0 and the prior is not uniform".into(),
        });
    };
    let mut py = prior.pmf().to_vec();
    apply_kron_power(prior.spec(), diag, off, &mut py);
    Ok(py)
}

/// Output marginal of the posterior-shaped mechanism, clamped and
/// renormalized. Fails when some entry is below `-FEASIBILITY_TOL`.
pub fn feasible_output_marginal(prior: &Prior, eps: f64) -> Result<Vec<f64>> {
    prior.require_full_support()?;
    let mut py = solve_output_marginal(prior, eps)?;
    let (worst, min) = py
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if !(min >= -FEASIBILITY_TOL) {
        return Err(Error::Infeasible {
            eps,
            reason: format!("solved p_Y[{worst}] = {min:e} is negative"),
        });
    }
    if min < 0.0 {
        py.iter_mut().for_each(|v| *v = v.max(0.0));
        let total: f64 = py.iter().sum();
        py.iter_mut().for_each(|v| *v /= total);
    }
    Ok(py)
}

/// Posterior-shaped exponential mechanism
/// `p(y|x) = p_Y(y) e^{-eps d(x,y)} / (p_X(x) g^n)`, whose posterior is the
/// kernel itself. Requires full support and `eps >= eps_tilde(prior)`.
pub fn build_exp_id(prior: &Prior, eps: f64) -> Result<Mechanism> {
    build_exp_id_with_marginal(prior, eps).map(|(m, _)| m)
}

/// [`build_exp_id`] together with the solved output marginal.
pub fn build_exp_id_with_marginal(prior: &Prior, eps: f64) -> Result<(Mechanism, Vec<f64>)> {
    let py = feasible_output_marginal(prior, eps)?;
    let spec = *prior.spec();
    let kernel = ExpFamilyParams::new(spec, eps)?.kernel_by_distance();
    let n = spec.states();
    let px = prior.pmf();
    let clamped = py.contains(&0.0);
    let mut rows = vec![0.0; n * n];
    for (x, row) in rows.chunks_mut(n).enumerate() {
        for (y, r) in row.iter_mut().enumerate() {
            *r = (py[y] / px[x]) * kernel[spec.hamming_unchecked(x, y)];
        }
        if clamped {
            // Zeroed entries of p_Y leave rows short by up to FEASIBILITY_TOL / p_X(x).
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|r| *r /= total);
        }
    }
    Ok((Mechanism::from_closed_form(spec, rows)?, py))
}

/// Rounding noise of the tensor solve: `n` factor applications, each
/// amplifying by the infinity norm of the inverse factor.
fn solve_noise(params: &ExpFamilyParams) -> f64 {
    let Some((diag, off)) = params.inverse_factor() else {
        return 0.0;
    };
    let spec = params.spec();
    let norm = diag.abs() + (spec.m() - 1) as f64 * off.abs();
    4.0 * spec.n() as f64 * f64::EPSILON * norm.powi(spec.n() as i32)
}

fn is_feasible(prior: &Prior, eps: f64) -> bool {
    let Ok(params) = ExpFamilyParams::new(*prior.spec(), eps) else {
        return false;
    };
    let slack = solve_noise(&params).min(FEASIBILITY_TOL);
    match solve_output_marginal(prior, eps) {
        Ok(py) => py.iter().all(|&v| v >= -slack),
        Err(_) => false,
    }
}

/// Smallest `eps` (to within `tol`) at which the posterior-shaped mechanism
/// has a valid output marginal. Solved entries count as nonnegative down to
/// the rounding noise of the solve (capped at `FEASIBILITY_TOL`): entries
/// that are second order in `eps - eps_tilde` sit at rounding level near the
/// threshold, so an exact sign test would be noise-driven, while the full
/// build tolerance would clamp entries by up to 1e-10 and distort rows with
/// small prior mass.
pub fn eps_tilde(prior: &Prior, tol: f64) -> Result<f64> {
    prior.require_full_support()?;
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("tolerance must be positive, got {tol}")));
    }
    if is_feasible(prior, 0.0) {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !is_feasible(prior, hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NotConverged(
                "no feasible eps found below 1e6".into(),
            ));
        }
    }
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= tol / 2.0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if is_feasible(prior, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn build_identity(spec: UniverseSpec) -> Mechanism {
    let n = spec.states();
    let mut rows = vec![0.0; n * n];
    for x in 0..n {
        rows[x * n + x] = 1.0;
    }
    Mechanism::from_closed_form(spec, rows).expect("identity is stochastic")
}

/// Mechanism that ignores its input and releases a draw from `q`.
pub fn build_independent(spec: UniverseSpec, q: &[f64]) -> Result<Mechanism> {
    let q = Prior::new(spec, q.to_vec())?;
    let n = spec.states();
    let mut rows = Vec::with_capacity(n * n);
    for _ in 0..n {
        rows.extend_from_slice(q.pmf());
    }
    Mechanism::from_closed_form(spec, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParametricKind {
    ExpDp,
    ExpId,
}

/// Compact file form `{"kind":"exp_dp"|"exp_id","eps":..,"n":..,"m":..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricMechanism {
    pub kind: ParametricKind,
    pub eps: f64,
    pub n: usize,
    pub m: usize,
}

impl ParametricMechanism {
    /// Expands to a full table. `exp_id` needs the prior it is shaped for.
    pub fn expand(&self, spec: UniverseSpec, prior: Option<&Prior>) -> Result<Mechanism> {
        if spec.n() != self.n || spec.m() != self.m {
            return Err(Error::SpecMismatch {
                left: spec.to_string(),
                right: format!("(n={}, m={})", self.n, self.m),
            });
        }
        match self.kind {
            ParametricKind::ExpDp => build_exp_dp(spec, self.eps),
            ParametricKind::ExpId => {
                let prior = prior.ok_or_else(|| {
                    Error::Parse("exp_id mechanism needs a prior to expand".into())
                })?;
                if prior.spec() != &spec {
                    return Err(Error::SpecMismatch {
                        left: prior.spec().to_string(),
                        right: spec.to_string(),
                    });
                }
                build_exp_id(prior, self.eps)
            }
        }
    }
}
