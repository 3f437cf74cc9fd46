//! KKT certificate for the posterior-shaped mechanism as a minimizer of
//! mutual information under a distortion budget.
//!
//! With `W` the mechanism at `eps = h_inv(D)`, the multipliers
//! `lambda = eps`, `mu(x) = p_X(x) ln(p_X(x) g^n)` and `eta = 0` should make
//! `p_X(x) ln(W(y|x) / p_Y(y)) + lambda p_X(x) d(x,y) + mu(x) - eta(x,y)`
//! vanish for every `(x, y)`.

use serde::{Deserialize, Serialize};

use crate::curves::{h, h_inv};
use crate::error::{Error, Result};
use crate::mechanisms::{build_exp_id, eps_tilde, ExpFamilyParams, EPS_TILDE_TOL};
use crate::metrics::distortion;
use crate::model::{output_marginal, Prior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub eps: f64,
    pub distortion: f64,
    pub stationarity_residual: f64,
    pub primal_feasible: bool,
    pub dual_feasible: bool,
    pub complementary_slackness_residual: f64,
    pub lambda: f64,
    pub mu: Vec<f64>,
    /// Row-major over `(x, y)`.
    pub eta: Vec<f64>,
    /// Outputs with zero probability, where the log-ratio is undefined.
    pub skipped_outputs: usize,
}

pub fn kkt_check(prior: &Prior, d: f64, tol: f64) -> Result<KktReport> {
    let spec = *prior.spec();
    prior.require_full_support()?;
    let et = eps_tilde(prior, EPS_TILDE_TOL)?;
    let limit = h(&spec, et)?;
    if !(d > 0.0) || d > limit + tol {
        return Err(Error::OutOfRange(format!(
            "KKT check needs 0 < D <= h(eps_tilde) = {limit}, got {d}"
        )));
    }
    let eps = h_inv(&spec, d.min(limit))?.max(et);
    let mech = build_exp_id(prior, eps)?;
    let params = ExpFamilyParams::new(spec, eps)?;
    let n = spec.states();
    let px = prior.pmf();
    let py = output_marginal(prior, &mech)?;

    let lambda = eps;
    let mu: Vec<f64> = px.iter().map(|&p| p * (p * params.normalizer()).ln()).collect();
    let eta = vec![0.0; n * n];

    let mut residual: f64 = 0.0;
    let mut skipped_outputs = 0;
    for y in 0..n {
        if py[y] <= 0.0 {
            skipped_outputs += 1;
            continue;
        }
        for x in 0..n {
            let w = mech.table()[x * n + y];
            let dxy = spec.hamming_unchecked(x, y) as f64;
            let r = px[x] * (w / py[y]).ln() + lambda * px[x] * dxy + mu[x] - eta[x * n + y];
            residual = residual.max(r.abs());
        }
    }

    let achieved = distortion(prior, &mech)?;
    let stochastic = mech.table().chunks(n).all(|row| {
        row.iter().all(|&v| v >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= tol
    });
    let primal_feasible = stochastic && achieved <= d + tol;
    let dual_feasible = lambda >= 0.0 && eta.iter().all(|&v| v >= 0.0);
    let slackness = eta
        .iter()
        .zip(mech.table())
        .map(|(e, w)| (e * w).abs())
        .fold((lambda * (achieved - d)).abs(), f64::max);

    Ok(KktReport {
        eps,
        distortion: achieved,
        stationarity_residual: residual,
        primal_feasible,
        dual_feasible,
        complementary_slackness_residual: slackness,
        lambda,
        mu,
        eta,
        skipped_outputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::universe::UniverseSpec;

    #[test]
    fn binary_uniform() {
        let prior = Prior::uniform(UniverseSpec::new(1, 2).unwrap());
        let r = kkt_check(&prior, 0.25, 1e-9).unwrap();
        assert!(r.stationarity_residual < 1e-9, "{}", r.stationarity_residual);
        assert!(r.primal_feasible && r.dual_feasible);
        assert!(r.complementary_slackness_residual < 1e-9);
        assert!((r.lambda - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn binary_skewed() {
        let prior = Prior::new(UniverseSpec::new(1, 2).unwrap(), vec![0.6, 0.4]).unwrap();
        let r = kkt_check(&prior, 0.3, 1e-9).unwrap();
        assert!(r.stationarity_residual < 1e-8);
        assert!(r.primal_feasible && r.dual_feasible);
        assert!(r.complementary_slackness_residual < 1e-9);
    }

    #[test]
    fn outside_range() {
        let prior = Prior::new(UniverseSpec::new(1, 2).unwrap(), vec![0.6, 0.4]).unwrap();
        assert!(kkt_check(&prior, 0.45, 1e-9).is_err());
        assert!(kkt_check(&prior, 0.0, 1e-9).is_err());
        let holes = Prior::new(UniverseSpec::new(1, 2).unwrap(), vec![1.0, 0.0]).unwrap();
        assert!(kkt_check(&holes, 0.1, 1e-9).is_err());
    }
}
