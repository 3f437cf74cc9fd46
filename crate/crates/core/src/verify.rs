//! Numerical verification of the privacy–distortion results on one prior.
//!
//! Each check compares a constructed quantity with its closed form or with
//! an independent solver and reports the worst residual. Checks that do not
//! apply to the prior (no full support, universe too large for the LP) are
//! reported as skipped with the reason.

use std::fmt;

use serde::Serialize;

use crate::curves::{h, h_inv, CurveContext};
use crate::error::Result;
use crate::fixtures::{random_mechanism, rng};
use crate::mechanisms::{build_exp_dp, build_exp_id, eps_tilde, solve_output_marginal, EPS_TILDE_TOL};
use crate::metrics::{self, distortion, dp_level, eps_x, identifiability_level, mutual_information};
use crate::model::Prior;
use crate::optimize::{blahut_arimoto, kkt_check, lp_pddp_with_cap, lp_rpd_two_block, lp_rpd_with_cap};
use crate::optimize::lp::TWO_BLOCK_CAP;
use crate::oracle;

/// Seed of the random mechanisms used by the oracle comparison.
pub const VERIFY_SEED: u64 = 20_140_901;

/// Largest `N` for the full differential privacy LP.
pub const PDDP_CAP: usize = 27;

/// Largest `N` for the Blahut–Arimoto comparison.
pub const BA_CAP: usize = 64;

/// Largest `N` for oracle comparisons.
pub const ORACLE_CAP: usize = 256;

pub const EXP_DP_TOL: f64 = 1e-9;
pub const EXP_ID_TOL: f64 = 1e-6;
pub const LP_TOL: f64 = 1e-7;
pub const MI_TOL: f64 = 1e-5;
pub const KKT_TOL: f64 = 1e-8;
pub const ORACLE_TOL: f64 = 1e-12;
pub const KRON_TOL: f64 = 1e-10;
pub const UNIFORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub full: bool,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Use the full parameter grids instead of the quick subsets.
    pub full: bool,
    pub seed: u64,
    pub lp_cap: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            full: false,
            seed: VERIFY_SEED,
            lp_cap: crate::optimize::DEFAULT_LP_CAP,
        }
    }
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "verify n={} m={} seed={} mode={}",
            self.n,
            self.m,
            self.seed,
            if self.full { "full" } else { "quick" }
        )?;
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skip => "SKIP",
            };
            let residual = match (c.residual, c.tolerance) {
                (Some(r), Some(t)) => format!("{r:.2e} <= {t:.0e}"),
                (Some(r), None) => format!("{r:.2e}"),
                _ => "-".into(),
            };
            writeln!(f, "{status}  {:<28} {:<22} {}", c.name, residual, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| c.status == CheckStatus::Fail).count();
        write!(
            f,
            "{} checks, {} failed",
            self.checks.len(),
            failed
        )
    }
}

fn skip(name: &'static str, reason: impl Into<String>) -> CheckResult {
    CheckResult {
        name,
        status: CheckStatus::Skip,
        residual: None,
        tolerance: None,
        detail: reason.into(),
    }
}

fn measured(name: &'static str, residual: f64, tolerance: f64, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name,
        status: if residual <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail },
        residual: Some(residual),
        tolerance: Some(tolerance),
        detail: detail.into(),
    }
}

fn failed(name: &'static str, err: impl fmt::Display) -> CheckResult {
    CheckResult {
        name,
        status: CheckStatus::Fail,
        residual: None,
        tolerance: None,
        detail: err.to_string(),
    }
}

fn run(name: &'static str, f: impl FnOnce() -> Result<CheckResult>) -> CheckResult {
    f().unwrap_or_else(|e| failed(name, e))
}

fn eps_grid(full: bool) -> Vec<f64> {
    if full {
        (0..=12).map(|k| k as f64 * 0.25).collect()
    } else {
        vec![0.0, 1.0, 2.0, 3.0]
    }
}

/// `D = h(eps_tilde + delta)`, inside the exact region.
fn exact_region_distortions(prior: &Prior, et: f64, full: bool) -> Result<Vec<f64>> {
    let deltas: &[f64] = if full { &[0.1, 0.5, 1.0, 1.5, 2.0] } else { &[0.5, 1.5] };
    deltas.iter().map(|d| h(prior.spec(), et + d)).collect()
}

pub fn verify(prior: &Prior, opts: &VerifyOptions) -> VerifyReport {
    let spec = *prior.spec();
    let states = spec.states();
    let full_support = prior.has_full_support();
    let no_support = "prior lacks full support";
    let et = if full_support { eps_tilde(prior, EPS_TILDE_TOL).ok() } else { None };
    let mut checks = Vec::new();

    checks.push(run("exp_dp_level_and_distortion", || {
        let mut worst: f64 = 0.0;
        for eps in [0.1, 0.5, 1.0, 2.0, 3f64.ln()] {
            let mech = build_exp_dp(spec, eps)?;
            worst = worst
                .max((dp_level(&mech) - eps).abs())
                .max((distortion(prior, &mech)? - h(&spec, eps)?).abs());
        }
        Ok(measured("exp_dp_level_and_distortion", worst, EXP_DP_TOL, "eps in {0.1,0.5,1,2,ln3}"))
    }));

    checks.push(match et {
        None => skip("exp_id_level_and_distortion", no_support),
        Some(et) => run("exp_id_level_and_distortion", || {
            let offsets: Vec<f64> = if opts.full {
                (0..=8).map(|k| k as f64 * 0.25).collect()
            } else {
                vec![0.0, 0.5, 2.0]
            };
            let mut worst: f64 = 0.0;
            for off in offsets {
                let eps = et + off;
                let mech = build_exp_id(prior, eps)?;
                worst = worst
                    .max((identifiability_level(prior, &mech)? - eps).abs())
                    .max((distortion(prior, &mech)? - h(&spec, eps)?).abs());
            }
            Ok(measured(
                "exp_id_level_and_distortion",
                worst,
                EXP_ID_TOL,
                "eps in [eps_tilde, eps_tilde+2]",
            ))
        }),
    });

    let ex = eps_x(prior);
    checks.push(CheckResult {
        name: "prior_constants",
        status: CheckStatus::Pass,
        residual: None,
        tolerance: None,
        detail: match et {
            Some(et) => format!(
                "eps_X={:.6} eps_tilde={:.6} ({})",
                ex,
                et,
                if et > ex + EPS_TILDE_TOL {
                    "eps_tilde > eps_X"
                } else if et < ex - EPS_TILDE_TOL {
                    "eps_tilde < eps_X"
                } else {
                    "eps_tilde = eps_X"
                }
            ),
            None => format!("eps_X={ex}"),
        },
    });

    checks.push(if !prior.is_uniform(UNIFORM_TOL) {
        skip("uniform_collapse", "prior is not uniform")
    } else {
        run("uniform_collapse", || {
            let mut worst = ex.abs().max(eps_tilde(prior, EPS_TILDE_TOL)?.abs());
            for eps in [0.0, 0.5, 1.0, 2.0] {
                let a = build_exp_id(prior, eps)?;
                let b = build_exp_dp(spec, eps)?;
                for (p, q) in a.table().iter().zip(b.table()) {
                    worst = worst.max((p - q).abs());
                }
            }
            let ctx = CurveContext::new(prior)?;
            let top = spec.max_exponential_distortion();
            for k in 1..=10 {
                let d = top * k as f64 / 10.0;
                let p = ctx.point(d)?;
                let hinv = h_inv(&spec, d)?;
                let exact = p.eps_i_exact.unwrap_or(f64::INFINITY);
                worst = worst
                    .max((exact - hinv).abs())
                    .max((p.eps_d_lower - hinv).abs())
                    .max((p.eps_d_upper - hinv).abs());
            }
            Ok(measured("uniform_collapse", worst, UNIFORM_TOL, "exp_id = exp_dp, bounds coincide"))
        })
    });

    checks.push(if states > ORACLE_CAP {
        skip("metrics_vs_oracle", format!("N={states} > {ORACLE_CAP}"))
    } else {
        run("metrics_vs_oracle", || {
            let mut r = rng(opts.seed);
            let count = if opts.full { 10 } else { 3 };
            let mut worst: f64 = 0.0;
            let mut mechs: Vec<_> = (0..count).map(|_| random_mechanism(&mut r, spec)).collect();
            mechs.push(build_exp_dp(spec, 0.7)?);
            for mech in &mechs {
                let fast = metrics::report(prior, mech)?;
                let (ident, dp) = oracle::brute_levels(prior, mech)?;
                worst = worst
                    .max(level_gap(fast.identifiability_level, ident))
                    .max(level_gap(fast.dp_level, dp))
                    .max((fast.mutual_information - oracle::brute_mutual_information(prior, mech)?).abs())
                    .max((fast.distortion - oracle::brute_distortion(prior, mech)?).abs())
                    .max(level_gap(fast.eps_x, oracle::brute_eps_x(prior)));
            }
            Ok(measured(
                "metrics_vs_oracle",
                worst,
                ORACLE_TOL,
                format!("{} mechanisms", mechs.len()),
            ))
        })
    });

    checks.push(match et {
        None => skip("kron_vs_dense_solve", no_support),
        Some(_) if states > ORACLE_CAP => skip("kron_vs_dense_solve", format!("N={states} > {ORACLE_CAP}")),
        Some(et) => run("kron_vs_dense_solve", || {
            let mut worst: f64 = 0.0;
            for eps in [et + 0.5, et + 1.0, et + 3.0] {
                let fast = solve_output_marginal(prior, eps)?;
                let dense = oracle::dense_exp_id_marginal(prior, eps)?;
                for (a, b) in fast.iter().zip(&dense) {
                    worst = worst.max((a - b).abs());
                }
            }
            Ok(measured("kron_vs_dense_solve", worst, KRON_TOL, "eps_tilde + {0.5,1,3}"))
        }),
    });

    checks.push(if states > opts.lp_cap {
        skip("relaxed_lp_equals_h", format!("N={states} > LP cap {}", opts.lp_cap))
    } else {
        run("relaxed_lp_equals_h", || {
            let mut worst: f64 = 0.0;
            for eps in eps_grid(opts.full) {
                let v = lp_rpd_with_cap(&spec, eps, opts.lp_cap)?.objective;
                worst = worst.max((v - h(&spec, eps)?).abs());
                if states <= TWO_BLOCK_CAP {
                    let w = lp_rpd_two_block(&spec, eps)?.objective;
                    worst = worst.max((v - w).abs());
                }
            }
            Ok(measured("relaxed_lp_equals_h", worst, LP_TOL, "single-column LP vs h"))
        })
    });

    let pddp_cap = PDDP_CAP.min(opts.lp_cap);
    checks.push(if !ex.is_finite() {
        skip("dp_lp_sandwich", no_support)
    } else if states > pddp_cap {
        skip("dp_lp_sandwich", format!("N={states} > {pddp_cap}"))
    } else {
        run("dp_lp_sandwich", || {
            let mut worst: f64 = 0.0;
            for eps in eps_grid(opts.full) {
                let v = lp_pddp_with_cap(prior, eps, opts.lp_cap)?.solution.objective;
                let upper = h(&spec, eps)?;
                let lower = h(&spec, eps + ex)?;
                worst = worst.max(v - upper).max(lower - v);
            }
            Ok(measured(
                "dp_lp_sandwich",
                worst.max(0.0),
                LP_TOL,
                "h(eps+eps_X) <= D_d*(eps) <= h(eps)",
            ))
        })
    });

    checks.push(match et {
        None => skip("ba_matches_exp_id", no_support),
        Some(_) if states > BA_CAP => skip("ba_matches_exp_id", format!("N={states} > {BA_CAP}")),
        Some(et) => run("ba_matches_exp_id", || {
            let mut worst: f64 = 0.0;
            let ds = exact_region_distortions(prior, et, opts.full)?;
            for &d in &ds {
                let mech = build_exp_id(prior, h_inv(&spec, d)?)?;
                let ba = blahut_arimoto(prior, d, 1e-9, 100_000)?;
                worst = worst.max((ba.mutual_information - mutual_information(prior, &mech)?).abs());
            }
            Ok(measured("ba_matches_exp_id", worst, MI_TOL, format!("{} distortions", ds.len())))
        }),
    });

    checks.push(match et {
        None => skip("kkt_stationarity", no_support),
        Some(et) => run("kkt_stationarity", || {
            let mut worst: f64 = 0.0;
            let mut flags = true;
            for d in exact_region_distortions(prior, et, opts.full)? {
                let r = kkt_check(prior, d, 1e-9)?;
                worst = worst.max(r.stationarity_residual);
                flags &= r.primal_feasible && r.dual_feasible;
            }
            let mut res = measured("kkt_stationarity", worst, KKT_TOL, "multipliers lambda=h_inv(D), eta=0");
            if !flags {
                res.status = CheckStatus::Fail;
                res.detail = "feasibility flag false".into();
            }
            Ok(res)
        }),
    });

    checks.push(match et {
        None => skip("exact_region_achievability", no_support),
        Some(et) => run("exact_region_achievability", || {
            let limit = h(&spec, et)?;
            let mut worst: f64 = 0.0;
            for k in 1..=4 {
                let d = limit * k as f64 / 4.0;
                let eps = h_inv(&spec, d)?.max(et);
                let mech = build_exp_id(prior, eps)?;
                worst = worst
                    .max((distortion(prior, &mech)? - d).abs())
                    .max((identifiability_level(prior, &mech)? - eps).abs());
            }
            Ok(measured(
                "exact_region_achievability",
                worst,
                EXP_ID_TOL,
                "exp_id at h_inv(D) has distortion D",
            ))
        }),
    });

    VerifyReport {
        n: spec.n(),
        m: spec.m(),
        seed: opts.seed,
        full: opts.full,
        checks,
    }
}

fn level_gap(a: f64, b: f64) -> f64 {
    if a.is_infinite() && b.is_infinite() {
        0.0
    } else {
        (a - b).abs()
    }
}
