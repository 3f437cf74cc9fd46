//! Distortion-minimization linear programs.
//!
//! * `lp_rpd`: the relaxed problem shared by identifiability and DP. The
//!   objective is linear in `p_Y` and every output column has the same
//!   feasible set, so the optimum places all output mass on one column; the
//!   problem reduces to a single posterior column `q`.
//! * `lp_rpd_two_block`: the same relaxation over the joint
//!   `z(x, y) = p_Y(y) p(x|y)`, kept as a validation path for small universes.
//! * `lp_pddp`: minimum expected distortion over all `eps`-DP mechanisms.
//!
//! The first and third have a neighbor-ratio row for every ordered neighbor
//! pair, which makes them tall and narrow. They are solved through their
//! duals, whose right-hand sides are nonnegative distortions, so the slack
//! basis is feasible and no phase one is needed. The primal solution is read
//! back from the dual's row multipliers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mechanism, Prior};
use crate::optimize::simplex::{LinearProgram, LpStatus, Relation, SimplexResult};
use crate::universe::UniverseSpec;

/// Default ceiling on `N` for the LP programs.
pub const DEFAULT_LP_CAP: usize = 64;

/// Largest `N` for which the two-block validation LP is built.
pub const TWO_BLOCK_CAP: usize = 8;

const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpVariable {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal expected distortion.
    pub objective: f64,
    pub variables: Vec<LpVariable>,
    /// Largest violation of the primal constraints by `variables`.
    pub primal_residual: f64,
    pub pivots: usize,
}

impl LpSolution {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.variables.iter().find(|v| v.name == name).map(|v| v.value)
    }
}

fn check_inputs(spec: &UniverseSpec, eps: f64, cap: usize) -> Result<()> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::OutOfRange(format!("eps must be finite and >= 0, got {eps}")));
    }
    if spec.states() > cap {
        return Err(Error::TooLarge(format!(
            "LP needs N <= {cap}, universe has {}",
            spec.states()
        )));
    }
    Ok(())
}

/// Ordered neighbor pairs `(x, x')`.
fn neighbor_pairs(spec: &UniverseSpec) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for x in 0..spec.states() {
        for xp in spec.neighbors_unchecked(x) {
            pairs.push((x, xp));
        }
    }
    pairs
}

fn expect_optimal(r: &SimplexResult, what: &str) -> Result<()> {
    match r.status {
        LpStatus::Optimal => Ok(()),
        other => Err(Error::NotConverged(format!("{what} LP ended {other:?}"))),
    }
}

/// Minimum relaxed distortion at level `eps`, via one posterior column
/// anchored at output 0:
/// `min sum_x q(x) d(x, 0)` s.t. `q(x) <= e^eps q(x')` for neighbors,
/// `sum q = 1`, `q >= 0`.
pub fn lp_rpd(spec: &UniverseSpec, eps: f64) -> Result<LpSolution> {
    lp_rpd_with_cap(spec, eps, DEFAULT_LP_CAP)
}

pub fn lp_rpd_with_cap(spec: &UniverseSpec, eps: f64, cap: usize) -> Result<LpSolution> {
    check_inputs(spec, eps, cap)?;
    let n = spec.states();
    let pairs = neighbor_pairs(spec);
    let e = eps.exp();

    // Dual: max nu s.t. nu - sum_{(x,.)} a + e^eps sum_{(.,x)} a <= d(x, 0).
    // Variables: nu+ (0), nu- (1), a_k (2 + k).
    let mut coeffs: Vec<Vec<(usize, f64)>> = (0..n).map(|_| vec![(0, 1.0), (1, -1.0)]).collect();
    for (k, &(x, xp)) in pairs.iter().enumerate() {
        coeffs[x].push((2 + k, -1.0));
        coeffs[xp].push((2 + k, e));
    }
    let mut dual = LinearProgram::new(2 + pairs.len());
    dual.set_cost(0, -1.0);
    dual.set_cost(1, 1.0);
    for (x, row) in coeffs.into_iter().enumerate() {
        dual.add_row(row, Relation::Le, spec.hamming_unchecked(x, 0) as f64);
    }
    let r = dual.solve();
    expect_optimal(&r, "relaxed")?;
    let q: Vec<f64> = r.duals.iter().map(|&y| (-y).max(0.0)).collect();

    let mut primal = LinearProgram::new(n);
    for x in 0..n {
        primal.set_cost(x, spec.hamming_unchecked(x, 0) as f64);
    }
    primal.add_row((0..n).map(|x| (x, 1.0)).collect(), Relation::Eq, 1.0);
    for &(x, xp) in &pairs {
        primal.add_row(vec![(x, 1.0), (xp, -e)], Relation::Le, 0.0);
    }
    let residual = primal.max_violation(&q);
    if residual > FEASIBILITY_TOL {
        return Err(Error::NotConverged(format!(
            "relaxed LP: recovered column violates constraints by {residual:e}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: -r.objective,
        variables: q
            .iter()
            .enumerate()
            .map(|(x, &value)| LpVariable {
                name: format!("q[{x}]"),
                value,
            })
            .collect(),
        primal_residual: residual,
        pivots: r.pivots,
    })
}

/// The relaxed problem over the joint table `z(x, y)`, solved directly.
pub fn lp_rpd_two_block(spec: &UniverseSpec, eps: f64) -> Result<LpSolution> {
    check_inputs(spec, eps, TWO_BLOCK_CAP)?;
    let n = spec.states();
    let e = eps.exp();
    let var = |x: usize, y: usize| x * n + y;
    let mut lp = LinearProgram::new(n * n);
    for x in 0..n {
        for y in 0..n {
            lp.set_cost(var(x, y), spec.hamming_unchecked(x, y) as f64);
        }
    }
    lp.add_row((0..n * n).map(|j| (j, 1.0)).collect(), Relation::Eq, 1.0);
    for (x, xp) in neighbor_pairs(spec) {
        for y in 0..n {
            lp.add_row(vec![(var(x, y), 1.0), (var(xp, y), -e)], Relation::Le, 0.0);
        }
    }
    let r = lp.solve();
    expect_optimal(&r, "two-block relaxed")?;
    let residual = lp.max_violation(&r.primal);
    let mut variables = Vec::with_capacity(2 * n + n * n);
    let py: Vec<f64> = (0..n).map(|y| (0..n).map(|x| r.primal[var(x, y)]).sum()).collect();
    for (y, &p) in py.iter().enumerate() {
        variables.push(LpVariable {
            name: format!("p_Y[{y}]"),
            value: p,
        });
    }
    for (y, &p) in py.iter().enumerate() {
        for x in 0..n {
            let value = if p > 0.0 { r.primal[var(x, y)] / p } else { 0.0 };
            variables.push(LpVariable {
                name: format!("p_X|Y[{x}|{y}]"),
                value,
            });
        }
    }
    Ok(LpSolution {
        status: r.status,
        objective: r.objective,
        variables,
        primal_residual: residual,
        pivots: r.pivots,
    })
}

/// Result of [`lp_pddp`] with the optimal mechanism attached.
#[derive(Debug, Clone)]
pub struct PddpSolution {
    pub solution: LpSolution,
    pub mechanism: Mechanism,
}

/// Minimum expected distortion over `eps`-differentially private mechanisms.
pub fn lp_pddp(prior: &Prior, eps: f64) -> Result<LpSolution> {
    lp_pddp_with_cap(prior, eps, DEFAULT_LP_CAP).map(|s| s.solution)
}

pub fn lp_pddp_with_cap(prior: &Prior, eps: f64, cap: usize) -> Result<PddpSolution> {
    let spec = *prior.spec();
    check_inputs(&spec, eps, cap)?;
    let n = spec.states();
    let pairs = neighbor_pairs(&spec);
    let e = eps.exp();
    let px = prior.pmf();

    // Dual: max sum_x nu_x s.t. for every (x, y)
    //   nu_x - sum_{x'} a[(x,x'),y] + e^eps sum_{x'} a[(x',x),y] <= p_X(x) d(x,y).
    // Variables: nu+_x (x), nu-_x (n + x), a[k,y] (2n + k n + y).
    let row_of = |x: usize, y: usize| x * n + y;
    let mut coeffs: Vec<Vec<(usize, f64)>> = (0..n * n)
        .map(|r| vec![(r / n, 1.0), (n + r / n, -1.0)])
        .collect();
    for (k, &(x, xp)) in pairs.iter().enumerate() {
        for y in 0..n {
            let v = 2 * n + k * n + y;
            coeffs[row_of(x, y)].push((v, -1.0));
            coeffs[row_of(xp, y)].push((v, e));
        }
    }
    let mut dual = LinearProgram::new(2 * n + pairs.len() * n);
    for x in 0..n {
        dual.set_cost(x, -1.0);
        dual.set_cost(n + x, 1.0);
    }
    for (r, row) in coeffs.into_iter().enumerate() {
        let (x, y) = (r / n, r % n);
        dual.add_row(row, Relation::Le, px[x] * spec.hamming_unchecked(x, y) as f64);
    }
    let r = dual.solve();
    expect_optimal(&r, "differential privacy")?;
    let p: Vec<f64> = r.duals.iter().map(|&y| (-y).max(0.0)).collect();

    let mut primal = LinearProgram::new(n * n);
    for x in 0..n {
        primal.add_row((0..n).map(|y| (row_of(x, y), 1.0)).collect(), Relation::Eq, 1.0);
    }
    for &(x, xp) in &pairs {
        for y in 0..n {
            primal.add_row(vec![(row_of(x, y), 1.0), (row_of(xp, y), -e)], Relation::Le, 0.0);
        }
    }
    let residual = primal.max_violation(&p);
    if residual > FEASIBILITY_TOL {
        return Err(Error::NotConverged(format!(
            "differential privacy LP: recovered mechanism violates constraints by {residual:e}"
        )));
    }
    let mechanism = Mechanism::from_flat(spec, p.clone())?;
    let variables = p
        .iter()
        .enumerate()
        .map(|(j, &value)| LpVariable {
            name: format!("p_Y|X[{}|{}]", j % n, j / n),
            value,
        })
        .collect();
    Ok(PddpSolution {
        solution: LpSolution {
            status: LpStatus::Optimal,
            objective: -r.objective,
            variables,
            primal_residual: residual,
            pivots: r.pivots,
        },
        mechanism,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::h;
    use crate::metrics::{distortion, dp_level};

    fn spec(n: usize, m: usize) -> UniverseSpec {
        UniverseSpec::new(n, m).unwrap()
    }

    #[test]
    fn rpd_examples() {
        let r = lp_rpd(&spec(1, 2), 3f64.ln()).unwrap();
        assert!((r.objective - 0.25).abs() < 1e-12);
        for (n, m) in [(1, 2), (2, 3), (3, 2)] {
            let s = spec(n, m);
            let r = lp_rpd(&s, 0.0).unwrap();
            assert!((r.objective - s.max_exponential_distortion()).abs() < 1e-12);
        }
        let r = lp_rpd(&spec(2, 2), 1.0).unwrap();
        assert!((r.objective - 2.0 / (1.0 + 1f64.exp())).abs() < 1e-12);
        assert!((r.objective - 0.537883).abs() < 1e-6);
    }

    #[test]
    fn rpd_column_is_a_pmf() {
        let r = lp_rpd(&spec(2, 3), 0.7).unwrap();
        let total: f64 = r.variables.iter().map(|v| v.value).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(r.primal_residual < 1e-10);
        assert!(r.value("q[0]").unwrap() > 0.0);
    }

    #[test]
    fn two_block_agrees() {
        for (n, m) in [(1, 2), (2, 2), (3, 2), (1, 5)] {
            let s = spec(n, m);
            for eps in [0.0, 0.5, 1.5] {
                let a = lp_rpd(&s, eps).unwrap().objective;
                let b = lp_rpd_two_block(&s, eps).unwrap().objective;
                assert!((a - b).abs() < 1e-9, "{n} {m} {eps}: {a} {b}");
            }
        }
        assert!(lp_rpd_two_block(&spec(2, 3), 1.0).is_err());
    }

    #[test]
    fn pddp_uniform_matches_h() {
        let s = spec(2, 2);
        let u = Prior::uniform(s);
        for eps in [0.0, 0.5, 1.0, 2.0] {
            let sol = lp_pddp_with_cap(&u, eps, DEFAULT_LP_CAP).unwrap();
            let hv = h(&s, eps).unwrap();
            assert!((sol.solution.objective - hv).abs() < 1e-9, "{eps}");
            assert!(dp_level(&sol.mechanism) <= eps + 1e-9);
            assert!((distortion(&u, &sol.mechanism).unwrap() - hv).abs() < 1e-9);
        }
    }

    #[test]
    fn size_cap() {
        let s = spec(7, 2);
        assert!(matches!(lp_rpd(&s, 1.0), Err(Error::TooLarge(_))));
        assert!(matches!(lp_pddp(&Prior::uniform(s), 1.0), Err(Error::TooLarge(_))));
        assert!(lp_rpd(&spec(1, 2), -1.0).is_err());
    }

    #[test]
    fn deterministic() {
        let p = Prior::product(spec(2, 2), &[0.7, 0.3]).unwrap();
        let a = lp_pddp(&p, 0.8).unwrap();
        let b = lp_pddp(&p, 0.8).unwrap();
        assert_eq!(a, b);
    }
}
