//! Minimum mutual information under an expected Hamming distortion budget,
//! by Blahut–Arimoto alternating minimization.
//!
//! For a fixed slope `s` the iteration alternates
//! `W(y|x) = q(y) e^{-s d(x,y)} / Z_x` and `q = p_X W` and converges to the
//! point of the rate–distortion curve with slope `-s`. An outer bisection on
//! `s` matches the requested distortion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mechanism, MechanismFile, Prior};
use crate::universe::UniverseSpec;

/// Share of uniform mass blended into the output before each warm start.
const WARM_START_MIX: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaOptions {
    /// Stop a fixed-slope run once the Blahut upper/lower bound gap is below this.
    pub mi_tol: f64,
    /// Accepted distance between achieved and requested distortion.
    pub distortion_tol: f64,
    /// Iteration limit of each fixed-slope run.
    pub max_iter: usize,
}

impl Default for BaOptions {
    fn default() -> Self {
        BaOptions {
            mi_tol: 1e-9,
            distortion_tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdSolution {
    pub mutual_information: f64,
    pub achieved_distortion: f64,
    pub target_distortion: f64,
    pub slope: f64,
    #[serde(with = "mechanism_file")]
    pub mechanism: Mechanism,
    pub iterations: usize,
    pub converged: bool,
    /// Zero-mass input states left out of the iteration.
    pub dropped_states: usize,
}

mod mechanism_file {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Mechanism, s: S) -> std::result::Result<S::Ok, S::Error> {
        m.to_file().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Mechanism, D::Error> {
        let file = MechanismFile::deserialize(d)?;
        Mechanism::from_file(file, crate::universe::DEFAULT_STATE_CAP)
            .map_err(serde::de::Error::custom)
    }
}

/// One fixed-slope run.
#[derive(Debug, Clone)]
pub struct FixedSlopeRun {
    pub output: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `-sum_x p(x) ln Z_x(q)` before each output update; non-increasing.
    pub trace: Vec<f64>,
}

struct Problem {
    spec: UniverseSpec,
    inputs: Vec<(usize, f64)>,
    dist: Vec<u8>,
}

impl Problem {
    fn new(prior: &Prior) -> Self {
        let spec = *prior.spec();
        Problem {
            spec,
            inputs: prior
                .pmf()
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, p)| p > 0.0)
                .collect(),
            dist: spec.distance_table(),
        }
    }

    fn kernel(&self, slope: f64) -> Vec<f64> {
        (0..=self.spec.n()).map(|d| (-slope * d as f64).exp()).collect()
    }

    fn run(&self, slope: f64, start: &[f64], opts: &BaOptions, keep_trace: bool) -> FixedSlopeRun {
        let n = self.spec.states();
        let k = self.kernel(slope);
        let mut q = start.to_vec();
        let mut c = vec![0.0; n];
        let mut trace = Vec::new();
        let mut last = f64::INFINITY;
        for it in 1..=opts.max_iter {
            c.iter_mut().for_each(|v| *v = 0.0);
            let mut value = 0.0;
            for &(x, px) in &self.inputs {
                let d = &self.dist[x * n..(x + 1) * n];
                let z: f64 = q.iter().zip(d).map(|(&qy, &dy)| qy * k[dy as usize]).sum();
                value -= px * z.ln();
                let w = px / z;
                for (cy, &dy) in c.iter_mut().zip(d) {
                    *cy += w * k[dy as usize];
                }
            }
            debug_assert!(
                value <= last + 1e-12 * last.abs().max(1.0),
                "Blahut–Arimoto objective increased: {last} -> {value}"
            );
            last = value;
            if keep_trace {
                trace.push(value);
            }
            let mut max_log = f64::NEG_INFINITY;
            let mut avg_log = 0.0;
            for (&qy, &cy) in q.iter().zip(&c) {
                let l = cy.ln();
                max_log = max_log.max(l);
                if qy > 0.0 {
                    avg_log += qy * cy * l;
                }
            }
            q.iter_mut().zip(&c).for_each(|(qy, &cy)| *qy *= cy);
            let total: f64 = q.iter().sum();
            q.iter_mut().for_each(|qy| *qy /= total);
            if max_log - avg_log <= opts.mi_tol {
                return FixedSlopeRun {
                    output: q,
                    iterations: it,
                    converged: true,
                    trace,
                };
            }
        }
        FixedSlopeRun {
            output: q,
            iterations: opts.max_iter,
            converged: false,
            trace,
        }
    }

    /// Channel, distortion and mutual information induced by output `q`.
    fn evaluate(&self, slope: f64, q: &[f64]) -> (Vec<f64>, f64, f64) {
        let n = self.spec.states();
        let k = self.kernel(slope);
        let mut rows = vec![0.0; n * n];
        for x in 0..n {
            let d = &self.dist[x * n..(x + 1) * n];
            let row = &mut rows[x * n..(x + 1) * n];
            let mut z = 0.0;
            for ((r, &qy), &dy) in row.iter_mut().zip(q).zip(d) {
                *r = qy * k[dy as usize];
                z += *r;
            }
            row.iter_mut().for_each(|r| *r /= z);
        }
        let mut py = vec![0.0; n];
        for &(x, px) in &self.inputs {
            for (p, &w) in py.iter_mut().zip(&rows[x * n..(x + 1) * n]) {
                *p += px * w;
            }
        }
        let (mut dist, mut mi) = (0.0, 0.0);
        for &(x, px) in &self.inputs {
            let d = &self.dist[x * n..(x + 1) * n];
            for y in 0..n {
                let w = rows[x * n + y];
                if w > 0.0 {
                    dist += px * w * d[y] as f64;
                    mi += px * w * (w / py[y]).ln();
                }
            }
        }
        (rows, dist, mi.max(0.0))
    }
}

/// Runs Blahut–Arimoto at a fixed slope from a uniform output.
pub fn fixed_slope(prior: &Prior, slope: f64, opts: &BaOptions) -> FixedSlopeRun {
    let problem = Problem::new(prior);
    let n = prior.spec().states();
    problem.run(slope, &vec![1.0 / n as f64; n], opts, true)
}

/// Smallest mutual information over mechanisms with expected distortion at
/// most `d_target`. `tol` is the distortion matching tolerance.
pub fn blahut_arimoto(prior: &Prior, d_target: f64, tol: f64, max_iter: usize) -> Result<RdSolution> {
    let opts = BaOptions {
        mi_tol: BaOptions::default().mi_tol.min(tol),
        distortion_tol: tol,
        max_iter,
    };
    blahut_arimoto_with(prior, d_target, &opts)
}

pub fn blahut_arimoto_with(prior: &Prior, d_target: f64, opts: &BaOptions) -> Result<RdSolution> {
    let spec = *prior.spec();
    let nrows = spec.n() as f64;
    if !(d_target > 0.0) || d_target >= nrows {
        return Err(Error::OutOfRange(format!(
            "distortion target must lie in (0, {nrows}), got {d_target}"
        )));
    }
    if !(opts.distortion_tol > 0.0) || !(opts.mi_tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::OutOfRange("tolerances and max_iter must be positive".into()));
    }
    let problem = Problem::new(prior);
    let n = spec.states();
    let dropped_states = n - problem.inputs.len();

    // A constant output reaches distortion min_y E[d(X, y)] with zero information.
    let (best_y, zero_rate_distortion) = (0..n)
        .map(|y| {
            let v: f64 = problem
                .inputs
                .iter()
                .map(|&(x, px)| px * problem.dist[x * n + y] as f64)
                .sum();
            (y, v)
        })
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    if d_target >= zero_rate_distortion {
        let mut rows = vec![0.0; n * n];
        for x in 0..n {
            rows[x * n + best_y] = 1.0;
        }
        return Ok(RdSolution {
            mutual_information: 0.0,
            achieved_distortion: zero_rate_distortion,
            target_distortion: d_target,
            slope: 0.0,
            mechanism: Mechanism::from_flat(spec, rows)?,
            iterations: 0,
            converged: true,
            dropped_states,
        });
    }

    let mut q = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    let mut solve = |slope: f64, q: &mut Vec<f64>| {
        // Warm start, but keep every output alive: an output whose mass
        // underflowed at a smaller slope can never regrow multiplicatively.
        let floor = WARM_START_MIX / n as f64;
        q.iter_mut().for_each(|v| *v = (1.0 - WARM_START_MIX) * *v + floor);
        let run = problem.run(slope, q, opts, false);
        iterations += run.iterations;
        *q = run.output;
        let (rows, dist, mi) = problem.evaluate(slope, q);
        (rows, dist, mi, run.converged)
    };

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut at_hi = solve(hi, &mut q);
    while at_hi.1 > d_target + opts.distortion_tol {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::NotConverged(format!(
                "no slope reaches distortion {d_target}"
            )));
        }
        at_hi = solve(hi, &mut q);
    }
    let mut best = (hi, at_hi);
    for _ in 0..200 {
        if (best.1 .1 - d_target).abs() <= opts.distortion_tol || hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let r = solve(mid, &mut q);
        let matched = (r.1 - d_target).abs() <= opts.distortion_tol;
        if r.1 > d_target + opts.distortion_tol {
            lo = mid;
        } else {
            hi = mid;
            best = (mid, r);
        }
        if matched {
            break;
        }
    }
    let (slope, (rows, dist, mi, converged)) = best;
    Ok(RdSolution {
        mutual_information: mi,
        achieved_distortion: dist,
        target_distortion: d_target,
        slope,
        mechanism: Mechanism::from_flat(spec, rows)?,
        iterations,
        converged,
        dropped_states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_entropy(p: f64) -> f64 {
        -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
    }

    #[test]
    fn binary_uniform_closed_form() {
        let prior = Prior::uniform(UniverseSpec::new(1, 2).unwrap());
        let r = blahut_arimoto(&prior, 0.25, 1e-12, 10_000).unwrap();
        let expect = 2f64.ln() - binary_entropy(0.25);
        assert!((r.mutual_information - expect).abs() < 1e-9, "{}", r.mutual_information);
        assert!(r.converged);
        let w = r.mechanism.table();
        assert!((w[1] - 0.25).abs() < 1e-9 && (w[2] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn large_budget_is_free() {
        let s = UniverseSpec::new(2, 3).unwrap();
        let r = blahut_arimoto(&Prior::uniform(s), s.max_exponential_distortion(), 1e-7, 100).unwrap();
        assert_eq!(r.mutual_information, 0.0);
        assert!(r.achieved_distortion <= s.max_exponential_distortion() + 1e-12);
    }

    #[test]
    fn product_structure() {
        let prior = Prior::uniform(UniverseSpec::new(2, 2).unwrap());
        let r = blahut_arimoto(&prior, 0.5, 1e-10, 10_000).unwrap();
        let expect = 2.0 * (2f64.ln() - binary_entropy(0.25));
        assert!((r.mutual_information - expect).abs() < 1e-6);
    }

    #[test]
    fn objective_is_monotone() {
        let s = UniverseSpec::new(2, 3).unwrap();
        let prior = Prior::new(s, (1..=9).map(|i| i as f64 / 45.0).collect()).unwrap();
        let run = fixed_slope(&prior, 1.3, &BaOptions::default());
        assert!(run.converged);
        for w in run.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_targets() {
        let prior = Prior::uniform(UniverseSpec::new(1, 2).unwrap());
        assert!(blahut_arimoto(&prior, 0.0, 1e-7, 10).is_err());
        assert!(blahut_arimoto(&prior, 1.0, 1e-7, 10).is_err());
    }

    #[test]
    fn zero_mass_states_dropped() {
        let s = UniverseSpec::new(1, 3).unwrap();
        let prior = Prior::new(s, vec![0.5, 0.5, 0.0]).unwrap();
        let r = blahut_arimoto(&prior, 0.2, 1e-9, 10_000).unwrap();
        assert_eq!(r.dropped_states, 1);
        assert!(r.achieved_distortion <= 0.2 + 1e-9);
    }
}
