//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::Instant;

use privdist::curves::{h, h_inv, theorem1_point};
use privdist::fixtures;
use privdist::mechanisms::{build_exp_dp, build_exp_id, eps_tilde};
use privdist::metrics::{distortion, dp_level, eps_x, identifiability_level, mutual_information};
use privdist::model::output_marginal;
use privdist::optimize::{blahut_arimoto, kkt_check, lp_pddp, lp_rpd, lp_rpd_two_block, LpStatus};
use privdist::oracle;
use privdist::{Prior, UniverseSpec};

const SPECS: [(usize, usize); 6] = [(1, 2), (2, 2), (3, 2), (2, 3), (3, 3), (2, 4)];
const SEED: u64 = 0x5eed_2014;

struct Outcome {
    worst: f64,
    tol: f64,
    checks: usize,
    errors: Vec<String>,
}

impl Outcome {
    fn new(tol: f64) -> Self {
        Outcome { worst: 0.0, tol, checks: 0, errors: Vec::new() }
    }

    fn residual(&mut self, r: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        if r.is_nan() || r > self.tol {
            self.errors.push(format!("{} (residual {r:.2e})", what()));
        }
        if r > self.worst || r.is_nan() {
            self.worst = r;
        }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.errors.push(what());
        }
    }

    fn fail(&mut self, what: String) {
        self.checks += 1;
        self.errors.push(what);
    }
}

fn specs() -> impl Iterator<Item = UniverseSpec> {
    SPECS.iter().map(|&(n, m)| UniverseSpec::new(n, m).unwrap())
}

fn eps_grid() -> Vec<f64> {
    (0..=12).map(|k| k as f64 * 0.25).collect()
}

fn random_priors(spec: UniverseSpec, count: usize, stream: u64) -> Vec<Prior> {
    let mut rng = fixtures::rng(SEED ^ (stream << 32) ^ (spec.n() as u64 * 97 + spec.m() as u64));
    (0..count).map(|_| fixtures::random_prior(&mut rng, spec)).collect()
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new(1e-9);
    for spec in specs() {
        let mut priors = vec![Prior::uniform(spec)];
        priors.extend(random_priors(spec, 3, 1));
        for eps in [0.1, 0.5, 1.0, 2.0, 3f64.ln()] {
            let mech = build_exp_dp(spec, eps).unwrap();
            out.residual((dp_level(&mech) - eps).abs(), || format!("dp_level {spec} eps={eps}"));
            let target = h(&spec, eps).unwrap();
            for prior in &priors {
                let d = distortion(prior, &mech).unwrap();
                out.residual((d - target).abs(), || format!("distortion {spec} eps={eps}"));
            }
        }
    }
    out
}

fn criterion_2() -> Outcome {
    let mut out = Outcome::new(1e-6);
    for spec in specs() {
        for (i, prior) in random_priors(spec, 20, 2).iter().enumerate() {
            let et = eps_tilde(prior, 1e-12).unwrap();
            for delta in [0.0, 0.5, 1.0, 1.5, 2.0] {
                let eps = et + delta;
                match build_exp_id(prior, eps) {
                    Ok(mech) => {
                        let level = identifiability_level(prior, &mech).unwrap();
                        out.residual((level - eps).abs(), || format!("level {spec} prior {i} eps={eps}"));
                        let d = distortion(prior, &mech).unwrap();
                        out.residual((d - h(&spec, eps).unwrap()).abs(), || {
                            format!("distortion {spec} prior {i} eps={eps}")
                        });
                    }
                    Err(e) => out.fail(format!("{spec} prior {i} eps={eps}: {e}")),
                }
            }
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let mut out = Outcome::new(1e-12);
    for spec in specs() {
        let prior = Prior::uniform(spec);
        out.residual(eps_x(&prior), || format!("eps_X {spec}"));
        out.residual(eps_tilde(&prior, 1e-9).unwrap(), || format!("eps_tilde {spec}"));
        for eps in [0.0, 0.1, 0.5, 1.0, 2.0, 3f64.ln()] {
            let dp = build_exp_dp(spec, eps).unwrap();
            let id = build_exp_id(&prior, eps).unwrap();
            let diff = dp.table().iter().zip(id.table()).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
            out.residual(diff, || format!("exp_id vs exp_dp {spec} eps={eps}"));
        }
        let top = spec.max_exponential_distortion();
        for k in 1..=20 {
            let d = top * k as f64 / 20.0;
            let p = theorem1_point(&prior, d).unwrap();
            let hinv = h_inv(&spec, d).unwrap();
            let exact = p.eps_i_exact.unwrap_or(f64::NAN);
            let r = [exact, p.eps_d_lower, p.eps_d_upper]
                .iter()
                .fold(0.0f64, |a, v| a.max((v - hinv).abs()));
            out.residual(r, || format!("theorem1_point {spec} D={d}"));
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let mut out = Outcome::new(1e-7);
    let mut specs = Vec::new();
    for n in 1..=6 {
        for m in 2..=64usize {
            if m.checked_pow(n as u32).is_some_and(|s| s <= 64) {
                specs.push(UniverseSpec::new(n, m).unwrap());
            }
        }
    }
    for spec in &specs {
        for eps in eps_grid() {
            let target = h(spec, eps).unwrap();
            match lp_rpd(spec, eps) {
                Ok(s) if s.status == LpStatus::Optimal => {
                    out.residual((s.objective - target).abs(), || format!("lp_rpd {spec} eps={eps}"));
                    if spec.states() <= 8 {
                        match lp_rpd_two_block(spec, eps) {
                            Ok(t) => out.residual((t.objective - s.objective).abs(), || {
                                format!("two-block {spec} eps={eps}")
                            }),
                            Err(e) => out.fail(format!("two-block {spec} eps={eps}: {e}")),
                        }
                    }
                }
                Ok(s) => out.fail(format!("lp_rpd {spec} eps={eps}: {:?}", s.status)),
                Err(e) => out.fail(format!("lp_rpd {spec} eps={eps}: {e}")),
            }
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::new(1e-7);
    for spec in specs().filter(|s| s.states() <= 27) {
        for (i, prior) in random_priors(spec, 10, 5).iter().enumerate() {
            let ex = eps_x(prior);
            for eps in eps_grid() {
                match lp_pddp(prior, eps) {
                    Ok(s) if s.status == LpStatus::Optimal => {
                        let lower = h(&spec, eps + ex).unwrap();
                        let upper = h(&spec, eps).unwrap();
                        let r = (lower - s.objective).max(s.objective - upper).max(0.0);
                        out.residual(r, || format!("{spec} prior {i} eps={eps}: {} not in [{lower}, {upper}]", s.objective));
                    }
                    Ok(s) => out.fail(format!("lp_pddp {spec} prior {i} eps={eps}: {:?}", s.status)),
                    Err(e) => out.fail(format!("lp_pddp {spec} prior {i} eps={eps}: {e}")),
                }
            }
        }
    }
    out
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::new(1e-5);
    let mut kkt = Outcome::new(1e-8);
    for spec in specs() {
        for (i, prior) in random_priors(spec, 10, 5).iter().enumerate() {
            let et = eps_tilde(prior, 1e-9).unwrap();
            let limit = h(&spec, et).unwrap();
            for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let d = limit * frac;
                let eps = h_inv(&spec, d).unwrap();
                let reference = build_exp_id(prior, eps).and_then(|m| mutual_information(prior, &m));
                match (blahut_arimoto(prior, d, 1e-9, 100_000), reference) {
                    (Ok(sol), Ok(mi)) => {
                        out.require(sol.converged, || format!("BA not converged {spec} prior {i} D={d}"));
                        out.residual((sol.mutual_information - mi).abs(), || format!("BA {spec} prior {i} D={d}"));
                    }
                    (Err(e), _) | (_, Err(e)) => out.fail(format!("{spec} prior {i} D={d}: {e}")),
                }
                match kkt_check(prior, d, 1e-9) {
                    Ok(r) => {
                        kkt.residual(r.stationarity_residual, || format!("KKT {spec} prior {i} D={d}"));
                        kkt.require(r.primal_feasible && r.dual_feasible, || {
                            format!("KKT flags {spec} prior {i} D={d}")
                        });
                        kkt.residual(r.complementary_slackness_residual, || {
                            format!("slackness {spec} prior {i} D={d}")
                        });
                    }
                    Err(e) => kkt.fail(format!("KKT {spec} prior {i} D={d}: {e}")),
                }
            }
        }
    }
    out.checks += kkt.checks;
    out.errors.extend(kkt.errors);
    out.worst = out.worst.max(kkt.worst / kkt.tol * out.tol);
    out
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new(1e-9);
    let binary = UniverseSpec::new(1, 2).unwrap();
    let hb = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
    let closed_form = 2f64.ln() - hb;
    out.residual((closed_form - 0.130812).abs() / 1e3, || "closed form value".into());
    match blahut_arimoto(&Prior::uniform(binary), 0.25, 1e-12, 100_000) {
        Ok(sol) => out.residual((sol.mutual_information - closed_form).abs(), || "BA binary anchor".into()),
        Err(e) => out.fail(format!("BA binary anchor: {e}")),
    }
    let skewed = Prior::new(binary, vec![0.6, 0.4]).unwrap();
    out.residual((eps_x(&skewed) - 1.5f64.ln()).abs(), || "eps_X".into());
    out.residual((eps_tilde(&skewed, 1e-12).unwrap() - 1.5f64.ln()).abs(), || "eps_tilde".into());
    out
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new(1e-12);
    let specs: Vec<UniverseSpec> = [(1, 2), (2, 2), (3, 2), (4, 2), (6, 2), (8, 2), (2, 3), (3, 3), (5, 3), (2, 4), (4, 4), (3, 5), (2, 16), (1, 7)]
        .iter()
        .map(|&(n, m)| UniverseSpec::new(n, m).unwrap())
        .collect();
    let mut rng = fixtures::rng(SEED ^ 8);
    let close = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()).max(1.0) };
    for k in 0..100 {
        let spec = specs[k % specs.len()];
        let prior = fixtures::random_prior(&mut rng, spec);
        let mech = fixtures::random_mechanism(&mut rng, spec);
        let (ident, dp) = oracle::brute_levels(&prior, &mech).unwrap();
        let py = output_marginal(&prior, &mech).unwrap();
        let py_oracle = oracle::brute_marginal(&prior, &mech).unwrap();
        let marginal = py.iter().zip(&py_oracle).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        let pairs = [
            ("marginal", marginal),
            ("distortion", close(distortion(&prior, &mech).unwrap(), oracle::brute_distortion(&prior, &mech).unwrap())),
            ("mi", close(mutual_information(&prior, &mech).unwrap(), oracle::brute_mutual_information(&prior, &mech).unwrap())),
            ("identifiability", close(identifiability_level(&prior, &mech).unwrap(), ident)),
            ("dp", close(dp_level(&mech), dp)),
            ("eps_X", close(eps_x(&prior), oracle::brute_eps_x(&prior))),
        ];
        for (what, r) in pairs {
            out.residual(r, || format!("{what} pair {k} {spec}"));
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let mut out = Outcome::new(0.0);
    let (compared, problems) = common::golden_round_trip(false);
    out.checks = compared;
    out.errors = problems;
    if compared == 0 {
        out.errors.push("no golden files compared".into());
    }
    out
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("exponential mechanism exactness", criterion_1),
        ("posterior-shaped mechanism exactness", criterion_2),
        ("uniform-prior collapse", criterion_3),
        ("relaxed LP optimum equals h", criterion_4),
        ("DP LP sandwich", criterion_5),
        ("Blahut-Arimoto and KKT optimality", criterion_6),
        ("closed-form anchors", criterion_7),
        ("metrics agree with oracle", criterion_8),
        ("CLI golden round-trip", criterion_9),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let ok = out.errors.is_empty();
        failures += usize::from(!ok);
        println!(
            "{} criterion {}: {name} ({} checks, worst residual {:.2e}, tol {:.0e}, {:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            out.checks,
            out.worst,
            out.tol,
            start.elapsed().as_secs_f64()
        );
        for e in out.errors.iter().take(5) {
            println!("    {e}");
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
