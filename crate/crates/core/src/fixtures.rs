//! Seeded random priors and mechanisms for checks and tests.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::model::{Mechanism, Prior};
use crate::universe::UniverseSpec;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from the probability simplex over `len` points.
pub fn random_simplex<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// Full-support prior drawn uniformly from the simplex.
pub fn random_prior<R: Rng>(rng: &mut R, spec: UniverseSpec) -> Prior {
    Prior::new(spec, random_simplex(rng, spec.states())).expect("simplex draw is a pmf")
}

/// Mechanism with independent simplex rows.
pub fn random_mechanism<R: Rng>(rng: &mut R, spec: UniverseSpec) -> Mechanism {
    let n = spec.states();
    let mut rows = Vec::with_capacity(n * n);
    for _ in 0..n {
        rows.extend(random_simplex(rng, n));
    }
    Mechanism::from_flat(spec, rows).expect("simplex rows are stochastic")
}
