//! Exact measurement of privacy levels and distortion for a given prior and
//! mechanism. All levels are in nats.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ensure_same, output_marginal, Mechanism, Prior};

/// Measured privacy of one (prior, mechanism) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    #[serde(with = "inf_as_string")]
    pub identifiability_level: f64,
    #[serde(with = "inf_as_string")]
    pub dp_level: f64,
    pub mutual_information: f64,
    pub distortion: f64,
    #[serde(rename = "eps_X", with = "inf_as_string")]
    pub eps_x: f64,
    /// Outputs with zero probability, excluded from the identifiability scan.
    pub unsupported_outputs: usize,
}

/// Serializes `+inf` as the string `"inf"`.
pub mod inf_as_string {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct LevelVisitor;
        impl Visitor<'_> for LevelVisitor {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(LevelVisitor)
    }
}

/// Log-ratio `ln(a/b)` with the zero conventions used by every level:
/// `0/0` is skipped (`None`), positive over zero is `+inf`.
fn log_ratio(a: f64, b: f64) -> Option<f64> {
    match (a > 0.0, b > 0.0) {
        (false, _) => None,
        (true, false) => Some(f64::INFINITY),
        (true, true) => Some((a / b).ln()),
    }
}

/// Expected Hamming distance between input and output.
pub fn distortion(prior: &Prior, mech: &Mechanism) -> Result<f64> {
    ensure_same(prior.spec(), mech.spec())?;
    let spec = prior.spec();
    let n = spec.states();
    let mut total = 0.0;
    for (x, &px) in prior.pmf().iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let row = &mech.table()[x * n..(x + 1) * n];
        let mut acc = 0.0;
        for (y, &p) in row.iter().enumerate() {
            if p != 0.0 {
                acc += p * spec.hamming_unchecked(x, y) as f64;
            }
        }
        total += px * acc;
    }
    Ok(total)
}

/// Smallest `eps` such that `p(y|x) <= e^eps p(y|x')` for all neighbors.
pub fn dp_level(mech: &Mechanism) -> f64 {
    let spec = mech.spec();
    let n = spec.states();
    let table = mech.table();
    let mut level: f64 = 0.0;
    for x in 0..n {
        let row = &table[x * n..(x + 1) * n];
        for xp in spec.neighbors_unchecked(x) {
            let other = &table[xp * n..(xp + 1) * n];
            for (&a, &b) in row.iter().zip(other) {
                if let Some(r) = log_ratio(a, b) {
                    if r > level {
                        level = r;
                        if level.is_infinite() {
                            return level;
                        }
                    }
                }
            }
        }
    }
    level
}

/// Smallest `eps` such that `p(x|y) <= e^eps p(x'|y)` for all neighbors and
/// every output `y` that occurs with positive probability.
///
/// The posterior ratio is evaluated on the joint `p_X(x) p(y|x)`, so the
/// output marginal cancels.
pub fn identifiability_level(prior: &Prior, mech: &Mechanism) -> Result<f64> {
    Ok(identifiability_scan(prior, mech)?.0)
}

fn identifiability_scan(prior: &Prior, mech: &Mechanism) -> Result<(f64, usize)> {
    let py = output_marginal(prior, mech)?;
    let spec = prior.spec();
    let n = spec.states();
    let table = mech.table();
    let pmf = prior.pmf();
    let unsupported = py.iter().filter(|&&p| p <= 0.0).count();
    let mut level: f64 = 0.0;
    for x in 0..n {
        for xp in spec.neighbors_unchecked(x) {
            for y in 0..n {
                if py[y] <= 0.0 {
                    continue;
                }
                let a = pmf[x] * table[x * n + y];
                let b = pmf[xp] * table[xp * n + y];
                if let Some(r) = log_ratio(a, b) {
                    if r > level {
                        level = r;
                        if level.is_infinite() {
                            return Ok((level, unsupported));
                        }
                    }
                }
            }
        }
    }
    Ok((level, unsupported))
}

/// `I(X;Y)` in nats.
pub fn mutual_information(prior: &Prior, mech: &Mechanism) -> Result<f64> {
    let py = output_marginal(prior, mech)?;
    let n = prior.spec().states();
    let table = mech.table();
    let mut total = 0.0;
    for (x, &px) in prior.pmf().iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let row = &table[x * n..(x + 1) * n];
        let mut acc = 0.0;
        for (&p, &q) in row.iter().zip(&py) {
            if p > 0.0 {
                acc += p * (p / q).ln();
            }
        }
        total += px * acc;
    }
    Ok(total.max(0.0))
}

/// Largest log prior ratio between neighboring databases.
pub fn eps_x(prior: &Prior) -> f64 {
    let spec = prior.spec();
    let pmf = prior.pmf();
    let mut level = f64::NEG_INFINITY;
    for x in 0..spec.states() {
        for xp in spec.neighbors_unchecked(x) {
            if let Some(r) = log_ratio(pmf[x], pmf[xp]) {
                level = level.max(r);
            }
        }
    }
    // Every neighbor pair contributes both directions, so the max is >= 0
    // whenever any pair was compared.
    level.max(0.0)
}

pub fn report(prior: &Prior, mech: &Mechanism) -> Result<PrivacyReport> {
    let (identifiability_level, unsupported_outputs) = identifiability_scan(prior, mech)?;
    Ok(PrivacyReport {
        identifiability_level,
        dp_level: dp_level(mech),
        mutual_information: mutual_information(prior, mech)?,
        distortion: distortion(prior, mech)?,
        eps_x: eps_x(prior),
        unsupported_outputs,
    })
}
