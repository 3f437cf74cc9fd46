//! Priors over the universe, mechanisms (row-stochastic channels), and the
//! Bayes-inverted posterior table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::universe::{DbIndex, UniverseSpec, DEFAULT_STATE_CAP};

/// Default comparison tolerance for probability identities.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest row-sum deviation accepted from user-supplied mechanisms.
pub const MECHANISM_INPUT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    spec: UniverseSpec,
    pmf: Vec<f64>,
}

/// Row-stochastic channel `rows[x][y] = p(y | x)` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    spec: UniverseSpec,
    rows: Vec<f64>,
}

/// `p(x | y)` for every output `y`, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    spec: UniverseSpec,
    columns: Vec<f64>,
    support: Vec<bool>,
    output: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorFile {
    pub n: usize,
    pub m: usize,
    pub pmf: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MechanismFile {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<Vec<f64>>,
}

pub(crate) fn ensure_same(a: &UniverseSpec, b: &UniverseSpec) -> Result<()> {
    if a != b {
        return Err(Error::SpecMismatch {
            left: a.to_string(),
            right: b.to_string(),
        });
    }
    Ok(())
}

fn check_entry(what: &str, i: usize, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidDistribution(format!("{what}[{i}] is not finite")));
    }
    if v < 0.0 {
        return Err(Error::InvalidDistribution(format!("{what}[{i}] = {v} is negative")));
    }
    Ok(())
}

impl Prior {
    /// Validates a pmf (length `N`, nonnegative, sums to 1 within 1e-9) and
    /// renormalizes it.
    pub fn new(spec: UniverseSpec, pmf: Vec<f64>) -> Result<Self> {
        if pmf.len() != spec.states() {
            return Err(Error::InvalidDistribution(format!(
                "pmf has length {}, expected m^n = {}",
                pmf.len(),
                spec.states()
            )));
        }
        for (i, &v) in pmf.iter().enumerate() {
            check_entry("pmf", i, v)?;
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > DEFAULT_TOL {
            return Err(Error::InvalidDistribution(format!(
                "pmf sums to {total}, expected 1"
            )));
        }
        let pmf = pmf.into_iter().map(|v| v / total).collect();
        Ok(Prior { spec, pmf })
    }

    pub fn uniform(spec: UniverseSpec) -> Self {
        let p = 1.0 / spec.states() as f64;
        Prior {
            spec,
            pmf: vec![p; spec.states()],
        }
    }

    /// Product prior with the same per-row distribution on every row.
    pub fn product(spec: UniverseSpec, row: &[f64]) -> Result<Self> {
        if row.len() != spec.m() {
            return Err(Error::InvalidDistribution(format!(
                "row distribution has length {}, expected m = {}",
                row.len(),
                spec.m()
            )));
        }
        let pmf = spec
            .indices()
            .map(|x| {
                spec.digits(x)
                    .expect("index in range")
                    .into_iter()
                    .map(|d| row[d])
                    .product()
            })
            .collect();
        Prior::new(spec, pmf)
    }

    pub fn spec(&self) -> &UniverseSpec {
        &self.spec
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, x: DbIndex) -> f64 {
        self.pmf[x.0]
    }

    pub fn has_full_support(&self) -> bool {
        self.pmf.iter().all(|&p| p > 0.0)
    }

    pub(crate) fn require_full_support(&self) -> Result<()> {
        match self.pmf.iter().position(|&p| p <= 0.0) {
            Some(state) => Err(Error::NoFullSupport { state }),
            None => Ok(()),
        }
    }

    /// True when every entry is within `tol` of `1/N`.
    pub fn is_uniform(&self, tol: f64) -> bool {
        let u = 1.0 / self.spec.states() as f64;
        self.pmf.iter().all(|&p| (p - u).abs() <= tol)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .pmf
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    pub fn from_file(file: PriorFile, cap: usize) -> Result<Self> {
        let spec = UniverseSpec::with_cap(file.n, file.m, cap)?;
        Prior::new(spec, file.pmf)
    }

    pub fn to_file(&self) -> PriorFile {
        PriorFile {
            n: self.spec.n(),
            m: self.spec.m(),
            pmf: self.pmf.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with_cap(text, DEFAULT_STATE_CAP)
    }

    pub fn from_json_with_cap(text: &str, cap: usize) -> Result<Self> {
        let file: PriorFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Prior::from_file(file, cap)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("prior serializes")
    }
}

impl Mechanism {
    /// Builds a mechanism from user-supplied rows.
    ///
    /// Rows deviating from unit sum by more than 1e-6 are rejected; the rest
    /// are divided by their sums.
    pub fn new(spec: UniverseSpec, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = spec.states();
        if rows.len() != n {
            return Err(Error::InvalidDistribution(format!(
                "mechanism has {} rows, expected m^n = {n}",
                rows.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidDistribution(format!(
                    "rows[{x}] has length {}, expected {n}",
                    row.len()
                )));
            }
            flat.extend(row);
        }
        Self::from_flat(spec, flat)
    }

    /// Same as [`Mechanism::new`] for an already flattened row-major table.
    pub fn from_flat(spec: UniverseSpec, mut rows: Vec<f64>) -> Result<Self> {
        let n = spec.states();
        if rows.len() != n * n {
            return Err(Error::InvalidDistribution(format!(
                "mechanism table has {} entries, expected {}",
                rows.len(),
                n * n
            )));
        }
        for (x, row) in rows.chunks_mut(n).enumerate() {
            for (y, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "rows[{x}][{y}] = {v} is not a probability"
                    )));
                }
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > MECHANISM_INPUT_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "rows[{x}] sums to {total}, expected 1"
                )));
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Mechanism { spec, rows })
    }

    /// Wraps a table produced by a closed-form construction. Entries are kept
    /// as computed; row sums must already be 1 within `DEFAULT_TOL`.
    pub(crate) fn from_closed_form(spec: UniverseSpec, rows: Vec<f64>) -> Result<Self> {
        let n = spec.states();
        debug_assert_eq!(rows.len(), n * n);
        for (x, row) in rows.chunks(n).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || (total - 1.0).abs() > DEFAULT_TOL {
                return Err(Error::InvalidDistribution(format!(
                    "constructed row {x} sums to {total}"
                )));
            }
        }
        Ok(Mechanism { spec, rows })
    }

    pub fn spec(&self) -> &UniverseSpec {
        &self.spec
    }

    pub fn prob(&self, x: DbIndex, y: DbIndex) -> f64 {
        self.rows[x.0 * self.spec.states() + y.0]
    }

    pub fn row(&self, x: DbIndex) -> &[f64] {
        let n = self.spec.states();
        &self.rows[x.0 * n..(x.0 + 1) * n]
    }

    /// Row-major view of the full table.
    pub fn table(&self) -> &[f64] {
        &self.rows
    }

    /// Pointwise `weight * a + (1 - weight) * b`.
    pub fn mix(a: &Mechanism, b: &Mechanism, weight: f64) -> Result<Mechanism> {
        ensure_same(&a.spec, &b.spec)?;
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::OutOfRange(format!("mixing weight {weight}")));
        }
        let rows = a
            .rows
            .iter()
            .zip(&b.rows)
            .map(|(&p, &q)| weight * p + (1.0 - weight) * q)
            .collect();
        Mechanism::from_flat(a.spec, rows)
    }

    pub fn from_file(file: MechanismFile, cap: usize) -> Result<Self> {
        let spec = UniverseSpec::with_cap(file.n, file.m, cap)?;
        Mechanism::new(spec, file.rows)
    }

    pub fn to_file(&self) -> MechanismFile {
        let n = self.spec.states();
        MechanismFile {
            n: self.spec.n(),
            m: self.spec.m(),
            rows: self.rows.chunks(n).map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MechanismFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Mechanism::from_file(file, DEFAULT_STATE_CAP)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("mechanism serializes")
    }
}

impl PosteriorTable {
    pub fn spec(&self) -> &UniverseSpec {
        &self.spec
    }

    /// `p(. | y)`, or `None` when `y` never occurs.
    pub fn column(&self, y: DbIndex) -> Option<&[f64]> {
        if !self.support[y.0] {
            return None;
        }
        let n = self.spec.states();
        Some(&self.columns[y.0 * n..(y.0 + 1) * n])
    }

    pub fn is_supported(&self, y: DbIndex) -> bool {
        self.support[y.0]
    }

    pub fn output_marginal(&self) -> &[f64] {
        &self.output
    }
}

/// Distribution of the released database, `p_Y(y) = sum_x p_X(x) p(y|x)`.
pub fn output_marginal(prior: &Prior, mech: &Mechanism) -> Result<Vec<f64>> {
    ensure_same(&prior.spec, &mech.spec)?;
    let n = prior.spec.states();
    let mut out = vec![0.0; n];
    for (row, &px) in mech.rows.chunks(n).zip(&prior.pmf) {
        if px == 0.0 {
            continue;
        }
        for (o, &p) in out.iter_mut().zip(row) {
            *o += px * p;
        }
    }
    Ok(out)
}

/// Bayes inversion of `mech` under `prior`.
pub fn posterior(prior: &Prior, mech: &Mechanism) -> Result<PosteriorTable> {
    let output = output_marginal(prior, mech)?;
    let n = prior.spec.states();
    let mut columns = vec![0.0; n * n];
    let support: Vec<bool> = output.iter().map(|&p| p > 0.0).collect();
    for y in 0..n {
        if !support[y] {
            continue;
        }
        let col = &mut columns[y * n..(y + 1) * n];
        for (x, c) in col.iter_mut().enumerate() {
            *c = prior.pmf[x] * mech.rows[x * n + y] / output[y];
        }
    }
    Ok(PosteriorTable {
        spec: prior.spec,
        columns,
        support,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> UniverseSpec {
        UniverseSpec::new(1, 2).unwrap()
    }

    fn identity(spec: UniverseSpec) -> Mechanism {
        let n = spec.states();
        let rows = (0..n)
            .map(|x| (0..n).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
            .collect();
        Mechanism::new(spec, rows).unwrap()
    }

    #[test]
    fn prior_validation() {
        let s = binary();
        assert!(Prior::new(s, vec![0.5]).is_err());
        assert!(Prior::new(s, vec![1.5, -0.5]).is_err());
        assert!(Prior::new(s, vec![0.5, 0.6]).is_err());
        assert!(Prior::new(s, vec![f64::NAN, 1.0]).is_err());
        let p = Prior::new(s, vec![0.6, 0.4 + 1e-12]).unwrap();
        assert!((p.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mechanism_validation() {
        let s = binary();
        assert!(Mechanism::new(s, vec![vec![1.0, 0.0]]).is_err());
        assert!(Mechanism::new(s, vec![vec![0.9, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(Mechanism::new(s, vec![vec![1.1, -0.1], vec![0.0, 1.0]]).is_err());
        let m = Mechanism::new(s, vec![vec![0.7, 0.3 + 5e-7], vec![0.0, 1.0]]).unwrap();
        assert!((m.row(DbIndex(0)).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn marginal_examples() {
        let s = binary();
        let prior = Prior::new(s, vec![0.6, 0.4]).unwrap();
        let id = identity(s);
        assert_eq!(output_marginal(&prior, &id).unwrap(), vec![0.6, 0.4]);

        let flat = Mechanism::new(s, vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(output_marginal(&prior, &flat).unwrap(), vec![0.5, 0.5]);

        let flip = Mechanism::new(s, vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
        let py = output_marginal(&prior, &flip).unwrap();
        assert!((py[0] - 0.55).abs() < 1e-15 && (py[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn posterior_examples() {
        let s = UniverseSpec::new(2, 2).unwrap();
        let prior = Prior::new(s, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let post = posterior(&prior, &identity(s)).unwrap();
        for y in s.indices() {
            let col = post.column(y).unwrap();
            for x in s.indices() {
                assert_eq!(col[x.0], if x == y { 1.0 } else { 0.0 });
            }
        }

        let q = vec![0.25; 4];
        let indep = Mechanism::new(s, vec![q.clone(); 4]).unwrap();
        let post = posterior(&prior, &indep).unwrap();
        for y in s.indices() {
            let col = post.column(y).unwrap();
            for x in s.indices() {
                assert!((col[x.0] - prior.prob(x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unsupported_outputs_are_absent() {
        let s = binary();
        let prior = Prior::new(s, vec![0.3, 0.7]).unwrap();
        let always_zero = Mechanism::new(s, vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let post = posterior(&prior, &always_zero).unwrap();
        assert!(post.column(DbIndex(1)).is_none());
        assert!(post.column(DbIndex(0)).is_some());
    }

    #[test]
    fn spec_mismatch() {
        let prior = Prior::uniform(binary());
        let other = identity(UniverseSpec::new(2, 2).unwrap());
        assert!(matches!(
            output_marginal(&prior, &other),
            Err(Error::SpecMismatch { .. })
        ));
    }

    #[test]
    fn json_formats() {
        let p = Prior::from_json(r#"{"n":1,"m":2,"pmf":[0.6,0.4]}"#).unwrap();
        assert_eq!(p.pmf(), &[0.6, 0.4]);
        assert!(Prior::from_json(r#"{"n":1,"m":2,"pmf":[0.6,0.3,0.1]}"#).is_err());
        let m = Mechanism::from_json(r#"{"n":1,"m":2,"rows":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(m.to_json(), r#"{"n":1,"m":2,"rows":[[1.0,0.0],[0.0,1.0]]}"#);
    }
}
