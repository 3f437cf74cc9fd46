//! The distortion curve `h(eps) = n / (1 + e^eps / (m-1))`, its inverse, and
//! the resulting bounds on the best identifiability and differential privacy
//! levels at a distortion budget `D`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{build_exp_dp, build_exp_id, eps_tilde, EPS_TILDE_TOL};
use crate::metrics::{dp_level, eps_x, identifiability_level, mutual_information};
use crate::model::Prior;
use crate::universe::UniverseSpec;

/// Header of the sweep CSV.
/// `eps_tilde` is bisected to 1e-9, so the exact-region boundary carries the
/// same uncertainty.
const EXACT_REGION_SLACK: f64 = 1e-9;

pub const CSV_HEADER: &str = "D,regime,eps_i_lower,eps_i_exact,eps_d_lower,eps_d_upper,eps_i_measured,eps_d_measured,mi_measured";

/// Slack allowed on the upper end of `h_inv`'s domain.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `D <= h(eps_tilde)`: the identifiability optimum is known exactly.
    ExactRegion,
    /// `D > h(eps_tilde)`: only a lower bound is known.
    BoundRegion,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::ExactRegion => "exact_region",
            Regime::BoundRegion => "bound_region",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(rename = "D")]
    pub d: f64,
    pub regime: Regime,
    pub eps_i_lower: f64,
    pub eps_i_exact: Option<f64>,
    pub eps_d_lower: f64,
    pub eps_d_upper: f64,
}

/// A curve point plus the levels measured on the two constructed mechanisms
/// at the same distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub point: CurvePoint,
    pub eps_i_measured: Option<f64>,
    pub eps_d_measured: f64,
    pub mi_measured: Option<f64>,
}

/// Prior-dependent constants shared by every point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveContext {
    pub spec: UniverseSpec,
    pub eps_x: f64,
    pub eps_tilde: f64,
    /// `h(eps_tilde)`, the right end of the exact region.
    pub exact_limit: f64,
}

pub fn h(spec: &UniverseSpec, eps: f64) -> Result<f64> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::OutOfRange(format!("h needs eps >= 0, got {eps}")));
    }
    Ok(spec.n() as f64 / (1.0 + eps.exp() / (spec.m() - 1) as f64))
}

/// `ln(n/D - 1) + ln(m-1)` on `0 < D <= n(m-1)/m`.
pub fn h_inv(spec: &UniverseSpec, d: f64) -> Result<f64> {
    let n = spec.n() as f64;
    let limit = spec.max_exponential_distortion();
    if !(d > 0.0) || d > limit + DOMAIN_SLACK || d >= n {
        return Err(Error::OutOfRange(format!(
            "h_inv needs 0 < D <= {limit}, got {d}"
        )));
    }
    let v = ((n - d) * (spec.m() - 1) as f64 / d).ln();
    Ok(v.max(0.0))
}

/// `max(h_inv(D), 0)`, extended by 0 beyond `n(m-1)/m`.
pub fn h_inv_clamped(spec: &UniverseSpec, d: f64) -> Result<f64> {
    if d > spec.max_exponential_distortion() + DOMAIN_SLACK && d <= spec.n() as f64 {
        return Ok(0.0);
    }
    h_inv(spec, d)
}

impl CurveContext {
    pub fn new(prior: &Prior) -> Result<Self> {
        let ex = eps_x(prior);
        if ex.is_infinite() {
            return Err(Error::NoFullSupport {
                state: prior.pmf().iter().position(|&p| p == 0.0).unwrap_or(0),
            });
        }
        let et = eps_tilde(prior, EPS_TILDE_TOL)?;
        Ok(CurveContext {
            spec: *prior.spec(),
            eps_x: ex,
            eps_tilde: et,
            exact_limit: h(prior.spec(), et)?,
        })
    }

    pub fn point(&self, d: f64) -> Result<CurvePoint> {
        let n = self.spec.n() as f64;
        if !(d > 0.0) || d > n {
            return Err(Error::OutOfRange(format!("D must lie in (0, {n}], got {d}")));
        }
        let hinv = h_inv_clamped(&self.spec, d)?;
        let eps_d_lower = (hinv - self.eps_x).max(0.0);
        if d <= self.exact_limit + EXACT_REGION_SLACK {
            Ok(CurvePoint {
                d,
                regime: Regime::ExactRegion,
                eps_i_lower: hinv,
                eps_i_exact: Some(hinv),
                eps_d_lower,
                eps_d_upper: hinv,
            })
        } else {
            Ok(CurvePoint {
                d,
                regime: Regime::BoundRegion,
                eps_i_lower: hinv.max(self.eps_x),
                eps_i_exact: None,
                eps_d_lower,
                eps_d_upper: hinv,
            })
        }
    }
}

/// Bounds on the optimal identifiability and DP levels at distortion `d`.
pub fn theorem1_point(prior: &Prior, d: f64) -> Result<CurvePoint> {
    CurveContext::new(prior)?.point(d)
}

/// Curve point at `d` plus the levels measured on the constructed mechanisms.
pub fn sweep_row(ctx: &CurveContext, prior: &Prior, d: f64) -> Result<SweepRow> {
    let point = ctx.point(d)?;
    let exp_dp = build_exp_dp(ctx.spec, point.eps_d_upper)?;
    let eps_d_measured = dp_level(&exp_dp);
    let (eps_i_measured, mi_measured) = match point.eps_i_exact {
        Some(eps) => match build_exp_id(prior, eps) {
            Ok(mech) => (
                Some(identifiability_level(prior, &mech)?),
                Some(mutual_information(prior, &mech)?),
            ),
            Err(_) => (None, None),
        },
        None => (None, None),
    };
    Ok(SweepRow {
        point,
        eps_i_measured,
        eps_d_measured,
        mi_measured,
    })
}

/// One row per grid entry, in grid order.
pub fn sweep(prior: &Prior, grid: &[f64]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    let ctx = CurveContext::new(prior)?;
    grid.iter().map(|&d| sweep_row(&ctx, prior, d)).collect()
}

/// `START:STOP:STEP`, inclusive of `STOP` up to rounding.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(Error::Parse(format!("grid must be START:STOP:STEP, got {text:?}")));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad grid number {s:?}")))
    };
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Parse(format!("invalid grid {text:?}")));
    }
    if stop < start {
        return Ok(Vec::new());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // Points are rounded to the decimal places written in the grid so that
    // 0:1:0.05 yields 0.15 rather than 0.15000000000000002.
    let places = parts
        .iter()
        .map(|p| decimal_places(p))
        .collect::<Option<Vec<_>>>()
        .and_then(|v| v.into_iter().max());
    let mut grid: Vec<f64> = (0..count)
        .map(|k| {
            let v = start + k as f64 * step;
            match places {
                Some(dp) => format!("{v:.dp$}").parse().unwrap_or(v),
                None => v,
            }
        })
        .collect();
    if let Some(last) = grid.last_mut() {
        if (*last - stop).abs() <= 1e-9 * stop.abs().max(1.0) {
            *last = stop;
        }
    }
    Ok(grid)
}

/// Digits after the decimal point of a plain decimal literal; `None` for
/// exponent notation.
fn decimal_places(text: &str) -> Option<usize> {
    let t = text.trim();
    if t.contains(['e', 'E']) {
        return None;
    }
    Some(t.split_once('.').map_or(0, |(_, frac)| frac.len()))
}

/// Shortest round-trip decimal; `inf` for infinity.
pub fn format_number(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        ryu::Buffer::new().format(v).to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

pub fn write_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let p = &r.point;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            format_number(p.d),
            p.regime.as_str(),
            format_number(p.eps_i_lower),
            opt(p.eps_i_exact),
            format_number(p.eps_d_lower),
            format_number(p.eps_d_upper),
            opt(r.eps_i_measured),
            format_number(r.eps_d_measured),
            opt(r.mi_measured),
        );
    }
    out
}
