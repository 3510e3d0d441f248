//! Probability-of-choice model for a sure chance `c` against a `p`-gamble.
//!
//! The elicitor models the probability that the decision maker takes the
//! gamble as a function of `p - c` and two parameters: `alpha`, the ability
//! to discriminate between nearby gambles (larger means coarser), and `beta`,
//! the risk attitude (`< 1` prone, `= 1` neutral, `> 1` averse).
//!
//! Three members of the family are exposed. [`choice_prob_linear`] and
//! [`choice_prob_penultimate`] are kept for comparison; [`choice_prob`] is the
//! production model and the only one defined on the whole unit square.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Values within this distance of 0 or 1 are snapped onto the boundary.
pub const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("alpha and beta must be positive and finite (got alpha={alpha}, beta={beta})")]
    InvalidParams { alpha: f64, beta: f64 },
    #[error("{name}={value} lies outside [0, 1]")]
    OutOfUnitInterval { name: &'static str, value: f64 },
    #[error("offset {0} lies outside [-1, 1]")]
    InvalidOffset(f64),
    #[error("gamble (c={c}, p={p}) is on the boundary; use choice_prob, which handles boundary rows")]
    BoundaryPoint { c: f64, p: f64 },
    #[error("(p - c)^alpha is not real for p - c = {diff} and alpha = {alpha}")]
    ComplexRoot { diff: f64, alpha: f64 },
    #[error("unknown risk disposition {0:?}")]
    UnknownDisposition(String),
}

/// Discrimination / risk pair indexing the choice model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ChoiceParams {
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawParams> for ChoiceParams {
    type Error = ModelError;
    fn try_from(raw: RawParams) -> Result<Self, ModelError> {
        ChoiceParams::new(raw.alpha, raw.beta)
    }
}

impl From<ChoiceParams> for RawParams {
    fn from(p: ChoiceParams) -> Self {
        RawParams { alpha: p.alpha, beta: p.beta }
    }
}

impl ChoiceParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(alpha) && ok(beta) {
            Ok(Self { alpha, beta })
        } else {
            Err(ModelError::InvalidParams { alpha, beta })
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// A sure chance `c` offered against a gamble that wins with chance `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GamblePoint {
    c: f64,
    p: f64,
}

impl GamblePoint {
    pub fn new(c: f64, p: f64) -> Result<Self, ModelError> {
        check_unit("c", c)?;
        check_unit("p", p)?;
        Ok(Self { c, p })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Both coordinates strictly inside (0, 1), after boundary snapping.
    pub fn is_interior(&self) -> bool {
        let (c, p) = (snap(self.c), snap(self.p));
        c > 0.0 && c < 1.0 && p > 0.0 && p < 1.0
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ModelError::OutOfUnitInterval { name, value })
    }
}

/// Indifference offset `p - c` at which the choice probability is one half.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Offset(f64);

impl Offset {
    pub const ZERO: Offset = Offset(0.0);

    pub fn new(omega: f64) -> Result<Self, ModelError> {
        if (-1.0..=1.0).contains(&omega) {
            Ok(Self(omega))
        } else {
            Err(ModelError::InvalidOffset(omega))
        }
    }

    /// Clamps into [-1, 1]; NaN maps to zero.
    pub fn saturating(omega: f64) -> Self {
        if omega.is_nan() {
            Self::ZERO
        } else {
            Self(omega.clamp(-1.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Offset {
    type Error = ModelError;
    fn try_from(v: f64) -> Result<Self, ModelError> {
        Offset::new(v)
    }
}

impl From<Offset> for f64 {
    fn from(o: Offset) -> f64 {
        o.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskDisposition {
    Prone,
    Neutral,
    Averse,
}

impl RiskDisposition {
    pub fn as_str(&self) -> &'static str {
        match self {
            RiskDisposition::Prone => "prone",
            RiskDisposition::Neutral => "neutral",
            RiskDisposition::Averse => "averse",
        }
    }
}

impl fmt::Display for RiskDisposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskDisposition {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "prone" => Ok(RiskDisposition::Prone),
            "neutral" => Ok(RiskDisposition::Neutral),
            "averse" => Ok(RiskDisposition::Averse),
            other => Err(ModelError::UnknownDisposition(other.to_string())),
        }
    }
}

/// Sign with `sgn(0) = 0`.
pub(crate) fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn snap(x: f64) -> f64 {
    if x.abs() <= BOUNDARY_EPS {
        0.0
    } else if (1.0 - x).abs() <= BOUNDARY_EPS {
        1.0
    } else {
        x
    }
}

/// `((p - c + 1) / 2)^beta`, interior points only.
pub fn choice_prob_linear(beta: f64, g: GamblePoint) -> Result<f64, ModelError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(ModelError::InvalidParams { alpha: 1.0, beta });
    }
    if !g.is_interior() {
        return Err(ModelError::BoundaryPoint { c: g.c, p: g.p });
    }
    Ok(((g.p - g.c + 1.0) / 2.0).powf(beta))
}

/// `(((p - c)^alpha + 1) / 2)^beta`, interior points only.
///
/// Undefined over the reals when `p < c` and `alpha` is not an integer, which
/// is why [`choice_prob`] replaces it.
pub fn choice_prob_penultimate(params: ChoiceParams, g: GamblePoint) -> Result<f64, ModelError> {
    if !g.is_interior() {
        return Err(ModelError::BoundaryPoint { c: g.c, p: g.p });
    }
    let diff = g.p - g.c;
    let powered = if diff >= 0.0 {
        diff.powf(params.alpha)
    } else if params.alpha.fract() == 0.0 {
        diff.powf(params.alpha)
    } else {
        return Err(ModelError::ComplexRoot { diff, alpha: params.alpha });
    };
    let base = (powered + 1.0) / 2.0;
    if base < 0.0 && params.beta.fract() != 0.0 {
        return Err(ModelError::ComplexRoot { diff, alpha: params.alpha });
    }
    Ok(base.powf(params.beta))
}

/// Interior branch of the production model as a function of `d = p - c`.
#[inline]
pub(crate) fn interior_prob(alpha: f64, beta: f64, d: f64) -> f64 {
    ((1.0 + sgn(d) * d.abs().powf(alpha)) / 2.0).powf(beta)
}

/// Production choice model, defined on the closed unit square.
///
/// Boundary rows follow rational choice: a sure loss (`p = 0`) is never
/// preferred to a positive sure chance, a sure win (`p = 1`) always beats a
/// sure chance below one, and identical certain outcomes are a coin flip.
pub fn choice_prob(params: ChoiceParams, g: GamblePoint) -> f64 {
    let (c, p) = (snap(g.c), snap(g.p));
    if p == 1.0 {
        return if c < 1.0 { 1.0 } else { 0.5 };
    }
    if p == 0.0 {
        return if c > 0.0 { 0.0 } else { 0.5 };
    }
    if c == 1.0 {
        return 0.0;
    }
    interior_prob(params.alpha, params.beta, p - c)
}

/// Closed-form offset at which [`choice_prob`] equals one half.
pub fn solve_omega(params: ChoiceParams) -> Offset {
    let s = sgn(params.beta - 1.0);
    if s == 0.0 {
        return Offset::ZERO;
    }
    let inner = s * (2f64.powf(1.0 - 1.0 / params.beta) - 1.0);
    Offset::saturating(s * inner.powf(1.0 / params.alpha))
}

/// Utility of `c` implied by offset `omega`, clamped to [0, 1].
pub fn utility_from_omega(c: f64, omega: Offset) -> f64 {
    let w = omega.value();
    if w > 0.0 {
        (c + w).min(1.0)
    } else if w < 0.0 {
        (c + w).max(0.0)
    } else {
        c
    }
}

pub fn risk_disposition(omega: Offset) -> RiskDisposition {
    match sgn(omega.value()) {
        s if s < 0.0 => RiskDisposition::Prone,
        s if s > 0.0 => RiskDisposition::Averse,
        _ => RiskDisposition::Neutral,
    }
}
