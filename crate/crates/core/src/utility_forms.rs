//! Closed-form utilities of reliability and the expected-utility decision rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormsError {
    #[error("reliability {0} lies outside [0, 1]")]
    Reliability(f64),
    #[error("{name} must be positive and finite (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("action {action}: {reason}")]
    BadAction { action: usize, reason: String },
    #[error("decision problem has no actions")]
    NoActions,
    #[error("action index {0} out of range")]
    UnknownAction(usize),
    #[error("prior weights sum to {0}, not 1")]
    UnnormalizedPrior(f64),
    #[error("prior weight {0} is negative or not finite")]
    BadPriorWeight(f64),
    #[error("survival function returned {value} at theta={theta}")]
    BadSurvival { theta: f64, value: f64 },
}

/// Reliability at a mission time together with the shape parameters of the
/// archetypal utility and the cost disutility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityContext {
    pub fbar: f64,
    pub x: f64,
    pub beta_u: f64,
    pub delta: f64,
}

impl ReliabilityContext {
    pub fn new(fbar: f64, x: f64, beta_u: f64, delta: f64) -> Result<Self, FormsError> {
        let ctx = Self { fbar, x, beta_u, delta };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), FormsError> {
        if !(0.0..=1.0).contains(&self.fbar) {
            return Err(FormsError::Reliability(self.fbar));
        }
        for (name, value) in [("x", self.x), ("beta_u", self.beta_u), ("delta", self.delta)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(FormsError::NonPositive { name, value });
            }
        }
        Ok(())
    }

    pub fn with_fbar(&self, fbar: f64) -> Result<Self, FormsError> {
        Self::new(fbar, self.x, self.beta_u, self.delta)
    }
}

/// `fbar^(beta_u / x)`. Risk neutral exactly when `beta_u == x`.
pub fn archetypal_utility(ctx: &ReliabilityContext) -> f64 {
    if ctx.fbar == 0.0 {
        return 0.0;
    }
    ctx.fbar.powf(ctx.beta_u / ctx.x)
}

/// A value that may have hit its limiting case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturating {
    pub value: f64,
    /// Set when `fbar = 1`, where the cost of reliability diverges.
    pub saturated: bool,
}

/// `1 - exp(-delta * fbar / (1 - fbar))`; at `fbar = 1` returns the limit 1
/// with the saturation flag set.
pub fn cost_disutility(ctx: &ReliabilityContext) -> Saturating {
    if ctx.fbar >= 1.0 {
        return Saturating { value: 1.0, saturated: true };
    }
    let value = -(-ctx.delta * ctx.fbar / (1.0 - ctx.fbar)).exp_m1();
    Saturating { value, saturated: false }
}

/// Archetypal utility net of the cost disutility; may be negative.
pub fn omnibus_utility(ctx: &ReliabilityContext) -> Saturating {
    let cost = cost_disutility(ctx);
    Saturating { value: archetypal_utility(ctx) - cost.value, saturated: cost.saturated }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub probability: f64,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub label: String,
    pub outcomes: Vec<Outcome>,
}

/// Mutually exclusive actions, each with its own outcome distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionProblem {
    actions: Vec<Action>,
}

impl DecisionProblem {
    pub fn new(actions: Vec<Action>) -> Result<Self, FormsError> {
        if actions.is_empty() {
            return Err(FormsError::NoActions);
        }
        for (idx, a) in actions.iter().enumerate() {
            let bad = |reason: String| FormsError::BadAction { action: idx, reason };
            if a.outcomes.is_empty() {
                return Err(bad("no outcomes".into()));
            }
            let mut total = 0.0;
            for o in &a.outcomes {
                if !(o.probability.is_finite() && o.probability >= 0.0) {
                    return Err(bad(format!("probability {} is negative", o.probability)));
                }
                if !(0.0..=1.0).contains(&o.utility) {
                    return Err(bad(format!("utility {} outside [0, 1]", o.utility)));
                }
                total += o.probability;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(bad(format!("probabilities sum to {total}")));
            }
        }
        Ok(Self { actions })
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }
}

pub fn expected_utility(problem: &DecisionProblem, action: usize) -> Result<f64, FormsError> {
    let a = problem.actions.get(action).ok_or(FormsError::UnknownAction(action))?;
    Ok(a.outcomes.iter().map(|o| o.utility * o.probability).sum())
}

/// Index of the action with maximal expected utility; ties go to the lowest index.
pub fn best_action(problem: &DecisionProblem) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for idx in 0..problem.actions.len() {
        let eu = expected_utility(problem, idx).expect("index in range");
        if eu > best.1 {
            best = (idx, eu);
        }
    }
    best.0
}

/// Personal survival probability: the survival function averaged over a
/// discrete prior on its parameter. `prior` holds `(theta, weight)` pairs
/// whose weights must sum to one.
pub fn survivability<F>(fbar_of_theta: F, prior: &[(f64, f64)]) -> Result<f64, FormsError>
where
    F: Fn(f64) -> f64,
{
    let mut total = 0.0;
    for &(_, w) in prior {
        if !(w.is_finite() && w >= 0.0) {
            return Err(FormsError::BadPriorWeight(w));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(FormsError::UnnormalizedPrior(total));
    }
    let mut acc = 0.0;
    for &(theta, w) in prior {
        let value = fbar_of_theta(theta);
        if !(0.0..=1.0).contains(&value) {
            return Err(FormsError::BadSurvival { theta, value });
        }
        acc += w * value;
    }
    Ok(acc.clamp(0.0, 1.0))
}

/// One row of the utility-form curve table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormRow {
    pub fbar: f64,
    pub utility: f64,
    pub disutility: f64,
    pub omnibus: f64,
}

/// Evaluates the three forms over a caller-supplied reliability lattice.
pub fn form_curve(template: &ReliabilityContext, lattice: &[f64]) -> Result<Vec<FormRow>, FormsError> {
    lattice
        .iter()
        .map(|&fbar| {
            let ctx = template.with_fbar(fbar)?;
            Ok(FormRow {
                fbar,
                utility: archetypal_utility(&ctx),
                disutility: cost_disutility(&ctx).value,
                omnibus: omnibus_utility(&ctx).value,
            })
        })
        .collect()
}
