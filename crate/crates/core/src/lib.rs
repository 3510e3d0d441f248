//! Elicitation and estimation of the utility of chance.
//!
//! A decision maker repeatedly chooses between a sure chance `c` of the best
//! outcome and a gamble winning it with chance `p`. The choice model
//! `((1 + sgn(p - c)|p - c|^alpha) / 2)^beta` is fitted to those answers by
//! maximum likelihood or on a Bayesian grid, and the fitted indifference
//! offset `omega` maps each `c` to a utility `U(c) = c + omega`.

pub mod choice_model;
pub mod consistency;
pub mod elicitation;
pub mod estimation;
pub mod io;
mod optim;
pub mod simulator;
pub mod utility_forms;

pub use choice_model::{
    choice_prob, choice_prob_linear, choice_prob_penultimate, risk_disposition, solve_omega, utility_from_omega,
    ChoiceParams, GamblePoint, ModelError, Offset, RiskDisposition,
};
pub use consistency::{isotonic_adjust, nl_triplet_fit, pava, PointMethod, TripletGamble, UtilityPoint};
pub use elicitation::{compute_session_utilities, GambleKind, GambleSpec, NextGamble, Session, SessionError, SessionMode, SessionPlan};
pub use estimation::{
    estimate_offset, estimate_utility, fit_mle, log_likelihood, posterior_grid, solve_omega_bayes, ChoiceDataset,
    ChoiceObservation, EstimationConfig, EstimationError, EstimationMethod, GammaPrior, GridSpec, PosteriorGrid, Priors,
};
