//! Fitting the choice model to one sure value's binary answers.
//!
//! Two routes are provided. Maximum likelihood runs a coarse log-spaced scan
//! followed by a bounded simplex search; the Bayesian route evaluates the
//! posterior under independent gamma priors on a log-spaced node grid and
//! finds the offset at which the posterior-averaged choice probability is one
//! half. Answers at one sure value are conditionally independent given the
//! parameters, so the likelihood is a product over answers and is evaluated
//! on per-`p` tallies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Gamma};
use thiserror::Error;

use crate::choice_model::{
    interior_prob, risk_disposition, sgn, solve_omega, ChoiceParams, ModelError, Offset,
    BOUNDARY_EPS,
};
use crate::consistency::{PointMethod, UtilityPoint};
use crate::optim;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("dataset has no observations")]
    EmptyDataset,
    #[error("observation at c={found} does not share the dataset's sure value c={expected}")]
    MixedSureValues { expected: f64, found: f64 },
    #[error("observation (c={c}, p={p}) is not strictly inside (0, 1)")]
    NonInterior { c: f64, p: f64 },
    #[error("gamma prior needs positive shape and rate (got shape={shape}, rate={rate})")]
    InvalidPrior { shape: f64, rate: f64 },
    #[error("invalid parameter box: {0}")]
    InvalidBox(String),
    #[error("invalid posterior grid: {0}")]
    InvalidGrid(String),
    #[error("posterior-averaged choice probability has no half crossing on [-1, 1]")]
    NoRoot,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One binary answer: `y = true` when the gamble was chosen over the sure `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceObservation {
    pub c: f64,
    pub p: f64,
    #[serde(with = "binary_flag")]
    pub y: bool,
}

mod binary_flag {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(y: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*y))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(de::Error::custom(format!("y must be 0 or 1, got {other}"))),
        }
    }
}

impl ChoiceObservation {
    pub fn new(c: f64, p: f64, y: bool) -> Result<Self, EstimationError> {
        let interior = |v: f64| v > BOUNDARY_EPS && v < 1.0 - BOUNDARY_EPS;
        if interior(c) && interior(p) {
            Ok(Self { c, p, y })
        } else {
            Err(EstimationError::NonInterior { c, p })
        }
    }
}

/// All answers elicited at a single sure value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceDataset {
    c: f64,
    observations: Vec<ChoiceObservation>,
}

/// Count of gamble / sure answers at one gamble chance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Tally {
    pub diff: f64,
    pub chose_gamble: u32,
    pub chose_sure: u32,
}

impl ChoiceDataset {
    pub fn new(c: f64, observations: Vec<ChoiceObservation>) -> Result<Self, EstimationError> {
        if observations.is_empty() {
            return Err(EstimationError::EmptyDataset);
        }
        for o in &observations {
            ChoiceObservation::new(o.c, o.p, o.y)?;
            if o.c != c {
                return Err(EstimationError::MixedSureValues { expected: c, found: o.c });
            }
        }
        Ok(Self { c, observations })
    }

    /// Splits a flat observation list into one dataset per distinct `c`,
    /// ordered by increasing `c`; input order is kept within each group.
    pub fn group_by_c(observations: &[ChoiceObservation]) -> Result<Vec<Self>, EstimationError> {
        if observations.is_empty() {
            return Err(EstimationError::EmptyDataset);
        }
        let mut cs: Vec<f64> = observations.iter().map(|o| o.c).collect();
        cs.sort_by(f64::total_cmp);
        cs.dedup();
        cs.into_iter()
            .map(|c| {
                let obs = observations.iter().copied().filter(|o| o.c == c).collect();
                Self::new(c, obs)
            })
            .collect()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn observations(&self) -> &[ChoiceObservation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Appends another dataset's answers; both must share `c`.
    pub fn concat(&self, other: &ChoiceDataset) -> Result<Self, EstimationError> {
        let mut obs = self.observations.clone();
        obs.extend_from_slice(&other.observations);
        Self::new(self.c, obs)
    }

    pub(crate) fn tallies(&self) -> Vec<Tally> {
        let mut out: Vec<(f64, Tally)> = Vec::new();
        for o in &self.observations {
            let slot = match out.iter_mut().find(|(p, _)| *p == o.p) {
                Some((_, t)) => t,
                None => {
                    out.push((o.p, Tally { diff: o.p - self.c, chose_gamble: 0, chose_sure: 0 }));
                    &mut out.last_mut().unwrap().1
                }
            };
            if o.y {
                slot.chose_gamble += 1;
            } else {
                slot.chose_sure += 1;
            }
        }
        out.into_iter().map(|(_, t)| t).collect()
    }
}

/// `ln P(Y=1)` and `ln P(Y=0)` at an interior point.
#[inline]
fn log_probs(alpha: f64, beta: f64, diff: f64) -> (f64, f64) {
    let t = diff.abs().powf(alpha);
    let log_pi = beta * ((sgn(diff) * t - 1.0) / 2.0).ln_1p();
    let log_not = if log_pi == f64::NEG_INFINITY { 0.0 } else { (-log_pi.exp_m1()).ln() };
    (log_pi, log_not)
}

fn tally_log_likelihood(alpha: f64, beta: f64, tallies: &[Tally]) -> f64 {
    let mut total = 0.0;
    for t in tallies {
        let (log_pi, log_not) = log_probs(alpha, beta, t.diff);
        if t.chose_gamble > 0 {
            total += t.chose_gamble as f64 * log_pi;
        }
        if t.chose_sure > 0 {
            total += t.chose_sure as f64 * log_not;
        }
    }
    total
}

/// Bernoulli log-likelihood of the answers under `params`.
///
/// Returns `f64::NEG_INFINITY` when an answer was observed whose modelled
/// probability is exactly zero.
pub fn log_likelihood(params: ChoiceParams, data: &ChoiceDataset) -> f64 {
    tally_log_likelihood(params.alpha(), params.beta(), &data.tallies())
}

/// Analytic gradient of [`log_likelihood`] with respect to `(alpha, beta)`.
pub fn log_likelihood_gradient(params: ChoiceParams, data: &ChoiceDataset) -> [f64; 2] {
    let (alpha, beta) = (params.alpha(), params.beta());
    let mut grad = [0.0, 0.0];
    for t in data.tallies() {
        let s = sgn(t.diff);
        let a = t.diff.abs();
        let pw = a.powf(alpha);
        let base = (1.0 + s * pw) / 2.0;
        let d_alpha = if s == 0.0 { 0.0 } else { beta * s * pw * a.ln() / (1.0 + s * pw) };
        let d_beta = base.ln();
        let pi = base.powf(beta);
        let n1 = t.chose_gamble as f64;
        let n0 = t.chose_sure as f64;
        let odds = pi / (1.0 - pi);
        grad[0] += n1 * d_alpha - n0 * odds * d_alpha;
        grad[1] += n1 * d_beta - n0 * odds * d_beta;
    }
    grad
}

/// Rectangular search region for the maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
}

impl Default for ParamBox {
    fn default() -> Self {
        Self { alpha: (0.05, 20.0), beta: (0.05, 20.0) }
    }
}

impl ParamBox {
    pub fn validate(&self) -> Result<(), EstimationError> {
        for (name, (lo, hi)) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                return Err(EstimationError::InvalidBox(format!("{name} range ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: ChoiceParams) -> bool {
        (self.alpha.0..=self.alpha.1).contains(&p.alpha())
            && (self.beta.0..=self.beta.1).contains(&p.beta())
    }

    fn on_edge(&self, p: ChoiceParams) -> bool {
        const EDGE: f64 = 1e-6;
        let near = |v: f64, (lo, hi): (f64, f64)| (v - lo).abs() <= EDGE || (hi - v).abs() <= EDGE;
        near(p.alpha(), self.alpha) || near(p.beta(), self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ChoiceParams,
    pub log_likelihood: f64,
    pub converged: bool,
    /// The maximizer sits on the edge of the search box, which happens for
    /// separable or single-answer data.
    pub at_bound: bool,
    pub iterations: usize,
}

const SCAN_NODES: usize = 16;
const SIMPLEX_XTOL: f64 = 1e-8;
const SIMPLEX_MAX_ITER: usize = 5_000;

/// Maximum-likelihood fit of `(alpha, beta)` inside `bounds`.
///
/// The simplex works in log-parameter space, seeded by the best of `start`
/// and a 16x16 log-spaced scan of the box.
pub fn fit_mle(
    data: &ChoiceDataset,
    bounds: &ParamBox,
    start: ChoiceParams,
) -> Result<FitResult, EstimationError> {
    bounds.validate()?;
    let tallies = data.tallies();
    let neg_ll = |x: &[f64]| -tally_log_likelihood(x[0].exp(), x[1].exp(), &tallies);

    let lower = [bounds.alpha.0.ln(), bounds.beta.0.ln()];
    let upper = [bounds.alpha.1.ln(), bounds.beta.1.ln()];
    let mut seed = [
        start.alpha().ln().clamp(lower[0], upper[0]),
        start.beta().ln().clamp(lower[1], upper[1]),
    ];
    let mut seed_f = neg_ll(&seed);
    for i in 0..SCAN_NODES {
        for j in 0..SCAN_NODES {
            let frac = |k: usize| k as f64 / (SCAN_NODES - 1) as f64;
            let x = [
                lower[0] + frac(i) * (upper[0] - lower[0]),
                lower[1] + frac(j) * (upper[1] - lower[1]),
            ];
            let v = neg_ll(&x);
            if v < seed_f {
                seed = x;
                seed_f = v;
            }
        }
    }

    let res = optim::nelder_mead(neg_ll, &seed, 0.25, &lower, &upper, SIMPLEX_XTOL, SIMPLEX_MAX_ITER);
    let alpha = res.x[0].exp().clamp(bounds.alpha.0, bounds.alpha.1);
    let beta = res.x[1].exp().clamp(bounds.beta.0, bounds.beta.1);
    let params = ChoiceParams::new(alpha, beta)?;
    Ok(FitResult {
        params,
        log_likelihood: -res.f,
        converged: res.converged,
        at_bound: bounds.on_edge(params),
        iterations: res.iterations,
    })
}

/// Gamma prior parameterized by shape and rate (rate = 1 / scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        Self { shape: 2.0, rate: 2.0 }
    }
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self, EstimationError> {
        let prior = Self { shape, rate };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        if self.shape.is_finite() && self.rate.is_finite() && self.shape > 0.0 && self.rate > 0.0 {
            Ok(())
        } else {
            Err(EstimationError::InvalidPrior { shape: self.shape, rate: self.rate })
        }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match Gamma::new(self.shape, self.rate) {
            Ok(g) => g.ln_pdf(x),
            Err(_) => f64::NAN,
        }
    }
}

/// Independent priors on discrimination and risk attitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Priors {
    pub alpha: GammaPrior,
    pub beta: GammaPrior,
}

impl Priors {
    pub fn both(prior: GammaPrior) -> Self {
        Self { alpha: prior, beta: prior }
    }
}

/// Node layout for the posterior grid: log-spaced on `[lower, upper]` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_alpha: usize,
    pub n_beta: usize,
    pub lower: f64,
    pub alpha_max: f64,
    pub beta_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_alpha: 80, n_beta: 80, lower: 0.01, alpha_max: 20.0, beta_max: 20.0 }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<(), EstimationError> {
        if self.n_alpha < 2 || self.n_beta < 2 {
            return Err(EstimationError::InvalidGrid("need at least two nodes per axis".into()));
        }
        if !(self.lower > 0.0 && self.lower < self.alpha_max && self.lower < self.beta_max) {
            return Err(EstimationError::InvalidGrid(format!(
                "range ({}, {}] x ({}, {}]",
                self.lower, self.alpha_max, self.lower, self.beta_max
            )));
        }
        Ok(())
    }
}

/// Log-spaced nodes with their log-scale trapezoid quadrature weights
/// (the Jacobian `x` folded in), returned as `(node, ln weight)`.
fn log_nodes(lower: f64, upper: f64, n: usize) -> Vec<(f64, f64)> {
    let step = (upper / lower).ln() / (n - 1) as f64;
    (0..n)
        .map(|k| {
            let ln_x = lower.ln() + k as f64 * step;
            let end = if k == 0 || k == n - 1 { 0.5f64.ln() } else { 0.0 };
            (ln_x.exp(), ln_x + step.ln() + end)
        })
        .collect()
}

/// Discretized joint posterior over `(alpha, beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorGrid {
    alpha_nodes: Vec<f64>,
    beta_nodes: Vec<f64>,
    /// Row-major: `weights[i * beta_nodes.len() + j]` belongs to `(alpha_i, beta_j)`.
    weights: Vec<f64>,
}

impl PosteriorGrid {
    pub fn new(
        alpha_nodes: Vec<f64>,
        beta_nodes: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self, EstimationError> {
        let increasing = |v: &[f64]| {
            !v.is_empty() && v[0] > 0.0 && v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
        };
        if !increasing(&alpha_nodes) || !increasing(&beta_nodes) {
            return Err(EstimationError::InvalidGrid("nodes must be positive and strictly increasing".into()));
        }
        if weights.len() != alpha_nodes.len() * beta_nodes.len() {
            return Err(EstimationError::InvalidGrid("weight count does not match node grid".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(EstimationError::InvalidGrid("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(EstimationError::InvalidGrid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { alpha_nodes, beta_nodes, weights })
    }

    /// All mass on a single parameter pair.
    pub fn point_mass(params: ChoiceParams) -> Self {
        Self {
            alpha_nodes: vec![params.alpha()],
            beta_nodes: vec![params.beta()],
            weights: vec![1.0],
        }
    }

    pub fn alpha_nodes(&self) -> &[f64] {
        &self.alpha_nodes
    }

    pub fn beta_nodes(&self) -> &[f64] {
        &self.beta_nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.beta_nodes.len() + j]
    }

    /// `(alpha, beta, weight)` over every node.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let nb = self.beta_nodes.len();
        self.weights.iter().enumerate().map(move |(k, &w)| (self.alpha_nodes[k / nb], self.beta_nodes[k % nb], w))
    }

    pub fn mean(&self) -> (f64, f64) {
        self.iter().fold((0.0, 0.0), |(ma, mb), (a, b, w)| (ma + w * a, mb + w * b))
    }

    /// Node carrying the largest weight (first one on ties).
    pub fn mode(&self) -> (f64, f64) {
        let mut best = (0.0, 0.0, f64::NEG_INFINITY);
        for (a, b, w) in self.iter() {
            if w > best.2 {
                best = (a, b, w);
            }
        }
        (best.0, best.1)
    }
}

/// Posterior over the node grid: prior density times likelihood times the
/// quadrature weight, normalized in log space.
pub fn posterior_grid(
    data: &ChoiceDataset,
    priors: &Priors,
    grid: &GridSpec,
) -> Result<PosteriorGrid, EstimationError> {
    priors.alpha.validate()?;
    priors.beta.validate()?;
    grid.validate()?;
    let tallies = data.tallies();
    let alphas = log_nodes(grid.lower, grid.alpha_max, grid.n_alpha);
    let betas = log_nodes(grid.lower, grid.beta_max, grid.n_beta);

    let log_mass: Vec<f64> = alphas
        .par_iter()
        .flat_map_iter(|&(a, ln_wa)| {
            let prior_a = priors.alpha.ln_pdf(a) + ln_wa;
            let tallies = &tallies;
            betas.iter().map(move |&(b, ln_wb)| {
                prior_a + priors.beta.ln_pdf(b) + ln_wb + tally_log_likelihood(a, b, tallies)
            })
        })
        .collect();

    let peak = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(EstimationError::InvalidGrid("likelihood vanishes on every node".into()));
    }
    let mut weights: Vec<f64> = log_mass.iter().map(|&v| (v - peak).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(PosteriorGrid {
        alpha_nodes: alphas.into_iter().map(|(a, _)| a).collect(),
        beta_nodes: betas.into_iter().map(|(b, _)| b).collect(),
        weights,
    })
}

const BAYES_TOL: f64 = 1e-8;
const BAYES_MAX_ITER: usize = 60;

/// Offset at which the posterior-averaged choice probability equals one
/// half, found by bisection on [-1, 1].
pub fn solve_omega_bayes(posterior: &PosteriorGrid) -> Result<Offset, EstimationError> {
    let support: Vec<(f64, f64, f64)> = posterior.iter().filter(|&(_, _, w)| w > 0.0).collect();
    let excess = |omega: f64| -> f64 {
        support.iter().map(|&(a, b, w)| w * interior_prob(a, b, omega)).sum::<f64>() - 0.5
    };
    optim::bisect(excess, -1.0, 1.0, BAYES_TOL, BAYES_MAX_ITER)
        .map(Offset::saturating)
        .ok_or(EstimationError::NoRoot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimationMethod {
    #[default]
    Mle,
    Bayes,
}

impl EstimationMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimationMethod::Mle => "mle",
            EstimationMethod::Bayes => "bayes",
        }
    }
}

impl std::fmt::Display for EstimationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EstimationMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mle" => Ok(EstimationMethod::Mle),
            "bayes" => Ok(EstimationMethod::Bayes),
            other => Err(format!("unknown method {other:?} (expected mle or bayes)")),
        }
    }
}

impl From<EstimationMethod> for PointMethod {
    fn from(m: EstimationMethod) -> Self {
        match m {
            EstimationMethod::Mle => PointMethod::Mle,
            EstimationMethod::Bayes => PointMethod::Bayes,
        }
    }
}

/// Numeric settings shared by both estimation routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub method: EstimationMethod,
    pub priors: Priors,
    pub bounds: ParamBox,
    pub grid: GridSpec,
    pub start: ChoiceParams,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            method: EstimationMethod::Mle,
            priors: Priors::default(),
            bounds: ParamBox::default(),
            grid: GridSpec::default(),
            start: ChoiceParams::new(1.0, 1.0).expect("unit params are valid"),
        }
    }
}

impl EstimationConfig {
    pub fn with_method(method: EstimationMethod) -> Self {
        Self { method, ..Self::default() }
    }
}

/// Fitted offset plus whichever diagnostics the chosen route produced.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetEstimate {
    pub omega: Offset,
    pub method: EstimationMethod,
    pub fit: Option<FitResult>,
    pub posterior_mean: Option<(f64, f64)>,
    pub at_bound: bool,
}

pub fn estimate_offset(
    data: &ChoiceDataset,
    config: &EstimationConfig,
) -> Result<OffsetEstimate, EstimationError> {
    match config.method {
        EstimationMethod::Mle => {
            let fit = fit_mle(data, &config.bounds, config.start)?;
            Ok(OffsetEstimate {
                omega: solve_omega(fit.params),
                method: config.method,
                at_bound: fit.at_bound,
                fit: Some(fit),
                posterior_mean: None,
            })
        }
        EstimationMethod::Bayes => {
            let posterior = posterior_grid(data, &config.priors, &config.grid)?;
            Ok(OffsetEstimate {
                omega: solve_omega_bayes(&posterior)?,
                method: config.method,
                fit: None,
                posterior_mean: Some(posterior.mean()),
                at_bound: false,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityEstimate {
    pub point: UtilityPoint,
    pub detail: OffsetEstimate,
}

/// Fits one sure value's answers and maps the offset to a utility.
pub fn estimate_utility(
    data: &ChoiceDataset,
    config: &EstimationConfig,
) -> Result<UtilityEstimate, EstimationError> {
    let detail = estimate_offset(data, config)?;
    let point = UtilityPoint::from_omega(data.c(), detail.omega, config.method.into());
    debug_assert_eq!(point.disposition, risk_disposition(detail.omega));
    Ok(UtilityEstimate { point, detail })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(c: f64, rows: &[(f64, bool)]) -> ChoiceDataset {
        ChoiceDataset::new(c, rows.iter().map(|&(p, y)| ChoiceObservation::new(c, p, y).unwrap()).collect()).unwrap()
    }

    fn unit() -> ChoiceParams {
        ChoiceParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn dataset_invariants() {
        assert_eq!(ChoiceDataset::new(0.5, vec![]), Err(EstimationError::EmptyDataset));
        assert!(ChoiceObservation::new(0.0, 0.5, true).is_err());
        assert!(ChoiceObservation::new(0.5, 1.0, true).is_err());
        let mixed = vec![
            ChoiceObservation::new(0.5, 0.6, true).unwrap(),
            ChoiceObservation::new(0.6, 0.6, true).unwrap(),
        ];
        assert!(matches!(ChoiceDataset::new(0.5, mixed.clone()), Err(EstimationError::MixedSureValues { .. })));
        let groups = ChoiceDataset::group_by_c(&mixed).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[1].c(), 0.6);
    }

    #[test]
    fn log_likelihood_examples() {
        let v = log_likelihood(unit(), &dataset(0.5, &[(0.7, true)]));
        assert!((v - 0.6f64.ln()).abs() < 1e-12);
        assert!((v + 0.510826).abs() < 1e-6);
        let v = log_likelihood(unit(), &dataset(0.5, &[(0.5, true)]));
        assert!((v + 0.693147).abs() < 1e-6);
        let v = log_likelihood(unit(), &dataset(0.4, &[(0.6, true), (0.6, false)]));
        assert!((v - (0.6f64.ln() + 0.4f64.ln())).abs() < 1e-12);
        assert!((v + 1.427116).abs() < 1e-6);
    }

    #[test]
    fn impossible_answer_is_negative_infinity() {
        // alpha tiny drives the below-diagonal probability to zero
        let params = ChoiceParams::new(1e-300, 1.0).unwrap();
        let v = log_likelihood(params, &dataset(0.6, &[(0.3, true)]));
        assert_eq!(v, f64::NEG_INFINITY);
    }

    #[test]
    fn mle_flags_separable_and_single_answer_data() {
        let bounds = ParamBox::default();
        let all_yes = dataset(0.5, &[(0.3, true), (0.5, true), (0.7, true), (0.9, true)]);
        let fit = fit_mle(&all_yes, &bounds, unit()).unwrap();
        assert!(fit.at_bound);
        for rows in [[(0.7, true)], [(0.7, false)], [(0.5, true)]] {
            let fit = fit_mle(&dataset(0.5, &rows), &bounds, unit()).unwrap();
            assert!(fit.at_bound, "{rows:?} -> {fit:?}");
            assert!(bounds.contains(fit.params));
        }
    }

    #[test]
    fn point_mass_bayes_matches_closed_form() {
        let w = solve_omega_bayes(&PosteriorGrid::point_mass(unit())).unwrap();
        assert!(w.value().abs() < 1e-8);
        let p = ChoiceParams::new(1.0, 2.0).unwrap();
        let w = solve_omega_bayes(&PosteriorGrid::point_mass(p)).unwrap();
        assert!((w.value() - 0.414214).abs() < 1e-6);
        assert!((w.value() - solve_omega(p).value()).abs() < 1e-8);
    }

    #[test]
    fn two_point_posterior_matches_scan() {
        let post = PosteriorGrid::new(vec![1.0], vec![0.5, 2.0], vec![0.5, 0.5]).unwrap();
        let w = solve_omega_bayes(&post).unwrap().value();
        // brute-force scan at 1e-6 resolution
        let f = |o: f64| {
            let s = if o > 0.0 { 1.0 } else if o < 0.0 { -1.0 } else { 0.0 };
            let b = (1.0 + s * o.abs()) / 2.0;
            0.5 * b.powf(0.5) + 0.5 * b.powf(2.0) - 0.5
        };
        let mut best = (f64::INFINITY, 0.0);
        let mut k = 0;
        while k <= 2_000_000 {
            let o = -1.0 + k as f64 * 1e-6;
            if f(o).abs() < best.0 {
                best = (f(o).abs(), o);
            }
            k += 1;
        }
        assert!((w - best.1).abs() < 2e-6, "{w} vs {}", best.1);
    }

    #[test]
    fn posterior_grid_rejects_bad_inputs() {
        assert!(GammaPrior::new(0.0, 2.0).is_err());
        assert!(PosteriorGrid::new(vec![1.0], vec![1.0], vec![0.5]).is_err());
        assert!(PosteriorGrid::new(vec![2.0, 1.0], vec![1.0], vec![0.5, 0.5]).is_err());
        let data = dataset(0.5, &[(0.6, true)]);
        let bad = GridSpec { n_alpha: 1, ..GridSpec::default() };
        assert!(posterior_grid(&data, &Priors::default(), &bad).is_err());
    }

    #[test]
    fn posterior_normalized_under_extreme_data() {
        // 5000 identical answers would underflow without log-space normalization
        let rows: Vec<(f64, bool)> = (0..5000).map(|k| (0.3 + 0.1 * (k % 5) as f64, k % 3 != 0)).collect();
        let post = posterior_grid(&dataset(0.5, &rows), &Priors::default(), &GridSpec::default()).unwrap();
        let total: f64 = post.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(post.weights().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn method_parsing() {
        assert_eq!("bayes".parse::<EstimationMethod>().unwrap(), EstimationMethod::Bayes);
        assert!("map".parse::<EstimationMethod>().is_err());
    }
}
