//! Synthetic decision makers that answer from the choice model itself.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`. Each answer consumes one uniform `f64` draw `u` in [0, 1)
//! and the gamble is chosen iff `u < choice_prob`. Recovery experiments give
//! seed `k` the stream `base_seed + k`, so every seed is reproducible on its
//! own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice_model::{choice_prob, solve_omega, ChoiceParams, GamblePoint};
use crate::estimation::{
    estimate_offset, ChoiceDataset, ChoiceObservation, EstimationConfig, EstimationError, EstimationMethod,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSubject {
    pub params: ChoiceParams,
    pub seed: u64,
}

impl SyntheticSubject {
    pub fn new(params: ChoiceParams, seed: u64) -> Self {
        Self { params, seed }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.seed)
    }
}

/// Draws one answer for `g` from `rng`.
pub fn draw_choice<R: Rng + ?Sized>(params: ChoiceParams, g: GamblePoint, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u < choice_prob(params, g)
}

/// Answers every point of `schedule` in order from a fresh stream.
pub fn simulate_choices(
    subject: &SyntheticSubject,
    schedule: &[GamblePoint],
) -> Result<Vec<ChoiceObservation>, EstimationError> {
    let mut rng = subject.rng();
    schedule
        .iter()
        .map(|&g| ChoiceObservation::new(g.c(), g.p(), draw_choice(subject.params, g, &mut rng)))
        .collect()
}

/// [`simulate_choices`] grouped into one dataset per sure value.
pub fn simulate_datasets(
    subject: &SyntheticSubject,
    schedule: &[GamblePoint],
) -> Result<Vec<ChoiceDataset>, EstimationError> {
    ChoiceDataset::group_by_c(&simulate_choices(subject, schedule)?)
}

/// `n_per_c` points per sure value, cycling through `p_grid` in order.
pub fn balanced_schedule(c_grid: &[f64], p_grid: &[f64], n_per_c: usize) -> Result<Vec<GamblePoint>, EstimationError> {
    let mut out = Vec::with_capacity(c_grid.len() * n_per_c);
    for &c in c_grid {
        for k in 0..n_per_c {
            let p = p_grid[k % p_grid.len()];
            ChoiceObservation::new(c, p, false)?;
            out.push(GamblePoint::new(c, p)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub c: f64,
    pub mean_omega: f64,
    pub mean_abs_error: f64,
    pub fits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub true_params: ChoiceParams,
    pub true_omega: f64,
    pub method: EstimationMethod,
    pub n_per_c: usize,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub per_c: Vec<RecoveryRow>,
    /// Mean of `|omega_hat - omega|` over every successful (seed, c) fit.
    pub mean_abs_error: f64,
    pub failures: usize,
    /// Per seed, per c estimated offsets (`None` where estimation failed).
    pub estimates: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone)]
pub struct RecoverySetup<'a> {
    pub true_params: ChoiceParams,
    pub c_grid: &'a [f64],
    pub p_grid: &'a [f64],
    pub n_per_c: usize,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub config: EstimationConfig,
}

/// Simulates, refits and compares the fitted offsets with the closed-form
/// offset of the generating parameters. Seeds run in parallel; results are
/// collected in seed order.
pub fn recovery_experiment(setup: &RecoverySetup<'_>) -> Result<RecoveryReport, EstimationError> {
    let schedule = balanced_schedule(setup.c_grid, setup.p_grid, setup.n_per_c)?;
    let true_omega = solve_omega(setup.true_params).value();
    let estimates: Vec<Vec<Option<f64>>> = (0..setup.n_seeds as u64)
        .into_par_iter()
        .map(|k| {
            let subject = SyntheticSubject::new(setup.true_params, setup.base_seed.wrapping_add(k));
            let datasets = simulate_datasets(&subject, &schedule)?;
            Ok(datasets
                .iter()
                .map(|d| estimate_offset(d, &setup.config).ok().map(|e| e.omega.value()))
                .collect())
        })
        .collect::<Result<_, EstimationError>>()?;

    let mut per_c = Vec::with_capacity(setup.c_grid.len());
    let mut sorted_c = setup.c_grid.to_vec();
    sorted_c.sort_by(f64::total_cmp);
    sorted_c.dedup();
    let (mut err_sum, mut count, mut failures) = (0.0, 0usize, 0usize);
    for (idx, &c) in sorted_c.iter().enumerate() {
        let fitted: Vec<f64> = estimates.iter().filter_map(|row| row[idx]).collect();
        failures += setup.n_seeds - fitted.len();
        let abs: f64 = fitted.iter().map(|w| (w - true_omega).abs()).sum();
        err_sum += abs;
        count += fitted.len();
        let n = fitted.len().max(1) as f64;
        per_c.push(RecoveryRow {
            c,
            mean_omega: fitted.iter().sum::<f64>() / n,
            mean_abs_error: abs / n,
            fits: fitted.len(),
        });
    }
    Ok(RecoveryReport {
        true_params: setup.true_params,
        true_omega,
        method: setup.config.method,
        n_per_c: setup.n_per_c,
        n_seeds: setup.n_seeds,
        base_seed: setup.base_seed,
        per_c,
        mean_abs_error: if count == 0 { f64::NAN } else { err_sum / count as f64 },
        failures,
        estimates,
    })
}
