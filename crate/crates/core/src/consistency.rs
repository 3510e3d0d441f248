//! Repairs that turn separately elicited utility points into a coherent curve.
//!
//! [`isotonic_adjust`] restores monotonicity in `c` with the
//! pool-adjacent-violators projection. [`nl_triplet_fit`] solves the
//! log-odds least-squares problem over triplet gambles, parameterizing the
//! utilities through positive gaps so the ordering `0 < U_1 < ... < U_n < 1`
//! holds by construction.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice_model::{risk_disposition, utility_from_omega, Offset, RiskDisposition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsistencyError {
    #[error("utility points must have strictly increasing c (violated at index {index})")]
    Unsorted { index: usize },
    #[error("triplet {index} is malformed: {reason}")]
    BadTriplet { index: usize, reason: String },
    #[error("sure value index {index} is not constrained by any triplet")]
    Underdetermined { index: usize },
    #[error("triplet least squares did not converge (objective {objective:e} after {iterations} iterations)")]
    NonConvergence { objective: f64, iterations: usize },
    #[error("utility {u} at c={c} lies outside [0, 1]")]
    OutOfRange { c: f64, u: f64 },
}

/// How a utility value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointMethod {
    Mle,
    Bayes,
    Adjusted,
}

impl PointMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointMethod::Mle => "mle",
            PointMethod::Bayes => "bayes",
            PointMethod::Adjusted => "adjusted",
        }
    }
}

impl fmt::Display for PointMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PointMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mle" => Ok(PointMethod::Mle),
            "bayes" => Ok(PointMethod::Bayes),
            "adjusted" => Ok(PointMethod::Adjusted),
            other => Err(format!("unknown point method {other:?}")),
        }
    }
}

/// An elicited utility `u` of the sure chance `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityPoint {
    pub c: f64,
    pub u: f64,
    pub omega: Offset,
    pub disposition: RiskDisposition,
    pub method: PointMethod,
}

impl UtilityPoint {
    /// Point implied by an indifference offset at `c`.
    pub fn from_omega(c: f64, omega: Offset, method: PointMethod) -> Self {
        Self { c, u: utility_from_omega(c, omega), omega, disposition: risk_disposition(omega), method }
    }

    /// Point with a utility set directly; the offset is taken as `u - c`.
    pub fn from_utility(c: f64, u: f64, method: PointMethod) -> Result<Self, ConsistencyError> {
        if !(0.0..=1.0).contains(&u) {
            return Err(ConsistencyError::OutOfRange { c, u });
        }
        let omega = Offset::saturating(u - c);
        Ok(Self { c, u, omega, disposition: risk_disposition(omega), method })
    }
}

/// Weighted least-squares non-decreasing fit (pool adjacent violators).
pub fn pava(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len(), "one weight per value");
    // (mean, weight, count) per block
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, n2) = blocks[blocks.len() - 1];
            let (m1, w1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 + m2 * w2) / w, w, n1 + n2);
        }
    }
    blocks.into_iter().flat_map(|(m, _, n)| std::iter::repeat_n(m, n)).collect()
}

/// Averages points sharing a `c`, weighting each by `weights[i]`.
///
/// Input need not be sorted; output is sorted by `c`. A merged point keeps its
/// method when all members agree and becomes `adjusted` otherwise.
pub fn merge_ties(points: &[UtilityPoint], weights: &[f64]) -> Vec<UtilityPoint> {
    assert_eq!(points.len(), weights.len(), "one weight per point");
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].c.total_cmp(&points[b].c));
    let mut out: Vec<UtilityPoint> = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let c = points[order[k]].c;
        let group: Vec<usize> = order[k..].iter().copied().take_while(|&i| points[i].c == c).collect();
        k += group.len();
        if group.len() == 1 {
            out.push(points[group[0]]);
            continue;
        }
        let total: f64 = group.iter().map(|&i| weights[i]).sum();
        let u = group.iter().map(|&i| points[i].u * weights[i]).sum::<f64>() / total;
        let first = points[group[0]].method;
        let method = if group.iter().all(|&i| points[i].method == first) { first } else { PointMethod::Adjusted };
        let omega = Offset::saturating(u - c);
        out.push(UtilityPoint { c, u: u.clamp(0.0, 1.0), omega, disposition: risk_disposition(omega), method });
    }
    out
}

/// Least-squares monotone projection of the utilities, equal weights.
///
/// Points whose value moves are re-tagged `adjusted` with `omega = u - c`;
/// untouched points come back unchanged.
pub fn isotonic_adjust(points: &[UtilityPoint]) -> Result<Vec<UtilityPoint>, ConsistencyError> {
    isotonic_adjust_weighted(points, &vec![1.0; points.len()])
}

pub fn isotonic_adjust_weighted(
    points: &[UtilityPoint],
    weights: &[f64],
) -> Result<Vec<UtilityPoint>, ConsistencyError> {
    if let Some(index) = points.windows(2).position(|w| w[0].c >= w[1].c) {
        return Err(ConsistencyError::Unsorted { index: index + 1 });
    }
    let values: Vec<f64> = points.iter().map(|p| p.u).collect();
    let fitted = pava(&values, weights);
    Ok(points
        .iter()
        .zip(fitted)
        .map(|(pt, u)| {
            let u = u.clamp(0.0, 1.0);
            if u == pt.u {
                *pt
            } else {
                let omega = Offset::saturating(u - pt.c);
                UtilityPoint { u, omega, disposition: risk_disposition(omega), method: PointMethod::Adjusted, ..*pt }
            }
        })
        .collect())
}

/// Indifference chance `p` between a sure middle outcome `m` and a gamble
/// paying outcome `k` with chance `p`, else outcome `i`.
///
/// Indices address the extended outcome list `[0, c_1, ..., c_n, 1]`, so
/// `0` and `n + 1` are the anchors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletGamble {
    pub i: usize,
    pub m: usize,
    pub k: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletFit {
    pub points: Vec<UtilityPoint>,
    /// Sum of squared log-odds residuals at the solution.
    pub objective: f64,
    pub iterations: usize,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Gap shares from logits, first logit pinned at zero.
fn softmax_gaps(z: &[f64]) -> Vec<f64> {
    let full: Vec<f64> = std::iter::once(0.0).chain(z.iter().copied()).collect();
    let peak = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = full.iter().map(|v| (v - peak).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Residuals and Jacobian (w.r.t. the free logits) for every triplet.
fn residuals(triplets: &[TripletGamble], gaps: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let free = gaps.len() - 1;
    let mut r = DVector::zeros(triplets.len());
    let mut jac = DMatrix::zeros(triplets.len(), free);
    for (row, t) in triplets.iter().enumerate() {
        let lower: f64 = gaps[t.i..t.m].iter().sum();
        let upper: f64 = gaps[t.m..t.k].iter().sum();
        r[row] = logit(t.p) - (lower / upper).ln();
        for s in 1..gaps.len() {
            let in_lower = (t.i..t.m).contains(&s);
            let in_upper = (t.m..t.k).contains(&s);
            let mut d = 0.0;
            if in_upper {
                d += 1.0 / upper;
            }
            if in_lower {
                d -= 1.0 / lower;
            }
            jac[(row, s - 1)] = gaps[s] * d;
        }
    }
    (r, jac)
}

/// Least-squares utilities from triplet indifference chances, anchored at
/// `U(0) = 0` and `U(1) = 1`.
///
/// `c_values` are the interior sure values (strictly increasing, all in
/// (0, 1)); the returned points follow the same order.
pub fn nl_triplet_fit(
    c_values: &[f64],
    triplets: &[TripletGamble],
) -> Result<TripletFit, ConsistencyError> {
    let n = c_values.len();
    if let Some(index) = c_values.windows(2).position(|w| w[0] >= w[1]) {
        return Err(ConsistencyError::Unsorted { index: index + 1 });
    }
    for (index, t) in triplets.iter().enumerate() {
        let reason = if !(t.i < t.m && t.m < t.k) {
            Some("indices must satisfy i < m < k".to_string())
        } else if t.k > n + 1 {
            Some(format!("index {} exceeds the anchor index {}", t.k, n + 1))
        } else if !(t.p > 0.0 && t.p < 1.0) {
            Some(format!("chance {} is not strictly inside (0, 1)", t.p))
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(ConsistencyError::BadTriplet { index, reason });
        }
    }
    if let Some(index) = (1..=n).find(|&m| !triplets.iter().any(|t| t.i == m || t.m == m || t.k == m)) {
        return Err(ConsistencyError::Underdetermined { index });
    }
    if n == 0 {
        return Ok(TripletFit { points: Vec::new(), objective: 0.0, iterations: 0 });
    }

    // start from the elicited sure values themselves
    let mut z: Vec<f64> = {
        let mut prev = 0.0;
        let raw: Vec<f64> = c_values
            .iter()
            .chain(std::iter::once(&1.0))
            .map(|&c| {
                let g = c - prev;
                prev = c;
                g.ln()
            })
            .collect();
        raw[1..].iter().map(|v| v - raw[0]).collect()
    };

    let objective = |z: &[f64]| {
        let (r, _) = residuals(triplets, &softmax_gaps(z));
        r.norm_squared()
    };
    let mut current = objective(&z);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 500 {
        iterations += 1;
        let gaps = softmax_gaps(&z);
        let (r, jac) = residuals(triplets, &gaps);
        let jt = jac.transpose();
        let gradient = &jt * &r;
        if gradient.amax() < 1e-14 || current < 1e-28 {
            converged = true;
            break;
        }
        let normal = &jt * &jac;
        let mut improved = false;
        for _ in 0..40 {
            let mut damped = normal.clone();
            for d in 0..damped.nrows() {
                damped[(d, d)] += lambda * (normal[(d, d)] + 1e-12);
            }
            let Some(step) = damped.lu().solve(&gradient) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
            let value = objective(&trial);
            if value <= current {
                let small = step.amax() < 1e-12;
                z = trial;
                let gain = current - value;
                current = value;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if small || gain <= 1e-30 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no descent direction left at machine precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(ConsistencyError::NonConvergence { objective: current, iterations });
    }

    let gaps = softmax_gaps(&z);
    let mut u = 0.0;
    let mut points = Vec::with_capacity(n);
    for (idx, &c) in c_values.iter().enumerate() {
        u += gaps[idx];
        points.push(UtilityPoint::from_utility(c, u.clamp(0.0, 1.0), PointMethod::Adjusted)?);
    }
    Ok(TripletFit { points, objective: current, iterations })
}

/// Triplet objective at given interior utilities (anchors added).
pub fn triplet_objective(utilities: &[f64], triplets: &[TripletGamble]) -> f64 {
    let full: Vec<f64> = std::iter::once(0.0).chain(utilities.iter().copied()).chain(std::iter::once(1.0)).collect();
    triplets
        .iter()
        .map(|t| {
            let r = logit(t.p) - ((full[t.m] - full[t.i]) / (full[t.k] - full[t.m])).ln();
            r * r
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(cs: &[f64], us: &[f64]) -> Vec<UtilityPoint> {
        cs.iter().zip(us).map(|(&c, &u)| UtilityPoint::from_utility(c, u, PointMethod::Mle).unwrap()).collect()
    }

    fn us(points: &[UtilityPoint]) -> Vec<f64> {
        points.iter().map(|p| p.u).collect()
    }

    #[test]
    fn isotonic_examples() {
        let out = isotonic_adjust(&pts(&[0.5, 0.6, 0.7, 0.8, 0.9], &[0.5, 0.6, 0.7, 0.93, 0.92])).unwrap();
        let expected = [0.5, 0.6, 0.7, 0.925, 0.925];
        for (a, b) in us(&out).iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(out[0].method, PointMethod::Mle);
        assert_eq!(out[3].method, PointMethod::Adjusted);
        assert_eq!(out[4].disposition, RiskDisposition::Averse);

        let mono = pts(&[0.1, 0.2, 0.3], &[0.1, 0.4, 0.4]);
        assert_eq!(isotonic_adjust(&mono).unwrap(), mono);

        let out = isotonic_adjust(&pts(&[0.1, 0.2, 0.3], &[0.5, 0.7, 0.6])).unwrap();
        assert_eq!(us(&out)[0], 0.5);
        assert!((us(&out)[1] - 0.65).abs() < 1e-12 && (us(&out)[2] - 0.65).abs() < 1e-12);
    }

    #[test]
    fn isotonic_rejects_unsorted_or_duplicate_c() {
        assert!(matches!(isotonic_adjust(&pts(&[0.2, 0.1], &[0.1, 0.2])), Err(ConsistencyError::Unsorted { index: 1 })));
        assert!(isotonic_adjust(&pts(&[0.2, 0.2], &[0.1, 0.2])).is_err());
    }

    #[test]
    fn ties_are_weighted_averages() {
        let points = pts(&[0.6, 0.5, 0.6], &[0.7, 0.5, 0.4]);
        let merged = merge_ties(&points, &[1.0, 1.0, 3.0]);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].c, 0.5);
        assert!((merged[1].u - (0.7 + 1.2) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn triplet_recovers_identity_utility() {
        let cs = [0.2, 0.4, 0.6, 0.8];
        let full = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let mut triplets = Vec::new();
        for i in 0..full.len() {
            for m in i + 1..full.len() {
                for k in m + 1..full.len() {
                    let p = (full[m] - full[i]) / (full[k] - full[i]);
                    triplets.push(TripletGamble { i, m, k, p });
                }
            }
        }
        let fit = nl_triplet_fit(&cs, &triplets).unwrap();
        for (pt, c) in fit.points.iter().zip(cs) {
            assert!((pt.u - c).abs() < 1e-6, "{} vs {c}", pt.u);
        }
        assert!(fit.objective < 1e-12);
    }

    #[test]
    fn single_even_triplet_gives_midpoint() {
        let fit = nl_triplet_fit(&[0.3], &[TripletGamble { i: 0, m: 1, k: 2, p: 0.5 }]).unwrap();
        assert!((fit.points[0].u - 0.5).abs() < 1e-9);
    }

    #[test]
    fn inconsistent_triplets_compromise() {
        let triplets = [TripletGamble { i: 0, m: 1, k: 2, p: 0.3 }, TripletGamble { i: 0, m: 1, k: 2, p: 0.6 }];
        let fit = nl_triplet_fit(&[0.5], &triplets).unwrap();
        // brute-force scan at 1e-4
        let mut best = (f64::INFINITY, 0.0);
        for k in 1..10_000 {
            let u = k as f64 * 1e-4;
            let v = triplet_objective(&[u], &triplets);
            if v < best.0 {
                best = (v, u);
            }
        }
        assert!((fit.points[0].u - best.1).abs() < 1e-4);
        assert!(fit.objective > 0.0);
        assert!((fit.objective - best.0).abs() < 1e-6);
    }

    #[test]
    fn triplet_input_errors() {
        let t = |i, m, k, p| TripletGamble { i, m, k, p };
        assert!(matches!(nl_triplet_fit(&[0.3, 0.6], &[t(0, 1, 3, 0.5)]), Err(ConsistencyError::Underdetermined { index: 2 })));
        assert!(matches!(nl_triplet_fit(&[0.3], &[t(1, 1, 2, 0.5)]), Err(ConsistencyError::BadTriplet { .. })));
        assert!(matches!(nl_triplet_fit(&[0.3], &[t(0, 1, 5, 0.5)]), Err(ConsistencyError::BadTriplet { .. })));
        assert!(matches!(nl_triplet_fit(&[0.3], &[t(0, 1, 2, 1.0)]), Err(ConsistencyError::BadTriplet { .. })));
    }

    proptest! {
        #[test]
        fn pava_properties(values in prop::collection::vec(0.0f64..=1.0, 1..12)) {
            let w = vec![1.0; values.len()];
            let fitted = pava(&values, &w);
            prop_assert!(fitted.windows(2).all(|p| p[0] <= p[1]));
            prop_assert_eq!(pava(&fitted, &w), fitted.clone());
            // pooled blocks keep the input mean
            let mut start = 0;
            while start < fitted.len() {
                let end = (start..fitted.len()).take_while(|&j| fitted[j] == fitted[start]).last().unwrap() + 1;
                let mean = values[start..end].iter().sum::<f64>() / (end - start) as f64;
                prop_assert!((mean - fitted[start]).abs() < 1e-9);
                start = end;
            }
        }

        #[test]
        fn consistent_triplet_leaves_objective_unchanged(
            gaps in prop::collection::vec(0.05f64..1.0, 4),
            extra in (0usize..5, 0usize..5, 0usize..5),
        ) {
            let total: f64 = gaps.iter().sum();
            let mut full = vec![0.0];
            for g in &gaps { full.push(full.last().unwrap() + g / total); }
            let cs: Vec<f64> = full[1..4].to_vec();
            let mut triplets = vec![
                TripletGamble { i: 0, m: 1, k: 2, p: 0.4 },
                TripletGamble { i: 1, m: 2, k: 4, p: 0.55 },
                TripletGamble { i: 0, m: 3, k: 4, p: 0.7 },
                TripletGamble { i: 2, m: 3, k: 4, p: 0.35 },
            ];
            let base = nl_triplet_fit(&cs, &triplets).unwrap();
            let mut idx = [extra.0, extra.1, extra.2];
            idx.sort();
            prop_assume!(idx[0] < idx[1] && idx[1] < idx[2]);
            let sol: Vec<f64> = std::iter::once(0.0).chain(base.points.iter().map(|p| p.u)).chain([1.0]).collect();
            let p = (sol[idx[1]] - sol[idx[0]]) / (sol[idx[2]] - sol[idx[0]]);
            triplets.push(TripletGamble { i: idx[0], m: idx[1], k: idx[2], p });
            let grown = nl_triplet_fit(&cs, &triplets).unwrap();
            prop_assert!(grown.objective <= base.objective + 1e-9);
        }
    }
}
