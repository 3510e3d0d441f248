//! Small derivative-free routines shared by the estimators.

/// Outcome of a bounded Nelder–Mead run.
#[derive(Debug, Clone)]
pub(crate) struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` over the box `[lower, upper]` with a projected Nelder–Mead
/// simplex. Convergence is declared once every vertex is within `xtol` of
/// the best one in each coordinate.
pub(crate) fn nelder_mead<F>(
    f: F,
    start: &[f64],
    step: f64,
    lower: &[f64],
    upper: &[f64],
    xtol: f64,
    max_iter: usize,
) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let project = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    project(&mut x0);
    simplex.push((x0.clone(), eval(&x0)));
    for i in 0..n {
        let mut x = x0.clone();
        // step away from a bound rather than into it
        x[i] = if x0[i] + step <= upper[i] { x0[i] + step } else { x0[i] - step };
        project(&mut x);
        let v = eval(&x);
        simplex.push((x, v));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0].0;
        let spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for i in 0..n {
                centroid[i] += x[i] / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| {
            let mut x: Vec<f64> = (0..n).map(|i| centroid[i] + t * (worst.0[i] - centroid[i])).collect();
            project(&mut x);
            x
        };

        let xr = along(-alpha);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-gamma);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(-rho);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for i in 0..n {
                x[i] = best[i] + sigma * (x[i] - best[i]);
            }
            *v = eval(x);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    SimplexResult { x, f, iterations, converged }
}

/// Bisection for an increasing-or-decreasing bracketed root. Returns `None`
/// if `f(lo)` and `f(hi)` share a strict sign.
pub(crate) fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if 0.5 * (hi - lo) < tol {
            return Some(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_finds_rosenbrock_minimum() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = nelder_mead(rosen, &[-1.2, 1.0], 0.5, &[-5.0, -5.0], &[5.0, 5.0], 1e-10, 5000);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn simplex_respects_bounds() {
        let r = nelder_mead(|x: &[f64]| x[0] + x[1], &[0.5, 0.5], 0.1, &[0.0, 0.2], &[1.0, 1.0], 1e-10, 5000);
        assert_eq!(r.x, vec![0.0, 0.2]);
    }

    #[test]
    fn bisection_brackets() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12, 100).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_none());
    }
}
