//! Small box-constrained local optimizers.
//!
//! Both routines minimize. Objective values that are not finite are treated
//! as `+∞`, so callers can signal numerical failure by returning `NaN`.

use nalgebra::{DMatrix, DVector};

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Central finite-difference gradient, one-sided at active bounds.
fn fd_gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    lower: &[f64],
    upper: &[f64],
    h: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let up = (x[i] + h).min(upper[i]);
        let dn = (x[i] - h).max(lower[i]);
        probe[i] = up;
        let fu = if up > x[i] { sanitize(f(&probe)) } else { fx };
        probe[i] = dn;
        let fd = if dn < x[i] { sanitize(f(&probe)) } else { fx };
        probe[i] = x[i];
        let span = up - dn;
        g[i] = if span > 0.0 && fu.is_finite() && fd.is_finite() {
            (fu - fd) / span
        } else {
            0.0
        };
    }
    g
}

/// Projected quasi-Newton (BFGS) minimization with finite-difference
/// gradients and Armijo backtracking.
pub fn minimize_bfgs<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, lower, upper);
    let mut fx = sanitize(f(&x));
    if !fx.is_finite() {
        return (x, fx);
    }
    let h = 1e-5;
    let mut g = fd_gradient(&mut f, &x, fx, lower, upper, h);
    let mut hinv = DMatrix::<f64>::identity(n, n);

    for _ in 0..max_iter {
        let gv = DVector::from_column_slice(&g);
        let mut d = -(&hinv * &gv);
        // Freeze coordinates pinned at a bound with the step pointing outward.
        for i in 0..n {
            if (x[i] <= lower[i] && d[i] < 0.0) || (x[i] >= upper[i] && d[i] > 0.0) {
                d[i] = 0.0;
            }
        }
        let mut slope = gv.dot(&d);
        if slope >= 0.0 {
            hinv = DMatrix::identity(n, n);
            d = -gv.clone();
            for i in 0..n {
                if (x[i] <= lower[i] && d[i] < 0.0) || (x[i] >= upper[i] && d[i] > 0.0) {
                    d[i] = 0.0;
                }
            }
            slope = gv.dot(&d);
            if slope >= 0.0 {
                break;
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut trial: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + step * b).collect();
            clamp(&mut trial, lower, upper);
            let ft = sanitize(f(&trial));
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };

        let gn = fd_gradient(&mut f, &xn, fnew, lower, upper, h);
        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        let converged = (fx - fnew).abs() <= 1e-7 * (1.0 + fx.abs()) || s.norm() < 1e-8;
        x = xn;
        fx = fnew;
        g = gn;
        if converged {
            break;
        }
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - rho * (&s * y.transpose());
            let right = &i - rho * (&y * s.transpose());
            hinv = &left * &hinv * &right + rho * (&s * s.transpose());
        }
    }
    (x, fx)
}

/// Compass (pattern) search: polls `±step` along each coordinate, moves to
/// the first improvement, halves the step when no poll improves.
///
/// Points already visited (within 1e-12 per coordinate) are not evaluated
/// again and do not count against `max_evals`.
pub fn pattern_search<F: FnMut(&[f64]) -> f64>(
    mut raw: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    initial_step: f64,
    min_step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let mut seen: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut f = |x: &[f64]| -> (f64, bool) {
        let hit = seen.iter().find(|(p, _)| p.iter().zip(x).all(|(a, b)| (a - b).abs() <= 1e-12));
        if let Some((_, v)) = hit {
            return (*v, false);
        }
        let v = sanitize(raw(x));
        seen.push((x.to_vec(), v));
        (v, true)
    };
    let mut x = x0.to_vec();
    clamp(&mut x, lower, upper);
    let mut fx = f(&x).0;
    let mut evals = 1;
    let mut step = initial_step;
    while step >= min_step && evals < max_evals {
        let mut improved = false;
        'poll: for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut trial = x.clone();
                trial[i] = (trial[i] + dir * step).clamp(lower[i], upper[i]);
                if trial[i] == x[i] {
                    continue;
                }
                let (ft, fresh) = f(&trial);
                evals += fresh as usize;
                if ft < fx {
                    x = trial;
                    fx = ft;
                    improved = true;
                    break 'poll;
                }
                if evals >= max_evals {
                    break 'poll;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(p: &[f64]) -> f64 {
        (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2)
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let (x, fx) = minimize_bfgs(rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], 500);
        assert!(fx < 1e-6, "fx = {fx}");
        assert!((x[0] - 1.0).abs() < 1e-2 && (x[1] - 1.0).abs() < 2e-2);
    }

    #[test]
    fn bfgs_respects_bounds() {
        let (x, _) = minimize_bfgs(|p| (p[0] - 3.0).powi(2), &[0.0], &[-1.0], &[1.0], 100);
        assert_eq!(x[0], 1.0);
    }

    #[test]
    fn pattern_search_finds_quadratic_minimum() {
        let (x, fx) = pattern_search(
            |p| (p[0] - 0.3).powi(2) + (p[1] - 0.7).powi(2),
            &[0.5, 0.5],
            &[0.0, 0.0],
            &[1.0, 1.0],
            0.25,
            1e-4,
            1000,
        );
        assert!(fx < 1e-6);
        assert!((x[0] - 0.3).abs() < 1e-3 && (x[1] - 0.7).abs() < 1e-3);
    }

    #[test]
    fn non_finite_objective_is_avoided() {
        let f = |p: &[f64]| if p[0] > 0.5 { f64::NAN } else { -p[0] };
        let (x, fx) = pattern_search(f, &[0.0], &[0.0], &[1.0], 0.25, 1e-3, 200);
        assert!(x[0] <= 0.5 && fx.is_finite());
    }
}
