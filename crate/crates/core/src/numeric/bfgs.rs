//! BFGS quasi-Newton minimiser with a backtracking Armijo line search.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged when the max-norm of the gradient falls below this.
    pub grad_tol: f64,
    /// Also converged when the relative objective decrease stalls below this
    /// for three consecutive iterations.
    pub f_rel_tol: f64,
    /// Upper bound on the Euclidean length of a single step.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 400,
            grad_tol: 1e-6,
            f_rel_tol: 1e-14,
            max_step: 2.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn minimize<F, G>(mut f: F, mut grad: G, x0: &[f64], opts: BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    let p = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    let mut g = DVector::from_vec(grad(x.as_slice()));
    let mut h_inv = DMatrix::<f64>::identity(p, p);
    let mut first = true;
    let mut stalls = 0;

    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return BfgsOutcome {
            x: x.as_slice().to_vec(),
            f: fx,
            grad: g.as_slice().to_vec(),
            iterations: 0,
            converged: false,
        };
    }

    for it in 1..=opts.max_iter {
        if max_abs(&g) < opts.grad_tol {
            return BfgsOutcome {
                x: x.as_slice().to_vec(),
                f: fx,
                grad: g.as_slice().to_vec(),
                iterations: it - 1,
                converged: true,
            };
        }
        let mut dir = -(&h_inv * &g);
        let mut slope = dir.dot(&g);
        if slope >= 0.0 || !slope.is_finite() {
            h_inv = DMatrix::identity(p, p);
            dir = -g.clone();
            slope = dir.dot(&g);
        }
        let len = dir.norm();
        if len > opts.max_step {
            dir *= opts.max_step / len;
            slope *= opts.max_step / len;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial = &x + &dir * step;
            let ft = f(trial.as_slice());
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // Line search failed; a steepest-descent restart may still recover.
            if first {
                break;
            }
            h_inv = DMatrix::identity(p, p);
            first = true;
            continue;
        };
        let g_new = DVector::from_vec(grad(x_new.as_slice()));
        if g_new.iter().any(|v| !v.is_finite()) {
            break;
        }
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                let scale = sy / y.dot(&y);
                h_inv = DMatrix::identity(p, p) * scale;
                first = false;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            h_inv += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }

        let decrease = fx - f_new;
        if decrease <= opts.f_rel_tol * fx.abs().max(1.0) {
            stalls += 1;
        } else {
            stalls = 0;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if stalls >= 3 {
            return BfgsOutcome {
                x: x.as_slice().to_vec(),
                f: fx,
                grad: g.as_slice().to_vec(),
                iterations: it,
                converged: max_abs(&g) < opts.grad_tol * 100.0,
            };
        }
    }
    let converged = max_abs(&g) < opts.grad_tol;
    BfgsOutcome {
        x: x.as_slice().to_vec(),
        f: fx,
        grad: g.as_slice().to_vec(),
        iterations: opts.max_iter,
        converged,
    }
}
