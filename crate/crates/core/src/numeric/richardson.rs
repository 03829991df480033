//! Richardson-extrapolated central differences.
//!
//! Each estimate is built from central differences at steps `h, h/2, h/4, …`
//! whose truncation error is a series in `h²`; the extrapolation table
//! eliminates one even power per level.

use nalgebra::DMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Richardson {
    /// Number of step halvings (rows of the extrapolation table).
    pub levels: usize,
    /// Initial step is `rel_step * (1 + |x|)`.
    pub rel_step: f64,
}

impl Default for Richardson {
    fn default() -> Self {
        Self {
            levels: 4,
            rel_step: 1e-3,
        }
    }
}

fn extrapolate(est: &mut [f64]) -> f64 {
    let n = est.len();
    let mut factor = 1.0;
    for m in 1..n {
        factor *= 4.0;
        for k in 0..n - m {
            est[k] = (factor * est[k + 1] - est[k]) / (factor - 1.0);
        }
    }
    est[0]
}

impl Richardson {
    /// Settings for second derivatives: a larger initial step keeps the
    /// `1/h²` roundoff under control.
    pub const HESSIAN: Self = Self::new(4, 1e-2);

    pub const fn new(levels: usize, rel_step: f64) -> Self {
        Self { levels, rel_step }
    }

    pub fn step(&self, x: f64) -> f64 {
        self.rel_step * (1.0 + x.abs())
    }

    pub fn derivative<F: FnMut(f64) -> f64>(&self, f: F, x: f64) -> f64 {
        self.derivative_with_step(f, x, self.step(x))
    }

    pub fn derivative_with_step<F: FnMut(f64) -> f64>(&self, mut f: F, x: f64, h0: f64) -> f64 {
        let mut est = Vec::with_capacity(self.levels);
        let mut h = h0;
        for _ in 0..self.levels {
            est.push((f(x + h) - f(x - h)) / (2.0 * h));
            h *= 0.5;
        }
        extrapolate(&mut est)
    }

    pub fn second_derivative<F: FnMut(f64) -> f64>(&self, mut f: F, x: f64) -> f64 {
        let f0 = f(x);
        let mut est = Vec::with_capacity(self.levels);
        let mut h = self.step(x);
        for _ in 0..self.levels {
            est.push((f(x + h) - 2.0 * f0 + f(x - h)) / (h * h));
            h *= 0.5;
        }
        extrapolate(&mut est)
    }

    pub fn gradient<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x: &[f64]) -> Vec<f64> {
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|j| {
                let g = self.derivative(
                    |t| {
                        probe[j] = t;
                        f(&probe)
                    },
                    x[j],
                );
                probe[j] = x[j];
                g
            })
            .collect()
    }

    pub fn hessian<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x: &[f64]) -> DMatrix<f64> {
        let p = x.len();
        let f0 = f(x);
        let mut probe = x.to_vec();
        let mut hess = DMatrix::zeros(p, p);
        let mut est = vec![0.0; self.levels];
        for i in 0..p {
            let mut h = self.step(x[i]);
            for e in est.iter_mut() {
                probe[i] = x[i] + h;
                let fp = f(&probe);
                probe[i] = x[i] - h;
                let fm = f(&probe);
                *e = (fp - 2.0 * f0 + fm) / (h * h);
                h *= 0.5;
            }
            probe[i] = x[i];
            hess[(i, i)] = extrapolate(&mut est);
        }
        for i in 0..p {
            for j in 0..i {
                let mut hi = self.step(x[i]);
                let mut hj = self.step(x[j]);
                for e in est.iter_mut() {
                    let mut corner = |si: f64, sj: f64| {
                        probe[i] = x[i] + si * hi;
                        probe[j] = x[j] + sj * hj;
                        f(&probe)
                    };
                    let v = corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0)
                        + corner(-1.0, -1.0);
                    *e = v / (4.0 * hi * hj);
                    hi *= 0.5;
                    hj *= 0.5;
                }
                probe[i] = x[i];
                probe[j] = x[j];
                let v = extrapolate(&mut est);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        hess
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_smooth_function() {
        let r = Richardson::default();
        let d = r.derivative(f64::sin, 0.7);
        assert!((d - 0.7f64.cos()).abs() < 1e-12);
        let d2 = Richardson::HESSIAN.second_derivative(f64::exp, 0.3);
        assert!((d2 - 0.3f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn hessian_of_cubic_matches_analytic() {
        // f = x³ + 2x²y − y³ + 3xz + z²y
        let f = |v: &[f64]| {
            let (x, y, z) = (v[0], v[1], v[2]);
            x.powi(3) + 2.0 * x * x * y - y.powi(3) + 3.0 * x * z + z * z * y
        };
        let p = [0.4, -1.2, 2.5];
        let (x, y, z) = (p[0], p[1], p[2]);
        let analytic = DMatrix::from_row_slice(
            3,
            3,
            &[
                6.0 * x + 4.0 * y,
                4.0 * x,
                3.0,
                4.0 * x,
                -6.0 * y,
                2.0 * z,
                3.0,
                2.0 * z,
                2.0 * y,
            ],
        );
        let h = Richardson::HESSIAN.hessian(f, &p);
        assert!((h - analytic).amax() < 1e-8);
    }

    #[test]
    fn gradient_of_quadratic_form() {
        let f = |v: &[f64]| 3.0 * v[0] * v[0] + v[0] * v[1] - 2.0 * v[1] * v[1];
        let g = Richardson::default().gradient(f, &[1.5, -0.5]);
        assert!((g[0] - 8.5).abs() < 1e-10);
        assert!((g[1] - 3.5).abs() < 1e-10);
    }

    #[test]
    fn extrapolation_beats_plain_central_difference() {
        let plain = Richardson::new(1, 1e-2);
        let rich = Richardson::new(4, 1e-2);
        let x: f64 = 1.1;
        let exact = x.exp();
        let e1 = (plain.derivative(f64::exp, x) - exact).abs();
        let e4 = (rich.derivative(f64::exp, x) - exact).abs();
        assert!(e4 < e1 * 1e-4);
    }
}
