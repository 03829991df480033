//! Parametric ROC curve, AUC, likelihood ratio and Youden cutoffs.

use crate::dist::Theta;
use crate::error::{Error, Result};
use crate::numeric::quad::{integrate_vec_real_line, QuadOptions};
use crate::numeric::roots::brent;
use serde::Serialize;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub fpf: f64,
    pub tpf: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub theta: Theta,
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fpf", "tpf"])?;
        for p in &self.points {
            w.write_record([p.fpf.to_string(), p.tpf.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(r, 1 − F1(Q0(1 − r)))`.
pub fn roc_point(theta: &Theta, r: f64) -> Result<RocPoint> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("false positive fraction must lie in (0, 1), got {r}")));
    }
    let c = theta.d0.quantile(1.0 - r)?;
    Ok(RocPoint { fpf: r, tpf: 1.0 - theta.d1.cdf(c)? })
}

/// The curve on `m` interior points `r = i/(m+1)` plus both corners.
pub fn roc_curve(theta: &Theta, m: usize) -> Result<RocCurve> {
    let mut points = Vec::with_capacity(m + 2);
    points.push(RocPoint { fpf: 0.0, tpf: 0.0 });
    for i in 1..=m {
        points.push(roc_point(theta, i as f64 / (m + 1) as f64)?);
    }
    points.push(RocPoint { fpf: 1.0, tpf: 1.0 });
    Ok(RocCurve { points, theta: *theta })
}

/// `ln Λ(c) = ln f1(c) − ln f0(c)`.
pub fn ln_likelihood_ratio(theta: &Theta, c: f64) -> Result<f64> {
    if !c.is_finite() {
        return Err(Error::Domain(format!("likelihood ratio at non-finite c = {c}")));
    }
    let (k0, k1) = theta.kernels();
    let (l0, l1) = (k0.ln_pdf(c), k1.ln_pdf(c));
    if l0 == f64::NEG_INFINITY && l1 == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("both densities vanish at c = {c}")));
    }
    Ok(l1 - l0)
}

/// `Λ(c) = f1(c)/f0(c)`, formed in log space.
pub fn likelihood_ratio(theta: &Theta, c: f64) -> Result<f64> {
    ln_likelihood_ratio(theta, c).map(f64::exp)
}

/// Trapezoidal AUC with `h` panels on the false-positive axis.
pub fn auc(theta: &Theta, h: usize) -> Result<f64> {
    if h < 10 {
        return Err(Error::InvalidParameter(format!("AUC needs at least 10 panels, got {h}")));
    }
    let (k0, k1) = theta.kernels();
    let step = 1.0 / h as f64;
    // Endpoints contribute 0 and 1/2.
    let mut sum = 0.5;
    for i in 1..h {
        let u = i as f64 * step;
        let c = k0.quantile(1.0 - u);
        sum += 1.0 - k1.cdf(c);
    }
    Ok(sum * step)
}

/// `P(X1 > X0) = ∫ F0 f1` by adaptive quadrature; a reference value for the
/// trapezoidal [`auc`], whose error near a steep ROC corner is `O(h⁻²)` but
/// not small at `h = 1000`.
pub fn auc_integral(theta: &Theta) -> f64 {
    let (k0, k1) = theta.kernels();
    let centre = 0.5 * (theta.d0.xi + theta.d1.xi);
    let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-11, max_intervals: 400 };
    integrate_vec_real_line(
        |x, out: &mut [f64]| {
            let d = k1.pdf(x);
            out[0] = if d > 0.0 { d * k0.cdf(x) } else { 0.0 };
        },
        1,
        centre,
        opts,
    )[0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum YoudenMethod {
    Parametric,
    Empirical,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct YoudenResult {
    pub c_y: f64,
    pub j: f64,
    pub method: YoudenMethod,
    /// False when the maximiser sits on the boundary of the search interval.
    pub interior: bool,
}

pub fn youden_index(theta: &Theta, c: f64) -> f64 {
    let (k0, k1) = theta.kernels();
    k0.cdf(c) - k1.cdf(c)
}

const YOUDEN_SCAN: usize = 64;

/// Maximiser of `F0 − F1` on `[a, b]`: a root of `f0 = f1` where `J` turns
/// from increasing to decreasing, else golden-section search on `J`.
pub fn youden_parametric(theta: &Theta, a: f64, b: f64) -> Result<YoudenResult> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
    }
    let (k0, k1) = theta.kernels();
    // Sign of J'(c) = f0 − f1, in log space.
    let d = |c: f64| k0.ln_pdf(c) - k1.ln_pdf(c);
    let grid: Vec<f64> =
        (0..YOUDEN_SCAN).map(|i| a + (b - a) * i as f64 / (YOUDEN_SCAN - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&c| d(c)).collect();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..YOUDEN_SCAN - 1 {
        if vals[i] > 0.0 && vals[i + 1] <= 0.0 {
            let c = if vals[i + 1] == 0.0 {
                grid[i + 1]
            } else {
                brent(d, grid[i], grid[i + 1], 1e-13 * (1.0 + grid[i].abs()), 0.0, 200)?.x
            };
            let j = k0.cdf(c) - k1.cdf(c);
            if best.is_none_or(|(_, bj)| j > bj) {
                best = Some((c, j));
            }
        }
    }
    if let Some((c_y, j)) = best {
        return Ok(YoudenResult { c_y, j, method: YoudenMethod::Parametric, interior: true });
    }
    let (c_y, j) = golden_max(|c| k0.cdf(c) - k1.cdf(c), a, b, 1e-10 * (b - a));
    let interior = c_y - a > 1e-6 * (b - a) && b - c_y > 1e-6 * (b - a);
    if !interior {
        log::warn!("Youden maximiser on the boundary of [{a}, {b}]");
    }
    Ok(YoudenResult { c_y, j, method: YoudenMethod::Parametric, interior })
}

fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (fa0, fb0) = (f(a), f(b));
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    [(mid, fm), (a.min(b), fa0), (b.max(a), fb0)]
        .into_iter()
        .fold((mid, fm), |acc, (x, v)| if v > acc.1 { (x, v) } else { acc })
}

/// Empirical Youden cutoff: the smallest candidate threshold maximising
/// `F̂0(c) − F̂1(c)`, candidates being the pooled order statistics and the
/// midpoints between neighbours. Values `<= c` are classed negative.
pub fn youden_empirical(data0: &[f64], data1: &[f64]) -> Result<YoudenResult> {
    if data0.is_empty() || data1.is_empty() {
        return Err(Error::Input("empirical Youden needs two non-empty samples".into()));
    }
    let sorted = |d: &[f64]| {
        let mut v = d.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let s0 = sorted(data0);
    let s1 = sorted(data1);
    let mut pooled: Vec<f64> = s0.iter().chain(s1.iter()).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();

    // J = c0/n0 − c1/n1; compared through the exact integer numerator
    // c0·n1 − c1·n0 so that ties resolve to the smallest threshold.
    let (n0, n1) = (s0.len() as i64, s1.len() as i64);
    let score = |c: f64| {
        let c0 = s0.partition_point(|&x| x <= c) as i64;
        let c1 = s1.partition_point(|&x| x <= c) as i64;
        c0 * n1 - c1 * n0
    };
    let mut best = (pooled[0], score(pooled[0]));
    for i in 0..pooled.len() {
        let mut consider = |c: f64| {
            let j = score(c);
            if j > best.1 {
                best = (c, j);
            }
        };
        if i > 0 {
            consider(0.5 * (pooled[i - 1] + pooled[i]));
        }
        consider(pooled[i]);
    }
    let best = (best.0, best.1 as f64 / (n0 * n1) as f64);
    Ok(YoudenResult { c_y: best.0, j: best.1, method: YoudenMethod::Empirical, interior: true })
}
