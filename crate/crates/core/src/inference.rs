//! Delta-method variance of the plug-in cutoff and Wald intervals.

use crate::cutoff::{dphi_dc, DecisionConfig};
use crate::dist::{DistSpec, Theta};
use crate::error::{Error, Result};
use crate::fit::JointCovariance;
use crate::numeric::special::two_sided_z;
use crate::numeric::Richardson;
use nalgebra::DVector;
use serde::Serialize;

/// Slope below which the cutoff is reported as weakly identified.
pub const SLOPE_TOL: f64 = 1e-3;

fn density_gradient(spec: &DistSpec, c: f64) -> Vec<f64> {
    let family = spec.family;
    Richardson::default().gradient(
        |v| match DistSpec::from_unconstrained(family, v) {
            Ok(s) => s.kernel().pdf(c),
            Err(_) => f64::NAN,
        },
        &spec.to_unconstrained().0,
    )
}

/// `∇θφ(c) = (−λ0π0 ∇θ0 f0(c), λ1π1 ∇θ1 f1(c))` in the unconstrained chart.
pub fn grad_phi_in_theta(theta: &Theta, cfg: &DecisionConfig, c: f64) -> Vec<f64> {
    let mut g: Vec<f64> = density_gradient(&theta.d0, c).into_iter().map(|d| -cfg.w0() * d).collect();
    g.extend(density_gradient(&theta.d1, c).into_iter().map(|d| cfg.w1() * d));
    g
}

/// `∇θc* = −∇θφ / ∂cφ`.
pub fn cutoff_gradient(theta: &Theta, cfg: &DecisionConfig, c: f64) -> Vec<f64> {
    let s = dphi_dc(theta, cfg, c);
    grad_phi_in_theta(theta, cfg, c).into_iter().map(|g| -g / s).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffInference {
    /// Asymptotic variance of `√n (ĉ − c*)`.
    pub v_hat: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub alpha: f64,
    pub grad_phi_theta: Vec<f64>,
    pub dphi_dc: f64,
    /// Contributions of the two groups; they sum to `v_hat`.
    pub v_group: [f64; 2],
    pub n: usize,
    /// `|∂cφ| <= 1e-3`.
    pub low_identifiability: bool,
}

/// `ĉ ± z_{1−α/2} se`.
pub fn wald_ci(c_hat: f64, se: f64, alpha: f64) -> (f64, f64) {
    let z = two_sided_z(alpha);
    (c_hat - z * se, c_hat + z * se)
}

/// `(gradᵀ Σ grad / s², per-group terms)` with `Σ` block diagonal.
fn assemble(grad: &[f64], sigma: &JointCovariance, s: f64) -> (f64, [f64; 2]) {
    let p0 = sigma.p0;
    let g = DVector::from_column_slice(grad);
    let term = |lo: usize, len: usize| {
        let gk = g.rows(lo, len);
        let block = sigma.sigma.view((lo, lo), (len, len));
        (gk.transpose() * block * gk)[(0, 0)] / (s * s)
    };
    let v0 = term(0, p0);
    let v1 = term(p0, grad.len() - p0);
    (v0 + v1, [v0, v1])
}

/// Plug-in delta-method inference for the cutoff at `c_hat`.
pub fn variance_plugin(
    theta: &Theta,
    cfg: &DecisionConfig,
    c_hat: f64,
    sigma: &JointCovariance,
    alpha: f64,
) -> Result<CutoffInference> {
    let grad = grad_phi_in_theta(theta, cfg, c_hat);
    if grad.len() != sigma.sigma.nrows() {
        return Err(Error::ParamLength { expected: sigma.sigma.nrows(), got: grad.len() });
    }
    let s = dphi_dc(theta, cfg, c_hat);
    if s == 0.0 || !s.is_finite() {
        return Err(Error::DegenerateSlope(format!("dphi/dc = {s} at c = {c_hat}")));
    }
    let low = s.abs() <= SLOPE_TOL;
    if low {
        log::warn!("weakly identified cutoff: |dphi/dc| = {:e}", s.abs());
    }
    let (v_hat, v_group) = assemble(&grad, sigma, s);
    let se = (v_hat / sigma.n as f64).sqrt();
    let (ci_lo, ci_hi) = wald_ci(c_hat, se, alpha);
    Ok(CutoffInference {
        v_hat,
        se,
        ci_lo,
        ci_hi,
        alpha,
        grad_phi_theta: grad,
        dphi_dc: s,
        v_group,
        n: sigma.n,
        low_identifiability: low,
    })
}

/// Population asymptotic variance at the true parameters, with expected
/// information and group fractions `n0/n`, `n1/n`.
pub fn population_variance(
    theta: &Theta,
    cfg: &DecisionConfig,
    c: f64,
    n0: usize,
    n1: usize,
) -> Result<f64> {
    let sigma = JointCovariance::population(&theta.d0, &theta.d1, n0, n1)?;
    Ok(variance_plugin(theta, cfg, c, &sigma, 0.05)?.v_hat)
}
