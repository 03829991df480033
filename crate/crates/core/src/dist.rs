//! Skew-normal and skew-t laws in the Azzalini–Capitanio parametrisation.
//!
//! A [`DistSpec`] stores the natural parameters `(ξ, ω, α[, ν])`. Fitting and
//! all parameter-space derivatives work in the unconstrained chart
//! `(ξ, log ω, α[, log(ν − 2)])`, see [`UnconstrainedVec`].

use crate::error::{Error, Result};
use crate::numeric::quad::{integrate_lower_tail, integrate_upper_tail, QuadOptions};
use crate::numeric::special::{
    ln_gamma_half_ratio, norm_cdf, norm_ln_cdf, norm_quantile, t_cdf, t_ln_cdf,
};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "sn")]
    SkewNormal,
    #[serde(rename = "st")]
    SkewT,
}

impl Family {
    /// Number of free parameters (3 for SN, 4 for ST).
    pub fn n_params(self) -> usize {
        match self {
            Family::SkewNormal => 3,
            Family::SkewT => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::SkewNormal => "SN",
            Family::SkewT => "ST",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sn" | "skew-normal" | "skewnormal" => Ok(Family::SkewNormal),
            "st" | "skew-t" | "skewt" => Ok(Family::SkewT),
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Deserialize)]
struct RawDistSpec {
    family: Family,
    xi: f64,
    omega: f64,
    alpha: f64,
    #[serde(default)]
    nu: Option<f64>,
}

/// A fully specified skew-normal or skew-t law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistSpec")]
pub struct DistSpec {
    pub family: Family,
    pub xi: f64,
    pub omega: f64,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

impl TryFrom<RawDistSpec> for DistSpec {
    type Error = Error;

    fn try_from(raw: RawDistSpec) -> Result<Self> {
        let spec = DistSpec {
            family: raw.family,
            xi: raw.xi,
            omega: raw.omega,
            alpha: raw.alpha,
            nu: match raw.family {
                Family::SkewNormal => None,
                Family::SkewT => raw.nu,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parameters in the unconstrained chart: `(ξ, log ω, α)` or
/// `(ξ, log ω, α, log(ν − 2))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedVec(pub Vec<f64>);

impl UnconstrainedVec {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl DistSpec {
    pub fn skew_normal(xi: f64, omega: f64, alpha: f64) -> Result<Self> {
        let s = DistSpec { family: Family::SkewNormal, xi, omega, alpha, nu: None };
        s.validate()?;
        Ok(s)
    }

    pub fn skew_t(xi: f64, omega: f64, alpha: f64, nu: f64) -> Result<Self> {
        let s = DistSpec { family: Family::SkewT, xi, omega, alpha, nu: Some(nu) };
        s.validate()?;
        Ok(s)
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::skew_normal(mean, sd, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.xi.is_finite() || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter("xi and alpha must be finite".into()));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be > 0, got {}", self.omega)));
        }
        match (self.family, self.nu) {
            (Family::SkewNormal, None) => Ok(()),
            (Family::SkewNormal, Some(_)) => {
                Err(Error::InvalidParameter("skew-normal takes no nu".into()))
            }
            (Family::SkewT, Some(nu)) if nu > 2.0 && !nu.is_nan() => Ok(()),
            (Family::SkewT, nu) => {
                Err(Error::InvalidParameter(format!("skew-t requires nu > 2, got {nu:?}")))
            }
        }
    }

    /// `ν`, or `+∞` for the skew-normal.
    pub fn dof(&self) -> f64 {
        self.nu.unwrap_or(f64::INFINITY)
    }

    pub fn to_unconstrained(&self) -> UnconstrainedVec {
        let mut v = vec![self.xi, self.omega.ln(), self.alpha];
        if let Some(nu) = self.nu {
            v.push((nu - 2.0).ln());
        }
        UnconstrainedVec(v)
    }

    pub fn from_unconstrained(family: Family, v: &[f64]) -> Result<Self> {
        if v.len() != family.n_params() {
            return Err(Error::ParamLength { expected: family.n_params(), got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("unconstrained parameters must be finite".into()));
        }
        let spec = DistSpec {
            family,
            xi: v[0],
            omega: v[1].exp(),
            alpha: v[2],
            nu: match family {
                Family::SkewNormal => None,
                Family::SkewT => Some(2.0 + v[3].exp()),
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same law after the affine map `x ↦ scale·x + shift` (`scale > 0`).
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        DistSpec { xi: scale * self.xi + shift, omega: scale * self.omega, ..*self }
    }

    pub fn kernel(&self) -> Kernel {
        Kernel::new(self)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.kernel().ln_pdf(x)
    }

    /// Density at `x`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("density evaluated at non-finite x = {x}")));
        }
        Ok(self.kernel().pdf(x))
    }

    /// Distribution function, by adaptive quadrature of the density when no
    /// closed form is available (`α ≠ 0`).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::Domain("cdf evaluated at NaN".into()));
        }
        if x == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if x == f64::INFINITY {
            return Ok(1.0);
        }
        Ok(self.kernel().cdf(x))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {p}")));
        }
        Ok(self.kernel().quantile(p))
    }

    /// Mean, `ξ + ω δ b_ν` (infinite for `ν <= 1`, which the spec excludes).
    pub fn mean(&self) -> f64 {
        let delta = self.alpha / (1.0 + self.alpha * self.alpha).sqrt();
        let b = match self.nu {
            None => (2.0 / PI).sqrt(),
            Some(nu) => {
                // b_ν = √(ν/π) Γ((ν−1)/2)/Γ(ν/2)
                (nu / PI).sqrt() * (-ln_gamma_half_ratio(0.5 * (nu - 1.0))).exp()
            }
        };
        self.xi + self.omega * delta * b
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let delta = self.alpha / (1.0 + self.alpha * self.alpha).sqrt();
        let comp = (1.0 - delta * delta).sqrt();
        let chi = self.nu.map(|nu| (ChiSquared::new(nu).expect("nu > 2 validated"), nu));
        (0..n)
            .map(|_| {
                let u0: f64 = StandardNormal.sample(rng);
                let u1: f64 = StandardNormal.sample(rng);
                let mut z = delta * u0.abs() + comp * u1;
                if let Some((chi, nu)) = &chi {
                    let v: f64 = chi.sample(rng);
                    z /= (v / nu).sqrt();
                }
                self.xi + self.omega * z
            })
            .collect()
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Four decimals unless the caller asks for a precision.
        let p = f.precision().unwrap_or(4);
        match self.nu {
            None => write!(f, "SN(xi={:.p$}, omega={:.p$}, alpha={:.p$})", self.xi, self.omega, self.alpha),
            Some(nu) => write!(
                f,
                "ST(xi={:.p$}, omega={:.p$}, alpha={:.p$}, nu={:.p$})",
                self.xi, self.omega, self.alpha, nu
            ),
        }
    }
}

/// Density evaluator with the normalising constants precomputed, for loops
/// over many points with fixed parameters.
#[derive(Clone, Copy, Debug)]
pub struct Kernel {
    xi: f64,
    omega: f64,
    alpha: f64,
    nu: Option<f64>,
    ln_scale: f64,
    // ln Γ((ν+1)/2) − ln Γ(ν/2) − ½ ln(νπ)
    t_const: f64,
}

impl Kernel {
    fn new(spec: &DistSpec) -> Self {
        let t_const = match spec.nu {
            Some(nu) => ln_gamma_half_ratio(0.5 * nu) - 0.5 * (nu * PI).ln(),
            None => 0.0,
        };
        Kernel {
            xi: spec.xi,
            omega: spec.omega,
            alpha: spec.alpha,
            nu: spec.nu,
            ln_scale: LN_2 - spec.omega.ln(),
            t_const,
        }
    }

    /// Log density of the standardised variable `z`, without the `ln(2/ω)`.
    #[inline]
    fn ln_std(&self, z: f64) -> f64 {
        match self.nu {
            None => -0.5 * z * z - LN_SQRT_2PI + norm_ln_cdf(self.alpha * z),
            Some(nu) => {
                let q = z * z / nu;
                let base = self.t_const - 0.5 * (nu + 1.0) * q.ln_1p();
                if self.alpha == 0.0 {
                    return base - LN_2;
                }
                let w = self.alpha * z * ((nu + 1.0) / (nu + z * z)).sqrt();
                base + t_ln_cdf(w, nu + 1.0)
            }
        }
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.xi) / self.omega;
        self.ln_scale + self.ln_std(z)
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Standardised density `2 f(z)`-style integrand: the density of
    /// `(X − ξ)/ω`.
    fn std_pdf(&self, z: f64) -> f64 {
        (LN_2 + self.ln_std(z)).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.xi) / self.omega;
        if self.alpha == 0.0 {
            return match self.nu {
                None => norm_cdf(z),
                Some(nu) => t_cdf(z, nu),
            };
        }
        let opts = QuadOptions::default();
        let v = if z <= 0.0 {
            integrate_lower_tail(|u| self.std_pdf(u), z, opts).value
        } else {
            1.0 - integrate_upper_tail(|u| self.std_pdf(u), z, opts).value
        };
        v.clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if self.alpha == 0.0 && self.nu.is_none() {
            return self.xi + self.omega * norm_quantile(p);
        }
        // Work on the standardised scale: G(z) = F(ξ + ωz).
        let std = Kernel { xi: 0.0, omega: 1.0, ln_scale: LN_2, ..*self };
        let target = |z: f64| std.cdf(z) - p;

        let mut lo = -50.0;
        let mut hi = 50.0;
        let mut f_lo = target(lo);
        while f_lo > 0.0 && lo > -1e12 {
            lo *= 2.0;
            f_lo = target(lo);
        }
        let mut f_hi = target(hi);
        while f_hi < 0.0 && hi < 1e12 {
            hi *= 2.0;
            f_hi = target(hi);
        }

        let tol = 1e-13 * p.min(1.0 - p);
        let mut z = norm_quantile(p).clamp(lo, hi);
        for _ in 0..200 {
            let fz = target(z);
            if fz.abs() <= tol {
                break;
            }
            if fz < 0.0 {
                lo = z;
            } else {
                hi = z;
            }
            if hi - lo <= 1e-14 * (1.0 + z.abs()) {
                break;
            }
            let dens = std.std_pdf(z);
            let newton = z - fz / dens;
            z = if dens > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        self.xi + self.omega * z
    }
}

/// Summed log density of `data` under `spec`.
pub fn log_likelihood(spec: &DistSpec, data: &[f64]) -> f64 {
    let k = spec.kernel();
    data.iter().map(|&x| k.ln_pdf(x)).sum()
}

/// The pair of group laws: `d0` for the reference (D = 0) group and `d1` for
/// the diseased (D = 1) group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub d0: DistSpec,
    pub d1: DistSpec,
}

impl Theta {
    pub fn new(d0: DistSpec, d1: DistSpec) -> Self {
        Theta { d0, d1 }
    }

    pub fn kernels(&self) -> (Kernel, Kernel) {
        (self.d0.kernel(), self.d1.kernel())
    }

    pub fn p0(&self) -> usize {
        self.d0.family.n_params()
    }

    pub fn p1(&self) -> usize {
        self.d1.family.n_params()
    }

    /// Stacked unconstrained vector `(θ0, θ1)`.
    pub fn to_unconstrained(&self) -> Vec<f64> {
        let mut v = self.d0.to_unconstrained().0;
        v.extend(self.d1.to_unconstrained().0);
        v
    }

    pub fn from_unconstrained(f0: Family, f1: Family, v: &[f64]) -> Result<Self> {
        let p0 = f0.n_params();
        if v.len() != p0 + f1.n_params() {
            return Err(Error::ParamLength { expected: p0 + f1.n_params(), got: v.len() });
        }
        Ok(Theta {
            d0: DistSpec::from_unconstrained(f0, &v[..p0])?,
            d1: DistSpec::from_unconstrained(f1, &v[p0..])?,
        })
    }

    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        Theta { d0: self.d0.affine(scale, shift), d1: self.d1.affine(scale, shift) }
    }

    pub fn swapped(&self) -> Self {
        Theta { d0: self.d1, d1: self.d0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::special::{norm_pdf, t_pdf};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sn(xi: f64, omega: f64, alpha: f64) -> DistSpec {
        DistSpec::skew_normal(xi, omega, alpha).unwrap()
    }

    fn st(xi: f64, omega: f64, alpha: f64, nu: f64) -> DistSpec {
        DistSpec::skew_t(xi, omega, alpha, nu).unwrap()
    }

    #[test]
    fn pdf_reference_values() {
        assert!((sn(0.0, 1.0, 0.0).pdf(0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((sn(0.0, 1.0, 1.0).pdf(0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        // 2 φ(1) Φ(1)
        assert!((sn(0.0, 1.0, 1.0).pdf(1.0).unwrap() - 0.407_161_595_553_160_04).abs() < 1e-14);
        assert!((st(0.0, 1.0, 0.0, 5.0).pdf(0.0).unwrap() - t_pdf(0.0, 5.0)).abs() < 1e-15);
    }

    #[test]
    fn pdf_rejects_non_finite() {
        assert!(matches!(sn(0.0, 1.0, 1.0).pdf(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(sn(0.0, 1.0, 1.0).pdf(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn cdf_symmetric_cases() {
        assert_eq!(sn(0.0, 1.0, 0.0).cdf(0.0).unwrap(), 0.5);
        assert!((st(0.0, 1.0, 0.0, 5.0).cdf(0.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cdf_at_location_matches_owen_t_closed_form() {
        // F(ξ) = 1/2 − arctan(α)/π for the skew-normal.
        let v = sn(0.0, 1.0, 5.0).cdf(0.0).unwrap();
        assert!((v - 0.062_832_958_189_001_18).abs() < 1e-12);
        let v = sn(3.0, 2.0, -0.7).cdf(3.0).unwrap();
        assert!((v - (0.5 + 0.7f64.atan() / PI)).abs() < 1e-12);
    }

    #[test]
    fn cdf_quadrature_vs_fine_trapezoid() {
        // independent oracle: composite trapezoid on a fine grid
        let spec = sn(0.0, 1.0, 5.0);
        let (a, b, n) = (-12.0, 0.0, 200_000);
        let h = (b - a) / n as f64;
        let mut acc = 0.5 * (spec.pdf(a).unwrap() + spec.pdf(b).unwrap());
        for i in 1..n {
            acc += spec.pdf(a + i as f64 * h).unwrap();
        }
        let trap = acc * h;
        assert!((spec.cdf(0.0).unwrap() - trap).abs() < 1e-9);
    }

    #[test]
    fn alpha_zero_reduces_to_symmetric_laws() {
        for i in -40..=40 {
            let x = i as f64 * 0.2;
            let g = sn(0.0, 1.0, 0.0);
            assert!((g.pdf(x).unwrap() - norm_pdf(x)).abs() < 1e-15);
            // quadrature route for α = 1e-300 exercises the general path
            let almost = sn(0.0, 1.0, 1e-300);
            assert!((almost.cdf(x).unwrap() - norm_cdf(x)).abs() < 1e-10, "x={x}");
            let t = st(0.0, 1.0, 1e-300, 6.5);
            assert!((t.cdf(x).unwrap() - t_cdf(x, 6.5)).abs() < 1e-9, "x={x}");
            assert!((t.pdf(x).unwrap() - t_pdf(x, 6.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(sn(0.0, 1.0, 0.0).quantile(0.5).unwrap(), 0.0);
        let spec = sn(2.0, 1.0, 1.5);
        let p = spec.cdf(2.7).unwrap();
        assert!((spec.quantile(p).unwrap() - 2.7).abs() < 1e-6);
        let spec = st(0.0, 1.0, 1.0, 8.0);
        let v = spec.quantile(0.99).unwrap();
        assert!((spec.cdf(v).unwrap() - 0.99).abs() < 1e-8);
    }

    #[test]
    fn quantile_by_bisection_oracle() {
        let spec = st(0.0, 1.0, 1.0, 8.0);
        let (mut lo, mut hi) = (-100.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spec.cdf(mid).unwrap() < 0.99 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((spec.quantile(0.99).unwrap() - 0.5 * (lo + hi)).abs() < 1e-9);
    }

    #[test]
    fn quantile_domain() {
        let spec = sn(0.0, 1.0, 1.0);
        for p in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(spec.quantile(p), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn unconstrained_examples() {
        assert_eq!(sn(2.0, 1.0, 1.5).to_unconstrained().0, vec![2.0, 0.0, 1.5]);
        assert_eq!(st(0.0, 1.0, 1.0, 3.0).to_unconstrained().0, vec![0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            DistSpec::from_unconstrained(Family::SkewT, &[0.0, 0.0, 1.0]),
            Err(Error::ParamLength { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn json_schema() {
        let s = serde_json::to_string(&sn(0.5, 2.0, -1.0)).unwrap();
        assert_eq!(s, r#"{"family":"sn","xi":0.5,"omega":2.0,"alpha":-1.0}"#);
        let t: DistSpec =
            serde_json::from_str(r#"{"family":"st","xi":0,"omega":1,"alpha":1,"nu":5}"#).unwrap();
        assert_eq!(t, st(0.0, 1.0, 1.0, 5.0));
        assert!(serde_json::from_str::<DistSpec>(
            r#"{"family":"st","xi":0,"omega":1,"alpha":1,"nu":1.5}"#
        )
        .is_err());
        assert!(serde_json::from_str::<DistSpec>(
            r#"{"family":"sn","xi":0,"omega":-1,"alpha":1}"#
        )
        .is_err());
    }

    #[test]
    fn sampler_moments() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let n = 100_000;
        let mean_var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let s = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, s)
        };
        let (m, v) = mean_var(&sn(0.0, 1.0, 0.0).sample(n, &mut rng));
        assert!(m.abs() < 0.02 && (v - 1.0).abs() < 0.03);
        let (m, _) = mean_var(&sn(0.0, 1.0, 1.0).sample(n, &mut rng));
        // δ √(2/π) with δ = 1/√2
        assert!((m - 0.564_189_583_547_756_3).abs() < 0.02);
        let (_, v) = mean_var(&st(0.0, 1.0, 0.0, 5.0).sample(n, &mut rng));
        assert!((v - 5.0 / 3.0).abs() < 0.1);
    }

    #[test]
    fn closed_form_mean() {
        assert!((sn(0.0, 1.0, 1.0).mean() - 0.564_189_583_547_756_3).abs() < 1e-15);
        assert!((st(1.0, 2.0, 0.0, 4.0).mean() - 1.0).abs() < 1e-15);
    }
}
