//! Weighted misclassification risk, its estimating function and the optimal
//! cutoff.

use crate::dist::Theta;
use crate::error::{Error, Result};
use crate::numeric::roots::brent;
use crate::numeric::Richardson;
use crate::roc::{youden_parametric, YoudenResult};
use serde::{Deserialize, Serialize};

/// Richardson settings for derivatives in the threshold `c`.
pub const C_DIFF: Richardson = Richardson::new(4, 1e-4);
/// Grid size of the sign-change scan of `φ`.
pub const SCAN_POINTS: usize = 256;
const MAX_EXPANSIONS: usize = 20;

/// Costs of a false positive (`lambda0`) and a false negative (`lambda1`),
/// and the group prevalences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub lambda0: f64,
    pub lambda1: f64,
    pub pi0: f64,
    pub pi1: f64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig { lambda0: 1.0, lambda1: 3.0, pi0: 0.9, pi1: 0.1 }
    }
}

impl DecisionConfig {
    pub fn new(lambda0: f64, lambda1: f64, pi0: f64, pi1: f64) -> Result<Self> {
        let cfg = DecisionConfig { lambda0, lambda1, pi0, pi1 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config from costs and the reference-group prevalence.
    pub fn from_pi0(lambda0: f64, lambda1: f64, pi0: f64) -> Result<Self> {
        Self::new(lambda0, lambda1, pi0, 1.0 - pi0)
    }

    pub fn symmetric() -> Self {
        DecisionConfig { lambda0: 1.0, lambda1: 1.0, pi0: 0.5, pi1: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.lambda0) || !pos(self.lambda1) {
            return Err(Error::InvalidParameter("costs must be positive".into()));
        }
        if !(self.pi0 > 0.0 && self.pi0 < 1.0 && self.pi1 > 0.0 && self.pi1 < 1.0) {
            return Err(Error::InvalidParameter("prevalences must lie in (0, 1)".into()));
        }
        if (self.pi0 + self.pi1 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "prevalences must sum to 1, got {}",
                self.pi0 + self.pi1
            )));
        }
        Ok(())
    }

    /// `λ0π0 / (λ1π1)`, the value of the likelihood ratio at the optimum.
    pub fn target_ratio(&self) -> f64 {
        (self.lambda0 * self.pi0) / (self.lambda1 * self.pi1)
    }

    pub fn w0(&self) -> f64 {
        self.lambda0 * self.pi0
    }

    pub fn w1(&self) -> f64 {
        self.lambda1 * self.pi1
    }
}

/// `λ1π1 F1(c) + λ0π0 (1 − F0(c))`.
pub fn risk(theta: &Theta, cfg: &DecisionConfig, c: f64) -> f64 {
    if c == f64::NEG_INFINITY {
        return cfg.w0();
    }
    if c == f64::INFINITY {
        return cfg.w1();
    }
    let (k0, k1) = theta.kernels();
    cfg.w1() * k1.cdf(c) + cfg.w0() * (1.0 - k0.cdf(c))
}

/// `∂R/∂c = λ1π1 f1(c) − λ0π0 f0(c)`.
pub fn phi(theta: &Theta, cfg: &DecisionConfig, c: f64) -> f64 {
    let (k0, k1) = theta.kernels();
    cfg.w1() * k1.pdf(c) - cfg.w0() * k0.pdf(c)
}

/// `|∂φ/∂c|` by Richardson differences.
pub fn slope_diagnostic(theta: &Theta, cfg: &DecisionConfig, c: f64) -> f64 {
    dphi_dc(theta, cfg, c).abs()
}

pub fn dphi_dc(theta: &Theta, cfg: &DecisionConfig, c: f64) -> f64 {
    let (k0, k1) = theta.kernels();
    let (w0, w1) = (cfg.w0(), cfg.w1());
    C_DIFF.derivative(|x| w1 * k1.pdf(x) - w0 * k0.pdf(x), c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleInterval {
    pub a: f64,
    pub b: f64,
    /// `φ(a) < 0 < φ(b)` on the final interval.
    pub bracketed: bool,
    pub expansions: usize,
    /// The interval before any widening.
    pub a0: f64,
    pub b0: f64,
}

impl AdmissibleInterval {
    /// Bracketed on the initial interval, without widening.
    pub fn bracketed_initially(&self) -> bool {
        self.bracketed && self.expansions == 0
    }
}

fn bracket(theta: &Theta, cfg: &DecisionConfig, a0: f64, b0: f64) -> AdmissibleInterval {
    let (mut a, mut b) = (a0, b0);
    let centre = 0.5 * (a + b);
    let mut half = 0.5 * (b - a);
    for expansions in 0..=MAX_EXPANSIONS {
        if phi(theta, cfg, a) < 0.0 && phi(theta, cfg, b) > 0.0 {
            return AdmissibleInterval { a, b, bracketed: true, expansions, a0, b0 };
        }
        if expansions == MAX_EXPANSIONS {
            break;
        }
        half *= 1.5;
        a = centre - half;
        b = centre + half;
    }
    AdmissibleInterval { a, b, bracketed: false, expansions: MAX_EXPANSIONS, a0, b0 }
}

/// Model-based interval: from the smallest lower to the largest upper
/// `alpha_tail/2` quantile of the two group laws, widened until `φ` changes
/// sign or the expansion budget is spent.
pub fn admissible_interval(
    theta: &Theta,
    cfg: &DecisionConfig,
    alpha_tail: f64,
) -> Result<AdmissibleInterval> {
    if !(alpha_tail > 0.0 && alpha_tail < 1.0) {
        return Err(Error::InvalidParameter(format!("tail mass must lie in (0, 1), got {alpha_tail}")));
    }
    let lo = 0.5 * alpha_tail;
    let hi = 1.0 - lo;
    let a = theta.d0.quantile(lo)?.min(theta.d1.quantile(lo)?);
    let b = theta.d0.quantile(hi)?.max(theta.d1.quantile(hi)?);
    Ok(bracket(theta, cfg, a, b))
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman–Fan type 7).
pub fn sample_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Data-based interval between the `lo` and `hi` percentiles of the pooled
/// sample, then bracketed as in [`admissible_interval`].
pub fn admissible_interval_empirical(
    theta: &Theta,
    cfg: &DecisionConfig,
    pooled: &[f64],
    lo: f64,
    hi: f64,
) -> Result<AdmissibleInterval> {
    if pooled.is_empty() {
        return Err(Error::Input("pooled sample is empty".into()));
    }
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidParameter(format!("bad percentile pair ({lo}, {hi})")));
    }
    let mut s = pooled.to_vec();
    s.sort_by(f64::total_cmp);
    let (a, b) = (sample_quantile(&s, lo), sample_quantile(&s, hi));
    if !(a < b) {
        return Err(Error::Input("pooled sample has no spread".into()));
    }
    Ok(bracket(theta, cfg, a, b))
}

#[derive(Clone, Debug, Serialize)]
pub struct CutoffResult {
    pub c_star: f64,
    pub risk_at_c_star: f64,
    pub c_youden: f64,
    pub risk_at_youden: f64,
    pub youden_interior: bool,
    pub c_youden_emp: Option<f64>,
    pub risk_at_youden_emp: Option<f64>,
    /// `R(c_Y) − R(c*)`.
    pub delta_risk: f64,
    pub slope_diag: f64,
    pub target_ratio: f64,
    pub interval: AdmissibleInterval,
    /// Number of sign changes of `φ` on the scan grid.
    pub sign_changes: usize,
    pub multi_root: bool,
}

impl CutoffResult {
    /// Adds the empirical Youden cutoff and its model risk.
    pub fn with_empirical_youden(mut self, theta: &Theta, cfg: &DecisionConfig, c: f64) -> Self {
        self.c_youden_emp = Some(c);
        self.risk_at_youden_emp = Some(risk(theta, cfg, c));
        self
    }
}

/// Sign changes of `φ` on an even grid over `[a, b]`: each entry is the grid
/// cell `(lo, hi)` and whether `φ` goes from negative to positive there.
pub fn sign_changes(
    theta: &Theta,
    cfg: &DecisionConfig,
    a: f64,
    b: f64,
    points: usize,
) -> Vec<(f64, f64, bool)> {
    let grid: Vec<f64> = (0..points).map(|i| a + (b - a) * i as f64 / (points - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&c| phi(theta, cfg, c)).collect();
    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for (&c, &v) in grid.iter().zip(&vals) {
        if v == 0.0 {
            continue;
        }
        if let Some((lc, lv)) = last {
            if lv.signum() != v.signum() {
                out.push((lc, c, lv < 0.0));
            }
        }
        last = Some((c, v));
    }
    out
}

fn solve_phi(theta: &Theta, cfg: &DecisionConfig, a: f64, b: f64, width: f64) -> Result<f64> {
    let (k0, k1) = theta.kernels();
    let (w0, w1) = (cfg.w0(), cfg.w1());
    let f = |c: f64| w1 * k1.pdf(c) - w0 * k0.pdf(c);
    // Run to machine precision: both |φ| < 1e-10 and a bracket narrower than
    // 1e-10·width then hold.
    Ok(brent(f, a, b, 1e-15 * width, 0.0, 300)?.x)
}

fn degenerate(theta: &Theta, cfg: &DecisionConfig, a: f64, b: f64) -> bool {
    let (k0, k1) = theta.kernels();
    (0..SCAN_POINTS).all(|i| {
        let c = a + (b - a) * i as f64 / (SCAN_POINTS - 1) as f64;
        let (p0, p1) = (cfg.w0() * k0.pdf(c), cfg.w1() * k1.pdf(c));
        (p1 - p0).abs() <= 1e-12 * p0.max(p1)
    })
}

/// Root of `φ` nearest in risk terms: the lowest-risk negative-to-positive
/// crossing on the scan grid of `[a, b]`.
pub fn lowest_risk_root(theta: &Theta, cfg: &DecisionConfig, a: f64, b: f64) -> Result<(f64, usize)> {
    let changes = sign_changes(theta, cfg, a, b, SCAN_POINTS);
    let mut best: Option<(f64, f64)> = None;
    for &(lo, hi, up) in &changes {
        if !up {
            continue;
        }
        let c = solve_phi(theta, cfg, lo, hi, b - a)?;
        let r = risk(theta, cfg, c);
        if best.is_none_or(|(_, br)| r < br) {
            best = Some((c, r));
        }
    }
    best.map(|(c, _)| (c, changes.len())).ok_or(Error::NotBracketed { a, b })
}

/// Optimal cutoff on a bracketed admissible interval, with the parametric
/// Youden cutoff computed on the same interval for comparison.
pub fn optimal_cutoff(
    theta: &Theta,
    cfg: &DecisionConfig,
    interval: &AdmissibleInterval,
) -> Result<CutoffResult> {
    cfg.validate()?;
    let (a, b) = (interval.a, interval.b);
    if degenerate(theta, cfg, a, b) {
        return Err(Error::Degenerate("the estimating function vanishes on the interval".into()));
    }
    if !interval.bracketed {
        return Err(Error::NotBracketed { a, b });
    }
    let (c_star, n_changes) = if n_sign_changes(theta, cfg, a, b) == 1 {
        (solve_phi(theta, cfg, a, b, b - a)?, 1)
    } else {
        lowest_risk_root(theta, cfg, a, b)?
    };
    if n_changes != 1 {
        log::warn!("estimating function has {n_changes} sign changes on [{a}, {b}]");
    }
    finish(theta, cfg, c_star, *interval, n_changes)
}

fn n_sign_changes(theta: &Theta, cfg: &DecisionConfig, a: f64, b: f64) -> usize {
    sign_changes(theta, cfg, a, b, SCAN_POINTS).len()
}

fn finish(
    theta: &Theta,
    cfg: &DecisionConfig,
    c_star: f64,
    interval: AdmissibleInterval,
    n_changes: usize,
) -> Result<CutoffResult> {
    let y: YoudenResult = youden_parametric(theta, interval.a, interval.b)?;
    let r_star = risk(theta, cfg, c_star);
    let r_y = risk(theta, cfg, y.c_y);
    Ok(CutoffResult {
        c_star,
        risk_at_c_star: r_star,
        c_youden: y.c_y,
        risk_at_youden: r_y,
        youden_interior: y.interior,
        c_youden_emp: None,
        risk_at_youden_emp: None,
        delta_risk: r_y - r_star,
        slope_diag: slope_diagnostic(theta, cfg, c_star),
        target_ratio: cfg.target_ratio(),
        interval,
        sign_changes: n_changes,
        multi_root: n_changes != 1,
    })
}

/// Optimal cutoff without requiring the interval endpoints to bracket: the
/// lowest-risk crossing of `φ` inside the initial interval. Used when heavy
/// fitted tails flip the sign of `φ` at the interval ends.
pub fn optimal_cutoff_local(
    theta: &Theta,
    cfg: &DecisionConfig,
    interval: &AdmissibleInterval,
) -> Result<CutoffResult> {
    cfg.validate()?;
    let (a, b) = (interval.a0, interval.b0);
    if degenerate(theta, cfg, a, b) {
        return Err(Error::Degenerate("the estimating function vanishes on the interval".into()));
    }
    let (c_star, n_changes) = lowest_risk_root(theta, cfg, a, b)?;
    let initial = AdmissibleInterval { a, b, ..*interval };
    finish(theta, cfg, c_star, initial, n_changes)
}

/// `∂g/∂c` at the Youden point, `g = ln Λ`, i.e. `(f1' − f0')/f1` there.
pub fn dg_dc_at(theta: &Theta, c: f64) -> f64 {
    let (k0, k1) = theta.kernels();
    let d1 = C_DIFF.derivative(|x| k1.pdf(x), c);
    let d0 = C_DIFF.derivative(|x| k0.pdf(x), c);
    (d1 - d0) / k1.pdf(c)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Displacement {
    pub c_star: f64,
    pub c_youden: f64,
    /// `c* − c_Y`.
    pub exact: f64,
    /// `ln(target ratio) / ∂g/∂c(c_Y)`.
    pub first_order: f64,
}

/// Exact and first-order displacement of the optimal cutoff from the Youden
/// cutoff, both located on the model admissible interval.
pub fn youden_displacement(theta: &Theta, cfg: &DecisionConfig) -> Result<Displacement> {
    let interval = admissible_interval(theta, cfg, 0.01)?;
    let sym = admissible_interval(theta, &DecisionConfig::symmetric(), 0.01)?;
    let y = youden_parametric(theta, sym.a.min(interval.a), sym.b.max(interval.b))?;
    if !y.interior {
        return Err(Error::Degenerate("Youden cutoff is not interior".into()));
    }
    let slope = dg_dc_at(theta, y.c_y);
    if !(slope.abs() >= 1e-8) {
        return Err(Error::DegenerateSlope(format!("dg/dc = {slope:e} at the Youden cutoff")));
    }
    let c_star = optimal_cutoff(theta, cfg, &interval)?.c_star;
    Ok(Displacement {
        c_star,
        c_youden: y.c_y,
        exact: c_star - y.c_y,
        first_order: cfg.target_ratio().ln() / slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistSpec;
    use crate::numeric::special::norm_pdf;

    fn binormal() -> Theta {
        Theta::new(DistSpec::normal(0.0, 1.0).unwrap(), DistSpec::normal(2.0, 1.0).unwrap())
    }

    fn sn1() -> Theta {
        Theta::new(
            DistSpec::skew_normal(0.0, 1.0, 1.0).unwrap(),
            DistSpec::skew_normal(2.0, 1.0, 1.5).unwrap(),
        )
    }

    #[test]
    fn config_validation() {
        assert!(DecisionConfig::new(1.0, 1.0, 0.5, 0.6).is_err());
        assert!(DecisionConfig::new(0.0, 1.0, 0.5, 0.5).is_err());
        let c = DecisionConfig::from_pi0(1.0, 3.0, 0.8).unwrap();
        assert!((c.target_ratio() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn risk_limits() {
        let th = sn1();
        let cfg = DecisionConfig::new(2.0, 3.0, 0.7, 0.3).unwrap();
        assert!((risk(&th, &cfg, -40.0) - 1.4).abs() < 1e-12);
        assert!((risk(&th, &cfg, 40.0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn phi_is_risk_derivative() {
        let th = sn1();
        let cfg = DecisionConfig::new(1.0, 3.0, 0.8, 0.2).unwrap();
        for c in [0.0, 1.0, 1.7, 3.0] {
            let d = Richardson::default().derivative(|x| risk(&th, &cfg, x), c);
            assert!((d - phi(&th, &cfg, c)).abs() < 1e-6);
        }
    }

    #[test]
    fn phi_binormal_value() {
        let v = phi(&binormal(), &DecisionConfig::symmetric(), 0.0);
        assert!((v - 0.5 * (norm_pdf(2.0) - norm_pdf(0.0))).abs() < 1e-15);
        assert!(v < 0.0);
    }

    #[test]
    fn sn1_interval_brackets_without_expansion() {
        let iv = admissible_interval(&sn1(), &DecisionConfig::symmetric(), 0.01).unwrap();
        assert!(iv.bracketed_initially());
    }

    #[test]
    fn identical_laws_are_degenerate() {
        let s = DistSpec::skew_normal(0.0, 1.0, 2.0).unwrap();
        let th = Theta::new(s, s);
        let cfg = DecisionConfig::symmetric();
        let iv = admissible_interval(&th, &cfg, 0.01).unwrap();
        assert!(!iv.bracketed);
        assert!(matches!(optimal_cutoff(&th, &cfg, &iv), Err(Error::Degenerate(_))));
    }

    #[test]
    fn binormal_symmetric_cutoff_is_one() {
        let cfg = DecisionConfig::symmetric();
        let th = binormal();
        let iv = admissible_interval(&th, &cfg, 0.01).unwrap();
        let r = optimal_cutoff(&th, &cfg, &iv).unwrap();
        assert!((r.c_star - 1.0).abs() < 1e-9);
        assert!((r.c_youden - 1.0).abs() < 1e-9);
        assert!(r.delta_risk.abs() < 1e-12);
        assert!(!r.multi_root);
    }

    #[test]
    fn ratio_at_optimum() {
        let th = sn1();
        let cfg = DecisionConfig::new(1.0, 3.0, 0.8, 0.2).unwrap();
        let iv = admissible_interval(&th, &cfg, 0.01).unwrap();
        let r = optimal_cutoff(&th, &cfg, &iv).unwrap();
        let lr = crate::roc::likelihood_ratio(&th, r.c_star).unwrap();
        assert!((lr / cfg.target_ratio() - 1.0).abs() < 1e-6);
        assert!(r.risk_at_c_star <= r.risk_at_youden);
    }

    #[test]
    fn binormal_displacement_is_exact() {
        let cfg = DecisionConfig::new(3.0, 1.0, 0.5, 0.5).unwrap();
        let d = youden_displacement(&binormal(), &cfg).unwrap();
        let want = 3f64.ln() / 2.0;
        assert!((d.exact - want).abs() < 1e-6);
        assert!((d.first_order - want).abs() < 1e-6);
        let d = youden_displacement(&binormal(), &DecisionConfig::symmetric()).unwrap();
        assert!(d.exact.abs() < 1e-9 && d.first_order == 0.0);
    }

    #[test]
    fn type7_quantile() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(sample_quantile(&s, 0.0), 1.0);
        assert_eq!(sample_quantile(&s, 1.0), 4.0);
        assert!((sample_quantile(&s, 0.5) - 2.5).abs() < 1e-15);
        assert!((sample_quantile(&s, 0.005) - 1.015).abs() < 1e-12);
    }
}
