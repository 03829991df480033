//! Normal and Student-t special functions with log-space tails.
//!
//! `erfc` and `lgamma` come from `libm`; `statrs` supplies the inverse error
//! function, which is refined by one Halley step here. The Student-t
//! distribution function is computed here because the continued fraction in
//! `statrs::function::beta` stops after 140 terms, which is not enough for the
//! large degrees of freedom a skew-t likelihood wanders into when the data are
//! close to Gaussian.

use libm::{erfc, lgamma as ln_gamma};
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Two-sided 97.5% standard normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

/// Degrees of freedom above which the t distribution function is replaced by
/// a normalising transformation. Below this the continued fraction is both
/// accurate and cheap.
const T_NORMAL_SWITCH: f64 = 1e10;

const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, accurate far into the lower tail.
pub fn norm_ln_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * erfc(x * FRAC_1_SQRT_2)).ln_1p()
    } else if x > -35.0 {
        (0.5 * erfc(-x * FRAC_1_SQRT_2)).ln()
    } else {
        // Mills-ratio asymptotic series.
        let r = 1.0 / (x * x);
        let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
        -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let z = -SQRT_2 * erfc_inv(2.0 * p);
    // Halley refinement against the accurate erfc.
    let e = if p < 0.5 { norm_cdf(z) - p } else { (1.0 - p) - norm_cdf(-z) };
    let u = e / norm_pdf(z);
    z - u / (1.0 + 0.5 * z * u)
}

/// `z_{1-alpha/2}`; exact constant for the default 5% level.
pub fn two_sided_z(alpha: f64) -> f64 {
    if (alpha - 0.05).abs() < 1e-15 {
        Z_975
    } else {
        norm_quantile(1.0 - 0.5 * alpha)
    }
}

/// `ln Γ(a + 1/2) − ln Γ(a)` without cancellation for large `a`.
pub fn ln_gamma_half_ratio(a: f64) -> f64 {
    if a >= 20.0 {
        let r = 1.0 / a;
        let r2 = r * r;
        0.5 * a.ln() - r / 8.0
            + r * r2 * (1.0 / 192.0 - r2 * (1.0 / 640.0 - r2 * 17.0 / 14336.0))
    } else {
        ln_gamma(a + 0.5) - ln_gamma(a)
    }
}

/// Log density of the standard Student t with `k` degrees of freedom.
pub fn t_ln_pdf(x: f64, k: f64) -> f64 {
    ln_gamma_half_ratio(0.5 * k) - 0.5 * (k * PI).ln() - 0.5 * (k + 1.0) * (x * x / k).ln_1p()
}

pub fn t_pdf(x: f64, k: f64) -> f64 {
    t_ln_pdf(x, k).exp()
}

/// Lentz evaluation of the incomplete beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// `ln P(T_k <= -|w|)`.
fn t_ln_lower_tail(w: f64, k: f64) -> f64 {
    let w2 = w * w;
    if w2 == 0.0 {
        return -LN_2;
    }
    if k > T_NORMAL_SWITCH {
        let q = 1.0 / (4.0 * k);
        let z = -w.abs() * (1.0 - q) / (1.0 + w2 * 2.0 * q).sqrt();
        return norm_ln_cdf(z);
    }
    // Tail = I_x(k/2, 1/2) / 2 with x = k/(k+w²); keep x and 1-x separately.
    let a = 0.5 * k;
    let b = 0.5;
    let ln_x = -(w2 / k).ln_1p();
    let ln_y = w2.ln() - (k + w2).ln();
    let x = ln_x.exp();
    let y = w2 / (k + w2);
    // ln B(a, 1/2) = ln Γ(1/2) − [ln Γ(a+1/2) − ln Γ(a)]
    let ln_beta = 0.5 * PI.ln() - ln_gamma_half_ratio(a);
    let ln_front = a * ln_x + b * ln_y - ln_beta;
    if x < (a + 1.0) / (a + b + 2.0) {
        -LN_2 + ln_front + beta_cf(a, b, x).ln() - a.ln()
    } else {
        let complement = (ln_front - b.ln()).exp() * beta_cf(b, a, y);
        -LN_2 + (-complement).ln_1p()
    }
}

/// Student t distribution function for real `k > 0`.
pub fn t_cdf(w: f64, k: f64) -> f64 {
    let tail = t_ln_lower_tail(w, k).exp();
    if w < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// `ln T_k(w)`, usable deep in the lower tail.
pub fn t_ln_cdf(w: f64, k: f64) -> f64 {
    let ln_tail = t_ln_lower_tail(w, k);
    if w < 0.0 {
        ln_tail
    } else {
        (-ln_tail.exp()).ln_1p()
    }
}
