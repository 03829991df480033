#![allow(dead_code)]

use smsn_roc::cutoff::{admissible_interval, optimal_cutoff, risk, CutoffResult};
use smsn_roc::sim::{builtin_scenarios, ScenarioDef};
use smsn_roc::{DecisionConfig, Theta};

pub const NAMES: [&str; 6] = ["SN1", "SN2", "SN3", "ST1", "ST2", "ST3"];

/// Optimal cutoffs at the true parameters (published, four decimals).
pub const C_STAR: [f64; 6] = [1.6101, 1.7607, 1.0122, 1.6145, 1.7842, 0.9723];

/// Mean plug-in variance at n = 1000 (published).
pub const VAR_TH_1000: [f64; 6] = [0.8150, 0.8390, 1.7475, 1.1624, 1.2629, 1.9576];

/// Population asymptotic variance from an independent 50-digit evaluation
/// (expected information by quadrature, analytic density derivatives).
pub const V_POP: [f64; 6] = [0.8236586, 0.83533205, 1.7109546, 1.1495419, 1.2430153, 1.9080172];

/// Same oracle: root of the estimating function and its slope there.
pub const C_STAR_ORACLE: [f64; 6] =
    [1.610099694, 1.760673295, 1.012237116, 1.614511358, 1.784235665, 0.972286272];
pub const DPHI_ORACLE: [f64; 6] =
    [0.38112169, 0.49764764, 0.3356184, 0.34354139, 0.44516486, 0.33424305];

pub fn scenarios() -> Vec<ScenarioDef> {
    builtin_scenarios()
}

pub fn scenario(i: usize) -> (Theta, DecisionConfig) {
    let d = &scenarios()[i];
    (d.theta(), d.cfg)
}

pub fn solve(theta: &Theta, cfg: &DecisionConfig) -> CutoffResult {
    let iv = admissible_interval(theta, cfg, 0.01).expect("interval");
    assert!(iv.bracketed, "not bracketed");
    optimal_cutoff(theta, cfg, &iv).expect("cutoff")
}

/// `None` when the estimating function does not change sign on the model
/// interval (the target ratio lies outside the range of the likelihood ratio).
pub fn try_solve(theta: &Theta, cfg: &DecisionConfig) -> Option<CutoffResult> {
    let iv = admissible_interval(theta, cfg, 0.01).ok()?;
    if !iv.bracketed_initially() {
        return None;
    }
    optimal_cutoff(theta, cfg, &iv).ok()
}

/// Two-stage grid search of the risk: a coarse pass over the admissible
/// interval, then a fine pass around the coarse minimum.
pub fn grid_argmin(th: &Theta, cfg: &DecisionConfig, a: f64, b: f64, m: usize) -> (f64, f64) {
    let argmin = |lo: f64, hi: f64| {
        let h = (hi - lo) / m as f64;
        let (mut best, mut at) = (f64::INFINITY, lo);
        for k in 0..=m {
            let c = lo + h * k as f64;
            let r = risk(th, cfg, c);
            if r < best {
                best = r;
                at = c;
            }
        }
        (at, h)
    };
    let (c0, h0) = argmin(a, b);
    argmin(c0 - 2.0 * h0, c0 + 2.0 * h0)
}
