//! Browser bindings for the interactive page in `www/`.
//!
//! Every export takes the group laws as JSON, `{"d0": {...}, "d1": {...}}`
//! with each law `{"family": "sn"|"st", "xi", "omega", "alpha", "nu"?}`, and
//! returns a JSON string. Errors come back as thrown strings.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use smsn_roc::cutoff::{admissible_interval, optimal_cutoff};
use smsn_roc::pipeline::{analyze, density_grid, roc_tangent, AnalysisRequest, GroupData};
use smsn_roc::roc::{auc, roc_curve};
use smsn_roc::{DecisionConfig, Theta};
use wasm_bindgen::prelude::*;

fn parse_theta(theta_json: &str) -> Result<Theta, String> {
    serde_json::from_str(theta_json).map_err(|e| format!("bad parameters: {e}"))
}

/// Densities over the central 99% of both laws, and the ROC curve with its AUC.
pub fn curves_json(theta_json: &str, points: usize) -> Result<String, String> {
    let th = parse_theta(theta_json)?;
    let points = points.clamp(16, 2000);
    let q = |p: f64| -> Result<f64, String> {
        let a = th.d0.quantile(p).map_err(|e| e.to_string())?;
        let b = th.d1.quantile(p).map_err(|e| e.to_string())?;
        Ok(if p < 0.5 { a.min(b) } else { a.max(b) })
    };
    let (a, b) = (q(0.005)?, q(0.995)?);
    let grid = density_grid(&th, a, b, points);
    let roc = roc_curve(&th, points).map_err(|e| e.to_string())?;
    Ok(json!({
        "x": grid.iter().map(|r| r[0]).collect::<Vec<_>>(),
        "f0": grid.iter().map(|r| r[1]).collect::<Vec<_>>(),
        "f1": grid.iter().map(|r| r[2]).collect::<Vec<_>>(),
        "roc": roc.points.iter().map(|p| [p.fpf, p.tpf]).collect::<Vec<_>>(),
        "auc": auc(&th, 1000).map_err(|e| e.to_string())?,
    })
    .to_string())
}

/// Optimal and Youden cutoffs for the given costs and reference prevalence.
pub fn cutoff_json(theta_json: &str, lambda0: f64, lambda1: f64, pi0: f64) -> Result<String, String> {
    let th = parse_theta(theta_json)?;
    let cfg = DecisionConfig::from_pi0(lambda0, lambda1, pi0).map_err(|e| e.to_string())?;
    let iv = admissible_interval(&th, &cfg, 0.01).map_err(|e| e.to_string())?;
    let r = optimal_cutoff(&th, &cfg, &iv).map_err(|e| e.to_string())?;
    let tangent = |name: &str, c: f64| -> Result<Value, String> {
        let t = roc_tangent(&th, name, c).map_err(|e| e.to_string())?;
        Ok(json!({ "c": c, "fpf": t.fpf, "tpf": t.tpf, "slope": t.slope }))
    };
    Ok(json!({
        "target_ratio": r.target_ratio,
        "c_star": r.c_star,
        "risk_at_c_star": r.risk_at_c_star,
        "c_youden": r.c_youden,
        "risk_at_youden": r.risk_at_youden,
        "delta_risk": r.delta_risk,
        "slope": r.slope_diag,
        "multi_root": r.multi_root,
        "optimal": tangent("optimal", r.c_star)?,
        "youden": tangent("youden", r.c_youden)?,
    })
    .to_string())
}

/// Draws `n` observations per group, fits both by BIC and estimates the
/// cutoff with a 95% Wald interval.
pub fn simulate_json(
    theta_json: &str,
    n: usize,
    seed: u64,
    lambda0: f64,
    lambda1: f64,
    pi0: f64,
) -> Result<String, String> {
    let th = parse_theta(theta_json)?;
    if !(20..=5000).contains(&n) {
        return Err(format!("sample size per group must be between 20 and 5000, got {n}"));
    }
    let cfg = DecisionConfig::from_pi0(lambda0, lambda1, pi0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = GroupData {
        x0: th.d0.sample(n, &mut rng),
        x1: th.d1.sample(n, &mut rng),
        neg_label: "D=0".into(),
        pos_label: "D=1".into(),
        log10: false,
    };
    let req = AnalysisRequest { configs: vec![("demo".into(), cfg)], ..Default::default() };
    let rep = analyze(&data, &req).map_err(|e| e.to_string())?;
    let d = &rep.decisions[0];
    Ok(json!({
        "theta": rep.theta,
        "families": [rep.theta.d0.family, rep.theta.d1.family],
        "c_star": d.cutoff.c_star,
        "se": d.inference.se,
        "ci": [d.inference.ci_lo, d.inference.ci_hi],
        "x0": data.x0,
        "x1": data.x1,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn curves(theta_json: &str, points: usize) -> Result<String, JsValue> {
    curves_json(theta_json, points).map_err(JsValue::from)
}

#[wasm_bindgen]
pub fn cutoff(theta_json: &str, lambda0: f64, lambda1: f64, pi0: f64) -> Result<String, JsValue> {
    cutoff_json(theta_json, lambda0, lambda1, pi0).map_err(JsValue::from)
}

#[wasm_bindgen]
pub fn simulate(
    theta_json: &str,
    n: usize,
    seed: u32,
    lambda0: f64,
    lambda1: f64,
    pi0: f64,
) -> Result<String, JsValue> {
    simulate_json(theta_json, n, seed as u64, lambda0, lambda1, pi0).map_err(JsValue::from)
}
