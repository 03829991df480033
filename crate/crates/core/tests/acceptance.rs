//! Acceptance suite: one PASS/FAIL line per criterion, details indented
//! underneath. Runs without the test harness so the report is always shown;
//! exits non-zero if any criterion fails.

mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smsn_roc::cutoff::youden_displacement;
use smsn_roc::fit::select_model;
use smsn_roc::inference::{cutoff_gradient, population_variance};
use smsn_roc::numeric::quad::{integrate_lower_tail, integrate_upper_tail, QuadOptions};
use smsn_roc::pipeline::{analyze, sensitivity_configs, AnalysisRequest, GroupData};
use smsn_roc::roc::{auc, likelihood_ratio, roc_point};
use smsn_roc::sim::{check_bands, run_scenario, true_cutoff, Bands, ScenarioSpec};
use smsn_roc::{DecisionConfig, DistSpec, Theta};
use std::time::Instant;

const MC_SEED: u64 = 20240601;
const MC_B: usize = 500;
const MC_N: usize = 400;

struct Criterion {
    details: Vec<String>,
    pass: bool,
}

impl Criterion {
    fn new() -> Self {
        Criterion { details: Vec::new(), pass: true }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.details.push(format!("{} {line}", if ok { "ok  " } else { "MISS" }));
    }
}

fn report(id: usize, title: &str, c: &Criterion, secs: f64) -> bool {
    println!("{} [{id}] {title} ({secs:.1} s)", if c.pass { "PASS" } else { "FAIL" });
    for d in &c.details {
        println!("       {d}");
    }
    c.pass
}

fn cutoff_reproduction() -> Criterion {
    let mut c = Criterion::new();
    for i in 0..6 {
        let (th, cfg) = scenario(i);
        let got = true_cutoff(&th, &cfg).unwrap();
        let err = (got - C_STAR[i]).abs();
        c.check(err <= 5e-4, format!("{}: c* = {got:.6}, reference {:.4}, |diff| = {err:.1e} <= 5e-4", NAMES[i], C_STAR[i]));
    }
    c
}

fn population_variance_reproduction() -> Criterion {
    let mut c = Criterion::new();
    for i in 0..6 {
        let (th, cfg) = scenario(i);
        let cs = true_cutoff(&th, &cfg).unwrap();
        let v = population_variance(&th, &cfg, cs, 500, 500).unwrap();
        let rel = v / VAR_TH_1000[i] - 1.0;
        c.check(rel.abs() <= 0.10, format!("{}: V = {v:.4}, reference {:.4}, rel. diff {:+.2}% (band ±10%)", NAMES[i], VAR_TH_1000[i], 100.0 * rel));
    }
    c
}

fn monte_carlo() -> Criterion {
    let mut c = Criterion::new();
    let bands = Bands::default();
    for def in scenarios() {
        let t = Instant::now();
        let sc = ScenarioSpec::new(&def, MC_N, MC_B, MC_SEED);
        let s = run_scenario(&sc).unwrap();
        let checks = check_bands(&s, &bands);
        let fmt = |m: &str| checks.iter().find(|k| k.metric == m).map(|k| (k.value, k.pass));
        let (bias, bias_ok) = fmt("bias").unwrap();
        let (ratio, ratio_ok) = fmt("ratio").unwrap();
        let (cov, cov_ok) = fmt("coverage").unwrap();
        let (br, br_ok) = fmt("bracket").unwrap_or((s.bracket_rate, true));
        let ok = bias_ok && ratio_ok && cov_ok && br_ok;
        let flag = |p: bool| if p { "" } else { "!" };
        c.check(
            ok,
            format!(
                "{} n={} B={} succ={:.3}: bias {:+.4}{} ratio {:.3}{} cov {:.3}{} bracket {:.3}{} (var_emp {:.4}, var_th {:.4}; {:.0} s)",
                s.name, s.n, s.replications, s.success_rate, bias, flag(bias_ok), ratio, flag(ratio_ok),
                cov, flag(cov_ok), br, flag(br_ok), s.var_emp, s.var_th, t.elapsed().as_secs_f64()
            ),
        );
    }
    c.details.push(format!(
        "bands: |bias| < {}, ratio in [{}, {}], coverage in [{}, {}], bracket >= {}; seed {MC_SEED}",
        bands.max_abs_bias, bands.ratio.0, bands.ratio.1, bands.coverage.0, bands.coverage.1, bands.min_bracket_rate
    ));
    c
}

fn binormal() -> Criterion {
    let mut c = Criterion::new();
    let th = Theta::new(DistSpec::normal(0.0, 1.0).unwrap(), DistSpec::normal(2.0, 1.0).unwrap());
    let a = auc(&th, 1000).unwrap();
    let exact = 0.921_350_396_474_857_4;
    c.check((a - exact).abs() <= 1e-4, format!("AUC (trapezoid, h = 1000) = {a:.6}, closed form {exact:.6}"));
    let r = solve(&th, &DecisionConfig::symmetric());
    c.check(
        (r.c_star - 1.0).abs() < 1e-9 && (r.c_youden - 1.0).abs() < 1e-9,
        format!("symmetric c* = {:.12}, c_Y = {:.12}", r.c_star, r.c_youden),
    );
    let d = youden_displacement(&th, &DecisionConfig::new(3.0, 1.0, 0.5, 0.5).unwrap()).unwrap();
    let want = 3f64.ln() / 2.0;
    c.check(
        (d.exact - want).abs() <= 1e-6 && (d.first_order - want).abs() <= 1e-6,
        format!("ratio 3 displacement: exact {:.9}, first order {:.9}, ln(3)/2 = {want:.9}", d.exact, d.first_order),
    );
    c
}

fn property_suites() -> Criterion {
    let mut c = Criterion::new();
    let opts = QuadOptions::default();

    let mut worst = 0f64;
    for def in scenarios() {
        for s in [def.group0, def.group1] {
            let k = s.kernel();
            let mass = integrate_lower_tail(|x| k.pdf(x), s.xi, opts).value
                + integrate_upper_tail(|x| k.pdf(x), s.xi, opts).value;
            worst = worst.max((mass - 1.0).abs());
        }
    }
    c.check(worst <= 1e-6, format!("density normalisation: max |mass − 1| = {worst:.1e} <= 1e-6"));

    let mut worst = 0f64;
    for def in scenarios() {
        for s in [def.group0, def.group1] {
            for k in 1..200 {
                let p = k as f64 / 200.0;
                worst = worst.max((s.cdf(s.quantile(p).unwrap()).unwrap() - p).abs());
            }
        }
    }
    c.check(worst <= 1e-8, format!("cdf/quantile round trip: max error {worst:.1e} <= 1e-8"));

    let mut worst = 0f64;
    for i in 0..6 {
        let (th, _) = scenario(i);
        for k in 1..=50 {
            let r = k as f64 / 51.0;
            let h = 1e-5;
            let slope = (roc_point(&th, r + h).unwrap().tpf - roc_point(&th, r - h).unwrap().tpf) / (2.0 * h);
            let lr = likelihood_ratio(&th, th.d0.quantile(1.0 - r).unwrap()).unwrap();
            worst = worst.max((slope - lr).abs());
        }
    }
    c.check(worst <= 1e-3, format!("ROC slope vs likelihood ratio, 50 points x 6 scenarios: max error {worst:.1e} <= 1e-3"));

    let mut all = true;
    let mut worst = 0f64;
    for i in 0..6 {
        let (th, cfg) = scenario(i);
        let r = solve(&th, &cfg);
        let (c_grid, h) = grid_argmin(&th, &cfg, r.interval.a, r.interval.b, 1000);
        let tol = h.max((2e-13 / r.slope_diag).sqrt());
        all &= (c_grid - r.c_star).abs() <= tol;
        worst = worst.max((c_grid - r.c_star).abs());
    }
    c.check(all, format!("grid minimisation of the risk vs root: max |diff| = {worst:.1e} (within grid resolution)"));

    let mut orders = Vec::new();
    for i in 0..6 {
        let (th, cfg) = scenario(i);
        let c0 = true_cutoff(&th, &cfg).unwrap();
        let grad = cutoff_gradient(&th, &cfg, c0);
        let v = th.to_unconstrained();
        let err = |eps: f64| {
            (0..v.len())
                .map(|j| {
                    let mut w = v.clone();
                    w[j] += eps;
                    let tp = Theta::from_unconstrained(th.d0.family, th.d1.family, &w).unwrap();
                    (true_cutoff(&tp, &cfg).unwrap() - c0 - eps * grad[j]).abs()
                })
                .fold(0.0, f64::max)
        };
        orders.push((err(1e-3) / err(1e-4)).log10());
    }
    let quadratic = orders.iter().all(|o| (1.7..=2.3).contains(o));
    c.check(
        quadratic,
        format!("implicit gradient, error ratio exponent between eps = 1e-3 and 1e-4: {:?} (2 = quadratic)", orders.iter().map(|o| (o * 100.0).round() / 100.0).collect::<Vec<_>>()),
    );
    c
}

fn application_pipeline() -> Criterion {
    let mut c = Criterion::new();
    let (th, _) = scenario(1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x0 = th.d0.sample(1000, &mut rng);
    let x1 = th.d1.sample(1000, &mut rng);
    let data = GroupData { x0: x0.clone(), x1: x1.clone(), neg_label: "neg".into(), pos_label: "pos".into(), log10: false };
    let cfg = DecisionConfig::new(1.0, 3.0, 0.8, 0.2).unwrap();
    let rep = analyze(&data, &AnalysisRequest { configs: vec![("SN2".into(), cfg)], ..Default::default() }).unwrap();
    let d = &rep.decisions[0];
    let z = (d.cutoff.c_star - C_STAR[1]) / d.inference.se;
    c.check(z.abs() < 3.0, format!("synthetic SN2 data: c* = {:.4} ± {:.4}, truth {:.4}, z = {z:+.2}", d.cutoff.c_star, d.inference.se, C_STAR[1]));

    let mut worst = 0f64;
    for (k, x) in [(0, &x0), (1, &x1)] {
        let f = select_model(x).unwrap().selected;
        let truth = if k == 0 { th.d0 } else { th.d1 };
        let se = f.std_errors().unwrap();
        let (est, want) = (f.spec.to_unconstrained().0, truth.to_unconstrained().0);
        if f.spec.family == truth.family {
            for j in 0..est.len() {
                worst = worst.max(((est[j] - want[j]) / se[j]).abs());
            }
        } else {
            worst = f64::INFINITY;
        }
    }
    c.check(worst < 3.0, format!("fit recovery: max |θ̂ − θ| / SE = {worst:.2} < 3"));

    let (sn1, _) = scenario(0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let to_titre = |v: f64| 1.5 + 0.4 * v;
    let data = GroupData {
        x0: sn1.d0.sample(600, &mut rng).into_iter().map(to_titre).collect(),
        x1: sn1.d1.sample(300, &mut rng).into_iter().map(to_titre).collect(),
        neg_label: "neg".into(),
        pos_label: "pos".into(),
        log10: true,
    };
    let req = AnalysisRequest { configs: sensitivity_configs(), ..Default::default() };
    let rep = analyze(&data, &req).unwrap();
    let cs: Vec<f64> = rep.decisions.iter().map(|d| d.cutoff.c_star).collect();
    let ordered = cs[0] < cs[2] && cs[2] < cs[1] && cs[1] < cs[3];
    c.check(
        ordered,
        format!("sensitivity ordering A < C < B < D: {:.4} < {:.4} < {:.4} < {:.4}", cs[0], cs[2], cs[1], cs[3]),
    );
    c
}

fn main() {
    let criteria: [(&str, fn() -> Criterion); 6] = [
        ("deterministic cutoff reproduction", cutoff_reproduction),
        ("population variance reproduction", population_variance_reproduction),
        ("desk-scale Monte Carlo (B = 500, n = 400)", monte_carlo),
        ("binormal oracle", binormal),
        ("property suites", property_suites),
        ("analysis pipeline: round trip and sensitivity ordering", application_pipeline),
    ];
    let mut failed = 0;
    for (id, (title, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let c = run();
        if !report(id + 1, title, &c, t.elapsed().as_secs_f64()) {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
