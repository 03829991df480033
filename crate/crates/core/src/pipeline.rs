//! End-to-end analyses of two-group marker data: ingestion, model selection,
//! cutoffs with inference, sensitivity sweeps and plot data.

use crate::cutoff::{
    admissible_interval_empirical, optimal_cutoff, CutoffResult, DecisionConfig,
};
use crate::dist::Theta;
use crate::error::{Error, Result};
use crate::fit::{joint_covariance, select_model, BicRow, ModelSelection};
use crate::inference::{variance_plugin, CutoffInference};
use crate::numeric::special::norm_quantile;
use crate::roc::{auc, likelihood_ratio, roc_curve, youden_empirical};
use serde::Serialize;
use std::collections::BTreeSet;
use std::io::{Read, Write};

pub const SCHEMA: &str = "roc-smsn/1";

/// Marker values split by group, on the analysis scale.
#[derive(Clone, Debug)]
pub struct GroupData {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub neg_label: String,
    pub pos_label: String,
    pub log10: bool,
}

impl GroupData {
    pub fn pooled(&self) -> Vec<f64> {
        self.x0.iter().chain(&self.x1).copied().collect()
    }
}

/// Reads a headed CSV with a numeric value column and a string group column.
/// `neg_label` names the reference group; exactly two labels must occur.
pub fn read_groups<R: Read>(
    input: R,
    value_col: &str,
    group_col: &str,
    neg_label: &str,
    log10: bool,
) -> Result<GroupData> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Input(format!("column '{name}' not found")))
    };
    let (vi, gi) = (find(value_col)?, find(group_col)?);
    let mut rows = Vec::new();
    let mut labels = BTreeSet::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let raw = rec.get(vi).unwrap_or("").trim();
        let label = rec.get(gi).unwrap_or("").trim().to_string();
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::Input(format!("row {}: '{raw}' is not a number", line + 2)))?;
        if !v.is_finite() {
            return Err(Error::Input(format!("row {}: non-finite value", line + 2)));
        }
        let v = if log10 {
            if v <= 0.0 {
                return Err(Error::Input(format!(
                    "row {}: log10 needs positive values, got {v}",
                    line + 2
                )));
            }
            v.log10()
        } else {
            v
        };
        labels.insert(label.clone());
        rows.push((label, v));
    }
    if labels.len() != 2 {
        return Err(Error::Input(format!(
            "expected exactly two group labels, found {}: {:?}",
            labels.len(),
            labels
        )));
    }
    if !labels.contains(neg_label) {
        return Err(Error::Input(format!("reference label '{neg_label}' not in {labels:?}")));
    }
    let pos_label = labels.into_iter().find(|l| l != neg_label).expect("two labels");
    let (mut x0, mut x1) = (Vec::new(), Vec::new());
    for (l, v) in rows {
        if l == neg_label {
            x0.push(v);
        } else {
            x1.push(v);
        }
    }
    Ok(GroupData { x0, x1, neg_label: neg_label.to_string(), pos_label, log10 })
}

#[derive(Clone, Debug)]
pub struct AnalysisRequest {
    pub biomarker: String,
    pub configs: Vec<(String, DecisionConfig)>,
    /// Pooled-data percentiles bounding the admissible interval.
    pub lo: f64,
    pub hi: f64,
    /// CI level is `1 − alpha`.
    pub alpha: f64,
}

impl Default for AnalysisRequest {
    fn default() -> Self {
        AnalysisRequest {
            biomarker: "marker".into(),
            configs: vec![("default".into(), DecisionConfig::default())],
            lo: 0.005,
            hi: 0.995,
            alpha: 0.05,
        }
    }
}

/// The four cost/prevalence settings of the sensitivity sweep, with target
/// ratios 1, 9, 3 and 27.
pub fn sensitivity_configs() -> Vec<(String, DecisionConfig)> {
    let c = |l0, l1, p0| DecisionConfig::from_pi0(l0, l1, p0).expect("valid");
    vec![
        ("A".into(), c(1.0, 1.0, 0.5)),
        ("B".into(), c(1.0, 1.0, 0.9)),
        ("C".into(), c(1.0, 3.0, 0.9)),
        ("D".into(), c(3.0, 1.0, 0.9)),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupReport {
    pub label: String,
    pub n: usize,
    pub selection: ModelSelection,
}

/// Thresholds mapped back through `10^x`.
#[derive(Clone, Debug, Serialize)]
pub struct OriginalScale {
    pub c_star: f64,
    pub c_youden: f64,
    pub c_youden_emp: Option<f64>,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecisionReport {
    pub name: String,
    pub cfg: DecisionConfig,
    pub cutoff: CutoffResult,
    pub inference: CutoffInference,
    pub original: Option<OriginalScale>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub schema: &'static str,
    pub biomarker: String,
    pub log10: bool,
    pub groups: [GroupReport; 2],
    pub theta: Theta,
    pub auc: f64,
    pub youden_emp: f64,
    pub decisions: Vec<DecisionReport>,
}

/// Fits both groups, then solves and makes inference on the cutoff for
/// every requested decision configuration.
pub fn analyze(data: &GroupData, req: &AnalysisRequest) -> Result<AnalysisReport> {
    if req.configs.is_empty() {
        return Err(Error::Input("no decision configuration given".into()));
    }
    let sel0 = select_model(&data.x0)?;
    let sel1 = select_model(&data.x1)?;
    let theta = Theta::new(sel0.selected.spec, sel1.selected.spec);
    let sigma = joint_covariance(&sel0.selected, &sel1.selected)?;
    let pooled = data.pooled();
    let y_emp = youden_empirical(&data.x0, &data.x1)?;

    let mut decisions = Vec::with_capacity(req.configs.len());
    for (name, cfg) in &req.configs {
        cfg.validate()?;
        let iv = admissible_interval_empirical(&theta, cfg, &pooled, req.lo, req.hi)?;
        if !iv.bracketed {
            return Err(Error::NotBracketed { a: iv.a, b: iv.b });
        }
        let cut = optimal_cutoff(&theta, cfg, &iv)?.with_empirical_youden(&theta, cfg, y_emp.c_y);
        let inf = variance_plugin(&theta, cfg, cut.c_star, &sigma, req.alpha)?;
        let original = data.log10.then(|| OriginalScale {
            c_star: 10f64.powf(cut.c_star),
            c_youden: 10f64.powf(cut.c_youden),
            c_youden_emp: cut.c_youden_emp.map(|c| 10f64.powf(c)),
            ci_lo: 10f64.powf(inf.ci_lo),
            ci_hi: 10f64.powf(inf.ci_hi),
        });
        decisions.push(DecisionReport { name: name.clone(), cfg: *cfg, cutoff: cut, inference: inf, original });
    }
    Ok(AnalysisReport {
        schema: SCHEMA,
        biomarker: req.biomarker.clone(),
        log10: data.log10,
        groups: [
            GroupReport { label: data.neg_label.clone(), n: data.x0.len(), selection: sel0 },
            GroupReport { label: data.pos_label.clone(), n: data.x1.len(), selection: sel1 },
        ],
        theta,
        auc: auc(&theta, 1000)?,
        youden_emp: y_emp.c_y,
        decisions,
    })
}

impl AnalysisReport {
    pub fn bic_rows(&self) -> Vec<BicRow> {
        self.groups
            .iter()
            .map(|g| BicRow::new(&self.biomarker, &g.label, &g.selection))
            .collect()
    }

    /// Optimal cutoffs increase with the target ratio `λ0π0/λ1π1`.
    pub fn ordering_holds(&self) -> bool {
        let mut rows: Vec<(f64, f64)> =
            self.decisions.iter().map(|d| (d.cfg.target_ratio(), d.cutoff.c_star)).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows.windows(2).all(|w| w[0].0 == w[1].0 || w[1].1 > w[0].1)
    }

    /// One row per decision configuration.
    pub fn write_decisions_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scenario", "lambda0", "lambda1", "pi0", "pi1", "c_star", "c_youden",
            "c_star_orig", "c_youden_orig", "risk_c_star", "risk_youden", "delta_risk", "se",
            "ci_lo", "ci_hi", "ci_lo_orig", "ci_hi_orig", "abs_dphi_dc",
        ])?;
        let f = |x: f64| format!("{x:.6}");
        let o = |x: Option<f64>| x.map(f).unwrap_or_default();
        for d in &self.decisions {
            let orig = d.original.as_ref();
            w.write_record([
                d.name.clone(),
                f(d.cfg.lambda0),
                f(d.cfg.lambda1),
                f(d.cfg.pi0),
                f(d.cfg.pi1),
                f(d.cutoff.c_star),
                f(d.cutoff.c_youden),
                o(orig.map(|v| v.c_star)),
                o(orig.map(|v| v.c_youden)),
                f(d.cutoff.risk_at_c_star),
                f(d.cutoff.risk_at_youden),
                f(d.cutoff.delta_risk),
                f(d.inference.se),
                f(d.inference.ci_lo),
                f(d.inference.ci_hi),
                o(orig.map(|v| v.ci_lo)),
                o(orig.map(|v| v.ci_hi)),
                f(d.inference.dphi_dc.abs()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Density grid with `points` rows over `[a, b]`: columns `x, f0, f1`.
pub fn density_grid(theta: &Theta, a: f64, b: f64, points: usize) -> Vec<[f64; 3]> {
    let (k0, k1) = theta.kernels();
    (0..points)
        .map(|i| {
            let x = a + (b - a) * i as f64 / (points - 1).max(1) as f64;
            [x, k0.pdf(x), k1.pdf(x)]
        })
        .collect()
}

pub fn write_density_csv<W: Write>(grid: &[[f64; 3]], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "f0", "f1"])?;
    for r in grid {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Tangent to the ROC curve at the operating point of a cutoff; the slope is
/// the likelihood ratio there.
#[derive(Clone, Debug, Serialize)]
pub struct RocTangent {
    pub name: String,
    pub c: f64,
    pub fpf: f64,
    pub tpf: f64,
    pub slope: f64,
}

impl RocTangent {
    /// Tangent line clipped to the unit square, as two end points.
    pub fn segment(&self) -> [(f64, f64); 2] {
        let y = |x: f64| self.tpf + self.slope * (x - self.fpf);
        let x_at = |t: f64| self.fpf + (t - self.tpf) / self.slope;
        let x0 = x_at(0.0).clamp(0.0, 1.0);
        let x1 = x_at(1.0).clamp(0.0, 1.0);
        [(x0, y(x0)), (x1, y(x1))]
    }
}

pub fn roc_tangent(theta: &Theta, name: &str, c: f64) -> Result<RocTangent> {
    let (k0, k1) = theta.kernels();
    Ok(RocTangent {
        name: name.to_string(),
        c,
        fpf: 1.0 - k0.cdf(c),
        tpf: 1.0 - k1.cdf(c),
        slope: likelihood_ratio(theta, c)?,
    })
}

pub fn write_roc_csv<W: Write>(theta: &Theta, points: usize, out: W) -> Result<()> {
    roc_curve(theta, points)?.write_csv(out)
}

pub fn write_tangents_csv<W: Write>(tangents: &[RocTangent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "c", "fpf", "tpf", "slope", "x_start", "y_start", "x_end", "y_end"])?;
    for t in tangents {
        let [(xs, ys), (xe, ye)] = t.segment();
        w.write_record([
            t.name.clone(),
            t.c.to_string(),
            t.fpf.to_string(),
            t.tpf.to_string(),
            t.slope.to_string(),
            xs.to_string(),
            ys.to_string(),
            xe.to_string(),
            ye.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sorted samples paired with normal plotting positions `Φ⁻¹((i − 0.5)/m)`.
pub fn qq_pairs(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    s.into_iter()
        .enumerate()
        .map(|(i, v)| (norm_quantile((i as f64 + 0.5) / m), v))
        .collect()
}

pub fn write_qq_csv<W: Write>(pairs: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["normal_quantile", "w_n"])?;
    for (q, v) in pairs {
        w.write_record([q.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
