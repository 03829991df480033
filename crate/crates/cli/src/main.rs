// `!(x < y)` is used on purpose: it is also true when either side is NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use smsn_roc::cutoff::DecisionConfig;
use smsn_roc::fit::{fit, select_model, write_bic_csv, BicRow};
use smsn_roc::pipeline::{
    analyze, density_grid, qq_pairs, read_groups, roc_tangent, sensitivity_configs,
    write_density_csv, write_qq_csv, write_roc_csv, write_tangents_csv, AnalysisReport,
    AnalysisRequest, GroupData, SCHEMA,
};
use smsn_roc::sim::{
    builtin_scenarios, check_bands, load_scenarios, run_scenario, write_summary_csv,
    write_wn_csv, Bands, ScenarioSpec, DEFAULT_B, FULL_B,
};
use smsn_roc::{Family, Theta};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_BANDS: u8 = 4;

#[derive(Parser)]
#[command(
    name = "smsn-roc",
    version,
    about = "Parametric ROC analysis and cost-weighted optimal cutoffs under skew-normal and skew-t models",
    after_help = "\
Exit codes: 0 success, 2 input error, 3 numerical failure (unbracketed or \
degenerate cutoff), 4 band or ordering check failed.

Examples:
  smsn-roc analyze --input sera.csv --value-col titre --group-col status \\
      --neg-label negative --log10 --out results/
  smsn-roc sensitivity --input sera.csv --value-col titre --group-col status \\
      --neg-label negative --log10 --out results/
  smsn-roc simulate --scenario SN1 --scenario ST3 --n 200 --n 400 --b 500 --out sim/
  smsn-roc plotdata --report results/report.json --kind roc-tangents --out plots/"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit both groups, then estimate the optimal cutoff with a Wald interval
    Analyze {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cfg: CostArgs,
        #[command(flatten)]
        opts: AnalysisArgs,
    },
    /// Optimal cutoffs under several cost/prevalence settings
    Sensitivity {
        #[command(flatten)]
        data: DataArgs,
        /// NAME:LAMBDA0,LAMBDA1,PI0; repeatable. Defaults to the A-D sweep
        /// with target ratios 1, 9, 3 and 27
        #[arg(long = "config", value_name = "SPEC")]
        configs: Vec<String>,
        #[command(flatten)]
        opts: AnalysisArgs,
    },
    /// Monte Carlo validation over the built-in (or supplied) scenarios
    Simulate {
        /// Scenario name; repeatable. Defaults to all
        #[arg(long)]
        scenario: Vec<String>,
        /// Total sample size (split evenly between groups); repeatable
        #[arg(long, default_values_t = [400usize])]
        n: Vec<usize>,
        /// Replications per scenario and sample size
        #[arg(long)]
        b: Option<usize>,
        /// Use the full replication count instead of the desk-scale default
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
        /// CI level is 1 - alpha
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// TOML file with [[scenario]] entries replacing the built-in table
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot-ready data from an analysis report or a simulation summary
    Plotdata {
        /// report.json from analyze/sensitivity, or summary.json from simulate
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Grid size for densities and ROC curves
        #[arg(long, default_value_t = 512)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit skew-normal and skew-t laws to each group and compare by BIC
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Family to fit; `auto` selects by BIC
        #[arg(long, value_enum, default_value_t = FamilyArg::Auto)]
        family: FamilyArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Headed CSV file
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    value_col: String,
    #[arg(long)]
    group_col: String,
    /// Label of the reference (non-diseased) group
    #[arg(long)]
    neg_label: String,
    /// Analyse log10 of the values; cutoffs are also reported back on the
    /// original scale
    #[arg(long)]
    log10: bool,
}

#[derive(Args)]
struct CostArgs {
    /// Cost of a false positive
    #[arg(long, default_value_t = 1.0)]
    lambda0: f64,
    /// Cost of a false negative
    #[arg(long, default_value_t = 3.0)]
    lambda1: f64,
    /// Prevalence of the reference group
    #[arg(long, default_value_t = 0.9)]
    pi0: f64,
}

#[derive(Args)]
struct AnalysisArgs {
    /// CI level is 1 - alpha
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Pooled-data percentiles bounding the admissible interval
    #[arg(long, default_value_t = 0.005)]
    lo: f64,
    #[arg(long, default_value_t = 0.995)]
    hi: f64,
    /// Name used in the tables; defaults to the value column
    #[arg(long)]
    biomarker: Option<String>,
    /// Output directory; the JSON report goes to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Densities,
    RocTangents,
    Qq,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum FamilyArg {
    Auto,
    Sn,
    St,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<smsn_roc::Error>()) {
        Some(err) if !err.is_input_error() => EXIT_NUMERIC,
        _ => EXIT_INPUT,
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Analyze { data, cfg, opts } => {
            let cfg = DecisionConfig::from_pi0(cfg.lambda0, cfg.lambda1, cfg.pi0)?;
            let report = run_analysis(&data, vec![("default".into(), cfg)], &opts)?;
            print_decisions(&report);
            Ok(0)
        }
        Command::Sensitivity { data, configs, opts } => {
            let configs = if configs.is_empty() {
                sensitivity_configs()
            } else {
                configs.iter().map(|s| parse_config(s)).collect::<Result<_>>()?
            };
            let report = run_analysis(&data, configs, &opts)?;
            print_decisions(&report);
            if report.ordering_holds() {
                Ok(0)
            } else {
                eprintln!("optimal cutoffs are not increasing in the target ratio");
                Ok(EXIT_BANDS)
            }
        }
        Command::Simulate { scenario, n, b, full, seed, alpha, scenarios, out } => {
            let b = b.unwrap_or(if full { FULL_B } else { DEFAULT_B });
            simulate(&scenario, &n, b, seed, alpha, scenarios.as_deref(), out.as_deref())
        }
        Command::Plotdata { report, kind, points, out } => {
            plotdata(&report, kind, points, &out)?;
            Ok(0)
        }
        Command::Fit { data, family, out } => {
            fit_groups(&data, family, out.as_deref())?;
            Ok(0)
        }
    }
}

fn load(data: &DataArgs) -> Result<GroupData> {
    let file = File::open(&data.input).with_context(|| format!("cannot open {}", data.input.display()))?;
    let groups = read_groups(file, &data.value_col, &data.group_col, &data.neg_label, data.log10)
        .with_context(|| format!("reading {}", data.input.display()))?;
    log::info!(
        "{} observations in '{}', {} in '{}'",
        groups.x0.len(),
        groups.neg_label,
        groups.x1.len(),
        groups.pos_label
    );
    Ok(groups)
}

fn parse_config(s: &str) -> Result<(String, DecisionConfig)> {
    let (name, nums) = s.split_once(':').unwrap_or(("", s));
    let v: Vec<f64> = nums
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad config '{s}'"))?;
    let [l0, l1, p0] = v[..] else {
        bail!(smsn_roc::Error::Input(format!("config '{s}' needs LAMBDA0,LAMBDA1,PI0")));
    };
    let name = if name.is_empty() { s.to_string() } else { name.to_string() };
    Ok((name, DecisionConfig::from_pi0(l0, l1, p0)?))
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn writer(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(dir: Option<&Path>, name: &str, value: &Value) -> Result<()> {
    match dir {
        Some(d) => {
            let mut w = writer(d, name)?;
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn run_analysis(
    data: &DataArgs,
    configs: Vec<(String, DecisionConfig)>,
    opts: &AnalysisArgs,
) -> Result<AnalysisReport> {
    let groups = load(data)?;
    let req = AnalysisRequest {
        biomarker: opts.biomarker.clone().unwrap_or_else(|| data.value_col.clone()),
        configs,
        lo: opts.lo,
        hi: opts.hi,
        alpha: opts.alpha,
    };
    let report = analyze(&groups, &req)?;
    if let Some(dir) = &opts.out {
        create_out(dir)?;
        write_json(Some(dir), "report.json", &serde_json::to_value(&report)?)?;
        report.write_decisions_csv(writer(dir, "decisions.csv")?)?;
        write_bic_csv(&report.bic_rows(), writer(dir, "bic.csv")?)?;
    } else {
        write_json(None, "report.json", &serde_json::to_value(&report)?)?;
    }
    Ok(report)
}

fn print_decisions(r: &AnalysisReport) {
    for g in &r.groups {
        let s = &g.selection;
        eprintln!(
            "group {:<12} n={:<5} {}  dBIC={}",
            g.label,
            g.n,
            s.selected.spec,
            s.delta_bic.map_or("-".into(), |d| format!("{d:.2}"))
        );
    }
    eprintln!("AUC {:.4}", r.auc);
    for d in &r.decisions {
        let c = &d.cutoff;
        let i = &d.inference;
        let mut line = format!(
            "{:<8} ratio {:>7.3}  c* {:.4} [{:.4}, {:.4}]  c_Y {:.4}  dR {:.4}  |dphi/dc| {:.4}",
            d.name, c.target_ratio, c.c_star, i.ci_lo, i.ci_hi, c.c_youden, c.delta_risk, i.dphi_dc.abs()
        );
        if let Some(o) = &d.original {
            line.push_str(&format!("  original {:.2} [{:.2}, {:.2}]", o.c_star, o.ci_lo, o.ci_hi));
        }
        if c.multi_root {
            line.push_str("  (several roots)");
        }
        if i.low_identifiability {
            line.push_str("  (weakly identified)");
        }
        eprintln!("{line}");
    }
}

fn simulate(
    names: &[String],
    sizes: &[usize],
    b: usize,
    seed: u64,
    alpha: f64,
    table: Option<&Path>,
    out: Option<&Path>,
) -> Result<u8> {
    let defs = match table {
        Some(p) => load_scenarios(p).with_context(|| format!("reading {}", p.display()))?,
        None => builtin_scenarios(),
    };
    let selected: Vec<_> = if names.is_empty() {
        defs
    } else {
        names
            .iter()
            .map(|n| {
                defs.iter()
                    .find(|d| d.name.eq_ignore_ascii_case(n))
                    .cloned()
                    .ok_or_else(|| smsn_roc::Error::Input(format!("unknown scenario '{n}'")))
            })
            .collect::<std::result::Result<_, _>>()?
    };
    if sizes.iter().any(|&n| n < 40) {
        bail!(smsn_roc::Error::Input("each group needs at least 20 observations (n >= 40)".into()));
    }

    let bands = Bands::default();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for def in &selected {
        for &n in sizes {
            let mut sc = ScenarioSpec::new(def, n, b, seed);
            sc.alpha = alpha;
            let s = run_scenario(&sc)?;
            eprintln!(
                "{:<4} n={:<5} succ {:.4} bias {:+.4} ratio {:.3} cov {:.3} bracket {:.3}",
                s.name, s.n, s.success_rate, s.bias, s.ratio, s.coverage, s.bracket_rate
            );
            if s.unreliable {
                log::warn!("{} n={}: success rate below one half", s.name, s.n);
            }
            checks.extend(check_bands(&s, &bands));
            rows.push(s);
        }
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    for f in &failed {
        eprintln!("band check failed: {} n={} {} = {:.4}", f.scenario, f.n, f.metric, f.value);
    }

    let summary = json!({
        "schema": SCHEMA,
        "seed": seed,
        "replications": b,
        "summaries": rows,
        "band_checks": checks,
    });
    match out {
        Some(dir) => {
            create_out(dir)?;
            write_summary_csv(&rows, writer(dir, "table.csv")?)?;
            write_wn_csv(&rows, writer(dir, "wn.csv")?)?;
            write_json(Some(dir), "summary.json", &summary)?;
        }
        None => write_summary_csv(&rows, io::stdout().lock())?,
    }
    Ok(if failed.is_empty() { 0 } else { EXIT_BANDS })
}

fn plotdata(report: &Path, kind: PlotKind, points: usize, out: &Path) -> Result<()> {
    let text = fs::read_to_string(report).with_context(|| format!("cannot read {}", report.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", report.display()))?;
    create_out(out)?;
    match kind {
        PlotKind::Qq => {
            let Some(rows) = v["summaries"].as_array() else {
                bail!(smsn_roc::Error::Input("qq needs a simulation summary.json".into()));
            };
            for s in rows {
                let w: Vec<f64> = serde_json::from_value(s["w_n_samples"].clone())?;
                let name = format!("qq_{}_{}.csv", s["name"].as_str().unwrap_or("scenario"), s["n"]);
                write_qq_csv(&qq_pairs(&w), writer(out, &name)?)?;
            }
        }
        PlotKind::Densities | PlotKind::RocTangents => {
            if v["theta"].is_null() {
                bail!(smsn_roc::Error::Input("densities and roc-tangents need an analysis report.json".into()));
            }
            let theta: Theta = serde_json::from_value(v["theta"].clone())?;
            let decisions = v["decisions"].as_array().cloned().unwrap_or_default();
            let cut = |d: &Value, key: &str| d["cutoff"][key].as_f64();
            if let PlotKind::Densities = kind {
                let mut a = f64::INFINITY;
                let mut b = f64::NEG_INFINITY;
                for d in &decisions {
                    a = a.min(d["cutoff"]["interval"]["a"].as_f64().unwrap_or(a));
                    b = b.max(d["cutoff"]["interval"]["b"].as_f64().unwrap_or(b));
                }
                if !(a < b) {
                    bail!(smsn_roc::Error::Input("report has no admissible interval".into()));
                }
                write_density_csv(&density_grid(&theta, a, b, points), writer(out, "densities.csv")?)?;
                let mut w = writer(out, "markers.csv")?;
                writeln!(w, "name,kind,c")?;
                for d in &decisions {
                    let name = d["name"].as_str().unwrap_or("");
                    for (kind, key) in [("optimal", "c_star"), ("youden", "c_youden"), ("youden_emp", "c_youden_emp")] {
                        if let Some(c) = cut(d, key) {
                            writeln!(w, "{name},{kind},{c}")?;
                        }
                    }
                }
                w.flush()?;
            } else {
                write_roc_csv(&theta, points, writer(out, "roc.csv")?)?;
                let mut tangents = Vec::new();
                for d in &decisions {
                    if let Some(c) = cut(d, "c_star") {
                        tangents.push(roc_tangent(&theta, d["name"].as_str().unwrap_or(""), c)?);
                    }
                }
                if let Some(c) = decisions.first().and_then(|d| cut(d, "c_youden")) {
                    tangents.push(roc_tangent(&theta, "youden", c)?);
                }
                write_tangents_csv(&tangents, writer(out, "tangents.csv")?)?;
            }
        }
    }
    Ok(())
}

fn fit_groups(data: &DataArgs, family: FamilyArg, out: Option<&Path>) -> Result<()> {
    let groups = load(data)?;
    let biomarker = data.value_col.clone();
    let mut fits = Vec::new();
    let mut rows = Vec::new();
    for (label, x) in [(&groups.neg_label, &groups.x0), (&groups.pos_label, &groups.x1)] {
        let entry = match family {
            FamilyArg::Auto => {
                let sel = select_model(x)?;
                rows.push(BicRow::new(&biomarker, label, &sel));
                eprintln!("{label}: {} (dBIC {})", sel.selected.spec, sel.delta_bic.map_or("-".into(), |d| format!("{d:.2}")));
                json!({ "group": label, "selection": sel })
            }
            FamilyArg::Sn | FamilyArg::St => {
                let fam = if family == FamilyArg::Sn { Family::SkewNormal } else { Family::SkewT };
                let f = fit(x, fam)?;
                if !f.converged {
                    bail!(smsn_roc::Error::FitFailed(format!("{fam} fit to group '{label}' did not converge")));
                }
                eprintln!("{label}: {} loglik {:.3}", f.spec, f.loglik);
                json!({ "group": label, "fit": f })
            }
        };
        fits.push(entry);
    }
    let doc = json!({ "schema": SCHEMA, "biomarker": biomarker, "log10": groups.log10, "groups": fits });
    if let Some(dir) = out {
        create_out(dir)?;
        write_json(Some(dir), "fits.json", &doc)?;
        if !rows.is_empty() {
            write_bic_csv(&rows, writer(dir, "bic.csv")?)?;
        }
    } else {
        write_json(None, "fits.json", &doc)?;
    }
    Ok(())
}
