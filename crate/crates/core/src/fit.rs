//! Per-group maximum likelihood, observed and expected information, BIC
//! model selection and the block-diagonal covariance of the two fits.

use crate::dist::{DistSpec, Family};
use crate::error::{Error, Result};
use crate::numeric::bfgs::{minimize, BfgsOptions};
use crate::numeric::quad::{integrate_vec_real_line, QuadOptions};
use crate::numeric::Richardson;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use std::f64::consts::PI;
use std::io::Write;

/// Smallest group size accepted by [`fit`].
pub const MIN_GROUP_SIZE: usize = 20;
/// Euclidean norm of the log-likelihood gradient required at the optimum.
pub const GRAD_TOL: f64 = 1e-5;
/// Eigenvalues below this fraction of the largest are raised to it.
pub const EIGEN_FLOOR: f64 = 1e-8;
const MAX_RESTARTS: usize = 5;
const BIC_TIE: f64 = 1e-9;
/// Upper bound on the skew-t degrees of freedom. A fit that runs into it is
/// refitted with `ν` held at the bound, which is then treated as known.
pub const NU_MAX: f64 = 1e4;
// Fits ending above this log(ν − 2) are treated as boundary solutions.
const NU_BOUNDARY_LOG: f64 = 8.0;
/// Extra degrees-of-freedom starts tried when a free fit reaches the bound.
const INTERIOR_NU_STARTS: [f64; 2] = [4.0, 20.0];

/// Cheap gradient used inside the quasi-Newton iterations.
const SEARCH_DIFF: Richardson = Richardson::new(2, 1e-3);

fn serialize_rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupFit {
    pub spec: DistSpec,
    pub loglik: f64,
    pub bic: f64,
    /// Negative Hessian of the log-likelihood in the unconstrained chart,
    /// at sample scale, after regularisation.
    #[serde(serialize_with = "serialize_rows")]
    pub obs_info: DMatrix<f64>,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Eigenvalues had to be floored to make `obs_info` positive definite.
    pub regularised: bool,
    /// `obs_info` is usable as a covariance (finite, positive definite).
    pub invertible: bool,
    /// `ν` sits at [`NU_MAX`] and is held fixed; its row and column of
    /// `obs_info` are zero and it carries no sampling variance.
    pub nu_fixed: bool,
}

impl GroupFit {
    pub fn family(&self) -> Family {
        self.spec.family
    }

    /// `(obs_info)⁻¹`, the sample-scale covariance of the unconstrained MLE.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        if !self.invertible {
            return Err(Error::SingularInformation(format!(
                "{} fit at {}",
                self.spec.family, self.spec
            )));
        }
        let p = self.obs_info.nrows();
        let free = if self.nu_fixed { p - 1 } else { p };
        let inv = self
            .obs_info
            .view((0, 0), (free, free))
            .into_owned()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::SingularInformation("Cholesky factorisation failed".into()))?;
        let mut cov = DMatrix::zeros(p, p);
        cov.view_mut((0, 0), (free, free)).copy_from(&inv);
        Ok(cov)
    }

    /// Standard errors of the unconstrained parameters.
    pub fn std_errors(&self) -> Result<Vec<f64>> {
        let cov = self.covariance()?;
        Ok((0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect())
    }
}

pub fn bic(loglik: f64, p: usize, n: usize) -> f64 {
    -2.0 * loglik + p as f64 * (n as f64).ln()
}

fn check_data(data: &[f64]) -> Result<()> {
    if data.len() < MIN_GROUP_SIZE {
        return Err(Error::Input(format!(
            "at least {MIN_GROUP_SIZE} observations per group are required, got {}",
            data.len()
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("data contain non-finite values".into()));
    }
    Ok(())
}

/// Log-likelihood in the unconstrained chart; `-∞` outside the domain.
fn loglik_at(family: Family, v: &[f64], data: &[f64]) -> f64 {
    if family == Family::SkewT && v[3] > (NU_MAX - 2.0).ln() {
        return f64::NEG_INFINITY;
    }
    if v[1].abs() > 700.0 {
        return f64::NEG_INFINITY;
    }
    match DistSpec::from_unconstrained(family, v) {
        Ok(spec) => {
            let k = spec.kernel();
            let ll: f64 = data.iter().map(|&x| k.ln_pdf(x)).sum();
            if ll.is_nan() {
                f64::NEG_INFINITY
            } else {
                ll
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Method-of-moments start: skew-normal moments with the sample skewness
/// clipped inside the attainable range, `ν = 10` for the skew-t.
pub fn moment_start(data: &[f64], family: Family) -> Vec<f64> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let m2 = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = data.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let sd = m2.sqrt().max(1e-12);
    let skew = (m3 / (sd * sd * sd)).clamp(-0.95, 0.95);

    // γ1 = (4 − π)/2 · r³ with r = μ_z/√(1 − μ_z²)
    let r = (2.0 * skew / (4.0 - PI)).cbrt();
    let mu_z = r / (1.0 + r * r).sqrt();
    let b = (2.0 / PI).sqrt();
    let delta = (mu_z / b).clamp(-0.99, 0.99);
    let alpha = delta / (1.0 - delta * delta).sqrt();
    let mut omega = sd / (1.0 - mu_z * mu_z).sqrt();
    let xi = mean - omega * mu_z;
    match family {
        Family::SkewNormal => vec![xi, omega.ln(), alpha],
        Family::SkewT => {
            let nu: f64 = 10.0;
            omega /= (nu / (nu - 2.0)).sqrt();
            vec![xi, omega.ln(), alpha, (nu - 2.0).ln()]
        }
    }
}

struct Attempt {
    v: Vec<f64>,
    loglik: f64,
    grad_norm: f64,
    iterations: usize,
    hessian: Option<DMatrix<f64>>,
}

/// Maximises `ll` (a sum over `n` observations) from `start`.
fn solve_from<L: Fn(&[f64]) -> f64 + Copy>(ll: L, n: usize, start: &[f64]) -> Attempt {
    let n = n as f64;
    let f = |v: &[f64]| -ll(v) / n;
    let g = |v: &[f64]| SEARCH_DIFF.gradient(f, v);
    let opts = BfgsOptions { grad_tol: 1e-7, ..BfgsOptions::default() };
    let out = minimize(f, g, start, opts);
    let mut iterations = out.iterations;

    // Newton polish on the sum scale with the full-accuracy derivatives.
    let neg_ll = |v: &[f64]| -ll(v);
    let diff = Richardson::default();
    let mut v = out.x;
    let mut value = neg_ll(&v);
    let mut hessian = None;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..8 {
        if !value.is_finite() {
            break;
        }
        let grad = DVector::from_vec(diff.gradient(neg_ll, &v));
        grad_norm = grad.norm();
        if !grad_norm.is_finite() {
            break;
        }
        if grad_norm < GRAD_TOL {
            break;
        }
        let h = Richardson::HESSIAN.hessian(neg_ll, &v);
        let (h_reg, _) = floor_eigenvalues(&h, true);
        let Some(chol) = h_reg.cholesky() else { break };
        let mut step = -chol.solve(&grad);
        let len = step.norm();
        if len > 1.0 {
            step /= len;
        }
        let mut moved = false;
        let mut t = 1.0;
        for _ in 0..30 {
            let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let ft = neg_ll(&trial);
            if ft.is_finite() && ft <= value + 1e-12 * value.abs().max(1.0) {
                v = trial;
                value = ft;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        hessian = None;
        if !moved {
            break;
        }
    }
    if grad_norm.is_finite() && grad_norm < GRAD_TOL && hessian.is_none() {
        hessian = Some(Richardson::HESSIAN.hessian(neg_ll, &v));
    }
    Attempt { v, loglik: -value, grad_norm, iterations, hessian }
}

/// Returns the matrix with eigenvalues floored at `EIGEN_FLOOR · λ_max`
/// and whether any were changed. With `absolute`, negative eigenvalues are
/// first replaced by their magnitude.
fn floor_eigenvalues(h: &DMatrix<f64>, absolute: bool) -> (DMatrix<f64>, bool) {
    let sym = (h + h.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    if absolute {
        eig.eigenvalues.iter_mut().for_each(|l| *l = l.abs());
    }
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return (h.clone(), false);
    }
    let floor = EIGEN_FLOOR * max;
    let mut changed = false;
    for l in eig.eigenvalues.iter_mut() {
        if *l < floor {
            *l = floor;
            changed = true;
        }
    }
    (eig.recompose(), changed)
}

/// Regularises a negative log-likelihood Hessian into an information matrix.
/// Returns `(matrix, regularised, invertible)`.
pub fn regularise_information(h: &DMatrix<f64>) -> (DMatrix<f64>, bool, bool) {
    if h.iter().any(|x| !x.is_finite()) {
        return (h.clone(), false, false);
    }
    let sym = (h + h.transpose()) * 0.5;
    let max = SymmetricEigen::new(sym.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return (sym, false, false);
    }
    let (m, changed) = floor_eigenvalues(&sym, false);
    if changed {
        log::warn!("observed information regularised (eigenvalue floor {EIGEN_FLOOR:e} x max)");
    }
    let ok = m.clone().cholesky().is_some();
    (m, changed, ok)
}

fn perturb(start: &[f64], attempt: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + attempt as u64);
    let mut v = start.to_vec();
    let spread = 0.5 * attempt as f64;
    v[0] += spread * scale * rng.random_range(-1.0..1.0);
    v[1] += spread * 0.5 * rng.random_range(-1.0..1.0);
    v[2] = 0.5 * v[2] + spread * rng.random_range(-1.5..1.5);
    if v.len() > 3 {
        v[3] += spread * rng.random_range(-1.0..1.0);
    }
    v
}

/// Maximum-likelihood fit of `family` to `data`.
///
/// Failure to converge after the restart schedule is reported through
/// `converged = false`; only invalid input is an error.
pub fn fit(data: &[f64], family: Family) -> Result<GroupFit> {
    check_data(data)?;
    let start = moment_start(data, family);
    fit_from(data, family, &start)
}

/// Runs the restart schedule; stops early on success or when `at_boundary`
/// says restarts are pointless.
fn multistart<L, B>(ll: L, n: usize, start: &[f64], at_boundary: B) -> (Attempt, usize)
where
    L: Fn(&[f64]) -> f64 + Copy,
    B: Fn(&[f64]) -> bool,
{
    let scale = start[1].exp();
    let mut best: Option<Attempt> = None;
    let mut total_iter = 0;
    for attempt in 0..=MAX_RESTARTS {
        let x0 = if attempt == 0 { start.to_vec() } else { perturb(start, attempt, scale) };
        let a = solve_from(ll, n, &x0);
        total_iter += a.iterations;
        let ok = a.hessian.is_some() && a.loglik.is_finite();
        let better = match &best {
            None => true,
            Some(b) => {
                let b_ok = b.hessian.is_some();
                (ok && !b_ok) || (ok == b_ok && a.loglik > b.loglik)
            }
        };
        if better {
            best = Some(a);
        }
        let stop = best.as_ref().is_some_and(|b| at_boundary(&b.v));
        if ok || stop {
            break;
        }
        log::debug!("fit attempt {attempt} did not converge, restarting");
    }
    (best.expect("at least one attempt"), total_iter)
}

/// Embeds the `(ξ, log ω, α)` information into the 4×4 skew-t layout with a
/// zero row and column for the fixed `ν`.
fn pad_fixed_nu(h: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(4, 4);
    m.view_mut((0, 0), (3, 3)).copy_from(h);
    m
}

/// Same as [`fit`] from a caller-supplied unconstrained start.
pub fn fit_from(data: &[f64], family: Family, start: &[f64]) -> Result<GroupFit> {
    check_data(data)?;
    if start.len() != family.n_params() {
        return Err(Error::ParamLength { expected: family.n_params(), got: start.len() });
    }
    let mut start = start.to_vec();
    if family == Family::SkewT {
        start[3] = start[3].min(NU_BOUNDARY_LOG);
    }
    let (mut best, mut total_iter) = multistart(
        |v| loglik_at(family, v, data),
        data.len(),
        &start,
        |v| family == Family::SkewT && v[3] > NU_BOUNDARY_LOG,
    );

    let mut nu_fixed = false;
    if family == Family::SkewT && best.v[3] > NU_BOUNDARY_LOG {
        // The likelihood keeps rising towards the skew-normal limit.
        let log_nu = (NU_MAX - 2.0).ln();
        let ll3 = |v: &[f64]| loglik_at(family, &[v[0], v[1], v[2], log_nu], data);
        let (b3, it) = multistart(ll3, data.len(), &best.v[..3], |_| false);
        total_iter += it;
        if b3.hessian.is_some() && (best.hessian.is_none() || b3.loglik >= best.loglik - 1e-6) {
            log::debug!("skew-t fit at the degrees-of-freedom bound {NU_MAX}");
            let mut v = b3.v.clone();
            v.push(log_nu);
            best = Attempt { v, hessian: b3.hessian.as_ref().map(pad_fixed_nu), ..b3 };
            nu_fixed = true;
        }
        // The path to the bound can pass by an interior maximum; look for
        // one from heavier- and lighter-tailed starts.
        for nu0 in INTERIOR_NU_STARTS {
            let mut x0 = start[..3].to_vec();
            x0.push((nu0 - 2.0).ln());
            let a = solve_from(|v| loglik_at(family, v, data), data.len(), &x0);
            total_iter += a.iterations;
            let interior = a.v[3] <= NU_BOUNDARY_LOG;
            if interior && a.hessian.is_some() && a.loglik > best.loglik + 1e-6 {
                best = a;
                nu_fixed = false;
            }
        }
    }

    let converged = best.hessian.is_some();
    let spec = DistSpec::from_unconstrained(family, &best.v)
        .or_else(|_| DistSpec::from_unconstrained(family, &start))?;
    let p = family.n_params();
    let (obs_info, regularised, invertible) = match &best.hessian {
        Some(h) if nu_fixed => {
            let (m, r, ok) = regularise_information(&h.view((0, 0), (3, 3)).into_owned());
            (pad_fixed_nu(&m), r, ok)
        }
        Some(h) => regularise_information(h),
        None => (DMatrix::zeros(p, p), false, false),
    };
    if !converged {
        log::warn!("{family} fit did not converge (gradient norm {:e})", best.grad_norm);
    }
    Ok(GroupFit {
        spec,
        loglik: best.loglik,
        bic: bic(best.loglik, p, data.len()),
        obs_info,
        n: data.len(),
        converged,
        iterations: total_iter,
        grad_norm: best.grad_norm,
        regularised,
        invertible: converged && invertible,
        nu_fixed,
    })
}

/// Negative Hessian of the log-likelihood at the fitted parameters,
/// regularised if needed. A `ν` held at its bound gets a zero row and column.
pub fn observed_information(fit: &GroupFit, data: &[f64]) -> Result<DMatrix<f64>> {
    if !fit.converged {
        return Err(Error::FitFailed("observed information requested for a failed fit".into()));
    }
    let family = fit.spec.family;
    let v = fit.spec.to_unconstrained().0;
    let (m, ok) = if fit.nu_fixed {
        let log_nu = v[3];
        let h = Richardson::HESSIAN
            .hessian(|t| -loglik_at(family, &[t[0], t[1], t[2], log_nu], data), &v[..3]);
        let (m, _, ok) = regularise_information(&h);
        (pad_fixed_nu(&m), ok)
    } else {
        let h = Richardson::HESSIAN.hessian(|t| -loglik_at(family, t, data), &v);
        let (m, _, ok) = regularise_information(&h);
        (m, ok)
    };
    if !ok {
        return Err(Error::SingularInformation(format!("at {}", fit.spec)));
    }
    Ok(m)
}

/// Expected (per-observation) information `E[s sᵀ]` of one observation, with
/// the score `s` taken by Richardson differences of the log density.
pub fn fisher_information(spec: &DistSpec) -> DMatrix<f64> {
    let family = spec.family;
    let v = spec.to_unconstrained().0;
    let p = v.len();
    let k = spec.kernel();
    let diff = Richardson::default();
    let centre = spec.quantile(0.5).unwrap_or(spec.xi);
    let opts = QuadOptions { abs_tol: 1e-11, rel_tol: 1e-9, max_intervals: 400 };
    let flat = integrate_vec_real_line(
        |x, out: &mut [f64]| {
            let dens = k.pdf(x);
            if dens == 0.0 || !dens.is_finite() {
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
            let score = diff.gradient(
                |t| match DistSpec::from_unconstrained(family, t) {
                    Ok(s) => s.ln_pdf(x),
                    Err(_) => f64::NAN,
                },
                &v,
            );
            for i in 0..p {
                for j in 0..p {
                    out[i * p + j] = score[i] * score[j] * dens;
                }
            }
        },
        p * p,
        centre,
        opts,
    );
    let m = DMatrix::from_row_slice(p, p, &flat);
    (&m + m.transpose()) * 0.5
}

/// Block-diagonal covariance of `√n (θ̂ − θ)` for the stacked `(θ0, θ1)`.
#[derive(Clone, Debug, Serialize)]
pub struct JointCovariance {
    #[serde(serialize_with = "serialize_rows")]
    pub sigma: DMatrix<f64>,
    /// Dimension of the `θ0` block.
    pub p0: usize,
    pub n0: usize,
    pub n1: usize,
    pub n: usize,
    pub eta0: f64,
    pub eta1: f64,
}

impl JointCovariance {
    fn assemble(block0: DMatrix<f64>, block1: DMatrix<f64>, n0: usize, n1: usize) -> Self {
        let (p0, p1) = (block0.nrows(), block1.nrows());
        let mut sigma = DMatrix::zeros(p0 + p1, p0 + p1);
        sigma.view_mut((0, 0), (p0, p0)).copy_from(&block0);
        sigma.view_mut((p0, p0), (p1, p1)).copy_from(&block1);
        let n = n0 + n1;
        JointCovariance {
            sigma,
            p0,
            n0,
            n1,
            n,
            eta0: n0 as f64 / n as f64,
            eta1: n1 as f64 / n as f64,
        }
    }

    /// Population version: blocks `η_k⁻¹ I_k⁻¹` from the expected information.
    pub fn population(spec0: &DistSpec, spec1: &DistSpec, n0: usize, n1: usize) -> Result<Self> {
        let n = (n0 + n1) as f64;
        let block = |spec: &DistSpec, nk: usize| -> Result<DMatrix<f64>> {
            let info = fisher_information(spec);
            let inv = info.cholesky().map(|c| c.inverse()).ok_or_else(|| {
                Error::SingularInformation(format!("expected information at {spec}"))
            })?;
            Ok(inv * (n / nk as f64))
        };
        Ok(Self::assemble(block(spec0, n0)?, block(spec1, n1)?, n0, n1))
    }

}

/// `Σ̂` from two separate fits: block `k` is `η_k⁻¹ (obs_info_k / n_k)⁻¹`.
pub fn joint_covariance(fit0: &GroupFit, fit1: &GroupFit) -> Result<JointCovariance> {
    if !fit0.converged || !fit1.converged {
        return Err(Error::FitFailed("joint covariance needs two converged fits".into()));
    }
    let n = (fit0.n + fit1.n) as f64;
    let b0 = fit0.covariance()? * n;
    let b1 = fit1.covariance()? * n;
    Ok(JointCovariance::assemble(b0, b1, fit0.n, fit1.n))
}

/// Outcome of fitting both families and choosing by BIC.
#[derive(Clone, Debug, Serialize)]
pub struct ModelSelection {
    pub selected: GroupFit,
    pub bic_sn: Option<f64>,
    pub bic_st: Option<f64>,
    /// `BIC_SN − BIC_ST`; positive favours the skew-t.
    pub delta_bic: Option<f64>,
}

/// Fits SN and ST and keeps the lower-BIC model (SN on ties).
pub fn select_model(data: &[f64]) -> Result<ModelSelection> {
    check_data(data)?;
    let sn = fit(data, Family::SkewNormal)?;
    let mut st_start = if sn.converged {
        let mut v = sn.spec.to_unconstrained().0;
        v.push(8f64.ln());
        v
    } else {
        moment_start(data, Family::SkewT)
    };
    let mut st = fit_from(data, Family::SkewT, &st_start)?;
    if !st.converged {
        st_start = moment_start(data, Family::SkewT);
        st = fit_from(data, Family::SkewT, &st_start)?;
    }
    let bic_sn = sn.converged.then_some(sn.bic);
    let bic_st = st.converged.then_some(st.bic);
    let selected = match (sn.converged, st.converged) {
        (true, true) => {
            if sn.bic - st.bic > BIC_TIE {
                st
            } else {
                sn
            }
        }
        (true, false) => {
            log::warn!("skew-t fit failed; keeping the skew-normal fit");
            sn
        }
        (false, true) => {
            log::warn!("skew-normal fit failed; keeping the skew-t fit");
            st
        }
        (false, false) => return Err(Error::FitFailed("neither SN nor ST fit converged".into())),
    };
    let delta_bic = match (bic_sn, bic_st) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    Ok(ModelSelection { selected, bic_sn, bic_st, delta_bic })
}

/// One row of the model-selection table.
#[derive(Clone, Debug, Serialize)]
pub struct BicRow {
    pub biomarker: String,
    pub group: String,
    pub selected: Family,
    pub bic_sn: Option<f64>,
    pub bic_st: Option<f64>,
    pub delta_bic: Option<f64>,
}

impl BicRow {
    pub fn new(biomarker: &str, group: &str, sel: &ModelSelection) -> Self {
        BicRow {
            biomarker: biomarker.to_string(),
            group: group.to_string(),
            selected: sel.selected.spec.family,
            bic_sn: sel.bic_sn,
            bic_st: sel.bic_st,
            delta_bic: sel.delta_bic,
        }
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn write_bic_csv<W: Write>(rows: &[BicRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["biomarker", "group", "selected", "BIC_SN", "BIC_ST", "ΔBIC"])?;
    for r in rows {
        w.write_record([
            r.biomarker.clone(),
            r.group.clone(),
            r.selected.label().to_string(),
            opt_cell(r.bic_sn),
            opt_cell(r.bic_st),
            opt_cell(r.delta_bic),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;

    fn draws(spec: &DistSpec, n: usize, seed: u64) -> Vec<f64> {
        spec.sample(n, &mut ChaCha20Rng::seed_from_u64(seed))
    }

    #[test]
    fn recovers_skew_normal_parameters() {
        let truth = DistSpec::skew_normal(0.0, 1.0, 1.0).unwrap();
        let data = draws(&truth, 10_000, 11);
        let f = fit(&data, Family::SkewNormal).unwrap();
        assert!(f.converged);
        assert!(f.grad_norm < GRAD_TOL);
        assert!(f.spec.xi.abs() < 0.05, "{}", f.spec);
        assert!((f.spec.omega - 1.0).abs() < 0.05, "{}", f.spec);
        assert!((f.spec.alpha - 1.0).abs() < 0.2, "{}", f.spec);
        assert!((f.bic - (-2.0 * f.loglik + 3.0 * 10_000f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn gaussian_data_fit_dominates_normal_and_matches_its_moments() {
        // The skew-normal likelihood is flat in α at the normal, so α̂ itself
        // converges slowly; the fitted law must still be close to N(0, 1).
        let data = draws(&DistSpec::normal(0.0, 1.0).unwrap(), 10_000, 12);
        let f = fit(&data, Family::SkewNormal).unwrap();
        assert!(f.converged);
        let n = data.len() as f64;
        let m = data.iter().sum::<f64>() / n;
        let s = (data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
        let ll_normal = crate::dist::log_likelihood(&DistSpec::normal(m, s).unwrap(), &data);
        assert!(f.loglik >= ll_normal - 1e-8);
        assert!(f.spec.mean().abs() < 0.05);
        assert!(f.spec.alpha.abs() < 1.0, "{}", f.spec);
        for p in [0.1, 0.5, 0.9] {
            let q = f.spec.quantile(p).unwrap();
            assert!((q - crate::numeric::special::norm_quantile(p)).abs() < 0.05);
        }
    }

    #[test]
    fn skew_t_dof_in_plausible_range() {
        let truth = DistSpec::skew_t(0.0, 1.0, 1.5, 7.0).unwrap();
        let data = draws(&truth, 10_000, 13);
        let f = fit(&data, Family::SkewT).unwrap();
        assert!(f.converged);
        let nu = f.spec.nu.unwrap();
        assert!((4.0..=12.0).contains(&nu), "nu = {nu}");
    }

    #[test]
    fn too_few_points_is_input_error() {
        let err = fit(&[1.0, 2.0, 3.0, 4.0, 5.0], Family::SkewNormal).unwrap_err();
        assert!(err.is_input_error());
    }

    #[test]
    fn flat_information_is_singular() {
        let (_, _, ok) = regularise_information(&DMatrix::zeros(3, 3));
        assert!(!ok);
    }

    #[test]
    fn joint_covariance_blocks() {
        let spec = DistSpec::skew_normal(0.0, 1.0, 1.0).unwrap();
        let d0 = draws(&spec, 800, 1);
        let d1 = draws(&spec, 200, 2);
        let f0 = fit(&d0, Family::SkewNormal).unwrap();
        let f1 = fit(&d1, Family::SkewNormal).unwrap();
        let j = joint_covariance(&f0, &f1).unwrap();
        assert!((j.eta0 - 0.8).abs() < 1e-15 && (j.eta1 - 0.2).abs() < 1e-15);
        assert_eq!(j.p0, 3);
        for i in 0..3 {
            for k in 3..6 {
                assert_eq!(j.sigma[(i, k)], 0.0);
                assert_eq!(j.sigma[(k, i)], 0.0);
            }
        }
        // block 0 = η0⁻¹ (info0 / n0)⁻¹
        let per_obs = &f0.obs_info / 800.0;
        let expect = per_obs.cholesky().unwrap().inverse() / 0.8;
        let got = j.sigma.view((0, 0), (3, 3)).into_owned();
        assert!((got - expect).amax() < 1e-9);
        assert!(j.sigma.clone().cholesky().is_some());
    }

    #[test]
    fn fisher_information_of_normal() {
        // In (ξ, log ω, α) at α = 0: diag(1/ω², 2, 2/π) with ξ–α coupling √(2/π)/ω.
        let spec = DistSpec::skew_normal(0.5, 2.0, 0.0).unwrap();
        let info = fisher_information(&spec);
        let b = (2.0 / PI).sqrt();
        assert!((info[(0, 0)] - 0.25).abs() < 1e-6);
        assert!((info[(1, 1)] - 2.0).abs() < 1e-6);
        assert!((info[(2, 2)] - 2.0 / PI).abs() < 1e-6);
        assert!((info[(0, 2)] - b / 2.0).abs() < 1e-6);
        assert!(info[(0, 1)].abs() < 1e-6);
    }

    #[test]
    fn bic_csv_header() {
        let mut buf = Vec::new();
        write_bic_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), "biomarker,group,selected,BIC_SN,BIC_ST,ΔBIC");
    }
}
