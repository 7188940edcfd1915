//! PRESS statistics, prediction coefficients and likelihood-ratio R² for a
//! fitted beta regression.
//!
//! At convergence `β̂` is the least squares solution of the transformed
//! regression of `y̌ = (Φ̂Ŵ)^{1/2} u₁` on `X̌ = (Φ̂Ŵ)^{1/2} X`. Deleting case
//! `t` from that regression changes its prediction error to
//! `r^β_t / (1 − h*_tt)`, where `h*_tt` is the leverage of case `t` in
//! `X̌`. Both PRESS statistics are built from that identity.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{spd_factor, weighted_gram};
use crate::model::{FittedModel, LinkFunction, ModelSpec};
use crate::moments;
use crate::residuals::{combined_residual, residuals_beta_gamma};
use crate::scoring::{fit, FitOptions};

/// The weighted least squares problem solved by `β̂` at convergence.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedRegression {
    /// `(φ̂_t ŵ_t)^{1/2}`, the row scaling applied to `X` and `u₁`.
    pub row_scale: DVector<f64>,
    /// Working response `u₁ = η̂ + Ŵ⁻¹T̂(y* − μ̂*)`.
    pub u1: DVector<f64>,
    /// `y̌ = (Φ̂Ŵ)^{1/2} u₁`.
    pub y_check: DVector<f64>,
}

pub fn transformed_regression(fit: &FittedModel, spec: &ModelSpec) -> Result<TransformedRegression> {
    let n = spec.n();
    if fit.mu.len() != n || fit.beta.len() != spec.k() {
        return Err(Error::Inconsistent("fit does not belong to this specification".into()));
    }
    let link = spec.mean_link();
    let mut row_scale = DVector::zeros(n);
    let mut u1 = DVector::zeros(n);
    for t in 0..n {
        let (m, p) = (fit.mu[t], fit.phi[t]);
        let y = spec.y()[t];
        let dg = link.derivative_unchecked(m);
        let v = moments::v(m, p);
        let y_star = (y / (1.0 - y)).ln();
        // φw = φ²v/g′², so (φw)^{1/2} = φ√v/g′ and W⁻¹T = g′/(φv).
        row_scale[t] = p * v.sqrt() / dg;
        u1[t] = fit.eta[t] + dg * (y_star - moments::mu_star(m, p)) / (p * v);
    }
    let y_check = row_scale.component_mul(&u1);
    Ok(TransformedRegression { row_scale, u1, y_check })
}

/// Diagonal of `H* = (ŴΦ̂)^{1/2} X (XᵀΦ̂ŴX)⁻¹ Xᵀ (Φ̂Ŵ)^{1/2}`.
pub fn hat_diagonal(fit: &FittedModel, spec: &ModelSpec) -> Result<DVector<f64>> {
    let tr = transformed_regression(fit, spec)?;
    let weights = tr.row_scale.map(|s| s * s);
    let chol = spd_factor(&weighted_gram(spec.x(), &weights), "weighted mean information XᵀΦWX")?;
    let l = chol.l();
    let mut out = DVector::zeros(spec.n());
    for t in 0..spec.n() {
        let row = spec.x().row(t).transpose() * tr.row_scale[t];
        let solved = l
            .solve_lower_triangular(&row)
            .ok_or(Error::Singular("weighted mean information XᵀΦWX"))?;
        out[t] = solved.norm_squared();
    }
    Ok(out)
}

fn press_from(residual: &DVector<f64>, leverage: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let mut components = DVector::zeros(residual.len());
    for t in 0..residual.len() {
        let gap = 1.0 - leverage[t];
        if gap <= 1e-12 {
            return Err(Error::Degenerate {
                index: t,
                reason: "leverage h*_tt equals one",
            });
        }
        components[t] = (residual[t] / gap).powi(2);
    }
    let total = components.iter().sum();
    Ok((total, components))
}

/// `PRESS = Σ (r^β_t / (1 − h*_tt))²` with its per-observation components.
pub fn press(fit: &FittedModel, spec: &ModelSpec) -> Result<(f64, DVector<f64>)> {
    let residuals = residuals_beta_gamma(fit, spec)?;
    press_from(&residuals.r_beta, &hat_diagonal(fit, spec)?)
}

/// `PRESS_βγ = Σ (r^βγ_{p,t} / (1 − h*_tt))²` with its components.
pub fn press_beta_gamma(fit: &FittedModel, spec: &ModelSpec) -> Result<(f64, DVector<f64>)> {
    press_from(&combined_residual(fit, spec)?, &hat_diagonal(fit, spec)?)
}

/// `SST_(t) = (n/(n−p))² Σ (y̌_t − ȳ̌)²` with `p = k + q`.
pub fn sst_deleted(fit: &FittedModel, spec: &ModelSpec) -> Result<f64> {
    let n = spec.n();
    let p = spec.k() + spec.q();
    if n <= p {
        return Err(Error::domain("sample size relative to parameter count", n as f64));
    }
    let y_check = transformed_regression(fit, spec)?.y_check;
    Ok(sst_deleted_from(&y_check, p))
}

pub(crate) fn sst_deleted_from(y_check: &DVector<f64>, p: usize) -> f64 {
    let n = y_check.len() as f64;
    let mean = y_check.mean();
    let sst: f64 = y_check.iter().map(|v| (v - mean).powi(2)).sum();
    let factor = n / (n - p as f64);
    factor * factor * sst
}

/// `P² = 1 − PRESS / SST_(t)`; at most one, unbounded below.
pub fn p2(press: f64, sst_deleted: f64) -> Result<f64> {
    if !(sst_deleted > 0.0) {
        return Err(Error::Undefined(
            "prediction coefficient with zero total sum of squares",
        ));
    }
    Ok(1.0 - press / sst_deleted)
}

/// `R²_LR = 1 − (L_null / L_fit)^{2/n}`, evaluated in log space.
pub fn r2_lr(fit: &FittedModel, null_fit: &FittedModel, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("sample size", 0.0));
    }
    let gap = null_fit.loglik - fit.loglik;
    if gap > 1e-8 * (1.0 + fit.loglik.abs()) {
        return Err(Error::Inconsistent(format!(
            "null model log-likelihood {} exceeds the fitted model's {}; models are not nested",
            null_fit.loglik, fit.loglik
        )));
    }
    Ok(-(2.0 / n as f64 * gap).exp_m1())
}

/// `λ = max φ_t / min φ_t`.
pub fn lambda_ratio(phi: &[f64]) -> Result<f64> {
    if phi.is_empty() {
        return Err(Error::domain("precision vector length", 0.0));
    }
    if let Some(bad) = phi.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::domain("precision", *bad));
    }
    let max = phi.iter().copied().fold(f64::MIN, f64::max);
    let min = phi.iter().copied().fold(f64::MAX, f64::min);
    Ok(max / min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub press: f64,
    pub press_bg: f64,
    pub p2: f64,
    pub p2_bg: f64,
    pub r2_lr: f64,
    pub lambda: f64,
    pub sst_deleted: f64,
    pub h_star_diag: DVector<f64>,
    pub press_components: DVector<f64>,
    pub press_bg_components: DVector<f64>,
    pub loo_press_raw: Option<f64>,
}

/// All prediction measures of `fit`, using `null_fit` (intercept-only mean
/// and precision) for `R²_LR`.
pub fn prediction_report(fit: &FittedModel, null_fit: &FittedModel, spec: &ModelSpec) -> Result<PredictionReport> {
    let n = spec.n();
    let p = spec.k() + spec.q();
    if n <= p {
        return Err(Error::domain("sample size relative to parameter count", n as f64));
    }
    let residuals = residuals_beta_gamma(fit, spec)?;
    let leverage = hat_diagonal(fit, spec)?;
    let (press_value, press_components) = press_from(&residuals.r_beta, &leverage)?;
    let (press_bg, press_bg_components) = press_from(&residuals.r_combined_std, &leverage)?;
    let sst = sst_deleted_from(&transformed_regression(fit, spec)?.y_check, p);
    Ok(PredictionReport {
        press: press_value,
        press_bg,
        p2: p2(press_value, sst)?,
        p2_bg: p2(press_bg, sst)?,
        r2_lr: r2_lr(fit, null_fit, n)?,
        lambda: lambda_ratio(fit.phi.as_slice())?,
        sst_deleted: sst,
        h_star_diag: leverage,
        press_components,
        press_bg_components,
        loo_press_raw: None,
    })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub fit: FittedModel,
    pub null_fit: FittedModel,
    pub report: PredictionReport,
}

/// Fits `spec` and its null model, then computes the prediction report.
/// Fails if either fit does not converge.
pub fn evaluate(spec: &ModelSpec, options: &FitOptions) -> Result<Evaluation> {
    let fitted = fit(spec, options)?;
    if !fitted.converged {
        return Err(Error::Estimation(format!(
            "no convergence after {} iterations",
            fitted.iterations
        )));
    }
    let null_spec = spec.null_model()?;
    let null_fit = fit(&null_spec, options)?;
    if !null_fit.converged {
        return Err(Error::Estimation("null model did not converge".into()));
    }
    let report = prediction_report(&fitted, &null_fit, spec)?;
    Ok(Evaluation {
        fit: fitted,
        null_fit,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooPress {
    /// `Σ (y_t − ŷ_(t))² / m` over the `m` deletions whose refit converged.
    pub value: f64,
    pub squared_errors: Vec<Option<f64>>,
    /// Indices whose deletion refit failed.
    pub failed: Vec<usize>,
}

/// Leave-one-out prediction error on the response scale from `n` full refits,
/// `ŷ_(t) = g⁻¹(x_tᵀ β̂_(t))`.
pub fn loo_press_raw(spec: &ModelSpec, options: &FitOptions) -> Result<LooPress> {
    let n = spec.n();
    let squared_errors: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|t| {
            let reduced = spec.without_observation(t).ok()?;
            let refit = fit(&reduced, options).ok().filter(|f| f.converged)?;
            let eta = (spec.x().row(t) * &refit.beta)[0];
            let predicted = spec.mean_link().inverse(eta);
            Some((spec.y()[t] - predicted).powi(2))
        })
        .collect();
    let failed: Vec<usize> = squared_errors
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_none())
        .map(|(t, _)| t)
        .collect();
    let used: Vec<f64> = squared_errors.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::Estimation("every deletion refit failed".into()));
    }
    let value = used.iter().sum::<f64>() / used.len() as f64;
    Ok(LooPress {
        value,
        squared_errors,
        failed,
    })
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: String,
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateStats {
    pub p2: f64,
    pub p2_bg: f64,
    pub r2_lr: f64,
    pub loglik: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub name: String,
    pub mean_link: LinkFunction,
    pub k: usize,
    pub q: usize,
    /// `Err` holds the reason a candidate was not competitive.
    pub outcome: std::result::Result<CandidateStats, String>,
}

/// Candidates ranked by `P²` (then `P²_βγ`), failed fits last; ties keep
/// input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTable {
    pub rows: Vec<SelectionRow>,
}

impl SelectionTable {
    /// The best competitive candidate, if any.
    pub fn selected(&self) -> Option<&SelectionRow> {
        self.rows.first().filter(|r| r.outcome.is_ok())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,candidate,mean_link,k,q,p2,p2_bg,r2_lr,loglik,lambda,selected,status\n");
        for (i, row) in self.rows.iter().enumerate() {
            let selected = i == 0 && row.outcome.is_ok();
            match &row.outcome {
                Ok(s) => out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},ok\n",
                    i + 1,
                    csv_field(&row.name),
                    row.mean_link,
                    row.k,
                    row.q,
                    s.p2,
                    s.p2_bg,
                    s.r2_lr,
                    s.loglik,
                    s.lambda,
                    selected
                )),
                Err(reason) => out.push_str(&format!(
                    "{},{},{},{},{},NA,NA,NA,NA,NA,false,{}\n",
                    i + 1,
                    csv_field(&row.name),
                    row.mean_link,
                    row.k,
                    row.q,
                    csv_field(&format!("failed: {reason}"))
                )),
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Formats `value` with `digits` significant digits.
pub fn format_significant(value: f64, digits: usize) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    if value == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let magnitude = value.abs().log10().floor() as i32;
    if !(-5..15).contains(&magnitude) {
        return format!("{:.*e}", digits.saturating_sub(1), value);
    }
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

impl fmt::Display for SelectionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(9).max(9);
        writeln!(
            f,
            "  {:<width$}  {:>8}  {:>8}  {:>8}",
            "candidate", "P2", "P2_bg", "R2_LR"
        )?;
        for (i, row) in self.rows.iter().enumerate() {
            let mark = if i == 0 && row.outcome.is_ok() { '*' } else { ' ' };
            match &row.outcome {
                Ok(s) => writeln!(
                    f,
                    "{mark} {:<width$}  {:>8}  {:>8}  {:>8}",
                    row.name,
                    format_significant(s.p2, 4),
                    format_significant(s.p2_bg, 4),
                    format_significant(s.r2_lr, 4)
                )?,
                Err(reason) => writeln!(f, "  {:<width$}  failed: {reason}", row.name)?,
            }
        }
        Ok(())
    }
}

fn compare_outcomes(a: &SelectionRow, b: &SelectionRow) -> Ordering {
    match (&a.outcome, &b.outcome) {
        (Ok(x), Ok(y)) => y.p2.total_cmp(&x.p2).then(y.p2_bg.total_cmp(&x.p2_bg)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => Ordering::Equal,
    }
}

/// Fits every candidate, computes `P²`, `P²_βγ` and `R²_LR`, and ranks them.
pub fn model_selection_report(candidates: &[Candidate], options: &FitOptions) -> Result<SelectionTable> {
    let Some(first) = candidates.first() else {
        return Err(Error::Config("no candidate models given".into()));
    };
    if candidates.iter().any(|c| c.spec.y() != first.spec.y()) {
        return Err(Error::Inconsistent(
            "candidate models must share the same response".into(),
        ));
    }
    let mut rows: Vec<SelectionRow> = candidates
        .iter()
        .map(|c| SelectionRow {
            name: c.name.clone(),
            mean_link: c.spec.mean_link(),
            k: c.spec.k(),
            q: c.spec.q(),
            outcome: evaluate(&c.spec, options)
                .map(|e| CandidateStats {
                    p2: e.report.p2,
                    p2_bg: e.report.p2_bg,
                    r2_lr: e.report.r2_lr,
                    loglik: e.fit.loglik,
                    lambda: e.report.lambda,
                })
                .map_err(|e| e.to_string()),
        })
        .collect();
    rows.sort_by(compare_outcomes);
    Ok(SelectionTable { rows })
}
