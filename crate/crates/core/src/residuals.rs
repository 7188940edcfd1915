//! Ordinary residuals from the two scoring schemes and the standardized
//! combined residual, all evaluated at the fitted `(μ̂_t, φ̂_t)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{FittedModel, ModelSpec};
use crate::moments;
use crate::scoring::working_a;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkingQuantities {
    pub y_star: DVector<f64>,
    pub mu_star: DVector<f64>,
    pub a: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub y_star: DVector<f64>,
    pub mu_star: DVector<f64>,
    pub a_hat: DVector<f64>,
    pub v_hat: DVector<f64>,
    pub varsigma_hat: DVector<f64>,
    pub zeta_hat: DVector<f64>,
    /// `(y*_t − μ̂*_t) / √v̂_t`
    pub r_beta: DVector<f64>,
    /// `â_t / √ς̂_t`
    pub r_gamma: DVector<f64>,
    /// `((y*_t − μ̂*_t) + â_t) / √ζ̂_t`
    pub r_combined_std: DVector<f64>,
}

fn check_lengths(y: &[f64], mu: &[f64], phi: &[f64]) -> Result<()> {
    if y.len() != mu.len() || y.len() != phi.len() {
        return Err(Error::Inconsistent(format!(
            "length mismatch: y {}, mu {}, phi {}",
            y.len(),
            mu.len(),
            phi.len()
        )));
    }
    for (&y, (&m, &p)) in y.iter().zip(mu.iter().zip(phi.iter())) {
        if !(y > 0.0 && y < 1.0) {
            return Err(Error::domain("response", y));
        }
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::domain("mean", m));
        }
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::domain("precision", p));
        }
    }
    Ok(())
}

/// `y*_t = log(y_t/(1−y_t))`, `μ*_t = ψ(μ_tφ_t) − ψ((1−μ_t)φ_t)` and
/// `a_t = μ_t(y*_t − μ*_t) + log(1−y_t) − ψ((1−μ_t)φ_t) + ψ(φ_t)`.
pub fn working_quantities(y: &[f64], mu: &[f64], phi: &[f64]) -> Result<WorkingQuantities> {
    check_lengths(y, mu, phi)?;
    let n = y.len();
    let mut y_star = DVector::zeros(n);
    let mut mu_star = DVector::zeros(n);
    let mut a = DVector::zeros(n);
    for t in 0..n {
        let (log_y, log_1m_y) = (y[t].ln(), (-y[t]).ln_1p());
        y_star[t] = log_y - log_1m_y;
        mu_star[t] = moments::mu_star(mu[t], phi[t]);
        a[t] = working_a(log_y, log_1m_y, mu[t], phi[t]);
    }
    Ok(WorkingQuantities { y_star, mu_star, a })
}

/// `ζ` at one `(μ, φ)`, rejecting non-positive values.
fn checked_zeta(index: usize, mu: f64, phi: f64) -> Result<f64> {
    let z = moments::zeta(mu, phi);
    if z > 0.0 && z.is_finite() {
        Ok(z)
    } else {
        Err(Error::Degenerate {
            index,
            reason: "combined residual variance is not positive",
        })
    }
}

pub fn residuals_beta_gamma(fit: &FittedModel, spec: &ModelSpec) -> Result<ResidualSet> {
    let n = spec.n();
    if fit.mu.len() != n {
        return Err(Error::Inconsistent("fit and specification have different sizes".into()));
    }
    let work = working_quantities(spec.y().as_slice(), fit.mu.as_slice(), fit.phi.as_slice())?;
    let mut v_hat = DVector::zeros(n);
    let mut varsigma_hat = DVector::zeros(n);
    let mut zeta_hat = DVector::zeros(n);
    let mut r_beta = DVector::zeros(n);
    let mut r_gamma = DVector::zeros(n);
    let mut r_combined_std = DVector::zeros(n);
    for t in 0..n {
        let (m, p) = (fit.mu[t], fit.phi[t]);
        v_hat[t] = moments::v(m, p);
        varsigma_hat[t] = moments::varsigma(m, p);
        zeta_hat[t] = checked_zeta(t, m, p)?;
        let diff = work.y_star[t] - work.mu_star[t];
        r_beta[t] = diff / v_hat[t].sqrt();
        r_gamma[t] = work.a[t] / varsigma_hat[t].sqrt();
        r_combined_std[t] = (diff + work.a[t]) / zeta_hat[t].sqrt();
    }
    Ok(ResidualSet {
        y_star: work.y_star,
        mu_star: work.mu_star,
        a_hat: work.a,
        v_hat,
        varsigma_hat,
        zeta_hat,
        r_beta,
        r_gamma,
        r_combined_std,
    })
}

/// The standardized combined residual `r^βγ_{p,t}`.
pub fn combined_residual(fit: &FittedModel, spec: &ModelSpec) -> Result<DVector<f64>> {
    let work = working_quantities(spec.y().as_slice(), fit.mu.as_slice(), fit.phi.as_slice())?;
    let mut out = DVector::zeros(spec.n());
    for t in 0..spec.n() {
        let zeta = checked_zeta(t, fit.mu[t], fit.phi[t])?;
        out[t] = (work.y_star[t] - work.mu_star[t] + work.a[t]) / zeta.sqrt();
    }
    Ok(out)
}
