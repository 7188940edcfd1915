//! Maximum likelihood for beta regression with varying dispersion by block
//! Fisher scoring: each iteration takes a scoring step for `β` holding `γ`,
//! then one for `γ` at the updated `β`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, spd_factor, spd_solve, weighted_cross, weighted_gram};
use crate::model::{FittedModel, ModelSpec};
use crate::moments;
use crate::special::{digamma_unchecked as psi, ln_gamma_unchecked as ln_gamma};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub u_beta: DVector<f64>,
    pub u_gamma: DVector<f64>,
}

impl ScoreVector {
    pub fn max_abs(&self) -> f64 {
        self.u_beta.amax().max(self.u_gamma.amax())
    }
}

/// Blocks of the expected (Fisher) information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationBlocks {
    pub k_bb: DMatrix<f64>,
    pub k_bg: DMatrix<f64>,
    pub k_gg: DMatrix<f64>,
}

impl InformationBlocks {
    /// The full `(k+q) × (k+q)` information matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let (k, q) = (self.k_bb.nrows(), self.k_gg.nrows());
        let mut out = DMatrix::zeros(k + q, k + q);
        out.view_mut((0, 0), (k, k)).copy_from(&self.k_bb);
        out.view_mut((0, k), (k, q)).copy_from(&self.k_bg);
        out.view_mut((k, 0), (q, k)).copy_from(&self.k_bg.transpose());
        out.view_mut((k, k), (q, q)).copy_from(&self.k_gg);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub step_halving_max: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-8,
            step_halving_max: 20,
        }
    }
}

impl FitOptions {
    fn check(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config(format!(
                "fit options need tolerance > 0 and max_iterations ≥ 1 (got {}, {})",
                self.tolerance, self.max_iterations
            )));
        }
        Ok(())
    }
}

/// Linear predictors and the means/precisions they induce.
#[derive(Debug, Clone)]
pub(crate) struct Predictors {
    pub eta: DVector<f64>,
    pub vartheta: DVector<f64>,
    pub mu: DVector<f64>,
    pub phi: DVector<f64>,
}

impl Predictors {
    pub fn new(spec: &ModelSpec, beta: &DVector<f64>, gamma: &DVector<f64>) -> Result<Self> {
        if beta.len() != spec.k() || gamma.len() != spec.q() {
            return Err(Error::Estimation(format!(
                "parameter lengths ({}, {}) do not match designs ({}, {})",
                beta.len(),
                gamma.len(),
                spec.k(),
                spec.q()
            )));
        }
        let eta = spec.x() * beta;
        let vartheta = spec.z() * gamma;
        if let Some(bad) = eta.iter().chain(vartheta.iter()).find(|v| !v.is_finite()) {
            return Err(Error::domain("linear predictor", *bad));
        }
        let mean_link = spec.mean_link();
        let precision_link = spec.precision_link();
        let mu = eta.map(|e| mean_link.inverse(e));
        let phi = vartheta.map(|e| precision_link.inverse(e));
        if let Some(bad) = phi.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::domain("precision", *bad));
        }
        Ok(Self { eta, vartheta, mu, phi })
    }
}

fn loglik_at(spec: &ModelSpec, mu: &DVector<f64>, phi: &DVector<f64>) -> Result<f64> {
    let log_y = spec.log_y();
    let log_1m_y = spec.log_1m_y();
    let mut total = 0.0;
    for t in 0..spec.n() {
        let (m, p) = (mu[t], phi[t]);
        let a = m * p;
        let b = (1.0 - m) * p;
        total += ln_gamma(p) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * log_y[t] + (b - 1.0) * log_1m_y[t];
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::domain("log-likelihood", total))
    }
}

/// `ℓ(β, γ) = Σ ℓ_t(μ_t, φ_t)`.
pub fn log_likelihood(spec: &ModelSpec, beta: &DVector<f64>, gamma: &DVector<f64>) -> Result<f64> {
    let pred = Predictors::new(spec, beta, gamma)?;
    loglik_at(spec, &pred.mu, &pred.phi)
}

/// Working quantities of the `β` block: score `XᵀΦT(y*−μ*)` and
/// information `XᵀΦWX`.
fn beta_block(spec: &ModelSpec, pred: &Predictors) -> (DVector<f64>, DMatrix<f64>) {
    let n = spec.n();
    let link = spec.mean_link();
    let mut score_weight = DVector::zeros(n);
    let mut info_weight = DVector::zeros(n);
    for t in 0..n {
        let (m, p) = (pred.mu[t], pred.phi[t]);
        let y_star = spec.log_y()[t] - spec.log_1m_y()[t];
        let dg = link.derivative_unchecked(m);
        score_weight[t] = p * (y_star - moments::mu_star(m, p)) / dg;
        // φ_t w_t = φ_t² v_t / g′(μ_t)²
        info_weight[t] = p * p * moments::v(m, p) / (dg * dg);
    }
    (
        spec.x().transpose() * score_weight,
        weighted_gram(spec.x(), &info_weight),
    )
}

/// Score `ZᵀHa` and information `ZᵀDZ` of the `γ` block.
fn gamma_block(spec: &ModelSpec, pred: &Predictors) -> (DVector<f64>, DMatrix<f64>) {
    let n = spec.n();
    let link = spec.precision_link();
    let mut score_weight = DVector::zeros(n);
    let mut info_weight = DVector::zeros(n);
    for t in 0..n {
        let (m, p) = (pred.mu[t], pred.phi[t]);
        let dh = link.derivative_unchecked(p);
        score_weight[t] = working_a(spec.log_y()[t], spec.log_1m_y()[t], m, p) / dh;
        info_weight[t] = moments::varsigma(m, p) / (dh * dh);
    }
    (
        spec.z().transpose() * score_weight,
        weighted_gram(spec.z(), &info_weight),
    )
}

/// `a_t = μ(y* − μ*) + log(1−y) − ψ((1−μ)φ) + ψ(φ)`.
pub(crate) fn working_a(log_y: f64, log_1m_y: f64, mu: f64, phi: f64) -> f64 {
    let y_star = log_y - log_1m_y;
    mu * (y_star - moments::mu_star(mu, phi)) + log_1m_y - psi((1.0 - mu) * phi) + psi(phi)
}

pub fn score(spec: &ModelSpec, beta: &DVector<f64>, gamma: &DVector<f64>) -> Result<ScoreVector> {
    let pred = Predictors::new(spec, beta, gamma)?;
    let (u_beta, _) = beta_block(spec, &pred);
    let (u_gamma, _) = gamma_block(spec, &pred);
    Ok(ScoreVector { u_beta, u_gamma })
}

pub fn information(spec: &ModelSpec, beta: &DVector<f64>, gamma: &DVector<f64>) -> Result<InformationBlocks> {
    let pred = Predictors::new(spec, beta, gamma)?;
    let (_, k_bb) = beta_block(spec, &pred);
    let (_, k_gg) = gamma_block(spec, &pred);
    let mean_link = spec.mean_link();
    let precision_link = spec.precision_link();
    let cross = DVector::from_fn(spec.n(), |t, _| {
        let (m, p) = (pred.mu[t], pred.phi[t]);
        moments::cross_weight(m, p) / (mean_link.derivative_unchecked(m) * precision_link.derivative_unchecked(p))
    });
    let k_bg = weighted_cross(spec.x(), &cross, spec.z());
    Ok(InformationBlocks { k_bb, k_bg, k_gg })
}

/// Starting values: least squares of `g(y)` on `X` for `β`, and a
/// moment-based constant precision for `γ`.
pub fn initialize(spec: &ModelSpec) -> Result<(DVector<f64>, DVector<f64>)> {
    const EPS: f64 = 1e-6;
    let n = spec.n();
    let k = spec.k();
    let link = spec.mean_link();
    let transformed = spec.y().map(|y| link.apply_unchecked(y.clamp(EPS, 1.0 - EPS)));
    let beta0 =
        least_squares(spec.x(), &transformed).map_err(|_| Error::Estimation("mean design is rank deficient".into()))?;
    let fitted = spec.x() * &beta0;
    let residual = &transformed - &fitted;
    let sigma2 = residual.norm_squared() / (n - k).max(1) as f64;
    let mut phi_sum = 0.0;
    for t in 0..n {
        let m = link.inverse(fitted[t]);
        let dg = link.derivative_unchecked(m);
        let var_t = sigma2 * dg * dg;
        phi_sum += m * (1.0 - m) / var_t - 1.0;
    }
    let mut phi0 = phi_sum / n as f64;
    if !(phi0.is_finite() && phi0 > 0.0) {
        phi0 = 1.0;
    }
    let mut gamma0 = DVector::zeros(spec.q());
    gamma0[0] = spec.precision_link().apply_unchecked(phi0.clamp(1e-2, 1e8));
    Ok((beta0, gamma0))
}

struct Iterate {
    beta: DVector<f64>,
    gamma: DVector<f64>,
    pred: Predictors,
    loglik: f64,
}

impl Iterate {
    fn new(spec: &ModelSpec, beta: DVector<f64>, gamma: DVector<f64>) -> Result<Self> {
        let pred = Predictors::new(spec, &beta, &gamma)?;
        let loglik = loglik_at(spec, &pred.mu, &pred.phi)?;
        Ok(Self {
            beta,
            gamma,
            pred,
            loglik,
        })
    }
}

#[derive(Clone, Copy)]
enum Block {
    Mean,
    Precision,
}

/// Takes the scoring step for one block, halving it while the likelihood
/// falls or the parameters leave the domain. Returns `None` when every
/// trial step was rejected.
fn block_step(spec: &ModelSpec, current: &Iterate, block: Block, options: &FitOptions) -> Result<Option<Iterate>> {
    let step = match block {
        Block::Mean => {
            let (u, k) = beta_block(spec, &current.pred);
            spd_solve(&k, &u, "mean information block")?
        }
        Block::Precision => {
            let (u, k) = gamma_block(spec, &current.pred);
            spd_solve(&k, &u, "precision information block")?
        }
    };
    let floor = current.loglik - 1e-10 * (1.0 + current.loglik.abs());
    let mut scale = 1.0;
    for _ in 0..=options.step_halving_max {
        let (beta, gamma) = match block {
            Block::Mean => (&current.beta + &step * scale, current.gamma.clone()),
            Block::Precision => (current.beta.clone(), &current.gamma + &step * scale),
        };
        if let Ok(trial) = Iterate::new(spec, beta, gamma) {
            if trial.loglik >= floor {
                return Ok(Some(trial));
            }
        }
        scale *= 0.5;
    }
    Ok(None)
}

fn relative_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    (new - old).amax() / (1.0 + old.amax())
}

/// Fits the model by block Fisher scoring from [`initialize`] starting
/// values.
pub fn fit(spec: &ModelSpec, options: &FitOptions) -> Result<FittedModel> {
    let (beta0, gamma0) = initialize(spec)?;
    fit_from(spec, beta0, gamma0, options)
}

/// Fits the model by block Fisher scoring from the given starting values.
pub fn fit_from(
    spec: &ModelSpec,
    beta0: DVector<f64>,
    gamma0: DVector<f64>,
    options: &FitOptions,
) -> Result<FittedModel> {
    options.check()?;
    let mut current = Iterate::new(spec, beta0, gamma0)?;
    let mut trace = vec![current.loglik];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let after_mean = block_step(spec, &current, Block::Mean, options)?;
        let mean_moved = after_mean.is_some();
        let after_mean = after_mean.unwrap_or(current_clone(&current));
        let after_both = block_step(spec, &after_mean, Block::Precision, options)?;
        let precision_moved = after_both.is_some();
        let next = after_both.unwrap_or(after_mean);
        let change = relative_change(&next.beta, &current.beta).max(relative_change(&next.gamma, &current.gamma));
        current = next;
        trace.push(current.loglik);
        if change < options.tolerance {
            converged = mean_moved || precision_moved || change == 0.0;
            break;
        }
        if !mean_moved && !precision_moved {
            break;
        }
    }
    let Iterate {
        beta,
        gamma,
        pred,
        loglik,
    } = current;
    Ok(FittedModel {
        beta,
        gamma,
        mu: pred.mu,
        phi: pred.phi,
        eta: pred.eta,
        vartheta: pred.vartheta,
        loglik,
        iterations,
        converged,
        trace,
    })
}

fn current_clone(it: &Iterate) -> Iterate {
    Iterate {
        beta: it.beta.clone(),
        gamma: it.gamma.clone(),
        pred: it.pred.clone(),
        loglik: it.loglik,
    }
}

/// Asymptotic standard errors of `(β̂, γ̂)` from the inverse of the full
/// information matrix.
pub fn standard_errors(spec: &ModelSpec, fit: &FittedModel) -> Result<(DVector<f64>, DVector<f64>)> {
    let info = information(spec, &fit.beta, &fit.gamma)?;
    let full = info.full();
    let chol = spd_factor(&full, "information matrix")?;
    let cov = chol.inverse();
    let k = spec.k();
    let se = DVector::from_fn(full.nrows(), |i, _| cov[(i, i)].sqrt());
    Ok((se.rows(0, k).into_owned(), se.rows(k, spec.q()).into_owned()))
}
