//! Moments of the beta law's sufficient statistics `T₁ = log(y/(1−y))` and
//! `T₂ = log(1−y)` at fixed `(μ, φ)`, and the variance functions built from
//! them. All take `0 < μ < 1`, `φ > 0` without checking.

use crate::special::{digamma_unchecked as psi, trigamma_unchecked as psi1};

/// `μ* = E(T₁) = ψ(μφ) − ψ((1−μ)φ)`.
pub fn mu_star(mu: f64, phi: f64) -> f64 {
    psi(mu * phi) - psi((1.0 - mu) * phi)
}

/// `E(T₂) = ψ((1−μ)φ) − ψ(φ)`.
pub fn mean_log_complement(mu: f64, phi: f64) -> f64 {
    psi((1.0 - mu) * phi) - psi(phi)
}

/// `v = Var(T₁) = ψ′(μφ) + ψ′((1−μ)φ)`.
pub fn v(mu: f64, phi: f64) -> f64 {
    psi1(mu * phi) + psi1((1.0 - mu) * phi)
}

/// `Var(T₂) = ψ′((1−μ)φ) − ψ′(φ)`.
pub fn var_log_complement(mu: f64, phi: f64) -> f64 {
    psi1((1.0 - mu) * phi) - psi1(phi)
}

/// `Cov(T₁, T₂) = −ψ′((1−μ)φ)`.
pub fn cov_sufficient(mu: f64, phi: f64) -> f64 {
    -psi1((1.0 - mu) * phi)
}

/// `ς = Var(a) = μ²ψ′(μφ) + (1−μ)²ψ′((1−μ)φ) − ψ′(φ)`.
pub fn varsigma(mu: f64, phi: f64) -> f64 {
    let nu = 1.0 - mu;
    mu * mu * psi1(mu * phi) + nu * nu * psi1(nu * phi) - psi1(phi)
}

/// `ζ = (1+μ)²ψ′(μφ) + μ²ψ′((1−μ)φ) − ψ′(φ)`, the variance of the combined
/// residual numerator `(y* − μ*) + a`.
pub fn zeta(mu: f64, phi: f64) -> f64 {
    let up = 1.0 + mu;
    up * up * psi1(mu * phi) + mu * mu * psi1((1.0 - mu) * phi) - psi1(phi)
}

/// `c = φ{μψ′(μφ) − (1−μ)ψ′((1−μ)φ)}`, the mean/precision cross-information
/// weight.
pub fn cross_weight(mu: f64, phi: f64) -> f64 {
    let nu = 1.0 - mu;
    phi * (mu * psi1(mu * phi) - nu * psi1(nu * phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_functions_assemble_from_sufficient_moments() {
        for &mu in &[0.005, 0.05, 0.3, 0.5, 0.77, 0.95, 0.995] {
            for &phi in &[1.0, 2.0, 20.0, 50.0, 400.0, 1000.0] {
                let (var1, var2, cov) = (v(mu, phi), var_log_complement(mu, phi), cov_sufficient(mu, phi));
                let up = 1.0 + mu;
                let assembled_zeta = up * up * var1 + var2 + 2.0 * up * cov;
                let assembled_varsigma = mu * mu * var1 + var2 + 2.0 * mu * cov;
                let z = zeta(mu, phi);
                let s = varsigma(mu, phi);
                assert!(((z - assembled_zeta) / z).abs() < 1e-12, "zeta at ({mu}, {phi})");
                assert!(((s - assembled_varsigma) / s).abs() < 1e-9, "varsigma at ({mu}, {phi})");
                let c = cross_weight(mu, phi);
                let assembled_c = phi * (mu * var1 + cov);
                assert!((c - assembled_c).abs() <= 1e-12 * (c.abs() + phi * var1));
            }
        }
    }

    #[test]
    fn zeta_at_uniform_law() {
        // (1.5)² ψ′(1) + (0.5)² ψ′(1) − ψ′(2) with ψ′(1) = π²/6, ψ′(2) = π²/6 − 1.
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        let expected = 2.25 * pi2_6 + 0.25 * pi2_6 - (pi2_6 - 1.0);
        assert!((zeta(0.5, 2.0) - expected).abs() < 1e-13);
        assert!((expected - 3.467401).abs() < 1e-6);
    }

    #[test]
    fn variances_positive_on_grid() {
        for i in 0..=99 {
            let mu = 0.005 + 0.99 * i as f64 / 99.0;
            for j in 0..=30 {
                let phi = 10f64.powf(3.0 * j as f64 / 30.0);
                assert!(zeta(mu, phi) > 0.0, "zeta({mu}, {phi})");
                assert!(varsigma(mu, phi) > 0.0, "varsigma({mu}, {phi})");
                assert!(v(mu, phi) > 0.0);
            }
        }
    }

    #[test]
    fn symmetric_mean_has_zero_mu_star() {
        for phi in [0.5, 3.0, 77.0] {
            assert_eq!(mu_star(0.5, phi), 0.0);
        }
    }
}
