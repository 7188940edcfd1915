use betapress::measures::{
    hat_diagonal, loo_press_raw, prediction_report, press, press_beta_gamma, r2_lr, transformed_regression,
};
use betapress::residuals::residuals_beta_gamma;
use betapress::simulation::{Dispersion, Layout, MuRange, PreparedScenario, ScenarioConfig};
use betapress::{fit, FitOptions, FittedModel, LinkFunction, ModelSpec};
use nalgebra::{DMatrix, DVector};

fn harness_fits() -> Vec<(ModelSpec, FittedModel)> {
    let cells = [
        (Layout::Table1, 4, MuRange::Mid, Dispersion::Fixed { phi: 50.0 }),
        (Layout::Table1, 2, MuRange::High, Dispersion::Fixed { phi: 150.0 }),
        (Layout::Table2, 6, MuRange::Low, Dispersion::Varying { lambda: 50.0 }),
        (Layout::Table2, 8, MuRange::Mid, Dispersion::Varying { lambda: 100.0 }),
        (Layout::Table3, 7, MuRange::High, Dispersion::Varying { lambda: 20.0 }),
    ];
    let mut out = Vec::new();
    for (layout, scenario, mu, dispersion) in cells {
        let config = ScenarioConfig::new(layout, scenario, 40, mu, dispersion).unwrap();
        let prepared = PreparedScenario::new(&config).unwrap();
        for r in 0..3 {
            let y = prepared.draw_response(r).unwrap();
            let spec = ModelSpec::new(
                y,
                prepared.x_estimated.clone(),
                prepared.z_estimated.clone(),
                LinkFunction::Logit,
                LinkFunction::Log,
            )
            .unwrap();
            let fitted = fit(&spec, &FitOptions::default()).unwrap();
            if fitted.converged {
                out.push((spec, fitted));
            }
        }
    }
    assert!(out.len() >= 12);
    out
}

/// `X̌ = (Φ̂Ŵ)^{1/2} X` assembled densely.
fn x_check(spec: &ModelSpec, fitted: &FittedModel) -> (DMatrix<f64>, DVector<f64>) {
    let tr = transformed_regression(fitted, spec).unwrap();
    let mut xc = spec.x().clone();
    for t in 0..spec.n() {
        for j in 0..spec.k() {
            xc[(t, j)] *= tr.row_scale[t];
        }
    }
    (xc, tr.row_scale)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn hat_diagonal_matches_dense_projection() {
    for (spec, fitted) in harness_fits() {
        let (xc, _) = x_check(&spec, &fitted);
        let gram_inv = (xc.transpose() * &xc).try_inverse().unwrap();
        let dense = &xc * gram_inv * xc.transpose();
        let h = hat_diagonal(&fitted, &spec).unwrap();
        for t in 0..spec.n() {
            assert!((h[t] - dense[(t, t)]).abs() < 1e-10, "{} vs {}", h[t], dense[(t, t)]);
            assert!((0.0..=1.0).contains(&h[t]));
        }
        assert!((h.sum() - spec.k() as f64).abs() < 1e-8);
    }
}

#[test]
fn press_matches_explicit_case_deletion() {
    for (spec, fitted) in harness_fits() {
        let (xc, scale) = x_check(&spec, &fitted);
        let tr = transformed_regression(&fitted, &spec).unwrap();
        let k_inv = (xc.transpose() * &xc).try_inverse().unwrap();
        let h = hat_diagonal(&fitted, &spec).unwrap();
        let r = residuals_beta_gamma(&fitted, &spec).unwrap().r_beta;
        let (value, components) = press(&fitted, &spec).unwrap();
        let mut oracle = 0.0;
        for t in 0..spec.n() {
            let x_t = spec.x().row(t).transpose();
            // One-step deletion formula.
            let beta_t = &fitted.beta - &k_inv * &x_t * (scale[t] * r[t] / (1.0 - h[t]));
            // Exact refit of the transformed least squares problem without row t.
            let xd = xc.clone().remove_row(t);
            let yd = tr.y_check.clone().remove_row(t);
            let refit = (xd.transpose() * &xd).try_inverse().unwrap() * xd.transpose() * yd;
            // β̂ solves the transformed problem only to the fitting tolerance.
            assert!((&beta_t - &refit).amax() < 1e-7 * (1.0 + refit.amax()));
            let error = tr.y_check[t] - scale[t] * x_t.dot(&beta_t);
            assert!(rel(error * error, components[t]) < 1e-10 || components[t] < 1e-20);
            oracle += error * error;
        }
        assert!(rel(value, oracle) < 1e-10, "{value} vs {oracle}");
        assert!(rel(components.sum(), value) < 1e-14);
    }
}

#[test]
fn press_beta_gamma_matches_dense_assembly() {
    for (spec, fitted) in harness_fits() {
        let (xc, _) = x_check(&spec, &fitted);
        let dense = &xc * (xc.transpose() * &xc).try_inverse().unwrap() * xc.transpose();
        let res = residuals_beta_gamma(&fitted, &spec).unwrap();
        let oracle: f64 = (0..spec.n())
            .map(|t| (res.r_combined_std[t] / (1.0 - dense[(t, t)])).powi(2))
            .sum();
        let (value, components) = press_beta_gamma(&fitted, &spec).unwrap();
        assert!(rel(value, oracle) < 1e-10);
        assert!(components.iter().all(|&c| c >= 0.0));
    }
}

#[test]
fn three_observation_worked_example() {
    // Intercept-only mean and constant precision: every leverage is 1/3, so
    // each PRESS component is (3/2)² r²_t.
    let y = DVector::from_vec(vec![0.2, 0.5, 0.6]);
    let spec = ModelSpec::fixed_dispersion(y, DMatrix::from_element(3, 1, 1.0), LinkFunction::Logit).unwrap();
    let fitted = fit(&spec, &FitOptions::default()).unwrap();
    assert!(fitted.converged);
    let h = hat_diagonal(&fitted, &spec).unwrap();
    assert!(h.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-12));
    let r = residuals_beta_gamma(&fitted, &spec).unwrap().r_beta;
    let hand: f64 = r.iter().map(|v| 2.25 * v * v).sum();
    assert!(rel(press(&fitted, &spec).unwrap().0, hand) < 1e-12);
}

#[test]
fn leave_one_out_press_is_invariant_to_row_order() {
    let config = ScenarioConfig::new(Layout::Table1, 2, 40, MuRange::Mid, Dispersion::Fixed { phi: 50.0 }).unwrap();
    let prepared = PreparedScenario::new(&config).unwrap();
    let y = prepared.draw_response(0).unwrap().rows(0, 20).into_owned();
    let x = prepared.x_estimated.rows(0, 20).into_owned();
    let spec = ModelSpec::fixed_dispersion(y, x, LinkFunction::Logit).unwrap();
    let order: Vec<usize> = (0..20).map(|i| (7 * i + 3) % 20).collect();
    let shuffled = spec.permuted(&order).unwrap();
    let opts = FitOptions::default();
    let a = loo_press_raw(&spec, &opts).unwrap();
    let b = loo_press_raw(&shuffled, &opts).unwrap();
    assert!(a.failed.is_empty() && b.failed.is_empty());
    assert!(rel(a.value, b.value) < 1e-8);
    for (i, &src) in order.iter().enumerate() {
        let (ea, eb) = (a.squared_errors[src].unwrap(), b.squared_errors[i].unwrap());
        assert!((ea - eb).abs() < 1e-8 * (1.0 + ea));
    }
    assert!(a.value >= 0.0);
}

#[test]
fn r2_lr_is_invariant_to_row_order_and_grows_with_signal() {
    let (spec, fitted) = harness_fits().remove(0);
    let null = fit(&spec.null_model().unwrap(), &FitOptions::default()).unwrap();
    let base = r2_lr(&fitted, &null, spec.n()).unwrap();
    let order: Vec<usize> = (0..spec.n()).rev().collect();
    let shuffled = spec.permuted(&order).unwrap();
    let f2 = fit(&shuffled, &FitOptions::default()).unwrap();
    let n2 = fit(&shuffled.null_model().unwrap(), &FitOptions::default()).unwrap();
    assert!((r2_lr(&f2, &n2, spec.n()).unwrap() - base).abs() < 1e-12);

    let mut previous = -1.0;
    for phi in [20.0, 100.0, 500.0] {
        let config = ScenarioConfig::new(Layout::Table1, 4, 40, MuRange::Mid, Dispersion::Fixed { phi }).unwrap();
        let prepared = PreparedScenario::new(&config).unwrap();
        let mut total = 0.0;
        for r in 0..20 {
            let spec = ModelSpec::fixed_dispersion(
                prepared.draw_response(r).unwrap(),
                prepared.x_estimated.clone(),
                LinkFunction::Logit,
            )
            .unwrap();
            let f = fit(&spec, &FitOptions::default()).unwrap();
            let nf = fit(&spec.null_model().unwrap(), &FitOptions::default()).unwrap();
            let value = r2_lr(&f, &nf, spec.n()).unwrap();
            assert!(value > 0.0 && value < 1.0);
            total += value;
        }
        assert!(total / 20.0 > previous);
        previous = total / 20.0;
    }
}

#[test]
fn report_invariants_hold_on_harness_fits() {
    for (spec, fitted) in harness_fits() {
        let null = fit(&spec.null_model().unwrap(), &FitOptions::default()).unwrap();
        let report = prediction_report(&fitted, &null, &spec).unwrap();
        assert!(rel(report.press_components.sum(), report.press) < 1e-14);
        assert!((report.p2 - (1.0 - report.press / report.sst_deleted)).abs() < 1e-15);
        assert!(report.p2 <= 1.0 && report.p2_bg <= 1.0 && report.r2_lr <= 1.0);
        assert!(report.lambda >= 1.0);
        let scaled: Vec<f64> = fitted.phi.iter().map(|p| 3.7 * p).collect();
        assert!(rel(betapress::measures::lambda_ratio(&scaled).unwrap(), report.lambda) < 1e-12);
    }
}
