use std::fmt::Write as _;

use super::{CovariateLaw, Dispersion, Layout, MuRange, ScenarioResult};
use crate::error::{Error, Result};

fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => "NA".to_string(),
    }
}

fn setting(layout: Layout, value: f64) -> Dispersion {
    match layout {
        Layout::Table1 => Dispersion::Fixed { phi: value },
        _ => Dispersion::Varying { lambda: value },
    }
}

/// Renders results in the published table shape: one row group per
/// `(mean range, covariate law, n)` with rows `P2`, `P2_bg`, `R2_LR` and
/// `failed`, one value column per `(scenario, φ or λ)` and a matching
/// standard-error column. Cells absent from `results` are written `NA`.
pub fn emit_table(results: &[ScenarioResult], layout: Layout) -> Result<String> {
    if let Some(other) = results.iter().find(|r| r.config.layout != layout) {
        return Err(Error::Inconsistent(format!(
            "{} result passed to a {layout} table",
            other.config.layout
        )));
    }
    let mut groups: Vec<(MuRange, CovariateLaw, usize)> = results
        .iter()
        .map(|r| (r.config.mu_range, r.config.covariate_law, r.config.n))
        .collect();
    groups.sort();
    groups.dedup();
    let mut values: Vec<f64> = results.iter().map(|r| r.config.dispersion.value()).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let columns: Vec<(u8, f64)> = layout
        .scenarios()
        .flat_map(|s| values.iter().map(move |&v| (s, v)))
        .collect();
    let labels: Vec<String> = columns
        .iter()
        .map(|&(s, v)| format!("s{s}_{}", setting(layout, v).label()))
        .collect();

    let mut out = String::from("mu_range,covariates,n,statistic");
    for label in &labels {
        write!(out, ",{label}").unwrap();
    }
    for label in &labels {
        write!(out, ",{label}_se").unwrap();
    }
    out.push('\n');

    type Pick = fn(&ScenarioResult) -> (f64, f64);
    let statistics: [(&str, Pick); 4] = [
        ("P2", |r| (r.mean_p2, r.mc_standard_errors.0)),
        ("P2_bg", |r| (r.mean_p2_bg, r.mc_standard_errors.1)),
        ("R2_LR", |r| (r.mean_r2lr, r.mc_standard_errors.2)),
        ("failed", |r| (r.failed_replications as f64, f64::NAN)),
    ];
    for &(mu_range, law, n) in &groups {
        let lookup = |&(s, v): &(u8, f64)| {
            results.iter().find(|r| {
                let c = &r.config;
                c.mu_range == mu_range
                    && c.covariate_law == law
                    && c.n == n
                    && c.scenario == s
                    && c.dispersion.value() == v
            })
        };
        for (name, pick) in statistics {
            write!(out, "{mu_range},{law},{n},{name}").unwrap();
            for col in &columns {
                write!(out, ",{}", cell(lookup(col).map(|r| pick(r).0))).unwrap();
            }
            for col in &columns {
                write!(out, ",{}", cell(lookup(col).map(|r| pick(r).1))).unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}
