//! Monte Carlo designs for the prediction coefficients: covariate
//! generation, calibration of the true coefficients to a target mean range
//! and dispersion intensity, replicated fitting and aggregation.
//!
//! Seeds are split into independent streams. Covariates come from stream 0
//! of a key that depends only on the base seed and the covariate law, so
//! every cell of a grid shares the same covariates. Responses for
//! replication `r` come from stream `r + 1` of a key mixing the base seed,
//! mean range, law and dispersion setting, so cells that differ only in
//! the estimated model see identical data.

mod config;
mod table;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StudentT};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::evaluate;
use crate::model::{LinkFunction, ModelSpec};
use crate::scoring::FitOptions;
use crate::special::{random_stream, sample_beta, RandomStream};

pub use config::{parse_grid, GridConfig};
pub use table::emit_table;

/// Rows generated before tiling when `replicate_covariate_block` is set.
pub const COVARIATE_BLOCK: usize = 40;
/// Slopes available in each submodel.
pub const MAX_COVARIATES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MuRange {
    Mid,
    High,
    Low,
}

impl MuRange {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            MuRange::Low => (0.005, 0.12),
            MuRange::Mid => (0.20, 0.88),
            MuRange::High => (0.90, 0.99),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MuRange::Low => "low",
            MuRange::Mid => "mid",
            MuRange::High => "high",
        }
    }
}

impl fmt::Display for MuRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MuRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "low" => Ok(MuRange::Low),
            "mid" => Ok(MuRange::Mid),
            "high" => Ok(MuRange::High),
            other => Err(Error::Config(format!(
                "unknown mu_range '{other}' (expected low, mid or high)"
            ))),
        }
    }
}

/// Law of the mean-submodel covariates. Precision covariates are always
/// drawn from `U(−0.5, 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CovariateLaw {
    /// All mean covariates `U(0, 1)`.
    Uniform01,
    /// All mean covariates `U(−0.5, 0.5)`.
    UniformHalf,
    /// `x₂ ~ t(3)`, the rest `U(0, 1)`; produces high-leverage points.
    StudentT3,
}

impl CovariateLaw {
    pub fn name(self) -> &'static str {
        match self {
            CovariateLaw::Uniform01 => "uniform01",
            CovariateLaw::UniformHalf => "uniform_half",
            CovariateLaw::StudentT3 => "student_t3",
        }
    }

    fn code(self) -> u64 {
        match self {
            CovariateLaw::Uniform01 => 1,
            CovariateLaw::UniformHalf => 2,
            CovariateLaw::StudentT3 => 3,
        }
    }
}

impl fmt::Display for CovariateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovariateLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform01" => Ok(CovariateLaw::Uniform01),
            "uniform_half" => Ok(CovariateLaw::UniformHalf),
            "student_t3" => Ok(CovariateLaw::StudentT3),
            other => Err(Error::Config(format!(
                "unknown covariate_law '{other}' (expected uniform01, uniform_half or student_t3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dispersion {
    Fixed { phi: f64 },
    Varying { lambda: f64 },
}

impl Dispersion {
    /// The φ or λ value labelling this setting.
    pub fn value(self) -> f64 {
        match self {
            Dispersion::Fixed { phi } => phi,
            Dispersion::Varying { lambda } => lambda,
        }
    }

    pub fn label(self) -> String {
        match self {
            Dispersion::Fixed { phi } => format!("phi{phi}"),
            Dispersion::Varying { lambda } => format!("lambda{lambda}"),
        }
    }
}

/// The three published designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layout {
    /// Fixed dispersion, four true slopes, scenarios 1–4 omit 3, 2, 1, 0.
    Table1,
    /// Varying dispersion, scenarios 5–8 with 1–4 slopes in both submodels,
    /// correctly specified.
    Table2,
    /// Same truth as `Table2`, estimated with fixed dispersion.
    Table3,
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::Table1 => "table1",
            Layout::Table2 => "table2",
            Layout::Table3 => "table3",
        }
    }

    pub fn scenarios(self) -> std::ops::RangeInclusive<u8> {
        match self {
            Layout::Table1 => 1..=4,
            Layout::Table2 | Layout::Table3 => 5..=8,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "table1" => Ok(Layout::Table1),
            "table2" => Ok(Layout::Table2),
            "table3" => Ok(Layout::Table3),
            other => Err(Error::Config(format!(
                "unknown layout '{other}' (expected table1, table2 or table3)"
            ))),
        }
    }
}

/// One Monte Carlo design cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub layout: Layout,
    pub scenario: u8,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub mu_range: MuRange,
    pub dispersion: Dispersion,
    pub true_mean_covariates: usize,
    pub true_precision_covariates: usize,
    pub estimated_mean_covariates: usize,
    pub estimated_precision_covariates: usize,
    pub covariate_law: CovariateLaw,
    pub replicate_covariate_block: bool,
    /// Smallest true precision under varying dispersion.
    pub phi_floor: f64,
}

pub const DEFAULT_PHI_FLOOR: f64 = 20.0;

impl ScenarioConfig {
    /// The cell `scenario` of `layout`. The dispersion must be fixed for
    /// `Table1` and varying otherwise.
    pub fn new(layout: Layout, scenario: u8, n: usize, mu_range: MuRange, dispersion: Dispersion) -> Result<Self> {
        if !layout.scenarios().contains(&scenario) {
            return Err(Error::Config(format!("{layout} has no scenario {scenario}")));
        }
        let (true_mean, true_precision, est_mean, est_precision) = match layout {
            Layout::Table1 => (MAX_COVARIATES, 0, scenario as usize, 0),
            Layout::Table2 => {
                let s = (scenario - 4) as usize;
                (s, s, s, s)
            }
            Layout::Table3 => {
                let s = (scenario - 4) as usize;
                (s, s, s, 0)
            }
        };
        let config = Self {
            layout,
            scenario,
            n,
            replications: 1000,
            seed: 20_240_101,
            mu_range,
            dispersion,
            true_mean_covariates: true_mean,
            true_precision_covariates: true_precision,
            estimated_mean_covariates: est_mean,
            estimated_precision_covariates: est_precision,
            covariate_law: CovariateLaw::Uniform01,
            replicate_covariate_block: true,
            phi_floor: DEFAULT_PHI_FLOOR,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_law(mut self, law: CovariateLaw) -> Self {
        self.covariate_law = law;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if self.true_mean_covariates == 0 || self.true_mean_covariates > MAX_COVARIATES {
            return fail(format!("true mean covariates must be in 1..={MAX_COVARIATES}"));
        }
        if self.true_precision_covariates > MAX_COVARIATES {
            return fail(format!("true precision covariates must be at most {MAX_COVARIATES}"));
        }
        if self.estimated_mean_covariates > MAX_COVARIATES || self.estimated_precision_covariates > MAX_COVARIATES {
            return fail(format!("estimated covariates must be at most {MAX_COVARIATES}"));
        }
        let p = 2 + self.estimated_mean_covariates + self.estimated_precision_covariates;
        if self.n <= p {
            return fail(format!(
                "n = {} leaves no residual degrees of freedom for {p} parameters",
                self.n
            ));
        }
        if self.replicate_covariate_block && !self.n.is_multiple_of(COVARIATE_BLOCK) && self.n > COVARIATE_BLOCK {
            return fail(format!(
                "n = {} is not a multiple of the {COVARIATE_BLOCK}-row covariate block",
                self.n
            ));
        }
        match self.dispersion {
            Dispersion::Fixed { phi } => {
                if !(phi.is_finite() && phi > 0.0) {
                    return fail(format!("phi must be positive, got {phi}"));
                }
                if self.true_precision_covariates != 0 {
                    return fail("fixed dispersion cannot have precision covariates".into());
                }
            }
            Dispersion::Varying { lambda } => {
                if !(lambda.is_finite() && lambda > 1.0) {
                    return fail(format!("lambda must exceed 1, got {lambda}"));
                }
                if self.true_precision_covariates == 0 {
                    return fail("varying dispersion needs at least one precision covariate".into());
                }
                if !(self.phi_floor.is_finite() && self.phi_floor > 0.0) {
                    return fail(format!("phi_floor must be positive, got {}", self.phi_floor));
                }
            }
        }
        Ok(())
    }

    fn covariate_key(&self) -> u64 {
        mix(mix(self.seed, 0xC0FA), self.covariate_law.code())
    }

    fn response_key(&self) -> u64 {
        let dispersion = match self.dispersion {
            Dispersion::Fixed { phi } => mix(1, phi.to_bits()),
            Dispersion::Varying { lambda } => mix(2, lambda.to_bits()),
        };
        let range = self.mu_range as u64;
        mix(
            mix(mix(self.covariate_key(), range), dispersion),
            self.true_mean_covariates as u64,
        )
    }
}

/// SplitMix64 finalizer applied to `a ⊕ rotated b`.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(32) ^ 0x9E37_79B9_7F4A_7C15;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean and precision covariate matrices with an intercept column followed
/// by `MAX_COVARIATES` draws, `n × 5` each.
pub fn generate_covariates(config: &ScenarioConfig, rng: &mut RandomStream) -> (DMatrix<f64>, DMatrix<f64>) {
    let rows = if config.replicate_covariate_block {
        COVARIATE_BLOCK.min(config.n)
    } else {
        config.n
    };
    let t3 = StudentT::new(3.0).expect("valid degrees of freedom");
    let mut x_block = DMatrix::from_element(rows, MAX_COVARIATES + 1, 1.0);
    for j in 1..=MAX_COVARIATES {
        for t in 0..rows {
            x_block[(t, j)] = match config.covariate_law {
                CovariateLaw::StudentT3 if j == 1 => t3.sample(rng),
                CovariateLaw::UniformHalf => rng.random::<f64>() - 0.5,
                _ => rng.random::<f64>(),
            };
        }
    }
    let mut z_block = DMatrix::from_element(rows, MAX_COVARIATES + 1, 1.0);
    for j in 1..=MAX_COVARIATES {
        for t in 0..rows {
            z_block[(t, j)] = rng.random::<f64>() - 0.5;
        }
    }
    let tile = |block: &DMatrix<f64>| DMatrix::from_fn(config.n, block.ncols(), |i, j| block[(i % rows, j)]);
    (tile(&x_block), tile(&z_block))
}

/// Equal slopes on the first `count` covariates mapping the smallest and
/// largest row sums exactly onto `g(lo)` and `g(hi)`.
fn equal_slopes(design: &DMatrix<f64>, count: usize, lo: f64, hi: f64, what: &str) -> Result<DVector<f64>> {
    let sums: Vec<f64> = (0..design.nrows())
        .map(|t| (1..=count).map(|j| design[(t, j)]).sum())
        .collect();
    let min = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max - min > 1e-12) {
        return Err(Error::Config(format!(
            "cannot calibrate {what}: covariates do not vary"
        )));
    }
    let slope = (hi - lo) / (max - min);
    let mut coef = DVector::zeros(MAX_COVARIATES + 1);
    coef[0] = lo - slope * min;
    for j in 1..=count {
        coef[j] = slope;
    }
    Ok(coef)
}

/// True `(β, γ)` over the full `n × 5` designs. The mean range is met
/// exactly by the extreme `μ_t`; under varying dispersion the smallest
/// `φ_t` equals `phi_floor` and the largest `λ · phi_floor`.
pub fn calibrate_coefficients(
    config: &ScenarioConfig,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    config.validate()?;
    let (lo, hi) = config.mu_range.bounds();
    let logit = LinkFunction::Logit;
    let beta = equal_slopes(
        x,
        config.true_mean_covariates,
        logit.apply(lo)?,
        logit.apply(hi)?,
        "mean coefficients",
    )?;
    let gamma = match config.dispersion {
        Dispersion::Fixed { phi } => {
            let mut g = DVector::zeros(MAX_COVARIATES + 1);
            g[0] = phi.ln();
            g
        }
        Dispersion::Varying { lambda } => {
            let floor = config.phi_floor.ln();
            equal_slopes(
                z,
                config.true_precision_covariates,
                floor,
                floor + lambda.ln(),
                "precision coefficients",
            )?
        }
    };
    Ok((beta, gamma))
}

/// Covariates, true parameters and the designs of the estimated model for
/// one cell.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub config: ScenarioConfig,
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub beta_true: DVector<f64>,
    pub gamma_true: DVector<f64>,
    pub mu: DVector<f64>,
    pub phi: DVector<f64>,
    pub x_estimated: DMatrix<f64>,
    pub z_estimated: DMatrix<f64>,
}

impl PreparedScenario {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = random_stream(config.covariate_key(), 0);
        let (x, z) = generate_covariates(config, &mut rng);
        let (beta_true, gamma_true) = calibrate_coefficients(config, &x, &z)?;
        let mu = (&x * &beta_true).map(|e| LinkFunction::Logit.inverse(e));
        let phi = (&z * &gamma_true).map(f64::exp);
        let x_estimated = x.columns(0, 1 + config.estimated_mean_covariates).into_owned();
        let z_estimated = z.columns(0, 1 + config.estimated_precision_covariates).into_owned();
        Ok(Self {
            config: config.clone(),
            x,
            z,
            beta_true,
            gamma_true,
            mu,
            phi,
            x_estimated,
            z_estimated,
        })
    }

    /// Responses of replication `replication` drawn at the true model.
    pub fn draw_response(&self, replication: usize) -> Result<DVector<f64>> {
        let mut rng = random_stream(self.config.response_key(), replication as u64 + 1);
        let mut y = DVector::zeros(self.config.n);
        for t in 0..self.config.n {
            y[t] = sample_beta(self.mu[t], self.phi[t], &mut rng)?;
        }
        Ok(y)
    }

    /// Fits the estimated model to replication `replication` and returns
    /// its statistics, or the reason the replication failed.
    pub fn replicate(&self, replication: usize, options: &FitOptions) -> std::result::Result<ReplicationStats, String> {
        let y = self.draw_response(replication).map_err(|e| e.to_string())?;
        let spec = ModelSpec::new(
            y,
            self.x_estimated.clone(),
            self.z_estimated.clone(),
            LinkFunction::Logit,
            LinkFunction::Log,
        )
        .map_err(|e| e.to_string())?;
        let eval = evaluate(&spec, options).map_err(|e| e.to_string())?;
        let r = eval.report;
        if [r.p2, r.p2_bg, r.r2_lr].iter().all(|v| v.is_finite()) {
            Ok(ReplicationStats {
                p2: r.p2,
                p2_bg: r.p2_bg,
                r2_lr: r.r2_lr,
            })
        } else {
            Err("non-finite statistic".into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationStats {
    pub p2: f64,
    pub p2_bg: f64,
    pub r2_lr: f64,
}

/// Aggregated statistics of one cell. Means and Monte Carlo standard errors
/// use completed replications only; all are NaN when none completed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub mean_p2: f64,
    pub mean_p2_bg: f64,
    pub mean_r2lr: f64,
    /// Standard errors of the three means, in the same order.
    pub mc_standard_errors: (f64, f64, f64),
    /// Mean and standard error of the paired difference `P²_βγ − P²`.
    pub mean_bg_minus_p2: f64,
    pub se_bg_minus_p2: f64,
    pub completed_replications: usize,
    pub failed_replications: usize,
}

/// Mean and standard error of the mean, summed in the given order.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// Aggregates per-replication outcomes listed in replication order.
pub fn aggregate(
    config: &ScenarioConfig,
    outcomes: &[std::result::Result<ReplicationStats, String>],
) -> ScenarioResult {
    let ok: Vec<ReplicationStats> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
    let pick = |f: fn(&ReplicationStats) -> f64| mean_and_se(&ok.iter().map(f).collect::<Vec<_>>());
    let (mean_p2, se_p2) = pick(|s| s.p2);
    let (mean_p2_bg, se_p2_bg) = pick(|s| s.p2_bg);
    let (mean_r2lr, se_r2lr) = pick(|s| s.r2_lr);
    let (mean_diff, se_diff) = pick(|s| s.p2_bg - s.p2);
    ScenarioResult {
        config: config.clone(),
        mean_p2,
        mean_p2_bg,
        mean_r2lr,
        mc_standard_errors: (se_p2, se_p2_bg, se_r2lr),
        mean_bg_minus_p2: mean_diff,
        se_bg_minus_p2: se_diff,
        completed_replications: ok.len(),
        failed_replications: outcomes.len() - ok.len(),
    }
}

/// Per-replication outcomes in replication order. Replications run on the
/// current rayon pool; the result does not depend on its size.
pub fn replicate_all(
    prepared: &PreparedScenario,
    options: &FitOptions,
) -> Vec<std::result::Result<ReplicationStats, String>> {
    (0..prepared.config.replications)
        .into_par_iter()
        .map(|r| prepared.replicate(r, options))
        .collect()
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    let prepared = PreparedScenario::new(config)?;
    let outcomes = replicate_all(&prepared, &FitOptions::default());
    Ok(aggregate(config, &outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid_table1(n: usize) -> ScenarioConfig {
        ScenarioConfig::new(Layout::Table1, 4, n, MuRange::Mid, Dispersion::Fixed { phi: 50.0 }).unwrap()
    }

    #[test]
    fn uniform_covariates_in_unit_interval() {
        let config = mid_table1(40);
        let (x, z) = generate_covariates(&config, &mut random_stream(1, 0));
        assert!(x.columns(1, 4).iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(z.columns(1, 4).iter().all(|&v| v > -0.5 && v < 0.5));
        assert!(x.column(0).iter().chain(z.column(0).iter()).all(|&v| v == 1.0));
    }

    #[test]
    fn tiled_block_repeats_first_forty_rows() {
        let config = mid_table1(80);
        let (x, z) = generate_covariates(&config, &mut random_stream(9, 0));
        for t in 0..40 {
            assert_eq!(x.row(t), x.row(t + 40));
            assert_eq!(z.row(t), z.row(t + 40));
        }
        let mut fresh = mid_table1(80);
        fresh.replicate_covariate_block = false;
        let (x, _) = generate_covariates(&fresh, &mut random_stream(9, 0));
        assert_ne!(x.row(0), x.row(40));
    }

    #[test]
    fn same_seed_same_covariates() {
        let a = PreparedScenario::new(&mid_table1(40)).unwrap();
        let b = PreparedScenario::new(&mid_table1(40)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.z, b.z);
        assert_eq!(a.draw_response(3).unwrap(), b.draw_response(3).unwrap());
        assert_ne!(a.draw_response(3).unwrap(), a.draw_response(4).unwrap());
    }

    #[test]
    fn mid_range_calibration_hits_endpoints() {
        let p = PreparedScenario::new(&mid_table1(40)).unwrap();
        let min = p.mu.min();
        let max = p.mu.max();
        assert!((min - 0.20).abs() < 1e-12 && (max - 0.88).abs() < 1e-12, "{min} {max}");
        assert!(p.phi.iter().all(|&v| (v - 50.0).abs() < 1e-9));
        assert_eq!(p.gamma_true.rows(1, 4).amax(), 0.0);
    }

    #[test]
    fn lambda_calibration_is_exact() {
        for lambda in [20.0, 50.0, 100.0] {
            for s in 5..=8 {
                let c =
                    ScenarioConfig::new(Layout::Table2, s, 40, MuRange::Low, Dispersion::Varying { lambda }).unwrap();
                let p = PreparedScenario::new(&c).unwrap();
                let ratio = p.phi.max() / p.phi.min();
                assert!((ratio - lambda).abs() < 1e-9 * lambda);
                assert!((p.phi.min() - DEFAULT_PHI_FLOOR).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scenario_designs() {
        let t1 = ScenarioConfig::new(Layout::Table1, 2, 40, MuRange::Mid, Dispersion::Fixed { phi: 50.0 }).unwrap();
        let p = PreparedScenario::new(&t1).unwrap();
        assert_eq!((p.x_estimated.ncols(), p.z_estimated.ncols()), (3, 1));
        let t3 = ScenarioConfig::new(
            Layout::Table3,
            7,
            40,
            MuRange::Mid,
            Dispersion::Varying { lambda: 20.0 },
        )
        .unwrap();
        let p = PreparedScenario::new(&t3).unwrap();
        assert_eq!((p.x_estimated.ncols(), p.z_estimated.ncols()), (4, 1));
        assert_eq!(p.gamma_true.iter().filter(|&&g| g != 0.0).count(), 4);
        assert!(ScenarioConfig::new(Layout::Table1, 5, 40, MuRange::Mid, Dispersion::Fixed { phi: 50.0 }).is_err());
        assert!(ScenarioConfig::new(Layout::Table2, 5, 40, MuRange::Mid, Dispersion::Fixed { phi: 50.0 }).is_err());
        assert!(ScenarioConfig::new(Layout::Table1, 1, 50, MuRange::Mid, Dispersion::Fixed { phi: 50.0 }).is_err());
    }

    #[test]
    fn single_replication_is_deterministic() {
        let c = mid_table1(40).with_replications(1);
        let a = run_scenario(&c).unwrap();
        let b = run_scenario(&c).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!(a.completed_replications + a.failed_replications, 1);
    }

    #[test]
    fn pool_size_does_not_change_results() {
        let c = mid_table1(40).with_replications(24);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_scenario(&c).unwrap());
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_scenario(&c).unwrap());
        assert_eq!(serial, parallel);
    }

    #[test]
    fn aggregation_counts_failures() {
        let c = mid_table1(40);
        let outcomes = vec![
            Ok(ReplicationStats {
                p2: 0.5,
                p2_bg: 0.7,
                r2_lr: 0.6,
            }),
            Err("no convergence".to_string()),
            Ok(ReplicationStats {
                p2: 0.7,
                p2_bg: 0.7,
                r2_lr: 0.8,
            }),
        ];
        let r = aggregate(&c, &outcomes);
        assert_eq!((r.completed_replications, r.failed_replications), (2, 1));
        assert!((r.mean_p2 - 0.6).abs() < 1e-15);
        assert!((r.mc_standard_errors.0 - 0.1).abs() < 1e-15);
        assert!((r.mean_bg_minus_p2 - 0.1).abs() < 1e-15);
        let none = aggregate(&c, &[Err("x".into())]);
        assert!(none.mean_p2.is_nan());
    }
}
