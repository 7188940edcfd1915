//! Beta regression problem data: response, mean and precision designs, links.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest distance kept between an inverse-link value and a boundary.
const BOUNDARY_GUARD: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkFunction {
    /// `g(μ) = log(μ / (1 − μ))`
    Logit,
    /// `g(μ) = −log(−log μ)`
    LogLog,
    /// `h(φ) = log φ`
    Log,
}

impl LinkFunction {
    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Logit => "logit",
            LinkFunction::LogLog => "loglog",
            LinkFunction::Log => "log",
        }
    }

    pub fn is_mean_link(self) -> bool {
        matches!(self, LinkFunction::Logit | LinkFunction::LogLog)
    }

    pub fn is_precision_link(self) -> bool {
        matches!(self, LinkFunction::Log)
    }

    fn in_domain(self, value: f64) -> bool {
        match self {
            LinkFunction::Logit | LinkFunction::LogLog => value > 0.0 && value < 1.0,
            LinkFunction::Log => value > 0.0 && value.is_finite(),
        }
    }

    fn check(self, value: f64) -> Result<f64> {
        if self.in_domain(value) {
            Ok(value)
        } else {
            Err(Error::domain("link argument", value))
        }
    }

    /// `g(value)`.
    pub fn apply(self, value: f64) -> Result<f64> {
        self.check(value).map(|v| self.apply_unchecked(v))
    }

    pub(crate) fn apply_unchecked(self, value: f64) -> f64 {
        match self {
            LinkFunction::Logit => (value / (1.0 - value)).ln(),
            LinkFunction::LogLog => -(-value.ln()).ln(),
            LinkFunction::Log => value.ln(),
        }
    }

    /// `g⁻¹(eta)`, clamped to the open domain of the link.
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            LinkFunction::Logit => {
                let mu = if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                };
                mu.clamp(BOUNDARY_GUARD, 1.0 - BOUNDARY_GUARD)
            }
            LinkFunction::LogLog => (-(-eta).exp()).exp().clamp(BOUNDARY_GUARD, 1.0 - BOUNDARY_GUARD),
            LinkFunction::Log => eta.exp().clamp(f64::MIN_POSITIVE, f64::MAX),
        }
    }

    /// `g′(value)`; strictly positive on the interior.
    pub fn derivative(self, value: f64) -> Result<f64> {
        self.check(value).map(|v| self.derivative_unchecked(v))
    }

    pub(crate) fn derivative_unchecked(self, value: f64) -> f64 {
        match self {
            LinkFunction::Logit => 1.0 / (value * (1.0 - value)),
            LinkFunction::LogLog => -1.0 / (value * value.ln()),
            LinkFunction::Log => 1.0 / value,
        }
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LinkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" => Ok(LinkFunction::Logit),
            "loglog" | "log-log" => Ok(LinkFunction::LogLog),
            "log" => Ok(LinkFunction::Log),
            other => Err(Error::Config(format!("unknown link function `{other}`"))),
        }
    }
}

/// Which design matrix a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    Mean,
    Precision,
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Design::Mean => "mean design",
            Design::Precision => "precision design",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ResponseOnBoundary {
        index: usize,
        value: f64,
    },
    ResponseOutside {
        index: usize,
        value: f64,
    },
    NonFinite {
        design: Option<Design>,
        row: usize,
        col: usize,
    },
    RowMismatch {
        design: Design,
        rows: usize,
        expected: usize,
    },
    MissingIntercept(Design),
    RankDeficient(Design),
    TooManyParameters {
        k: usize,
        q: usize,
        n: usize,
    },
    InadmissibleLink {
        design: Design,
        link: LinkFunction,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ResponseOnBoundary { index, value } => {
                write!(f, "response on boundary at row {} (y = {value})", index + 1)
            }
            Violation::ResponseOutside { index, value } => {
                write!(f, "response outside (0, 1) at row {} (y = {value})", index + 1)
            }
            Violation::NonFinite { design: None, row, .. } => {
                write!(f, "non-finite response at row {}", row + 1)
            }
            Violation::NonFinite {
                design: Some(d),
                row,
                col,
            } => {
                write!(f, "non-finite entry in {d} at row {}, column {}", row + 1, col + 1)
            }
            Violation::RowMismatch { design, rows, expected } => {
                write!(f, "{design} has {rows} rows, expected {expected}")
            }
            Violation::MissingIntercept(d) => write!(f, "first column of {d} is not all ones"),
            Violation::RankDeficient(d) => write!(f, "rank deficiency in {d}"),
            Violation::TooManyParameters { k, q, n } => {
                write!(f, "k + q = {} must be smaller than n = {n}", k + q)
            }
            Violation::InadmissibleLink { design, link } => {
                write!(f, "link `{link}` is not admissible for the {design}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn full_column_rank(m: &DMatrix<f64>) -> bool {
    if m.ncols() == 0 || m.nrows() < m.ncols() {
        return false;
    }
    // Scale columns so the rank decision does not depend on units.
    let mut scaled = m.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    let tol = max * f64::EPSILON * m.nrows().max(m.ncols()) as f64 * 16.0;
    max > 0.0 && sv.iter().all(|&s| s > tol)
}

/// Checks every invariant of a beta regression problem and reports all
/// violations found.
pub fn validate_parts(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    mean_link: LinkFunction,
    precision_link: LinkFunction,
) -> ValidationReport {
    let mut violations = Vec::new();
    let n = y.len();
    for (index, &value) in y.iter().enumerate() {
        if !value.is_finite() {
            violations.push(Violation::NonFinite {
                design: None,
                row: index,
                col: 0,
            });
        } else if value == 0.0 || value == 1.0 {
            violations.push(Violation::ResponseOnBoundary { index, value });
        } else if !(value > 0.0 && value < 1.0) {
            violations.push(Violation::ResponseOutside { index, value });
        }
    }
    if !mean_link.is_mean_link() {
        violations.push(Violation::InadmissibleLink {
            design: Design::Mean,
            link: mean_link,
        });
    }
    if !precision_link.is_precision_link() {
        violations.push(Violation::InadmissibleLink {
            design: Design::Precision,
            link: precision_link,
        });
    }
    for (design, m) in [(Design::Mean, x), (Design::Precision, z)] {
        if m.nrows() != n {
            violations.push(Violation::RowMismatch {
                design,
                rows: m.nrows(),
                expected: n,
            });
            continue;
        }
        let mut finite = true;
        for col in 0..m.ncols() {
            for row in 0..n {
                if !m[(row, col)].is_finite() {
                    violations.push(Violation::NonFinite {
                        design: Some(design),
                        row,
                        col,
                    });
                    finite = false;
                }
            }
        }
        if m.ncols() == 0 || m.column(0).iter().any(|&v| v != 1.0) {
            violations.push(Violation::MissingIntercept(design));
        }
        if finite && !full_column_rank(m) {
            violations.push(Violation::RankDeficient(design));
        }
    }
    let (k, q) = (x.ncols(), z.ncols());
    if k + q >= n {
        violations.push(Violation::TooManyParameters { k, q, n });
    }
    ValidationReport { violations }
}

/// Maps responses into the open unit interval with `(y(n−1) + 1/2) / n`.
pub fn shrink_boundary(y: &mut DVector<f64>) {
    let n = y.len() as f64;
    y.apply(|v| *v = (*v * (n - 1.0) + 0.5) / n);
}

/// A validated beta regression problem. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    y: DVector<f64>,
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    mean_link: LinkFunction,
    precision_link: LinkFunction,
    log_y: DVector<f64>,
    log_1m_y: DVector<f64>,
}

impl ModelSpec {
    pub fn new(
        y: DVector<f64>,
        x: DMatrix<f64>,
        z: DMatrix<f64>,
        mean_link: LinkFunction,
        precision_link: LinkFunction,
    ) -> Result<Self> {
        let report = validate_parts(&y, &x, &z, mean_link, precision_link);
        if !report.passed() {
            return Err(Error::InvalidSpec(report));
        }
        let log_y = y.map(f64::ln);
        let log_1m_y = y.map(|v| (-v).ln_1p());
        Ok(Self {
            y,
            x,
            z,
            mean_link,
            precision_link,
            log_y,
            log_1m_y,
        })
    }

    /// Constant-precision model: `Z` is a column of ones with a log link.
    pub fn fixed_dispersion(y: DVector<f64>, x: DMatrix<f64>, mean_link: LinkFunction) -> Result<Self> {
        let z = DMatrix::from_element(y.len(), 1, 1.0);
        Self::new(y, x, z, mean_link, LinkFunction::Log)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_parts(&self.y, &self.x, &self.z, self.mean_link, self.precision_link)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn mean_link(&self) -> LinkFunction {
        self.mean_link
    }

    pub fn precision_link(&self) -> LinkFunction {
        self.precision_link
    }

    pub(crate) fn log_y(&self) -> &DVector<f64> {
        &self.log_y
    }

    pub(crate) fn log_1m_y(&self) -> &DVector<f64> {
        &self.log_1m_y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    /// Same response and links with intercept-only mean and precision designs.
    pub fn null_model(&self) -> Result<Self> {
        let n = self.n();
        let ones = DMatrix::from_element(n, 1, 1.0);
        Self::new(self.y.clone(), ones.clone(), ones, self.mean_link, self.precision_link)
    }

    /// The problem with observation `index` removed.
    pub fn without_observation(&self, index: usize) -> Result<Self> {
        let y = self.y.clone().remove_row(index);
        let x = self.x.clone().remove_row(index);
        let z = self.z.clone().remove_row(index);
        Self::new(y, x, z, self.mean_link, self.precision_link)
    }

    /// The problem with observations reordered so that row `i` is old row
    /// `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.n();
        let y = DVector::from_fn(n, |i, _| self.y[order[i]]);
        let x = DMatrix::from_fn(n, self.k(), |i, j| self.x[(order[i], j)]);
        let z = DMatrix::from_fn(n, self.q(), |i, j| self.z[(order[i], j)]);
        Self::new(y, x, z, self.mean_link, self.precision_link)
    }
}

/// Converged (or best available) maximum likelihood estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    pub mu: DVector<f64>,
    pub phi: DVector<f64>,
    pub eta: DVector<f64>,
    pub vartheta: DVector<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each accepted iteration, starting value first.
    pub trace: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite_difference(link: LinkFunction, v: f64) -> f64 {
        let h = 1e-6 * v.max(1e-3);
        (link.apply(v + h).unwrap() - link.apply(v - h).unwrap()) / (2.0 * h)
    }

    #[test]
    fn link_values() {
        assert_eq!(LinkFunction::Logit.apply(0.5).unwrap(), 0.0);
        assert!(LinkFunction::LogLog.apply((-1.0f64).exp()).unwrap().abs() < 1e-15);
        assert_eq!(LinkFunction::Log.apply(1.0).unwrap(), 0.0);
        assert_eq!(LinkFunction::Logit.inverse(0.0), 0.5);
        assert!((LinkFunction::LogLog.inverse(0.0) - (-1.0f64).exp()).abs() < 1e-16);
        assert!((LinkFunction::Logit.inverse(2.1972246) - 0.9).abs() < 1e-8);
        assert_eq!(LinkFunction::Logit.derivative(0.5).unwrap(), 4.0);
        assert_eq!(LinkFunction::Log.derivative(2.0).unwrap(), 0.5);
    }

    #[test]
    fn logit_inverse_matches_bisection_oracle() {
        // Solve logit(mu) = ln(9) by bisection, independent of `inverse`.
        let target = 9f64.ln();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (mid / (1.0 - mid)).ln() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((LinkFunction::Logit.inverse(target) - lo).abs() < 1e-14);
        assert!((lo - 0.9).abs() < 1e-14);
    }

    #[test]
    fn loglog_derivative_matches_finite_difference() {
        let fd = finite_difference(LinkFunction::LogLog, 0.5);
        let exact = LinkFunction::LogLog.derivative(0.5).unwrap();
        assert!(((fd - exact) / exact).abs() < 1e-6);
    }

    #[test]
    fn link_boundaries_are_domain_errors() {
        for link in [LinkFunction::Logit, LinkFunction::LogLog] {
            assert!(link.apply(0.0).is_err());
            assert!(link.apply(1.0).is_err());
            assert!(link.derivative(1.0).is_err());
        }
        assert!(LinkFunction::Log.apply(0.0).is_err());
        assert!(LinkFunction::Log.apply(-2.0).is_err());
    }

    #[test]
    fn inverse_is_clamped_to_open_domain() {
        for link in [LinkFunction::Logit, LinkFunction::LogLog] {
            let lo = link.inverse(-1e4);
            let hi = link.inverse(1e4);
            assert!(lo > 0.0 && hi < 1.0);
        }
        assert!(LinkFunction::Log.inverse(-1e4) > 0.0);
    }

    fn ones_and(column: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(column.len(), 2, |i, j| if j == 0 { 1.0 } else { column[i] })
    }

    #[test]
    fn boundary_response_is_reported() {
        let y = DVector::from_vec(vec![0.2, 0.5, 1.0, 0.3, 0.6]);
        let x = ones_and(&[0.1, 0.4, 0.3, 0.9, 0.5]);
        let z = DMatrix::from_element(5, 1, 1.0);
        let report = validate_parts(&y, &x, &z, LinkFunction::Logit, LinkFunction::Log);
        assert_eq!(
            report.violations,
            vec![Violation::ResponseOnBoundary { index: 2, value: 1.0 }]
        );
        assert!(report.to_string().contains("response on boundary"));
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let y = DVector::from_vec(vec![0.2, 0.5, 0.4, 0.3, 0.6, 0.7]);
        let col = [0.1, 0.4, 0.3, 0.9, 0.5, 0.2];
        let x = DMatrix::from_fn(6, 3, |i, j| if j == 0 { 1.0 } else { col[i] });
        let z = DMatrix::from_element(6, 1, 1.0);
        let report = validate_parts(&y, &x, &z, LinkFunction::Logit, LinkFunction::Log);
        assert!(report.violations.contains(&Violation::RankDeficient(Design::Mean)));
        assert!(report.to_string().contains("rank deficiency"));
    }

    #[test]
    fn every_violation_is_collected() {
        let y = DVector::from_vec(vec![0.0, 1.5, f64::NAN]);
        let x = DMatrix::from_fn(3, 2, |i, j| if j == 0 { 2.0 } else { i as f64 });
        let z = DMatrix::from_element(3, 1, 1.0);
        let report = validate_parts(&y, &x, &z, LinkFunction::Log, LinkFunction::Logit);
        let text = report.to_string();
        for needle in [
            "boundary",
            "outside",
            "non-finite",
            "not all ones",
            "k + q",
            "not admissible",
        ] {
            assert!(text.contains(needle), "{needle} missing from `{text}`");
        }
    }

    #[test]
    fn shrink_moves_boundary_inside() {
        let mut y = DVector::from_vec(vec![0.0, 1.0, 0.5, 0.25]);
        shrink_boundary(&mut y);
        assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(y[0], 0.5 / 4.0);
        assert_eq!(y[2], 0.5);
    }

    #[test]
    fn null_and_deleted_models() {
        let y = DVector::from_vec(vec![0.2, 0.5, 0.4, 0.3, 0.6, 0.7]);
        let x = ones_and(&[0.1, 0.4, 0.3, 0.9, 0.5, 0.2]);
        let spec = ModelSpec::fixed_dispersion(y, x, LinkFunction::Logit).unwrap();
        let null = spec.null_model().unwrap();
        assert_eq!((null.k(), null.q()), (1, 1));
        let dropped = spec.without_observation(2).unwrap();
        assert_eq!(dropped.n(), 5);
        assert_eq!(dropped.y()[2], 0.3);
        assert_eq!(dropped.x()[(2, 1)], 0.9);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mean_links_round_trip(u in 1e-6f64..(1.0 - 1e-6)) {
                for link in [LinkFunction::Logit, LinkFunction::LogLog] {
                    let back = link.inverse(link.apply(u).unwrap());
                    prop_assert!(((back - u) / u).abs() < 1e-10);
                }
            }

            #[test]
            fn log_link_round_trips(p in 1e-3f64..1e4) {
                let link = LinkFunction::Log;
                let back = link.inverse(link.apply(p).unwrap());
                prop_assert!(((back - p) / p).abs() < 1e-12);
            }

            #[test]
            fn links_increase_with_positive_derivative(a in 1e-4f64..0.999, gap in 1e-4f64..1e-3) {
                let b = (a + gap).min(0.9999);
                for link in [LinkFunction::Logit, LinkFunction::LogLog] {
                    prop_assert!(link.apply(b).unwrap() > link.apply(a).unwrap());
                    let exact = link.derivative(a).unwrap();
                    prop_assert!(exact > 0.0);
                    let fd = finite_difference(link, a);
                    prop_assert!(((fd - exact) / exact).abs() < 1e-6);
                }
            }
        }
    }
}
