//! CSV ingestion and model formulas.

use std::fmt;
use std::path::Path;

use betapress::model::shrink_boundary;
use betapress::{LinkFunction, ModelSpec};
use nalgebra::{DMatrix, DVector};

use crate::CliError;

/// A numeric table read from a CSV file with a header row.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
        let names: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::User(format!("cannot read header of {}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
            for (col, field) in record.iter().enumerate() {
                let value = field.parse::<f64>().map_err(|_| {
                    CliError::User(format!(
                        "row {}, column '{}': '{field}' is not a number",
                        row + 1,
                        names[col]
                    ))
                })?;
                columns[col].push(value);
            }
        }
        if columns.first().is_none_or(|c| c.is_empty()) {
            return Err(CliError::User(format!("{} has no data rows", path.display())));
        }
        Ok(Self { names, columns })
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn column(&self, name: &str) -> Result<&[f64], CliError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| {
                CliError::User(format!(
                    "unknown column '{name}' (available: {})",
                    self.names.join(", ")
                ))
            })
    }

    fn design(&self, terms: &[String]) -> Result<DMatrix<f64>, CliError> {
        let n = self.rows();
        let mut m = DMatrix::from_element(n, terms.len() + 1, 1.0);
        for (j, term) in terms.iter().enumerate() {
            let col = self.column(term)?;
            for t in 0..n {
                m[(t, j + 1)] = col[t];
            }
        }
        Ok(m)
    }
}

/// `response ~ mean terms | precision terms` with links. An intercept is
/// always included; empty term lists give intercept-only submodels.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub response: String,
    pub mean_terms: Vec<String>,
    pub precision_terms: Vec<String>,
    pub mean_link: LinkFunction,
    pub precision_link: LinkFunction,
}

/// Splits a comma- or plus-separated term list. `1` and blanks are ignored.
pub fn terms(list: &str) -> Vec<String> {
    list.split([',', '+'])
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != "1")
        .map(str::to_string)
        .collect()
}

impl Formula {
    /// Parses a candidate written `mean terms [| precision terms] [@ mean link]`.
    pub fn candidate(response: &str, text: &str, precision_link: LinkFunction) -> Result<Self, CliError> {
        let (body, link) = match text.split_once('@') {
            Some((body, link)) => (
                body,
                link.parse()
                    .map_err(|e: betapress::Error| CliError::User(e.to_string()))?,
            ),
            None => (text, LinkFunction::Logit),
        };
        let (mean, precision) = body.split_once('|').unwrap_or((body, ""));
        Ok(Self {
            response: response.to_string(),
            mean_terms: terms(mean),
            precision_terms: terms(precision),
            mean_link: link,
            precision_link,
        })
    }

    pub fn spec(&self, data: &Dataset, shrink: bool) -> Result<ModelSpec, CliError> {
        let mut y = DVector::from_column_slice(data.column(&self.response)?);
        if shrink {
            shrink_boundary(&mut y);
        }
        let x = data.design(&self.mean_terms)?;
        let z = data.design(&self.precision_terms)?;
        ModelSpec::new(y, x, z, self.mean_link, self.precision_link).map_err(CliError::from)
    }

    pub fn mean_names(&self) -> Vec<String> {
        std::iter::once("(intercept)".to_string())
            .chain(self.mean_terms.iter().cloned())
            .collect()
    }

    pub fn precision_names(&self) -> Vec<String> {
        std::iter::once("(intercept)".to_string())
            .chain(self.precision_terms.iter().cloned())
            .collect()
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |t: &[String]| if t.is_empty() { "1".to_string() } else { t.join(" + ") };
        write!(
            f,
            "{} ~ {} | {}  [mean link {}, precision link {}]",
            self.response,
            side(&self.mean_terms),
            side(&self.precision_terms),
            self.mean_link,
            self.precision_link
        )
    }
}
