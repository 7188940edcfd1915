//! Flat `key = value` grid files. Lists are comma separated and `#` starts
//! a comment.
//!
//! ```text
//! layout = table1
//! n = 40, 80
//! mu_range = mid
//! phi = 50, 150, 400
//! scenarios = 1, 2, 3, 4
//! replications = 2000
//! seed = 7
//! ```

use std::collections::BTreeSet;
use std::str::FromStr;

use super::{CovariateLaw, Dispersion, Layout, MuRange, ScenarioConfig, DEFAULT_PHI_FLOOR};
use crate::error::{Error, Result};

const KEYS: [&str; 11] = [
    "layout",
    "n",
    "mu_range",
    "phi",
    "lambda",
    "scenarios",
    "covariate_law",
    "replications",
    "seed",
    "replicate_covariate_block",
    "phi_floor",
];

/// A grid of scenario cells sharing a layout, law and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub layout: Layout,
    pub n: Vec<usize>,
    pub mu_range: Vec<MuRange>,
    pub phi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub scenarios: Vec<u8>,
    pub covariate_law: CovariateLaw,
    pub replications: usize,
    pub seed: u64,
    pub replicate_covariate_block: bool,
    pub phi_floor: f64,
}

impl GridConfig {
    pub fn new(layout: Layout) -> Self {
        Self {
            layout,
            n: vec![40],
            mu_range: vec![MuRange::Mid],
            phi: vec![50.0, 150.0, 400.0],
            lambda: vec![20.0, 50.0, 100.0],
            scenarios: layout.scenarios().collect(),
            covariate_law: CovariateLaw::Uniform01,
            replications: 1000,
            seed: 20_240_101,
            replicate_covariate_block: true,
            phi_floor: DEFAULT_PHI_FLOOR,
        }
    }

    /// Every cell, ordered by mean range, sample size, scenario and
    /// dispersion setting.
    pub fn expand(&self) -> Result<Vec<ScenarioConfig>> {
        let settings: Vec<Dispersion> = match self.layout {
            Layout::Table1 => self.phi.iter().map(|&phi| Dispersion::Fixed { phi }).collect(),
            Layout::Table2 | Layout::Table3 => self
                .lambda
                .iter()
                .map(|&lambda| Dispersion::Varying { lambda })
                .collect(),
        };
        let mut cells = Vec::new();
        for &mu_range in &self.mu_range {
            for &n in &self.n {
                for &scenario in &self.scenarios {
                    for &dispersion in &settings {
                        let mut cell = ScenarioConfig::new(self.layout, scenario, n, mu_range, dispersion)?;
                        cell.replications = self.replications;
                        cell.seed = self.seed;
                        cell.covariate_law = self.covariate_law;
                        cell.replicate_covariate_block = self.replicate_covariate_block;
                        cell.phi_floor = self.phi_floor;
                        cell.validate()?;
                        cells.push(cell);
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Config("grid has no cells".into()));
        }
        Ok(cells)
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config(format!("key '{key}' needs at least one value")));
    }
    items.iter().map(|s| scalar(key, s)).collect()
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{}' for key '{key}'", value.trim())))
}

/// Parses a grid file. Unknown or repeated keys are errors naming the key.
pub fn parse_grid(text: &str) -> Result<GridConfig> {
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected 'key = value'", number + 1)));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key '{key}' on line {}", number + 1)));
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Config(format!("key '{key}' given twice")));
        }
        entries.push((key.to_string(), value.trim().to_string()));
    }
    let layout = match entries.iter().find(|(k, _)| k == "layout") {
        Some((_, v)) => v.parse()?,
        None => Layout::Table1,
    };
    let mut grid = GridConfig::new(layout);
    for (key, value) in &entries {
        match key.as_str() {
            "layout" => {}
            "n" => grid.n = list(key, value)?,
            "mu_range" => grid.mu_range = list(key, value)?,
            "phi" => grid.phi = list(key, value)?,
            "lambda" => grid.lambda = list(key, value)?,
            "scenarios" => grid.scenarios = list(key, value)?,
            "covariate_law" => grid.covariate_law = value.parse()?,
            "replications" => grid.replications = scalar(key, value)?,
            "seed" => grid.seed = scalar(key, value)?,
            "replicate_covariate_block" => grid.replicate_covariate_block = scalar(key, value)?,
            "phi_floor" => grid.phi_floor = scalar(key, value)?,
            _ => unreachable!("keys are checked above"),
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_grid() {
        let grid = parse_grid(
            "# table one\nlayout = table1\nn = 40, 80,120\nmu_range = mid, high\nphi = 50,148\n\
             scenarios = 4\nreplications = 12 # small\nseed = 3\ncovariate_law = uniform01\n\
             replicate_covariate_block = false\n",
        )
        .unwrap();
        assert_eq!(grid.n, vec![40, 80, 120]);
        assert_eq!(grid.mu_range, vec![MuRange::Mid, MuRange::High]);
        assert_eq!(grid.phi, vec![50.0, 148.0]);
        assert_eq!(grid.replications, 12);
        assert!(!grid.replicate_covariate_block);
        let cells = grid.expand().unwrap();
        assert_eq!(cells.len(), 2 * 3 * 2);
        assert!(cells.iter().all(|c| c.seed == 3 && c.replications == 12));
    }

    #[test]
    fn defaults_follow_layout() {
        let grid = parse_grid("layout = table2").unwrap();
        assert_eq!(grid.scenarios, vec![5, 6, 7, 8]);
        assert_eq!(grid.expand().unwrap().len(), 12);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_grid("n = 40\nreplicates = 10\n").unwrap_err().to_string();
        assert!(err.contains("replicates"), "{err}");
        let err = parse_grid("n = forty").unwrap_err().to_string();
        assert!(err.contains("'n'"), "{err}");
        assert!(parse_grid("n = 40\nn = 80").is_err());
        assert!(parse_grid("just words").is_err());
        assert!(parse_grid("layout = table1\nscenarios = 6").unwrap().expand().is_err());
    }
}
