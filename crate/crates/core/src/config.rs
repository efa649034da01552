//! The JSON run configuration shared by the CLI subcommands.
//!
//! ```json
//! {
//!   "forms": [[1, 0], [0, 1], [1, 1]],
//!   "region": {"kind": "rect", "x": [0, 1], "y": [0, 1]},
//!   "grid": {"start": 1024, "stop": 131072, "factor": 2},
//!   "experiment": "theorem1"
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentName, GridSpec};
use crate::forms::{FormTriple, Region, RegionSpec};
use crate::series::DEFAULT_PRIME_CUT;
use crate::sums::{RegionFamily, ValuePolicy};

/// Either explicit values or a geometric progression `start, start·factor, … ≤ stop`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    /// Exponent for derived parameters, e.g. `H = ⌈X^α⌉`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<GridSpec> {
        let grid = match (&self.values, self.start, self.stop, self.factor) {
            (Some(v), None, None, None) => GridSpec::new(v.clone()),
            (None, Some(a), Some(b), f) => GridSpec::geometric(a, b, f.unwrap_or(2.0)),
            _ => Err(Error::Config(
                "grid needs either \"values\" or \"start\"/\"stop\" (with optional \"factor\")".into(),
            )),
        }?;
        Ok(grid.with_alpha(self.alpha))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forms: Option<FormTriple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prime_cut: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// `(T₁, T₂, T₃)` for `M(T)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<[u64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "D")]
    pub dd: Option<[u64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<RegionFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<ValuePolicy>,
    /// Primes for `sigma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primes: Option<Vec<u64>>,
    /// Triples for `identity-check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triples: Option<Vec<[u64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn validate(&self) -> Result<()> {
        self.region()?;
        if let Some(g) = &self.grid {
            g.to_grid().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.prime_cut.is_some_and(|p| p < 2) {
            return Err(Error::Config("prime_cut must be at least 2".into()));
        }
        Ok(())
    }

    /// Configured forms, defaulting to `(x₁, x₂, x₁+x₂)`.
    pub fn forms(&self) -> FormTriple {
        self.forms.clone().unwrap_or_else(FormTriple::coordinate_sum)
    }

    /// Configured region, defaulting to the unit square.
    pub fn region(&self) -> Result<Region> {
        match &self.region {
            Some(spec) => Region::from_spec(spec.clone()).map_err(|e| Error::Config(format!("region: {e}"))),
            None => Ok(Region::unit_square()),
        }
    }

    pub fn prime_cut(&self) -> u64 {
        self.prime_cut.unwrap_or(DEFAULT_PRIME_CUT)
    }

    pub fn grid(&self) -> Result<Option<GridSpec>> {
        self.grid.as_ref().map(GridConfig::to_grid).transpose()
    }
}
