//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bohr::DEFAULT_ENUM_CAP;
use crate::error::{Error, Result};
use crate::gowers::DEFAULT_TERM_CAP;
use crate::khintchine::ToyParams;
use crate::rational::{parse_rational, Rational};
use crate::verify::SuiteOptions;

/// Environment variable overriding [`RunConfig::seed`].
pub const SEED_ENV: &str = "GBLAB_SEED";

/// Sweep grids; empty lists fall back to each suite's default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub primes: Vec<u64>,
    pub ranks: Vec<usize>,
    /// Radii as `"num/den"` or decimal strings.
    pub radii: Vec<String>,
    pub trials: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub enum_cap: u64,
    pub term_cap: u64,
    pub toy: ToyParams,
    pub grids: Grids,
    /// Reports go to stdout when unset.
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            enum_cap: DEFAULT_ENUM_CAP,
            term_cap: DEFAULT_TERM_CAP,
            toy: ToyParams::default(),
            grids: Grids::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))?;
        cfg.toy.check()?;
        cfg.radii()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid("config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies `GBLAB_SEED` when set.
    pub fn with_env(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(SEED_ENV, format!("not a 64-bit seed: {v:?}")))?;
        }
        Ok(self)
    }

    pub fn radii(&self) -> Result<Vec<Rational>> {
        self.grids.radii.iter().map(|r| parse_rational(r)).collect()
    }

    pub fn suite_options(&self) -> Result<SuiteOptions> {
        let g = &self.grids;
        let nonempty = |v: &Vec<u64>| (!v.is_empty()).then(|| v.clone());
        let radii = self.radii()?;
        Ok(SuiteOptions {
            primes: nonempty(&g.primes),
            ranks: (!g.ranks.is_empty()).then(|| g.ranks.clone()),
            radii: (!radii.is_empty()).then_some(radii),
            trials: g.trials,
            seed: self.seed,
        })
    }
}
