//! Scenario configuration: one flat TOML document per run.
//!
//! ```toml
//! g = 0.5
//! h = 1.0
//! sigma = 0.7071067811865476
//! x1 = 1.0
//! x2 = 0.5
//! horizon = 10.0
//! dt = 1e-3
//! n_paths = 4
//! base_seed = 42
//! outputs = ["path-bundle", "classification"]
//! ```
//!
//! `sigma_sq` may replace `sigma`, and `rho` may be given instead of either.
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamsRecord};
use crate::stationary;

/// Artifacts a scenario can write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    PathBundle,
    Histogram,
    IdentityReport,
    Classification,
    DensityGrid,
}

impl Output {
    pub const ALL: [Output; 5] = [
        Output::PathBundle,
        Output::Histogram,
        Output::IdentityReport,
        Output::Classification,
        Output::DensityGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Output::PathBundle => "path-bundle",
            Output::Histogram => "histogram",
            Output::IdentityReport => "identity-report",
            Output::Classification => "classification",
            Output::DensityGrid => "density-grid",
        }
    }
}

impl std::str::FromStr for Output {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Output::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown output `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Zero test for `G` when cutting excursions.
    pub zero_tol: f64,
    /// `R1` level that counts as reaching the corner.
    pub eps_corner: f64,
    /// Band width of the local-time estimator.
    pub lt_epsilon: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            zero_tol: 0.0,
            eps_corner: 0.01,
            lt_epsilon: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ModelParams,
    pub horizon: f64,
    pub dt: f64,
    pub burn_in: f64,
    pub n_paths: u64,
    pub base_seed: u64,
    pub outputs: Vec<Output>,
    pub thresholds: Thresholds,
    /// Grid points between kept invariant samples.
    pub stride: usize,
    pub bins: usize,
}

/// The on-disk form of a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRecord {
    pub g: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_sq: Option<f64>,
    pub x1: f64,
    pub x2: f64,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "one")]
    pub n_paths: u64,
    pub base_seed: u64,
    #[serde(default)]
    pub outputs: Vec<Output>,
    #[serde(default)]
    pub zero_tol: f64,
    #[serde(default = "default_eps")]
    pub eps_corner: f64,
    #[serde(default = "default_eps")]
    pub lt_epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn one() -> u64 {
    1
}

fn default_eps() -> f64 {
    0.01
}

fn default_bins() -> usize {
    40
}

impl Scenario {
    pub fn new(params: ModelParams, horizon: f64, dt: f64, n_paths: u64, base_seed: u64) -> Result<Self> {
        let s = Self {
            params,
            horizon,
            dt,
            burn_in: 0.0,
            n_paths,
            base_seed,
            outputs: Vec::new(),
            thresholds: Thresholds::default(),
            stride: if dt > 0.0 { stationary::default_stride(dt) } else { 1 },
            bins: default_bins(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(Error::param(
                "horizon",
                format!("must be at least dt, got {}", self.horizon),
            ));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.horizon) {
            return Err(Error::param(
                "burn_in",
                format!("must lie in [0, horizon), got {}", self.burn_in),
            ));
        }
        if self.n_paths == 0 {
            return Err(Error::param("n_paths", "must be at least 1"));
        }
        // manifests store seeds as TOML integers
        if self.base_seed > i64::MAX as u64 {
            return Err(Error::param(
                "base_seed",
                format!("must be at most {}, got {}", i64::MAX, self.base_seed),
            ));
        }
        let t = &self.thresholds;
        if !(t.zero_tol >= 0.0) {
            return Err(Error::param("zero_tol", format!("must be >= 0, got {}", t.zero_tol)));
        }
        if !(t.eps_corner > 0.0) {
            return Err(Error::param(
                "eps_corner",
                format!("must be positive, got {}", t.eps_corner),
            ));
        }
        if !(t.lt_epsilon > 0.0) {
            return Err(Error::param(
                "lt_epsilon",
                format!("must be positive, got {}", t.lt_epsilon),
            ));
        }
        if self.stride == 0 || self.bins == 0 {
            return Err(Error::param("stride", "stride and bins must be at least 1"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let r: ScenarioRecord = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        Self::try_from(r)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_record(&self) -> ScenarioRecord {
        let p = self.params;
        ScenarioRecord {
            g: p.g(),
            h: p.h(),
            rho: Some(p.rho()),
            sigma: Some(p.sigma()),
            sigma_sq: None,
            x1: p.x1(),
            x2: p.x2(),
            horizon: self.horizon,
            dt: self.dt,
            burn_in: self.burn_in,
            n_paths: self.n_paths,
            base_seed: self.base_seed,
            outputs: self.outputs.clone(),
            zero_tol: self.thresholds.zero_tol,
            eps_corner: self.thresholds.eps_corner,
            lt_epsilon: self.thresholds.lt_epsilon,
            stride: Some(self.stride),
            bins: self.bins,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_record()).expect("scenario record is plain data")
    }
}

impl TryFrom<ScenarioRecord> for Scenario {
    type Error = Error;

    fn try_from(r: ScenarioRecord) -> Result<Self> {
        let sigma = match (r.sigma, r.sigma_sq) {
            (Some(_), Some(_)) => return Err(Error::Config("give sigma or sigma_sq, not both".into())),
            (s, None) => s,
            (None, Some(s2)) if s2 >= 0.0 => Some(s2.sqrt()),
            (None, Some(s2)) => return Err(Error::param("sigma_sq", format!("must be >= 0, got {s2}"))),
        };
        let params = ModelParams::try_from(ParamsRecord {
            g: r.g,
            h: r.h,
            rho: r.rho,
            sigma,
            x1: r.x1,
            x2: r.x2,
        })?;
        let s = Scenario {
            params,
            horizon: r.horizon,
            dt: r.dt,
            burn_in: r.burn_in,
            n_paths: r.n_paths,
            base_seed: r.base_seed,
            outputs: r.outputs,
            thresholds: Thresholds {
                zero_tol: r.zero_tol,
                eps_corner: r.eps_corner,
                lt_epsilon: r.lt_epsilon,
            },
            stride: match r.stride {
                Some(s) => s,
                None if r.dt > 0.0 => stationary::default_stride(r.dt),
                None => 1,
            },
            bins: r.bins,
        };
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
g = 0.5
h = 1.0
sigma_sq = 0.5
x1 = 1.0
x2 = 0.5
horizon = 2.0
dt = 1e-3
base_seed = 7
outputs = ["path-bundle", "density-grid"]
"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_toml(BASIC).unwrap();
        assert_eq!(s.n_paths, 1);
        assert!((s.params.sigma_sq() - 0.5).abs() < 1e-15);
        assert_eq!(s.outputs, vec![Output::PathBundle, Output::DensityGrid]);
        assert_eq!(s.thresholds, Thresholds::default());
        assert_eq!(s.stride, 1000);
    }

    #[test]
    fn round_trips() {
        let s = Scenario::from_toml(BASIC).unwrap();
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_typos_and_bad_values() {
        let typo = BASIC.replace("horizon", "horizn");
        assert!(matches!(Scenario::from_toml(&typo), Err(Error::Config(_))));
        let extra = format!("{BASIC}\nfoo = 1\n");
        assert!(matches!(Scenario::from_toml(&extra), Err(Error::Config(_))));
        let both = format!("{BASIC}\nsigma = 0.5\n");
        assert!(Scenario::from_toml(&both).is_err());
        let burn = format!("{BASIC}\nburn_in = 5.0\n");
        assert!(Scenario::from_toml(&burn).is_err());
        let zero = format!("{BASIC}\nn_paths = 0\n");
        assert!(Scenario::from_toml(&zero).is_err());
        let out = BASIC.replace("density-grid", "plot");
        assert!(Scenario::from_toml(&out).is_err());
    }

    #[test]
    fn output_names_parse() {
        for o in Output::ALL {
            assert_eq!(o.name().parse::<Output>().unwrap(), o);
        }
    }
}
