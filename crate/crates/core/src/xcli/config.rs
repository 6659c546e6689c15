//! Experiment configuration: a single TOML file with one `[[policy]]` table
//! per policy. The resolved configuration is echoed next to the results and
//! parses back to an identical value.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, SizeAssignment, DEFAULT_ID_SEED};
use crate::error::{Error, Result};
use crate::policies::{GammaHat, PolicyKind};
use crate::spo::{Solver, DEFAULT_TIMEOUT};

/// Cache share of the total content size used at every point of a `files`
/// sweep, in percent.
pub const FILES_SWEEP_CACHE_PERCENT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    None,
    Gamma,
    /// Grid values are percentages of the total content size.
    CacheSize,
    Users,
    Files,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Gamma => "gamma",
            SweepAxis::CacheSize => "cache_size",
            SweepAxis::Users => "users",
            SweepAxis::Files => "files",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SweepAxis::None),
            "gamma" => Ok(SweepAxis::Gamma),
            "cache_size" | "cache-size" => Ok(SweepAxis::CacheSize),
            "users" => Ok(SweepAxis::Users),
            "files" => Ok(SweepAxis::Files),
            other => Err(Error::Config(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// Which accumulated reward the `acc_reward` rows and the time-evolution
/// chart report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardBasis {
    #[default]
    Expected,
    Realized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSpec {
    /// `(size, count)` pairs.
    pub classes: Vec<(u32, usize)>,
    #[serde(default)]
    pub assignment: SizeAssignment,
    #[serde(default = "default_id_seed")]
    pub id_seed: u64,
}

fn default_id_seed() -> u64 {
    DEFAULT_ID_SEED
}

impl CatalogSpec {
    pub fn files(&self) -> usize {
        self.classes.iter().map(|&(_, c)| c).sum()
    }

    pub fn build(&self) -> Result<Catalog> {
        Catalog::new(&self.classes, self.assignment, self.id_seed)
    }

    /// Same sizes, `files` files spread as evenly as possible over the
    /// classes (earlier classes take the remainder).
    pub fn with_files(&self, files: usize) -> Result<Self> {
        let k = self.classes.len();
        if files < k {
            return Err(Error::Config(format!(
                "{files} files cannot populate {k} size classes"
            )));
        }
        let classes = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, &(s, _))| (s, files / k + usize::from(i < files % k)))
            .collect();
        Ok(CatalogSpec {
            classes,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaHatSpec {
    Fixed(f64),
    /// `"fit"`: least-squares fit after warm-up.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// One of cucb, mcucb, eps_greedy, iub, myopic, random.
    pub kind: String,
    /// Column label in outputs; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// MCUCB exponent; defaults to the scenario's true gamma.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_hat: Option<GammaHatSpec>,
    #[serde(default = "default_solver")]
    pub solver: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    /// CSV with one prior reward estimate per file, skipping warm-up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_csv: Option<PathBuf>,
}

fn default_solver() -> String {
    "greedy".into()
}

fn default_timeout_secs() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

impl PolicyConfig {
    pub fn new(kind: &str) -> Self {
        PolicyConfig {
            kind: kind.into(),
            label: None,
            epsilon: None,
            gamma_hat: None,
            solver: default_solver(),
            timeout_secs: default_timeout_secs(),
            prior_csv: None,
        }
    }

    pub fn labelled(mut self, label: &str) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_solver(mut self, solver: &str) -> Self {
        self.solver = solver.into();
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.clone())
    }

    pub fn solver(&self) -> Result<Solver> {
        if !(self.timeout_secs > 0.0) || !self.timeout_secs.is_finite() {
            return Err(Error::Config(format!("timeout {} must be positive", self.timeout_secs)));
        }
        Solver::parse(&self.solver, Duration::from_secs_f64(self.timeout_secs))
    }

    pub fn is_learning(&self) -> bool {
        matches!(self.kind.as_str(), "cucb" | "mcucb" | "eps_greedy" | "eps-greedy")
    }

    /// Runtime policy kind for a scenario with true exponent `gamma`.
    pub fn kind(&self, gamma: f64, theta: &[f64]) -> Result<PolicyKind<f64>> {
        Ok(match self.kind.as_str() {
            "cucb" => PolicyKind::Cucb,
            "mcucb" => PolicyKind::Mcucb {
                gamma_hat: match &self.gamma_hat {
                    None => GammaHat::Fixed(gamma),
                    Some(GammaHatSpec::Fixed(g)) if *g >= 0.0 => GammaHat::Fixed(*g),
                    Some(GammaHatSpec::Named(s)) if s == "fit" => GammaHat::Fitted,
                    Some(other) => {
                        return Err(Error::Config(format!("invalid gamma_hat {other:?}")))
                    }
                },
            },
            "eps_greedy" | "eps-greedy" => {
                let epsilon = self
                    .epsilon
                    .ok_or_else(|| Error::Config("eps_greedy needs `epsilon`".into()))?;
                if !(0.0..=1.0).contains(&epsilon) {
                    return Err(Error::Config(format!("epsilon {epsilon} outside [0, 1]")));
                }
                PolicyKind::EpsGreedy { epsilon }
            }
            "iub" => PolicyKind::Iub {
                theta: theta.to_vec(),
            },
            "myopic" => PolicyKind::Myopic,
            "random" => PolicyKind::Random,
            other => return Err(Error::Config(format!("unknown policy kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Write per-period `trace_<policy>.csv` series.
    #[serde(default)]
    pub trace: bool,
    #[serde(default)]
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub gamma: f64,
    pub users: u32,
    /// Cache capacity `M` in size units.
    pub cache_size: u64,
    pub horizon: u64,
    pub burn_in: u64,
    pub replications: usize,
    pub master_seed: u64,
    /// Worker threads for replications; 0 uses every core.
    #[serde(default)]
    pub parallelism: usize,
    /// Report regret and accumulated reward every this many periods; 0 only
    /// reports the final period.
    #[serde(default)]
    pub checkpoint_every: u64,
    #[serde(default)]
    pub reward_basis: RewardBasis,
    #[serde(default = "default_timeout_secs")]
    pub oracle_timeout_secs: f64,
    pub catalog: CatalogSpec,
    pub sweep: SweepSpec,
    #[serde(default, rename = "policy")]
    pub policies: Vec<PolicyConfig>,
    pub output: OutputSpec,
}

/// One fully determined grid point of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Value on the sweep axis; `None` when not sweeping.
    pub value: Option<f64>,
    pub gamma: f64,
    pub users: u32,
    pub cache_size: u64,
    pub catalog: CatalogSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    pub fn oracle_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.oracle_timeout_secs)
    }

    pub fn checkpoints(&self) -> Vec<u64> {
        let mut cps: Vec<u64> = if self.checkpoint_every == 0 {
            Vec::new()
        } else {
            (1..=self.horizon / self.checkpoint_every)
                .map(|k| k * self.checkpoint_every)
                .collect()
        };
        if cps.last() != Some(&self.horizon) {
            cps.push(self.horizon);
        }
        cps
    }

    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let base = SweepPoint {
            value: None,
            gamma: self.gamma,
            users: self.users,
            cache_size: self.cache_size,
            catalog: self.catalog.clone(),
        };
        if self.sweep.axis == SweepAxis::None {
            return Ok(vec![base]);
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config(format!(
                "sweep over {} needs at least one value",
                self.sweep.axis.name()
            )));
        }
        self.sweep
            .values
            .iter()
            .map(|&v| {
                let mut p = base.clone();
                p.value = Some(v);
                match self.sweep.axis {
                    SweepAxis::None => unreachable!(),
                    SweepAxis::Gamma => p.gamma = v,
                    SweepAxis::Users => p.users = positive_integer(v, "users")? as u32,
                    SweepAxis::CacheSize => {
                        p.cache_size = percent_of(v, p.catalog.build()?.total_size())?;
                    }
                    SweepAxis::Files => {
                        p.catalog = self.catalog.with_files(positive_integer(v, "files")? as usize)?;
                        p.cache_size =
                            percent_of(FILES_SWEEP_CACHE_PERCENT, p.catalog.build()?.total_size())?;
                    }
                }
                Ok(p)
            })
            .collect()
    }

    /// Checks everything that can be checked before any episode runs.
    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::Config("policy list is empty".into()));
        }
        if self.users == 0 {
            return Err(Error::Config("users must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.burn_in >= self.horizon {
            return Err(Error::Config(format!(
                "burn-in {} must be shorter than the horizon {}",
                self.burn_in, self.horizon
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Config("gamma must be nonnegative".into()));
        }
        if !(self.oracle_timeout_secs > 0.0) {
            return Err(Error::Config("oracle timeout must be positive".into()));
        }
        let mut labels: Vec<String> = self.policies.iter().map(PolicyConfig::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("policy labels must be unique".into()));
        }
        for p in &self.policies {
            p.solver()?;
            p.kind(self.gamma, &[])?;
        }
        let learning = self.policies.iter().any(PolicyConfig::is_learning);
        for point in self.points()? {
            if !(point.gamma >= 0.0) || point.users == 0 {
                return Err(Error::Config(format!("invalid sweep point {:?}", point.value)));
            }
            let catalog = point.catalog.build()?;
            if learning && point.cache_size < catalog.largest_size() as u64 {
                return Err(Error::CapacityBelowLargestFile {
                    capacity: point.cache_size,
                    largest: catalog.largest_size(),
                });
            }
        }
        Ok(())
    }
}

fn positive_integer(v: f64, what: &str) -> Result<u64> {
    if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as u64)
    } else {
        Err(Error::Config(format!("{what} must be a positive integer, got {v}")))
    }
}

fn percent_of(percent: f64, total: u64) -> Result<u64> {
    if !(percent > 0.0) || !percent.is_finite() {
        return Err(Error::Config(format!("cache size {percent}% must be positive")));
    }
    Ok((percent / 100.0 * total as f64).round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xcli::presets::{preset, PRESETS};

    #[test]
    fn echo_round_trip() {
        for name in PRESETS {
            let cfg = preset(name, 0.01, None, Path::new("out")).unwrap();
            let text = cfg.to_toml();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg, "{name}");
        }
    }

    #[test]
    fn files_sweep_rebinds_cache() {
        let cfg = preset("fig6_files", 0.01, None, Path::new("out")).unwrap();
        for p in cfg.points().unwrap() {
            let total = p.catalog.build().unwrap().total_size();
            assert_eq!(p.catalog.files() as f64, p.value.unwrap());
            assert!((p.cache_size as f64 / total as f64 - 0.05).abs() < 0.01);
        }
    }

    #[test]
    fn cache_sweep_uses_percentages() {
        let cfg = preset("fig4_cache", 0.01, None, Path::new("out")).unwrap();
        let sizes: Vec<u64> = cfg.points().unwrap().iter().map(|p| p.cache_size).collect();
        assert_eq!(sizes, vec![50, 125, 250, 500, 1000]);
    }

    #[test]
    fn checkpoints_end_at_horizon() {
        let mut cfg = preset("fig1_convergence", 0.01, None, Path::new("out")).unwrap();
        cfg.horizon = 250;
        cfg.checkpoint_every = 100;
        assert_eq!(cfg.checkpoints(), vec![100, 200, 250]);
        cfg.checkpoint_every = 0;
        assert_eq!(cfg.checkpoints(), vec![250]);
    }

    #[test]
    fn validation_errors() {
        let base = preset("fig3_gamma", 0.01, None, Path::new("out")).unwrap();
        let mut cfg = base.clone();
        cfg.policies.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = base.clone();
        cfg.sweep = SweepSpec {
            axis: SweepAxis::None,
            values: vec![],
        };
        cfg.cache_size = 5;
        assert!(matches!(cfg.validate(), Err(Error::CapacityBelowLargestFile { .. })));

        let mut cfg = base.clone();
        cfg.burn_in = cfg.horizon;
        assert!(cfg.validate().is_err());

        let mut cfg = base.clone();
        cfg.policies.push(PolicyConfig::new("lru"));
        assert!(cfg.validate().is_err());

        let mut cfg = base;
        cfg.policies.push(PolicyConfig::new("random"));
        assert!(cfg.validate().is_err(), "duplicate label");
    }

    #[test]
    fn gamma_hat_forms() {
        let mut p = PolicyConfig::new("mcucb");
        assert_eq!(
            p.kind(0.7, &[]).unwrap(),
            PolicyKind::Mcucb {
                gamma_hat: GammaHat::Fixed(0.7)
            }
        );
        p.gamma_hat = Some(GammaHatSpec::Named("fit".into()));
        assert_eq!(
            p.kind(0.7, &[]).unwrap(),
            PolicyKind::Mcucb {
                gamma_hat: GammaHat::Fitted
            }
        );
        p.gamma_hat = Some(GammaHatSpec::Named("guess".into()));
        assert!(p.kind(0.7, &[]).is_err());
    }
}
